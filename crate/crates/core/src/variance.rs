//! Second-order residuals and the kernel HAC variance diagnostic.
//!
//! The second-order residual of group `k` at time `t` is the windowed dot
//! product `theta_{t,k} = e_{t,k}ᵀ sum_{s=(t-B1) v 1}^{t-B} e_{s,k}` of the
//! demeaned series. The banded within-group sum equals `2 sum_t theta_t`,
//! so a kernel-weighted sum of `theta` products estimates its long-run
//! variance without modelling the dependence. `E[theta_t]` is not
//! subtracted; it is negligible once `B` exceeds the dependence range.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{AnovaError, Result};
use crate::kernel::{Kernel, KernelSpec};
use crate::panel::{demean, Panel, ResidualPanel};
use crate::statistic::{window_dots, BandConfig};

/// Lags beyond the point where the kernel weight falls below this are dropped.
pub const LAG_CUTOFF: f64 = 1e-12;

/// `theta_{t,k}` for `t = B+1..T_k`, per group.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderResiduals {
    pub band: BandConfig,
    pub groups: Vec<Vec<f64>>,
}

impl SecondOrderResiduals {
    pub fn group(&self, k: usize) -> &[f64] {
        &self.groups[k]
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// All groups concatenated in group order.
    pub fn concatenated(&self) -> Vec<f64> {
        self.groups.iter().flatten().copied().collect()
    }
}

/// Windowed residual products for one `T x d` residual matrix.
pub fn group_second_order(res: ArrayView2<'_, f64>, band: BandConfig) -> Result<Vec<f64>> {
    band.check(res.nrows())?;
    Ok(window_dots(res, band))
}

pub fn second_order_residuals(
    res: &ResidualPanel,
    band: BandConfig,
) -> Result<SecondOrderResiduals> {
    let groups = res
        .groups()
        .iter()
        .map(|g| group_second_order(g.view(), band))
        .collect::<Result<Vec<_>>>()?;
    Ok(SecondOrderResiduals { band, groups })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HacEstimate {
    pub value: f64,
    pub scale: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// `(1/scale^2) sum_{t1,t2} K((t1 - t2)/H) theta_{t1} theta_{t2}`, summed by lag.
pub fn hac_variance(theta: &[f64], h: f64, kernel: KernelSpec, scale: f64) -> Result<HacEstimate> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(AnovaError::InvalidArgument(format!("H must be positive, got {h}")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(AnovaError::InvalidArgument(format!(
            "scale must be positive, got {scale}"
        )));
    }
    if theta.is_empty() {
        return Err(AnovaError::InvalidArgument("empty theta sequence".into()));
    }
    let n = theta.len();
    let mut total: f64 = theta.iter().map(|v| v * v).sum();
    for q in 1..n {
        let w = kernel.weight(q as f64 / h);
        if w < LAG_CUTOFF {
            break;
        }
        let cross: f64 = theta[..n - q].iter().zip(&theta[q..]).map(|(a, b)| a * b).sum();
        total += 2.0 * w * cross;
    }
    Ok(HacEstimate {
        value: total / (scale * scale),
        scale,
        h,
    })
}

/// `sqrt(T d (B1 - B))`.
pub fn default_scale(t: usize, d: usize, band: BandConfig) -> f64 {
    ((t * d * band.width()) as f64).sqrt()
}

/// HAC estimate for one group of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupHac {
    /// One-based group id.
    pub group: usize,
    #[serde(flatten)]
    pub estimate: HacEstimate,
}

/// Per-group HAC estimate of `Var(Q_k / S)` where `Q_k` is the banded
/// within-group sum of the demeaned series, `Q_k = sum_t 2 theta_{t,k}`.
///
/// `scale` defaults to `sqrt(T_k d (B1 - B))`.
pub fn diagnose_variance(
    panel: &Panel,
    band: BandConfig,
    h: f64,
    kernel: KernelSpec,
    scale: Option<f64>,
) -> Result<Vec<GroupHac>> {
    let band = band.clamp_to(panel.min_len())?;
    let (_, res) = demean(panel);
    let sor = second_order_residuals(&res, band)?;
    sor.groups
        .iter()
        .enumerate()
        .map(|(k, theta)| {
            let doubled: Vec<f64> = theta.iter().map(|v| 2.0 * v).collect();
            let s = scale.unwrap_or_else(|| default_scale(panel.lengths()[k], panel.dim(), band));
            Ok(GroupHac {
                group: k + 1,
                estimate: hac_variance(&doubled, h, kernel, s)?,
            })
        })
        .collect()
}
