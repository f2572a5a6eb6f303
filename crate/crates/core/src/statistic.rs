//! The banded quadratic-form ANOVA statistic.
//!
//! For group `k` the within-group term sums `x_{t1}ᵀ x_{t2}` over ordered
//! pairs with `B <= |t1 - t2| <= B1`, normalised by the pair count
//! `V = (2T - B - B1)(B1 - B + 1)`. The cross term against group 1 uses
//! all pairs. Lags below `B` carry the autocovariance bias of dependent
//! data; lags above `B1` are dropped so the product series stays short
//! memory.
//!
//! Within-group sums are evaluated with a sliding window: for each `t` the
//! running vector `W_t = sum_{s = max(1, t - B1)}^{t - B} x_s` is updated
//! in O(d), and the ordered-pair total is `2 * sum_t x_tᵀ W_t`. This turns
//! the O(T^2 d) double loop into O(T d).

use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{AnovaError, Result};
use crate::panel::{center_pooled, compensated_sum, Panel};

/// Lag band `B <= |t1 - t2| <= B1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BandConfig {
    #[serde(rename = "B")]
    pub lower: usize,
    #[serde(rename = "B1")]
    pub upper: usize,
}

impl BandConfig {
    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if lower < 1 || upper <= lower {
            return Err(AnovaError::BandwidthError(format!(
                "need 1 <= B < B1, got B = {lower}, B1 = {upper}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Naive band `B = 1`, `B1 = T - 1`, which sums over every `t1 != t2`.
    pub fn naive(t: usize) -> Result<Self> {
        Self::new(1, t.saturating_sub(1))
    }

    /// `B1 - B`.
    pub fn width(&self) -> usize {
        self.upper - self.lower
    }

    /// Check `1 <= B < B1 <= T - 1`.
    pub fn check(&self, t: usize) -> Result<()> {
        if self.lower < 1 || self.upper <= self.lower || self.upper + 1 > t {
            return Err(AnovaError::BandwidthError(format!(
                "band (B = {}, B1 = {}) is invalid for a series of length {t}",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Clamp `B1` to `t_min - 1`. Fails when the clamped band is empty.
    pub fn clamp_to(&self, t_min: usize) -> Result<Self> {
        let cap = t_min.saturating_sub(1);
        if self.upper <= cap {
            return Ok(*self);
        }
        warn!(
            requested = self.upper,
            effective = cap,
            "B1 exceeds min_k T_k - 1; clamping"
        );
        Self::new(self.lower, cap)
    }
}

/// Value of the statistic for a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    /// `R = sum_{k >= 2} R_k`.
    pub rhat: f64,
    /// `R_k` for `k = 2..K`, in group order.
    pub per_group: Vec<f64>,
    /// `sqrt(T_min (B1 - B)) * R`, the scale on which the bootstrap law lives.
    pub scaled: f64,
    /// Effective band after clamping.
    pub band: BandConfig,
    /// `min_k T_k`.
    pub t_min: usize,
}

/// Number of ordered pairs `(t1, t2)` in `1..=T` with `B <= |t1 - t2| <= B1`.
pub fn pair_count(t: usize, band: BandConfig) -> Result<u64> {
    band.check(t)?;
    let (t, b, b1) = (t as u64, band.lower as u64, band.upper as u64);
    Ok((2 * t - b - b1) * (b1 - b + 1))
}

/// `theta_t = x_tᵀ sum_{s = max(1, t - B1)}^{t - B} x_s` for `t = B+1..T`.
///
/// Entry `i` of the result corresponds to time `t = B + 1 + i`.
pub(crate) fn window_dots(x: ArrayView2<'_, f64>, band: BandConfig) -> Vec<f64> {
    let t_len = x.nrows();
    let (b, b1) = (band.lower, band.upper);
    let mut window = Array1::<f64>::zeros(x.ncols());
    let mut out = Vec::with_capacity(t_len.saturating_sub(b));
    // zero-based: for row t the window spans rows max(0, t - b1) ..= t - b
    for t in b..t_len {
        window += &x.row(t - b);
        if t > b1 {
            window -= &x.row(t - b1 - 1);
        }
        out.push(x.row(t).dot(&window));
    }
    out
}

/// Ordered-pair banded sum `sum_{B <= |t1 - t2| <= B1} x_{t1}ᵀ x_{t2}`.
pub fn banded_cross_sum(x: ArrayView2<'_, f64>, band: BandConfig) -> Result<f64> {
    band.check(x.nrows())?;
    Ok(2.0 * window_dots(x, band).iter().sum::<f64>())
}

fn column_sums(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.axis_iter(Axis(1))
        .map(|c| compensated_sum(c.iter().copied()))
        .collect()
}

/// Unscaled cross-group double sum `sum_{t1} sum_{t2} x_{t1,k}ᵀ x_{t2,1}`.
pub fn cross_group_sum(xk: ArrayView2<'_, f64>, x1: ArrayView2<'_, f64>) -> Result<f64> {
    if xk.ncols() != x1.ncols() {
        return Err(AnovaError::ShapeMismatch(format!(
            "groups have {} and {} columns",
            xk.ncols(),
            x1.ncols()
        )));
    }
    Ok(column_sums(xk).dot(&column_sums(x1)))
}

/// `S / (V sqrt(d))` for one group, the normalised within-group term.
pub(crate) fn normalised_within(x: ArrayView2<'_, f64>, band: BandConfig) -> Result<f64> {
    let v = pair_count(x.nrows(), band)? as f64;
    let d = x.ncols() as f64;
    Ok(banded_cross_sum(x, band)? / v / d.sqrt())
}

/// `R_k` for group `xk` against the reference group `x1`.
pub fn rhat_k(xk: ArrayView2<'_, f64>, x1: ArrayView2<'_, f64>, band: BandConfig) -> Result<f64> {
    let cross = cross_group_sum(xk, x1)?;
    let within_k = normalised_within(xk, band)?;
    let within_1 = normalised_within(x1, band)?;
    let norm = (xk.nrows() * x1.nrows()) as f64 * (xk.ncols() as f64).sqrt();
    Ok(within_k + within_1 - 2.0 * cross / norm)
}

/// `R = sum_{k = 2}^K R_k` on the panel centred at its grand mean, with
/// `B1` clamped to `min_k T_k - 1`.
pub fn rhat(panel: &Panel, band: BandConfig) -> Result<StatisticValue> {
    let centered = center_pooled(panel);
    let panel = &centered;
    let t_min = panel.min_len();
    let band = band.clamp_to(t_min)?;
    let x1 = panel.group(0);
    let d_sqrt = (panel.dim() as f64).sqrt();

    let within_1 = normalised_within(x1, band)?;
    let sums_1 = column_sums(x1);
    let t1 = x1.nrows() as f64;

    let mut per_group = Vec::with_capacity(panel.n_groups() - 1);
    for k in 1..panel.n_groups() {
        let xk = panel.group(k);
        let within_k = normalised_within(xk, band)?;
        let cross = column_sums(xk).dot(&sums_1);
        per_group.push(within_k + within_1 - 2.0 * cross / (xk.nrows() as f64 * t1 * d_sqrt));
    }
    let rhat: f64 = per_group.iter().sum();
    let scaled = scale_factor(t_min, band) * rhat;
    Ok(StatisticValue {
        rhat,
        per_group,
        scaled,
        band,
        t_min,
    })
}

/// `sqrt(T_min (B1 - B))`.
pub fn scale_factor(t_min: usize, band: BandConfig) -> f64 {
    ((t_min * band.width()) as f64).sqrt()
}
