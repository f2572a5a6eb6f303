//! Data-driven bandwidths.
//!
//! `(B, B1)` are chosen by comparing a pilot statistic `Z_k`, computed on
//! the full series at a fixed pilot band, with the same statistic
//! `Z†_k(B, B1)` computed on the leading `floor(beta T_k)` rows at the
//! shrunken band `(floor(beta B), floor(beta B1))`. The pair minimising
//! `sum_k |Z_k - Z†_k(B, B1)|` wins; ties go to the smaller `B`, then the
//! smaller `B1`.
//!
//! The bootstrap bandwidth `H` is the Politis-White automatic block length
//! (with the Patton-Politis-White correction, stationary-bootstrap variant)
//! of all second-order residuals concatenated into one scalar series.

use ndarray::{s, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{AnovaError, Result};
use crate::panel::{center_pooled, Panel};
use crate::statistic::{normalised_within, BandConfig};
use crate::variance::SecondOrderResiduals;

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_PILOT: (usize, usize) = (10, 15);
/// Offsets added to each candidate `B` to form the `B1` candidates.
pub const UPPER_OFFSETS: [usize; 5] = [3, 5, 8, 13, 21];

/// Candidate grid and pilot settings for [`select_bands`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandGrid {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub beta: f64,
    pub pilot: BandConfig,
}

impl BandGrid {
    pub fn new(mut lower: Vec<usize>, mut upper: Vec<usize>, beta: f64, pilot: BandConfig) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(AnovaError::InvalidArgument(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        if lower.contains(&0) || upper.contains(&0) {
            return Err(AnovaError::InvalidArgument("bandwidth candidates must be >= 1".into()));
        }
        lower.sort_unstable();
        lower.dedup();
        upper.sort_unstable();
        upper.dedup();
        Ok(Self {
            lower,
            upper,
            beta,
            pilot,
        })
    }

    /// Default grid for a panel whose shortest group has `t_min` rows.
    ///
    /// `B` runs from 2 to `t_min / 3` in steps of `ceil(t_min^(1/6) / 2)`;
    /// the `B1` candidates are every `B + {3, 5, 8, 13, 21}` capped at
    /// `t_min - 1`. The subsample only sees lags `floor(beta B)`, so `B`
    /// must reach well past the dependence range for the shrunken band to
    /// be bias free.
    pub fn default_for(t_min: usize) -> Self {
        let tf = t_min as f64;
        let step = ((tf.powf(1.0 / 6.0) / 2.0).ceil() as usize).max(1);
        let top = (t_min / 3).max(2);
        let lower: Vec<usize> = (2..=top).step_by(step).collect();
        let cap = t_min.saturating_sub(1).max(1);
        let mut upper: Vec<usize> = lower
            .iter()
            .flat_map(|b| UPPER_OFFSETS.iter().map(move |o| (b + o).min(cap)))
            .collect();
        upper.sort_unstable();
        upper.dedup();
        Self {
            lower,
            upper,
            beta: DEFAULT_BETA,
            pilot: BandConfig {
                lower: DEFAULT_PILOT.0,
                upper: DEFAULT_PILOT.1,
            },
        }
    }

    /// `(B, B1)` pairs with `B1 > B`, in tie-break order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.lower
            .iter()
            .flat_map(move |&b| self.upper.iter().filter(move |&&b1| b1 > b).map(move |&b1| (b, b1)))
    }
}

/// `banded_cross_sum / (V sqrt(d))` at band `(b, b1)`.
pub fn zhat(x: ArrayView2<'_, f64>, b: usize, b1: usize) -> Result<f64> {
    let band = BandConfig::new(b, b1)?;
    normalised_within(x, band)
}

/// Shrunken band and prefix length used by the subsample statistic, or
/// `None` when the candidate has to be skipped.
pub fn subsample_band(t: usize, b: usize, b1: usize, beta: f64) -> Option<(usize, BandConfig)> {
    let t_sub = (beta * t as f64).floor() as usize;
    let lo = (beta * b as f64).floor() as usize;
    let hi = (beta * b1 as f64).floor() as usize;
    if lo < 1 || hi <= lo || hi + 1 > t_sub {
        return None;
    }
    Some((t_sub, BandConfig { lower: lo, upper: hi }))
}

/// `Z†(b, b1)` on the leading `floor(beta T)` rows, or `None` when skipped.
pub fn zhat_subsample(x: ArrayView2<'_, f64>, b: usize, b1: usize, beta: f64) -> Option<f64> {
    let (t_sub, band) = subsample_band(x.nrows(), b, b1, beta)?;
    normalised_within(x.slice(s![..t_sub, ..]), band).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    pub band: BandConfig,
    pub objective: f64,
}

/// Pick `(B, B1)` minimising `sum_k |Z_k - Z†_k(B, B1)|`.
///
/// The panel is centred at its grand mean first, as in [`rhat`](crate::statistic::rhat).
pub fn select_bands(panel: &Panel, grid: &BandGrid) -> Result<BandSelection> {
    let centered = center_pooled(panel);
    let panel = &centered;
    let t_min = panel.min_len();
    let pilots = panel
        .groups()
        .iter()
        .map(|g| normalised_within(g.view(), grid.pilot))
        .collect::<Result<Vec<f64>>>()?;

    let mut best: Option<BandSelection> = None;
    'candidates: for (b, b1) in grid.pairs() {
        if b1 + 1 > t_min {
            continue;
        }
        let mut objective = 0.0;
        for (g, pilot) in panel.groups().iter().zip(&pilots) {
            match zhat_subsample(g.view(), b, b1, grid.beta) {
                Some(z) => objective += (pilot - z).abs(),
                None => continue 'candidates,
            }
        }
        if best.is_none_or(|cur| objective < cur.objective) {
            best = Some(BandSelection {
                band: BandConfig { lower: b, upper: b1 },
                objective,
            });
        }
    }
    best.ok_or(AnovaError::NoAdmissibleBandwidth)
}

/// Flat-top lag window.
fn flat_top(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        1.0
    } else if a <= 1.0 {
        2.0 * (1.0 - a)
    } else {
        0.0
    }
}

/// Two-sided 97.5% normal quantile used for the correlogram cut-off.
const CORRELOGRAM_Z: f64 = 1.959_963_984_540_054;

/// Minimum series length accepted by [`optimal_block_length`].
pub const MIN_BLOCK_SERIES: usize = 20;

/// Politis-White automatic block length for the stationary bootstrap,
/// unclamped except for the usual `ceil(min(3 sqrt(n), n / 3))` ceiling.
pub fn optimal_block_length(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < MIN_BLOCK_SERIES {
        return Err(AnovaError::InvalidArgument(format!(
            "block-length selection needs at least {MIN_BLOCK_SERIES} points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |k: usize| -> f64 {
        centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let r0 = autocov(0);
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(AnovaError::DegenerateInput(
            "series has zero sample variance".into(),
        ));
    }

    let kn = (nf.log10().ceil() as usize).max(5);
    let mmax = (nf.sqrt().ceil() as usize + kn).min(n - 1);
    let bmax = (3.0 * nf.sqrt()).min(nf / 3.0).ceil();
    let crit = CORRELOGRAM_Z * (nf.log10() / nf).sqrt();

    let acov: Vec<f64> = (0..=mmax).map(autocov).collect();
    let significant: Vec<bool> = (1..=mmax).map(|k| (acov[k] / r0).abs() >= crit).collect();

    // first lag m starting a run of kn insignificant autocorrelations
    let run_start = (0..significant.len().saturating_sub(kn - 1))
        .find(|&j| significant[j..j + kn].iter().all(|s| !s))
        .map(|j| j + 1);
    let m_hat = match run_start {
        Some(m) => m,
        None => significant
            .iter()
            .rposition(|&s| s)
            .map_or(1, |j| j + 1),
    };
    let big_m = (2 * m_hat).min(mmax).max(1);

    let mut g_hat = 0.0;
    let mut spec0 = acov[0];
    for k in 1..=big_m {
        let w = flat_top(k as f64 / big_m as f64);
        g_hat += 2.0 * w * k as f64 * acov[k];
        spec0 += 2.0 * w * acov[k];
    }
    let d_sb = 2.0 * spec0 * spec0;
    if !(d_sb > 0.0) {
        return Ok(1.0);
    }
    let b = (2.0 * g_hat * g_hat / d_sb).cbrt() * nf.cbrt();
    Ok(b.min(bmax))
}

/// Bootstrap bandwidth `H` from the concatenated second-order residuals,
/// clamped to `[2, floor(N / 3)]`.
pub fn select_h(sor: &SecondOrderResiduals) -> Result<f64> {
    let x = sor.concatenated();
    let b = optimal_block_length(&x)?;
    let hi = (x.len() / 3) as f64;
    Ok(b.clamp(2.0, hi))
}
