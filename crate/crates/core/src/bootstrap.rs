//! Second-order wild bootstrap calibration of the banded statistic.
//!
//! Each bootstrap replicate multiplies the second-order residuals of every
//! group by a zero-mean Gaussian vector whose covariance is the kernel
//! Gram `K((t1 - t2) / H)`, independently across groups:
//!
//! ```text
//! S*_u = sum_{k>=2} c_k sum_t theta_{t,k} e*_{t,k} + (K - 1) c_1 sum_t theta_{t,1} e*_{t,1}
//! c_k  = 2 sqrt(T_min (B1 - B)) / (V_k sqrt(d))
//! ```
//!
//! `S*` lives on the scale of `sqrt(T_min (B1 - B)) * R`, so the decision
//! compares that scaled statistic against the empirical `1 - alpha`
//! quantile of the draws (order statistic `v = min{x : x / U >= 1 - alpha}`).
//!
//! Replicate `u`, group `k` always draws from substream `(seed, u, k)`.
//! Because `S*` is linear in the weights, the per-group sum
//! `sum_t theta_t (L z)_t` is evaluated as `(Lᵀ theta)ᵀ z` with `Lᵀ theta`
//! computed once, which is O(T) per replicate instead of O(T^2).

use std::collections::HashMap;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::bandwidth::{select_bands, select_h, BandGrid};
use crate::error::{AnovaError, Result};
use crate::kernel::{gram, KernelSpec, ToeplitzGram};
use crate::panel::{demean, Panel};
use crate::rng::{domain, StreamKey};
use crate::statistic::{pair_count, rhat, scale_factor, BandConfig};
use crate::variance::{second_order_residuals, SecondOrderResiduals};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Inputs of one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub band: BandConfig,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub boot_count: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Select `(B, B1)` and `H` from the data, ignoring `band` and `h`.
    #[serde(default)]
    pub auto_bandwidth: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            band: BandConfig { lower: 10, upper: 15 },
            h: 50.0,
            kernel: KernelSpec::Gaussian,
            boot_count: 100,
            alpha: 0.05,
            seed: 42,
            auto_bandwidth: false,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.boot_count < 2 {
            return Err(AnovaError::InvalidArgument(format!(
                "need at least 2 bootstrap replicates, got {}",
                self.boot_count
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AnovaError::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.auto_bandwidth {
            BandConfig::new(self.band.lower, self.band.upper)?;
            if !(self.h > 0.0) || !self.h.is_finite() {
                return Err(AnovaError::InvalidArgument(format!(
                    "H must be positive, got {}",
                    self.h
                )));
            }
        }
        Ok(())
    }
}

/// Sorted bootstrap draws and the selected quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDraws {
    pub values: Vec<f64>,
    pub quantile: f64,
    /// One-based order index of the quantile.
    pub v: usize,
}

/// Outcome of [`run_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: u32,
    /// Unscaled `R`.
    pub statistic: f64,
    /// `sqrt(T_min (B1 - B)) * R`, compared against the quantile.
    pub scaled_statistic: f64,
    pub per_group: Vec<f64>,
    pub quantile: f64,
    pub v: usize,
    pub reject: bool,
    pub band: BandConfig,
    #[serde(rename = "H")]
    pub h: f64,
    pub kernel: KernelSpec,
    pub boot_count: usize,
    pub alpha: f64,
    pub seed: u64,
    pub t_min: usize,
    pub auto_bandwidth: bool,
    /// Objective of the `(B, B1)` selection, when it ran.
    pub band_objective: Option<f64>,
    /// All bootstrap draws were identical.
    pub degenerate_variance: bool,
    pub wall_time_ms: f64,
}

/// Shape information needed to turn second-order residuals into `S*`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapLayout {
    pub band: BandConfig,
    pub lengths: Vec<usize>,
    pub dim: usize,
    pub t_min: usize,
}

impl BootstrapLayout {
    pub fn for_panel(panel: &Panel, band: BandConfig) -> Self {
        Self {
            band,
            lengths: panel.lengths(),
            dim: panel.dim(),
            t_min: panel.min_len(),
        }
    }

    /// Multiplier of `sum_t theta_{t,k} e*_{t,k}` for each group; the
    /// reference group carries the extra `K - 1` factor.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        let root = scale_factor(self.t_min, self.band);
        let sd = (self.dim as f64).sqrt();
        let k_minus_1 = (self.lengths.len() - 1) as f64;
        self.lengths
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let v = pair_count(t, self.band)? as f64;
                let c = 2.0 * root / (v * sd);
                Ok(if k == 0 { k_minus_1 * c } else { c })
            })
            .collect()
    }
}

/// `L z` with `z` standard normal drawn from `rng`.
pub fn sample_weights<R: Rng + ?Sized>(gram: &ToeplitzGram, rng: &mut R) -> Array1<f64> {
    let z: Array1<f64> = (0..gram.size()).map(|_| rng.sample(StandardNormal)).collect();
    gram.correlate(z.view())
}

/// `S*` for one set of per-group weights aligned to `t = B+1..T_k`.
pub fn bootstrap_statistic(
    sor: &SecondOrderResiduals,
    weights: &[Array1<f64>],
    layout: &BootstrapLayout,
) -> Result<f64> {
    if weights.len() != sor.n_groups() || layout.lengths.len() != sor.n_groups() {
        return Err(AnovaError::ShapeMismatch(format!(
            "{} weight vectors for {} groups",
            weights.len(),
            sor.n_groups()
        )));
    }
    let coeffs = layout.coefficients()?;
    let mut reference = 0.0;
    let mut others = 0.0;
    for (k, (theta, w)) in sor.groups.iter().zip(weights).enumerate() {
        if theta.len() != w.len() {
            return Err(AnovaError::ShapeMismatch(format!(
                "group {}: {} residuals vs {} weights",
                k + 1,
                theta.len(),
                w.len()
            )));
        }
        let s = coeffs[k] * ArrayView1::from(theta.as_slice()).dot(w);
        if k == 0 {
            reference = s;
        } else {
            others += s;
        }
    }
    Ok(others + reference)
}

/// Closed-form conditional variance of `S*` given the data:
/// `sum_k c_k^2 theta_kᵀ G_k theta_k` (Gram without jitter).
pub fn conditional_variance(
    sor: &SecondOrderResiduals,
    layout: &BootstrapLayout,
    grams: &[ToeplitzGram],
) -> Result<f64> {
    let coeffs = layout.coefficients()?;
    Ok(sor
        .groups
        .iter()
        .zip(grams)
        .zip(&coeffs)
        .map(|((theta, g), c)| c * c * g.quadratic_form(theta))
        .sum())
}

/// One factor per distinct series length, shared across groups and replicates.
pub fn gram_cache(sor: &SecondOrderResiduals, kernel: KernelSpec, h: f64) -> Result<Vec<ToeplitzGram>> {
    let mut cache: HashMap<usize, ToeplitzGram> = HashMap::new();
    sor.groups
        .iter()
        .map(|theta| {
            let n = theta.len();
            if let Some(g) = cache.get(&n) {
                return Ok(g.clone());
            }
            let g = gram(&kernel, n, h)?;
            cache.insert(n, g.clone());
            Ok(g)
        })
        .collect()
}

/// Precomputed `c_k Lᵀ theta_k` per group.
#[derive(Debug, Clone)]
pub struct Bootstrapper {
    projections: Vec<Array1<f64>>,
}

impl Bootstrapper {
    pub fn new(
        sor: &SecondOrderResiduals,
        layout: &BootstrapLayout,
        grams: &[ToeplitzGram],
    ) -> Result<Self> {
        let coeffs = layout.coefficients()?;
        let projections = sor
            .groups
            .iter()
            .zip(grams)
            .zip(&coeffs)
            .map(|((theta, g), c)| {
                if g.size() != theta.len() {
                    return Err(AnovaError::ShapeMismatch(format!(
                        "gram of size {} for {} residuals",
                        g.size(),
                        theta.len()
                    )));
                }
                let scaled: Array1<f64> = theta.iter().map(|v| c * v).collect();
                Ok(g.factor().t().dot(&scaled))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { projections })
    }

    /// `S*_u`, drawing group `k`'s normals from `key / (u, labels[k])`.
    pub fn draw_with_labels(&self, key: &StreamKey, u: usize, labels: &[u64]) -> f64 {
        let mut reference = 0.0;
        let mut others = 0.0;
        for (k, (p, &label)) in self.projections.iter().zip(labels).enumerate() {
            let mut rng = key.children(&[u as u64, label]).rng();
            let s: f64 = p.iter().map(|a| a * rng.sample::<f64, _>(StandardNormal)).sum();
            if k == 0 {
                reference = s;
            } else {
                others += s;
            }
        }
        others + reference
    }

    /// `count` draws in replicate order.
    pub fn draws_with_labels(&self, key: &StreamKey, count: usize, labels: &[u64]) -> Vec<f64> {
        (0..count)
            .into_par_iter()
            .map(|u| self.draw_with_labels(key, u, labels))
            .collect()
    }

    pub fn draws(&self, key: &StreamKey, count: usize) -> Vec<f64> {
        let labels: Vec<u64> = (0..self.projections.len() as u64).collect();
        self.draws_with_labels(key, count, &labels)
    }
}

/// Bootstrap substream root for a test seed.
pub fn bootstrap_key(seed: u64) -> StreamKey {
    StreamKey::root(seed).child(domain::BOOTSTRAP)
}

/// Order statistic `v = min{x in 1..=U : x / U >= 1 - alpha}` of `values`.
pub fn empirical_quantile(values: &[f64], alpha: f64) -> Result<(f64, usize)> {
    if values.is_empty() {
        return Err(AnovaError::InvalidArgument("no bootstrap values".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnovaError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let u = sorted.len();
    let v = (1..=u)
        .find(|&x| x as f64 / u as f64 >= 1.0 - alpha)
        .unwrap_or(u);
    Ok((sorted[v - 1], v))
}

/// Sort draws and attach the `1 - alpha` quantile.
pub fn summarize_draws(mut values: Vec<f64>, alpha: f64) -> Result<BootstrapDraws> {
    let (quantile, v) = empirical_quantile(&values, alpha)?;
    values.sort_by(f64::total_cmp);
    Ok(BootstrapDraws {
        values,
        quantile,
        v,
    })
}

/// Everything [`run_test`] computes, including the raw draws.
#[derive(Debug, Clone)]
pub struct TestRun {
    pub report: TestReport,
    pub draws: BootstrapDraws,
    pub sor: SecondOrderResiduals,
}

/// Bandwidths actually used by a run.
fn resolve_bandwidths(
    panel: &Panel,
    config: &TestConfig,
) -> Result<(BandConfig, Option<f64>, SecondOrderResiduals, Option<f64>)> {
    let (_, res) = demean(panel);
    if config.auto_bandwidth {
        let sel = select_bands(panel, &BandGrid::default_for(panel.min_len()))?;
        let sor = second_order_residuals(&res, sel.band)?;
        let h = select_h(&sor)?;
        Ok((sel.band, Some(sel.objective), sor, Some(h)))
    } else {
        let band = config.band.clamp_to(panel.min_len())?;
        let sor = second_order_residuals(&res, band)?;
        Ok((band, None, sor, None))
    }
}

/// Full bootstrap test, returning draws alongside the report.
pub fn run_test_detailed(panel: &Panel, config: &TestConfig) -> Result<TestRun> {
    let start = Instant::now();
    config.validate()?;
    let (band, band_objective, sor, auto_h) = resolve_bandwidths(panel, config)?;
    let h = auto_h.unwrap_or(config.h);
    let stat = rhat(panel, band)?;

    let layout = BootstrapLayout::for_panel(panel, band);
    let grams = gram_cache(&sor, config.kernel, h)?;
    let boot = Bootstrapper::new(&sor, &layout, &grams)?;
    let values = boot.draws(&bootstrap_key(config.seed), config.boot_count);
    let draws = summarize_draws(values, config.alpha)?;

    let degenerate = draws.values.first() == draws.values.last();
    if degenerate {
        warn!("all bootstrap statistics are identical; the variance is degenerate");
    }
    let reject = stat.scaled >= draws.quantile;

    let report = TestReport {
        schema_version: REPORT_SCHEMA_VERSION,
        statistic: stat.rhat,
        scaled_statistic: stat.scaled,
        per_group: stat.per_group,
        quantile: draws.quantile,
        v: draws.v,
        reject,
        band,
        h,
        kernel: config.kernel,
        boot_count: config.boot_count,
        alpha: config.alpha,
        seed: config.seed,
        t_min: stat.t_min,
        auto_bandwidth: config.auto_bandwidth,
        band_objective,
        degenerate_variance: degenerate,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(TestRun { report, draws, sor })
}

/// Second-order wild bootstrap test of equal group means.
pub fn run_test(panel: &Panel, config: &TestConfig) -> Result<TestReport> {
    run_test_detailed(panel, config).map(|r| r.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise_panel(seed: u64, lengths: &[usize], d: usize) -> Panel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Panel::new(
            lengths
                .iter()
                .map(|&t| Array2::from_shape_fn((t, d), |_| rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.05).unwrap(), (95.0, 95));
        assert_eq!(empirical_quantile(&[3.0, 1.0, 2.0, 4.0], 0.5).unwrap(), (2.0, 2));
        for alpha in [0.01, 0.3, 0.9] {
            assert_eq!(empirical_quantile(&[1.5; 7], alpha).unwrap().0, 1.5);
        }
        // U * alpha < 1 falls back to the maximum
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0], 0.1).unwrap(), (3.0, 3));
        assert!(empirical_quantile(&[], 0.05).is_err());
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn quantile_monotone_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..57).map(|_| rng.sample(StandardNormal)).collect();
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let q = empirical_quantile(&v, i as f64 / 100.0).unwrap().0;
            assert!(q <= prev);
            prev = q;
        }
    }

    #[test]
    fn single_weight_is_standard_normal_draw() {
        let g = gram(&KernelSpec::Gaussian, 1, 5.0).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let w = sample_weights(&g, &mut a);
        let z: f64 = b.sample(StandardNormal);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0], z);
    }

    #[test]
    fn weights_are_reproducible() {
        let g = gram(&KernelSpec::Gaussian, 30, 4.0).unwrap();
        let key = StreamKey::root(77).child(1);
        assert_eq!(sample_weights(&g, &mut key.rng()), sample_weights(&g, &mut key.rng()));
    }

    #[test]
    fn weight_covariance_matches_gram() {
        let n = 50;
        let g = gram(&KernelSpec::Gaussian, n, 10.0).unwrap();
        let draws = 100_000;
        let mut acc = Array2::<f64>::zeros((n, n));
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..draws {
            let w = sample_weights(&g, &mut rng);
            for i in 0..n {
                let wi = w[i];
                for j in 0..=i {
                    acc[[i, j]] += wi * w[j];
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((acc[[i, j]] / draws as f64 - g.entry(i, j)).abs());
            }
        }
        assert!(worst < 0.02, "max covariance error {worst}");
    }

    #[test]
    fn statistic_zero_cases() {
        let band = BandConfig::new(1, 2).unwrap();
        let layout = BootstrapLayout { band, lengths: vec![6, 6], dim: 1, t_min: 6 };
        let zero = SecondOrderResiduals { band, groups: vec![vec![0.0; 5], vec![0.0; 5]] };
        let w = vec![Array1::from_elem(5, 1.0), Array1::from_elem(5, -2.0)];
        assert_eq!(bootstrap_statistic(&zero, &w, &layout).unwrap(), 0.0);
        let sor = SecondOrderResiduals { band, groups: vec![vec![1.0; 5], vec![2.0; 5]] };
        let zw = vec![Array1::zeros(5), Array1::zeros(5)];
        assert_eq!(bootstrap_statistic(&sor, &zw, &layout).unwrap(), 0.0);
        let short = vec![Array1::zeros(4), Array1::zeros(5)];
        assert!(matches!(
            bootstrap_statistic(&sor, &short, &layout),
            Err(AnovaError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn statistic_hand_case() {
        // K = 2, T = 6, d = 1, B = 1, B1 = 2 composed from scratch
        let x1 = [0.3, -1.2, 0.8, 2.0, -0.4, 0.1];
        let x2 = [1.1, 0.0, -0.7, 0.5, 0.9, -1.5];
        let panel = Panel::new(vec![
            Array2::from_shape_vec((6, 1), x1.to_vec()).unwrap(),
            Array2::from_shape_vec((6, 1), x2.to_vec()).unwrap(),
        ])
        .unwrap();
        let band = BandConfig::new(1, 2).unwrap();
        let (_, res) = demean(&panel);
        let sor = second_order_residuals(&res, band).unwrap();
        let w1 = [0.5, -1.0, 0.25, 2.0, -0.75];
        let w2 = [-0.2, 0.4, 1.5, -1.1, 0.6];

        let theta = |x: &[f64; 6]| -> Vec<f64> {
            let m = x.iter().sum::<f64>() / 6.0;
            let e: Vec<f64> = x.iter().map(|v| v - m).collect();
            (1..6)
                .map(|t: usize| {
                    let lo = t.saturating_sub(2);
                    (lo..t).map(|s| e[t] * e[s]).sum()
                })
                .collect()
        };
        // V = (2*6 - 1 - 2) * (2 - 1 + 1) = 18; sqrt(T_min (B1 - B)) = sqrt(6)
        let c = 2.0 * 6f64.sqrt() / 18.0;
        let t1 = theta(&x1);
        let t2 = theta(&x2);
        let oracle = c * t2.iter().zip(&w2).map(|(a, b)| a * b).sum::<f64>()
            + c * t1.iter().zip(&w1).map(|(a, b)| a * b).sum::<f64>();

        let layout = BootstrapLayout::for_panel(&panel, band);
        let w = vec![Array1::from(w1.to_vec()), Array1::from(w2.to_vec())];
        let got = bootstrap_statistic(&sor, &w, &layout).unwrap();
        assert!((got - oracle).abs() <= 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn projected_draws_match_explicit_weights() {
        let panel = noise_panel(5, &[40, 45, 50], 6);
        let band = BandConfig::new(2, 6).unwrap();
        let (_, res) = demean(&panel);
        let sor = second_order_residuals(&res, band).unwrap();
        let layout = BootstrapLayout::for_panel(&panel, band);
        let grams = gram_cache(&sor, KernelSpec::Gaussian, 4.0).unwrap();
        let boot = Bootstrapper::new(&sor, &layout, &grams).unwrap();
        let key = bootstrap_key(17);
        for u in 0..10 {
            let weights: Vec<Array1<f64>> = grams
                .iter()
                .enumerate()
                .map(|(k, g)| sample_weights(g, &mut key.children(&[u as u64, k as u64]).rng()))
                .collect();
            let explicit = bootstrap_statistic(&sor, &weights, &layout).unwrap();
            let fast = boot.draw_with_labels(&key, u, &[0, 1, 2]);
            assert!((explicit - fast).abs() <= 1e-10 * explicit.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_panel_rejects_with_degenerate_flag() {
        let panel = Panel::new(vec![Array2::zeros((20, 3)), Array2::zeros((25, 3))]).unwrap();
        let cfg = TestConfig {
            band: BandConfig::new(2, 5).unwrap(),
            h: 3.0,
            boot_count: 50,
            ..TestConfig::default()
        };
        let r = run_test(&panel, &cfg).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.quantile, 0.0);
        assert!(r.reject);
        assert!(r.degenerate_variance);
    }

    #[test]
    fn huge_shift_rejects() {
        let mut panel = noise_panel(6, &[60, 60], 4).into_groups();
        // |mu_2 - mu_1|^2 / sqrt(d) = 4 * 1000^2 / 2 = 2e6
        panel[1].mapv_inplace(|v| v + 1000.0);
        let panel = Panel::new(panel).unwrap();
        let cfg = TestConfig {
            band: BandConfig::new(2, 6).unwrap(),
            h: 5.0,
            ..TestConfig::default()
        };
        assert!(run_test(&panel, &cfg).unwrap().reject);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let panel = noise_panel(7, &[50, 60], 5);
        let cfg = TestConfig {
            band: BandConfig::new(2, 6).unwrap(),
            h: 5.0,
            boot_count: 200,
            ..TestConfig::default()
        };
        let a = run_test_detailed(&panel, &cfg).unwrap();
        let b = run_test_detailed(&panel, &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        let mut ra = a.report;
        let mut rb = b.report;
        ra.wall_time_ms = 0.0;
        rb.wall_time_ms = 0.0;
        assert_eq!(ra, rb);
    }

    #[test]
    fn config_validation() {
        let panel = noise_panel(8, &[30, 30], 3);
        let bad_alpha = TestConfig { alpha: 1.0, ..TestConfig::default() };
        assert!(run_test(&panel, &bad_alpha).is_err());
        let bad_boot = TestConfig { boot_count: 1, ..TestConfig::default() };
        assert!(run_test(&panel, &bad_boot).is_err());
        let bad_h = TestConfig { h: 0.0, ..TestConfig::default() };
        assert!(run_test(&panel, &bad_h).is_err());
        let too_wide = TestConfig { band: BandConfig { lower: 29, upper: 40 }, ..TestConfig::default() };
        assert!(matches!(run_test(&panel, &too_wide), Err(AnovaError::BandwidthError(_))));
    }

    #[test]
    fn permuting_groups_keeps_statistic_and_draws() {
        let groups = noise_panel(10, &[40, 44, 48], 5).into_groups();
        let p = Panel::new(groups.clone()).unwrap();
        let q = Panel::new(vec![groups[0].clone(), groups[2].clone(), groups[1].clone()]).unwrap();
        let band = BandConfig::new(2, 6).unwrap();
        let cfg = TestConfig { band, h: 4.0, boot_count: 30, ..TestConfig::default() };
        let rp = run_test(&p, &cfg).unwrap();
        let rq = run_test(&q, &cfg).unwrap();
        assert_eq!(rp.statistic, rq.statistic);

        let boot_of = |panel: &Panel| {
            let (_, res) = demean(panel);
            let sor = second_order_residuals(&res, band).unwrap();
            let layout = BootstrapLayout::for_panel(panel, band);
            let grams = gram_cache(&sor, KernelSpec::Gaussian, 4.0).unwrap();
            Bootstrapper::new(&sor, &layout, &grams).unwrap()
        };
        let key = bootstrap_key(3);
        let dp = boot_of(&p).draws_with_labels(&key, 30, &[0, 1, 2]);
        let dq = boot_of(&q).draws_with_labels(&key, 30, &[0, 2, 1]);
        for (a, b) in dp.iter().zip(&dq) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-6));
        }
    }
}
