//! Synthetic panels for size and power studies.
//!
//! Observations are `x_{t,k} = mu_k + Theta eps_{t,k}` where `Theta` is the
//! symmetric band matrix with diagonal 1, first off-diagonal 0.5 and second
//! off-diagonal 0.3. The innovations `eps` follow one of six scalar
//! recursions run independently per coordinate, driven by i.i.d.
//! `Uniform[-1, 1]` noise `e`. The spatially independent kind skips `Theta`
//! and uses `e` directly. Recursions start from zero and the first
//! `burn_in` steps are discarded.
//!
//! Means: `mu_k = 1` for `k >= 2`, `mu_1 = 1 + nu` with `nu` drawn
//! coordinate-wise from the configured shift distribution, once per panel.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AnovaError, Result};
use crate::panel::Panel;
use crate::rng::{domain, StreamKey};

pub const DEFAULT_BURN_IN: usize = 200;
/// Longest lag used by any recursion.
pub const MAX_LAG: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgpKind {
    SpatialIndependent,
    Independent,
    Autoregressive,
    MovingAverage,
    Nonlinear,
    NonStationary,
}

impl DgpKind {
    pub const ALL: [DgpKind; 6] = [
        DgpKind::SpatialIndependent,
        DgpKind::Independent,
        DgpKind::Autoregressive,
        DgpKind::MovingAverage,
        DgpKind::Nonlinear,
        DgpKind::NonStationary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::SpatialIndependent => "spatial-independent",
            DgpKind::Independent => "independent",
            DgpKind::Autoregressive => "autoregressive",
            DgpKind::MovingAverage => "moving-average",
            DgpKind::Nonlinear => "nonlinear",
            DgpKind::NonStationary => "non-stationary",
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpKind {
    type Err = AnovaError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        DgpKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| AnovaError::InvalidArgument(format!("unknown DGP kind `{s}`")))
    }
}

/// Distribution of the coordinate-wise shift `nu` added to `mu_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Shift {
    None,
    /// `Uniform[0, a]`.
    Uniform(f64),
}

impl Shift {
    pub fn magnitude(&self) -> f64 {
        match self {
            Shift::None => 0.0,
            Shift::Uniform(a) => *a,
        }
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shift::None => f.write_str("none"),
            Shift::Uniform(a) => write!(f, "uniform:{a}"),
        }
    }
}

impl FromStr for Shift {
    type Err = AnovaError;

    /// `none`, `0`, `uniform:A` or `unif:A`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "none" || s == "0" {
            return Ok(Shift::None);
        }
        let a = s
            .strip_prefix("uniform:")
            .or_else(|| s.strip_prefix("unif:"))
            .ok_or_else(|| AnovaError::InvalidArgument(format!("cannot parse shift `{s}`")))?;
        let a: f64 = a
            .parse()
            .map_err(|_| AnovaError::InvalidArgument(format!("cannot parse shift bound `{a}`")))?;
        if !(a > 0.0) || !a.is_finite() {
            return Err(AnovaError::InvalidArgument(format!(
                "uniform shift bound must be positive, got {a}"
            )));
        }
        Ok(Shift::Uniform(a))
    }
}

impl TryFrom<String> for Shift {
    type Error = AnovaError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Shift> for String {
    fn from(s: Shift) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// `T_k` per group; `K` is its length.
    pub lengths: Vec<usize>,
    pub dim: usize,
    pub shift: Shift,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.len() < 2 {
            return Err(AnovaError::InvalidArgument("a DGP needs at least 2 groups".into()));
        }
        if self.dim == 0 || self.lengths.contains(&0) {
            return Err(AnovaError::InvalidArgument("T_k and d must be positive".into()));
        }
        if self.burn_in < MAX_LAG {
            return Err(AnovaError::InvalidArgument(format!(
                "burn-in must cover the longest lag ({MAX_LAG}), got {}",
                self.burn_in
            )));
        }
        Ok(())
    }
}

/// Group means `mu_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSet {
    pub means: Vec<Array1<f64>>,
}

impl MeanSet {
    /// `mu_k = 1` for `k >= 2`, `mu_1 = 1 + nu`.
    pub fn generate<R: Rng + ?Sized>(k: usize, d: usize, shift: Shift, rng: &mut R) -> Self {
        let mut means = vec![Array1::from_elem(d, 1.0); k];
        if let Shift::Uniform(a) = shift {
            means[0].mapv_inplace(|m| m + rng.gen_range(0.0..=a));
        }
        Self { means }
    }
}

/// Symmetric band mixing matrix.
pub fn theta_matrix(d: usize) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |(i, j)| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.5,
        2 => 0.3,
        _ => 0.0,
    })
}

/// `out = Theta v`, O(d) using the band structure.
pub fn apply_theta(v: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
    let d = v.len();
    for i in 0..d {
        let mut acc = v[i];
        if i >= 1 {
            acc += 0.5 * v[i - 1];
        }
        if i + 1 < d {
            acc += 0.5 * v[i + 1];
        }
        if i >= 2 {
            acc += 0.3 * v[i - 2];
        }
        if i + 2 < d {
            acc += 0.3 * v[i + 2];
        }
        out[i] = acc;
    }
}

/// Innovations driven by `noise`, called once per `(step, coordinate)` in
/// row-major order over `burn_in + T` steps.
pub fn gen_innovations_with<F: FnMut() -> f64>(
    kind: DgpKind,
    t: usize,
    d: usize,
    burn_in: usize,
    mut noise: F,
) -> Result<Array2<f64>> {
    if burn_in < MAX_LAG {
        return Err(AnovaError::InvalidArgument(format!(
            "burn-in must be at least {MAX_LAG}, got {burn_in}"
        )));
    }
    if t == 0 || d == 0 {
        return Err(AnovaError::InvalidArgument("T and d must be positive".into()));
    }
    let n = burn_in + t;
    let mut e = Array2::<f64>::zeros((n, d));
    let mut eps = Array2::<f64>::zeros((n, d));
    for s in 0..n {
        for i in 0..d {
            e[[s, i]] = noise();
        }
        for i in 0..d {
            let past_e = |lag: usize| if s >= lag { e[[s - lag, i]] } else { 0.0 };
            let past = |lag: usize| if s >= lag { eps[[s - lag, i]] } else { 0.0 };
            let now = e[[s, i]];
            eps[[s, i]] = match kind {
                DgpKind::SpatialIndependent | DgpKind::Independent => now,
                DgpKind::Autoregressive => 0.7 * past(1) + 0.2 * past(2) + now,
                DgpKind::MovingAverage => {
                    now + 0.6 * past_e(2) + 0.4 * past_e(5) + 0.3 * past_e(7)
                }
                DgpKind::Nonlinear => past(1).sin() + past_e(1) * now,
                DgpKind::NonStationary => {
                    // coordinates are numbered from 1
                    let tail = if (i + 1) % 2 == 0 { now } else { past_e(2) * now };
                    past(1).sin() + past(4).cos() + tail
                }
            };
        }
    }
    Ok(eps.slice_move(ndarray::s![burn_in.., ..]))
}

/// Innovations with `Uniform[-1, 1]` base noise from `rng`.
pub fn gen_innovations<R: Rng + ?Sized>(
    kind: DgpKind,
    t: usize,
    d: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    gen_innovations_with(kind, t, d, burn_in, || rng.gen_range(-1.0..=1.0))
}

/// `x = mu_k + Theta eps` (or `mu_k + eps` for the spatially independent kind).
pub fn assemble_panel(kind: DgpKind, means: &MeanSet, innovations: Vec<Array2<f64>>) -> Result<Panel> {
    if innovations.len() != means.means.len() {
        return Err(AnovaError::ShapeMismatch(format!(
            "{} innovation blocks for {} means",
            innovations.len(),
            means.means.len()
        )));
    }
    let groups = innovations
        .into_iter()
        .zip(&means.means)
        .map(|(eps, mu)| {
            let mut x = Array2::<f64>::zeros(eps.raw_dim());
            for (src, mut dst) in eps.outer_iter().zip(x.outer_iter_mut()) {
                if kind == DgpKind::SpatialIndependent {
                    dst.assign(&src);
                } else {
                    apply_theta(src, dst.view_mut());
                }
                dst += mu;
            }
            x
        })
        .collect();
    Panel::new(groups)
}

/// Generate a panel and its true means. Group `k` draws from substream
/// `(seed, DGP, k)`, the shift from `(seed, SHIFT)`.
pub fn gen_panel(spec: &DgpSpec) -> Result<(Panel, MeanSet)> {
    spec.validate()?;
    let root = StreamKey::root(spec.seed);
    let means = MeanSet::generate(
        spec.lengths.len(),
        spec.dim,
        spec.shift,
        &mut root.child(domain::SHIFT).rng(),
    );
    let innovations = spec
        .lengths
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut rng = root.children(&[domain::DGP, k as u64]).rng();
            gen_innovations(spec.kind, t, spec.dim, spec.burn_in, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let panel = assemble_panel(spec.kind, &means, innovations)?;
    Ok((panel, means))
}

/// `(1/sqrt(d)) sum_{k>=2} |mu_k - mu_1|^2`.
pub fn distance(means: &MeanSet) -> f64 {
    let mu1 = &means.means[0];
    let d = mu1.len() as f64;
    means.means[1..]
        .iter()
        .map(|mu| mu.iter().zip(mu1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / d.sqrt()
}
