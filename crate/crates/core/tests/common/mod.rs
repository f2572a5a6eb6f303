//! Naive double-loop oracles and random instances shared by the
//! integration tests.
#![allow(dead_code)]

use hdanova::statistic::BandConfig;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative tolerance for fast-path versus oracle comparisons.
pub const ORACLE_RTOL: f64 = 1e-8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Array2<f64> {
    let offset: f64 = rng.gen_range(-2.0..2.0);
    let mut x = Array2::zeros((t, d));
    for v in x.iter_mut() {
        *v = offset + rng.gen_range(-1.0..1.0);
    }
    x
}

/// Random `(T, d, B, B1)` with `T <= 100`, `d <= 50` and `B1 < T`.
pub fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize, BandConfig) {
    let t = rng.gen_range(4..=100);
    let d = rng.gen_range(1..=50);
    let b = rng.gen_range(1..=t - 2);
    let b1 = rng.gen_range(b + 1..=t - 1);
    (t, d, BandConfig { lower: b, upper: b1 })
}

pub fn brute_pair_count(t: usize, b: usize, b1: usize) -> u64 {
    let mut n = 0;
    for t1 in 0..t {
        for t2 in 0..t {
            let lag = t1.abs_diff(t2);
            if lag >= b && lag <= b1 {
                n += 1;
            }
        }
    }
    n
}

fn dot(x: &Array2<f64>, i: usize, y: &Array2<f64>, j: usize) -> f64 {
    x.row(i).iter().zip(y.row(j)).map(|(a, b)| a * b).sum()
}

/// Banded ordered-pair sum and the sum of absolute terms.
pub fn naive_banded(x: &Array2<f64>, band: BandConfig) -> (f64, f64) {
    let (mut s, mut mag) = (0.0, 0.0);
    for t1 in 0..x.nrows() {
        for t2 in 0..x.nrows() {
            let lag = t1.abs_diff(t2);
            if lag >= band.lower && lag <= band.upper {
                let v = dot(x, t1, x, t2);
                s += v;
                mag += v.abs();
            }
        }
    }
    (s, mag)
}

pub fn naive_demean(x: &Array2<f64>) -> Array2<f64> {
    let t = x.nrows() as f64;
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mut m = 0.0;
        for i in 0..x.nrows() {
            m += x[[i, j]];
        }
        m /= t;
        for i in 0..x.nrows() {
            out[[i, j]] -= m;
        }
    }
    out
}

/// `theta_t` for `t = B+1..T` with the magnitude of each entry's terms.
pub fn naive_theta(e: &Array2<f64>, band: BandConfig) -> Vec<(f64, f64)> {
    (band.lower..e.nrows())
        .map(|t| {
            let lo = t.saturating_sub(band.upper);
            let (mut s, mut mag) = (0.0, 0.0);
            for s_idx in lo..=t - band.lower {
                let v = dot(e, t, e, s_idx);
                s += v;
                mag += v.abs();
            }
            (s, mag)
        })
        .collect()
}

/// `Z = S / (V sqrt(d))` and its magnitude scale.
pub fn naive_zhat(x: &Array2<f64>, band: BandConfig) -> (f64, f64) {
    let (s, mag) = naive_banded(x, band);
    let v = brute_pair_count(x.nrows(), band.lower, band.upper) as f64;
    let norm = v * (x.ncols() as f64).sqrt();
    (s / norm, mag / norm)
}

/// `R_k` from double loops, with magnitude scale.
pub fn naive_rhat_k(xk: &Array2<f64>, x1: &Array2<f64>, band: BandConfig) -> (f64, f64) {
    let (zk, mk) = naive_zhat(xk, band);
    let (z1, m1) = naive_zhat(x1, band);
    let (mut cross, mut mag) = (0.0, 0.0);
    for i in 0..xk.nrows() {
        for j in 0..x1.nrows() {
            let v = dot(xk, i, x1, j);
            cross += v;
            mag += v.abs();
        }
    }
    let norm = (xk.nrows() * x1.nrows()) as f64 * (xk.ncols() as f64).sqrt();
    (zk + z1 - 2.0 * cross / norm, mk + m1 + 2.0 * mag / norm)
}

/// `|fast - oracle| <= rtol * max(|oracle|, magnitude * eps-scale)`, where the
/// magnitude bounds the cancellation in the oracle's own sum.
pub fn close(fast: f64, oracle: f64, magnitude: f64) -> bool {
    let scale = oracle.abs().max(magnitude * 1e-6).max(f64::MIN_POSITIVE);
    (fast - oracle).abs() <= ORACLE_RTOL * scale
}

/// Mismatch counts for the four fast paths over `n` random instances:
/// `[banded_cross_sum, second_order_residuals, rhat_k, zhat]`.
pub fn oracle_mismatches(seed: u64, n: usize) -> [usize; 4] {
    use hdanova::bandwidth::zhat;
    use hdanova::panel::{demean, Panel};
    use hdanova::statistic::{banded_cross_sum, rhat_k};
    use hdanova::variance::second_order_residuals;

    let mut rng = rng(seed);
    let mut bad = [0usize; 4];
    for _ in 0..n {
        let (t, d, band) = random_shape(&mut rng);
        let t_other = rng.gen_range(band.upper + 1..=100);
        let x = random_matrix(&mut rng, t, d);
        let x1 = random_matrix(&mut rng, t_other, d);

        let (s, mag) = naive_banded(&x, band);
        if !close(banded_cross_sum(x.view(), band).unwrap(), s, mag) {
            bad[0] += 1;
        }

        let panel = Panel::new(vec![x.clone(), x1.clone()]).unwrap();
        let (_, res) = demean(&panel);
        let sor = second_order_residuals(&res, band).unwrap();
        let ok = [&x, &x1].iter().zip(&sor.groups).all(|(g, fast)| {
            let oracle = naive_theta(&naive_demean(g), band);
            fast.len() == oracle.len()
                && fast.iter().zip(&oracle).all(|(f, (o, m))| close(*f, *o, *m))
        });
        if !ok {
            bad[1] += 1;
        }

        let (r, mag) = naive_rhat_k(&x, &x1, band);
        if !close(rhat_k(x.view(), x1.view(), band).unwrap(), r, mag) {
            bad[2] += 1;
        }

        let (z, mag) = naive_zhat(&x, band);
        if !close(zhat(x.view(), band.lower, band.upper).unwrap(), z, mag) {
            bad[3] += 1;
        }
    }
    bad
}
