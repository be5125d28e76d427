//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

const MAX_SHRINK: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceTuning {
    pub width: f64,
    pub max_steps: usize,
}

impl Default for SliceTuning {
    fn default() -> Self {
        SliceTuning {
            width: 1.0,
            max_steps: 50,
        }
    }
}

/// Outcome of one slice update.
#[derive(Debug, Clone, Copy)]
pub struct SliceDraw {
    pub x: f64,
    pub log_density: f64,
    pub evaluations: usize,
}

/// One slice-sampling update from `x0` for the log density `log_f`, whose
/// value at `x0` is `log_f0`. `log_f` may return `-inf` (or NaN, treated as
/// `-inf`) outside the support.
pub fn slice_update<R, F>(
    x0: f64,
    log_f0: f64,
    mut log_f: F,
    tuning: &SliceTuning,
    rng: &mut R,
) -> Result<SliceDraw>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let mut eval = |x: f64| {
        let v = log_f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut evaluations = 0;
    let e: f64 = rng.sample(Exp1);
    let level = log_f0 - e;

    let w = tuning.width;
    let mut left = x0 - w * rng.random::<f64>();
    let mut right = left + w;
    let budget = tuning.max_steps;
    let mut j = (budget as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = budget.saturating_sub(1).saturating_sub(j);
    while j > 0 {
        evaluations += 1;
        if eval(left) <= level {
            break;
        }
        left -= w;
        j -= 1;
    }
    while k > 0 {
        evaluations += 1;
        if eval(right) <= level {
            break;
        }
        right += w;
        k -= 1;
    }

    for _ in 0..MAX_SHRINK {
        let x1 = left + (right - left) * rng.random::<f64>();
        let f1 = eval(x1);
        evaluations += 1;
        if f1 > level {
            return Ok(SliceDraw {
                x: x1,
                log_density: f1,
                evaluations,
            });
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
    }
    Err(Error::SliceStuck(MAX_SHRINK))
}

/// Log density of the scalar conditional
/// `p(x) ∝ exp(s1 x - x²/(2 s2) - Σ_j exp(x s3_j + s4_j))`.
pub fn h_log_density(x: f64, s1: f64, s2: f64, s3: &[f64], s4: &[f64]) -> f64 {
    let tail: f64 = s3.iter().zip(s4).map(|(a, b)| (x * a + b).exp()).sum();
    s1 * x - x * x / (2.0 * s2) - tail
}

/// One draw from the `H(s1, s2, s3, s4)` family starting at `x0`.
pub fn sample_h<R: Rng + ?Sized>(
    s1: f64,
    s2: f64,
    s3: &[f64],
    s4: &[f64],
    x0: f64,
    tuning: &SliceTuning,
    rng: &mut R,
) -> Result<f64> {
    assert_eq!(s3.len(), s4.len(), "s3 and s4 must have equal length");
    let f0 = h_log_density(x0, s1, s2, s3, s4);
    if !f0.is_finite() {
        return Err(Error::NonFiniteResult("H target is not finite at the starting point"));
    }
    let draw = slice_update(x0, f0, |x| h_log_density(x, s1, s2, s3, s4), tuning, rng)?;
    Ok(draw.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::rng::substream;

    fn chain(s1: f64, s2: f64, s3: &[f64], s4: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        let tuning = SliceTuning::default();
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = sample_h(s1, s2, s3, s4, x, &tuning, &mut rng).unwrap();
                x
            })
            .collect()
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn standard_normal_reduction() {
        let draws = chain(0.0, 1.0, &[], &[], 100_000, 1);
        let (m, v) = mean_var(&draws);
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.05, "var {v}");
    }

    #[test]
    fn completing_the_square() {
        let draws = chain(3.0, 2.0, &[], &[], 100_000, 2);
        let (m, v) = mean_var(&draws);
        assert!((m - 6.0).abs() < 0.03, "mean {m}");
        assert!((v - 2.0).abs() < 0.1, "var {v}");
    }

    #[test]
    fn poisson_term_matches_quadrature() {
        // oracle: mean of x e^{-x²/2 - e^x} / Z by trapezoid quadrature
        let n = 400_001;
        let (lo, hi) = (-12.0, 6.0);
        let h = (hi - lo) / (n - 1) as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let d = (-x * x / 2.0 - x.exp()).exp() * w;
            z += d;
            m1 += x * d;
            m2 += x * x * d;
        }
        let mean = m1 / z;
        let sd = (m2 / z - mean * mean).sqrt();

        let draws = chain(0.0, 1.0, &[1.0], &[0.0], 100_000, 3);
        let (m, _) = mean_var(&draws);
        // batch means for the Monte Carlo standard error
        let batches: Vec<f64> = draws.chunks(1000).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let (_, bv) = mean_var(&batches);
        let se = (bv / batches.len() as f64).sqrt().max(sd / (draws.len() as f64).sqrt());
        assert!((m - mean).abs() < 3.0 * se, "sample {m} vs quadrature {mean} (se {se})");
    }

    #[test]
    fn stuck_on_degenerate_target() {
        let mut rng = substream(4, 0);
        let tuning = SliceTuning::default();
        // the density is finite only at the starting point
        let r = slice_update(0.0, 0.0, |x| if x == 0.0 { 0.0 } else { f64::NEG_INFINITY }, &tuning, &mut rng);
        assert_eq!(r.unwrap_err(), Error::SliceStuck(1000));
    }
}
