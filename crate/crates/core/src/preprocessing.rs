//! Mapping raw observations onto the unit interval and linear binning.
//!
//! Observations are first (optionally) logged, then affinely mapped so the
//! padded sample range becomes `[0, 1]`. The mapped values are spread over an
//! equally spaced grid by linear binning and rounded to integer counts, which
//! become the responses of the Poisson regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLE_SIZE: usize = 10;
pub const MIN_GRID_SIZE: usize = 11;
pub const DEFAULT_PADDING: f64 = 0.05;
pub const DEFAULT_GRID_SIZE: usize = 401;

/// Affine map `y = (x - lower) / scale`, applied after `ln` when `log_applied`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub lower: f64,
    pub scale: f64,
    pub log_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl TransformSpec {
    pub fn identity() -> Self {
        TransformSpec {
            lower: 0.0,
            scale: 1.0,
            log_applied: false,
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        let t = if self.log_applied { x.ln() } else { x };
        (t - self.lower) / self.scale
    }

    pub fn inverse(&self, y: f64) -> f64 {
        let t = self.lower + self.scale * y;
        if self.log_applied {
            t.exp()
        } else {
            t
        }
    }

    /// Derivative dy/dx of the forward map, i.e. the factor converting a
    /// unit-interval density into an original-units density.
    pub fn jacobian(&self, x: f64) -> f64 {
        if self.log_applied {
            1.0 / (self.scale * x)
        } else {
            1.0 / self.scale
        }
    }
}

/// Fits the map sending the padded data range onto `[0, 1]`.
pub fn fit_transform(data: &[f64], padding: f64, log_pre: bool) -> Result<TransformSpec> {
    if !(padding.is_finite() && padding >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "padding must be a nonnegative finite fraction, got {padding}"
        )));
    }
    if data.len() < MIN_SAMPLE_SIZE {
        return Err(Error::TooFewPoints {
            got: data.len(),
            min: MIN_SAMPLE_SIZE,
        });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if log_pre && data.iter().any(|&x| x <= 0.0) {
        return Err(Error::NonPositiveForLog);
    }
    let (lo, hi) = data
        .iter()
        .map(|&x| if log_pre { x.ln() } else { x })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            (lo.min(t), hi.max(t))
        });
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return Err(Error::DegenerateRange);
    }
    Ok(TransformSpec {
        lower: lo - padding * range,
        scale: (1.0 + 2.0 * padding) * range,
        log_applied: log_pre,
    })
}

pub fn apply_transform(spec: &TransformSpec, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(match direction {
        Direction::Forward => x.iter().map(|&v| spec.forward(v)).collect(),
        Direction::Inverse => x.iter().map(|&v| spec.inverse(v)).collect(),
    })
}

/// Equally spaced grid on `[0, 1]` with linear-binned weights and their
/// rounded integer counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCounts {
    pub grid: Vec<f64>,
    pub raw_weights: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: usize,
}

impl GridCounts {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Builds grid counts directly from integer counts (no binning step).
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::GridTooSmall {
                got: counts.len(),
                min: 2,
            });
        }
        let grid = unit_grid(counts.len());
        let raw_weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let n = counts.iter().sum::<u64>() as usize;
        Ok(GridCounts {
            grid,
            raw_weights,
            counts,
            n,
        })
    }
}

/// `m` equally spaced points from 0 to 1 inclusive.
pub fn unit_grid(m: usize) -> Vec<f64> {
    let denom = (m - 1) as f64;
    (0..m)
        .map(|l| if l + 1 == m { 1.0 } else { l as f64 / denom })
        .collect()
}

pub fn linear_bin(y: &[f64], m: usize) -> Result<GridCounts> {
    if m < MIN_GRID_SIZE {
        return Err(Error::GridTooSmall {
            got: m,
            min: MIN_GRID_SIZE,
        });
    }
    let cells = (m - 1) as f64;
    let mut raw_weights = vec![0.0; m];
    for &v in y {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange(v));
        }
        let pos = v * cells;
        let left = pos.floor() as usize;
        if left >= m - 1 {
            raw_weights[m - 1] += 1.0;
            continue;
        }
        let frac = pos - left as f64;
        raw_weights[left] += 1.0 - frac;
        raw_weights[left + 1] += frac;
    }
    let counts = raw_weights.iter().map(|w| w.round() as u64).collect();
    Ok(GridCounts {
        grid: unit_grid(m),
        raw_weights,
        counts,
        n: y.len(),
    })
}

/// Parses one value per line; blank lines and lines starting with `#` are skipped.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| Error::Parse {
            line: i + 1,
            content: trimmed.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ten(lo: f64, hi: f64) -> Vec<f64> {
        let mut d = vec![lo; 5];
        d.extend(vec![hi; 5]);
        d
    }

    #[test]
    fn transform_without_padding_is_plain_affine() {
        let spec = fit_transform(&ten(0.0, 10.0), 0.0, false).unwrap();
        assert_eq!(spec.lower, 0.0);
        assert_eq!(spec.scale, 10.0);
        assert_eq!(spec.forward(0.0), 0.0);
        assert_eq!(spec.forward(10.0), 1.0);
    }

    #[test]
    fn padded_transform() {
        let spec = fit_transform(&ten(0.0, 10.0), 0.05, false).unwrap();
        assert!((spec.lower + 0.5).abs() < 1e-15);
        assert!((spec.scale - 11.0).abs() < 1e-14);
        assert!((spec.forward(0.0) - 1.0 / 22.0).abs() < 1e-15);
        assert!((spec.forward(10.0) - 21.0 / 22.0).abs() < 1e-15);
        let y = apply_transform(&spec, &[5.0], Direction::Forward).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_transform_endpoints() {
        let spec = fit_transform(&ten(1.0, std::f64::consts::E), 0.0, true).unwrap();
        assert_eq!(spec.lower, 0.0);
        assert!((spec.scale - 1.0).abs() < 1e-15);
        assert_eq!(spec.inverse(0.0), 1.0);
    }

    #[test]
    fn identity_transform() {
        let y = apply_transform(&TransformSpec::identity(), &[0.3], Direction::Forward).unwrap();
        assert_eq!(y, vec![0.3]);
    }

    #[test]
    fn transform_errors() {
        assert!(matches!(
            fit_transform(&[1.0, 2.0, 3.0], 0.05, false),
            Err(Error::TooFewPoints { got: 3, .. })
        ));
        assert_eq!(
            fit_transform(&[4.0; 12], 0.05, false),
            Err(Error::DegenerateRange)
        );
        let mut d = ten(0.0, 1.0);
        d[3] = f64::NAN;
        assert_eq!(fit_transform(&d, 0.05, false), Err(Error::NonFinite));
        assert_eq!(
            fit_transform(&ten(0.0, 1.0), 0.05, true),
            Err(Error::NonPositiveForLog)
        );
    }

    #[test]
    fn on_grid_point_mass() {
        let m = 401;
        let g = unit_grid(m);
        let gc = linear_bin(&[g[2]], m).unwrap();
        assert!((gc.raw_weights[2] - 1.0).abs() < 1e-12);
        let others: f64 = gc
            .raw_weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 2)
            .map(|(_, w)| w.abs())
            .sum();
        assert!(others < 1e-12);
    }

    #[test]
    fn midpoint_split_and_rounding() {
        let m = 401;
        let g = unit_grid(m);
        let gc = linear_bin(&[0.5 * (g[0] + g[1])], m).unwrap();
        assert!((gc.raw_weights[0] - 0.5).abs() < 1e-12);
        assert!((gc.raw_weights[1] - 0.5).abs() < 1e-12);
        assert_eq!(gc.counts[0], 1);
        assert_eq!(gc.counts[1], 1);
    }

    #[test]
    fn right_endpoint_goes_to_last_bin() {
        let gc = linear_bin(&[1.0], 11).unwrap();
        assert_eq!(gc.raw_weights[10], 1.0);
        assert_eq!(gc.counts[10], 1);
    }

    #[test]
    fn binning_errors() {
        assert_eq!(linear_bin(&[1.5], 401), Err(Error::OutOfRange(1.5)));
        assert_eq!(
            linear_bin(&[0.5], 10),
            Err(Error::GridTooSmall { got: 10, min: 11 })
        );
    }

    #[test]
    fn uniform_draws_conserve_mass() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let gc = linear_bin(&y, 401).unwrap();
        // oracle: per-point weights each sum to one
        let total: f64 = gc.raw_weights.iter().sum();
        assert!((total - 1000.0).abs() < 1e-9 * 1000.0);
        let counted: u64 = gc.counts.iter().sum();
        assert!((counted as i64 - 1000).abs() < 60);
    }

    #[test]
    fn parse_values_skips_comments() {
        let v = parse_values("# header\n1.5\n\n  -2\n3e1\n").unwrap();
        assert_eq!(v, vec![1.5, -2.0, 30.0]);
        assert!(matches!(
            parse_values("1\nabc\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn mass_conservation(y in proptest::collection::vec(0.0f64..=1.0, 1..300), m in 11usize..600) {
            let gc = linear_bin(&y, m).unwrap();
            let total: f64 = gc.raw_weights.iter().sum();
            prop_assert!((total - y.len() as f64).abs() <= 1e-9 * y.len() as f64);
            for (w, c) in gc.raw_weights.iter().zip(&gc.counts) {
                prop_assert_eq!(w.round() as u64, *c);
            }
        }

        #[test]
        fn interior_point_touches_two_bins(y in 0.0f64..1.0, m in 11usize..500) {
            let gc = linear_bin(&[y], m).unwrap();
            let nonzero = gc.raw_weights.iter().filter(|w| **w > 0.0).count();
            prop_assert!(nonzero <= 2);
            let l = (y * (m - 1) as f64).floor() as usize;
            prop_assert!(gc.raw_weights.iter().enumerate().all(|(i, w)| *w == 0.0 || i == l || i == l + 1));
        }

        #[test]
        fn round_trip(lo in -1e3f64..1e3, width in 1e-3f64..1e3, pad in 0.0f64..0.3, t in 0.0f64..=1.0) {
            let spec = fit_transform(&ten(lo, lo + width), pad, false).unwrap();
            let x = spec.lower + t * spec.scale;
            let back = spec.inverse(spec.forward(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(spec.scale));
            prop_assert!(spec.forward(x + width * 1e-3) > spec.forward(x));
        }
    }
}
