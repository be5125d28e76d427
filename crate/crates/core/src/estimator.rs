//! From posterior draws to a normalized density with pointwise bands.
//!
//! The point estimate normalizes the posterior mean of the intensity curve.
//! Credible bands are pointwise quantiles of the individually normalized
//! per-draw curves, so the point estimate need not lie inside its band.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::engines::{self, FitConfig, Method, PosteriorSamples};
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::preprocessing::{self, GridCounts, TransformSpec};
use crate::splines::{SplineDesign, DEFAULT_NUM_BASIS};

pub const DEFAULT_LEVEL: f64 = 0.95;
pub const MIN_BAND_DRAWS: usize = 100;

/// Trapezoid rule for samples `y` at abscissae `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Exponentiated spline curves for every draw: row `g` is `exp(L coef_g)`
/// where `L` holds the basis rows of the evaluation points.
fn draw_curves(ps: &PosteriorSamples, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut curves = &ps.coef * rows.transpose();
    for v in curves.iter_mut() {
        *v = v.exp();
        if !v.is_finite() {
            return Err(Error::NonFiniteResult("intensity curve overflowed"));
        }
    }
    Ok(curves)
}

/// Normalized posterior-mean curve and per-draw normalized curves (one row
/// per draw) on `eval_grid`, a grid spanning `[0, 1]`.
pub fn density_from_samples(
    ps: &PosteriorSamples,
    sd: &SplineDesign,
    eval_grid: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let rows = sd.design_at(eval_grid)?;
    let mut curves = draw_curves(ps, &rows)?;
    let r = curves.nrows() as f64;
    let mut mean: Vec<f64> = (0..curves.ncols()).map(|i| curves.column(i).sum() / r).collect();
    let c = trapezoid(eval_grid, &mean);
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::NonFiniteResult("normalizing constant is not positive"));
    }
    mean.iter_mut().for_each(|v| *v /= c);
    for g in 0..curves.nrows() {
        let row: Vec<f64> = curves.row(g).iter().copied().collect();
        let cg = trapezoid(eval_grid, &row);
        curves.row_mut(g).iter_mut().for_each(|v| *v /= cg);
    }
    Ok((mean, curves))
}

/// Linear interpolation between order statistics: the value at 0-based
/// fractional rank `(n - 1) p` of the sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.5 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("credible level must lie in (0.5, 1), got {level}")))
    }
}

/// Pointwise equal-tailed band at `level` from per-draw curves (rows).
pub fn credible_band(curves: &DMatrix<f64>, level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_level(level)?;
    if curves.nrows() < MIN_BAND_DRAWS {
        return Err(Error::TooFewDraws {
            got: curves.nrows(),
            min: MIN_BAND_DRAWS,
        });
    }
    let tail = (1.0 - level) / 2.0;
    let mut lower = Vec::with_capacity(curves.ncols());
    let mut upper = Vec::with_capacity(curves.ncols());
    for col in curves.column_iter() {
        let mut v: Vec<f64> = col.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&v, tail));
        upper.push(quantile_sorted(&v, 1.0 - tail));
    }
    Ok((lower, upper))
}

/// Curves on the unit interval prior to back-transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitEstimate {
    pub y: Vec<f64>,
    pub density: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub method: Method,
    pub seed: u64,
    pub n: usize,
    #[serde(skip)]
    pub transform: Option<TransformSpec>,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }

    /// Linear interpolation of the point estimate; zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        interpolate(&self.x, &self.density, x)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density,lower,upper\n");
        for i in 0..self.x.len() {
            out.push_str(&format!("{},{},{},{}\n", self.x[i], self.density[i], self.lower[i], self.upper[i]));
        }
        out
    }
}

/// Piecewise-linear interpolation on increasing `xs`, zero outside.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] || x.is_nan() {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x);
    if i >= n {
        return ys[n - 1];
    }
    if i == 0 {
        return ys[0];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

/// Maps unit-interval curves to the original units. The final curves are
/// rescaled by their trapezoid integral on the original-units grid, which
/// only has an effect (of discretization size) when the log map is used.
pub fn back_transform(
    unit: &UnitEstimate,
    spec: &TransformSpec,
    level: f64,
    method: Method,
    seed: u64,
    n: usize,
) -> DensityEstimate {
    let x: Vec<f64> = unit.y.iter().map(|&y| spec.inverse(y)).collect();
    let jac: Vec<f64> = x.iter().map(|&xv| spec.jacobian(xv)).collect();
    let scale = |curve: &[f64]| -> Vec<f64> { curve.iter().zip(&jac).map(|(v, j)| v * j).collect() };
    let mut density = scale(&unit.density);
    let mut lower = scale(&unit.lower);
    let mut upper = scale(&unit.upper);
    if spec.log_applied {
        let c = trapezoid(&x, &density);
        for curve in [&mut density, &mut lower, &mut upper] {
            curve.iter_mut().for_each(|v| *v /= c);
        }
    }
    DensityEstimate {
        x,
        density,
        lower,
        upper,
        level,
        method,
        seed,
        n,
        transform: Some(*spec),
    }
}

/// Options for the end-to-end estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub grid_size: usize,
    pub num_basis: usize,
    pub padding: f64,
    pub log_transform: bool,
    pub level: f64,
    pub hyper: Hyperparameters,
    pub fit: FitConfig,
}

impl EstimateOptions {
    pub fn new(method: Method) -> Self {
        EstimateOptions {
            grid_size: preprocessing::DEFAULT_GRID_SIZE,
            num_basis: DEFAULT_NUM_BASIS,
            padding: preprocessing::DEFAULT_PADDING,
            log_transform: false,
            level: DEFAULT_LEVEL,
            hyper: Hyperparameters::default(),
            fit: FitConfig::new(method),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.fit.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        self.hyper.validate()?;
        self.fit.validate()?;
        if self.grid_size < preprocessing::MIN_GRID_SIZE {
            return Err(Error::GridTooSmall {
                got: self.grid_size,
                min: preprocessing::MIN_GRID_SIZE,
            });
        }
        if self.num_basis < crate::splines::MIN_BASIS || self.num_basis + 2 > self.grid_size {
            return Err(Error::BadBasisSize(self.num_basis));
        }
        Ok(())
    }
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions::new(Method::Slice)
    }
}

/// A fitted model able to report the density and bands anywhere.
#[derive(Debug, Clone)]
pub struct FittedDensity {
    pub transform: TransformSpec,
    pub counts: GridCounts,
    pub design: SplineDesign,
    pub samples: PosteriorSamples,
    pub seed: u64,
    pub n: usize,
    /// Per-draw normalized curves on the binning grid (one row per draw).
    pub draw_curves: DMatrix<f64>,
    pub mean_curve: Vec<f64>,
    draw_normalizers: Vec<f64>,
}

impl FittedDensity {
    pub fn unit_grid(&self) -> &[f64] {
        &self.design.grid
    }

    pub fn unit_estimate(&self, level: f64) -> Result<UnitEstimate> {
        let (lower, upper) = credible_band(&self.draw_curves, level)?;
        Ok(UnitEstimate {
            y: self.unit_grid().to_vec(),
            density: self.mean_curve.clone(),
            lower,
            upper,
        })
    }

    pub fn estimate(&self, level: f64) -> Result<DensityEstimate> {
        let unit = self.unit_estimate(level)?;
        Ok(back_transform(&unit, &self.transform, level, self.samples.method, self.seed, self.n))
    }

    /// Per-draw normalized densities (original units) at the point `x`.
    pub fn draws_at(&self, x: f64) -> Result<Vec<f64>> {
        let y = self.transform.forward(x);
        if !(0.0..=1.0).contains(&y) {
            return Ok(vec![0.0; self.samples.len()]);
        }
        let row = self.design.design_at(&[y])?;
        let curves = draw_curves(&self.samples, &row)?;
        let jac = self.transform.jacobian(x);
        Ok(curves
            .column(0)
            .iter()
            .zip(&self.draw_normalizers)
            .map(|(v, c)| v / c * jac)
            .collect())
    }

    /// Pointwise credible interval for the density value at `x`.
    pub fn band_at(&self, x: f64, level: f64) -> Result<(f64, f64)> {
        check_level(level)?;
        let mut draws = self.draws_at(x)?;
        draws.sort_by(f64::total_cmp);
        let tail = (1.0 - level) / 2.0;
        Ok((quantile_sorted(&draws, tail), quantile_sorted(&draws, 1.0 - tail)))
    }

    /// Batch-means Monte Carlo standard error of the unit-interval point
    /// estimate on the binning grid. Each batch forms its own ratio
    /// estimate (mean curve over mean normalizer).
    pub fn point_estimate_mcse(&self, n_batches: usize) -> Vec<f64> {
        let r = self.samples.len();
        let size = r / n_batches;
        let m = self.unit_grid().len();
        let mut batch_curves = vec![vec![0.0; m]; n_batches];
        for (b, curve) in batch_curves.iter_mut().enumerate() {
            let mut norm = 0.0;
            for g in b * size..(b + 1) * size {
                let c = self.draw_normalizers[g];
                norm += c;
                for (i, v) in curve.iter_mut().enumerate() {
                    *v += self.draw_curves[(g, i)] * c;
                }
            }
            curve.iter_mut().for_each(|v| *v /= norm);
        }
        (0..m)
            .map(|i| {
                let vals: Vec<f64> = batch_curves.iter().map(|c| c[i]).collect();
                let mean = vals.iter().sum::<f64>() / n_batches as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_batches as f64 - 1.0);
                (var / n_batches as f64).sqrt()
            })
            .collect()
    }
}

/// Runs preprocessing, binning, basis construction and the chosen engine.
pub fn fit_density(data: &[f64], opts: &EstimateOptions) -> Result<FittedDensity> {
    opts.validate()?;
    let transform = preprocessing::fit_transform(data, opts.padding, opts.log_transform)?;
    let y = preprocessing::apply_transform(&transform, data, preprocessing::Direction::Forward)?;
    // rounding can push the extreme points a hair outside [0, 1]
    let y: Vec<f64> = y.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let counts = preprocessing::linear_bin(&y, opts.grid_size)?;
    let design = SplineDesign::new(&counts.grid, opts.num_basis)?;
    let samples = engines::fit(&counts, &design, &opts.hyper, &opts.fit)?;

    let grid = design.grid.clone();
    let (mean_curve, per_draw) = density_from_samples(&samples, &design, &grid)?;
    let raw = draw_curves(&samples, &design.design)?;
    let draw_normalizers = (0..raw.nrows())
        .map(|g| {
            let row: Vec<f64> = raw.row(g).iter().copied().collect();
            trapezoid(&grid, &row)
        })
        .collect();
    Ok(FittedDensity {
        transform,
        counts,
        design,
        samples,
        seed: opts.fit.seed,
        n: data.len(),
        draw_curves: per_draw,
        mean_curve,
        draw_normalizers,
    })
}

/// Density estimate with pointwise credible bands in the original units.
pub fn estimate(data: &[f64], opts: &EstimateOptions) -> Result<DensityEstimate> {
    fit_density(data, opts)?.estimate(opts.level)
}
