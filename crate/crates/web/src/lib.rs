//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every operation returns a JSON string; the plain-Rust versions in
//! [`demo`] are what the bindings wrap and what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod demo {
    use densbayes::engines::rng::substream;
    use densbayes::estimator::fit_density;
    use densbayes::evaluation::l1_accuracy;
    use densbayes::{EstimateOptions, Method, NormalMixture};
    use serde::Serialize;

    pub fn mixture(weights: &[f64], means: &[f64], sds: &[f64]) -> Result<NormalMixture, String> {
        if weights.is_empty() {
            return Ok(NormalMixture::mw8());
        }
        NormalMixture::new(weights.to_vec(), means.to_vec(), sds.to_vec()).map_err(|e| e.to_string())
    }

    #[derive(Serialize)]
    struct Curve {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    /// True density of the mixture on `points` equally spaced abscissae.
    pub fn mixture_curve(weights: &[f64], means: &[f64], sds: &[f64], points: usize) -> Result<String, String> {
        let mix = mixture(weights, means, sds)?;
        let (lo, hi) = mix.span(4.0);
        let points = points.max(2);
        let x: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
        let y = x.iter().map(|&v| mix.pdf(v)).collect();
        serde_json::to_string(&Curve { x, y }).map_err(|e| e.to_string())
    }

    /// `n` draws from the mixture, reproducible from `seed`.
    pub fn sample_mixture(weights: &[f64], means: &[f64], sds: &[f64], n: usize, seed: u64) -> Result<String, String> {
        let mix = mixture(weights, means, sds)?;
        let data = mix.sample(n, &mut substream(seed, 0));
        serde_json::to_string(&data).map_err(|e| e.to_string())
    }

    #[derive(Serialize)]
    struct Estimate {
        #[serde(flatten)]
        estimate: densbayes::DensityEstimate,
        diagnostics: std::collections::BTreeMap<String, f64>,
        /// Accuracy against the mixture, when one is given.
        accuracy: Option<f64>,
    }

    /// Density estimate with bands. When a mixture is given (non-empty
    /// `weights`), its accuracy score is included.
    #[allow(clippy::too_many_arguments)]
    pub fn estimate_density(
        data: &[f64],
        method: &str,
        grid_size: usize,
        num_basis: usize,
        samples: usize,
        seed: u64,
        level: f64,
        weights: &[f64],
        means: &[f64],
        sds: &[f64],
    ) -> Result<String, String> {
        let method: Method = method.parse().map_err(|e: densbayes::Error| e.to_string())?;
        let mut opts = EstimateOptions::new(method).with_seed(seed);
        opts.grid_size = grid_size;
        opts.num_basis = num_basis;
        opts.fit.retained = samples;
        opts.level = level;
        let fitted = fit_density(data, &opts).map_err(|e| e.to_string())?;
        let estimate = fitted.estimate(level).map_err(|e| e.to_string())?;
        let accuracy = if weights.is_empty() {
            None
        } else {
            Some(l1_accuracy(&estimate, &mixture(weights, means, sds)?))
        };
        let out = Estimate {
            estimate,
            diagnostics: fitted.samples.diagnostics.clone(),
            accuracy,
        };
        serde_json::to_string(&out).map_err(|e| e.to_string())
    }
}

/// JSON `{x, y}` of the mixture density; empty `weights` selects `mw8`.
#[wasm_bindgen(js_name = mixtureCurve)]
pub fn mixture_curve(weights: &[f64], means: &[f64], sds: &[f64], points: usize) -> Result<String, JsError> {
    demo::mixture_curve(weights, means, sds, points).map_err(|e| JsError::new(&e))
}

/// JSON array of `n` mixture draws.
#[wasm_bindgen(js_name = sampleMixture)]
pub fn sample_mixture(weights: &[f64], means: &[f64], sds: &[f64], n: usize, seed: u64) -> Result<String, JsError> {
    demo::sample_mixture(weights, means, sds, n, seed).map_err(|e| JsError::new(&e))
}

/// JSON density estimate `{x, density, lower, upper, level, method, seed, n, diagnostics, accuracy}`.
#[wasm_bindgen(js_name = estimateDensity)]
#[allow(clippy::too_many_arguments)]
pub fn estimate_density(
    data: &[f64],
    method: &str,
    grid_size: usize,
    num_basis: usize,
    samples: usize,
    seed: u64,
    level: f64,
    weights: &[f64],
    means: &[f64],
    sds: &[f64],
) -> Result<String, JsError> {
    demo::estimate_density(data, method, grid_size, num_basis, samples, seed, level, weights, means, sds)
        .map_err(|e| JsError::new(&e))
}
