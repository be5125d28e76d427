use densbayes::engines::rng::substream;
use densbayes::estimator::{fit_density, trapezoid};
use densbayes::{estimate, EstimateOptions, Method, NormalMixture};

fn quick(method: Method, seed: u64) -> EstimateOptions {
    let mut o = EstimateOptions::new(method).with_seed(seed);
    o.grid_size = 101;
    o.num_basis = 20;
    o.fit.warmup = 100;
    o.fit.retained = 300;
    o
}

fn modes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let top = y.iter().copied().fold(0.0, f64::max);
    (1..y.len() - 1)
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.05 * top)
        .map(|i| x[i])
        .collect()
}

#[test]
fn estimate_is_a_normalized_nonnegative_density() {
    let data = NormalMixture::new(vec![1.0], vec![0.0], vec![1.0]).unwrap().sample(500, &mut substream(1, 0));
    for method in [Method::Slice, Method::Nuts] {
        let est = estimate(&data, &quick(method, 2)).unwrap();
        assert_eq!(est.x.len(), 101);
        assert!((trapezoid(&est.x, &est.density) - 1.0).abs() < 1e-8);
        for i in 0..est.x.len() {
            assert!(est.density[i] >= 0.0 && est.lower[i] >= 0.0);
            assert!(est.lower[i] <= est.upper[i]);
        }
        assert_eq!(est.method, method);
        assert_eq!(est.n, 500);
    }
}

#[test]
fn standard_normal_sample_gives_one_mode_near_zero() {
    let data = NormalMixture::new(vec![1.0], vec![0.0], vec![1.0]).unwrap().sample(1000, &mut substream(3, 0));
    let est = estimate(&data, &quick(Method::Slice, 4)).unwrap();
    let m = modes(&est.x, &est.density);
    assert_eq!(m.len(), 1, "modes {m:?}");
    assert!(m[0].abs() < 0.3, "mode at {}", m[0]);
}

#[test]
fn mw8_sample_recovers_both_modes() {
    let mix = NormalMixture::mw8();
    let data = mix.sample(2000, &mut substream(5, 0));
    let est = estimate(&data, &quick(Method::Slice, 6)).unwrap();
    let m = modes(&est.x, &est.density);
    assert_eq!(m.len(), 2, "modes {m:?}");
    assert!(m[0].abs() < 0.4 && (m[1] - 1.5).abs() < 0.2, "modes {m:?}");
}

#[test]
fn same_seed_same_estimate() {
    let data = NormalMixture::mw8().sample(300, &mut substream(7, 0));
    for method in [Method::Slice, Method::Nuts] {
        let a = estimate(&data, &quick(method, 8)).unwrap();
        let b = estimate(&data, &quick(method, 8)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let c = estimate(&data, &quick(method, 9)).unwrap();
        assert_ne!(a.density, c.density);
    }
}

#[test]
fn affine_change_of_data_maps_curves_exactly() {
    let data = NormalMixture::mw8().sample(400, &mut substream(10, 0));
    let moved: Vec<f64> = data.iter().map(|x| 2.0 * x + 3.0).collect();
    let a = estimate(&data, &quick(Method::Slice, 11)).unwrap();
    let b = estimate(&moved, &quick(Method::Slice, 11)).unwrap();
    for i in 0..a.x.len() {
        assert!((b.x[i] - (2.0 * a.x[i] + 3.0)).abs() < 1e-9);
        for (u, v) in [(a.density[i], b.density[i]), (a.lower[i], b.lower[i]), (a.upper[i], b.upper[i])] {
            assert!((v - u / 2.0).abs() <= 1e-9 * (1.0 + u), "point {i}: {u} vs {v}");
        }
    }
}

#[test]
fn log_transform_handles_skewed_positive_data() {
    let data: Vec<f64> = NormalMixture::new(vec![1.0], vec![0.0], vec![0.5])
        .unwrap()
        .sample(800, &mut substream(12, 0))
        .into_iter()
        .map(f64::exp)
        .collect();
    let mut opts = quick(Method::Slice, 13);
    opts.log_transform = true;
    let est = estimate(&data, &opts).unwrap();
    assert!(est.x.iter().all(|&x| x > 0.0));
    assert!((trapezoid(&est.x, &est.density) - 1.0).abs() < 1e-8);
    // lognormal(0, 0.5) has its mode at exp(-0.25)
    let m = modes(&est.x, &est.density);
    assert_eq!(m.len(), 1);
    assert!((m[0] - (-0.25f64).exp()).abs() < 0.2, "mode {}", m[0]);
}

#[test]
fn bands_from_draws_match_the_band_at_grid_points() {
    let data = NormalMixture::mw8().sample(300, &mut substream(14, 0));
    let fitted = fit_density(&data, &quick(Method::Slice, 15)).unwrap();
    let est = fitted.estimate(0.9).unwrap();
    for i in (5..95).step_by(10) {
        let (lo, hi) = fitted.band_at(est.x[i], 0.9).unwrap();
        assert!((lo - est.lower[i]).abs() < 1e-9 * (1.0 + lo));
        assert!((hi - est.upper[i]).abs() < 1e-9 * (1.0 + hi));
    }
    assert_eq!(fitted.band_at(est.x[0] - 1.0, 0.9).unwrap(), (0.0, 0.0));
}

#[test]
fn bad_inputs_are_rejected_before_fitting() {
    let opts = quick(Method::Slice, 1);
    assert!(estimate(&[1.0, 2.0, 3.0], &opts).unwrap_err().is_data_error());
    assert!(estimate(&[4.0; 20], &opts).unwrap_err().is_data_error());
    let mut bad = opts;
    bad.num_basis = 200;
    assert!(estimate(&(0..50).map(f64::from).collect::<Vec<_>>(), &bad).is_err());
}
