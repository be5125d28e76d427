use densbayes::evaluation::{accuracy_experiment, coverage_experiment, coverage_with};
use densbayes::{EstimateOptions, Method, NormalMixture};

fn small_opts() -> EstimateOptions {
    let mut o = EstimateOptions::new(Method::Slice);
    o.grid_size = 51;
    o.num_basis = 10;
    o.fit.warmup = 50;
    o.fit.retained = 200;
    o
}

#[test]
fn unbounded_bands_always_cover() {
    let t = coverage_with(&NormalMixture::mw8(), 50, 60, Method::Slice, 0.95, 1, |_, _| {
        Ok(vec![(0.0, f64::INFINITY); 9])
    })
    .unwrap();
    assert!(t.coverage_pct.iter().all(|&c| c == 100.0));
}

#[test]
fn zero_width_bands_never_cover() {
    let t = coverage_with(&NormalMixture::mw8(), 50, 60, Method::Slice, 0.95, 1, |data, _| {
        let m = data.iter().sum::<f64>() / data.len() as f64;
        Ok(vec![(m, m); 9])
    })
    .unwrap();
    assert!(t.coverage_pct.iter().all(|&c| c == 0.0));
}

#[test]
fn failures_are_reported_and_excluded() {
    let t = coverage_with(&NormalMixture::mw8(), 50, 60, Method::Slice, 0.95, 1, |_, stream| {
        if stream % 4 == 1 {
            Err(densbayes::Error::SliceStuck(1000))
        } else {
            Ok(vec![(0.0, 1.0); 9])
        }
    })
    .unwrap();
    assert_eq!(t.failures, 30);
    assert_eq!(t.failure_messages.len(), 30);
    assert!(t.coverage_pct.iter().all(|&c| c == 100.0));
}

#[test]
fn wider_level_never_lowers_coverage() {
    let mix = NormalMixture::mw8();
    let mut last = vec![0.0; 9];
    for level in [0.6, 0.95, 0.999999] {
        let mut o = small_opts();
        o.level = level;
        let t = coverage_experiment(&mix, 200, 50, &o, 3).unwrap();
        assert_eq!(t.failures, 0);
        for (c, l) in t.coverage_pct.iter().zip(&last) {
            assert!(c >= l, "level {level}: {:?} after {:?}", t.coverage_pct, last);
        }
        last = t.coverage_pct;
    }
}

#[cfg(feature = "parallel")]
#[test]
fn tables_do_not_depend_on_thread_count() {
    let mix = NormalMixture::mw8();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let cov = coverage_experiment(&mix, 150, 50, &small_opts(), 5).unwrap();
            let acc: Vec<_> = accuracy_experiment(&mix, 150, 8, &small_opts(), 5)
                .unwrap()
                .into_iter()
                .map(|r| r.accuracy)
                .collect();
            (cov, acc)
        })
    };
    let (c1, a1) = run(1);
    let (c4, a4) = run(4);
    assert_eq!(c1, c4);
    assert_eq!(a1, a4);
}
