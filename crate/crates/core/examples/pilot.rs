//! Pilot study on the mw8 mixture: per-fit timing, accuracy and decile coverage.
//!
//! ```text
//! cargo run --release -p densbayes --example pilot -- [method] [n] [reps] [seed]
//! ```

use densbayes::evaluation::{accuracy_experiment, coverage_experiment, median, MIN_COVERAGE_REPLICATIONS};
use densbayes::{EstimateOptions, Method, NormalMixture};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let method: Method = args.first().map(|s| s.parse().unwrap()).unwrap_or(Method::Slice);
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let reps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(20);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(2024);

    let mix = NormalMixture::mw8();
    let opts = EstimateOptions::new(method);

    let records = accuracy_experiment(&mix, n, reps, &opts, seed).unwrap();
    let mut acc: Vec<f64> = records.iter().filter_map(|r| r.accuracy).collect();
    let secs: Vec<f64> = records.iter().map(|r| r.seconds).collect();
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "accuracy: method={method} n={n} reps={reps} failures={failures} median={:.3} min={:.3} max-seconds={:.2}",
        median(&mut acc),
        acc.first().copied().unwrap_or(f64::NAN), // sorted by `median`
        secs.iter().copied().fold(0.0, f64::max)
    );

    let cov_reps = reps.max(MIN_COVERAGE_REPLICATIONS);
    let table = coverage_experiment(&mix, n, cov_reps, &opts, seed).unwrap();
    println!("coverage: reps={cov_reps} failures={} mean={:.2}", table.failures, table.mean_coverage());
    for (j, c) in table.coverage_pct.iter().enumerate() {
        println!("  D{} = {:.4}: {:.1}%", j + 1, table.deciles[j], c);
    }
}
