//! Engine diagnostics for one default fit on an mw8 sample.
//!
//! ```text
//! cargo run --release -p densbayes --example diagnostics -- [method] [n] [seed]
//! ```

use densbayes::engines::rng::substream;
use densbayes::estimator::fit_density;
use densbayes::{EstimateOptions, Method, NormalMixture};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let method: Method = args.first().map(|s| s.parse().unwrap()).unwrap_or(Method::Nuts);
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(500);
    let seed: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);

    let data = NormalMixture::mw8().sample(n, &mut substream(seed, 0));
    let fitted = fit_density(&data, &EstimateOptions::new(method).with_seed(seed)).unwrap();
    for (k, v) in &fitted.samples.diagnostics {
        println!("{k} = {v:.6}");
    }
    let s2 = &fitted.samples.sigma2;
    println!("sigma2 median = {:.4}", {
        let mut v = s2.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    });
}
