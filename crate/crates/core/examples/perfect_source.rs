//! Even a lossless, noiseless source is not a single-photon source: the
//! herald removes the vacuum but cannot remove multi-pair bins.

use hsps::analytic::{signal_pmf, DEFAULT_TOL};
use hsps::model::{FilterSpec, PairStatistics, SourceParams};

fn main() -> hsps::Result<()> {
    println!(
        "{:>6} {:>10} {:>14} {:>14}",
        "mu", "stat", "p(1)", "expected"
    );
    for mu in [0.001, 0.01, 0.1, 1.0] {
        let params = SourceParams::new(mu, 1.0, 1.0, 0.0)?;
        for (stat, expected) in [
            (PairStatistics::Poisson, mu / mu.exp_m1()),
            (PairStatistics::Thermal, 1.0 / (1.0 + mu)),
        ] {
            let pmf = signal_pmf(stat, &params, &FilterSpec::none(), DEFAULT_TOL)?;
            assert_eq!(pmf.get(0), 0.0);
            println!("{mu:>6} {stat:>10} {:>14.10} {expected:>14.10}", pmf.get(1));
        }
    }
    Ok(())
}
