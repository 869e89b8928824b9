//! Simulate the source photon by photon and compare with the exact law.
//! The same seed gives the same histogram on any number of threads.

use hsps::analytic::{herald_rate, signal_pmf, DEFAULT_TOL};
use hsps::model::{FilterSpec, PairStatistics, SourceParams};
use hsps::montecarlo::{simulate, McConfig};

fn main() -> hsps::Result<()> {
    let params = SourceParams::new(0.2, 0.5, 0.5, 1e-3)?;
    let trials = 2_000_000;
    for (stat, filter) in [
        (PairStatistics::Poisson, FilterSpec::none()),
        (PairStatistics::Thermal, FilterSpec::none()),
        (PairStatistics::Poisson, FilterSpec::herald(0.3)?),
    ] {
        let config = McConfig::new(params, stat, filter, trials, 2024)?;
        let est = simulate(&config)?;
        let exact = signal_pmf(stat, &params, &filter, DEFAULT_TOL)?;
        println!(
            "{stat} / {} filter: herald rate {:.5} (exact {:.5}), {} heralds",
            filter.branch(),
            est.herald_rate,
            herald_rate(stat, &params, &filter)?,
            est.heralded
        );
        for n in 0..4 {
            println!(
                "  p({n}) = {:.5} +- {:.5}   exact {:.5}",
                est.get(n),
                est.stderr[n],
                exact.get(n)
            );
        }
        let (z, bin) = est.worst_z(exact.probs(), 1e-6);
        println!("  worst deviation {z:.2} sigma at n = {bin}");
        assert_eq!(est, simulate(&config)?);
    }
    Ok(())
}
