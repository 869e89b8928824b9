//! How much a herald raises the one-photon probability.
//!
//! Prints the heralded and unheralded signal laws side by side, the
//! correcting factor, and the gain xi(1)/xi(0) as the pump is dimmed.

use hsps::analytic::{herald_gain_ratio, signal_pmf, unheralded_pmf, xi, XiKind, DEFAULT_TOL};
use hsps::model::{FilterSpec, PairStatistics, SourceParams};

fn main() -> hsps::Result<()> {
    let params = SourceParams::new(0.01, 0.5, 0.5, 1e-4)?;
    let none = FilterSpec::none();

    for stat in [PairStatistics::Poisson, PairStatistics::Thermal] {
        let heralded = signal_pmf(stat, &params, &none, DEFAULT_TOL)?;
        let plain = unheralded_pmf(stat, &params, &none, DEFAULT_TOL)?;
        let kind = XiKind::select(stat, &none)?;
        println!("{stat} pairs, mu = {}", params.mu());
        println!("  n  {:>12} {:>12} {:>10}", "heralded", "plain", "xi");
        for n in 0..5 {
            println!(
                "  {n}  {:>12.4e} {:>12.4e} {:>10.3}",
                heralded.get(n),
                plain.get(n),
                xi(kind, n as u64, &params, &none)?
            );
        }
    }

    // as mu -> 0 both statistics approach 1 - eta_h + eta_h / d_h
    println!("\ngain xi(1)/xi(0)");
    for mu in [1e-1, 1e-2, 1e-3, 1e-6] {
        let p = params.with_mu(mu)?;
        println!(
            "  mu = {mu:<6e}  poisson {:>9.2}  thermal {:>9.2}",
            herald_gain_ratio(PairStatistics::Poisson, &p)?,
            herald_gain_ratio(PairStatistics::Thermal, &p)?
        );
    }
    println!("  limit          {:>9.2}", 1.0 - 0.5 + 0.5 / 1e-4);
    Ok(())
}
