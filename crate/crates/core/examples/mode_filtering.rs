//! Keeping a single mode with a filter. On the signal arm it strips photons
//! whose twins could still herald; on the herald arm it leaves extraneous
//! signal photons that dominate the multi-photon tail.

use hsps::analytic::{
    asymptotic_tail_check, g2_from_pmf, signal_pmf, xi_herald_laguerre, DEFAULT_TOL,
};
use hsps::model::{FilterSpec, PairStatistics, SourceParams};

fn main() -> hsps::Result<()> {
    let params = SourceParams::new(0.01, 0.5, 0.5, 1e-4)?;
    let f = 0.1;
    let cases = [
        ("none", FilterSpec::none()),
        ("signal", FilterSpec::signal(f)?),
        ("herald", FilterSpec::herald(f)?),
    ];
    println!(
        "{:>7} {:>11} {:>11} {:>11} {:>8}",
        "filter", "p(0)", "p(1)", "p(2)", "g2"
    );
    for (name, filter) in cases {
        let pmf = signal_pmf(PairStatistics::Poisson, &params, &filter, DEFAULT_TOL)?;
        println!(
            "{name:>7} {:>11.4e} {:>11.4e} {:>11.4e} {:>8.4}",
            pmf.get(0),
            pmf.get(1),
            pmf.get(2),
            g2_from_pmf(&pmf)?
        );
    }

    println!("\nherald filter, large n: exact vs extraneous-only asymptote");
    for n in [2, 4, 8, 12, 16] {
        let (exact, asym) = asymptotic_tail_check(&params, f, n)?;
        println!(
            "  n = {n:>2}  {exact:.4e}  {asym:.4e}  ratio {:.3}",
            exact / asym
        );
    }

    // the Laguerre closed form, for comparison with published curves
    println!(
        "\nLaguerre-form xi_h(n): {:?}",
        (0..4)
            .map(|n| xi_herald_laguerre(n, &params, f).map(|x| (x * 1e3).round() / 1e3))
            .collect::<hsps::Result<Vec<_>>>()?
    );
    Ok(())
}
