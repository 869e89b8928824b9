//! Fano ratio against mu for Poisson and thermal pairs, written as CSV to
//! stdout. Pipe into a plotting tool of your choice.

use hsps::analytic::DEFAULT_TOL;
use hsps::model::{PairStatistics, Scenario, SourceParams};
use hsps::optimize::{logspace, sweep, SweepAxis};
use hsps::output::{Cell, Format, OutputRecord};

fn main() -> hsps::Result<()> {
    let params = SourceParams::new(0.01, 0.5, 0.5, 1e-4)?;
    let grid = logspace(1e-4, 1.0, 50);
    let mut rec = OutputRecord::new("dimming_sweep", &["mu", "fano_poisson", "fano_thermal"])
        .input("eta_h", params.eta_h())
        .input("eta_s", params.eta_s())
        .input("d_h", params.d_h());

    let curves = [PairStatistics::Poisson, PairStatistics::Thermal].map(|stat| {
        sweep(
            &Scenario::unfiltered(stat, params),
            DEFAULT_TOL,
            SweepAxis::Mu,
            &grid,
        )
    });
    let [poisson, thermal] = curves;
    let (poisson, thermal) = (poisson?, thermal?);
    let fano = |row: &hsps::optimize::SweepRow| {
        Cell::from(row.outcome.as_ref().ok().and_then(|p| p.moments.fano))
    };
    for (a, b) in poisson.rows.iter().zip(&thermal.rows) {
        rec.push_row(vec![a.value.into(), fano(a), fano(b)]);
    }
    rec.write(Format::Csv, std::io::stdout().lock())
}
