//! Moments of the heralded signal. A Fano ratio or g2 below one marks
//! sub-Poissonian light.

use hsps::analytic::{g2_from_pmf, moments_closed_form, moments_from_pmf, signal_pmf, DEFAULT_TOL};
use hsps::model::{FilterSpec, PairStatistics, SourceParams};

fn main() -> hsps::Result<()> {
    let params = SourceParams::new(0.01, 0.5, 0.5, 1e-4)?;
    let closed = moments_closed_form(&params)?;
    println!(
        "closed form: mean {:.6}  var {:.6}  fano {:.6}",
        closed.mean,
        closed.variance,
        closed.fano.unwrap()
    );

    for stat in [PairStatistics::Poisson, PairStatistics::Thermal] {
        let pmf = signal_pmf(stat, &params, &FilterSpec::none(), DEFAULT_TOL)?;
        let m = moments_from_pmf(&pmf);
        println!(
            "{stat:>8} pmf:  mean {:.6}  var {:.6}  fano {:.6}  g2 {:.5}",
            m.mean,
            m.variance,
            m.fano.unwrap(),
            g2_from_pmf(&pmf)?
        );
    }

    // a detector that always clicks carries no information
    let blind = params.with_d_h(1.0)?;
    println!(
        "d_h = 1: fano {:.6}",
        moments_closed_form(&blind)?.fano.unwrap()
    );
    Ok(())
}
