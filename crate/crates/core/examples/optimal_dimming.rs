//! Dark counts punish a dim pump, multi-pair bins punish a bright one.
//! The Fano ratio has a minimum in between.

use hsps::optimize::{fano_at, optimize_mu, OptimizeOptions};

fn main() -> hsps::Result<()> {
    let (eta_h, eta_s, d_h) = (0.5, 0.5, 1e-4);
    let best = optimize_mu(
        eta_h,
        eta_s,
        d_h,
        &OptimizeOptions {
            bounds: (1e-5, 1.0),
            prescan: true,
            ..Default::default()
        },
    )?;
    println!(
        "mu_opt = {:.6}  fano = {:.6}  ({} evaluations)",
        best.mu_opt, best.fano_opt, best.evaluations
    );

    for mu in [1e-7, 1e-5, 1e-3, best.mu_opt, 0.1, 1.0, 10.0] {
        let fano = fano_at(eta_h, eta_s, d_h, mu)?;
        let bar = "#".repeat((fano * 40.0) as usize);
        println!("{mu:>10.3e} {fano:.4} {bar}");
    }

    // a cleaner detector moves the optimum down
    for d in [1e-3, 1e-5, 1e-6] {
        let r = optimize_mu(eta_h, eta_s, d, &OptimizeOptions::default())?;
        println!(
            "d_h = {d:e}: mu_opt = {:.3e}, fano = {:.4}",
            r.mu_opt, r.fano_opt
        );
    }
    Ok(())
}
