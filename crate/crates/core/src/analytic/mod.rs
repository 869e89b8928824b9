//! Exact photon-number statistics of a heralded source.
//!
//! Every conditional law here factors as an unconditioned law of the signal
//! branch times a correcting factor `xi(n)` that accounts for the herald. The
//! closed forms are paired with direct series evaluations of the same model
//! ([`conditional_pmf_series`], [`herald_filter_convolution_oracle`]) so the two
//! routes can be checked against each other.

mod laguerre;
mod moments;
mod pmf;
mod series;
mod xi;

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{FilterBranch, FilterSpec, PairStatistics, SourceParams};

pub use laguerre::{laguerre, MAX_LAGUERRE_ORDER};
pub use moments::{g2_from_pmf, gamma, moments_closed_form, moments_from_pmf};
pub use pmf::{
    asymptotic_tail_asymptote, asymptotic_tail_check, signal_pmf, signal_pmf_with_min_terms,
    unheralded_pmf, DEFAULT_TOL,
};
pub use series::{
    conditional_pmf_series, herald_filter_binomial_convolution, herald_filter_convolution_oracle,
    signal_filter_series,
};
pub use xi::{herald_gain_ratio, nu_h, xi, xi_herald_laguerre, xi_limit, XiKind};

/// Click probability of a threshold detector, `1 - (1 - dark) exp(ln_miss)`,
/// where `exp(ln_miss)` is the probability that every photon escapes detection.
///
/// Near `ln_miss = 0` the difference is formed through `expm1` so small click
/// probabilities keep full relative precision. The result never exceeds 1.
pub(crate) fn click_probability(dark: f64, ln_miss: f64) -> f64 {
    if ln_miss < -LN_2 {
        1.0 - (1.0 - dark) * ln_miss.exp()
    } else {
        dark + (1.0 - dark) * -ln_miss.exp_m1()
    }
}

/// `n ln(1 - eta)`; exact zero for `n = 0` even when `eta = 1`.
pub(crate) fn ln_survival(n: u64, eta: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * (-eta).ln_1p()
    }
}

/// `ln n!`, exact summation for small `n`, Stirling series beyond.
pub(crate) fn ln_factorial(n: u64) -> f64 {
    if n < 32 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64;
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        x * x.ln() - x
            + 0.5 * (std::f64::consts::TAU * x).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}

/// Poisson probability `e^-m m^k / k!`.
pub(crate) fn poisson_pmf(m: f64, k: u64) -> f64 {
    if m == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k <= 64 {
        let mut p = (-m).exp();
        for i in 1..=k {
            p *= m / i as f64;
        }
        p
    } else {
        (k as f64 * m.ln() - m - ln_factorial(k)).exp()
    }
}

/// Upper bound on `P(X >= k)` for `X ~ Poisson(m)`.
pub(crate) fn poisson_tail_bound(m: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if m == 0.0 {
        return 0.0;
    }
    let ratio = m / (k as f64 + 1.0);
    if ratio >= 1.0 {
        return 1.0;
    }
    (poisson_pmf(m, k) / (1.0 - ratio)).min(1.0)
}

/// Probability that `n` of `total` photons cross a beam splitter of
/// transmission `eta`: `C(total, n) eta^n (1 - eta)^(total - n)`.
pub fn binomial_loss(total: u64, n: u64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Validation {
            field: "eta",
            value: eta,
            reason: "must lie in [0, 1]",
        });
    }
    if n > total {
        return Err(Error::CountOutOfRange { n, total });
    }
    if eta == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    if eta == 1.0 {
        return Ok(if n == total { 1.0 } else { 0.0 });
    }
    let k = n.min(total - n);
    let ln_choose: f64 = (1..=k)
        .map(|i| ((total - k + i) as f64 / i as f64).ln())
        .sum();
    Ok((ln_choose + n as f64 * eta.ln() + (total - n) as f64 * (-eta).ln_1p()).exp())
}

/// Probability that the herald fires when `pairs` pairs were emitted:
/// `1 - (1 - d_h)(1 - eta_h)^pairs`.
pub fn herald_prob(pairs: u64, params: &SourceParams) -> f64 {
    click_probability(params.d_h(), ln_survival(pairs, params.eta_h()))
}

/// Probability that a time bin carries a herald, the normalizer of every
/// conditional law.
pub fn herald_rate(
    stat: PairStatistics,
    params: &SourceParams,
    filter: &FilterSpec,
) -> Result<f64> {
    filter.check_statistics(stat)?;
    let (mu, eta_h, dark, f) = (params.mu(), params.eta_h(), params.d_h(), filter.f());
    let ln_miss = match (stat, filter.branch()) {
        (PairStatistics::Poisson, FilterBranch::None) => -mu * eta_h,
        (PairStatistics::Thermal, _) => -(mu * eta_h).ln_1p(),
        (PairStatistics::Poisson, FilterBranch::Herald) => -(mu * f * eta_h).ln_1p(),
        (PairStatistics::Poisson, FilterBranch::Signal) => {
            -(mu * f * eta_h).ln_1p() - mu * (1.0 - f) * eta_h
        }
    };
    Ok(click_probability(dark, ln_miss))
}

/// Probability of emitting `pairs` pairs in one time bin.
pub fn input_pmf(stat: PairStatistics, mu: f64, pairs: u64) -> f64 {
    match stat {
        PairStatistics::Poisson => poisson_pmf(mu, pairs),
        PairStatistics::Thermal => {
            if mu == 0.0 {
                return if pairs == 0 { 1.0 } else { 0.0 };
            }
            (pairs as f64 * (mu.ln() - mu.ln_1p())).exp() / (1.0 + mu)
        }
    }
}

/// Upper bound on the input mass strictly above `pairs`.
pub(crate) fn input_tail_bound(stat: PairStatistics, mu: f64, pairs: u64) -> f64 {
    match stat {
        PairStatistics::Poisson => poisson_tail_bound(mu, pairs + 1),
        PairStatistics::Thermal => {
            if mu == 0.0 {
                0.0
            } else {
                ((pairs + 1) as f64 * (mu.ln() - mu.ln_1p())).exp()
            }
        }
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Validation {
            field: "tol",
            value: tol,
            reason: "must lie in (0, 1)",
        });
    }
    Ok(tol)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn herald_rate_matches_sums() {
        let p = SourceParams::new(0.3, 0.4, 0.6, 2e-3).unwrap();
        for stat in [PairStatistics::Poisson, PairStatistics::Thermal] {
            let direct: f64 = (0..400)
                .map(|n| input_pmf(stat, 0.3, n) * herald_prob(n, &p))
                .sum();
            let rate = herald_rate(stat, &p, &FilterSpec::none()).unwrap();
            assert_relative_eq!(rate, direct, max_relative = 1e-13);
        }
        // herald filter: only the kept thermal mode (mean mu f) reaches the detector
        let f = 0.25;
        let kept: f64 = (0..400)
            .map(|n| input_pmf(PairStatistics::Thermal, 0.3 * f, n) * herald_prob(n, &p))
            .sum();
        let rate =
            herald_rate(PairStatistics::Poisson, &p, &FilterSpec::herald(f).unwrap()).unwrap();
        assert_relative_eq!(rate, kept, max_relative = 1e-13);
        // signal filter: kept and extraneous pairs both reach it
        let both: f64 = (0..200)
            .flat_map(|a| (0..200).map(move |b| (a, b)))
            .map(|(a, b)| {
                input_pmf(PairStatistics::Thermal, 0.3 * f, a)
                    * input_pmf(PairStatistics::Poisson, 0.3 * (1.0 - f), b)
                    * herald_prob(a + b, &p)
            })
            .sum();
        let rate =
            herald_rate(PairStatistics::Poisson, &p, &FilterSpec::signal(f).unwrap()).unwrap();
        assert_relative_eq!(rate, both, max_relative = 1e-12);
    }

    fn baseline() -> SourceParams {
        SourceParams::new(0.01, 0.5, 0.5, 1e-4).unwrap()
    }

    #[test]
    fn binomial_loss_examples() {
        assert_relative_eq!(binomial_loss(2, 1, 0.5).unwrap(), 0.5, max_relative = 1e-15);
        assert_eq!(binomial_loss(5, 5, 1.0).unwrap(), 1.0);
        // 3 * 0.2 * 0.8^2
        assert_relative_eq!(
            binomial_loss(3, 1, 0.2).unwrap(),
            0.384,
            max_relative = 1e-14
        );
        assert_eq!(
            binomial_loss(2, 3, 0.5),
            Err(Error::CountOutOfRange { n: 3, total: 2 })
        );
        assert!(binomial_loss(2, 1, 1.5).is_err());
    }

    #[test]
    fn binomial_loss_rows_sum_to_one() {
        for total in [0u64, 1, 7, 40, 300] {
            for eta in [0.0, 0.05, 0.5, 0.93, 1.0] {
                let s: f64 = (0..=total)
                    .map(|n| binomial_loss(total, n, eta).unwrap())
                    .sum();
                assert_relative_eq!(s, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn herald_prob_examples() {
        assert_eq!(herald_prob(0, &baseline()), 1e-4);
        let p = SourceParams::new(0.01, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(herald_prob(1, &p), 0.5);
        assert_relative_eq!(herald_prob(2, &baseline()), 0.750025, max_relative = 1e-15);
        let perfect = SourceParams::new(0.01, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(herald_prob(0, &perfect), 0.0);
        assert_eq!(herald_prob(3, &perfect), 1.0);
    }

    #[test]
    fn input_pmf_examples() {
        assert_eq!(input_pmf(PairStatistics::Poisson, 0.0, 0), 1.0);
        assert_eq!(input_pmf(PairStatistics::Thermal, 1.0, 1), 0.25);
        assert_relative_eq!(
            input_pmf(PairStatistics::Poisson, 0.01, 2),
            4.950_249_168_745_840_3e-5,
            max_relative = 1e-14
        );
        assert_eq!(input_pmf(PairStatistics::Thermal, 0.0, 3), 0.0);
    }

    #[test]
    fn input_laws_normalize() {
        for mu in [1e-4, 0.3, 1.0, 4.0] {
            for stat in [PairStatistics::Poisson, PairStatistics::Thermal] {
                let s: f64 = (0..2000).map(|n| input_pmf(stat, mu, n)).sum();
                assert_relative_eq!(s, 1.0, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn tail_bounds_dominate_true_tails() {
        for mu in [1e-3, 0.5, 3.0] {
            for stat in [PairStatistics::Poisson, PairStatistics::Thermal] {
                for n in [0u64, 1, 5, 20] {
                    let exact: f64 = (n + 1..400).map(|k| input_pmf(stat, mu, k)).sum();
                    assert!(input_tail_bound(stat, mu, n) >= exact * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn stirling_matches_direct_sum() {
        for n in [32u64, 50, 100, 170] {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            assert_relative_eq!(ln_factorial(n), direct, max_relative = 1e-14);
        }
    }

    #[test]
    fn click_probability_is_accurate_for_tiny_arguments() {
        // 1 - (1 - 1e-4) e^{-1e-9} = 1e-4 + (1 - 1e-4)(1 - e^{-1e-9})
        let p = click_probability(1e-4, -1e-9);
        assert_relative_eq!(p, 1e-4 + 0.9999 * 9.999_999_995e-10, max_relative = 1e-14);
        assert_eq!(click_probability(0.0, 0.0), 0.0);
        assert_eq!(click_probability(0.3, f64::NEG_INFINITY), 1.0);
    }
}
