//! Direct series evaluation of the heralding model. These sums follow the
//! definition of the conditional law (emit, thin, click, condition) and share
//! no algebra with the closed forms, so they serve as reference values.

use super::{check_tol, herald_prob, input_pmf, input_tail_bound, poisson_tail_bound};
use crate::error::{Error, Result};
use crate::model::{FilterSpec, PairStatistics, Pmf, SourceParams};

const MAX_PAIRS: u64 = 100_000;

/// `out[n] = sum_N weights[N] C(N, n) eta^n (1 - eta)^(N - n)`, built one
/// Pascal row at a time so every step is a convex combination.
fn thin(weights: &[f64], eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    let mut row = vec![1.0];
    for (pairs, &w) in weights.iter().enumerate() {
        if pairs > 0 {
            let mut next = vec![0.0; pairs + 1];
            for (n, &r) in row.iter().enumerate() {
                next[n] += r * (1.0 - eta);
                next[n + 1] += r * eta;
            }
            row = next;
        }
        for (o, &r) in out.iter_mut().zip(&row) {
            *o += w * r;
        }
    }
    out
}

/// Input weights `P_in(N) H(N)` up to the point where the remaining input
/// mass is below `rel_tol` times the accumulated herald probability.
/// Returns `(weights, herald probability, neglected input mass)`.
fn heralded_weights(
    stat: PairStatistics,
    params: &SourceParams,
    mu: f64,
    rel_tol: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    if params.d_h() == 0.0 && (mu == 0.0 || params.eta_h() == 0.0) {
        return Err(Error::NoHerald);
    }
    let mut weights = Vec::new();
    let mut herald = 0.0;
    for pairs in 0..MAX_PAIRS {
        let w = input_pmf(stat, mu, pairs) * herald_prob(pairs, params);
        weights.push(w);
        herald += w;
        let tail = input_tail_bound(stat, mu, pairs);
        if herald > 0.0 && tail <= rel_tol * herald {
            return Ok((weights, herald, tail));
        }
    }
    Err(Error::Truncation {
        max_terms: MAX_PAIRS as usize,
    })
}

/// Drops the longest suffix whose mass, added to `extra`, stays within `tol`.
fn trim(mut probs: Vec<f64>, extra: f64, tol: f64) -> Result<Pmf> {
    let mut tail = extra;
    while probs.len() > 1 {
        let last = *probs.last().expect("non-empty");
        if tail + last > tol {
            break;
        }
        tail += last;
        probs.pop();
    }
    for p in &mut probs {
        *p = p.clamp(0.0, 1.0);
    }
    Pmf::new(probs, tail.min(1.0))
}

/// Conditional signal law by direct summation over the emitted pair number:
/// `p(n) = sum_N C(N,n) P_in(N) H(N) eta_s^n (1-eta_s)^(N-n) / sum_N P_in(N) H(N)`.
pub fn conditional_pmf_series(
    stat: PairStatistics,
    params: &SourceParams,
    tol: f64,
) -> Result<Pmf> {
    let tol = check_tol(tol)?;
    let (weights, herald, neglected) = heralded_weights(stat, params, params.mu(), tol / 10.0)?;
    let probs = thin(&weights, params.eta_s())
        .into_iter()
        .map(|x| x / herald)
        .collect();
    trim(probs, neglected / herald, tol)
}

/// Unnormalized pieces of the herald-filtered model, each from direct sums:
/// `p1[k]`, the joint probability of a herald and `k` signal photons from the
/// kept thermal mode; `p2[k]`, the law of `k` extraneous signal photons; and
/// the herald probability.
struct FilteredPieces {
    p1: Vec<f64>,
    p2: Vec<f64>,
    herald: f64,
    neglected: f64,
}

fn filtered_pieces(params: &SourceParams, f: f64, tol: f64) -> Result<FilteredPieces> {
    FilterSpec::herald(f)?;
    let (mu, eta_s) = (params.mu(), params.eta_s());
    let (kept, herald, kept_tail) =
        heralded_weights(PairStatistics::Thermal, params, mu * f, tol / 20.0)?;
    let extra_mean = mu * (1.0 - f);
    let mut extra = Vec::new();
    let mut extra_tail = 1.0;
    for pairs in 0..MAX_PAIRS {
        extra.push(input_pmf(PairStatistics::Poisson, extra_mean, pairs));
        extra_tail = poisson_tail_bound(extra_mean, pairs + 1);
        if extra_tail <= tol / 20.0 {
            break;
        }
    }
    Ok(FilteredPieces {
        p1: thin(&kept, eta_s),
        p2: thin(&extra, eta_s),
        herald,
        neglected: kept_tail / herald + extra_tail,
    })
}

/// Herald-filtered signal law as the convolution of independently summed
/// pieces: `p(n) = sum_k P1(k) P2(n - k) / P(herald)`, where the herald
/// responds only to the kept mode (thermal, mean `mu f`) and the extraneous
/// photons are Poisson with mean `mu (1 - f)`, both thinned by `eta_s`.
pub fn herald_filter_convolution_oracle(params: &SourceParams, f: f64, tol: f64) -> Result<Pmf> {
    let tol = check_tol(tol)?;
    let pieces = filtered_pieces(params, f, tol)?;
    let len = pieces.p1.len() + pieces.p2.len() - 1;
    let mut probs = vec![0.0; len];
    for (k, &a) in pieces.p1.iter().enumerate() {
        for (j, &b) in pieces.p2.iter().enumerate() {
            probs[k + j] += a * b;
        }
    }
    for p in &mut probs {
        *p /= pieces.herald;
    }
    trim(probs, pieces.neglected, tol)
}

/// The same pieces combined as `sum_k C(n,k) P1(k) P2(n-k) / P(herald)` for
/// `n < terms`. This weighting is what the Laguerre closed form
/// ([`xi_herald_laguerre`](super::xi_herald_laguerre)) sums to; it is not a
/// probability distribution when `f < 1`.
pub fn herald_filter_binomial_convolution(
    params: &SourceParams,
    f: f64,
    terms: usize,
) -> Result<Vec<f64>> {
    let pieces = filtered_pieces(params, f, 1e-15)?;
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    Ok((0..terms)
        .map(|n| {
            let mut choose = 1.0;
            let mut sum = 0.0;
            for k in 0..=n {
                if k > 0 {
                    choose *= (n - k + 1) as f64 / k as f64;
                }
                sum += choose * get(&pieces.p1, k) * get(&pieces.p2, n - k);
            }
            sum / pieces.herald
        })
        .collect())
}

/// Signal-filtered law by an explicit double sum over kept pairs `a`
/// (thermal, mean `mu f`) and extraneous pairs `b` (Poisson, mean
/// `mu (1-f)`). The herald sees `a + b` pairs; only the `a` kept photons
/// reach the signal output.
pub fn signal_filter_series(params: &SourceParams, f: f64, tol: f64) -> Result<Pmf> {
    let tol = check_tol(tol)?;
    FilterSpec::signal(f)?;
    let mu = params.mu();
    if params.d_h() == 0.0 && (mu == 0.0 || params.eta_h() == 0.0) {
        return Err(Error::NoHerald);
    }
    let (kept_mean, extra_mean) = (mu * f, mu * (1.0 - f));
    let mut extra = Vec::new();
    for b in 0..MAX_PAIRS {
        extra.push(input_pmf(PairStatistics::Poisson, extra_mean, b));
        if poisson_tail_bound(extra_mean, b + 1) <= tol / 20.0 {
            break;
        }
    }
    let mut weights = Vec::new();
    let mut herald = 0.0;
    for a in 0..MAX_PAIRS {
        let pa = input_pmf(PairStatistics::Thermal, kept_mean, a);
        let w: f64 = extra
            .iter()
            .enumerate()
            .map(|(b, &pb)| pa * pb * herald_prob(a + b as u64, params))
            .sum();
        weights.push(w);
        herald += w;
        let tail = input_tail_bound(PairStatistics::Thermal, kept_mean, a);
        if herald > 0.0 && tail <= tol / 20.0 * herald {
            let neglected = tail / herald + poisson_tail_bound(extra_mean, extra.len() as u64);
            let probs = thin(&weights, params.eta_s())
                .into_iter()
                .map(|x| x / herald)
                .collect();
            return trim(probs, neglected, tol);
        }
    }
    Err(Error::Truncation {
        max_terms: MAX_PAIRS as usize,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::analytic::binomial_loss;
    use approx::assert_relative_eq;

    fn baseline() -> SourceParams {
        SourceParams::new(0.01, 0.5, 0.5, 1e-4).unwrap()
    }

    #[test]
    fn pascal_thinning_matches_binomial_law() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let out = thin(&w, 0.3);
        for (n, o) in out.iter().enumerate() {
            let want: f64 = (n..4)
                .map(|pairs| w[pairs] * binomial_loss(pairs as u64, n as u64, 0.3).unwrap())
                .sum();
            assert_relative_eq!(*o, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn baseline_series_reference() {
        let pmf = conditional_pmf_series(PairStatistics::Poisson, &baseline(), 1e-12).unwrap();
        assert_relative_eq!(pmf.get(1), 0.490_265_299_392_947, max_relative = 1e-11);
        assert!(pmf.tail_bound() <= 1e-12);
        let thermal = conditional_pmf_series(PairStatistics::Thermal, &baseline(), 1e-12).unwrap();
        assert_relative_eq!(
            thermal.get(2),
            0.003_649_110_036_539_583,
            max_relative = 1e-11
        );
    }

    #[test]
    fn perfect_source_removes_vacuum() {
        let p = SourceParams::new(0.01, 1.0, 1.0, 0.0).unwrap();
        let pmf = conditional_pmf_series(PairStatistics::Poisson, &p, 1e-12).unwrap();
        assert_eq!(pmf.get(0), 0.0);
    }

    #[test]
    fn no_herald_detected() {
        let dark_free_vacuum = SourceParams::new(0.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(
            conditional_pmf_series(PairStatistics::Poisson, &dark_free_vacuum, 1e-9),
            Err(Error::NoHerald)
        );
        let blind = SourceParams::new(0.5, 0.0, 0.5, 0.0).unwrap();
        assert_eq!(
            herald_filter_convolution_oracle(&blind, 0.5, 1e-9),
            Err(Error::NoHerald)
        );
    }

    #[test]
    fn oracle_vacuum_input() {
        let p = SourceParams::new(0.0, 0.5, 0.5, 1e-3).unwrap();
        let pmf = herald_filter_convolution_oracle(&p, 0.3, 1e-12).unwrap();
        assert_eq!(pmf.get(0), 1.0);
    }

    #[test]
    fn binomial_weighting_overcounts() {
        let weighted = herald_filter_binomial_convolution(&baseline(), 0.1, 30).unwrap();
        let total: f64 = weighted.iter().sum();
        // high-precision value of the weighted sum at these parameters
        assert_relative_eq!(total, 1.001_878_002_605_12, max_relative = 1e-10);
        assert_relative_eq!(
            weighted[2],
            0.004_050_284_404_807_362_8,
            max_relative = 1e-10
        );
    }

    #[test]
    fn signal_filter_reference() {
        let pmf = signal_filter_series(&baseline(), 0.1, 1e-13).unwrap();
        let want = [
            0.950_616_609_772_729_63,
            0.049_346_499_120_622_282,
            3.686_961_966_311_915_9e-5,
        ];
        for (n, w) in want.iter().enumerate() {
            assert_relative_eq!(pmf.get(n), *w, max_relative = 1e-11);
        }
    }
}
