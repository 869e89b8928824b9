//! Invariants checked over random configurations in the box
//! mu in [1e-4, 1], efficiencies and f in [0.05, 1], d_h in [0, 1e-2].

use hsps::analytic::{
    binomial_loss, conditional_pmf_series, herald_filter_convolution_oracle, herald_prob,
    moments_closed_form, moments_from_pmf, signal_filter_series, signal_pmf, xi, xi_limit, XiKind,
    DEFAULT_TOL,
};
use hsps::model::{FilterSpec, PairStatistics, Pmf, SourceParams};
use hsps::montecarlo::{block_count, simulate, simulate_block, simulate_tally, McConfig, Tally};
use hsps::optimize::{fano_at, logspace, optimize_mu, OptimizeOptions};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SourceParams> {
    (-4.0f64..=0.0, 0.05f64..=1.0, 0.05f64..=1.0, 0.0f64..=1e-2)
        .prop_map(|(lmu, eh, es, d)| SourceParams::new(10f64.powf(lmu), eh, es, d).unwrap())
}

fn stat() -> impl Strategy<Value = PairStatistics> {
    prop_oneof![Just(PairStatistics::Poisson), Just(PairStatistics::Thermal)]
}

fn filter() -> impl Strategy<Value = FilterSpec> {
    (0usize..3, 0.05f64..=1.0).prop_map(|(b, f)| match b {
        0 => FilterSpec::none(),
        1 => FilterSpec::signal(f).unwrap(),
        _ => FilterSpec::herald(f).unwrap(),
    })
}

fn max_term_diff(a: &Pmf, b: &Pmf) -> f64 {
    (0..a.len().max(b.len()))
        .map(|n| (a.get(n) - b.get(n)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pmf_is_normalized(p in params(), s in stat(), flt in filter()) {
        let s = if flt.branch() == hsps::model::FilterBranch::None { s } else { PairStatistics::Poisson };
        let pmf = signal_pmf(s, &p, &flt, DEFAULT_TOL).unwrap();
        prop_assert!(pmf.probs().iter().all(|&x| x >= 0.0));
        prop_assert!((pmf.total() - 1.0).abs() <= DEFAULT_TOL + 1e-13, "total {}", pmf.total());
        prop_assert!(pmf.tail_bound() <= DEFAULT_TOL);
    }

    #[test]
    fn closed_form_matches_series(p in params(), s in stat()) {
        let closed = signal_pmf(s, &p, &FilterSpec::none(), DEFAULT_TOL).unwrap();
        let series = conditional_pmf_series(s, &p, DEFAULT_TOL).unwrap();
        prop_assert!(max_term_diff(&closed, &series) <= 1e-10);
    }

    #[test]
    fn filtered_closed_forms_match_oracles(p in params(), f in 0.05f64..=1.0) {
        let h = signal_pmf(PairStatistics::Poisson, &p, &FilterSpec::herald(f).unwrap(), DEFAULT_TOL).unwrap();
        let h_oracle = herald_filter_convolution_oracle(&p, f, DEFAULT_TOL).unwrap();
        prop_assert!(max_term_diff(&h, &h_oracle) <= 1e-10);
        let s = signal_pmf(PairStatistics::Poisson, &p, &FilterSpec::signal(f).unwrap(), DEFAULT_TOL).unwrap();
        let s_oracle = signal_filter_series(&p, f, DEFAULT_TOL).unwrap();
        prop_assert!(max_term_diff(&s, &s_oracle) <= 1e-10);
    }

    #[test]
    fn full_transmission_filters_reduce_to_thermal(p in params()) {
        let none = FilterSpec::none();
        let sig = FilterSpec::signal(1.0).unwrap();
        let her = FilterSpec::herald(1.0).unwrap();
        for n in 0..=50 {
            let t = xi(XiKind::ThermalUnfiltered, n, &p, &none).unwrap();
            prop_assert!((xi(XiKind::SignalFiltered, n, &p, &sig).unwrap() - t).abs() <= 1e-12);
            prop_assert!((xi(XiKind::HeraldFiltered, n, &p, &her).unwrap() - t).abs() <= 1e-12);
        }
    }

    #[test]
    fn lossless_noiseless_herald_removes_vacuum(lmu in -4.0f64..=1.0) {
        let p = SourceParams::new(10f64.powf(lmu), 1.0, 1.0, 0.0).unwrap();
        let none = FilterSpec::none();
        prop_assert_eq!(xi(XiKind::PoissonUnfiltered, 0, &p, &none).unwrap(), 0.0);
        prop_assert_eq!(xi(XiKind::ThermalUnfiltered, 0, &p, &none).unwrap(), 0.0);
    }

    /// xi(n) = a - b r^n with b >= 0 and r in [0, 1]: nondecreasing, concave,
    /// and below its limit.
    #[test]
    fn correcting_factors_grow_concavely_to_the_limit(p in params()) {
        let none = FilterSpec::none();
        for kind in [XiKind::PoissonUnfiltered, XiKind::ThermalUnfiltered] {
            let limit = xi_limit(kind, &p).unwrap();
            let v: Vec<f64> = (0..=101).map(|n| xi(kind, n, &p, &none).unwrap()).collect();
            let slack = 1e-12 * limit;
            for w in v.windows(3) {
                prop_assert!(w[1] >= w[0] - slack);
                prop_assert!(w[2] - 2.0 * w[1] + w[0] <= slack);
            }
            prop_assert!(v.iter().all(|&x| x <= limit * (1.0 + 1e-15)));
        }
    }

    #[test]
    fn herald_probability_grows_with_pairs(p in params()) {
        let h: Vec<f64> = (0..200).map(|n| herald_prob(n, &p)).collect();
        prop_assert!(h.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(h.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn thinning_is_a_distribution(total in 0u64..120, eta in 0.0f64..=1.0) {
        let sum: f64 = (0..=total).map(|n| binomial_loss(total, n, eta).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(binomial_loss(total, total + 1, eta).is_err());
    }

    #[test]
    fn moments_match_pmf_sums(p in params()) {
        let closed = moments_closed_form(&p).unwrap();
        let pmf = signal_pmf(PairStatistics::Poisson, &p, &FilterSpec::none(), 1e-25).unwrap();
        let summed = moments_from_pmf(&pmf);
        prop_assert!((summed.mean / closed.mean - 1.0).abs() <= 1e-9);
        prop_assert!((summed.variance / closed.variance - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimum_is_certified(eta_h in 0.05f64..=1.0, eta_s in 0.05f64..=1.0, ld in -5.0f64..=-2.0) {
        let d = 10f64.powf(ld);
        let opts = OptimizeOptions { prescan: true, ..OptimizeOptions::default() };
        let r = optimize_mu(eta_h, eta_s, d, &opts).unwrap();
        let at = |mu| fano_at(eta_h, eta_s, d, mu).unwrap();
        prop_assert!(r.fano_opt <= at(r.mu_opt * (1.0 + 2.0 * opts.rel_tol)));
        prop_assert!(r.fano_opt <= at(r.mu_opt * (1.0 - 2.0 * opts.rel_tol)));
        // back towards 1 on both sides
        prop_assert!((at(1e-9) - 1.0).abs() < 1e-3);
        let above = logspace(r.mu_opt, 10.0, 12);
        let curve: Vec<f64> = above.iter().map(|&mu| at(mu)).collect();
        prop_assert!(curve.windows(2).all(|w| w[1] >= w[0]));
    }

    /// Any grouping of the fixed blocks merges to the same histogram.
    #[test]
    fn block_merge_order_is_irrelevant(p in params(), seed in any::<u64>(), split in 1usize..8) {
        let config = McConfig::new(p, PairStatistics::Poisson, FilterSpec::none(), 5 * 65_536 + 17, seed).unwrap();
        let whole = simulate_tally(&config).unwrap();
        let blocks: Vec<Tally> = (0..block_count(config.trials)).map(|i| simulate_block(&config, i)).collect();
        let mut groups: Vec<Tally> = blocks
            .chunks(split)
            .map(|c| c.iter().fold(Tally::new(config.n_cap), |acc, t| acc.merge(t)))
            .collect();
        groups.reverse();
        let merged = groups.iter().fold(Tally::new(config.n_cap), |acc, t| acc.merge(t));
        prop_assert_eq!(merged, whole);
    }

    #[test]
    fn estimates_are_reproducible_and_normalized(p in params(), flt in filter(), seed in any::<u64>()) {
        let config = McConfig::new(p, PairStatistics::Poisson, flt, 200_000, seed).unwrap();
        let a = simulate(&config);
        let b = simulate(&config);
        prop_assert_eq!(&a, &b);
        if let Ok(est) = a {
            let total: f64 = est.pmf_hat.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert_eq!(est.clamped_mass, *est.pmf_hat.last().unwrap());
            prop_assert!(est.clamped_mass < 1e-9);
        }
    }
}
