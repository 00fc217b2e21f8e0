use modelfree::gen::InstanceGenerator;
use modelfree::lp::Tolerances;
use modelfree::market::{InstrumentSet, PathGridModel, Payoff};
use modelfree::marginals::{marginal_instruments, Marginal};
use modelfree::martingale::{build_constraints, verify_measure};
use modelfree::superrep::{
    bounds_for_bundle, bounds_with_marginals, calendar_spread_hedge, hedge_slacks, price_bounds,
    verify_hedge_values, PricingReport,
};
use proptest::prelude::*;

#[test]
fn zero_gap_and_dominating_hedges() {
    let mut gen = InstanceGenerator::new(41);
    let tol = Tolerances::default();
    for _ in 0..40 {
        let mk = gen.consistent_market(5, 3, 3);
        let phi = gen.payoff(&mk.model);
        let b = price_bounds(&mk.model, &mk.instruments, &phi, &tol).unwrap();
        assert!(b.upper.gap <= 1e-7 && b.lower.gap <= 1e-7);
        assert!(b.lower.value <= b.upper.value + 1e-7);
        let values = mk.model.payoff_table(&phi).unwrap();
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        assert!(verify_hedge_values(&b.upper.hedge, &values, &mk.model, &mk.instruments) >= -1e-9);
        assert!(verify_hedge_values(&b.lower.hedge, &negated, &mk.model, &mk.instruments) >= -1e-9);
        // weak duality against the generator's own pricing measure
        let e = mk.measure.expectation(&values);
        assert!(e <= b.upper.hedge.cash + 1e-9);
        assert!(e >= b.lower.value - 1e-9);
    }
}

#[test]
fn adding_quotes_narrows_bounds() {
    let mut gen = InstanceGenerator::new(42);
    let tol = Tolerances::default();
    for _ in 0..30 {
        let model = gen.model(5, 2);
        let pi = gen.martingale_measure(&model);
        let full = gen.instruments(&model, &pi, 4);
        let phi = gen.payoff(&model);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=full.len() {
            let subset = InstrumentSet::new(full.instruments[..k].to_vec());
            let b = price_bounds(&model, &subset, &phi, &tol).unwrap();
            if let Some((lo, hi)) = prev {
                assert!(b.upper.value <= hi + 1e-9);
                assert!(b.lower.value >= lo - 1e-9);
            }
            prev = Some((b.lower.value, b.upper.value));
        }
    }
}

#[test]
fn terminal_marginal_pins_calls() {
    let mut gen = InstanceGenerator::new(43);
    let tol = Tolerances::default();
    for _ in 0..15 {
        let model = gen.model(6, 2);
        let pi = gen.martingale_measure(&model);
        let nu = Marginal::new(model.horizon(), pi.marginal_masses(&model, model.horizon()).unwrap()).unwrap();
        for &k in model.levels() {
            let call = Payoff::EuropeanCall { strike: k, date: model.horizon() };
            let b = bounds_with_marginals(&model, &[nu.clone()], &call, &tol).unwrap();
            let exact = nu.expectation(model.levels(), |y| (y - k).max(0.0));
            assert!((b.upper.value - exact).abs() < 1e-9);
            assert!((b.lower.value - exact).abs() < 1e-9);
        }
    }
}

#[test]
fn marginal_rows_match_marginal_quotes() {
    let mut gen = InstanceGenerator::new(44);
    let tol = Tolerances::default();
    for _ in 0..20 {
        let model = gen.model(5, 2);
        let pi = gen.martingale_measure(&model);
        let date = model.horizon();
        let nu = Marginal::new(date, pi.marginal_masses(&model, date).unwrap()).unwrap();
        let phi = gen.payoff(&model);
        let direct = bounds_with_marginals(&model, &[nu.clone()], &phi, &tol).unwrap();
        let quotes = marginal_instruments(&nu, model.levels()).unwrap();
        let via = price_bounds(&model, &quotes, &phi, &tol).unwrap();
        assert!((direct.upper.value - via.upper.value).abs() <= 1e-7);
        assert!((direct.lower.value - via.lower.value).abs() <= 1e-7);
    }
}

#[test]
fn hedges_with_marginal_legs_dominate() {
    let mut gen = InstanceGenerator::new(45);
    let tol = Tolerances::default();
    for _ in 0..20 {
        let model = gen.model(5, 2);
        let pi = gen.martingale_measure(&model);
        let marginals: Vec<Marginal> = (1..=model.horizon())
            .map(|t| Marginal::new(t, pi.marginal_masses(&model, t).unwrap()).unwrap())
            .collect();
        let phi = gen.payoff(&model);
        let bundle = build_constraints(&model, &InstrumentSet::empty(), Some(&marginals)).unwrap();
        let values = model.payoff_table(&phi).unwrap();
        let b = bounds_for_bundle(&bundle, &values, &tol).unwrap();
        assert!(b.upper.gap <= 1e-7);
        let slack = hedge_slacks(&b.upper.hedge, &values, &model, &InstrumentSet::empty()).unwrap();
        assert!(slack.iter().all(|s| *s >= -1e-9));
        for leg in &b.upper.hedge.marginal_legs {
            let nu = &marginals[leg.date - 1];
            let cost: f64 = leg.values.iter().zip(&nu.masses).map(|(v, m)| v * m).sum();
            assert!(cost.abs() < 1e-9);
        }
        assert!(verify_measure(&b.upper.measure, &bundle, 1e-8).pass);
    }
}

#[test]
fn calendar_spreads_on_three_grids() {
    let grids = [
        PathGridModel::new(2, vec![0.0, 0.5, 1.0, 2.0], 1.0).unwrap(),
        PathGridModel::new(3, vec![0.25, 0.75, 1.0, 1.5, 3.0], 1.0).unwrap(),
        PathGridModel::new(2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0], 2.0).unwrap(),
    ];
    for m in &grids {
        for t in 0..m.horizon() {
            for claim in [
                Payoff::Power { exponent: 2.0, date: t },
                Payoff::EuropeanCall { strike: 1.0, date: t },
                Payoff::Entropy { date: t },
            ] {
                let cs = calendar_spread_hedge(m, &claim, 0.0).unwrap();
                assert!(cs.hedge.slack_min >= 0.0, "{claim:?} on {m:?}: {}", cs.hedge.slack_min);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reports_round_trip(seed in 0u64..5_000) {
        let mut gen = InstanceGenerator::new(seed);
        let mk = gen.consistent_market(4, 2, 2);
        let phi = gen.payoff(&mk.model);
        let b = price_bounds(&mk.model, &mk.instruments, &phi, &Tolerances::default()).unwrap();
        let report = PricingReport::new(&b, &phi, &mk.model);
        let json = serde_json::to_string(&report).unwrap();
        let back: PricingReport = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, report);
    }

    #[test]
    fn witness_attains_upper(seed in 0u64..5_000) {
        let mut gen = InstanceGenerator::new(seed);
        let mk = gen.consistent_market(5, 2, 3);
        let phi = gen.payoff(&mk.model);
        let tol = Tolerances::default();
        let b = price_bounds(&mk.model, &mk.instruments, &phi, &tol).unwrap();
        let bundle = build_constraints(&mk.model, &mk.instruments, None).unwrap();
        prop_assert!(verify_measure(&b.upper.measure, &bundle, 1e-8).pass);
        let values = mk.model.payoff_table(&phi).unwrap();
        prop_assert!((b.upper.measure.expectation(&values) - b.upper.value).abs() <= 1e-12);
    }
}
