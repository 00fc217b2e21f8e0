use modelfree::ftap::{certify_arbitrage, check, portfolio_values, ArbitrageCertificate, Direction, FtapVerdict, StaticLeg};
use modelfree::gen::InstanceGenerator;
use modelfree::lp::Tolerances;
use modelfree::market::{Instrument, InstrumentSet, Payoff, Side};
use modelfree::martingale::{build_constraints, verify_measure};
use proptest::prelude::*;
use rand::Rng;

fn scaled(set: &InstrumentSet, model: &modelfree::market::PathGridModel, factor: f64) -> InstrumentSet {
    InstrumentSet::new(
        set.instruments
            .iter()
            .map(|inst| {
                let values = model
                    .payoff_table(&inst.payoff)
                    .unwrap()
                    .into_iter()
                    .map(|v| v * factor)
                    .collect();
                Instrument::new(Payoff::Custom { values }, inst.price * factor, inst.side)
            })
            .collect(),
    )
}

#[test]
fn every_instance_gets_one_checked_branch() {
    let mut gen = InstanceGenerator::new(5);
    let tol = Tolerances::default();
    let mut arbitrages = Vec::new();
    let mut measures = Vec::new();
    for _ in 0..80 {
        let mk = gen.market(6, 3, 5);
        let out = check(&mk.model, &mk.instruments, &tol).unwrap();
        match out.verdict {
            FtapVerdict::Feasible { measure } => {
                let bundle = build_constraints(&mk.model, &mk.instruments, None).unwrap();
                assert!(verify_measure(&measure, &bundle, 1e-8).pass);
                measures.push((mk, measure));
            }
            FtapVerdict::Arbitrage { certificate } => {
                assert!(mk.mispriced, "a consistently priced market cannot admit arbitrage");
                let gain = certify_arbitrage(&certificate, &mk.model, &mk.instruments);
                assert!(gain > 1e-8);
                assert!(certificate.legs.iter().all(|l| l.weight > 0.0));
                let total: f64 = certificate.legs.iter().map(|l| l.weight).sum();
                assert!((total - 1.0).abs() < 1e-12);
                arbitrages.push((mk, certificate));
            }
        }
    }
    assert!(arbitrages.len() > 10 && measures.len() > 10);

    // dynamic trading alone has zero mean under every returned measure
    for (mk, measure) in &measures {
        let mut probe = gen.strategy(&mk.model, 1.0);
        probe.scale(0.5);
        let values = portfolio_values(&[], &probe, &mk.model, &mk.instruments).unwrap();
        assert!(measure.expectation(&values).abs() < 1e-9);
    }
    for (mk, cert) in &arbitrages {
        let values = portfolio_values(&cert.legs, &cert.strategy, &mk.model, &mk.instruments).unwrap();
        // the pricing measure before mispricing sees a strictly positive
        // payoff, which is why the shifted quotes had no admissible measure
        assert!(mk.measure.expectation(&values) > 0.0);
    }
}

#[test]
fn feasible_markets_defeat_every_candidate_certificate() {
    let mut gen = InstanceGenerator::new(6);
    let tol = Tolerances::default();
    let mut tried = 0;
    for _ in 0..40 {
        let mk = gen.market(5, 2, 4);
        let out = check(&mk.model, &mk.instruments, &tol).unwrap();
        let FtapVerdict::Feasible { measure } = out.verdict else { continue };
        let tables = mk.instruments.normalized_tables(&mk.model).unwrap();
        for _ in 0..10 {
            let legs: Vec<StaticLeg> = mk
                .instruments
                .instruments
                .iter()
                .enumerate()
                .map(|(i, inst)| StaticLeg {
                    instrument: i,
                    direction: if inst.side == Side::TwoSided && gen.rng().gen_bool(0.5) {
                        Direction::Short
                    } else {
                        Direction::Long
                    },
                    weight: gen.rng().gen_range(0.0..2.0),
                })
                .collect();
            let strategy = gen.strategy(&mk.model, 3.0);
            let static_mean: f64 = legs
                .iter()
                .map(|l| l.signed_weight() * measure.expectation(&tables[l.instrument]))
                .sum();
            assert!(static_mean <= 1e-8);
            let dynamic_mean = measure.expectation(&strategy.gains(&mk.model).unwrap());
            assert!(dynamic_mean.abs() <= 1e-9);
            let cert = ArbitrageCertificate { legs, strategy, min_gain: f64::NAN };
            assert!(certify_arbitrage(&cert, &mk.model, &mk.instruments) <= 1e-8);
            tried += 1;
        }
    }
    assert!(tried > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaling_keeps_the_branch(seed in 0u64..10_000, factor in 0.01f64..100.0) {
        let mut gen = InstanceGenerator::new(seed);
        let mk = gen.market(5, 2, 4);
        let tol = Tolerances::default();
        let base = check(&mk.model, &mk.instruments, &tol).unwrap();
        let other = check(&mk.model, &scaled(&mk.instruments, &mk.model, factor), &tol).unwrap();
        prop_assert_eq!(base.verdict.is_feasible(), other.verdict.is_feasible());
    }
}
