//! A quick randomized run of the engine's invariants.

use std::fmt::Write as _;

use modelfree::ftap::{certify_arbitrage, check, FtapVerdict};
use modelfree::gen::{inject_butterfly, InstanceGenerator};
use modelfree::lp::Tolerances;
use modelfree::market::{PathGridModel, Payoff};
use modelfree::marginals::{calls_to_marginal, marginal_instruments, marginal_to_calls, Marginal};
use modelfree::martingale::{build_constraints, verify_measure};
use modelfree::pathwise::{default_grids, doob_lp_bound, doob_verify_all, DoobInstance};
use modelfree::superrep::{
    bounds_with_marginals, calendar_spread_hedge, doob_constant, price_bounds, verify_hedge_values,
};
use modelfree::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub instances: usize,
    pub checks: Vec<SelftestCheck>,
    pub pass: bool,
}

impl SelftestReport {
    pub fn text(&self) -> String {
        let mut s = format!("selftest with seed {} and {} instances per check\n", self.seed, self.instances);
        for c in &self.checks {
            let _ = writeln!(s, "  {:<28} {}  {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
        }
        let _ = writeln!(s, "overall: {}", if self.pass { "pass" } else { "FAIL" });
        s
    }
}

fn item(name: &str, result: Result<String, String>) -> SelftestCheck {
    match result {
        Ok(detail) => SelftestCheck { name: name.into(), pass: true, detail },
        Err(detail) => SelftestCheck { name: name.into(), pass: false, detail },
    }
}

fn dichotomy(gen: &mut InstanceGenerator, n: usize, tol: &Tolerances) -> Result<String, String> {
    let (mut feasible, mut arbitrage) = (0, 0);
    for i in 0..n {
        let mk = gen.market(6, 3, 5);
        let out = check(&mk.model, &mk.instruments, tol).map_err(|e| format!("#{i}: {e}"))?;
        match out.verdict {
            FtapVerdict::Feasible { measure } => {
                let bundle = build_constraints(&mk.model, &mk.instruments, None).map_err(|e| e.to_string())?;
                if !verify_measure(&measure, &bundle, 10.0 * tol.feas).pass {
                    return Err(format!("#{i}: measure fails its recheck"));
                }
                let s = gen.strategy(&mk.model, 1.0);
                let mean = measure.expectation(&s.gains(&mk.model).map_err(|e| e.to_string())?);
                if mean.abs() > 1e-9 {
                    return Err(format!("#{i}: gains have mean {mean:.2e}"));
                }
                feasible += 1;
            }
            FtapVerdict::Arbitrage { certificate } => {
                let g = certify_arbitrage(&certificate, &mk.model, &mk.instruments);
                if g <= 10.0 * tol.feas {
                    return Err(format!("#{i}: certificate gains only {g:.2e}"));
                }
                arbitrage += 1;
            }
        }
    }
    Ok(format!("{feasible} feasible, {arbitrage} arbitrage"))
}

fn duality(gen: &mut InstanceGenerator, n: usize, tol: &Tolerances) -> Result<String, String> {
    let (mut gap, mut slack) = (0.0f64, f64::INFINITY);
    for i in 0..n {
        let mk = gen.consistent_market(5, 3, 3);
        let phi = gen.payoff(&mk.model);
        let b = price_bounds(&mk.model, &mk.instruments, &phi, tol).map_err(|e| format!("#{i}: {e}"))?;
        let values = mk.model.payoff_table(&phi).map_err(|e| e.to_string())?;
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        gap = gap.max(b.upper.gap).max(b.lower.gap);
        slack = slack
            .min(verify_hedge_values(&b.upper.hedge, &values, &mk.model, &mk.instruments))
            .min(verify_hedge_values(&b.lower.hedge, &neg, &mk.model, &mk.instruments));
    }
    if gap <= tol.gap && slack >= -1e-9 {
        Ok(format!("max gap {gap:.2e}, min slack {slack:.2e}"))
    } else {
        Err(format!("max gap {gap:.2e}, min slack {slack:.2e}"))
    }
}

fn doob_pathwise() -> Result<String, String> {
    let mut worst = f64::INFINITY;
    for m in default_grids() {
        let r = doob_verify_all(&DoobInstance::new(m, 0.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if !r.pass {
            return Err(format!("violated on {:?}", r.argmin_path));
        }
        worst = worst.min(r.min_slack);
    }
    let control = PathGridModel::new(2, vec![0.5, 1.0, 2.0, 3.0], 1.0).map_err(|e| e.to_string())?;
    let r = doob_verify_all(&DoobInstance::new(control, 0.0).map_err(|e| e.to_string())?.with_cash_constant(1.0))
        .map_err(|e| e.to_string())?;
    if r.pass {
        return Err("lowered cash was not caught".into());
    }
    Ok(format!("min slack {worst:.4e}; lowered cash fails on {:?}", r.argmin_path))
}

fn doob_bound(tol: &Tolerances) -> Result<String, String> {
    let mut out = Vec::new();
    for m in default_grids() {
        for c in [0.0, 1.0] {
            let b = doob_lp_bound(&m, c, tol).map_err(|e| e.to_string())?;
            if b > doob_constant() * (c + 1.0) + tol.gap || (c == 0.0 && b < 1.0) {
                return Err(format!("bound {b} at C = {c}"));
            }
            out.push(format!("{b:.4}"));
        }
    }
    Ok(out.join(" "))
}

fn calendar() -> Result<String, String> {
    let m = PathGridModel::new(2, vec![0.0, 0.5, 1.0, 2.0, 4.0], 1.0).map_err(|e| e.to_string())?;
    for t in 0..2 {
        for claim in [
            Payoff::Power { exponent: 2.0, date: t },
            Payoff::EuropeanCall { strike: 1.0, date: t },
            Payoff::Entropy { date: t },
        ] {
            let cs = calendar_spread_hedge(&m, &claim, 0.0).map_err(|e| e.to_string())?;
            if cs.hedge.slack_min < 0.0 {
                return Err(format!("{claim:?}: slack {}", cs.hedge.slack_min));
            }
        }
    }
    Ok("6 hedges dominate".into())
}

fn strips(gen: &mut InstanceGenerator, n: usize) -> Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let g = 3 + i % 6;
        let levels: Vec<f64> = (0..g).map(|k| 0.5 * k as f64).collect();
        let nu = gen.marginal(1, g);
        let strip = marginal_to_calls(&nu, &levels, &levels).map_err(|e| e.to_string())?;
        let back = calls_to_marginal(&strip, &levels).map_err(|e| e.to_string())?;
        worst = back.masses.iter().zip(&nu.masses).fold(worst, |w, (a, b)| w.max((a - b).abs()));
        let bad = inject_butterfly(&strip, 1 + i % (g - 2), 1e-6);
        if !matches!(calls_to_marginal(&bad, &levels), Err(Error::StaticArbitrage(_))) {
            return Err(format!("#{i}: butterfly not rejected"));
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max mass error {worst:.2e}"))
    } else {
        Err(format!("max mass error {worst:.2e}"))
    }
}

fn marginal_routes(gen: &mut InstanceGenerator, n: usize, tol: &Tolerances) -> Result<String, String> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let model = gen.model(5, 2);
        let pi = gen.martingale_measure(&model);
        let date = model.horizon();
        let nu = Marginal::new(date, pi.marginal_masses(&model, date).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let phi = gen.payoff(&model);
        let a = bounds_with_marginals(&model, &[nu.clone()], &phi, tol).map_err(|e| format!("#{i}: {e}"))?;
        let quotes = marginal_instruments(&nu, model.levels()).map_err(|e| e.to_string())?;
        let b = price_bounds(&model, &quotes, &phi, tol).map_err(|e| format!("#{i}: {e}"))?;
        worst = worst
            .max((a.upper.value - b.upper.value).abs())
            .max((a.lower.value - b.lower.value).abs());
    }
    if worst <= 1e-7 {
        Ok(format!("max difference {worst:.2e}"))
    } else {
        Err(format!("max difference {worst:.2e}"))
    }
}

pub fn run(seed: u64, instances: usize, tol: &Tolerances) -> SelftestReport {
    let mut gen = InstanceGenerator::new(seed);
    let n = instances.max(1);
    let checks = vec![
        item("arbitrage dichotomy", dichotomy(&mut gen, n, tol)),
        item("zero duality gap", duality(&mut gen, n, tol)),
        item("doob pathwise hedge", doob_pathwise()),
        item("doob price bound", doob_bound(tol)),
        item("calendar spreads", calendar()),
        item("call strip round trips", strips(&mut gen, n)),
        item("marginal routes agree", marginal_routes(&mut gen, n.min(20), tol)),
    ];
    let pass = checks.iter().all(|c| c.pass);
    SelftestReport {
        seed,
        instances: n,
        checks,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_round_trips() {
        let r = run(5, 4, &Tolerances::default());
        assert!(r.pass, "{}", r.text());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<SelftestReport>(&json).unwrap(), r);
    }
}
