//! The pathwise Doob hedge for the running maximum.
//!
//! For nonnegative `x_1, …, x_T` with `x_0 = 1` and `x̄_t = max_{s≤t} x_s`,
//!
//! ```text
//! x̄_T ≤ e/(e−1)·(x_T log x_T + 1) − e/(e−1)·Σ_t log(x̄_t)·(x_{t+1} − x_t)
//! ```
//!
//! It follows from `x̄_T − 1 ≤ x_T log x̄_T − Σ_t log(x̄_t)(x_{t+1} − x_t)`,
//! which holds step by step since `y log(y/b) ≥ y − b`, and from
//! `x_T log x̄_T ≤ x_T log x_T + x̄_T/e`. The dynamic term needs the factor
//! `e/(e−1)`: with `Δ_t = −log x̄_t` alone the inequality fails, e.g. on
//! the path `(1.5, 2, 0.5)`. That variant is kept as
//! [`DoobInstance::unscaled_delta`] for comparison.
//!
//! Taking expectations under any martingale gives Doob's L¹ bound
//! `E[x̄_T] ≤ e/(e−1)(E[x_T log x_T] + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftap::{Direction, DynamicStrategy, StaticLeg};
use crate::lp::Tolerances;
use crate::market::{entropy, Instrument, InstrumentSet, PathGridModel, Payoff};
use crate::martingale::{build_constraints, verify_measure, PathMeasure};
use crate::superrep::{doob_constant, price_bounds, SemiStaticHedge};

pub const DOOB_RELATIVE_TOL: f64 = 1e-12;

/// A grid with `s0 = 1` and an entropy option on `x_T` quoted at `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobInstance {
    pub model: PathGridModel,
    pub c: f64,
    /// Weight on the entropy option.
    pub a: f64,
    /// Multiplies `c + 1` in the cash.
    pub cash_constant: f64,
    pub eps: f64,
    /// `Δ_t = −delta_weight · log x̄_t`.
    pub delta_weight: f64,
}

impl DoobInstance {
    pub fn new(model: PathGridModel, c: f64) -> Result<Self> {
        if model.s0() != 1.0 {
            return Err(Error::DomainError(format!("s0 must be 1, got {}", model.s0())));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::DomainError(format!("entropy price must be nonnegative, got {c}")));
        }
        Ok(Self {
            model,
            c,
            a: doob_constant(),
            cash_constant: doob_constant(),
            eps: 0.0,
            delta_weight: doob_constant(),
        })
    }

    /// Uses `Δ_t = −log x̄_t`, which does not dominate on every path.
    pub fn unscaled_delta(mut self) -> Self {
        self.delta_weight = 1.0;
        self
    }

    pub fn with_cash_constant(mut self, k: f64) -> Self {
        self.cash_constant = k;
        self
    }

    pub fn cash(&self) -> f64 {
        self.cash_constant * (self.c + 1.0) + self.eps
    }

    /// The single buy-only entropy quote.
    pub fn instruments(&self) -> InstrumentSet {
        InstrumentSet::new(vec![Instrument::buy_only(
            Payoff::Entropy { date: self.model.horizon() },
            self.c,
        )])
        .with_growth_witness(0)
    }
}

/// The explicit hedge: cash, `a` units of the entropy option and
/// `Δ_t = −w·log x̄_t` with `w = e/(e−1)` by default.
pub fn doob_hedge(instance: &DoobInstance) -> Result<SemiStaticHedge> {
    let model = &instance.model;
    let mut failure = None;
    let strategy = DynamicStrategy::from_fn(model, |prefix| {
        let running = prefix.iter().fold(model.s0(), |m, &x| m.max(x));
        if running <= 0.0 {
            failure = Some(Error::DomainError("running maximum is 0".into()));
            return 0.0;
        }
        0.0 - instance.delta_weight * running.ln()
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut hedge = SemiStaticHedge {
        cash: instance.cash(),
        legs: vec![StaticLeg {
            instrument: 0,
            direction: Direction::Long,
            weight: instance.a,
        }],
        marginal_legs: Vec::new(),
        strategy,
        slack_min: f64::NAN,
    };
    hedge.slack_min =
        crate::superrep::verify_hedge(&hedge, &Payoff::RunningMax, model, &instance.instruments());
    Ok(hedge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobVerification {
    pub paths: usize,
    pub min_slack: f64,
    pub argmin_path: Vec<f64>,
    pub pass: bool,
}

/// Slack of the hedge on one path, evaluated directly.
pub fn doob_slack(instance: &DoobInstance, path: &[f64]) -> f64 {
    let mut prev = 1.0f64;
    let mut running = 1.0f64;
    let mut gains = 0.0;
    for &x in path {
        gains -= instance.delta_weight * running.ln() * (x - prev);
        running = running.max(x);
        prev = x;
    }
    let rhs = instance.a * (entropy(prev) - instance.c) + instance.cash() + gains;
    rhs - running
}

/// Checks the hedge on every path. Passes when each slack is at least
/// `−1e−12·max(1, x̄_T)`.
pub fn doob_verify_all(instance: &DoobInstance) -> Result<DoobVerification> {
    let model = &instance.model;
    let mut min_slack = f64::INFINITY;
    let mut argmin = 0usize;
    let mut pass = true;
    model.for_each_path(|p, _, coords| {
        let slack = doob_slack(instance, coords);
        let scale = coords.iter().fold(1.0f64, |m, &x| m.max(x));
        if slack < -DOOB_RELATIVE_TOL * scale {
            pass = false;
        }
        if slack < min_slack {
            min_slack = slack;
            argmin = p;
        }
    })?;
    Ok(DoobVerification {
        paths: model.path_count()?,
        min_slack,
        argmin_path: model.path_at(argmin).coordinates,
        pass,
    })
}

/// Upper price of the running maximum given the entropy quote `c`.
pub fn doob_lp_bound(model: &PathGridModel, c: f64, tol: &Tolerances) -> Result<f64> {
    let instance = DoobInstance::new(model.clone(), c)?;
    let bounds = price_bounds(model, &instance.instruments(), &Payoff::RunningMax, tol)?;
    Ok(bounds.upper.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedInequality {
    /// `E[x̄_T]`
    pub lhs: f64,
    /// `e/(e−1)(E[x_T log x_T] + 1)`
    pub rhs: f64,
    /// `E[(Δ ∙ x)_T]` for the Doob positions.
    pub gains_mean: f64,
    pub holds: bool,
}

/// Both sides of Doob's L¹ inequality under a martingale measure.
pub fn induced_martingale_inequality(
    model: &PathGridModel,
    pi: &PathMeasure,
    tol: f64,
) -> Result<InducedInequality> {
    let bundle = build_constraints(model, &InstrumentSet::empty(), None)?;
    let report = verify_measure(pi, &bundle, tol);
    if !report.pass {
        return Err(Error::NotAMartingale(format!(
            "measure violates the martingale constraints by {:.3e}",
            report.max_violation()
        )));
    }
    let instance = DoobInstance::new(model.clone(), 0.0)?;
    let hedge = doob_hedge(&instance)?;
    let gains = hedge.strategy.gains(model)?;
    let lhs = pi.expectation(&model.payoff_table(&Payoff::RunningMax)?);
    let ent = pi.expectation(&model.payoff_table(&Payoff::Entropy { date: model.horizon() })?);
    let rhs = doob_constant() * (ent + 1.0);
    Ok(InducedInequality {
        lhs,
        rhs,
        gains_mean: pi.expectation(&gains),
        holds: lhs <= rhs + tol,
    })
}

/// One line of the Doob comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobRow {
    pub levels: Vec<f64>,
    pub horizon: usize,
    pub c: f64,
    pub lp_bound: f64,
    pub analytic_bound: f64,
    pub min_slack: f64,
    pub argmin_path: Vec<f64>,
    pub pathwise_pass: bool,
    pub induced: InducedInequality,
    pub pass: bool,
}

/// Pathwise check, LP bound, analytic bound and the expectation inequality
/// under the LP's witness measure.
pub fn doob_row(model: &PathGridModel, c: f64, tol: &Tolerances) -> Result<DoobRow> {
    let instance = DoobInstance::new(model.clone(), c)?;
    let check = doob_verify_all(&instance)?;
    let bounds = price_bounds(model, &instance.instruments(), &Payoff::RunningMax, tol)?;
    let analytic = doob_constant() * (c + 1.0);
    let induced = induced_martingale_inequality(model, &bounds.upper.measure, 10.0 * tol.feas)?;
    let pass = check.pass
        && bounds.upper.value <= analytic + tol.gap
        && induced.holds
        && induced.gains_mean.abs() <= 1e-9;
    Ok(DoobRow {
        levels: model.levels().to_vec(),
        horizon: model.horizon(),
        c,
        lp_bound: bounds.upper.value,
        analytic_bound: analytic,
        min_slack: check.min_slack,
        argmin_path: check.argmin_path,
        pathwise_pass: check.pass,
        induced,
        pass,
    })
}

/// Grids used by the demonstration and the bound checks.
pub fn default_grids() -> Vec<PathGridModel> {
    let grid = |h: usize, levels: &[f64]| PathGridModel::new(h, levels.to_vec(), 1.0).expect("valid grid");
    vec![
        grid(2, &[0.0, 0.5, 1.0, 2.0, 3.0]),
        grid(3, &[0.25, 0.5, 1.0, 2.0, 4.0]),
        grid(3, &[0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superrep::verify_hedge;

    fn instance(h: usize, levels: &[f64], c: f64) -> DoobInstance {
        DoobInstance::new(PathGridModel::new(h, levels.to_vec(), 1.0).unwrap(), c).unwrap()
    }

    #[test]
    fn worked_paths() {
        let k = doob_constant();
        assert!((k - 1.581_976_706_869_326_2).abs() < 1e-15);
        let inst = instance(2, &[1.0, 2.0], 0.0);
        let rhs = doob_slack(&inst, &[2.0, 1.0]) + 2.0;
        assert!((rhs - k * (1.0 + 2f64.ln())).abs() < 1e-15);
        let unscaled = inst.clone().unscaled_delta();
        let rhs = doob_slack(&unscaled, &[2.0, 1.0]) + 2.0;
        assert!((rhs - 2.27513).abs() < 1e-5);
        assert!((rhs - (k + 2f64.ln())).abs() < 1e-15);
        let one = instance(1, &[1.0, 2.0], 0.0);
        assert!((doob_slack(&one, &[1.0]) - (k - 1.0)).abs() < 1e-15);
        let rhs2 = doob_slack(&one, &[2.0]) + 2.0;
        assert!((rhs2 - k * (2.0 * 2f64.ln() + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn hedge_matches_direct_slack() {
        let inst = instance(3, &[0.0, 0.5, 1.0, 2.0], 0.3);
        let hedge = doob_hedge(&inst).unwrap();
        assert_eq!(hedge.strategy.position(0), 0.0);
        let slack = verify_hedge(&hedge, &Payoff::RunningMax, &inst.model, &inst.instruments());
        let check = doob_verify_all(&inst).unwrap();
        assert!(check.pass);
        assert!((slack - check.min_slack).abs() < 1e-12);
        assert!(hedge.slack_min >= 0.0);
    }

    #[test]
    fn exhaustive_small_grids() {
        let check = doob_verify_all(&instance(3, &[0.5, 1.0, 2.0], 0.0)).unwrap();
        assert!(check.pass);
        assert_eq!(check.paths, 27);
        for h in 1..=4 {
            let single = doob_verify_all(&instance(h, &[1.0], 0.0)).unwrap();
            assert!((single.min_slack - (doob_constant() - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn unscaled_delta_fails_somewhere() {
        let inst = instance(3, &[0.5, 1.0, 1.5, 2.0], 0.0);
        assert!(doob_slack(&inst, &[1.5, 2.0, 0.5]) > 0.0);
        let unscaled = inst.unscaled_delta();
        assert!((doob_slack(&unscaled, &[1.5, 2.0, 0.5]) + 0.129_306).abs() < 1e-6);
        let check = doob_verify_all(&unscaled).unwrap();
        assert!(!check.pass);
    }

    #[test]
    fn lowered_cash_is_caught() {
        let inst = instance(2, &[0.5, 1.0, 2.0, 3.0], 0.0).with_cash_constant(1.0);
        let check = doob_verify_all(&inst).unwrap();
        assert!(!check.pass);
        assert!(check.min_slack < 0.0);
    }

    #[test]
    fn rejects_bad_instances() {
        let m = PathGridModel::new(1, vec![1.0, 2.0], 2.0).unwrap();
        assert!(matches!(DoobInstance::new(m, 0.0), Err(Error::DomainError(_))));
        let m = PathGridModel::new(1, vec![1.0, 2.0], 1.0).unwrap();
        assert!(DoobInstance::new(m, -0.5).is_err());
    }

    #[test]
    fn lp_bounds() {
        let tol = Tolerances::default();
        let single = PathGridModel::new(3, vec![1.0], 1.0).unwrap();
        assert!((doob_lp_bound(&single, 0.0, &tol).unwrap() - 1.0).abs() < 1e-12);
        let m = PathGridModel::new(2, vec![0.25, 1.0, 4.0], 1.0).unwrap();
        let b = doob_lp_bound(&m, 1.0, &tol).unwrap();
        assert!(b <= 2.0 * doob_constant() + 1e-7);
        assert!(b >= 1.0);
    }

    #[test]
    fn induced_inequality() {
        let m = PathGridModel::new(1, vec![0.0, 2.0], 1.0).unwrap();
        let pi = PathMeasure::new(vec![0.5, 0.5]);
        let r = induced_martingale_inequality(&m, &pi, 1e-12).unwrap();
        assert!((r.lhs - 1.5).abs() < 1e-15);
        assert!((r.rhs - doob_constant() * (2f64.ln() + 1.0)).abs() < 1e-14);
        assert!(r.holds);
        let skewed = PathMeasure::new(vec![0.3, 0.7]);
        assert!(matches!(
            induced_martingale_inequality(&m, &skewed, 1e-9),
            Err(Error::NotAMartingale(_))
        ));
        let m = PathGridModel::new(2, vec![0.5, 1.0, 2.0], 1.0).unwrap();
        let r = induced_martingale_inequality(&m, &PathMeasure::constant_path(&m).unwrap(), 0.0).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, doob_constant());
    }

    #[test]
    fn demo_rows_pass() {
        let tol = Tolerances::default();
        for m in default_grids() {
            let row = doob_row(&m, 0.0, &tol).unwrap();
            assert!(row.pass, "{row:?}");
            assert!(row.lp_bound >= 1.0 - 1e-12);
        }
    }
}
