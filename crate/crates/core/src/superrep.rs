//! Robust price bounds and the semi-static hedges that attain them.
//!
//! The upper bound is `max Φᵀπ` over the admissible martingale measures.
//! Solving `min −Φᵀπ`, optimality of the dual `λ` says, for every path,
//!
//! ```text
//! Φ(p) ≤ −λ_prob − Σ_t λ_mart(prefix_t(p))·(x_{t+1} − x_t) − Σ_i λ_i φ_i(p) − Σ_t λ_marg(t, x_t(p))
//! ```
//!
//! which is read off as cash `d = −λ_prob`, dynamic positions `Δ = −λ_mart`,
//! static weights `a_i = −λ_i` (split into long and short legs) and, with
//! marginal constraints, per-date payoffs `u_t = −λ_marg(t, ·)`. Each `u_t`
//! is recentred to have zero mean under its marginal so the hedge cost is
//! exactly the cash. The lower bound is `−upper(−Φ)`; its hedge
//! super-replicates `−Φ`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ftap::{
    legs_from_signed, sparse_measure, static_values, DynamicStrategy, PrefixPosition, StaticLeg, WeightedPath,
    REPORT_WEIGHT_THRESHOLD,
};
use crate::lp::{self, LpStatus, Tolerances};
use crate::market::{Instrument, InstrumentSet, PathGridModel, Payoff};
use crate::marginals::Marginal;
use crate::martingale::{build_constraints, verify_measure, ConstraintBundle, PathMeasure};

/// A European payoff held at one date, as values per grid level, with
/// zero cost under the corresponding marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalLeg {
    pub date: usize,
    pub values: Vec<f64>,
}

/// `cash + Σ legs + Σ marginal legs + (Δ ∙ x)_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiStaticHedge {
    pub cash: f64,
    pub legs: Vec<StaticLeg>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginal_legs: Vec<MarginalLeg>,
    pub strategy: DynamicStrategy,
    /// Minimum over paths of hedge value minus the claim.
    pub slack_min: f64,
}

impl SemiStaticHedge {
    pub fn cash_only(model: &PathGridModel, cash: f64) -> Self {
        Self {
            cash,
            legs: Vec::new(),
            marginal_legs: Vec::new(),
            strategy: DynamicStrategy::zero(model),
            slack_min: f64::NAN,
        }
    }

    /// Terminal value of the hedge on every path.
    pub fn values(&self, model: &PathGridModel, instruments: &InstrumentSet) -> Result<Vec<f64>> {
        let tables = instruments.normalized_tables(model)?;
        let paths = model.path_count()?;
        let mut values = static_values(&self.legs, &tables, paths)?;
        let gains = self.strategy.gains(model)?;
        for leg in &self.marginal_legs {
            if leg.date == 0 || leg.date > model.horizon() || leg.values.len() != model.grid_size() {
                return Err(Error::DimensionMismatch(format!(
                    "marginal leg at date {} does not fit the grid",
                    leg.date
                )));
            }
        }
        model.for_each_path(|p, digits, _| {
            let mut v = self.cash + values[p];
            for leg in &self.marginal_legs {
                v += leg.values[digits[leg.date - 1]];
            }
            values[p] = v + gains[p];
        })?;
        Ok(values)
    }
}

/// One side of the bounds with its primal witness and dual hedge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSide {
    pub value: f64,
    pub measure: PathMeasure,
    pub hedge: SemiStaticHedge,
    /// `|∫Φ dπ − hedge cost|`, both computed directly.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBounds {
    pub upper: BoundSide,
    /// The hedge on this side super-replicates `−Φ` and has cash `−lower`.
    pub lower: BoundSide,
    pub notes: Vec<String>,
}

/// Bounds for `phi` over the martingale measures consistent with the quotes.
pub fn price_bounds(
    model: &PathGridModel,
    instruments: &InstrumentSet,
    phi: &Payoff,
    tol: &Tolerances,
) -> Result<PriceBounds> {
    phi.validate(model)?;
    let bundle = build_constraints(model, instruments, None)?;
    let values = model.payoff_table(phi)?;
    bounds_for_bundle(&bundle, &values, tol)
}

/// Bounds for `phi` with the law of `x_t` fixed for each listed marginal.
pub fn bounds_with_marginals(
    model: &PathGridModel,
    marginals: &[Marginal],
    phi: &Payoff,
    tol: &Tolerances,
) -> Result<PriceBounds> {
    phi.validate(model)?;
    let bundle = build_constraints(model, &InstrumentSet::empty(), Some(marginals))?;
    let values = model.payoff_table(phi)?;
    bounds_for_bundle(&bundle, &values, tol)
}

/// Bounds for a claim given as one value per path.
pub fn bounds_for_bundle(bundle: &ConstraintBundle, values: &[f64], tol: &Tolerances) -> Result<PriceBounds> {
    if values.len() != bundle.path_count() {
        return Err(Error::DimensionMismatch(format!(
            "claim has {} values, the grid has {} paths",
            values.len(),
            bundle.path_count()
        )));
    }
    let upper = upper_side(bundle, values, tol)?;
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let mut lower = upper_side(bundle, &negated, tol)?;
    lower.value = -lower.value;
    let mut notes = vec![
        "bounds hold over the finite grid; growth conditions on the claim are vacuous here".to_string(),
    ];
    if !bundle.marginals().is_empty() {
        notes.push("marginal legs are recentred to zero cost under their marginals".to_string());
    }
    Ok(PriceBounds { upper, lower, notes })
}

fn upper_side(bundle: &ConstraintBundle, values: &[f64], tol: &Tolerances) -> Result<BoundSide> {
    let model = bundle.model();
    let lp = bundle.lp_with_objective(values.iter().map(|v| -v).collect());
    let sol = lp::solve(&lp, tol)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::NoAdmissibleMeasure),
        LpStatus::Unbounded => {
            return Err(Error::NumericalFailure("pricing program reported unbounded".into()))
        }
    }
    let measure = PathMeasure::new(sol.primal);
    let report = verify_measure(&measure, bundle, 10.0 * tol.feas);
    if !report.pass {
        return Err(Error::NumericalFailure(format!(
            "witness measure fails the direct check by {:.3e}",
            report.max_violation()
        )));
    }
    let value = measure.expectation(values);

    let layout = bundle.layout();
    let lambda = &sol.dual;
    let mut cash = -lambda[layout.probability];
    let signed: Vec<f64> = lambda[layout.instruments.clone()].iter().map(|l| -l).collect();
    let legs = legs_from_signed(&signed, bundle.instruments(), tol.feas)?;
    let strategy = DynamicStrategy {
        positions: lambda[layout.martingale.clone()].iter().map(|l| 0.0 - l).collect(),
    };
    let g = model.grid_size();
    let mut marginal_legs = Vec::new();
    for (k, nu) in bundle.marginals().iter().enumerate() {
        let start = layout.marginals.start + k * g;
        let raw: Vec<f64> = lambda[start..start + g].iter().map(|l| -l).collect();
        let mean: f64 = raw.iter().zip(&nu.masses).map(|(u, m)| u * m).sum();
        cash += mean;
        marginal_legs.push(MarginalLeg {
            date: nu.date,
            values: raw.iter().map(|u| u - mean).collect(),
        });
    }
    let mut hedge = SemiStaticHedge {
        cash,
        legs,
        marginal_legs,
        strategy,
        slack_min: f64::NAN,
    };
    hedge.slack_min = verify_hedge_values(&hedge, values, model, bundle.instruments());
    let gap = (value - cash).abs();
    Ok(BoundSide {
        value,
        measure,
        hedge,
        gap,
    })
}

/// Minimum over paths of hedge value minus `phi`, by direct evaluation.
/// Returns `-∞` if the hedge does not fit the market.
pub fn verify_hedge(
    hedge: &SemiStaticHedge,
    phi: &Payoff,
    model: &PathGridModel,
    instruments: &InstrumentSet,
) -> f64 {
    match model.payoff_table(phi) {
        Ok(values) => verify_hedge_values(hedge, &values, model, instruments),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// As [`verify_hedge`] for a claim given as one value per path.
pub fn verify_hedge_values(
    hedge: &SemiStaticHedge,
    values: &[f64],
    model: &PathGridModel,
    instruments: &InstrumentSet,
) -> f64 {
    hedge_slacks(hedge, values, model, instruments)
        .map(|s| s.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NEG_INFINITY)
}

/// Hedge value minus claim on every path.
pub fn hedge_slacks(
    hedge: &SemiStaticHedge,
    values: &[f64],
    model: &PathGridModel,
    instruments: &InstrumentSet,
) -> Result<Vec<f64>> {
    let mut h = hedge.values(model, instruments)?;
    if values.len() != h.len() {
        return Err(Error::DimensionMismatch("claim and grid sizes differ".into()));
    }
    for (s, v) in h.iter_mut().zip(values) {
        *s -= v;
    }
    Ok(h)
}

/// A subgradient of a convex European payoff at `x`. At `x = 0` the
/// entropy payoff uses the chord slope to the smallest positive level.
pub fn convex_subgradient(payoff: &Payoff, x: f64, model: &PathGridModel) -> Result<f64> {
    match payoff {
        Payoff::Power { exponent, .. } => Ok(exponent * x.powf(exponent - 1.0)),
        Payoff::EuropeanCall { strike, .. } => Ok(if x > *strike { 1.0 } else { 0.0 }),
        Payoff::EuropeanPut { strike, .. } => Ok(if x < *strike { -1.0 } else { 0.0 }),
        Payoff::Constant { .. } => Ok(0.0),
        Payoff::Entropy { .. } => {
            if x > 0.0 {
                Ok(x.ln() + 1.0)
            } else {
                let smallest = model.levels().iter().copied().find(|l| *l > 0.0);
                Ok(smallest.map_or(0.0, f64::ln))
            }
        }
        other => Err(Error::NotConvex(format!("{other:?} is not a convex European payoff"))),
    }
}

/// Moves a European payoff to another date.
fn at_date(payoff: &Payoff, date: usize) -> Result<Payoff> {
    Ok(match payoff {
        Payoff::Power { exponent, .. } => Payoff::Power { exponent: *exponent, date },
        Payoff::EuropeanCall { strike, .. } => Payoff::EuropeanCall { strike: *strike, date },
        Payoff::EuropeanPut { strike, .. } => Payoff::EuropeanPut { strike: *strike, date },
        Payoff::Entropy { .. } => Payoff::Entropy { date },
        Payoff::Constant { value } => Payoff::Constant { value: *value },
        other => return Err(Error::NotConvex(format!("{other:?} is not a convex European payoff"))),
    })
}

fn date_of(payoff: &Payoff) -> Result<usize> {
    match payoff {
        Payoff::Power { date, .. }
        | Payoff::EuropeanCall { date, .. }
        | Payoff::EuropeanPut { date, .. }
        | Payoff::Entropy { date } => Ok(*date),
        other => Err(Error::NotConvex(format!("{other:?} has no single date"))),
    }
}

/// The calendar-spread super-hedge of a convex European claim `g(x_t)`:
/// hold `g(x_{t+1})` (quoted at `price`, bought with the cash) and trade
/// `Δ_t = −g′(x_t)` at date `t` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarSpread {
    pub claim: Payoff,
    pub instruments: InstrumentSet,
    pub hedge: SemiStaticHedge,
}

pub fn calendar_spread_hedge(model: &PathGridModel, claim: &Payoff, price: f64) -> Result<CalendarSpread> {
    claim.validate(model)?;
    let t = date_of(claim)?;
    if t >= model.horizon() {
        return Err(Error::InvalidPayoff(format!(
            "claim date {t} leaves no later date on horizon {}",
            model.horizon()
        )));
    }
    let later = at_date(claim, t + 1)?;
    let instruments = InstrumentSet::new(vec![Instrument::buy_only(later, price)]);
    let mut strategy = DynamicStrategy::zero(model);
    let mut failure = None;
    for id in model.prefix_offset(t)..model.prefix_offset(t + 1) {
        let digits = model.prefix_digits(id);
        let x = digits.last().map_or(model.s0(), |&d| model.levels()[d]);
        match convex_subgradient(claim, x, model) {
            Ok(s) => strategy.set(id, 0.0 - s),
            Err(e) => failure = Some(e),
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let mut hedge = SemiStaticHedge {
        cash: price,
        legs: vec![StaticLeg {
            instrument: 0,
            direction: crate::ftap::Direction::Long,
            weight: 1.0,
        }],
        marginal_legs: Vec::new(),
        strategy,
        slack_min: f64::NAN,
    };
    hedge.slack_min = verify_hedge(&hedge, claim, model, &instruments);
    Ok(CalendarSpread {
        claim: claim.clone(),
        instruments,
        hedge,
    })
}

/// `e/(e−1)`.
pub fn doob_constant() -> f64 {
    E / (E - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub cash: f64,
    #[serde(rename = "static")]
    pub legs: Vec<StaticLeg>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginal_legs: Vec<MarginalLeg>,
    pub dynamic: Vec<PrefixPosition>,
    pub slack_min: f64,
}

impl HedgeReport {
    pub fn new(hedge: &SemiStaticHedge, model: &PathGridModel) -> Self {
        Self {
            cash: hedge.cash,
            legs: hedge
                .legs
                .iter()
                .filter(|l| l.weight > REPORT_WEIGHT_THRESHOLD)
                .cloned()
                .collect(),
            marginal_legs: hedge.marginal_legs.clone(),
            dynamic: hedge
                .strategy
                .entries(model)
                .into_iter()
                .filter(|e| e.position.abs() > REPORT_WEIGHT_THRESHOLD)
                .collect(),
            slack_min: hedge.slack_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub value: f64,
    pub gap: f64,
    pub witness: Vec<WeightedPath>,
    pub hedge: HedgeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingReport {
    pub claim: Payoff,
    pub upper: SideReport,
    pub lower: SideReport,
    pub notes: Vec<String>,
}

impl PricingReport {
    pub fn new(bounds: &PriceBounds, claim: &Payoff, model: &PathGridModel) -> Self {
        let side = |s: &BoundSide| SideReport {
            value: s.value,
            gap: s.gap,
            witness: sparse_measure(&s.measure, model),
            hedge: HedgeReport::new(&s.hedge, model),
        };
        Self {
            claim: claim.clone(),
            upper: side(&bounds.upper),
            lower: side(&bounds.lower),
            notes: bounds.notes.clone(),
        }
    }
}
