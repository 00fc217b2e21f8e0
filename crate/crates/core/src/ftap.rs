//! The arbitrage / martingale-measure dichotomy on the grid.
//!
//! `check` solves the feasibility program of [`crate::martingale`]. If it is
//! feasible the solution is an admissible martingale measure. Otherwise the
//! phase-1 Farkas ray `λ` satisfies, for every path `p`,
//!
//! ```text
//! λ_prob + Σ_t λ_mart(prefix_t(p))·(x_{t+1} − x_t) + Σ_i λ_i φ_i(p) ≤ 0,   λ_prob > 0
//! ```
//!
//! so `a_i = −λ_i` (nonnegative on buy-only rows) and `Δ = −λ_mart` give a
//! semi-static portfolio whose terminal value is at least `λ_prob` on every
//! path. Certificates are rescaled so the static weights sum to one, which
//! makes `min_gain` the sure profit per unit of options traded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Certificate, LpStatus, Tolerances};
use crate::market::{InstrumentSet, PathGridModel, Side};
use crate::martingale::{build_constraints, verify_measure, ConstraintBundle, PathMeasure};

/// Positions in the underlying, one per prefix `(x_1, …, x_t)`, `t < T`,
/// indexed by prefix id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicStrategy {
    pub positions: Vec<f64>,
}

/// A prefix-to-position entry in human-readable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixPosition {
    pub prefix: Vec<f64>,
    pub position: f64,
}

impl DynamicStrategy {
    pub fn zero(model: &PathGridModel) -> Self {
        Self {
            positions: vec![0.0; model.prefix_count()],
        }
    }

    /// Builds positions from `f(prefix_coordinates)`.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(model: &PathGridModel, mut f: F) -> Self {
        let positions = (0..model.prefix_count())
            .map(|id| {
                let coords: Vec<f64> = model
                    .prefix_digits(id)
                    .into_iter()
                    .map(|d| model.levels()[d])
                    .collect();
                f(&coords)
            })
            .collect();
        Self { positions }
    }

    pub fn position(&self, prefix_id: usize) -> f64 {
        self.positions[prefix_id]
    }

    pub fn set(&mut self, prefix_id: usize, position: f64) {
        self.positions[prefix_id] = position;
    }

    pub fn scale(&mut self, factor: f64) {
        for p in &mut self.positions {
            *p *= factor;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.positions.iter().all(|p| *p == 0.0)
    }

    /// Nonzero entries keyed by prefix coordinates.
    pub fn entries(&self, model: &PathGridModel) -> Vec<PrefixPosition> {
        self.positions
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != 0.0)
            .map(|(id, &position)| PrefixPosition {
                prefix: model
                    .prefix_digits(id)
                    .into_iter()
                    .map(|d| model.levels()[d])
                    .collect(),
                position,
            })
            .collect()
    }

    pub fn from_entries(model: &PathGridModel, entries: &[PrefixPosition]) -> Result<Self> {
        let mut s = Self::zero(model);
        for e in entries {
            if e.prefix.len() >= model.horizon() {
                return Err(Error::InvalidPath(format!(
                    "prefix of length {} at horizon {}",
                    e.prefix.len(),
                    model.horizon()
                )));
            }
            let digits: Vec<usize> = e
                .prefix
                .iter()
                .map(|&x| {
                    model
                        .level_index(x)
                        .ok_or_else(|| Error::InvalidPath(format!("prefix coordinate {x} is off the grid")))
                })
                .collect::<Result<_>>()?;
            s.set(model.prefix_id(&digits), e.position);
        }
        Ok(s)
    }

    /// `(Δ ∙ x)_T` on every path, in enumeration order.
    pub fn gains(&self, model: &PathGridModel) -> Result<Vec<f64>> {
        if self.positions.len() != model.prefix_count() {
            return Err(Error::DimensionMismatch(format!(
                "strategy has {} positions, the grid has {} prefixes",
                self.positions.len(),
                model.prefix_count()
            )));
        }
        let g = model.grid_size();
        let offsets: Vec<usize> = (0..model.horizon()).map(|t| model.prefix_offset(t)).collect();
        let mut out = Vec::with_capacity(model.path_count()?);
        model.for_each_path(|_, digits, coords| {
            let mut local = 0usize;
            let mut gain = 0.0;
            for t in 0..model.horizon() {
                let pos = self.positions[offsets[t] + local];
                if pos != 0.0 {
                    gain += pos * (coords[t] - model.coord(coords, t));
                }
                local = local * g + digits[t];
            }
            out.push(gain);
        })?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// holds `payoff − price`
    Long,
    /// holds `price − payoff`; two-sided instruments only
    Short,
}

/// A static position `weight ≥ 0` in `±φ_instrument`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticLeg {
    pub instrument: usize,
    pub direction: Direction,
    pub weight: f64,
}

impl StaticLeg {
    pub fn signed_weight(&self) -> f64 {
        match self.direction {
            Direction::Long => self.weight,
            Direction::Short => -self.weight,
        }
    }
}

/// Splits signed instrument weights into nonnegative legs. Negative
/// weights on buy-only quotes within `tol` are treated as zero.
pub(crate) fn legs_from_signed(
    signed: &[f64],
    instruments: &InstrumentSet,
    tol: f64,
) -> Result<Vec<StaticLeg>> {
    let mut legs = Vec::new();
    for (i, (&w, inst)) in signed.iter().zip(&instruments.instruments).enumerate() {
        if w == 0.0 {
            continue;
        }
        let direction = if w > 0.0 { Direction::Long } else { Direction::Short };
        if direction == Direction::Short && inst.side == Side::BuyOnly {
            if -w <= tol {
                continue;
            }
            return Err(Error::NumericalFailure(format!(
                "dual asks to sell buy-only instrument {i} (weight {w:.3e})"
            )));
        }
        legs.push(StaticLeg {
            instrument: i,
            direction,
            weight: w.abs(),
        });
    }
    Ok(legs)
}

/// Terminal value of the static legs on every path.
pub(crate) fn static_values(
    legs: &[StaticLeg],
    tables: &[Vec<f64>],
    paths: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; paths];
    for leg in legs {
        let table = tables.get(leg.instrument).ok_or_else(|| {
            Error::DimensionMismatch(format!("leg refers to missing instrument {}", leg.instrument))
        })?;
        let w = leg.signed_weight();
        for (o, v) in out.iter_mut().zip(table) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// A semi-static portfolio that is strictly profitable on every path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageCertificate {
    pub legs: Vec<StaticLeg>,
    pub strategy: DynamicStrategy,
    /// `min_p Σ a_n φ_n(p) + (Δ ∙ x)_T(p)`
    pub min_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum FtapVerdict {
    Feasible { measure: PathMeasure },
    Arbitrage { certificate: ArbitrageCertificate },
}

impl FtapVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FtapVerdict::Feasible { .. })
    }
}

/// Facts about the run that matter when reading the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictMetadata {
    pub paths: usize,
    pub rows: usize,
    pub lp_iterations: usize,
    pub growth_witness: Option<usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtapOutcome {
    pub verdict: FtapVerdict,
    pub metadata: VerdictMetadata,
}

pub(crate) fn grid_notes(instruments: &InstrumentSet) -> Vec<String> {
    let mut notes = vec![
        "conclusions hold for the finite grid and the listed instruments only".to_string(),
        "growth conditions are vacuous on a bounded grid and were not checked".to_string(),
    ];
    if instruments.growth_witness.is_none() {
        notes.push("no super-linear instrument designated; not required on a bounded grid".to_string());
    }
    notes
}

/// Decides whether the market admits a martingale measure or an arbitrage.
pub fn check(model: &PathGridModel, instruments: &InstrumentSet, tol: &Tolerances) -> Result<FtapOutcome> {
    let bundle = build_constraints(model, instruments, None)?;
    check_bundle(&bundle, tol)
}

/// As [`check`], on prebuilt constraints (marginal rows are honored too).
pub fn check_bundle(bundle: &ConstraintBundle, tol: &Tolerances) -> Result<FtapOutcome> {
    let sol = lp::solve(bundle.lp(), tol)?;
    let metadata = VerdictMetadata {
        paths: bundle.path_count(),
        rows: bundle.row_count(),
        lp_iterations: sol.iterations,
        growth_witness: bundle.instruments().growth_witness,
        notes: grid_notes(bundle.instruments()),
    };
    let verdict = match sol.status {
        LpStatus::Optimal => {
            let measure = PathMeasure::new(sol.primal);
            let report = verify_measure(&measure, bundle, 10.0 * tol.feas);
            if !report.pass {
                return Err(Error::NumericalFailure(format!(
                    "feasible point fails the direct check by {:.3e}",
                    report.max_violation()
                )));
            }
            FtapVerdict::Feasible { measure }
        }
        LpStatus::Infeasible => {
            let Some(Certificate::Farkas { ray, .. }) = sol.certificate else {
                return Err(Error::NumericalFailure("infeasible without a ray".into()));
            };
            let certificate = certificate_from_ray(bundle, &ray, tol)?;
            FtapVerdict::Arbitrage { certificate }
        }
        LpStatus::Unbounded => {
            return Err(Error::NumericalFailure("feasibility program reported unbounded".into()))
        }
    };
    Ok(FtapOutcome { verdict, metadata })
}

fn certificate_from_ray(bundle: &ConstraintBundle, ray: &[f64], tol: &Tolerances) -> Result<ArbitrageCertificate> {
    let layout = bundle.layout();
    if !layout.marginals.is_empty() {
        return Err(Error::NoAdmissibleMeasure);
    }
    let model = bundle.model();
    let signed: Vec<f64> = ray[layout.instruments.clone()].iter().map(|l| -l).collect();
    let total: f64 = signed.iter().map(|w| w.abs()).sum();
    if total <= tol.feas {
        return Err(Error::NumericalFailure(
            "Farkas ray carries no static position".into(),
        ));
    }
    let scale = 1.0 / total;
    let signed: Vec<f64> = signed.iter().map(|w| w * scale).collect();
    let legs = legs_from_signed(&signed, bundle.instruments(), tol.feas)?;
    let strategy = DynamicStrategy {
        positions: ray[layout.martingale.clone()].iter().map(|l| 0.0 - l * scale).collect(),
    };
    let mut cert = ArbitrageCertificate {
        legs,
        strategy,
        min_gain: f64::NAN,
    };
    cert.min_gain = certify_arbitrage(&cert, model, bundle.instruments());
    if !(cert.min_gain > tol.feas) {
        return Err(Error::NumericalFailure(format!(
            "arbitrage certificate rechecks to min gain {:.3e}",
            cert.min_gain
        )));
    }
    Ok(cert)
}

/// Minimum over all grid paths of the certificate's terminal value,
/// computed by direct evaluation. Returns `-∞` if the certificate does not
/// fit the market.
pub fn certify_arbitrage(cert: &ArbitrageCertificate, model: &PathGridModel, instruments: &InstrumentSet) -> f64 {
    portfolio_values(&cert.legs, &cert.strategy, model, instruments)
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NEG_INFINITY)
}

/// `Σ a_n φ_n(p) + (Δ ∙ x)_T(p)` on every path.
pub fn portfolio_values(
    legs: &[StaticLeg],
    strategy: &DynamicStrategy,
    model: &PathGridModel,
    instruments: &InstrumentSet,
) -> Result<Vec<f64>> {
    let tables = instruments.normalized_tables(model)?;
    let paths = model.path_count()?;
    let mut values = static_values(legs, &tables, paths)?;
    for (v, g) in values.iter_mut().zip(strategy.gains(model)?) {
        *v += g;
    }
    Ok(values)
}

/// The certificate with its strategy keyed by prefix coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub legs: Vec<StaticLeg>,
    pub strategy: Vec<PrefixPosition>,
    pub min_gain: f64,
}

/// A path weight above the reporting threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPath {
    pub path: Vec<f64>,
    pub weight: f64,
}

pub const REPORT_WEIGHT_THRESHOLD: f64 = 1e-12;

pub fn sparse_measure(measure: &PathMeasure, model: &PathGridModel) -> Vec<WeightedPath> {
    measure
        .support(REPORT_WEIGHT_THRESHOLD)
        .into_iter()
        .map(|(i, weight)| WeightedPath {
            path: model.path_at(i).coordinates,
            weight,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum VerdictReport {
    Feasible { measure: Vec<WeightedPath> },
    Arbitrage { certificate: CertificateReport },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtapReport {
    pub verdict: VerdictReport,
    pub metadata: VerdictMetadata,
}

impl FtapReport {
    pub fn new(outcome: &FtapOutcome, model: &PathGridModel) -> Self {
        let verdict = match &outcome.verdict {
            FtapVerdict::Feasible { measure } => VerdictReport::Feasible {
                measure: sparse_measure(measure, model),
            },
            FtapVerdict::Arbitrage { certificate } => VerdictReport::Arbitrage {
                certificate: CertificateReport {
                    legs: certificate.legs.clone(),
                    strategy: certificate
                        .strategy
                        .entries(model)
                        .into_iter()
                        .filter(|e| e.position.abs() > REPORT_WEIGHT_THRESHOLD)
                        .collect(),
                    min_gain: certificate.min_gain,
                },
            },
        };
        Self {
            verdict,
            metadata: outcome.metadata.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{entropy, Instrument, Payoff};

    fn model(h: usize, levels: &[f64], s0: f64) -> PathGridModel {
        PathGridModel::new(h, levels.to_vec(), s0).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn entropy_quote_is_feasible() {
        let m = model(2, &[0.5, 1.0, 2.0], 1.0);
        for c in [0.0, 0.3] {
            let set = InstrumentSet::new(vec![Instrument::buy_only(Payoff::Entropy { date: 2 }, c)])
                .with_growth_witness(0);
            let out = check(&m, &set, &tol()).unwrap();
            let FtapVerdict::Feasible { measure } = out.verdict else {
                panic!("expected a measure")
            };
            let bundle = build_constraints(&m, &set, None).unwrap();
            assert!(verify_measure(&measure, &bundle, 1e-8).pass);
            // the constant path is a witness as well
            let constant = PathMeasure::constant_path(&m).unwrap();
            assert!(verify_measure(&constant, &bundle, 0.0).pass);
            assert_eq!(out.metadata.growth_witness, Some(0));
        }
        assert_eq!(entropy(1.0), 0.0);
    }

    #[test]
    fn empty_market_is_feasible() {
        let m = model(3, &[0.0, 1.0, 3.0], 1.0);
        let out = check(&m, &InstrumentSet::empty(), &tol()).unwrap();
        assert!(out.verdict.is_feasible());
        assert!(out.metadata.notes.iter().any(|n| n.contains("super-linear")));
    }

    #[test]
    fn overpriced_call_is_an_arbitrage() {
        let m = model(1, &[0.0, 1.0, 2.0], 1.0);
        let set = InstrumentSet::new(vec![Instrument::two_sided(
            Payoff::EuropeanCall { strike: 1.0, date: 1 },
            0.75,
        )]);
        let out = check(&m, &set, &tol()).unwrap();
        let FtapVerdict::Arbitrage { certificate } = out.verdict else {
            panic!("expected arbitrage")
        };
        assert_eq!(certificate.legs.len(), 1);
        assert_eq!(certificate.legs[0].direction, Direction::Short);
        assert!((certificate.legs[0].weight - 1.0).abs() < 1e-12);
        let recheck = certify_arbitrage(&certificate, &m, &set);
        assert!(recheck > 1e-8);
        assert_eq!(recheck, certificate.min_gain);
        // selling at 0.75 a call worth at most 0.5 earns at most 0.25 for sure
        assert!(recheck <= 0.25 + 1e-12);
    }

    #[test]
    fn trivial_certificates() {
        let m = model(1, &[0.0, 2.0], 1.0);
        let set = InstrumentSet::empty();
        let zero = ArbitrageCertificate {
            legs: vec![],
            strategy: DynamicStrategy::zero(&m),
            min_gain: 0.0,
        };
        assert_eq!(certify_arbitrage(&zero, &m, &set), 0.0);
        let mut delta = zero.clone();
        delta.strategy.set(0, 1.0);
        assert_eq!(certify_arbitrage(&delta, &m, &set), -1.0);
        let bad = ArbitrageCertificate {
            legs: vec![],
            strategy: DynamicStrategy { positions: vec![] },
            min_gain: 0.0,
        };
        assert_eq!(certify_arbitrage(&bad, &m, &set), f64::NEG_INFINITY);
    }

    #[test]
    fn strategy_entries_round_trip() {
        let m = model(3, &[0.5, 1.0, 2.0], 1.0);
        let s = DynamicStrategy::from_fn(&m, |prefix| prefix.iter().sum::<f64>() - 1.0);
        let entries = s.entries(&m);
        let back = DynamicStrategy::from_entries(&m, &entries).unwrap();
        assert_eq!(back, s);
        assert!(DynamicStrategy::from_entries(
            &m,
            &[PrefixPosition { prefix: vec![0.7], position: 1.0 }]
        )
        .is_err());
    }

    #[test]
    fn gains_match_definition() {
        let m = model(2, &[0.0, 1.0, 2.0], 1.0);
        let s = DynamicStrategy::from_fn(&m, |prefix| match prefix {
            [] => 2.0,
            [x] => -x,
            _ => unreachable!(),
        });
        let gains = s.gains(&m).unwrap();
        for (i, path) in m.enumerate_paths().unwrap().enumerate() {
            let (x1, x2) = (path.coordinates[0], path.coordinates[1]);
            let expected = 2.0 * (x1 - 1.0) - x1 * (x2 - x1);
            assert_eq!(gains[i], expected);
        }
    }

    #[test]
    fn arbitrage_report_round_trips() {
        let m = model(1, &[0.0, 1.0, 2.0], 1.0);
        let set = InstrumentSet::new(vec![Instrument::two_sided(
            Payoff::EuropeanCall { strike: 1.0, date: 1 },
            0.75,
        )]);
        let report = FtapReport::new(&check(&m, &set, &tol()).unwrap(), &m);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"branch\":\"arbitrage\""));
        let back: FtapReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn verdict_json_is_tagged() {
        let m = model(1, &[0.0, 2.0], 1.0);
        let out = check(&m, &InstrumentSet::empty(), &tol()).unwrap();
        let json = serde_json::to_value(&out).unwrap();
        assert_eq!(json["verdict"]["branch"], "feasible");
        let back: FtapOutcome = serde_json::from_value(json).unwrap();
        assert_eq!(back, out);
    }
}
