//! LP constraint blocks describing the admissible martingale measures on
//! the grid.
//!
//! Variables are path weights `π(p)`, one per path in enumeration order.
//! Rows, in order:
//!
//! * probability: `Σ_p π(p) = 1`;
//! * martingale: for each prefix `(x_1, …, x_t)`, `t < T`,
//!   `Σ_{p ⊒ prefix} π(p)(x_{t+1} − x_t) = 0` with `x_0 = s0`;
//! * instruments: `Σ_p π(p)(payoff(p) − price) ≤ 0` for buy-only quotes,
//!   `= 0` for two-sided ones;
//! * marginals: for each given marginal and level, `Σ_{p: x_t = level} π(p) = ν(level)`.
//!
//! A row over a prefix of zero mass is vacuous, which is the linear form of
//! the conditional martingale property.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, RowSense};
use crate::marginals::Marginal;
use crate::market::{InstrumentSet, PathGridModel, Side};

/// A probability vector over grid paths, indexed in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeasure {
    pub weights: Vec<f64>,
}

impl PathMeasure {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    /// Unit mass on one path.
    pub fn dirac(path_count: usize, index: usize) -> Self {
        let mut weights = vec![0.0; path_count];
        weights[index] = 1.0;
        Self { weights }
    }

    /// Unit mass on the constant path at `s0`, if `s0` is a grid level.
    pub fn constant_path(model: &PathGridModel) -> Result<Self> {
        let d = model.level_index(model.s0()).ok_or_else(|| {
            Error::DomainError("s0 is not a grid level, the constant path is not on the grid".into())
        })?;
        let digits = vec![d; model.horizon()];
        Ok(Self::dirac(model.path_count()?, model.path_index(&digits)))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ f dπ` for a table of values in enumeration order.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Paths carrying weight above `threshold`, as `(index, weight)`.
    pub fn support(&self, threshold: f64) -> Vec<(usize, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > threshold)
            .map(|(i, w)| (i, *w))
            .collect()
    }

    /// Law of `x_date` under the measure, as masses over the levels.
    pub fn marginal_masses(&self, model: &PathGridModel, date: usize) -> Result<Vec<f64>> {
        if date == 0 || date > model.horizon() {
            return Err(Error::InvalidMarginal(format!("date {date} outside 1..={}", model.horizon())));
        }
        let mut out = vec![0.0; model.grid_size()];
        model.for_each_path(|i, digits, _| out[digits[date - 1]] += self.weights[i])?;
        Ok(out)
    }
}

/// Row ranges of each block in the bundle's LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub probability: usize,
    pub martingale: Range<usize>,
    pub instruments: Range<usize>,
    pub marginals: Range<usize>,
}

/// Constraint rows for the admissible martingale measures of a market.
#[derive(Debug, Clone)]
pub struct ConstraintBundle {
    model: PathGridModel,
    instruments: InstrumentSet,
    marginals: Vec<Marginal>,
    instrument_tables: Vec<Vec<f64>>,
    lp: LinearProgram,
    layout: BlockLayout,
}

impl ConstraintBundle {
    pub fn model(&self) -> &PathGridModel {
        &self.model
    }

    pub fn instruments(&self) -> &InstrumentSet {
        &self.instruments
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// Normalized `payoff − price` values per instrument, per path.
    pub fn instrument_tables(&self) -> &[Vec<f64>] {
        &self.instrument_tables
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn path_count(&self) -> usize {
        self.lp.num_vars()
    }

    pub fn row_count(&self) -> usize {
        self.lp.num_rows()
    }

    /// The feasibility program (zero objective).
    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    /// The bundle's rows with the given objective.
    pub fn lp_with_objective(&self, objective: Vec<f64>) -> LinearProgram {
        let mut lp = self.lp.clone();
        lp.set_objective_vec(objective);
        lp
    }
}

/// Assembles the probability, martingale, instrument and marginal rows.
pub fn build_constraints(
    model: &PathGridModel,
    instruments: &InstrumentSet,
    marginals: Option<&[Marginal]>,
) -> Result<ConstraintBundle> {
    let paths = model.path_count()?;
    let instrument_tables = instruments.normalized_tables(model)?;
    let marginals: Vec<Marginal> = marginals.map(<[Marginal]>::to_vec).unwrap_or_default();
    for nu in &marginals {
        nu.check_against(model)?;
    }

    let g = model.grid_size();
    let horizon = model.horizon();
    let n_prefix = model.prefix_count();

    let mut senses = vec![RowSense::Eq];
    let mut rhs = vec![1.0];
    let probability = 0;
    let mart_start = 1;
    senses.extend(std::iter::repeat(RowSense::Eq).take(n_prefix));
    rhs.extend(std::iter::repeat(0.0).take(n_prefix));
    let inst_start = mart_start + n_prefix;
    for inst in &instruments.instruments {
        senses.push(match inst.side {
            Side::BuyOnly => RowSense::Le,
            Side::TwoSided => RowSense::Eq,
        });
        rhs.push(0.0);
    }
    let marg_start = inst_start + instruments.len();
    for nu in &marginals {
        senses.extend(std::iter::repeat(RowSense::Eq).take(g));
        rhs.extend_from_slice(&nu.masses);
    }
    let marg_end = marg_start + marginals.len() * g;

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rhs.len()];
    model.for_each_path(|p, digits, coords| {
        rows[probability].push((p, 1.0));
        let mut local = 0usize;
        for t in 0..horizon {
            let id = prefix_offset(g, t) + local;
            let step = coords[t] - model.coord(coords, t);
            if step != 0.0 {
                rows[mart_start + id].push((p, step));
            }
            local = local * g + digits[t];
        }
        for (k, table) in instrument_tables.iter().enumerate() {
            if table[p] != 0.0 {
                rows[inst_start + k].push((p, table[p]));
            }
        }
        for (k, nu) in marginals.iter().enumerate() {
            rows[marg_start + k * g + digits[nu.date - 1]].push((p, 1.0));
        }
    })?;
    let mut lp = LinearProgram::new(paths);
    for ((sense, b), coeffs) in senses.into_iter().zip(rhs).zip(&rows) {
        lp.add_row(sense, coeffs, b);
    }

    Ok(ConstraintBundle {
        model: model.clone(),
        instruments: instruments.clone(),
        marginals,
        instrument_tables,
        lp,
        layout: BlockLayout {
            probability,
            martingale: mart_start..inst_start,
            instruments: inst_start..marg_start,
            marginals: marg_start..marg_end,
        },
    })
}

fn prefix_offset(g: usize, t: usize) -> usize {
    (0..t).map(|s| g.pow(s as u32)).sum()
}

/// Worst violation of each block, computed by direct summation over paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub probability: f64,
    pub nonnegativity: f64,
    pub martingale: f64,
    pub instruments: f64,
    pub marginals: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl MeasureReport {
    pub fn max_violation(&self) -> f64 {
        self.probability
            .max(self.nonnegativity)
            .max(self.martingale)
            .max(self.instruments)
            .max(self.marginals)
    }
}

/// Re-checks membership of `pi` in the bundle's measure set without the LP.
pub fn verify_measure(pi: &PathMeasure, bundle: &ConstraintBundle, tol: f64) -> MeasureReport {
    let model = &bundle.model;
    let fail = |tol| MeasureReport {
        probability: f64::INFINITY,
        nonnegativity: f64::INFINITY,
        martingale: f64::INFINITY,
        instruments: f64::INFINITY,
        marginals: f64::INFINITY,
        tolerance: tol,
        pass: false,
    };
    let Ok(paths) = model.path_count() else {
        return fail(tol);
    };
    if pi.weights.len() != paths {
        return fail(tol);
    }
    let w = &pi.weights;
    let probability = (w.iter().sum::<f64>() - 1.0).abs();
    let nonnegativity = w.iter().fold(0.0f64, |m, &x| m.max(-x));

    let g = model.grid_size();
    let mut prefix_sums = vec![0.0; model.prefix_count()];
    let mut marg_sums: Vec<Vec<f64>> = vec![vec![0.0; g]; bundle.marginals.len()];
    let _ = model.for_each_path(|p, digits, coords| {
        let mut local = 0usize;
        for t in 0..model.horizon() {
            let id = prefix_offset(g, t) + local;
            prefix_sums[id] += w[p] * (coords[t] - model.coord(coords, t));
            local = local * g + digits[t];
        }
        for (k, nu) in bundle.marginals.iter().enumerate() {
            marg_sums[k][digits[nu.date - 1]] += w[p];
        }
    });
    let martingale = prefix_sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));

    let mut instruments = 0.0f64;
    for (inst, table) in bundle.instruments.instruments.iter().zip(&bundle.instrument_tables) {
        let value = pi.expectation(table);
        let viol = match inst.side {
            Side::BuyOnly => value.max(0.0),
            Side::TwoSided => value.abs(),
        };
        instruments = instruments.max(viol);
    }
    let mut marginals = 0.0f64;
    for (nu, sums) in bundle.marginals.iter().zip(&marg_sums) {
        for (s, m) in sums.iter().zip(&nu.masses) {
            marginals = marginals.max((s - m).abs());
        }
    }
    let mut report = MeasureReport {
        probability,
        nonnegativity,
        martingale,
        instruments,
        marginals,
        tolerance: tol,
        pass: false,
    };
    report.pass = report.max_violation() <= tol;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{self, LpStatus, Tolerances};
    use crate::market::{Instrument, Payoff};

    fn model(h: usize, levels: &[f64], s0: f64) -> PathGridModel {
        PathGridModel::new(h, levels.to_vec(), s0).unwrap()
    }

    #[test]
    fn two_point_measure_is_forced() {
        let m = model(1, &[0.0, 2.0], 1.0);
        let b = build_constraints(&m, &InstrumentSet::empty(), None).unwrap();
        assert_eq!(b.row_count(), 2);
        let sol = lp::solve(b.lp(), &Tolerances::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 0.5).abs() < 1e-12);
        assert!((sol.primal[1] - 0.5).abs() < 1e-12);
        let rep = verify_measure(&PathMeasure::new(vec![0.5, 0.5]), &b, 1e-12);
        assert!(rep.pass);
        assert_eq!(rep.max_violation(), 0.0);
    }

    #[test]
    fn single_level_grid_has_one_path() {
        let m = model(4, &[1.0], 1.0);
        let b = build_constraints(&m, &InstrumentSet::empty(), None).unwrap();
        let sol = lp::solve(b.lp(), &Tolerances::default()).unwrap();
        assert_eq!(sol.primal, vec![1.0]);
        assert_eq!(PathMeasure::constant_path(&m).unwrap().weights, vec![1.0]);
    }

    fn mispriced() -> (PathGridModel, InstrumentSet) {
        let m = model(1, &[0.0, 1.0, 2.0], 1.0);
        let set = InstrumentSet::new(vec![Instrument::two_sided(
            Payoff::EuropeanCall { strike: 1.0, date: 1 },
            0.75,
        )]);
        (m, set)
    }

    #[test]
    fn overpriced_call_is_infeasible() {
        let (m, set) = mispriced();
        let b = build_constraints(&m, &set, None).unwrap();
        let sol = lp::solve(b.lp(), &Tolerances::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn uniform_measure_report() {
        let (m, set) = mispriced();
        let b = build_constraints(&m, &set, None).unwrap();
        let third = 1.0 / 3.0;
        let rep = verify_measure(&PathMeasure::new(vec![third; 3]), &b, 1e-9);
        assert!(rep.martingale < 1e-15);
        assert!((rep.instruments - (0.75 - third)).abs() < 1e-12);
        assert!(!rep.pass);
    }

    #[test]
    fn short_mass_is_reported() {
        let m = model(1, &[0.0, 2.0], 1.0);
        let b = build_constraints(&m, &InstrumentSet::empty(), None).unwrap();
        let rep = verify_measure(&PathMeasure::new(vec![0.45, 0.45]), &b, 1e-9);
        assert!((rep.probability - 0.1).abs() < 1e-12);
        assert!(!rep.pass);
        let wrong_len = verify_measure(&PathMeasure::new(vec![1.0]), &b, 1e-9);
        assert!(!wrong_len.pass);
    }

    #[test]
    fn row_count_formula() {
        let m = model(3, &[0.0, 1.0, 2.0, 3.0], 1.5);
        let set = InstrumentSet::new(vec![
            Instrument::two_sided(Payoff::EuropeanCall { strike: 1.0, date: 3 }, 0.8),
            Instrument::buy_only(Payoff::Power { exponent: 2.0, date: 3 }, 6.0),
        ]);
        let nu = Marginal::new(3, vec![0.25; 4]).unwrap();
        let b = build_constraints(&m, &set, Some(&[nu])).unwrap();
        assert_eq!(b.row_count(), 1 + (1 + 4 + 16) + 2 + 4);
        assert_eq!(b.layout().martingale, 1..22);
        assert_eq!(b.layout().instruments, 22..24);
        assert_eq!(b.layout().marginals, 24..28);
    }

    #[test]
    fn marginal_block_pushes_forward() {
        let m = model(2, &[0.0, 1.0, 2.0], 1.0);
        let nu1 = Marginal::new(1, vec![0.25, 0.5, 0.25]).unwrap();
        let nu2 = Marginal::new(2, vec![0.375, 0.25, 0.375]).unwrap();
        let b = build_constraints(&m, &InstrumentSet::empty(), Some(&[nu1.clone(), nu2.clone()])).unwrap();
        let sol = lp::solve(b.lp(), &Tolerances::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let pi = PathMeasure::new(sol.primal);
        assert!(verify_measure(&pi, &b, 1e-9).pass);
        for nu in [nu1, nu2] {
            let got = pi.marginal_masses(&m, nu.date).unwrap();
            for (a, b) in got.iter().zip(&nu.masses) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
