//! A small dense revised-simplex solver for
//!
//! ```text
//! min cᵀy  s.t.  A_eq·y = b_eq,  A_le·y ≤ b_le,  lo ≤ y ≤ hi
//! ```
//!
//! returning either an optimal primal/dual pair, a Farkas ray proving
//! infeasibility, or a primal ray proving unboundedness. Every answer is
//! re-checked against the original data before it is returned; a result
//! that fails its own certificate check is reported as `NumericalFailure`.
//!
//! Sign conventions. Row multipliers `λ` satisfy `c − Aᵀλ = r` (the reduced
//! costs), so `λ_i = ∂(optimal value)/∂b_i`. Multipliers of `≤` rows are
//! therefore `≤ 0`. A Farkas ray uses the same cone: `λ_le ≤ 0` and
//! `bᵀλ − sup_{lo≤y≤hi} (Aᵀλ)ᵀy > 0`. With `y ≥ 0` and no upper bounds this
//! reduces to `Aᵀλ ≤ 0`, `bᵀλ > 0`.

mod mps;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mps::to_fixed_mps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Eq,
    Le,
}

/// A linear program in triplet form. Rows keep their insertion order and
/// the dual vector follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    senses: Vec<RowSense>,
    rhs: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
}

impl LinearProgram {
    /// `num_vars` variables with zero cost and bounds `[0, +∞)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            senses: Vec::new(),
            rhs: Vec::new(),
            triplets: Vec::new(),
        }
    }

    /// Builds from separate equality and inequality blocks; the dual vector
    /// lists equality rows first.
    #[allow(clippy::too_many_arguments)]
    pub fn from_blocks(
        objective: Vec<f64>,
        eq: &[(usize, usize, f64)],
        b_eq: &[f64],
        le: &[(usize, usize, f64)],
        b_le: &[f64],
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::MalformedLp("bound vectors do not match the objective".into()));
        }
        let mut lp = Self {
            num_vars: n,
            objective,
            lower,
            upper,
            senses: Vec::new(),
            rhs: Vec::new(),
            triplets: Vec::new(),
        };
        for &b in b_eq {
            lp.senses.push(RowSense::Eq);
            lp.rhs.push(b);
        }
        for &b in b_le {
            lp.senses.push(RowSense::Le);
            lp.rhs.push(b);
        }
        let m_eq = b_eq.len();
        for &(r, c, v) in eq {
            if r >= m_eq {
                return Err(Error::MalformedLp(format!("equality row {r} out of range")));
            }
            lp.triplets.push((r, c, v));
        }
        for &(r, c, v) in le {
            if r >= b_le.len() {
                return Err(Error::MalformedLp(format!("inequality row {r} out of range")));
            }
            lp.triplets.push((m_eq + r, c, v));
        }
        lp.compile()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn senses(&self) -> &[RowSense] {
        &self.senses
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_objective_vec(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.num_vars);
        self.objective = c;
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    /// Appends a row; returns its index in the dual vector.
    pub fn add_row(&mut self, sense: RowSense, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.rhs.len();
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.triplets.extend(coeffs.iter().map(|&(c, v)| (row, c, v)));
        row
    }

    pub fn add_eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.add_row(RowSense::Eq, coeffs, rhs)
    }

    pub fn add_le(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.add_row(RowSense::Le, coeffs, rhs)
    }

    /// Validates the program and produces column-major storage with
    /// duplicate entries summed.
    pub(crate) fn compile(&self) -> Result<Compiled<'_>> {
        let n = self.num_vars;
        let m = self.rhs.len();
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::MalformedLp("vector lengths disagree with num_vars".into()));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::MalformedLp(format!("invalid bounds [{lo}, {hi}] on variable {j}")));
            }
            if !self.objective[j].is_finite() {
                return Err(Error::MalformedLp(format!("non-finite cost on variable {j}")));
            }
        }
        if self.rhs.iter().any(|b| !b.is_finite()) {
            return Err(Error::MalformedLp("non-finite right-hand side".into()));
        }
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(self.triplets.len());
        for &(r, c, v) in &self.triplets {
            if r >= m || c >= n {
                return Err(Error::MalformedLp(format!("entry ({r}, {c}) out of range")));
            }
            if !v.is_finite() {
                return Err(Error::MalformedLp(format!("non-finite coefficient at ({r}, {c})")));
            }
            sorted.push((c, r, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_counts = vec![0usize; n];
        let mut rows: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in sorted {
            if last == Some((c, r)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                vals.push(v);
                col_counts[c] += 1;
                last = Some((c, r));
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for c in 0..n {
            col_start[c + 1] = col_start[c] + col_counts[c];
        }
        Ok(Compiled {
            m,
            n,
            col_start,
            rows,
            vals,
            lp: self,
        })
    }
}

/// Column-major view of a validated program.
pub(crate) struct Compiled<'a> {
    pub m: usize,
    pub n: usize,
    pub col_start: Vec<usize>,
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
    pub lp: &'a LinearProgram,
}

impl Compiled<'_> {
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.col_start[j], self.col_start[j + 1]);
        self.rows[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    /// `A·x`.
    pub fn times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (r, v) in self.column(j) {
                    out[r] += v * xj;
                }
            }
        }
        out
    }

    /// `Aᵀ·y`.
    pub fn transpose_times(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.column(j).map(|(r, v)| v * y[r]).sum())
            .collect()
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub gap: f64,
    pub comp: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-9,
            gap: 1e-7,
            comp: 1e-7,
            max_iterations: 500_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// Row multipliers proving infeasibility and the margin
    /// `bᵀλ − sup_box (Aᵀλ)ᵀy`.
    Farkas { ray: Vec<f64>, margin: f64 },
    /// A feasible direction along which the objective decreases.
    PrimalRay { direction: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point, or the last feasible point for `Unbounded`.
    pub primal: Vec<f64>,
    /// Row multipliers (for `Infeasible`, the phase-1 multipliers).
    pub dual: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub certificate: Option<Certificate>,
    pub objective_value: f64,
    pub iterations: usize,
}

/// Residuals of an optimal primal/dual pair, computed from the program data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub complementarity: f64,
}

impl OptimalityReport {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

/// Primal residual of `x`: worst row or bound violation.
pub fn primal_residual(lp: &LinearProgram, x: &[f64]) -> Result<f64> {
    let c = lp.compile()?;
    if x.len() != c.n {
        return Err(Error::DimensionMismatch("primal vector length".into()));
    }
    let ax = c.times(x);
    let mut worst: f64 = 0.0;
    for i in 0..c.m {
        let viol = match lp.senses[i] {
            RowSense::Eq => (ax[i] - lp.rhs[i]).abs(),
            RowSense::Le => (ax[i] - lp.rhs[i]).max(0.0),
        };
        worst = worst.max(viol);
    }
    for j in 0..c.n {
        worst = worst.max(lp.lower[j] - x[j]).max(x[j] - lp.upper[j]);
    }
    Ok(worst)
}

/// Checks an optimal pair `(x, λ)` against the program.
pub fn optimality_report(lp: &LinearProgram, x: &[f64], dual: &[f64]) -> Result<OptimalityReport> {
    let c = lp.compile()?;
    if dual.len() != c.m {
        return Err(Error::DimensionMismatch("dual vector length".into()));
    }
    let primal_res = primal_residual(lp, x)?;
    let at_y = c.transpose_times(dual);
    let ax = c.times(x);
    let mut dual_res: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj: f64 = lp.rhs.iter().zip(dual).map(|(b, y)| b * y).sum();
    for i in 0..c.m {
        if lp.senses[i] == RowSense::Le {
            dual_res = dual_res.max(dual[i]);
            comp = comp.max((lp.rhs[i] - ax[i]).max(0.0) * dual[i].abs());
        }
    }
    for j in 0..c.n {
        let r = lp.objective[j] - at_y[j];
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if r > 0.0 {
            if lo.is_finite() {
                dual_obj += r * lo;
                comp = comp.max((x[j] - lo).max(0.0) * r);
            } else {
                dual_res = dual_res.max(r);
            }
        } else if r < 0.0 {
            if hi.is_finite() {
                dual_obj += r * hi;
                comp = comp.max((hi - x[j]).max(0.0) * -r);
            } else {
                dual_res = dual_res.max(-r);
            }
        }
    }
    let primal_obj = lp.objective.iter().zip(x).map(|(c, x)| c * x).sum();
    Ok(OptimalityReport {
        primal_residual: primal_res,
        dual_residual: dual_res,
        primal_objective: primal_obj,
        dual_objective: dual_obj,
        complementarity: comp,
    })
}

/// Returns `(margin, residual)` for a candidate Farkas ray: the ray proves
/// infeasibility when `residual ≤ feas` and `margin > feas`.
pub fn farkas_check(lp: &LinearProgram, ray: &[f64]) -> Result<(f64, f64)> {
    let c = lp.compile()?;
    if ray.len() != c.m {
        return Err(Error::DimensionMismatch("ray length".into()));
    }
    let w = c.transpose_times(ray);
    let mut residual: f64 = 0.0;
    for i in 0..c.m {
        if lp.senses[i] == RowSense::Le {
            residual = residual.max(ray[i]);
        }
    }
    let mut sup = 0.0;
    for j in 0..c.n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if w[j] > 0.0 {
            if hi.is_finite() {
                sup += w[j] * hi;
            } else {
                residual = residual.max(w[j]);
            }
        } else if w[j] < 0.0 {
            if lo.is_finite() {
                sup += w[j] * lo;
            } else {
                residual = residual.max(-w[j]);
            }
        }
    }
    let btl: f64 = lp.rhs.iter().zip(ray).map(|(b, y)| b * y).sum();
    Ok((btl - sup, residual))
}

/// Returns `(objective slope, residual)` for a candidate primal ray.
pub fn ray_check(lp: &LinearProgram, dir: &[f64]) -> Result<(f64, f64)> {
    let c = lp.compile()?;
    if dir.len() != c.n {
        return Err(Error::DimensionMismatch("direction length".into()));
    }
    let ad = c.times(dir);
    let mut residual: f64 = 0.0;
    for i in 0..c.m {
        residual = residual.max(match lp.senses[i] {
            RowSense::Eq => ad[i].abs(),
            RowSense::Le => ad[i].max(0.0),
        });
    }
    for j in 0..c.n {
        if lp.lower[j].is_finite() {
            residual = residual.max(-dir[j]);
        }
        if lp.upper[j].is_finite() {
            residual = residual.max(dir[j]);
        }
    }
    let slope = lp.objective.iter().zip(dir).map(|(c, d)| c * d).sum();
    Ok((slope, residual))
}

/// Solves `lp` and certifies the answer.
pub fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    let compiled = lp.compile()?;
    let sol = simplex::Simplex::new(&compiled, tol).run()?;
    certify(lp, &sol, tol)?;
    Ok(sol)
}

fn certify(lp: &LinearProgram, sol: &LpSolution, tol: &Tolerances) -> Result<()> {
    match sol.status {
        LpStatus::Optimal => {
            let rep = optimality_report(lp, &sol.primal, &sol.dual)?;
            let scale = 1.0 + rep.primal_objective.abs();
            if rep.primal_residual > tol.feas
                || rep.dual_residual > tol.feas
                || rep.gap() > tol.gap * scale
                || rep.complementarity > tol.comp * scale
            {
                return Err(Error::NumericalFailure(format!(
                    "optimal basis fails its certificate: primal {:.3e}, dual {:.3e}, gap {:.3e}, comp {:.3e}",
                    rep.primal_residual,
                    rep.dual_residual,
                    rep.gap(),
                    rep.complementarity
                )));
            }
        }
        LpStatus::Infeasible => {
            let Some(Certificate::Farkas { ray, .. }) = &sol.certificate else {
                return Err(Error::NumericalFailure("infeasible without a Farkas ray".into()));
            };
            let (margin, residual) = farkas_check(lp, ray)?;
            if residual > tol.feas || margin <= tol.feas {
                return Err(Error::NumericalFailure(format!(
                    "Farkas ray fails its check: margin {margin:.3e}, residual {residual:.3e}"
                )));
            }
        }
        LpStatus::Unbounded => {
            let Some(Certificate::PrimalRay { direction }) = &sol.certificate else {
                return Err(Error::NumericalFailure("unbounded without a primal ray".into()));
            };
            let (slope, residual) = ray_check(lp, direction)?;
            if residual > tol.feas || slope >= -tol.feas {
                return Err(Error::NumericalFailure(format!(
                    "primal ray fails its check: slope {slope:.3e}, residual {residual:.3e}"
                )));
            }
            if primal_residual(lp, &sol.primal)? > tol.feas {
                return Err(Error::NumericalFailure("unbounded point is not feasible".into()));
            }
        }
    }
    Ok(())
}
