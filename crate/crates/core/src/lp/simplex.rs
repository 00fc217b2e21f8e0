//! Two-phase bounded-variable revised simplex with Bland's rule.
//!
//! Columns are laid out as structurals `0..n`, one slack per `≤` row, then
//! one artificial per row. The basis inverse is kept dense and updated by
//! elementary row operations, with a fresh Gauss-Jordan factorization every
//! `REFACTOR_EVERY` pivots and before any result is extracted.

use super::{Certificate, Compiled, LpSolution, LpStatus, RowSense, Tolerances};
use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-13;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum StepOutcome {
    Optimal,
    Unbounded { entering: usize, dir: f64, alpha: Vec<f64> },
    Continue,
}

pub(crate) struct Simplex<'a> {
    data: &'a Compiled<'a>,
    tol: Tolerances,
    m: usize,
    n: usize,
    n_slack: usize,
    /// row of each slack column
    slack_row: Vec<usize>,
    /// sign of each artificial column
    sigma: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    /// row-major `m × m`
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    pub(crate) fn new(data: &'a Compiled<'a>, tol: &Tolerances) -> Self {
        let (m, n) = (data.m, data.n);
        let lp = data.lp;
        let slack_row: Vec<usize> = (0..m).filter(|&i| lp.senses[i] == RowSense::Le).collect();
        let n_slack = slack_row.len();
        let total = n + n_slack + m;

        let mut lo = Vec::with_capacity(total);
        let mut hi = Vec::with_capacity(total);
        lo.extend_from_slice(&lp.lower);
        hi.extend_from_slice(&lp.upper);
        lo.extend(std::iter::repeat(0.0).take(n_slack + m));
        hi.extend(std::iter::repeat(f64::INFINITY).take(n_slack + m));

        let mut x = vec![0.0; total];
        for j in 0..n {
            x[j] = if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
        }
        let ax = data.times(&x[..n]);
        let mut sigma = vec![1.0; m];
        for i in 0..m {
            let r = lp.rhs[i] - ax[i];
            sigma[i] = if r >= 0.0 { 1.0 } else { -1.0 };
            x[n + n_slack + i] = r.abs();
        }
        let basis: Vec<usize> = (0..m).map(|i| n + n_slack + i).collect();
        let mut position = vec![None; total];
        for (k, &b) in basis.iter().enumerate() {
            position[b] = Some(k);
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = sigma[i];
        }
        Self {
            data,
            tol: *tol,
            m,
            n,
            n_slack,
            slack_row,
            sigma,
            lo,
            hi,
            cost: vec![0.0; total],
            x,
            basis,
            position,
            binv,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + self.n_slack + self.m
    }

    fn for_column<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        if j < self.n {
            for (r, v) in self.data.column(j) {
                f(r, v);
            }
        } else if j < self.n + self.n_slack {
            f(self.slack_row[j - self.n], 1.0);
        } else {
            let r = j - self.n - self.n_slack;
            f(r, self.sigma[r]);
        }
    }

    fn dot(&self, y: &[f64], j: usize) -> f64 {
        let mut s = 0.0;
        self.for_column(j, |r, v| s += y[r] * v);
        s
    }

    /// `B⁻¹ a_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_column(j, |r, v| {
            for (k, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[k * m + r] * v;
            }
        });
        alpha
    }

    /// `yᵀ = c_Bᵀ B⁻¹`
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for k in 0..m {
            let cb = self.cost[self.basis[k]];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yr, b) in y.iter_mut().zip(row) {
                    *yr += cb * b;
                }
            }
        }
        y
    }

    /// Rebuilds `B⁻¹` from scratch and recomputes the basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // augmented [B | I], row-major m × 2m
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for k in 0..m {
            let b = self.basis[k];
            self.for_column(b, |r, v| aug[r * w + k] += v);
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = aug[col * w + col].abs();
            for r in col + 1..m {
                let v = aug[r * w + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < SINGULAR_TOL {
                return Err(Error::NumericalFailure("basis matrix became singular".into()));
            }
            if piv != col {
                for c in 0..w {
                    aug.swap(col * w + c, piv * w + c);
                }
            }
            let p = aug[col * w + col];
            for c in 0..w {
                aug[col * w + c] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[r * w + col];
                    if f != 0.0 {
                        for c in 0..w {
                            aug[r * w + c] -= f * aug[col * w + c];
                        }
                    }
                }
            }
        }
        for k in 0..m {
            self.binv[k * m..(k + 1) * m].copy_from_slice(&aug[k * w + m..(k + 1) * w]);
        }
        // x_B = B⁻¹ (b − N x_N)
        let mut rhs = self.data.lp.rhs.clone();
        for j in 0..self.total() {
            if self.position[j].is_none() && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |r, v| rhs[r] -= v * xj);
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    fn price(&self, y: &[f64]) -> Option<(usize, f64)> {
        let opt_tol = 0.1 * self.tol.feas;
        for j in 0..self.total() {
            if self.position[j].is_some() || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.cost[j] - self.dot(y, j);
            let can_up = self.x[j] < self.hi[j];
            let can_down = self.x[j] > self.lo[j];
            if d < -opt_tol && can_up {
                return Some((j, 1.0));
            }
            if d > opt_tol && can_down {
                return Some((j, -1.0));
            }
        }
        None
    }

    fn step(&mut self) -> Result<StepOutcome> {
        let y = self.duals();
        let Some((q, dir)) = self.price(&y) else {
            return Ok(StepOutcome::Optimal);
        };
        let alpha = self.ftran(q);

        let mut best = f64::INFINITY;
        let mut leave: Option<usize> = None;
        for k in 0..self.m {
            let a = alpha[k];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[k];
            let rate = -dir * a;
            let lim = if rate < 0.0 && self.lo[b].is_finite() {
                (self.x[b] - self.lo[b]) / -rate
            } else if rate > 0.0 && self.hi[b].is_finite() {
                (self.hi[b] - self.x[b]) / rate
            } else {
                continue;
            };
            let lim = lim.max(0.0);
            let tie = (lim - best).abs() <= 1e-12 * (1.0 + best.abs());
            match leave {
                None => {
                    best = lim;
                    leave = Some(k);
                }
                Some(cur) => {
                    if tie {
                        if b < self.basis[cur] {
                            leave = Some(k);
                            best = best.min(lim);
                        }
                    } else if lim < best {
                        best = lim;
                        leave = Some(k);
                    }
                }
            }
        }

        let flip = self.hi[q] - self.lo[q];
        if flip.is_finite() && flip <= best {
            for k in 0..self.m {
                let b = self.basis[k];
                self.x[b] -= dir * alpha[k] * flip;
            }
            self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
            self.iterations += 1;
            return Ok(StepOutcome::Continue);
        }
        let Some(r) = leave else {
            return Ok(StepOutcome::Unbounded {
                entering: q,
                dir,
                alpha,
            });
        };

        let theta = best;
        for k in 0..self.m {
            let b = self.basis[k];
            self.x[b] -= dir * alpha[k] * theta;
        }
        self.x[q] += dir * theta;
        let out = self.basis[r];
        let rate_out = -dir * alpha[r];
        self.x[out] = if rate_out < 0.0 { self.lo[out] } else { self.hi[out] };
        self.basis[r] = q;
        self.position[out] = None;
        self.position[q] = Some(r);

        let m = self.m;
        let piv = alpha[r];
        for c in 0..m {
            self.binv[r * m + c] /= piv;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for c in 0..m {
                    self.binv[i * m + c] -= f * self.binv[r * m + c];
                }
            }
        }
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(StepOutcome::Continue)
    }

    fn iterate(&mut self, phase: Phase) -> Result<StepOutcome> {
        loop {
            if self.iterations >= self.tol.max_iterations {
                return Err(Error::NumericalFailure(format!(
                    "iteration limit {} reached",
                    self.tol.max_iterations
                )));
            }
            match self.step()? {
                StepOutcome::Continue => {}
                StepOutcome::Unbounded { .. } if phase == Phase::One => {
                    return Err(Error::NumericalFailure("phase 1 reported unboundedness".into()));
                }
                done => return Ok(done),
            }
        }
    }

    fn reduced_costs(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| self.data.lp.objective[j] - self.dot(y, j)).collect()
    }

    pub(crate) fn run(mut self) -> Result<LpSolution> {
        let art0 = self.n + self.n_slack;
        let total = self.total();
        for j in art0..total {
            self.cost[j] = 1.0;
        }
        self.iterate(Phase::One)?;
        self.refactor()?;
        let infeasibility: f64 = (art0..total).map(|j| self.x[j].max(0.0)).sum();
        if infeasibility > self.tol.feas {
            let y = self.duals();
            let ray = y.clone();
            let (margin, _) = super::farkas_check(self.data.lp, &ray)?;
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: self.x[..self.n].to_vec(),
                reduced_costs: (0..self.n).map(|j| -self.dot(&y, j)).collect(),
                dual: y,
                certificate: Some(Certificate::Farkas { ray, margin }),
                objective_value: f64::NAN,
                iterations: self.iterations,
            });
        }

        // phase 2: artificials are pinned to zero
        for j in art0..total {
            self.cost[j] = 0.0;
            self.hi[j] = 0.0;
            if self.position[j].is_none() {
                self.x[j] = 0.0;
            }
        }
        for j in 0..self.n {
            self.cost[j] = self.data.lp.objective[j];
        }
        let outcome = self.iterate(Phase::Two)?;
        self.refactor()?;
        let y = self.duals();
        let primal = self.x[..self.n].to_vec();
        let objective_value = primal
            .iter()
            .zip(&self.data.lp.objective)
            .map(|(x, c)| x * c)
            .sum();
        let reduced_costs = self.reduced_costs(&y);
        match outcome {
            StepOutcome::Unbounded { entering, dir, alpha } => {
                let mut direction = vec![0.0; self.n];
                if entering < self.n {
                    direction[entering] = dir;
                }
                for k in 0..self.m {
                    let b = self.basis[k];
                    if b < self.n {
                        direction[b] = -dir * alpha[k];
                    }
                }
                Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    primal,
                    dual: y,
                    reduced_costs,
                    certificate: Some(Certificate::PrimalRay { direction }),
                    objective_value: f64::NEG_INFINITY,
                    iterations: self.iterations,
                })
            }
            _ => Ok(LpSolution {
                status: LpStatus::Optimal,
                primal,
                dual: y,
                reduced_costs,
                certificate: None,
                objective_value,
                iterations: self.iterations,
            }),
        }
    }
}
