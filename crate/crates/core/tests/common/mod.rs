//! Exhaustive vertex-enumeration oracles, independent of the simplex code.

#![allow(dead_code)]

use std::collections::HashMap;

use modelfree::market::{evaluate, InstrumentSet, PathGridModel, Side};
use modelfree::marginals::Marginal;
use nalgebra::{DMatrix, DVector};

const ZERO: f64 = 1e-11;

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// A general linear constraint `a·x (= | ≤) b`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub equality: bool,
}

/// Vertices of `{x : rows, lo ≤ x ≤ hi}` for a handful of variables, by
/// solving every `n × n` active set.
pub fn small_vertices(n: usize, rows: &[Row], lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let mut all: Vec<Row> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lo[j].is_finite() {
            all.push(Row { coeffs: e.iter().map(|v| -v).collect(), rhs: -lo[j], equality: false });
        }
        if hi[j].is_finite() {
            all.push(Row { coeffs: e, rhs: hi[j], equality: false });
        }
    }
    let feasible = |x: &[f64]| {
        all.iter().all(|r| {
            let v: f64 = r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let scale = 1.0 + r.rhs.abs();
            if r.equality {
                (v - r.rhs).abs() <= 1e-9 * scale
            } else {
                v <= r.rhs + 1e-9 * scale
            }
        })
    };
    let mut out = Vec::new();
    for set in combinations(all.len(), n) {
        let a = DMatrix::from_fn(n, n, |i, j| all[set[i]].coeffs[j]);
        let b = DVector::from_fn(n, |i, _| all[set[i]].rhs);
        let lu = a.clone().lu();
        if lu.determinant().abs() < 1e-10 {
            continue;
        }
        if let Some(x) = lu.solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if feasible(&x) {
                out.push(x);
            }
        }
    }
    out
}

/// Standard-form polytope `{z ≥ 0 : M z = b}` and the number of leading
/// columns that are path weights.
pub struct Polytope {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub paths: usize,
}

/// Rows encoding admissible martingale measures, built directly from the
/// path list (prefixes grouped by coordinates).
pub fn martingale_polytope(model: &PathGridModel, instruments: &InstrumentSet, marginals: &[Marginal]) -> Polytope {
    let paths: Vec<Vec<f64>> = model.enumerate_paths().unwrap().map(|p| p.coordinates).collect();
    let n = paths.len();
    let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut le: Vec<(Vec<f64>, f64)> = Vec::new();
    eq.push((vec![1.0; n], 1.0));
    for t in 0..model.horizon() {
        let mut groups: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
        let mut order: Vec<Vec<u64>> = Vec::new();
        for (p, path) in paths.iter().enumerate() {
            let key: Vec<u64> = path[..t].iter().map(|x| x.to_bits()).collect();
            let prev = if t == 0 { model.s0() } else { path[t - 1] };
            let row = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key.clone());
                vec![0.0; n]
            });
            row[p] = path[t] - prev;
        }
        for key in order {
            eq.push((groups.remove(&key).unwrap(), 0.0));
        }
    }
    for inst in &instruments.instruments {
        let row: Vec<f64> = paths
            .iter()
            .map(|c| evaluate(&inst.payoff, &modelfree::market::Path::new(c.clone()), model).unwrap() - inst.price)
            .collect();
        match inst.side {
            Side::BuyOnly => le.push((row, 0.0)),
            Side::TwoSided => eq.push((row, 0.0)),
        }
    }
    for nu in marginals {
        for (j, &level) in model.levels().iter().enumerate() {
            let row = paths.iter().map(|c| if c[nu.date - 1] == level { 1.0 } else { 0.0 }).collect();
            eq.push((row, nu.masses[j]));
        }
    }
    let cols = n + le.len();
    let rows = eq.len() + le.len();
    let mut m = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for (i, (row, rhs)) in eq.iter().enumerate() {
        for j in 0..n {
            m[(i, j)] = row[j];
        }
        b[i] = *rhs;
    }
    for (k, (row, rhs)) in le.iter().enumerate() {
        let i = eq.len() + k;
        for j in 0..n {
            m[(i, j)] = row[j];
        }
        m[(i, n + k)] = 1.0;
        b[i] = *rhs;
    }
    Polytope { m, b, paths: n }
}

impl Polytope {
    /// Basic feasible solutions, restricted to the path coordinates.
    /// Empty iff the polytope is empty.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let (rows, cols) = self.m.shape();
        // keep a maximal independent set of rows, detect inconsistency
        let mut kept: Vec<usize> = Vec::new();
        for i in 0..rows {
            let mut trial = kept.clone();
            trial.push(i);
            let a = self.m.select_rows(&trial);
            let mut aug = DMatrix::zeros(trial.len(), cols + 1);
            aug.view_mut((0, 0), (trial.len(), cols)).copy_from(&a);
            for (r, &ri) in trial.iter().enumerate() {
                aug[(r, cols)] = self.b[ri];
            }
            let ra = a.rank(1e-9);
            let raug = aug.rank(1e-9);
            if raug > ra {
                return Vec::new();
            }
            if ra == trial.len() {
                kept = trial;
            }
        }
        let a = self.m.select_rows(&kept);
        let b = DVector::from_iterator(kept.len(), kept.iter().map(|&i| self.b[i]));
        let r = kept.len();
        let mut out = Vec::new();
        for basis in combinations(cols, r) {
            let bm = a.select_columns(&basis);
            let lu = bm.lu();
            if lu.determinant().abs() < 1e-10 {
                continue;
            }
            let Some(xb) = lu.solve(&b) else { continue };
            if xb.iter().any(|v| *v < -ZERO) {
                continue;
            }
            let mut z = vec![0.0; cols];
            for (k, &j) in basis.iter().enumerate() {
                z[j] = xb[k].max(0.0);
            }
            // guard against ill-conditioned bases
            let resid = (&a * DVector::from_vec(z.clone()) - &b).amax();
            if resid > 1e-9 {
                continue;
            }
            z.truncate(self.paths);
            out.push(z);
        }
        out
    }
}

/// `(min, max)` of `Σ π_p values_p` over the admissible martingale
/// measures, or `None` if there are none.
pub fn oracle_bounds(
    model: &PathGridModel,
    instruments: &InstrumentSet,
    marginals: &[Marginal],
    values: &[f64],
) -> Option<(f64, f64)> {
    let verts = martingale_polytope(model, instruments, marginals).vertices();
    if verts.is_empty() {
        return None;
    }
    let objective = |v: &Vec<f64>| v.iter().zip(values).map(|(a, b)| a * b).sum::<f64>();
    let lo = verts.iter().map(objective).fold(f64::INFINITY, f64::min);
    let hi = verts.iter().map(objective).fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}
