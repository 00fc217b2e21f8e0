//! Fixed-format MPS export for cross-checking with external solvers.

use std::fmt::Write;

use super::{LinearProgram, RowSense};

fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (0..=8).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn line(out: &mut String, kind: &str, name1: &str, name2: &str, value: Option<f64>) {
    let mut l = format!(" {kind:<2} {name1:<8}  {name2:<8}");
    if let Some(v) = value {
        let _ = write!(l, "  {:>12}", num(v));
    }
    out.push_str(l.trim_end());
    out.push('\n');
}

/// Renders `lp` in fixed MPS. Rows are named `R<i>`, columns `C<j>`, the
/// objective `COST`.
pub fn to_fixed_mps(lp: &LinearProgram, name: &str) -> String {
    let compiled = match lp.compile() {
        Ok(c) => c,
        Err(e) => return format!("* invalid program: {e}\n"),
    };
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    out.push_str(" N  COST\n");
    for (i, s) in lp.senses().iter().enumerate() {
        let kind = match s {
            RowSense::Eq => "E",
            RowSense::Le => "L",
        };
        let _ = writeln!(out, " {kind}  R{i}");
    }
    out.push_str("COLUMNS\n");
    for j in 0..compiled.n {
        let col = format!("C{j}");
        let c = lp.objective()[j];
        if c != 0.0 {
            line(&mut out, "", &col, "COST", Some(c));
        }
        for (r, v) in compiled.column(j) {
            if v != 0.0 {
                line(&mut out, "", &col, &format!("R{r}"), Some(v));
            }
        }
    }
    out.push_str("RHS\n");
    for (i, &b) in lp.rhs().iter().enumerate() {
        if b != 0.0 {
            line(&mut out, "", "RHS", &format!("R{i}"), Some(b));
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..compiled.n {
        let col = format!("C{j}");
        let (lo, hi) = (lp.lower()[j], lp.upper()[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => line(&mut out, "FR", "BND", &col, None),
            (false, true) => {
                line(&mut out, "MI", "BND", &col, None);
                line(&mut out, "UP", "BND", &col, Some(hi));
            }
            (true, _) if lo == hi => line(&mut out, "FX", "BND", &col, Some(lo)),
            (true, hi_finite) => {
                if lo != 0.0 {
                    line(&mut out, "LO", "BND", &col, Some(lo));
                }
                if hi_finite {
                    line(&mut out, "UP", "BND", &col, Some(hi));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_sections_in_order() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, -1.0);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_eq(&[(0, 1.0), (1, 1.0)], 1.0);
        lp.add_le(&[(1, 2.5)], 3.0);
        let mps = to_fixed_mps(&lp, "TEST");
        let expected = "NAME          TEST
ROWS
 N  COST
 E  R0
 L  R1
COLUMNS
    C0        COST                -1
    C0        R0                   1
    C1        R0                   1
    C1        R1                 2.5
RHS
    RHS       R0                   1
    RHS       R1                   3
BOUNDS
 FR BND       C1
ENDATA
";
        assert_eq!(mps, expected);
        for l in mps.lines().filter(|l| l.starts_with("    C")) {
            // value field ends at column 36
            assert_eq!(l.len(), 36);
        }
    }

    #[test]
    fn long_numbers_fit_the_field() {
        assert!(num(1.0 / 3.0).len() <= 12);
        assert!(num(-1.234_567_891e-10).len() <= 12);
    }
}
