//! Plain-text dump of a program, one constraint per line, for diffing or
//! feeding to another solver by hand.

use std::fmt::{self, Write};

use super::{LinearProgram, RowKind, VarId};

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if first {
        let _ = write!(out, "{coef} {name}");
    } else if coef.is_sign_negative() {
        let _ = write!(out, " - {} {name}", -coef);
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut obj = String::new();
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut obj, first, c, &self.name(VarId(j)));
                first = false;
            }
        }
        if first {
            obj.push('0');
        }
        writeln!(f, "minimize")?;
        writeln!(f, "  obj: {obj}")?;
        writeln!(f, "subject to")?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut line = String::new();
            let mut first = true;
            for &(v, c) in &row.coeffs {
                term(&mut line, first, c, &self.name(v));
                first = false;
            }
            if first {
                line.push('0');
            }
            let op = match row.kind {
                RowKind::Le => "<=",
                RowKind::Eq => "=",
            };
            writeln!(f, "  r{i}: {line} {op} {}", row.rhs)?;
        }
        writeln!(f, "bounds")?;
        for j in 0..self.num_vars() {
            writeln!(f, "  {} <= {} <= {}", bound(self.lower[j]), self.name(VarId(j)), bound(self.upper[j]))?;
        }
        writeln!(f, "end")
    }
}

#[cfg(test)]
mod tests {
    use super::super::LinearProgram;

    #[test]
    fn dump_lists_every_row() {
        let mut lp = LinearProgram::new();
        let a = lp.add_nonneg(0.8);
        let b = lp.add_var(0.2, 0.0, 30.0);
        lp.set_name(a, "a");
        lp.add_eq(vec![(a, 1.0), (b, 1.0)], 100.0);
        lp.add_ge(vec![(b, 1.0)], 1.0);
        let text = lp.to_string();
        assert!(text.contains("obj: 0.8 a + 0.2 x1"));
        assert!(text.contains("r0: 1 a + 1 x1 = 100"));
        assert!(text.contains("r1: -1 x1 <= -1"));
        assert!(text.contains("0 <= x1 <= 30"));
        assert!(text.contains("0 <= a <= inf"));
    }
}
