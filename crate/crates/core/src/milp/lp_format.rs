//! CPLEX-LP text export, for cross-checking models against external solvers.

use std::io::{self, Write};

use crate::scalar::Scalar;

use super::{LinearProgram, Relation};

/// Writes `lp` in CPLEX-LP format.
///
/// Variable names are used verbatim, so model builders must emit names that
/// are valid in that format (alphanumerics, `_`, `(`, `)` are all fine).
pub fn write_lp_format<S: Scalar, W: Write>(lp: &LinearProgram<S>, out: &mut W) -> io::Result<()> {
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    let mut first = true;
    for (var, &c) in lp.variables.iter().zip(&lp.objective) {
        if c == S::zero() {
            continue;
        }
        write_term(out, c, &var.name, first)?;
        first = false;
    }
    if first {
        write!(out, " 0 {}", lp.variables.first().map(|v| v.name.as_str()).unwrap_or("x"))?;
    }
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    for con in &lp.constraints {
        write!(out, " {}:", con.name)?;
        let mut first = true;
        for &(j, a) in &con.terms {
            if a == S::zero() {
                continue;
            }
            write_term(out, a, &lp.variables[j].name, first)?;
            first = false;
        }
        if first {
            write!(out, " 0 {}", lp.variables[0].name)?;
        }
        let rel = match con.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        writeln!(out, " {} {}", rel, fmt(con.rhs))?;
    }

    writeln!(out, "Bounds")?;
    for var in &lp.variables {
        if var.upper.is_finite() {
            writeln!(out, " {} <= {} <= {}", fmt(var.lower), var.name, fmt(var.upper))?;
        } else {
            writeln!(out, " {} <= {}", fmt(var.lower), var.name)?;
        }
    }

    let integers: Vec<&str> = lp
        .variables
        .iter()
        .filter(|v| v.integer)
        .map(|v| v.name.as_str())
        .collect();
    if !integers.is_empty() {
        writeln!(out, "General")?;
        for name in integers {
            writeln!(out, " {name}")?;
        }
    }
    writeln!(out, "End")
}

fn write_term<S: Scalar, W: Write>(out: &mut W, coeff: S, name: &str, first: bool) -> io::Result<()> {
    let sign = if coeff < S::zero() { "- " } else if first { "" } else { "+ " };
    let mag = coeff.abs();
    if mag == S::one() {
        write!(out, " {sign}{name}")
    } else {
        write!(out, " {sign}{} {name}", fmt(mag))
    }
}

fn fmt<S: Scalar>(value: S) -> String {
    let v = value.as_f64();
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_small_model() {
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, 10.0, true, 3.0);
        lp.add_variable("y", 0.0, f64::INFINITY, false, -1.5);
        lp.add_constraint("cover", vec![(0, 2.0), (1, -1.0)], Relation::Ge, 4.0);
        let mut buf = Vec::new();
        write_lp_format(&lp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains(" cover: 2 x - y >= 4"));
        assert!(text.contains("General"));
        assert!(text.contains(" 0 <= x <= 10"));
    }
}
