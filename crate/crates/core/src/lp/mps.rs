//! Fixed-column MPS export for cross-checking programs in external solvers.
//!
//! Row and column names are replaced by generated 8-character identifiers
//! (`R0000001`, `C0000001`) so every field fits its fixed column; the original
//! names are listed in leading `*` comment lines. A non-zero objective offset is
//! written as the negated RHS of the objective row, the usual MPS convention.

use super::{LinearProgram, Relation};
use std::fmt::Write as _;
use std::io::{self, Write};

const OBJ_ROW: &str = "COST";

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

/// Formats `v` in at most 12 characters.
fn num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        return s;
    }
    for p in (0..=7).rev() {
        let s = format!("{v:.p$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:e}")
}

/// Data line with fixed column positions 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
fn line(out: &mut String, code: &str, name: &str, pairs: &[(&str, String)]) {
    let mut l = format!(" {code:<2} {name:<8}");
    for (k, (rname, val)) in pairs.iter().enumerate() {
        let gap = if k == 0 { "  " } else { "   " };
        let _ = write!(l, "{gap}{rname:<8}  {val:>12}");
    }
    out.push_str(l.trim_end());
    out.push('\n');
}

pub fn write_mps<W: Write>(lp: &LinearProgram, name: &str, mut out: W) -> io::Result<()> {
    let mut s = String::new();
    s.push_str("* fixed-column MPS export\n");
    for (j, v) in lp.variables().iter().enumerate() {
        let _ = writeln!(s, "* {} {}", col_name(j), v.name);
    }
    for (i, c) in lp.constraints().iter().enumerate() {
        let _ = writeln!(s, "* {} {}", row_name(i), c.name);
    }
    let _ = writeln!(s, "NAME          {name}");
    s.push_str("ROWS\n");
    line(&mut s, "N", OBJ_ROW, &[]);
    for (i, c) in lp.constraints().iter().enumerate() {
        let code = match c.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        line(&mut s, code, &row_name(i), &[]);
    }

    // column-major entries, objective first
    let n = lp.num_variables();
    let mut entries: Vec<Vec<(String, f64)>> = vec![Vec::new(); n];
    let mut obj = vec![0.0; n];
    for &(v, c) in &lp.objective().terms {
        obj[v.0] += c;
    }
    for (j, &c) in obj.iter().enumerate() {
        if c != 0.0 {
            entries[j].push((OBJ_ROW.to_string(), c));
        }
    }
    for (i, c) in lp.constraints().iter().enumerate() {
        for &(v, a) in &c.terms {
            match entries[v.0].last_mut() {
                Some((r, val)) if *r == row_name(i) => *val += a,
                _ => entries[v.0].push((row_name(i), a)),
            }
        }
    }
    s.push_str("COLUMNS\n");
    for (j, col) in entries.iter().enumerate() {
        let cname = col_name(j);
        if col.is_empty() {
            // keep the column declared so bounds refer to a known name
            line(&mut s, "", &cname, &[(OBJ_ROW, num(0.0))]);
        }
        for chunk in col.chunks(2) {
            let pairs: Vec<(&str, String)> =
                chunk.iter().map(|(r, v)| (r.as_str(), num(*v))).collect();
            line(&mut s, "", &cname, &pairs);
        }
    }

    s.push_str("RHS\n");
    let offset = lp.objective().offset;
    if offset != 0.0 {
        line(&mut s, "", "RHS", &[(OBJ_ROW, num(-offset))]);
    }
    for (i, c) in lp.constraints().iter().enumerate() {
        if c.rhs != 0.0 {
            line(&mut s, "", "RHS", &[(&row_name(i), num(c.rhs))]);
        }
    }

    s.push_str("BOUNDS\n");
    for (j, v) in lp.variables().iter().enumerate() {
        let cname = col_name(j);
        let (l, u) = (v.lower, v.upper);
        let bound = |s: &mut String, code: &str, val: Option<f64>| {
            let mut l = format!(" {code:<2} BND       {cname:<8}");
            if let Some(x) = val {
                let _ = write!(l, "  {:>12}", num(x));
            }
            s.push_str(l.trim_end());
            s.push('\n');
        };
        if l == u {
            bound(&mut s, "FX", Some(l));
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => bound(&mut s, "FR", None),
            (false, true) => {
                bound(&mut s, "MI", None);
                bound(&mut s, "UP", Some(u));
            }
            (true, _) => {
                if l != 0.0 || u < 0.0 {
                    bound(&mut s, "LO", Some(l));
                }
                if u.is_finite() {
                    bound(&mut s, "UP", Some(u));
                }
            }
        }
    }
    s.push_str("ENDATA\n");
    out.write_all(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Constraint, Objective};

    #[test]
    fn fixed_columns_and_sections() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("gen:boiler:t0", 0.0, 4.0).unwrap();
        let y = lp.add_variable("free", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        lp.push_constraint(Constraint::new(
            "balance",
            vec![(x, 1.0), (y, -2.5)],
            Relation::Eq,
            3.0,
        ))
        .unwrap();
        lp.set_objective(Objective {
            terms: vec![(x, 1234.5)],
            offset: 10.0,
        })
        .unwrap();
        let mut buf = Vec::new();
        write_mps(&lp, "TEST", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
        assert_eq!(data[0], "NAME          TEST");
        assert!(data.contains(&" N  COST"));
        assert!(data.contains(&" E  R0000001"));
        let col = data
            .iter()
            .find(|l| l.starts_with("    C0000001") && l.contains("COST"))
            .unwrap();
        // field 3 starts at column 15, field 4 ends at column 36
        assert_eq!(&col[14..22], "COST    ");
        assert!(col.len() <= 61);
        assert_eq!(col[24..36].trim().parse::<f64>().unwrap(), 1234.5);
        let up = format!(" UP BND       C0000001  {:>12}", "4");
        assert!(data.contains(&up.as_str()));
        assert!(data.contains(&" FR BND       C0000002"));
        assert_eq!(*data.last().unwrap(), "ENDATA");
        assert!(text.contains("* C0000001 gen:boiler:t0"));
    }

    #[test]
    fn numbers_fit_twelve_characters() {
        for v in [1.0 / 3.0, -123456789.123456, 1e-300, 6.02e23, -0.000123456789] {
            let s = num(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-5 * v.abs());
        }
    }
}
