//! Report rows, CSV emission and the plain-text summary.

use std::fmt::Write as _;

use twistlab_core::twists::CheckOutcome;
use twistlab_core::Cx;

pub const CSV_HEADER: &str = "check,fname,q_or_p,s_re,s_im,n_terms,residual,tail_radius,pass";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub check: String,
    pub fname: String,
    pub q_or_p: u64,
    pub s: (f64, f64),
    pub n_terms: u64,
    pub residual: f64,
    pub tail_radius: f64,
    pub pass: bool,
}

impl Row {
    pub fn new(check: &str, fname: &str, q_or_p: u64, s: &Cx) -> Row {
        Row {
            check: check.to_string(),
            fname: fname.to_string(),
            q_or_p,
            s: s.to_f64(),
            n_terms: 0,
            residual: 0.0,
            tail_radius: 0.0,
            pass: false,
        }
    }

    pub fn from_outcome(o: &CheckOutcome, residual_tol: f64, tail_tol: f64) -> Row {
        Row {
            check: o.check.to_string(),
            fname: o.fname.clone(),
            q_or_p: o.q_or_p,
            s: o.s.to_f64(),
            n_terms: o.n_terms,
            residual: o.residual,
            tail_radius: o.tail_radius,
            pass: o.passes(residual_tol, tail_tol),
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6e},{:.6e},{}",
            self.check,
            self.fname,
            self.q_or_p,
            self.s.0,
            self.s.1,
            self.n_terms,
            self.residual,
            self.tail_radius,
            self.pass
        )
    }
}

pub fn header(what: &str, prec: u32) -> String {
    format!("# twistlab {what} precision_bits={prec}")
}

pub fn csv(rows: &[Row], prec: u32) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header("report", prec));
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv());
    }
    out
}

/// Per-check tallies in first-appearance order, followed by free-form notes.
pub fn summary(rows: &[Row], notes: &[String], prec: u32) -> String {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.check.as_str()) {
            order.push(&r.check);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "{}", header("campaign summary", prec));
    for check in order {
        let group: Vec<&Row> = rows.iter().filter(|r| r.check == check).collect();
        let passed = group.iter().filter(|r| r.pass).count();
        let res = group.iter().map(|r| r.residual).fold(0.0, f64::max);
        let tail = group.iter().map(|r| r.tail_radius).fold(0.0, f64::max);
        let _ = writeln!(
            out,
            "{} {check}: {passed}/{} rows pass, max residual {res:.3e}, max tail {tail:.3e}",
            if passed == group.len() { "PASS" } else { "FAIL" },
            group.len()
        );
        for r in group.iter().filter(|r| !r.pass) {
            let _ = writeln!(out, "  failed: {}", r.csv());
        }
    }
    for n in notes {
        let _ = writeln!(out, "note: {n}");
    }
    let ok = rows.iter().all(|r| r.pass);
    let _ = writeln!(out, "overall: {} ({} rows)", if ok { "PASS" } else { "FAIL" }, rows.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_format() {
        let mut r = Row::new("gk", "zeta2", 3, &Cx::from_f64(64, 2.0, -1.5));
        r.n_terms = 10;
        r.residual = 1.25e-30;
        r.pass = true;
        assert_eq!(r.csv(), "gk,zeta2,3,2,-1.5,10,1.250000e-30,0.000000e0,true");
        let text = summary(&[r.clone()], &[], 128);
        assert!(text.starts_with("# twistlab campaign summary precision_bits=128\nPASS gk: 1/1"));
        assert!(text.ends_with("overall: PASS (1 rows)\n"));
        assert_eq!(csv(&[], 256), format!("# twistlab report precision_bits=256\n{CSV_HEADER}\n"));
    }
}
