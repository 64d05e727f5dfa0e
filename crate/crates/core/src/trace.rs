//! Per-iteration run records and their CSV export.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// The optimality violation dropped below the tolerance.
    Optimal,
    /// The iteration cap was reached first.
    MaxIter,
    /// The objective reached the requested target value.
    TargetReached,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIter => "max_iter",
            Status::TargetReached => "target_reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub f: f64,
    pub status: Status,
    /// Number of completed outer iterations.
    pub iterations: usize,
    pub kkt_violation: f64,
}

/// Snapshot of iterate `x^k` taken at the start of outer iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub f: f64,
    pub elapsed_s: f64,
    pub n_nonactive: usize,
    pub n_active: usize,
    pub kkt_violation: f64,
    pub epsilon: Option<f64>,
    pub enhanced: bool,
    /// `‖x^k − x_true‖ / ‖x_true‖` when the instance carries a ground truth.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
}

pub const TRACE_CSV_HEADER: &str = "iter,f,elapsed_s,n_nonactive,kkt_violation,epsilon,enhanced";

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: IterationRecord) {
        self.records.push(record);
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }

    /// True when `f` never rises by more than `rel_tol·(1 + |f|)`.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].f <= w[0].f + rel_tol * (1.0 + w[0].f.abs()))
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.6e},{},{:.6e},{},{}",
                r.iter,
                r.f,
                r.elapsed_s,
                r.n_nonactive,
                r.kkt_violation,
                r.epsilon.map(|e| format!("{e:e}")).unwrap_or_default(),
                u8::from(r.enhanced),
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(iter: usize, f: f64) -> IterationRecord {
        IterationRecord {
            iter,
            f,
            elapsed_s: 0.0,
            n_nonactive: 3,
            n_active: 5,
            kkt_violation: 0.1,
            epsilon: Some(1e-4),
            enhanced: false,
            rel_error: None,
        }
    }

    #[test]
    fn csv_has_header_and_seventeen_digits() {
        let trace = RunTrace {
            records: vec![rec(0, 1.0 / 3.0)],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_CSV_HEADER);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[1], "3.3333333333333331e-1");
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn monotonicity_check() {
        let t = RunTrace {
            records: vec![rec(0, 2.0), rec(1, 1.0), rec(2, 1.0)],
        };
        assert!(t.is_monotone(1e-12));
        let t = RunTrace {
            records: vec![rec(0, 1.0), rec(1, 1.1)],
        };
        assert!(!t.is_monotone(1e-12));
    }
}
