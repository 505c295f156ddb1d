use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "method,M,N,trial,nmse,wall_time_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Lr,
    Lrg,
    NrLrg,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lr, Method::Lrg, Method::NrLrg];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lr => "LR",
            Method::Lrg => "LRG",
            Method::NrLrg => "NR-LRG",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What test-time NMSE is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    /// Noise-free synthetic targets.
    Clean,
    /// Recorded held-out targets (may carry measurement noise).
    Observed,
}

impl Truth {
    pub fn as_str(self) -> &'static str {
        match self {
            Truth::Clean => "clean",
            Truth::Observed => "observed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub nodes: usize,
    pub samples: usize,
    pub trial: usize,
    pub nmse: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub truth: Truth,
}

/// Mean NMSE over trials for one `(method, M, N)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub nodes: usize,
    pub samples: usize,
    pub mean_nmse: f64,
    pub trials: usize,
}

impl ExperimentReport {
    pub fn new(truth: Truth) -> Self {
        Self {
            rows: Vec::new(),
            truth,
        }
    }

    /// Sorts rows by trial, N, M, then method.
    pub fn normalize(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.trial, a.samples, a.nodes, a.method).cmp(&(b.trial, b.samples, b.nodes, b.method))
        });
    }

    pub fn aggregate(&self) -> Vec<Aggregate> {
        let mut groups: BTreeMap<(Method, usize, usize), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = groups.entry((r.method, r.nodes, r.samples)).or_insert((0.0, 0));
            e.0 += r.nmse;
            e.1 += 1;
        }
        groups
            .into_iter()
            .map(|((method, nodes, samples), (sum, count))| Aggregate {
                method,
                nodes,
                samples,
                mean_nmse: sum / count as f64,
                trials: count,
            })
            .collect()
    }

    /// Mean NMSE for one cell, if present.
    pub fn mean(&self, method: Method, nodes: usize, samples: usize) -> Option<f64> {
        self.aggregate()
            .into_iter()
            .find(|a| a.method == method && a.nodes == nodes && a.samples == samples)
            .map(|a| a.mean_nmse)
    }
}

/// `report.csv` -> `report.agg.dat`
pub fn aggregate_path(report_path: &Path) -> PathBuf {
    report_path.with_extension("agg.dat")
}

/// Writes the per-row CSV and the gnuplot-ready aggregate next to it.
pub fn emit_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_file(path, |out| {
        writeln!(out, "{REPORT_HEADER}")?;
        for r in &report.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.method, r.nodes, r.samples, r.trial, r.nmse, r.wall_time_s
            )?;
        }
        Ok(())
    })?;

    let agg_path = aggregate_path(path);
    let aggregates = report.aggregate();
    write_file(&agg_path, |out| {
        writeln!(out, "# truth: {}", report.truth.as_str())?;
        writeln!(out, "# method M N mean_nmse trials")?;
        // One gnuplot data block per method, separated by two blank lines.
        let mut first = true;
        for method in Method::ALL {
            let block: Vec<_> = aggregates.iter().filter(|a| a.method == method).collect();
            if block.is_empty() {
                continue;
            }
            if !first {
                writeln!(out, "\n")?;
            }
            first = false;
            for a in block {
                writeln!(
                    out,
                    "{} {} {} {} {}",
                    a.method, a.nodes, a.samples, a.mean_nmse, a.trials
                )?;
            }
        }
        Ok(())
    })
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, nodes: usize, trial: usize, nmse: f64) -> ReportRow {
        ReportRow {
            method,
            nodes,
            samples: 8,
            trial,
            nmse,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_report(&ExperimentReport::new(Truth::Clean), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn three_rows_four_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/r.csv");
        let mut report = ExperimentReport::new(Truth::Observed);
        report.rows = vec![
            row(Method::Lr, 5, 0, 0.5),
            row(Method::Lrg, 5, 0, 0.25),
            row(Method::NrLrg, 5, 0, 0.25),
        ];
        emit_report(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap(), "LR,5,8,0,0.5,0");
        let agg = std::fs::read_to_string(aggregate_path(&path)).unwrap();
        assert!(agg.starts_with("# truth: observed\n"));
        assert!(agg.contains("NR-LRG 5 8 0.25 1"));
    }

    #[test]
    fn aggregation_averages_trials() {
        let mut report = ExperimentReport::new(Truth::Clean);
        report.rows = vec![row(Method::Lrg, 6, 0, 0.2), row(Method::Lrg, 6, 1, 0.4)];
        let agg = report.aggregate();
        assert_eq!(agg.len(), 1);
        assert!((agg[0].mean_nmse - 0.3).abs() < 1e-15);
        assert_eq!(agg[0].trials, 2);
    }

    #[test]
    fn normalize_orders_rows() {
        let mut report = ExperimentReport::new(Truth::Clean);
        report.rows = vec![
            row(Method::NrLrg, 6, 1, 0.1),
            row(Method::Lr, 6, 0, 0.1),
            row(Method::Lrg, 5, 0, 0.1),
        ];
        report.normalize();
        let keys: Vec<_> = report.rows.iter().map(|r| (r.trial, r.nodes, r.method)).collect();
        assert_eq!(keys, vec![(0, 5, Method::Lrg), (0, 6, Method::Lr), (1, 6, Method::NrLrg)]);
    }
}
