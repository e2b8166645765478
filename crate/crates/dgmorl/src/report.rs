//! Aggregation of finished runs into CSV and text tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dgmorl_core::curriculum::{MetricsLog, MetricsParseError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no metrics.log found under the given paths")]
    MissingRuns,
    #[error("{run} evaluates at steps {found:?}, expected {expected:?}")]
    StepMisalignment { run: String, expected: Vec<u64>, found: Vec<u64> },
    #[error("{path}: {source}")]
    Metrics { path: String, source: MetricsParseError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub label: String,
    pub steps: Vec<u64>,
    pub eu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub step: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.display().to_string(), source }
}

/// Run directories: each path is either a run directory holding
/// `metrics.log` or a parent whose immediate children are.
pub fn find_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, ReportError> {
    let mut runs = Vec::new();
    for p in paths {
        if p.join("metrics.log").is_file() {
            runs.push(p.clone());
            continue;
        }
        if p.is_dir() {
            let mut children: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(io(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|c| c.join("metrics.log").is_file())
                .collect();
            children.sort();
            runs.extend(children);
        }
    }
    if runs.is_empty() {
        return Err(ReportError::MissingRuns);
    }
    Ok(runs)
}

pub fn load_trace(dir: &Path) -> Result<RunTrace, ReportError> {
    let path = dir.join("metrics.log");
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    let log = MetricsLog::parse(&text).map_err(|source| ReportError::Metrics { path: path.display().to_string(), source })?;
    let label = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(RunTrace {
        label,
        steps: log.records.iter().map(|r| r.global_step).collect(),
        eu: log.records.iter().map(|r| r.eu).collect(),
    })
}

/// Mean, min and max EU across runs at each evaluation step.
pub fn aggregate(runs: &[RunTrace]) -> Result<Vec<SummaryRow>, ReportError> {
    let first = runs.first().ok_or(ReportError::MissingRuns)?;
    for r in runs {
        if r.steps != first.steps {
            return Err(ReportError::StepMisalignment { run: r.label.clone(), expected: first.steps.clone(), found: r.steps.clone() });
        }
    }
    Ok(first
        .steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let xs: Vec<f64> = runs.iter().map(|r| r.eu[i]).collect();
            SummaryRow {
                step,
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n: xs.len(),
            }
        })
        .collect())
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "mean", "min", "max", "n"])?;
    for r in rows {
        w.write_record([r.step.to_string(), r.mean.to_string(), r.min.to_string(), r.max.to_string(), r.n.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("utf8"))
}

pub fn tidy_csv(runs: &[RunTrace]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "step", "eu"])?;
    for r in runs {
        for (s, eu) in r.steps.iter().zip(&r.eu) {
            w.write_record([r.label.clone(), s.to_string(), eu.to_string()])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("utf8"))
}

/// Fixed-width table of mean EU with the distance to the max and min.
pub fn table_text(rows: &[SummaryRow]) -> String {
    let mut out = format!("{:>10}  {:>12}  {:>10}  {:>10}  {:>3}\n", "step", "eu", "+max", "-min", "n");
    for r in rows {
        let _ = writeln!(out, "{:>10}  {:>12.4}  {:>10.4}  {:>10.4}  {:>3}", r.step, r.mean, r.max - r.mean, r.mean - r.min, r.n);
    }
    out
}

/// Writes `eu_summary.csv`, `eu_tidy.csv` and `eu_table.txt` into `out_dir`.
pub fn cmd_report(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<SummaryRow>, ReportError> {
    let runs: Vec<RunTrace> = find_runs(paths)?.iter().map(|d| load_trace(d)).collect::<Result<_, _>>()?;
    let rows = aggregate(&runs)?;
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let files = [
        ("eu_summary.csv", summary_csv(&rows)?),
        ("eu_tidy.csv", tidy_csv(&runs)?),
        ("eu_table.txt", table_text(&rows)),
    ];
    for (name, text) in files {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(io(&p))?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(label: &str, steps: &[u64], eu: &[f64]) -> RunTrace {
        RunTrace { label: label.into(), steps: steps.to_vec(), eu: eu.to_vec() }
    }

    #[test]
    fn single_run_mean_is_min_and_max() {
        let rows = aggregate(&[trace("a", &[4, 8], &[1.0, 2.5])]).unwrap();
        assert_eq!(rows[1], SummaryRow { step: 8, mean: 2.5, min: 2.5, max: 2.5, n: 1 });
    }

    #[test]
    fn bounds_hold() {
        let runs = [trace("a", &[4, 8], &[1.0, 3.0]), trace("b", &[4, 8], &[2.0, -1.0]), trace("c", &[4, 8], &[0.5, 0.5])];
        for r in aggregate(&runs).unwrap() {
            assert!(r.min <= r.mean && r.mean <= r.max);
            assert_eq!(r.n, 3);
        }
    }

    #[test]
    fn mismatched_steps() {
        let runs = [trace("a", &[4, 8], &[1.0, 1.0]), trace("b", &[5, 10], &[1.0, 1.0])];
        assert!(matches!(aggregate(&runs), Err(ReportError::StepMisalignment { .. })));
        assert!(matches!(aggregate(&[]), Err(ReportError::MissingRuns)));
    }

    #[test]
    fn csv_layout() {
        let rows = aggregate(&[trace("a", &[4], &[1.5])]).unwrap();
        assert_eq!(summary_csv(&rows).unwrap(), "step,mean,min,max,n\n4,1.5,1.5,1.5,1\n");
        assert_eq!(tidy_csv(&[trace("a", &[4], &[1.5])]).unwrap(), "run,step,eu\na,4,1.5\n");
        assert!(table_text(&rows).lines().nth(1).unwrap().contains("1.5000"));
    }

    #[test]
    fn missing_runs() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(find_runs(&[tmp.path().to_path_buf()]), Err(ReportError::MissingRuns)));
    }

    proptest! {
        #[test]
        fn rows_are_conservative(eus in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..6)) {
            let runs: Vec<RunTrace> = eus.iter().enumerate().map(|(i, e)| trace(&i.to_string(), &[1, 2, 3], e)).collect();
            for r in aggregate(&runs).unwrap() {
                prop_assert!(r.min <= r.mean + 1e-12 && r.mean <= r.max + 1e-12);
                prop_assert_eq!(r.n, runs.len());
            }
        }
    }
}
