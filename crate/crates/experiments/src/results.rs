//! Result tables. Everything here is deterministic for a fixed master seed;
//! wall-clock measurements go to separate timing tables.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// One method's score in a recovery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    pub n_demos: usize,
    pub trajectory_length: usize,
    pub epsilon_rep: f64,
    pub evd: f64,
    /// False when MCEM hit its iteration budget; always true for single-shot methods.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub seed: u64,
    pub wall_seconds: f64,
}

/// One cell of a sweep. A failed cell keeps its coordinates and carries the
/// error message; `evd` is then empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub replication: usize,
    pub method: String,
    pub seed: u64,
    pub evd: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: f64,
    pub method: String,
    pub n: usize,
    pub failures: usize,
    pub mean_evd: Option<f64>,
    pub std_err: Option<f64>,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}

pub fn from_csv<T: DeserializeOwned>(text: &str) -> CliResult<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Config(format!("csv record {}: {e}", i + 1))))
        .collect()
}

/// Mean and standard error of the mean; the error is 0 for a single value.
pub fn mean_and_stderr(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Groups rows by `(axis, value, method)` in first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64, String)> = Vec::new();
    for r in rows {
        let key = (r.axis.clone(), r.value, r.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(axis, value, method)| {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.axis == axis && r.value == value && r.method == method)
                .collect();
            let evds: Vec<f64> = cell.iter().filter_map(|r| r.evd).collect();
            let stats = mean_and_stderr(&evds);
            SummaryRow {
                n: evds.len(),
                failures: cell.len() - evds.len(),
                mean_evd: stats.map(|s| s.0),
                std_err: stats.map(|s| s.1),
                axis,
                value,
                method,
            }
        })
        .collect()
}

/// Number of adjacent increases in a sequence that should be non-increasing.
pub fn inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] > w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, value: f64, rep: usize, evd: Option<f64>) -> SweepRow {
        SweepRow {
            axis: "n_demos".into(),
            value,
            replication: rep,
            method: method.into(),
            seed: 1,
            evd,
            converged: evd.map(|_| true),
            error: if evd.is_none() {
                Some("boom, with a comma".into())
            } else {
                None
            },
        }
    }

    #[test]
    fn result_rows_round_trip() {
        let rows = vec![
            ResultRow {
                method: "maxent".into(),
                seed: u64::MAX,
                n_demos: 20,
                trajectory_length: 5,
                epsilon_rep: 0.95,
                evd: 0.1 + 0.2,
                converged: true,
            },
            ResultRow {
                method: "sirl".into(),
                seed: 0,
                n_demos: 1,
                trajectory_length: 64,
                epsilon_rep: 0.65,
                evd: 1.0 / 3.0,
                converged: false,
            },
        ];
        let text = to_csv(&rows).unwrap();
        assert!(
            text.starts_with("method,seed,n_demos,trajectory_length,epsilon_rep,evd,converged\n")
        );
        assert!(!text.contains('\r'));
        assert_eq!(from_csv::<ResultRow>(&text).unwrap(), rows);
    }

    #[test]
    fn sweep_rows_with_errors_round_trip() {
        let rows = vec![row("sirl", 40.0, 0, Some(0.5)), row("sirl", 40.0, 1, None)];
        let text = to_csv(&rows).unwrap();
        assert_eq!(from_csv::<SweepRow>(&text).unwrap(), rows);
    }

    #[test]
    fn single_replication_has_zero_error() {
        assert_eq!(mean_and_stderr(&[2.5]), Some((2.5, 0.0)));
        assert_eq!(mean_and_stderr(&[]), None);
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn summary_counts_failures() {
        let rows = vec![
            row("sirl", 40.0, 0, Some(1.0)),
            row("sirl", 40.0, 1, Some(3.0)),
            row("sirl", 40.0, 2, None),
            row("maxent", 40.0, 0, Some(4.0)),
            row("sirl", 80.0, 0, None),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].n, s[0].failures, s[0].mean_evd), (2, 1, Some(2.0)));
        assert_eq!(s[1].method, "maxent");
        assert_eq!((s[2].n, s[2].failures, s[2].mean_evd), (0, 1, None));
        let text = to_csv(&s).unwrap();
        assert_eq!(from_csv::<SummaryRow>(&text).unwrap(), s);
    }

    #[test]
    fn inversion_count() {
        assert_eq!(inversions(&[3.0, 2.0, 2.0, 1.0]), 0);
        assert_eq!(inversions(&[3.0, 4.0, 2.0, 2.5]), 2);
        assert_eq!(inversions(&[]), 0);
    }
}
