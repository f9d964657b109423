//! N×N CSV heatmaps. Row `y`, column `x` holds cell `y·N + x`.

use std::fmt::Display;
use std::str::FromStr;

use crate::{CliError, CliResult};

pub fn to_csv<T: Display>(values: &[T], n: usize) -> String {
    assert_eq!(values.len(), n * n, "grid needs N² values");
    let mut out = String::new();
    for row in values.chunks(n) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses a square grid back into row-major order.
pub fn from_csv<T: FromStr>(text: &str) -> CliResult<(Vec<T>, usize)> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let n = rows.len();
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != n {
            return Err(CliError::Config(format!(
                "grid row {} has {} cells, expected {n}",
                i + 1,
                cells.len()
            )));
        }
        for c in cells {
            values.push(
                c.trim().parse().map_err(|_| {
                    CliError::Config(format!("bad grid cell `{c}` in row {}", i + 1))
                })?,
            );
        }
    }
    Ok((values, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_row_major() {
        let csv = to_csv(&[1, 2, 3, 4], 2);
        assert_eq!(csv, "1,2\n3,4\n");
        let (v, n) = from_csv::<i32>(&csv).unwrap();
        assert_eq!((v, n), (vec![1, 2, 3, 4], 2));
    }

    #[test]
    fn floats_round_trip_exactly() {
        let v = vec![
            0.1,
            -1.0 / 3.0,
            1e-300,
            2.5e10,
            0.0,
            -0.0,
            7.0,
            f64::MIN_POSITIVE,
            1.0 + f64::EPSILON,
        ];
        let (back, n) = from_csv::<f64>(&to_csv(&v, 3)).unwrap();
        assert_eq!(n, 3);
        assert_eq!(back, v);
    }

    #[test]
    fn ragged_grid_fails() {
        assert!(from_csv::<f64>("1,2\n3\n").is_err());
        assert!(from_csv::<f64>("1,x\n3,4\n").is_err());
    }
}
