//! CSV and JSON emission for grid-valued artifacts, shared by the sheet
//! approximation and the Gaussian reference grids.
//!
//! CSV: optional `#`-prefixed provenance lines, a header `axis1,...,axisd,value`,
//! then rows in row-major order (last axis fastest). Numbers print in the
//! shortest round-trip decimal form, so re-imported values are bit-exact.

use crate::error::{Error, Result};
use crate::sheet::{GridSpec, SheetApproximation};
use serde_json::{json, Value};
use std::io::{BufRead, Write};
use std::path::Path;

/// The provenance block embedded in every grid artifact.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GridParams {
    pub n: u64,
    pub lambda: f64,
    pub d: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Csv,
    Json,
}

pub fn write_grid_csv<W: Write>(
    out: &mut W,
    axes: &[Vec<f64>],
    values: &[f64],
    comments: &[String],
) -> std::io::Result<()> {
    debug_assert_eq!(values.len(), axes.iter().map(|a| a.len()).product::<usize>());
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    let header: Vec<String> = (1..=axes.len()).map(|i| format!("axis{i}")).collect();
    writeln!(out, "{},value", header.join(","))?;

    let mut index = vec![0usize; axes.len()];
    for &value in values {
        let mut row = String::new();
        for (axis, &i) in axes.iter().zip(&index) {
            row.push_str(&format!("{},", axis[i]));
        }
        writeln!(out, "{row}{value}")?;
        for axis in (0..axes.len()).rev() {
            index[axis] += 1;
            if index[axis] < axes[axis].len() {
                break;
            }
            index[axis] = 0;
        }
    }
    Ok(())
}

/// The JSON artifact: params block, per-axis grids, and values nested by axis.
pub fn grid_json(params: &GridParams, axes: &[Vec<f64>], values: &[f64]) -> Value {
    json!({
        "params": {
            "n": params.n,
            "lambda": params.lambda,
            "d": params.d,
            "seed": params.seed,
        },
        "grid": { "axes": axes },
        "values": nest_values(axes, values),
    })
}

fn nest_values(axes: &[Vec<f64>], values: &[f64]) -> Value {
    if axes.len() == 1 {
        return Value::Array(values.iter().map(|v| json!(v)).collect());
    }
    let inner: usize = axes[1..].iter().map(|a| a.len()).product();
    Value::Array(
        values
            .chunks(inner)
            .map(|chunk| nest_values(&axes[1..], chunk))
            .collect(),
    )
}

/// Reads back a CSV grid artifact, skipping `#` comments. Returns the header
/// fields and the numeric rows.
pub fn read_grid_csv<R: BufRead>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::Io {
            path: "<reader>".into(),
            source: e,
        })?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_empty() {
            header = line.split(',').map(str::to_owned).collect();
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::invalid("csv", format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Evaluates a sheet on a grid and writes the artifact to `path`.
pub fn export_grid(
    sheet: &SheetApproximation,
    grid: &GridSpec,
    format: GridFormat,
    path: &Path,
) -> Result<()> {
    let values = sheet.values_on_grid(grid)?;
    let params = GridParams {
        n: sheet.params().n(),
        lambda: sheet.params().lambda(),
        d: sheet.params().d(),
        seed: sheet.master_seed(),
    };
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    match format {
        GridFormat::Csv => {
            let comments = vec![format!(
                "params: n={} lambda={} d={} seed={}",
                params.n, params.lambda, params.d, params.seed
            )];
            write_grid_csv(&mut file, grid.axes(), &values, &comments).map_err(io_err)?;
        }
        GridFormat::Json => {
            let doc = grid_json(&params, grid.axes(), &values);
            serde_json::to_writer_pretty(&mut file, &doc).map_err(|e| Error::Io {
                path: path.to_owned(),
                source: e.into(),
            })?;
            file.write_all(b"\n").map_err(io_err)?;
        }
    }
    file.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheet::{build_sheet, LambdaMode, SheetParams};

    #[test]
    fn single_cell_grid_at_the_origin_is_zero() {
        let params = SheetParams::new(10, 0.19, 2, LambdaMode::Theorem).unwrap();
        let sheet = build_sheet(params, 5).unwrap();
        let grid = GridSpec::uniform(&[1, 1]).unwrap();
        let values = sheet.values_on_grid(&grid).unwrap();
        assert_eq!(values, vec![0.0]);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let params = SheetParams::new(500, 0.19, 2, LambdaMode::Theorem).unwrap();
        let sheet = build_sheet(params, 6).unwrap();
        let grid = GridSpec::uniform(&[2, 2]).unwrap();
        let values = sheet.values_on_grid(&grid).unwrap();

        let mut buf = Vec::new();
        write_grid_csv(&mut buf, grid.axes(), &values, &["config: test".into()]).unwrap();
        let (header, rows) = read_grid_csv(buf.as_slice()).unwrap();
        assert_eq!(header, vec!["axis1", "axis2", "value"]);
        assert_eq!(rows.len(), 4);
        let mut i = 0;
        for &s in &grid.axes()[0] {
            for &t in &grid.axes()[1] {
                assert_eq!(rows[i][0].to_bits(), s.to_bits());
                assert_eq!(rows[i][1].to_bits(), t.to_bits());
                let direct = sheet.value(s, t).unwrap();
                assert_eq!(rows[i][2].to_bits(), direct.to_bits());
                i += 1;
            }
        }
    }

    #[test]
    fn json_nesting_follows_the_axes() {
        let params = GridParams {
            n: 4,
            lambda: 0.19,
            d: 2,
            seed: 1,
        };
        let axes = vec![vec![0.0, 1.0], vec![0.0, 0.5, 1.0]];
        let values: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let doc = grid_json(&params, &axes, &values);
        assert_eq!(doc["params"]["n"], 4);
        assert_eq!(doc["values"][1][2], 5.0);
        assert_eq!(doc["grid"]["axes"][1][1], 0.5);
    }
}
