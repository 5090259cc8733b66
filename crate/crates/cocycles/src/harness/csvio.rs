//! Dataset and result files. Datasets are UTF-8 CSV with a header row whose
//! columns are prefixed z/x/y; '.' is the decimal separator.

use std::path::Path;

use crate::benchgen::GroundTruth;
use crate::causal::ImputedPanel;
use crate::data::Dataset;
use crate::error::{CocycleError, Result};

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = Vec::new();
    for d in 0..data.z_dim() {
        header.push(format!("z{d}"));
    }
    for d in 0..data.x_dim() {
        header.push(format!("x{d}"));
    }
    for d in 0..data.y_dim() {
        header.push(format!("y{d}"));
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if data.z_dim() > 0 {
            row.extend(data.z[i].iter().map(|v| v.to_string()));
        }
        row.extend(data.x[i].iter().map(|v| v.to_string()));
        row.extend(data.y[i].iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let mut roles: Vec<u8> = Vec::with_capacity(header.len());
    for name in header.iter() {
        let role = name.trim().bytes().next().map(|b| b.to_ascii_lowercase());
        match role {
            Some(b'z') | Some(b'x') | Some(b'y') => roles.push(role.unwrap()),
            _ => {
                return Err(CocycleError::InvalidConfig(format!(
                    "dataset column `{name}` must be prefixed z, x, or y"
                )))
            }
        }
    }
    let mut z = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut zr = Vec::new();
        let mut xr = Vec::new();
        let mut yr = Vec::new();
        for (field, role) in record.iter().zip(&roles) {
            let v: f64 = field.trim().parse().map_err(|_| {
                CocycleError::InvalidConfig(format!("non-numeric dataset field `{field}`"))
            })?;
            match role {
                b'z' => zr.push(v),
                b'x' => xr.push(v),
                _ => yr.push(v),
            }
        }
        if !zr.is_empty() {
            z.push(zr);
        }
        x.push(xr);
        y.push(yr);
    }
    Dataset::new(z, x, y)
}

/// Ground truth as a parallel CSV: per target t and coordinate d a column
/// `cf{t}_y{d}`, plus `effect{d}` columns when the design has a closed-form
/// effect sample.
pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = truth.counterfactuals.first().map_or(0, Vec::len);
    let p = truth
        .counterfactuals
        .first()
        .and_then(|c| c.first())
        .map_or(0, Vec::len);
    let mut header = Vec::new();
    for t in 0..truth.targets.len() {
        for d in 0..p {
            header.push(format!("cf{t}_y{d}"));
        }
    }
    if truth.effect_samples.is_some() {
        for d in 0..p {
            header.push(format!("effect{d}"));
        }
    }
    w.write_record(&header)?;
    for i in 0..n {
        let mut row = Vec::new();
        for t in 0..truth.targets.len() {
            row.extend(truth.counterfactuals[t][i].iter().map(|v| v.to_string()));
        }
        if let Some(e) = &truth.effect_samples {
            row.extend(e[i].iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Imputed panel: observed columns then `yhat{t}_{d}` per target/coordinate.
pub fn write_panel(path: &Path, panel: &ImputedPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let xd = panel.observed_x.first().map_or(0, Vec::len);
    let yd = panel.observed_y.first().map_or(0, Vec::len);
    let mut header = Vec::new();
    for d in 0..xd {
        header.push(format!("x{d}"));
    }
    for d in 0..yd {
        header.push(format!("y{d}"));
    }
    for t in 0..panel.targets.len() {
        for d in 0..yd {
            header.push(format!("yhat{t}_{d}"));
        }
    }
    w.write_record(&header)?;
    for i in 0..panel.n() {
        let mut row = Vec::new();
        row.extend(panel.observed_x[i].iter().map(|v| v.to_string()));
        row.extend(panel.observed_y[i].iter().map(|v| v.to_string()));
        for t in 0..panel.targets.len() {
            row.extend(panel.imputed[t][i].iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column CSV for externally plotted curves (grid, value).
pub fn write_curve(path: &Path, grid: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["grid", "value"])?;
    for (g, v) in grid.iter().zip(values) {
        w.write_record([g.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Loss trace as (epoch, mean_loss) rows.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mean_loss"])?;
    for (e, v) in trace.iter().enumerate() {
        w.write_record([e.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = Dataset::new(
            vec![vec![0.5], vec![-0.25]],
            vec![vec![1.0], vec![0.0]],
            vec![vec![2.0, 3.0], vec![4.0, 5.0]],
        )
        .unwrap();
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.z, data.z);
        assert_eq!(back.x, data.x);
        assert_eq!(back.y, data.y);
    }

    #[test]
    fn unknown_column_prefix_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a0,y0\n1.0,2.0\n").unwrap();
        assert!(read_dataset(&path).is_err());
    }
}
