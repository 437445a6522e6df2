//! Time-series CSV files with header `t,x1,...,xm,y`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use kaf_core::TimeSeriesDataset;

/// Relative tolerance on the spacing of the time column.
pub const SPACING_TOLERANCE: f64 = 1e-9;

/// Reads a dataset and the time of its first row.
pub fn read_dataset(path: &Path) -> Result<(TimeSeriesDataset, f64)> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    parse_dataset(file).with_context(|| format!("reading {}", path.display()))
}

pub fn parse_dataset(input: impl std::io::Read) -> Result<(TimeSeriesDataset, f64)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().context("missing header")?.clone();
    let dim = check_header(&header)?;
    let mut times = Vec::new();
    let mut covariates = Vec::new();
    let mut responses = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // header is line 1
        let line = row + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        if record.len() != dim + 2 {
            bail!("line {line}: expected {} fields, found {}", dim + 2, record.len());
        }
        let mut values = record.iter().map(|f| f.parse::<f64>());
        let mut next = |name: &str| -> Result<f64> {
            let v = values
                .next()
                .unwrap()
                .with_context(|| format!("line {line}: {name} is not a number"))?;
            if !v.is_finite() {
                bail!("line {line}: {name} is not finite");
            }
            Ok(v)
        };
        times.push(next("t")?);
        for i in 0..dim {
            covariates.push(next(&format!("x{}", i + 1))?);
        }
        responses.push(next("y")?);
    }
    if times.len() < 2 {
        bail!(
            "need at least two rows to infer the sampling interval, found {}",
            times.len()
        );
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        bail!("time column must be increasing (line 3)");
    }
    for (j, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > SPACING_TOLERANCE * dt {
            bail!("line {}: time step {} differs from {dt}", j + 3, w[1] - w[0]);
        }
    }
    Ok((TimeSeriesDataset::new(covariates, dim, responses, dt)?, times[0]))
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 {
        bail!("line 1: header must be t,x1,...,xm,y");
    }
    let dim = fields.len() - 2;
    let expect: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dim).map(|i| format!("x{i}")))
        .chain(std::iter::once("y".into()))
        .collect();
    if fields != expect {
        bail!(
            "line 1: header must be {}, found {}",
            expect.join(","),
            fields.join(",")
        );
    }
    Ok(dim)
}

/// Writes `ds` with times `t0 + j dt`.
pub fn write_dataset(path: &Path, ds: &TimeSeriesDataset, t0: f64) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    format_dataset(file, ds, t0)
}

pub fn format_dataset(out: impl std::io::Write, ds: &TimeSeriesDataset, t0: f64) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=ds.dim()).map(|i| format!("x{i}")));
    header.push("y".into());
    writer.write_record(&header)?;
    for j in 0..ds.n() {
        let mut row = Vec::with_capacity(ds.dim() + 2);
        row.push((t0 + j as f64 * ds.dt()).to_string());
        row.extend(ds.covariate(j).iter().map(f64::to_string));
        row.push(ds.responses()[j].to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
