//! Binary model files.
//!
//! Layout: the line `KAFMODEL 1`, then `key = value` lines, then one
//! `array NAME ROWS COLS` line per stored matrix, then `END`, then the arrays
//! as column-major little-endian `f64` in declaration order. Scalars are
//! written with `{}` formatting, which round-trips every finite `f64`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use kaf_core::faer::Mat;
use kaf_core::kernels::BandwidthInfo;
use kaf_core::{
    Basis, BiorthogonalBasis, ErrorModel, FittedKernel, ForecastModel, KernelFamily, NormalizationMode,
    NormalizedKernel, ResponseTransform, SpectralBasis,
};

const MAGIC: &str = "KAFMODEL 1";

/// A fitted model together with the options that produced it.
pub struct StoredModel {
    pub model: ForecastModel,
    /// Training options echoed into reports.
    pub params: Vec<(String, String)>,
}

struct Array {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn column(name: &str, v: &[f64]) -> Array {
    Array {
        name: name.into(),
        rows: v.len(),
        cols: 1,
        data: v.to_vec(),
    }
}

fn matrix(name: &str, m: kaf_core::faer::MatRef<'_, f64>) -> Array {
    let data = (0..m.ncols())
        .flat_map(|j| (0..m.nrows()).map(move |i| m[(i, j)]))
        .collect();
    Array {
        name: name.into(),
        rows: m.nrows(),
        cols: m.ncols(),
        data,
    }
}

/// Stores row-major `rows` as a `rows.len() x width` matrix.
fn rows(name: &str, rows: &[Vec<f64>], width: usize) -> Array {
    let data = (0..width).flat_map(|j| rows.iter().map(move |r| r[j])).collect();
    Array {
        name: name.into(),
        rows: rows.len(),
        cols: width,
        data,
    }
}

pub fn save(path: &Path, stored: &StoredModel) -> Result<()> {
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    write_model(&mut file, stored)?;
    file.flush()?;
    Ok(())
}

pub fn write_model(out: &mut impl Write, stored: &StoredModel) -> Result<()> {
    let model = &stored.model;
    let basis = model.basis();
    let nk = basis.normalized_kernel();
    let kernel = nk.kernel();
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| keys.push((k.to_string(), v));
    put("family", family_name(kernel.family()).into());
    put("epsilon", kernel.epsilon().to_string());
    put("delays", kernel.delays().to_string());
    match nk.mode() {
        NormalizationMode::None => put("normalization", "none".into()),
        NormalizationMode::SymmetricMarkov => put("normalization", "markov".into()),
        NormalizationMode::Diffusion { alpha } => {
            put("normalization", "diffusion".into());
            put("diffusion_alpha", alpha.to_string());
        }
    }
    if let Some(b) = kernel.bandwidth() {
        put("bandwidth_epsilon", b.epsilon.to_string());
        put("epsilon_tilde", b.epsilon_tilde.to_string());
        put("m_tilde", b.m_tilde.to_string());
    }
    match model.transform() {
        ResponseTransform::Identity => put("transform", "identity".into()),
        ResponseTransform::Indicator { threshold } => {
            put("transform", "indicator".into());
            put("threshold", threshold.to_string());
        }
    }
    let (mean, std) = model.response_stats();
    put("response_mean", mean.to_string());
    put("response_std", std.to_string());
    put("dt", model.dt().to_string());
    put(
        "leads",
        model.leads().iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    for (k, v) in &stored.params {
        if v.contains('\n') {
            bail!("parameter {k} contains a newline");
        }
        put(&format!("param.{k}"), v.clone());
    }

    let ell = basis.ell();
    let covariates: Vec<Vec<f64>> = kernel.covariates().chunks(kernel.dim()).map(<[f64]>::to_vec).collect();
    let mut arrays = vec![rows("covariates", &covariates, kernel.dim())];
    if let Some(b) = kernel.bandwidth() {
        arrays.push(column("r_values", &b.r_values));
    }
    for (name, v) in [("u", nk.u_values()), ("v", nk.v_values()), ("d", nk.d_values())] {
        if !v.is_empty() {
            arrays.push(column(name, v));
        }
    }
    match basis.as_ref() {
        Basis::Symmetric(b) => {
            put_basis_kind(&mut keys, "symmetric");
            arrays.push(column("lambdas", b.lambdas()));
            arrays.push(matrix("phis", b.phis()));
            arrays.push(matrix("weights", b.weights()));
        }
        Basis::Biorthogonal(b) => {
            put_basis_kind(&mut keys, "biorthogonal");
            arrays.push(column("etas", b.etas()));
            arrays.push(matrix("xis", b.xis()));
            arrays.push(matrix("xi_primes", b.xi_primes()));
            arrays.push(matrix("weights", b.weights()));
        }
    }
    arrays.push(rows("alphas", model.alphas(), ell));
    if let Some(e) = model.error_model() {
        arrays.push(rows("error_coeffs", &e.coeffs, ell));
    }

    writeln!(out, "{MAGIC}")?;
    for (k, v) in &keys {
        writeln!(out, "{k} = {v}")?;
    }
    for a in &arrays {
        writeln!(out, "array {} {} {}", a.name, a.rows, a.cols)?;
    }
    writeln!(out, "END")?;
    for a in &arrays {
        for x in &a.data {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn put_basis_kind(keys: &mut Vec<(String, String)>, kind: &str) {
    keys.push(("basis".into(), kind.into()));
}

fn family_name(f: KernelFamily) -> &'static str {
    match f {
        KernelFamily::Gaussian => "gaussian",
        KernelFamily::VariableBandwidth => "variable_bandwidth",
    }
}

pub fn load(path: &Path) -> Result<StoredModel> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_model(&mut BufReader::new(file)).with_context(|| format!("reading model {}", path.display()))
}

pub fn read_model(input: &mut impl BufRead) -> Result<StoredModel> {
    let mut line = String::new();
    let mut next_line = |line: &mut String| -> Result<()> {
        line.clear();
        if input.read_line(line)? == 0 {
            bail!("unexpected end of header");
        }
        Ok(())
    };
    next_line(&mut line)?;
    if line.trim_end() != MAGIC {
        bail!("not a model file");
    }
    let mut keys = BTreeMap::new();
    let mut params = Vec::new();
    let mut shapes = Vec::new();
    loop {
        next_line(&mut line)?;
        let text = line.trim_end_matches('\n');
        if text == "END" {
            break;
        }
        if let Some(rest) = text.strip_prefix("array ") {
            let parts: Vec<&str> = rest.split(' ').collect();
            if parts.len() != 3 {
                bail!("malformed array line: {text}");
            }
            shapes.push((
                parts[0].to_string(),
                parts[1].parse::<usize>()?,
                parts[2].parse::<usize>()?,
            ));
            continue;
        }
        let (k, v) = text
            .split_once(" = ")
            .ok_or_else(|| anyhow!("malformed header line: {text}"))?;
        match k.strip_prefix("param.") {
            Some(p) => params.push((p.to_string(), v.to_string())),
            None => {
                keys.insert(k.to_string(), v.to_string());
            }
        }
    }
    let mut arrays = BTreeMap::new();
    for (name, r, c) in shapes {
        let count = r.checked_mul(c).ok_or_else(|| anyhow!("array {name} too large"))?;
        let mut bytes = vec![0u8; count * 8];
        input
            .read_exact(&mut bytes)
            .with_context(|| format!("truncated array {name}"))?;
        let data = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        arrays.insert(
            name.clone(),
            Array {
                name,
                rows: r,
                cols: c,
                data,
            },
        );
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        bail!("{} trailing bytes after array data", rest.len());
    }
    build(&keys, &mut arrays, params)
}

fn build(
    keys: &BTreeMap<String, String>,
    arrays: &mut BTreeMap<String, Array>,
    params: Vec<(String, String)>,
) -> Result<StoredModel> {
    let key = |k: &str| {
        keys.get(k)
            .map(String::as_str)
            .ok_or_else(|| anyhow!("missing key {k}"))
    };
    let float = |k: &str| -> Result<f64> { key(k)?.parse::<f64>().with_context(|| format!("key {k}")) };
    let covariates = take_from(arrays, "covariates")?;
    let dim = covariates.cols;
    let row_major: Vec<f64> = to_rows(covariates).concat();
    let family = match key("family")? {
        "gaussian" => KernelFamily::Gaussian,
        "variable_bandwidth" => KernelFamily::VariableBandwidth,
        other => bail!("unknown kernel family {other}"),
    };
    let bandwidth = match family {
        KernelFamily::Gaussian => None,
        KernelFamily::VariableBandwidth => Some(BandwidthInfo {
            r_values: take_column_from(arrays, "r_values")?,
            epsilon: float("bandwidth_epsilon")?,
            epsilon_tilde: float("epsilon_tilde")?,
            m_tilde: float("m_tilde")?,
        }),
    };
    let delays = key("delays")?.parse::<usize>()?;
    let kernel = FittedKernel::from_parts(family, float("epsilon")?, delays, row_major, dim, bandwidth)?;
    let (u, v, d) = (
        optional_column(arrays, "u")?,
        optional_column(arrays, "v")?,
        optional_column(arrays, "d")?,
    );
    let mode = match key("normalization")? {
        "none" => NormalizationMode::None,
        "markov" => NormalizationMode::SymmetricMarkov,
        "diffusion" => NormalizationMode::Diffusion {
            alpha: float("diffusion_alpha")?,
        },
        other => bail!("unknown normalization {other}"),
    };
    let nk = NormalizedKernel::from_parts(kernel, mode, u, v, d)?;
    let basis = match key("basis")? {
        "symmetric" => {
            let lambdas = take_column_from(arrays, "lambdas")?;
            let phis = to_mat(take_from(arrays, "phis")?);
            let weights = to_mat(take_from(arrays, "weights")?);
            Basis::Symmetric(SpectralBasis::from_parts(nk, lambdas, phis, weights)?)
        }
        "biorthogonal" => {
            let etas = take_column_from(arrays, "etas")?;
            let xis = to_mat(take_from(arrays, "xis")?);
            let xi_primes = to_mat(take_from(arrays, "xi_primes")?);
            let weights = to_mat(take_from(arrays, "weights")?);
            Basis::Biorthogonal(BiorthogonalBasis::from_parts(nk, etas, xis, xi_primes, weights)?)
        }
        other => bail!("unknown basis kind {other}"),
    };
    let transform = match key("transform")? {
        "identity" => ResponseTransform::Identity,
        "indicator" => ResponseTransform::Indicator {
            threshold: float("threshold")?,
        },
        other => bail!("unknown transform {other}"),
    };
    let leads = key("leads")?
        .split(',')
        .map(|s| s.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()?;
    let alphas = to_rows(take_from(arrays, "alphas")?);
    let error_model = match arrays.contains_key("error_coeffs") {
        true => Some(ErrorModel {
            coeffs: to_rows(take_from(arrays, "error_coeffs")?),
        }),
        false => None,
    };
    if let Some(name) = arrays.keys().next() {
        bail!("unexpected array {name}");
    }
    let model = ForecastModel::from_parts(
        Arc::new(basis),
        leads,
        alphas,
        transform,
        (float("response_mean")?, float("response_std")?),
        float("dt")?,
        error_model,
    )?;
    Ok(StoredModel { model, params })
}

fn take_from(arrays: &mut BTreeMap<String, Array>, name: &str) -> Result<Array> {
    arrays.remove(name).ok_or_else(|| anyhow!("missing array {name}"))
}

fn take_column_from(arrays: &mut BTreeMap<String, Array>, name: &str) -> Result<Vec<f64>> {
    let a = take_from(arrays, name)?;
    if a.cols != 1 {
        bail!("array {name} must be a column");
    }
    Ok(a.data)
}

fn optional_column(arrays: &mut BTreeMap<String, Array>, name: &str) -> Result<Vec<f64>> {
    match arrays.contains_key(name) {
        true => take_column_from(arrays, name),
        false => Ok(Vec::new()),
    }
}

fn to_mat(a: Array) -> Mat<f64> {
    Mat::from_fn(a.rows, a.cols, |i, j| a.data[j * a.rows + i])
}

fn to_rows(a: Array) -> Vec<Vec<f64>> {
    (0..a.rows)
        .map(|i| (0..a.cols).map(|j| a.data[j * a.rows + i]).collect())
        .collect()
}
