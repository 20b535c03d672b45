//! On-disk formats: flux CSVs, observation CSVs and dataset directories.
//!
//! A dataset directory holds `graph.json`, one `obs_<variable>.csv` per
//! variable (first column `sample`, then one column per feature),
//! `flux_truth.csv` and `meta.json`. Truth and metadata are optional when
//! reading, so real observations can be used as a dataset too.

use std::fs;
use std::path::{Path, PathBuf};

use fluxmp_core::synth::{split_indices, NlfKind, ObservationSet, Split, SyntheticDataset};
use fluxmp_core::{DirectedFactorGraph, FluxMatrix, Matrix};
use serde::{Deserialize, Serialize};

use crate::config::GraphShape;
use crate::{CliError, CliResult};

pub const GRAPH_FILE: &str = "graph.json";
pub const TRUTH_FILE: &str = "flux_truth.csv";
pub const META_FILE: &str = "meta.json";
pub const SAMPLE_COLUMN: &str = "sample";

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(path: &Path, row: usize, text: &str) -> CliResult<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| CliError::file(path, format!("row {row}: `{text}` is not a number")))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::file(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::file(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::file(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes `header` and then every row of `rows` as CSV.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::file(path, e);
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::file(path, e.error()))?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::file(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::file(path, e))
}

/// Header and string records of a CSV file.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::file(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::file(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::file(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Flux matrix as CSV: a header of variable names, then one row per sample.
pub fn write_flux_csv(path: &Path, flux: &FluxMatrix, names: &[String]) -> CliResult<()> {
    if names.len() != flux.ncols() {
        return Err(CliError::file(
            path,
            format!("{} column names for {} flux columns", names.len(), flux.ncols()),
        ));
    }
    let rows: Vec<Vec<String>> = flux
        .rows_iter()
        .map(|r| r.iter().map(|&x| fmt_f64(x)).collect())
        .collect();
    write_csv(path, names, &rows)
}

/// Reads a flux CSV, returning its column names and values.
pub fn read_flux_csv(path: &Path) -> CliResult<(Vec<String>, FluxMatrix)> {
    let (header, rows) = read_csv(path)?;
    let k = header.len();
    let mut data = Vec::with_capacity(rows.len() * k);
    for (i, r) in rows.iter().enumerate() {
        for cell in r {
            data.push(parse_f64(path, i + 1, cell)?);
        }
    }
    let flux = FluxMatrix::from_vec(rows.len(), k, data).map_err(|e| CliError::file(path, e))?;
    Ok((header, flux))
}

/// Reads a flux CSV and orders its columns like the graph's variables.
pub fn read_graph_flux(path: &Path, g: &DirectedFactorGraph) -> CliResult<FluxMatrix> {
    let (header, flux) = read_flux_csv(path)?;
    let names = g.variable_names();
    if header == names {
        return Ok(flux);
    }
    let mut order = Vec::with_capacity(names.len());
    for n in &names {
        match header.iter().position(|h| h == n) {
            Some(i) => order.push(i),
            None => return Err(CliError::file(path, format!("missing column for variable `{n}`"))),
        }
    }
    if header.len() != names.len() {
        return Err(CliError::file(
            path,
            format!("{} columns, graph has {} variables", header.len(), names.len()),
        ));
    }
    let mut out = FluxMatrix::zeros(flux.nrows(), names.len());
    for j in 0..flux.nrows() {
        for (c, &src) in order.iter().enumerate() {
            out.set(j, c, flux.get(j, src));
        }
    }
    Ok(out)
}

pub fn read_graph(path: &Path) -> CliResult<DirectedFactorGraph> {
    let text = read_text(path)?;
    DirectedFactorGraph::from_json_str(&text).map_err(|e| CliError::file(path, e))
}

pub fn write_graph(path: &Path, g: &DirectedFactorGraph) -> CliResult<()> {
    let mut text = g.to_json_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    write_text(path, &text)
}

/// Variable names become file names and CSV headers, so they must be unique
/// and free of path syntax.
pub fn check_dataset_names(g: &DirectedFactorGraph) -> CliResult<()> {
    let mut seen = std::collections::BTreeSet::new();
    for v in g.variables() {
        let n = v.name.as_str();
        if n.is_empty() || n == "." || n == ".." || n.contains(['/', '\\', '\0']) {
            return Err(CliError::Usage(format!("variable name `{n}` cannot name a file")));
        }
        if !seen.insert(n) {
            return Err(CliError::Usage(format!("variable name `{n}` is not unique")));
        }
    }
    Ok(())
}

pub fn obs_path(dir: &Path, variable: &str) -> PathBuf {
    dir.join(format!("obs_{variable}.csv"))
}

fn feature_names(g: &DirectedFactorGraph, v: usize, width: usize) -> Vec<String> {
    let declared = &g.variables()[v].features;
    if declared.len() == width {
        declared.clone()
    } else {
        (0..width).map(|i| format!("x{i}")).collect()
    }
}

fn write_obs_csv(path: &Path, features: &[String], block: &Matrix) -> CliResult<()> {
    let mut header = vec![SAMPLE_COLUMN.to_string()];
    header.extend(features.iter().cloned());
    let rows: Vec<Vec<String>> = block
        .rows_iter()
        .enumerate()
        .map(|(j, r)| {
            let mut rec = vec![j.to_string()];
            rec.extend(r.iter().map(|&x| fmt_f64(x)));
            rec
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Sample ids and values of one observation file.
fn read_obs_csv(path: &Path) -> CliResult<(Vec<String>, Matrix)> {
    let (header, rows) = read_csv(path)?;
    if header.first().map(String::as_str) != Some(SAMPLE_COLUMN) {
        return Err(CliError::file(path, format!("first column must be `{SAMPLE_COLUMN}`")));
    }
    let width = header.len() - 1;
    let mut ids = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * width);
    for (i, r) in rows.iter().enumerate() {
        ids.push(r[0].clone());
        for cell in &r[1..] {
            data.push(parse_f64(path, i + 1, cell)?);
        }
    }
    let m = Matrix::from_vec(rows.len(), width, data).map_err(|e| CliError::file(path, e))?;
    Ok((ids, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableCoefficients {
    pub variable: String,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub kind: NlfKind,
    pub seed: u64,
    pub samples: usize,
    pub sparsity: f64,
    /// Ground-truth floor used when lifting boundary solutions.
    pub min_flux: f64,
    /// Exponentiated-link truth rows are scaled so every entry is at least 1.
    pub rescaled_to_min_one: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_spec: Option<GraphShape>,
    pub split_fractions: [f64; 3],
    pub coefficients: Vec<VariableCoefficients>,
    pub split: Split,
}

/// A dataset directory loaded into memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: DirectedFactorGraph,
    pub observations: ObservationSet,
    pub truth: Option<FluxMatrix>,
    pub meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.observations.n_samples()
    }

    /// Stored split, or a seeded default split when there is no metadata.
    pub fn split(&self, seed: u64, fractions: [f64; 3]) -> CliResult<Split> {
        match &self.meta {
            Some(m) => Ok(m.split.clone()),
            None => Ok(split_indices(self.n_samples(), fractions, seed)?),
        }
    }
}

pub fn write_dataset(
    dir: &Path,
    ds: &SyntheticDataset,
    min_flux: f64,
    fractions: [f64; 3],
    graph_spec: Option<GraphShape>,
) -> CliResult<()> {
    let g = &ds.graph;
    check_dataset_names(g)?;
    fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
    write_graph(&dir.join(GRAPH_FILE), g)?;
    let names = g.variable_names();
    for (v, name) in names.iter().enumerate() {
        let block = ds.observations.block(v);
        write_obs_csv(&obs_path(dir, name), &feature_names(g, v, block.ncols()), block)?;
    }
    write_flux_csv(&dir.join(TRUTH_FILE), &ds.flux_truth, &names)?;
    let meta = DatasetMeta {
        kind: ds.kind,
        seed: ds.seed,
        samples: ds.n_samples(),
        sparsity: ds.sparsity,
        min_flux,
        rescaled_to_min_one: ds.kind == NlfKind::Nlf2,
        graph_spec,
        split_fractions: fractions,
        coefficients: names
            .iter()
            .zip(&ds.coefficients)
            .map(|(n, c)| VariableCoefficients {
                variable: n.clone(),
                a: c.a,
                b: c.b,
            })
            .collect(),
        split: ds.split.clone(),
    };
    write_json(&dir.join(META_FILE), &meta)
}

pub fn read_dataset(dir: &Path) -> CliResult<Dataset> {
    let graph = read_graph(&dir.join(GRAPH_FILE))?;
    check_dataset_names(&graph)?;
    let mut blocks = Vec::with_capacity(graph.n_variables());
    let mut reference: Option<(PathBuf, Vec<String>)> = None;
    for v in graph.variables() {
        let path = obs_path(dir, &v.name);
        let (ids, block) = read_obs_csv(&path)?;
        match &reference {
            None => reference = Some((path, ids)),
            Some((first, expected)) => {
                if &ids != expected {
                    return Err(CliError::file(
                        &path,
                        format!("sample ids differ from {}", first.display()),
                    ));
                }
            }
        }
        blocks.push(block);
    }
    let observations = ObservationSet::new(blocks)?;
    observations.check_against(&graph)?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        let t = read_graph_flux(&truth_path, &graph)?;
        if t.nrows() != observations.n_samples() {
            return Err(CliError::file(
                &truth_path,
                format!("{} rows for {} samples", t.nrows(), observations.n_samples()),
            ));
        }
        Some(t)
    } else {
        None
    };
    let meta_path = dir.join(META_FILE);
    let meta: Option<DatasetMeta> = if meta_path.exists() {
        let m: DatasetMeta = serde_json::from_str(&read_text(&meta_path)?)
            .map_err(|e| CliError::file(&meta_path, e))?;
        let n = observations.n_samples();
        let all = m.split.train.iter().chain(&m.split.val).chain(&m.split.test);
        if let Some(bad) = all.clone().find(|&&i| i >= n) {
            return Err(CliError::file(&meta_path, format!("split index {bad} out of range")));
        }
        Some(m)
    } else {
        None
    };
    Ok(Dataset {
        graph,
        observations,
        truth,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_csv_round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        let vals = vec![0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, f64::MIN_POSITIVE, 2.0];
        let flux = FluxMatrix::from_vec(2, 3, vals.clone()).unwrap();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        write_flux_csv(&p, &flux, &names).unwrap();
        let (h, back) = read_flux_csv(&p).unwrap();
        assert_eq!(h, names);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.as_slice()), bits(&vals));
    }

    #[test]
    fn empty_and_single_cell_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_flux_csv(&p, &FluxMatrix::zeros(0, 2), &["a".into(), "b".into()]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n");
        assert_eq!(read_flux_csv(&p).unwrap().1.nrows(), 0);
        let p = dir.path().join("one.csv");
        write_flux_csv(&p, &FluxMatrix::from_vec(1, 1, vec![2.5]).unwrap(), &["r".into()]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "r\n2.5\n");
        assert!(write_flux_csv(&p, &FluxMatrix::zeros(1, 2), &["r".into()]).is_err());
    }

    #[test]
    fn bad_cells_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "a,b\n1,zz\n").unwrap();
        let e = read_flux_csv(&p).unwrap_err();
        assert_eq!(e.exit_code(), crate::EXIT_DATA);
        fs::write(&p, "a,b\n1\n").unwrap();
        assert_eq!(read_flux_csv(&p).unwrap_err().exit_code(), crate::EXIT_DATA);
    }
}
