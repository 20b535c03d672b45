//! Additive parent-to-children balancing ("balancing with real weights").

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedFactorGraph;
use crate::matrix::FluxMatrix;
use crate::metrics::mean_cosine;
use crate::mpo::{run_mpo, MpoConfig};
use crate::synth::{generate_balanced_flux, inject_orthogonal_noise};

/// Runs `epochs` sweeps. In each sweep factors are visited in id order; the
/// parent weight sum of a factor is split evenly and added onto each of its
/// children, in place. Factors without children are skipped.
pub fn brw_balance(g: &DirectedFactorGraph, w0: &[f64], epochs: usize) -> Result<Vec<f64>> {
    if w0.len() != g.n_variables() {
        return Err(Error::shape("initial flux", g.n_variables(), w0.len()));
    }
    if w0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument(
            "initial flux must be finite and non-negative".into(),
        ));
    }
    let mut w = w0.to_vec();
    for _ in 0..epochs {
        for f in 0..g.n_factors() {
            let n_children = g.children(f).count();
            if n_children == 0 {
                continue;
            }
            let share = g.parents(f).map(|v| w[v]).sum::<f64>() / n_children as f64;
            for c in g.children(f).collect::<Vec<_>>() {
                w[c] += share;
            }
        }
    }
    Ok(w)
}

pub fn brw_balance_batch(
    g: &DirectedFactorGraph,
    w0: &FluxMatrix,
    epochs: usize,
) -> Result<FluxMatrix> {
    if w0.ncols() != g.n_variables() {
        return Err(Error::shape("flux matrix columns", g.n_variables(), w0.ncols()));
    }
    let rows: Vec<Result<Vec<f64>>> = (0..w0.nrows())
        .into_par_iter()
        .map(|j| brw_balance(g, w0.row(j), epochs))
        .collect();
    let mut out = FluxMatrix::zeros(w0.nrows(), w0.ncols());
    for (j, r) in rows.into_iter().enumerate() {
        let row = r.map_err(|e| Error::Row {
            row: j,
            source: Box::new(e),
        })?;
        out.row_mut(j).copy_from_slice(&row);
    }
    Ok(out)
}

/// One noise level and seed of [`noise_benchmark`]: cosine similarity to
/// the ground truth of the noisy input and of each balancer's output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrial {
    pub gamma: f64,
    pub seed: u64,
    pub cos_noisy: f64,
    pub cos_mpo: f64,
    pub cos_brw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBenchConfig {
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mpo: MpoConfig,
    pub brw_epochs: usize,
    /// Floor passed to the ground-truth generator.
    pub min_flux: f64,
}

impl Default for NoiseBenchConfig {
    fn default() -> Self {
        Self {
            gammas: crate::synth::NOISE_GAMMAS.to_vec(),
            seeds: (0..20).collect(),
            mpo: MpoConfig::default(),
            brw_epochs: 1,
            min_flux: 0.1,
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let k = a.len();
    let pa = FluxMatrix::from_vec(1, k, a.to_vec())?;
    let pb = FluxMatrix::from_vec(1, k, b.to_vec())?;
    Ok(mean_cosine(&pa, &pb)?.mean)
}

/// For every seed a balanced ground truth is drawn, and for every γ it is
/// perturbed with orthogonal noise; negative entries of the noisy vector are
/// clipped to zero before MPO and BRW balance it.
pub fn noise_benchmark(g: &DirectedFactorGraph, cfg: &NoiseBenchConfig) -> Result<Vec<NoiseTrial>> {
    let truths: Vec<Result<FluxMatrix>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| generate_balanced_flux(g, 1, seed, &cfg.mpo, cfg.min_flux))
        .collect();
    let truths = truths.into_iter().collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..cfg.seeds.len())
        .flat_map(|i| cfg.gammas.iter().map(move |&gm| (i, gm)))
        .collect();
    let trials: Vec<Result<NoiseTrial>> = jobs
        .par_iter()
        .map(|&(i, gamma)| {
            let seed = cfg.seeds[i];
            let truth = truths[i].row(0);
            let noisy = inject_orthogonal_noise(truth, gamma, seed)?.values;
            let clipped: Vec<f64> = noisy.iter().map(|x| x.max(0.0)).collect();
            let (mpo, _) = run_mpo(g, &clipped, &cfg.mpo)?;
            let brw = brw_balance(g, &clipped, cfg.brw_epochs)?;
            Ok(NoiseTrial {
                gamma,
                seed,
                cos_noisy: cosine(&noisy, truth)?,
                cos_mpo: cosine(&mpo, truth)?,
                cos_brw: cosine(&brw, truth)?,
            })
        })
        .collect();
    trials.into_iter().collect()
}
