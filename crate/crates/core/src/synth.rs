//! Synthetic benchmarks: test graphs, balanced ground-truth flux,
//! observations solved backwards through a non-linear link function, the
//! orthogonal-noise harness and dataset splits.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Direction, DirectedFactorGraph, Edge, FactorNode, Norm, VariableNode};
use crate::matrix::{FluxMatrix, Matrix};
use crate::mpo::{run_mpo, MpoConfig};
use crate::rng::{substream, substream2, TAG_COEFF, TAG_FLUX, TAG_GRAPH, TAG_NOISE, TAG_OBS, TAG_SPLIT};

/// Error levels used by the noise benchmark.
pub const NOISE_GAMMAS: [f64; 8] = [0.1, 0.5, 0.9, 1.3, 1.7, 2.1, 2.5, 2.9];

/// Constant offset added to every entry by [`inject_orthogonal_noise`].
pub const NOISE_EPSILON: f64 = 0.1;

/// Smallest ground-truth flux in exponentiated-link datasets; `ln 2 > 0`
/// keeps every observation row sum positive.
pub const NLF2_MIN_FLUX: f64 = 2.0;

const MAX_FLUX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NlfKind {
    /// `w = a·s² + b·s`
    Nlf1,
    /// `w = exp(a·s² + b·s)`
    Nlf2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlfCoefficients {
    pub a: f64,
    pub b: f64,
}

impl NlfCoefficients {
    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "link coefficients need a > 0 and finite b, got a={} b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

pub fn nlf_forward(kind: NlfKind, coeff: NlfCoefficients, s: f64) -> Result<f64> {
    coeff.validate()?;
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("observation sum must be >= 0, got {s}")));
    }
    let t = coeff.a * s * s + coeff.b * s;
    match kind {
        NlfKind::Nlf1 => Ok(t),
        NlfKind::Nlf2 => {
            if t > f64::MAX.ln() {
                return Err(Error::Overflow(format!("exp({t}) is not representable")));
            }
            Ok(t.exp())
        }
    }
}

/// Positive root `s` of the link function for a target flux `w`.
pub fn nlf_invert(kind: NlfKind, coeff: NlfCoefficients, w: f64) -> Result<f64> {
    coeff.validate()?;
    let t = match kind {
        NlfKind::Nlf1 => {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("flux must be >= 0, got {w}")));
            }
            w
        }
        NlfKind::Nlf2 => {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("flux must be > 0, got {w}")));
            }
            let t = w.ln();
            if t < 0.0 {
                return Err(Error::Domain(format!(
                    "flux {w} is below 1, outside the exponentiated link's range"
                )));
            }
            t
        }
    };
    let disc = coeff.b * coeff.b + 4.0 * coeff.a * t;
    if disc < 0.0 {
        return Err(Error::Domain(format!("negative discriminant {disc}")));
    }
    // 2t / (b + sqrt(disc)) equals (-b + sqrt(disc)) / 2a without the cancellation.
    let denom = coeff.b + disc.sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * t / denom)
}

/// Per-variable observation blocks sharing one sample axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    blocks: Vec<Matrix>,
}

impl ObservationSet {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            for b in &blocks {
                if b.nrows() != first.nrows() {
                    return Err(Error::shape("observation samples", first.nrows(), b.nrows()));
                }
            }
        }
        Ok(Self { blocks })
    }

    pub fn n_variables(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_samples(&self) -> usize {
        self.blocks.first().map_or(0, Matrix::nrows)
    }

    pub fn block(&self, variable: usize) -> &Matrix {
        &self.blocks[variable]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn widths(&self) -> Vec<usize> {
        self.blocks.iter().map(Matrix::ncols).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b.select_rows(indices)).collect(),
        }
    }

    /// Checks widths against the graph's feature lists.
    pub fn check_against(&self, g: &DirectedFactorGraph) -> Result<()> {
        if self.n_variables() != g.n_variables() {
            return Err(Error::shape("observation blocks", g.n_variables(), self.n_variables()));
        }
        for (v, b) in g.variables().iter().zip(&self.blocks) {
            if b.ncols() != v.features.len() {
                return Err(Error::shape("observation width", v.features.len(), b.ncols()));
            }
        }
        Ok(())
    }
}

/// Size and shape of a generated test graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n_factors: usize,
    pub n_variables: usize,
    pub n_cycles: usize,
    pub seed: u64,
    pub min_features: usize,
    pub max_features: usize,
}

impl GraphSpec {
    pub fn new(n_factors: usize, n_variables: usize, n_cycles: usize, seed: u64) -> Self {
        Self {
            n_factors,
            n_variables,
            n_cycles,
            seed,
            min_features: 3,
            max_features: 6,
        }
    }

    pub fn with_features(mut self, min: usize, max: usize) -> Self {
        self.min_features = min;
        self.max_features = max;
        self
    }
}

struct Builder {
    edges: Vec<(usize, usize, bool)>,
    next_var: usize,
}

impl Builder {
    fn variable(&mut self, inputs: &[usize], outputs: &[usize]) {
        let v = self.next_var;
        self.next_var += 1;
        // input factors feed the variable (variable is their child)
        for &f in inputs {
            self.edges.push((f, v, false));
        }
        for &f in outputs {
            self.edges.push((f, v, true));
        }
    }
}

/// Connected graph with a random spanning tree over factors (indices
/// increase along every forward edge), one source, a sink on every tree
/// leaf and one back-edge variable per requested cycle. With
/// `n_cycles == 0` the result is acyclic.
pub fn generate_test_graph(spec: &GraphSpec) -> Result<DirectedFactorGraph> {
    let n = spec.n_factors;
    let k = spec.n_variables;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one factor".into()));
    }
    if spec.n_cycles > 0 && n < 2 {
        return Err(Error::InvalidArgument("cycles need at least two factors".into()));
    }
    if spec.min_features > spec.max_features {
        return Err(Error::InvalidArgument("min_features exceeds max_features".into()));
    }
    let mut rng = substream(spec.seed, TAG_GRAPH, 0);

    let mut tree_parent = vec![usize::MAX; n];
    let mut has_tree_child = vec![false; n];
    for i in 1..n {
        // Half the time extend the previous factor, which keeps leaves few.
        let p = if rng.random::<f64>() < 0.5 {
            i - 1
        } else {
            rng.random_range(0..i)
        };
        tree_parent[i] = p;
        has_tree_child[p] = true;
    }
    let leaves: Vec<usize> = (0..n).filter(|&i| !has_tree_child[i]).collect();
    let required = (n - 1) + 1 + 1 + spec.n_cycles;
    if k < required {
        return Err(Error::InvalidArgument(format!(
            "{k} variables cannot connect {n} factors with {} cycles (need at least {required})",
            spec.n_cycles
        )));
    }

    let mut b = Builder {
        edges: Vec::new(),
        next_var: 0,
    };
    b.variable(&[], &[0]);
    for i in 1..n {
        b.variable(&[tree_parent[i]], &[i]);
    }
    for _ in 0..spec.n_cycles {
        let to = rng.random_range(1..n);
        let mut ancestors = Vec::new();
        let mut cur = to;
        while cur != 0 {
            cur = tree_parent[cur];
            ancestors.push(cur);
        }
        let from = ancestors[rng.random_range(0..ancestors.len())];
        // `to` drains into a variable that feeds its ancestor.
        b.variable(&[to], &[from]);
    }
    // One sink per leaf when the budget allows, otherwise leaves share sinks.
    let n_sinks = leaves.len().min(k - (n - 1) - 1 - spec.n_cycles);
    for s in 0..n_sinks {
        let group: Vec<usize> = leaves.iter().skip(s).step_by(n_sinks).copied().collect();
        b.variable(&group, &[]);
    }
    while b.next_var < k {
        let roll: f64 = rng.random();
        if n < 2 || roll < 0.15 {
            let f = rng.random_range(0..n);
            b.variable(&[], &[f]);
        } else if roll < 0.3 {
            let f = rng.random_range(0..n);
            b.variable(&[f], &[]);
        } else {
            let lo = rng.random_range(0..n - 1);
            let hi = rng.random_range(lo + 1..n);
            let shape: f64 = rng.random();
            if shape < 0.15 && hi - lo >= 2 {
                let mid = rng.random_range(lo + 1..hi);
                b.variable(&[lo, mid], &[hi]);
            } else if shape < 0.3 && hi - lo >= 2 {
                let mid = rng.random_range(lo + 1..hi);
                b.variable(&[lo], &[mid, hi]);
            } else {
                b.variable(&[lo], &[hi]);
            }
        }
    }

    let factors = (0..n)
        .map(|id| FactorNode {
            id,
            name: format!("m{id}"),
        })
        .collect();
    let variables = (0..k)
        .map(|id| {
            let width = rng.random_range(spec.min_features..=spec.max_features);
            VariableNode {
                id,
                name: format!("r{id}"),
                features: (0..width).map(|i| format!("r{id}_g{i}")).collect(),
            }
        })
        .collect();
    let edges = b
        .edges
        .into_iter()
        .map(|(factor, variable, parent)| Edge {
            factor,
            variable,
            direction: if parent {
                Direction::VariableToFactor
            } else {
                Direction::FactorToVariable
            },
            coefficient: 1.0,
        })
        .collect();
    DirectedFactorGraph::new(factors, variables, edges)
}

/// A balanced vector with every entry at least 1, found by projected
/// accelerated gradient descent on `½‖Γw‖²` over `w >= 1`. `None` when the
/// L1 imbalance cannot be brought to `tol`, which happens when balance
/// forces some variable to zero.
pub fn positive_balanced_flux(g: &DirectedFactorGraph, tol: f64) -> Option<Vec<f64>> {
    const MAX_ITERS: usize = 200_000;
    let k = g.n_variables();
    let row_norm = (0..g.n_factors())
        .map(|f| g.factor_links(f).iter().map(|l| l.sign.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let col_norm = (0..k)
        .map(|v| g.variable_links(v).iter().map(|l| l.sign.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / (row_norm * col_norm);
    let objective = |w: &[f64]| -> f64 {
        g.imbalances_unchecked(w).iter().map(|d| d * d).sum::<f64>() * 0.5
    };

    let mut x = vec![1.0; k];
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut last = objective(&x);
    for it in 0..MAX_ITERS {
        let d = g.imbalances_unchecked(&y);
        let mut grad = vec![0.0; k];
        for (f, df) in d.iter().enumerate() {
            for l in g.factor_links(f) {
                grad[l.variable] += df * l.sign;
            }
        }
        let next: Vec<f64> = y
            .iter()
            .zip(&grad)
            .map(|(yi, gi)| (yi - step * gi).max(1.0))
            .collect();
        let value = objective(&next);
        if value > last {
            // Restart the momentum whenever it overshoots.
            momentum = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / t_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + beta * (n - o))
            .collect();
        x = next;
        momentum = t_next;
        last = value;
        if it % 64 == 0 && g.imbalance_loss_unchecked(&x, Norm::L1) <= tol {
            return Some(x);
        }
    }
    (g.imbalance_loss_unchecked(&x, Norm::L1) <= tol).then_some(x)
}

/// `m` balanced rows obtained by running MPO on uniform(0, 10) draws.
///
/// A draw that fails to converge is redrawn, up to a fixed number of
/// attempts. MPO may settle with some entries at zero; when `min_flux > 0`
/// such rows are lifted along [`positive_balanced_flux`] until every entry
/// reaches `min_flux`, then re-balanced with MPO at half of `cfg.alpha`.
/// Rows stay unlifted when the graph admits no strictly positive balance.
pub fn generate_balanced_flux(
    g: &DirectedFactorGraph,
    m: usize,
    seed: u64,
    cfg: &MpoConfig,
    min_flux: f64,
) -> Result<FluxMatrix> {
    cfg.validate()?;
    if !(min_flux >= 0.0 && min_flux.is_finite()) {
        return Err(Error::InvalidArgument(format!("min_flux must be >= 0, got {min_flux}")));
    }
    let k = g.n_variables();
    let lift = if min_flux > 0.0 && m > 0 {
        positive_balanced_flux(g, cfg.alpha * 0.01)
    } else {
        None
    };
    let polish = MpoConfig {
        alpha: cfg.alpha * 0.5,
        ..*cfg
    };
    let rows: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut last_err = None;
            for attempt in 0..MAX_FLUX_ATTEMPTS {
                let mut rng = substream2(seed, TAG_FLUX, j as u64, attempt);
                let w0: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 10.0).collect();
                match run_mpo(g, &w0, cfg) {
                    Ok((w, trace)) if trace.converged => {
                        return match &lift {
                            Some(p) if row_min(&w) < min_flux => lift_row(g, w, p, min_flux, &polish),
                            _ => Ok(w),
                        };
                    }
                    Ok(_) => {}
                    Err(e) => last_err = Some(e),
                }
            }
            Err(last_err.unwrap_or_else(|| Error::Diverged {
                context: format!("balanced flux generation for sample {j}"),
                epoch: cfg.max_epochs,
            }))
        })
        .collect();
    let mut out = FluxMatrix::zeros(m, k);
    for (j, r) in rows.into_iter().enumerate() {
        out.row_mut(j).copy_from_slice(&r?);
    }
    Ok(out)
}

fn lift_row(
    g: &DirectedFactorGraph,
    w: Vec<f64>,
    p: &[f64],
    min_flux: f64,
    polish: &MpoConfig,
) -> Result<Vec<f64>> {
    let t = w
        .iter()
        .zip(p)
        .map(|(x, pi)| (min_flux - x) / pi)
        .fold(0.0, f64::max);
    let lifted: Vec<f64> = w.iter().zip(p).map(|(x, pi)| x + t * pi).collect();
    Ok(run_mpo(g, &lifted, polish)?.0)
}

/// Scales each row whose smallest entry is below [`NLF2_MIN_FLUX`] up to
/// that minimum, which keeps `ln(w)` strictly positive for the exponentiated
/// link. Scaling also multiplies the residual imbalance, so scaled rows are
/// re-polished with MPO at half of `cfg.alpha` and nudged back to the floor.
pub fn rescale_for_nlf2(
    g: &DirectedFactorGraph,
    flux: &mut FluxMatrix,
    cfg: &MpoConfig,
) -> Result<()> {
    let polish = MpoConfig {
        alpha: cfg.alpha * 0.5,
        ..*cfg
    };
    for j in 0..flux.nrows() {
        let min = row_min(flux.row(j));
        if !(min > 0.0) {
            return Err(Error::Domain(format!(
                "row {j} has a non-positive entry; the exponentiated link needs strictly positive flux"
            )));
        }
        if min >= NLF2_MIN_FLUX {
            continue;
        }
        let scaled: Vec<f64> = flux.row(j).iter().map(|x| x / min * NLF2_MIN_FLUX).collect();
        let (mut w, _) = run_mpo(g, &scaled, &polish)?;
        let min = row_min(&w);
        if !(min > 0.0) {
            return Err(Error::Domain(format!("row {j} lost positivity while rescaling")));
        }
        if min < NLF2_MIN_FLUX {
            w.iter_mut().for_each(|x| *x = *x / min * NLF2_MIN_FLUX);
        }
        flux.row_mut(j).copy_from_slice(&w);
    }
    Ok(())
}

fn row_min(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Observations solved backwards from `flux`.
///
/// For variable `k` one coefficient pair is drawn from (0, 10)². For every
/// sample, `n_k` uniform positives are drawn, each zeroed with probability
/// `sparsity` (a fully zeroed row gets one entry back), normalised to sum one and scaled
/// by the link inverse of the flux value, so the block's row sum maps back
/// onto the flux through the link.
pub fn generate_observations(
    g: &DirectedFactorGraph,
    flux: &FluxMatrix,
    kind: NlfKind,
    seed: u64,
    sparsity: f64,
) -> Result<(ObservationSet, Vec<NlfCoefficients>)> {
    if flux.ncols() != g.n_variables() {
        return Err(Error::shape("flux columns", g.n_variables(), flux.ncols()));
    }
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!(
            "sparsity must lie in [0, 1), got {sparsity}"
        )));
    }
    if let Some(v) = g.variables().iter().find(|v| v.features.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "variable {} has no features to observe",
            v.name
        )));
    }
    let coefficients: Vec<NlfCoefficients> = (0..g.n_variables())
        .map(|k| {
            let mut rng = substream(seed, TAG_COEFF, k as u64);
            NlfCoefficients {
                a: open_unit(&mut rng) * 10.0,
                b: open_unit(&mut rng) * 10.0,
            }
        })
        .collect();

    let m = flux.nrows();
    let blocks: Vec<Result<Matrix>> = g
        .variables()
        .par_iter()
        .map(|var| {
            let k = var.id;
            let width = var.features.len();
            let mut block = Matrix::zeros(m, width);
            for j in 0..m {
                let s = nlf_invert(kind, coefficients[k], flux.get(j, k))?;
                let mut rng = substream2(seed, TAG_OBS, k as u64, j as u64);
                let values: Vec<f64> = (0..width).map(|_| open_unit(&mut rng)).collect();
                let mut raw: Vec<f64> = values
                    .iter()
                    .map(|&x| if rng.random::<f64>() < sparsity { 0.0 } else { x })
                    .collect();
                if raw.iter().all(|&x| x == 0.0) {
                    let keep = rng.random_range(0..width);
                    raw[keep] = values[keep];
                }
                let total: f64 = raw.iter().sum();
                let row = block.row_mut(j);
                for (dst, x) in row.iter_mut().zip(&raw) {
                    *dst = x / total * s;
                }
            }
            Ok(block)
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((ObservationSet::new(blocks)?, coefficients))
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

/// Noisy copy of a flux vector and the directions used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyFlux {
    pub values: Vec<f64>,
    /// Orthonormal directions, each orthogonal to the input.
    pub directions: Vec<Vec<f64>>,
    pub amplitudes: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `w/‖w‖ + γ·Σ a_i·v_i + ε`, with up to three orthonormal `v_i ⟂ w`,
/// `a_i ~ U(0, 1)` and `ε = 0.1` on every entry. Fewer directions are used
/// when the dimension does not allow three.
pub fn inject_orthogonal_noise(w: &[f64], gamma: f64, seed: u64) -> Result<NoisyFlux> {
    let len = norm(w);
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidArgument("cannot add orthogonal noise to a zero vector".into()));
    }
    let unit: Vec<f64> = w.iter().map(|x| x / len).collect();
    let count = 3.min(w.len().saturating_sub(1));
    let mut rng = substream(seed, TAG_NOISE, 0);
    let mut basis = vec![unit.clone()];
    let mut directions = Vec::with_capacity(count);
    while directions.len() < count {
        let mut v: Vec<f64> = (0..w.len()).map(|_| rng.sample(StandardNormal)).collect();
        // Two Gram–Schmidt passes for orthogonality to working precision.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&v, q);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let vn = norm(&v);
        if vn < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vn);
        basis.push(v.clone());
        directions.push(v);
    }
    let amplitudes: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
    let mut values: Vec<f64> = unit.iter().map(|u| u + NOISE_EPSILON).collect();
    for (v, a) in directions.iter().zip(&amplitudes) {
        for (x, y) in values.iter_mut().zip(v) {
            *x += gamma * a * y;
        }
    }
    Ok(NoisyFlux {
        values,
        directions,
        amplitudes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..m` cut into train/validation/test by `fractions`.
pub fn split_indices(m: usize, fractions: [f64; 3], seed: u64) -> Result<Split> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples to split, got {m}")));
    }
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be non-negative and sum to 1, got {fractions:?}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut substream(seed, TAG_SPLIT, 0));
    let mut sizes = [
        (fractions[0] * m as f64 + 1e-9).floor() as usize,
        (fractions[1] * m as f64 + 1e-9).floor() as usize,
        0,
    ];
    sizes[2] = m - sizes[0] - sizes[1];
    // Every requested part gets at least one sample.
    for i in 0..3 {
        if fractions[i] > 0.0 && sizes[i] == 0 {
            let donor = (0..3).max_by_key(|&d| sizes[d]).unwrap();
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }
    let test = order.split_off(sizes[0] + sizes[1]);
    let val = order.split_off(sizes[0]);
    Ok(Split {
        train: order,
        val,
        test,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub samples: usize,
    pub kind: NlfKind,
    pub seed: u64,
    pub sparsity: f64,
    pub fractions: [f64; 3],
    pub mpo: MpoConfig,
    /// Floor for ground-truth entries; see [`generate_balanced_flux`].
    pub min_flux: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            samples: 500,
            kind: NlfKind::Nlf1,
            seed: 42,
            sparsity: 0.2,
            fractions: [0.6, 0.2, 0.2],
            mpo: MpoConfig::default(),
            min_flux: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub graph: DirectedFactorGraph,
    pub flux_truth: FluxMatrix,
    pub observations: ObservationSet,
    pub coefficients: Vec<NlfCoefficients>,
    pub kind: NlfKind,
    pub seed: u64,
    pub sparsity: f64,
    pub split: Split,
}

impl SyntheticDataset {
    pub fn n_samples(&self) -> usize {
        self.flux_truth.nrows()
    }

    /// Flux and observations restricted to `indices`.
    pub fn subset(&self, indices: &[usize]) -> (FluxMatrix, ObservationSet) {
        (
            self.flux_truth.select_rows(indices),
            self.observations.select_rows(indices),
        )
    }

    /// Largest L1 imbalance over ground-truth rows.
    pub fn max_truth_imbalance(&self) -> f64 {
        self.flux_truth
            .rows_iter()
            .map(|r| self.graph.imbalance_loss_unchecked(r, Norm::L1))
            .fold(0.0, f64::max)
    }
}

/// Full generator pipeline: balanced flux, link-function observations and a
/// split. Exponentiated-link datasets store the rescaled flux as truth.
pub fn simulate_dataset(g: &DirectedFactorGraph, opts: &DatasetOptions) -> Result<SyntheticDataset> {
    let mut flux = generate_balanced_flux(g, opts.samples, opts.seed, &opts.mpo, opts.min_flux)?;
    if opts.kind == NlfKind::Nlf2 {
        rescale_for_nlf2(g, &mut flux, &opts.mpo)?;
    }
    let (observations, coefficients) =
        generate_observations(g, &flux, opts.kind, opts.seed, opts.sparsity)?;
    let split = split_indices(opts.samples, opts.fractions, opts.seed)?;
    Ok(SyntheticDataset {
        graph: g.clone(),
        flux_truth: flux,
        observations,
        coefficients,
        kind: opts.kind,
        seed: opts.seed,
        sparsity: opts.sparsity,
        split,
    })
}
