//! Constrained training of the network ensemble: squared imbalance
//! (coherency), parsimony, an anchor towards MPO-balanced projections of the
//! current predictions and a guard against the all-zero solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedFactorGraph, Norm};
use crate::matrix::FluxMatrix;
use crate::metrics::mean_cosine;
use crate::mpo::{run_mpo_batch, MpoConfig};
use crate::nn::{
    adam_step, backward, forward, forward_pass, init_ensemble, logistic, AdamConfig, ArchConfig,
    Checkpoint, Ensemble, GradientSet, Mode, OptimizerState,
};
use crate::synth::ObservationSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Stop once the mean per-sample L1 imbalance on the training split is
    /// at or below this value.
    pub imbalance_threshold: f64,
    pub mpo_every: usize,
    pub mpo: MpoConfig,
    pub lr: f64,
    pub lambda_l2: f64,
    pub lambda_gate: f64,
    /// Zero disables MPO projections altogether.
    pub lambda_anchor: f64,
    pub lambda_zero_guard: f64,
    pub zero_guard_tau: f64,
    pub patience: usize,
    pub seed: u64,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            imbalance_threshold: 1e-3,
            mpo_every: 10,
            mpo: MpoConfig::default(),
            lr: 0.05,
            lambda_l2: 1e-4,
            lambda_gate: 1e-3,
            lambda_anchor: 1.0,
            lambda_zero_guard: 0.1,
            zero_guard_tau: 0.1,
            patience: 30,
            seed: 42,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mpo_every == 0 {
            return Err(Error::InvalidArgument("mpo_every must be at least 1".into()));
        }
        let lambdas = [
            self.lambda_l2,
            self.lambda_gate,
            self.lambda_anchor,
            self.lambda_zero_guard,
            self.zero_guard_tau,
        ];
        if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(
                "loss weights and the zero-guard threshold must be finite and >= 0".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(self.imbalance_threshold >= 0.0) {
            return Err(Error::InvalidArgument("imbalance threshold must be >= 0".into()));
        }
        self.mpo.validate()?;
        self.arch.validate()
    }
}

/// `Σ_j Σ_i d_ij²` over factors `i` and samples `j`, and its gradient with
/// respect to every flux entry.
pub fn coherency_loss_and_grad(
    g: &DirectedFactorGraph,
    flux: &FluxMatrix,
) -> Result<(f64, FluxMatrix)> {
    if flux.ncols() != g.n_variables() {
        return Err(Error::shape("flux columns", g.n_variables(), flux.ncols()));
    }
    let k = g.n_variables();
    let rows: Vec<(f64, Vec<f64>)> = flux
        .rows_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|row| {
            let mut grad = vec![0.0; k];
            let mut loss = 0.0;
            for f in 0..g.n_factors() {
                let links = g.factor_links(f);
                let d: f64 = links.iter().map(|l| l.sign * row[l.variable]).sum();
                loss += d * d;
                for l in links {
                    grad[l.variable] += 2.0 * d * l.sign;
                }
            }
            (loss, grad)
        })
        .collect();
    let mut total = 0.0;
    let mut grad = FluxMatrix::zeros(flux.nrows(), k);
    for (j, (l, gr)) in rows.into_iter().enumerate() {
        total += l;
        grad.row_mut(j).copy_from_slice(&gr);
    }
    Ok((total, grad))
}

/// `lambda_l2·Σ w²` over weight matrices plus `lambda_gate·Σ σ(gate)`.
pub fn parsimony_loss(ens: &Ensemble, lambda_l2: f64, lambda_gate: f64) -> f64 {
    let mut l2 = 0.0;
    let mut gates = 0.0;
    for net in &ens.nets {
        for r in net.layout().weight_ranges() {
            l2 += net.params[r].iter().map(|w| w * w).sum::<f64>();
        }
        gates += net.gate_activity().iter().sum::<f64>();
    }
    lambda_l2 * l2 + lambda_gate * gates
}

/// Gradient of [`parsimony_loss`], accumulated into `grads`.
pub fn add_parsimony_grad(ens: &Ensemble, lambda_l2: f64, lambda_gate: f64, grads: &mut GradientSet) {
    for (net, g) in ens.nets.iter().zip(grads.iter_mut()) {
        let lay = net.layout();
        for r in lay.weight_ranges() {
            for i in r {
                g[i] += 2.0 * lambda_l2 * net.params[i];
            }
        }
        for l in 0..lay.n_hidden() {
            let i = lay.gate_index(l);
            let s = logistic(net.params[i]);
            g[i] += lambda_gate * s * (1.0 - s);
        }
    }
}

/// Mean squared error against balanced targets, with gradient
/// `2(pred − target)/count`.
pub fn mpo_anchor_loss(pred: &FluxMatrix, target: &FluxMatrix) -> Result<(f64, FluxMatrix)> {
    target.check_shape("anchor targets", pred.nrows(), pred.ncols())?;
    let count = (pred.nrows() * pred.ncols()).max(1) as f64;
    let mut grad = FluxMatrix::zeros(pred.nrows(), pred.ncols());
    let mut loss = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / count;
    }
    Ok((loss / count, grad))
}

/// `λ·Σ_j max(0, τ − mean_k pred_jk)²` and its gradient.
pub fn zero_guard_loss(pred: &FluxMatrix, lambda: f64, tau: f64) -> (f64, FluxMatrix) {
    let k = pred.ncols().max(1) as f64;
    let mut grad = FluxMatrix::zeros(pred.nrows(), pred.ncols());
    let mut loss = 0.0;
    for j in 0..pred.nrows() {
        let mean = pred.row(j).iter().sum::<f64>() / k;
        let gap = tau - mean;
        if gap > 0.0 {
            loss += lambda * gap * gap;
            let d = -2.0 * lambda * gap / k;
            grad.row_mut(j).iter_mut().for_each(|x| *x = d);
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub coherency: f64,
    pub parsimony: f64,
    pub anchor: f64,
    pub zero_guard: f64,
    pub total: f64,
}

/// Total training loss on one batch and its exact parameter gradient.
pub fn loss_and_gradient(
    g: &DirectedFactorGraph,
    ens: &Ensemble,
    obs: &ObservationSet,
    cfg: &TrainConfig,
    anchor_targets: Option<&FluxMatrix>,
    mode: Mode,
) -> Result<(LossParts, GradientSet, FluxMatrix)> {
    let pass = forward_pass(ens, obs, mode)?;
    let (coherency, mut d_flux) = coherency_loss_and_grad(g, &pass.flux)?;
    let mut parts = LossParts {
        coherency,
        parsimony: parsimony_loss(ens, cfg.lambda_l2, cfg.lambda_gate),
        ..LossParts::default()
    };
    if let Some(t) = anchor_targets {
        let (a, da) = mpo_anchor_loss(&pass.flux, t)?;
        parts.anchor = a;
        for (x, y) in d_flux.as_mut_slice().iter_mut().zip(da.as_slice()) {
            *x += cfg.lambda_anchor * y;
        }
    }
    let (zg, dz) = zero_guard_loss(&pass.flux, cfg.lambda_zero_guard, cfg.zero_guard_tau);
    parts.zero_guard = zg;
    for (x, y) in d_flux.as_mut_slice().iter_mut().zip(dz.as_slice()) {
        *x += y;
    }
    parts.total = parts.coherency + parts.parsimony + cfg.lambda_anchor * parts.anchor + parts.zero_guard;
    let mut grads = backward(ens, &pass, &d_flux)?;
    add_parsimony_grad(ens, cfg.lambda_l2, cfg.lambda_gate, &mut grads);
    Ok((parts, grads, pass.flux))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_coherency: f64,
    pub train_coherency_per_sample: f64,
    pub val_coherency: Option<f64>,
    pub val_coherency_per_sample: Option<f64>,
    pub parsimony: f64,
    pub anchor: f64,
    pub zero_guard: f64,
    pub total: f64,
    pub train_l1_mean: f64,
    pub mean_pred_norm: f64,
    pub val_cosine: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ImbalanceThreshold,
    MaxEpochs,
    EarlyStopping,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Ensemble at the best monitored epoch.
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub stop: StopReason,
    /// Eval-mode predictions of the returned ensemble on the training split.
    pub train_predictions: FluxMatrix,
}

/// Splits handed to [`train`]. Without a validation split the training
/// coherency is monitored instead.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a ObservationSet,
    pub val: Option<&'a ObservationSet>,
    /// Ground truth on the validation split, used for reporting only.
    pub val_truth: Option<&'a FluxMatrix>,
}

fn mean_l1(g: &DirectedFactorGraph, flux: &FluxMatrix) -> f64 {
    if flux.nrows() == 0 {
        return 0.0;
    }
    flux.rows_iter()
        .map(|r| g.imbalance_loss_unchecked(r, Norm::L1))
        .sum::<f64>()
        / flux.nrows() as f64
}

fn mean_norm(flux: &FluxMatrix) -> f64 {
    if flux.nrows() == 0 {
        return 0.0;
    }
    flux.rows_iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .sum::<f64>()
        / flux.nrows() as f64
}

pub fn train(g: &DirectedFactorGraph, data: TrainData<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.train.check_against(g)?;
    if data.train.n_samples() == 0 {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    if let Some(v) = data.val {
        v.check_against(g)?;
    }
    if let (Some(v), Some(t)) = (data.val, data.val_truth) {
        t.check_shape("validation truth", v.n_samples(), g.n_variables())?;
    }

    let mut ens = init_ensemble(g, &cfg.arch, cfg.seed)?;
    let mut opt = OptimizerState::new(
        &ens,
        AdamConfig {
            lr: cfg.lr,
            l2: 0.0,
            ..AdamConfig::default()
        },
    );
    let m = data.train.n_samples() as f64;
    let mut targets: Option<FluxMatrix> = None;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Ensemble, FluxMatrix)> = None;
    let mut since_best = 0usize;
    let mut stop = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        if cfg.lambda_anchor > 0.0 && epoch > 0 && epoch % cfg.mpo_every == 0 {
            let current = forward(&ens, data.train, Mode::Eval)?;
            targets = Some(run_mpo_batch(g, &current, &cfg.mpo)?);
        }
        let mode = Mode::Train {
            seed: cfg.seed,
            step: epoch as u64,
        };
        let step = loss_and_gradient(g, &ens, data.train, cfg, targets.as_ref(), mode);
        let (parts, grads, _) = match step {
            Ok(s) if s.0.total.is_finite() => s,
            Ok(_) | Err(Error::Diverged { .. }) => {
                stop = StopReason::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let before = ens.clone();
        adam_step(&mut ens, &grads, &mut opt)?;
        if !ens.all_finite() {
            ens = before;
            stop = StopReason::Diverged;
            break;
        }

        let train_pred = match forward(&ens, data.train, Mode::Eval) {
            Ok(p) => p,
            Err(Error::Diverged { .. }) => {
                stop = StopReason::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let (train_coh, _) = coherency_loss_and_grad(g, &train_pred)?;
        let train_l1 = mean_l1(g, &train_pred);
        let (val_coh, val_cos) = match data.val {
            Some(v) => {
                let pred = forward(&ens, v, Mode::Eval)?;
                let (c, _) = coherency_loss_and_grad(g, &pred)?;
                let cos = match data.val_truth {
                    Some(t) => Some(mean_cosine(&pred, t)?.mean),
                    None => None,
                };
                (Some(c), cos)
            }
            None => (None, None),
        };
        let m_val = data.val.map_or(1.0, |v| v.n_samples().max(1) as f64);
        history.records.push(EpochRecord {
            epoch,
            train_coherency: train_coh,
            train_coherency_per_sample: train_coh / m,
            val_coherency: val_coh,
            val_coherency_per_sample: val_coh.map(|c| c / m_val),
            parsimony: parts.parsimony,
            anchor: parts.anchor,
            zero_guard: parts.zero_guard,
            total: parts.total,
            train_l1_mean: train_l1,
            mean_pred_norm: mean_norm(&train_pred),
            val_cosine: val_cos,
        });

        let monitor = val_coh.unwrap_or(train_coh);
        if !monitor.is_finite() {
            stop = StopReason::Diverged;
            break;
        }
        let improved = best.as_ref().is_none_or(|(b, ..)| monitor < *b);
        if improved {
            best = Some((monitor, epoch, ens.clone(), train_pred));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if train_l1 <= cfg.imbalance_threshold {
            stop = StopReason::ImbalanceThreshold;
            break;
        }
        if since_best >= cfg.patience {
            stop = StopReason::EarlyStopping;
            break;
        }
    }

    let (best_epoch, ensemble, train_predictions) = match best {
        Some((_, e, ens, pred)) => (e, ens, pred),
        None => {
            let pred = forward(&ens, data.train, Mode::Eval)?;
            (0, ens, pred)
        }
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            ensemble,
            optimizer: Some(opt),
            epoch: best_epoch,
            rng_step: best_epoch as u64 + 1,
        },
        history,
        best_epoch,
        stop,
        train_predictions,
    })
}

/// Eval-mode flux predictions.
pub fn predict(ens: &Ensemble, obs: &ObservationSet) -> Result<FluxMatrix> {
    forward(ens, obs, Mode::Eval)
}
