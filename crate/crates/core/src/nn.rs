//! One small feedforward regressor per variable node.
//!
//! Hidden layer: `h = σ(g)·φ(W·a + b)`, followed by inverted dropout in
//! training mode. Head: `softplus(w·a + c)`. Parameters of a net live in one
//! flat vector; see [`NetLayout`].

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedFactorGraph;
use crate::matrix::{FluxMatrix, Matrix};
use crate::rng::{substream, substream2, TAG_DROPOUT, TAG_INIT};
use crate::synth::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Tanhshrink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchVariant {
    /// Hidden widths are multiples of the input width.
    Main,
    /// Single hidden layer of 16 tanhshrink units.
    Appendix,
}

pub const APPENDIX_WIDTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub hidden_multipliers: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
    pub variant: ArchVariant,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            hidden_multipliers: vec![2, 4, 8],
            activation: Activation::LeakyRelu,
            dropout_rate: 0.5,
            leaky_slope: 0.01,
            variant: ArchVariant::Main,
        }
    }
}

impl ArchConfig {
    pub fn appendix() -> Self {
        Self {
            activation: Activation::Tanhshrink,
            variant: ArchVariant::Appendix,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == ArchVariant::Main
            && (self.hidden_multipliers.is_empty() || self.hidden_multipliers.contains(&0))
        {
            return Err(Error::InvalidArgument(
                "hidden multipliers must be a non-empty list of positive integers".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::InvalidArgument("leaky slope must be finite".into()));
        }
        Ok(())
    }

    pub fn hidden_sizes(&self, input: usize) -> Vec<usize> {
        match self.variant {
            ArchVariant::Main => self.hidden_multipliers.iter().map(|m| m * input).collect(),
            ArchVariant::Appendix => vec![APPENDIX_WIDTH],
        }
    }

    fn effective_activation(&self) -> Activation {
        match self.variant {
            ArchVariant::Main => self.activation,
            ArchVariant::Appendix => Activation::Tanhshrink,
        }
    }
}

/// Offsets into a net's flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetLayout {
    pub input: usize,
    pub hidden: Vec<usize>,
    weight: Vec<usize>,
    bias: Vec<usize>,
    head_weight: usize,
    head_bias: usize,
    gates: usize,
    len: usize,
}

impl NetLayout {
    pub fn new(input: usize, hidden: Vec<usize>) -> Self {
        let mut off = 0;
        let mut weight = Vec::new();
        let mut bias = Vec::new();
        let mut fan_in = input;
        for &h in &hidden {
            weight.push(off);
            off += h * fan_in;
            bias.push(off);
            off += h;
            fan_in = h;
        }
        let head_weight = off;
        off += fan_in;
        let head_bias = off;
        off += 1;
        let gates = off;
        off += hidden.len();
        Self {
            input,
            hidden,
            weight,
            bias,
            head_weight,
            head_bias,
            gates,
            len: off,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    fn fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            self.hidden[layer - 1]
        }
    }

    fn last_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input)
    }

    /// Index of the gate parameter of hidden layer `layer`.
    pub fn gate_index(&self, layer: usize) -> usize {
        self.gates + layer
    }

    /// True for entries of weight matrices (hidden and head), false for
    /// biases and gates.
    pub fn is_weight(&self, idx: usize) -> bool {
        (0..self.hidden.len()).any(|l| idx >= self.weight[l] && idx < self.bias[l])
            || (idx >= self.head_weight && idx < self.head_bias)
    }

    /// Index ranges holding weights.
    pub fn weight_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out: Vec<_> = (0..self.hidden.len())
            .map(|l| self.weight[l]..self.bias[l])
            .collect();
        out.push(self.head_weight..self.head_bias);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableNet {
    layout: NetLayout,
    pub params: Vec<f64>,
}

impl VariableNet {
    pub fn layout(&self) -> &NetLayout {
        &self.layout
    }

    pub fn input_width(&self) -> usize {
        self.layout.input
    }

    pub fn gate_activity(&self) -> Vec<f64> {
        (0..self.layout.n_hidden())
            .map(|l| logistic(self.params[self.layout.gate_index(l)]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub arch: ArchConfig,
    pub nets: Vec<VariableNet>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout masks drawn from `(seed, net, step)`.
    Train { seed: u64, step: u64 },
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn activate(kind: Activation, slope: f64, z: f64) -> f64 {
    match kind {
        Activation::LeakyRelu => {
            if z > 0.0 {
                z
            } else {
                slope * z
            }
        }
        Activation::Tanhshrink => z - z.tanh(),
    }
}

fn activate_grad(kind: Activation, slope: f64, z: f64) -> f64 {
    match kind {
        Activation::LeakyRelu => {
            if z > 0.0 {
                1.0
            } else {
                slope
            }
        }
        Activation::Tanhshrink => {
            let t = z.tanh();
            t * t
        }
    }
}

/// Initialises one net per variable, weights and biases uniform in
/// `±1/√fan_in`, gates at zero.
pub fn init_ensemble(g: &DirectedFactorGraph, arch: &ArchConfig, seed: u64) -> Result<Ensemble> {
    arch.validate()?;
    let widths: Vec<usize> = g.variables().iter().map(|v| v.features.len()).collect();
    if let Some(v) = g.variables().iter().find(|v| v.features.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "variable {} has no features",
            v.name
        )));
    }
    Ok(init_with_widths(&widths, arch, seed))
}

pub(crate) fn init_with_widths(widths: &[usize], arch: &ArchConfig, seed: u64) -> Ensemble {
    let nets = widths
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let layout = NetLayout::new(n, arch.hidden_sizes(n));
            let mut rng = substream(seed, TAG_INIT, k as u64);
            let mut params = vec![0.0; layout.len()];
            for l in 0..layout.n_hidden() {
                let bound = 1.0 / (layout.fan_in(l) as f64).sqrt();
                for p in &mut params[layout.weight[l]..layout.bias[l] + layout.hidden[l]] {
                    *p = rng.random_range(-bound..bound);
                }
            }
            let bound = 1.0 / (layout.last_width() as f64).sqrt();
            for p in &mut params[layout.head_weight..=layout.head_bias] {
                *p = rng.random_range(-bound..bound);
            }
            VariableNet { layout, params }
        })
        .collect();
    Ensemble {
        arch: arch.clone(),
        nets,
        seed,
    }
}

/// Intermediate values of one net over a batch.
#[derive(Debug, Clone)]
pub struct NetCache {
    /// Layer inputs `a_0 .. a_L`, each `m × width`, row-major.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations per hidden layer.
    pre: Vec<Vec<f64>>,
    /// Dropout multipliers per hidden layer (0 or 1/(1−p)); empty in eval.
    masks: Vec<Vec<f64>>,
    head_pre: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub flux: FluxMatrix,
    caches: Vec<NetCache>,
}

/// Per-net parameter gradients, shaped like [`VariableNet::params`].
pub type GradientSet = Vec<Vec<f64>>;

impl Ensemble {
    pub fn n_nets(&self) -> usize {
        self.nets.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.nets.iter().map(VariableNet::input_width).collect()
    }

    pub fn n_params(&self) -> usize {
        self.nets.iter().map(|n| n.params.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.nets.iter().all(|n| n.params.iter().all(|p| p.is_finite()))
    }

    pub fn check_observations(&self, obs: &ObservationSet) -> Result<()> {
        if obs.n_variables() != self.nets.len() {
            return Err(Error::shape("observation blocks", self.nets.len(), obs.n_variables()));
        }
        for (net, b) in self.nets.iter().zip(obs.blocks()) {
            if b.ncols() != net.input_width() {
                return Err(Error::shape("observation width", net.input_width(), b.ncols()));
            }
        }
        Ok(())
    }

    pub fn zero_gradients(&self) -> GradientSet {
        self.nets.iter().map(|n| vec![0.0; n.params.len()]).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn net_forward(
    net: &VariableNet,
    arch: &ArchConfig,
    x: &Matrix,
    mode: Mode,
    index: usize,
) -> (Vec<f64>, NetCache) {
    let lay = &net.layout;
    let p = &net.params;
    let m = x.nrows();
    let act = arch.effective_activation();
    let mut rng = match mode {
        Mode::Train { seed, step } => Some(substream2(seed, TAG_DROPOUT, index as u64, step)),
        Mode::Eval => None,
    };
    let keep_scale = 1.0 / (1.0 - arch.dropout_rate);

    let mut inputs = vec![x.as_slice().to_vec()];
    let mut pre = Vec::with_capacity(lay.n_hidden());
    let mut masks = Vec::new();
    for l in 0..lay.n_hidden() {
        let (fan, h) = (lay.fan_in(l), lay.hidden[l]);
        let w = &p[lay.weight[l]..lay.bias[l]];
        let b = &p[lay.bias[l]..lay.bias[l] + h];
        let gate = logistic(p[lay.gate_index(l)]);
        let mask: Vec<f64> = match rng.as_mut() {
            Some(r) if arch.dropout_rate > 0.0 => (0..m * h)
                .map(|_| {
                    if r.random::<f64>() >= arch.dropout_rate {
                        keep_scale
                    } else {
                        0.0
                    }
                })
                .collect(),
            Some(_) => vec![1.0; m * h],
            None => Vec::new(),
        };
        let a = &inputs[l];
        let mut z = vec![0.0; m * h];
        let mut out = vec![0.0; m * h];
        for j in 0..m {
            let aj = &a[j * fan..(j + 1) * fan];
            let zj = &mut z[j * h..(j + 1) * h];
            let oj = &mut out[j * h..(j + 1) * h];
            for i in 0..h {
                let mk = if mask.is_empty() { 1.0 } else { mask[j * h + i] };
                if mk == 0.0 {
                    // Dropped units need neither output nor pre-activation.
                    continue;
                }
                let zi = b[i] + dot(&w[i * fan..(i + 1) * fan], aj);
                zj[i] = zi;
                oj[i] = gate * activate(act, arch.leaky_slope, zi) * mk;
            }
        }
        pre.push(z);
        masks.push(mask);
        inputs.push(out);
    }
    let fan = lay.last_width();
    let hw = &p[lay.head_weight..lay.head_bias];
    let hb = p[lay.head_bias];
    let a = inputs.last().unwrap();
    let head_pre: Vec<f64> = a.chunks_exact(fan).map(|aj| hb + dot(hw, aj)).collect();
    let y = head_pre.iter().map(|&z| softplus(z)).collect();
    (
        y,
        NetCache {
            inputs,
            pre,
            masks,
            head_pre,
        },
    )
}

fn net_backward(net: &VariableNet, arch: &ArchConfig, cache: &NetCache, dy: &[f64]) -> Vec<f64> {
    let lay = &net.layout;
    let p = &net.params;
    let m = dy.len();
    let act = arch.effective_activation();
    let mut grad = vec![0.0; lay.len()];

    let fan = lay.last_width();
    let mut da = vec![0.0; m * fan];
    {
        let a = cache.inputs.last().unwrap();
        let hw = &p[lay.head_weight..lay.head_bias];
        for j in 0..m {
            let dz = dy[j] * logistic(cache.head_pre[j]);
            if dz == 0.0 {
                continue;
            }
            grad[lay.head_bias] += dz;
            axpy(dz, &a[j * fan..(j + 1) * fan], &mut grad[lay.head_weight..lay.head_bias]);
            axpy(dz, hw, &mut da[j * fan..(j + 1) * fan]);
        }
    }
    for l in (0..lay.n_hidden()).rev() {
        let (fan, h) = (lay.fan_in(l), lay.hidden[l]);
        let gate = logistic(p[lay.gate_index(l)]);
        let z = &cache.pre[l];
        let a = &cache.inputs[l];
        let mask = &cache.masks[l];
        let w = &p[lay.weight[l]..lay.bias[l]];
        let mut da_prev = vec![0.0; m * fan];
        let mut dgate = 0.0;
        let (gw, rest) = grad[lay.weight[l]..].split_at_mut(lay.bias[l] - lay.weight[l]);
        let gb = &mut rest[..h];
        for j in 0..m {
            let aj = &a[j * fan..(j + 1) * fan];
            let dj = &mut da_prev[j * fan..(j + 1) * fan];
            for i in 0..h {
                let idx = j * h + i;
                let mut dh = da[idx];
                if !mask.is_empty() {
                    dh *= mask[idx];
                }
                if dh == 0.0 {
                    continue;
                }
                let zi = z[idx];
                dgate += dh * activate(act, arch.leaky_slope, zi);
                let dz = dh * gate * activate_grad(act, arch.leaky_slope, zi);
                gb[i] += dz;
                axpy(dz, aj, &mut gw[i * fan..(i + 1) * fan]);
                axpy(dz, &w[i * fan..(i + 1) * fan], dj);
            }
        }
        grad[lay.gate_index(l)] += dgate * gate * (1.0 - gate);
        da = da_prev;
    }
    grad
}

/// Forward pass keeping the intermediates needed by [`backward`].
pub fn forward_pass(ens: &Ensemble, obs: &ObservationSet, mode: Mode) -> Result<ForwardPass> {
    ens.check_observations(obs)?;
    let m = obs.n_samples();
    let outs: Vec<(Vec<f64>, NetCache)> = ens
        .nets
        .par_iter()
        .enumerate()
        .map(|(k, net)| net_forward(net, &ens.arch, obs.block(k), mode, k))
        .collect();
    let mut flux = FluxMatrix::zeros(m, ens.nets.len());
    let mut caches = Vec::with_capacity(outs.len());
    for (k, (y, cache)) in outs.into_iter().enumerate() {
        for (j, v) in y.into_iter().enumerate() {
            flux.set(j, k, v);
        }
        caches.push(cache);
    }
    if !flux.all_finite() {
        return Err(Error::Diverged {
            context: "network forward pass produced non-finite flux".into(),
            epoch: 0,
        });
    }
    Ok(ForwardPass { flux, caches })
}

/// Flux predictions, `m × K`.
pub fn forward(ens: &Ensemble, obs: &ObservationSet, mode: Mode) -> Result<FluxMatrix> {
    Ok(forward_pass(ens, obs, mode)?.flux)
}

/// Exact parameter gradients of a loss whose derivative with respect to the
/// predicted flux is `d_flux`.
pub fn backward(ens: &Ensemble, pass: &ForwardPass, d_flux: &FluxMatrix) -> Result<GradientSet> {
    if pass.caches.len() != ens.nets.len() {
        return Err(Error::shape("forward caches", ens.nets.len(), pass.caches.len()));
    }
    d_flux.check_shape("flux gradient", pass.flux.nrows(), pass.flux.ncols())?;
    let grads = ens
        .nets
        .par_iter()
        .zip(&pass.caches)
        .enumerate()
        .map(|(k, (net, cache))| {
            let dy = d_flux.column(k);
            net_backward(net, &ens.arch, cache, &dy)
        })
        .collect();
    Ok(grads)
}

/// Logistic gate values, net by net and layer by layer.
pub fn gate_activity(ens: &Ensemble) -> Vec<f64> {
    ens.nets.iter().flat_map(VariableNet::gate_activity).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            l2: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: GradientSet,
    pub second: GradientSet,
}

impl OptimizerState {
    pub fn new(ens: &Ensemble, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: ens.zero_gradients(),
            second: ens.zero_gradients(),
        }
    }
}

/// Adam with coupled L2 (`grad + l2·θ`) and bias-corrected moments.
pub fn adam_step(ens: &mut Ensemble, grads: &GradientSet, opt: &mut OptimizerState) -> Result<()> {
    if grads.len() != ens.nets.len() || opt.first.len() != ens.nets.len() {
        return Err(Error::shape("gradient nets", ens.nets.len(), grads.len()));
    }
    for ((net, g), m) in ens.nets.iter().zip(grads).zip(&opt.first) {
        if g.len() != net.params.len() || m.len() != net.params.len() {
            return Err(Error::shape("gradient length", net.params.len(), g.len()));
        }
    }
    opt.step += 1;
    let c = opt.config.clone();
    let bc1 = 1.0 - c.beta1.powi(opt.step as i32);
    let bc2 = 1.0 - c.beta2.powi(opt.step as i32);
    ens.nets
        .par_iter_mut()
        .zip(grads.par_iter())
        .zip(opt.first.par_iter_mut().zip(opt.second.par_iter_mut()))
        .for_each(|((net, g), (m1, m2))| {
            for i in 0..net.params.len() {
                let gi = g[i] + c.l2 * net.params[i];
                m1[i] = c.beta1 * m1[i] + (1.0 - c.beta1) * gi;
                m2[i] = c.beta2 * m2[i] + (1.0 - c.beta2) * gi * gi;
                let mh = m1[i] / bc1;
                let vh = m2[i] / bc2;
                net.params[i] -= c.lr * mh / (vh.sqrt() + c.eps);
            }
        });
    Ok(())
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"FLUXMPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    arch: ArchConfig,
    widths: Vec<usize>,
    seed: u64,
    epoch: usize,
    optimizer: Option<(AdamConfig, u64)>,
    /// Dropout masks are drawn from (seed, net, step); the step is the only
    /// generator state.
    rng_step: u64,
}

/// Ensemble plus optionally the optimizer state, as written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub ensemble: Ensemble,
    pub optimizer: Option<OptimizerState>,
    pub epoch: usize,
    pub rng_step: u64,
}

impl Checkpoint {
    /// Layout: magic, little-endian `u32` version, `u64` header length, JSON
    /// header, then parameters (and Adam moments) as little-endian `f64`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = CheckpointHeader {
            arch: self.ensemble.arch.clone(),
            widths: self.ensemble.widths(),
            seed: self.ensemble.seed,
            epoch: self.epoch,
            optimizer: self.optimizer.as_ref().map(|o| (o.config.clone(), o.step)),
            rng_step: self.rng_step,
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| Error::Checkpoint(format!("header encoding failed: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut push = |v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        for net in &self.ensemble.nets {
            push(&net.params);
        }
        if let Some(o) = &self.optimizer {
            o.first.iter().for_each(|v| push(v));
            o.second.iter().for_each(|v| push(v));
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
            )));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..).ok_or_else(|| bad("truncated header"))?;
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[..hlen])
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        header.arch.validate()?;
        let mut ensemble = init_with_widths(&header.widths, &header.arch, header.seed);
        let mut data = body[hlen..].chunks_exact(8);
        let expected = ensemble.n_params() * if header.optimizer.is_some() { 3 } else { 1 };
        if body.len() - hlen != expected * 8 {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameters, found {} bytes",
                body.len() - hlen
            )));
        }
        let mut fill = |v: &mut [f64]| {
            for x in v.iter_mut() {
                *x = f64::from_le_bytes(data.next().unwrap().try_into().unwrap());
            }
        };
        for net in &mut ensemble.nets {
            fill(&mut net.params);
        }
        let optimizer = header.optimizer.map(|(config, step)| {
            let mut o = OptimizerState::new(&ensemble, config);
            o.step = step;
            o.first.iter_mut().for_each(|v| fill(v));
            o.second.iter_mut().for_each(|v| fill(v));
            o
        });
        if !ensemble.all_finite() {
            return Err(bad("checkpoint holds non-finite parameters"));
        }
        Ok(Self {
            ensemble,
            optimizer,
            epoch: header.epoch,
            rng_step: header.rng_step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&buf)
    }
}
