//! Message-passing flux balancer.
//!
//! One epoch runs three phases over a [`DirectedFactorGraph`]:
//!
//! 1. every variable sends each neighbouring factor a message about its value,
//! 2. every factor answers each neighbouring variable with the value that
//!    variable would need to take for the factor to balance, computed from the
//!    messages of all *other* neighbours,
//! 3. every variable blends its current weight with the mean of the factor
//!    answers: `w' = (1 - β)·w + β·mean_m(η_m · msg_m)`, clamped at zero.
//!
//! Messages start at zero; until factors have answered once, variables send
//! their current weight.
//!
//! Two message rules exist for each direction. The *reference* rules
//! ([`VariableMessageRule::Blended`], [`FactorMessageRule::Absolute`],
//! [`StepControl::Fixed`]) are the textbook form and can diverge on graphs
//! with high-degree factors. The default configuration sends current
//! weights, rectifies negative factor answers to zero and backtracks the
//! blend rate whenever an epoch would increase the L1 imbalance. Both agree
//! exactly on the first epoch from zero messages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedFactorGraph, Norm};
use crate::matrix::FluxMatrix;

/// Smallest blend rate tried by [`StepControl::Backtracking`].
const MIN_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// η = 1 for every factor.
    #[default]
    Uniform,
    /// η_m = |imbalance_m| / max |imbalance|, or 1 when everything balances.
    ImbalanceWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableMessageRule {
    /// `(1 - β)·mean(other factor answers) + β·w`, or `w` when the variable
    /// has a single factor or no answers have arrived yet.
    Blended,
    /// Always the current weight.
    #[default]
    CurrentWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMessageRule {
    /// Absolute value of the signed sum over the other neighbours.
    Absolute,
    /// Signed balancing value, floored at zero.
    #[default]
    Rectified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepControl {
    /// Always blend with β.
    Fixed,
    /// Halve the blend rate until the L1 imbalance does not increase.
    #[default]
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpoConfig {
    /// Blend rate in (0, 1].
    pub beta: f64,
    /// Stop once the L1 imbalance is at or below this value.
    pub alpha: f64,
    pub max_epochs: usize,
    pub eta_mode: EtaMode,
    pub variable_messages: VariableMessageRule,
    pub factor_messages: FactorMessageRule,
    pub step_control: StepControl,
}

impl Default for MpoConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            alpha: 1e-6,
            max_epochs: 10_000,
            eta_mode: EtaMode::Uniform,
            variable_messages: VariableMessageRule::default(),
            factor_messages: FactorMessageRule::default(),
            step_control: StepControl::default(),
        }
    }
}

impl MpoConfig {
    /// The unguarded reference rules.
    pub fn reference(beta: f64) -> Self {
        Self {
            beta,
            variable_messages: VariableMessageRule::Blended,
            factor_messages: FactorMessageRule::Absolute,
            step_control: StepControl::Fixed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Messages on every edge, in both directions, indexed by edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    factor_to_variable: Vec<f64>,
    variable_to_factor: Vec<f64>,
    primed: bool,
}

impl MessageState {
    pub fn len(&self) -> usize {
        self.factor_to_variable.len() + self.variable_to_factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether factors have sent at least one round of answers.
    pub fn is_primed(&self) -> bool {
        self.primed
    }

    pub fn factor_to_variable(&self) -> &[f64] {
        &self.factor_to_variable
    }

    pub fn variable_to_factor(&self) -> &[f64] {
        &self.variable_to_factor
    }

    fn edge_of(g: &DirectedFactorGraph, factor: usize, variable: usize) -> Option<usize> {
        g.variable_links(variable)
            .iter()
            .find(|l| l.factor == factor)
            .map(|l| l.edge)
    }

    pub fn f2v(&self, g: &DirectedFactorGraph, factor: usize, variable: usize) -> Option<f64> {
        Self::edge_of(g, factor, variable).map(|e| self.factor_to_variable[e])
    }

    pub fn v2f(&self, g: &DirectedFactorGraph, variable: usize, factor: usize) -> Option<f64> {
        Self::edge_of(g, factor, variable).map(|e| self.variable_to_factor[e])
    }

    pub fn all_finite(&self) -> bool {
        self.factor_to_variable
            .iter()
            .chain(&self.variable_to_factor)
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MpoTrace {
    /// L1 imbalance after each epoch.
    pub l1_imbalance: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
}

pub fn init_messages(g: &DirectedFactorGraph) -> MessageState {
    MessageState {
        factor_to_variable: vec![0.0; g.n_edges()],
        variable_to_factor: vec![0.0; g.n_edges()],
        primed: false,
    }
}

pub fn update_variable_to_factor(
    g: &DirectedFactorGraph,
    state: &mut MessageState,
    weights: &[f64],
    beta: f64,
    rule: VariableMessageRule,
) {
    for (var, &w) in weights.iter().enumerate() {
        let links = g.variable_links(var);
        let incoming: f64 = links
            .iter()
            .map(|l| state.factor_to_variable[l.edge])
            .sum();
        for l in links {
            let msg = match rule {
                VariableMessageRule::Blended if state.primed && links.len() > 1 => {
                    let others = incoming - state.factor_to_variable[l.edge];
                    (1.0 - beta) * others / (links.len() - 1) as f64 + beta * w
                }
                _ => w,
            };
            state.variable_to_factor[l.edge] = msg;
        }
    }
}

pub fn update_factor_to_variable(
    g: &DirectedFactorGraph,
    state: &mut MessageState,
    rule: FactorMessageRule,
) {
    for f in 0..g.n_factors() {
        let links = g.factor_links(f);
        let total: f64 = links
            .iter()
            .map(|l| l.sign * state.variable_to_factor[l.edge])
            .sum();
        for l in links {
            let others = total - l.sign * state.variable_to_factor[l.edge];
            // Value of this variable that zeroes the factor's imbalance.
            let needed = -others / l.sign;
            state.factor_to_variable[l.edge] = match rule {
                FactorMessageRule::Absolute => needed.abs(),
                FactorMessageRule::Rectified => needed.max(0.0),
            };
        }
    }
    state.primed = true;
}

fn eta_weights(g: &DirectedFactorGraph, weights: &[f64], mode: EtaMode) -> Vec<f64> {
    match mode {
        EtaMode::Uniform => vec![1.0; g.n_factors()],
        EtaMode::ImbalanceWeighted => {
            let d: Vec<f64> = g
                .imbalances_unchecked(weights)
                .into_iter()
                .map(f64::abs)
                .collect();
            let max = d.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                d.into_iter().map(|x| x / max).collect()
            } else {
                vec![1.0; g.n_factors()]
            }
        }
    }
}

/// Blends each weight with the η-weighted mean of its factor answers.
pub fn update_weights(
    g: &DirectedFactorGraph,
    state: &MessageState,
    weights: &[f64],
    beta: f64,
    eta_mode: EtaMode,
) -> Vec<f64> {
    let eta = eta_weights(g, weights, eta_mode);
    weights
        .iter()
        .enumerate()
        .map(|(var, &w)| {
            let links = g.variable_links(var);
            let pooled: f64 = links
                .iter()
                .map(|l| eta[l.factor] * state.factor_to_variable[l.edge])
                .sum::<f64>()
                / links.len() as f64;
            ((1.0 - beta) * w + beta * pooled).max(0.0)
        })
        .collect()
}

/// One epoch at a fixed blend rate, starting from `state`.
pub fn mpo_epoch(
    g: &DirectedFactorGraph,
    state: &mut MessageState,
    weights: &[f64],
    cfg: &MpoConfig,
) -> Vec<f64> {
    update_variable_to_factor(g, state, weights, cfg.beta, cfg.variable_messages);
    update_factor_to_variable(g, state, cfg.factor_messages);
    update_weights(g, state, weights, cfg.beta, cfg.eta_mode)
}

fn check_initial(g: &DirectedFactorGraph, w0: &[f64]) -> Result<()> {
    if w0.len() != g.n_variables() {
        return Err(Error::shape("initial flux", g.n_variables(), w0.len()));
    }
    if let Some((i, x)) = w0
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
    {
        return Err(Error::InvalidArgument(format!(
            "initial flux must be finite and non-negative; entry {i} is {x}"
        )));
    }
    Ok(())
}

/// Iterates epochs until the L1 imbalance drops to `cfg.alpha` or
/// `cfg.max_epochs` is reached.
pub fn run_mpo(
    g: &DirectedFactorGraph,
    w0: &[f64],
    cfg: &MpoConfig,
) -> Result<(Vec<f64>, MpoTrace)> {
    cfg.validate()?;
    check_initial(g, w0)?;

    let mut weights = w0.to_vec();
    let mut loss = g.imbalance_loss_unchecked(&weights, Norm::L1);
    let mut trace = MpoTrace::default();
    if loss <= cfg.alpha {
        trace.converged = true;
        return Ok((weights, trace));
    }

    let mut state = init_messages(g);
    for epoch in 1..=cfg.max_epochs {
        update_variable_to_factor(g, &mut state, &weights, cfg.beta, cfg.variable_messages);
        update_factor_to_variable(g, &mut state, cfg.factor_messages);
        if !state.all_finite() {
            return Err(Error::Diverged {
                context: "message passing".into(),
                epoch,
            });
        }

        let mut step = cfg.beta;
        let mut next = update_weights(g, &state, &weights, step, cfg.eta_mode);
        let mut next_loss = g.imbalance_loss_unchecked(&next, Norm::L1);
        let mut stalled = false;
        if cfg.step_control == StepControl::Backtracking {
            while !(next_loss <= loss) {
                step *= 0.5;
                if step < MIN_STEP {
                    stalled = true;
                    break;
                }
                next = update_weights(g, &state, &weights, step, cfg.eta_mode);
                next_loss = g.imbalance_loss_unchecked(&next, Norm::L1);
            }
        }
        if stalled {
            trace.l1_imbalance.push(loss);
            trace.epochs_run = epoch;
            if cfg.variable_messages == VariableMessageRule::CurrentWeight {
                // Messages depend only on the weights, so nothing can change.
                break;
            }
            continue;
        }
        if !next_loss.is_finite() || next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                context: "message passing".into(),
                epoch,
            });
        }

        weights = next;
        loss = next_loss;
        trace.l1_imbalance.push(loss);
        trace.epochs_run = epoch;
        if loss <= cfg.alpha {
            trace.converged = true;
            break;
        }
    }
    Ok((weights, trace))
}

/// Row-wise [`run_mpo`]. Rows run in parallel; the output keeps input order
/// and does not depend on the number of workers.
pub fn run_mpo_batch(
    g: &DirectedFactorGraph,
    w0: &FluxMatrix,
    cfg: &MpoConfig,
) -> Result<FluxMatrix> {
    let (out, _) = run_mpo_batch_traced(g, w0, cfg)?;
    Ok(out)
}

pub fn run_mpo_batch_traced(
    g: &DirectedFactorGraph,
    w0: &FluxMatrix,
    cfg: &MpoConfig,
) -> Result<(FluxMatrix, Vec<MpoTrace>)> {
    cfg.validate()?;
    if w0.ncols() != g.n_variables() {
        return Err(Error::shape("flux matrix columns", g.n_variables(), w0.ncols()));
    }
    let results: Vec<Result<(Vec<f64>, MpoTrace)>> = (0..w0.nrows())
        .into_par_iter()
        .map(|j| run_mpo(g, w0.row(j), cfg))
        .collect();
    let mut out = FluxMatrix::zeros(w0.nrows(), w0.ncols());
    let mut traces = Vec::with_capacity(w0.nrows());
    for (j, r) in results.into_iter().enumerate() {
        let (row, trace) = r.map_err(|e| Error::Row {
            row: j,
            source: Box::new(e),
        })?;
        out.row_mut(j).copy_from_slice(&row);
        traces.push(trace);
    }
    Ok((out, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{from_triples, worked_example};
    use approx::assert_abs_diff_eq;

    const W0: [f64; 4] = [2.2, 4.5, 2.8, 0.8];

    fn assert_slice_eq(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(*x, *y, epsilon = tol);
        }
    }

    #[test]
    fn initial_messages_are_zero() {
        let state = init_messages(&worked_example());
        assert_eq!(state.len(), 10);
        assert!(state
            .factor_to_variable()
            .iter()
            .chain(state.variable_to_factor())
            .all(|&x| x == 0.0));
        let single = from_triples(1, 1, &[(0, 0, true)]).unwrap();
        assert_eq!(init_messages(&single).len(), 2);
    }

    #[test]
    fn first_epoch_variable_messages() {
        let g = worked_example();
        for rule in [VariableMessageRule::Blended, VariableMessageRule::CurrentWeight] {
            let mut s = init_messages(&g);
            update_variable_to_factor(&g, &mut s, &W0, 0.5, rule);
            // edge order: v1->f1, v2 (f1), v2 (f2), v3, v4
            assert_eq!(s.variable_to_factor(), &[2.2, 4.5, 4.5, 2.8, 0.8]);
        }
    }

    #[test]
    fn blended_message_uses_other_factors() {
        let g = worked_example();
        let mut s = init_messages(&g);
        update_variable_to_factor(&g, &mut s, &W0, 0.5, VariableMessageRule::Blended);
        update_factor_to_variable(&g, &mut s, FactorMessageRule::Absolute);
        update_variable_to_factor(&g, &mut s, &W0, 0.5, VariableMessageRule::Blended);
        // v2 -> f1 blends f2's answer (3.6) with its weight; v2 -> f2 blends f1's (2.2).
        assert_abs_diff_eq!(s.v2f(&g, 1, 0).unwrap(), 0.5 * 3.6 + 0.5 * 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v2f(&g, 1, 1).unwrap(), 0.5 * 2.2 + 0.5 * 4.5, epsilon = 1e-12);
        // single-factor variables always send their weight
        assert_eq!(s.v2f(&g, 0, 0), Some(2.2));
        assert_eq!(s.v2f(&g, 3, 1), Some(0.8));

        // β = 1 collapses the blend onto the weight.
        update_variable_to_factor(&g, &mut s, &W0, 1.0, VariableMessageRule::Blended);
        assert_eq!(s.v2f(&g, 1, 0), Some(4.5));
    }

    #[test]
    fn first_epoch_factor_messages() {
        let g = worked_example();
        let mut s = init_messages(&g);
        update_variable_to_factor(&g, &mut s, &W0, 0.5, VariableMessageRule::Blended);
        update_factor_to_variable(&g, &mut s, FactorMessageRule::Absolute);
        assert_slice_eq(s.factor_to_variable(), &[4.5, 2.2, 3.6, 3.7, 1.7], 1e-12);
        assert!(s.is_primed());
    }

    #[test]
    fn factor_message_single_parent_single_child() {
        let g = from_triples(1, 2, &[(0, 0, true), (0, 1, false)]).unwrap();
        let mut s = init_messages(&g);
        update_variable_to_factor(&g, &mut s, &[3.0, 1.0], 0.5, VariableMessageRule::Blended);
        update_factor_to_variable(&g, &mut s, FactorMessageRule::Absolute);
        assert_eq!(s.f2v(&g, 0, 1), Some(3.0));
        assert_eq!(s.f2v(&g, 0, 0), Some(1.0));
    }

    #[test]
    fn zero_messages_give_zero_answers() {
        let g = worked_example();
        let mut s = init_messages(&g);
        update_factor_to_variable(&g, &mut s, FactorMessageRule::Absolute);
        assert!(s.factor_to_variable().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rectified_rule_floors_negative_answers() {
        // parent 1, children 5 and 1: child 1 would need to be -4.
        let g = from_triples(1, 3, &[(0, 0, true), (0, 1, false), (0, 2, false)]).unwrap();
        let mut s = init_messages(&g);
        update_variable_to_factor(&g, &mut s, &[1.0, 5.0, 1.0], 0.5, VariableMessageRule::CurrentWeight);
        let mut a = s.clone();
        update_factor_to_variable(&g, &mut a, FactorMessageRule::Absolute);
        update_factor_to_variable(&g, &mut s, FactorMessageRule::Rectified);
        assert_eq!(a.f2v(&g, 0, 2), Some(4.0));
        assert_eq!(s.f2v(&g, 0, 2), Some(0.0));
        assert_eq!(s.f2v(&g, 0, 0), Some(6.0));
    }

    #[test]
    fn first_epoch_weights() {
        let g = worked_example();
        for cfg in [MpoConfig::default(), MpoConfig::reference(0.5)] {
            let mut s = init_messages(&g);
            let w = mpo_epoch(&g, &mut s, &W0, &cfg);
            assert_slice_eq(&w, &[3.35, 3.7, 3.25, 1.25], 1e-12);
        }
    }

    #[test]
    fn zero_beta_and_balanced_input_do_not_move() {
        let g = worked_example();
        let mut s = init_messages(&g);
        update_variable_to_factor(&g, &mut s, &W0, 0.5, VariableMessageRule::Blended);
        update_factor_to_variable(&g, &mut s, FactorMessageRule::Absolute);
        assert_eq!(update_weights(&g, &s, &W0, 0.0, EtaMode::Uniform), W0.to_vec());

        let balanced = [4.0, 4.0, 3.0, 1.0];
        let mut s = init_messages(&g);
        let w = mpo_epoch(&g, &mut s, &balanced, &MpoConfig::reference(0.5));
        assert_slice_eq(&w, &balanced, 1e-12);
    }

    #[test]
    fn imbalance_weighted_eta() {
        let g = worked_example();
        let eta = eta_weights(&g, &W0, EtaMode::ImbalanceWeighted);
        assert_slice_eq(&eta, &[1.0, 0.9 / 2.3], 1e-12);
        assert_eq!(
            eta_weights(&g, &[1.0, 1.0, 0.5, 0.5], EtaMode::ImbalanceWeighted),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn run_converges_on_worked_example() {
        let g = worked_example();
        let (w, trace) = run_mpo(&g, &W0, &MpoConfig::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.l1_imbalance.len(), trace.epochs_run);
        assert!(g.imbalance_loss(&w, Norm::L1).unwrap() <= 1e-6);
        assert_abs_diff_eq!(w[0], w[1], epsilon = 1e-6);
        assert_abs_diff_eq!(w[1], w[2] + w[3], epsilon = 1e-6);
    }

    #[test]
    fn balanced_start_returns_immediately() {
        let g = worked_example();
        let w0 = [4.0, 4.0, 3.0, 1.0];
        let (w, trace) = run_mpo(&g, &w0, &MpoConfig::default()).unwrap();
        assert_eq!(w, w0.to_vec());
        assert_eq!(trace.epochs_run, 0);
        assert!(trace.converged);
    }

    #[test]
    fn run_rejects_bad_input() {
        let g = worked_example();
        assert!(run_mpo(&g, &[1.0; 3], &MpoConfig::default()).is_err());
        assert!(run_mpo(&g, &[1.0, -1.0, 1.0, 1.0], &MpoConfig::default()).is_err());
        let cfg = MpoConfig {
            beta: 0.0,
            ..MpoConfig::default()
        };
        assert!(matches!(run_mpo(&g, &W0, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn reference_rules_can_diverge() {
        // β = 0.9 overshoots on the three-neighbour factor.
        let g = worked_example();
        let cfg = MpoConfig {
            max_epochs: 5_000,
            ..MpoConfig::reference(0.9)
        };
        match run_mpo(&g, &W0, &cfg) {
            Err(e) => assert_eq!(e.kind(), crate::error::ErrorKind::Numerical),
            Ok((_, trace)) => assert!(!trace.converged),
        }
    }

    #[test]
    fn batch_preserves_rows_and_handles_empty() {
        let g = worked_example();
        let w0 = FluxMatrix::from_rows(4, &[W0.to_vec(), W0.to_vec(), W0.to_vec()]).unwrap();
        let out = run_mpo_batch(&g, &w0, &MpoConfig::default()).unwrap();
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(1), out.row(2));
        let empty = FluxMatrix::zeros(0, 4);
        assert_eq!(run_mpo_batch(&g, &empty, &MpoConfig::default()).unwrap().nrows(), 0);
    }

    #[test]
    fn batch_reports_failing_row() {
        let g = worked_example();
        let w0 = FluxMatrix::from_rows(4, &[W0.to_vec(), vec![1.0, -2.0, 0.0, 0.0]]).unwrap();
        match run_mpo_batch(&g, &w0, &MpoConfig::default()) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
