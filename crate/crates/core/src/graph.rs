//! Directed factor graphs: factors are conserved quantities (metabolites),
//! variables are flows between them (reactions).
//!
//! A variable attached with [`Direction::VariableToFactor`] is a *parent* of
//! the factor and carries flux into it; [`Direction::FactorToVariable`] makes
//! it a *child* that drains the factor. A factor is balanced when the
//! coefficient-weighted parent sum equals the child sum.

use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap for [`DirectedFactorGraph::count_cycles`].
pub const DEFAULT_CYCLE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    VariableToFactor,
    FactorToVariable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorNode {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableNode {
    pub id: usize,
    pub name: String,
    #[serde(default)]
    pub features: Vec<String>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub factor: usize,
    pub variable: usize,
    pub direction: Direction,
    #[serde(default = "unit")]
    pub coefficient: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    factors: Vec<FactorNode>,
    variables: Vec<VariableNode>,
    edges: Vec<Edge>,
}

/// One endpoint's view of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    /// Index into [`DirectedFactorGraph::edges`].
    pub edge: usize,
    pub factor: usize,
    pub variable: usize,
    /// `+coefficient` when the variable is a parent of the factor,
    /// `-coefficient` when it is a child.
    pub sign: f64,
}

impl Link {
    pub fn is_parent(&self) -> bool {
        self.sign > 0.0
    }
}

/// A validated directed factor graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedFactorGraph {
    factors: Vec<FactorNode>,
    variables: Vec<VariableNode>,
    edges: Vec<Edge>,
    factor_links: Vec<Vec<Link>>,
    variable_links: Vec<Vec<Link>>,
}

/// Signed `n × K` incidence matrix. Entries are negative for a variable
/// feeding the factor and positive for a variable draining it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoichiometricMatrix {
    n_factors: usize,
    n_variables: usize,
    gamma: Vec<f64>,
}

impl StoichiometricMatrix {
    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn n_variables(&self) -> usize {
        self.n_variables
    }

    pub fn get(&self, factor: usize, variable: usize) -> f64 {
        self.gamma[factor * self.n_variables + variable]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.gamma
            .chunks(self.n_variables)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Matrix-vector product `Γ·w`.
    pub fn apply(&self, flux: &[f64]) -> Result<Vec<f64>> {
        if flux.len() != self.n_variables {
            return Err(Error::shape("flux vector", self.n_variables, flux.len()));
        }
        Ok(self
            .gamma
            .chunks(self.n_variables)
            .map(|row| row.iter().zip(flux).map(|(g, w)| g * w).sum())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleCount {
    pub count: usize,
    /// Enumeration stopped at the cap; the true count is at least `count`.
    pub capped: bool,
}

impl DirectedFactorGraph {
    /// Validates and indexes a graph. Node lists may come in any order but
    /// their ids must be exactly `0..len`.
    pub fn new(
        mut factors: Vec<FactorNode>,
        mut variables: Vec<VariableNode>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidGraph("graph has no factors".into()));
        }
        if variables.is_empty() {
            return Err(Error::InvalidGraph("graph has no variables".into()));
        }
        factors.sort_by_key(|f| f.id);
        variables.sort_by_key(|v| v.id);
        for (pos, f) in factors.iter().enumerate() {
            if f.id != pos {
                return Err(Error::InvalidGraph(format!(
                    "factor ids must be unique and dense in 0..{}, offending id {}",
                    factors.len(),
                    f.id
                )));
            }
        }
        for (pos, v) in variables.iter().enumerate() {
            if v.id != pos {
                return Err(Error::InvalidGraph(format!(
                    "variable ids must be unique and dense in 0..{}, offending id {}",
                    variables.len(),
                    v.id
                )));
            }
        }

        let n = factors.len();
        let k = variables.len();
        let mut seen = HashSet::new();
        let mut factor_links = vec![Vec::new(); n];
        let mut variable_links = vec![Vec::new(); k];
        for (idx, e) in edges.iter().enumerate() {
            if e.factor >= n {
                return Err(Error::DanglingReference {
                    edge: idx,
                    kind: "factor",
                    id: e.factor,
                });
            }
            if e.variable >= k {
                return Err(Error::DanglingReference {
                    edge: idx,
                    kind: "variable",
                    id: e.variable,
                });
            }
            if !(e.coefficient.is_finite() && e.coefficient > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge {idx} has coefficient {}; coefficients must be positive and finite",
                    e.coefficient
                )));
            }
            if !seen.insert((e.factor, e.variable, e.direction)) {
                return Err(Error::DuplicateEdge {
                    factor: e.factor,
                    variable: e.variable,
                });
            }
            let opposite = match e.direction {
                Direction::VariableToFactor => Direction::FactorToVariable,
                Direction::FactorToVariable => Direction::VariableToFactor,
            };
            if seen.contains(&(e.factor, e.variable, opposite)) {
                return Err(Error::OverlappingDirections {
                    factor: e.factor,
                    variable: e.variable,
                });
            }
            let sign = match e.direction {
                Direction::VariableToFactor => e.coefficient,
                Direction::FactorToVariable => -e.coefficient,
            };
            let link = Link {
                edge: idx,
                factor: e.factor,
                variable: e.variable,
                sign,
            };
            factor_links[e.factor].push(link);
            variable_links[e.variable].push(link);
        }
        if let Some(f) = factor_links.iter().position(Vec::is_empty) {
            return Err(Error::InvalidGraph(format!(
                "factor {f} ({}) has no incident edges",
                factors[f].name
            )));
        }
        if let Some(v) = variable_links.iter().position(Vec::is_empty) {
            return Err(Error::InvalidGraph(format!(
                "variable {v} ({}) has no incident edges",
                variables[v].name
            )));
        }

        Ok(Self {
            factors,
            variables,
            edges,
            factor_links,
            variable_links,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(doc.factors, doc.variables, doc.edges)
    }

    /// Pretty JSON with keys in document order (`factors`, `variables`,
    /// `edges`), stable byte-for-byte for a given graph.
    pub fn to_json_string(&self) -> String {
        let doc = GraphDocument {
            factors: self.factors.clone(),
            variables: self.variables.clone(),
            edges: self.edges.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn factors(&self) -> &[FactorNode] {
        &self.factors
    }

    pub fn variables(&self) -> &[VariableNode] {
        &self.variables
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Edges incident to `factor`, in edge-list order.
    pub fn factor_links(&self, factor: usize) -> &[Link] {
        &self.factor_links[factor]
    }

    /// Edges incident to `variable`, in edge-list order.
    pub fn variable_links(&self, variable: usize) -> &[Link] {
        &self.variable_links[variable]
    }

    pub fn parents(&self, factor: usize) -> impl Iterator<Item = usize> + '_ {
        self.factor_links[factor]
            .iter()
            .filter(|l| l.is_parent())
            .map(|l| l.variable)
    }

    pub fn children(&self, factor: usize) -> impl Iterator<Item = usize> + '_ {
        self.factor_links[factor]
            .iter()
            .filter(|l| !l.is_parent())
            .map(|l| l.variable)
    }

    pub fn stoichiometry(&self) -> StoichiometricMatrix {
        let n = self.n_factors();
        let k = self.n_variables();
        let mut gamma = vec![0.0; n * k];
        for links in &self.factor_links {
            for l in links {
                gamma[l.factor * k + l.variable] += -l.sign;
            }
        }
        StoichiometricMatrix {
            n_factors: n,
            n_variables: k,
            gamma,
        }
    }

    fn check_flux(&self, flux: &[f64]) -> Result<()> {
        if flux.len() != self.n_variables() {
            return Err(Error::shape("flux vector", self.n_variables(), flux.len()));
        }
        Ok(())
    }

    /// Per factor: parent in-flux minus child out-flux.
    pub fn factor_imbalances(&self, flux: &[f64]) -> Result<Vec<f64>> {
        self.check_flux(flux)?;
        Ok(self.imbalances_unchecked(flux))
    }

    pub(crate) fn imbalances_unchecked(&self, flux: &[f64]) -> Vec<f64> {
        self.factor_links
            .iter()
            .map(|links| links.iter().map(|l| l.sign * flux[l.variable]).sum())
            .collect()
    }

    pub fn imbalance_loss(&self, flux: &[f64], norm: Norm) -> Result<f64> {
        self.check_flux(flux)?;
        Ok(self.imbalance_loss_unchecked(flux, norm))
    }

    pub(crate) fn imbalance_loss_unchecked(&self, flux: &[f64], norm: Norm) -> f64 {
        let mut acc = 0.0;
        for links in &self.factor_links {
            let d: f64 = links.iter().map(|l| l.sign * flux[l.variable]).sum();
            acc += match norm {
                Norm::L1 => d.abs(),
                Norm::L2 => d * d,
            };
        }
        match norm {
            Norm::L1 => acc,
            Norm::L2 => acc.sqrt(),
        }
    }

    /// Successor lists of the bipartite digraph. Factors are nodes
    /// `0..n`, variable `k` is node `n + k`.
    pub(crate) fn digraph(&self) -> Vec<Vec<usize>> {
        let n = self.n_factors();
        let mut succ = vec![Vec::new(); n + self.n_variables()];
        for e in &self.edges {
            match e.direction {
                Direction::VariableToFactor => succ[n + e.variable].push(e.factor),
                Direction::FactorToVariable => succ[e.factor].push(n + e.variable),
            }
        }
        succ
    }

    /// Elementary directed cycles (variable → factor → variable → …),
    /// enumerated with Johnson's algorithm up to `cap`.
    pub fn count_cycles(&self, cap: usize) -> CycleCount {
        let succ = self.digraph();
        let total = succ.len();
        let mut count = 0usize;
        let mut blocked = vec![false; total];
        let mut block_map: Vec<Vec<usize>> = vec![Vec::new(); total];
        for start in 0..total {
            let comp = component_of(&succ, start);
            if comp.len() < 2 {
                continue;
            }
            let mut in_comp = vec![false; total];
            for &v in &comp {
                in_comp[v] = true;
                blocked[v] = false;
                block_map[v].clear();
            }
            let mut search = CircuitSearch {
                succ: &succ,
                in_comp: &in_comp,
                blocked: &mut blocked,
                block_map: &mut block_map,
                start,
                count: &mut count,
                cap,
            };
            search.circuit(start);
            if count >= cap {
                return CycleCount {
                    count: cap,
                    capped: true,
                };
            }
        }
        CycleCount {
            count,
            capped: false,
        }
    }
}

impl FromStr for DirectedFactorGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_json_str(s)
    }
}

/// Strongly connected component containing `start` in the subgraph induced
/// by nodes `>= start`.
fn component_of(succ: &[Vec<usize>], start: usize) -> Vec<usize> {
    let total = succ.len();
    let mut forward = vec![false; total];
    let mut stack = vec![start];
    forward[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &succ[v] {
            if w >= start && !forward[w] {
                forward[w] = true;
                stack.push(w);
            }
        }
    }
    // Reverse reachability restricted to the forward set.
    let mut pred = vec![Vec::new(); total];
    for v in start..total {
        if forward[v] {
            for &w in &succ[v] {
                if w >= start && forward[w] {
                    pred[w].push(v);
                }
            }
        }
    }
    let mut backward = vec![false; total];
    backward[start] = true;
    stack.push(start);
    while let Some(v) = stack.pop() {
        for &u in &pred[v] {
            if !backward[u] {
                backward[u] = true;
                stack.push(u);
            }
        }
    }
    (start..total).filter(|&v| forward[v] && backward[v]).collect()
}

struct CircuitSearch<'a> {
    succ: &'a [Vec<usize>],
    in_comp: &'a [bool],
    blocked: &'a mut Vec<bool>,
    block_map: &'a mut Vec<Vec<usize>>,
    start: usize,
    count: &'a mut usize,
    cap: usize,
}

impl CircuitSearch<'_> {
    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        let waiting = std::mem::take(&mut self.block_map[u]);
        for w in waiting {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }

    fn circuit(&mut self, v: usize) -> bool {
        let mut found = false;
        self.blocked[v] = true;
        for i in 0..self.succ[v].len() {
            let w = self.succ[v][i];
            if !self.in_comp[w] {
                continue;
            }
            if w == self.start {
                *self.count += 1;
                found = true;
                if *self.count >= self.cap {
                    return true;
                }
            } else if !self.blocked[w] && self.circuit(w) {
                found = true;
                if *self.count >= self.cap {
                    return true;
                }
            }
        }
        if found {
            self.unblock(v);
        } else {
            for i in 0..self.succ[v].len() {
                let w = self.succ[v][i];
                if self.in_comp[w] && !self.block_map[w].contains(&v) {
                    self.block_map[w].push(v);
                }
            }
        }
        found
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The four-variable, two-factor worked example:
    /// v1 → f1 → v2 → f2 → {v3, v4}.
    pub(crate) fn worked_example() -> DirectedFactorGraph {
        worked_example_json().parse().unwrap()
    }

    pub(crate) fn worked_example_json() -> &'static str {
        r#"{
          "factors": [{"id": 0, "name": "f1"}, {"id": 1, "name": "f2"}],
          "variables": [
            {"id": 0, "name": "v1", "features": []},
            {"id": 1, "name": "v2", "features": []},
            {"id": 2, "name": "v3", "features": []},
            {"id": 3, "name": "v4", "features": []}
          ],
          "edges": [
            {"factor": 0, "variable": 0, "direction": "variable_to_factor"},
            {"factor": 0, "variable": 1, "direction": "factor_to_variable"},
            {"factor": 1, "variable": 1, "direction": "variable_to_factor"},
            {"factor": 1, "variable": 2, "direction": "factor_to_variable"},
            {"factor": 1, "variable": 3, "direction": "factor_to_variable"}
          ]
        }"#
    }

    /// Builds a unit-coefficient graph from `(factor, variable, is_parent)`.
    pub(crate) fn from_triples(
        n: usize,
        k: usize,
        triples: &[(usize, usize, bool)],
    ) -> Result<DirectedFactorGraph> {
        let factors = (0..n)
            .map(|id| FactorNode {
                id,
                name: format!("f{id}"),
            })
            .collect();
        let variables = (0..k)
            .map(|id| VariableNode {
                id,
                name: format!("v{id}"),
                features: Vec::new(),
            })
            .collect();
        let edges = triples
            .iter()
            .map(|&(factor, variable, parent)| Edge {
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
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_example_parses() {
        let g = worked_example();
        assert_eq!((g.n_factors(), g.n_variables(), g.n_edges()), (2, 4, 5));
        assert_eq!(g.parents(1).collect::<Vec<_>>(), vec![1]);
        assert_eq!(g.children(1).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn factor_free_graph_rejected() {
        let text = r#"{"factors":[],"variables":[{"id":0,"name":"r"}],"edges":[]}"#;
        assert!(matches!(
            DirectedFactorGraph::from_json_str(text),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn overlapping_parent_child_rejected() {
        let err = from_triples(1, 2, &[(0, 0, true), (0, 1, false), (0, 0, false)]).unwrap_err();
        assert!(matches!(
            err,
            Error::OverlappingDirections {
                factor: 0,
                variable: 0
            }
        ));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let err = from_triples(1, 2, &[(0, 0, true), (0, 1, false), (0, 0, true)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge { .. }));
    }

    #[test]
    fn dangling_reference_rejected() {
        let text = r#"{"factors":[{"id":0,"name":"m"}],"variables":[{"id":0,"name":"r"}],
            "edges":[{"factor":0,"variable":3,"direction":"variable_to_factor"}]}"#;
        assert!(matches!(
            DirectedFactorGraph::from_json_str(text),
            Err(Error::DanglingReference { kind: "variable", id: 3, .. })
        ));
    }

    #[test]
    fn malformed_and_unknown_keys_rejected() {
        assert!(matches!(
            DirectedFactorGraph::from_json_str("{not json"),
            Err(Error::Parse(_))
        ));
        let text = r#"{"factors":[{"id":0,"name":"m","mass":1}],"variables":[],"edges":[]}"#;
        assert!(matches!(
            DirectedFactorGraph::from_json_str(text),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn non_dense_ids_rejected() {
        let text = r#"{"factors":[{"id":1,"name":"m"}],"variables":[{"id":0,"name":"r"}],
            "edges":[{"factor":1,"variable":0,"direction":"variable_to_factor"}]}"#;
        assert!(matches!(
            DirectedFactorGraph::from_json_str(text),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn stoichiometry_of_worked_example() {
        let gamma = worked_example().stoichiometry();
        assert_eq!(
            gamma.to_rows(),
            vec![vec![-1.0, 1.0, 0.0, 0.0], vec![0.0, -1.0, 1.0, 1.0]]
        );
    }

    #[test]
    fn stoichiometry_single_edge_and_weighted() {
        let g = from_triples(1, 1, &[(0, 0, true)]).unwrap();
        assert_eq!(g.stoichiometry().to_rows(), vec![vec![-1.0]]);

        let text = r#"{"factors":[{"id":0,"name":"m"}],
            "variables":[{"id":0,"name":"a"},{"id":1,"name":"b"}],
            "edges":[{"factor":0,"variable":0,"direction":"variable_to_factor","coefficient":2.0},
                     {"factor":0,"variable":1,"direction":"factor_to_variable","coefficient":2.0}]}"#;
        let g = DirectedFactorGraph::from_json_str(text).unwrap();
        assert_eq!(g.stoichiometry().to_rows(), vec![vec![-2.0, 2.0]]);
    }

    #[test]
    fn imbalances_of_worked_example() {
        let g = worked_example();
        let d = g.factor_imbalances(&[2.2, 4.5, 2.8, 0.8]).unwrap();
        assert_abs_diff_eq!(d[0], -2.3, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 0.9, epsilon = 1e-12);
        let d = g.factor_imbalances(&[4.14, 4.14, 3.07, 1.07]).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-2));
        assert_eq!(g.factor_imbalances(&[0.0; 4]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            g.factor_imbalances(&[1.0; 3]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn imbalance_losses() {
        let g = worked_example();
        let w = [2.2, 4.5, 2.8, 0.8];
        assert_abs_diff_eq!(g.imbalance_loss(&w, Norm::L1).unwrap(), 3.2, epsilon = 1e-12);
        assert_abs_diff_eq!(
            g.imbalance_loss(&w, Norm::L2).unwrap(),
            (2.3f64 * 2.3 + 0.9 * 0.9).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(g.imbalance_loss(&w, Norm::L2).unwrap(), 2.4698, epsilon = 1e-4);
        assert_eq!(g.imbalance_loss(&[0.0; 4], Norm::L1).unwrap(), 0.0);
        assert_eq!(g.imbalance_loss(&[0.0; 4], Norm::L2).unwrap(), 0.0);
    }

    #[test]
    fn cycle_counts() {
        assert_eq!(worked_example().count_cycles(DEFAULT_CYCLE_CAP).count, 0);
        // v0 -> f0 -> v1 -> f1 -> v0
        let tri = from_triples(2, 2, &[(0, 0, true), (0, 1, false), (1, 1, true), (1, 0, false)])
            .unwrap();
        assert_eq!(
            tri.count_cycles(DEFAULT_CYCLE_CAP),
            CycleCount {
                count: 1,
                capped: false
            }
        );
        // two disjoint chains
        let chains = from_triples(2, 4, &[(0, 0, true), (0, 1, false), (1, 2, true), (1, 3, false)])
            .unwrap();
        assert_eq!(chains.count_cycles(DEFAULT_CYCLE_CAP).count, 0);
    }

    #[test]
    fn cycle_cap_reported() {
        // Two factors joined by three forward and three backward variables:
        // nine elementary cycles.
        let mut t = Vec::new();
        for v in 0..3 {
            t.push((0, v, false));
            t.push((1, v, true));
        }
        for v in 3..6 {
            t.push((1, v, false));
            t.push((0, v, true));
        }
        let g = from_triples(2, 6, &t).unwrap();
        assert_eq!(g.count_cycles(100).count, 9);
        assert_eq!(
            g.count_cycles(4),
            CycleCount {
                count: 4,
                capped: true
            }
        );
    }

    #[test]
    fn serialization_is_stable() {
        let g = worked_example();
        let text = g.to_json_string();
        let again = DirectedFactorGraph::from_json_str(&text).unwrap();
        assert_eq!(again, g);
        assert_eq!(again.to_json_string(), text);
        let first_keys: Vec<_> = ["\"factors\"", "\"variables\"", "\"edges\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(first_keys.windows(2).all(|w| w[0] < w[1]));
        let e = text.find("\"factor\":").unwrap();
        let v = text[e..].find("\"variable\":").unwrap();
        let d = text[e..].find("\"direction\":").unwrap();
        let c = text[e..].find("\"coefficient\":").unwrap();
        assert!(v < d && d < c);
    }
}
