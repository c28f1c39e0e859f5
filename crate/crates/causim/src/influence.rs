//! Influence diagrams for simulation experiments.
//!
//! Nodes are the quantities a simulation touches: directly manipulable
//! parameters (set verbatim by the experimenter), the distributions they
//! induce, downstream functionals of those distributions, and the outcome
//! statistic. Edges are directed influence; an edge may be flagged
//! deterministic when the child is a fixed function of the parent.
//!
//! Only explicitly constructed graphs are analyzed; the two built-ins are
//! the bias-amplification simulation diagram and the mean-function
//! comparison diagram.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    ManipulableParameter,
    Distribution,
    Functional,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramNode {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramEdge {
    pub from: String,
    pub to: String,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceDiagram {
    nodes: Vec<DiagramNode>,
    edges: Vec<DiagramEdge>,
}

impl InfluenceDiagram {
    pub fn new() -> Self {
        InfluenceDiagram {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self, id: &str, kind: NodeKind, label: &str) -> Result<()> {
        if self.nodes.iter().any(|n| n.id == id) {
            return Err(Error::InvalidSpec(format!("duplicate node id {id}")));
        }
        self.nodes.push(DiagramNode {
            id: id.to_string(),
            kind,
            label: label.to_string(),
        });
        Ok(())
    }

    pub fn add_edge(&mut self, from: &str, to: &str, deterministic: bool) -> Result<()> {
        self.index_of(from)?;
        self.index_of(to)?;
        if self.edges.iter().any(|e| e.from == from && e.to == to) {
            return Err(Error::InvalidSpec(format!("duplicate edge {from} -> {to}")));
        }
        self.edges.push(DiagramEdge {
            from: from.to_string(),
            to: to.to_string(),
            deterministic,
        });
        Ok(())
    }

    pub fn nodes(&self) -> &[DiagramNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DiagramEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Result<&DiagramNode> {
        let i = self.index_of(id)?;
        Ok(&self.nodes[i])
    }

    fn index_of(&self, id: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Children of `id`, sorted by id for deterministic traversal.
    fn children(&self, id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .edges
            .iter()
            .filter(|e| e.from == id)
            .map(|e| e.to.as_str())
            .collect();
        out.sort_unstable();
        out
    }

    fn parents(&self, id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .edges
            .iter()
            .filter(|e| e.to == id)
            .map(|e| e.from.as_str())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm
        let mut indeg: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| self.edges.iter().filter(|e| e.to == n.id).count())
            .collect();
        let mut queue: Vec<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for e in self.edges.iter().filter(|e| e.from == self.nodes[i].id) {
                let j = self.nodes.iter().position(|n| n.id == e.to).unwrap();
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push(j);
                }
            }
        }
        seen == self.nodes.len()
    }

    /// Structural invariants: acyclicity and parentless manipulable
    /// parameters (edge endpoints are enforced at insertion).
    pub fn validate(&self) -> Result<()> {
        if !self.is_acyclic() {
            return Err(Error::InvalidSpec(
                "influence diagram contains a cycle".into(),
            ));
        }
        for n in &self.nodes {
            if n.kind == NodeKind::ManipulableParameter && !self.parents(&n.id).is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "manipulable parameter {} has parents {:?}",
                    n.id,
                    self.parents(&n.id)
                )));
            }
        }
        Ok(())
    }

    pub fn outcome_nodes(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Outcome)
            .map(|n| n.id.as_str())
            .collect()
    }

    /// Plain-text adjacency listing; deterministic edges shown as `=>`.
    pub fn to_adjacency_text(&self) -> String {
        let mut ids: Vec<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        ids.sort_unstable();
        let mut out = String::new();
        for id in ids {
            let node = self.node(id).unwrap();
            out.push_str(&format!("{} [{:?}] \"{}\"\n", id, node.kind, node.label));
            let mut edges: Vec<&DiagramEdge> = self.edges.iter().filter(|e| e.from == id).collect();
            edges.sort_by(|a, b| a.to.cmp(&b.to));
            for e in edges {
                let arrow = if e.deterministic { "=>" } else { "->" };
                out.push_str(&format!("  {arrow} {}\n", e.to));
            }
        }
        out
    }

    /// Graphviz DOT export; deterministic edges are bold and labeled.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n");
        let mut nodes: Vec<&DiagramNode> = self.nodes.iter().collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for n in nodes {
            let shape = match n.kind {
                NodeKind::ManipulableParameter => "box",
                NodeKind::Distribution => "ellipse",
                NodeKind::Functional => "diamond",
                NodeKind::Outcome => "doublecircle",
            };
            out.push_str(&format!(
                "  {} [shape={shape}, label=\"{}\"];\n",
                n.id, n.label
            ));
        }
        let mut edges: Vec<&DiagramEdge> = self.edges.iter().collect();
        edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        for e in edges {
            if e.deterministic {
                out.push_str(&format!(
                    "  {} -> {} [style=bold, label=\"det\"];\n",
                    e.from, e.to
                ));
            } else {
                out.push_str(&format!("  {} -> {};\n", e.from, e.to));
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Default for InfluenceDiagram {
    fn default() -> Self {
        Self::new()
    }
}

/// The bias-amplification simulation diagram: structural-equation
/// parameters, means, variances, error variances and n feed the generated
/// conditional distributions, which determine the marginals and the
/// marginal variances, which feed the joint estimator outcome
/// (bhat_a(X), bhat_a(empty)). Direct parameter-to-outcome edges are
/// exactly the ones drawn in the source figure (the slope and scale
/// parameters, not the intercepts, means, or error variances).
pub fn build_bias_amp_diagram() -> InfluenceDiagram {
    let mut d = InfluenceDiagram::new();
    let m = NodeKind::ManipulableParameter;
    let dist = NodeKind::Distribution;
    let f = NodeKind::Functional;
    for (id, kind, label) in [
        ("alpha_a", m, "alpha_a"),
        ("alpha_y", m, "alpha_y"),
        ("beta_a", m, "beta_a"),
        ("beta_u", m, "beta_u"),
        ("beta_x", m, "beta_x"),
        ("gamma_u", m, "gamma_u"),
        ("gamma_x", m, "gamma_x"),
        ("mu_u", m, "mu_u"),
        ("mu_x", m, "mu_x"),
        ("n", m, "n"),
        ("sigma_eps_a2", m, "sigma^2_eps_a"),
        ("sigma_eps_y2", m, "sigma^2_eps_y"),
        ("sigma_u2", m, "sigma^2_u"),
        ("sigma_x2", m, "sigma^2_x"),
        ("p_a_given_xu", dist, "P(A|X,U)"),
        ("p_y_given_axu", dist, "P(Y|A,X,U)"),
        ("p_x", dist, "P(X)"),
        ("p_u", dist, "P(U)"),
        ("p_a", dist, "P(A)"),
        ("p_y", dist, "P(Y)"),
        ("sigma_a2", f, "sigma^2_a"),
        ("sigma_y2", f, "sigma^2_y"),
        ("outcome", NodeKind::Outcome, "(bhat_a(X), bhat_a(0))"),
    ] {
        d.add_node(id, kind, label).unwrap();
    }
    for (from, to) in [
        ("mu_x", "p_x"),
        ("mu_u", "p_u"),
        ("sigma_x2", "p_x"),
        ("sigma_u2", "p_u"),
        ("gamma_x", "p_a_given_xu"),
        ("beta_u", "p_y_given_axu"),
        ("gamma_u", "p_a_given_xu"),
        ("beta_x", "p_y_given_axu"),
        ("sigma_eps_a2", "p_a_given_xu"),
        ("sigma_eps_y2", "p_y_given_axu"),
        ("alpha_a", "p_a_given_xu"),
        ("alpha_y", "p_y_given_axu"),
        ("beta_a", "p_y_given_axu"),
        ("p_a_given_xu", "p_a"),
        ("p_a_given_xu", "p_y"),
        ("p_y_given_axu", "p_y"),
        ("p_x", "p_a"),
        ("p_x", "p_y"),
        ("p_u", "p_a"),
        ("p_u", "p_y"),
        ("p_a", "sigma_a2"),
        ("p_y", "sigma_y2"),
        ("sigma_a2", "outcome"),
        ("sigma_y2", "outcome"),
        ("gamma_x", "outcome"),
        ("gamma_u", "outcome"),
        ("beta_u", "outcome"),
        ("beta_x", "outcome"),
        ("sigma_x2", "outcome"),
        ("sigma_u2", "outcome"),
        ("n", "outcome"),
    ] {
        d.add_edge(from, to, false).unwrap();
    }
    d.validate().expect("built-in diagram is valid");
    d
}

/// The mean-function comparison diagram under the SNR-fixing design: the
/// covariate count feeds both the mean function and the regressor
/// distribution, the signal deterministically sets the irreducible error
/// (which therefore is not a parentless parameter here), and the
/// irreducible error keeps direct pathways to the relative-MSE outcome
/// that do not pass through the signal-to-noise ratio.
pub fn build_mean_function_diagram() -> InfluenceDiagram {
    let mut d = InfluenceDiagram::new();
    for (id, kind, label) in [
        ("n", NodeKind::ManipulableParameter, "n"),
        ("p", NodeKind::ManipulableParameter, "p"),
        ("sigma_eps2", NodeKind::Functional, "sigma^2_eps"),
        ("mu_x", NodeKind::Functional, "mu(X)"),
        ("p_x", NodeKind::Distribution, "P(X)"),
        ("p_y_given_x", NodeKind::Distribution, "P(Y|X)"),
        ("var_mu", NodeKind::Functional, "Var(mu(X))"),
        ("snr", NodeKind::Functional, "SNR"),
        ("outcome", NodeKind::Outcome, "relative test MSE"),
    ] {
        d.add_node(id, kind, label).unwrap();
    }
    for (from, to, det) in [
        ("n", "outcome", false),
        ("mu_x", "p_y_given_x", false),
        ("mu_x", "var_mu", true),
        ("p", "p_x", false),
        ("p", "mu_x", false),
        ("var_mu", "snr", true),
        ("var_mu", "sigma_eps2", true),
        ("sigma_eps2", "snr", true),
        ("sigma_eps2", "p_y_given_x", false),
        ("sigma_eps2", "outcome", false),
        ("p_x", "var_mu", false),
        ("p_x", "outcome", false),
        ("p_y_given_x", "outcome", false),
        ("snr", "outcome", false),
    ] {
        d.add_edge(from, to, det).unwrap();
    }
    d.validate().expect("built-in diagram is valid");
    d
}

/// All simple directed paths from `source` to `outcome`, each as a node-id
/// sequence, in lexicographic order.
pub fn causal_paths(
    diagram: &InfluenceDiagram,
    source: &str,
    outcome: &str,
) -> Result<Vec<Vec<String>>> {
    diagram.node(source)?;
    diagram.node(outcome)?;
    let mut paths = Vec::new();
    let mut stack = vec![source.to_string()];
    dfs_paths(diagram, outcome, &mut stack, &mut paths);
    Ok(paths)
}

fn dfs_paths(
    diagram: &InfluenceDiagram,
    outcome: &str,
    stack: &mut Vec<String>,
    paths: &mut Vec<Vec<String>>,
) {
    let current = stack.last().unwrap().clone();
    if current == outcome {
        paths.push(stack.clone());
        return;
    }
    for child in diagram.children(&current) {
        if stack.iter().any(|s| s == child) {
            continue;
        }
        stack.push(child.to_string());
        dfs_paths(diagram, outcome, stack, paths);
        stack.pop();
    }
}

/// Classified treatment-to-outcome pathways.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub treatment: String,
    pub outcome: String,
    /// The single-edge path, when the edge exists.
    pub direct_paths: Vec<Vec<String>>,
    /// Directed paths through at least one mediator.
    pub indirect_paths: Vec<Vec<String>>,
    /// Treks from a common ancestor: directed into the treatment on one
    /// side and into the outcome on the other, sharing only the ancestor.
    pub confounding_paths: Vec<Vec<String>>,
}

/// Builds the path classification used by the `explain` command.
pub fn path_report(
    diagram: &InfluenceDiagram,
    treatment: &str,
    outcome: &str,
) -> Result<PathReport> {
    let all = causal_paths(diagram, treatment, outcome)?;
    let (direct, indirect): (Vec<_>, Vec<_>) = all.into_iter().partition(|p| p.len() == 2);

    // confounding treks: ancestor z with z -> .. -> treatment (avoiding the
    // outcome) and z -> .. -> outcome (avoiding the treatment), disjoint
    // except at z
    let mut confounding = Vec::new();
    for z in diagram.nodes() {
        if z.id == treatment || z.id == outcome {
            continue;
        }
        let to_t = causal_paths(diagram, &z.id, treatment)?;
        if to_t.is_empty() {
            continue;
        }
        let to_o = causal_paths(diagram, &z.id, outcome)?;
        for pt in &to_t {
            if pt.iter().any(|n| n == outcome) {
                continue;
            }
            for po in &to_o {
                if po.iter().any(|n| n == treatment) {
                    continue;
                }
                let shared: BTreeSet<&String> = pt.iter().filter(|n| po.contains(n)).collect();
                if shared.len() != 1 {
                    continue; // must share only the ancestor
                }
                // trek rendered treatment <- .. <- z -> .. -> outcome
                let mut trek: Vec<String> = pt.iter().rev().cloned().collect();
                trek.extend(po.iter().skip(1).cloned());
                confounding.push(trek);
            }
        }
    }
    confounding.sort();
    confounding.dedup();

    Ok(PathReport {
        treatment: treatment.to_string(),
        outcome: outcome.to_string(),
        direct_paths: direct,
        indirect_paths: indirect,
        confounding_paths: confounding,
    })
}

/// A candidate set of nodes that blocks all constrained pathways.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockingSet {
    /// Sorted node ids.
    pub nodes: Vec<String>,
    /// How many members are directly manipulable parameters.
    pub manipulable_count: usize,
}

/// Finds node sets that intercept (a) every indirect treatment-to-outcome
/// path and (b) every directed path from another manipulable parameter to
/// the outcome that passes through a treatment-affected mediator.
///
/// The search is exhaustive over subsets (size <= `max_size`) of nodes
/// lying on at least one constrained path, with memoized path node-sets.
/// Results are ranked by descending count of directly manipulable members
/// (holding a parameter constant is free), then by size, then
/// lexicographically. Returns an empty list when no set within `max_size`
/// suffices; returns the singleton empty set when nothing needs blocking.
pub fn sufficient_blocking_sets(
    diagram: &InfluenceDiagram,
    treatment: &str,
    outcome: &str,
    max_size: usize,
) -> Result<Vec<BlockingSet>> {
    diagram.node(treatment)?;
    diagram.node(outcome)?;
    if max_size < 1 {
        return Err(Error::InvalidSpec("max_size must be >= 1".into()));
    }

    let treatment_paths = causal_paths(diagram, treatment, outcome)?;
    // mediators: interior nodes of treatment->outcome paths
    let mut mediators: BTreeSet<String> = BTreeSet::new();
    for p in &treatment_paths {
        for node in &p[1..p.len() - 1] {
            mediators.insert(node.clone());
        }
    }

    // constraint paths, each reduced to the set of interceptable nodes
    let mut constraint_sets: Vec<BTreeSet<String>> = Vec::new();
    for p in &treatment_paths {
        if p.len() > 2 {
            constraint_sets.push(p[1..p.len() - 1].iter().cloned().collect());
        }
    }
    for m in diagram.nodes() {
        if m.kind != NodeKind::ManipulableParameter || m.id == treatment {
            continue;
        }
        for p in causal_paths(diagram, &m.id, outcome)? {
            if p[..p.len() - 1].iter().any(|n| mediators.contains(n)) {
                // interceptable nodes: everything but the outcome itself
                constraint_sets.push(p[..p.len() - 1].iter().cloned().collect());
            }
        }
    }

    if constraint_sets.is_empty() {
        return Ok(vec![BlockingSet {
            nodes: Vec::new(),
            manipulable_count: 0,
        }]);
    }

    // candidates: nodes on some constraint path
    let mut candidates: Vec<String> = constraint_sets
        .iter()
        .flat_map(|s| s.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    candidates.sort();
    if candidates.len() > 63 {
        return Err(Error::InvalidSpec(format!(
            "blocking-set search supports at most 63 candidate nodes, found {}",
            candidates.len()
        )));
    }
    let masks: Vec<u64> = constraint_sets
        .iter()
        .map(|s| {
            candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| s.contains(*c))
                .fold(0u64, |acc, (i, _)| acc | (1 << i))
        })
        .collect();

    let manip: Vec<bool> = candidates
        .iter()
        .map(|c| diagram.node(c).unwrap().kind == NodeKind::ManipulableParameter)
        .collect();

    let mut found: Vec<BlockingSet> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    enumerate_subsets(
        &candidates,
        &masks,
        &manip,
        max_size.min(candidates.len()),
        0,
        0u64,
        &mut chosen,
        &mut found,
    );

    found.sort_by(|a, b| {
        b.manipulable_count
            .cmp(&a.manipulable_count)
            .then(a.nodes.len().cmp(&b.nodes.len()))
            .then(a.nodes.cmp(&b.nodes))
    });
    Ok(found)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_subsets(
    candidates: &[String],
    masks: &[u64],
    manip: &[bool],
    max_size: usize,
    start: usize,
    mask: u64,
    chosen: &mut Vec<usize>,
    found: &mut Vec<BlockingSet>,
) {
    if masks.iter().all(|m| m & mask != 0) {
        found.push(BlockingSet {
            nodes: chosen.iter().map(|&i| candidates[i].clone()).collect(),
            manipulable_count: chosen.iter().filter(|&&i| manip[i]).count(),
        });
        // keep extending: supersets stay sufficient and may rank higher
        // by adding manipulable members
    }
    if chosen.len() == max_size {
        return;
    }
    for i in start..candidates.len() {
        chosen.push(i);
        enumerate_subsets(
            candidates,
            masks,
            manip,
            max_size,
            i + 1,
            mask | (1 << i),
            chosen,
            found,
        );
        chosen.pop();
    }
}

/// Removes nodes from a diagram (dropping incident edges); used to verify
/// blocking sets by path re-enumeration.
pub fn remove_nodes(diagram: &InfluenceDiagram, drop: &[String]) -> InfluenceDiagram {
    let mut d = InfluenceDiagram::new();
    for n in diagram.nodes() {
        if !drop.contains(&n.id) {
            d.add_node(&n.id, n.kind, &n.label).unwrap();
        }
    }
    for e in diagram.edges() {
        if !drop.contains(&e.from) && !drop.contains(&e.to) {
            d.add_edge(&e.from, &e.to, e.deterministic).unwrap();
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_amp_diagram_shape() {
        let d = build_bias_amp_diagram();
        // transcription count from the source figure: 14 parameters,
        // 6 distributions, 2 functionals, 1 outcome
        assert_eq!(d.nodes().len(), 23);
        assert_eq!(d.edges().len(), 31);
        assert!(d.is_acyclic());
        assert_eq!(d.outcome_nodes(), vec!["outcome"]);
        let n_edges: Vec<_> = d.edges().iter().filter(|e| e.from == "n").collect();
        assert_eq!(n_edges.len(), 1);
        assert_eq!(n_edges[0].to, "outcome");
    }

    #[test]
    fn mean_function_diagram_shape() {
        let d = build_mean_function_diagram();
        assert!(d.is_acyclic());
        assert_eq!(d.outcome_nodes(), vec!["outcome"]);
        assert!(d.edges().iter().any(|e| e.from == "p" && e.to == "mu_x"));
        assert!(d.edges().iter().any(|e| e.from == "p" && e.to == "p_x"));
        // irreducible error reaches the outcome without passing through SNR
        assert!(d
            .edges()
            .iter()
            .any(|e| e.from == "sigma_eps2" && e.to == "outcome"));
        let det = d
            .edges()
            .iter()
            .find(|e| e.from == "var_mu" && e.to == "sigma_eps2")
            .unwrap();
        assert!(det.deterministic);
    }

    #[test]
    fn gamma_u_has_three_pathways() {
        let d = build_bias_amp_diagram();
        let paths = causal_paths(&d, "gamma_u", "outcome").unwrap();
        assert_eq!(
            paths,
            vec![
                vec!["gamma_u".to_string(), "outcome".to_string()],
                vec![
                    "gamma_u".to_string(),
                    "p_a_given_xu".to_string(),
                    "p_a".to_string(),
                    "sigma_a2".to_string(),
                    "outcome".to_string()
                ],
                vec![
                    "gamma_u".to_string(),
                    "p_a_given_xu".to_string(),
                    "p_y".to_string(),
                    "sigma_y2".to_string(),
                    "outcome".to_string()
                ],
            ]
        );
    }

    #[test]
    fn n_has_single_path_and_alpha_a_only_via_treatment_distribution() {
        let d = build_bias_amp_diagram();
        assert_eq!(causal_paths(&d, "n", "outcome").unwrap().len(), 1);
        let alpha_paths = causal_paths(&d, "alpha_a", "outcome").unwrap();
        assert_eq!(alpha_paths.len(), 2);
        assert!(alpha_paths.iter().all(|p| p[1] == "p_a_given_xu"));
    }

    #[test]
    fn path_order_is_stable() {
        let d = build_bias_amp_diagram();
        let a = causal_paths(&d, "gamma_x", "outcome").unwrap();
        let b = causal_paths(&d, "gamma_x", "outcome").unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(a, sorted);
    }

    #[test]
    fn papers_blocking_set_is_found() {
        let d = build_bias_amp_diagram();
        let sets = sufficient_blocking_sets(&d, "gamma_u", "outcome", 8).unwrap();
        let paper_set: Vec<String> = [
            "beta_a", "beta_u", "beta_x", "gamma_x", "sigma_a2", "sigma_u2", "sigma_x2", "sigma_y2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert!(
            sets.iter().any(|s| s.nodes == paper_set),
            "paper's blocking set missing from {} results",
            sets.len()
        );
        // ranking prefers manipulable members
        assert!(sets[0].manipulable_count >= sets.last().unwrap().manipulable_count);
    }

    #[test]
    fn blocking_sets_block_on_reenumeration() {
        let d = build_bias_amp_diagram();
        let sets = sufficient_blocking_sets(&d, "gamma_u", "outcome", 4).unwrap();
        assert!(!sets.is_empty());
        for s in sets.iter().take(50) {
            let pruned = remove_nodes(&d, &s.nodes);
            let paths = causal_paths(&pruned, "gamma_u", "outcome").unwrap();
            assert_eq!(
                paths,
                vec![vec!["gamma_u".to_string(), "outcome".to_string()]]
            );
        }
    }

    #[test]
    fn direct_only_diagram_needs_no_blocking() {
        let mut d = InfluenceDiagram::new();
        d.add_node("t", NodeKind::ManipulableParameter, "t")
            .unwrap();
        d.add_node("o", NodeKind::Outcome, "o").unwrap();
        d.add_edge("t", "o", false).unwrap();
        let sets = sufficient_blocking_sets(&d, "t", "o", 3).unwrap();
        assert_eq!(
            sets,
            vec![BlockingSet {
                nodes: vec![],
                manipulable_count: 0
            }]
        );
    }

    #[test]
    fn manipulable_parents_are_rejected() {
        let mut d = InfluenceDiagram::new();
        d.add_node("a", NodeKind::ManipulableParameter, "a")
            .unwrap();
        d.add_node("b", NodeKind::ManipulableParameter, "b")
            .unwrap();
        d.add_edge("a", "b", false).unwrap();
        assert!(d.validate().is_err());
    }

    #[test]
    fn exports_are_deterministic_and_annotated() {
        let d = build_mean_function_diagram();
        let txt = d.to_adjacency_text();
        assert!(txt.contains("=> sigma_eps2"));
        assert_eq!(txt, d.to_adjacency_text());
        let dot = d.to_dot("mean_function_lab");
        assert!(dot.contains("digraph mean_function_lab {"));
        assert!(dot.contains("var_mu -> sigma_eps2 [style=bold, label=\"det\"];"));
    }
}
