use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::causal_tree::{CausalNode, CausalTree};

/// Side of a split. `Lt` is the left child, `Ge` the right one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Lt => value < threshold,
            Relation::Ge => value >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature_index: usize,
    pub feature_name: String,
    pub relation: Relation,
    pub threshold: f64,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.feature_name, self.relation.symbol(), self.threshold)
    }
}

/// Root-to-leaf description of one causal-tree leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafReport {
    pub leaf_id: usize,
    pub path: Vec<Condition>,
    pub tau_hat: f64,
    pub n_treated: usize,
    pub n_control: usize,
}

impl LeafReport {
    /// Whether `covariates` satisfy every condition on the path.
    pub fn matches(&self, covariates: &[f64]) -> bool {
        self.path
            .iter()
            .all(|c| c.relation.holds(covariates[c.feature_index], c.threshold))
    }

    pub fn path_string(&self) -> String {
        if self.path.is_empty() {
            return "all patients".to_string();
        }
        self.path
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

fn feature_name(names: &[String], index: usize) -> String {
    names.get(index).cloned().unwrap_or_else(|| format!("x_{index}"))
}

/// One report per leaf in leaf-id order. Missing names fall back to `x_<index>`.
pub fn extract_leaf_reports(tree: &CausalTree, feature_names: &[String]) -> Vec<LeafReport> {
    let mut out = Vec::with_capacity(tree.n_leaves());
    let mut path = Vec::new();
    collect(tree.root(), feature_names, &mut path, &mut out);
    out.sort_by_key(|r| r.leaf_id);
    out
}

fn collect(node: &CausalNode, names: &[String], path: &mut Vec<Condition>, out: &mut Vec<LeafReport>) {
    match node {
        CausalNode::Split {
            feature_index,
            threshold,
            left,
            right,
            ..
        } => {
            for (relation, child) in [(Relation::Lt, left), (Relation::Ge, right)] {
                path.push(Condition {
                    feature_index: *feature_index,
                    feature_name: feature_name(names, *feature_index),
                    relation,
                    threshold: *threshold,
                });
                collect(child, names, path, out);
                path.pop();
            }
        }
        CausalNode::Leaf(leaf) => out.push(LeafReport {
            leaf_id: leaf.leaf_id,
            path: path.clone(),
            tau_hat: leaf.tau_hat,
            n_treated: leaf.n_treated,
            n_control: leaf.n_control,
        }),
    }
}

/// Graphviz rendering; leaf boxes carry the effect in days and arm counts.
pub fn to_dot(tree: &CausalTree, feature_names: &[String]) -> String {
    let mut out = String::from("digraph causal_tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    let mut next_id = 0usize;
    dot_node(tree.root(), feature_names, &mut next_id, &mut out);
    out.push_str("}\n");
    out
}

fn dot_node(node: &CausalNode, names: &[String], next_id: &mut usize, out: &mut String) -> usize {
    let id = *next_id;
    *next_id += 1;
    match node {
        CausalNode::Split {
            feature_index,
            threshold,
            left,
            right,
            ..
        } => {
            let _ = writeln!(
                out,
                "  n{id} [label=\"{} < {}\"];",
                escape(&feature_name(names, *feature_index)),
                threshold
            );
            let l = dot_node(left, names, next_id, out);
            let r = dot_node(right, names, next_id, out);
            let _ = writeln!(out, "  n{id} -> n{l} [label=\"yes\"];");
            let _ = writeln!(out, "  n{id} -> n{r} [label=\"no\"];");
        }
        CausalNode::Leaf(leaf) => {
            let fill = if leaf.tau_hat >= 0.0 { "#cfe2ff" } else { "#f8d7da" };
            let _ = writeln!(
                out,
                "  n{id} [label=\"leaf {}\\ntau = {:.2} days\\nn1 = {}, n0 = {}\", style=filled, fillcolor=\"{fill}\"];",
                leaf.leaf_id, leaf.tau_hat, leaf.n_treated, leaf.n_control
            );
        }
    }
    id
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
