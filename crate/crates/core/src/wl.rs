//! Rooted subgraph extraction by Weisfeiler-Lehman relabeling.
//!
//! The degree-0 token of a node is its label. The degree-`d` token is the
//! node's degree-`d-1` token followed by the sorted degree-`d-1` tokens of its
//! out-neighbors: `prev(n1,n2,...)`. A node without out-neighbors yields
//! `prev()`. Inside composite tokens, `\`, `(`, `,` and `)` occurring in a
//! node label are backslash-escaped, which keeps the encoding injective.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::graph::DependencyGraph;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubgraphToken {
    pub view: String,
    pub degree: usize,
    pub text: String,
}

impl SubgraphToken {
    /// Vocabulary key: the text with degree-0 labels escaped, so that a raw
    /// label can never collide with a composite token.
    pub fn key(&self) -> Cow<'_, str> {
        if self.degree == 0 {
            escape_label(&self.text)
        } else {
            Cow::Borrowed(&self.text)
        }
    }
}

pub fn escape_label(label: &str) -> Cow<'_, str> {
    if !label.contains(['\\', '(', ',', ')']) {
        return Cow::Borrowed(label);
    }
    let mut out = String::with_capacity(label.len() + 4);
    for ch in label.chars() {
        if matches!(ch, '\\' | '(' | ',' | ')') {
            out.push('\\');
        }
        out.push(ch);
    }
    Cow::Owned(out)
}

/// Encoded tokens of every node, one level per degree. `levels[d][n]` is the
/// composable encoding of node `n` at degree `d` (degree 0 escaped).
fn relabel_levels(graph: &DependencyGraph, max_degree: usize) -> Vec<Vec<String>> {
    let adjacency = graph.out_neighbors();
    let mut levels: Vec<Vec<String>> = Vec::with_capacity(max_degree + 1);
    levels.push(
        graph
            .labels
            .iter()
            .map(|l| escape_label(l).into_owned())
            .collect(),
    );
    for d in 1..=max_degree {
        let prev = &levels[d - 1];
        let next = adjacency
            .iter()
            .enumerate()
            .map(|(n, neighbors)| {
                let mut around: Vec<&str> = neighbors.iter().map(|&m| prev[m].as_str()).collect();
                around.sort_unstable();
                let mut token = String::with_capacity(
                    prev[n].len() + 2 + around.iter().map(|s| s.len() + 1).sum::<usize>(),
                );
                token.push_str(&prev[n]);
                token.push('(');
                for (i, s) in around.iter().enumerate() {
                    if i > 0 {
                        token.push(',');
                    }
                    token.push_str(s);
                }
                token.push(')');
                token
            })
            .collect();
        levels.push(next);
    }
    levels
}

fn make_token(graph: &DependencyGraph, levels: &[Vec<String>], node: usize, degree: usize) -> SubgraphToken {
    let text = if degree == 0 {
        graph.labels[node].clone()
    } else {
        levels[degree][node].clone()
    };
    SubgraphToken {
        view: graph.view.clone(),
        degree,
        text,
    }
}

/// Rooted subgraph of the given degree around one node.
pub fn wl_subgraph(node: usize, graph: &DependencyGraph, degree: usize) -> Result<SubgraphToken> {
    if node >= graph.node_count() {
        return Err(Error::NodeOutOfRange {
            index: node,
            nodes: graph.node_count(),
        });
    }
    let levels = relabel_levels(graph, degree);
    Ok(make_token(graph, &levels, node, degree))
}

/// All rooted subgraphs of degrees `0..=max_degree`, node by node.
///
/// The result is a multiset of exactly `|N| * (max_degree + 1)` tokens.
pub fn get_subgraphs(graph: &DependencyGraph, max_degree: usize) -> Vec<SubgraphToken> {
    if graph.is_empty() {
        return Vec::new();
    }
    let levels = relabel_levels(graph, max_degree);
    let mut out = Vec::with_capacity(graph.node_count() * (max_degree + 1));
    for node in 0..graph.node_count() {
        for degree in 0..=max_degree {
            out.push(make_token(graph, &levels, node, degree));
        }
    }
    out
}
