//! Prior feature networks: undirected graphs over the p features of one
//! data matrix, with per-node degrees and degree-derived weights.

use crate::scalar::Scalar;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Errors raised while loading an edge list.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown feature '{name}' on line {line}")]
    UnknownFeature { name: String, line: usize },
    #[error("self-loop on line {line}")]
    SelfLoop { line: usize },
    #[error("cannot parse line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("io error reading edge list: {0}")]
    Io(String),
    #[error("custom weight table must cover degree {degree}")]
    MissingWeight { degree: usize },
}

/// Node-weight rule `w_i = f(d_i)` for nodes with degree >= 1.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule {
    /// `w_i = d_i` (the default used in all numerical studies).
    Degree,
    /// `w_i = 1`.
    Unit,
    /// `w_i = table[d_i - 1]`, all entries positive.
    Custom(Vec<f64>),
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::Degree
    }
}

impl WeightRule {
    fn weight_of(&self, degree: usize) -> Result<f64, GraphError> {
        debug_assert!(degree >= 1);
        match self {
            WeightRule::Degree => Ok(degree as f64),
            WeightRule::Unit => Ok(1.0),
            WeightRule::Custom(table) => table
                .get(degree - 1)
                .copied()
                .filter(|w| *w > 0.0)
                .ok_or(GraphError::MissingWeight { degree }),
        }
    }
}

/// Undirected feature network: deduplicated edge set plus per-node
/// degree and weight. Singletons are exactly the degree-0 nodes; their
/// stored weight is a sentinel 1 that the penalties never divide by.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph<S: Scalar> {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    weights: Vec<S>,
    duplicates_removed: usize,
}

impl<S: Scalar> FeatureGraph<S> {
    /// Graph with no edges: every node a singleton.
    pub fn empty(node_count: usize) -> Self {
        FeatureGraph {
            node_count,
            edges: Vec::new(),
            degrees: vec![0; node_count],
            weights: vec![S::one(); node_count],
            duplicates_removed: 0,
        }
    }

    /// Builds a graph from 0-based edge pairs, deduplicating unordered
    /// duplicates and rejecting self-loops.
    pub fn from_edges(
        node_count: usize,
        raw_edges: &[(usize, usize)],
        rule: &WeightRule,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        let mut duplicates = 0usize;
        for (line, &(a, b)) in raw_edges.iter().enumerate() {
            if a == b {
                return Err(GraphError::SelfLoop { line: line + 1 });
            }
            if a >= node_count || b >= node_count {
                return Err(GraphError::UnknownFeature {
                    name: format!("index {}", a.max(b) + 1),
                    line: line + 1,
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                duplicates += 1;
            }
        }
        let edges: Vec<(usize, usize)> = seen.into_iter().collect();
        let mut degrees = vec![0usize; node_count];
        for &(a, b) in &edges {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        let mut weights = vec![S::one(); node_count];
        for i in 0..node_count {
            if degrees[i] >= 1 {
                weights[i] = S::cast(rule.weight_of(degrees[i])?);
            }
        }
        Ok(FeatureGraph {
            node_count,
            edges,
            degrees,
            weights,
            duplicates_removed: duplicates,
        })
    }

    /// Parses an edge-list file: one edge per line, two whitespace- or
    /// tab-separated tokens, each a feature name or a 1-based index;
    /// lines starting with `#` and blank lines are ignored.
    pub fn load_edge_list(
        path: &Path,
        feature_names: &[String],
        rule: &WeightRule,
    ) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
        Self::parse_edge_list(&text, feature_names, rule)
    }

    /// Same as [`FeatureGraph::load_edge_list`] but from in-memory text.
    pub fn parse_edge_list(
        text: &str,
        feature_names: &[String],
        rule: &WeightRule,
    ) -> Result<Self, GraphError> {
        let p = feature_names.len();
        let resolve = |token: &str, line: usize| -> Result<usize, GraphError> {
            if let Some(idx) = feature_names.iter().position(|n| n == token) {
                return Ok(idx);
            }
            if let Ok(one_based) = token.parse::<usize>() {
                if one_based >= 1 && one_based <= p {
                    return Ok(one_based - 1);
                }
            }
            Err(GraphError::UnknownFeature {
                name: token.to_string(),
                line,
            })
        };
        let mut raw = Vec::new();
        let mut lines_seen = Vec::new();
        for (idx, lraw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = lraw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let a = tokens.next().ok_or_else(|| GraphError::ParseError {
                line: line_no,
                reason: "missing first token".into(),
            })?;
            let b = tokens.next().ok_or_else(|| GraphError::ParseError {
                line: line_no,
                reason: "missing second token".into(),
            })?;
            if tokens.next().is_some() {
                return Err(GraphError::ParseError {
                    line: line_no,
                    reason: "expected exactly two tokens".into(),
                });
            }
            let a = resolve(a, line_no)?;
            let b = resolve(b, line_no)?;
            if a == b {
                return Err(GraphError::SelfLoop { line: line_no });
            }
            raw.push((a, b));
            lines_seen.push(line_no);
        }
        Self::from_edges(p, &raw, rule)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Deduplicated undirected edges, each stored as (min, max).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Node weight under the active rule; sentinel 1 for singletons.
    pub fn weight(&self, node: usize) -> S {
        self.weights[node]
    }

    pub fn is_singleton(&self, node: usize) -> bool {
        self.degrees[node] == 0
    }

    /// Iterator over singleton node indices.
    pub fn singletons(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count).filter(|&i| self.degrees[i] == 0)
    }

    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    /// Connected components of the edge structure, singletons included,
    /// each sorted ascending and ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.node_count).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for &(a, b) in &self.edges {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut buckets: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..self.node_count {
            let r = find(&mut parent, i);
            buckets.entry(r).or_default().push(i);
        }
        buckets.into_values().collect()
    }

    /// Checks every structural invariant against the expected dimension
    /// and returns an itemized report instead of failing.
    pub fn validate(&self, expected_p: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.node_count != expected_p {
            report.issues.push(ValidationIssue::DimensionMismatch {
                node_count: self.node_count,
                expected: expected_p,
            });
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a == b {
                report.issues.push(ValidationIssue::SelfLoop { node: a });
            }
            if a >= self.node_count || b >= self.node_count {
                report
                    .issues
                    .push(ValidationIssue::NodeOutOfRange { node: a.max(b) });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                report
                    .issues
                    .push(ValidationIssue::DuplicateEdge { a: a.min(b), b: a.max(b) });
            }
        }
        let mut degrees = vec![0usize; self.node_count];
        for &(a, b) in &self.edges {
            if a < self.node_count && b < self.node_count {
                degrees[a] += 1;
                degrees[b] += 1;
            }
        }
        for i in 0..self.node_count {
            if self.degrees.get(i).copied().unwrap_or(usize::MAX) != degrees[i] {
                report.issues.push(ValidationIssue::DegreeMismatch {
                    node: i,
                    stored: self.degrees.get(i).copied().unwrap_or(0),
                    actual: degrees[i],
                });
            }
            if degrees[i] >= 1 && self.weights.get(i).map_or(true, |w| *w <= S::zero()) {
                report.issues.push(ValidationIssue::NonPositiveWeight { node: i });
            }
        }
        report.duplicates_removed_at_load = self.duplicates_removed;
        report
    }
}

/// A single problem found by [`FeatureGraph::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    DimensionMismatch { node_count: usize, expected: usize },
    SelfLoop { node: usize },
    NodeOutOfRange { node: usize },
    DuplicateEdge { a: usize, b: usize },
    DegreeMismatch { node: usize, stored: usize, actual: usize },
    NonPositiveWeight { node: usize },
}

/// Itemized result of graph validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub duplicates_removed_at_load: usize,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            write!(f, "ok")?;
        } else {
            for issue in &self.issues {
                writeln!(f, "{issue:?}")?;
            }
        }
        if self.duplicates_removed_at_load > 0 {
            write!(
                f,
                " ({} duplicate edges removed at load)",
                self.duplicates_removed_at_load
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("g{i}")).collect()
    }

    #[test]
    fn empty_file_gives_all_singletons() {
        let g: FeatureGraph<f64> =
            FeatureGraph::parse_edge_list("", &names(4), &WeightRule::Degree).unwrap();
        assert_eq!(g.edges().len(), 0);
        assert_eq!(g.singletons().count(), 4);
        assert!(g.validate(4).is_ok());
    }

    #[test]
    fn reversed_duplicate_edge_is_deduplicated() {
        let g: FeatureGraph<f64> =
            FeatureGraph::parse_edge_list("g1 g2\ng2 g1\n", &names(3), &WeightRule::Degree)
                .unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.degrees(), &[1, 1, 0]);
        assert_eq!(g.duplicates_removed(), 1);
    }

    #[test]
    fn star_graph_hub_weight_under_degree_rule() {
        let mut text = String::new();
        for leaf in 2..=6 {
            text.push_str(&format!("g1 g{leaf}\n"));
        }
        let g: FeatureGraph<f64> =
            FeatureGraph::parse_edge_list(&text, &names(6), &WeightRule::Degree).unwrap();
        assert_eq!(g.degree(0), 5);
        assert_eq!(g.weight(0), 5.0);
        for leaf in 1..6 {
            assert_eq!(g.degree(leaf), 1);
            assert_eq!(g.weight(leaf), 1.0);
        }
    }

    #[test]
    fn numeric_tokens_resolve_one_based() {
        let g: FeatureGraph<f64> =
            FeatureGraph::parse_edge_list("1 3\n# comment\n\n2 3\n", &names(3), &WeightRule::Unit)
                .unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 2)]);
        assert_eq!(g.weight(2), 1.0);
    }

    #[test]
    fn parse_errors_are_reported() {
        let err = FeatureGraph::<f64>::parse_edge_list("g1 g9", &names(3), &WeightRule::Degree)
            .unwrap_err();
        assert!(matches!(err, GraphError::UnknownFeature { line: 1, .. }));
        let err = FeatureGraph::<f64>::parse_edge_list("g1 g1", &names(3), &WeightRule::Degree)
            .unwrap_err();
        assert!(matches!(err, GraphError::SelfLoop { line: 1 }));
        let err = FeatureGraph::<f64>::parse_edge_list("g1", &names(3), &WeightRule::Degree)
            .unwrap_err();
        assert!(matches!(err, GraphError::ParseError { line: 1, .. }));
        let err =
            FeatureGraph::<f64>::parse_edge_list("g1 g2 g3", &names(3), &WeightRule::Degree)
                .unwrap_err();
        assert!(matches!(err, GraphError::ParseError { line: 1, .. }));
    }

    #[test]
    fn validation_flags_dimension_mismatch() {
        let g: FeatureGraph<f64> = FeatureGraph::empty(10);
        let report = g.validate(12);
        assert!(!report.is_ok());
        assert!(matches!(
            report.issues[0],
            ValidationIssue::DimensionMismatch {
                node_count: 10,
                expected: 12
            }
        ));
    }

    #[test]
    fn validation_flags_injected_duplicate() {
        let mut g: FeatureGraph<f64> =
            FeatureGraph::from_edges(3, &[(0, 1)], &WeightRule::Degree).unwrap();
        g.edges.push((1, 0));
        let report = g.validate(3);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::DuplicateEdge { a: 0, b: 1 })));
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        let edges = [(0, 1), (0, 2), (0, 3), (4, 5), (2, 3)];
        let g: FeatureGraph<f64> = FeatureGraph::from_edges(8, &edges, &WeightRule::Degree).unwrap();
        let total: usize = g.degrees().iter().sum();
        assert_eq!(total, 2 * g.edges().len());
        // singletons and edge endpoints partition all nodes
        let singles: BTreeSet<usize> = g.singletons().collect();
        let mut endpoints = BTreeSet::new();
        for &(a, b) in g.edges() {
            endpoints.insert(a);
            endpoints.insert(b);
        }
        assert!(singles.is_disjoint(&endpoints));
        assert_eq!(singles.len() + endpoints.len(), 8);
    }

    #[test]
    fn load_order_is_irrelevant() {
        let a: FeatureGraph<f64> =
            FeatureGraph::parse_edge_list("g1 g2\ng3 g4\ng2 g3\n", &names(4), &WeightRule::Degree)
                .unwrap();
        let b: FeatureGraph<f64> =
            FeatureGraph::parse_edge_list("g2 g3\ng1 g2\ng4 g3\n", &names(4), &WeightRule::Degree)
                .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn custom_rule_requires_table_coverage() {
        let rule = WeightRule::Custom(vec![2.0]);
        let err = FeatureGraph::<f64>::from_edges(3, &[(0, 1), (0, 2)], &rule).unwrap_err();
        assert_eq!(err, GraphError::MissingWeight { degree: 2 });
        let ok: FeatureGraph<f64> = FeatureGraph::from_edges(2, &[(0, 1)], &rule).unwrap();
        assert_eq!(ok.weight(0), 2.0);
    }

    #[test]
    fn components_group_nodes() {
        let g: FeatureGraph<f64> =
            FeatureGraph::from_edges(6, &[(0, 1), (1, 2), (4, 5)], &WeightRule::Degree).unwrap();
        let comps = g.components();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3], vec![4, 5]]);
    }
}
