use serde::Serialize;

use super::{ClusterAssignment, Linkage, LinkageTree, Merge, Metric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct MergeList<'a> {
    pub linkage: Linkage,
    pub metric: Metric,
    pub labels: &'a [String],
    pub merges: &'a [Merge],
}

impl<'a> From<&'a LinkageTree> for MergeList<'a> {
    fn from(t: &'a LinkageTree) -> Self {
        MergeList { linkage: t.linkage, metric: t.metric, labels: &t.labels, merges: &t.merges }
    }
}

fn quote(label: &str) -> String {
    if label.chars().any(|c| " ()[]':;,".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// Newick rendering. A node's branch length is its parent's merge height minus
/// its own (leaves sit at height 0), so root-to-leaf paths sum to the root height.
pub fn newick(tree: &LinkageTree) -> String {
    let n = tree.leaf_count();
    let height = |node: usize| if node < n { 0.0 } else { tree.merges[node - n].height };
    if tree.merges.is_empty() {
        return format!("{};", quote(&tree.labels[0]));
    }
    enum Step {
        Enter(usize, f64),
        Comma,
        Close(usize, Option<f64>),
    }
    let root = n + tree.merges.len() - 1;
    let mut out = String::from("(");
    let m = &tree.merges[root - n];
    let mut stack = vec![Step::Close(root, None), Step::Enter(m.b, m.height), Step::Comma, Step::Enter(m.a, m.height)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Comma => out.push(','),
            Step::Enter(node, parent) if node < n => {
                out.push_str(&format!("{}:{}", quote(&tree.labels[node]), parent));
            }
            Step::Enter(node, parent) => {
                let m = &tree.merges[node - n];
                out.push('(');
                stack.push(Step::Close(node, Some(parent)));
                stack.push(Step::Enter(m.b, m.height));
                stack.push(Step::Comma);
                stack.push(Step::Enter(m.a, m.height));
            }
            Step::Close(node, parent) => {
                out.push(')');
                if let Some(p) = parent {
                    out.push_str(&format!(":{}", p - height(node)));
                }
            }
        }
    }
    out.push(';');
    out
}

/// Member × facet matrix in dendrogram leaf order, with each member's cluster.
pub fn heatmap_csv<P: AsRef<[f64]>>(tree: &LinkageTree, points: &[P], assignment: &ClusterAssignment) -> Result<String> {
    if points.len() != tree.leaf_count() || assignment.labels.len() != tree.leaf_count() {
        return Err(Error::InvalidArgument("heatmap inputs disagree on member count".into()));
    }
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["member".to_string(), "cluster".to_string()];
    header.extend((1..=dim).map(|f| format!("f{f:02}")));
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for leaf in tree.leaf_order() {
        let mut row = vec![tree.labels[leaf].clone(), assignment.labels[leaf].to_string()];
        row.extend(points[leaf].as_ref().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{cut_tree, hcluster};

    fn tree(points: &[Vec<f64>], names: &[&str]) -> LinkageTree {
        let labels = names.iter().map(|s| s.to_string()).collect();
        hcluster(points, labels, Metric::Euclidean, Linkage::Average).unwrap()
    }

    #[test]
    fn newick_three_points() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        let t = tree(&pts, &["AA", "BB", "CC"]);
        // {AA,BB} at 1, joined to CC at average distance 9.5
        assert_eq!(newick(&t), "(CC:9.5,(AA:1,BB:1):8.5);");
    }

    #[test]
    fn newick_quotes_labels() {
        let pts = vec![vec![0.0], vec![2.0]];
        let t = tree(&pts, &["a b", "it's"]);
        assert_eq!(newick(&t), "('a b':2,'it''s':2);");
    }

    #[test]
    fn heatmap_follows_leaf_order() {
        let pts = vec![vec![0.0, 1.0], vec![10.0, 1.0], vec![0.5, 1.0]];
        let t = tree(&pts, &["x", "y", "z"]);
        let a = cut_tree(&t, 2, &pts).unwrap();
        let csv = heatmap_csv(&t, &pts, &a).unwrap();
        assert_eq!(csv, "member,cluster,f01,f02\ny,1,10,1\nx,0,0,1\nz,0,0.5,1\n");
    }
}
