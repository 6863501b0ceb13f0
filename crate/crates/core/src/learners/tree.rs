//! CART regression tree with squared-error impurity.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtParams {
    pub min_leaf_size: usize,
    pub max_depth: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            min_leaf_size: 4,
            max_depth: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
        count: usize,
    },
}

/// A trained tree stored as a flat arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtModel {
    nodes: Vec<Node>,
    n_features: usize,
    params: DtParams,
}

impl DtModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> DtParams {
        self.params
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Structural checks for trees that did not come from [`train_dt`].
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::CorruptDb(msg));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        if self.n_features == 0 {
            return bad("tree has zero features".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            if std::mem::replace(&mut seen[at], true) {
                return bad(format!("node {at} is reachable twice"));
            }
            match self.nodes[at] {
                Node::Leaf { mean, .. } if !mean.is_finite() => {
                    return bad(format!("leaf {at} has a non-finite mean"))
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= self.n_features || !threshold.is_finite() {
                        return bad(format!("split {at} is malformed"));
                    }
                    for child in [left, right] {
                        if child <= at || child >= self.nodes.len() {
                            return bad(format!("split {at} points to invalid child {child}"));
                        }
                        stack.push(child);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("tree has unreachable nodes".into());
        }
        Ok(())
    }
}

/// Grows a regression tree greedily.
///
/// Every node scans, for each feature, the midpoints between consecutive
/// distinct sorted values and takes the split with the largest squared-error
/// reduction whose children both hold at least `min_leaf_size` rows. Ties
/// keep the lowest feature index, then the lowest threshold. A node becomes a
/// leaf when it has fewer than `2 * min_leaf_size` rows, reaches `max_depth`,
/// has constant targets or admits no improving split.
pub fn train_dt(x: &[Vec<f64>], y: &[f64], params: DtParams) -> Result<DtModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::NotEnoughData("empty training set".into()));
    }
    if params.min_leaf_size == 0 {
        return Err(Error::param("min_leaf_size", "must be >= 1"));
    }
    let n_features = x[0].len();
    if n_features == 0 {
        return Err(Error::param("x", "rows need at least one feature"));
    }
    if let Some(row) = x.iter().find(|r| r.len() != n_features) {
        return Err(Error::LengthMismatch {
            expected: n_features,
            got: row.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("x", "training data must be finite"));
    }

    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|f| x.iter().map(|r| r[f]).collect())
        .collect();
    let mut builder = Builder {
        columns: &columns,
        y,
        params,
        nodes: Vec::new(),
        order: Vec::with_capacity(y.len()),
    };
    let rows: Vec<usize> = (0..y.len()).collect();
    builder.grow(rows, 0);
    Ok(DtModel {
        nodes: builder.nodes,
        n_features,
        params,
    })
}

/// Root-to-leaf traversal; goes left iff `x[feature] <= threshold`.
pub fn predict_dt(model: &DtModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features {
        return Err(Error::LengthMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    let mut at = 0;
    loop {
        match model.nodes[at] {
            Node::Leaf { mean, .. } => return Ok(mean),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => at = if x[feature] <= threshold { left } else { right },
        }
    }
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    y: &'a [f64],
    params: DtParams,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let first = self.y[rows[0]];
        let constant = rows.iter().all(|&r| self.y[r] == first);
        let mean = if constant {
            first
        } else {
            rows.iter().map(|&r| self.y[r]).sum::<f64>() / n as f64
        };
        self.nodes.push(Node::Leaf { mean, count: n });

        if constant || n < 2 * self.params.min_leaf_size || depth >= self.params.max_depth {
            return id;
        }
        let Some(best) = self.best_split(&rows, mean) else {
            return id;
        };

        let col = &self.columns[best.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| col[r] <= best.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], mean: f64) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf_size;
        let total: f64 = rows.iter().map(|&r| self.y[r] - mean).sum();
        let mut best: Option<BestSplit> = None;

        for (feature, col) in self.columns.iter().enumerate() {
            self.order.clear();
            self.order.extend_from_slice(rows);
            self.order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));

            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.y[self.order[k - 1]] - mean;
                let (lo, hi) = (col[self.order[k - 1]], col[self.order[k]]);
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                // Reduction in SSE relative to the parent, on centred targets.
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold: (lo + hi) / 2.0,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }
}
