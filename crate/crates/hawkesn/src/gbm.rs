//! Gradient-boosted regression trees with squared-error loss.
//!
//! Boosting with squared error reduces to fitting each tree to the current
//! residuals. Trees are grown greedily by exact split search; depth and leaf
//! size are the only regularizers. Training is fully deterministic: no row
//! or feature subsampling, ties broken by feature order then threshold.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GbmParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams { rounds: 200, learning_rate: 0.1, max_depth: 2, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, Serialize)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(
    rows: &[usize],
    features: &[Vec<f64>],
    residuals: &[f64],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total_sum: f64 = rows.iter().map(|&r| residuals[r]).sum();
    let parent_score = total_sum * total_sum / n as f64;

    let mut best: Option<SplitChoice> = None;
    for (f_idx, column) in features.iter().enumerate() {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));

        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += residuals[order[i]];
            let (a, b) = (column[order[i]], column[order[i + 1]]);
            if a == b {
                continue; // not a valid cut point
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / n_right as f64
                - parent_score;
            let threshold = 0.5 * (a + b);
            let better = match &best {
                None => gain > 1e-12,
                Some(cur) => gain > cur.gain + 1e-12,
            };
            if better {
                best = Some(SplitChoice { feature: f_idx, threshold, gain });
            }
        }
    }
    best
}

fn grow(
    nodes: &mut Vec<Node>,
    rows: Vec<usize>,
    features: &[Vec<f64>],
    residuals: &[f64],
    depth: usize,
    params: &GbmParams,
) -> usize {
    let mean = rows.iter().map(|&r| residuals[r]).sum::<f64>() / rows.len().max(1) as f64;
    let split = if depth < params.max_depth {
        best_split(&rows, features, residuals, params.min_leaf)
    } else {
        None
    };
    let Some(choice) = split else {
        nodes.push(Node::Leaf(mean));
        return nodes.len() - 1;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| features[choice.feature][r] <= choice.threshold);
    let slot = nodes.len();
    nodes.push(Node::Leaf(mean)); // placeholder
    let left = grow(nodes, left_rows, features, residuals, depth + 1, params);
    let right = grow(nodes, right_rows, features, residuals, depth + 1, params);
    nodes[slot] = Node::Split { feature: choice.feature, threshold: choice.threshold, left, right };
    slot
}

/// A fitted boosted ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct Gbm {
    base: f64,
    trees: Vec<Tree>,
    params: GbmParams,
    n_features: usize,
}

impl Gbm {
    /// Fit on row-major samples. All rows must share the feature count.
    pub fn fit(samples: &[Vec<f64>], targets: &[f64], params: &GbmParams) -> Result<Gbm> {
        if samples.is_empty() || samples.len() != targets.len() {
            return Err(Error::Precondition(format!(
                "{} samples vs {} targets",
                samples.len(),
                targets.len()
            )));
        }
        let n_features = samples[0].len();
        if samples.iter().any(|s| s.len() != n_features) {
            return Err(Error::Precondition("ragged feature matrix".into()));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Precondition("targets must be finite".into()));
        }

        // column-major copy for cache-friendly split scans
        let features: Vec<Vec<f64>> = (0..n_features)
            .map(|f| samples.iter().map(|s| s[f]).collect())
            .collect();

        let n = targets.len();
        let base = targets.iter().sum::<f64>() / n as f64;
        let mut predictions = vec![base; n];
        let mut residuals = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.rounds);
        let all_rows: Vec<usize> = (0..n).collect();

        for _ in 0..params.rounds {
            for i in 0..n {
                residuals[i] = targets[i] - predictions[i];
            }
            let mut nodes = Vec::new();
            grow(&mut nodes, all_rows.clone(), &features, &residuals, 0, params);
            let tree = Tree { nodes };
            if tree.nodes.len() == 1 {
                if let Node::Leaf(v) = tree.nodes[0] {
                    if v.abs() < 1e-15 {
                        break; // residuals exhausted
                    }
                }
            }
            for i in 0..n {
                predictions[i] += params.learning_rate * tree.predict(&samples[i]);
            }
            trees.push(tree);
        }

        Ok(Gbm { base, trees, params: *params, n_features })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features);
        self.base
            + self.params.learning_rate
                * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_target_predicts_the_constant() {
        let samples: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let targets = vec![3.25; 30];
        let model = Gbm::fit(&samples, &targets, &GbmParams::default()).unwrap();
        assert_eq!(model.n_trees(), 0); // zero residuals right away
        for s in &samples {
            assert_eq!(model.predict(s), 3.25);
        }
    }

    #[test]
    fn learns_a_step_function() {
        let samples: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        let targets: Vec<f64> =
            samples.iter().map(|s| if s[0] < 0.37 { -1.0 } else { 2.0 }).collect();
        let model = Gbm::fit(&samples, &targets, &GbmParams::default()).unwrap();
        for (s, &t) in samples.iter().zip(&targets) {
            assert_relative_eq!(model.predict(s), t, epsilon = 1e-6);
        }
    }

    #[test]
    fn depth_two_captures_an_interaction() {
        let mut samples = Vec::new();
        let mut targets = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let x = i as f64 / 20.0;
                let y = j as f64 / 20.0;
                samples.push(vec![x, y]);
                targets.push(if (x > 0.5) == (y > 0.5) { 1.0 } else { 0.0 });
            }
        }
        let model = Gbm::fit(&samples, &targets, &GbmParams::default()).unwrap();
        let sse: f64 = samples
            .iter()
            .zip(&targets)
            .map(|(s, &t)| (model.predict(s) - t).powi(2))
            .sum::<f64>()
            / samples.len() as f64;
        assert!(sse < 0.01, "mean squared error {sse}");
    }

    #[test]
    fn training_is_deterministic() {
        let samples: Vec<Vec<f64>> =
            (0..50).map(|i| vec![(i * 13 % 17) as f64, (i * 5 % 11) as f64]).collect();
        let targets: Vec<f64> = (0..50).map(|i| ((i * 7) % 23) as f64 / 23.0).collect();
        let a = Gbm::fit(&samples, &targets, &GbmParams::default()).unwrap();
        let b = Gbm::fit(&samples, &targets, &GbmParams::default()).unwrap();
        for s in &samples {
            assert_eq!(a.predict(s).to_bits(), b.predict(s).to_bits());
        }
    }

    #[test]
    fn rejects_ragged_or_mismatched_input() {
        assert!(Gbm::fit(&[], &[], &GbmParams::default()).is_err());
        assert!(Gbm::fit(&[vec![1.0]], &[1.0, 2.0], &GbmParams::default()).is_err());
        assert!(
            Gbm::fit(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0], &GbmParams::default()).is_err()
        );
        assert!(Gbm::fit(&[vec![1.0]], &[f64::NAN], &GbmParams::default()).is_err());
    }
}
