//! Hierarchical clustering of treebank-embedding vectors.
//!
//! [`ward_cluster`] groups labelled vectors bottom-up, at each step merging
//! the pair whose union least increases the within-cluster sum of squared
//! deviations (Ward's criterion, computed with the Lance-Williams update).
//! The resulting [`Dendrogram`] can be cut into a fixed number of groups
//! with [`Dendrogram::cut_groups`]. Vectors typically come from
//! [`Model::treebank_embeddings`](crate::parser::Model::treebank_embeddings).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Errors from clustering.
#[derive(Debug, Error)]
pub enum ClusterError {
    /// Fewer than two vectors were supplied.
    #[error("need at least two vectors to cluster, got {count}")]
    TooFew {
        /// Number of vectors supplied.
        count: usize,
    },
    /// A vector's dimensionality disagrees with the first vector's.
    #[error("vector {label:?} has dimension {got}, expected {expected}")]
    DimMismatch {
        /// Label of the offending vector.
        label: String,
        /// Its dimensionality.
        got: usize,
        /// Dimensionality of the first vector.
        expected: usize,
    },
    /// Two vectors share a label, which would break deterministic
    /// tie-breaking.
    #[error("duplicate label {label:?}")]
    DuplicateLabel {
        /// The repeated label.
        label: String,
    },
    /// Requested group count is outside 1..=leaves.
    #[error("cut size {k} out of range 1..={leaves}")]
    BadCut {
        /// Requested group count.
        k: usize,
        /// Number of leaves in the dendrogram.
        leaves: usize,
    },
}

/// One agglomerative merge step.
///
/// Cluster ids: leaves are 0..n, and the i-th merge (0-based) creates
/// cluster n+i.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    /// Smaller id of the two merged clusters.
    pub a: usize,
    /// Larger id of the two merged clusters.
    pub b: usize,
    /// Increase in within-cluster sum of squares caused by the merge.
    pub distance: f64,
    /// Leaf count of the new cluster.
    pub size: usize,
}

/// Full merge history of an agglomerative clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    /// Leaf labels in input order; leaf i has cluster id i.
    pub labels: Vec<String>,
    /// The n-1 merges in execution order; distances are non-decreasing.
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Number of leaves.
    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    /// The `k` groups obtained by undoing the last `k-1` merges.
    ///
    /// Each group lists its leaf labels sorted; groups are ordered by their
    /// smallest label. The groups always partition the full leaf set.
    pub fn cut_groups(&self, k: usize) -> Result<Vec<Vec<String>>, ClusterError> {
        let n = self.n_leaves();
        if k < 1 || k > n {
            return Err(ClusterError::BadCut { k, leaves: n });
        }
        // Union-find over cluster ids; applying the first n-k merges leaves
        // exactly k components.
        let mut parent: Vec<usize> = (0..n + self.merges.len()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for (step, merge) in self.merges.iter().take(n - k).enumerate() {
            let ra = find(&mut parent, merge.a);
            let rb = find(&mut parent, merge.b);
            parent[ra] = n + step;
            parent[rb] = n + step;
        }
        let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for leaf in 0..n {
            let root = find(&mut parent, leaf);
            groups.entry(root).or_default().push(self.labels[leaf].clone());
        }
        let mut out: Vec<Vec<String>> = groups.into_values().collect();
        for group in &mut out {
            group.sort();
        }
        out.sort();
        Ok(out)
    }
}

impl fmt::Display for Dendrogram {
    /// Text merge table: leaf rows, then one row per merge.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, label) in self.labels.iter().enumerate() {
            writeln!(f, "leaf\t{i}\t{label}")?;
        }
        let n = self.n_leaves();
        for (step, m) in self.merges.iter().enumerate() {
            writeln!(
                f,
                "merge\t{}\t{}\t{}\t{:.6}\t{}",
                n + step,
                m.a,
                m.b,
                m.distance,
                m.size
            )?;
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters labelled vectors with Ward's method.
///
/// The merge distance is the increase in within-cluster sum of squared
/// deviations; for two single points that is half their squared Euclidean
/// distance. Ties are broken lexicographically on each cluster's smallest
/// leaf label, so the result is deterministic.
pub fn ward_cluster(vectors: &[(String, Vec<f64>)]) -> Result<Dendrogram, ClusterError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ClusterError::TooFew { count: n });
    }
    let dim = vectors[0].1.len();
    let mut seen = HashSet::new();
    for (label, vector) in vectors {
        if vector.len() != dim {
            return Err(ClusterError::DimMismatch {
                label: label.clone(),
                got: vector.len(),
                expected: dim,
            });
        }
        if !seen.insert(label.as_str()) {
            return Err(ClusterError::DuplicateLabel { label: label.clone() });
        }
    }

    // Active clusters: (id, leaf count, smallest leaf label).
    let mut active: Vec<(usize, usize, String)> =
        vectors.iter().enumerate().map(|(i, (label, _))| (i, 1, label.clone())).collect();
    // Pairwise merge costs keyed by (smaller id, larger id).
    let mut dist: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            dist.insert((i, j), 0.5 * squared_distance(&vectors[i].1, &vectors[j].1));
        }
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        // Cheapest pair, ties broken on the ordered label pair.
        let mut best: Option<(f64, &str, &str, usize, usize)> = None;
        for ai in 0..active.len() {
            for aj in ai + 1..active.len() {
                let key = (active[ai].0.min(active[aj].0), active[ai].0.max(active[aj].0));
                let d = dist[&key];
                let (la, lb) = if active[ai].2 <= active[aj].2 {
                    (active[ai].2.as_str(), active[aj].2.as_str())
                } else {
                    (active[aj].2.as_str(), active[ai].2.as_str())
                };
                let better = match &best {
                    None => true,
                    Some((bd, bla, blb, _, _)) => {
                        d < *bd || (d == *bd && (la, lb) < (*bla, *blb))
                    }
                };
                if better {
                    best = Some((d, la, lb, ai, aj));
                }
            }
        }
        let (d, _, _, ai, aj) = best.expect("at least one active pair remains");
        let (id_i, size_i, label_i) = active[ai].clone();
        let (id_j, size_j, label_j) = active[aj].clone();
        let new_id = n + step;
        let new_size = size_i + size_j;

        // Lance-Williams update of the merge cost to every other cluster.
        for &(id_k, size_k, _) in &active {
            if id_k == id_i || id_k == id_j {
                continue;
            }
            let d_ik = dist[&(id_i.min(id_k), id_i.max(id_k))];
            let d_jk = dist[&(id_j.min(id_k), id_j.max(id_k))];
            let total = (size_i + size_j + size_k) as f64;
            let updated = ((size_i + size_k) as f64 * d_ik + (size_j + size_k) as f64 * d_jk
                - size_k as f64 * d)
                / total;
            dist.insert((id_k.min(new_id), id_k.max(new_id)), updated);
        }

        merges.push(Merge { a: id_i.min(id_j), b: id_i.max(id_j), distance: d, size: new_size });
        // Replace the two merged clusters with the union; retain order by
        // removing the later index first.
        active.remove(aj);
        active.remove(ai);
        active.push((new_id, new_size, if label_i <= label_j { label_i } else { label_j }));
    }

    Ok(Dendrogram { labels: vectors.iter().map(|(l, _)| l.clone()).collect(), merges })
}
