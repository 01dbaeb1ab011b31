//! Residual vector quantization of node embeddings with spherical k-means.
//!
//! Layer one clusters the unit-normalized embeddings; each further layer
//! clusters the renormalized residuals left by the previous layer. A node's
//! token at layer `l` is `l * k + centroid_index`, so layers never share ids.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingTable;
use crate::par::{self, Workers};

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error("embedding table is empty")]
    EmptyTable,
    #[error("k = {k} exceeds the number of vectors ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed token file at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantizeConfig {
    pub k: usize,
    pub layers: usize,
    pub max_iter: usize,
    /// Relative change in total cosine distance below which iteration stops.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for QuantizeConfig {
    fn default() -> Self {
        Self {
            k: 150,
            layers: 2,
            max_iter: 50,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub dim: usize,
    /// Unit-norm centroids, row-major.
    pub centroids: Vec<f32>,
    pub assignment: Vec<u32>,
    /// Sum of cosine distances of points to their centroids.
    pub inertia: f64,
    pub iterations: usize,
}

impl KMeans {
    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales `v` to unit length in place; zero vectors stay zero.
pub fn normalize(v: &mut [f32]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Index of the most similar centroid; ties go to the lowest index.
fn nearest(point: &[f32], centroids: &[f32], dim: usize) -> (u32, f32) {
    let mut best = (0u32, f32::NEG_INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let s = dot(point, centroid);
        if s > best.1 {
            best = (c as u32, s);
        }
    }
    best
}

fn assign(points: &[f32], centroids: &[f32], dim: usize, workers: Workers) -> Vec<(u32, f32)> {
    let n = points.len() / dim;
    par::map_range(n, workers, |i| nearest(&points[i * dim..(i + 1) * dim], centroids, dim))
}

/// k-means++ seeding with cosine distance.
fn seed_centroids(points: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = row(first).to_vec();
    let mut dist: Vec<f64> = (0..n).map(|i| (1.0 - dot(row(i), row(first)) as f64).max(0.0)).collect();
    for _ in 1..k {
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| dist[i] * dist[i]).sum();
        let pick = if total > 0.0 {
            let mut x = rng.gen::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !chosen[i]) {
                x -= dist[i] * dist[i];
                if x < 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| !chosen[i]).expect("k <= n"))
        } else {
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[pick] = true;
        centroids.extend_from_slice(row(pick));
        for i in 0..n {
            let d = (1.0 - dot(row(i), row(pick)) as f64).max(0.0);
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    centroids
}

/// Spherical k-means over unit-norm rows of `points`.
///
/// The returned assignment is recomputed against the final centroids, so
/// every point sits with its most similar centroid.
pub fn spherical_kmeans(
    points: &[f32],
    dim: usize,
    k: usize,
    config: &QuantizeConfig,
    seed: u64,
    workers: Workers,
) -> Result<KMeans, QuantizeError> {
    let n = points.len() / dim;
    if n == 0 {
        return Err(QuantizeError::EmptyTable);
    }
    if k == 0 {
        return Err(QuantizeError::ZeroK);
    }
    if k > n {
        return Err(QuantizeError::KTooLarge { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, dim, k, &mut rng);
    let mut prev_inertia = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        let assigned = assign(points, &centroids, dim, workers);
        let inertia: f64 = assigned.iter().map(|(_, s)| 1.0 - *s as f64).sum();

        let mut sums = vec![0f32; k * dim];
        let mut sizes = vec![0usize; k];
        for (i, (c, _)) in assigned.iter().enumerate() {
            let c = *c as usize;
            sizes[c] += 1;
            sums[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&points[i * dim..(i + 1) * dim])
                .for_each(|(s, x)| *s += x);
        }
        // empty clusters take the worst-fitting points, one each
        let mut worst: Vec<usize> = (0..n).collect();
        worst.sort_by(|&a, &b| assigned[a].1.total_cmp(&assigned[b].1).then(a.cmp(&b)));
        let mut donors = worst.into_iter();
        for c in 0..k {
            let centroid = &mut sums[c * dim..(c + 1) * dim];
            if sizes[c] == 0 {
                if let Some(i) = donors.next() {
                    centroid.copy_from_slice(&points[i * dim..(i + 1) * dim]);
                }
            }
            normalize(centroid);
        }
        centroids = sums;

        let converged = prev_inertia.is_finite()
            && (prev_inertia - inertia).abs() <= config.tolerance * prev_inertia.max(f64::MIN_POSITIVE);
        prev_inertia = inertia;
        if converged || inertia == 0.0 {
            break;
        }
    }
    let final_assignment = assign(points, &centroids, dim, workers);
    let inertia = final_assignment.iter().map(|(_, s)| 1.0 - *s as f64).sum();
    Ok(KMeans {
        k,
        dim,
        centroids,
        assignment: final_assignment.into_iter().map(|(c, _)| c).collect(),
        inertia,
        iterations,
    })
}

/// Tokens per node, `layers` of them each.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenAssignment {
    pub k: usize,
    pub layers: usize,
    pub nodes: Vec<String>,
    pub tokens: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct TokenLine {
    node_id: String,
    tokens: Vec<u32>,
}

impl TokenAssignment {
    /// Vocabulary size across all layers.
    pub fn vocab_size(&self) -> usize {
        self.k * self.layers
    }

    pub fn tokens_for(&self, node: &str) -> Option<&[u32]> {
        self.nodes.iter().position(|n| n == node).map(|i| self.tokens[i].as_slice())
    }

    pub fn index(&self) -> std::collections::HashMap<&str, &[u32]> {
        self.nodes
            .iter()
            .zip(&self.tokens)
            .map(|(n, t)| (n.as_str(), t.as_slice()))
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (node, tokens) in self.nodes.iter().zip(&self.tokens) {
            let line = TokenLine {
                node_id: node.clone(),
                tokens: tokens.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&line).expect("token line serializes"))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, k: usize) -> Result<TokenAssignment, QuantizeError> {
        let mut nodes = Vec::new();
        let mut tokens = Vec::new();
        let mut layers = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| QuantizeError::Malformed { line: i + 1, reason };
            let t: TokenLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            if *layers.get_or_insert(t.tokens.len()) != t.tokens.len() {
                return Err(malformed("inconsistent token count".into()));
            }
            if t.tokens.iter().any(|&x| x as usize >= k * t.tokens.len()) {
                return Err(malformed(format!("token outside vocabulary of {}", k * t.tokens.len())));
            }
            nodes.push(t.node_id);
            tokens.push(t.tokens);
        }
        Ok(TokenAssignment {
            k,
            layers: layers.unwrap_or(0),
            nodes,
            tokens,
        })
    }
}

/// Quantizes every row of `table` into `config.layers` tokens. Also returns
/// the per-layer clusterings.
pub fn quantize(
    table: &EmbeddingTable,
    config: &QuantizeConfig,
    workers: Workers,
) -> Result<(TokenAssignment, Vec<KMeans>), QuantizeError> {
    if table.is_empty() {
        return Err(QuantizeError::EmptyTable);
    }
    let dim = table.dim;
    let mut current = table.data.clone();
    for row in current.chunks_exact_mut(dim) {
        normalize(row);
    }
    let mut tokens = vec![Vec::with_capacity(config.layers); table.len()];
    let mut models = Vec::with_capacity(config.layers);
    for layer in 0..config.layers {
        let km = spherical_kmeans(
            &current,
            dim,
            config.k,
            config,
            config.seed.wrapping_add(layer as u64),
            workers,
        )?;
        for (i, c) in km.assignment.iter().enumerate() {
            tokens[i].push((layer * config.k) as u32 + c);
            let centroid = km.centroid(*c as usize);
            let row = &mut current[i * dim..(i + 1) * dim];
            row.iter_mut().zip(centroid).for_each(|(x, m)| *x -= m);
            normalize(row);
        }
        models.push(km);
    }
    Ok((
        TokenAssignment {
            k: config.k,
            layers: config.layers,
            nodes: table.nodes.clone(),
            tokens,
        },
        models,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<f32>>) -> EmbeddingTable {
        EmbeddingTable {
            nodes: (0..rows.len()).map(|i| format!("n{i}")).collect(),
            dim: rows[0].len(),
            data: rows.concat(),
        }
    }

    fn bundles(seed: u64) -> (EmbeddingTable, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (b, axis) in axes.iter().enumerate() {
            for _ in 0..40 {
                rows.push(axis.iter().map(|x| *x as f32 + rng.gen_range(-0.1f32..0.1)).collect());
                labels.push(b);
            }
        }
        (table(rows), labels)
    }

    #[test]
    fn recovers_separated_bundles() {
        let (t, labels) = bundles(1);
        let cfg = QuantizeConfig {
            k: 3,
            layers: 1,
            ..Default::default()
        };
        let (tokens, _) = quantize(&t, &cfg, Workers::SINGLE).unwrap();
        // purity: each cluster holds a single bundle
        let mut map = std::collections::HashMap::new();
        for (i, tk) in tokens.tokens.iter().enumerate() {
            let prev = map.insert(tk[0], labels[i]);
            assert!(prev.is_none() || prev == Some(labels[i]));
        }
        assert_eq!(map.len(), 3);
    }

    #[test]
    fn k_equal_to_n_gives_singletons() {
        let (t, _) = bundles(2);
        let cfg = QuantizeConfig {
            k: t.len(),
            layers: 1,
            ..Default::default()
        };
        let (tokens, _) = quantize(&t, &cfg, Workers::SINGLE).unwrap();
        let distinct: std::collections::HashSet<u32> = tokens.tokens.iter().map(|t| t[0]).collect();
        assert_eq!(distinct.len(), t.len());
    }

    #[test]
    fn identical_vectors_share_tokens() {
        let (mut t, _) = bundles(3);
        let first = t.row(0).to_vec();
        t.data[4..8].copy_from_slice(&first);
        let (tokens, _) = quantize(&t, &QuantizeConfig { k: 5, ..Default::default() }, Workers::SINGLE).unwrap();
        assert_eq!(tokens.tokens[0], tokens.tokens[1]);
    }

    #[test]
    fn token_ranges_and_layers() {
        let (t, _) = bundles(4);
        let cfg = QuantizeConfig { k: 6, ..Default::default() };
        let (tokens, models) = quantize(&t, &cfg, Workers::ALL).unwrap();
        assert_eq!(models.len(), 2);
        for tk in &tokens.tokens {
            assert_eq!(tk.len(), 2);
            assert!(tk[0] < 6);
            assert!((6..12).contains(&tk[1]));
        }
    }

    #[test]
    fn errors() {
        let (t, _) = bundles(5);
        let too_many = QuantizeConfig {
            k: t.len() + 1,
            ..Default::default()
        };
        assert!(matches!(
            quantize(&t, &too_many, Workers::SINGLE),
            Err(QuantizeError::KTooLarge { .. })
        ));
        let empty = EmbeddingTable {
            nodes: vec![],
            dim: 4,
            data: vec![],
        };
        assert!(matches!(
            quantize(&empty, &QuantizeConfig::default(), Workers::SINGLE),
            Err(QuantizeError::EmptyTable)
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let (t, _) = bundles(6);
        let (tokens, _) = quantize(&t, &QuantizeConfig { k: 4, ..Default::default() }, Workers::SINGLE).unwrap();
        let mut buf = Vec::new();
        tokens.write_jsonl(&mut buf).unwrap();
        let back = TokenAssignment::read_jsonl(buf.as_slice(), 4).unwrap();
        assert_eq!(back, tokens);
        assert!(TokenAssignment::read_jsonl(&b"{\"node_id\":\"a\",\"tokens\":[0,99]}\n"[..], 4).is_err());
    }
}
