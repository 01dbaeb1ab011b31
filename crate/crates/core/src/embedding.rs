//! Skip-gram with negative sampling over walk corpora, and the on-disk
//! embedding table format.
//!
//! Walks are consumed in mini-batches. Within a batch every walk is trained
//! online against its own copy of the parameters as they stood at the start
//! of the batch, then the per-walk row deltas are summed in walk order. The
//! result is therefore identical for any worker count.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Workers};

const MATRIX_MAGIC: &[u8; 8] = b"RVSEMB01";
const UNIGRAM_POWER: f64 = 0.75;
const MAX_EXP: f32 = 6.0;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("walk references node {node} but the table has {num_nodes} nodes")]
    NodeOutOfRange { node: u32, num_nodes: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed embedding file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negatives: usize,
    /// Walks per optimizer step.
    pub batch_walks: usize,
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 1024,
            window: 10,
            epochs: 5,
            negatives: 5,
            batch_walks: 4,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            seed: 0,
        }
    }
}

/// Node name -> dense vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub nodes: Vec<String>,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cosine(&self, a: usize, b: usize) -> f32 {
        cosine(self.row(a), self.row(b))
    }

    /// Writes the matrix file at `path` and its JSON sidecar next to it.
    pub fn save(&self, path: &Path, meta: &EmbeddingMeta) -> Result<(), EmbeddingError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(self.nodes.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let sidecar = EmbeddingSidecar {
            nodes: self.nodes.clone(),
            dim: self.dim,
            meta: meta.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        std::fs::write(sidecar_path(path), json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(EmbeddingTable, EmbeddingMeta), EmbeddingError> {
        let sidecar: EmbeddingSidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))
            .map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MATRIX_MAGIC {
            return Err(EmbeddingError::Malformed("bad magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        if rows != sidecar.nodes.len() || dim != sidecar.dim {
            return Err(EmbeddingError::Malformed(format!(
                "matrix {rows}x{dim} disagrees with sidecar {}x{}",
                sidecar.nodes.len(),
                sidecar.dim
            )));
        }
        let mut bytes = vec![0u8; rows * dim * 4];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok((
            EmbeddingTable {
                nodes: sidecar.nodes,
                dim,
                data,
            },
            sidecar.meta,
        ))
    }
}

/// Provenance stored in the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub train: TrainConfig,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub walk_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingSidecar {
    nodes: Vec<String>,
    dim: usize,
    meta: EmbeddingMeta,
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn sigmoid(x: f32) -> f32 {
    if x > MAX_EXP {
        1.0
    } else if x < -MAX_EXP {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Copy-on-touch view of a parameter matrix. Rows are kept in first-touch
/// order so that folding them back is deterministic.
struct Overlay<'a> {
    base: &'a [f32],
    dim: usize,
    slot: HashMap<u32, usize>,
    rows: Vec<(u32, Vec<f32>)>,
}

impl<'a> Overlay<'a> {
    fn new(base: &'a [f32], dim: usize) -> Self {
        Self {
            base,
            dim,
            slot: HashMap::new(),
            rows: Vec::new(),
        }
    }

    fn get(&mut self, row: u32) -> &mut [f32] {
        let (base, dim) = (self.base, self.dim);
        let k = *self.slot.entry(row).or_insert_with(|| {
            let r = row as usize;
            self.rows.push((row, base[r * dim..(r + 1) * dim].to_vec()));
            self.rows.len() - 1
        });
        &mut self.rows[k].1
    }

    /// Row differences against the base matrix.
    fn into_deltas(self) -> Vec<(u32, Vec<f32>)> {
        let (base, dim) = (self.base, self.dim);
        self.rows
            .into_iter()
            .map(|(row, mut v)| {
                let r = row as usize;
                v.iter_mut().zip(&base[r * dim..(r + 1) * dim]).for_each(|(x, b)| *x -= b);
                (row, v)
            })
            .collect()
    }
}

struct NegativeTable {
    nodes: Vec<u32>,
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> Self {
        let mut nodes = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (n, &c) in counts.iter().enumerate() {
            if c > 0 {
                acc += (c as f64).powf(UNIGRAM_POWER);
                nodes.push(n as u32);
                cumulative.push(acc);
            }
        }
        Self { nodes, cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let total = *self.cumulative.last().expect("non-empty corpus");
        let x = rng.gen::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= x).min(self.nodes.len() - 1);
        self.nodes[k]
    }
}

/// Trains node vectors on `corpus`; returns a row-major `num_nodes x dim`
/// matrix of input vectors.
pub fn train_embeddings(
    corpus: &[Vec<u32>],
    num_nodes: usize,
    config: &TrainConfig,
    workers: Workers,
) -> Result<Vec<f32>, EmbeddingError> {
    if corpus.iter().all(|w| w.is_empty()) {
        return Err(EmbeddingError::EmptyCorpus);
    }
    let dim = config.dim;
    let mut counts = vec![0u64; num_nodes];
    for w in corpus {
        for &n in w {
            if n as usize >= num_nodes {
                return Err(EmbeddingError::NodeOutOfRange { node: n, num_nodes });
            }
            counts[n as usize] += 1;
        }
    }
    let negatives = NegativeTable::new(&counts);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Uniform::new(-0.5 / dim as f32, 0.5 / dim as f32);
    let mut input: Vec<f32> = (0..num_nodes * dim).map(|_| init.sample(&mut rng)).collect();
    let mut output = vec![0f32; num_nodes * dim];

    let batch = config.batch_walks.max(1);
    let batches_per_epoch = corpus.len().div_ceil(batch);
    let total_steps = (batches_per_epoch * config.epochs).max(1);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0000);
        shuffle_rng.set_stream(epoch as u64);
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch) {
            let progress = step as f32 / total_steps as f32;
            let lr = (config.learning_rate * (1.0 - progress)).max(config.min_learning_rate);
            let updates = par::map(chunk, workers, |&wi| {
                let mut walk_rng = ChaCha8Rng::seed_from_u64(config.seed);
                walk_rng.set_stream(((epoch as u64) << 40) | wi as u64);
                walk_gradients(&corpus[wi], &input, &output, dim, config, lr, &negatives, &mut walk_rng)
            });
            for (din, dout) in updates {
                for (row, delta) in din {
                    let r = &mut input[row as usize * dim..(row as usize + 1) * dim];
                    r.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
                }
                for (row, delta) in dout {
                    let r = &mut output[row as usize * dim..(row as usize + 1) * dim];
                    r.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
                }
            }
            step += 1;
        }
    }
    Ok(input)
}

type RowDeltas = Vec<(u32, Vec<f32>)>;

/// Online skip-gram updates over one walk against private copies of the
/// touched rows; returns the resulting input and output row deltas.
#[allow(clippy::too_many_arguments)]
fn walk_gradients(
    walk: &[u32],
    input: &[f32],
    output: &[f32],
    dim: usize,
    config: &TrainConfig,
    lr: f32,
    negatives: &NegativeTable,
    rng: &mut ChaCha8Rng,
) -> (RowDeltas, RowDeltas) {
    let mut vin = Overlay::new(input, dim);
    let mut vout = Overlay::new(output, dim);
    let mut grad = vec![0f32; dim];
    let mut u = vec![0f32; dim];
    for (i, &center) in walk.iter().enumerate() {
        let lo = i.saturating_sub(config.window);
        let hi = (i + config.window + 1).min(walk.len());
        for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
            if j == i {
                continue;
            }
            // the context's input vector predicts the center node
            grad.iter_mut().for_each(|g| *g = 0.0);
            u.copy_from_slice(vin.get(context));
            for k in 0..=config.negatives {
                let (target, label) = if k == 0 {
                    (center, 1.0)
                } else {
                    let t = negatives.sample(rng);
                    if t == center {
                        continue;
                    }
                    (t, 0.0)
                };
                let v = vout.get(target);
                let dot: f32 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                let g = (label - sigmoid(dot)) * lr;
                grad.iter_mut().zip(v.iter()).for_each(|(acc, x)| *acc += g * x);
                v.iter_mut().zip(&u).for_each(|(x, ux)| *x += g * ux);
            }
            vin.get(context).iter_mut().zip(&grad).for_each(|(x, g)| *x += g);
        }
    }
    (vin.into_deltas(), vout.into_deltas())
}
