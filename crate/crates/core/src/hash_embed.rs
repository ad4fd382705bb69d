//! Hash embeddings for the output layers.
//!
//! A token id selects `k` rows of a shared component pool through `k` seeded
//! hash functions `H_i: [0, K) -> [0, B)`. Its vector is the importance
//! weighted sum `sum_i p[id][i] * components[H_i(id)]`. Both the pool and the
//! importances are trainable; the table holds `B*dim + K*k` parameters.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How importance rows are addressed.
///
/// `Dense` stores all `K` rows (dictionary vocabularies). `Sparse` stores rows
/// only for registered ids; unregistered ids read the initial `1/k` weights.
/// This keeps a `2^22`-capacity online table small.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotLayout {
    Dense,
    Sparse { ids: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashEmbeddingTable {
    capacity: u64,
    buckets: usize,
    dim: usize,
    seeds: Vec<u64>,
    components: Matrix,
    importances: Matrix,
    sparse: Option<HashMap<u64, usize>>,
    sparse_ids: Vec<u64>,
}

/// Table shape and hash seeds, as persisted in checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableHeader {
    pub capacity: u64,
    pub buckets: usize,
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub layout: SlotLayout,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded multiply-xor-shift hash of a token id.
#[inline]
pub fn bucket_hash(id: u64, seed: u64, buckets: usize) -> usize {
    let mut z = id ^ seed;
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^= z >> 33;
    (z % buckets as u64) as usize
}

impl HashEmbeddingTable {
    /// New table with components drawn from `Uniform(-0.5/dim, 0.5/dim)` and
    /// all importances `1/k`. Everything derives from `seed`.
    pub fn new(
        capacity: u64,
        buckets: usize,
        dim: usize,
        k: usize,
        seed: u64,
        sparse: bool,
    ) -> Result<Self> {
        if capacity == 0 || buckets == 0 || dim == 0 || k == 0 {
            return Err(Error::Config(format!(
                "hash table dimensions must be positive (K={capacity}, B={buckets}, dim={dim}, k={k})"
            )));
        }
        if buckets as u64 > capacity {
            log::warn!("hash table has more buckets ({buckets}) than ids ({capacity})");
        }
        let mut state = seed;
        let mut seeds: Vec<u64> = Vec::with_capacity(k);
        while seeds.len() < k {
            let s = splitmix64(&mut state);
            if !seeds.contains(&s) {
                seeds.push(s);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let components = Matrix::uniform(buckets, dim, 0.5 / dim as f64, &mut rng);
        let init = 1.0 / k as f64;
        let (importances, sparse_map) = if sparse {
            (Matrix::filled(0, k, init), Some(HashMap::new()))
        } else {
            let rows = usize::try_from(capacity)
                .map_err(|_| Error::Config("dense table capacity exceeds memory".into()))?;
            (Matrix::filled(rows, k, init), None)
        };
        let table = HashEmbeddingTable {
            capacity,
            buckets,
            dim,
            seeds,
            components,
            importances,
            sparse: sparse_map,
            sparse_ids: Vec::new(),
        };
        debug_assert_eq!(
            table.param_count(),
            buckets as u64 * dim as u64 + capacity * k as u64
        );
        Ok(table)
    }

    pub fn from_parts(header: TableHeader, components: Matrix, importances: Matrix) -> Result<Self> {
        let k = header.seeds.len();
        if components.rows() != header.buckets || components.cols() != header.dim {
            return Err(Error::Checkpoint("component pool shape mismatch".into()));
        }
        if importances.cols() != k {
            return Err(Error::Checkpoint("importance table width mismatch".into()));
        }
        let (sparse, sparse_ids) = match header.layout {
            SlotLayout::Dense => {
                if importances.rows() as u64 != header.capacity {
                    return Err(Error::Checkpoint("importance table height mismatch".into()));
                }
                (None, Vec::new())
            }
            SlotLayout::Sparse { ids } => {
                if importances.rows() != ids.len() {
                    return Err(Error::Checkpoint("importance slot count mismatch".into()));
                }
                let map = ids.iter().enumerate().map(|(s, &id)| (id, s)).collect();
                (Some(map), ids)
            }
        };
        Ok(HashEmbeddingTable {
            capacity: header.capacity,
            buckets: header.buckets,
            dim: header.dim,
            seeds: header.seeds,
            components,
            importances,
            sparse,
            sparse_ids,
        })
    }

    pub fn header(&self) -> TableHeader {
        TableHeader {
            capacity: self.capacity,
            buckets: self.buckets,
            dim: self.dim,
            seeds: self.seeds.clone(),
            layout: match self.sparse {
                None => SlotLayout::Dense,
                Some(_) => SlotLayout::Sparse {
                    ids: self.sparse_ids.clone(),
                },
            },
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.seeds.len()
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn importances(&self) -> &Matrix {
        &self.importances
    }

    /// Trainable parameters: `B*dim + K*k`.
    pub fn param_count(&self) -> u64 {
        self.buckets as u64 * self.dim as u64 + self.capacity * self.k() as u64
    }

    /// Parameters of an ordinary `K x dim` embedding table.
    pub fn standard_param_count(&self) -> u64 {
        self.capacity * self.dim as u64
    }

    #[inline]
    pub fn bucket(&self, id: u64, i: usize) -> usize {
        bucket_hash(id, self.seeds[i], self.buckets)
    }

    pub fn check_id(&self, id: u64) -> Result<()> {
        if id >= self.capacity {
            return Err(Error::IdOutOfRange {
                id,
                size: self.capacity,
            });
        }
        Ok(())
    }

    /// Importance row of an id, if it has storage.
    #[inline]
    pub fn slot(&self, id: u64) -> Option<usize> {
        match &self.sparse {
            None => Some(id as usize),
            Some(map) => map.get(&id).copied(),
        }
    }

    /// Gives an id its own importance row in a sparse table.
    pub fn register(&mut self, id: u64) -> Result<usize> {
        self.check_id(id)?;
        match &mut self.sparse {
            None => Ok(id as usize),
            Some(map) => {
                if let Some(&slot) = map.get(&id) {
                    return Ok(slot);
                }
                let slot = self.sparse_ids.len();
                let init = vec![1.0 / self.seeds.len() as f64; self.seeds.len()];
                self.importances.push_row(&init);
                map.insert(id, slot);
                self.sparse_ids.push(id);
                Ok(slot)
            }
        }
    }

    pub fn weight(&self, id: u64, i: usize) -> f64 {
        match self.slot(id) {
            Some(slot) => self.importances.get(slot, i),
            None => 1.0 / self.seeds.len() as f64,
        }
    }

    pub fn weights(&self, id: u64) -> Vec<f64> {
        (0..self.k()).map(|i| self.weight(id, i)).collect()
    }

    /// Hash embedding of a token id.
    pub fn hash_emb(&self, id: u64) -> Result<Vec<f64>> {
        self.check_id(id)?;
        let mut out = vec![0.0; self.dim];
        self.embed_into(id, &mut out);
        Ok(out)
    }

    /// `out = sum_i p[id][i] * components[H_i(id)]`; `id` must be in range.
    pub fn embed_into(&self, id: u64, out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.k() {
            self.components
                .add_row_scaled_into(self.bucket(id, i), self.weight(id, i), out);
        }
    }

    /// One SGD step for a token given the gradient `upstream` of the loss
    /// with respect to its embedding:
    /// `components[H_i] -= lr * p_i * upstream` and
    /// `p_i -= lr * (upstream . components[H_i])`, reading every row before
    /// writing any.
    pub fn accumulate_grad(&self, id: u64, upstream: &[f64], lr: f64) -> Result<()> {
        self.check_id(id)?;
        let slot = self.slot(id).ok_or_else(|| {
            Error::ModeMismatch(format!("id {id} has no importance row; register it first"))
        })?;
        let k = self.k();
        let mut weights = Vec::with_capacity(k);
        let mut importance_grads = Vec::with_capacity(k);
        for i in 0..k {
            weights.push(self.importances.get(slot, i));
            importance_grads.push(self.components.dot_row(self.bucket(id, i), upstream));
        }
        for i in 0..k {
            self.components
                .axpy_row(self.bucket(id, i), -lr * weights[i], upstream);
            self.importances.add(slot, i, -lr * importance_grads[i]);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.components.all_finite() && self.importances.all_finite()
    }
}
