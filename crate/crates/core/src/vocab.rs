//! Per-view token-to-id mapping and the smoothed noise distribution used for
//! negative sampling.
//!
//! Two mapping modes exist. `Dictionary` assigns dense ids in first-occurrence
//! order and knows the vocabulary up front. `OnlineHash` maps a token to
//! `xxh64(key, seed 0) mod K`, a pure function of the token text, so tokens
//! first seen after training still receive a stable id.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};
use crate::wl::SubgraphToken;

/// Default id space of a view in online mode.
pub const DEFAULT_ONLINE_CAPACITY: u64 = 1 << 22;

/// Redraws allowed per negative before giving up.
pub const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VocabMode {
    Dictionary,
    OnlineHash { capacity: u64 },
}

/// Stable online-mode id of a token key.
pub fn hash_token_id(key: &str, capacity: u64) -> u64 {
    xxh64(key.as_bytes(), 0) % capacity
}

/// Sampling table over `(view index, token id)` entries with probability
/// proportional to `count^smoothing`.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    entries: Vec<(usize, u64)>,
    probabilities: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl NoiseTable {
    pub fn new(entries: Vec<(usize, u64)>, counts: &[u64], smoothing: f64) -> Option<Self> {
        assert_eq!(entries.len(), counts.len());
        if entries.is_empty() {
            return None;
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(smoothing)).collect();
        let total: f64 = weights.iter().sum();
        let dist = WeightedIndex::new(&weights).ok()?;
        Some(NoiseTable {
            entries,
            probabilities: weights.iter().map(|w| w / total).collect(),
            dist,
        })
    }

    /// Union of several per-view vocabularies, entries ordered by view then id.
    pub fn union(vocabs: &[&Vocabulary]) -> Option<Self> {
        let mut entries = Vec::new();
        let mut counts = Vec::new();
        let smoothing = vocabs.first()?.smoothing;
        for (v, vocab) in vocabs.iter().enumerate() {
            for (&id, &count) in vocab.ids.iter().zip(&vocab.counts) {
                entries.push((v, id));
                counts.push(count);
            }
        }
        Self::new(entries, &counts, smoothing)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, u64)] {
        &self.entries
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, u64) {
        self.entries[self.dist.sample(rng)]
    }

    /// Draws `count` entries i.i.d., redrawing any entry for which `excluded`
    /// holds (at most [`MAX_REDRAWS`] times per draw).
    pub fn sample_excluding<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        excluded: impl Fn((usize, u64)) -> bool,
        out: &mut Vec<(usize, u64)>,
    ) -> std::result::Result<(), usize> {
        for _ in 0..count {
            let mut attempts = 0;
            let draw = loop {
                let draw = self.sample(rng);
                if !excluded(draw) {
                    break draw;
                }
                attempts += 1;
                if attempts >= MAX_REDRAWS {
                    return Err(attempts);
                }
            };
            out.push(draw);
        }
        Ok(())
    }
}

/// Token-to-id map of one view, with frequencies and the noise table.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    view: String,
    mode: VocabMode,
    smoothing: f64,
    /// Observed ids in ascending order with their counts and a representative
    /// token key. In dictionary mode `ids == 0..K`.
    ids: Vec<u64>,
    counts: Vec<u64>,
    names: Vec<String>,
    index: HashMap<String, u64>,
    position: HashMap<u64, usize>,
    noise: Option<NoiseTable>,
    skipped: AtomicU64,
}

impl Vocabulary {
    /// Builds a vocabulary from a token stream of one view.
    pub fn build<'a, I>(tokens: I, view: &str, smoothing: f64, mode: VocabMode) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SubgraphToken>,
    {
        if let VocabMode::OnlineHash { capacity: 0 } = mode {
            return Err(Error::Config("online vocabulary capacity must be positive".into()));
        }
        let mut counts: HashMap<u64, (u64, String)> = HashMap::new();
        let mut index = HashMap::new();
        for token in tokens {
            if token.view != view {
                return Err(Error::MixedViews {
                    expected: view.to_string(),
                    found: token.view.clone(),
                });
            }
            let key = token.key();
            let id = match mode {
                VocabMode::Dictionary => {
                    let next = index.len() as u64;
                    *index.entry(key.into_owned()).or_insert(next)
                }
                VocabMode::OnlineHash { capacity } => hash_token_id(&key, capacity),
            };
            counts
                .entry(id)
                .or_insert_with(|| (0, token.key().into_owned()))
                .0 += 1;
        }
        let mut entries: Vec<(u64, u64, String)> =
            counts.into_iter().map(|(id, (c, n))| (id, c, n)).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let data = VocabularyData {
            view: view.to_string(),
            mode,
            smoothing,
            ids: entries.iter().map(|e| e.0).collect(),
            counts: entries.iter().map(|e| e.1).collect(),
            names: entries.into_iter().map(|e| e.2).collect(),
        };
        Self::try_from(data)
    }

    pub fn view(&self) -> &str {
        &self.view
    }

    pub fn mode(&self) -> VocabMode {
        self.mode
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Size of the id space: distinct tokens in dictionary mode, the fixed
    /// capacity in online mode.
    pub fn capacity(&self) -> u64 {
        match self.mode {
            VocabMode::Dictionary => self.ids.len() as u64,
            VocabMode::OnlineHash { capacity } => capacity,
        }
    }

    /// Number of distinct observed ids.
    pub fn observed(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn count(&self, id: u64) -> u64 {
        self.position.get(&id).map_or(0, |&p| self.counts[p])
    }

    pub fn contains(&self, id: u64) -> bool {
        self.position.contains_key(&id)
    }

    /// Representative token key of an observed id.
    pub fn name(&self, id: u64) -> Option<&str> {
        self.position.get(&id).map(|&p| self.names[p].as_str())
    }

    /// Id of a token; `None` for unseen tokens in dictionary mode, which are
    /// tallied in [`Vocabulary::skipped`].
    pub fn token_id(&self, token: &SubgraphToken) -> Option<u64> {
        self.key_id(&token.key())
    }

    pub fn key_id(&self, key: &str) -> Option<u64> {
        match self.mode {
            VocabMode::Dictionary => {
                let id = self.index.get(key).copied();
                if id.is_none() {
                    self.skipped.fetch_add(1, Ordering::Relaxed);
                }
                id
            }
            VocabMode::OnlineHash { capacity } => Some(hash_token_id(key, capacity)),
        }
    }

    pub fn skipped(&self) -> u64 {
        self.skipped.load(Ordering::Relaxed)
    }

    pub fn noise(&self) -> Option<&NoiseTable> {
        self.noise.as_ref()
    }

    /// Noise probability `count^s / sum(count^s)` of an id.
    pub fn noise_probability(&self, id: u64) -> f64 {
        match (&self.noise, self.position.get(&id)) {
            (Some(noise), Some(&p)) => noise.probabilities[p],
            _ => 0.0,
        }
    }

    /// Draws `count` negative ids from this view's noise distribution,
    /// redrawing any id equal to `exclude`.
    pub fn sample_negatives<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        exclude: Option<u64>,
    ) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(count);
        self.sample_negatives_where(rng, count, |id| Some(id) == exclude, &mut out)?;
        Ok(out.into_iter().map(|(_, id)| id).collect())
    }

    pub(crate) fn sample_negatives_where<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        excluded: impl Fn(u64) -> bool,
        out: &mut Vec<(usize, u64)>,
    ) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let noise = self
            .noise
            .as_ref()
            .ok_or_else(|| Error::EmptyVocabulary(self.view.clone()))?;
        noise
            .sample_excluding(rng, count, |(_, id)| excluded(id), out)
            .map_err(|attempts| Error::NoValidNegative {
                view: self.view.clone(),
                attempts,
            })
    }

    /// Adds token counts from newly streamed tokens and rebuilds the noise
    /// table. Dictionary mode ignores unseen tokens.
    pub fn absorb<'a, I>(&mut self, tokens: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a SubgraphToken>,
    {
        let mut data = VocabularyData::from(&*self);
        let mut extra: HashMap<u64, (u64, String)> = HashMap::new();
        for token in tokens {
            if token.view != self.view {
                return Err(Error::MixedViews {
                    expected: self.view.clone(),
                    found: token.view.clone(),
                });
            }
            let key = token.key();
            if let Some(id) = self.key_id(&key) {
                extra.entry(id).or_insert_with(|| (0, key.into_owned())).0 += 1;
            }
        }
        let mut merged: Vec<(u64, u64, String)> = data
            .ids
            .iter()
            .zip(&data.counts)
            .zip(&data.names)
            .map(|((&id, &c), n)| {
                let add = extra.remove(&id).map_or(0, |e| e.0);
                (id, c + add, n.clone())
            })
            .collect();
        merged.extend(extra.into_iter().map(|(id, (c, n))| (id, c, n)));
        merged.sort_unstable_by_key(|e| e.0);
        data.ids = merged.iter().map(|e| e.0).collect();
        data.counts = merged.iter().map(|e| e.1).collect();
        data.names = merged.into_iter().map(|e| e.2).collect();
        *self = Self::try_from(data)?;
        Ok(())
    }

    /// Observed `(key, count)` pairs sorted by descending count.
    pub fn top(&self, n: usize) -> Vec<(&str, u64)> {
        let mut all: Vec<(&str, u64)> = self
            .names
            .iter()
            .map(String::as_str)
            .zip(self.counts.iter().copied())
            .collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        all.truncate(n);
        all
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyData {
    view: String,
    mode: VocabMode,
    smoothing: f64,
    ids: Vec<u64>,
    counts: Vec<u64>,
    names: Vec<String>,
}

impl From<&Vocabulary> for VocabularyData {
    fn from(v: &Vocabulary) -> Self {
        VocabularyData {
            view: v.view.clone(),
            mode: v.mode,
            smoothing: v.smoothing,
            ids: v.ids.clone(),
            counts: v.counts.clone(),
            names: v.names.clone(),
        }
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData::from(&v)
    }
}

impl TryFrom<VocabularyData> for Vocabulary {
    type Error = Error;

    fn try_from(data: VocabularyData) -> Result<Self> {
        let n = data.ids.len();
        if data.counts.len() != n || data.names.len() != n {
            return Err(Error::Checkpoint("vocabulary arrays differ in length".into()));
        }
        if data.ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Checkpoint("vocabulary ids not strictly ascending".into()));
        }
        let index = match data.mode {
            VocabMode::Dictionary => {
                if data.ids.iter().enumerate().any(|(i, &id)| id != i as u64) {
                    return Err(Error::Checkpoint("dictionary ids are not dense".into()));
                }
                data.names
                    .iter()
                    .enumerate()
                    .map(|(i, name)| (name.clone(), i as u64))
                    .collect()
            }
            VocabMode::OnlineHash { capacity } => {
                if data.ids.last().is_some_and(|&id| id >= capacity) {
                    return Err(Error::Checkpoint("hashed id beyond capacity".into()));
                }
                HashMap::new()
            }
        };
        let position = data.ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let entries = data.ids.iter().map(|&id| (0, id)).collect();
        let noise = NoiseTable::new(entries, &data.counts, data.smoothing);
        Ok(Vocabulary {
            view: data.view,
            mode: data.mode,
            smoothing: data.smoothing,
            ids: data.ids,
            counts: data.counts,
            names: data.names,
            index,
            position,
            noise,
            skipped: AtomicU64::new(0),
        })
    }
}

impl Clone for Vocabulary {
    fn clone(&self) -> Self {
        Vocabulary::try_from(VocabularyData::from(self)).expect("valid vocabulary")
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.view == other.view
            && self.mode == other.mode
            && self.smoothing == other.smoothing
            && self.ids == other.ids
            && self.counts == other.counts
            && self.names == other.names
    }
}
