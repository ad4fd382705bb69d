//! Embedding records that arrive after training.

use xxhash_rust::xxh64::xxh64;

use super::sgd::{InputRow, StepScratch};
use super::{record_contexts, seeded, stream, Model};
use crate::error::{Error, Result};
use crate::graph::{validate, Record};
use crate::matrix::Matrix;

impl Model {
    /// Learns a row for a new record against the trained output layers.
    ///
    /// The row starts from the same distribution as training rows, seeded by
    /// `seed` and the record id, and then runs `steps` passes over the
    /// record's context tokens. With `freeze_outputs` only the new row
    /// changes. The record is registered under its id (replacing any earlier
    /// row with that id) and the learned row is returned.
    pub fn embed_online(
        &mut self,
        record: &Record,
        steps: usize,
        freeze_outputs: bool,
        seed: u64,
    ) -> Result<Vec<f64>> {
        if !self.is_online() {
            return Err(Error::ModeMismatch(
                "online embedding needs a model trained with online (hashed) vocabularies".into(),
            ));
        }
        validate(record, &self.views).map_err(|v| v.into_error(&record.id))?;
        let contexts = record_contexts(record, &self.views, self.config.max_degree);
        let ids: Vec<Vec<u64>> = contexts
            .iter()
            .zip(&self.outputs)
            .map(|(tokens, out)| {
                tokens
                    .iter()
                    .map(|t| out.vocab.token_id(t).expect("hashed ids always exist"))
                    .collect()
            })
            .collect();
        if !freeze_outputs {
            for (out, view_ids) in self.outputs.iter_mut().zip(&ids) {
                for &id in view_ids {
                    out.table.register(id)?;
                }
            }
        }

        let seed = seed ^ xxh64(record.id.as_bytes(), 0);
        let mut rng = seeded(seed, stream::ONLINE);
        let init = Matrix::uniform(1, self.config.dim, 0.5 / self.config.dim as f64, &mut rng).row(0);
        let row = match self.record_index.get(&record.id) {
            Some(&row) => {
                self.records.set_row(row, &init);
                row
            }
            None => {
                self.records.push_row(&init);
                self.record_ids.push(record.id.clone());
                let row = self.record_ids.len() - 1;
                self.record_index.insert(record.id.clone(), row);
                row
            }
        };

        let per_pass: u64 = ids.iter().map(|v| v.len() as u64).sum();
        let total = per_pass * steps as u64;
        let mut done = 0u64;
        let mut scratch = StepScratch::new();
        for _ in 0..steps {
            for (v, view_ids) in ids.iter().enumerate() {
                for &token in view_ids {
                    let lr = self.config.learning_rate(done, total);
                    self.sgd_step_with(
                        InputRow::Record(row),
                        v,
                        token,
                        lr,
                        !freeze_outputs,
                        None,
                        &mut rng,
                        &mut scratch,
                    )?;
                    done += 1;
                }
            }
        }
        let vector = self.records.row(row);
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericFailure(format!("online row for {}", record.id)));
        }
        Ok(vector)
    }
}
