//! One negative-sampling SGD step.
//!
//! For an input row `u`, a positive token `t+` and negatives `t1..tn`, the
//! loss is `-log sig(u.v+) - sum_j log sig(-u.vj)` where every `v` is a hash
//! embedding. All gradients are computed from the parameters as they were
//! before the step, then applied.

use std::collections::HashSet;

use rand::Rng;

use super::{Model, NegativeMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputRow {
    Record(usize),
    Label(usize),
}

/// `-log sig(x)`, computed without overflow.
pub fn log_sigmoid_loss(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradient of one step's loss at the current parameters.
///
/// The gradient with respect to a component row is `coef * u`, so component
/// terms are stored as `(view, bucket, coef)`; the same bucket may appear
/// more than once and the terms add.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepGradients {
    pub loss: f64,
    pub input: Vec<f64>,
    pub components: Vec<(usize, usize, f64)>,
    /// `(view, token id, hash index, gradient)`
    pub importances: Vec<(usize, u64, usize, f64)>,
}

impl StepGradients {
    /// Dense gradient of one component row.
    pub fn component_row(&self, view: usize, bucket: usize, u: &[f64]) -> Vec<f64> {
        let coef: f64 = self
            .components
            .iter()
            .filter(|&&(v, b, _)| v == view && b == bucket)
            .map(|&(_, _, c)| c)
            .sum();
        u.iter().map(|x| coef * x).collect()
    }

    /// Summed gradient of one importance weight.
    pub fn importance(&self, view: usize, id: u64, i: usize) -> f64 {
        self.importances
            .iter()
            .filter(|&&(v, t, j, _)| v == view && t == id && j == i)
            .map(|&(.., g)| g)
            .sum()
    }
}

/// Reusable buffers for [`Model::sgd_step`]. After a step, `negatives` holds
/// the `(view, id)` pairs that were drawn.
#[derive(Debug, Default)]
pub struct StepScratch {
    pub negatives: Vec<(usize, u64)>,
    grads: StepGradients,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl StepScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Model {
    /// Draws negatives for a positive `(view, token)` according to the
    /// configured negative mode. `context` lists ids to reject besides the
    /// positive itself.
    pub(crate) fn draw_negatives<R: Rng + ?Sized>(
        &self,
        view: usize,
        token: u64,
        context: Option<&HashSet<u64>>,
        rng: &mut R,
        out: &mut Vec<(usize, u64)>,
    ) -> Result<()> {
        out.clear();
        let count = self.config.negatives;
        if count == 0 {
            return Ok(());
        }
        let in_context = |v: usize, id: u64| v == view && (id == token || context.is_some_and(|c| c.contains(&id)));
        match self.config.negative_mode {
            NegativeMode::ViewSpecific => {
                let vocab = &self.outputs[view].vocab;
                vocab.sample_negatives_where(rng, count, |id| in_context(view, id), out)?;
                for entry in out.iter_mut() {
                    entry.0 = view;
                }
                debug_assert!(out.iter().all(|&(_, id)| vocab.contains(id)));
                Ok(())
            }
            NegativeMode::Global => {
                let noise = self
                    .global_noise
                    .as_ref()
                    .ok_or_else(|| Error::EmptyVocabulary("<all views>".into()))?;
                noise
                    .sample_excluding(rng, count, |(v, id)| in_context(v, id), out)
                    .map_err(|attempts| Error::NoValidNegative {
                        view: "<all views>".into(),
                        attempts,
                    })
            }
        }
    }

    /// Loss and gradients for an input vector against a positive token of
    /// `view` and explicit negatives. Does not modify the model.
    pub fn step_gradients(
        &self,
        u: &[f64],
        view: usize,
        positive: u64,
        negatives: &[(usize, u64)],
    ) -> Result<StepGradients> {
        let mut grads = StepGradients::default();
        let mut v = Vec::new();
        self.compute_gradients(u, (view, positive), negatives, &mut grads, &mut v)?;
        Ok(grads)
    }

    fn compute_gradients(
        &self,
        u: &[f64],
        positive: (usize, u64),
        negatives: &[(usize, u64)],
        grads: &mut StepGradients,
        v: &mut Vec<f64>,
    ) -> Result<()> {
        let dim = u.len();
        grads.loss = 0.0;
        grads.input.clear();
        grads.input.resize(dim, 0.0);
        grads.components.clear();
        grads.importances.clear();
        v.resize(dim, 0.0);
        let targets = std::iter::once((positive, true)).chain(negatives.iter().map(|&n| (n, false)));
        for ((view, id), is_positive) in targets {
            let table = &self.outputs[view].table;
            table.check_id(id)?;
            table.embed_into(id, v);
            let score: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            let (loss, g) = if is_positive {
                (log_sigmoid_loss(score), sigmoid(score) - 1.0)
            } else {
                (log_sigmoid_loss(-score), sigmoid(score))
            };
            grads.loss += loss;
            for (gi, vi) in grads.input.iter_mut().zip(v.iter()) {
                *gi += g * vi;
            }
            for i in 0..table.k() {
                let bucket = table.bucket(id, i);
                grads.components.push((view, bucket, g * table.weight(id, i)));
                let dot = table.components().dot_row(bucket, u);
                grads.importances.push((view, id, i, g * dot));
            }
        }
        Ok(())
    }

    fn apply_gradients(&self, input: InputRow, u: &[f64], grads: &StepGradients, lr: f64, update_outputs: bool) {
        if update_outputs {
            for &(view, bucket, coef) in &grads.components {
                self.outputs[view].table.components().axpy_row(bucket, -lr * coef, u);
            }
            for &(view, id, i, g) in &grads.importances {
                let table = &self.outputs[view].table;
                if let Some(slot) = table.slot(id) {
                    table.importances().add(slot, i, -lr * g);
                }
            }
        }
        let (matrix, row) = self.input_matrix(input);
        matrix.axpy_row(row, -lr, &grads.input);
    }

    /// Samples negatives and performs one SGD step; returns the loss before
    /// the update.
    pub fn sgd_step<R: Rng + ?Sized>(
        &self,
        input: InputRow,
        view: usize,
        token: u64,
        lr: f64,
        rng: &mut R,
        scratch: &mut StepScratch,
    ) -> Result<f64> {
        self.sgd_step_with(input, view, token, lr, true, None, rng, scratch)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn sgd_step_with<R: Rng + ?Sized>(
        &self,
        input: InputRow,
        view: usize,
        token: u64,
        lr: f64,
        update_outputs: bool,
        context: Option<&HashSet<u64>>,
        rng: &mut R,
        scratch: &mut StepScratch,
    ) -> Result<f64> {
        self.draw_negatives(view, token, context, rng, &mut scratch.negatives)?;
        let (matrix, row) = self.input_matrix(input);
        scratch.u.clear();
        scratch.u.extend(matrix.row(row));
        self.compute_gradients(
            &scratch.u,
            (view, token),
            &scratch.negatives,
            &mut scratch.grads,
            &mut scratch.v,
        )?;
        self.apply_gradients(input, &scratch.u, &scratch.grads, lr, update_outputs);
        Ok(scratch.grads.loss)
    }
}
