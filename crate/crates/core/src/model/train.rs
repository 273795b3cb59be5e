use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EncodeHooks, SequenceModel};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::eval::{ndcg_at_k, hit_at_k, rank_of_target};
use crate::rng::purpose_stream;
use crate::tensor::{softmax_cross_entropy, AdamConfig, Matrix};

/// Gradient shards per mini-batch. Shard sums are combined in a fixed order,
/// so results do not depend on the worker-thread count.
const GRAD_SHARDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean next-item cross-entropy over all training positions.
    pub loss: f64,
    pub valid_hr10: f64,
    pub valid_ndcg10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_ndcg10: f64,
}

/// `(inputs, targets)` for next-item training on one sequence.
fn next_item_pairs(items: &[usize], max_len: usize) -> Option<(&[usize], &[usize])> {
    let items = &items[items.len().saturating_sub(max_len + 1)..];
    (items.len() >= 2).then(|| (&items[..items.len() - 1], &items[1..]))
}

struct ShardGrads {
    grads: Vec<Matrix>,
    item_grad: Matrix,
    loss_sum: f64,
}

fn item_rows(model: &SequenceModel) -> Matrix {
    model
        .item_embedding
        .value
        .slice_rows(1, model.num_items + 1)
}

fn shard_gradients(
    model: &SequenceModel,
    items: &Matrix,
    seqs: &[&[usize]],
    total_positions: usize,
) -> Result<ShardGrads> {
    let mut local = model.clone();
    local.visit_params(&mut |_, p| p.zero_grad());
    let mut item_grad = Matrix::zeros(items.rows(), items.cols());
    let mut loss_sum = 0.0;
    let max_len = model.config.max_len;
    for seq in seqs {
        let Some((inputs, targets)) = next_item_pairs(seq, max_len) else {
            continue;
        };
        let e = local.embed(inputs)?;
        let (h, cache) = local.run_encoder_cached(&e)?;
        let scores = h.matmul_t(items);
        let active = vec![true; targets.len()];
        let (loss, mut dscores) = softmax_cross_entropy(&scores, targets, &active)?;
        let n = targets.len() as f64;
        loss_sum += loss * n;
        // per-sequence mean → batch mean over positions
        dscores.scale(n / total_positions as f64);
        item_grad.add_assign(&dscores.t_matmul(&h));
        let dh = dscores.matmul(items);
        let de = local.backward_encoder(&cache, &dh);
        local.backward_embedding(inputs, &de);
    }
    let mut grads = Vec::new();
    local.visit_params(&mut |_, p| grads.push(std::mem::replace(&mut p.grad, Matrix::zeros(0, 0))));
    Ok(ShardGrads {
        grads,
        item_grad,
        loss_sum,
    })
}

/// Mean training cross-entropy without updating anything.
pub fn training_loss(model: &SequenceModel, split: &DatasetSplit) -> Result<f64> {
    let items = item_rows(model);
    let max_len = model.config.max_len;
    let per_seq: Vec<(f64, usize)> = split
        .train
        .par_iter()
        .map(|s| -> Result<(f64, usize)> {
            let Some((inputs, targets)) = next_item_pairs(&s.items, max_len) else {
                return Ok((0.0, 0));
            };
            let e = model.embed(inputs)?;
            let (h, _) = model.run_encoder_cached(&e)?;
            let (loss, _) =
                softmax_cross_entropy(&h.matmul_t(&items), targets, &vec![true; targets.len()])?;
            Ok((loss * targets.len() as f64, targets.len()))
        })
        .collect::<Result<_>>()?;
    let (sum, count) = per_seq
        .iter()
        .fold((0.0, 0usize), |(s, c), &(l, n)| (s + l, c + n));
    if count == 0 {
        return Err(Error::config("no training sequence has two or more items"));
    }
    Ok(sum / count as f64)
}

/// Validation HR@10 / NDCG@10: input = training prefix, target = validation item.
pub fn validation_metrics(model: &SequenceModel, split: &DatasetSplit) -> Result<(f64, f64)> {
    let per_user: Vec<(f64, f64)> = split
        .users
        .par_iter()
        .map(|u| -> Result<(f64, f64)> {
            let scores = model.score_sequence(&u.train, &mut EncodeHooks::none())?;
            let rank = rank_of_target(&scores, u.valid_target);
            Ok((hit_at_k(rank, 10), ndcg_at_k(rank, 10)))
        })
        .collect::<Result<_>>()?;
    let n = per_user.len().max(1) as f64;
    let (hr, ndcg) = per_user
        .iter()
        .fold((0.0, 0.0), |(a, b), &(h, g)| (a + h, b + g));
    Ok((hr / n, ndcg / n))
}

/// Mini-batch Adam on full-catalog next-item cross-entropy at every
/// position, with early stopping on validation NDCG@10. Returns the
/// best-validation model.
pub fn train(model: &SequenceModel, split: &DatasetSplit) -> Result<(SequenceModel, TrainReport)> {
    if split.train.is_empty() {
        return Err(Error::config("empty training split"));
    }
    let cfg = model.config.clone();
    let adam = AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        ..AdamConfig::default()
    };
    let mut current = model.clone();
    let initial_loss = training_loss(&current, split)?;
    let (hr0, ndcg0) = validation_metrics(&current, split)?;
    let mut curve = vec![EpochRecord {
        epoch: 0,
        loss: initial_loss,
        valid_hr10: hr0,
        valid_ndcg10: ndcg0,
    }];
    let mut best = current.clone();
    let mut best_ndcg = ndcg0;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut purpose_stream(cfg.seed, "shuffle", epoch as u64));
        let mut epoch_loss = 0.0;
        let mut epoch_positions = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let seqs: Vec<&[usize]> = batch.iter().map(|&i| split.train[i].items.as_slice()).collect();
            let positions: usize = seqs
                .iter()
                .filter_map(|s| next_item_pairs(s, cfg.max_len))
                .map(|(_, t)| t.len())
                .sum();
            if positions == 0 {
                continue;
            }
            let items = item_rows(&current);
            let shard_len = seqs.len().div_ceil(GRAD_SHARDS);
            let shards: Vec<ShardGrads> = seqs
                .par_chunks(shard_len)
                .map(|chunk| shard_gradients(&current, &items, chunk, positions))
                .collect::<Result<_>>()?;

            let mut idx = 0;
            let mut item_grad = Matrix::zeros(items.rows(), items.cols());
            for shard in &shards {
                item_grad.add_assign(&shard.item_grad);
                epoch_loss += shard.loss_sum;
            }
            current.visit_params(&mut |_, p| {
                for shard in &shards {
                    p.grad.add_assign(&shard.grads[idx]);
                }
                idx += 1;
            });
            let table_grad = &mut current.item_embedding.grad;
            for r in 0..item_grad.rows() {
                for (g, v) in table_grad.row_mut(r + 1).iter_mut().zip(item_grad.row(r)) {
                    *g += v;
                }
            }
            table_grad.row_mut(0).fill(0.0);
            current.visit_params(&mut |_, p| p.adam_step(&adam));
            epoch_positions += positions;
        }
        let loss = epoch_loss / epoch_positions.max(1) as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}: loss = {loss}, lr = {}",
                cfg.lr
            )));
        }
        let (hr, ndcg) = validation_metrics(&current, split)?;
        debug!("epoch {epoch}: loss {loss:.5} valid HR@10 {hr:.4} NDCG@10 {ndcg:.4}");
        curve.push(EpochRecord {
            epoch,
            loss,
            valid_hr10: hr,
            valid_ndcg10: ndcg,
        });
        if ndcg > best_ndcg {
            best_ndcg = ndcg;
            best_epoch = epoch;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                info!("early stop at epoch {epoch}; best epoch {best_epoch}");
                break;
            }
        }
    }
    best.trained = true;
    Ok((
        best,
        TrainReport {
            curve,
            best_epoch,
            best_valid_ndcg10: best_ndcg,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_item_pairs_shift_by_one() {
        let (i, t) = next_item_pairs(&[1, 2, 3, 4], 50).unwrap();
        assert_eq!(i, &[1, 2, 3]);
        assert_eq!(t, &[2, 3, 4]);
        assert!(next_item_pairs(&[1], 50).is_none());
        let long: Vec<usize> = (1..=10).collect();
        let (i, t) = next_item_pairs(&long, 4).unwrap();
        assert_eq!(i, &[6, 7, 8, 9]);
        assert_eq!(t, &[7, 8, 9, 10]);
    }
}
