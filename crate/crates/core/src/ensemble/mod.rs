//! Model combination by pixelwise output averaging, with greedy selection.
//!
//! Round 1 picks the best single model. Each later round keeps the previous
//! winner's members fixed and tries appending every model in the pool
//! (repeats allowed), keeping the best. The overall answer is the best of
//! the per-round winners.

mod external;

pub use external::{character_accuracy, edit_distance, ExternalScorer, FailurePolicy};

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::metrics::{psnr, BorderMode, DEFAULT_PEAK};
use crate::network::Network;
use crate::tensor::Tensor;

/// Default number of greedy rounds.
pub const DEFAULT_ROUNDS: usize = 14;

/// Unweighted pixelwise mean.
///
/// Computed as a running mean so that averaging copies of one tensor
/// reproduces it bit-for-bit.
pub fn average_outputs(outputs: &[&Tensor]) -> Result<Tensor> {
    let (first, rest) = outputs
        .split_first()
        .ok_or_else(|| Error::invalid("cannot average an empty list"))?;
    let mut mean = (*first).clone();
    for (k, t) in rest.iter().enumerate() {
        mean.ensure_same_shape(t, "average_outputs")?;
        let n = (k + 2) as f64;
        for (m, &v) in mean.data_mut().iter_mut().zip(t.data()) {
            *m += (v - *m) / n;
        }
    }
    Ok(mean)
}

/// One evaluation image: interpolated LR input, HR reference, optional ground-truth text.
#[derive(Clone, Debug)]
pub struct EvalItem {
    pub id: String,
    pub lr_upscaled: Tensor,
    pub hr: Tensor,
    pub text: Option<String>,
}

/// Models and their cached outputs on a fixed evaluation set.
#[derive(Clone, Debug)]
pub struct ModelPool {
    eval: Vec<EvalItem>,
    ids: Vec<String>,
    outputs: Vec<Vec<Tensor>>,
}

impl ModelPool {
    pub fn new(eval: Vec<EvalItem>) -> Result<Self> {
        if eval.is_empty() {
            return Err(Error::invalid("model pool needs at least one evaluation image"));
        }
        Ok(ModelPool { eval, ids: Vec::new(), outputs: Vec::new() })
    }

    /// Runs `network` once over the evaluation set and caches the outputs.
    pub fn add_network(&mut self, id: impl Into<String>, network: &Network) -> Result<()> {
        let outs = self
            .eval
            .iter()
            .map(|e| network.predict_image(&e.lr_upscaled))
            .collect::<Result<Vec<_>>>()?;
        self.add_outputs(id, outs)
    }

    pub fn add_outputs(&mut self, id: impl Into<String>, outputs: Vec<Tensor>) -> Result<()> {
        let id = id.into();
        if self.ids.contains(&id) {
            return Err(Error::invalid(format!("duplicate model id `{id}`")));
        }
        if outputs.len() != self.eval.len() {
            return Err(Error::shape(format!(
                "model `{id}` has {} outputs for {} evaluation images",
                outputs.len(),
                self.eval.len()
            )));
        }
        for (o, e) in outputs.iter().zip(&self.eval) {
            o.ensure_same_shape(&e.hr, &format!("model `{id}` output for `{}`", e.id))?;
        }
        self.ids.push(id);
        self.outputs.push(outputs);
        Ok(())
    }

    pub fn eval_items(&self) -> &[EvalItem] {
        &self.eval
    }

    pub fn model_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|m| m == id)
            .ok_or_else(|| Error::invalid(format!("unknown model id `{id}`")))
    }

    /// Cached outputs of one model.
    pub fn outputs_of(&self, id: &str) -> Result<&[Tensor]> {
        Ok(&self.outputs[self.index_of(id)?])
    }

    /// Averaged outputs of `combination`, one per evaluation image.
    pub fn combined_outputs(&self, combination: &Combination) -> Result<Vec<Tensor>> {
        let idx = combination
            .members()
            .iter()
            .map(|m| self.index_of(m))
            .collect::<Result<Vec<_>>>()?;
        (0..self.eval.len())
            .map(|img| {
                let outs: Vec<&Tensor> = idx.iter().map(|&m| &self.outputs[m][img]).collect();
                average_outputs(&outs)
            })
            .collect()
    }
}

/// A non-empty multiset of model ids, kept in selection order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Combination {
    members: Vec<String>,
}

impl Combination {
    pub fn new(members: Vec<String>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("a combination needs at least one member"));
        }
        Ok(Combination { members })
    }

    pub fn single(id: impl Into<String>) -> Self {
        Combination { members: vec![id.into()] }
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn extended(&self, id: &str) -> Self {
        let mut members = self.members.clone();
        members.push(id.to_string());
        Combination { members }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.members.join(", "))
    }
}

/// Aggregates a quality score over the evaluation set; higher is better.
pub trait Scorer {
    fn name(&self) -> &str;

    /// `outputs[i]` is the (averaged) super-resolved result for `items[i]`.
    fn score(&self, items: &[EvalItem], outputs: &[Tensor]) -> Result<f64>;
}

/// Mean PSNR over the evaluation set; identical pairs count as
/// [`Psnr::CAP_DB`](crate::metrics::Psnr::CAP_DB).
#[derive(Clone, Copy, Debug)]
pub struct PsnrScorer {
    pub border: BorderMode,
}

impl Default for PsnrScorer {
    fn default() -> Self {
        PsnrScorer { border: BorderMode::Keep }
    }
}

impl Scorer for PsnrScorer {
    fn name(&self) -> &str {
        "psnr"
    }

    fn score(&self, items: &[EvalItem], outputs: &[Tensor]) -> Result<f64> {
        let mut total = 0.0;
        for (item, out) in items.iter().zip(outputs) {
            total += psnr(out, &item.hr, DEFAULT_PEAK, self.border)?.capped();
        }
        Ok(total / items.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCombination {
    pub combination: Combination,
    pub score: f64,
    pub scorer_name: String,
}

pub fn score_combination(combination: &Combination, pool: &ModelPool, scorer: &dyn Scorer) -> Result<f64> {
    let outputs = pool.combined_outputs(combination)?;
    let s = scorer.score(pool.eval_items(), &outputs)?;
    if !s.is_finite() {
        return Err(Error::invalid(format!("scorer `{}` returned {s}", scorer.name())));
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    /// Winner of each round; round `k` (1-based) has `k` members.
    pub rounds: Vec<ScoredCombination>,
    /// Index into `rounds` of the overall best.
    pub best_round: usize,
}

impl GreedyOutcome {
    pub fn best(&self) -> &ScoredCombination {
        &self.rounds[self.best_round]
    }
}

/// Search stopped by a scorer failure; `completed` holds the rounds that finished
/// and must not be taken as a valid result.
#[derive(Debug, Error)]
#[error("greedy search aborted after {} complete round(s): {source}", completed.len())]
pub struct GreedyAborted {
    pub completed: Vec<ScoredCombination>,
    #[source]
    pub source: Error,
}

/// Greedy search over up to `max_rounds` rounds.
///
/// Ties go to the smallest model id within a round and to the earliest
/// (fewest-member) round overall.
pub fn greedy_search(
    pool: &ModelPool,
    scorer: &dyn Scorer,
    max_rounds: usize,
) -> std::result::Result<GreedyOutcome, GreedyAborted> {
    let abort = |completed: &[ScoredCombination], source: Error| GreedyAborted {
        completed: completed.to_vec(),
        source,
    };
    if pool.is_empty() {
        return Err(abort(&[], Error::invalid("model pool is empty")));
    }
    if max_rounds == 0 {
        return Err(abort(&[], Error::invalid("max_rounds must be >= 1")));
    }
    let mut candidates: Vec<&String> = pool.model_ids().iter().collect();
    candidates.sort();

    let mut rounds: Vec<ScoredCombination> = Vec::with_capacity(max_rounds);
    for round in 0..max_rounds {
        let base = rounds.last().map(|r| r.combination.clone());
        let mut best: Option<(Combination, f64)> = None;
        for id in &candidates {
            let combo = match &base {
                None => Combination::single(id.as_str()),
                Some(b) => b.extended(id),
            };
            let s = score_combination(&combo, pool, scorer).map_err(|e| abort(&rounds, e))?;
            if best.as_ref().is_none_or(|(_, bs)| s > *bs) {
                best = Some((combo, s));
            }
        }
        let (combination, score) = best.expect("pool is non-empty");
        debug_assert_eq!(combination.len(), round + 1);
        log::debug!("round {}: {combination} scores {score:.4}", round + 1);
        rounds.push(ScoredCombination {
            combination,
            score,
            scorer_name: scorer.name().to_string(),
        });
    }
    let mut best_round = 0;
    for (i, r) in rounds.iter().enumerate() {
        if r.score > rounds[best_round].score {
            best_round = i;
        }
    }
    Ok(GreedyOutcome { rounds, best_round })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::new(1, 1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn average_basics() {
        let a = t(&[0.1, 0.7, 0.3333]);
        assert_eq!(average_outputs(&[&a]).unwrap(), a);
        assert_eq!(average_outputs(&[&a, &a, &a, &a, &a, &a, &a]).unwrap(), a);
        let b = t(&[0.5, 0.2, 0.9]);
        let m = average_outputs(&[&a, &b]).unwrap();
        for i in 0..3 {
            assert!((m.data()[i] - (a.data()[i] + b.data()[i]) / 2.0).abs() < 1e-15);
        }
        assert!(average_outputs(&[]).is_err());
        assert!(average_outputs(&[&a, &t(&[1.0])]).is_err());
    }

    fn pool_with(models: &[(&str, Vec<f64>)], hr: &[f64]) -> ModelPool {
        let n = hr.len();
        let item = EvalItem {
            id: "img".into(),
            lr_upscaled: Tensor::zeros(1, 1, n),
            hr: t(hr),
            text: None,
        };
        let mut pool = ModelPool::new(vec![item]).unwrap();
        for (id, out) in models {
            pool.add_outputs(*id, vec![t(out)]).unwrap();
        }
        pool
    }

    #[test]
    fn single_model_pool_repeats() {
        let pool = pool_with(&[("A", vec![0.2, 0.4])], &[0.25, 0.4]);
        let out = greedy_search(&pool, &PsnrScorer::default(), 3).unwrap();
        let members: Vec<usize> = out.rounds.iter().map(|r| r.combination.len()).collect();
        assert_eq!(members, vec![1, 2, 3]);
        assert!(out.rounds.iter().all(|r| r.combination.members().iter().all(|m| m == "A")));
        assert_eq!(out.best_round, 0);
    }

    #[test]
    fn duplicates_do_not_change_score() {
        let pool = pool_with(&[("A", vec![0.2, 0.4]), ("B", vec![0.3, 0.5])], &[0.25, 0.4]);
        let s = PsnrScorer::default();
        let a = score_combination(&Combination::single("A"), &pool, &s).unwrap();
        let aa = score_combination(&Combination::new(vec!["A".into(), "A".into()]).unwrap(), &pool, &s).unwrap();
        assert_eq!(a, aa);
        let ab = score_combination(&Combination::new(vec!["A".into(), "B".into()]).unwrap(), &pool, &s).unwrap();
        let aabb = score_combination(
            &Combination::new(vec!["A".into(), "A".into(), "B".into(), "B".into()]).unwrap(),
            &pool,
            &s,
        )
        .unwrap();
        assert!((ab - aabb).abs() < 1e-9);
        assert!(score_combination(&Combination::single("Z"), &pool, &s).is_err());
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let pool = pool_with(&[("b", vec![0.3, 0.3]), ("a", vec![0.3, 0.3])], &[0.3, 0.3]);
        let out = greedy_search(&pool, &PsnrScorer::default(), 2).unwrap();
        assert_eq!(out.rounds[0].combination.members(), ["a"]);
        assert_eq!(out.rounds[1].combination.members(), ["a", "a"]);
        assert_eq!(out.best_round, 0);
    }

    struct Failing;

    impl Scorer for Failing {
        fn name(&self) -> &str {
            "failing"
        }

        fn score(&self, items: &[EvalItem], _outputs: &[Tensor]) -> Result<f64> {
            Err(Error::Scorer { image_id: items[0].id.clone(), reason: "boom".into() })
        }
    }

    #[test]
    fn scorer_failure_aborts() {
        let pool = pool_with(&[("A", vec![0.2])], &[0.25]);
        let err = greedy_search(&pool, &Failing, 3).unwrap_err();
        assert!(err.completed.is_empty());
        assert!(matches!(err.source, Error::Scorer { .. }));
        let empty = ModelPool::new(pool.eval_items().to_vec()).unwrap();
        assert!(greedy_search(&empty, &PsnrScorer::default(), 3).is_err());
    }
}
