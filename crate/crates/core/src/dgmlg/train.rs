//! Teacher-forced maximum-likelihood training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dgmlg, ModelError, Result};
use crate::dataset::DecisionTrace;
use crate::tensor::optim::AdamState;
use crate::tensor::Tape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 8, lr: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean NLL per decision over the epoch.
    pub nll_per_decision: f64,
    /// Mean NLL per structure over the epoch.
    pub nll_per_graph: f64,
}

/// Shuffled minibatch Adam on `(trace, class_id)` pairs. `on_epoch` runs
/// after each epoch's updates.
pub fn train<F>(model: &mut Dgmlg, data: &[(DecisionTrace, usize)], cfg: &TrainConfig, mut on_epoch: F) -> Result<Vec<EpochStats>>
where
    F: FnMut(&EpochStats, &Dgmlg),
{
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let batch = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&model.store, cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut decisions) = (0.0, 0usize);
        for chunk in order.chunks(batch) {
            model.store.zero_grads();
            for &i in chunk {
                let (trace, class_id) = &data[i];
                let mut tape = Tape::new();
                let (loss, _) = model.net.trace_loss(&mut tape, &model.store, trace, *class_id)?;
                total += tape.scalar(loss);
                decisions += trace.len();
                let grads = tape.backward(loss)?;
                tape.accumulate_param_grads(&grads, &mut model.store);
            }
            model.store.scale_grads(1.0 / chunk.len() as f64);
            adam.step(&mut model.store)?;
        }
        let stats = EpochStats { epoch, nll_per_decision: total / decisions.max(1) as f64, nll_per_graph: total / data.len() as f64 };
        on_epoch(&stats, model);
        history.push(stats);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::trace_for_graph;
    use crate::dgmlg::ModelConfig;
    use crate::geometry::{EdgeLabel, LegoGraph, Orientation};

    fn data() -> Vec<(DecisionTrace, usize)> {
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongX);
        g.add_node(Orientation::AlongX);
        g.add_edge(0, 1, EdgeLabel::new(2, 0).unwrap()).unwrap();
        vec![(trace_for_graph(&g).unwrap(), 0)]
    }

    fn cfg() -> ModelConfig {
        ModelConfig { node_dim: 8, edge_dim: 4, graph_dim: 8, num_classes: 1, head_hidden: vec![8], ..Default::default() }
    }

    #[test]
    fn zero_lr_keeps_loss() {
        let mut m = Dgmlg::new(cfg(), 1).unwrap();
        let h = train(&mut m, &data(), &TrainConfig { epochs: 3, lr: 0.0, ..Default::default() }, |_, _| {}).unwrap();
        assert!(h.windows(2).all(|w| w[0].nll_per_graph == w[1].nll_per_graph));
    }

    #[test]
    fn loss_decreases() {
        let mut m = Dgmlg::new(cfg(), 1).unwrap();
        let h = train(&mut m, &data(), &TrainConfig { epochs: 30, lr: 1e-2, ..Default::default() }, |_, _| {}).unwrap();
        assert!(h.last().unwrap().nll_per_graph < 0.5 * h[0].nll_per_graph);
    }

    #[test]
    fn duplicated_full_batch_matches() {
        let one = data();
        let two: Vec<_> = one.iter().chain(one.iter()).cloned().collect();
        let tc = TrainConfig { epochs: 5, batch_size: 64, lr: 1e-3, seed: 3 };
        let mut a = Dgmlg::new(cfg(), 1).unwrap();
        let mut b = Dgmlg::new(cfg(), 1).unwrap();
        let ha = train(&mut a, &one, &tc, |_, _| {}).unwrap();
        let hb = train(&mut b, &two, &tc, |_, _| {}).unwrap();
        for (x, y) in ha.iter().zip(&hb) {
            assert!((x.nll_per_graph - y.nll_per_graph).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut m = Dgmlg::new(cfg(), 1).unwrap();
        assert!(matches!(train(&mut m, &[], &TrainConfig::default(), |_, _| {}), Err(ModelError::EmptyDataset)));
    }
}
