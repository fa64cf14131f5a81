//! Ancestral sampling, optionally restricted to valid structures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{candidates, Dgmlg, DecisionKind, Result, StepLogProb, StepLogProbs, ADD_NODE_OUTCOMES, NO_EDGE, STOP_NODES};
use crate::dataset::{Decision, DecisionTrace};
use crate::geometry::{implied_edges, valid_options, EdgeDirection, EdgeLabel, LegoGraph, Orientation, ValidOptions, OFFSET_COUNT};
use crate::tensor::{softmax_rows, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    /// Mask every head to choices that keep the structure valid.
    pub restricted: bool,
    /// Take the most probable outcome instead of sampling.
    pub greedy: bool,
    pub max_nodes: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { restricted: false, greedy: false, max_nodes: 150 }
    }
}

#[derive(Debug, Clone)]
pub struct Sampled {
    pub graph: LegoGraph,
    pub steps: StepLogProbs,
    /// Decisions taken, in order. Restricted runs also add each brick's
    /// implied contacts after its edge phase; those are not decisions.
    pub decisions: DecisionTrace,
}

/// Picks an index from `probs` restricted to `allowed`, renormalised.
/// Returns the index and its renormalised probability, or `None` when
/// nothing is allowed.
fn choose(probs: &[f64], allowed: &[bool], greedy: bool, rng: &mut impl Rng) -> Option<(usize, f64)> {
    let mut mass: f64 = probs.iter().zip(allowed).filter(|(_, &a)| a).map(|(p, _)| p).sum();
    let count = allowed.iter().filter(|&&a| a).count();
    if count == 0 {
        return None;
    }
    // Underflowed mass: fall back to uniform over the allowed set.
    let uniform = mass <= 0.0 || !mass.is_finite();
    let weight = |i: usize| if !allowed[i] { 0.0 } else if uniform { 1.0 } else { probs[i] };
    if uniform {
        mass = count as f64;
    }
    let pick = if greedy {
        (0..probs.len()).filter(|&i| allowed[i]).fold(None, |best: Option<usize>, i| match best {
            Some(b) if weight(b) >= weight(i) => Some(b),
            _ => Some(i),
        })?
    } else {
        let mut target = rng.gen::<f64>() * mass;
        let mut last = None;
        let mut chosen = None;
        for i in 0..probs.len() {
            if !allowed[i] || weight(i) == 0.0 {
                continue;
            }
            last = Some(i);
            target -= weight(i);
            if target < 0.0 {
                chosen = Some(i);
                break;
            }
        }
        chosen.or(last)?
    };
    Some((pick, weight(pick) / mass))
}

fn record(steps: &mut StepLogProbs, kind: DecisionKind, choice: usize, p: f64) {
    steps.push(StepLogProb { kind, choice, log_p: p.ln() });
}

/// Grows one structure for `class_id`. Every structure has at least one
/// brick: stopping is masked while the graph is empty.
///
/// Restricted mode keeps the partial graph valid after every edge: a new
/// brick must be attached before its edge phase may stop, directions and
/// destinations without any valid offset are masked, and offsets are drawn
/// from the joint `p(dx) p(dy)` over the valid labels. If a brick can not be
/// attached at all it is removed and generation ends. Once a brick's edge
/// phase ends, its remaining physical contacts are added as edges, matching
/// the fully connected graphs seen in training.
pub fn sample(model: &Dgmlg, class_id: usize, opts: SampleOptions, rng: &mut impl Rng) -> Result<Sampled> {
    let net = &model.net;
    let store = &model.store;
    let mut tape = Tape::new();
    let mut st = net.start(&mut tape, class_id)?;
    let mut steps = StepLogProbs::default();
    let mut decisions = Vec::new();
    loop {
        if st.graph.node_count() >= opts.max_nodes {
            break;
        }
        let logits = net.add_node_logits(&mut tape, store, &st)?;
        let probs = softmax_rows(tape.value(logits));
        let mut allowed = [true; ADD_NODE_OUTCOMES];
        allowed[STOP_NODES] = !st.graph.is_empty();
        let (choice, p) = choose(probs.data(), &allowed, opts.greedy, rng).expect("orientations are always allowed");
        record(&mut steps, DecisionKind::AddNode, choice, p);
        if choice == STOP_NODES {
            decisions.push(Decision::StopNodes);
            break;
        }
        let orientation = Orientation::from_index(choice).expect("orientation outcome");
        decisions.push(Decision::AddNode(orientation));
        let v = net.add_node(&mut tape, store, &mut st, orientation)?;
        st.detach(&mut tape);
        let mut attached = false;
        loop {
            let logits = net.add_edge_logits(&mut tape, store, &st, v)?;
            let probs = softmax_rows(tape.value(logits));
            let dirs = [EdgeDirection::Incoming, EdgeDirection::Outgoing];
            let (allowed, options): ([bool; 3], Option<[ValidOptions; 2]>) = if opts.restricted {
                let o = dirs.map(|d| valid_options(&st.graph, v, d));
                let must_attach = v > 0 && !attached;
                ([!must_attach, !o[0].is_empty(), !o[1].is_empty()], Some(o))
            } else {
                let open = !candidates(&st.graph, v).is_empty();
                ([true, open, open], None)
            };
            let (choice, p) = match choose(probs.data(), &allowed, opts.greedy, rng) {
                Some(c) => c,
                None => (NO_EDGE, 1.0),
            };
            record(&mut steps, DecisionKind::AddEdge, choice, p);
            if choice == NO_EDGE {
                decisions.push(Decision::StopEdges);
                break;
            }
            let dir = dirs[choice - 1];
            decisions.push(Decision::AddEdge(dir));
            let cands: Vec<usize> = match &options {
                Some(o) => o[choice - 1].destinations().into_iter().collect(),
                None => candidates(&st.graph, v),
            };
            if cands.is_empty() {
                break;
            }
            let logits = net.dest_logits(&mut tape, store, &st, v, dir, &cands)?;
            let probs = softmax_rows(tape.value(logits));
            let (pos, p) = choose(probs.data(), &vec![true; cands.len()], opts.greedy, rng).expect("non-empty candidates");
            record(&mut steps, DecisionKind::ChooseDest, pos, p);
            let u = cands[pos];
            decisions.push(Decision::ChooseDest(u));
            let (src, dst) = dir.endpoints(v, u);
            let (lx, ly) = net.offset_logits(&mut tape, store, &st, src, dst)?;
            let px = net.offset_distribution(tape.value(lx).data());
            let py = net.offset_distribution(tape.value(ly).data());
            let mut joint = vec![0.0; OFFSET_COUNT * OFFSET_COUNT];
            let mut allowed = vec![true; joint.len()];
            for i in 0..OFFSET_COUNT {
                for j in 0..OFFSET_COUNT {
                    joint[i * OFFSET_COUNT + j] = px[i] * py[j];
                }
            }
            if let Some(o) = &options {
                let valid = &o[choice - 1].offsets[&u];
                for (k, a) in allowed.iter_mut().enumerate() {
                    let label = EdgeLabel::from_indices(k / OFFSET_COUNT, k % OFFSET_COUNT).expect("index in range");
                    *a = valid.contains(&label);
                }
            }
            let Some((k, p)) = choose(&joint, &allowed, opts.greedy, rng) else { break };
            record(&mut steps, DecisionKind::ChooseOffset, k, p);
            let label = EdgeLabel::from_indices(k / OFFSET_COUNT, k % OFFSET_COUNT).expect("index in range");
            decisions.push(Decision::ChooseOffset(label));
            net.add_edge(&mut tape, store, &mut st, src, dst, label)?;
            st.detach(&mut tape);
            attached = true;
        }
        if opts.restricted && v > 0 && !attached {
            st.graph.remove_node(v);
            break;
        }
        if opts.restricted {
            for e in implied_edges(&st.graph)? {
                net.add_edge(&mut tape, store, &mut st, e.src, e.dst, e.label)?;
                st.detach(&mut tape);
            }
        }
    }
    Ok(Sampled { graph: st.graph, steps, decisions: DecisionTrace { decisions } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgmlg::ModelConfig;
    use crate::geometry::check_validity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Dgmlg {
        let cfg = ModelConfig { node_dim: 8, edge_dim: 4, graph_dim: 8, num_classes: 3, head_hidden: vec![8], ..Default::default() };
        Dgmlg::new(cfg, 7).unwrap()
    }

    #[test]
    fn restricted_samples_are_valid() {
        let m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..40 {
            let s = sample(&m, i % 3, SampleOptions { restricted: true, max_nodes: 25, ..Default::default() }, &mut rng).unwrap();
            assert!(s.graph.is_empty() || check_validity(&s.graph).valid);
            assert!(s.steps.steps.iter().all(|x| x.log_p <= 1e-12));
        }
    }

    #[test]
    fn node_cap() {
        let m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let s = sample(&m, 0, SampleOptions { max_nodes: 1, ..Default::default() }, &mut rng).unwrap();
            assert!(s.graph.node_count() <= 1);
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let m = small();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            sample(&m, 2, SampleOptions { restricted: true, max_nodes: 30, ..Default::default() }, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn choose_renormalises() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (i, p) = choose(&[0.5, 0.3, 0.2], &[false, true, true], true, &mut rng).unwrap();
        assert_eq!(i, 1);
        assert!((p - 0.6).abs() < 1e-12);
        assert!(choose(&[0.5, 0.5], &[false, false], false, &mut rng).is_none());
    }

    #[test]
    fn sampled_log_probs_match_teacher_forcing() {
        let m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..10 {
            let s = sample(&m, i % 3, SampleOptions { max_nodes: 12, ..Default::default() }, &mut rng).unwrap();
            let (_, forced) = m.sequence_nll(&s.decisions, i % 3).unwrap();
            assert_eq!(forced.len(), s.steps.len());
            for (k, (a, b)) in forced.steps.iter().zip(&s.steps.steps).enumerate() {
                assert_eq!((a.kind, a.choice), (b.kind, b.choice));
                // Masked steps: stopping on the empty graph, and edges with no free partner.
                let masked = k == 0 || (b.kind == DecisionKind::AddEdge && b.choice == NO_EDGE);
                if masked {
                    assert!(b.log_p >= a.log_p - 1e-9);
                } else {
                    assert!((a.log_p - b.log_p).abs() < 1e-9, "step {k}: {a:?} vs {b:?}");
                }
            }
        }
    }
}
