//! Teacher-forcing decision sequences derived from recorded build orders.

use serde::{Deserialize, Serialize};

use super::{BuildRecord, DatasetError};
use crate::geometry::{check_validity, implied_edges, Edge, EdgeDirection, EdgeLabel, GeometryError, LegoGraph, Orientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    AddNode(Orientation),
    StopNodes,
    AddEdge(EdgeDirection),
    StopEdges,
    ChooseDest(usize),
    ChooseOffset(EdgeLabel),
}

impl Serialize for EdgeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.dx(), self.dy()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for EdgeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (dx, dy) = <(i32, i32)>::deserialize(d)?;
        EdgeLabel::new(dx, dy).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub decisions: Vec<Decision>,
}

impl DecisionTrace {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}

/// For each node in assembly order: `AddNode`, then one
/// `AddEdge, ChooseDest, ChooseOffset` triple per edge to an earlier node
/// (stored edges in stored order, then implied edges by partner id), then
/// `StopEdges`. The trace ends with `StopNodes`.
pub fn derive_decision_trace(r: &BuildRecord) -> Result<DecisionTrace, DatasetError> {
    trace_for_graph(&r.graph)
}

pub fn trace_for_graph(g: &LegoGraph) -> Result<DecisionTrace, DatasetError> {
    let report = check_validity(g);
    if !report.valid || g.is_empty() {
        return Err(DatasetError::Geometry(if g.is_empty() { GeometryError::Empty } else { GeometryError::Invalid(report) }));
    }
    let implied = implied_edges(g)?;
    let mut decisions = Vec::new();
    for v in 0..g.node_count() {
        decisions.push(Decision::AddNode(g.nodes()[v]));
        let later_end = |e: &&Edge| e.src.max(e.dst) == v;
        let stored = g.edges().iter().filter(later_end);
        let mut extra: Vec<&Edge> = implied.iter().filter(later_end).collect();
        extra.sort_by_key(|e| e.src.min(e.dst));
        for e in stored.chain(extra) {
            let (direction, partner) = if e.dst == v { (EdgeDirection::Incoming, e.src) } else { (EdgeDirection::Outgoing, e.dst) };
            decisions.push(Decision::AddEdge(direction));
            decisions.push(Decision::ChooseDest(partner));
            decisions.push(Decision::ChooseOffset(e.label));
        }
        decisions.push(Decision::StopEdges);
    }
    decisions.push(Decision::StopNodes);
    Ok(DecisionTrace { decisions })
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("decision {index} ({decision:?}) is not allowed here")]
pub struct ReplayError {
    pub index: usize,
    pub decision: Decision,
}

/// Rebuilds the graph a trace describes.
pub fn replay_trace(trace: &DecisionTrace) -> Result<LegoGraph, ReplayError> {
    #[derive(PartialEq)]
    enum Expect {
        Node,
        Edge,
        Dest(EdgeDirection),
        Offset(EdgeDirection, usize),
        Done,
    }
    let mut g = LegoGraph::new();
    let mut expect = Expect::Node;
    for (index, &decision) in trace.decisions.iter().enumerate() {
        let err = ReplayError { index, decision };
        expect = match (expect, decision) {
            (Expect::Node, Decision::AddNode(o)) => {
                g.add_node(o);
                Expect::Edge
            }
            (Expect::Node, Decision::StopNodes) => Expect::Done,
            (Expect::Edge, Decision::AddEdge(d)) => Expect::Dest(d),
            (Expect::Edge, Decision::StopEdges) => Expect::Node,
            (Expect::Dest(d), Decision::ChooseDest(u)) if u + 1 < g.node_count() => Expect::Offset(d, u),
            (Expect::Offset(d, u), Decision::ChooseOffset(label)) => {
                let v = g.node_count() - 1;
                let (src, dst) = d.endpoints(v, u);
                g.add_edge(src, dst, label).map_err(|_| err)?;
                Expect::Edge
            }
            _ => return Err(err),
        };
    }
    if expect != Expect::Done {
        return Err(ReplayError { index: trace.decisions.len(), decision: Decision::StopNodes });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_key, with_implied_edges};

    fn record(g: LegoGraph) -> BuildRecord {
        BuildRecord { class_name: "t".into(), class_id: 0, graph: g }
    }

    #[test]
    fn single_brick_trace() {
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongX);
        let t = derive_decision_trace(&record(g)).unwrap();
        assert_eq!(
            t.decisions,
            vec![Decision::AddNode(Orientation::AlongX), Decision::StopEdges, Decision::StopNodes]
        );
    }

    #[test]
    fn two_stacked_bricks_take_eight_decisions() {
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongX);
        g.add_node(Orientation::AlongX);
        let label = EdgeLabel::new(1, 0).unwrap();
        g.add_edge(0, 1, label).unwrap();
        let t = derive_decision_trace(&record(g.clone())).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.decisions[3..6], [Decision::AddEdge(EdgeDirection::Incoming), Decision::ChooseDest(0), Decision::ChooseOffset(label)]);
        assert_eq!(replay_trace(&t).unwrap(), g);
    }

    #[test]
    fn implied_edges_follow_stored_edges() {
        // Square: two AlongY bricks under two AlongX bricks, one edge omitted.
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongY);
        g.add_node(Orientation::AlongX);
        g.add_node(Orientation::AlongY);
        g.add_node(Orientation::AlongX);
        let l = |dx, dy| EdgeLabel::new(dx, dy).unwrap();
        g.add_edge(0, 1, l(0, 0)).unwrap();
        g.add_edge(2, 1, l(-2, 0)).unwrap();
        g.add_edge(0, 3, l(0, 2)).unwrap();
        // 2 -> 3 is implied and must appear last for node 3.
        let t = derive_decision_trace(&record(g.clone())).unwrap();
        let replayed = replay_trace(&t).unwrap();
        assert_eq!(replayed, with_implied_edges(&g).unwrap());
        assert_eq!(canonical_key(&replayed).unwrap(), canonical_key(&g).unwrap());
        let tail = &t.decisions[t.len() - 5..];
        assert_eq!(tail[0..3], [Decision::AddEdge(EdgeDirection::Incoming), Decision::ChooseDest(2), Decision::ChooseOffset(l(-2, 2))]);
    }

    #[test]
    fn replay_rejects_malformed() {
        let bad = DecisionTrace { decisions: vec![Decision::StopEdges] };
        assert!(replay_trace(&bad).is_err());
        let dangling = DecisionTrace { decisions: vec![Decision::AddNode(Orientation::AlongX), Decision::AddEdge(EdgeDirection::Incoming), Decision::ChooseDest(0)] };
        assert!(replay_trace(&dangling).is_err());
    }
}
