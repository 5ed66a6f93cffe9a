use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{NetError, NodeId};

/// Axis-aligned region in meters, `[x0, y0, x1, y1]` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect(pub [f64; 4]);

impl Rect {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let [x0, y0, x1, y1] = self.0;
        p.0 >= x0 && p.0 <= x1 && p.1 >= y0 && p.1 <= y1
    }
}

/// Links removed on top of the range rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outages {
    /// Nodes with every link cut.
    pub isolated: BTreeSet<NodeId>,
    /// Nodes inside any of these regions lose every link.
    pub regions: Vec<Rect>,
    /// Individual links, stored as `(min, max)`.
    pub links: BTreeSet<(NodeId, NodeId)>,
}

impl Outages {
    pub fn is_empty(&self) -> bool {
        self.isolated.is_empty() && self.regions.is_empty() && self.links.is_empty()
    }
}

/// Undirected connectivity graph over live nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Topology {
    positions: BTreeMap<NodeId, (f64, f64)>,
    adj: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Topology {
    /// Disk graph: an edge iff two nodes are within `range`, minus `outages`.
    pub fn build(positions: &BTreeMap<NodeId, (f64, f64)>, range: f64, outages: &Outages) -> Topology {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = positions.keys().map(|k| (*k, BTreeSet::new())).collect();
        let cut = |n: NodeId, p: (f64, f64)| outages.isolated.contains(&n) || outages.regions.iter().any(|r| r.contains(p));
        let nodes: Vec<_> = positions.iter().map(|(k, v)| (*k, *v)).collect();
        for (i, &(a, pa)) in nodes.iter().enumerate() {
            if cut(a, pa) {
                continue;
            }
            for &(b, pb) in &nodes[i + 1..] {
                if cut(b, pb) || outages.links.contains(&(a.min(b), a.max(b))) {
                    continue;
                }
                if (pa.0 - pb.0).hypot(pa.1 - pb.1) <= range {
                    adj.get_mut(&a).unwrap().insert(b);
                    adj.get_mut(&b).unwrap().insert(a);
                }
            }
        }
        Topology { positions: positions.clone(), adj }
    }

    /// Graph from an explicit edge list (used by tests and tools).
    pub fn from_edges(nodes: impl IntoIterator<Item = NodeId>, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Topology {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = nodes.into_iter().map(|n| (n, BTreeSet::new())).collect();
        for (a, b) in edges {
            if a == b {
                continue;
            }
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        let positions = adj.keys().map(|k| (*k, (0.0, 0.0))).collect();
        Topology { positions, adj }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.adj.contains_key(&n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.get(&n).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn position(&self, n: NodeId) -> Option<(f64, f64)> {
        self.positions.get(&n).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().flat_map(|(a, s)| s.iter().filter(move |b| *b > a).map(move |b| (*a, *b)))
    }

    fn hop_counts(&self, from: NodeId) -> BTreeMap<NodeId, u32> {
        let mut dist = BTreeMap::from([(from, 0)]);
        let mut q = VecDeque::from([from]);
        while let Some(n) = q.pop_front() {
            let d = dist[&n] + 1;
            for m in self.neighbors(n) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(m) {
                    e.insert(d);
                    q.push_back(m);
                }
            }
        }
        dist
    }

    /// Minimum-hop route from `src` to `dst`, excluding `src`; empty when `src == dst`.
    ///
    /// Among equally short routes each step takes the smallest-id neighbour
    /// that is still on a shortest route.
    pub fn route(&self, src: NodeId, dst: NodeId) -> Result<Option<Vec<NodeId>>, NetError> {
        for n in [src, dst] {
            if !self.contains(n) {
                return Err(NetError::UnknownNode(n));
            }
        }
        if src == dst {
            return Ok(Some(Vec::new()));
        }
        let to_dst = self.hop_counts(dst);
        let Some(&hops) = to_dst.get(&src) else {
            return Ok(None);
        };
        let mut path = Vec::with_capacity(hops as usize);
        let mut at = src;
        while at != dst {
            let d = to_dst[&at];
            at = self.neighbors(at).find(|m| to_dst.get(m) == Some(&(d - 1))).expect("distance field is consistent");
            path.push(at);
        }
        Ok(Some(path))
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn partitions(&self) -> Vec<Vec<NodeId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for n in self.nodes() {
            if seen.contains(&n) {
                continue;
            }
            let comp: Vec<NodeId> = self.hop_counts(n).into_keys().collect();
            seen.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }

    pub fn component_of(&self, n: NodeId) -> Vec<NodeId> {
        if !self.contains(n) {
            return Vec::new();
        }
        self.hop_counts(n).into_keys().collect()
    }
}
