//! Measurement-path candidates rooted at the transceiver.
//!
//! A loopy path (LP) leaves the transceiver and returns to it without
//! revisiting any other node. A folded path (FP) walks a simple path out to a
//! destination and retraces it back, so every link on it is traversed twice.
//! Walks containing partial loops are never produced.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::topology::{LinkIdx, NodeIdx, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("destination must differ from the transceiver")]
    DestinationIsTransceiver,
    #[error("node index {0} out of range")]
    UnknownNode(NodeIdx),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PathKind {
    #[serde(rename = "LP")]
    Loopy,
    #[serde(rename = "FP")]
    Folded,
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathKind::Loopy => "LP",
            PathKind::Folded => "FP",
        })
    }
}

/// Closed walk from the transceiver back to itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementPath {
    /// Visited nodes, first and last are the transceiver.
    nodes: Vec<NodeIdx>,
    kind: PathKind,
    /// Turning point of a folded path.
    destination: Option<NodeIdx>,
    /// Traversal count per link, dense over all links.
    counts: Vec<u8>,
}

impl MeasurementPath {
    fn from_walk(
        top: &Topology,
        nodes: Vec<NodeIdx>,
        kind: PathKind,
        destination: Option<NodeIdx>,
    ) -> Self {
        let mut counts = vec![0u8; top.link_count()];
        for w in nodes.windows(2) {
            let j = top
                .link_between(w[0], w[1])
                .expect("walk follows existing links");
            counts[j] += 1;
        }
        MeasurementPath {
            nodes,
            kind,
            destination,
            counts,
        }
    }

    /// Folds a simple path `s -> ... -> v` into an out-and-back walk.
    pub fn folded(top: &Topology, forward: &[NodeIdx]) -> Self {
        let mut nodes = forward.to_vec();
        nodes.extend(forward.iter().rev().skip(1));
        let dest = *forward.last().expect("nonempty path");
        Self::from_walk(top, nodes, PathKind::Folded, Some(dest))
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn destination(&self) -> Option<NodeIdx> {
        self.destination
    }

    pub fn nodes(&self) -> &[NodeIdx] {
        &self.nodes
    }

    /// Number of link traversals.
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Dense traversal counts, one entry per link.
    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    /// Nonzero `(link, count)` pairs in link order.
    pub fn link_counts(&self) -> impl Iterator<Item = (LinkIdx, u8)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (j, c))
    }

    pub fn traverses(&self, j: LinkIdx) -> bool {
        self.counts[j] > 0
    }

    /// Human-readable walk such as `s>a>b>s`.
    pub fn describe(&self, top: &Topology) -> String {
        let names: Vec<&str> = self.nodes.iter().map(|&v| top.node_name(v)).collect();
        format!("{} {}", self.kind, names.join(">"))
    }

    /// Checks the LP/FP structural definition.
    pub fn is_well_formed(&self, s: NodeIdx) -> bool {
        let n = &self.nodes;
        if n.len() < 3 || n[0] != s || n[n.len() - 1] != s {
            return false;
        }
        match self.kind {
            PathKind::Loopy => {
                let inner = &n[1..n.len() - 1];
                let distinct: HashSet<_> = inner.iter().collect();
                distinct.len() == inner.len()
                    && !inner.contains(&s)
                    && self.counts.iter().all(|&c| c <= 1)
            }
            PathKind::Folded => {
                if n.len().is_multiple_of(2) {
                    return false;
                }
                let mid = n.len() / 2;
                let forward = &n[..=mid];
                let back: Vec<_> = n[mid..].iter().rev().copied().collect();
                let distinct: HashSet<_> = forward.iter().collect();
                forward == back.as_slice()
                    && distinct.len() == forward.len()
                    && self.destination == Some(n[mid])
                    && self.counts.iter().all(|&c| c == 0 || c == 2)
            }
        }
    }
}

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub destination: NodeIdx,
    /// Indices `(a, b)` into the destination's disjoint-path list, absent for
    /// folded paths added by exhaustive enumeration.
    pub pair: Option<(usize, usize)>,
}

/// Ordered, deduplicated pool of measurement-path candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateSet {
    paths: Vec<MeasurementPath>,
    provenance: Vec<Provenance>,
    seen: HashSet<Vec<u8>>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `path` unless a candidate with the same traversal counts exists.
    pub fn insert(&mut self, path: MeasurementPath, provenance: Provenance) -> bool {
        if !self.seen.insert(path.counts.clone()) {
            return false;
        }
        self.paths.push(path);
        self.provenance.push(provenance);
        true
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[MeasurementPath] {
        &self.paths
    }

    pub fn get(&self, i: usize) -> &MeasurementPath {
        &self.paths[i]
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MeasurementPath, Provenance)> {
        self.paths.iter().zip(self.provenance.iter().copied())
    }

    /// This set followed by every candidate of `other` not already present.
    pub fn union(&self, other: &CandidateSet) -> CandidateSet {
        let mut out = self.clone();
        for (p, prov) in other.iter() {
            out.insert(p.clone(), prov);
        }
        out
    }

    pub fn count_kind(&self, kind: PathKind) -> usize {
        self.paths.iter().filter(|p| p.kind == kind).count()
    }

    /// One line per candidate:
    /// `LP|FP dest=<v> hops=<n> links=<j:count,...>`, links one-based.
    pub fn to_listing(&self, top: &Topology) -> String {
        let mut out = String::new();
        for (p, prov) in self.iter() {
            let links: Vec<String> = p
                .link_counts()
                .map(|(j, c)| format!("{}:{}", j + 1, c))
                .collect();
            writeln!(
                out,
                "{} dest={} hops={} links={}",
                p.kind,
                top.node_name(prov.destination),
                p.hops(),
                links.join(",")
            )
            .unwrap();
        }
        out
    }
}

/// Maximum set of internally node-disjoint `s -> v` paths with minimum total
/// hop count, each path given as its node sequence.
///
/// Solved as a min-cost max-flow on the node-split graph: every node other
/// than `s` and `v` becomes an `in -> out` arc of capacity one, every link
/// becomes a pair of unit-cost arcs. Paths are listed in the canonical order
/// of their first hop.
pub fn node_disjoint_paths(top: &Topology, v: NodeIdx) -> Result<Vec<Vec<NodeIdx>>, PathError> {
    let s = top.transceiver();
    if v >= top.node_count() {
        return Err(PathError::UnknownNode(v));
    }
    if v == s {
        return Err(PathError::DestinationIsTransceiver);
    }
    let n = top.node_count();
    let inn = |u: NodeIdx| 2 * u;
    let out = |u: NodeIdx| 2 * u + 1;

    let mut net = FlowNetwork::new(2 * n);
    for u in top.nodes() {
        if u != s && u != v {
            net.add_arc(inn(u), out(u), 0);
        }
    }
    // link arcs[u][k] = arc from u_out toward its k-th neighbor
    let mut link_arcs = vec![Vec::new(); n];
    for u in top.nodes() {
        if u == v {
            continue;
        }
        for &(w, _) in top.neighbors(u) {
            if w == s {
                continue;
            }
            let id = net.add_arc(out(u), inn(w), 1);
            link_arcs[u].push((w, id));
        }
    }
    net.min_cost_max_flow(out(s), inn(v));

    let mut paths = Vec::new();
    for &(first, arc) in &link_arcs[s] {
        if !net.carries_flow(arc) {
            continue;
        }
        let mut path = vec![s, first];
        let mut at = first;
        while at != v {
            let (next, _) = *link_arcs[at]
                .iter()
                .find(|&&(_, id)| net.carries_flow(id))
                .expect("flow is conserved at split nodes");
            path.push(next);
            at = next;
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Joins an `s -> v` path and a `v -> s` path into a measurement path.
///
/// Returns an FP when `backward` retraces `forward`, an LP when the two
/// share no node besides `s` and `v`, and `None` when joining them would
/// create a partial loop.
pub fn make_candidate(
    top: &Topology,
    forward: &[NodeIdx],
    backward: &[NodeIdx],
) -> Option<MeasurementPath> {
    let s = top.transceiver();
    let (&start, &v) = (forward.first()?, forward.last()?);
    if start != s || backward.first() != Some(&v) || backward.last() != Some(&s) || v == s {
        return None;
    }
    if !is_simple(forward) || !is_simple(backward) {
        return None;
    }
    if forward.iter().rev().eq(backward.iter()) {
        return Some(MeasurementPath::folded(top, forward));
    }
    let inner_fwd: HashSet<_> = forward[1..forward.len() - 1].iter().collect();
    if backward[1..backward.len() - 1]
        .iter()
        .any(|u| inner_fwd.contains(u))
    {
        return None;
    }
    let mut nodes = forward.to_vec();
    nodes.extend_from_slice(&backward[1..]);
    Some(MeasurementPath::from_walk(
        top,
        nodes,
        PathKind::Loopy,
        None,
    ))
}

fn is_simple(p: &[NodeIdx]) -> bool {
    p.iter().collect::<HashSet<_>>().len() == p.len()
}

/// Candidate search: for every destination, every ordered pairing of a
/// disjoint path with a reversed disjoint path.
pub fn enumerate_candidates(top: &Topology) -> CandidateSet {
    let s = top.transceiver();
    let mut set = CandidateSet::new();
    for v in top.nodes().filter(|&v| v != s) {
        let disjoint = node_disjoint_paths(top, v).expect("v differs from s");
        for (a, fwd) in disjoint.iter().enumerate() {
            for (b, back) in disjoint.iter().enumerate() {
                let reversed: Vec<_> = back.iter().rev().copied().collect();
                if let Some(path) = make_candidate(top, fwd, &reversed) {
                    set.insert(
                        path,
                        Provenance {
                            destination: v,
                            pair: Some((a, b)),
                        },
                    );
                }
            }
        }
    }
    set
}

/// Every folded path over a simple path from `s` of at most `max_hops`
/// links, in depth-first order with neighbors visited canonically.
pub fn enumerate_all_fps(top: &Topology, max_hops: usize) -> CandidateSet {
    let s = top.transceiver();
    let mut set = CandidateSet::new();
    let mut on_path = vec![false; top.node_count()];
    let mut stack = vec![s];
    on_path[s] = true;
    extend_fps(top, max_hops, &mut stack, &mut on_path, &mut set);
    set
}

fn extend_fps(
    top: &Topology,
    max_hops: usize,
    stack: &mut Vec<NodeIdx>,
    on_path: &mut [bool],
    set: &mut CandidateSet,
) {
    if stack.len() > max_hops {
        return;
    }
    let at = *stack.last().unwrap();
    for &(w, _) in top.neighbors(at) {
        if on_path[w] {
            continue;
        }
        stack.push(w);
        on_path[w] = true;
        set.insert(
            MeasurementPath::folded(top, stack),
            Provenance {
                destination: w,
                pair: None,
            },
        );
        extend_fps(top, max_hops, stack, on_path, set);
        on_path[w] = false;
        stack.pop();
    }
}

/// Unit-capacity residual network for successive shortest paths.
struct FlowNetwork {
    /// `(to, residual capacity, cost)`; arc `i ^ 1` is the reverse of `i`.
    arcs: Vec<(usize, i32, i64)>,
    head: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(vertices: usize) -> Self {
        FlowNetwork {
            arcs: Vec::new(),
            head: vec![Vec::new(); vertices],
        }
    }

    fn add_arc(&mut self, from: usize, to: usize, cost: i64) -> usize {
        let id = self.arcs.len();
        self.arcs.push((to, 1, cost));
        self.arcs.push((from, 0, -cost));
        self.head[from].push(id);
        self.head[to].push(id + 1);
        id
    }

    fn carries_flow(&self, arc: usize) -> bool {
        self.arcs[arc].1 == 0
    }

    /// Augments along Bellman-Ford shortest paths until the sink is cut off.
    fn min_cost_max_flow(&mut self, source: usize, sink: usize) -> usize {
        let n = self.head.len();
        let mut flow = 0;
        loop {
            let mut dist = vec![i64::MAX; n];
            let mut via = vec![usize::MAX; n];
            dist[source] = 0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u] == i64::MAX {
                        continue;
                    }
                    for &id in &self.head[u] {
                        let (to, cap, cost) = self.arcs[id];
                        if cap > 0 && dist[u] + cost < dist[to] {
                            dist[to] = dist[u] + cost;
                            via[to] = id;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[sink] == i64::MAX {
                return flow;
            }
            let mut at = sink;
            while at != source {
                let id = via[at];
                self.arcs[id].1 -= 1;
                self.arcs[id ^ 1].1 += 1;
                at = self.arcs[id ^ 1].0;
            }
            flow += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::fixtures::{self, connected_graph};
    use proptest::prelude::*;

    fn idx(top: &Topology, names: &[&str]) -> Vec<NodeIdx> {
        names.iter().map(|n| top.node_index(n).unwrap()).collect()
    }

    fn counts(set: &CandidateSet) -> Vec<Vec<u8>> {
        set.paths().iter().map(|p| p.counts().to_vec()).collect()
    }

    #[test]
    fn triangle_disjoint_paths() {
        let top = fixtures::triangle();
        let a = top.node_index("a").unwrap();
        let paths = node_disjoint_paths(&top, a).unwrap();
        assert_eq!(
            paths,
            vec![idx(&top, &["s", "a"]), idx(&top, &["s", "b", "a"])]
        );
    }

    #[test]
    fn bridge_forces_single_path() {
        let top = fixtures::path3();
        let b = top.node_index("b").unwrap();
        let paths = node_disjoint_paths(&top, b).unwrap();
        assert_eq!(paths, vec![idx(&top, &["s", "a", "b"])]);
    }

    #[test]
    fn k4_disjoint_paths() {
        let top = fixtures::k4();
        let a = top.node_index("a").unwrap();
        let paths = node_disjoint_paths(&top, a).unwrap();
        assert_eq!(
            paths,
            vec![
                idx(&top, &["s", "a"]),
                idx(&top, &["s", "b", "a"]),
                idx(&top, &["s", "c", "a"]),
            ]
        );
        let hops: usize = paths.iter().map(|p| p.len() - 1).sum();
        assert_eq!(hops, 5);
    }

    #[test]
    fn destination_must_not_be_transceiver() {
        let top = fixtures::triangle();
        assert_eq!(
            node_disjoint_paths(&top, top.transceiver()),
            Err(PathError::DestinationIsTransceiver)
        );
    }

    #[test]
    fn make_candidate_cases() {
        let top = fixtures::triangle();
        let fp = make_candidate(&top, &idx(&top, &["s", "a"]), &idx(&top, &["a", "s"])).unwrap();
        assert_eq!(fp.kind(), PathKind::Folded);
        assert_eq!(fp.counts(), &[2, 0, 0]);

        let lp =
            make_candidate(&top, &idx(&top, &["s", "a"]), &idx(&top, &["a", "b", "s"])).unwrap();
        assert_eq!(lp.kind(), PathKind::Loopy);
        assert_eq!(lp.counts(), &[1, 1, 1]);
        assert_eq!(lp.nodes(), idx(&top, &["s", "a", "b", "s"]).as_slice());

        let back = make_candidate(
            &top,
            &idx(&top, &["s", "a", "b"]),
            &idx(&top, &["b", "a", "s"]),
        );
        assert_eq!(back.unwrap().counts(), &[2, 2, 0]);

        // b -> a revisits a without retracing s -> a -> b
        let k4 = fixtures::k4();
        assert!(make_candidate(
            &k4,
            &idx(&k4, &["s", "a", "b"]),
            &idx(&k4, &["b", "a", "c", "s"])
        )
        .is_none());
    }

    #[test]
    fn triangle_candidates() {
        let top = fixtures::triangle();
        let set = enumerate_candidates(&top);
        assert_eq!(
            counts(&set),
            vec![
                vec![2, 0, 0],
                vec![1, 1, 1],
                vec![0, 2, 2],
                vec![2, 2, 0],
                vec![0, 0, 2],
            ]
        );
        assert_eq!(set.count_kind(PathKind::Loopy), 1);
    }

    #[test]
    fn path_graph_candidates() {
        let top = fixtures::path3();
        assert_eq!(
            counts(&enumerate_candidates(&top)),
            vec![vec![2, 0], vec![2, 2]]
        );
    }

    #[test]
    fn all_fps() {
        let top = fixtures::triangle();
        let mut got = counts(&enumerate_all_fps(&top, 2));
        got.sort();
        assert_eq!(
            got,
            vec![vec![0, 0, 2], vec![0, 2, 2], vec![2, 0, 0], vec![2, 2, 0]]
        );
        assert_eq!(
            counts(&enumerate_all_fps(&fixtures::path3(), 1)),
            vec![vec![2, 0]]
        );

        // every fold is already a STEP-1 candidate on the triangle
        let step1 = enumerate_candidates(&top);
        assert_eq!(step1.union(&enumerate_all_fps(&top, 2)).len(), step1.len());
    }

    #[test]
    fn listing_format() {
        let top = fixtures::triangle();
        let listing = enumerate_candidates(&top).to_listing(&top);
        let lines: Vec<&str> = listing.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "FP dest=a hops=2 links=1:2");
        assert_eq!(lines[1], "LP dest=a hops=3 links=1:1,2:1,3:1");
        assert_eq!(lines[4], "FP dest=b hops=2 links=3:2");
    }

    /// All simple `s -> v` paths, by exhaustive search.
    fn all_simple_paths(top: &Topology, v: NodeIdx) -> Vec<Vec<NodeIdx>> {
        fn go(top: &Topology, v: NodeIdx, cur: &mut Vec<NodeIdx>, out: &mut Vec<Vec<NodeIdx>>) {
            let at = *cur.last().unwrap();
            if at == v {
                out.push(cur.clone());
                return;
            }
            for &(w, _) in top.neighbors(at) {
                if !cur.contains(&w) {
                    cur.push(w);
                    go(top, v, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(top, v, &mut vec![top.transceiver()], &mut out);
        out
    }

    /// Best `(count, -hops)` over all internally disjoint path families.
    fn brute_force_disjoint(top: &Topology, v: NodeIdx) -> (usize, usize) {
        let paths = all_simple_paths(top, v);
        fn search(
            paths: &[Vec<NodeIdx>],
            from: usize,
            used: &mut Vec<bool>,
            direct_used: bool,
            count: usize,
            hops: usize,
            best: &mut (usize, usize),
        ) {
            if count > best.0 || (count == best.0 && hops < best.1) {
                *best = (count, hops);
            }
            for i in from..paths.len() {
                let p = &paths[i];
                let inner = &p[1..p.len() - 1];
                let direct = inner.is_empty();
                if (direct && direct_used) || inner.iter().any(|&u| used[u]) {
                    continue;
                }
                for &u in inner {
                    used[u] = true;
                }
                search(
                    paths,
                    i + 1,
                    used,
                    direct_used || direct,
                    count + 1,
                    hops + p.len() - 1,
                    best,
                );
                for &u in inner {
                    used[u] = false;
                }
            }
        }
        let mut best = (0, 0);
        search(
            &paths,
            0,
            &mut vec![false; top.node_count()],
            false,
            0,
            0,
            &mut best,
        );
        best
    }

    /// Menger oracle: smallest set of intermediate nodes whose removal cuts
    /// `s` from `v`, plus one for a direct link.
    fn min_vertex_cut(top: &Topology, v: NodeIdx) -> usize {
        let s = top.transceiver();
        let others: Vec<_> = top.nodes().filter(|&u| u != s && u != v).collect();
        let direct = usize::from(top.link_between(s, v).is_some());
        let mut best = usize::MAX;
        for mask in 0u32..(1 << others.len()) {
            let removed: Vec<_> = others
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &u)| u)
                .collect();
            let mut seen = vec![false; top.node_count()];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &(w, _) in top.neighbors(u) {
                    if (u == s && w == v) || seen[w] || removed.contains(&w) {
                        continue;
                    }
                    seen[w] = true;
                    stack.push(w);
                }
            }
            if !seen[v] {
                best = best.min(removed.len());
            }
        }
        best + direct
    }

    proptest! {
        #[test]
        fn disjoint_paths_match_oracles(top in connected_graph()) {
            let s = top.transceiver();
            for v in top.nodes().filter(|&v| v != s) {
                let paths = node_disjoint_paths(&top, v).unwrap();
                let mut seen = HashSet::new();
                for p in &paths {
                    prop_assert_eq!(p[0], s);
                    prop_assert_eq!(*p.last().unwrap(), v);
                    prop_assert!(is_simple(p));
                    for w in p.windows(2) {
                        prop_assert!(top.link_between(w[0], w[1]).is_some());
                    }
                    for &u in &p[1..p.len() - 1] {
                        prop_assert!(seen.insert(u), "intermediate node shared");
                    }
                }
                let hops: usize = paths.iter().map(|p| p.len() - 1).sum();
                prop_assert_eq!(paths.len(), min_vertex_cut(&top, v));
                prop_assert_eq!((paths.len(), hops), brute_force_disjoint(&top, v));
            }
        }

        #[test]
        fn candidates_are_well_formed(top in connected_graph()) {
            let s = top.transceiver();
            let set = enumerate_candidates(&top).union(&enumerate_all_fps(&top, top.node_count() - 1));
            let mut keys = HashSet::new();
            for p in set.paths() {
                prop_assert!(p.is_well_formed(s), "{:?}", p);
                prop_assert!(keys.insert(p.counts().to_vec()));
                let allowed: &[u8] = match p.kind() {
                    PathKind::Loopy => &[0, 1],
                    PathKind::Folded => &[0, 2],
                };
                prop_assert!(p.counts().iter().all(|c| allowed.contains(c)));
            }
        }
    }
}
