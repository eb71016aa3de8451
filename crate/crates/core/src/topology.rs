//! Undirected network topologies with a single transceiver node.
//!
//! Text format, one directive per line:
//!
//! ```text
//! # comment
//! transceiver s
//! link s a
//! link a b
//! ```
//!
//! Nodes are the endpoints named by `link` lines (plus the transceiver).
//! Links are indexed in the order they are declared; node indices follow
//! the lexicographic order of their identifiers.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

/// Index of a node in canonical (lexicographic) order.
pub type NodeIdx = usize;
/// Zero-based link index. Exports print it one-based as `e1..eJ`.
pub type LinkIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: self-loop on node `{node}`")]
    SelfLoop { line: usize, node: String },
    #[error("line {line}: duplicate link `{a}` - `{b}`")]
    DuplicateLink { line: usize, a: String, b: String },
    #[error("line {line}: transceiver declared more than once")]
    DuplicateTransceiver { line: usize },
    #[error("no transceiver declared")]
    MissingTransceiver,
    #[error("transceiver `{0}` is not an endpoint of any link")]
    UnknownTransceiver(String),
    #[error("topology has no links")]
    NoLinks,
    #[error("graph is disconnected: `{0}` is unreachable from the transceiver")]
    Disconnected(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// A validated, immutable, connected undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    nodes: Vec<String>,
    /// Endpoints of each link, stored as `(min, max)` node indices.
    links: Vec<(NodeIdx, NodeIdx)>,
    transceiver: NodeIdx,
    /// Per-node `(neighbor, link)` list sorted by neighbor index.
    adjacency: Vec<Vec<(NodeIdx, LinkIdx)>>,
    link_lookup: HashMap<(NodeIdx, NodeIdx), LinkIdx>,
}

impl Topology {
    /// Builds a topology from a transceiver id and a list of links given as
    /// node-id pairs, in index order.
    pub fn from_links<S: AsRef<str>>(
        transceiver: &str,
        links: &[(S, S)],
    ) -> Result<Self, TopologyError> {
        let decl: Vec<(usize, String, String)> = links
            .iter()
            .enumerate()
            .map(|(i, (a, b))| (i + 1, a.as_ref().to_owned(), b.as_ref().to_owned()))
            .collect();
        Self::build(transceiver.to_owned(), &decl)
    }

    fn build(transceiver: String, decl: &[(usize, String, String)]) -> Result<Self, TopologyError> {
        if decl.is_empty() {
            return Err(TopologyError::NoLinks);
        }
        let names: BTreeSet<&str> = decl
            .iter()
            .flat_map(|(_, a, b)| [a.as_str(), b.as_str()])
            .collect();
        let nodes: Vec<String> = names.into_iter().map(str::to_owned).collect();
        let index: HashMap<&str, NodeIdx> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();

        let mut links = Vec::with_capacity(decl.len());
        let mut link_lookup = HashMap::new();
        for (line, a, b) in decl {
            if a == b {
                return Err(TopologyError::SelfLoop {
                    line: *line,
                    node: a.clone(),
                });
            }
            let (u, v) = (index[a.as_str()], index[b.as_str()]);
            let key = (u.min(v), u.max(v));
            if link_lookup.insert(key, links.len()).is_some() {
                return Err(TopologyError::DuplicateLink {
                    line: *line,
                    a: a.clone(),
                    b: b.clone(),
                });
            }
            links.push(key);
        }

        let transceiver = *index
            .get(transceiver.as_str())
            .ok_or(TopologyError::UnknownTransceiver(transceiver.clone()))?;

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (j, &(u, v)) in links.iter().enumerate() {
            adjacency[u].push((v, j));
            adjacency[v].push((u, j));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        let top = Topology {
            nodes,
            links,
            transceiver,
            adjacency,
            link_lookup,
        };
        if let Some(v) = top.first_unreachable() {
            return Err(TopologyError::Disconnected(top.nodes[v].clone()));
        }
        Ok(top)
    }

    fn first_unreachable(&self) -> Option<NodeIdx> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([self.transceiver]);
        seen[self.transceiver] = true;
        while let Some(u) = queue.pop_front() {
            for &(w, _) in &self.adjacency[u] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn transceiver(&self) -> NodeIdx {
        self.transceiver
    }

    pub fn node_name(&self, v: NodeIdx) -> &str {
        &self.nodes[v]
    }

    pub fn node_index(&self, name: &str) -> Option<NodeIdx> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIdx> {
        0..self.nodes.len()
    }

    /// Endpoints of link `j`, smaller node index first.
    pub fn link(&self, j: LinkIdx) -> (NodeIdx, NodeIdx) {
        self.links[j]
    }

    pub fn link_between(&self, u: NodeIdx, v: NodeIdx) -> Option<LinkIdx> {
        self.link_lookup.get(&(u.min(v), u.max(v))).copied()
    }

    /// Neighbors of `v` with the connecting link, in canonical node order.
    pub fn neighbors(&self, v: NodeIdx) -> &[(NodeIdx, LinkIdx)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: NodeIdx) -> usize {
        self.adjacency[v].len()
    }

    /// Degree lookup by node identifier.
    pub fn degree_of(&self, name: &str) -> Result<usize, TopologyError> {
        self.node_index(name)
            .map(|v| self.degree(v))
            .ok_or_else(|| TopologyError::UnknownNode(name.to_owned()))
    }

    /// Writes the topology back in the text format, links in index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "transceiver {}", self.nodes[self.transceiver]).unwrap();
        for &(u, v) in &self.links {
            writeln!(out, "link {} {}", self.nodes[u], self.nodes[v]).unwrap();
        }
        out
    }
}

/// Parses the line-oriented topology format.
pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let mut transceiver: Option<String> = None;
    let mut decl = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["transceiver", id] => {
                if transceiver.is_some() {
                    return Err(TopologyError::DuplicateTransceiver { line: line_no });
                }
                transceiver = Some((*id).to_owned());
            }
            ["link", a, b] => decl.push((line_no, (*a).to_owned(), (*b).to_owned())),
            ["transceiver", ..] => {
                return Err(TopologyError::Syntax {
                    line: line_no,
                    message: "expected `transceiver <id>`".into(),
                })
            }
            ["link", ..] => {
                return Err(TopologyError::Syntax {
                    line: line_no,
                    message: "expected `link <id> <id>`".into(),
                })
            }
            [other, ..] => {
                return Err(TopologyError::Syntax {
                    line: line_no,
                    message: format!("unknown directive `{other}`"),
                })
            }
            [] => unreachable!(),
        }
    }
    let transceiver = transceiver.ok_or(TopologyError::MissingTransceiver)?;
    Topology::build(transceiver, &decl)
}
