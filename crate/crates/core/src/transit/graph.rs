use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{StationId, Timetable, TransitError};

/// Seconds charged for boarding a line (stands in for headway).
pub const BOARDING_SECONDS: f64 = 160.0;
/// Seconds charged for leaving a line.
pub const EXITING_SECONDS: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    /// Index into the timetable's station list.
    Station(usize),
    /// A station on one line, travelling one way.
    Direction { station: usize, line: usize, direction: Direction },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Boarding,
    Exiting,
    Travel,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub seconds: f64,
    pub kind: EdgeKind,
}

/// Station nodes plus two direction nodes per (station, line) incidence.
///
/// Nodes `0..stations` are the station nodes, in timetable order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    /// Outgoing edge indices per node, in insertion order.
    adjacency: Vec<Vec<usize>>,
    station_ids: Vec<StationId>,
}

/// Result of a fastest-path query.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitPath {
    pub seconds: f64,
    pub nodes: Vec<usize>,
}

impl TransitGraph {
    pub fn build(tt: &Timetable) -> Result<Self, TransitError> {
        tt.validate()?;
        let mut g = TransitGraph {
            nodes: (0..tt.stations.len()).map(Node::Station).collect(),
            edges: Vec::new(),
            adjacency: vec![Vec::new(); tt.stations.len()],
            station_ids: tt.stations.iter().map(|s| s.id).collect(),
        };
        // direction node indices per line position: (forward, backward)
        let mut line_nodes: Vec<Vec<(usize, usize)>> = Vec::with_capacity(tt.lines.len());
        for (li, line) in tt.lines.iter().enumerate() {
            let mut positions = Vec::with_capacity(line.stations.len());
            for &sid in &line.stations {
                let station = tt.station_index(sid).expect("validated");
                let fwd = g.add_node(Node::Direction { station, line: li, direction: Direction::Forward });
                let bwd = g.add_node(Node::Direction { station, line: li, direction: Direction::Backward });
                for dir in [fwd, bwd] {
                    g.add_edge(station, dir, BOARDING_SECONDS, EdgeKind::Boarding);
                    g.add_edge(dir, station, EXITING_SECONDS, EdgeKind::Exiting);
                }
                positions.push((fwd, bwd));
            }
            for (i, &secs) in line.segment_seconds.iter().enumerate() {
                g.add_edge(positions[i].0, positions[i + 1].0, secs, EdgeKind::Travel);
                g.add_edge(positions[i + 1].1, positions[i].1, secs, EdgeKind::Travel);
            }
            line_nodes.push(positions);
        }

        let dir_nodes_at = |station: usize| -> Vec<(usize, usize)> {
            let mut out = Vec::new();
            for (li, line) in tt.lines.iter().enumerate() {
                for (pos, &sid) in line.stations.iter().enumerate() {
                    if tt.station_index(sid) == Some(station) {
                        out.push((li, line_nodes[li][pos].0));
                        out.push((li, line_nodes[li][pos].1));
                    }
                }
            }
            out
        };
        for t in &tt.transfers {
            let a = tt.station_index(t.a).expect("validated");
            let b = tt.station_index(t.b).expect("validated");
            let at_a = dir_nodes_at(a);
            let at_b = dir_nodes_at(b);
            for &(la, x) in &at_a {
                for &(lb, y) in &at_b {
                    if la == lb {
                        continue;
                    }
                    g.add_edge(x, y, t.seconds, EdgeKind::Transfer);
                    // with a == b the reverse pair is enumerated on its own
                    if a != b {
                        g.add_edge(y, x, t.seconds, EdgeKind::Transfer);
                    }
                }
            }
        }
        Ok(g)
    }

    fn add_node(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.adjacency.push(Vec::new());
        self.nodes.len() - 1
    }

    fn add_edge(&mut self, from: usize, to: usize, seconds: f64, kind: EdgeKind) {
        self.adjacency[from].push(self.edges.len());
        self.edges.push(Edge { from, to, seconds, kind });
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn station_count(&self) -> usize {
        self.station_ids.len()
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.adjacency[node].iter().map(move |&e| &self.edges[e])
    }

    /// Node index of a station id.
    pub fn station_node(&self, id: StationId) -> Result<usize, TransitError> {
        self.station_ids.iter().position(|&s| s == id).ok_or(TransitError::UnknownStation(id))
    }

    /// Shortest times in seconds from one station node to every node.
    pub fn shortest_from(&self, source: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem { cost: 0.0, node: source });
        while let Some(HeapItem { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for e in self.outgoing(node) {
                let next = cost + e.seconds;
                if next < dist[e.to] {
                    dist[e.to] = next;
                    prev[e.to] = Some(node);
                    heap.push(HeapItem { cost: next, node: e.to });
                }
            }
        }
        (dist, prev)
    }

    /// Fastest path between two stations; `None` when unreachable.
    pub fn fastest_path(&self, from: StationId, to: StationId) -> Result<Option<TransitPath>, TransitError> {
        let s = self.station_node(from)?;
        let t = self.station_node(to)?;
        let (dist, prev) = self.shortest_from(s);
        if !dist[t].is_finite() {
            return Ok(None);
        }
        let mut nodes = vec![t];
        while let Some(p) = prev[*nodes.last().unwrap()] {
            nodes.push(p);
        }
        nodes.reverse();
        Ok(Some(TransitPath { seconds: dist[t], nodes }))
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapItem {
    cost: f64,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // min-heap on cost, then on node index
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}
