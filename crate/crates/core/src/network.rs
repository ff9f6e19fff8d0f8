//! Communication graphs for the action-sharing information model.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::Rng;

/// Undirected graph without self-loops. Neighbor lists are kept sorted so
/// observation rows come out in a deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationGraph {
    adjacency: Vec<Vec<bool>>,
    neighbors: Vec<Vec<usize>>,
    coordinates: Option<Vec<(f64, f64)>>,
}

impl CommunicationGraph {
    /// Builds a graph from an undirected edge list. Self-loops and duplicate
    /// edges are ignored; out-of-range endpoints panic.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
            if a != b {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
        Self::from_adjacency(adjacency)
    }

    fn from_adjacency(adjacency: Vec<Vec<bool>>) -> Self {
        let neighbors = adjacency
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter_map(|(j, &e)| e.then_some(j))
                    .collect()
            })
            .collect();
        Self {
            adjacency,
            neighbors,
            coordinates: None,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_edges(n, &[])
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Random geometric graph: `n` points uniform in `width × height`, an edge
    /// between every pair closer than `radius`.
    pub fn random_geometric<R: Rng + ?Sized>(
        n: usize,
        width: f64,
        height: f64,
        radius: f64,
        rng: &mut R,
    ) -> Self {
        let coords: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>() * width, rng.random::<f64>() * height))
            .collect();
        let mut adjacency = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
                if dx.hypot(dy) < radius {
                    adjacency[i][j] = true;
                    adjacency[j][i] = true;
                }
            }
        }
        let mut graph = Self::from_adjacency(adjacency);
        graph.coordinates = Some(coords);
        graph
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    /// Sorted neighbors of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Node positions, for graphs built geometrically.
    pub fn coordinates(&self) -> Option<&[(f64, f64)]> {
        self.coordinates.as_deref()
    }

    fn bfs_depths(&self, source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.n()];
        let mut queue = VecDeque::from([source]);
        depth[source] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = depth[u].unwrap_or(0);
            for &v in &self.neighbors[u] {
                if depth[v].is_none() {
                    depth[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.bfs_depths(0).iter().all(Option::is_some)
    }

    /// Longest shortest path, or `None` if some pair is unreachable.
    pub fn diameter(&self) -> Option<usize> {
        let mut longest = 0;
        for s in 0..self.n() {
            for d in self.bfs_depths(s) {
                longest = longest.max(d?);
            }
        }
        Some(longest)
    }

    /// Writes the edge list as CSV. Coordinates are included when known.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        match &self.coordinates {
            Some(xy) => {
                writeln!(out, "source,target,source_x,source_y,target_x,target_y")?;
                for (a, b) in self.edges() {
                    writeln!(
                        out,
                        "{a},{b},{},{},{},{}",
                        xy[a].0, xy[a].1, xy[b].0, xy[b].1
                    )?;
                }
            }
            None => {
                writeln!(out, "source,target")?;
                for (a, b) in self.edges() {
                    writeln!(out, "{a},{b}")?;
                }
            }
        }
        Ok(())
    }
}
