//! Directed graph topologies: the Tower of Hanoi state graph, random
//! connected graphs and the gating matrix derived from a topology.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
    out: Vec<Vec<usize>>,
}

impl Graph {
    /// Edges are sorted lexicographically by (source, destination), which
    /// fixes the column order of every matrix indexed by edge.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let set: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        let edges: Vec<_> = set.into_iter().collect();
        for &(s, t) in &edges {
            if s >= n || t >= n {
                return Err(Error::InvalidGraph(format!("edge {s}->{t} outside 0..{n}")));
            }
            if s == t {
                return Err(Error::InvalidGraph(format!("self-loop at {s}")));
            }
        }
        let mut g = Graph { n, edges, labels: None, out: Vec::new() };
        g.index_out_edges();
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!("{} labels for {} nodes", labels.len(), self.n)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    fn index_out_edges(&mut self) {
        self.out = vec![Vec::new(); self.n];
        for (c, &(s, _)) in self.edges.iter().enumerate() {
            self.out[s].push(c);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn e(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, c: usize) -> (usize, usize) {
        self.edges[c]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    /// Indices of edges leaving `node`, in ascending order.
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.edges.binary_search(&(s, t)).is_ok()
    }

    /// Hop distances from `src`; unreachable nodes are `None`.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(v) = q.pop_front() {
            let dv = dist[v].unwrap();
            for &c in &self.out[v] {
                let w = self.edges[c].1;
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    q.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        if self.bfs(0).iter().any(Option::is_none) {
            return false;
        }
        let rev = Graph::new(self.n, self.edges.iter().map(|&(s, t)| (t, s))).expect("reversed graph is valid");
        rev.bfs(0).iter().all(Option::is_some)
    }

    pub fn gating_matrix(&self) -> GatingMatrix {
        let mut m = DMatrix::zeros(self.e(), self.n);
        for (c, &(s, _)) in self.edges.iter().enumerate() {
            m[(c, s)] = 1.0;
        }
        GatingMatrix(m)
    }

    /// Plain-text edge list: node count on the first line, then `src dst`.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("node count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let mut num = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("short line {line:?}")))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("{line:?}: {e}")))
            };
            edges.push((num()?, num()?));
        }
        Graph::new(n, edges)
    }
}

/// Edge-by-node matrix with a 1 where the edge leaves the node.
#[derive(Clone, Debug, PartialEq)]
pub struct GatingMatrix(pub DMatrix<f64>);

impl GatingMatrix {
    pub fn get(&self, edge: usize, node: usize) -> f64 {
        self.0[(edge, node)]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.sum()).collect()
    }
}

/// A Tower of Hanoi board: the peg (1..=3) holding each ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TohState {
    pub large: u8,
    pub medium: u8,
    pub small: u8,
}

impl TohState {
    pub fn new(large: u8, medium: u8, small: u8) -> Self {
        TohState { large, medium, small }
    }

    pub fn all() -> impl Iterator<Item = TohState> {
        (0..27).map(TohState::from_index)
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < 27);
        TohState::new((i / 9 + 1) as u8, (i / 3 % 3 + 1) as u8, (i % 3 + 1) as u8)
    }

    pub fn index(&self) -> usize {
        (self.large as usize - 1) * 9 + (self.medium as usize - 1) * 3 + (self.small as usize - 1)
    }

    /// Pegs ordered large, medium, small.
    pub fn pegs(&self) -> [u8; 3] {
        [self.large, self.medium, self.small]
    }

    pub fn from_pegs(p: [u8; 3]) -> Self {
        TohState::new(p[0], p[1], p[2])
    }

    pub fn parse(s: &str) -> Option<Self> {
        let b = s.as_bytes();
        if b.len() != 3 || !b.iter().all(|c| (b'1'..=b'3').contains(c)) {
            return None;
        }
        Some(TohState::new(b[0] - b'0', b[1] - b'0', b[2] - b'0'))
    }
}

impl fmt::Display for TohState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.large, self.medium, self.small)
    }
}

/// Boards reachable by moving one top ring onto an empty peg or a larger ring.
pub fn legal_toh_moves(s: TohState) -> Vec<TohState> {
    let pegs = s.pegs();
    let mut out = Vec::new();
    for ring in 0..3 {
        let from = pegs[ring];
        // smaller rings have higher indices
        let covered = |p: u8| pegs[ring + 1..].contains(&p);
        if covered(from) {
            continue;
        }
        for to in 1..=3u8 {
            if to != from && !covered(to) {
                let mut next = pegs;
                next[ring] = to;
                out.push(TohState::from_pegs(next));
            }
        }
    }
    out.sort();
    out
}

pub fn toh_graph() -> Graph {
    let edges = TohState::all().flat_map(|s| legal_toh_moves(s).into_iter().map(move |t| (s.index(), t.index())));
    Graph::new(27, edges)
        .and_then(|g| g.with_labels(TohState::all().map(|s| s.to_string()).collect()))
        .expect("the Tower of Hanoi graph is well formed")
}

/// Uniform connected undirected graph with `m` edges, drawn by rejection and
/// returned with both directions of every edge.
pub fn random_connected_graph<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    if n == 0 || m + 1 < n || m > pairs.len() {
        return Err(Error::InfeasibleGraph { n, m });
    }
    loop {
        let chosen: Vec<(usize, usize)> = sample(rng, pairs.len(), m).into_iter().map(|k| pairs[k]).collect();
        let g = Graph::new(n, chosen.iter().flat_map(|&(a, b)| [(a, b), (b, a)]))?;
        if g.bfs(0).iter().all(Option::is_some) {
            return Ok(g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toh_counts() {
        let g = toh_graph();
        assert_eq!((g.n(), g.e()), (27, 78));
        assert_eq!(g.out_edges(TohState::new(1, 1, 1).index()).len(), 2);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn moves_from_start() {
        let m = legal_toh_moves(TohState::new(1, 1, 1));
        assert_eq!(m, vec![TohState::new(1, 1, 2), TohState::new(1, 1, 3)]);
        let m = legal_toh_moves(TohState::new(1, 1, 2));
        assert_eq!(m, vec![TohState::new(1, 1, 1), TohState::new(1, 1, 3), TohState::new(1, 3, 2)]);
    }

    #[test]
    fn edge_list_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_connected_graph(7, 10, &mut rng).unwrap();
        let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert_eq!(g.e(), 20);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Graph::new(2, [(0, 0)]).is_err());
        assert!(Graph::new(2, [(0, 2)]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(random_connected_graph(7, 5, &mut rng).is_err());
        assert!(random_connected_graph(7, 22, &mut rng).is_err());
        assert!(Graph::from_edge_list("3\n0 x\n").is_err());
    }

    #[test]
    fn two_node_gating() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = random_connected_graph(2, 1, &mut rng).unwrap();
        let gm = g.gating_matrix();
        assert_eq!(gm.0, DMatrix::identity(2, 2));
    }
}
