//! Undirected multigraphs and the graph families the game is played on.
//!
//! Vertices are stored zero-based (`0..n`). Every text format in this crate
//! (graph files, witnesses, reports) writes them one-based, so vertex `v` in
//! memory is printed as `v + 1`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("{what} requires {requirement}")]
    Precondition {
        what: &'static str,
        requirement: &'static str,
    },
    #[error("vertex {vertex} out of range 1..={n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// An undirected graph on `n` vertices with per-pair edge multiplicity.
///
/// Stored as sorted adjacency lists `(neighbour, multiplicity)`, so the
/// large truncated trees used by the witness constructions stay linear in
/// size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: Vec<Vec<(usize, u32)>>,
}

impl Graph {
    /// Builds a graph from zero-based edges; repeated edges accumulate
    /// multiplicity.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut builder = GraphBuilder::new(n)?;
        for (u, v) in edges {
            builder.add_edge(u, v)?;
        }
        Ok(builder.build())
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, u32)] {
        &self.adj[v]
    }

    pub fn mult(&self, u: usize, v: usize) -> u32 {
        match self.adj[u].binary_search_by_key(&v, |&(w, _)| w) {
            Ok(i) => self.adj[u][i].1,
            Err(_) => 0,
        }
    }

    /// Degree counting multiplicity.
    pub fn degree(&self, v: usize) -> u32 {
        self.adj[v].iter().map(|&(_, m)| m).sum()
    }

    pub fn max_degree(&self) -> u32 {
        (0..self.n()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn max_multiplicity(&self) -> u32 {
        self.adj
            .iter()
            .flat_map(|row| row.iter().map(|&(_, m)| m))
            .max()
            .unwrap_or(0)
    }

    pub fn is_simple(&self) -> bool {
        self.max_multiplicity() <= 1
    }

    /// Edges `(u, v, mult)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, row)| {
            row.iter()
                .filter(move |&&(v, _)| u < v)
                .map(move |&(v, m)| (u, v, m))
        })
    }

    /// Number of edges counting multiplicity.
    pub fn edge_count(&self) -> u64 {
        self.edges().map(|(_, _, m)| u64::from(m)).sum()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Simple graph whose edge set is the upper-triangle bitmask `mask`
    /// (bit index enumerates pairs `(0,1), (0,2), .., (1,2), ..`).
    pub(crate) fn from_pair_mask(n: usize, mask: u64) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut bit = 0;
        for u in 0..n {
            for v in u + 1..n {
                if mask >> bit & 1 == 1 {
                    adj[u].push((v, 1));
                    adj[v].push((u, 1));
                }
                bit += 1;
            }
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        Graph { adj }
    }
}

/// Incremental construction; the finished [`Graph`] is immutable.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    adj: Vec<Vec<(usize, u32)>>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        Ok(GraphBuilder {
            adj: vec![Vec::new(); n],
        })
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        self.add_edges(u, v, 1)
    }

    /// Adds `count` parallel edges between `u` and `v`.
    pub fn add_edges(&mut self, u: usize, v: usize, count: u32) -> Result<(), GraphError> {
        let n = self.adj.len();
        for x in [u, v] {
            if x >= n {
                return Err(GraphError::VertexOutOfRange { vertex: x + 1, n });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u + 1));
        }
        if count == 0 {
            return Ok(());
        }
        bump(&mut self.adj[u], v, count);
        bump(&mut self.adj[v], u, count);
        Ok(())
    }

    pub fn build(self) -> Graph {
        Graph { adj: self.adj }
    }
}

fn bump(row: &mut Vec<(usize, u32)>, v: usize, count: u32) {
    match row.binary_search_by_key(&v, |&(w, _)| w) {
        Ok(i) => row[i].1 += count,
        Err(i) => row.insert(i, (v, count)),
    }
}

pub fn make_path(n: usize) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::Precondition {
            what: "path",
            requirement: "n >= 1",
        });
    }
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))
}

pub fn make_cycle(n: usize) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::Precondition {
            what: "cycle",
            requirement: "n >= 3",
        });
    }
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
}

/// Star with centre vertex 0 and leaves `1..n`.
pub fn make_star(n: usize) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::Precondition {
            what: "star",
            requirement: "n >= 2",
        });
    }
    Graph::from_edges(n, (1..n).map(|v| (0, v)))
}

/// A finite truncation of the infinite `d`-regular tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularTree {
    pub graph: Graph,
    /// Distance of each vertex from the root (vertex 0).
    pub depth: Vec<usize>,
    pub degree: usize,
    pub radius: usize,
}

impl RegularTree {
    pub fn vertices_at_depth(&self, depth: usize) -> impl Iterator<Item = usize> + '_ {
        self.depth
            .iter()
            .enumerate()
            .filter(move |&(_, &d)| d == depth)
            .map(|(v, _)| v)
    }
}

/// Ball of radius `radius` around a root of the infinite `d`-regular tree.
///
/// Vertices are numbered breadth-first: the root is 0, its children come
/// next, and so on, each parent's children contiguous and in order.
pub fn make_regular_tree(d: usize, radius: usize) -> Result<RegularTree, GraphError> {
    if d == 0 {
        return Err(GraphError::Precondition {
            what: "regular tree",
            requirement: "d >= 1",
        });
    }
    let mut edges = Vec::new();
    let mut depth = vec![0];
    let mut frontier = vec![0usize];
    for level in 1..=radius {
        let mut next = Vec::new();
        for &parent in &frontier {
            let children = if parent == 0 { d } else { d - 1 };
            for _ in 0..children {
                let child = depth.len();
                depth.push(level);
                edges.push((parent, child));
                next.push(child);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let graph = Graph::from_edges(depth.len(), edges)?;
    Ok(RegularTree {
        graph,
        depth,
        degree: d,
        radius,
    })
}

/// Two copies of `g` joined copy-to-copy so that every vertex has degree
/// `max_degree(g)` counting multiplicity. Vertex `v` of the second copy is
/// `v + n`.
pub fn double_cover_regularize(g: &Graph) -> Result<Graph, GraphError> {
    if !g.is_simple() {
        return Err(GraphError::Precondition {
            what: "double cover regularization",
            requirement: "a simple graph",
        });
    }
    let n = g.n();
    let d = g.max_degree();
    let mut b = GraphBuilder::new(2 * n)?;
    for (u, v, m) in g.edges() {
        b.add_edges(u, v, m)?;
        b.add_edges(u + n, v + n, m)?;
    }
    for v in 0..n {
        b.add_edges(v, v + n, d - g.degree(v))?;
    }
    Ok(b.build())
}

/// Graph file text: the vertex count on the first line, then one `u v` line
/// per unit of multiplicity, `u < v`, lexicographic.
pub fn serialize_graph(g: &Graph) -> String {
    let mut out = format!("{}\n", g.n());
    for (u, v, m) in g.edges() {
        for _ in 0..m {
            out.push_str(&format!("{} {}\n", u + 1, v + 1));
        }
    }
    out
}

pub fn parse_graph(text: &str) -> Result<Graph, GraphError> {
    let mut builder: Option<GraphBuilder> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| GraphError::Parse {
            line: line_no,
            message,
        };
        match builder.as_mut() {
            None => {
                let n: usize = line
                    .parse()
                    .map_err(|_| parse_err(format!("expected vertex count, got {line:?}")))?;
                builder = Some(GraphBuilder::new(n).map_err(|e| parse_err(e.to_string()))?);
            }
            Some(b) => {
                let mut fields = line.split_whitespace();
                let (Some(a), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
                    return Err(parse_err(format!("expected \"u v\", got {line:?}")));
                };
                let u: usize = a
                    .parse()
                    .map_err(|_| parse_err(format!("bad vertex {a:?}")))?;
                let v: usize = c
                    .parse()
                    .map_err(|_| parse_err(format!("bad vertex {c:?}")))?;
                if u == 0 || v == 0 {
                    return Err(parse_err("vertices are numbered from 1".into()));
                }
                b.add_edge(u - 1, v - 1)
                    .map_err(|e| parse_err(e.to_string()))?;
            }
        }
    }
    builder.map(GraphBuilder::build).ok_or(GraphError::Parse {
        line: 0,
        message: "missing vertex count".into(),
    })
}

impl FromStr for Graph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_graph(s)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_graph(self))
    }
}
