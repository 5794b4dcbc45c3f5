//! Bounded searches for starting labels that drive some vertex negative.
//!
//! Instances are enumerated in a fixed order and evaluated in fixed-size
//! chunks; chunks run in parallel but are merged in order, so a report is
//! identical for any number of workers.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::constructions::{Witness, WitnessError};
use crate::engine::{run_until_negative, ChipState, EngineError, Outcome, DEFAULT_GUARD};
use crate::graph::{make_cycle, make_path, make_regular_tree, Graph, GraphError};

/// Largest vertex count for brute-force enumeration and canonical forms.
pub const MAX_ENUMERATED_VERTICES: usize = 7;

const CHUNK: u64 = 1024;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("graph enumeration supports 1..={max} vertices, got {n}")]
    VerticesOutOfRange { n: usize, max: usize },
    #[error("graph {graph}: {instances} instances exceed the exhaustive budget {budget} and sampling is disabled")]
    BudgetExhausted {
        graph: usize,
        instances: u128,
        budget: u64,
    },
    #[error("search produced a witness that failed re-verification: {0}")]
    WitnessRejected(#[from] WitnessError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

// ---------------------------------------------------------------------------
// canonical forms and enumeration

/// Bit `i` set iff the `i`-th pair of `(0,1), (0,2), …, (n-2,n-1)` is an edge.
fn pair_mask_under(g: &Graph, order: &[usize]) -> u64 {
    let n = order.len();
    let mut code = 0u64;
    let mut bit = 0;
    for i in 0..n {
        for j in i + 1..n {
            if g.mult(order[i], order[j]) > 0 {
                code |= 1 << bit;
            }
            bit += 1;
        }
    }
    code
}

/// Stable colour refinement: start from degrees, split by the multiset of
/// neighbour colours until nothing changes. Colours are ranks of sorted
/// signatures, so they are invariant under relabelling.
fn refined_colours(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut colour: Vec<usize> = (0..n).map(|v| g.degree(v) as usize).collect();
    let mut classes = 0;
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|v| {
                let mut around: Vec<usize> =
                    g.neighbors(v).iter().map(|&(u, _)| colour[u]).collect();
                around.sort_unstable();
                (colour[v], around)
            })
            .collect();
        let mut distinct = sigs.clone();
        distinct.sort();
        distinct.dedup();
        colour = sigs
            .iter()
            .map(|s| distinct.binary_search(s).expect("signature present"))
            .collect();
        if distinct.len() == classes {
            return colour;
        }
        classes = distinct.len();
    }
}

/// Minimum pair mask over all vertex orders that list colour classes in
/// colour order. Two simple graphs on at most
/// [`MAX_ENUMERATED_VERTICES`] vertices are isomorphic iff their codes match.
pub fn canonical_code(g: &Graph) -> u64 {
    let colour = refined_colours(g);
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| (colour[v], v));
    let mut best = u64::MAX;
    permute_classes(g, &colour, &mut order, 0, &mut best);
    best
}

fn permute_classes(
    g: &Graph,
    colour: &[usize],
    order: &mut Vec<usize>,
    start: usize,
    best: &mut u64,
) {
    let n = order.len();
    if start == n {
        *best = (*best).min(pair_mask_under(g, order));
        return;
    }
    let end = (start..n)
        .find(|&i| colour[order[i]] != colour[order[start]])
        .unwrap_or(n);
    heap_permutations(g, colour, order, start, end, end - start, best);
}

/// Heap's algorithm over `order[start..end]`, recursing into the next class
/// for each arrangement.
fn heap_permutations(
    g: &Graph,
    colour: &[usize],
    order: &mut Vec<usize>,
    start: usize,
    end: usize,
    k: usize,
    best: &mut u64,
) {
    if k <= 1 {
        permute_classes(g, colour, order, end, best);
        return;
    }
    for i in 0..k {
        heap_permutations(g, colour, order, start, end, k - 1, best);
        let j = if k.is_multiple_of(2) { i } else { 0 };
        if i + 1 < k {
            order.swap(start + j, start + k - 1);
        }
    }
}

/// Connected simple graphs on `n` vertices, ordered by edge count and then
/// canonical code. With `dedup` one canonical representative per
/// isomorphism class is returned; without it every labelled graph is.
pub fn enumerate_connected_graphs(n: usize, dedup: bool) -> Result<Vec<Graph>, SearchError> {
    if !(1..=MAX_ENUMERATED_VERTICES).contains(&n) {
        return Err(SearchError::VerticesOutOfRange {
            n,
            max: MAX_ENUMERATED_VERTICES,
        });
    }
    let mut keyed: Vec<(u64, u64, Graph)> = if dedup {
        all_graph_codes(n)
            .into_iter()
            .map(|code| Graph::from_pair_mask(n, code))
            .filter(Graph::is_connected)
            .map(|g| (g.edge_count(), canonical_code(&g), g))
            .collect()
    } else {
        let pairs = n * (n - 1) / 2;
        (0..1u64 << pairs)
            .map(|mask| Graph::from_pair_mask(n, mask))
            .filter(Graph::is_connected)
            .map(|g| {
                (
                    g.edge_count(),
                    pair_mask_under(&g, &(0..n).collect::<Vec<_>>()),
                    g,
                )
            })
            .collect()
    };
    keyed.sort_by_key(|&(e, c, _)| (e, c));
    Ok(keyed.into_iter().map(|(_, _, g)| g).collect())
}

/// Canonical codes of every simple graph on `n` vertices, built by adding
/// one vertex at a time to each class on `n - 1` vertices.
fn all_graph_codes(n: usize) -> Vec<u64> {
    let mut codes = vec![0u64];
    for k in 2..=n {
        let mut next = HashSet::new();
        for &code in &codes {
            let base = Graph::from_pair_mask(k - 1, code);
            let old: Vec<(usize, usize)> = base.edges().map(|(u, v, _)| (u, v)).collect();
            for nbrs in 0..1u32 << (k - 1) {
                let mut edges = old.clone();
                edges.extend(
                    (0..k - 1)
                        .filter(|&u| nbrs >> u & 1 == 1)
                        .map(|u| (u, k - 1)),
                );
                let g = Graph::from_edges(k, edges).expect("valid edges");
                next.insert(canonical_code(&g));
            }
        }
        codes = next.into_iter().collect();
        codes.sort_unstable();
    }
    codes
}

// ---------------------------------------------------------------------------
// instance spaces

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    /// Inclusive starting-label window.
    pub label_min: i64,
    pub label_max: i64,
    /// Step guard for each evolution.
    pub horizon: usize,
    /// Largest instance space enumerated exhaustively per graph.
    pub budget: u64,
    /// Instances drawn per graph when its space exceeds `budget`.
    pub samples: u64,
    pub seed: u64,
    /// Keep searching a graph after its first witness.
    pub collect_all: bool,
    /// Worker threads; 0 uses the global pool. Never affects results.
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            label_min: 0,
            label_max: 0,
            horizon: DEFAULT_GUARD,
            budget: 1 << 22,
            samples: 100_000,
            seed: 0x5eed,
            collect_all: false,
            workers: 0,
        }
    }
}

impl SearchConfig {
    pub fn window(label_min: i64, label_max: i64) -> Self {
        SearchConfig {
            label_min,
            label_max,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.label_min > self.label_max {
            return Err(SearchError::Config(format!(
                "empty label window [{}, {}]",
                self.label_min, self.label_max
            )));
        }
        if self.horizon < 1 {
            return Err(SearchError::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }

    fn width(&self) -> u64 {
        (self.label_max - self.label_min + 1) as u64
    }
}

/// How the labels of a graph are varied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelScheme {
    /// Every vertex independently.
    Free,
    /// One label per slot; `slot[v]` says which slot vertex `v` reads (for
    /// example its depth in a tree).
    Shared { slot: Vec<usize>, slots: usize },
}

impl LabelScheme {
    pub fn by_depth(depth: &[usize]) -> Self {
        let slots = depth.iter().max().map_or(0, |&d| d + 1);
        LabelScheme::Shared {
            slot: depth.to_vec(),
            slots,
        }
    }

    fn slots(&self, n: usize) -> usize {
        match self {
            LabelScheme::Free => n,
            LabelScheme::Shared { slots, .. } => *slots,
        }
    }

    fn expand(&self, values: &[i64]) -> Vec<i64> {
        match self {
            LabelScheme::Free => values.to_vec(),
            LabelScheme::Shared { slot, .. } => slot.iter().map(|&s| values[s]).collect(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LabelScheme::Free => "free",
            LabelScheme::Shared { .. } => "layered",
        }
    }
}

/// One graph together with the labellings to try on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchTask {
    pub graph: Graph,
    pub scheme: LabelScheme,
}

impl SearchTask {
    pub fn free(graph: Graph) -> Self {
        SearchTask {
            graph,
            scheme: LabelScheme::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exhaustive,
    Sampled,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exhaustive => "exhaustive",
            Mode::Sampled => "sampled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSummary {
    pub n: usize,
    pub edges: u64,
    pub scheme: &'static str,
    pub mode: Mode,
    /// Size of the full instance space.
    pub space: u128,
    pub examined: u64,
    pub timed_out: u64,
    pub witnesses: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchReport {
    pub campaign: String,
    pub scope: String,
    pub config: SearchConfig,
    pub tasks: Vec<TaskSummary>,
    /// `(task index, witness)` in search order.
    pub witnesses: Vec<(usize, Witness)>,
    pub instances_examined: u64,
    pub timed_out: u64,
    /// Every examined instance either produced a witness or reached a
    /// period with no negative label.
    pub conclusive: bool,
}

impl SearchReport {
    pub fn found_witness(&self) -> bool {
        !self.witnesses.is_empty()
    }

    pub fn all_exhaustive(&self) -> bool {
        self.tasks.iter().all(|t| t.mode == Mode::Exhaustive)
    }
}

impl fmt::Display for SearchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(f, "campaign: {}", self.campaign)?;
        writeln!(f, "scope: {}", self.scope)?;
        writeln!(f, "window: [{}, {}]", c.label_min, c.label_max)?;
        writeln!(f, "horizon: {}", c.horizon)?;
        writeln!(f, "budget: {}", c.budget)?;
        writeln!(f, "samples: {}", c.samples)?;
        writeln!(f, "seed: {}", c.seed)?;
        writeln!(f, "collect_all: {}", c.collect_all)?;
        for (i, t) in self.tasks.iter().enumerate() {
            writeln!(
                f,
                "graph {}: n={} edges={} labels={} mode={} space={} examined={} timed_out={} witnesses={}",
                i + 1,
                t.n,
                t.edges,
                t.scheme,
                t.mode,
                t.space,
                t.examined,
                t.timed_out,
                t.witnesses
            )?;
        }
        writeln!(f, "instances_examined: {}", self.instances_examined)?;
        writeln!(f, "timed_out: {}", self.timed_out)?;
        writeln!(f, "conclusive: {}", self.conclusive)?;
        writeln!(f, "witness_count: {}", self.witnesses.len())?;
        for (i, (task, w)) in self.witnesses.iter().enumerate() {
            writeln!(f, "witness {} (graph {}):", i + 1, task + 1)?;
            write!(f, "{w}")?;
            writeln!(f, "end")?;
        }
        Ok(())
    }
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finaliser
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

struct Space<'a> {
    task: &'a SearchTask,
    task_index: usize,
    config: &'a SearchConfig,
    slots: usize,
    mode: Mode,
}

impl Space<'_> {
    /// Slot values of instance `i`: the `i`-th tuple in lexicographic order
    /// (slot 0 most significant) or an independent seeded draw.
    fn values(&self, i: u64) -> Vec<i64> {
        let width = self.config.width();
        match self.mode {
            Mode::Exhaustive => {
                let mut out = vec![0; self.slots];
                let mut rest = i;
                for slot in out.iter_mut().rev() {
                    *slot = self.config.label_min + (rest % width) as i64;
                    rest /= width;
                }
                out
            }
            Mode::Sampled => {
                let seed = mix(self.config.seed
                    ^ mix(self.task_index as u64)
                    ^ mix(i.wrapping_add(1) << 1));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.slots)
                    .map(|_| rng.random_range(self.config.label_min..=self.config.label_max))
                    .collect()
            }
        }
    }
}

#[derive(Default)]
struct ChunkResult {
    examined: u64,
    timed_out: u64,
    witnesses: Vec<Witness>,
}

fn run_chunk(space: &Space<'_>, range: std::ops::Range<u64>) -> Result<ChunkResult, SearchError> {
    let mut out = ChunkResult::default();
    let g = &space.task.graph;
    for i in range {
        let w0 = ChipState(space.task.scheme.expand(&space.values(i)));
        out.examined += 1;
        match run_until_negative(g, &w0, space.config.horizon)? {
            Outcome::Negative { time, vertex } => {
                out.witnesses.push(Witness {
                    graph: g.clone(),
                    w0,
                    negative_time: time,
                    negative_vertex: vertex,
                });
                if !space.config.collect_all {
                    break;
                }
            }
            Outcome::Periodic(_) => {}
            Outcome::TimedOut => out.timed_out += 1,
        }
    }
    Ok(out)
}

fn search_task(
    task: &SearchTask,
    task_index: usize,
    config: &SearchConfig,
) -> Result<(TaskSummary, Vec<Witness>), SearchError> {
    let n = task.graph.n();
    let slots = task.scheme.slots(n);
    let space_size = (config.width() as u128)
        .checked_pow(slots as u32)
        .unwrap_or(u128::MAX);
    let (mode, count) = if space_size <= u128::from(config.budget) {
        (Mode::Exhaustive, space_size as u64)
    } else if config.samples > 0 {
        (Mode::Sampled, config.samples)
    } else {
        return Err(SearchError::BudgetExhausted {
            graph: task_index + 1,
            instances: space_size,
            budget: config.budget,
        });
    };
    let space = Space {
        task,
        task_index,
        config,
        slots,
        mode,
    };
    let chunks = count.div_ceil(CHUNK);
    let wave = (rayon::current_num_threads() as u64 * 4).max(1);
    let mut summary = TaskSummary {
        n,
        edges: task.graph.edge_count(),
        scheme: task.scheme.name(),
        mode,
        space: space_size,
        examined: 0,
        timed_out: 0,
        witnesses: 0,
    };
    let mut witnesses = Vec::new();
    let mut next = 0;
    'waves: while next < chunks {
        let upto = (next + wave).min(chunks);
        let results: Vec<ChunkResult> = (next..upto)
            .into_par_iter()
            .map(|c| run_chunk(&space, c * CHUNK..((c + 1) * CHUNK).min(count)))
            .collect::<Result<_, _>>()?;
        for r in results {
            summary.examined += r.examined;
            summary.timed_out += r.timed_out;
            let hit = !r.witnesses.is_empty();
            witnesses.extend(r.witnesses);
            if hit && !config.collect_all {
                break 'waves;
            }
        }
        next = upto;
    }
    for w in &witnesses {
        w.verify()?;
    }
    summary.witnesses = witnesses.len();
    Ok((summary, witnesses))
}

/// Runs every task in order. Labellings come from the configured window;
/// spaces within budget are enumerated lexicographically, larger ones are
/// sampled with seeded, per-instance randomness.
pub fn search_tasks(
    campaign: &str,
    scope: &str,
    tasks: &[SearchTask],
    config: &SearchConfig,
) -> Result<SearchReport, SearchError> {
    config.validate()?;
    let body = || -> Result<SearchReport, SearchError> {
        let mut report = SearchReport {
            campaign: campaign.to_string(),
            scope: scope.to_string(),
            config: config.clone(),
            tasks: Vec::with_capacity(tasks.len()),
            witnesses: Vec::new(),
            instances_examined: 0,
            timed_out: 0,
            conclusive: true,
        };
        for (i, task) in tasks.iter().enumerate() {
            let (summary, found) = search_task(task, i, config)?;
            report.instances_examined += summary.examined;
            report.timed_out += summary.timed_out;
            report.witnesses.extend(found.into_iter().map(|w| (i, w)));
            report.tasks.push(summary);
        }
        report.conclusive = report.timed_out == 0;
        Ok(report)
    };
    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| SearchError::Config(e.to_string()))?;
        pool.install(body)
    } else {
        body()
    }
}

/// Free labellings of each graph in the window.
pub fn find_negativity_witness(
    graphs: &[Graph],
    config: &SearchConfig,
) -> Result<SearchReport, SearchError> {
    let tasks: Vec<SearchTask> = graphs.iter().cloned().map(SearchTask::free).collect();
    search_tasks(
        "custom",
        &format!("{} given graphs", graphs.len()),
        &tasks,
        config,
    )
}

/// All connected graphs on `n` vertices (one per isomorphism class).
pub fn tightness_campaign(n: usize, config: &SearchConfig) -> Result<SearchReport, SearchError> {
    let graphs = enumerate_connected_graphs(n, true)?;
    let tasks: Vec<SearchTask> = graphs.into_iter().map(SearchTask::free).collect();
    let scope = format!("connected simple graphs on {n} vertices, one per isomorphism class");
    search_tasks("tightness", &scope, &tasks, config)
}

/// Paths on `1..=max_n` vertices and cycles on `3..=max_n`.
pub fn paths_and_cycles(max_n: usize) -> Vec<Graph> {
    let mut out: Vec<Graph> = (1..=max_n).filter_map(|n| make_path(n).ok()).collect();
    out.extend((3..=max_n).filter_map(|n| make_cycle(n).ok()));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct G3Campaign {
    pub start_label: i64,
    /// Window width; labels run over `start_label..=start_label + window`.
    pub window: i64,
    /// Cubic trees of radius `1..=max_radius`.
    pub max_radius: usize,
    /// Connected subcubic graphs on `2..=max_vertices` vertices.
    pub max_vertices: usize,
}

impl Default for G3Campaign {
    fn default() -> Self {
        G3Campaign {
            start_label: 3,
            window: 1,
            max_radius: 2,
            max_vertices: 6,
        }
    }
}

/// Maximum-degree-3 instances with labels starting at `start_label`: cubic
/// tree balls under free and depth-layered labels, then every connected
/// subcubic graph up to `max_vertices`. Absence of witnesses is evidence
/// within this scope only.
pub fn g3_campaign(
    params: &G3Campaign,
    config: &SearchConfig,
) -> Result<SearchReport, SearchError> {
    if params.window < 0 {
        return Err(SearchError::Config("window must be non-negative".into()));
    }
    if params.max_vertices > MAX_ENUMERATED_VERTICES {
        return Err(SearchError::VerticesOutOfRange {
            n: params.max_vertices,
            max: MAX_ENUMERATED_VERTICES,
        });
    }
    let mut tasks = Vec::new();
    for r in 1..=params.max_radius {
        let tree = make_regular_tree(3, r)?;
        tasks.push(SearchTask {
            graph: tree.graph.clone(),
            scheme: LabelScheme::by_depth(&tree.depth),
        });
        tasks.push(SearchTask::free(tree.graph));
    }
    for n in 2..=params.max_vertices {
        for g in enumerate_connected_graphs(n, true)? {
            if g.max_degree() <= 3 {
                tasks.push(SearchTask::free(g));
            }
        }
    }
    let config = SearchConfig {
        label_min: params.start_label,
        label_max: params.start_label + params.window,
        ..config.clone()
    };
    let scope = format!(
        "max degree 3: cubic tree balls of radius 1..={} (layered and free labels) and connected subcubic graphs on 2..={} vertices; trees and small graphs only",
        params.max_radius, params.max_vertices
    );
    search_tasks("g3", &scope, &tasks, &config)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GdkScan {
    pub degree: usize,
    pub window: i64,
    pub start_label: i64,
    /// Tree balls of radius `1..=max_radius`.
    pub max_radius: usize,
}

/// `d`-regular tree balls with labels in `start_label..=start_label +
/// window`, depth-layered labellings first, then free labellings.
pub fn gdk_scan(params: &GdkScan, config: &SearchConfig) -> Result<SearchReport, SearchError> {
    if params.degree < 2 {
        return Err(SearchError::Config("degree must be at least 2".into()));
    }
    if params.window < 0 {
        return Err(SearchError::Config("window must be non-negative".into()));
    }
    let mut tasks = Vec::new();
    for r in 1..=params.max_radius {
        let tree = make_regular_tree(params.degree, r)?;
        tasks.push(SearchTask {
            graph: tree.graph.clone(),
            scheme: LabelScheme::by_depth(&tree.depth),
        });
    }
    for r in 1..=params.max_radius {
        tasks.push(SearchTask::free(make_regular_tree(params.degree, r)?.graph));
    }
    let config = SearchConfig {
        label_min: params.start_label,
        label_max: params.start_label + params.window,
        ..config.clone()
    };
    let scope = format!(
        "{}-regular tree balls of radius 1..={} (layered and free labels)",
        params.degree, params.max_radius
    );
    search_tasks("gdk", &scope, &tasks, &config)
}
