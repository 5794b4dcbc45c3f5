//! The synchronous diffusion rule, the weak diffusion game, trajectories and
//! period detection.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::graph::Graph;

/// Step limit used when no guard is configured.
pub const DEFAULT_GUARD: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("state has {got} labels but the graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("label arithmetic overflowed at vertex {0}")]
    Overflow(usize),
    #[error("invalid transfer plan: {}", format_violations(.0))]
    InvalidPlan(Vec<PlanViolation>),
    #[error("plan construction from a graph requires a simple graph")]
    NotSimple,
    #[error("no period detected within {guard} steps")]
    TimedOut { guard: usize },
    #[error("bad label list: {0}")]
    Parse(String),
}

fn format_violations(v: &[PlanViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Chip counts per vertex at one instant. Labels may be negative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ChipState(pub Vec<i64>);

impl ChipState {
    pub fn new(labels: Vec<i64>) -> Self {
        ChipState(labels)
    }

    pub fn constant(n: usize, label: i64) -> Self {
        ChipState(vec![label; n])
    }

    pub fn total(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn min_label(&self) -> Option<i64> {
        self.0.iter().copied().min()
    }

    pub fn first_negative(&self) -> Option<usize> {
        self.0.iter().position(|&x| x < 0)
    }

    /// Same state with `count` chips removed from `vertex`.
    pub fn remove_chips(&self, vertex: usize, count: i64) -> Self {
        let mut out = self.clone();
        out.0[vertex] -= count;
        out
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }
}

impl Deref for ChipState {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl DerefMut for ChipState {
    fn deref_mut(&mut self) -> &mut [i64] {
        &mut self.0
    }
}

impl From<Vec<i64>> for ChipState {
    fn from(v: Vec<i64>) -> Self {
        ChipState(v)
    }
}

/// Comma-separated labels in vertex order.
impl fmt::Display for ChipState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl FromStr for ChipState {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(EngineError::Parse("empty label list".into()));
        }
        s.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<i64>()
                    .map_err(|_| EngineError::Parse(format!("bad label {:?}", tok.trim())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ChipState)
    }
}

fn check_len(n: usize, w: &ChipState) -> Result<(), EngineError> {
    if w.len() != n {
        return Err(EngineError::LengthMismatch {
            expected: n,
            got: w.len(),
        });
    }
    Ok(())
}

/// One synchronous step: every edge with unequal endpoints moves one chip
/// (per unit of multiplicity) from the larger label to the smaller.
pub fn step(g: &Graph, w: &ChipState) -> Result<ChipState, EngineError> {
    check_len(g.n(), w)?;
    let mut out = vec![0; w.len()];
    step_into(g, w, &mut out)?;
    Ok(ChipState(out))
}

pub(crate) fn step_into(g: &Graph, w: &[i64], out: &mut [i64]) -> Result<(), EngineError> {
    for (v, slot) in out.iter_mut().enumerate() {
        let wv = w[v];
        let mut delta: i64 = 0;
        for &(u, m) in g.neighbors(v) {
            let s = match w[u].cmp(&wv) {
                Ordering::Greater => 1,
                Ordering::Less => -1,
                Ordering::Equal => 0,
            };
            delta += s * i64::from(m);
        }
        *slot = wv.checked_add(delta).ok_or(EngineError::Overflow(v))?;
    }
    Ok(())
}

/// A recorded evolution; `states[t]` is the state at time `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<ChipState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &ChipState {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    pub fn min_label(&self) -> Option<i64> {
        self.states.iter().filter_map(ChipState::min_label).min()
    }
}

/// One `t=<k> <labels>` line per state.
impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, s) in self.states.iter().enumerate() {
            writeln!(f, "t={t} {s}")?;
        }
        Ok(())
    }
}

pub fn simulate(g: &Graph, w0: &ChipState, steps: usize) -> Result<Trajectory, EngineError> {
    check_len(g.n(), w0)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(w0.clone());
    for _ in 0..steps {
        let next = step(g, states.last().unwrap())?;
        states.push(next);
    }
    Ok(Trajectory { states })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodReport {
    /// First time the evolution is periodic.
    pub preperiod: usize,
    /// 1 for a fixed point, 2 for an alternation.
    pub period: usize,
    /// Minimum label over times `0..=preperiod + period`, which is also the
    /// minimum over the whole evolution.
    pub min_label_seen: i64,
}

/// Result of running an evolution until it goes negative, becomes periodic
/// or exhausts its guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Negative { time: usize, vertex: usize },
    Periodic(PeriodReport),
    TimedOut,
}

/// Rolling window of the last three states; allocation-free after setup.
pub(crate) struct Runner<'g> {
    graph: &'g Graph,
    buf: [Vec<i64>; 3],
    /// Index in `buf` of the state at time `t`.
    head: usize,
    pub t: usize,
    pub min_seen: i64,
}

impl<'g> Runner<'g> {
    pub fn new(graph: &'g Graph, w0: &[i64]) -> Result<Self, EngineError> {
        let n = graph.n();
        if w0.len() != n {
            return Err(EngineError::LengthMismatch {
                expected: n,
                got: w0.len(),
            });
        }
        let mut r = Runner {
            graph,
            buf: [w0.to_vec(), vec![0; n], vec![0; n]],
            head: 0,
            t: 0,
            min_seen: w0.iter().copied().min().unwrap_or(0),
        };
        r.fill(1)?;
        r.fill(2)?;
        Ok(r)
    }

    fn fill(&mut self, offset: usize) -> Result<(), EngineError> {
        let src = (self.head + offset - 1) % 3;
        let dst = (self.head + offset) % 3;
        let [a, b, c] = &mut self.buf;
        let (from, to): (&Vec<i64>, &mut Vec<i64>) = match (src, dst) {
            (0, 1) => (a, b),
            (1, 2) => (b, c),
            (2, 0) => (c, a),
            _ => unreachable!(),
        };
        step_into(self.graph, from, to)
    }

    pub fn state(&self, offset: usize) -> &[i64] {
        &self.buf[(self.head + offset) % 3]
    }

    pub fn advance(&mut self) -> Result<(), EngineError> {
        self.head = (self.head + 1) % 3;
        self.t += 1;
        self.fill(2)?;
        if let Some(m) = self.state(0).iter().copied().min() {
            self.min_seen = self.min_seen.min(m);
        }
        Ok(())
    }

    /// Runs until a negative label, a period, or `guard` is passed. Negative
    /// labels are detected before periodicity, at their first time.
    pub fn run(mut self, guard: usize, stop_on_negative: bool) -> Result<Outcome, EngineError> {
        loop {
            if stop_on_negative {
                if let Some(v) = self.state(0).iter().position(|&x| x < 0) {
                    return Ok(Outcome::Negative {
                        time: self.t,
                        vertex: v,
                    });
                }
            }
            let period = if self.state(0) == self.state(1) {
                Some(1)
            } else if self.state(0) == self.state(2) {
                Some(2)
            } else {
                None
            };
            if let Some(k) = period {
                if stop_on_negative {
                    for o in 1..=k {
                        if let Some(v) = self.state(o).iter().position(|&x| x < 0) {
                            return Ok(Outcome::Negative {
                                time: self.t + o,
                                vertex: v,
                            });
                        }
                    }
                }
                let tail_min = (1..=k)
                    .filter_map(|o| self.state(o).iter().copied().min())
                    .min()
                    .unwrap_or(self.min_seen);
                return Ok(Outcome::Periodic(PeriodReport {
                    preperiod: self.t,
                    period: k,
                    min_label_seen: self.min_seen.min(tail_min),
                }));
            }
            if self.t >= guard {
                return Ok(Outcome::TimedOut);
            }
            self.advance()?;
        }
    }
}

/// Finds the least `T <= guard` with `state(T) = state(T+1)` (period 1) or
/// `state(T) = state(T+2)` (period 2).
pub fn detect_period(g: &Graph, w0: &ChipState, guard: usize) -> Result<PeriodReport, EngineError> {
    match Runner::new(g, w0)?.run(guard, false)? {
        Outcome::Periodic(r) => Ok(r),
        Outcome::TimedOut => Err(EngineError::TimedOut { guard }),
        Outcome::Negative { .. } => unreachable!("negative stop disabled"),
    }
}

/// Runs the deterministic game, stopping at the first negative label.
pub fn run_until_negative(g: &Graph, w0: &ChipState, guard: usize) -> Result<Outcome, EngineError> {
    Runner::new(g, w0)?.run(guard, true)
}

/// One step's transfer choices in the weak game, over all ordered vertex
/// pairs. `get(u, v) = 1` sends a chip from `u` to `v`.
///
/// Stored densely; the weak game is only ever played on small vertex sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransferPlan {
    n: usize,
    d: Vec<i8>,
}

impl TransferPlan {
    pub fn empty(n: usize) -> Self {
        TransferPlan {
            n,
            d: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> i8 {
        self.d[u * self.n + v]
    }

    /// Sets one ordered entry only, leaving `(v, u)` untouched.
    pub fn set_entry(&mut self, u: usize, v: usize, value: i8) {
        self.d[u * self.n + v] = value;
    }

    /// Sets `d(u, v) = value` and `d(v, u) = -value`.
    pub fn set(&mut self, u: usize, v: usize, value: i8) {
        self.set_entry(u, v, value);
        self.set_entry(v, u, -value);
    }

    /// One chip from `from` to `to`.
    pub fn transfer(&mut self, from: usize, to: usize) {
        self.set(from, to, 1);
    }

    /// Positive entries `(from, to)` in lexicographic order.
    pub fn transfers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            (0..self.n)
                .filter(move |&v| self.get(u, v) > 0)
                .map(move |v| (u, v))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.d.iter().all(|&x| x == 0)
    }

    /// Net chips received by `v`.
    pub fn net_inflow(&self, v: usize) -> i64 {
        (0..self.n).map(|u| i64::from(self.get(u, v))).sum()
    }

    /// Relabels vertices: the result has `d'(p[u], p[v]) = d(u, v)`.
    pub fn permuted(&self, p: &[usize]) -> Self {
        let mut out = TransferPlan::empty(self.n);
        for u in 0..self.n {
            for v in 0..self.n {
                out.set_entry(p[u], p[v], self.get(u, v));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `d(u,v) != -d(v,u)` or `d(u,u) != 0`.
    Antisymmetry,
    /// Entry outside `{-1, 0, 1}`.
    Range,
    /// A chip sent from a smaller label to a strictly larger one.
    Uphill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanViolation {
    pub u: usize,
    pub v: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Antisymmetry => "antisymmetry",
            ViolationKind::Range => "value outside {-1,0,1}",
            ViolationKind::Uphill => "sends uphill",
        };
        write!(f, "({},{}): {}", self.u + 1, self.v + 1, what)
    }
}

/// Checks antisymmetry, range, and that no chip moves to a strictly larger
/// label.
pub fn validate_plan(w: &ChipState, plan: &TransferPlan) -> Result<(), EngineError> {
    let n = plan.n();
    if w.len() != n {
        return Err(EngineError::LengthMismatch {
            expected: n,
            got: w.len(),
        });
    }
    let mut violations = Vec::new();
    for u in 0..n {
        for v in 0..n {
            let d = plan.get(u, v);
            if !(-1..=1).contains(&d) {
                violations.push(PlanViolation {
                    u,
                    v,
                    kind: ViolationKind::Range,
                });
            }
            if (u == v && d != 0) || (u < v && d != -plan.get(v, u)) {
                violations.push(PlanViolation {
                    u,
                    v,
                    kind: ViolationKind::Antisymmetry,
                });
            }
            if d > 0 && w[u] < w[v] {
                violations.push(PlanViolation {
                    u,
                    v,
                    kind: ViolationKind::Uphill,
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidPlan(violations))
    }
}

pub fn weak_step(w: &ChipState, plan: &TransferPlan) -> Result<ChipState, EngineError> {
    validate_plan(w, plan)?;
    let mut out = w.clone();
    for (v, slot) in out.iter_mut().enumerate() {
        *slot = slot
            .checked_add(plan.net_inflow(v))
            .ok_or(EngineError::Overflow(v))?;
    }
    Ok(out)
}

/// The plan the deterministic rule makes on a simple graph.
pub fn plan_from_graph(g: &Graph, w: &ChipState) -> Result<TransferPlan, EngineError> {
    check_len(g.n(), w)?;
    if !g.is_simple() {
        return Err(EngineError::NotSimple);
    }
    let mut plan = TransferPlan::empty(g.n());
    for (u, v, _) in g.edges() {
        match w[u].cmp(&w[v]) {
            Ordering::Greater => plan.transfer(u, v),
            Ordering::Less => plan.transfer(v, u),
            Ordering::Equal => {}
        }
    }
    Ok(plan)
}

/// Plan file text: a `step` line opens each plan, followed by one `u v`
/// line (one-based) per chip sent from `u` to `v`. `#` starts a comment.
pub fn parse_plans(n: usize, text: &str) -> Result<Vec<TransferPlan>, EngineError> {
    let mut plans: Vec<TransferPlan> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| EngineError::Parse(format!("line {}: {msg}", i + 1));
        if line == "step" {
            plans.push(TransferPlan::empty(n));
            continue;
        }
        let plan = plans
            .last_mut()
            .ok_or_else(|| err("transfer before the first `step` line".into()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = fields[..] else {
            return Err(err(format!("expected \"u v\", got {line:?}")));
        };
        let parse_vertex = |x: &str| {
            x.parse::<usize>()
                .ok()
                .filter(|v| (1..=n).contains(v))
                .ok_or_else(|| err(format!("bad vertex {x:?}")))
        };
        let (u, v) = (parse_vertex(a)?, parse_vertex(b)?);
        if u == v {
            return Err(err(format!("transfer from vertex {u} to itself")));
        }
        plan.transfer(u - 1, v - 1);
    }
    Ok(plans)
}

pub fn format_plans(plans: &[TransferPlan]) -> String {
    let mut out = String::new();
    for plan in plans {
        out.push_str("step\n");
        for (u, v) in plan.transfers() {
            out.push_str(&format!("{} {}\n", u + 1, v + 1));
        }
    }
    out
}

/// A uniformly random valid weak-game plan for `w`: each pair independently
/// takes any of its allowed values.
pub fn random_weak_plan<R: Rng + ?Sized>(w: &ChipState, rng: &mut R) -> TransferPlan {
    random_plan_over(
        w,
        rng,
        (0..w.len()).flat_map(|u| (u + 1..w.len()).map(move |v| (u, v))),
    )
}

/// As [`random_weak_plan`], restricted to the edges of `g`.
pub fn random_plan_on_graph<R: Rng + ?Sized>(
    g: &Graph,
    w: &ChipState,
    rng: &mut R,
) -> TransferPlan {
    random_plan_over(w, rng, g.edges().map(|(u, v, _)| (u, v)))
}

fn random_plan_over<R, I>(w: &ChipState, rng: &mut R, pairs: I) -> TransferPlan
where
    R: Rng + ?Sized,
    I: Iterator<Item = (usize, usize)>,
{
    let mut plan = TransferPlan::empty(w.len());
    for (u, v) in pairs {
        let value = match w[u].cmp(&w[v]) {
            Ordering::Greater => rng.random_range(0..=1),
            Ordering::Less => -rng.random_range(0..=1),
            Ordering::Equal => rng.random_range(-1..=1),
        };
        plan.set(u, v, value);
    }
    plan
}
