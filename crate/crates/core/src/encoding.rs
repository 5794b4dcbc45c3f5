//! Digraph encodings: certificates that every label stays within
//! `mean ± (n-1)` for the whole weak-game evolution.
//!
//! A weight `λ(u,v) ∈ [-1, 1] ∩ ℤ/n` on each ordered pair, antisymmetric,
//! encodes the state `w(v) = mean + Σ_u λ(u,v)`. Weights are stored scaled by
//! `n`, so every quantity here is an exact integer.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::engine::{validate_plan, weak_step, ChipState, EngineError, TransferPlan};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("encodings need at least {min} vertices, got {n}")]
    TooFewVertices { n: usize, min: usize },
    #[error("weight matrix has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("weights ({u},{v}) are not antisymmetric")]
    NotAntisymmetric { u: usize, v: usize },
    #[error("scaled weight {value} at ({u},{v}) exceeds the vertex count")]
    OutOfRange { u: usize, v: usize, value: i64 },
    #[error("label at vertex {v} is not an integer")]
    Indivisible { v: usize },
    #[error("encoding does not decode to the given state")]
    DecodeMismatch,
    #[error("no triangle shift available for bad pair ({u},{v})")]
    NoShift { u: usize, v: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Scaled antisymmetric weights `L(u,v) = n·λ(u,v)` and the chip total.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigraphEncoding {
    n: usize,
    total: i64,
    l: Vec<i64>,
}

impl DigraphEncoding {
    /// Validates antisymmetry, the range `|L| <= n`, and integrality of
    /// every encoded label.
    pub fn new(n: usize, total: i64, l: Vec<i64>) -> Result<Self, EncodingError> {
        if n == 0 {
            return Err(EncodingError::TooFewVertices { n, min: 1 });
        }
        if l.len() != n * n {
            return Err(EncodingError::Shape {
                expected: n * n,
                got: l.len(),
            });
        }
        let enc = DigraphEncoding { n, total, l };
        enc.check()?;
        Ok(enc)
    }

    /// The all-zero encoding of a state with `total` chips, if integral.
    pub fn zero(n: usize, total: i64) -> Result<Self, EncodingError> {
        Self::new(n, total, vec![0; n * n])
    }

    fn check(&self) -> Result<(), EncodingError> {
        let n = self.n as i64;
        for u in 0..self.n {
            for v in 0..self.n {
                let x = self.get(u, v);
                if x != -self.get(v, u) {
                    return Err(EncodingError::NotAntisymmetric { u: u + 1, v: v + 1 });
                }
                if x.abs() > n {
                    return Err(EncodingError::OutOfRange {
                        u: u + 1,
                        v: v + 1,
                        value: x,
                    });
                }
            }
        }
        for v in 0..self.n {
            if (self.total + self.inflow(v)).rem_euclid(n) != 0 {
                return Err(EncodingError::Indivisible { v: v + 1 });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> i64 {
        self.total
    }

    /// Scaled weight `n·λ(u,v)`.
    pub fn get(&self, u: usize, v: usize) -> i64 {
        self.l[u * self.n + v]
    }

    fn add(&mut self, u: usize, v: usize, delta: i64) {
        self.l[u * self.n + v] += delta;
        self.l[v * self.n + u] -= delta;
    }

    fn inflow(&self, v: usize) -> i64 {
        (0..self.n).map(|u| self.get(u, v)).sum()
    }

    /// `Σ_{u<v} |L(u,v)|`.
    pub fn abs_sum(&self) -> i64 {
        let mut s = 0;
        for u in 0..self.n {
            for v in u + 1..self.n {
                s += self.get(u, v).abs();
            }
        }
        s
    }

    /// Nonzero weights `(u, v, L)` with `u < v`.
    pub fn nonzero_weights(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        (0..self.n).flat_map(move |u| {
            (u + 1..self.n)
                .map(move |v| (u, v, self.get(u, v)))
                .filter(|&(_, _, x)| x != 0)
        })
    }
}

pub fn decode(enc: &DigraphEncoding) -> ChipState {
    let n = enc.n as i64;
    ChipState(
        (0..enc.n)
            .map(|v| (enc.total + enc.inflow(v)).div_euclid(n))
            .collect(),
    )
}

fn require_decodes_to(enc: &DigraphEncoding, w: &ChipState) -> Result<(), EncodingError> {
    if decode(enc) != *w {
        return Err(EncodingError::DecodeMismatch);
    }
    Ok(())
}

/// Encoding of `(n-1, n-2, …, n-2)`: one unit of scaled weight from every
/// other vertex into vertex 0.
pub fn initial_encoding(n: usize) -> Result<DigraphEncoding, EncodingError> {
    if n < 2 {
        return Err(EncodingError::TooFewVertices { n, min: 2 });
    }
    let ni = n as i64;
    let mut enc = DigraphEncoding {
        n,
        total: ni * (ni - 2) + 1,
        l: vec![0; n * n],
    };
    for u in 1..n {
        enc.add(u, 0, 1);
    }
    Ok(enc)
}

/// Finds some encoding of `w`, or `None` when no weights within `|L| <= n`
/// realise it.
///
/// Scaled deviations `n·w(v) - total` must be the net weight into each
/// vertex; that is a flow problem on the complete digraph with capacity `n`
/// per arc, solved exactly with breadth-first augmenting paths.
pub fn try_encode(w: &ChipState) -> Option<DigraphEncoding> {
    let n = w.len();
    if n == 0 {
        return None;
    }
    let ni = n as i64;
    let total = w.total();
    let dev: Vec<i64> = w.iter().map(|&x| ni * x - total).collect();

    let source = n;
    let sink = n + 1;
    let size = n + 2;
    let mut cap = vec![0i64; size * size];
    for u in 0..n {
        for v in 0..n {
            if u != v {
                cap[u * size + v] = ni;
            }
        }
        if dev[u] < 0 {
            cap[source * size + u] = -dev[u];
        } else {
            cap[u * size + sink] = dev[u];
        }
    }
    let demand: i64 = dev.iter().filter(|&&d| d > 0).sum();
    let mut flow = vec![0i64; size * size];
    let mut pushed = 0;
    loop {
        let mut prev = vec![usize::MAX; size];
        prev[source] = source;
        let mut queue = VecDeque::from([source]);
        while let Some(x) = queue.pop_front() {
            if x == sink {
                break;
            }
            for y in 0..size {
                if prev[y] == usize::MAX && cap[x * size + y] - flow[x * size + y] > 0 {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut bottleneck = i64::MAX;
        let mut y = sink;
        while y != source {
            let x = prev[y];
            bottleneck = bottleneck.min(cap[x * size + y] - flow[x * size + y]);
            y = x;
        }
        let mut y = sink;
        while y != source {
            let x = prev[y];
            flow[x * size + y] += bottleneck;
            flow[y * size + x] -= bottleneck;
            y = x;
        }
        pushed += bottleneck;
    }
    if pushed != demand {
        return None;
    }
    let mut l = vec![0; n * n];
    for u in 0..n {
        for v in 0..n {
            // flow is kept antisymmetric, so this is the net weight u -> v
            l[u * n + v] = flow[u * size + v];
        }
    }
    let enc = DigraphEncoding { n, total, l };
    debug_assert!(enc.check().is_ok());
    Some(enc)
}

/// Good means `L(u,v) <= 0` whenever `w(u) >= w(v)`.
pub fn is_good(enc: &DigraphEncoding, w: &ChipState) -> Result<bool, EncodingError> {
    require_decodes_to(enc, w)?;
    Ok(first_bad_pair(enc, w).is_none())
}

fn first_bad_pair(enc: &DigraphEncoding, w: &[i64]) -> Option<(usize, usize)> {
    (0..enc.n)
        .flat_map(|u| (0..enc.n).map(move |v| (u, v)))
        .find(|&(u, v)| u != v && w[u] >= w[v] && enc.get(u, v) > 0)
}

/// Output of [`make_good_counted`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repair {
    pub encoding: DigraphEncoding,
    pub shifts: usize,
    pub abs_sum_before: i64,
}

/// Repairs an encoding into a good one by triangle shifts.
pub fn make_good(enc: &DigraphEncoding, w: &ChipState) -> Result<DigraphEncoding, EncodingError> {
    make_good_counted(enc, w).map(|r| r.encoding)
}

/// While some pair `(u,v)` is bad, picks `x` with `L(x,u) > L(x,v)` and
/// lowers the cycle `u -> v -> x -> u` by one scaled unit. Each shift keeps
/// every label, keeps all weights in range, and lowers the absolute sum by
/// at least one, so at most `abs_sum` shifts happen. Pairs and `x` are
/// chosen lexicographically smallest.
pub fn make_good_counted(enc: &DigraphEncoding, w: &ChipState) -> Result<Repair, EncodingError> {
    require_decodes_to(enc, w)?;
    let abs_sum_before = enc.abs_sum();
    let mut out = enc.clone();
    let mut shifts = 0;
    while let Some((u, v)) = first_bad_pair(&out, w) {
        let x = (0..out.n)
            .find(|&x| x != u && x != v && out.get(x, u) - out.get(x, v) > 0)
            .ok_or(EncodingError::NoShift { u: u + 1, v: v + 1 })?;
        out.add(u, v, -1);
        out.add(v, x, -1);
        out.add(x, u, -1);
        shifts += 1;
        debug_assert!(out.abs_sum() <= abs_sum_before - shifts as i64);
    }
    Ok(Repair {
        encoding: out,
        shifts,
        abs_sum_before,
    })
}

/// Adds `n·d(u,v)` to every weight, giving an encoding of the next state.
/// Requires a good encoding; a weight leaving `[-n, n]` is reported as
/// [`EncodingError::OutOfRange`].
pub fn advance(
    enc: &DigraphEncoding,
    w: &ChipState,
    plan: &TransferPlan,
) -> Result<DigraphEncoding, EncodingError> {
    require_decodes_to(enc, w)?;
    validate_plan(w, plan)?;
    let ni = enc.n as i64;
    let mut out = enc.clone();
    for u in 0..enc.n {
        for v in 0..enc.n {
            let x = enc.get(u, v) + ni * i64::from(plan.get(u, v));
            if x.abs() > ni {
                return Err(EncodingError::OutOfRange {
                    u: u + 1,
                    v: v + 1,
                    value: x,
                });
            }
            out.l[u * enc.n + v] = x;
        }
    }
    Ok(out)
}

/// Label range `[ceil(mean - (n-1)), floor(mean + (n-1))]` implied by the
/// existence of any encoding with this total.
pub fn derived_bounds(enc: &DigraphEncoding) -> (i64, i64) {
    let n = enc.n as i64;
    let spread = n * (n - 1);
    let lo = -(-(enc.total - spread)).div_euclid(n);
    let hi = (enc.total + spread).div_euclid(n);
    (lo, hi)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error("plan {step} is invalid: {source}")]
    InvalidPlan { step: usize, source: EngineError },
    #[error("label {label} at vertex {vertex} at t={time} is negative")]
    NegativeLabel {
        time: usize,
        vertex: usize,
        label: i64,
    },
    #[error("at t={time}: {source}")]
    Encoding { time: usize, source: EncodingError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateStep {
    pub time: usize,
    pub labels: ChipState,
    /// Good encoding of `labels`.
    pub encoding: DigraphEncoding,
    pub lower_bound: i64,
    /// Triangle shifts spent making the encoding good.
    pub shifts: usize,
    pub abs_sum_before: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub n: usize,
    pub steps: Vec<CertificateStep>,
}

/// Per step `t=<k> lo=<lo> labels=<csv>`, then one `u v L` line per nonzero
/// scaled weight with `u < v`.
impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "t={} lo={} labels={}", s.time, s.lower_bound, s.labels)?;
            for (u, v, x) in s.encoding.nonzero_weights() {
                writeln!(f, "{} {} {}", u + 1, v + 1, x)?;
            }
        }
        Ok(())
    }
}

/// Plays `plans` from `(n-1, n-2, …, n-2)`, carrying a good encoding along
/// and checking every label against its lower bound of zero.
pub fn certify_nonnegativity(
    n: usize,
    plans: &[TransferPlan],
) -> Result<Certificate, CertifyError> {
    let mut enc =
        initial_encoding(n).map_err(|source| CertifyError::Encoding { time: 0, source })?;
    let mut w = decode(&enc);
    let mut steps = Vec::with_capacity(plans.len() + 1);
    for t in 0..=plans.len() {
        let wrap = |source| CertifyError::Encoding { time: t, source };
        let repair = make_good_counted(&enc, &w).map_err(wrap)?;
        let (lo, _) = derived_bounds(&repair.encoding);
        if let Some(v) = w.iter().position(|&x| x < lo.max(0)) {
            return Err(CertifyError::NegativeLabel {
                time: t,
                vertex: v + 1,
                label: w[v],
            });
        }
        steps.push(CertificateStep {
            time: t,
            labels: w.clone(),
            encoding: repair.encoding.clone(),
            lower_bound: lo,
            shifts: repair.shifts,
            abs_sum_before: repair.abs_sum_before,
        });
        let Some(plan) = plans.get(t) else { break };
        let next = weak_step(&w, plan).map_err(|source| CertifyError::InvalidPlan {
            step: t + 1,
            source,
        })?;
        enc = advance(&repair.encoding, &w, plan).map_err(wrap)?;
        w = next;
    }
    Ok(Certificate { n, steps })
}
