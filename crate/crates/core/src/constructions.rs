//! Explicit starting positions that drive some label negative, each with
//! the time and vertex where it happens.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{simulate, ChipState, EngineError};
use crate::graph::{make_path, make_regular_tree, make_star, parse_graph, Graph, GraphError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("{what} requires {requirement}")]
    Precondition {
        what: &'static str,
        requirement: &'static str,
    },
    #[error("vertex {vertex} holds {label} at t={time}, expected a negative label")]
    NotNegative {
        time: usize,
        vertex: usize,
        label: i64,
    },
    #[error("vertex {vertex} is already negative at t={time}")]
    EarlyNegative { time: usize, vertex: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A graph and starting labels whose evolution reaches a negative label at
/// `negative_vertex` at time `negative_time`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub graph: Graph,
    pub w0: ChipState,
    pub negative_time: usize,
    pub negative_vertex: usize,
}

impl Witness {
    pub fn min_initial_label(&self) -> i64 {
        self.w0.min_label().unwrap_or(0)
    }

    /// Re-simulates and checks that `negative_vertex` first goes negative
    /// at `negative_time` and, when the start is non-negative, that every
    /// label stays non-negative before then.
    pub fn verify(&self) -> Result<(), WitnessError> {
        let tr = simulate(&self.graph, &self.w0, self.negative_time)?;
        let v = self.negative_vertex;
        let strict = self.min_initial_label() >= 0;
        for (t, s) in tr.states[..self.negative_time].iter().enumerate() {
            let culprit = if strict {
                s.first_negative()
            } else {
                (s[v] < 0).then_some(v)
            };
            if let Some(vertex) = culprit {
                return Err(WitnessError::EarlyNegative {
                    time: t,
                    vertex: vertex + 1,
                });
            }
        }
        let label = tr.last()[v];
        if label >= 0 {
            return Err(WitnessError::NotNegative {
                time: self.negative_time,
                vertex: v + 1,
                label,
            });
        }
        Ok(())
    }
}

/// Graph block, then `labels: <csv>`, then `expect: t=<T> v=<vertex>`.
impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.graph)?;
        writeln!(f, "labels: {}", self.w0)?;
        writeln!(
            f,
            "expect: t={} v={}",
            self.negative_time,
            self.negative_vertex + 1
        )
    }
}

impl FromStr for Witness {
    type Err = WitnessError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let lines: Vec<&str> = text.lines().collect();
        let labels_at = lines
            .iter()
            .position(|l| l.trim_start().starts_with("labels:"))
            .ok_or(WitnessError::Parse {
                line: lines.len(),
                message: "missing labels line".into(),
            })?;
        let graph = parse_graph(&lines[..labels_at].join("\n"))?;
        let parse_err = |line: usize, message: String| WitnessError::Parse {
            line: line + 1,
            message,
        };
        let w0: ChipState = lines[labels_at]
            .trim_start()
            .trim_start_matches("labels:")
            .parse()
            .map_err(|e: EngineError| parse_err(labels_at, e.to_string()))?;
        if w0.len() != graph.n() {
            return Err(parse_err(
                labels_at,
                "label count does not match the graph".into(),
            ));
        }
        let expect_at = labels_at + 1;
        let expect = lines
            .get(expect_at)
            .and_then(|l| l.trim().strip_prefix("expect:"))
            .ok_or_else(|| parse_err(expect_at, "missing expect line".into()))?;
        let mut time = None;
        let mut vertex = None;
        for field in expect.split_whitespace() {
            if let Some(x) = field.strip_prefix("t=") {
                time = x.parse::<usize>().ok();
            } else if let Some(x) = field.strip_prefix("v=") {
                vertex = x
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| (1..=graph.n()).contains(&v));
            }
        }
        let (Some(negative_time), Some(v)) = (time, vertex) else {
            return Err(parse_err(expect_at, format!("bad expect line {expect:?}")));
        };
        Ok(Witness {
            graph,
            w0,
            negative_time,
            negative_vertex: v - 1,
        })
    }
}

/// Star with `n-2` chips at the centre and `n-3` on each leaf; the centre
/// ends the first step at `-1`.
pub fn star_witness(n: usize) -> Result<Witness, WitnessError> {
    if n < 2 {
        return Err(WitnessError::Precondition {
            what: "star witness",
            requirement: "n >= 2",
        });
    }
    let ni = n as i64;
    let mut w0 = vec![ni - 3; n];
    w0[0] = ni - 2;
    Ok(Witness {
        graph: make_star(n)?,
        w0: ChipState(w0),
        negative_time: 1,
        negative_vertex: 0,
    })
}

/// Labels of the 22-vertex subcubic tree in breadth-first order (root,
/// its three children, six grandchildren, twelve leaves). Only 2s and 3s.
const CUBIC_TREE_LABELS: [i64; 22] = [
    2, //
    3, 2, 2, //
    3, 3, 3, 2, 2, 3, //
    2, 2, 2, 2, 3, 3, 2, 2, 2, 2, 3, 3,
];

/// Every label at least 2, max degree 3, and the root reaches `-1` at t=3.
pub fn cubic_tree_witness() -> Witness {
    let tree = make_regular_tree(3, 3).expect("valid tree parameters");
    Witness {
        graph: tree.graph,
        w0: ChipState(CUBIC_TREE_LABELS.to_vec()),
        negative_time: 3,
        negative_vertex: 0,
    }
}

/// Depth-layered labels on the radius-`t` ball of the `d`-regular tree:
/// root `td-1`, depth `i >= 1` gets `td-2t-(i-1)`. The root reaches `-1`
/// at time `t` while the smallest starting label is `td-3t+1`.
pub fn layered_witness(d: usize, t: usize) -> Result<Witness, WitnessError> {
    if d < 4 || t < 1 {
        return Err(WitnessError::Precondition {
            what: "layered witness",
            requirement: "d >= 4 and T >= 1",
        });
    }
    let tree = make_regular_tree(d, t)?;
    let labels = layered_labels(d as i64, t as i64);
    let w0 = tree.depth.iter().map(|&i| labels[i]).collect();
    Ok(Witness {
        graph: tree.graph,
        w0: ChipState(w0),
        negative_time: t,
        negative_vertex: 0,
    })
}

/// Starting label at each depth `0..=t` of the layered construction.
pub fn layered_labels(d: i64, t: i64) -> Vec<i64> {
    (0..=t)
        .map(|i| {
            if i == 0 {
                t * d - 1
            } else {
                t * d - 2 * t - (i - 1)
            }
        })
        .collect()
}

/// A single chip in the middle of a three-vertex path; the middle vertex
/// is at `-1` after one step, so a minimum label of 0 is not enough on
/// maximum degree 2.
pub fn path_zero_witness() -> Witness {
    Witness {
        graph: make_path(3).expect("valid path"),
        w0: ChipState(vec![0, 1, 0]),
        negative_time: 1,
        negative_vertex: 1,
    }
}

/// Starting label that keeps every label non-negative on an `n`-vertex
/// multigraph whose pairs carry at most `m` parallel edges: `m(n-1)-1`.
pub fn multigraph_threshold(m: u32, n: usize) -> Result<i64, WitnessError> {
    if m < 1 || n < 2 {
        return Err(WitnessError::Precondition {
            what: "multigraph threshold",
            requirement: "m >= 1 and n >= 2",
        });
    }
    Ok(i64::from(m) * (n as i64 - 1) - 1)
}
