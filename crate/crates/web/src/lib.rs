//! Browser bindings. Every export returns a JSON string; failures come back
//! as `{"error": "..."}` so the page has a single code path.

use std::collections::VecDeque;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use diffusion_game::constructions::{
    cubic_tree_witness, layered_witness, path_zero_witness, star_witness,
};
use diffusion_game::encoding::{certify_nonnegativity, decode, initial_encoding};
use diffusion_game::engine::{
    detect_period, random_weak_plan, simulate, weak_step, ChipState, DEFAULT_GUARD,
};
use diffusion_game::graph::{parse_graph, Graph};

/// Largest graph the page is allowed to request.
const MAX_VERTICES: usize = 30_000;
const MAX_STEPS: usize = 500;

#[derive(Serialize)]
struct Run {
    n: usize,
    edges: Vec<(usize, usize, u32)>,
    /// BFS distance from vertex 0, used for the radial layout.
    depth: Vec<usize>,
    states: Vec<Vec<i64>>,
    /// Preperiod and period when the run settles within the guard.
    period: Option<(usize, usize)>,
    /// First time and vertex with a negative label, if any.
    negative: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct CertRow {
    labels: Vec<i64>,
    lower_bound: i64,
    shifts: usize,
    abs_sum: i64,
}

#[derive(Serialize)]
struct Error {
    error: String,
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v),
        Err(error) => serde_json::to_string(&Error { error }),
    }
    .expect("plain data serializes")
}

fn bfs_depth(g: &Graph) -> Vec<usize> {
    let mut depth = vec![usize::MAX; g.n()];
    let mut queue = VecDeque::new();
    for s in 0..g.n() {
        if depth[s] != usize::MAX {
            continue;
        }
        depth[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in g.neighbors(v) {
                if depth[u] == usize::MAX {
                    depth[u] = depth[v] + 1;
                    queue.push_back(u);
                }
            }
        }
    }
    depth
}

fn run(g: &Graph, w0: &ChipState, steps: usize) -> Result<Run, String> {
    if g.n() > MAX_VERTICES {
        return Err(format!("at most {MAX_VERTICES} vertices"));
    }
    let tr = simulate(g, w0, steps.min(MAX_STEPS)).map_err(|e| e.to_string())?;
    let negative = tr
        .states
        .iter()
        .enumerate()
        .find_map(|(t, s)| s.first_negative().map(|v| (t, v)));
    let period = detect_period(g, w0, DEFAULT_GUARD)
        .ok()
        .map(|r| (r.preperiod, r.period));
    Ok(Run {
        n: g.n(),
        edges: g.edges().collect(),
        depth: bfs_depth(g),
        states: tr.states.into_iter().map(ChipState::into_inner).collect(),
        period,
        negative,
    })
}

fn simulate_graph_impl(graph: &str, labels: &str, steps: usize) -> Result<Run, String> {
    let g = parse_graph(graph).map_err(|e| e.to_string())?;
    let w0: ChipState = labels
        .parse()
        .map_err(|e: diffusion_game::engine::EngineError| e.to_string())?;
    if w0.len() != g.n() {
        return Err(format!("{} labels for {} vertices", w0.len(), g.n()));
    }
    run(&g, &w0, steps)
}

fn construction_impl(family: &str, a: usize, b: usize) -> Result<Run, String> {
    let w = match family {
        "star" => star_witness(a),
        "cubic-tree" => Ok(cubic_tree_witness()),
        "layered" => layered_witness(a, b),
        "path-zero" => Ok(path_zero_witness()),
        other => return Err(format!("unknown family {other}")),
    }
    .map_err(|e| e.to_string())?;
    run(&w.graph, &w.w0, w.negative_time)
}

fn certify_random_impl(n: usize, steps: usize, seed: u64) -> Result<Vec<CertRow>, String> {
    if !(2..=64).contains(&n) {
        return Err("n must be between 2 and 64".into());
    }
    let steps = steps.min(MAX_STEPS);
    let start = initial_encoding(n).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = decode(&start);
    let mut plans = Vec::with_capacity(steps);
    for _ in 0..steps {
        let p = random_weak_plan(&w, &mut rng);
        w = weak_step(&w, &p).map_err(|e| e.to_string())?;
        plans.push(p);
    }
    let cert = certify_nonnegativity(n, &plans).map_err(|e| e.to_string())?;
    Ok(cert
        .steps
        .into_iter()
        .map(|s| CertRow {
            labels: s.labels.into_inner(),
            lower_bound: s.lower_bound,
            shifts: s.shifts,
            abs_sum: s.encoding.abs_sum(),
        })
        .collect())
}

/// Runs the game on a graph in text form (vertex count, then `u v` lines)
/// from comma-separated labels.
#[wasm_bindgen]
pub fn simulate_graph(graph: &str, labels: &str, steps: usize) -> String {
    to_json(simulate_graph_impl(graph, labels, steps))
}

/// One of `star` (a = n), `cubic-tree`, `layered` (a = d, b = T) or
/// `path-zero`, simulated up to the step where a label goes negative.
#[wasm_bindgen]
pub fn construction(family: &str, a: usize, b: usize) -> String {
    to_json(construction_impl(family, a, b))
}

/// A random weak-game evolution from the standard start, with the lower
/// bound and repair cost carried by the encoding at every step.
#[wasm_bindgen]
pub fn certify_random(n: usize, steps: usize, seed: u32) -> String {
    to_json(certify_random_impl(n, steps, u64::from(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn star_run() {
        let v = parse(&simulate_graph("4\n1 2\n1 3\n1 4\n", "2,1,1,1", 2));
        assert_eq!(v["n"], 4);
        assert_eq!(v["states"][1], serde_json::json!([-1, 2, 2, 2]));
        assert_eq!(v["negative"], serde_json::json!([1, 0]));
        assert_eq!(v["depth"], serde_json::json!([0, 1, 1, 1]));
    }

    #[test]
    fn input_errors_become_json() {
        assert!(parse(&simulate_graph("2\n1 3\n", "0,0", 1))["error"].is_string());
        assert!(parse(&simulate_graph("2\n1 2\n", "0", 1))["error"].is_string());
        assert!(parse(&construction("hexagon", 0, 0))["error"].is_string());
        assert!(parse(&construction("layered", 3, 1))["error"].is_string());
        assert!(parse(&certify_random(1, 5, 0))["error"].is_string());
    }

    #[test]
    fn constructions_end_negative() {
        for (family, a, b, t) in [
            ("star", 6, 0, 1),
            ("cubic-tree", 0, 0, 3),
            ("layered", 5, 3, 3),
            ("path-zero", 0, 0, 1),
        ] {
            let v = parse(&construction(family, a, b));
            let states = v["states"].as_array().unwrap();
            assert_eq!(states.len(), t + 1, "{family}");
            assert_eq!(v["negative"][0], t, "{family}");
        }
    }

    #[test]
    fn certificate_rows() {
        let v = parse(&certify_random(5, 30, 1));
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 31);
        assert_eq!(rows[0]["labels"], serde_json::json!([4, 3, 3, 3, 3]));
        for r in rows {
            let lo = r["lower_bound"].as_i64().unwrap();
            assert!(r["labels"]
                .as_array()
                .unwrap()
                .iter()
                .all(|x| x.as_i64().unwrap() >= lo));
        }
        assert_eq!(certify_random(5, 30, 1), certify_random(5, 30, 1));
    }
}
