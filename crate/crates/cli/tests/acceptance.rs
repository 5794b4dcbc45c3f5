//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits non-zero if any fails.

use std::collections::HashMap;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diffusion_game::constructions::{
    cubic_tree_witness, layered_witness, path_zero_witness, star_witness,
};
use diffusion_game::coupling::couple_evolution;
use diffusion_game::encoding::{
    certify_nonnegativity, decode, initial_encoding, is_good, make_good_counted, DigraphEncoding,
};
use diffusion_game::engine::{
    detect_period, random_plan_on_graph, random_weak_plan, simulate, weak_step, ChipState,
    TransferPlan,
};
use diffusion_game::graph::{make_cycle, make_path, Graph};
use diffusion_game::search::{
    enumerate_connected_graphs, find_negativity_witness, gdk_scan, paths_and_cycles,
    tightness_campaign, GdkScan, SearchConfig,
};

const GUARD: usize = 10_000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The update rule written out directly from the adjacency lists.
fn step_oracle(g: &Graph, w: &[i64]) -> Vec<i64> {
    (0..g.n())
        .map(|v| {
            w[v] + g
                .neighbors(v)
                .iter()
                .map(|&(u, m)| m as i64 * (w[u] - w[v]).signum())
                .sum::<i64>()
        })
        .collect()
}

/// Preperiod, period and minimum label by remembering every state.
fn period_oracle(g: &Graph, w0: &[i64], guard: usize) -> Option<(usize, usize, i64)> {
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut w = w0.to_vec();
    let mut min = i64::MAX;
    for t in 0..=guard + 2 {
        if let Some(&s) = seen.get(&w) {
            return Some((s, t - s, min));
        }
        min = min.min(*w.iter().min().unwrap());
        let next = step_oracle(g, &w);
        seen.insert(w, t);
        w = next;
    }
    None
}

/// Visits every vector in `[lo, hi]^n` in odometer order.
fn for_each_labelling(
    n: usize,
    lo: i64,
    hi: i64,
    mut f: impl FnMut(&[i64]) -> Result<(), String>,
) -> Result<u64, String> {
    let mut w = vec![lo; n];
    let mut count = 0;
    loop {
        f(&w)?;
        count += 1;
        let mut i = 0;
        loop {
            if i == n {
                return Ok(count);
            }
            if w[i] < hi {
                w[i] += 1;
                break;
            }
            w[i] = lo;
            i += 1;
        }
    }
}

/// Checks one run against the independent period detector.
fn period_agrees(g: &Graph, w0: &[i64]) -> Result<(usize, usize, i64), String> {
    let report =
        detect_period(g, &ChipState(w0.to_vec()), GUARD).map_err(|e| format!("{w0:?}: {e}"))?;
    let (t, k, min) =
        period_oracle(g, w0, GUARD).ok_or_else(|| format!("{w0:?}: oracle found no repeat"))?;
    ensure(
        (report.preperiod, report.period, report.min_label_seen) == (t, k, min),
        || format!("{w0:?}: engine {report:?}, oracle T={t} k={k} min={min}"),
    )?;
    ensure(k == 1 || k == 2, || format!("{w0:?}: period {k}"))?;
    Ok((t, k, min))
}

fn c1_star() -> Check {
    for n in 2..=12 {
        let w = star_witness(n).map_err(|e| e.to_string())?;
        w.verify().map_err(|e| format!("n={n}: {e}"))?;
        let tr = simulate(&w.graph, &w.w0, 1).map_err(|e| e.to_string())?;
        ensure(tr.states[0][0] >= 0, || {
            format!("n={n}: centre starts negative")
        })?;
        ensure(tr.states[1][0] == -1, || {
            format!("n={n}: centre at t=1 is {}", tr.states[1][0])
        })?;
        ensure((w.negative_time, w.negative_vertex) == (1, 0), || {
            format!("n={n}: wrong expectation")
        })?;
        if n >= 3 {
            ensure(tr.states[0].iter().all(|&x| x >= 0), || {
                format!("n={n}: negative start")
            })?;
        }
    }
    Ok("n = 2..12, centre -1 at t=1".into())
}

fn c2_window() -> Check {
    let mut runs = 0u64;
    let mut graphs = 0;
    for n in 2..=5usize {
        let lo = n as i64 - 2;
        let hi = n as i64 + 1;
        for g in enumerate_connected_graphs(n, true).map_err(|e| e.to_string())? {
            graphs += 1;
            runs += for_each_labelling(n, lo, hi, |w0| {
                let (_, _, min) = period_agrees(&g, w0)?;
                ensure(min >= 0, || format!("{w0:?} reaches {min}"))
            })?;
        }
        let report =
            tightness_campaign(n, &SearchConfig::window(lo, hi)).map_err(|e| e.to_string())?;
        ensure(
            !report.found_witness() && report.conclusive && report.all_exhaustive(),
            || format!("search on n={n} is not a clean exhaustive pass"),
        )?;
    }
    Ok(format!(
        "{graphs} graphs, {runs} labellings, zero violations"
    ))
}

fn c3_boundary() -> Check {
    let mut found = Vec::new();
    for n in 3..=5usize {
        let lo = n as i64 - 3;
        let report = tightness_campaign(n, &SearchConfig::window(lo, n as i64 + 1))
            .map_err(|e| e.to_string())?;
        ensure(report.found_witness(), || format!("no witness for n={n}"))?;
        for (_, w) in &report.witnesses {
            w.verify()
                .map_err(|e| format!("n={n}: reported witness fails: {e}"))?;
        }
        let status = Command::new(env!("CARGO_BIN_EXE_diffusion"))
            .args([
                "search",
                "tightness",
                "--n",
                &n.to_string(),
                "--min",
                &lo.to_string(),
            ])
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.code() == Some(10), || {
            format!("n={n}: exit code {status}")
        })?;
        found.push(report.witnesses.len());
    }
    Ok(format!(
        "witness classes per n=3,4,5: {found:?}, exit code 10"
    ))
}

fn c4_paths_cycles() -> Check {
    let mut runs = 0u64;
    for n in 2..=7usize {
        let mut graphs = vec![make_path(n).map_err(|e| e.to_string())?];
        if n >= 3 {
            graphs.push(make_cycle(n).map_err(|e| e.to_string())?);
        }
        for g in &graphs {
            runs += for_each_labelling(n, 1, 4, |w0| {
                let (t, k, min) = period_agrees(g, w0)?;
                ensure(min >= 0, || format!("{w0:?} reaches {min}"))?;
                // no degree-2 vertex sits at zero on two consecutive steps
                let tr =
                    simulate(g, &ChipState(w0.to_vec()), t + k + 1).map_err(|e| e.to_string())?;
                for pair in tr.states.windows(2) {
                    for v in (0..n).filter(|&v| g.degree(v) == 2) {
                        ensure(!(pair[0][v] == 0 && pair[1][v] == 0), || {
                            format!("{w0:?}: vertex {} zero twice in a row", v + 1)
                        })?;
                    }
                }
                Ok(())
            })?;
        }
    }
    let report = find_negativity_witness(&paths_and_cycles(7), &SearchConfig::window(1, 4))
        .map_err(|e| e.to_string())?;
    ensure(
        !report.found_witness() && report.conclusive && report.all_exhaustive(),
        || "search over paths and cycles is not a clean exhaustive pass".into(),
    )?;
    let zero = path_zero_witness();
    zero.verify().map_err(|e| e.to_string())?;
    ensure(zero.min_initial_label() == 0, || {
        "path witness does not start at 0".into()
    })?;
    Ok(format!(
        "{runs} runs non-negative; (0,1,0) goes negative at t={}",
        zero.negative_time
    ))
}

/// The drawn trees, one nested list per child, flattened breadth first.
#[derive(Clone)]
struct Drawn(i64, Vec<Drawn>);

fn bfs(root: &Drawn) -> Vec<i64> {
    let mut out = Vec::new();
    let mut level = vec![root];
    while !level.is_empty() {
        out.extend(level.iter().map(|d| d.0));
        level = level.iter().flat_map(|d| d.1.iter()).collect();
    }
    out
}

fn leaf(x: i64) -> Drawn {
    Drawn(x, vec![])
}

fn node(x: i64, kids: &[i64]) -> Drawn {
    Drawn(x, kids.iter().map(|&k| leaf(k)).collect())
}

fn c5_cubic_figure() -> Check {
    let t0 = Drawn(
        2,
        vec![
            Drawn(3, vec![node(3, &[2, 2]), node(3, &[2, 2])]),
            Drawn(2, vec![node(3, &[3, 3]), node(2, &[2, 2])]),
            Drawn(2, vec![node(2, &[2, 2]), node(3, &[3, 3])]),
        ],
    );
    let t1 = Drawn(
        3,
        vec![node(2, &[1, 1]), node(3, &[2, 2]), node(3, &[2, 2])],
    );
    let t2 = node(2, &[1, 1, 1]);

    let w = cubic_tree_witness();
    let tr = simulate(&w.graph, &w.w0, 3).map_err(|e| e.to_string())?;
    let roots: Vec<i64> = tr.states.iter().map(|s| s[0]).collect();
    ensure(roots == [2, 3, 2, -1], || {
        format!("root trajectory {roots:?}")
    })?;
    for (t, drawn) in [(0, &t0), (1, &t1), (2, &t2)] {
        let want = bfs(drawn);
        let got = &tr.states[t][..want.len()];
        ensure(got == want.as_slice(), || {
            format!("t={t}: {got:?} vs figure {want:?}")
        })?;
    }
    w.verify().map_err(|e| e.to_string())?;
    Ok("root 2,3,2,-1; t=0,1,2 match the drawn labels".into())
}

fn c6_layered() -> Check {
    for d in 4..=8usize {
        for t in 1..=5usize {
            let w = layered_witness(d, t).map_err(|e| e.to_string())?;
            w.verify().map_err(|e| format!("d={d} T={t}: {e}"))?;
            let tr = simulate(&w.graph, &w.w0, t).map_err(|e| e.to_string())?;
            ensure(tr.states[t][0] == -1, || {
                format!("d={d} T={t}: root {}", tr.states[t][0])
            })?;
            ensure(
                tr.states[..t].iter().all(|s| s.iter().all(|&x| x >= 0)),
                || format!("d={d} T={t}: negative before T"),
            )?;
            let (d, t) = (d as i64, t as i64);
            ensure(w.min_initial_label() == t * d - 3 * t + 1, || {
                format!("d={d} T={t}: min label {}", w.min_initial_label())
            })?;
        }
    }
    Ok("d = 4..8, T = 1..5".into())
}

fn good_by_hand(enc: &DigraphEncoding, w: &[i64]) -> bool {
    let n = w.len();
    (0..n).all(|u| (0..n).all(|v| u == v || w[u] < w[v] || enc.get(u, v) <= 0))
}

fn c7_pipeline() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut steps = 0u64;
    let mut max_shifts = 0;
    for trial in 0..10_000 {
        let n = rng.random_range(2..=8usize);
        let start = decode(&initial_encoding(n).map_err(|e| e.to_string())?);
        let mut expect = vec![n as i64 - 2; n];
        expect[0] = n as i64 - 1;
        ensure(start.0 == expect, || format!("start state {start}"))?;
        let mut w = start;
        let mut plans: Vec<TransferPlan> = Vec::with_capacity(100);
        for _ in 0..100 {
            let p = random_weak_plan(&w, &mut rng);
            w = weak_step(&w, &p).map_err(|e| e.to_string())?;
            plans.push(p);
        }
        let cert = certify_nonnegativity(n, &plans).map_err(|e| format!("trial {trial}: {e}"))?;
        for s in &cert.steps {
            ensure(
                s.labels.iter().all(|&x| x >= 0) && s.lower_bound >= 0,
                || format!("trial {trial} t={}: negative", s.time),
            )?;
            ensure(decode(&s.encoding) == s.labels, || {
                format!("trial {trial}: decode mismatch")
            })?;
            ensure(good_by_hand(&s.encoding, &s.labels), || {
                format!("trial {trial}: not good")
            })?;
            let n_i = n as i64;
            ensure(
                (0..n).all(|u| (0..n).all(|v| s.encoding.get(u, v).abs() <= n_i)),
                || format!("trial {trial}: weight out of range"),
            )?;
            ensure(s.shifts as i64 <= s.abs_sum_before, || {
                format!(
                    "trial {trial}: {} shifts from abs sum {}",
                    s.shifts, s.abs_sum_before
                )
            })?;
            max_shifts = max_shifts.max(s.shifts);
        }
        steps += plans.len() as u64;
    }
    Ok(format!(
        "10000 evolutions, {steps} steps, max shifts per repair {max_shifts}"
    ))
}

fn c8_make_good() -> Check {
    let mut checked = 0u64;
    for n in 2..=4usize {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        let ni = n as i64;
        for_each_labelling(pairs.len(), -ni, ni, |vals| {
            let mut l = vec![0; n * n];
            for (&(u, v), &x) in pairs.iter().zip(vals) {
                l[u * n + v] = x;
                l[v * n + u] = -x;
            }
            let inflow: Vec<i64> = (0..n).map(|v| (0..n).map(|u| l[u * n + v]).sum()).collect();
            let c = inflow[0].rem_euclid(ni);
            if inflow.iter().any(|x| x.rem_euclid(ni) != c) {
                return Ok(());
            }
            let total = (-c).rem_euclid(ni) + ni * ni;
            let enc = DigraphEncoding::new(n, total, l).map_err(|e| format!("{vals:?}: {e}"))?;
            let w = decode(&enc);
            let repair = make_good_counted(&enc, &w).map_err(|e| format!("{vals:?}: {e}"))?;
            ensure(decode(&repair.encoding) == w, || {
                format!("{vals:?}: decode changed")
            })?;
            ensure(is_good(&repair.encoding, &w) == Ok(true), || {
                format!("{vals:?}: is_good false")
            })?;
            ensure(good_by_hand(&repair.encoding, &w), || {
                format!("{vals:?}: brute check fails")
            })?;
            ensure(repair.shifts as i64 <= repair.abs_sum_before, || {
                format!("{vals:?}: too many shifts")
            })?;
            checked += 1;
            Ok(())
        })?;
    }
    Ok(format!("{checked} integral encodings with n <= 4"))
}

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Graph {
    let n = rng.random_range(2..=max_n);
    let p = rng.random_range(0.2..0.9);
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|_| rng.random_bool(p))
        .collect();
    Graph::from_edges(n, edges).expect("valid edges")
}

fn c9_coupling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..1000 {
        let g = random_graph(&mut rng, 6);
        let n = g.n();
        let w0 = ChipState((0..n).map(|_| rng.random_range(0..=8)).collect());
        let mut w = w0.clone();
        let mut plans = Vec::with_capacity(50);
        for _ in 0..50 {
            let p = random_plan_on_graph(&g, &w, &mut rng);
            w = weak_step(&w, &p).map_err(|e| e.to_string())?;
            plans.push(p);
        }
        let removal = rng.random_range(0..n);
        let evo =
            couple_evolution(&w0, &plans, removal).map_err(|e| format!("trial {trial}: {e}"))?;
        for t in 0..=50 {
            let p = &evo.permutations[t];
            ensure(
                (0..n).all(|u| evo.coupled[t][p[u]] <= evo.original[t][u]),
                || format!("trial {trial}: not dominated at t={t}"),
            )?;
            ensure(
                evo.original[t].total() - evo.coupled[t].total() == 1,
                || format!("trial {trial}: totals at t={t}"),
            )?;
            if t < 50 {
                let next =
                    weak_step(&evo.coupled[t], &evo.coupled_plans[t]).map_err(|e| e.to_string())?;
                ensure(next == evo.coupled[t + 1], || {
                    format!("trial {trial}: coupled plan mismatch")
                })?;
            }
        }
    }
    Ok("1000 trials of 50 steps".into())
}

fn c10_periods() -> Check {
    let mut runs = 0u64;
    let mut by_period = [0u64; 3];
    let mut tally = |k: usize| by_period[k] += 1;
    for n in 2..=5usize {
        for g in enumerate_connected_graphs(n, true).map_err(|e| e.to_string())? {
            runs += for_each_labelling(n, n as i64 - 2, n as i64 + 1, |w0| {
                tally(period_agrees(&g, w0)?.1);
                Ok(())
            })?;
        }
    }
    for g in paths_and_cycles(7) {
        runs += for_each_labelling(g.n(), 1, 4, |w0| {
            tally(period_agrees(&g, w0)?.1);
            Ok(())
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..5000 {
        let g = random_graph(&mut rng, 10);
        let n = g.n() as i64;
        let w0: Vec<i64> = (0..n).map(|_| rng.random_range(0..=2 * n)).collect();
        tally(period_agrees(&g, &w0)?.1);
        runs += 1;
    }
    Ok(format!(
        "{runs} runs, {} fixed points, {} two-cycles, engine matches oracle",
        by_period[1], by_period[2]
    ))
}

fn c11_determinism() -> Check {
    let tight = |workers| {
        let config = SearchConfig {
            workers,
            ..SearchConfig::window(0, 5)
        };
        tightness_campaign(4, &config)
            .map(|r| r.to_string())
            .map_err(|e| e.to_string())
    };
    let sampled = |workers| {
        let config = SearchConfig {
            samples: 500,
            seed: 11,
            workers,
            collect_all: true,
            ..SearchConfig::default()
        };
        let params = GdkScan {
            degree: 4,
            window: 3,
            start_label: 3,
            max_radius: 2,
        };
        gdk_scan(&params, &config)
            .map(|r| r.to_string())
            .map_err(|e| e.to_string())
    };
    for workers in [1, 2, 0] {
        ensure(tight(workers) == tight(0), || {
            "tightness report differs".into()
        })?;
        ensure(sampled(workers) == sampled(0), || {
            "sampled report differs".into()
        })?;
    }
    let bin = env!("CARGO_BIN_EXE_diffusion");
    for args in [
        vec![
            "certify", "--n", "6", "--random", "--steps", "200", "--seed", "3",
        ],
        vec![
            "couple",
            "--labels",
            "4,3,3,1,0",
            "--remove",
            "3",
            "--random",
            "--steps",
            "30",
        ],
        vec![
            "search",
            "gdk",
            "--d",
            "5",
            "--window",
            "3",
            "--samples",
            "400",
            "--seed",
            "4",
        ],
    ] {
        let a = Command::new(bin)
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        let b = Command::new(bin)
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(a.stdout == b.stdout && !a.stdout.is_empty(), || {
            format!("{args:?} output differs")
        })?;
    }
    Ok("library and CLI reports byte-identical across runs and worker counts".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("star tightness", c1_star),
        ("exhaustive window [n-2, n+1], n <= 5", c2_window),
        ("window [n-3, n+1] has witnesses", c3_boundary),
        ("paths and cycles from label 1", c4_paths_cycles),
        ("cubic tree figure", c5_cubic_figure),
        ("layered family", c6_layered),
        ("encoding pipeline", c7_pipeline),
        ("make_good against brute force", c8_make_good),
        ("coupling domination", c9_coupling),
        ("period is 1 or 2", c10_periods),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
