//! Removing a chip from the start of a weak-game evolution never forces
//! chips to be added later: the reduced evolution can be steered so that,
//! up to a relabelling `P_t` at each time, it stays below the original.
//!
//! Everything here constructs that coupling explicitly and checks the
//! domination inequality as it goes.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::engine::{validate_plan, weak_step, ChipState, EngineError, TransferPlan};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CouplingError {
    #[error("plan {step} is invalid: {source}")]
    InvalidPlan { step: usize, source: EngineError },
    #[error("removal vertex {vertex} out of range 1..={n}")]
    RemovalOutOfRange { vertex: usize, n: usize },
    #[error("coupled state is not dominated at t={time}")]
    NotDominated { time: usize },
    #[error("coupled plan rejected at t={time}: {source}")]
    DerivedPlanInvalid { time: usize, source: EngineError },
}

/// Cancels directed cycles of transfers until none remain. Every vertex
/// keeps its net inflow. Cycles are taken shortest-first from the lowest
/// vertex that lies on one.
pub fn acyclic_reduce(plan: &TransferPlan) -> TransferPlan {
    let mut out = plan.clone();
    while let Some(cycle) = find_cycle(&out) {
        for i in 0..cycle.len() {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            out.set(a, b, 0);
        }
    }
    out
}

fn find_cycle(plan: &TransferPlan) -> Option<Vec<usize>> {
    let n = plan.n();
    for s in 0..n {
        let mut prev = vec![usize::MAX; n];
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if plan.get(x, y) <= 0 {
                    continue;
                }
                if y == s {
                    let mut cycle = vec![x];
                    let mut z = x;
                    while z != s {
                        z = prev[z];
                        cycle.push(z);
                    }
                    cycle.reverse();
                    return Some(cycle);
                }
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
    }
    None
}

/// Vertices ordered by label, largest first, so that every transfer of the
/// acyclic `plan` runs from an earlier vertex to a later one. Within a tie
/// class this is a topological order, smallest index first.
pub fn transfer_order(w: &ChipState, plan: &TransferPlan) -> Vec<usize> {
    let n = w.len();
    let mut by_label: Vec<usize> = (0..n).collect();
    by_label.sort_by_key(|&v| (Reverse(w[v]), v));
    let mut order = Vec::with_capacity(n);
    for class in by_label.chunk_by(|&a, &b| w[a] == w[b]) {
        let mut indegree: Vec<usize> = class
            .iter()
            .map(|&v| class.iter().filter(|&&u| plan.get(u, v) > 0).count())
            .collect();
        let mut ready: BinaryHeap<Reverse<usize>> = class
            .iter()
            .zip(&indegree)
            .filter(|(_, &d)| d == 0)
            .map(|(&v, _)| Reverse(v))
            .collect();
        while let Some(Reverse(u)) = ready.pop() {
            order.push(u);
            for (i, &v) in class.iter().enumerate() {
                if plan.get(u, v) > 0 {
                    indegree[i] -= 1;
                    if indegree[i] == 0 {
                        ready.push(Reverse(v));
                    }
                }
            }
        }
    }
    assert_eq!(order.len(), n, "transfer plan is not acyclic");
    order
}

/// One coupled step: the reduced state `w - e_k` played with `plan`
/// relabelled through the transposition `(k k')`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledStep {
    pub reduced_plan: TransferPlan,
    /// Vertices largest-label first, transfers pointing forward.
    pub order: Vec<usize>,
    /// The last vertex of `k`'s tie class in `order`.
    pub k_prime: usize,
    /// `permutation[u] = P(u)`.
    pub permutation: Vec<usize>,
    /// Valid for `w - e_k`.
    pub plan: TransferPlan,
    pub state: ChipState,
}

pub fn couple_one_step(
    w: &ChipState,
    plan: &TransferPlan,
    k: usize,
) -> Result<CoupledStep, CouplingError> {
    couple_at(w, plan, k, 0)
}

fn couple_at(
    w: &ChipState,
    plan: &TransferPlan,
    k: usize,
    time: usize,
) -> Result<CoupledStep, CouplingError> {
    let n = w.len();
    if k >= n {
        return Err(CouplingError::RemovalOutOfRange { vertex: k + 1, n });
    }
    validate_plan(w, plan).map_err(|source| CouplingError::InvalidPlan {
        step: time + 1,
        source,
    })?;
    let next = weak_step(w, plan).expect("validated above");

    let reduced_plan = acyclic_reduce(plan);
    let order = transfer_order(w, &reduced_plan);
    let k_prime = *order
        .iter()
        .rev()
        .find(|&&v| w[v] == w[k])
        .expect("k is in its own tie class");
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.swap(k, k_prime);

    let derived_plan = reduced_plan.permuted(&permutation);
    let state = weak_step(&w.remove_chips(k, 1), &derived_plan)
        .map_err(|source| CouplingError::DerivedPlanInvalid { time, source })?;
    if (0..n).any(|u| state[permutation[u]] > next[u]) {
        return Err(CouplingError::NotDominated { time: time + 1 });
    }
    Ok(CoupledStep {
        reduced_plan,
        order,
        k_prime,
        permutation,
        plan: derived_plan,
        state,
    })
}

/// An original evolution with its one-chip-lighter coupled evolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledEvolution {
    pub original: Vec<ChipState>,
    pub coupled: Vec<ChipState>,
    /// Plans driving `coupled`, valid stepwise.
    pub coupled_plans: Vec<TransferPlan>,
    /// `permutations[t][u] = P_t(u)`, with `coupled[t][P_t(u)] <= original[t][u]`.
    pub permutations: Vec<Vec<usize>>,
}

impl CoupledEvolution {
    pub fn dominated_at(&self, t: usize) -> bool {
        let p = &self.permutations[t];
        (0..p.len()).all(|u| self.coupled[t][p[u]] <= self.original[t][u])
    }
}

/// Per time step `t=<k> P=<cycles> original=<csv> coupled=<csv>`.
impl fmt::Display for CoupledEvolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.original.len() {
            writeln!(
                f,
                "t={t} P={} original={} coupled={}",
                cycle_notation(&self.permutations[t]),
                self.original[t],
                self.coupled[t]
            )?;
        }
        Ok(())
    }
}

/// One-based cycle notation, fixed points omitted; `()` for the identity.
pub fn cycle_notation(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for s in 0..p.len() {
        if seen[s] || p[s] == s {
            continue;
        }
        let mut cycle = Vec::new();
        let mut x = s;
        while !seen[x] {
            seen[x] = true;
            cycle.push((x + 1).to_string());
            x = p[x];
        }
        out.push_str(&format!("({})", cycle.join(" ")));
    }
    if out.is_empty() {
        out.push_str("()");
    }
    out
}

/// Chains [`couple_one_step`] through time, starting from `w0` with one
/// chip removed at `removal`.
pub fn couple_evolution(
    w0: &ChipState,
    plans: &[TransferPlan],
    removal: usize,
) -> Result<CoupledEvolution, CouplingError> {
    let n = w0.len();
    if removal >= n {
        return Err(CouplingError::RemovalOutOfRange {
            vertex: removal + 1,
            n,
        });
    }
    let mut evo = CoupledEvolution {
        original: vec![w0.clone()],
        coupled: vec![w0.remove_chips(removal, 1)],
        coupled_plans: Vec::with_capacity(plans.len()),
        permutations: vec![(0..n).collect()],
    };
    for (t, plan) in plans.iter().enumerate() {
        let w = &evo.original[t];
        let c = &evo.coupled[t];
        let p = &evo.permutations[t];
        // c∘P equals w except for one vertex holding one chip fewer
        let j = (0..n)
            .find(|&x| c[p[x]] != w[x])
            .ok_or(CouplingError::NotDominated { time: t })?;
        let step = couple_at(w, plan, j, t)?;
        let coupled_plan = step.plan.permuted(p);
        let next_c = weak_step(c, &coupled_plan)
            .map_err(|source| CouplingError::DerivedPlanInvalid { time: t, source })?;
        let next_p: Vec<usize> = (0..n).map(|u| p[step.permutation[u]]).collect();
        let next_w = weak_step(w, plan).expect("validated by couple_at");
        evo.original.push(next_w);
        evo.coupled.push(next_c);
        evo.coupled_plans.push(coupled_plan);
        evo.permutations.push(next_p);
        if !evo.dominated_at(t + 1) {
            return Err(CouplingError::NotDominated { time: t + 1 });
        }
    }
    Ok(evo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{plan_from_graph, random_weak_plan};
    use crate::graph::make_star;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cs(v: &[i64]) -> ChipState {
        ChipState(v.to_vec())
    }

    #[test]
    fn reduce_examples() {
        let mut cyc = TransferPlan::empty(3);
        cyc.transfer(0, 1);
        cyc.transfer(1, 2);
        cyc.transfer(2, 0);
        assert!(acyclic_reduce(&cyc).is_empty());

        let mut acyclic = TransferPlan::empty(3);
        acyclic.transfer(0, 1);
        acyclic.transfer(0, 2);
        assert_eq!(acyclic_reduce(&acyclic), acyclic);

        let mut mixed = TransferPlan::empty(4);
        mixed.transfer(0, 1);
        mixed.transfer(1, 2);
        mixed.transfer(2, 0);
        mixed.transfer(0, 3);
        let r = acyclic_reduce(&mixed);
        assert_eq!(r.transfers().collect::<Vec<_>>(), vec![(0, 3)]);
        for v in 0..4 {
            assert_eq!(r.net_inflow(v), mixed.net_inflow(v));
        }
    }

    #[test]
    fn reduce_preserves_net_flow_on_random_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.random_range(2..=7);
            let w = ChipState::constant(n, 0);
            let plan = random_weak_plan(&w, &mut rng);
            let r = acyclic_reduce(&plan);
            assert!(find_cycle(&r).is_none());
            for v in 0..n {
                assert_eq!(r.net_inflow(v), plan.net_inflow(v));
            }
        }
    }

    #[test]
    fn cycle_notation_examples() {
        assert_eq!(cycle_notation(&[0, 1, 2]), "()");
        assert_eq!(cycle_notation(&[1, 0, 2]), "(1 2)");
        assert_eq!(cycle_notation(&[1, 2, 0, 3]), "(1 2 3)");
    }

    #[test]
    fn one_step_examples() {
        let mut plan = TransferPlan::empty(2);
        plan.transfer(0, 1);
        let step = couple_one_step(&cs(&[1, 1]), &plan, 0).unwrap();
        assert_eq!(step.k_prime, 1);
        assert_eq!(step.permutation, vec![1, 0]);
        assert_eq!(step.plan.transfers().collect::<Vec<_>>(), vec![(1, 0)]);
        assert_eq!(step.state, cs(&[1, 0]));

        let w = cs(&[4, 2, 2, 0]);
        let step = couple_one_step(&w, &TransferPlan::empty(4), 1).unwrap();
        assert_eq!(step.state, cs(&[4, 1, 2, 0]));
        let mut sorted = step.state.0.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 4]);

        let step = couple_one_step(&cs(&[3, 2, 1]), &TransferPlan::empty(3), 2).unwrap();
        assert_eq!(step.k_prime, 2);
        assert_eq!(step.permutation, vec![0, 1, 2]);
    }

    #[test]
    fn ties_need_topological_order() {
        // a stable sort by label alone would put 0 before 1, against the transfer 1 -> 0
        let mut plan = TransferPlan::empty(3);
        plan.transfer(1, 0);
        let w = cs(&[2, 2, 0]);
        let order = transfer_order(&w, &plan);
        assert_eq!(order, vec![1, 0, 2]);
        let step = couple_one_step(&w, &plan, 0).unwrap();
        assert_eq!(step.k_prime, 0);
        let step = couple_one_step(&w, &plan, 1).unwrap();
        assert_eq!(step.k_prime, 0);
        assert_eq!(step.permutation, vec![1, 0, 2]);
    }

    #[test]
    fn evolution_on_star() {
        let star = make_star(4).unwrap();
        let mut w = cs(&[3, 2, 2, 2]);
        let mut plans = Vec::new();
        for _ in 0..5 {
            let p = plan_from_graph(&star, &w).unwrap();
            w = weak_step(&w, &p).unwrap();
            plans.push(p);
        }
        let evo = couple_evolution(&cs(&[3, 2, 2, 2]), &plans, 1).unwrap();
        assert_eq!(evo.original.len(), 6);
        for t in 0..6 {
            assert!(evo.dominated_at(t));
            assert_eq!(evo.coupled[t].total() + 1, evo.original[t].total());
        }
        assert!(evo
            .to_string()
            .starts_with("t=0 P=() original=3,2,2,2 coupled=3,1,2,2\n"));

        let empty = couple_evolution(&cs(&[3, 2]), &[], 0).unwrap();
        assert_eq!(empty.coupled, vec![cs(&[2, 2])]);
        assert!(matches!(
            couple_evolution(&cs(&[3, 2]), &[], 2),
            Err(CouplingError::RemovalOutOfRange { .. })
        ));
    }

    #[test]
    fn two_removals_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(2..=6);
            let w0 = ChipState((0..n).map(|_| rng.random_range(0..6)).collect());
            let mut w = w0.clone();
            let mut plans = Vec::new();
            for _ in 0..20 {
                let p = random_weak_plan(&w, &mut rng);
                w = weak_step(&w, &p).unwrap();
                plans.push(p);
            }
            let first = couple_evolution(&w0, &plans, rng.random_range(0..n)).unwrap();
            let second = couple_evolution(
                &first.coupled[0],
                &first.coupled_plans,
                rng.random_range(0..n),
            )
            .unwrap();
            for t in 0..=plans.len() {
                let p1 = &first.permutations[t];
                let p2 = &second.permutations[t];
                for u in 0..n {
                    assert!(second.coupled[t][p2[p1[u]]] <= first.original[t][u]);
                }
                assert_eq!(second.coupled[t].total() + 2, first.original[t].total());
            }
        }
    }

    #[test]
    fn invalid_plan_reported_with_step() {
        let mut up = TransferPlan::empty(2);
        up.transfer(1, 0);
        let err = couple_evolution(&cs(&[1, 0]), &[TransferPlan::empty(2), up], 0).unwrap_err();
        assert!(matches!(err, CouplingError::InvalidPlan { step: 2, .. }));
    }
}
