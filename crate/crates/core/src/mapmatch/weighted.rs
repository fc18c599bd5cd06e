use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{match_decision, FreeSpaceManifold, MatchResult};
use crate::network::{OrdF64, ResidualField};

#[derive(Debug, Clone, Copy)]
pub struct WeightedOptions {
    /// Non-dominated tuples kept per white interval.
    pub tuple_cap: usize,
    /// Tuple expansions allowed per white interval before the search stops.
    pub expansions_per_interval: usize,
}

impl Default for WeightedOptions {
    fn default() -> Self {
        Self {
            tuple_cap: 64,
            expansions_per_interval: 256,
        }
    }
}

/// Weight tuple `(tau, psi)` at a white interval. `pred` links the tuple it
/// was propagated from and the edge crossed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTuple {
    pub interval: usize,
    pub tau: f64,
    pub psi: f64,
    pub pred: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct WeightedMatch {
    pub result: MatchResult,
    /// Weight recorded at the chosen end tuple; `None` when the fallback
    /// decision route was used.
    pub psi: Option<f64>,
}

struct Search {
    opts: WeightedOptions,
    tuples: Vec<WeightTuple>,
    alive: Vec<bool>,
    lists: Vec<Vec<usize>>,
    heap: BinaryHeap<(OrdF64, Reverse<OrdF64>, Reverse<usize>)>,
}

impl Search {
    /// Inserts unless dominated; returns the new tuple id.
    fn insert(&mut self, t: WeightTuple) -> Option<usize> {
        let list = &self.lists[t.interval];
        let tuples = &self.tuples;
        if list.iter().any(|&x| tuples[x].tau <= t.tau && tuples[x].psi >= t.psi) {
            return None;
        }
        let id = self.tuples.len();
        self.tuples.push(t);
        self.alive.push(true);
        let list = &mut self.lists[t.interval];
        let tuples = &self.tuples;
        let alive = &mut self.alive;
        list.retain(|&x| {
            let keep = !(tuples[x].tau >= t.tau && tuples[x].psi <= t.psi);
            if !keep {
                alive[x] = false;
            }
            keep
        });
        let at = list.partition_point(|&x| tuples[x].tau < t.tau);
        list.insert(at, id);
        if list.len() > self.opts.tuple_cap {
            // Sorted by tau and psi alike, so the head has the lowest psi.
            let dropped = list.remove(0);
            alive[dropped] = false;
        }
        if self.alive[id] {
            self.heap.push((OrdF64(t.psi), Reverse(OrdF64(t.tau)), Reverse(id)));
            Some(id)
        } else {
            None
        }
    }

    fn chain_intervals(&self, mut id: usize, out: &mut Vec<usize>) {
        out.clear();
        loop {
            out.push(self.tuples[id].interval);
            match self.tuples[id].pred {
                Some((p, _)) => id = p,
                None => break,
            }
        }
    }

    fn backtrack(&self, mut id: usize) -> Vec<usize> {
        let mut edges = Vec::new();
        while let Some((p, e)) = self.tuples[id].pred {
            edges.push(e);
            id = p;
        }
        edges.reverse();
        edges
    }
}

/// Feasible route with high accumulated residual. Falls back to the decision
/// route when tuple propagation finds no end tuple.
pub fn match_weighted(m: &FreeSpaceManifold, r: &ResidualField) -> Option<MatchResult> {
    match_weighted_with(m, r, WeightedOptions::default()).map(|w| w.result)
}

pub fn match_weighted_with(
    m: &FreeSpaceManifold,
    r: &ResidualField,
    opts: WeightedOptions,
) -> Option<WeightedMatch> {
    let n = m.intervals().len();
    let mut s = Search {
        opts,
        tuples: Vec::new(),
        alive: Vec::new(),
        lists: vec![Vec::new(); n],
        heap: BinaryHeap::new(),
    };
    for g in (0..n).filter(|&g| m.is_start_interval(g)) {
        s.insert(WeightTuple {
            interval: g,
            tau: 1.0,
            psi: 0.0,
            pred: None,
        });
    }
    let budget = opts.expansions_per_interval.saturating_mul(n).max(1);
    let mut expansions = 0;
    let mut best: Option<usize> = None;
    let mut chain = Vec::new();
    let mut fresh = Vec::new();
    while let Some((_, _, Reverse(id))) = s.heap.pop() {
        if !s.alive[id] {
            continue;
        }
        if expansions == budget {
            log::debug!("weighted match stopped after {budget} expansions");
            break;
        }
        expansions += 1;
        let t = s.tuples[id];
        s.chain_intervals(id, &mut chain);
        let u = m.intervals()[t.interval].vertex;
        for e in m.corridor_out_edges(u) {
            fresh.clear();
            m.cross(e, t.interval, t.tau, |j, tau| {
                if !chain.contains(&j) {
                    fresh.push((j, tau));
                }
            });
            for &(j, tau) in &fresh {
                let psi = t.psi + r.get(e);
                let Some(new) = s.insert(WeightTuple {
                    interval: j,
                    tau,
                    psi,
                    pred: Some((id, e)),
                }) else {
                    continue;
                };
                if m.is_goal_interval(j) && best.is_none_or(|b| psi > s.tuples[b].psi) {
                    best = Some(new);
                }
            }
        }
    }
    match best {
        Some(b) => Some(WeightedMatch {
            result: MatchResult {
                route: s.backtrack(b),
                entry: 1.0,
                exit: m.max_param(),
            },
            psi: Some(s.tuples[b].psi),
        }),
        None => match_decision(m).map(|result| WeightedMatch { result, psi: None }),
    }
}
