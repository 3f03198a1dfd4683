//! Minimum over daemon (and Byzantine) choices of the probability that an
//! event occurs within a number of rounds.
//!
//! The state is augmented with round accounting: `(configuration, completed
//! rounds, satisfied nodes)`. The complement event F = "the horizon ends (or
//! the execution stops) before the event" is maximized by policy iteration
//! over exact rationals. Runs that never close a round are unfair and count
//! as neither, so `1 - max P(F)` lower-bounds the probability under any fair
//! daemon.

use std::collections::{HashMap, VecDeque};

use num_traits::{One, Zero};

use super::chain::outcome_distribution;
use super::rational::{solve, Q};
use super::{OracleError, DEFAULT_MDP_CAP};
use crate::graph::{Graph, NodeId};
use crate::model::{
    activable_nodes, enabled_moves, Algorithm, ByzantineUpdate, Configuration, LocalState, MoveSet, X_MAX,
};

const EVENT: usize = 0;
const EXHAUSTED: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Aug {
    cfg: Configuration,
    round: usize,
    satisfied: u64,
}

/// Writes an activated Byzantine node may perform: keep its state, or any
/// `s` with `x ∈ {deg, X_MAX}`.
pub fn byzantine_menu(g: &Graph, b: NodeId) -> Vec<Option<LocalState>> {
    let deg = g.degree(b) as u32;
    let mut menu = vec![None];
    for s in [false, true] {
        for x in [deg, X_MAX] {
            menu.push(Some(LocalState::new(s, x)));
        }
    }
    menu
}

fn mask_of(flags: impl IntoIterator<Item = bool>) -> u64 {
    flags
        .into_iter()
        .enumerate()
        .filter(|&(_, f)| f)
        .fold(0, |m, (i, _)| m | 1 << i)
}

/// Every joint choice out of `cfg`: a set of honest moves and, per Byzantine
/// node, either idle or one write from [`byzantine_menu`]. The first entry
/// activates everything and leaves Byzantine states unchanged.
fn joint_actions(algo: Algorithm, g: &Graph, cfg: &Configuration) -> Vec<(MoveSet, Vec<ByzantineUpdate>)> {
    let honest = enabled_moves(algo, g, cfg);
    let byz = g.byzantine_nodes();
    if honest.is_empty() && byz.is_empty() {
        return Vec::new();
    }
    let menus: Vec<Vec<Option<LocalState>>> = byz.iter().map(|&b| byzantine_menu(g, b)).collect();
    let keep_all: Vec<ByzantineUpdate> = byz
        .iter()
        .map(|&b| ByzantineUpdate {
            node: b,
            new_state: None,
        })
        .collect();
    let mut out = vec![(MoveSet::new(honest.clone()), keep_all)];
    // Byzantine choice vector: 0 idle, i > 0 menu entry i - 1.
    let mut choice = vec![0usize; byz.len()];
    loop {
        let updates: Vec<ByzantineUpdate> = (0..byz.len())
            .filter(|&i| choice[i] > 0)
            .map(|i| ByzantineUpdate {
                node: byz[i],
                new_state: menus[i][choice[i] - 1],
            })
            .collect();
        for mask in 0u64..(1u64 << honest.len()) {
            if mask == 0 && updates.is_empty() {
                continue;
            }
            let t: MoveSet = honest
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask >> i & 1 == 1)
                .map(|(_, &m)| m)
                .collect();
            out.push((t, updates.clone()));
        }
        let Some(i) = (0..choice.len()).find(|&i| choice[i] < menus[i].len()) else {
            break;
        };
        choice[i] += 1;
        for c in &mut choice[..i] {
            *c = 0;
        }
    }
    out
}

struct Mdp {
    /// Per state, the successor distribution of each action. Terminal states
    /// have none.
    actions: Vec<Vec<Vec<(usize, Q)>>>,
}

fn explore(
    algo: Algorithm,
    g: &Graph,
    start: &Configuration,
    horizon: usize,
    event: &dyn Fn(&Configuration) -> bool,
    cap: usize,
) -> Result<Mdp, OracleError> {
    let n = g.node_count();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let non_activable = |cfg: &Configuration| mask_of(activable_nodes(algo, g, cfg).into_iter().map(|a| !a));

    let mut index: HashMap<Aug, usize> = HashMap::new();
    let mut states: Vec<Option<Aug>> = vec![None, None];
    let mut queue = VecDeque::new();
    let init = Aug {
        cfg: start.clone(),
        round: 0,
        satisfied: non_activable(start),
    };
    index.insert(init.clone(), 2);
    states.push(Some(init));
    queue.push_back(2);

    let mut actions: Vec<Vec<Vec<(usize, Q)>>> = vec![Vec::new(), Vec::new(), Vec::new()];
    while let Some(s) = queue.pop_front() {
        let aug = states[s].clone().expect("open state");
        let before = non_activable(&aug.cfg);
        let mut dists: Vec<Vec<(usize, Q)>> = Vec::new();
        for (t, byz) in joint_actions(algo, g, &aug.cfg) {
            let activated = mask_of((0..n).map(|u| t.contains_node(u) || byz.iter().any(|b| b.node == u)));
            let mut dist: Vec<(usize, Q)> = Vec::new();
            for (cfg, p) in outcome_distribution(algo, g, &aug.cfg, &t, &byz) {
                let after = non_activable(&cfg);
                let mut satisfied = aug.satisfied | activated | before | after;
                let mut round = aug.round;
                if satisfied & full == full {
                    round += 1;
                    satisfied = after;
                }
                let next = if event(&cfg) {
                    EVENT
                } else if round >= horizon || after & full == full && g.byzantine_count() == 0 {
                    EXHAUSTED
                } else {
                    let key = Aug {
                        cfg,
                        round,
                        satisfied,
                    };
                    match index.get(&key) {
                        Some(&i) => i,
                        None => {
                            if states.len() >= cap {
                                return Err(OracleError::CapExceeded {
                                    cap,
                                    explored: states.len(),
                                });
                            }
                            let i = states.len();
                            index.insert(key.clone(), i);
                            states.push(Some(key));
                            actions.push(Vec::new());
                            queue.push_back(i);
                            i
                        }
                    }
                };
                match dist.iter_mut().find(|(u, _)| *u == next) {
                    Some((_, acc)) => *acc += p,
                    None => dist.push((next, p)),
                }
            }
            dist.sort_by_key(|&(u, _)| u);
            if !dists.contains(&dist) {
                dists.push(dist);
            }
        }
        actions[s] = dists;
    }
    Ok(Mdp { actions })
}

impl Mdp {
    fn len(&self) -> usize {
        self.actions.len()
    }

    /// P(reach EXHAUSTED) under `policy`, which must be proper.
    fn evaluate(&self, policy: &[usize]) -> Vec<Q> {
        let succ = |s: usize| -> &[(usize, Q)] {
            if s < 2 {
                &[]
            } else {
                &self.actions[s][policy[s]]
            }
        };
        let mut value = vec![Q::zero(); self.len()];
        value[EXHAUSTED] = Q::one();
        for comp in tarjan(self.len(), |s| succ(s).iter().map(|&(t, _)| t).collect()) {
            if comp.iter().any(|&s| s < 2) {
                continue;
            }
            let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let k = comp.len();
            let mut a = vec![vec![Q::zero(); k]; k];
            let mut b = vec![vec![Q::zero()]; k];
            for (r, &s) in comp.iter().enumerate() {
                a[r][r] += Q::one();
                for (t, p) in succ(s) {
                    match pos.get(t) {
                        Some(&c) => a[r][c] -= p,
                        None => b[r][0] += p * &value[*t],
                    }
                }
            }
            let x = solve(a, b).expect("proper policies give nonsingular systems");
            for (r, &s) in comp.iter().enumerate() {
                value[s] = x[r][0].clone();
            }
        }
        value
    }
}

/// Strongly connected components, each emitted after every component it can
/// reach.
fn tarjan(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut frames: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, succ(w), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(parent) = frames.last() {
                    low[parent.0] = low[parent.0].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Exact minimum, over every daemon choice and every Byzantine write, of the
/// probability that `event` holds in some configuration reached from `start`
/// within `horizon` rounds.
pub fn min_daemon_probability(
    algo: Algorithm,
    g: &Graph,
    start: &Configuration,
    horizon: usize,
    event: impl Fn(&Configuration) -> bool,
) -> Result<Q, OracleError> {
    min_daemon_probability_with_cap(algo, g, start, horizon, event, DEFAULT_MDP_CAP)
}

#[allow(clippy::needless_range_loop)]
pub fn min_daemon_probability_with_cap(
    algo: Algorithm,
    g: &Graph,
    start: &Configuration,
    horizon: usize,
    event: impl Fn(&Configuration) -> bool,
    cap: usize,
) -> Result<Q, OracleError> {
    if start.len() != g.node_count() {
        return Err(OracleError::SizeMismatch {
            expected: g.node_count(),
            found: start.len(),
        });
    }
    if g.node_count() > 64 {
        return Err(OracleError::TooLarge(g.node_count()));
    }
    if event(start) {
        return Ok(Q::one());
    }
    if horizon == 0 {
        return Ok(Q::zero());
    }
    let mdp = explore(algo, g, start, horizon, &event, cap)?;
    if mdp.actions[2].is_empty() {
        return Ok(Q::zero());
    }
    // Activating everything closes a round per transition, so the initial
    // policy is proper; strict improvement keeps it so.
    let mut policy = vec![0usize; mdp.len()];
    loop {
        let value = mdp.evaluate(&policy);
        let mut changed = false;
        for s in 2..mdp.len() {
            let score = |a: usize| -> Q { mdp.actions[s][a].iter().map(|(t, p)| p * &value[*t]).sum() };
            let current = score(policy[s]);
            let (best, best_score) = (0..mdp.actions[s].len())
                .map(|a| (a, score(a)))
                .max_by(|x, y| x.1.cmp(&y.1))
                .expect("open states have actions");
            if best_score > current {
                policy[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(Q::one() - &value[2]);
        }
    }
}
