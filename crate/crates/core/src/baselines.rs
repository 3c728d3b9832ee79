//! LEACH and HEED head election, re-run every round.
//!
//! Both are reduced to the single-hop model the simulator uses for EFCM:
//! members talk to their head, heads talk to the base station. Control
//! traffic (head advertisements, HEED bids, join requests) is charged with
//! the same announcement packet size EFCM uses.

use rand::Rng;

use crate::efcm::Announcer;
use crate::model::{Cluster, ClusterId, NetworkState, NodeId, Role};
use crate::scenario::{HeedParams, LeachParams};

/// Outcome of one election round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Election {
    pub heads: Vec<NodeId>,
    /// Alive nodes without a head this round; they send straight to the
    /// base station.
    pub direct: Vec<NodeId>,
    /// HEED doubling iterations used (1 for LEACH).
    pub iterations: usize,
}

/// Joins every alive non-head to its nearest head (ties by lower head id)
/// when `within` allows it, installs the clusters on `state` and marks the
/// roles. Returns nodes that found no head.
fn form_clusters(
    state: &mut NetworkState,
    heads: &[NodeId],
    within: impl Fn(f64) -> bool,
) -> Vec<NodeId> {
    state.reset_roles();
    let mut members: Vec<Vec<NodeId>> = heads.iter().map(|&h| vec![h]).collect();
    let mut orphans = Vec::new();
    for id in state.alive_ids() {
        if heads.contains(&id) {
            continue;
        }
        let best = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| (i, state.distance(id, h)))
            .filter(|&(_, d)| within(d))
            .fold(None::<(usize, f64)>, |acc, (i, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((i, d)),
            });
        match best {
            Some((i, _)) => members[i].push(id),
            None => orphans.push(id),
        }
    }
    let now = state.clock.time;
    let clusters: Vec<Cluster> = heads
        .iter()
        .zip(members)
        .enumerate()
        .map(|(i, (&head, m))| {
            let nodes = &state.nodes;
            let mut c = Cluster::from_members(ClusterId(i), m, |id| nodes[id.0].energy, now);
            c.cursor = c
                .ring
                .iter()
                .position(|&r| r == head)
                .expect("head in ring");
            c.head = head;
            c
        })
        .collect();
    for &h in heads {
        state.node_mut(h).role = Role::Head;
    }
    state.clusters = clusters;
    orphans
}

/// Each member sends one join request to its head.
fn charge_joins(state: &mut NetworkState, announcer: &Announcer) {
    if announcer.bits == 0 {
        return;
    }
    let pairs: Vec<(NodeId, NodeId, f64)> = state
        .clusters
        .iter()
        .flat_map(|c| {
            c.members
                .iter()
                .filter(move |&&m| m != c.head)
                .map(move |&m| (m, c.head))
        })
        .map(|(m, h)| (m, h, state.distance(m, h)))
        .collect();
    for (m, h, d) in pairs {
        if !state.node(m).alive {
            continue;
        }
        let tx = announcer.radio.tx_cost(announcer.bits, d);
        let NetworkState { nodes, ledger, .. } = state;
        let sent = ledger.charge(&mut nodes[m.0], tx);
        if sent.completed() && nodes[h.0].alive {
            ledger.charge(&mut nodes[h.0], announcer.radio.rx_cost(announcer.bits));
        }
    }
}

/// Tracks which nodes already served in the current LEACH epoch.
#[derive(Debug, Clone, Default)]
pub struct LeachMemory {
    last_epoch_as_head: Vec<Option<u64>>,
}

impl LeachMemory {
    pub fn new(nodes: usize) -> Self {
        LeachMemory {
            last_epoch_as_head: vec![None; nodes],
        }
    }
}

pub fn epoch_length(p: f64) -> u64 {
    (1.0 / p).ceil() as u64
}

/// LEACH election threshold for a node that has not served this epoch.
pub fn leach_threshold(p: f64, round: u64) -> f64 {
    let r = (round % epoch_length(p)) as f64;
    let denom = 1.0 - p * r;
    if denom <= p {
        1.0
    } else {
        (p / denom).min(1.0)
    }
}

/// One LEACH round: self-election against the epoch threshold, then every
/// alive non-head joins the nearest head.
pub fn leach_round(
    state: &mut NetworkState,
    params: &LeachParams,
    round: u64,
    memory: &mut LeachMemory,
    announcer: &Announcer,
) -> Election {
    if memory.last_epoch_as_head.len() != state.nodes.len() {
        *memory = LeachMemory::new(state.nodes.len());
    }
    let epoch = round / epoch_length(params.p);
    let threshold = leach_threshold(params.p, round);
    let mut heads = Vec::new();
    for i in 0..state.nodes.len() {
        if !state.nodes[i].alive || memory.last_epoch_as_head[i] == Some(epoch) {
            continue;
        }
        let u: f64 = state.rng.random();
        if u < threshold {
            heads.push(state.nodes[i].id);
            memory.last_epoch_as_head[i] = Some(epoch);
        }
    }

    let direct = if heads.is_empty() {
        state.reset_roles();
        state.clusters.clear();
        state.alive_ids()
    } else {
        let orphans = form_clusters(state, &heads, |_| true);
        debug_assert!(orphans.is_empty());
        for idx in 0..state.clusters.len() {
            let (h, m) = (
                state.clusters[idx].head,
                state.clusters[idx].members.clone(),
            );
            announcer.broadcast(state, h, &m);
        }
        charge_joins(state, announcer);
        Vec::new()
    };
    Election {
        heads,
        direct,
        iterations: 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bid {
    None,
    Tentative,
    Final,
}

/// Initial HEED head probability for a node holding `energy`.
pub fn heed_initial_prob(params: &HeedParams, e_max: f64, energy: f64) -> f64 {
    (params.c_prob * energy / e_max).max(params.p_min).min(1.0)
}

/// Upper bound on HEED doubling iterations.
pub fn heed_iteration_bound(p_min: f64) -> usize {
    (1.0 / p_min).log2().ceil() as usize + 1
}

/// One HEED round. Nodes with no tentative head within `cluster_range`
/// bid with their current probability, probabilities double each
/// iteration, and a node finishes once its probability has reached one.
/// Non-heads join the nearest final head in range; anyone left over heads
/// its own cluster.
pub fn heed_round(
    state: &mut NetworkState,
    params: &HeedParams,
    e_max: f64,
    cluster_range: f64,
    announcer: &Announcer,
) -> Election {
    let n = state.nodes.len();
    let alive: Vec<usize> = (0..n).filter(|&i| state.nodes[i].alive).collect();
    let mut prob = vec![0.0; n];
    for &i in &alive {
        prob[i] = heed_initial_prob(params, e_max, state.nodes[i].energy);
    }
    let mut bid = vec![Bid::None; n];
    let mut done = vec![false; n];
    let mut iterations = 0;
    let in_range = |state: &NetworkState, a: usize, b: usize| {
        state.nodes[a].position.distance_sq(state.nodes[b].position)
            <= cluster_range * cluster_range
    };

    while alive.iter().any(|&i| !done[i]) {
        iterations += 1;
        let bidders: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&i| bid[i] != Bid::None)
            .collect();
        let mut announcements = Vec::new();
        for &i in &alive {
            if done[i] {
                continue;
            }
            match bid[i] {
                Bid::Tentative if prob[i] >= 1.0 => {
                    bid[i] = Bid::Final;
                    announcements.push(i);
                }
                Bid::None => {
                    let covered = bidders.iter().any(|&h| h != i && in_range(state, i, h));
                    if !covered {
                        if prob[i] >= 1.0 {
                            bid[i] = Bid::Final;
                            announcements.push(i);
                        } else if state.rng.random::<f64>() < prob[i] {
                            bid[i] = Bid::Tentative;
                            announcements.push(i);
                        }
                    }
                }
                _ => {}
            }
            let previous = prob[i];
            prob[i] = (prob[i] * 2.0).min(1.0);
            if previous >= 1.0 {
                done[i] = true;
            }
        }
        if announcer.bits > 0 {
            for i in announcements {
                if !state.nodes[i].alive {
                    continue;
                }
                let tx = announcer.radio.tx_cost(announcer.bits, cluster_range);
                let rx = announcer.radio.rx_cost(announcer.bits);
                let listeners: Vec<usize> = alive
                    .iter()
                    .copied()
                    .filter(|&j| j != i && state.nodes[j].alive && in_range(state, i, j))
                    .collect();
                let NetworkState { nodes, ledger, .. } = state;
                ledger.charge(&mut nodes[i], tx);
                for j in listeners {
                    ledger.charge(&mut nodes[j], rx);
                }
            }
        }
    }

    let mut heads: Vec<NodeId> = alive
        .iter()
        .copied()
        .filter(|&i| bid[i] != Bid::None && state.nodes[i].alive)
        .map(|i| state.nodes[i].id)
        .collect();
    let orphans = form_clusters(state, &heads, |d| d <= cluster_range);
    if !orphans.is_empty() {
        heads.extend(orphans);
        heads.sort();
        let orphans = form_clusters(state, &heads, |d| d <= cluster_range);
        debug_assert!(orphans.is_empty());
    }
    charge_joins(state, announcer);
    Election {
        heads,
        direct: Vec::new(),
        iterations,
    }
}
