//! EFCM: X-means cluster construction followed by time-sliced, round-robin
//! head rotation over an energy-sorted ring.
//!
//! Construction clusters the alive nodes by position, sorts each cluster's
//! members by residual energy (highest first, ties by ascending id) into a
//! ring, and makes the top of the ring the head. At every slice boundary the
//! head passes to the next alive ring entry, wrapping around, so every member
//! gets a turn. The ring order is fixed at construction.

use crate::energy::RadioParams;
use crate::error::{Error, Result};
use crate::model::{Cluster, ClusterId, NetworkState, NodeId, Point, Role, SimClock};
use crate::scenario::SelectionMode;
use crate::xmeans::{xmeans, KMeansParams};

/// Rounds a head serves before the role moves on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSlice {
    duration: u64,
}

impl TimeSlice {
    pub fn new(duration: u64) -> Result<Self> {
        if duration == 0 {
            return Err(Error::InvalidArgument(
                "time slice must be ≥ 1 round".into(),
            ));
        }
        Ok(TimeSlice { duration })
    }

    pub fn duration(&self) -> u64 {
        self.duration
    }

    pub fn is_boundary(&self, clock: SimClock) -> bool {
        clock.time.is_multiple_of(self.duration)
    }
}

/// A head telling its cluster that it is now in charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadAnnouncement {
    pub cluster: ClusterId,
    pub head: NodeId,
    pub at_time: u64,
    /// Off-schedule handover after the previous head died.
    pub forced: bool,
}

/// Charges the cost of a head broadcast: one transmission reaching the
/// farthest alive member plus one reception at every alive member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Announcer {
    pub radio: RadioParams,
    pub bits: u64,
}

impl Announcer {
    pub fn broadcast(&self, state: &mut NetworkState, head: NodeId, members: &[NodeId]) {
        let listeners: Vec<NodeId> = members
            .iter()
            .copied()
            .filter(|&m| m != head && state.node(m).alive)
            .collect();
        if listeners.is_empty() || !state.node(head).alive {
            return;
        }
        let reach = listeners
            .iter()
            .map(|&m| state.distance(head, m))
            .fold(0.0, f64::max);
        let tx = self.radio.tx_cost(self.bits, reach);
        let rx = self.radio.rx_cost(self.bits);
        let NetworkState { nodes, ledger, .. } = state;
        ledger.charge(&mut nodes[head.0], tx);
        for m in listeners {
            ledger.charge(&mut nodes[m.0], rx);
        }
    }
}

/// Clusters the alive nodes with X-means and installs one energy-sorted
/// ring per cluster, heads at the top. Each new head announces itself.
pub fn cluster_construction(
    state: &mut NetworkState,
    k_min: usize,
    k_max: usize,
    kmeans: KMeansParams,
    announcer: &Announcer,
) -> Result<Vec<HeadAnnouncement>> {
    let alive = state.alive_ids();
    if alive.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let positions: Vec<Point> = alive.iter().map(|&id| state.node(id).position).collect();
    let k_max = k_max.min(alive.len()).max(1);
    let k_min = k_min.min(k_max).max(1);
    let clustering = xmeans(&positions, k_min, k_max, &mut state.rng, kmeans)?;

    state.reset_roles();
    let now = state.clock.time;
    let mut clusters = Vec::with_capacity(clustering.k);
    for c in 0..clustering.k {
        let members: Vec<NodeId> = clustering
            .members(c)
            .into_iter()
            .map(|i| alive[i])
            .collect();
        let energies = &state.nodes;
        clusters.push(Cluster::from_members(
            ClusterId(c),
            members,
            |id| energies[id.0].energy,
            now,
        ));
    }
    for c in &clusters {
        state.node_mut(c.head).role = Role::Head;
    }
    state.clusters = clusters;

    let mut announcements = Vec::with_capacity(state.clusters.len());
    for idx in 0..state.clusters.len() {
        let (head, members) = {
            let c = &state.clusters[idx];
            (c.head, c.members.clone())
        };
        announcer.broadcast(state, head, &members);
        announcements.push(HeadAnnouncement {
            cluster: ClusterId(idx),
            head,
            at_time: now,
            forced: false,
        });
    }
    Ok(announcements)
}

/// What a head selection did to a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Unchanged,
    Rotated(HeadAnnouncement),
    /// No member is alive; the cluster is silenced for good.
    ClusterDead,
}

fn next_alive(state: &NetworkState, cluster: &Cluster, mode: SelectionMode) -> Option<usize> {
    let n = cluster.ring.len();
    match mode {
        SelectionMode::Ring => (1..=n)
            .map(|step| (cluster.cursor + step) % n)
            .find(|&i| state.node(cluster.ring[i]).alive),
        SelectionMode::LiteralMax => (0..n).find(|&i| state.node(cluster.ring[i]).alive),
    }
}

/// Moves the head role to the next eligible ring entry and announces it.
/// Keeps going if the announcement itself drains the new head.
fn hand_over(
    state: &mut NetworkState,
    cid: ClusterId,
    mode: SelectionMode,
    announcer: &Announcer,
    forced: bool,
) -> Selection {
    loop {
        let cluster = &state.clusters[cid.0];
        let Some(idx) = next_alive(state, cluster, mode) else {
            let old = cluster.head;
            state.clusters[cid.0].dead = true;
            state.node_mut(old).role = Role::Member;
            return Selection::ClusterDead;
        };
        let old = cluster.head;
        let new = cluster.ring[idx];
        let members = cluster.members.clone();
        state.node_mut(old).role = Role::Member;
        state.node_mut(new).role = Role::Head;
        {
            let c = &mut state.clusters[cid.0];
            c.cursor = idx;
            c.head = new;
        }
        announcer.broadcast(state, new, &members);
        if state.node(new).alive {
            return Selection::Rotated(HeadAnnouncement {
                cluster: cid,
                head: new,
                at_time: state.clock.time,
                forced,
            });
        }
    }
}

/// Scheduled rotation. Does nothing unless the clock sits on a slice
/// boundary after the cluster was formed.
pub fn select_head(
    state: &mut NetworkState,
    cluster: ClusterId,
    slice: TimeSlice,
    mode: SelectionMode,
    announcer: &Announcer,
) -> Selection {
    let c = &state.clusters[cluster.0];
    if c.dead || !slice.is_boundary(state.clock) || state.clock.time == c.formed_at {
        return Selection::Unchanged;
    }
    hand_over(state, cluster, mode, announcer, false)
}

/// Off-schedule rotation for a cluster whose head has died.
pub fn replace_dead_head(
    state: &mut NetworkState,
    cluster: ClusterId,
    mode: SelectionMode,
    announcer: &Announcer,
) -> Selection {
    let c = &state.clusters[cluster.0];
    if c.dead || state.node(c.head).alive {
        return Selection::Unchanged;
    }
    hand_over(state, cluster, mode, announcer, true)
}
