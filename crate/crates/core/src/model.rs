//! Nodes, clusters and the deployed network.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::EnergyLedger;
use crate::error::Result;
use crate::scenario::Scenario;

/// The pseudo-random stream every stochastic draw of a run consumes.
///
/// ChaCha8 seeded through `SeedableRng::seed_from_u64`. Draw order within
/// a run is fixed: node positions (x then y, ascending id), then cluster
/// construction (k-means initial centroid sampling), then per round the
/// protocol phase (LEACH/HEED coin flips, ascending id) followed by one
/// fault draw per serving head in cluster order.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Planar coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Euclidean distance in meters.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Member,
    Head,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
    /// Residual energy in joules, never negative.
    pub energy: f64,
    pub alive: bool,
    pub role: Role,
}

impl Node {
    pub fn new(id: NodeId, position: Point, energy: f64) -> Self {
        Node {
            id,
            position,
            energy,
            alive: energy > 0.0,
            role: Role::Member,
        }
    }

    pub fn is_head(&self) -> bool {
        self.role == Role::Head
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: ClusterId,
    pub members: Vec<NodeId>,
    /// Members ordered by energy at construction time, highest first.
    /// Equal energies order by ascending id.
    pub ring: Vec<NodeId>,
    pub cursor: usize,
    pub head: NodeId,
    /// Round at which the cluster was formed. No scheduled rotation happens
    /// at this time; the construction already picked the head.
    pub formed_at: u64,
    /// Set once every member has died. A dead cluster carries no traffic.
    pub dead: bool,
}

impl Cluster {
    /// Builds a cluster whose ring is `members` sorted by `energy_of`
    /// (descending, ties by ascending id) with the head at the top.
    pub fn from_members(
        id: ClusterId,
        mut members: Vec<NodeId>,
        energy_of: impl Fn(NodeId) -> f64,
        formed_at: u64,
    ) -> Self {
        assert!(!members.is_empty(), "cluster needs at least one member");
        members.sort();
        let mut ring = members.clone();
        ring.sort_by(|a, b| energy_of(*b).total_cmp(&energy_of(*a)).then(a.cmp(b)));
        let head = ring[0];
        Cluster {
            id,
            members,
            ring,
            cursor: 0,
            head,
            formed_at,
            dead: false,
        }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.members.binary_search(&node).is_ok()
    }
}

/// Round counter. One round stands for one simulated second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimClock {
    pub time: u64,
}

impl SimClock {
    pub fn tick(&mut self) {
        self.time += 1;
    }
}

pub struct NetworkState {
    pub nodes: Vec<Node>,
    pub clusters: Vec<Cluster>,
    pub clock: SimClock,
    pub base_station: Point,
    pub rng: SimRng,
    pub ledger: EnergyLedger,
}

impl fmt::Debug for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NetworkState")
            .field("nodes", &self.nodes.len())
            .field("clusters", &self.clusters.len())
            .field("clock", &self.clock.time)
            .field("base_station", &self.base_station)
            .finish()
    }
}

impl NetworkState {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0]
    }

    pub fn alive_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.alive)
            .map(|n| n.id)
            .collect()
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    pub fn total_energy(&self) -> f64 {
        self.nodes.iter().map(|n| n.energy).sum()
    }

    pub fn mean_energy(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            self.total_energy() / self.nodes.len() as f64
        }
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        distance(self.node(a).position, self.node(b).position)
    }

    pub fn distance_to_base(&self, a: NodeId) -> f64 {
        distance(self.node(a).position, self.base_station)
    }

    /// Drops every node back to the member role.
    pub fn reset_roles(&mut self) {
        for n in &mut self.nodes {
            n.role = Role::Member;
        }
    }
}

/// Places `scenario.node_count` nodes uniformly over the area, all alive
/// members holding `initial_energy`. No clusters yet; clock at zero.
pub fn deploy_nodes(scenario: &Scenario) -> Result<NetworkState> {
    scenario.validate()?;
    let mut rng = seeded_rng(scenario.seed);
    let (w, h) = (scenario.area_width, scenario.area_height);
    let nodes: Vec<Node> = (0..scenario.node_count)
        .map(|i| {
            let x = rng.random_range(0.0..w);
            let y = rng.random_range(0.0..h);
            Node::new(NodeId(i), Point::new(x, y), scenario.initial_energy)
        })
        .collect();
    let ledger = EnergyLedger::new(nodes.iter().map(|n| n.energy).sum());
    Ok(NetworkState {
        nodes,
        clusters: Vec::new(),
        clock: SimClock::default(),
        base_station: scenario.base_station(),
        rng,
        ledger,
    })
}
