//! The round loop and metric collection.
//!
//! One round, in order:
//! 1. protocol phase: EFCM slice-boundary rotation, or LEACH/HEED election;
//! 2. every alive node senses `packets_per_node_per_round` packets; members
//!    transmit each to their head, which pays one reception per packet;
//! 3. each head fuses what it received (`e_da` per received bit) and, unless
//!    it is dead or suffers a transient fault, uplinks one fused packet per
//!    batch to the base station;
//! 4. idle drain, EFCM heads that died this round are replaced off schedule,
//!    the clock advances.
//!
//! Throughput counts sensed data delivered to the base station: a fused
//! packet that arrives delivers every packet folded into it.

use rand::Rng;

use crate::baselines::{heed_round, leach_round, LeachMemory};
use crate::efcm::{
    cluster_construction, replace_dead_head, select_head, Announcer, HeadAnnouncement, Selection,
    TimeSlice,
};
use crate::energy::EnergyLedger;
use crate::error::{Error, Result};
use crate::model::{deploy_nodes, ClusterId, NetworkState, NodeId};
use crate::par::{self, Execution};
use crate::scenario::{Protocol, Scenario};

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Clock value while the round ran.
    pub time: u64,
    pub sent: u64,
    pub delivered: u64,
    pub delivered_bits: u64,
    /// Serving heads that were dead or faulted during the round.
    pub ch_failures: u64,
    /// Heads that served traffic this round.
    pub heads: Vec<NodeId>,
    pub faulted: Vec<NodeId>,
    pub announcements: Vec<HeadAnnouncement>,
    pub alive: usize,
    pub total_energy: f64,
}

/// Metrics at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub time: u64,
    /// Cumulative delivered bits over elapsed time (bits/s).
    pub throughput_bps: f64,
    /// Bits delivered since the previous checkpoint over the interval.
    pub throughput_interval_bps: f64,
    /// Cumulative delivered / sent; 1 when nothing was sent.
    pub pdr: f64,
    pub mean_residual_energy: f64,
    pub ch_failures: u64,
    pub delivered_bits: u64,
    pub sent: u64,
    pub delivered: u64,
    pub alive: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub label: String,
    pub seed: u64,
    pub initial_mean_energy: f64,
    pub records: Vec<Checkpoint>,
}

/// A finished run with its per-round trace and energy ledger.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub series: MetricsSeries,
    pub rounds: Vec<RoundRecord>,
    pub ledger: EnergyLedger,
    pub residual_total: f64,
    /// Clusters installed by EFCM construction (0 for the baselines).
    pub constructed_clusters: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    sent: u64,
    delivered: u64,
    delivered_bits: u64,
    ch_failures: u64,
}

/// A scenario being simulated round by round.
pub struct Simulation {
    scenario: Scenario,
    state: NetworkState,
    slice: TimeSlice,
    announcer: Announcer,
    leach: LeachMemory,
    direct: Vec<NodeId>,
    totals: Totals,
    construction: Vec<HeadAnnouncement>,
}

impl Simulation {
    /// Deploys the network and, for EFCM, constructs the clusters at time 0.
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut state = deploy_nodes(scenario)?;
        let announcer = Announcer {
            radio: scenario.radio,
            bits: scenario.traffic.announcement_bits,
        };
        let mut construction = Vec::new();
        if scenario.protocol == Protocol::Efcm && state.alive_count() > 0 {
            let k_max = scenario.k_max_for(state.alive_count());
            construction = cluster_construction(
                &mut state,
                scenario.xmeans.k_min,
                k_max,
                scenario.xmeans.kmeans_params(),
                &announcer,
            )?;
        }
        Ok(Simulation {
            slice: TimeSlice::new(scenario.time_slice)?,
            leach: LeachMemory::new(state.nodes.len()),
            scenario: scenario.clone(),
            state,
            announcer,
            direct: Vec::new(),
            totals: Totals::default(),
            construction,
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Announcements made while constructing EFCM clusters.
    pub fn construction_announcements(&self) -> &[HeadAnnouncement] {
        &self.construction
    }

    fn protocol_phase(&mut self, announcements: &mut Vec<HeadAnnouncement>) {
        let sc = &self.scenario;
        let state = &mut self.state;
        match sc.protocol {
            Protocol::Efcm => {
                for idx in 0..state.clusters.len() {
                    let id = ClusterId(idx);
                    if let Selection::Rotated(a) =
                        replace_dead_head(state, id, sc.selection_mode, &self.announcer)
                    {
                        announcements.push(a);
                    }
                    if let Selection::Rotated(a) =
                        select_head(state, id, self.slice, sc.selection_mode, &self.announcer)
                    {
                        announcements.push(a);
                    }
                }
            }
            Protocol::Leach => {
                let round = state.clock.time;
                let e = leach_round(state, &sc.leach, round, &mut self.leach, &self.announcer);
                self.direct = e.direct;
            }
            Protocol::Heed => {
                heed_round(
                    state,
                    &sc.heed,
                    sc.heed_e_max(),
                    sc.radio_range,
                    &self.announcer,
                );
                self.direct.clear();
            }
        }
    }

    /// Runs one round and advances the clock.
    pub fn step(&mut self) -> RoundRecord {
        let time = self.state.clock.time;
        let mut announcements = Vec::new();
        self.protocol_phase(&mut announcements);

        let bits = self.scenario.traffic.packet_bits;
        let batches = self.scenario.traffic.packets_per_node_per_round as usize;
        let radio = self.scenario.radio;
        let fault_prob = self.scenario.fault.head_fault_prob;

        let mut round = RoundRecord {
            time,
            sent: 0,
            delivered: 0,
            delivered_bits: 0,
            ch_failures: 0,
            heads: Vec::new(),
            faulted: Vec::new(),
            announcements: Vec::new(),
            alive: 0,
            total_energy: 0.0,
        };
        let mut died_heads = Vec::new();

        let state = &mut self.state;
        for idx in 0..state.clusters.len() {
            if state.clusters[idx].dead {
                continue;
            }
            let head = state.clusters[idx].head;
            let members: Vec<NodeId> = state.clusters[idx]
                .members
                .iter()
                .copied()
                .filter(|&m| m != head && state.node(m).alive)
                .collect();
            let head_alive_at_start = state.node(head).alive;
            if !head_alive_at_start && members.is_empty() {
                continue;
            }
            round.heads.push(head);
            let faulted = head_alive_at_start && state.rng.random::<f64>() < fault_prob;

            let mut batch_counts = vec![0u64; batches];
            let mut received_bits = 0u64;
            let to_head: Vec<f64> = members.iter().map(|&m| state.distance(m, head)).collect();
            for (&m, &d) in members.iter().zip(&to_head) {
                for count in batch_counts.iter_mut() {
                    if !state.node(m).alive {
                        break;
                    }
                    round.sent += 1;
                    let NetworkState { nodes, ledger, .. } = &mut *state;
                    if !ledger
                        .charge(&mut nodes[m.0], radio.tx_cost(bits, d))
                        .completed()
                    {
                        continue;
                    }
                    if nodes[head.0].alive
                        && ledger
                            .charge(&mut nodes[head.0], radio.rx_cost(bits))
                            .completed()
                    {
                        *count += 1;
                        received_bits += bits;
                    }
                }
            }
            if state.node(head).alive {
                for count in batch_counts.iter_mut() {
                    round.sent += 1;
                    *count += 1;
                }
            }

            let mut head_ok = state.node(head).alive;
            if head_ok && received_bits > 0 {
                let NetworkState { nodes, ledger, .. } = &mut *state;
                head_ok = ledger
                    .charge(&mut nodes[head.0], radio.aggregation_cost(received_bits))
                    .completed();
            }
            if head_ok && !faulted {
                let d = state.distance_to_base(head);
                for &count in &batch_counts {
                    if count == 0 {
                        continue;
                    }
                    let NetworkState { nodes, ledger, .. } = &mut *state;
                    if !ledger
                        .charge(&mut nodes[head.0], radio.tx_cost(bits, d))
                        .completed()
                    {
                        break;
                    }
                    round.delivered += count;
                    round.delivered_bits += count * bits;
                }
            }
            let head_alive_at_end = state.node(head).alive;
            if faulted {
                round.faulted.push(head);
            }
            if faulted || !head_alive_at_end {
                round.ch_failures += 1;
            }
            if head_alive_at_start && !head_alive_at_end {
                died_heads.push(ClusterId(idx));
            }
        }

        for &id in &self.direct {
            let d = state.distance_to_base(id);
            for _ in 0..batches {
                if !state.node(id).alive {
                    break;
                }
                round.sent += 1;
                let NetworkState { nodes, ledger, .. } = &mut *state;
                if ledger
                    .charge(&mut nodes[id.0], radio.tx_cost(bits, d))
                    .completed()
                {
                    round.delivered += 1;
                    round.delivered_bits += bits;
                }
            }
        }

        if radio.e_idle > 0.0 {
            let NetworkState { nodes, ledger, .. } = &mut *state;
            for n in nodes.iter_mut().filter(|n| n.alive) {
                ledger.charge(n, radio.e_idle);
            }
        }

        if self.scenario.protocol == Protocol::Efcm {
            for id in died_heads {
                if let Selection::Rotated(a) =
                    replace_dead_head(state, id, self.scenario.selection_mode, &self.announcer)
                {
                    announcements.push(a);
                }
            }
        }

        state.clock.tick();
        round.announcements = announcements;
        round.alive = state.alive_count();
        round.total_energy = state.total_energy();

        self.totals.sent += round.sent;
        self.totals.delivered += round.delivered;
        self.totals.delivered_bits += round.delivered_bits;
        self.totals.ch_failures += round.ch_failures;
        round
    }

    fn checkpoint(&self, previous: Option<&Checkpoint>) -> Checkpoint {
        let time = self.state.clock.time;
        let t = self.totals;
        let (prev_time, prev_bits) = previous.map_or((0, 0), |c| (c.time, c.delivered_bits));
        Checkpoint {
            time,
            throughput_bps: t.delivered_bits as f64 / time as f64,
            throughput_interval_bps: (t.delivered_bits - prev_bits) as f64
                / (time - prev_time) as f64,
            pdr: if t.sent == 0 {
                1.0
            } else {
                t.delivered as f64 / t.sent as f64
            },
            mean_residual_energy: self.state.mean_energy(),
            ch_failures: t.ch_failures,
            delivered_bits: t.delivered_bits,
            sent: t.sent,
            delivered: t.delivered,
            alive: self.state.alive_count(),
        }
    }

    /// Runs the remaining rounds of the scenario.
    pub fn finish(mut self) -> RunOutcome {
        let interval = self.scenario.checkpoint_interval;
        let mut records: Vec<Checkpoint> = Vec::new();
        let mut rounds = Vec::with_capacity(self.scenario.duration as usize);
        while self.state.clock.time < self.scenario.duration {
            rounds.push(self.step());
            if self.state.clock.time.is_multiple_of(interval) {
                let cp = self.checkpoint(records.last());
                records.push(cp);
            }
        }
        let initial_mean_energy = if self.state.nodes.is_empty() {
            0.0
        } else {
            self.scenario.initial_energy
        };
        RunOutcome {
            series: MetricsSeries {
                label: self.scenario.label(),
                seed: self.scenario.seed,
                initial_mean_energy,
                records,
            },
            rounds,
            residual_total: self.state.total_energy(),
            constructed_clusters: self.construction.len(),
            ledger: self.state.ledger,
        }
    }
}

/// Simulates `scenario` and returns its checkpoint series.
pub fn run(scenario: &Scenario) -> Result<MetricsSeries> {
    run_detailed(scenario).map(|o| o.series)
}

pub fn run_detailed(scenario: &Scenario) -> Result<RunOutcome> {
    Ok(Simulation::new(scenario)?.finish())
}

/// Runs every (scenario, seed) pair, scenario-major. Each run owns its own
/// stream seeded from its seed, so the execution mode never changes results.
pub fn run_all(scenarios: &[Scenario], seeds: &[u64], exec: Execution) -> Result<Vec<RunOutcome>> {
    if seeds.is_empty() {
        return Err(
            crate::error::ConfigError::invariant("seeds", "at least one seed is required").into(),
        );
    }
    for s in scenarios {
        s.validate()?;
    }
    let jobs: Vec<Scenario> = scenarios
        .iter()
        .flat_map(|s| {
            seeds
                .iter()
                .map(move |&seed| Scenario { seed, ..s.clone() })
        })
        .collect();
    par::map(exec, &jobs, run_detailed).into_iter().collect()
}

/// Mean and population standard deviation across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Summary::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub time: u64,
    pub throughput_bps: Summary,
    pub throughput_interval_bps: Summary,
    pub pdr: Summary,
    pub mean_residual_energy: Summary,
    pub ch_failures: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub label: String,
    pub seeds: usize,
    pub rows: Vec<AggregateRow>,
}

/// Per-protocol checkpoint statistics across seeds, aligned on checkpoint
/// times.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub series: Vec<AggregateSeries>,
}

impl ComparisonTable {
    pub fn get(&self, label: &str) -> Option<&AggregateSeries> {
        self.series.iter().find(|s| s.label == label)
    }
}

pub fn aggregate(runs: &[RunOutcome], scenarios: usize) -> Result<ComparisonTable> {
    if scenarios == 0 {
        return Ok(ComparisonTable { series: Vec::new() });
    }
    let per = runs.len() / scenarios;
    let times: Vec<u64> = runs
        .first()
        .map(|r| r.series.records.iter().map(|c| c.time).collect())
        .unwrap_or_default();
    for r in runs {
        let t: Vec<u64> = r.series.records.iter().map(|c| c.time).collect();
        if t != times {
            return Err(Error::InvalidArgument(
                "scenarios produce different checkpoint times".into(),
            ));
        }
    }
    let series = runs
        .chunks(per.max(1))
        .map(|group| {
            let rows = times
                .iter()
                .enumerate()
                .map(|(i, &time)| {
                    let col = |f: fn(&Checkpoint) -> f64| -> Summary {
                        let v: Vec<f64> = group.iter().map(|r| f(&r.series.records[i])).collect();
                        Summary::of(&v)
                    };
                    AggregateRow {
                        time,
                        throughput_bps: col(|c| c.throughput_bps),
                        throughput_interval_bps: col(|c| c.throughput_interval_bps),
                        pdr: col(|c| c.pdr),
                        mean_residual_energy: col(|c| c.mean_residual_energy),
                        ch_failures: col(|c| c.ch_failures as f64),
                    }
                })
                .collect();
            AggregateSeries {
                label: group[0].series.label.clone(),
                seeds: group.len(),
                rows,
            }
        })
        .collect();
    Ok(ComparisonTable { series })
}

/// Runs every scenario under every seed and aggregates per protocol.
pub fn compare(scenarios: &[Scenario], seeds: &[u64], exec: Execution) -> Result<ComparisonTable> {
    let runs = run_all(scenarios, seeds, exec)?;
    aggregate(&runs, scenarios.len())
}
