use efcm_core::engine::{run_all, Simulation};
use efcm_core::{run_detailed, Execution, Protocol, Scenario, SelectionMode};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        0usize..3,
        any::<bool>(),
        1usize..40,
        any::<u64>(),
        1u64..6,
        0.0f64..0.3,
        prop_oneof![Just(0.5), 0.001f64..0.02],
    )
        .prop_map(|(p, literal, n, seed, slice, fault, energy)| {
            let mut s = Scenario {
                protocol: Protocol::ALL[p],
                selection_mode: if literal {
                    SelectionMode::LiteralMax
                } else {
                    SelectionMode::Ring
                },
                node_count: n,
                seed,
                time_slice: slice,
                initial_energy: energy,
                duration: 30,
                checkpoint_interval: 5,
                ..Scenario::default()
            };
            s.fault.head_fault_prob = fault;
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn round_invariants_hold(s in scenario()) {
        let mut sim = Simulation::new(&s).unwrap();
        let mut energies: Vec<f64> = sim.state().nodes.iter().map(|n| n.energy).collect();
        let mut alive: Vec<bool> = sim.state().nodes.iter().map(|n| n.alive).collect();
        while sim.state().clock.time < s.duration {
            let r = sim.step();
            prop_assert!(r.delivered <= r.sent);
            prop_assert!(r.faulted.len() as u64 <= r.ch_failures);
            for (i, n) in sim.state().nodes.iter().enumerate() {
                prop_assert!(n.energy >= 0.0 && n.energy <= energies[i]);
                prop_assert!(alive[i] || !n.alive, "node {} revived", i);
                prop_assert_eq!(n.alive, n.energy > 0.0);
                energies[i] = n.energy;
                alive[i] = n.alive;
            }
        }
        let out = sim.finish();
        prop_assert!(out.ledger.relative_error(out.residual_total) <= 1e-9);
        let mut prev = None;
        for c in &out.series.records {
            prop_assert!((0.0..=1.0).contains(&c.pdr));
            prop_assert!(c.delivered <= c.sent);
            if let Some((bits, fails)) = prev {
                prop_assert!(c.delivered_bits >= bits);
                prop_assert!(c.ch_failures >= fails);
            }
            prev = Some((c.delivered_bits, c.ch_failures));
        }
    }
}

#[test]
fn depleted_network_keeps_ledger_balanced() {
    for protocol in Protocol::ALL {
        let s = Scenario {
            protocol,
            initial_energy: 0.002,
            duration: 60,
            ..Scenario::default()
        };
        let out = run_detailed(&s).unwrap();
        assert!(
            !out.ledger.clamp_log.is_empty(),
            "{protocol}: expected clamped charges"
        );
        assert!(out.ledger.relative_error(out.residual_total) <= 1e-9);
        let clamped: f64 = out.ledger.clamp_log.iter().map(|&(_, e)| e).sum();
        assert!((clamped - out.ledger.clamped).abs() <= 1e-12);
        assert!(out.series.records.last().unwrap().alive < s.node_count);
    }
}

#[test]
fn dead_network_stops_delivering() {
    let s = Scenario {
        initial_energy: 0.0005,
        duration: 100,
        ..Scenario::default()
    };
    let out = run_detailed(&s).unwrap();
    let last = out.rounds.last().unwrap();
    assert_eq!(last.alive, 0);
    assert_eq!(last.delivered, 0);
}

#[test]
fn parallel_and_serial_runs_agree() {
    let scenarios: Vec<Scenario> = Protocol::ALL
        .iter()
        .map(|&protocol| Scenario {
            protocol,
            node_count: 50,
            ..Scenario::default()
        })
        .collect();
    let seeds = [3, 9, 27];
    let a = run_all(&scenarios, &seeds, Execution::Serial).unwrap();
    let b = run_all(&scenarios, &seeds, Execution::Parallel).unwrap();
    assert_eq!(a.len(), 9);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.series, y.series);
        assert_eq!(x.rounds, y.rounds);
    }
    // scenario-major order with the seed overridden per job
    assert_eq!(a[4].series.seed, 9);
    assert_eq!(a[4].series.label, "leach");
}

#[test]
fn efcm_heads_come_from_their_cluster() {
    let s = Scenario {
        node_count: 60,
        duration: 40,
        ..Scenario::default()
    };
    let mut sim = Simulation::new(&s).unwrap();
    while sim.state().clock.time < s.duration {
        sim.step();
        for c in &sim.state().clusters {
            assert!(c.contains(c.head));
            assert_eq!(c.ring.len(), c.members.len());
        }
    }
}
