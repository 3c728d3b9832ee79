//! First-order radio model and residual-energy bookkeeping.

use crate::model::{Node, Role};

/// Radio and processing constants.
///
/// Transmission costs `e_elec` per bit plus an amplifier term that is
/// quadratic in distance below the crossover `d0` and quartic at or above
/// it. Reception costs `e_elec` per bit regardless of distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// J/bit spent by transmitter or receiver electronics.
    pub e_elec: f64,
    /// J/bit/m² free-space amplifier.
    pub eps_fs: f64,
    /// J/bit/m⁴ multipath amplifier.
    pub eps_mp: f64,
    /// J/bit spent fusing data at a head.
    pub e_da: f64,
    /// J drawn from every alive node per round regardless of traffic.
    pub e_idle: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            e_elec: 50e-9,
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
            e_da: 5e-9,
            e_idle: 0.0,
        }
    }
}

impl RadioParams {
    /// Crossover distance between the free-space and multipath regimes.
    pub fn d0(&self) -> f64 {
        if self.eps_mp > 0.0 {
            (self.eps_fs / self.eps_mp).sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn tx_cost(&self, bits: u64, d: f64) -> f64 {
        let b = bits as f64;
        if d < self.d0() {
            self.e_elec * b + self.eps_fs * b * d * d
        } else {
            self.e_elec * b + self.eps_mp * b * d.powi(4)
        }
    }

    pub fn rx_cost(&self, bits: u64) -> f64 {
        self.e_elec * bits as f64
    }

    pub fn aggregation_cost(&self, bits: u64) -> f64 {
        self.e_da * bits as f64
    }
}

/// Result of a single charge against a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge {
    /// Energy actually removed from the node.
    pub deducted: f64,
    /// Part of the request the node could not cover.
    pub shortfall: f64,
}

impl Charge {
    /// The node covered the full request.
    pub fn completed(&self) -> bool {
        self.shortfall == 0.0
    }
}

/// Deducts `amount` joules, clamping at zero. A node that reaches zero is
/// dead and loses any head role.
pub fn charge(node: &mut Node, amount: f64) -> Charge {
    debug_assert!(amount >= 0.0, "negative charge {amount}");
    if amount <= 0.0 {
        return Charge {
            deducted: 0.0,
            shortfall: 0.0,
        };
    }
    let deducted = amount.min(node.energy);
    let shortfall = amount - deducted;
    node.energy -= deducted;
    if node.energy <= 0.0 {
        node.energy = 0.0;
        node.alive = false;
        node.role = Role::Member;
    }
    Charge {
        deducted,
        shortfall,
    }
}

/// Running totals used to check that every joule that left the network was
/// charged for.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub initial_total: f64,
    /// Sum of requested amounts.
    pub charged: f64,
    /// Sum of the parts of requests that exceeded a node's residual energy.
    pub clamped: f64,
    /// Individual clamp events: (node index, shortfall).
    pub clamp_log: Vec<(usize, f64)>,
}

impl EnergyLedger {
    pub fn new(initial_total: f64) -> Self {
        EnergyLedger {
            initial_total,
            ..Default::default()
        }
    }

    /// Charges `node` and records the request.
    pub fn charge(&mut self, node: &mut Node, amount: f64) -> Charge {
        let c = charge(node, amount);
        self.charged += amount;
        if c.shortfall > 0.0 {
            self.clamped += c.shortfall;
            self.clamp_log.push((node.id.0, c.shortfall));
        }
        c
    }

    /// Energy the ledger says has left the network.
    pub fn accounted_decrease(&self) -> f64 {
        self.charged - self.clamped
    }

    /// Relative gap between the ledger and an observed residual total.
    pub fn relative_error(&self, residual_total: f64) -> f64 {
        let observed = self.initial_total - residual_total;
        let diff = (observed - self.accounted_decrease()).abs();
        diff / self.initial_total.abs().max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, Point};
    use approx::assert_relative_eq;

    fn node(e: f64) -> Node {
        Node::new(NodeId(0), Point::default(), e)
    }

    #[test]
    fn tx_cost_examples() {
        let p = RadioParams::default();
        assert_eq!(p.tx_cost(0, 10.0), 0.0);
        // 1000 * 50e-9 + 10e-12 * 1000 * 100
        assert_relative_eq!(p.tx_cost(1000, 10.0), 5.1e-5, max_relative = 1e-12);
    }

    #[test]
    fn tx_cost_uses_multipath_at_d0() {
        let p = RadioParams::default();
        let d0 = p.d0();
        let expected = p.e_elec * 100.0 + p.eps_mp * 100.0 * d0.powi(4);
        assert_eq!(p.tx_cost(100, d0), expected);
        let below = d0 * (1.0 - 1e-12);
        let fs = p.e_elec * 100.0 + p.eps_fs * 100.0 * below * below;
        assert_eq!(p.tx_cost(100, below), fs);
    }

    #[test]
    fn d0_matches_constants() {
        let p = RadioParams::default();
        assert_relative_eq!(
            p.d0(),
            (10e-12f64 / 0.0013e-12).sqrt(),
            max_relative = 1e-15
        );
        let no_mp = RadioParams { eps_mp: 0.0, ..p };
        assert!(no_mp.d0().is_infinite());
    }

    #[test]
    fn rx_cost_examples() {
        let p = RadioParams::default();
        assert_eq!(p.rx_cost(0), 0.0);
        assert_relative_eq!(p.rx_cost(1000), 5.0e-5, max_relative = 1e-12);
    }

    #[test]
    fn charge_arithmetic() {
        let mut n = node(0.5);
        let c = charge(&mut n, 0.2);
        assert!(c.completed());
        assert_relative_eq!(n.energy, 0.3, max_relative = 1e-12);
        assert!(n.alive);
    }

    #[test]
    fn charge_clamps_and_kills() {
        let mut n = node(0.1);
        n.role = Role::Head;
        let c = charge(&mut n, 0.5);
        assert_eq!(n.energy, 0.0);
        assert!(!n.alive);
        assert_eq!(n.role, Role::Member);
        assert_relative_eq!(c.shortfall, 0.4, max_relative = 1e-12);
    }

    #[test]
    fn charge_zero_is_identity() {
        let mut n = node(0.5);
        let before = n.clone();
        charge(&mut n, 0.0);
        assert_eq!(n, before);
    }

    #[test]
    fn ledger_balances_with_clamps() {
        let mut nodes = [node(0.5), node(0.1)];
        let mut ledger = EnergyLedger::new(0.6);
        ledger.charge(&mut nodes[0], 0.25);
        ledger.charge(&mut nodes[1], 0.3);
        ledger.charge(&mut nodes[0], 0.05);
        let residual: f64 = nodes.iter().map(|n| n.energy).sum();
        assert!(ledger.relative_error(residual) < 1e-12);
        assert_eq!(ledger.clamp_log.len(), 1);
    }
}
