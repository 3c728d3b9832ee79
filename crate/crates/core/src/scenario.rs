//! Scenario parameters and the flat dotted-key configuration format.
//!
//! A scenario document is TOML restricted to scalar values. Nested groups
//! are written with dotted keys (`radio.e_elec = 5e-8`); `[radio]` tables
//! are accepted too and flatten to the same keys. Unknown keys are errors,
//! missing keys keep their defaults.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use toml::{Table, Value};

use crate::energy::RadioParams;
use crate::error::ConfigError;
use crate::model::Point;
use crate::xmeans::KMeansParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Efcm,
    Leach,
    Heed,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Efcm, Protocol::Leach, Protocol::Heed];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Efcm => "efcm",
            Protocol::Leach => "leach",
            Protocol::Heed => "heed",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "efcm" => Ok(Protocol::Efcm),
            "leach" => Ok(Protocol::Leach),
            "heed" => Ok(Protocol::Heed),
            other => Err(format!(
                "unknown protocol `{other}` (expected efcm, leach or heed)"
            )),
        }
    }
}

/// How EFCM picks the next head at a slice boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMode {
    /// Walk the energy-sorted ring cyclically.
    Ring,
    /// Always take the highest-energy entry of the construction-time table
    /// that is still alive.
    LiteralMax,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Ring => "ring",
            SelectionMode::LiteralMax => "literal-max",
        }
    }
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ring" => Ok(SelectionMode::Ring),
            "literal-max" | "literal_max" => Ok(SelectionMode::LiteralMax),
            other => Err(format!(
                "unknown selection mode `{other}` (expected ring or literal-max)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    pub packet_bits: u64,
    pub packets_per_node_per_round: u64,
    pub announcement_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultModel {
    /// Chance that a serving head drops its uplink in a given round.
    pub head_fault_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeachParams {
    /// Desired fraction of heads per round.
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeedParams {
    pub c_prob: f64,
    pub p_min: f64,
    /// Reference energy; `None` means the scenario's initial energy.
    pub e_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XMeansBounds {
    pub k_min: usize,
    /// `None` means `ceil(sqrt(node_count))`.
    pub k_max: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
}

impl XMeansBounds {
    pub fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub protocol: Protocol,
    pub selection_mode: SelectionMode,
    pub node_count: usize,
    pub area_width: f64,
    pub area_height: f64,
    /// `None` places the base station at the area center.
    pub base_station: Option<Point>,
    pub initial_energy: f64,
    /// Intra-cluster radio range in meters (HEED cluster range).
    pub radio_range: f64,
    pub time_slice: u64,
    pub duration: u64,
    pub checkpoint_interval: u64,
    pub seed: u64,
    pub radio: RadioParams,
    pub traffic: TrafficModel,
    pub fault: FaultModel,
    pub leach: LeachParams,
    pub heed: HeedParams,
    pub xmeans: XMeansBounds,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            protocol: Protocol::Efcm,
            selection_mode: SelectionMode::Ring,
            node_count: 100,
            area_width: 100.0,
            area_height: 100.0,
            base_station: None,
            initial_energy: 0.5,
            radio_range: 25.0,
            time_slice: 5,
            duration: 25,
            checkpoint_interval: 5,
            seed: 1,
            radio: RadioParams::default(),
            traffic: TrafficModel {
                packet_bits: 2000,
                packets_per_node_per_round: 1,
                announcement_bits: 200,
            },
            fault: FaultModel {
                head_fault_prob: 0.02,
            },
            leach: LeachParams { p: 0.1 },
            heed: HeedParams {
                c_prob: 0.05,
                p_min: 1e-4,
                e_max: None,
            },
            xmeans: XMeansBounds {
                k_min: 1,
                k_max: None,
                max_iter: 100,
                tol: 1e-6,
            },
        }
    }
}

impl Scenario {
    pub fn base_station(&self) -> Point {
        self.base_station
            .unwrap_or(Point::new(self.area_width / 2.0, self.area_height / 2.0))
    }

    pub fn heed_e_max(&self) -> f64 {
        self.heed.e_max.unwrap_or(self.initial_energy)
    }

    /// Upper bound on X-means clusters for `alive` nodes.
    pub fn k_max_for(&self, alive: usize) -> usize {
        let k = self
            .xmeans
            .k_max
            .unwrap_or_else(|| (self.node_count as f64).sqrt().ceil() as usize);
        k.max(self.xmeans.k_min).min(alive).max(1)
    }

    /// Label used in tables and CSV output.
    pub fn label(&self) -> String {
        match (self.protocol, self.selection_mode) {
            (Protocol::Efcm, SelectionMode::LiteralMax) => "efcm-literal-max".to_string(),
            (p, _) => p.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invariant(
                    key,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        }
        fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invariant(
                    key,
                    format!("must be finite and ≥ 0, got {v}"),
                ))
            }
        }
        fn unit(key: &str, v: f64, allow_zero: bool) -> Result<(), ConfigError> {
            let ok = if allow_zero { v >= 0.0 } else { v > 0.0 } && v <= 1.0;
            if ok {
                Ok(())
            } else {
                let lo = if allow_zero { "[0, 1]" } else { "(0, 1]" };
                Err(ConfigError::invariant(
                    key,
                    format!("must lie in {lo}, got {v}"),
                ))
            }
        }

        positive("area_width", self.area_width)?;
        positive("area_height", self.area_height)?;
        positive("initial_energy", self.initial_energy)?;
        positive("radio_range", self.radio_range)?;
        if let Some(bs) = self.base_station {
            if !bs.x.is_finite() {
                return Err(ConfigError::invariant("base_station_x", "must be finite"));
            }
            if !bs.y.is_finite() {
                return Err(ConfigError::invariant("base_station_y", "must be finite"));
            }
        }
        if self.time_slice < 1 {
            return Err(ConfigError::invariant("time_slice", "must be ≥ 1"));
        }
        if self.checkpoint_interval < 1 {
            return Err(ConfigError::invariant("checkpoint_interval", "must be ≥ 1"));
        }
        if self.duration != 0 && self.duration < self.checkpoint_interval {
            return Err(ConfigError::invariant(
                "duration",
                format!(
                    "must be 0 or ≥ checkpoint_interval ({}), got {}",
                    self.checkpoint_interval, self.duration
                ),
            ));
        }
        non_negative("radio.e_elec", self.radio.e_elec)?;
        non_negative("radio.eps_fs", self.radio.eps_fs)?;
        non_negative("radio.eps_mp", self.radio.eps_mp)?;
        non_negative("radio.e_da", self.radio.e_da)?;
        non_negative("radio.e_idle", self.radio.e_idle)?;
        unit("fault.head_fault_prob", self.fault.head_fault_prob, true)?;
        unit("leach.p", self.leach.p, false)?;
        unit("heed.c_prob", self.heed.c_prob, false)?;
        unit("heed.p_min", self.heed.p_min, false)?;
        if self.heed.p_min > self.heed.c_prob {
            return Err(ConfigError::invariant(
                "heed.p_min",
                format!("must not exceed heed.c_prob ({})", self.heed.c_prob),
            ));
        }
        if let Some(e) = self.heed.e_max {
            positive("heed.e_max", e)?;
        }
        if self.xmeans.k_min < 1 {
            return Err(ConfigError::invariant("xmeans.k_min", "must be ≥ 1"));
        }
        if let Some(k) = self.xmeans.k_max {
            if k < self.xmeans.k_min {
                return Err(ConfigError::invariant(
                    "xmeans.k_max",
                    format!("must be ≥ xmeans.k_min ({})", self.xmeans.k_min),
                ));
            }
        }
        if self.xmeans.max_iter < 1 {
            return Err(ConfigError::invariant("xmeans.max_iter", "must be ≥ 1"));
        }
        non_negative("xmeans.tol", self.xmeans.tol)?;
        Ok(())
    }

    /// Applies one dotted key. Values are checked for type here and for
    /// cross-field invariants by [`Scenario::validate`].
    pub fn set(&mut self, key: &str, value: &Value) -> Result<(), ConfigError> {
        let s = self;
        match key {
            "protocol" => s.protocol = parse_enum(key, value)?,
            "selection_mode" => s.selection_mode = parse_enum(key, value)?,
            "node_count" => s.node_count = as_count(key, value)? as usize,
            "area_width" => s.area_width = as_real(key, value)?,
            "area_height" => s.area_height = as_real(key, value)?,
            "base_station_x" => {
                let y = s.base_station().y;
                s.base_station = Some(Point::new(as_real(key, value)?, y));
            }
            "base_station_y" => {
                let x = s.base_station().x;
                s.base_station = Some(Point::new(x, as_real(key, value)?));
            }
            "initial_energy" => s.initial_energy = as_real(key, value)?,
            "radio_range" => s.radio_range = as_real(key, value)?,
            "time_slice" => s.time_slice = as_count(key, value)?,
            "duration" => s.duration = as_count(key, value)?,
            "checkpoint_interval" => s.checkpoint_interval = as_count(key, value)?,
            "seed" => s.seed = as_seed(key, value)?,
            "radio.e_elec" => s.radio.e_elec = as_real(key, value)?,
            "radio.eps_fs" => s.radio.eps_fs = as_real(key, value)?,
            "radio.eps_mp" => s.radio.eps_mp = as_real(key, value)?,
            "radio.e_da" => s.radio.e_da = as_real(key, value)?,
            "radio.e_idle" => s.radio.e_idle = as_real(key, value)?,
            "traffic.packet_bits" => s.traffic.packet_bits = as_count(key, value)?,
            "traffic.packets_per_node_per_round" => {
                s.traffic.packets_per_node_per_round = as_count(key, value)?
            }
            "traffic.announcement_bits" => s.traffic.announcement_bits = as_count(key, value)?,
            "fault.head_fault_prob" => s.fault.head_fault_prob = as_real(key, value)?,
            "leach.p" => s.leach.p = as_real(key, value)?,
            "heed.c_prob" => s.heed.c_prob = as_real(key, value)?,
            "heed.p_min" => s.heed.p_min = as_real(key, value)?,
            "heed.e_max" => s.heed.e_max = Some(as_real(key, value)?),
            "xmeans.k_min" => s.xmeans.k_min = as_count(key, value)? as usize,
            "xmeans.k_max" => s.xmeans.k_max = Some(as_count(key, value)? as usize),
            "xmeans.max_iter" => s.xmeans.max_iter = as_count(key, value)? as usize,
            "xmeans.tol" => s.xmeans.tol = as_real(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `key = raw` where `raw` is a TOML scalar; bare words are
    /// taken as strings so `protocol=leach` works on a command line.
    pub fn set_from_str(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let raw = raw.trim();
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("single key document"),
            Err(_) => Value::String(raw.to_string()),
        };
        self.set(key, &value)
    }

    /// Applies every key of `doc` on top of `self` and validates.
    pub fn apply_document(&mut self, doc: &str) -> Result<(), ConfigError> {
        let table: Table = doc.parse().map_err(|e: toml::de::Error| {
            ConfigError::Malformed(e.to_string().trim().to_string())
        })?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat)?;
        for (key, value) in &flat {
            self.set(key, value)?;
        }
        self.validate()
    }

    /// Renders the scenario as a flat document that [`parse_scenario`]
    /// reads back to an equal value. With `annotate`, each key carries a
    /// comment and defaults that are not taken from the literature are
    /// flagged `# non-paper default`.
    pub fn to_document(&self, annotate: bool) -> String {
        let mut out = String::new();
        for entry in KEYS {
            let Some(value) = (entry.get)(self) else {
                if annotate {
                    let _ = writeln!(out, "# {} = <{}>", entry.key, entry.unset);
                    let _ = writeln!(out, "#   {}", entry.doc);
                }
                continue;
            };
            let _ = write!(out, "{} = {}", entry.key, value);
            if annotate {
                if entry.invented {
                    out.push_str("  # non-paper default");
                }
                let _ = write!(out, "\n#   {}", entry.doc);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses a scenario document: defaults, then every key of `text`.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let mut s = Scenario::default();
    s.apply_document(text)?;
    Ok(s)
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out)?,
            Value::Array(_) => return Err(ConfigError::invalid(&key, "arrays are not supported")),
            other => out.push((key, other.clone())),
        }
    }
    Ok(())
}

fn as_real(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(ConfigError::invalid(
            key,
            format!("expected a number, got {other}"),
        )),
    }
}

fn as_count(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(ConfigError::invariant(
            key,
            format!("must be a non-negative integer, got {i}"),
        )),
        other => Err(ConfigError::invalid(
            key,
            format!("expected an integer, got {other}"),
        )),
    }
}

fn as_seed(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        // TOML integers are signed 64-bit; negative values carry the upper
        // half of the u64 range.
        Value::Integer(i) => Ok(*i as u64),
        other => Err(ConfigError::invalid(
            key,
            format!("expected an integer, got {other}"),
        )),
    }
}

fn parse_enum<T: FromStr<Err = String>>(key: &str, v: &Value) -> Result<T, ConfigError> {
    match v {
        Value::String(s) => s.parse().map_err(|e| ConfigError::invalid(key, e)),
        other => Err(ConfigError::invalid(
            key,
            format!("expected a string, got {other}"),
        )),
    }
}

fn real(v: f64) -> String {
    // Debug formatting is the shortest representation that reads back
    // exactly, and always carries a `.` or an exponent.
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}

struct KeyEntry {
    key: &'static str,
    doc: &'static str,
    invented: bool,
    unset: &'static str,
    get: fn(&Scenario) -> Option<String>,
}

macro_rules! key {
    ($key:literal, $doc:literal, $np:literal, |$s:ident| $get:expr) => {
        KeyEntry {
            key: $key,
            doc: $doc,
            invented: $np,
            unset: "",
            get: |$s: &Scenario| Some($get),
        }
    };
    ($key:literal, $doc:literal, $np:literal, unset = $unset:literal, |$s:ident| $get:expr) => {
        KeyEntry {
            key: $key,
            doc: $doc,
            invented: $np,
            unset: $unset,
            get: |$s: &Scenario| $get,
        }
    };
}

const KEYS: &[KeyEntry] = &[
    key!("protocol", "efcm | leach | heed", false, |s| format!(
        "\"{}\"",
        s.protocol
    )),
    key!(
        "selection_mode",
        "EFCM head selection: ring | literal-max",
        false,
        |s| format!("\"{}\"", s.selection_mode)
    ),
    key!("node_count", "number of deployed sensor nodes", true, |s| s
        .node_count
        .to_string()),
    key!("area_width", "deployment area width (m)", true, |s| real(
        s.area_width
    )),
    key!("area_height", "deployment area height (m)", true, |s| real(
        s.area_height
    )),
    key!(
        "base_station_x",
        "base station x (m)",
        true,
        unset = "area center",
        |s| { s.base_station.map(|p| real(p.x)) }
    ),
    key!(
        "base_station_y",
        "base station y (m)",
        true,
        unset = "area center",
        |s| { s.base_station.map(|p| real(p.y)) }
    ),
    key!(
        "initial_energy",
        "battery energy per node at deployment (J)",
        true,
        |s| real(s.initial_energy)
    ),
    key!(
        "radio_range",
        "intra-cluster radio range (m), HEED cluster range",
        true,
        |s| real(s.radio_range)
    ),
    key!(
        "time_slice",
        "rounds an EFCM head serves before rotation",
        true,
        |s| s.time_slice.to_string()
    ),
    key!(
        "duration",
        "rounds to simulate (one round = one second)",
        true,
        |s| s.duration.to_string()
    ),
    key!(
        "checkpoint_interval",
        "rounds between metric checkpoints",
        true,
        |s| s.checkpoint_interval.to_string()
    ),
    key!("seed", "seed of the run's ChaCha8 stream", true, |s| {
        (s.seed as i64).to_string()
    }),
    key!(
        "radio.e_elec",
        "electronics energy, tx and rx (J/bit)",
        true,
        |s| real(s.radio.e_elec)
    ),
    key!(
        "radio.eps_fs",
        "free-space amplifier (J/bit/m^2)",
        true,
        |s| real(s.radio.eps_fs)
    ),
    key!(
        "radio.eps_mp",
        "multipath amplifier (J/bit/m^4)",
        true,
        |s| real(s.radio.eps_mp)
    ),
    key!(
        "radio.e_da",
        "aggregation energy at a head (J/bit)",
        true,
        |s| real(s.radio.e_da)
    ),
    key!(
        "radio.e_idle",
        "idle drain per alive node per round (J)",
        true,
        |s| real(s.radio.e_idle)
    ),
    key!("traffic.packet_bits", "bits per data packet", true, |s| {
        s.traffic.packet_bits.to_string()
    }),
    key!(
        "traffic.packets_per_node_per_round",
        "data packets each node senses per round",
        true,
        |s| s.traffic.packets_per_node_per_round.to_string()
    ),
    key!(
        "traffic.announcement_bits",
        "bits per control packet (announcement, join, HEED bid)",
        true,
        |s| s.traffic.announcement_bits.to_string()
    ),
    key!(
        "fault.head_fault_prob",
        "per-round transient fault probability of a serving head",
        true,
        |s| real(s.fault.head_fault_prob)
    ),
    key!("leach.p", "LEACH desired head fraction", true, |s| real(
        s.leach.p
    )),
    key!("heed.c_prob", "HEED initial head probability", true, |s| {
        real(s.heed.c_prob)
    }),
    key!("heed.p_min", "HEED minimum head probability", true, |s| {
        real(s.heed.p_min)
    }),
    key!(
        "heed.e_max",
        "HEED reference energy (J)",
        true,
        unset = "initial_energy",
        |s| { s.heed.e_max.map(real) }
    ),
    key!(
        "xmeans.k_min",
        "smallest cluster count X-means may return",
        true,
        |s| s.xmeans.k_min.to_string()
    ),
    key!(
        "xmeans.k_max",
        "largest cluster count X-means may return",
        true,
        unset = "ceil(sqrt(node_count))",
        |s| { s.xmeans.k_max.map(|k| k.to_string()) }
    ),
    key!("xmeans.max_iter", "Lloyd iteration cap", true, |s| s
        .xmeans
        .max_iter
        .to_string()),
    key!(
        "xmeans.tol",
        "convergence threshold on centroid displacement (m)",
        true,
        |s| real(s.xmeans.tol)
    ),
];

/// Every key a scenario document may contain.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.key)
}
