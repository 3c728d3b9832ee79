use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use efcm_core::report::{emit_csv, series_csv, series_summary, table_csv, table_summary};
use efcm_core::{compare, run, ConfigError, Error, Execution, Protocol, Scenario, SelectionMode};

/// Environment variable that replaces the default output directory.
const OUT_DIR_VAR: &str = "EFCM_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "results";

#[derive(Parser)]
#[command(
    name = "efcm-sim",
    version,
    about = "Clustered WSN simulator: EFCM, LEACH and HEED"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario, write its checkpoint CSV and print a summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// CSV destination [default: $EFCM_OUT_DIR/<protocol>-seed<seed>.csv]
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sweep protocols over seeds and write the aggregate CSV.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Protocols to compare, in table order.
        #[arg(long, value_delimiter = ',', default_value = "efcm,leach,heed")]
        protocols: Vec<Protocol>,
        /// Number of seeds; seed i is the scenario seed plus i.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Run the sweep on the calling thread only.
        #[arg(long)]
        serial: bool,
        /// CSV destination [default: $EFCM_OUT_DIR/compare.csv]
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a scenario without running it.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Print the annotated reference scenario.
    Defaults,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (flat TOML with dotted keys).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any scenario key, e.g. `--set radio.e_elec=4e-8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    protocol: Option<Protocol>,
    #[arg(long)]
    selection_mode: Option<SelectionMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration: Option<u64>,
    #[arg(long)]
    node_count: Option<usize>,
    #[arg(long)]
    time_slice: Option<u64>,
}

impl ScenarioArgs {
    /// Defaults, then the file, then `--set` pairs, then the named flags.
    fn load(&self) -> Result<Scenario, Error> {
        let mut s = Scenario::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            s.apply_document(&text)?;
        }
        for pair in &self.set {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                ConfigError::Malformed(format!("`--set {pair}`: expected KEY=VALUE"))
            })?;
            s.set_from_str(key.trim(), value)?;
        }
        if let Some(p) = self.protocol {
            s.protocol = p;
        }
        if let Some(m) = self.selection_mode {
            s.selection_mode = m;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.duration {
            s.duration = v;
        }
        if let Some(v) = self.node_count {
            s.node_count = v;
        }
        if let Some(v) = self.time_slice {
            s.time_slice = v;
        }
        s.validate()?;
        Ok(s)
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_VAR)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), PathBuf::from)
}

fn lint(s: &Scenario) -> Vec<String> {
    let mut notes = Vec::new();
    if !s.duration.is_multiple_of(s.checkpoint_interval) {
        notes.push(format!(
            "duration {} is not a multiple of checkpoint_interval {}; the last {} rounds are not reported",
            s.duration,
            s.checkpoint_interval,
            s.duration % s.checkpoint_interval
        ));
    }
    if s.protocol != Protocol::Efcm && s.selection_mode != SelectionMode::Ring {
        notes.push(format!(
            "selection_mode only affects efcm, not {}",
            s.protocol
        ));
    }
    if s.node_count == 0 {
        notes.push("node_count is 0; runs will report no traffic".into());
    }
    notes
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { scenario, out } => {
            let s = scenario.load()?;
            let series = run(&s)?;
            let path =
                out.unwrap_or_else(|| out_dir().join(format!("{}-seed{}.csv", s.label(), s.seed)));
            emit_csv(&series_csv(&series), &path)?;
            print!("{}", series_summary(&series));
            println!("wrote {}", path.display());
        }
        Command::Compare {
            scenario,
            protocols,
            seeds,
            serial,
            out,
        } => {
            let base = scenario.load()?;
            if protocols.is_empty() {
                return Err(ConfigError::Malformed("`--protocols` is empty".into()).into());
            }
            let scenarios: Vec<Scenario> = protocols
                .iter()
                .map(|&protocol| Scenario {
                    protocol,
                    ..base.clone()
                })
                .collect();
            let seeds: Vec<u64> = (0..seeds).map(|i| base.seed.wrapping_add(i)).collect();
            let exec = if serial {
                Execution::Serial
            } else {
                Execution::Parallel
            };
            let table = compare(&scenarios, &seeds, exec)?;
            let path = out.unwrap_or_else(|| out_dir().join("compare.csv"));
            emit_csv(&table_csv(&table), &path)?;
            print!("{}", table_summary(&table));
            println!("wrote {}", path.display());
        }
        Command::Validate { scenario } => {
            let s = scenario.load()?;
            for note in lint(&s) {
                println!("warning: {note}");
            }
            println!(
                "ok: {} with {} nodes over {} rounds, seed {}",
                s.label(),
                s.node_count,
                s.duration,
                s.seed
            );
        }
        Command::Defaults => print!("{}", Scenario::default().to_document(true)),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("efcm-sim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
