use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "qwparadox", version, about = "Pre- and post-selected quantum walk laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Walker lattice as `lo:hi`.
    #[arg(long, global = true, default_value = "-1:6")]
    pub lattice: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Walk evolution and selection probabilities.
    #[command(subcommand)]
    Walk(WalkCmd),
    /// Exclusivity checks, hidden-variable enumeration, KCBS value.
    #[command(subcommand)]
    Contextuality(ContextualityCmd),
    /// The beam-displacer circuit.
    #[command(subcommand)]
    Optics(OpticsCmd),
    /// Photon-counting simulation of the three setups.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "lowercase")]
pub enum WalkCmd {
    /// Apply the step operator `t` times (or its adjoint with --back).
    Evolve {
        /// Canonical state name (pre0, post2, ...) or a state JSON file.
        #[arg(long)]
        state: String,
        #[arg(long, default_value_t = 1)]
        steps: u32,
        #[arg(long)]
        back: bool,
    },
    /// Probability of post-selecting post(2), optionally with a block.
    Postselect {
        #[arg(long, default_value = "pre0")]
        state: String,
        /// Absorb the walker at `x,t`.
        #[arg(long)]
        block: Option<String>,
    },
    /// Counterfactual probability of finding the walker at `x` at time `t`.
    Abl {
        #[arg(long, allow_hyphen_values = true)]
        x: i64,
        #[arg(long)]
        t: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphChoice {
    Clifton,
    Kcbs,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "lowercase")]
pub enum ContextualityCmd {
    /// Every edge, completeness and projector check, plus the derived quantities.
    Verify,
    /// KCBS sum of the 5-cycle on a state.
    Kcbs {
        #[arg(long, default_value = "pre0")]
        state: String,
    },
    /// Admissible YES/NO assignments.
    Enumerate {
        /// Force an event, e.g. `pre=yes`. Repeatable.
        #[arg(long = "force")]
        force: Vec<String>,
        #[arg(long, value_enum, default_value_t = GraphChoice::Clifton)]
        graph: GraphChoice,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleChoice {
    Exact,
    Table,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "lowercase")]
pub enum OpticsCmd {
    /// Emit the reference circuit.
    Compile {
        #[arg(long, value_enum, default_value_t = AngleChoice::Table)]
        angles: AngleChoice,
    },
    /// Fidelity and plate-angle checks of a circuit.
    Validate {
        /// Circuit JSON; the shipped reference by default.
        #[arg(long)]
        circuit: Option<PathBuf>,
    },
    /// Send the circuit's input through it.
    Propagate {
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = AngleChoice::Table)]
        angles: AngleChoice,
        #[arg(long)]
        block: Option<String>,
        #[arg(long)]
        imperfections: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "lowercase")]
pub enum ExperimentCmd {
    /// Simulate setups and test the inequality.
    Run {
        /// 1, 2, 3 or all.
        #[arg(long, default_value = "all")]
        setup: String,
        #[arg(long, default_value_t = 11000)]
        photons: u64,
        #[arg(long, default_value_t = 1)]
        runs: u32,
        #[arg(long, value_enum, default_value_t = EngineChoice::Model)]
        engine: EngineChoice,
        #[arg(long, value_enum, default_value_t = AngleChoice::Exact)]
        angles: AngleChoice,
        #[arg(long)]
        imperfections: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        accidental_rate: f64,
        /// Also write the per-run count series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit plate-angle spread and visibility to three target probabilities.
    Calibrate {
        /// `p1,p2,p3`.
        #[arg(long, default_value = "0.0498,0.0056,0.0075")]
        targets: String,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 21)]
        sigma_steps: usize,
        #[arg(long, default_value_t = 21)]
        visibility_steps: usize,
        #[arg(long, value_enum, default_value_t = AngleChoice::Exact)]
        angles: AngleChoice,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Model,
    Optics,
}
