//! Command-line interface: `state`, `channel`, `fig1`, `sample-dist`, and
//! `calibrate` subcommands with reproducible seeds and machine-readable
//! output. Exit codes: 0 success, 1 usage error, 2 runtime error.
//!
//! Every subcommand also accepts `--spec file.json` carrying a serialized
//! experiment description instead of the individual flags; the file's
//! `kind` must match the subcommand. `DFE_THREADS` caps the worker pool.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::harness::{
    run_calibration, run_channel, run_fig1, run_sample_dist, run_state, ExperimentSpec,
};

#[derive(Parser, Debug)]
#[command(
    name = "dfe",
    about = "Fidelity estimation for states and channels from importance-sampled Pauli measurements",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Target description, e.g. ghz:4, w:5, dicke:6:2, haar:8:3, file:psi.json
    /// (states) or clifford:circuit.txt, random-clifford:10:50:1, identity:2
    /// (channels).
    #[arg(long)]
    target: Option<String>,
    /// Noise applied to form the lab state/channel: none, depolarize:p,
    /// depolarize-global:p, dephase:p.
    #[arg(long)]
    noise: Option<String>,
    /// Additive accuracy of the estimate.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Failure probability per protocol stage.
    #[arg(long)]
    delta: Option<f64>,
    /// Setting-count rule: generic, well-conditioned[:alpha], shrinking,
    /// shrinking-minimal, truncated:beta.
    #[arg(long)]
    regime: Option<String>,
    /// Master seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count (fig1, calibrate).
    #[arg(long)]
    trials: Option<u64>,
    /// Register size (fig1).
    #[arg(long)]
    n: Option<usize>,
    /// Output path: a file for JSON/CSV emitters, a directory for fig1.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raise or lower the 4^n enumeration cap.
    #[arg(long)]
    max_enumeration_qubits: Option<usize>,
    /// Load the full experiment description from a JSON file instead of
    /// flags (mutually exclusive with --target/--noise/...).
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a pure target state against a simulated noisy lab state.
    State(CommonArgs),
    /// Certify a unitary target channel against a simulated noisy channel.
    Channel(CommonArgs),
    /// Haar-random residual study: histograms of estimate error and copies.
    Fig1(CommonArgs),
    /// Dump a target's importance distribution as CSV.
    SampleDist(CommonArgs),
    /// Empirically verify both failure-probability guarantees.
    Calibrate(CommonArgs),
}

impl CommonArgs {
    fn has_inline_flags(&self) -> bool {
        self.target.is_some()
            || self.noise.is_some()
            || self.epsilon.is_some()
            || self.delta.is_some()
            || self.regime.is_some()
            || self.seed.is_some()
            || self.trials.is_some()
            || self.n.is_some()
            || self.max_enumeration_qubits.is_some()
    }

    fn into_spec(self, kind: &str) -> std::result::Result<ExperimentSpec, String> {
        if let Some(path) = &self.spec {
            if self.has_inline_flags() {
                return Err("--spec cannot be combined with inline experiment flags".into());
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let mut spec: ExperimentSpec =
                serde_json::from_str(&text).map_err(|e| format!("bad spec file: {e}"))?;
            if spec.kind != kind {
                return Err(format!(
                    "spec kind {:?} does not match subcommand {kind:?}",
                    spec.kind
                ));
            }
            if spec.out.is_none() {
                spec.out = self.out;
            }
            return Ok(spec);
        }
        let mut spec = ExperimentSpec::new(kind);
        spec.target = self.target;
        spec.noise = self.noise;
        if let Some(e) = self.epsilon {
            spec.epsilon = e;
        }
        if let Some(d) = self.delta {
            spec.delta = d;
        }
        spec.regime = self.regime;
        spec.seed = self.seed.unwrap_or(0);
        spec.trials = self.trials;
        spec.n = self.n;
        spec.out = self.out;
        spec.max_enumeration_qubits = self.max_enumeration_qubits;
        Ok(spec)
    }
}

fn emit(spec: &ExperimentSpec, text: &str) -> Result<()> {
    match &spec.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, text)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(command: Command) -> std::result::Result<(), (i32, String)> {
    let usage = |msg: String| (1, msg);
    let runtime = |e: crate::DfeError| (2, e.to_string());
    match command {
        Command::State(args) => {
            let spec = args.into_spec("state").map_err(usage)?;
            let text = run_state(&spec).map_err(runtime)?;
            emit(&spec, &text).map_err(runtime)
        }
        Command::Channel(args) => {
            let spec = args.into_spec("channel").map_err(usage)?;
            let text = run_channel(&spec).map_err(runtime)?;
            emit(&spec, &text).map_err(runtime)
        }
        Command::Fig1(args) => {
            let spec = args.into_spec("fig1").map_err(usage)?;
            if spec.out.is_none() {
                return Err(usage("fig1 requires --out DIR for its histograms".into()));
            }
            let artifacts = run_fig1(&spec).map_err(runtime)?;
            println!("{}", artifacts.summary_json);
            Ok(())
        }
        Command::SampleDist(args) => {
            let spec = args.into_spec("sample-dist").map_err(usage)?;
            let text = run_sample_dist(&spec).map_err(runtime)?;
            emit(&spec, &text).map_err(runtime)
        }
        Command::Calibrate(args) => {
            let spec = args.into_spec("calibrate").map_err(usage)?;
            let text = run_calibration(&spec).map_err(runtime)?;
            emit(&spec, &text).map_err(runtime)
        }
    }
}

fn init_thread_pool() {
    if let Ok(threads) = std::env::var("DFE_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            if threads >= 1 {
                // Ignore the error if a pool already exists.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

/// Entry point shared by the binary and tests. Returns the process exit
/// code instead of exiting, so tests can drive it directly.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    init_thread_pool();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}
