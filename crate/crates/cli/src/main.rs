mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gkdv_core::ErrorClass;

#[derive(Parser)]
#[command(name = "gkdv-lab", version, about = "Multi-soliton laboratory for supercritical gKdV")]
struct Cli {
    /// Worker threads for parameter sweeps (capped by GKDV_LAB_THREADS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue and normalized eigenbasis of the linearized operator.
    Spectrum(commands::SpectrumArgs),
    /// Forward evolution of the multi-soliton sum.
    Evolve(commands::EvolveArgs),
    /// Final-data shooting for one or more parameter vectors A.
    Construct(commands::ConstructArgs),
    /// Recovers A from a stored trajectory.
    Classify(commands::ClassifyArgs),
    /// Local mass monotonicity and weight identities on a stored trajectory.
    Monotonicity(commands::MonotonicityArgs),
    /// Collects the manifests and summaries under a directory.
    Report(commands::ReportArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<gkdv_core::Error>() {
        return match e.class() {
            ErrorClass::Config => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::Convergence => 4,
            ErrorClass::Io => 5,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 5;
    }
    2
}

fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .downcast_ref::<gkdv_core::Error>()
        .map_or("other", |e| e.kind());
    let mut v = serde_json::json!({
        "error": kind,
        "message": format!("{err:#}"),
        "exit_code": exit_code(err),
    });
    if let Some(gkdv_core::Error::ClassificationUncertain { partial, component, .. }) =
        err.downcast_ref::<gkdv_core::Error>()
    {
        v["partial"] = serde_json::json!(partial);
        v["component"] = serde_json::json!(component);
    }
    v
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = settings::worker_count(cli.jobs);
    let result = match cli.command {
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Evolve(a) => commands::evolve(a),
        Command::Construct(a) => commands::construct(a, jobs),
        Command::Classify(a) => commands::classify(a),
        Command::Monotonicity(a) => commands::monotonicity(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
