use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hoikit_cli::{run, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "hoikit",
    version,
    about = "Offline pipeline for humanoid-object interaction motion"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "hoikit.toml")]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `paths.output`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// `section.key=value` override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Disable the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the procedural box-carrying corpus and its meshes.
    Synth,
    /// Extract key actions from every motion.
    Extract,
    /// Interpolate extracted key actions back to dense motion.
    Interp,
    /// Train (or fine-tune) the key-action generator.
    Train,
    /// Sample one window of key actions per conditioning sequence.
    Sample,
    /// Autoregressive long-horizon generation.
    Genlong,
    /// Replay motions through the noisy tracking oracle.
    Rollout,
    /// Generation metrics against ground truth.
    Metrics,
    /// Render a metrics CSV as a table or CSV.
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        output: cli.output,
        set: cli.set,
    };
    let command = match cli.command {
        Cmd::Synth => Command::Synth,
        Cmd::Extract => Command::Extract,
        Cmd::Interp => Command::Interp,
        Cmd::Train => Command::Train,
        Cmd::Sample => Command::Sample,
        Cmd::Genlong => Command::Genlong,
        Cmd::Rollout => Command::Rollout,
        Cmd::Metrics => Command::Metrics,
        Cmd::Report { input, format } => Command::Report { input, format },
    };
    let result = RunConfig::load(&cli.config, &overrides).and_then(|mut cfg| {
        cfg.parallel &= !cli.sequential;
        run(&command, &cfg)
    });
    match result {
        Ok(report) => {
            println!("{}", report.summary);
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
