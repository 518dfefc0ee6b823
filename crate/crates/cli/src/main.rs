use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nhlab::interferometer::Arm;
use nhlab_cli::checks::{self, Sizes};
use nhlab_cli::commands::{self, Format};
use nhlab_cli::config::{ExperimentConfig, Mode};
use nhlab_cli::report::{to_json, Failure, Outcome};

#[derive(Parser)]
#[command(name = "nhlab", version, about = "Non-Hermitian uncertainty relation experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `outputs.dir` or `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Shot-noise simulation on or off; overrides `noise.enabled`.
    #[arg(long, global = true, value_enum)]
    noise: Option<Switch>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmArg {
    #[value(name = "I")]
    I,
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
}

impl From<ArmArg> for Arm {
    fn from(a: ArmArg) -> Self {
        match a {
            ArmArg::I => Arm::I,
            ArmArg::A => Arm::A,
            ArmArg::B => Arm::B,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Interferogram for one arm pair.
    Fringe {
        #[arg(long, value_enum)]
        arm_a: Option<ArmArg>,
        #[arg(long, value_enum)]
        arm_b: Option<ArmArg>,
        /// Input polarization angle in degrees.
        #[arg(long, allow_hyphen_values = true)]
        theta0: Option<f64>,
    },
    /// θ0 sweep of the real-operator relation.
    SweepReal,
    /// θ0 sweep of the complex-operator relation.
    SweepComplex,
    /// Gram matrix and relation reports at one θ0.
    Tmatrix {
        #[arg(long, allow_hyphen_values = true)]
        theta0: Option<f64>,
    },
    /// Runs the full property suite.
    Verify {
        /// Smaller instance counts.
        #[arg(long)]
        quick: bool,
    },
    /// Separability test for the configured channels and state.
    Entangle,
    /// Propagated against Monte-Carlo error bars.
    NoiseCalib {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        theta0: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fringe { .. } => "fringe",
            Command::SweepReal => "sweep-real",
            Command::SweepComplex => "sweep-complex",
            Command::Tmatrix { .. } => "tmatrix",
            Command::Verify { .. } => "verify",
            Command::Entangle => "entangle",
            Command::NoiseCalib { .. } => "noise-calib",
        }
    }

    fn mode_hint(&self) -> Option<Mode> {
        match self {
            Command::SweepReal => Some(Mode::Real),
            Command::SweepComplex => Some(Mode::Complex),
            _ => None,
        }
    }
}

fn verify(seed: u64, quick: bool) -> Outcome {
    let sizes = if quick {
        Sizes {
            relation_instances: 1000,
            optics_sets: 100,
            interferometer_configs: 10,
            noise_trials: 1000,
            product_states: 200,
            fidelity_pairs: 1000,
        }
    } else {
        Sizes::default()
    };
    let results = checks::run_all(seed, sizes);
    let mut out = Outcome::default();
    for r in &results {
        eprintln!(
            "[{}] {:>2} {} ({:.2} s)",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.seconds
        );
        if !r.passed {
            out.failures.push(Failure::new(r.name, format!("{:?}", r.metrics)));
        }
    }
    out.file("verify.json", to_json(&results));
    out
}

fn run(cli: &Cli) -> Result<Outcome, (u8, String)> {
    let hint = cli.command.mode_hint();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p, hint).map_err(|e| (2, e.to_string()))?,
        None => ExperimentConfig::defaults(hint.unwrap_or(Mode::Real)),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let noise = match cli.noise {
        Some(Switch::On) => true,
        Some(Switch::Off) => false,
        None => cfg.noise.enabled,
    };
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let runtime = |e: nhlab::Error| (3, e.to_string());
    match &cli.command {
        Command::Fringe { arm_a, arm_b, theta0 } => {
            if let Some(a) = arm_a {
                cfg.scan.arm_a = (*a).into();
            }
            if let Some(b) = arm_b {
                cfg.scan.arm_b = (*b).into();
            }
            if let Some(t) = theta0 {
                cfg.scan.theta0 = *t;
            }
            commands::fringe(&cfg, noise, format).map_err(runtime)
        }
        Command::SweepReal | Command::SweepComplex => commands::sweep(&cfg, noise, format).map_err(runtime),
        Command::Tmatrix { theta0 } => {
            if let Some(t) = theta0 {
                cfg.scan.theta0 = *t;
            }
            commands::tmatrix(&cfg).map_err(runtime)
        }
        Command::Verify { quick } => Ok(verify(cfg.seed, *quick)),
        Command::Entangle => commands::entangle(&cfg).map_err(runtime),
        Command::NoiseCalib { trials, theta0 } => {
            if let Some(n) = trials {
                if *n < 100 {
                    return Err((2, format!("--trials must be at least 100, got {n}")));
                }
                cfg.noise.trials = *n;
            }
            if let Some(t) = theta0 {
                cfg.scan.theta0 = *t;
            }
            commands::noise_calib(&cfg).map_err(runtime)
        }
    }
    .map(|out| {
        let dir = cli.out.clone().unwrap_or(cfg.out_dir.clone());
        (out, dir)
    })
    .and_then(|(out, dir)| {
        out.write_to(&dir)
            .map_err(|e| (3, format!("writing {}: {e}", dir.display())))?;
        Ok(out)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{}", out.status_json(cli.command.name()));
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            println!(
                "{}",
                serde_json::json!({
                    "command": cli.command.name(),
                    "status": "error",
                    "failures": [{ "check": "setup", "detail": msg }],
                })
            );
            ExitCode::from(code)
        }
    }
}
