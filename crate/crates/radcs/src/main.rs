use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use radcs::commands::{self, TargetFile, TargetSource};
use radcs::report::{evaluate_report, BackendKind, RunSettings, METRICS_FILE};

#[derive(Parser)]
#[command(name = "radcs", version, about = "Adaptive block compressed sensing for polar radar scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the acquisition loop over a scene and write a report directory.
    Run {
        scene: PathBuf,
        /// Sampling rate in percent: 10, 20 or 30.
        #[arg(long)]
        rate: u32,
        /// standard, radinfo1 or radinfo2.
        #[arg(long, default_value = "radinfo2")]
        variant: String,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Process at most this many frames.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        score_threshold: f64,
        /// Force the near-AV strip on or off.
        #[arg(long)]
        near_av: Option<bool>,
        /// Use 3x3 instead of 5x5 for large objects within 50 m.
        #[arg(long)]
        compact_near_large: bool,
        /// Store every n-th frame raw.
        #[arg(long)]
        resync_every: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Blob detector threshold; defaults to mean + 3 std of nonzero pixels.
        #[arg(long)]
        blob_threshold: Option<f64>,
    },
    /// Solve the two-rate budget LP and print the solution.
    Lp {
        #[arg(long)]
        important: usize,
        /// Sampling rate in percent: 10, 20 or 30.
        #[arg(long)]
        rate: u32,
    },
    /// Render a synthetic moving-target scene.
    GenSynthetic {
        /// TOML target file.
        #[arg(long, conflicts_with = "random")]
        targets: Option<PathBuf>,
        /// Place this many random vehicles instead.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 20.0)]
        max_speed: f64,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "city")]
        weather: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit sub-sampled Cartesian frames for detector fine-tuning.
    GenFinetuneSet {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        rate: u32,
        #[arg(long, default_value = "radinfo2")]
        variant: String,
        #[arg(long, value_enum, default_value = "oracle")]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute a report's metrics from its stored reconstructions.
    Evaluate {
        report: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail unless the result matches the stored metrics.csv.
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    radcs::init_threads()?;
    match command {
        Command::Run {
            scene,
            rate,
            variant,
            backend,
            seed,
            out,
            frames,
            score_threshold,
            near_av,
            compact_near_large,
            resync_every,
            max_iterations,
            blob_threshold,
        } => {
            let mut s = RunSettings::new(scene, rate, &variant, backend, seed);
            s.max_frames = frames;
            s.score_threshold = score_threshold;
            s.near_av = near_av;
            s.compact_near_large = compact_near_large;
            s.resync_every = resync_every;
            if let Some(n) = max_iterations {
                s.solver.max_iterations = n;
            }
            s.blob.threshold = blob_threshold;
            radcs::report::rate_from_percent(rate)?;
            s.strategy()?;
            let run = commands::run(&s, &out)?;
            let a = &run.aggregate;
            println!(
                "{} frames, mean NMSE {:.3e}, AP50 {:.1}, AP {:.1}, {} unconverged blocks -> {}",
                run.records.len(),
                a.nmse,
                100.0 * a.ap50,
                100.0 * a.ap,
                a.unconverged_blocks,
                out.display()
            );
        }
        Command::Lp { important, rate } => print!("{}", commands::lp_report(important, rate)?),
        Command::GenSynthetic {
            targets,
            random,
            max_speed,
            frames,
            seed,
            name,
            weather,
            out,
        } => {
            let source = match (targets, random) {
                (Some(path), _) => TargetSource::File(TargetFile::read(&path)?),
                (None, Some(count)) => TargetSource::Random {
                    count,
                    max_speed_mps: max_speed,
                },
                (None, None) => TargetSource::File(TargetFile::default()),
            };
            let name = name.unwrap_or_else(|| format!("synthetic_{seed}"));
            let m = commands::gen_synthetic(&source, frames, seed, &name, &weather, &out)?;
            println!("wrote {} frames to {}", m.frames.len(), out.display());
        }
        Command::GenFinetuneSet {
            scenes,
            rate,
            variant,
            backend,
            seed,
            max_iterations,
            out,
        } => {
            radcs::report::rate_from_percent(rate)?;
            if rate != 20 {
                eprintln!("warning: the published fine-tuning set was built at 20%; {rate}% is a non-standard rate");
            }
            let mut s = RunSettings::new(PathBuf::new(), rate, &variant, backend, seed);
            if let Some(n) = max_iterations {
                s.solver.max_iterations = n;
            }
            let idx = commands::gen_finetune_set(&scenes, &s, &out)?;
            let n: usize = idx.iter().map(|i| i.frames.len()).sum();
            println!("wrote {n} frames from {} scenes to {}", idx.len(), out.display());
        }
        Command::Evaluate { report, out, check } => {
            let csv = evaluate_report(&report)?;
            if check {
                let stored_path = report.join(METRICS_FILE);
                let stored = std::fs::read(&stored_path).with_context(|| format!("reading {}", stored_path.display()))?;
                if stored != csv {
                    bail!("recomputed metrics differ from {}", stored_path.display());
                }
            }
            match out {
                Some(path) => std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", String::from_utf8_lossy(&csv)),
            }
        }
    }
    Ok(())
}
