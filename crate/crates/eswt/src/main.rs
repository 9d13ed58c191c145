use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eswt::alloc_track::TrackingAlloc;
use eswt::config::RunConfig;
use eswt::report::{complexity_csv, complexity_json, complexity_table, eval_csv, eval_means};
use eswt::{commands, fsutil, Error};

#[global_allocator]
static ALLOC: TrackingAlloc = TrackingAlloc;

#[derive(Parser)]
#[command(name = "eswt", version, about = "Striped window transformer for image super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model with the flexible-window schedule.
    Train {
        /// Run configuration (JSON).
        config: PathBuf,
        /// Directory for checkpoints and metrics.csv.
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Upscale one PPM image.
    Infer {
        checkpoint: PathBuf,
        /// Low-resolution P6 image.
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the upscaled P6 image.
        #[arg(long = "out")]
        output: PathBuf,
        /// Expected scale factor; must match the checkpoint.
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Score a checkpoint on a directory of HR images, next to bicubic.
    Eval {
        checkpoint: PathBuf,
        /// Directory of high-resolution P6 images.
        #[arg(long)]
        dataset: PathBuf,
        /// Expected scale factor; must match the checkpoint.
        #[arg(long)]
        scale: Option<usize>,
        /// Border pixels ignored by the metrics (defaults to the scale).
        #[arg(long)]
        crop: Option<usize>,
        /// Also write the CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Count parameters and operations of a preset or configured model.
    Profile {
        /// paper-x2, paper-x3, paper-x4, desk, tiny or a config path.
        #[arg(default_value = "paper-x4")]
        model: String,
        #[arg(long, default_value = "3x256x256")]
        input_size: String,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
        /// Measure latency and peak heap use as well.
        #[arg(long)]
        bench: bool,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Compare shifted square windows with striped windows over a grid.
    BenchWindow {
        /// e.g. "C=8,16;HW=16,32;win=4x4,8x2"
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the desk-scale run configuration.
    InitConfig,
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config, out, resume } => {
            let o = commands::train(&config, &out, resume.as_deref())?;
            let tail = &o.log[o.log.len().saturating_sub(100)..];
            if !tail.is_empty() {
                let mean = tail.iter().map(|r| r.loss).sum::<f64>() / tail.len() as f64;
                println!("final loss (mean of last {} iterations): {mean:.5}", tail.len());
            }
            println!("wrote {}", o.final_checkpoint.display());
        }
        Command::Infer { checkpoint, input, output, scale } => {
            let sr = commands::infer(&checkpoint, &input, &output, scale)?;
            let s = sr.shape();
            println!("wrote {} ({}x{})", output.display(), s.w, s.h);
        }
        Command::Eval { checkpoint, dataset, scale, crop, csv } => {
            let (names, rows) = commands::eval(&checkpoint, &dataset, scale, crop)?;
            let text = eval_csv(&names, &rows);
            print!("{text}");
            if let Some(p) = csv {
                fsutil::write_atomic(&p, text.as_bytes())?;
            }
            let m = eval_means(&rows);
            eprintln!("mean PSNR {:.3} dB (bicubic {:.3}), SSIM {:.4} (bicubic {:.4})", m.psnr, m.bicubic_psnr, m.ssim, m.bicubic_ssim);
        }
        Command::Profile { model, input_size, json, csv, bench, trials } => {
            let r = commands::profile(&model, &input_size, bench.then_some(trials))?;
            match (json, csv) {
                (true, _) => println!("{}", complexity_json(&r)),
                (_, true) => print!("{}", complexity_csv(&r)),
                _ => print!("{}", complexity_table(&r)),
            }
        }
        Command::BenchWindow { grid, trials, out } => {
            let text = commands::bench(&grid, trials)?;
            match out {
                Some(p) => fsutil::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::InitConfig => println!("{}", RunConfig::desk().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
