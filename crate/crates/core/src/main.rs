use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use splicefuse::pipeline::{
    cmd_evaluate, cmd_extract, cmd_predict, cmd_train, selftest, verdict_exit_code, Layout, PipelineConfig,
    DEFAULT_OUT_DIR,
};
use splicefuse::Result;

#[derive(Parser, Debug)]
#[command(
    name = "splicefuse",
    version,
    about = "Fused splicing detection on 128x128 grayscale blocks"
)]
struct Cli {
    /// key = value configuration file; defaults apply to missing keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// worker threads (0 = one per core)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// output directory
    #[arg(long, global = true, env = "SPLICEFUSE_OUT")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the three feature tables for the dataset
    Extract,
    /// Train one bundle per (run, feature count) cell
    Train,
    /// Rescore bundles and write the sensitivity/specificity tables
    Evaluate,
    /// Classify one image (exit 0 authentic, 2 forged, 1 error)
    Predict {
        /// trained bundle directory
        #[arg(long)]
        bundle: PathBuf,
        image: PathBuf,
    },
    /// Numeric checks plus a small synthetic end-to-end run
    Selftest,
    /// Print the effective configuration
    ShowConfig,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<i32> {
    let config = load_config(cli)?;
    let layout = Layout::new(cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)));
    match &cli.command {
        Command::Extract => {
            let s = cmd_extract(&config, &layout)?;
            println!(
                "extracted {} blocks ({} rejected) into {}",
                s.blocks,
                s.rejected,
                layout.features_dir().display()
            );
        }
        Command::Train => {
            let cells = cmd_train(&config, &layout)?;
            let mut failed = 0;
            for c in &cells {
                match &c.result {
                    Ok(_) => println!("run {} k={}: ok", c.run_index, c.k),
                    Err(why) => {
                        failed += 1;
                        println!("run {} k={}: FAILED {why}", c.run_index, c.k);
                    }
                }
            }
            println!("{} of {} cells trained", cells.len() - failed, cells.len());
        }
        Command::Evaluate => {
            let s = cmd_evaluate(&config, &layout)?;
            for (r, k, why) in &s.missing {
                eprintln!("run {r} k={k}: NA ({why})");
            }
            for path in [
                layout.table(splicefuse::eval::Metric::Sensitivity),
                layout.table(splicefuse::eval::Metric::Specificity),
            ] {
                println!("{}", path.display());
                print!("{}", std::fs::read_to_string(&path).unwrap_or_default());
            }
        }
        Command::Predict { bundle, image } => {
            let p = cmd_predict(bundle, image)?;
            println!("{p}");
            return Ok(verdict_exit_code(p.scores.verdict));
        }
        Command::Selftest => {
            let checks = selftest(&layout.root.join("selftest"), config.seed, config.workers)?;
            let mut ok = true;
            for c in &checks {
                println!("{c}");
                ok &= c.passed;
            }
            return Ok(if ok { 0 } else { 1 });
        }
        Command::ShowConfig => print!("{}", config.to_text()),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
