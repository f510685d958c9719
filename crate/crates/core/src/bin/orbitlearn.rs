use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use orbitlearn::characterize::SetLabel;
use orbitlearn::config::Config;
use orbitlearn::pipeline::{self, IcList};
use orbitlearn::{Error, Result};

#[derive(Parser)]
#[command(name = "orbitlearn", version, about = "Learn and characterize small-body gravity models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample pairs of collision-free initial conditions.
    GenIcs {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional config for the field, element ranges and screen.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train and characterize one model.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ic_index: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ics: Option<PathBuf>,
    },
    /// Run every (instance, initial condition) pair of a sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ics: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a run or sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn ics_path(cli: Option<PathBuf>, cfg: &Config) -> Result<PathBuf> {
    cli.or_else(|| cfg.ics.clone())
        .ok_or_else(|| Error::Config("no initial-condition list given (--ics or run.ics)".into()))
}

fn gen_ics(count: usize, seed: u64, out: &Path, config: Option<&Path>) -> Result<()> {
    let ctx = match config {
        Some(p) => Config::load(p)?.context,
        None => orbitlearn::config::ContextConfig::paper_default()?,
    };
    let list = pipeline::generate_ic_list(&ctx, count, seed)?;
    list.write(out)?;
    log::info!("wrote {} pairs to {}", list.pairs.len(), out.display());
    Ok(())
}

fn run(config: &Path, ic_index: usize, out: &Path, ics: Option<PathBuf>) -> Result<()> {
    let cfg = Config::load(config)?;
    let list = IcList::read(&ics_path(ics, &cfg)?)?;
    let pair = list.get(ic_index)?;
    let outcome = pipeline::run_single(&cfg.context, &cfg.run, pair, &cfg.hash())?;
    pipeline::write_run_outputs(&outcome, out)?;
    let c = &outcome.report.characterization;
    println!(
        "{} ic {}: train {:.4e}  interp {:.4e}  extrap {:.4e}",
        outcome.report.framework,
        ic_index,
        c.median(SetLabel::Train),
        c.median(SetLabel::InterpTest),
        c.median(SetLabel::ExtrapTest)
    );
    Ok(())
}

fn sweep(config: &Path, ics: Option<PathBuf>, out: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let list = IcList::read(&ics_path(ics, &cfg)?)?;
    let result = pipeline::run_sweep(&cfg.context, &cfg.sweep, &list, &cfg.hash())?;
    pipeline::emit_outputs(&result, &list, &cfg, out)?;
    print!("{}", pipeline::summary_csv(&result.aggregates));
    if result.aborted {
        return Err(Error::SweepAborted {
            failed: result.failures(),
            total: result.records.len(),
        });
    }
    Ok(())
}

fn report(input: &Path, format: Format) -> Result<()> {
    if pipeline::output_dir_is_sweep(input) {
        let result = pipeline::load_sweep(input)?;
        match format {
            Format::Csv => print!("{}", pipeline::summary_csv(&result.aggregates)),
            Format::Json => println!("{}", serde_json::to_string_pretty(&result.aggregates).expect("serializable")),
        }
    } else {
        let rep = pipeline::read_run_report(&pipeline::run_dir_report(input))?;
        match format {
            Format::Csv => {
                println!("set,median,q1,q3,min,max,count,excluded");
                for s in &rep.characterization.sets {
                    let m = &s.summary;
                    println!(
                        "{},{},{},{},{},{},{},{}",
                        s.label, m.median, m.q1, m.q3, m.min, m.max, m.count, m.excluded_count
                    );
                }
            }
            Format::Json => println!("{}", serde_json::to_string_pretty(&rep).expect("serializable")),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenIcs {
            count,
            seed,
            out,
            config,
        } => gen_ics(count, seed, &out, config.as_deref()),
        Command::Run {
            config,
            ic_index,
            out,
            ics,
        } => run(&config, ic_index, &out, ics),
        Command::Sweep { config, ics, out } => sweep(&config, ics, &out),
        Command::Report { input, format } => report(&input, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
