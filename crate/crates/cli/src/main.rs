use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mthd_core::adaptation::{load_checkpoint, AdaptationConfig};
use mthd_core::seq2seq::TrainConfig;
use mthd_core::server::{resolve_config_path, serve, ServerConfig};
use mthd_core::simulator::{run_benchmark, EffortReport, LocalEngine, ModeSummary, RemoteEngine, SimMode};
use mthd_core::task::{train_checkpoint, ModelShape, TaskKind, TaskModel};
use mthd_core::textdata::{gen_synthetic_corpus, read_lines, write_lines, AntiquationRules, ParallelCorpus, TokenMode};

#[derive(Parser)]
#[command(name = "mthd", version, about = "Interactive, adaptive translation of historical text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Modernize,
    Normalize,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Modernize => TaskKind::Modernize,
            TaskArg::Normalize => TaskKind::Normalize,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Interactive,
    Static,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a parallel corpus.
    Train {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        embed: usize,
        #[arg(long, default_value_t = 128)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
    /// Translate one sentence per line; `-` reads stdin.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 6)]
        beam: usize,
    },
    /// Replay references as a simulated user and report the effort.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Learn from every validated sentence (interactive mode).
        #[arg(long)]
        adapt: bool,
        #[arg(long, default_value_t = AdaptationConfig::default().steps)]
        adapt_steps: usize,
        #[arg(long, default_value_t = AdaptationConfig::default().learning_rate)]
        adapt_lr: f64,
        /// Drive a running server instead of the model in process.
        #[arg(long)]
        via_server: Option<String>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Make an old-spelling corpus from modern text with rewrite rules.
    GenCorpus {
        /// Rule file; the shipped rule set when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_src: PathBuf,
        #[arg(long)]
        out_tgt: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        /// Defaults to $MTHD_CONFIG, then ./mthd.toml.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            task,
            src,
            tgt,
            out,
            epochs,
            lr,
            embed,
            hidden,
            seed,
            batch,
        } => {
            let corpus = ParallelCorpus::load(&src, &tgt)?;
            let shape = ModelShape {
                embed_dim: embed,
                hidden_dim: hidden,
                seed,
            };
            let config = TrainConfig {
                epochs,
                learning_rate: lr,
                batch_size: batch,
                seed,
            };
            eprintln!("training on {} pairs", corpus.len());
            let ck = train_checkpoint(&corpus, task.into(), shape, &config, |s| {
                eprintln!("epoch {:>3}  mean loss {:.4}", s.epoch, s.mean_loss)
            })?;
            ck.save(&out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Translate { model, input, beam } => {
            if beam == 0 {
                bail!("--beam must be at least 1");
            }
            let mut m = TaskModel::new(load_checkpoint(&model)?);
            m.beam_width = beam;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for line in input_lines(&input)? {
                let hyp = if line.trim().is_empty() { String::new() } else { m.translate(&line)? };
                writeln!(out, "{hyp}")?;
            }
        }
        Command::Simulate {
            model,
            src,
            reference,
            mode,
            adapt,
            adapt_steps,
            adapt_lr,
            via_server,
            report,
        } => {
            let corpus = ParallelCorpus::load(&src, &reference)?;
            let modes: &[SimMode] = match mode {
                ModeArg::Interactive => &[SimMode::Interactive],
                ModeArg::Static => &[SimMode::Static],
                ModeArg::Both => &[SimMode::Static, SimMode::Interactive],
            };
            let checkpoint = load_checkpoint(&model)?;
            let task = match checkpoint.model.config().mode {
                TokenMode::Char => TaskKind::Normalize,
                TokenMode::Word => TaskKind::Modernize,
            };
            let result = match via_server {
                Some(url) => run_benchmark(|| Ok(RemoteEngine::new(&url, task)), &corpus, modes, adapt)?,
                None => {
                    let adaptation = AdaptationConfig {
                        steps: adapt_steps,
                        learning_rate: adapt_lr,
                    };
                    let base = TaskModel::new(checkpoint);
                    run_benchmark(|| Ok(LocalEngine::new(base.clone(), adaptation)), &corpus, modes, adapt)?
                }
            };
            write_report(&report, &result)?;
            print_summary(&result);
        }
        Command::GenCorpus {
            rules,
            input,
            seed,
            out_src,
            out_tgt,
        } => {
            let rules = match rules {
                Some(p) => AntiquationRules::load(&p)?,
                None => AntiquationRules::default_set(),
            };
            let modern = read_lines(&input)?;
            let corpus = gen_synthetic_corpus(&modern, &rules, seed);
            write_lines(&out_src, corpus.sources())?;
            write_lines(&out_tgt, corpus.targets())?;
            eprintln!("wrote {} pairs", corpus.len());
        }
        Command::Serve { config } => {
            let path = resolve_config_path(config.as_deref());
            let config = ServerConfig::load(&path).with_context(|| format!("loading {}", path.display()))?;
            tokio::runtime::Runtime::new()?.block_on(serve(config))?;
        }
    }
    Ok(())
}

fn input_lines(path: &Path) -> Result<Vec<String>> {
    if path.as_os_str() == "-" {
        return Ok(io::stdin().lock().lines().collect::<io::Result<_>>()?);
    }
    Ok(read_lines(path)?)
}

fn write_report(path: &Path, report: &EffortReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_summary(report: &EffortReport) {
    let rows: [(&str, Option<&ModeSummary>); 3] = [
        ("static_post_edit", report.static_post_edit.as_ref().map(|r| &r.summary)),
        ("interactive", report.interactive.as_ref().map(|r| &r.summary)),
        ("interactive_adaptive", report.interactive_adaptive.as_ref().map(|r| &r.summary)),
    ];
    println!("{:<22} {:>9} {:>11} {:>8} {:>7} {:>8}", "mode", "sentences", "keystrokes", "mouse", "KSMR", "failed");
    for (name, s) in rows {
        if let Some(s) = s {
            println!(
                "{:<22} {:>9} {:>11} {:>8} {:>7.4} {:>8}",
                name, s.sentences, s.keystrokes, s.mouse_actions, s.ksmr, s.failures
            );
        }
    }
}
