//! The `sewdiff` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation or I/O error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::conditioning::{ConditionBundle, Sketch};
use crate::denoiser;
use crate::engine::{self, Modality, Model, RunConfig, SampleOutput};
use crate::metrics::{evaluate, EvalReport};
use crate::pattern::{load_pattern, save_pattern, Pattern};
use crate::synthgen::{generate_corpus, read_corpus, render_svg, write_corpus, CorpusEntry, MANIFEST_FILE};
use crate::tokenizer::{compute_stats, decode, encode, load_grid, save_grid, DecodeOptions, NormStats, TokenLayout};
use crate::{Error, Result};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "GDK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sewdiff", version, about = "Diffusion generation of 3D sewing patterns")]
pub struct Cli {
    /// Worker threads (default: all cores). GDK_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus of patterns, captions and sketches.
    GenDataset {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute per-dimension normalization statistics over a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "dresscode")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a pattern JSON file into a binary token grid.
    Tokenize {
        #[arg(long, default_value = "dresscode")]
        preset: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shuffle panel order using --seed.
        #[arg(long)]
        shuffle: bool,
    },
    /// Decode a binary token grid back into pattern JSON.
    Detokenize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Train a model on a corpus; writes config, stats, checkpoint and loss CSV.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Precomputed statistics; computed from the corpus otherwise.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Override the configured step cap.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Generate a pattern from text and/or a sketch.
    Sample {
        #[command(flatten)]
        gen: GenerateArgs,
        /// Generate one pattern per entry of this corpus, conditioned on its
        /// caption and/or sketch, and write them into the --out directory.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Conditions used with --corpus.
        #[arg(long, default_value = "text", value_parser = parse_modality)]
        modality: Modality,
    },
    /// Generate the panels missing from a partial pattern.
    Complete {
        #[command(flatten)]
        gen: GenerateArgs,
        /// Pattern whose panels are kept verbatim.
        #[arg(long)]
        fragment: PathBuf,
        /// Keep only the first k panels of the fragment.
        #[arg(long)]
        panels: Option<usize>,
    },
    /// Score predicted patterns against ground truth.
    Eval {
        /// Pattern file, directory of pattern files, or corpus directory.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Draw a pattern's panels as SVG.
    RenderSvg {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic denoiser gradients with finite differences in f64.
    Gradcheck {
        /// Run configuration whose denoiser is checked (default: desk dresscode).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        coords: usize,
        /// Fail when the worst relative error reaches this.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Trained model directory.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub text: Option<String>,
    /// 64×64 binary PGM sketch.
    #[arg(long)]
    pub sketch: Option<PathBuf>,
    /// Inference steps (default: the model's configured count).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output pattern JSON (a directory with --corpus).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Also write the raw token grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    Modality::parse(s).map_err(|e| e.to_string())
}

/// Thread count: `GDK_THREADS` if set, then `--threads`, then all cores.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<usize> {
    let n = match env {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        None => match flag {
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(Error::InvalidArgument("thread count must be positive".into()));
    }
    Ok(n)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let env = std::env::var(THREADS_ENV).ok();
    let threads = resolve_threads(cli.threads, env.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let seed = cli.seed;
    pool.install(|| dispatch(cli.command, seed))
}

fn dispatch(command: Command, seed: Option<u64>) -> Result<()> {
    let seed_or_zero = seed.unwrap_or(0);
    match command {
        Command::GenDataset { n, out } => {
            let entries = generate_corpus(n, seed_or_zero);
            let manifest = write_corpus(&out, &entries, seed_or_zero)?;
            eprintln!("wrote {} entries to {}", manifest.count, out.display());
        }
        Command::Stats { corpus, preset, out } => {
            let layout = TokenLayout::preset(&preset)?;
            let (_, entries) = read_corpus(&corpus)?;
            let pats: Vec<Pattern> = entries.into_iter().map(|e| e.pattern).collect();
            compute_stats(&pats, &layout)?.save(&out)?;
        }
        Command::Tokenize { preset, input, stats, out, shuffle } => {
            let layout = TokenLayout::preset(&preset)?;
            let stats = NormStats::load(&stats)?;
            let grid = encode(&load_pattern(&input)?, &layout, &stats, shuffle.then_some(seed_or_zero))?;
            save_grid(&grid, &out)?;
            eprintln!("{} rows × {} columns", grid.rows(), layout.token_width());
        }
        Command::Detokenize { input, stats, out, svg } => {
            let grid = load_grid(&input)?;
            let stats = NormStats::load(&stats)?;
            let d = decode(&grid.values, &grid.layout, &stats, &DecodeOptions::default())?;
            write_pattern(&d.pattern, &out, svg.as_deref())?;
        }
        Command::Train { corpus, out, config, stats, max_steps } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if max_steps.is_some() {
                cfg.max_steps = max_steps;
            }
            let (_, entries) = read_corpus(&corpus)?;
            let stats = match stats {
                Some(p) => NormStats::load(&p)?,
                None => {
                    let pats: Vec<Pattern> = entries.iter().map(|e| e.pattern.clone()).collect();
                    compute_stats(&pats, &cfg.layout()?)?
                }
            };
            let mut report = |r: &engine::LossRecord| {
                if r.step % 100 == 0 {
                    eprintln!("step {:>6}  loss {:.5}  {}", r.step, r.loss, r.modality.name());
                }
            };
            let outcome = engine::train(&entries, stats, cfg, Some(&out), Some(&mut report))?;
            eprintln!(
                "stopped ({:?}) after {} steps; best moving-average loss {:.5} at step {}",
                outcome.stop,
                outcome.trace.len(),
                outcome.best_loss,
                outcome.best_step
            );
        }
        Command::Sample { gen, corpus, modality } => {
            let model = Model::load(&gen.model)?;
            let steps = gen.steps.unwrap_or(model.config.scheduler.inference_steps);
            match corpus {
                None => {
                    let cond = gen_conditions(&model, &gen)?;
                    let out = engine::sample(&model, &cond, steps, seed_or_zero)?;
                    write_output(&out, &gen)?;
                }
                Some(dir) => {
                    let (manifest, entries) = read_corpus(&dir)?;
                    std::fs::create_dir_all(&gen.out).map_err(|e| Error::io(&gen.out, e))?;
                    for (i, (m, e)) in manifest.entries.iter().zip(&entries).enumerate() {
                        let cond = entry_conditions(&model, e, modality)?;
                        let out = engine::sample(&model, &cond, steps, seed_or_zero.wrapping_add(i as u64))?;
                        save_pattern(&out.decoded.pattern, &gen.out.join(format!("{}.json", m.id)))?;
                    }
                    eprintln!("wrote {} samples to {}", entries.len(), gen.out.display());
                }
            }
        }
        Command::Complete { gen, fragment, panels } => {
            let model = Model::load(&gen.model)?;
            let steps = gen.steps.unwrap_or(model.config.scheduler.inference_steps);
            let mut frag = load_pattern(&fragment)?;
            if let Some(k) = panels {
                frag = frag.prefix(k);
            }
            let cond = gen_conditions(&model, &gen)?;
            let out = engine::complete(&model, &frag, &cond, steps, seed_or_zero)?;
            write_output(&out, &gen)?;
        }
        Command::Eval { pred, gt, json } => {
            let preds = load_patterns(&pred)?;
            let gts = load_patterns(&gt)?;
            if preds.len() != gts.len() {
                return Err(Error::Validation(format!(
                    "{} predictions but {} ground-truth patterns",
                    preds.len(),
                    gts.len()
                )));
            }
            let pairs: Vec<(Pattern, Pattern)> = preds.into_iter().zip(gts).collect();
            let report = evaluate(&pairs);
            print!("{}", report.to_table());
            if let Some(path) = json {
                write_report(&report, &path)?;
            }
        }
        Command::RenderSvg { input, out } => {
            let p = load_pattern(&input)?;
            std::fs::write(&out, render_svg(&p)).map_err(|e| Error::io(&out, e))?;
        }
        Command::Gradcheck { config, coords, tolerance } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            let report = denoiser::gradcheck(cfg.denoiser_config()?, seed_or_zero, coords)?;
            let max = report.max_rel_error();
            println!("checked {} coordinates; max relative error {max:.3e}", report.checks.len());
            if !(max < tolerance) {
                let w = report.worst().expect("at least one coordinate");
                return Err(Error::Numerical(format!(
                    "gradient mismatch at {}[{}]: analytic {:.6e}, numeric {:.6e}",
                    w.param, w.offset, w.analytic, w.numeric
                )));
            }
        }
    }
    Ok(())
}

fn gen_conditions(model: &Model, gen: &GenerateArgs) -> Result<ConditionBundle> {
    let sketch = gen.sketch.as_deref().map(Sketch::load).transpose()?;
    model.conditions(gen.text.as_deref(), sketch.as_ref())
}

fn entry_conditions(model: &Model, e: &CorpusEntry, modality: Modality) -> Result<ConditionBundle> {
    let text = model.config.caption.pick(e);
    match modality {
        Modality::Text => model.conditions(Some(text), None),
        Modality::Image => model.conditions(None, Some(&e.sketch)),
        Modality::Both => model.conditions(Some(text), Some(&e.sketch)),
    }
}

fn write_pattern(p: &Pattern, out: &Path, svg: Option<&Path>) -> Result<()> {
    save_pattern(p, out)?;
    if let Some(svg) = svg {
        std::fs::write(svg, render_svg(p)).map_err(|e| Error::io(svg, e))?;
    }
    Ok(())
}

fn write_output(out: &SampleOutput, gen: &GenerateArgs) -> Result<()> {
    if out.decoded.dropped_panels > 0 {
        eprintln!("dropped {} degenerate panels", out.decoded.dropped_panels);
    }
    write_pattern(&out.decoded.pattern, &gen.out, gen.svg.as_deref())?;
    if let Some(g) = &gen.grid {
        save_grid(&out.grid, g)?;
    }
    Ok(())
}

fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// A single pattern file, a corpus directory, or a directory of `*.json`
/// pattern files taken in name order.
pub fn load_patterns(path: &Path) -> Result<Vec<Pattern>> {
    if path.is_file() {
        return Ok(vec![load_pattern(path)?]);
    }
    if path.join(MANIFEST_FILE).is_file() {
        return Ok(read_corpus(path)?.1.into_iter().map(|e| e.pattern).collect());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(|p| load_pattern(p)).collect()
}
