use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jndmap::commands::{self, Anchor, OutDir, PredictRequest};
use jndmap::config::{seed_from_env, DecompositionConfig, RunConfig};
use jndmap::tables::{self, CorpusPaths};
use jndmap::{CliError, Result};
use jndmap_core::screening::ScreeningMethod;
use jndmap_core::{BalanceBy, Direction, Family, GlmMode, SimSpec, TestKind};

/// Map VMAF differences to JND probabilities and predict JNDs.
#[derive(Parser, Debug)]
#[command(name = "jndmap", version, about)]
struct Cli {
    /// Worker threads (0: one per core). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline from the corpus tables to metrics.
    Run {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with known JNDs.
    Simulate {
        /// Simulation spec (JSON); the bundled default when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the bundled default spec and exit.
        #[arg(long)]
        print_spec: bool,
        #[arg(long, required_unless_present = "print_spec")]
        out: Option<PathBuf>,
    },
    /// Observer screening only.
    Screen {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair formation and significance labels.
    Classify {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sub-quality ranges and pair assignment.
    Decompose {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Co-distributions and mapping functions.
    Fit {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        ranges: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict one JND.
    Predict {
        /// mf_params.json
        #[arg(long)]
        models: PathBuf,
        /// ranges.json
        #[arg(long)]
        ranges: PathBuf,
        #[arg(long, conflicts_with_all = ["content", "recipe"])]
        anchor_vmaf: Option<f64>,
        /// vmaf_scores.csv holding the anchor named by --content/--recipe.
        #[arg(long, requires_all = ["content", "recipe"])]
        vmaf: Option<PathBuf>,
        #[arg(long)]
        content: Option<String>,
        #[arg(long)]
        recipe: Option<String>,
        #[arg(long, default_value = "dec", value_parser = parse_direction)]
        direction: Direction,
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
        #[arg(long, default_value = "glm", value_parser = parse_family)]
        family: Family,
        /// predictions.csv to append the row to.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score mapping functions against JND truths.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        ranges: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// SVG plots from curve_samples.csv (and codist.csv).
    Render {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        codist: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Directory holding vmaf_scores.csv, dcr_ratings.csv and optionally jnd_truth.csv.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, required_unless_present = "corpus")]
    vmaf: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
}

impl CorpusArgs {
    fn paths(&self) -> CorpusPaths {
        let mut p = match &self.corpus {
            Some(dir) => CorpusPaths::in_dir(dir),
            None => CorpusPaths { vmaf: PathBuf::new(), ratings: None, truth: None },
        };
        if let Some(v) = &self.vmaf {
            p.vmaf = v.clone();
        }
        if self.ratings.is_some() {
            p.ratings = self.ratings.clone();
        }
        if self.truth.is_some() {
            p.truth = self.truth.clone();
        }
        p
    }
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_enum::<TestKind>)]
    test: Option<TestKind>,
    #[arg(long, value_parser = parse_enum::<ScreeningMethod>)]
    screening: Option<ScreeningMethod>,
    /// Balanced decomposition into K ranges.
    #[arg(long, conflicts_with_all = ["width", "bounds"])]
    k: Option<usize>,
    #[arg(long, value_parser = parse_enum::<BalanceBy>)]
    balance_by: Option<BalanceBy>,
    /// Fixed-width decomposition.
    #[arg(long, conflicts_with = "bounds")]
    width: Option<f64>,
    /// Explicit decomposition bounds, e.g. 30,79,86,90,95,100.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<Family>>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_enum::<GlmMode>)]
    glm_mode: Option<GlmMode>,
    /// Score higher-order JNDs from a single step instead of chaining.
    #[arg(long)]
    no_chain: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => tables::read_json::<RunConfig>(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.test {
            c.test = v;
        }
        if let Some(v) = self.screening {
            c.screening = v;
        }
        if let Some(b) = &self.bounds {
            c.decomposition = DecompositionConfig::Explicit { bounds: b.clone() };
        } else if let Some(width) = self.width {
            c.decomposition = DecompositionConfig::FixedWidth { width };
        } else if self.k.is_some() || self.balance_by.is_some() {
            let (k0, by0) = match c.decomposition {
                DecompositionConfig::Balanced { k, balance_by } => (k, balance_by),
                _ => (5, BalanceBy::Stimuli),
            };
            c.decomposition =
                DecompositionConfig::Balanced { k: self.k.unwrap_or(k0), balance_by: self.balance_by.unwrap_or(by0) };
        }
        if let Some(v) = self.bin_width {
            c.bin_width = v;
        }
        if let Some(v) = &self.families {
            c.families = v.clone();
        }
        if let Some(v) = &self.thresholds {
            c.thresholds = v.clone();
        }
        if let Some(v) = self.glm_mode {
            c.glm_mode = v;
        }
        if self.no_chain {
            c.chain_orders = false;
        }
        if let Some(s) = seed_from_env()? {
            c.seed = s;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: jndmap_core::Error| e.to_string())
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse().map_err(|e: jndmap_core::Error| e.to_string())
}

fn print_grid(grid: &jndmap_core::EvalGrid) {
    print!("{}", jndmap::report::render_table(grid));
    if let Some(b) = grid.best_cell() {
        println!(
            "best: {} {} thr {} -> MAE {:.4}, RMSE {:.4} (n = {})",
            b.group(),
            b.family.label(),
            b.threshold,
            b.mae,
            b.rmse,
            b.n
        );
    }
}

fn with_out<T>(path: &Path, f: impl FnOnce(&mut OutDir) -> Result<T>) -> Result<T> {
    let mut out = OutDir::create(path)?;
    f(&mut out).inspect_err(|e| out.record_failure(e))
}

fn dispatch(cli: Cli) -> Result<()> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Run { corpus, config, out } => {
            let cfg = config.resolve()?;
            let summary = with_out(&out, |o| commands::run(&cfg, &corpus.paths(), o, jobs))?;
            println!(
                "{} observer(s) screened out; {} pairs ({} significant); {} ranges",
                summary.removed_observers,
                summary.pairs,
                summary.significant,
                summary.decomposition.ranges.len()
            );
            if let Some(grid) = &summary.grid {
                print_grid(grid);
            }
        }
        Command::Simulate { spec, seed, print_spec, out } => {
            if print_spec {
                print!("{}", commands::DEFAULT_SIM_SPEC);
                return Ok(());
            }
            let mut s: SimSpec = match &spec {
                Some(p) => tables::read_json(p)?,
                None => commands::default_sim_spec(),
            };
            if let Some(v) = seed_from_env()? {
                s.seed = v;
            }
            if let Some(v) = seed {
                s.seed = v;
            }
            let out = out.expect("clap enforces --out");
            let corpus = with_out(&out, |o| commands::simulate(&s, o))?;
            println!(
                "{} contents, {} stimuli, {} ratings, {} truths -> {}",
                corpus.contents().len(),
                corpus.stimuli().len(),
                corpus.ratings().len(),
                corpus.truths().len(),
                out.display()
            );
        }
        Command::Screen { corpus, config, out } => {
            let cfg = config.resolve()?;
            with_out(&out, |o| commands::screen(&cfg, &corpus.paths(), o))?;
        }
        Command::Classify { corpus, config, out } => {
            let cfg = config.resolve()?;
            with_out(&out, |o| commands::classify(&cfg, &corpus.paths(), jobs, o))?;
        }
        Command::Decompose { corpus, pairs, config, out } => {
            let cfg = config.resolve()?;
            let d = with_out(&out, |o| commands::decompose(&cfg, &corpus.paths(), &pairs, o))?;
            let ids: Vec<String> = d.ranges.iter().map(|r| r.id()).collect();
            println!("{}", ids.join(", "));
        }
        Command::Fit { pairs, ranges, config, out } => {
            let cfg = config.resolve()?;
            with_out(&out, |o| commands::fit(&cfg, &pairs, &ranges, jobs, o))?;
        }
        Command::Predict { models, ranges, anchor_vmaf, vmaf, content, recipe, direction, threshold, family, out } => {
            let anchor = match (anchor_vmaf, vmaf) {
                (Some(v), _) => Anchor::Vmaf(v),
                (None, Some(path)) => {
                    let (content, recipe) = (content.unwrap_or_default(), recipe.unwrap_or_default());
                    let (_, stimuli) = tables::read_stimuli(&path)?;
                    let s = stimuli
                        .into_iter()
                        .find(|s| s.content_id == content && s.recipe.recipe_id == recipe)
                        .ok_or_else(|| CliError::Usage(format!("no stimulus {content}/{recipe} in {}", path.display())))?;
                    Anchor::Stimulus(s)
                }
                (None, None) => return Err(CliError::Usage("give --anchor-vmaf or --vmaf with --content and --recipe".into())),
            };
            let req = PredictRequest { anchor, direction, threshold, family };
            let p = commands::predict(&models, &ranges, &req, out.as_deref())?;
            println!("{}", commands::describe(&p));
        }
        Command::Evaluate { corpus, models, ranges, config, out } => {
            let cfg = config.resolve()?;
            let grid = with_out(&out, |o| commands::evaluate(&cfg, &corpus.paths(), &models, &ranges, jobs, o))?;
            print_grid(&grid);
        }
        Command::Render { samples, codist, out } => {
            let files = with_out(&out, |o| commands::render(&samples, codist.as_deref(), o))?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
