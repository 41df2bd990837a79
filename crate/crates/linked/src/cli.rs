//! The `linked` command line.
//!
//! Settings resolve as flags, then the `--config` file, then defaults.
//! Exit codes: 0 on success, 1 when a stage fails, 2 on usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linked_core::{MockWorldSpec, Question, Strategy};

use crate::bench::{reference_scenarios, synthetic_questions};
use crate::config::PipelineConfig;
use crate::error::Error;
use crate::io::{load_dataset, write_dataset, DatasetFormat};
use crate::pipeline::{self, SweepParam};
use crate::report::render_table;
use crate::scorer::ScorerChoice;

#[derive(Debug, Parser)]
#[command(name = "linked", version, about = "Knowledge elicitation, leveling and marginal consistent reasoning")]
pub struct Cli {
    #[command(flatten)]
    pub settings: Settings,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for the run configuration. Unset flags fall back to the
/// config file, then to defaults.
#[derive(Debug, Default, Args)]
pub struct Settings {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Chat completions base URL, or `mock` for the offline backend.
    #[arg(long, global = true)]
    pub llm_endpoint: Option<String>,
    #[arg(long, global = true, env = "LINKED_SCORER_URL")]
    pub scorer_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub cache_dir: Option<String>,
    /// Disable the response cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[arg(long, global = true)]
    pub concurrency_limit: Option<u32>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub knowledge_temperature: Option<f64>,
    #[arg(long, global = true)]
    pub knowledge_samples: Option<u32>,
    #[arg(long, global = true)]
    pub answer_temperature: Option<f64>,
    #[arg(long, visible_alias = "n", global = true)]
    pub answer_samples: Option<u32>,
    #[arg(long, global = true)]
    pub top_k: Option<u32>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Suppress JSON progress events on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

impl Settings {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($dst:tt)+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($dst)+ = v;
                }
            };
        }
        set!(model => model);
        set!(llm_endpoint => run.llm_endpoint);
        set!(cache_dir => run.cache_dir);
        set!(concurrency_limit => run.concurrency_limit);
        set!(seed => run.seed);
        set!(knowledge_temperature => run.knowledge_temperature);
        set!(knowledge_samples => run.knowledge_samples);
        set!(answer_temperature => run.answer_temperature);
        set!(answer_samples => run.answer_samples);
        set!(top_k => run.top_k);
        set!(max_retries => max_retries);
        if let Some(s) = &self.scorer_endpoint {
            c.run.scorer_endpoint = Some(s.clone());
        }
        if self.no_cache {
            c.run.cache_dir = String::new();
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate knowledge pieces for every question.
    Elicit {
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for knowledge.jsonl and elicit_failures.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Level every knowledge piece by answering with and without it.
    Label {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        /// Labeled pool file; answers go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write scorer training and validation triples.
    Prep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        val_fraction: Option<f64>,
    },
    /// Run one reasoning strategy.
    Reason {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value = "mcr")]
        strategy: Strategy,
        #[arg(long, default_value = "oracle")]
        scorer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare outcome files against a baseline.
    Eval {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        method: Vec<PathBuf>,
        #[arg(long, default_value = "dataset")]
        dataset_tag: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run one strategy across values of a parameter.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, required = true, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value = "mcr")]
        strategy: Strategy,
        #[arg(long, default_value = "oracle")]
        scorer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// elicit, label, prep, reason and eval in one go.
    Pipeline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "mcr", value_delimiter = ',')]
        strategies: Vec<Strategy>,
        #[arg(long, default_value = "oracle")]
        scorer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline on a synthetic dataset against the offline mock.
    MockBench {
        #[arg(long, default_value_t = 200)]
        questions: usize,
        #[arg(long, default_value_t = 2)]
        options: usize,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        p_pos: Option<f64>,
        #[arg(long)]
        p_neg: Option<f64>,
        #[arg(long)]
        positive_rate: Option<f64>,
        #[arg(long, default_value = "mcr,cot_sc", value_delimiter = ',')]
        strategies: Vec<Strategy>,
        /// Questions per reference scenario; 0 skips them.
        #[arg(long, default_value_t = 1000)]
        scenario_questions: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stage(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Stage(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Stage(_) => ExitCode::from(1),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Stage(e) => write!(f, "error: {e}"),
        }
    }
}

fn parse_scorer(spec: &str, cfg: &PipelineConfig) -> Result<ScorerChoice, CliError> {
    match spec.split_once(':').unwrap_or((spec, "")) {
        ("oracle", "") => Ok(ScorerChoice::Oracle),
        ("constant", v) => {
            let v = if v.is_empty() {
                0.5
            } else {
                v.parse().map_err(|_| CliError::Usage(format!("bad constant score {v:?}")))?
            };
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Usage(format!("constant score {v} outside [0, 1]")));
            }
            Ok(ScorerChoice::Constant(v))
        }
        ("remote", "") => match &cfg.run.scorer_endpoint {
            Some(url) => Ok(ScorerChoice::Remote(url.clone())),
            None => {
                Err(CliError::Usage("--scorer remote needs --scorer-endpoint or scorer_endpoint in the config".into()))
            }
        },
        _ => Err(CliError::Usage(format!("unknown scorer {spec:?} (oracle, constant[:v], remote)"))),
    }
}

fn dataset(path: &Path) -> Result<Vec<Question>, CliError> {
    let qs = load_dataset(path, DatasetFormat::Jsonl).map_err(|e| CliError::Stage(e.into()))?;
    if qs.is_empty() {
        return Err(CliError::Stage(Error::Setup(format!("{}: no questions", path.display()))));
    }
    Ok(qs)
}

/// Parses `args` and runs the command.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    crate::log::set_quiet(cli.settings.quiet);
    let mut cfg = cli.settings.resolve()?;
    match cli.command {
        Command::Elicit { dataset: d, out } => {
            let qs = dataset(&d)?;
            let gw = cfg.gateway(&qs)?;
            pipeline::elicit_stage(&cfg, &gw, &d, &qs, &out)?;
        }
        Command::Label { dataset: d, pool, out } => {
            let qs = dataset(&d)?;
            let gw = cfg.gateway(&qs)?;
            pipeline::label_stage(&cfg, &gw, &d, &qs, &pool, &out)?;
        }
        Command::Prep { dataset: d, pool, out, val_fraction } => {
            let qs = dataset(&d)?;
            let v = val_fraction.unwrap_or(cfg.val_fraction);
            if !(v > 0.0 && v < 1.0) {
                return Err(CliError::Usage("--val-fraction must lie in (0, 1)".into()));
            }
            pipeline::prep_stage(&cfg, &d, &qs, &pool, &out, v, cfg.run.seed)?;
        }
        Command::Reason { dataset: d, pool, strategy, scorer, out } => {
            let scorer = parse_scorer(&scorer, &cfg)?;
            if strategy.needs_pool() && pool.is_none() {
                return Err(CliError::Usage(format!("strategy {strategy} needs --pool")));
            }
            let qs = dataset(&d)?;
            let gw = cfg.gateway(&qs)?;
            pipeline::reason_stage(&cfg, &gw, &d, &qs, pool.as_deref(), &scorer, strategy, &out)?;
        }
        Command::Eval { baseline, method, dataset_tag, out } => {
            let reports = pipeline::eval_stage(&baseline, &method, &out, &dataset_tag, None)?;
            print!("{}", render_table(&reports));
        }
        Command::Sweep { dataset: d, pool, param, values, strategy, scorer, out } => {
            let scorer = parse_scorer(&scorer, &cfg)?;
            let qs = dataset(&d)?;
            let gw = cfg.gateway(&qs)?;
            let reports = pipeline::sweep_stage(&cfg, &gw, &d, &qs, &pool, &scorer, strategy, param, &values, &out)?;
            print!("{}", render_table(&reports));
        }
        Command::Pipeline { dataset: d, strategies, scorer, out } => {
            let scorer = parse_scorer(&scorer, &cfg)?;
            let qs = dataset(&d)?;
            let gw = cfg.gateway(&qs)?;
            let summary = pipeline::run_pipeline(&cfg, &gw, &d, &qs, &scorer, &strategies, &out)?;
            print!("{}", render_table(&summary.reports));
        }
        Command::MockBench {
            questions,
            options,
            p0,
            p_pos,
            p_neg,
            positive_rate,
            strategies,
            scenario_questions,
            out,
        } => {
            if questions == 0 || options < 2 {
                return Err(CliError::Usage("--questions must be positive and --options at least 2".into()));
            }
            let mut world = cfg.mock_world.clone().unwrap_or_default();
            world.p0 = p0.unwrap_or(world.p0);
            world.p_pos = p_pos.unwrap_or(world.p_pos);
            world.p_neg = p_neg.unwrap_or(world.p_neg);
            world.positive_rate = positive_rate.unwrap_or(world.positive_rate);
            world.seed = cfg.run.seed;
            world.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            cfg.mock_world = Some(MockWorldSpec { ..world });
            cfg.run.llm_endpoint = "mock".into();

            std::fs::create_dir_all(&out).map_err(|e| CliError::Stage(crate::DataError::io(&out, e).into()))?;
            let d = out.join("synthetic.jsonl");
            let qs = synthetic_questions(questions, options, cfg.run.seed, "synthetic");
            write_dataset(&qs, &d).map_err(|e| CliError::Stage(e.into()))?;
            let gw = cfg.gateway(&qs)?;
            let summary = pipeline::run_pipeline(&cfg, &gw, &d, &qs, &ScorerChoice::Oracle, &strategies, &out)?;
            print!("{}", render_table(&summary.reports));
            if scenario_questions > 0 {
                println!("\nreference scenarios ({scenario_questions} two-option questions, top_k 1, n 3):");
                for (rate, s) in reference_scenarios(scenario_questions, cfg.run.seed)? {
                    let accs: Vec<String> = s.runs.iter().map(|(st, r)| format!("{st} {:.3}", r.accuracy)).collect();
                    println!("  positive_rate {rate:.1}: {} ({:.1}s)", accs.join(", "), s.elapsed.as_secs_f64());
                }
            }
        }
    }
    Ok(())
}
