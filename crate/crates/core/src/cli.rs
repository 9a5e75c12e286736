//! Command-line front end. Every command resolves a [`RunConfig`] from the
//! defaults, an optional `key = value` file and `--set key=value` overrides,
//! and writes that resolved config as a `.cfg` sidecar next to each artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affinity::{load_personalities, CustomerPersonality, Trait};
use crate::ddpg::{Checkpoint, TrainConfig};
use crate::error::Error;
use crate::market::{generate_synthetic, load_price_csv, PriceSeries, SyntheticMarketConfig, DEFAULT_MONTHS};
use crate::orchestrator::{
    compare, reference_customers, train_orchestrator, weights_csv, CustomerProfile, Orchestrator,
};
use crate::prototypes::{export_schedule, load_prototypes, train_prototype, PrototypeAgent};
use crate::statespace::{
    converge_trajectory, estimate_attractors, extract_trajectory, synth_dataset, synth_transactions,
    train_personality_rnn, trajectories_csv, PersonalityRnn, RnnTrainConfig,
};

/// Seed offset separating held-out customers from the training set.
const HOLDOUT_SEED_OFFSET: u64 = 1_000;

/// Everything that determines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub months: usize,
    pub market: SyntheticMarketConfig,
    pub train: TrainConfig,
    pub rnn: RnnTrainConfig,
    /// Synthetic customers used to fit the personality model.
    pub rnn_samples: usize,
    /// Held-out synthetic customers traced through the model.
    pub test_customers: usize,
    /// State samples for the attractor fit, counting the 8 cube corners.
    pub grid_points: usize,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            months: DEFAULT_MONTHS,
            market: SyntheticMarketConfig::default(),
            train: TrainConfig::default(),
            rnn: RnnTrainConfig::default(),
            rnn_samples: 1000,
            test_customers: 500,
            grid_points: 1008,
            repeats: 100,
        }
    }
}

impl RunConfig {
    /// Applies `key = value` assignments with dotted keys such as
    /// `train.episodes`. Values are parsed with the type of the current one.
    pub fn apply(&mut self, assignments: &[(String, String)]) -> Result<(), CliError> {
        let mut tree = serde_json::to_value(&*self).map_err(|e| CliError::Usage(e.to_string()))?;
        for (key, raw) in assignments {
            let slot = key
                .split('.')
                .try_fold(&mut tree, |node, part| node.get_mut(part))
                .filter(|v| !v.is_object())
                .ok_or_else(|| CliError::Usage(format!("unknown config key '{key}'")))?;
            *slot = parse_like(slot, raw).ok_or_else(|| CliError::Usage(format!("invalid value '{raw}' for '{key}'")))?;
        }
        *self = serde_json::from_value(tree).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    /// Sorted `key = value` lines; reading them back reproduces the config.
    pub fn to_kv_string(&self) -> String {
        let mut flat = BTreeMap::new();
        flatten("", &serde_json::to_value(self).expect("config serializes"), &mut flat);
        flat.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse_like(current: &Value, raw: &str) -> Option<Value> {
    let raw = raw.trim();
    match current {
        Value::Bool(_) => raw.parse::<bool>().ok().map(Value::Bool),
        Value::Number(n) if n.is_u64() => raw.parse::<u64>().ok().map(Value::from),
        Value::Number(_) => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Value::from),
        Value::String(_) => Some(Value::String(raw.to_string())),
        _ => None,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(Error::Divergence { .. } | Error::NonFinite { .. } | Error::Singular { .. }) => 3,
            CliError::Run(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "affinity", version, about = "Personality-regularized investment agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for setting market.seed, train.seed and rnn.seed together.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic monthly price series.
    MarketGen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train prototype agents on a price series.
    TrainProto {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Personality trait to train (name or initial letter).
        #[arg(long = "trait", conflicts_with = "all", required_unless_present = "all")]
        personality_trait: Option<Trait>,
        /// Train all five prototypes, one worker thread each.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train one orchestrator per customer.
    TrainOrchestrate {
        #[arg(long)]
        prices: PathBuf,
        /// Directory holding the five prototype checkpoints.
        #[arg(long)]
        protos: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        customers: CustomerArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare orchestrated and linear strategies per customer.
    Compare {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        protos: PathBuf,
        /// Directory holding the orchestrator checkpoints.
        #[arg(long)]
        orchestrators: PathBuf,
        /// Report CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Where per-customer strategy CSVs go; defaults to the report's directory.
        #[arg(long)]
        strategy_dir: Option<PathBuf>,
        #[command(flatten)]
        customers: CustomerArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Locate state-space attractors of the personality model.
    Attractors {
        /// Trained model JSON.
        #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
        model: Option<PathBuf>,
        /// Train a model on synthetic customers first.
        #[arg(long)]
        synth: bool,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CustomerArgs {
    /// Personality CSV; the four reference customers when omitted.
    #[arg(long)]
    pub customers: Option<PathBuf>,
    /// Personality model whose converged state on each customer's synthetic
    /// transactions becomes the behavioral feature.
    #[arg(long)]
    pub behavior_model: Option<PathBuf>,
}

fn resolve(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cfg.apply(&parse_kv(&text)?)?;
    }
    let mut overrides = Vec::new();
    if let Some(seed) = args.seed {
        for key in ["market.seed", "train.seed", "rnn.seed"] {
            overrides.push((key.to_string(), seed.to_string()));
        }
    }
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{o}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    cfg.apply(&overrides)?;
    cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Writes `contents` to `path` and the resolved config to `path.cfg`.
fn write_artifact(path: &Path, contents: &str, cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".cfg");
    let sidecar = PathBuf::from(sidecar);
    std::fs::write(&sidecar, cfg.to_kv_string()).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

pub fn proto_checkpoint_path(dir: &Path, t: Trait) -> PathBuf {
    dir.join(format!("proto_{}.json", t.name()))
}

pub fn orchestrator_checkpoint_path(dir: &Path, customer_id: &str) -> PathBuf {
    dir.join(format!("orch_{customer_id}.json"))
}

fn load_protos(dir: &Path, series: &PriceSeries) -> Result<[PrototypeAgent; 5], CliError> {
    let checkpoints = Trait::ALL
        .iter()
        .map(|&t| Checkpoint::load(&proto_checkpoint_path(dir, t)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(load_prototypes(&checkpoints, series)?)
}

fn load_customers(args: &CustomerArgs, cfg: &RunConfig) -> Result<Vec<CustomerProfile>, CliError> {
    let base: Vec<CustomerPersonality> = match &args.customers {
        Some(path) => load_personalities(path)?,
        None => reference_customers()?
            .into_iter()
            .map(|c| CustomerPersonality {
                id: c.id,
                personality: c.personality,
            })
            .collect(),
    };
    let model = args.behavior_model.as_deref().map(PersonalityRnn::load).transpose()?;
    base.into_iter()
        .enumerate()
        .map(|(i, c)| {
            let trajectory = match &model {
                Some(rnn) => {
                    let (history, _) = synth_transactions(&c.personality, cfg.rnn.seed.wrapping_add(i as u64));
                    Some(converge_trajectory(rnn, &history, cfg.repeats)?)
                }
                None => None,
            };
            Ok(CustomerProfile::new(c.id, c.personality, trajectory)?)
        })
        .collect()
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::MarketGen { out, cfg } => {
            let cfg = resolve(&cfg)?;
            let series = generate_synthetic(&cfg.market, cfg.months)?;
            write_artifact(&out, &series.to_csv_string(), &cfg)
        }
        Command::TrainProto {
            prices,
            out_dir,
            personality_trait,
            all,
            cfg,
        } => {
            let cfg = resolve(&cfg)?;
            let series = load_price_csv(&prices)?;
            let traits: Vec<Trait> = if all { Trait::ALL.to_vec() } else { personality_trait.into_iter().collect() };
            let results: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = traits
                    .iter()
                    .map(|&t| {
                        let (series, train) = (&series, &cfg.train);
                        scope.spawn(move || train_prototype(t, series, train))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
            });
            for (t, result) in traits.iter().zip(results) {
                let (agent, log) = result?;
                let base = proto_checkpoint_path(&out_dir, *t);
                write_artifact(&base, &agent.checkpoint(&cfg.train).to_json(), &cfg)?;
                write_artifact(&out_dir.join(format!("proto_{}_schedule.csv", t.name())), &export_schedule(&agent, &series)?, &cfg)?;
                write_artifact(&out_dir.join(format!("proto_{}_log.csv", t.name())), &log.to_csv_string(), &cfg)?;
            }
            Ok(())
        }
        Command::TrainOrchestrate {
            prices,
            protos,
            out_dir,
            customers,
            cfg,
        } => {
            let cfg = resolve(&cfg)?;
            let series = load_price_csv(&prices)?;
            let prototypes = load_protos(&protos, &series)?;
            for customer in load_customers(&customers, &cfg)? {
                let (orch, outcome) = train_orchestrator(&customer, &prototypes, &series, &cfg.train)?;
                write_artifact(
                    &orchestrator_checkpoint_path(&out_dir, &customer.id),
                    &orch.checkpoint(&cfg.train).to_json(),
                    &cfg,
                )?;
                write_artifact(&out_dir.join(format!("orch_{}_log.csv", customer.id)), &outcome.log.to_csv_string(), &cfg)?;
            }
            Ok(())
        }
        Command::Compare {
            prices,
            protos,
            orchestrators,
            out,
            strategy_dir,
            customers,
            cfg,
        } => {
            let cfg = resolve(&cfg)?;
            let series = load_price_csv(&prices)?;
            let customers = load_customers(&customers, &cfg)?;
            let prototypes = load_protos(&protos, &series)?;
            let orchs = customers
                .into_iter()
                .map(|c| {
                    let ckpt = Checkpoint::load(&orchestrator_checkpoint_path(&orchestrators, &c.id))?;
                    Orchestrator::from_checkpoint(&ckpt, c)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = compare(&orchs, &prototypes, &series)?;
            write_artifact(&out, &report.to_csv_string(), &cfg)?;
            let dir = strategy_dir.unwrap_or_else(|| out.parent().map(Path::to_path_buf).unwrap_or_default());
            for o in &orchs {
                let episode = o.rollout(&prototypes, &series)?;
                write_artifact(&dir.join(format!("strategy_{}.csv", o.customer.id)), &episode.to_csv_string(), &cfg)?;
                let weights = o.weight_schedule(&prototypes, &series)?;
                write_artifact(&dir.join(format!("weights_{}.csv", o.customer.id)), &weights_csv(&weights), &cfg)?;
            }
            Ok(())
        }
        Command::Attractors { model, synth, out_dir, cfg } => {
            let cfg = resolve(&cfg)?;
            let rnn = match model {
                Some(path) if !synth => PersonalityRnn::load(&path)?,
                _ => {
                    let data = synth_dataset(cfg.rnn_samples, cfg.rnn.seed);
                    let (rnn, losses) = train_personality_rnn(&data, &cfg.rnn)?;
                    write_artifact(&out_dir.join("personality_model.json"), &rnn.to_json(), &cfg)?;
                    let mut log = String::from("epoch,loss\n");
                    for (e, l) in losses.iter().enumerate() {
                        log.push_str(&format!("{e},{l}\n"));
                    }
                    write_artifact(&out_dir.join("personality_log.csv"), &log, &cfg)?;
                    rnn
                }
            };
            let mut set = estimate_attractors(&rnn, cfg.grid_points)?;
            let test = synth_dataset(cfg.test_customers, cfg.rnn.seed.wrapping_add(HOLDOUT_SEED_OFFSET));
            let mut rows = Vec::with_capacity(test.len());
            let mut terminal = Vec::with_capacity(test.len());
            let mut hits = 0usize;
            for (i, d) in test.iter().enumerate() {
                let converged = converge_trajectory(&rnn, &d.history, cfg.repeats)?;
                let end = converged.terminal();
                let dominant = d.personality.dominant_trait();
                hits += usize::from(set.nearest(&end) == dominant);
                terminal.push((dominant, end));
                rows.push((format!("c{i}"), extract_trajectory(&rnn, &d.history)?));
            }
            set.classify_shapes(&terminal)?;
            write_artifact(&out_dir.join("attractors.csv"), &set.to_csv_string(), &cfg)?;
            write_artifact(&out_dir.join("trajectories.csv"), &trajectories_csv(&rows), &cfg)?;
            if !test.is_empty() {
                println!(
                    "nearest-attractor labeling: {hits}/{} ({:.3})",
                    test.len(),
                    hits as f64 / test.len() as f64
                );
            }
            Ok(())
        }
    }
}
