//! Command-line surface.
//!
//! Every leaf command accepts `--config <file.json>`: a JSON object whose keys
//! are the command's long flag names in snake_case. Keys present in the file
//! replace the values given on the command line.

use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    augment_rotations, dataset_stats, derive_decision_trace, load_dataset, load_samples, save_samples, synth_dataset, Dataset, RecordJson, SynthParams,
    ARCHETYPES,
};
use crate::dgmlg::{sample, train, Dgmlg, ModelConfig, OffsetHead, SampleOptions, TrainConfig};
use crate::geometry::LegoGraph;
use crate::gin::{embeddings_csv, train_gin, Gin, GinConfig, GinTrainConfig};
use crate::harness::{
    class_schedule, content_hash, permutation_csv, random_assembly_baseline, run_generation_eval, run_permutation_analysis, score_samples, select_best_epoch,
    svg_line_charts, ExperimentLog, PermutationConfig, PermutationRow,
};
use crate::ldraw::{to_ldraw, BrickColors};
use crate::metrics::{nearest_neighbour, MetricReport, DEFAULT_K};
use crate::tensor::checkpoint::Checkpoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "legogen", version, about = "Generate, train on and evaluate LEGO brick assembly graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create, inspect or augment datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the generator or the evaluation classifier.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Sample structures from a generator checkpoint.
    Generate(GenerateArgs),
    /// Score generated structures against a dataset.
    Evaluate(EvaluateArgs),
    /// Permutation-drift analysis of the metrics.
    Permute(PermuteArgs),
    /// Export to other formats.
    #[command(subcommand)]
    Export(ExportCommand),
    /// Nearest training structure for each sample.
    Nn(NnArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    Gen(DatasetGenArgs),
    Stats(DatasetStatsArgs),
    Augment(DatasetAugmentArgs),
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    Dgmlg(TrainDgmlgArgs),
    Gin(TrainGinArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    Ldraw(ExportLdrawArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetGenArgs {
    /// Comma-separated archetype names; all twelve when omitted.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
    #[arg(long, default_value_t = 30)]
    pub per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub min_bricks: usize,
    #[arg(long, default_value_t = 90)]
    pub max_bricks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetStatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetAugmentArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop rotated copies whose structure already occurs.
    #[arg(long)]
    pub dedup: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetHeadArg {
    Categorical,
    Thermometer,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDgmlgArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for checkpoints and logs.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub node_dim: usize,
    #[arg(long, default_value_t = 16)]
    pub edge_dim: usize,
    #[arg(long, default_value_t = 128)]
    pub graph_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
    #[arg(long, default_value_t = 128)]
    pub head_hidden: usize,
    #[arg(long, value_enum, default_value_t = OffsetHeadArg::Categorical)]
    pub offset_head: OffsetHeadArg,
    /// GIN checkpoint enabling per-epoch evaluation and best-epoch selection.
    #[arg(long)]
    pub gin: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 200)]
    pub eval_samples: usize,
    /// Evaluate restricted (always valid) samples instead of unrestricted ones.
    #[arg(long)]
    pub eval_restricted: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainGinArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 150)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Also write the embedding of every record as CSV.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateArgs {
    /// Generator checkpoint; an untrained model over the twelve archetypes when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Condition every sample on this class.
    #[arg(long)]
    pub class: Option<String>,
    /// Dataset whose class frequencies set the conditioning schedule.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub restricted: bool,
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, default_value_t = 150)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub gin: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Also score a random valid-assembly baseline with the same class schedule.
    #[arg(long)]
    pub baseline: bool,
    /// JSON report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV file that receives one appended row per scored method.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermuteArgs {
    /// Dataset; the synthetic 12 x 30 set when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Frozen GIN checkpoint; trained on the dataset when omitted.
    #[arg(long)]
    pub gin: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 25)]
    pub mmd_every: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// JSON experiment log with config and input hash.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportLdrawArgs {
    /// JSONL of records (dataset or samples).
    #[arg(long)]
    pub input: PathBuf,
    /// Record to export; all records when omitted.
    #[arg(long)]
    pub index: Option<usize>,
    /// Output file for one record, or directory for all.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub gin: PathBuf,
    /// CSV path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory receiving `sample_<i>.ldr` and `nn_<i>.ldr` pairs.
    #[arg(long)]
    pub ldraw_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) => f.write_str(m),
        }
    }
}

fn invalid<E: Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Invalid(format!("{context}: {e}"))
}

type CliResult<T> = Result<T, CliError>;

/// Replaces fields of `args` with the keys of the JSON object at `path`.
pub fn apply_config<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(path).map_err(invalid(&path.display().to_string()))?;
    let overlay: serde_json::Value = serde_json::from_str(&text).map_err(invalid("config"))?;
    let serde_json::Value::Object(overlay) = overlay else {
        return Err(CliError::Invalid("config must be a JSON object".into()));
    };
    let mut base = serde_json::to_value(&args).map_err(invalid("config"))?;
    let fields = base.as_object_mut().expect("argument structs serialize to objects");
    for (k, v) in overlay {
        fields.insert(k, v);
    }
    serde_json::from_value(base).map_err(invalid("config"))
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Dataset(DatasetCommand::Gen(a)) => dataset_gen(with_config(a, |a| &a.config)?),
        Command::Dataset(DatasetCommand::Stats(a)) => dataset_stats_cmd(with_config(a, |a| &a.config)?),
        Command::Dataset(DatasetCommand::Augment(a)) => dataset_augment(with_config(a, |a| &a.config)?),
        Command::Train(TrainCommand::Dgmlg(a)) => train_dgmlg(with_config(a, |a| &a.config)?),
        Command::Train(TrainCommand::Gin(a)) => train_gin_cmd(with_config(a, |a| &a.config)?),
        Command::Generate(a) => generate(with_config(a, |a| &a.config)?),
        Command::Evaluate(a) => evaluate(with_config(a, |a| &a.config)?),
        Command::Permute(a) => permute(with_config(a, |a| &a.config)?),
        Command::Export(ExportCommand::Ldraw(a)) => export_ldraw(with_config(a, |a| &a.config)?),
        Command::Nn(a) => nn(with_config(a, |a| &a.config)?),
    }
}

fn with_config<T: Serialize + DeserializeOwned>(args: T, config: impl Fn(&T) -> &Option<PathBuf>) -> CliResult<T> {
    let path = config(&args).clone();
    apply_config(args, path.as_deref())
}

fn write_output(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => std::io::stdout().write_all(contents.as_bytes()).map_err(invalid("stdout")),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(invalid(&parent.display().to_string()))?;
    }
    fs::write(path, contents).map_err(invalid(&path.display().to_string()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    let d = load_dataset(path).map_err(invalid(&path.display().to_string()))?;
    if d.is_empty() {
        return Err(CliError::Invalid(format!("{}: no records", path.display())));
    }
    Ok(d)
}

fn load_gin(path: &Path) -> CliResult<Gin> {
    let ck = Checkpoint::load(path).map_err(invalid(&path.display().to_string()))?;
    Gin::from_checkpoint(&ck).map_err(invalid(&path.display().to_string()))
}

fn load_model(path: &Path) -> CliResult<Dgmlg> {
    let ck = Checkpoint::load(path).map_err(invalid(&path.display().to_string()))?;
    Dgmlg::from_checkpoint(&ck).map_err(invalid(&path.display().to_string()))
}

fn sample_graphs(records: &[RecordJson]) -> CliResult<Vec<LegoGraph>> {
    records.iter().enumerate().map(|(i, r)| r.to_graph().map_err(|e| CliError::Invalid(format!("record {i}: {e}")))).collect()
}

/// Twelve-archetype synthetic dataset with default sizes.
pub fn default_synthetic(per_class: usize, seed: u64) -> CliResult<Dataset> {
    synth_dataset(&ARCHETYPES, per_class, SynthParams::default(), seed).map_err(invalid("synthetic dataset"))
}

fn dataset_gen(a: DatasetGenArgs) -> CliResult<()> {
    let classes: Vec<&str> = if a.classes.is_empty() { ARCHETYPES.to_vec() } else { a.classes.iter().map(String::as_str).collect() };
    let params = SynthParams { min_bricks: a.min_bricks, max_bricks: a.max_bricks };
    let d = synth_dataset(&classes, a.per_class, params, a.seed).map_err(invalid("dataset gen"))?;
    write_output(a.out.as_deref(), &d.to_jsonl())
}

fn dataset_stats_cmd(a: DatasetStatsArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    write_output(None, &to_json(&dataset_stats(&d)))
}

fn dataset_augment(a: DatasetAugmentArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    let aug = augment_rotations(&d, a.dedup).map_err(invalid("augment"))?;
    write_file(&a.out, &aug.to_jsonl())
}

fn train_dgmlg(a: TrainDgmlgArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    let data = d
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| derive_decision_trace(r).map(|t| (t, r.class_id)).map_err(|e| CliError::Invalid(format!("record {i}: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let config = ModelConfig {
        node_dim: a.node_dim,
        edge_dim: a.edge_dim,
        graph_dim: a.graph_dim,
        rounds: a.rounds,
        num_classes: d.num_classes(),
        offset_head: match a.offset_head {
            OffsetHeadArg::Categorical => OffsetHead::Categorical,
            OffsetHeadArg::Thermometer => OffsetHead::Thermometer,
        },
        head_hidden: vec![a.head_hidden],
        class_names: d.class_names.clone(),
        ..Default::default()
    };
    let mut model = Dgmlg::new(config, a.seed).map_err(invalid("model"))?;
    let gin = a.gin.as_deref().map(load_gin).transpose()?;
    fs::create_dir_all(&a.out_dir).map_err(invalid(&a.out_dir.display().to_string()))?;
    write_file(&a.out_dir.join("args.json"), &to_json(&a))?;

    let tc = TrainConfig { epochs: a.epochs, batch_size: a.batch_size, lr: a.lr, seed: a.seed };
    let mut loss_csv = String::from("epoch,nll_per_decision,nll_per_graph\n");
    let mut eval_csv = format!("epoch,{}\n", MetricReport::csv_header());
    let mut evaluated: Vec<(usize, MetricReport)> = Vec::new();
    let mut failure: Option<CliError> = None;
    let eval_every = a.eval_every.max(1);
    train(&mut model, &data, &tc, |stats, m| {
        if failure.is_some() {
            return;
        }
        loss_csv.push_str(&format!("{},{},{}\n", stats.epoch, stats.nll_per_decision, stats.nll_per_graph));
        if let Err(e) = m.to_checkpoint().save(&a.out_dir.join(format!("epoch_{:04}.json", stats.epoch))) {
            failure = Some(CliError::Invalid(format!("checkpoint: {e}")));
            return;
        }
        if let Some(gin) = &gin {
            if (stats.epoch + 1) % eval_every == 0 {
                let opts = SampleOptions { restricted: a.eval_restricted, greedy: false, max_nodes: m.config().max_nodes };
                match run_generation_eval(m, gin, &d, a.eval_samples, opts, a.seed ^ stats.epoch as u64) {
                    Ok(ev) => {
                        eval_csv.push_str(&format!("{},{}\n", stats.epoch, ev.report.csv_row()));
                        evaluated.push((stats.epoch, ev.report));
                    }
                    Err(e) => failure = Some(CliError::Invalid(format!("evaluation: {e}"))),
                }
            }
        }
    })
    .map_err(invalid("training"))?;
    if let Some(e) = failure {
        return Err(e);
    }
    write_file(&a.out_dir.join("loss.csv"), &loss_csv)?;
    model.to_checkpoint().save(&a.out_dir.join("final.json")).map_err(invalid("checkpoint"))?;
    if !evaluated.is_empty() {
        write_file(&a.out_dir.join("eval.csv"), &eval_csv)?;
        let reports: Vec<MetricReport> = evaluated.iter().map(|(_, r)| r.clone()).collect();
        let (epoch, report) = &evaluated[select_best_epoch(&reports).map_err(invalid("selection"))?];
        let best = a.out_dir.join(format!("epoch_{epoch:04}.json"));
        fs::copy(&best, a.out_dir.join("best.json")).map_err(invalid("best checkpoint"))?;
        write_file(&a.out_dir.join("best.txt"), &format!("{epoch}\n"))?;
        eprintln!("best epoch {epoch}: dc_harmonic_mean {:?}", report.dc_harmonic_mean);
    }
    Ok(())
}

fn train_gin_cmd(a: TrainGinArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    let graphs = d.graphs();
    let labels: Vec<usize> = d.records.iter().map(|r| r.class_id).collect();
    let config = GinConfig { num_layers: a.layers, hidden: a.hidden, num_classes: d.num_classes(), ..Default::default() };
    let tc = GinTrainConfig { epochs: a.epochs, batch_size: a.batch_size, lr: a.lr, train_fraction: a.train_fraction, seed: a.seed };
    let (gin, report) = train_gin(&graphs, &labels, config, &tc).map_err(invalid("gin training"))?;
    gin.to_checkpoint().save(&a.out).map_err(invalid(&a.out.display().to_string()))?;
    if let Some(path) = &a.embeddings {
        write_file(path, &embeddings_csv(&gin.embed_set(&graphs).map_err(invalid("embedding"))?))?;
    }
    write_output(None, &to_json(&report))
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => {
            let mut names: Vec<String> = ARCHETYPES.iter().map(|s| s.to_string()).collect();
            names.sort();
            let config = ModelConfig { num_classes: names.len(), class_names: names, ..Default::default() };
            Dgmlg::new(config, a.seed).map_err(invalid("model"))?
        }
    };
    let names: Vec<String> = match model.config().class_names.as_slice() {
        [] => (0..model.config().num_classes).map(|i| format!("class{i}")).collect(),
        n => n.to_vec(),
    };
    let schedule: Vec<usize> = match (&a.class, &a.data) {
        (Some(c), _) => {
            let id = names.iter().position(|n| n == c).ok_or_else(|| CliError::Invalid(format!("unknown class {c:?}; model classes: {}", names.join(", "))))?;
            vec![id; a.n]
        }
        (None, Some(p)) => {
            let d = load_data(p)?;
            if d.class_names != names {
                return Err(CliError::Invalid("dataset classes differ from the model's".into()));
            }
            class_schedule(&d, a.n)
        }
        (None, None) => (0..a.n).map(|i| i % names.len()).collect(),
    };
    let opts = SampleOptions { restricted: a.restricted, greedy: a.greedy, max_nodes: a.max_nodes };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut records = Vec::with_capacity(a.n);
    for (i, &c) in schedule.iter().enumerate() {
        let g = sample(&model, c, opts, &mut rng).map_err(invalid("sampling"))?.graph;
        let meta = serde_json::json!({ "index": i, "seed": a.seed, "restricted": a.restricted });
        records.push(RecordJson::from_graph(&names[c], &g, Some(meta)));
    }
    match &a.out {
        Some(p) => save_samples(p, &records).map_err(invalid(&p.display().to_string())),
        None => {
            let text: String = records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect();
            write_output(None, &text)
        }
    }
}

#[derive(Debug, Serialize)]
struct EvaluationOutput {
    method: String,
    #[serde(flatten)]
    eval: crate::harness::GenerationEval,
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    let gin = load_gin(&a.gin)?;
    let records = load_samples(&a.samples).map_err(invalid(&a.samples.display().to_string()))?;
    if records.is_empty() {
        return Err(CliError::Invalid("no samples".into()));
    }
    let graphs = sample_graphs(&records)?;
    let labels = records
        .iter()
        .map(|r| d.class_id(r.class()).ok_or_else(|| CliError::Invalid(format!("sample class {:?} not in dataset", r.class()))))
        .collect::<CliResult<Vec<_>>>()?;
    let mut outputs = vec![EvaluationOutput { method: "samples".into(), eval: score_samples(&graphs, &labels, &d, &gin, a.k).map_err(invalid("evaluation"))? }];
    if a.baseline {
        let base = random_assembly_baseline(&d, &labels, a.seed).map_err(invalid("baseline"))?;
        outputs.push(EvaluationOutput { method: "random_baseline".into(), eval: score_samples(&base, &labels, &d, &gin, a.k).map_err(invalid("evaluation"))? });
    }
    if let Some(csv) = &a.csv {
        let mut text = if csv.exists() { String::new() } else { format!("method,samples,{}\n", MetricReport::csv_header()) };
        for o in &outputs {
            text.push_str(&format!("{},{},{}\n", o.method, a.samples.display(), o.eval.report.csv_row()));
        }
        let mut f = fs::OpenOptions::new().create(true).append(true).open(csv).map_err(invalid(&csv.display().to_string()))?;
        f.write_all(text.as_bytes()).map_err(invalid(&csv.display().to_string()))?;
    }
    write_output(a.out.as_deref(), &to_json(&outputs))
}

/// Metric columns plotted by `permute --svg`.
pub fn permutation_svg(rows: &[PermutationRow]) -> String {
    type Col = fn(&PermutationRow) -> Option<f64>;
    let cols: [(&str, Col); 9] = [
        ("FD", |r| Some(r.fd)),
        ("KD", |r| Some(r.kd)),
        ("precision", |r| Some(r.precision)),
        ("recall", |r| Some(r.recall)),
        ("density", |r| Some(r.density)),
        ("coverage", |r| Some(r.coverage)),
        ("GIN accuracy", |r| Some(r.gin_acc)),
        ("degree MMD", |r| r.degree_mmd),
        ("mean nodes", |r| Some(r.mean_nodes)),
    ];
    let series: Vec<(&str, Vec<(f64, Option<f64>)>)> = cols.iter().map(|(name, f)| (*name, rows.iter().map(|r| (r.iteration as f64, f(r))).collect())).collect();
    svg_line_charts(&series, 3)
}

fn permute(a: PermuteArgs) -> CliResult<()> {
    if a.iterations < 1 {
        return Err(CliError::Invalid("iterations must be at least 1".into()));
    }
    let (d, data_bytes) = match &a.data {
        Some(p) => {
            let d = load_data(p)?;
            let bytes = d.to_jsonl();
            (d, bytes)
        }
        None => {
            let d = default_synthetic(30, a.seed)?;
            let bytes = d.to_jsonl();
            (d, bytes)
        }
    };
    let gin = match &a.gin {
        Some(p) => load_gin(p)?,
        None => {
            let labels: Vec<usize> = d.records.iter().map(|r| r.class_id).collect();
            let config = GinConfig { num_classes: d.num_classes(), ..Default::default() };
            let tc = GinTrainConfig { seed: a.seed, ..Default::default() };
            train_gin(&d.graphs(), &labels, config, &tc).map_err(invalid("gin training"))?.0
        }
    };
    let cfg = PermutationConfig { iterations: a.iterations, mmd_every: a.mmd_every, seed: a.seed, k: a.k };
    let rows = run_permutation_analysis(&d, &gin, &cfg, |_| {}).map_err(invalid("permutation"))?;
    write_output(a.out.as_deref(), &permutation_csv(&rows))?;
    if let Some(svg) = &a.svg {
        write_file(svg, &permutation_svg(&rows))?;
    }
    if let Some(log) = &a.log {
        let gin_bytes = serde_json::to_string(&gin.to_checkpoint()).expect("checkpoint serializes");
        let entry = ExperimentLog {
            config: serde_json::to_value(&a).expect("args serialize"),
            input_hash: content_hash(&[data_bytes.as_bytes(), gin_bytes.as_bytes()]),
            rows,
        };
        write_file(log, &to_json(&entry))?;
    }
    Ok(())
}

fn export_ldraw(a: ExportLdrawArgs) -> CliResult<()> {
    let records = load_samples(&a.input).map_err(invalid(&a.input.display().to_string()))?;
    let graphs = sample_graphs(&records)?;
    let render = |i: usize| to_ldraw(&graphs[i], &BrickColors::Random { seed: a.seed.wrapping_add(i as u64) }).map_err(|e| CliError::Invalid(format!("record {i}: {e}")));
    match a.index {
        Some(i) if i >= graphs.len() => Err(CliError::Invalid(format!("index {i} out of range ({} records)", graphs.len()))),
        Some(i) => write_file(&a.out, &render(i)?),
        None => {
            for i in 0..graphs.len() {
                write_file(&a.out.join(format!("{i:04}_{}.ldr", records[i].class())), &render(i)?)?;
            }
            Ok(())
        }
    }
}

fn nn(a: NnArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    let gin = load_gin(&a.gin)?;
    let records = load_samples(&a.samples).map_err(invalid(&a.samples.display().to_string()))?;
    let graphs = sample_graphs(&records)?;
    let reference = d.graphs();
    let ref_emb = gin.embed_set(&reference).map_err(invalid("embedding"))?;
    let gen_emb = gin.embed_set(&graphs).map_err(invalid("embedding"))?;
    let mut csv = String::from("sample,sample_class,record,record_class,distance\n");
    for (i, q) in gen_emb.iter().enumerate() {
        let j = nearest_neighbour(q, &ref_emb).expect("dataset is non-empty");
        let dist = q.iter().zip(&ref_emb[j]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        csv.push_str(&format!("{i},{},{j},{},{dist}\n", records[i].class(), d.records[j].class_name));
        if let Some(dir) = &a.ldraw_dir {
            let colors = BrickColors::Random { seed: a.seed.wrapping_add(i as u64) };
            if let Ok(text) = to_ldraw(&graphs[i], &colors) {
                write_file(&dir.join(format!("sample_{i:04}.ldr")), &text)?;
            }
            write_file(&dir.join(format!("nn_{i:04}.ldr")), &to_ldraw(&reference[j], &colors).map_err(invalid("export"))?)?;
        }
    }
    write_output(a.out.as_deref(), &csv)
}
