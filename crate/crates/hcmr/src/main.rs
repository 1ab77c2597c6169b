use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use hcmr::checkpoint::Checkpoint;
use hcmr::constraint_file::load_constraints;
use hcmr::data_csv::{load_csv, write_csv};
use hcmr::reports::{curve_csv, history_csv, trace_json};
use hcmr::rule_export::RuleExport;
use hcmr::run_config::RunConfig;
use hcmr_core::constraints::ConstraintSpec;
use hcmr_core::datasets::{gen_symbolic_addition, gen_synthetic_xor, SyntheticXorSpec};
use hcmr_core::inference::{explain, infer_map};
use hcmr_core::intervention_eval::{evaluate_interventions, InterventionPolicy, PolicyKind};
use hcmr_core::training::{concept_accuracy, train_with_progress};
use hcmr_core::verification::{export_cnf, export_propositional, parse_formula, verify_constraint, Verdict};
use hcmr_core::{ConstraintSet, Dataset, HcmrError, InterventionAssignment};

#[derive(Parser)]
#[command(name = "hcmr", version, about = "Hierarchical concept memory reasoner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.json, history.csv, rules.txt and rules.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Constraint file; overrides the one named in the config.
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long, env = "HCMR_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        /// Print one line per epoch.
        #[arg(long)]
        verbose: bool,
    },
    /// Concept accuracy on a dataset, optionally explaining single examples.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Print the explanation of this example (repeatable).
        #[arg(long)]
        explain: Vec<usize>,
        /// Write the trace of each explained example as JSON to `<dir>/trace_<index>.json`.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Intervention curve: accuracy after revealing true labels under a policy.
    Intervene {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "graph_sources_first")]
        policy: Vec<Policy>,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0..2")]
        budgets: String,
        /// Seed of the random policy.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "HCMR_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Check that a propositional constraint holds for every rule selection.
    Verify {
        #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
        rules: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        constraint: String,
        /// Also write the CNF of memory and negated constraint in DIMACS form.
        #[arg(long)]
        cnf: Option<PathBuf>,
    },
    /// Generate a synthetic dataset as CSV.
    GenData {
        #[arg(long, value_enum)]
        dataset: DatasetKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standard deviation of the input noise.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print or write the rule memory of a checkpoint.
    ExportRules {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: RuleFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Policy {
    GraphSourcesFirst,
    GraphSinksFirst,
    Uncertainty,
    Random,
}

impl From<Policy> for PolicyKind {
    fn from(p: Policy) -> Self {
        match p {
            Policy::GraphSourcesFirst => PolicyKind::GraphSourcesFirst,
            Policy::GraphSinksFirst => PolicyKind::GraphSinksFirst,
            Policy::Uncertainty => PolicyKind::Uncertainty,
            Policy::Random => PolicyKind::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    SynthXor,
    SymAdd,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleFormat {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Train {
            config,
            seed,
            constraints,
            output_dir,
            verbose,
        } => train(&config, seed, constraints, output_dir, verbose),
        Command::Eval {
            checkpoint,
            data,
            explain,
            trace_dir,
        } => eval(&checkpoint, &data, &explain, trace_dir.as_deref()),
        Command::Intervene {
            checkpoint,
            data,
            policy,
            budgets,
            seed,
            output_dir,
        } => intervene(&checkpoint, &data, &policy, &budgets, seed, output_dir),
        Command::Verify {
            rules,
            checkpoint,
            constraint,
            cnf,
        } => verify(rules.as_deref(), checkpoint.as_deref(), &constraint, cnf.as_deref()),
        Command::GenData {
            dataset,
            n,
            seed,
            noise,
            out,
        } => gen_data(dataset, n, seed, noise, out.as_deref()),
        Command::ExportRules { checkpoint, format, out } => export_rules(&checkpoint, format, out.as_deref()),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn train(
    config_path: &Path,
    seed: Option<u64>,
    constraints: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    verbose: bool,
) -> anyhow::Result<ExitCode> {
    let config = RunConfig::load(config_path).with_context(|| format!("config {}", config_path.display()))?;
    let data = load_csv(&config.data.train).with_context(|| format!("training data {}", config.data.train.display()))?;
    let (train_data, val_data) = match &config.data.val {
        Some(p) => (data, load_csv(p).with_context(|| format!("validation data {}", p.display()))?),
        None => {
            let n_val = (data.len() as f64 * config.data.val_fraction).round() as usize;
            data.split_at(data.len() - n_val)
        }
    };
    if train_data.is_empty() {
        bail!("training data is empty");
    }
    let model_config = config.model_config(train_data.n_concepts, train_data.input_dim)?;
    let mut options = config.train_options();
    if let Some(s) = seed {
        options.seed = s;
    }
    let spec = match constraints.or(config.data.constraints.clone()) {
        Some(p) => load_constraints(&p).with_context(|| format!("constraints {}", p.display()))?,
        None => ConstraintSpec::default(),
    };
    let cs = ConstraintSet::new(model_config.n_concepts, model_config.n_rules, spec.clone())?;

    let out_dir = output_dir.or(config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let (params, history) = train_with_progress(&train_data, &val_data, &model_config, Some(&cs), &options, &mut |r| {
        if verbose {
            let acc = r.val_accuracy.map(|a| format!(" val_accuracy {a:.4}")).unwrap_or_default();
            eprintln!("epoch {} loss {:.4}{acc}", r.epoch, r.loss);
        }
    })?;
    let ckpt = Checkpoint::new(params, spec);
    ckpt.save(&out_dir.join("checkpoint.json"))?;
    write_file(&out_dir.join("history.csv"), &history_csv(&history))?;
    let model = ckpt.frozen()?;
    let export = RuleExport::new(&model.rules, &ckpt.priorities()?)?;
    write_file(&out_dir.join("rules.txt"), &export.to_text())?;
    write_file(&out_dir.join("rules.json"), &export.to_json()?)?;

    if history.diverged {
        println!("training diverged; saved the best checkpoint before divergence");
    }
    println!("seed {}", options.seed);
    println!("best_epoch {}", history.best_epoch);
    if let Some(a) = history.best_val_accuracy {
        println!("val_accuracy {a:.6}");
    }
    println!("output {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn load_model_data(checkpoint: &Path, data: &Path) -> anyhow::Result<(Checkpoint, Dataset)> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("checkpoint {}", checkpoint.display()))?;
    let d = load_csv(data).with_context(|| format!("data {}", data.display()))?;
    if d.n_concepts != ckpt.config.n_concepts || d.input_dim != ckpt.config.input_dim {
        bail!(
            "data has {} features and {} concepts, the model expects {} and {}",
            d.input_dim,
            d.n_concepts,
            ckpt.config.input_dim,
            ckpt.config.n_concepts
        );
    }
    Ok((ckpt, d))
}

fn eval(checkpoint: &Path, data: &Path, examples: &[usize], trace_dir: Option<&Path>) -> anyhow::Result<ExitCode> {
    let (ckpt, d) = load_model_data(checkpoint, data)?;
    let model = ckpt.frozen()?;
    let n = d.n_concepts;
    let mut correct = vec![0usize; n];
    let mut seen = vec![0usize; n];
    for e in 0..d.len() {
        let values = infer_map(d.x(e), &model, &InterventionAssignment::new())?.values();
        for i in 0..n {
            if d.observed(e)[i] {
                seen[i] += 1;
                correct[i] += (values[i] == d.labels(e)[i]) as usize;
            }
        }
    }
    let mut out = String::new();
    writeln!(out, "accuracy {:.6}", concept_accuracy(&model, &d)?)?;
    for i in 0..n {
        if seen[i] > 0 {
            writeln!(out, "C{i} {:.6}", correct[i] as f64 / seen[i] as f64)?;
        } else {
            writeln!(out, "C{i} unobserved")?;
        }
    }
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for &e in examples {
        if e >= d.len() {
            bail!("example {e} out of range ({} examples)", d.len());
        }
        let trace = infer_map(d.x(e), &model, &InterventionAssignment::new())?;
        writeln!(out, "\nexample {e}")?;
        out.push_str(&explain(&trace));
        if let Some(dir) = trace_dir {
            write_file(&dir.join(format!("trace_{e}.json")), &trace_json(&trace)?)?;
        }
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn parse_budgets(s: &str) -> anyhow::Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().context("budget range start")?;
        let b: usize = b.trim().parse().context("budget range end")?;
        if a > b {
            bail!("empty budget range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("budget `{t}`")))
        .collect()
}

fn intervene(
    checkpoint: &Path,
    data: &Path,
    policies: &[Policy],
    budgets: &str,
    seed: u64,
    output_dir: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let budgets = parse_budgets(budgets)?;
    let (ckpt, d) = load_model_data(checkpoint, data)?;
    let model = ckpt.frozen()?;
    let mut curves = Vec::new();
    for &p in policies {
        let policy = InterventionPolicy { kind: p.into(), seed };
        curves.push(evaluate_interventions(&model, &d, &policy, &budgets)?);
    }
    let text = curve_csv(&curves);
    let dir = output_dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(&dir.join("curve.csv"), &text)?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn verify(rules: Option<&Path>, checkpoint: Option<&Path>, constraint: &str, cnf: Option<&Path>) -> anyhow::Result<ExitCode> {
    let rule_set = match (rules, checkpoint) {
        (Some(p), _) => RuleExport::load(p).with_context(|| format!("rules {}", p.display()))?.to_rules()?,
        (None, Some(p)) => Checkpoint::load(p).with_context(|| format!("checkpoint {}", p.display()))?.frozen()?.rules,
        (None, None) => bail!("either --rules or --checkpoint is required"),
    };
    let formula = parse_formula(constraint).context("constraint")?;
    let enc = export_propositional(&rule_set);
    if let Some(path) = cnf {
        write_file(path, &export_cnf(&enc, &formula)?.to_dimacs())?;
    }
    match verify_constraint(&enc, &formula) {
        Ok(Verdict::Holds) => {
            println!("HOLDS");
            Ok(ExitCode::SUCCESS)
        }
        Ok(Verdict::Violated(cx)) => {
            println!("VIOLATED");
            println!("counterexample {}", cx.describe());
            Ok(ExitCode::from(1))
        }
        Err(HcmrError::Tractability(m)) => bail!("{m}; use --cnf to export the problem for an external solver"),
        Err(e) => Err(e.into()),
    }
}

fn gen_data(kind: DatasetKind, n: usize, seed: u64, noise: f64, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    if !(noise >= 0.0 && noise.is_finite()) {
        bail!("--noise must be finite and non-negative");
    }
    let data = match kind {
        DatasetKind::SynthXor => gen_synthetic_xor(&SyntheticXorSpec { noise, ..SyntheticXorSpec::new(n) }, seed),
        DatasetKind::SymAdd => gen_symbolic_addition(n, noise, seed),
    };
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_csv(std::io::BufWriter::new(f), &data)?;
        }
        None => write_csv(std::io::stdout().lock(), &data)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn export_rules(checkpoint: &Path, format: RuleFormat, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("checkpoint {}", checkpoint.display()))?;
    let export = RuleExport::new(&ckpt.frozen()?.rules, &ckpt.priorities()?)?;
    let text = match format {
        RuleFormat::Text => export.to_text(),
        RuleFormat::Json => export.to_json()?,
    };
    match out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
