use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cfrefine::harness::{paired_t_test, run_experiment_suite, SuiteConfig, SyntheticSpec, SIGNIFICANCE_LEVELS};
use cfrefine::revision::Preference;
use cfrefine::{
    infer, parse_cases, parse_rulebase, refine, run_three_tests, serialize_cases, serialize_rulebase, sig9, train,
    Action, BeliefNetwork, CaseInstance, ClampMask, ClampPolicy, CombineMode, NetworkConfig, Observation, OutcomeCode,
    RefineConfig, RevisionConfig, RuleBase, TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cfrefine", version, about = "Refine certainty-factor rule bases by training them as belief networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print hypothesis beliefs for every case.
    Infer(InferArgs),
    /// Train rule strengths (and data links) on cases.
    Train(TrainArgs),
    /// Run the three clamping tests and classify the error.
    Diagnose(DiagnoseArgs),
    /// Diagnose, then apply the indicated revision.
    Revise(ReviseArgs),
    /// Synthetic bad-rule deletion experiment.
    Experiment(ExperimentArgs),
    /// Paired t-test on two columns of numbers.
    Ttest(TtestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Combine {
    Mycin,
    ClippedSum,
}

impl From<Combine> for CombineMode {
    fn from(c: Combine) -> Self {
        match c {
            Combine::Mycin => CombineMode::Mycin,
            Combine::ClippedSum => CombineMode::ClippedSum,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Clamp {
    Kb,
    Data,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prefer {
    Kb,
    Data,
}

#[derive(Args)]
struct InferArgs {
    rulebase: PathBuf,
    cases: PathBuf,
    /// Keep contributions below the cutoff.
    #[arg(long)]
    no_threshold: bool,
    #[arg(long, default_value_t = 0.2)]
    k: f64,
    #[arg(long, value_enum, default_value_t = Combine::Mycin)]
    combine: Combine,
}

#[derive(Args)]
struct TrainerFlags {
    /// Learning rate.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 1000)]
    max_epochs: usize,
    /// Training tolerance.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Reference-set tolerance.
    #[arg(long, default_value_t = 0.1)]
    eps_ref: f64,
    /// Shuffle training order each epoch.
    #[arg(long)]
    seed: Option<u64>,
    /// Apply one accumulated update per epoch.
    #[arg(long)]
    batch: bool,
    #[arg(long, value_enum, default_value_t = Combine::Mycin)]
    combine: Combine,
}

impl TrainerFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.tau,
            max_epochs: self.max_epochs,
            eps_train: self.eps,
            eps_ref: self.eps_ref,
            shuffle_seed: self.seed,
            batch: self.batch,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    rulebase: PathBuf,
    cases: PathBuf,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Clamp::None)]
    clamp: Clamp,
    #[command(flatten)]
    trainer: TrainerFlags,
    /// Write the rule base with trained strengths here.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    rulebase: PathBuf,
    error_cases: PathBuf,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    trainer: TrainerFlags,
}

#[derive(Args)]
struct ReviseArgs {
    rulebase: PathBuf,
    error_cases: PathBuf,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    k: f64,
    #[arg(long, default_value_t = 0.2)]
    data_k: f64,
    /// Settles an outcome that both explanations fit.
    #[arg(long, value_enum)]
    prefer: Option<Prefer>,
    #[command(flatten)]
    trainer: TrainerFlags,
    /// Revised rule base.
    #[arg(long, short)]
    output: PathBuf,
    /// Revision report; printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Error cases with deleted observations.
    #[arg(long)]
    cases_output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    attributes: usize,
    #[arg(long, default_value_t = 3)]
    middle: usize,
    #[arg(long, default_value_t = 5)]
    hypotheses: usize,
    #[arg(long, default_value_t = 50)]
    rules: usize,
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 10)]
    experiments: usize,
}

#[derive(Args)]
struct TtestArgs {
    before: PathBuf,
    after: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_rulebase(path: &Path) -> Result<RuleBase> {
    parse_rulebase(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_cases(path: &Path, rb: &RuleBase) -> Result<Vec<CaseInstance>> {
    parse_cases(&read(path)?, rb).with_context(|| format!("parsing {}", path.display()))
}

fn load_optional(path: Option<&Path>, rb: &RuleBase) -> Result<Vec<CaseInstance>> {
    path.map_or(Ok(Vec::new()), |p| load_cases(p, rb))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_infer(args: &InferArgs) -> Result<()> {
    let rb = load_rulebase(&args.rulebase)?;
    let cases = load_cases(&args.cases, &rb)?;
    let cfg = NetworkConfig { data_error_mode: false, combine: args.combine.into(), threshold: args.k };
    let net = BeliefNetwork::compile(&rb, cfg);
    println!("case\t{}", rb.hypotheses().join("\t"));
    for case in &cases {
        let beliefs = infer(&net, &Observation::from_case(&net, case), !args.no_threshold)
            .with_context(|| format!("case `{}`", case.id))?;
        let row: Vec<String> = beliefs.outputs(&net).into_iter().map(sig9).collect();
        println!("{}\t{}", case.id, row.join("\t"));
    }
    Ok(())
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let rb = load_rulebase(&args.rulebase)?;
    let cases = load_cases(&args.cases, &rb)?;
    let reference = load_optional(args.reference.as_deref(), &rb)?;
    let cfg = NetworkConfig { data_error_mode: true, combine: args.trainer.combine.into(), ..Default::default() };
    let mut net = BeliefNetwork::compile(&rb, cfg);
    let policy = match args.clamp {
        Clamp::Kb => ClampPolicy::KnowledgeBase,
        Clamp::Data => ClampPolicy::Data,
        Clamp::None => ClampPolicy::None,
    };
    let mask = ClampMask::for_policy(&net, policy);
    let outcome = train(&mut net, &cases, &reference, &mask, &args.trainer.config())?;

    println!("resolved\t{}", outcome.resolved);
    println!("epochs\t{}", outcome.epochs_used);
    println!("max_discrepancy\t{}", sig9(outcome.final_max_discrepancy));
    println!("reference_consistent\t{}", outcome.reference_consistent);
    println!("reference_violations\t{}", outcome.reference_violations.join(","));
    println!("weight_delta_norm\t{}", sig9(outcome.weight_delta_norm));
    println!();
    print!("{}", net.dump());

    if let Some(out) = &args.output {
        write(out, &serialize_rulebase(&net.sync_strengths(&rb)?))?;
    }
    Ok(())
}

fn clamp_name(policy: ClampPolicy) -> &'static str {
    match policy {
        ClampPolicy::KnowledgeBase => "kb",
        ClampPolicy::Data => "data",
        ClampPolicy::None => "none",
    }
}

fn exit_for(code: OutcomeCode) -> ExitCode {
    match code {
        OutcomeCode::O1 | OutcomeCode::O3 | OutcomeCode::O5 | OutcomeCode::O7 => ExitCode::SUCCESS,
        OutcomeCode::O8 => ExitCode::from(2),
        OutcomeCode::O2 | OutcomeCode::O4 | OutcomeCode::O6 => ExitCode::from(3),
    }
}

fn run_diagnose(args: &DiagnoseArgs) -> Result<ExitCode> {
    let rb = load_rulebase(&args.rulebase)?;
    let errors = load_cases(&args.error_cases, &rb)?;
    let reference = load_optional(args.reference.as_deref(), &rb)?;
    let cfg = NetworkConfig { data_error_mode: true, combine: args.trainer.combine.into(), ..Default::default() };
    let net = BeliefNetwork::compile(&rb, cfg);
    let report = run_three_tests(&net, &errors, &reference, &args.trainer.config())?;

    println!("triple\t{}", report.outcome.triple());
    println!("outcome\t{}", report.outcome.code);
    println!("action\t{}", report.outcome.action);
    for (i, run) in report.tests.iter().enumerate() {
        let o = &run.outcome;
        println!(
            "test{}\t{}\t{}\tepochs={}\tmax_discrepancy={}\treference_consistent={}",
            i + 1,
            clamp_name(run.policy),
            if run.success { "S" } else { "F" },
            o.epochs_used,
            sig9(o.final_max_discrepancy),
            o.reference_consistent
        );
    }
    Ok(exit_for(report.outcome.code))
}

fn run_revise(args: &ReviseArgs) -> Result<ExitCode> {
    let rb = load_rulebase(&args.rulebase)?;
    let errors = load_cases(&args.error_cases, &rb)?;
    let reference = load_optional(args.reference.as_deref(), &rb)?;
    let cfg = RefineConfig {
        combine: args.trainer.combine.into(),
        train: args.trainer.config(),
        revision: RevisionConfig { k: args.k, data_k: args.data_k, ..RevisionConfig::default() },
        prefer: args.prefer.map(|p| match p {
            Prefer::Kb => Preference::KnowledgeBase,
            Prefer::Data => Preference::Data,
        }),
    };
    let out = refine(&rb, &errors, &reference, &cfg)?;
    let outcome = out.diagnosis.outcome;
    if outcome.action == Action::ExpertChooseKbOrData && cfg.prefer.is_none() {
        bail!("outcome {} ({}) fits both explanations; pass --prefer kb|data", outcome.code, outcome.triple());
    }
    eprintln!("outcome {} ({}): {}", outcome.code, outcome.triple(), outcome.action);

    write(&args.output, &serialize_rulebase(&out.rulebase))?;
    let report = out.report.to_text();
    match &args.report {
        Some(path) => write(path, &report)?,
        None => print!("{report}"),
    }
    if let Some(path) = &args.cases_output {
        write(path, &serialize_cases(&out.cases))?;
    }
    Ok(exit_for(outcome.code))
}

fn run_experiment(args: &ExperimentArgs) -> Result<()> {
    let cfg = SuiteConfig {
        spec: SyntheticSpec {
            n_attributes: args.attributes,
            n_middle: args.middle,
            n_hypotheses: args.hypotheses,
            n_rules: args.rules,
            n_cases: args.cases,
            seed: args.seed,
            ..SyntheticSpec::default()
        },
        n_experiments: args.experiments,
        ..SuiteConfig::default()
    };
    let result = run_experiment_suite(&cfg)?;
    print!("{}", result.table());
    Ok(())
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    read(path)?
        .split_whitespace()
        .map(|s| s.parse::<f64>().with_context(|| format!("{}: `{s}` is not a number", path.display())))
        .collect()
}

fn run_ttest(args: &TtestArgs) -> Result<()> {
    let before = read_column(&args.before)?;
    let after = read_column(&args.after)?;
    let r = paired_t_test(&before, &after)?;
    println!("t\t{}", sig9(r.t));
    println!("df\t{}", r.df);
    for alpha in SIGNIFICANCE_LEVELS {
        println!("significant_{alpha}\t{}", r.is_significant(alpha));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Infer(a) => run_infer(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => run_train(a).map(|_| ExitCode::SUCCESS),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Revise(a) => run_revise(a),
        Command::Experiment(a) => run_experiment(a).map(|_| ExitCode::SUCCESS),
        Command::Ttest(a) => run_ttest(a).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
