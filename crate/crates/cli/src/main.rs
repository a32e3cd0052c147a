//! `modelsmith`: learn STRIPS action models from examples by classical planning.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modelsmith::harness::{
    benchmark, benchmarks, gen_traces, run_pipeline, ExperimentConfig, HarnessError, PlannerChoice,
    Report, RowOutcome, TaskVariant, TraceConfig,
};
use modelsmith::learn::{
    compile_lambda, compile_lambda_prime, half_partial_model, parse_traces, partial_model_from_domain, print_traces,
    CompileOptions, LearnError, LearningTask, PartialModel, Trace,
};
use modelsmith::model::{
    score, validate_by_compilation, validate_by_replay, CompiledVerdict, ModelError, ModelScore, Scope,
    Verdict,
};
use modelsmith::pddl::{
    parse_domain, parse_problem, print_domain, print_plan, print_problem, Domain, OperatorSchema, PddlError, Problem,
};
use modelsmith::planner::{
    ground_default, solve, solve_external, Algorithm, ExternalPlanner, Outcome, PlannerError, SearchConfig,
    SearchResult,
};

/// Process exit codes; each failure class has its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exit {
    Ok = 0,
    Io = 1,
    Config = 2,
    Parse = 3,
    Unsolvable = 4,
    ResourceLimit = 5,
    /// A model was checked and rejected.
    Invalid = 6,
    /// Some stage other than search failed.
    Failed = 7,
}

#[derive(Debug)]
struct Failure {
    exit: Exit,
    message: String,
}

impl Failure {
    fn new(exit: Exit, message: impl fmt::Display) -> Self {
        Self {
            exit,
            message: message.to_string(),
        }
    }
}

impl From<PddlError> for Failure {
    fn from(e: PddlError) -> Self {
        Failure::new(Exit::Parse, e)
    }
}

impl From<PlannerError> for Failure {
    fn from(e: PlannerError) -> Self {
        let exit = match &e {
            PlannerError::GroundingLimit { .. } | PlannerError::ExternalTimeout(_) => Exit::ResourceLimit,
            PlannerError::ExternalConfig(_) => Exit::Config,
            PlannerError::Pddl(_) | PlannerError::ExternalOutput(_) => Exit::Parse,
            PlannerError::Io(_) => Exit::Io,
            _ => Exit::Failed,
        };
        Failure::new(exit, e)
    }
}

impl From<LearnError> for Failure {
    fn from(e: LearnError) -> Self {
        let exit = match e {
            LearnError::Pddl(_) => Exit::Parse,
            _ => Exit::Config,
        };
        Failure::new(exit, e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::new(Exit::Failed, e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Pddl(e) => e.into(),
            HarnessError::Planner(e) => e.into(),
            HarnessError::Learn(e) => e.into(),
            HarnessError::Config(_) => Failure::new(Exit::Config, e),
            HarnessError::Io(_) => Failure::new(Exit::Io, e),
            _ => Failure::new(Exit::Failed, e),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Labels,
    Plans,
    Partial,
}

impl From<VariantArg> for TaskVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Labels => TaskVariant::Labels,
            VariantArg::Plans => TaskVariant::Plans,
            VariantArg::Partial => TaskVariant::Partial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchArg {
    Gbfs,
    Bfs,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for trace generation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// `builtin`, or `external:<template>` with {domain} {problem} {plan}
    /// placeholders; {planner} (or an empty template) reads MODELSMITH_PLANNER.
    #[arg(long, global = true, default_value = "builtin")]
    planner: String,
    #[arg(long, global = true, value_enum, default_value = "off")]
    static_pruning: Switch,
    #[arg(long, global = true, value_enum, default_value = "off")]
    symmetry_breaking: Switch,
    #[arg(long, global = true, value_enum, default_value = "plans")]
    variant: VariantArg,
    /// Maximum plan length explored by the built-in planner.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    max_nodes: Option<usize>,
    /// Wall-clock limit per search, in seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "gbfs")]
    search: SearchArg,
}

impl Global {
    fn search_config(&self) -> Result<SearchConfig> {
        let mut config = SearchConfig {
            algorithm: match self.search {
                SearchArg::Gbfs => Algorithm::Gbfs,
                SearchArg::Bfs => Algorithm::Bfs,
            },
            horizon: self.horizon,
            ..SearchConfig::default()
        };
        if let Some(n) = self.max_nodes {
            config.max_nodes = Some(n);
        }
        if let Some(t) = self.time_limit {
            let limit = Duration::try_from_secs_f64(t)
                .map_err(|_| Failure::new(Exit::Config, format!("--time-limit {t} is not a duration")))?;
            config.time_limit = Some(limit);
        }
        Ok(config)
    }

    fn planner(&self) -> Result<PlannerChoice> {
        if self.planner == "builtin" {
            return Ok(PlannerChoice::Builtin);
        }
        let Some(template) = self.planner.strip_prefix("external:") else {
            return Err(Failure::new(
                Exit::Config,
                format!("--planner must be `builtin` or `external:<template>`, got `{}`", self.planner),
            ));
        };
        let mut planner = ExternalPlanner::new(template);
        planner.timeout = self.search_config()?.time_limit;
        // reject a bad template before any work is done
        planner.command_line("d", "p", "o")?;
        Ok(PlannerChoice::External(planner))
    }

    fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            static_pruning: self.static_pruning.on(),
            symmetry_breaking: self.symmetry_breaking.on(),
        }
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::new(Exit::Io, format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        fs::write(&path, text).map_err(|e| Failure::new(Exit::Io, format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

#[derive(Debug, Parser)]
#[command(name = "modelsmith", version, about = "Learn STRIPS action models by compiling the learning task into classical planning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate traces by seeded random walks from the problems' initial states.
    Gen {
        /// Reference domain the walks follow.
        #[arg(long)]
        domain: PathBuf,
        /// Problem files supplying initial states.
        #[arg(required = true)]
        problems: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        examples: usize,
        #[arg(long, default_value_t = 8)]
        walk_min: usize,
        #[arg(long, default_value_t = 12)]
        walk_max: usize,
    },
    /// Compile a learning task into a planning task and its decode table.
    Compile {
        /// Domain supplying predicates, types and operator headers.
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// Known schemas; actions marked `;; @complete` are fully given.
        /// Without it the partial variant gives the first half of the domain.
        #[arg(long)]
        partial_model: Option<PathBuf>,
    },
    /// Solve a PDDL planning task and print the plan.
    Solve { domain: PathBuf, problem: PathBuf },
    /// Learn a model end to end and write the report.
    Learn {
        /// Reference domain: headers for learning and the scoring baseline.
        #[arg(long)]
        domain: PathBuf,
        /// Use these traces instead of generating them.
        #[arg(long, conflicts_with = "problems")]
        traces: Option<PathBuf>,
        /// Problem files whose initial states seed the random walks.
        problems: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        examples: usize,
        #[arg(long, default_value_t = 8)]
        walk_min: usize,
        #[arg(long, default_value_t = 12)]
        walk_max: usize,
        /// Share of schemas given complete in the partial variant.
        #[arg(long, default_value_t = 0.5)]
        partial_fraction: f64,
    },
    /// Check a model against traces.
    Validate {
        /// Domain holding the model to check.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// Check by solving the compiled task with every schema given.
        #[arg(long)]
        by_compilation: bool,
    },
    /// Precision and recall of a learned model against a reference.
    Score {
        learned: PathBuf,
        reference: PathBuf,
        /// Score only the slots not fixed by this partial model.
        #[arg(long)]
        partial_model: Option<PathBuf>,
    },
    /// Run the pipeline on the built-in benchmark domains, one worker each.
    Bench {
        /// Restrict to these domains; all by default.
        #[arg(long = "domain")]
        domains: Vec<String>,
        #[arg(long, default_value_t = 5)]
        examples: usize,
        #[arg(long, default_value_t = 8)]
        walk_min: usize,
        #[arg(long, default_value_t = 12)]
        walk_max: usize,
        /// List the built-in domains and exit.
        #[arg(long)]
        list: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::new(Exit::Io, format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: std::result::Result<T, PddlError>) -> Result<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure::new(f.exit, format!("{}: {}", path.display(), f.message))
    })
}

fn load_domain(path: &Path) -> Result<Domain> {
    with_path(path, parse_domain(&read(path)?))
}

fn load_problem(path: &Path) -> Result<Problem> {
    with_path(path, parse_problem(&read(path)?))
}

fn load_traces(path: &Path) -> Result<Vec<Trace>> {
    with_path(path, parse_traces(&read(path)?))
}

fn strips(domain: &Domain) -> Result<Vec<OperatorSchema>> {
    domain
        .strips_schemas()
        .map_err(|name| Failure::new(Exit::Parse, format!("action {name} is not STRIPS")))
}

fn trace_config(seed: u64, examples: usize, walk_min: usize, walk_max: usize) -> Result<TraceConfig> {
    if examples == 0 {
        return Err(Failure::new(Exit::Config, "--examples must be at least 1"));
    }
    if walk_min > walk_max {
        return Err(Failure::new(Exit::Config, "--walk-min exceeds --walk-max"));
    }
    Ok(TraceConfig {
        examples,
        walk_min,
        walk_max,
        seed,
        ..TraceConfig::default()
    })
}

fn search_failure(result: &SearchResult) -> Failure {
    match result.outcome {
        Outcome::Exhausted => Failure::new(Exit::Unsolvable, "no plan exists within the search bounds"),
        o => Failure::new(Exit::ResourceLimit, format!("search stopped: {o:?}")),
    }
}

fn cmd_gen(g: &Global, domain: &Path, problems: &[PathBuf], tc: TraceConfig) -> Result<()> {
    let domain = load_domain(domain)?;
    strips(&domain)?;
    let problems = problems.iter().map(|p| load_problem(p)).collect::<Result<Vec<_>>>()?;
    let traces = gen_traces(&domain, &problems, &tc)?;
    let path = g.write("traces.txt", &print_traces(&traces))?;
    println!("wrote {} traces to {}", traces.len(), path.display());
    Ok(())
}

fn learning_task(g: &Global, domain: &Domain, traces: &[Trace], partial: Option<&Path>) -> Result<LearningTask> {
    let variant = TaskVariant::from(g.variant);
    let pm: Option<PartialModel> = match (variant, partial) {
        (TaskVariant::Partial, Some(p)) => Some(partial_model_from_domain(&load_domain(p)?)?),
        (TaskVariant::Partial, None) => Some(half_partial_model(&strips(domain)?)),
        (_, Some(_)) => return Err(Failure::new(Exit::Config, "--partial-model needs --variant partial")),
        (_, None) => None,
    };
    let use_plans = variant != TaskVariant::Labels;
    if use_plans && traces.iter().any(|t| t.plan.is_none()) {
        return Err(Failure::new(Exit::Config, "the plans variants need a plan in every trace"));
    }
    let task = LearningTask::new(domain, traces, use_plans, pm)?;
    task.validate()?;
    Ok(task)
}

fn cmd_compile(g: &Global, domain: &Path, traces: &Path, partial: Option<&Path>) -> Result<()> {
    let domain = load_domain(domain)?;
    let traces = load_traces(traces)?;
    let task = learning_task(g, &domain, &traces, partial)?;
    let compiled = match g.variant {
        VariantArg::Labels => compile_lambda(&task, g.compile_options())?,
        _ => compile_lambda_prime(&task, g.compile_options())?,
    };
    g.write("compiled-domain.pddl", &print_domain(&compiled.domain()))?;
    g.write("compiled-problem.pddl", &print_problem(&compiled.problem()))?;
    g.write("decode-table.txt", &compiled.decode_table_text())?;
    println!(
        "compiled {} actions over {} slots into {}",
        compiled.domain().actions.len(),
        compiled.decode_table().len(),
        g.out_dir.display()
    );
    Ok(())
}

fn cmd_solve(g: &Global, domain: &Path, problem: &Path) -> Result<()> {
    let domain = load_domain(domain)?;
    let problem = load_problem(problem)?;
    let result = match g.planner()? {
        PlannerChoice::Builtin => {
            let gt = ground_default(&domain, &problem)?;
            solve(&gt, &g.search_config()?)
        }
        PlannerChoice::External(ext) => solve_external(&domain, &problem, &ext)?,
    };
    let Some(plan) = &result.plan else {
        return Err(search_failure(&result));
    };
    print!("{}", print_plan(plan));
    let _ = std::io::stdout().flush();
    Ok(())
}

fn write_report(g: &Global, report: &Report) -> Result<()> {
    g.write("report.csv", &report.to_csv())?;
    g.write("report.txt", &report.to_key_values())?;
    g.write("timings.csv", &report.timings())?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn outcome_exit(outcome: &RowOutcome) -> Exit {
    match outcome {
        RowOutcome::Learned | RowOutcome::ValidModel => Exit::Ok,
        RowOutcome::InvalidModel => Exit::Invalid,
        RowOutcome::Unsolved(Outcome::Exhausted) => Exit::Unsolvable,
        RowOutcome::Unsolved(_) => Exit::ResourceLimit,
        RowOutcome::Failed { .. } => Exit::Failed,
    }
}

fn experiment(g: &Global, name: &str, domain: Domain, problems: Vec<Problem>, tc: TraceConfig) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(name, domain, problems);
    config.traces = tc;
    config.variant = g.variant.into();
    config.static_pruning = g.static_pruning.on();
    config.symmetry_breaking = g.symmetry_breaking.on();
    config.search = g.search_config()?;
    config.planner = g.planner()?;
    config.out_dir = Some(g.out_dir.clone());
    Ok(config)
}

fn cmd_learn(
    g: &Global,
    domain_path: &Path,
    traces: Option<&Path>,
    problems: &[PathBuf],
    tc: TraceConfig,
    partial_fraction: f64,
) -> Result<Exit> {
    if !(0.0..=1.0).contains(&partial_fraction) {
        return Err(Failure::new(Exit::Config, "--partial-fraction must lie in [0, 1]"));
    }
    let domain = load_domain(domain_path)?;
    strips(&domain)?;
    let problems = problems.iter().map(|p| load_problem(p)).collect::<Result<Vec<_>>>()?;
    if traces.is_none() && problems.is_empty() {
        return Err(Failure::new(Exit::Config, "give --traces or at least one problem file"));
    }
    let name = domain.name.clone();
    let mut config = experiment(g, &name, domain, problems, tc)?;
    config.partial_fraction = partial_fraction;
    if let Some(t) = traces {
        config.imported_traces = Some(load_traces(t)?);
    }
    let report = run_pipeline(&config);
    write_report(g, &report)?;
    let row = &report.rows[0];
    if let RowOutcome::Failed { stage, cause } = &row.outcome {
        eprintln!("error: {stage} stage failed: {cause}");
    }
    Ok(outcome_exit(&row.outcome))
}

fn cmd_validate(g: &Global, model: &Path, traces: &Path, by_compilation: bool) -> Result<Exit> {
    let domain = load_domain(model)?;
    let schemas = strips(&domain)?;
    let traces = load_traces(traces)?;
    let use_plans = g.variant != VariantArg::Labels && traces.iter().all(|t| t.plan.is_some());
    let task = LearningTask::new(&domain, &traces, use_plans, None)?;
    task.validate()?;
    let search = g.search_config()?;
    if by_compilation {
        if !use_plans {
            return Err(Failure::new(Exit::Config, "--by-compilation needs a plan in every trace"));
        }
        return Ok(match validate_by_compilation(&schemas, &task, &search)? {
            CompiledVerdict::Valid => {
                println!("valid");
                Exit::Ok
            }
            CompiledVerdict::Invalid { horizon } => {
                println!("invalid: no solution within {horizon} steps");
                Exit::Invalid
            }
            CompiledVerdict::Undecided(o) => {
                println!("undecided: {o:?}");
                Exit::ResourceLimit
            }
        });
    }
    let verdicts = validate_by_replay(&schemas, &task, &search)?;
    let mut exit = Exit::Ok;
    for (t, v) in verdicts.iter().enumerate() {
        let line = match v {
            Verdict::Valid => "valid".to_string(),
            Verdict::Inapplicable { step, action } => format!("invalid: step {} {action} is not applicable", step + 1),
            Verdict::FinalMismatch { missing, unexpected } => format!(
                "invalid: final state misses {} atoms and has {} unexpected",
                missing.len(),
                unexpected.len()
            ),
            Verdict::Unreachable => "invalid: final state unreachable".to_string(),
            Verdict::Undecided(why) => {
                if exit == Exit::Ok {
                    exit = Exit::ResourceLimit;
                }
                format!("undecided: {why}")
            }
        };
        if !v.is_valid() && !matches!(v, Verdict::Undecided(_)) {
            exit = Exit::Invalid;
        }
        println!("trace {}: {line}", t + 1);
    }
    Ok(exit)
}

fn score_lines(s: &ModelScore) -> String {
    let mut out = String::from("component,tp,fp,fn,precision,recall\n");
    for (name, c) in s.components().into_iter().chain([("all", s.pooled())]) {
        out.push_str(&format!(
            "{name},{},{},{},{:.3},{:.3}\n",
            c.tp,
            c.fp,
            c.fn_,
            c.precision(),
            c.recall()
        ));
    }
    out
}

fn cmd_score(learned: &Path, reference: &Path, partial: Option<&Path>) -> Result<()> {
    let learned = strips(&load_domain(learned)?)?;
    let reference = strips(&load_domain(reference)?)?;
    let pm = partial.map(|p| load_domain(p).and_then(|d| Ok(partial_model_from_domain(&d)?))).transpose()?;
    let scope = if pm.is_some() { Scope::UnknownOnly } else { Scope::All };
    let s = score(&learned, &reference, scope, pm.as_ref())?;
    print!("{}", score_lines(&s));
    Ok(())
}

fn cmd_bench(g: &Global, names: &[String], tc: TraceConfig, list: bool) -> Result<Exit> {
    if list {
        for b in benchmarks() {
            println!("{}", b.name);
        }
        return Ok(Exit::Ok);
    }
    let selected = if names.is_empty() {
        benchmarks().iter().collect::<Vec<_>>()
    } else {
        names
            .iter()
            .map(|n| benchmark(n).ok_or_else(|| Failure::new(Exit::Config, format!("unknown benchmark domain {n}"))))
            .collect::<Result<Vec<_>>>()?
    };
    let mut configs = Vec::new();
    for b in selected {
        let (domain, problems) = b.load()?;
        configs.push(experiment(g, b.name, domain, problems, tc.clone())?);
    }
    let rows = std::thread::scope(|scope| {
        let workers: Vec<_> = configs.iter().map(|c| scope.spawn(move || run_pipeline(c))).collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("pipeline workers do not panic").rows)
            .collect::<Vec<_>>()
    });
    let mut report = Report { rows };
    report.rows.sort_by(|a, b| a.domain.cmp(&b.domain));
    write_report(g, &report)?;
    let worst = report
        .rows
        .iter()
        .map(|r| outcome_exit(&r.outcome))
        .find(|e| *e != Exit::Ok)
        .unwrap_or(Exit::Ok);
    Ok(worst)
}

fn run(cli: Cli) -> Result<Exit> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen {
            domain,
            problems,
            examples,
            walk_min,
            walk_max,
        } => cmd_gen(g, domain, problems, trace_config(g.seed, *examples, *walk_min, *walk_max)?).map(|_| Exit::Ok),
        Command::Compile {
            domain,
            traces,
            partial_model,
        } => cmd_compile(g, domain, traces, partial_model.as_deref()).map(|_| Exit::Ok),
        Command::Solve { domain, problem } => cmd_solve(g, domain, problem).map(|_| Exit::Ok),
        Command::Learn {
            domain,
            traces,
            problems,
            examples,
            walk_min,
            walk_max,
            partial_fraction,
        } => cmd_learn(
            g,
            domain,
            traces.as_deref(),
            problems,
            trace_config(g.seed, *examples, *walk_min, *walk_max)?,
            *partial_fraction,
        ),
        Command::Validate {
            model,
            traces,
            by_compilation,
        } => cmd_validate(g, model, traces, *by_compilation),
        Command::Score {
            learned,
            reference,
            partial_model,
        } => cmd_score(learned, reference, partial_model.as_deref()).map(|_| Exit::Ok),
        Command::Bench {
            domains,
            examples,
            walk_min,
            walk_max,
            list,
        } => cmd_bench(g, domains, trace_config(g.seed, *examples, *walk_min, *walk_max)?, *list),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Config as u8 } else { Exit::Ok as u8 });
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit as u8)
        }
    }
}
