//! The end-to-end pipeline: traces, compilation, planning, decoding,
//! validation and scoring.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::learn::{
    analyze_statics, compile_lambda, compile_lambda_prime, half_partial_model, print_traces, CompileOptions, CompiledTask,
    KnownSchema, LearningTask, PartialModel, ReachabilityHeuristic, RolloutHeuristic, Trace, Variant,
};
use crate::model::{decode, score, validate_by_replay, LearnedModel, ModelScore, Scope, Verdict};
use crate::pddl::{print_domain, print_plan, print_problem, Domain, GroundAtom, OperatorSchema, Problem};
use crate::planner::{
    eliminate_redundant_except, ground, solve_external, solve_with, ExternalPlanner, GroundConfig, GroundTask,
    Outcome, SearchConfig, SearchResult,
};

use super::traces::{gen_traces, TraceConfig};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskVariant {
    Labels,
    Plans,
    /// Plans plus a partial model with the first fraction of schemas complete.
    Partial,
}

impl TaskVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskVariant::Labels => "labels",
            TaskVariant::Plans => "plans",
            TaskVariant::Partial => "partial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannerChoice {
    Builtin,
    External(ExternalPlanner),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    /// Reference model; also supplies predicates, types and headers.
    pub domain: Domain,
    /// Initial states for the random walks.
    pub problems: Vec<Problem>,
    pub traces: TraceConfig,
    /// Used instead of generated traces when present.
    pub imported_traces: Option<Vec<Trace>>,
    pub variant: TaskVariant,
    pub static_pruning: bool,
    pub symmetry_breaking: bool,
    /// Share of schemas, in name order, given complete for [`TaskVariant::Partial`].
    pub partial_fraction: f64,
    pub search: SearchConfig,
    pub planner: PlannerChoice,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(name: &str, domain: Domain, problems: Vec<Problem>) -> Self {
        Self {
            name: name.to_string(),
            domain,
            problems,
            traces: TraceConfig::default(),
            imported_traces: None,
            variant: TaskVariant::Plans,
            static_pruning: false,
            symmetry_breaking: false,
            partial_fraction: 0.5,
            search: SearchConfig::default(),
            planner: PlannerChoice::Builtin,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Compile,
    Ground,
    Solve,
    Decode,
    Validate,
    Score,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Generate => "generate",
            Stage::Compile => "compile",
            Stage::Ground => "ground",
            Stage::Solve => "solve",
            Stage::Decode => "decode",
            Stage::Validate => "validate",
            Stage::Score => "score",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowOutcome {
    Learned,
    /// Every schema was given; the task only checked the model.
    ValidModel,
    InvalidModel,
    Unsolved(Outcome),
    Failed { stage: Stage, cause: String },
}

impl fmt::Display for RowOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowOutcome::Learned => f.write_str("learned"),
            RowOutcome::ValidModel => f.write_str("valid"),
            RowOutcome::InvalidModel => f.write_str("invalid"),
            RowOutcome::Unsolved(o) => write!(f, "unsolved-{}", outcome_name(*o)),
            RowOutcome::Failed { stage, .. } => write!(f, "failed-{stage}"),
        }
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::PlanFound => "plan-found",
        Outcome::Exhausted => "exhausted",
        Outcome::NodeLimit => "node-limit",
        Outcome::TimeLimit => "time-limit",
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub domain: String,
    pub variant: TaskVariant,
    pub outcome: RowOutcome,
    pub score: Option<ModelScore>,
    pub grounding_time: Duration,
    pub planning_time: Duration,
    pub plan_length: Option<usize>,
    /// Examples passing replay validation, out of all examples.
    pub replay: Option<(usize, usize)>,
    pub model: Option<LearnedModel>,
}

impl Row {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            domain: config.name.clone(),
            variant: config.variant,
            outcome: RowOutcome::Learned,
            score: None,
            grounding_time: Duration::ZERO,
            planning_time: Duration::ZERO,
            plan_length: None,
            replay: None,
            model: None,
        }
    }

    fn fail(mut self, stage: Stage, cause: impl fmt::Display) -> Self {
        self.outcome = RowOutcome::Failed {
            stage,
            cause: cause.to_string(),
        };
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<Row>,
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

impl Report {
    /// `domain,component,tp,fp,fn,precision,recall`; one line per component
    /// and a pooled `all` line, for rows with a score.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,component,tp,fp,fn,precision,recall\n");
        for row in &self.rows {
            let Some(s) = &row.score else { continue };
            for (name, c) in s.components().into_iter().chain([("all", s.pooled())]) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.domain,
                    name,
                    c.tp,
                    c.fp,
                    c.fn_,
                    f3(c.precision()),
                    f3(c.recall())
                );
            }
        }
        out
    }

    /// `key = value` lines; timings are left out so the document is reproducible.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let d = &row.domain;
            let _ = writeln!(out, "{d}.variant = {}", row.variant.as_str());
            let _ = writeln!(out, "{d}.outcome = {}", row.outcome);
            if let RowOutcome::Failed { cause, .. } = &row.outcome {
                let _ = writeln!(out, "{d}.cause = {}", cause.replace('\n', " "));
            }
            if let Some(n) = row.plan_length {
                let _ = writeln!(out, "{d}.plan_length = {n}");
            }
            if let Some((ok, total)) = row.replay {
                let _ = writeln!(out, "{d}.replay_valid = {ok}/{total}");
            }
            if let Some(s) = &row.score {
                for (name, c) in s.components() {
                    let _ = writeln!(out, "{d}.{name}.tp = {}", c.tp);
                    let _ = writeln!(out, "{d}.{name}.fp = {}", c.fp);
                    let _ = writeln!(out, "{d}.{name}.fn = {}", c.fn_);
                    let _ = writeln!(out, "{d}.{name}.precision = {}", f3(c.precision()));
                    let _ = writeln!(out, "{d}.{name}.recall = {}", f3(c.recall()));
                }
                let _ = writeln!(out, "{d}.precision = {}", f3(s.precision()));
                let _ = writeln!(out, "{d}.recall = {}", f3(s.recall()));
                let _ = writeln!(out, "{d}.macro_precision = {}", f3(s.macro_precision()));
                let _ = writeln!(out, "{d}.macro_recall = {}", f3(s.macro_recall()));
            }
        }
        out
    }

    /// Wall-clock columns, kept apart from the reproducible documents.
    pub fn timings(&self) -> String {
        let mut out = String::from("domain,grounding_seconds,planning_seconds,plan_length\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{}",
                row.domain,
                row.grounding_time.as_secs_f64(),
                row.planning_time.as_secs_f64(),
                row.plan_length.map_or(String::new(), |n| n.to_string())
            );
        }
        out
    }
}

/// Result of solving a compiled task with the configured planner.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub result: SearchResult,
    pub grounding_time: Duration,
}

/// Grounds and solves `compiled`, guided by the evaluator that fits its variant.
pub fn solve_compiled(
    compiled: &CompiledTask,
    search: &SearchConfig,
    planner: &PlannerChoice,
) -> Result<SolveRun, (Stage, HarnessError)> {
    let domain = compiled.domain();
    let problem = compiled.problem();
    if let PlannerChoice::External(ext) = planner {
        let result = solve_external(&domain, &problem, ext).map_err(|e| (Stage::Solve, e.into()))?;
        return Ok(SolveRun {
            result,
            grounding_time: Duration::ZERO,
        });
    }
    let start = Instant::now();
    let gt = ground(&domain, &problem, &GroundConfig::default()).map_err(|e| (Stage::Ground, e.into()))?;
    let grounding_time = start.elapsed();
    let mut config = SearchConfig {
        eliminate_redundant: true,
        ..search.clone()
    };
    let result = match compiled.variant {
        Variant::LabeledPlans => {
            let mut h = RolloutHeuristic::new(compiled, &gt).map_err(|e| (Stage::Solve, e.into()))?;
            config.eliminate_redundant = false;
            let mut result = solve_with(&gt, &config, &mut h);
            if let Some(ops) = &result.operators {
                let ops = eliminate_keeping_deletes(compiled, &gt, &problem, ops);
                result.plan = Some(gt.plan(&ops));
                result.operators = Some(ops);
            }
            result
        }
        Variant::Labels => {
            let mut h = ReachabilityHeuristic::new(compiled, &gt).map_err(|e| (Stage::Solve, e.into()))?;
            solve_with(&gt, &config, &mut h)
        }
    };
    Ok(SolveRun { result, grounding_time })
}

/// Drops redundant steps except effect programming that produced a delete,
/// so kept preconditions stay deleted where the examples allow it, and
/// removals of preconditions no observed state can satisfy, which the
/// search ranks as it would an absent slot.
fn eliminate_keeping_deletes(compiled: &CompiledTask, gt: &GroundTask, problem: &Problem, ops: &[usize]) -> Vec<usize> {
    let sa = analyze_statics(&compiled.task, &compiled.hypothesis);
    let ruled_out: std::collections::HashSet<String> = compiled
        .slots
        .iter()
        .flat_map(|(schema, slots)| slots.keys().map(move |a| (schema, a)))
        .filter(|(schema, a)| sa.is_forbidden(schema, a))
        .map(|(schema, a)| format!("program_pre_{}", &CompiledTask::pre_fluent(schema, a)[4..]))
        .collect();
    let states = gt.replay(ops).expect("search returns valid plans");
    let pinned: Vec<bool> = ops
        .iter()
        .zip(&states)
        .map(|(&o, before)| {
            let op = &gt.operators[o];
            if ruled_out.contains(&op.name) {
                return true;
            }
            op.name.strip_prefix("program_eff_").is_some_and(|suffix| {
                let pre = GroundAtom::new(&format!("pre_{suffix}"), &[]);
                // fluents no operator touches were folded into constants
                gt.atom(&pre).map_or(problem.init.contains(&pre), |i| before.get(i))
            })
        })
        .collect();
    eliminate_redundant_except(gt, ops, &pinned)
}

fn partial_model(schemas: &[OperatorSchema], fraction: f64) -> PartialModel {
    if (fraction - 0.5).abs() < f64::EPSILON {
        return half_partial_model(schemas);
    }
    let mut sorted: Vec<&OperatorSchema> = schemas.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let keep = ((schemas.len() as f64) * fraction).ceil() as usize;
    sorted
        .into_iter()
        .take(keep)
        .map(|s| (s.name.clone(), KnownSchema::from_schema(s, true)))
        .collect()
}

fn write_outputs(dir: &PathBuf, files: &[(&str, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Runs one domain end to end. Stage failures become report rows.
pub fn run_pipeline(config: &ExperimentConfig) -> Report {
    Report {
        rows: vec![run_row(config)],
    }
}

fn run_row(config: &ExperimentConfig) -> Row {
    let row = Row::new(config);
    let reference = match config.domain.strips_schemas() {
        Ok(s) => s,
        Err(name) => return row.fail(Stage::Generate, format!("reference action {name} is not STRIPS")),
    };
    let traces = match &config.imported_traces {
        Some(t) => t.clone(),
        None => match gen_traces(&config.domain, &config.problems, &config.traces) {
            Ok(t) => t,
            Err(e) => return row.fail(Stage::Generate, e),
        },
    };
    let pm = (config.variant == TaskVariant::Partial).then(|| partial_model(&reference, config.partial_fraction));
    let task = match LearningTask::new(&config.domain, &traces, config.variant != TaskVariant::Labels, pm) {
        Ok(t) => t,
        Err(e) => return row.fail(Stage::Compile, e),
    };
    let options = CompileOptions {
        static_pruning: config.static_pruning,
        symmetry_breaking: config.symmetry_breaking,
    };
    let compiled = match config.variant {
        TaskVariant::Labels => compile_lambda(&task, options),
        _ => compile_lambda_prime(&task, options),
    };
    let compiled = match compiled {
        Ok(c) => c,
        Err(e) => return row.fail(Stage::Compile, e),
    };
    let all_given = task
        .partial_model
        .as_ref()
        .is_some_and(|pm| task.headers.iter().all(|h| pm.get(&h.name).is_some_and(|k| k.complete)));
    let mut row = learn_row(config, row, &task, &compiled, &reference, all_given);
    if let Some(dir) = &config.out_dir {
        let mut files = vec![
            ("traces.txt", print_traces(&traces)),
            ("compiled-domain.pddl", print_domain(&compiled.domain())),
            ("compiled-problem.pddl", print_problem(&compiled.problem())),
            ("decode-table.txt", compiled.decode_table_text()),
        ];
        if let Some(m) = &row.model {
            files.push(("learned-domain.pddl", print_domain(&m.to_domain(&task))));
        }
        if let Err(e) = write_outputs(&dir.join(&config.name), &files) {
            row = row.fail(Stage::Write, e);
        }
    }
    row
}

fn learn_row(
    config: &ExperimentConfig,
    mut row: Row,
    task: &LearningTask,
    compiled: &CompiledTask,
    reference: &[OperatorSchema],
    all_given: bool,
) -> Row {
    let start = Instant::now();
    let run = match solve_compiled(compiled, &config.search, &config.planner) {
        Ok(r) => r,
        Err((stage, e)) => return row.fail(stage, e),
    };
    row.grounding_time = run.grounding_time;
    row.planning_time = start.elapsed().saturating_sub(run.grounding_time);
    let Some(plan) = run.result.plan.as_ref() else {
        row.outcome = if all_given && run.result.outcome == Outcome::Exhausted {
            RowOutcome::InvalidModel
        } else {
            RowOutcome::Unsolved(run.result.outcome)
        };
        return row;
    };
    row.plan_length = Some(plan.len());
    if let Some(dir) = &config.out_dir {
        if let Err(e) = write_outputs(&dir.join(&config.name), &[("plan.txt", print_plan(plan))]) {
            return row.fail(Stage::Write, e);
        }
    }
    let model = match decode(plan, compiled) {
        Ok(m) => m,
        Err(e) => return row.fail(Stage::Decode, e),
    };
    let verdicts = match validate_by_replay(&model.schemas, task, &config.search) {
        Ok(v) => v,
        Err(e) => return row.fail(Stage::Validate, e),
    };
    row.replay = Some((verdicts.iter().filter(|v| v.is_valid()).count(), verdicts.len()));
    if all_given {
        row.outcome = if verdicts.iter().all(Verdict::is_valid) {
            RowOutcome::ValidModel
        } else {
            RowOutcome::InvalidModel
        };
        row.model = Some(model);
        return row;
    }
    let scope = if config.variant == TaskVariant::Partial {
        Scope::UnknownOnly
    } else {
        Scope::All
    };
    match score(&model.schemas, reference, scope, task.partial_model.as_ref()) {
        Ok(s) => row.score = Some(s),
        Err(e) => return row.fail(Stage::Score, e),
    }
    row.model = Some(model);
    row
}
