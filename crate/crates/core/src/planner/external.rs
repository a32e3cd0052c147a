//! Runs an external planner through `sh -c` and verifies its plan by replay.

use std::fs;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use crate::pddl::{
    parse_plan, print_domain, print_problem, replay_actions, Domain, GroundState, Problem, Replay,
};

use super::search::{Outcome, SearchResult, SearchStats};
use super::PlannerError;

/// Environment variable naming the planner executable for `{planner}`.
pub const PLANNER_ENV: &str = "MODELSMITH_PLANNER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalPlanner {
    /// Shell command with `{domain}`, `{problem}` and `{plan}` placeholders,
    /// and optionally `{planner}`. An empty template means
    /// `{planner} {domain} {problem} {plan}`.
    pub template: String,
    pub timeout: Option<Duration>,
}

impl ExternalPlanner {
    pub fn new(template: &str) -> Self {
        Self {
            template: template.to_string(),
            timeout: None,
        }
    }

    /// The command line for the given file paths.
    pub fn command_line(&self, domain: &str, problem: &str, plan: &str) -> Result<String, PlannerError> {
        let template = if self.template.trim().is_empty() {
            "{planner} {domain} {problem} {plan}"
        } else {
            self.template.as_str()
        };
        for needed in ["{domain}", "{problem}", "{plan}"] {
            if !template.contains(needed) {
                return Err(PlannerError::ExternalConfig(format!(
                    "template `{template}` lacks the {needed} placeholder"
                )));
            }
        }
        let mut cmd = template
            .replace("{domain}", domain)
            .replace("{problem}", problem)
            .replace("{plan}", plan);
        if cmd.contains("{planner}") {
            let exe = std::env::var(PLANNER_ENV).map_err(|_| {
                PlannerError::ExternalConfig(format!("template uses {{planner}} but {PLANNER_ENV} is not set"))
            })?;
            cmd = cmd.replace("{planner}", &exe);
        }
        Ok(cmd)
    }
}

fn goal_holds(problem: &Problem, state: &GroundState) -> bool {
    problem.goal.iter().all(|g| state.holds(g))
}

/// Writes the task to a temporary directory, runs the planner and returns its
/// plan once it replays from the initial state to the goal.
pub fn solve_external(domain: &Domain, problem: &Problem, planner: &ExternalPlanner) -> Result<SearchResult, PlannerError> {
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let dpath = dir.path().join("domain.pddl");
    let ppath = dir.path().join("problem.pddl");
    let plan_path = dir.path().join("plan.txt");
    fs::write(&dpath, print_domain(domain))?;
    fs::write(&ppath, print_problem(problem))?;
    let command = planner.command_line(
        &dpath.to_string_lossy(),
        &ppath.to_string_lossy(),
        &plan_path.to_string_lossy(),
    )?;
    let stdout = fs::File::create(dir.path().join("stdout.txt"))?;
    let stderr_path = dir.path().join("stderr.txt");
    let stderr = fs::File::create(&stderr_path)?;
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .spawn()
        .map_err(|e| PlannerError::ExternalConfig(format!("cannot start `sh -c {command}`: {e}")))?;
    let status = match planner.timeout {
        Some(t) => match child.wait_timeout(t)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(PlannerError::ExternalTimeout(t));
            }
        },
        None => child.wait()?,
    };
    let err_text = fs::read_to_string(&stderr_path).unwrap_or_default();
    if status.code() == Some(127) {
        return Err(PlannerError::ExternalConfig(format!(
            "command not found: `{command}`: {}",
            err_text.trim()
        )));
    }
    if !status.success() {
        return Err(PlannerError::ExternalFailed {
            command,
            status: status.to_string(),
            stderr: err_text.trim().to_string(),
        });
    }
    let text = fs::read_to_string(&plan_path)
        .map_err(|e| PlannerError::ExternalOutput(format!("no plan file at {}: {e}", plan_path.display())))?;
    let plan = parse_plan(&text).map_err(|e| PlannerError::ExternalOutput(format!("unparseable plan: {e}")))?;
    let init = GroundState::new(problem.init.iter().cloned());
    let replayed = replay_actions(&init, &plan, &domain.actions).map_err(|e| PlannerError::ExternalPlanInvalid {
        step: 0,
        reason: e.to_string(),
    })?;
    match replayed {
        Replay::Failed { index, .. } => Err(PlannerError::ExternalPlanInvalid {
            step: index + 1,
            reason: format!("{} is not applicable", plan.steps[index]),
        }),
        Replay::Completed { trace } => {
            let last = trace.last().expect("non-empty");
            if !goal_holds(problem, last) {
                return Err(PlannerError::ExternalPlanInvalid {
                    step: plan.len(),
                    reason: "the goal does not hold after the last step".into(),
                });
            }
            Ok(SearchResult {
                outcome: Outcome::PlanFound,
                plan: Some(plan),
                operators: None,
                stats: SearchStats {
                    elapsed: start.elapsed(),
                    ..Default::default()
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem};

    fn task() -> (Domain, Problem) {
        let d = parse_domain(
            "(define (domain chain) (:predicates (at ?x) (link ?x ?y))
               (:action move :parameters (?x ?y) :precondition (and (at ?x) (link ?x ?y))
                :effect (and (at ?y) (not (at ?x)))))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem c) (:domain chain) (:objects a b c)
               (:init (at a) (link a b) (link b c)) (:goal (at c)))",
        )
        .unwrap();
        (d, p)
    }

    /// A planner that copies a canned plan file, ignoring the task.
    fn canned(plan: &str) -> (tempfile::TempDir, ExternalPlanner) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("canned.plan");
        fs::write(&path, plan).unwrap();
        let template = format!("test -s {{domain}} && test -s {{problem}} && cp '{}' {{plan}}", path.display());
        (dir, ExternalPlanner::new(&template))
    }

    #[test]
    fn verified_plan_is_returned() {
        let (d, p) = task();
        let (_dir, planner) = canned("(move a b)\n(move b c)\n; cost = 2\n");
        let r = solve_external(&d, &p, &planner).unwrap();
        assert!(r.solved());
        assert_eq!(r.plan.unwrap().len(), 2);
    }

    #[test]
    fn corrupted_plan_is_rejected() {
        let (d, p) = task();
        let (_dir, planner) = canned("(move a b)\n(move a b)\n");
        match solve_external(&d, &p, &planner) {
            Err(PlannerError::ExternalPlanInvalid { step, .. }) => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
        let (_dir, short) = canned("(move a b)\n");
        assert!(matches!(
            solve_external(&d, &p, &short),
            Err(PlannerError::ExternalPlanInvalid { step: 1, .. })
        ));
    }

    #[test]
    fn unparseable_output_is_reported() {
        let (d, p) = task();
        let (_dir, planner) = canned("(move a b\n");
        assert!(matches!(solve_external(&d, &p, &planner), Err(PlannerError::ExternalOutput(_))));
    }

    #[test]
    fn missing_executable_is_a_configuration_error() {
        let (d, p) = task();
        let planner = ExternalPlanner::new("/nonexistent/modelsmith-planner {domain} {problem} {plan}");
        match solve_external(&d, &p, &planner) {
            Err(PlannerError::ExternalConfig(msg)) => assert!(msg.contains("/nonexistent/modelsmith-planner")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn failing_planner_is_reported_with_stderr() {
        let (d, p) = task();
        let planner = ExternalPlanner::new("echo boom >&2; exit 3 # {domain} {problem} {plan}");
        match solve_external(&d, &p, &planner) {
            Err(PlannerError::ExternalFailed { stderr, .. }) => assert_eq!(stderr, "boom"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slow_planner_times_out() {
        let (d, p) = task();
        let mut planner = ExternalPlanner::new("sleep 5 # {domain} {problem} {plan}");
        planner.timeout = Some(Duration::from_millis(100));
        assert!(matches!(solve_external(&d, &p, &planner), Err(PlannerError::ExternalTimeout(_))));
    }

    #[test]
    fn template_needs_every_placeholder() {
        let planner = ExternalPlanner::new("run {domain} {problem}");
        assert!(matches!(planner.command_line("d", "p", "o"), Err(PlannerError::ExternalConfig(_))));
        let planner = ExternalPlanner::new("run {domain} {problem} -o {plan}");
        assert_eq!(planner.command_line("d", "p", "o").unwrap(), "run d p -o o");
    }
}
