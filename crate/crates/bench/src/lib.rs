//! Fixed learning tasks shared by the benchmarks.

use modelsmith::harness::{benchmark, gen_traces, TraceConfig};
use modelsmith::learn::{compile_lambda_prime, CompileOptions, CompiledTask, LearningTask};
use modelsmith::pddl::{Domain, Problem};

/// Reference domain and problems of a built-in benchmark.
pub fn load(name: &str) -> (Domain, Vec<Problem>) {
    benchmark(name)
        .unwrap_or_else(|| panic!("unknown benchmark {name}"))
        .load()
        .expect("built-in domains parse")
}

/// A seeded plans-variant task over `examples` short walks.
pub fn plans_task(name: &str, examples: usize) -> LearningTask {
    let (domain, problems) = load(name);
    let config = TraceConfig {
        examples,
        walk_min: 4,
        walk_max: 6,
        seed: 7,
        ..TraceConfig::default()
    };
    let traces = gen_traces(&domain, &problems, &config).expect("walks exist");
    LearningTask::new(&domain, &traces, true, None).expect("traces match the domain")
}

pub fn compiled(name: &str, examples: usize, static_pruning: bool) -> CompiledTask {
    let options = CompileOptions {
        static_pruning,
        ..CompileOptions::default()
    };
    compile_lambda_prime(&plans_task(name, examples), options).expect("task compiles")
}
