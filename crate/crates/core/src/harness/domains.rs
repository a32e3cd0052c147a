//! Built-in benchmark domains: a reference model plus problem files whose
//! initial states seed the random walks.

use crate::pddl::{parse_domain, parse_problem, Domain, Problem};

use super::HarnessError;

#[derive(Debug, Clone, Copy)]
pub struct Benchmark {
    pub name: &'static str,
    pub domain: &'static str,
    pub problems: &'static [&'static str],
}

impl Benchmark {
    pub fn load(&self) -> Result<(Domain, Vec<Problem>), HarnessError> {
        let domain = parse_domain(self.domain)?;
        let problems = self
            .problems
            .iter()
            .map(|p| parse_problem(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((domain, problems))
    }
}

macro_rules! bench {
    ($name:literal, [$($p:literal),+ $(,)?]) => {
        Benchmark {
            name: $name,
            domain: include_str!(concat!("../../assets/domains/", $name, "/domain.pddl")),
            problems: &[$(include_str!(concat!("../../assets/domains/", $name, "/problems/", $p, ".pddl"))),+],
        }
    };
}

static BENCHMARKS: &[Benchmark] = &[
    bench!("blocksworld", ["p4-1", "p4-2", "p5-1", "p5-2", "p6-1", "p6-2"]),
    bench!("ferry", ["c2-1", "c2-2", "c2-3"]),
    bench!("gripper", ["b1-1", "b1-2", "b2-1", "b2-2"]),
    bench!("zenotravel", ["p1", "p2", "p3"]),
];

pub fn benchmarks() -> &'static [Benchmark] {
    BENCHMARKS
}

pub fn benchmark(name: &str) -> Option<&'static Benchmark> {
    BENCHMARKS.iter().find(|b| b.name == name)
}
