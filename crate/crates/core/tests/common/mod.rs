//! Independent oracles shared by the integration tests. The oracles never call
//! the evaluator or constraint checker under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use citysim_core::belief::{Atom, BeliefProgram, Statement, Term};
use rand::seq::SliceRandom;
use rand::Rng;

pub const EDGES: [(&str, &str); 4] = [("d1", "d2"), ("d1", "d3"), ("d2", "d4"), ("d3", "d4")];
pub const DISTRICTS: [&str; 4] = ["d1", "d2", "d3", "d4"];
pub const KINDS: [&str; 3] = ["food", "medicine", "security"];
pub const CAPACITY: i64 = 50;

fn c(s: &str) -> Term {
    Term::constant(s)
}

pub fn background() -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    for d in DISTRICTS {
        out.insert(Atom::new("district", [c(d)]));
    }
    for (a, b) in EDGES {
        out.insert(Atom::new("adjacent", [c(a), c(b)]));
        out.insert(Atom::new("adjacent", [c(b), c(a)]));
    }
    for k in KINDS {
        out.insert(Atom::new("resource", [c(k)]));
    }
    out
}

fn adjacent(a: &str, b: &str) -> bool {
    EDGES.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
}

type Binding = BTreeMap<String, Term>;

fn unify(pattern: &Atom, fact: &Atom, binding: &Binding) -> Option<Binding> {
    if pattern.predicate != fact.predicate || pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut b = binding.clone();
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        match p {
            Term::Variable(v) => match b.get(v) {
                Some(bound) if bound != f => return None,
                Some(_) => {}
                None => {
                    b.insert(v.clone(), f.clone());
                }
            },
            other => {
                if other != f {
                    return None;
                }
            }
        }
    }
    Some(b)
}

fn substitute(atom: &Atom, b: &Binding) -> Atom {
    Atom::new(
        atom.predicate.clone(),
        atom.args.iter().map(|t| match t {
            Term::Variable(v) => b.get(v).cloned().unwrap_or_else(|| t.clone()),
            other => other.clone(),
        }),
    )
}

fn matches(body: &[Atom], facts: &BTreeSet<Atom>, binding: Binding, out: &mut Vec<Binding>) {
    let Some((first, rest)) = body.split_first() else {
        out.push(binding);
        return;
    };
    for f in facts {
        if let Some(b) = unify(first, f, &binding) {
            matches(rest, facts, b, out);
        }
    }
}

/// Least model by backtracking rule matching to a fixpoint (background included).
pub fn oracle_model(program: &BeliefProgram) -> BTreeSet<Atom> {
    let mut facts = background();
    loop {
        let mut added = false;
        for s in &program.statements {
            match s {
                Statement::Fact { head } => added |= facts.insert(head.clone()),
                Statement::Rule { head, body } => {
                    let mut bindings = Vec::new();
                    matches(body, &facts, Binding::new(), &mut bindings);
                    for b in bindings {
                        added |= facts.insert(substitute(head, &b));
                    }
                }
            }
        }
        if !added {
            return facts;
        }
    }
}

/// Least model by grounding every rule over the active domain.
pub fn brute_model(program: &BeliefProgram) -> BTreeSet<Atom> {
    let mut domain: BTreeSet<Term> = BTreeSet::new();
    let collect = |a: &Atom, d: &mut BTreeSet<Term>| {
        for t in &a.args {
            if !t.is_variable() {
                d.insert(t.clone());
            }
        }
    };
    for a in background() {
        collect(&a, &mut domain);
    }
    for s in &program.statements {
        collect(s.head(), &mut domain);
        for a in s.body() {
            collect(a, &mut domain);
        }
    }
    let domain: Vec<Term> = domain.into_iter().collect();
    let mut facts = background();
    loop {
        let mut added = false;
        for s in &program.statements {
            let mut vars: Vec<String> = Vec::new();
            for a in std::iter::once(s.head()).chain(s.body()) {
                for v in a.variables() {
                    if !vars.iter().any(|x| x == v) {
                        vars.push(v.to_string());
                    }
                }
            }
            // every assignment of domain values to the variables
            let total = domain.len().pow(vars.len() as u32);
            for mut code in 0..total {
                let mut b = Binding::new();
                for v in &vars {
                    b.insert(v.clone(), domain[code % domain.len()].clone());
                    code /= domain.len();
                }
                if s.body().iter().all(|a| facts.contains(&substitute(a, &b))) {
                    added |= facts.insert(substitute(s.head(), &b));
                }
            }
        }
        if !added {
            return facts;
        }
    }
}

fn values<'a>(facts: &'a BTreeSet<Atom>, pred: &'a str, arity: usize) -> impl Iterator<Item = &'a Atom> + 'a {
    facts.iter().filter(move |a| a.predicate == pred && a.args.len() == arity)
}

/// Direct restatement of the eight belief constraints for an agent carrying food.
pub fn oracle_violates(facts: &BTreeSet<Atom>) -> bool {
    let locs: Vec<&str> = values(facts, "at", 2)
        .filter(|a| a.args[0].as_constant() == Some("self"))
        .filter_map(|a| a.args[1].as_constant())
        .collect();
    if locs.len() > 1 {
        return true;
    }
    for (pred, arity) in [("carrying", 2), ("resource_level", 3), ("health", 2)] {
        let atoms: Vec<&Atom> = values(facts, pred, arity).collect();
        for x in &atoms {
            for y in &atoms {
                if x.args[..arity - 1] == y.args[..arity - 1] && x.args[arity - 1] != y.args[arity - 1] {
                    return true;
                }
            }
        }
    }
    let last_int = |a: &Atom| a.args.last().and_then(Term::as_int);
    if values(facts, "carrying", 2).filter_map(last_int).any(|v| !(0..=CAPACITY).contains(&v)) {
        return true;
    }
    if values(facts, "resource_level", 3).filter_map(last_int).any(|v| v < 0) {
        return true;
    }
    if values(facts, "health", 2).filter_map(last_int).any(|v| !(0..=100).contains(&v)) {
        return true;
    }
    for target in values(facts, "plan_move", 1).filter_map(|a| a.args[0].as_constant()) {
        if DISTRICTS.contains(&target) && locs.iter().any(|l| DISTRICTS.contains(l) && !adjacent(l, target)) {
            return true;
        }
    }
    let food: Vec<i64> = values(facts, "carrying", 2)
        .filter(|a| a.args[0].as_constant() == Some("food"))
        .filter_map(last_int)
        .collect();
    for amount in values(facts, "plan_supply", 1).filter_map(|a| a.args[0].as_int()) {
        if amount <= 0 || food.iter().any(|&c| amount > c) {
            return true;
        }
    }
    values(facts, "plan_move", 1).count() + values(facts, "plan_supply", 1).count() > 1
}

pub fn oracle_inconsistent(program: &BeliefProgram, indices: &BTreeSet<usize>) -> bool {
    oracle_violates(&oracle_model(&program.subset(indices)))
}

const RULES: [&str; 9] = [
    "plan_move(D) :- needs(D, food, N).",
    "plan_move(D) :- p(D).",
    "p(D) :- needs(D, K, N).",
    "at(self, D) :- plan_move(D).",
    "health(D, 50) :- needs(D, medicine, N).",
    "carrying(food, N) :- needs(d2, food, N).",
    "plan_supply(N) :- needs(D, food, N).",
    "resource_level(D, K, N) :- needs(D, K, N).",
    "q(D) :- adjacent(d1, D).",
];

const PLANTS: [&[&str]; 9] = [
    &["at(self, d1).", "at(self, d3)."],
    &["health(d2, 40).", "health(d2, 80)."],
    &["carrying(food, 55)."],
    &["resource_level(d3, food, -2)."],
    &["health(d4, 105)."],
    &["at(self, d1).", "plan_move(d4)."],
    &["plan_supply(0)."],
    &["carrying(food, 10).", "plan_supply(25)."],
    &["plan_move(d2).", "plan_supply(10)."],
];

fn random_fact<R: Rng>(rng: &mut R) -> String {
    let d = DISTRICTS.choose(rng).unwrap();
    let k = KINDS.choose(rng).unwrap();
    match rng.gen_range(0..8) {
        0 => format!("at(self, {d})."),
        1 => format!("carrying({k}, {}).", [-3, 0, 10, 30, 45, 55].choose(rng).unwrap()),
        2 => format!("resource_level({d}, {k}, {}).", [-2, 0, 15, 30].choose(rng).unwrap()),
        3 => format!("health({d}, {}).", [-1, 40, 80, 100, 105].choose(rng).unwrap()),
        4 => format!("needs({d}, {k}, {}).", [5, 10, 20].choose(rng).unwrap()),
        5 => format!("plan_move({d})."),
        6 => format!("plan_supply({}).", [-1, 0, 10, 25, 60].choose(rng).unwrap()),
        _ => format!("p({d})."),
    }
}

/// A safe, acyclic program of at most `max_len` statements with at least one
/// planted constraint violation.
pub fn random_program<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let plant = PLANTS.choose(rng).unwrap();
    let len = rng.gen_range(plant.len()..=max_len);
    let mut lines: Vec<String> = plant.iter().map(|s| s.to_string()).collect();
    while lines.len() < len {
        if rng.gen_bool(0.3) {
            lines.push(RULES.choose(rng).unwrap().to_string());
        } else {
            lines.push(random_fact(rng));
        }
    }
    lines.shuffle(rng);
    lines.join("\n") + "\n"
}

/// Same generator without planted violations.
pub fn random_unplanted<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    let lines: Vec<String> = (0..len)
        .map(|_| if rng.gen_bool(0.3) { RULES.choose(rng).unwrap().to_string() } else { random_fact(rng) })
        .collect();
    lines.join("\n") + "\n"
}

pub struct CoreCheck {
    pub ok: bool,
    pub detail: String,
    pub checks: usize,
    pub bound: f64,
}

/// Runs the core extractor and confirms its answer with the oracles: the core
/// is inconsistent, no proper subset of it is, and the check count is bounded.
pub fn check_core(text: &str) -> CoreCheck {
    use citysim_core::verify::{minimal_core, FixedTheory};
    let program = citysim_core::belief::parse(text).expect("generated programs parse");
    let n = program.len();
    let all: BTreeSet<usize> = (0..n).collect();
    if !oracle_inconsistent(&program, &all) {
        return CoreCheck { ok: false, detail: format!("oracle finds no violation in\n{text}"), checks: 0, bound: 0.0 };
    }
    let result = match minimal_core(&program, Some(text), &FixedTheory::default()) {
        Ok(r) => r,
        Err(e) => return CoreCheck { ok: false, detail: format!("{e} for\n{text}"), checks: 0, bound: 0.0 },
    };
    let k = result.core.len();
    let bound = 2.0 * k as f64 * ((n as f64).log2() + 2.0);
    let core: Vec<usize> = result.core.clone();
    if !oracle_inconsistent(&program, &core.iter().copied().collect()) {
        return CoreCheck { ok: false, detail: format!("core {core:?} is consistent for\n{text}"), checks: result.checks, bound };
    }
    // exhaustive over proper subsets of the core
    for mask in 0..(1u32 << k) - 1 {
        let subset: BTreeSet<usize> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| core[i]).collect();
        if oracle_inconsistent(&program, &subset) {
            return CoreCheck {
                ok: false,
                detail: format!("core {core:?} has inconsistent proper subset {subset:?} for\n{text}"),
                checks: result.checks,
                bound,
            };
        }
    }
    if result.checks as f64 > bound {
        return CoreCheck {
            ok: false,
            detail: format!("{} checks exceed bound {bound:.1} (k={k}, n={n}) for\n{text}", result.checks),
            checks: result.checks,
            bound,
        };
    }
    CoreCheck { ok: true, detail: String::new(), checks: result.checks, bound }
}

pub mod harness {
    use citysim_core::harness::{
        run_agent_turn, run_trial, CognitiveConfig, PrivateMemory, PromptTemplates, SharedMemory, TrialSetup, Transcript,
        TurnContext, TurnRecord,
    };
    use citysim_core::policy::{HeuristicPolicy, Policy, ScriptedPolicy};
    use citysim_core::sim::{ResourceKind, SimParams, Topology, WorldState};
    use std::collections::BTreeMap;

    pub const INCONSISTENT: &str = "INTERNAL_BELIEFS:\nat(self, d1).\nat(self, d2).\nRESPONSE:\ntrying\nACTION: MOVE(d2)";
    pub const CONSISTENT: &str = "INTERNAL_BELIEFS:\nat(self, d1).\ncarrying(food, 50).\nRESPONSE:\nfixed\nACTION: MOVE(d2)";

    /// One IB turn for the food agent driven by a script.
    pub fn scripted_turn(config: CognitiveConfig, script: Vec<&str>) -> (WorldState, TurnRecord) {
        let world = WorldState::new(SimParams::default(), Topology::default()).unwrap();
        let templates = PromptTemplates::default();
        let ctx = TurnContext { config, templates: &templates, seed: 0 };
        let mut policy = ScriptedPolicy::new(script);
        let mut shared = SharedMemory::default();
        let mut private = PrivateMemory::default();
        run_agent_turn(&world, ResourceKind::Food, &ctx, &mut policy, &mut shared, &mut private).unwrap()
    }

    pub fn heuristic_policies() -> BTreeMap<ResourceKind, Box<dyn Policy>> {
        ResourceKind::ALL.into_iter().map(|r| (r, Box::new(HeuristicPolicy) as Box<dyn Policy>)).collect()
    }

    pub fn heuristic_trial(config: CognitiveConfig, seed: u64) -> Transcript {
        let setup = TrialSetup {
            params: SimParams::default(),
            topology: Topology::default(),
            config,
            seed,
            templates: PromptTemplates::default(),
        };
        run_trial(&setup, &mut heuristic_policies()).unwrap()
    }

    /// Prompts that quote another agent's private sections, as "turn i quotes role".
    pub fn isolation_leaks(t: &Transcript) -> Vec<String> {
        let mut leaks = Vec::new();
        for (i, turn) in t.turns.iter().enumerate() {
            let prompt: String = turn.prompt.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
            for other in t.turns.iter().filter(|o| o.role != turn.role) {
                let Some(p) = &other.parsed else { continue };
                for section in [&p.internal_beliefs, &p.beliefs_on_others].into_iter().flatten() {
                    if !section.trim().is_empty() && prompt.contains(section.as_str()) {
                        leaks.push(format!("turn {i} ({:?}) quotes {:?}", turn.role, other.role));
                    }
                }
            }
        }
        leaks
    }

    /// Turns whose prompt carries the agent's own previous private notes.
    pub fn own_notes_seen(t: &Transcript) -> usize {
        t.turns
            .iter()
            .enumerate()
            .filter(|(i, turn)| {
                let prompt: String = turn.prompt.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
                t.turns[..*i]
                    .iter()
                    .rev()
                    .find(|o| o.role == turn.role)
                    .and_then(|o| o.parsed.as_ref())
                    .and_then(|p| p.internal_beliefs.as_ref())
                    .is_some_and(|ib| prompt.contains(ib.as_str()))
            })
            .count()
    }
}

pub mod experiment {
    use std::path::{Path, PathBuf};

    use citysim_core::experiment::{bootstrap_median, emit_outputs, run_plan, ExperimentPlan, SummaryFile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn fixtures() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
    }

    pub fn run_and_emit(plan: &ExperimentPlan, out: &Path) -> SummaryFile {
        let outcome = run_plan(plan, out, Some(2)).unwrap();
        emit_outputs(&outcome, plan.master_seed, plan.trials, plan.resamples, plan.confidence, out).unwrap()
    }

    /// Replays the recorded cassettes into `out`.
    pub fn cassette_experiment(out: &Path) -> SummaryFile {
        let plan = ExperimentPlan::load(&fixtures().join("replay_plan.toml")).unwrap();
        run_and_emit(&plan, out)
    }

    /// Share of 200 repetitions whose 95% interval covers the true median of
    /// Uniform(0, 100) with samples of size `n`.
    pub fn coverage(n: usize, resamples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let reps = 200;
        let mut hits = 0;
        for rep in 0..reps {
            let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
            let e = bootstrap_median(&samples, resamples, 0.95, rep).unwrap();
            if e.ci_low <= 50.0 && 50.0 <= e.ci_high {
                hits += 1;
            }
        }
        hits as f64 / reps as f64
    }

    /// Counts bars (rect elements with a title) and error-bar lines in a chart.
    pub fn chart_shape(svg: &str) -> (usize, usize) {
        let bars = svg.matches("<title>").count();
        let error_lines = svg.matches("stroke:#000000;stroke-width:1.5").count();
        (bars, error_lines)
    }
}
