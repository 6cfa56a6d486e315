//! PolicyLang conformance harness shared by the core corpus tests and the
//! service acceptance target: the golden corpus runner and the random
//! script generator for the evaluate/dry_run differential.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use deptex_core::policy::{dry_run, evaluate, ContextBinding, PolicyContext, PolicyScript, SandboxBudget};
use deptex_core::transport::{HttpResponse, MockTransport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

/// Directory of the core crate, from either crate's tests.
pub fn core_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core"))
}

pub fn corpus_dir() -> PathBuf {
    core_dir().join("tests/corpus")
}

pub fn binding(name: &str) -> ContextBinding {
    let path = core_dir().join("../../fixtures/bindings").join(format!("{name}.json"));
    serde_json::from_slice(&fs::read(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[derive(Deserialize)]
struct MockRoute {
    prefix: String,
    status: u16,
    #[serde(default)]
    body: Option<Value>,
    #[serde(default)]
    raw: Option<String>,
}

#[derive(Deserialize)]
struct Case {
    binding: String,
    #[serde(default)]
    budget: Option<SandboxBudget>,
    #[serde(default)]
    http: Vec<MockRoute>,
    expect: Value,
}

fn transport(routes: &[MockRoute]) -> MockTransport {
    routes.iter().fold(MockTransport::new(), |t, r| {
        let body = match (&r.raw, &r.body) {
            (Some(raw), _) => raw.clone(),
            (None, Some(Value::String(s))) => s.clone(),
            (None, Some(v)) => v.to_string(),
            (None, None) => String::new(),
        };
        let status = r.status;
        t.route(None, &r.prefix, move |_| {
            Ok(HttpResponse {
                status,
                body: body.clone(),
            })
        })
    })
}

/// Every key of `expected` must be present in `actual` with the same value.
fn subset(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => e.iter().all(|(k, v)| a.get(k).is_some_and(|av| subset(v, av))),
        _ => expected == actual,
    }
}

/// Outcome or error of one corpus script as JSON, after checking that
/// dry_run agrees with evaluate.
fn run_case(name: &str, case: &Case) -> Result<Result<Value, Value>, String> {
    let source = fs::read_to_string(corpus_dir().join(format!("{name}.dpx"))).map_err(|e| e.to_string())?;
    let script = match PolicyScript::from_source(name, source) {
        Ok(s) => s,
        Err(e) => return Ok(Err(serde_json::to_value(e).unwrap())),
    };
    let budget = case.budget.clone().unwrap_or_default();
    let b = binding(&case.binding);
    let result = evaluate(&script, &b, &budget, &transport(&case.http));
    let report = dry_run(&script, &b, &budget, &transport(&case.http));
    if report.result().cloned().map_err(Clone::clone) != result {
        return Err(format!("{name}: dry run disagrees with evaluate"));
    }
    Ok(match result {
        Ok(o) => Ok(serde_json::to_value(o).unwrap()),
        Err(e) => Err(serde_json::to_value(e).unwrap()),
    })
}

pub struct CorpusSummary {
    pub scripts: usize,
    pub contexts: BTreeSet<String>,
    /// Kinds of expected errors, e.g. `budget_exceeded`, `http_denied`.
    pub error_kinds: BTreeSet<String>,
    pub failures: Vec<String>,
}

/// Runs every `.dpx` script of the corpus against its `.json` case.
pub fn run_corpus() -> CorpusSummary {
    let mut names: Vec<String> = fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "dpx").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();

    let mut summary = CorpusSummary {
        scripts: names.len(),
        contexts: names.iter().map(|n| n.split('-').next().unwrap().to_string()).collect(),
        error_kinds: BTreeSet::new(),
        failures: Vec::new(),
    };
    for name in &names {
        let case: Case = serde_json::from_slice(&fs::read(corpus_dir().join(format!("{name}.json"))).unwrap())
            .unwrap_or_else(|e| panic!("{name}.json: {e}"));
        if let Some(kind) = case.expect.pointer("/error/kind").and_then(Value::as_str) {
            summary.error_kinds.insert(kind.to_string());
        }
        let (ok, got) = match run_case(name, &case) {
            Ok(Ok(v)) => (
                subset(case.expect.get("outcome").unwrap_or(&Value::Null), &v),
                json!({ "outcome": v }),
            ),
            Ok(Err(v)) => (
                subset(case.expect.get("error").unwrap_or(&Value::Null), &v),
                json!({ "error": v }),
            ),
            Err(msg) => (false, json!(msg)),
        };
        if !ok {
            summary
                .failures
                .push(format!("{name}: expected {} got {}", case.expect, got));
        }
    }
    summary
}

pub struct DifferentialSummary {
    pub scripts: usize,
    pub successes: usize,
    pub divergences: Vec<String>,
}

/// Evaluates `n` generated pr scripts twice with `evaluate` and once with
/// `dry_run`; any difference is a divergence.
pub fn run_differential(n: u64) -> DifferentialSummary {
    let b = binding("pr-agpl");
    let budget = SandboxBudget::default().with_allowlist(["https://api.example/"]);
    let mut summary = DifferentialSummary {
        scripts: 0,
        successes: 0,
        divergences: Vec::new(),
    };
    for seed in 0..n {
        let src = random_script(seed);
        let script = match PolicyScript::new(format!("gen-{seed}"), PolicyContext::Pr, src.as_str()) {
            Ok(s) => s,
            Err(e) => {
                summary
                    .divergences
                    .push(format!("seed {seed}: generated script failed to parse: {e}\n{src}"));
                continue;
            }
        };
        summary.scripts += 1;
        let first = evaluate(&script, &b, &budget, &api_transport());
        let again = evaluate(&script, &b, &budget, &api_transport());
        if serde_json::to_string(&first).unwrap() != serde_json::to_string(&again).unwrap() {
            summary
                .divergences
                .push(format!("seed {seed}: non-deterministic\n{src}"));
        }
        let report = dry_run(&script, &b, &budget, &api_transport());
        if report.result().cloned().map_err(Clone::clone) != first {
            summary
                .divergences
                .push(format!("seed {seed}: dry run disagrees\n{src}"));
        }
        if report.http_log.len() > budget.max_http_calls as usize {
            summary
                .divergences
                .push(format!("seed {seed}: {} http calls", report.http_log.len()));
        }
        summary.successes += first.is_ok() as usize;
    }
    summary
}

/// Random pr scripts over the `pr-agpl` binding, built from the whole
/// statement and expression grammar.
struct Gen {
    rng: ChaCha8Rng,
    vars: Vec<String>,
    depth: usize,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs[self.rng.gen_range(0..xs.len())]
    }

    fn var(&mut self) -> Option<String> {
        (!self.vars.is_empty()).then(|| self.vars[self.rng.gen_range(0..self.vars.len())].clone())
    }

    fn num(&mut self, budget: u32) -> String {
        if budget == 0 || self.rng.gen_bool(0.4) {
            return match self.rng.gen_range(0..6) {
                0 | 1 => self.rng.gen_range(-5..20).to_string(),
                2 => self.pick(&["pr.number", "tier.importance", "asset.exposure"]).into(),
                3 => format!(
                    "len({})",
                    self.pick(&["delta.added", "delta.upgraded", "delta.added_licenses", "pr.repo"])
                ),
                4 => "http_get(\"https://api.example/0\").score".into(),
                _ => format!("len({})", self.list(0)),
            };
        }
        let op = self.pick(&["+", "-", "*", "/"]);
        format!("({} {op} {})", self.num(budget - 1), self.num(budget - 1))
    }

    fn string(&mut self, budget: u32) -> String {
        if budget == 0 || self.rng.gen_bool(0.5) {
            return match self.rng.gen_range(0..5) {
                0 | 1 => format!("\"{}\"", self.pick(&["MIT", "GPL", "lodash", "", "4.17"])),
                2 => self
                    .pick(&["pr.author", "asset.name", "delta.added[0].name", "delta.upgraded[0].to"])
                    .into(),
                3 => "http_get(\"https://api.example/2\").raw".into(),
                _ => format!("(\"n=\" + {})", self.num(0)),
            };
        }
        format!("({} + {})", self.string(budget - 1), self.string(budget - 1))
    }

    fn list(&mut self, budget: u32) -> String {
        match self.rng.gen_range(0..3) {
            0 => self
                .pick(&["delta.added_licenses", "delta.added", "delta.upgraded"])
                .into(),
            1 => format!("[{}, {}]", self.string(budget), self.string(budget)),
            _ => format!("[{}]", self.num(budget)),
        }
    }

    fn boolean(&mut self, budget: u32) -> String {
        if budget == 0 || self.rng.gen_bool(0.3) {
            return match self.rng.gen_range(0..5) {
                0 => self
                    .pick(&[
                        "true",
                        "false",
                        "asset.critical",
                        "http_get(\"https://api.example/1\").ok",
                    ])
                    .into(),
                1 => format!(
                    "regex_match(\"{}\", pr.repo)",
                    self.pick(&["^acme/", "checkout$", "[0-9]+"])
                ),
                2 => format!("({} in {})", self.string(0), self.list(0)),
                3 => "(delta.added[3] == null)".into(),
                _ => format!("({} not in {})", self.string(0), self.string(0)),
            };
        }
        match self.rng.gen_range(0..5) {
            0 => format!("(not {})", self.boolean(budget - 1)),
            1 => {
                let op = self.pick(&["and", "or"]);
                format!("({} {op} {})", self.boolean(budget - 1), self.boolean(budget - 1))
            }
            2 => {
                let op = self.pick(&["==", "!=", "<", "<=", ">", ">="]);
                format!("({} {op} {})", self.num(budget - 1), self.num(budget - 1))
            }
            3 => {
                let op = self.pick(&["==", "!=", "<"]);
                format!("({} {op} {})", self.string(budget - 1), self.string(budget - 1))
            }
            _ => format!("({} == {})", self.any(budget - 1), self.any(budget - 1)),
        }
    }

    /// Any type, occasionally a variable or an ill-typed combination.
    fn any(&mut self, budget: u32) -> String {
        match self.rng.gen_range(0..20) {
            0..=4 => self.num(budget),
            5..=9 => self.string(budget),
            10..=13 => self.boolean(budget),
            14..=15 => self.list(budget),
            16..=18 => self.var().unwrap_or_else(|| "null".into()),
            _ => {
                let op = self.pick(&["+", "-", "<", "and", "in"]);
                format!("({} {op} {})", self.boolean(0), self.list(0))
            }
        }
    }

    fn cond(&mut self) -> String {
        match self.var() {
            Some(v) if self.rng.gen_bool(0.15) => v,
            _ => self.boolean(2),
        }
    }

    fn expr(&mut self, budget: u32) -> String {
        self.any(budget)
    }

    fn stmts(&mut self, n: usize, out: &mut String) {
        for _ in 0..n {
            self.stmt(out);
        }
    }

    fn stmt(&mut self, out: &mut String) {
        let indent = "    ".repeat(self.depth);
        match self.rng.gen_range(0..10) {
            0..=2 => {
                let name = format!("v{}", self.vars.len());
                let e = self.expr(2);
                out.push_str(&format!("{indent}let {name} = {e};\n"));
                self.vars.push(name);
            }
            3 if !self.vars.is_empty() => {
                let name = self.vars[self.rng.gen_range(0..self.vars.len())].clone();
                let e = self.expr(2);
                out.push_str(&format!("{indent}{name} = {e};\n"));
            }
            4 | 5 if self.depth < 3 => {
                let cond = self.cond();
                out.push_str(&format!("{indent}if {cond} {{\n"));
                self.nested(out);
                if self.rng.gen_bool(0.5) {
                    out.push_str(&format!("{indent}}} else {{\n"));
                    self.nested(out);
                }
                out.push_str(&format!("{indent}}}\n"));
            }
            6 if self.depth < 3 => {
                let list = self.pick(&[
                    "delta.added",
                    "delta.added_licenses",
                    "delta.upgraded",
                    "[1, 2, 3]",
                    "asset",
                ]);
                out.push_str(&format!("{indent}for it in {list} {{\n"));
                self.nested(out);
                out.push_str(&format!("{indent}}}\n"));
            }
            7 => {
                let verdict = self.pick(&["allow", "block"]);
                let e = self.string(1);
                out.push_str(&format!("{indent}{verdict}({e});\n"));
            }
            _ => {
                let e = self.expr(2);
                out.push_str(&format!("{indent}log({e});\n"));
            }
        }
    }

    fn nested(&mut self, out: &mut String) {
        let saved = self.vars.len();
        self.depth += 1;
        let n = self.rng.gen_range(1..4);
        self.stmts(n, out);
        self.depth -= 1;
        self.vars.truncate(saved);
    }
}

pub fn random_script(seed: u64) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        vars: Vec::new(),
        depth: 0,
    };
    let mut src = String::from("#context: pr\n");
    let n = g.rng.gen_range(1..12);
    g.stmts(n, &mut src);
    if g.rng.gen_bool(0.7) {
        src.push_str("allow(\"end\");\n");
    }
    src
}

pub fn api_transport() -> MockTransport {
    MockTransport::new()
        .json("https://api.example/0", json!({"ok": true, "score": 7}))
        .json("https://api.example/1", json!({"ok": false}))
        .route(None, "https://api.example/2", |_| {
            Ok(HttpResponse {
                status: 200,
                body: "plain text".into(),
            })
        })
}
