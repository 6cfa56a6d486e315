use std::collections::BTreeMap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use regex::RegexBuilder;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ast::{BinOp, Expr, ExprKind, Program, Stmt, StmtKind, UnOp};
use super::context::{ContextBinding, Decision, Dispatch, PolicyContext, PolicyOutcome};
use super::lexer::Pos;
use super::value::Value;
use super::{BudgetKind, PolicyError, SandboxBudget};
use crate::transport::{HttpRequest, HttpTransport};

pub const TRACE_CAP: usize = 1000;
const MAX_STRING_BYTES: usize = 1 << 20;
const MAX_LIST_LEN: usize = 100_000;
const MAX_REGEX_BYTES: usize = 1 << 20;
pub const DEFAULT_EVENT: &str = "vulnerability.detected";

/// One executed statement or loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: u64,
    pub statement: String,
    pub values: serde_json::Value,
}

enum Flow {
    Next,
    Halt,
}

pub(crate) struct Interp<'a> {
    context: PolicyContext,
    budget: &'a SandboxBudget,
    transport: &'a dyn HttpTransport,
    started: Instant,
    steps: u64,
    http_calls: u32,
    globals: BTreeMap<String, Value>,
    scopes: Vec<BTreeMap<String, Value>>,
    notification: Option<NotificationIndex>,
    pub(crate) trace: Option<Vec<TraceEntry>>,
    pub(crate) trace_truncated: bool,
    pub(crate) logs: Vec<String>,
    verdict: Option<(Decision, String)>,
    transition: Option<String>,
    violations: Vec<String>,
    dispatches: Vec<Dispatch>,
}

struct NotificationIndex {
    signal: String,
    assets: BTreeMap<String, (Option<u32>, String)>,
}

fn rt(pos: Pos, message: impl Into<String>) -> PolicyError {
    PolicyError::RuntimeType {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

impl<'a> Interp<'a> {
    pub(crate) fn new(
        context: PolicyContext,
        binding: &ContextBinding,
        budget: &'a SandboxBudget,
        transport: &'a dyn HttpTransport,
        tracing: bool,
    ) -> Self {
        let globals = binding
            .globals()
            .iter()
            .map(|(k, v)| (k.clone(), Value::from_json(v)))
            .collect();
        let notification = match binding {
            ContextBinding::Notification(n) => Some(NotificationIndex {
                signal: n.signal.external_id.clone(),
                assets: n
                    .assets
                    .iter()
                    .map(|a| (a.id.clone(), (a.depscore, a.tier.tier_id.clone())))
                    .collect(),
            }),
            _ => None,
        };
        Self {
            context,
            budget,
            transport,
            started: Instant::now(),
            steps: 0,
            http_calls: 0,
            globals,
            scopes: Vec::new(),
            notification,
            trace: tracing.then(Vec::new),
            trace_truncated: false,
            logs: Vec::new(),
            verdict: None,
            transition: None,
            violations: Vec::new(),
            dispatches: Vec::new(),
        }
    }

    pub(crate) fn run(&mut self, program: &Program) -> Result<PolicyOutcome, PolicyError> {
        self.exec_block(&program.stmts)?;
        self.outcome()
    }

    fn outcome(&mut self) -> Result<PolicyOutcome, PolicyError> {
        Ok(match self.context {
            PolicyContext::Pr => {
                let (decision, comment) = self.verdict.take().ok_or(PolicyError::MissingVerdict)?;
                PolicyOutcome::Pr { decision, comment }
            }
            PolicyContext::Status => PolicyOutcome::Status {
                transition_to: self.transition.take(),
            },
            PolicyContext::Policy => PolicyOutcome::Policy {
                pass: self.violations.is_empty(),
                violations: std::mem::take(&mut self.violations),
            },
            PolicyContext::Notification => PolicyOutcome::Notification {
                dispatches: std::mem::take(&mut self.dispatches),
            },
        })
    }

    fn tick(&mut self) -> Result<(), PolicyError> {
        self.steps += 1;
        if self.steps > self.budget.max_steps {
            return Err(PolicyError::BudgetExceeded {
                budget: BudgetKind::Steps,
            });
        }
        self.check_time()
    }

    fn check_time(&self) -> Result<(), PolicyError> {
        if self.started.elapsed() > Duration::from_millis(self.budget.timeout_ms) {
            return Err(PolicyError::BudgetExceeded {
                budget: BudgetKind::Time,
            });
        }
        Ok(())
    }

    fn record(&mut self, pos: Pos, statement: String, values: serde_json::Value) {
        let step = self.steps;
        if let Some(trace) = self.trace.as_mut() {
            if trace.len() < TRACE_CAP {
                trace.push(TraceEntry {
                    step,
                    statement: format!("{}:{} {statement}", pos.line, pos.col),
                    values,
                });
            } else {
                self.trace_truncated = true;
            }
        }
    }

    fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    fn exec_block(&mut self, stmts: &[Stmt]) -> Result<Flow, PolicyError> {
        self.scopes.push(BTreeMap::new());
        let result = self.exec_stmts(stmts);
        self.scopes.pop();
        result
    }

    fn exec_stmts(&mut self, stmts: &[Stmt]) -> Result<Flow, PolicyError> {
        for stmt in stmts {
            if let Flow::Halt = self.exec(stmt)? {
                return Ok(Flow::Halt);
            }
        }
        Ok(Flow::Next)
    }

    fn exec(&mut self, stmt: &Stmt) -> Result<Flow, PolicyError> {
        self.tick()?;
        match &stmt.kind {
            StmtKind::Let { name, value } => {
                let v = self.eval(value)?;
                if self.tracing() {
                    self.record(stmt.pos, format!("let {name}"), json!({ name.as_str(): v.to_json() }));
                }
                self.scopes
                    .last_mut()
                    .expect("a scope is always open")
                    .insert(name.clone(), v);
                Ok(Flow::Next)
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval(value)?;
                if self.tracing() {
                    self.record(stmt.pos, format!("{name} ="), json!({ name.as_str(): v.to_json() }));
                }
                let slot = self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name));
                match slot {
                    Some(slot) => *slot = v,
                    None if self.globals.contains_key(name) => {
                        return Err(rt(stmt.pos, format!("binding `{name}` is read-only")));
                    }
                    None => return Err(rt(stmt.pos, format!("assignment to undeclared variable `{name}`"))),
                }
                Ok(Flow::Next)
            }
            StmtKind::If { cond, then, otherwise } => {
                let c = self.eval(cond)?;
                let Value::Bool(c) = c else {
                    return Err(rt(
                        cond.pos,
                        format!("if condition must be bool, got {}", c.type_name()),
                    ));
                };
                self.record(stmt.pos, "if".into(), json!({ "condition": c }));
                if c {
                    self.exec_block(then)
                } else if let Some(other) = otherwise {
                    self.exec_block(other)
                } else {
                    Ok(Flow::Next)
                }
            }
            StmtKind::For { var, iter, body } => {
                let items: Vec<Value> = match self.eval(iter)? {
                    Value::List(items) => items.as_ref().clone(),
                    Value::Record(map) => map.keys().map(Value::str).collect(),
                    other => {
                        return Err(rt(iter.pos, format!("cannot iterate over {}", other.type_name())));
                    }
                };
                self.record(stmt.pos, format!("for {var}"), json!({ "iterations": items.len() }));
                for item in items {
                    self.tick()?;
                    if self.tracing() {
                        self.record(
                            stmt.pos,
                            format!("for {var} (iteration)"),
                            json!({ var.as_str(): item.to_json() }),
                        );
                    }
                    self.scopes.push(BTreeMap::from([(var.clone(), item)]));
                    let flow = self.exec_stmts(body);
                    self.scopes.pop();
                    if let Flow::Halt = flow? {
                        return Ok(Flow::Halt);
                    }
                }
                Ok(Flow::Next)
            }
            StmtKind::Call { call } => {
                let ExprKind::Call { name, args } = &call.kind else {
                    return Err(rt(call.pos, "statement is not a call"));
                };
                let values = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                if self.tracing() {
                    let shown: Vec<_> = values.iter().map(Value::to_json).collect();
                    self.record(stmt.pos, format!("call {name}"), json!({ "args": shown }));
                }
                let halts = self.context.actions().contains(&name.as_str())
                    && matches!(name.as_str(), "allow" | "block" | "transition");
                self.call(name, values, call.pos)?;
                Ok(if halts { Flow::Halt } else { Flow::Next })
            }
        }
    }

    fn lookup(&self, name: &str, pos: Pos) -> Result<Value, PolicyError> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .or_else(|| self.globals.get(name))
            .cloned()
            .ok_or_else(|| rt(pos, format!("undefined variable `{name}`")))
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, PolicyError> {
        let pos = expr.pos;
        Ok(match &expr.kind {
            ExprKind::Null => Value::Null,
            ExprKind::Bool { value } => Value::Bool(*value),
            ExprKind::Num { value } => Value::Num(*value),
            ExprKind::Str { value } => Value::str(value),
            ExprKind::Ident { name } => self.lookup(name, pos)?,
            ExprKind::List { items } => {
                let values = items.iter().map(|e| self.eval(e)).collect::<Result<Vec<_>, _>>()?;
                Value::List(Rc::new(values))
            }
            ExprKind::Record { fields } => {
                let mut map = BTreeMap::new();
                for (k, e) in fields {
                    map.insert(k.clone(), self.eval(e)?);
                }
                Value::Record(Rc::new(map))
            }
            ExprKind::Member { target, field } => match self.eval(target)? {
                Value::Record(map) => map.get(field).cloned().unwrap_or(Value::Null),
                other => return Err(rt(pos, format!("cannot read field `{field}` of {}", other.type_name()))),
            },
            ExprKind::Index { target, index } => {
                let t = self.eval(target)?;
                let i = self.eval(index)?;
                match (&t, &i) {
                    (Value::List(items), Value::Num(n)) => {
                        if n.fract() != 0.0 {
                            return Err(rt(pos, format!("list index {n} is not an integer")));
                        }
                        if *n < 0.0 {
                            Value::Null
                        } else {
                            items.get(*n as usize).cloned().unwrap_or(Value::Null)
                        }
                    }
                    (Value::Record(map), Value::Str(k)) => map.get(k.as_ref()).cloned().unwrap_or(Value::Null),
                    _ => {
                        return Err(rt(
                            pos,
                            format!("cannot index {} with {}", t.type_name(), i.type_name()),
                        ))
                    }
                }
            }
            ExprKind::Call { name, args } => {
                let values = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                self.call(name, values, pos)?
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match (op, v) {
                    (UnOp::Neg, Value::Num(n)) => Value::Num(-n),
                    (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    (UnOp::Neg, v) => return Err(rt(pos, format!("cannot negate {}", v.type_name()))),
                    (UnOp::Not, v) => return Err(rt(pos, format!("`not` needs a bool, got {}", v.type_name()))),
                }
            }
            ExprKind::Binary {
                op: BinOp::And,
                lhs,
                rhs,
            } => {
                let l = self.bool_operand(lhs, "and")?;
                Value::Bool(l && self.bool_operand(rhs, "and")?)
            }
            ExprKind::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
            } => {
                let l = self.bool_operand(lhs, "or")?;
                Value::Bool(l || self.bool_operand(rhs, "or")?)
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                binary(*op, l, r, pos)?
            }
        })
    }

    fn bool_operand(&mut self, e: &Expr, op: &str) -> Result<bool, PolicyError> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            other => Err(rt(
                e.pos,
                format!("`{op}` needs bool operands, got {}", other.type_name()),
            )),
        }
    }

    fn call(&mut self, name: &str, args: Vec<Value>, pos: Pos) -> Result<Value, PolicyError> {
        let arity = |min: usize, max: usize| -> Result<(), PolicyError> {
            if args.len() < min || args.len() > max {
                let expected = if min == max {
                    min.to_string()
                } else {
                    format!("{min} to {max}")
                };
                return Err(rt(
                    pos,
                    format!("`{name}` takes {expected} argument(s), got {}", args.len()),
                ));
            }
            Ok(())
        };
        let string_arg = |i: usize, what: &str| -> Result<String, PolicyError> {
            match args.get(i) {
                Some(Value::Str(s)) => Ok(s.to_string()),
                Some(other) => Err(rt(pos, format!("{what} must be a string, got {}", other.type_name()))),
                None => Err(rt(pos, format!("{what} is missing"))),
            }
        };

        if matches!(name, "allow" | "block" | "transition" | "violation" | "dispatch")
            && !self.context.actions().contains(&name)
        {
            return Err(rt(
                pos,
                format!("`{name}` is not available in {} context", self.context),
            ));
        }

        match name {
            "len" => {
                arity(1, 1)?;
                let n = match &args[0] {
                    Value::Str(s) => s.chars().count(),
                    Value::List(l) => l.len(),
                    Value::Record(m) => m.len(),
                    other => return Err(rt(pos, format!("len() of {}", other.type_name()))),
                };
                Ok(Value::Num(n as f64))
            }
            "log" => {
                arity(1, 1)?;
                let msg = args[0].to_string();
                log::info!("policy log: {msg}");
                self.logs.push(msg);
                Ok(Value::Null)
            }
            "regex_match" => {
                arity(2, 2)?;
                let pattern = string_arg(0, "pattern")?;
                let subject = string_arg(1, "subject")?;
                let re = RegexBuilder::new(&pattern)
                    .size_limit(MAX_REGEX_BYTES)
                    .build()
                    .map_err(|e| rt(pos, format!("invalid regex: {e}")))?;
                Ok(Value::Bool(re.is_match(&subject)))
            }
            "http_get" => {
                arity(1, 1)?;
                let url = string_arg(0, "url")?;
                self.http(HttpRequest::get(url))
            }
            "http_post" => {
                arity(2, 2)?;
                let url = string_arg(0, "url")?;
                self.http(HttpRequest::post_json(url, &args[1].to_json()))
            }
            "allow" | "block" => {
                arity(0, 1)?;
                let comment = if args.is_empty() {
                    String::new()
                } else {
                    string_arg(0, "comment")?
                };
                let decision = if name == "allow" {
                    Decision::Allow
                } else {
                    Decision::Block
                };
                self.verdict = Some((decision, comment));
                Ok(Value::Null)
            }
            "transition" => {
                arity(1, 1)?;
                self.transition = Some(string_arg(0, "status id")?);
                Ok(Value::Null)
            }
            "violation" => {
                arity(1, 1)?;
                self.violations.push(args[0].to_string());
                Ok(Value::Null)
            }
            "dispatch" => {
                arity(2, 3)?;
                let channel_id = string_arg(0, "channel id")?;
                let asset_id = match &args[1] {
                    Value::Str(s) => s.to_string(),
                    Value::Record(m) => match m.get("id") {
                        Some(Value::Str(s)) => s.to_string(),
                        _ => return Err(rt(pos, "asset record has no string `id`")),
                    },
                    other => {
                        return Err(rt(
                            pos,
                            format!("asset must be a record or id, got {}", other.type_name()),
                        ))
                    }
                };
                let event = if args.len() == 3 {
                    string_arg(2, "event")?
                } else {
                    DEFAULT_EVENT.to_string()
                };
                let index = self
                    .notification
                    .as_ref()
                    .ok_or_else(|| rt(pos, "dispatch outside notification binding"))?;
                let (depscore, tier) = index
                    .assets
                    .get(&asset_id)
                    .cloned()
                    .ok_or_else(|| rt(pos, format!("asset `{asset_id}` is not in the blast radius")))?;
                let payload = json!({
                    "event": event,
                    "signal": index.signal,
                    "asset": asset_id,
                    "depscore": depscore,
                    "tier": tier,
                });
                self.dispatches.push(Dispatch { channel_id, payload });
                Ok(Value::Null)
            }
            other => Err(rt(pos, format!("unknown function `{other}`"))),
        }
    }

    fn http(&mut self, request: HttpRequest) -> Result<Value, PolicyError> {
        if !self.budget.allows(&request.url) {
            return Err(PolicyError::HttpDenied { url: request.url });
        }
        if self.http_calls >= self.budget.max_http_calls {
            return Err(PolicyError::BudgetExceeded {
                budget: BudgetKind::Http,
            });
        }
        self.check_time()?;
        let remaining = Duration::from_millis(self.budget.timeout_ms).saturating_sub(self.started.elapsed());
        self.http_calls += 1;
        let request = request.with_timeout(remaining);
        let response = self
            .transport
            .send(&request)
            .map_err(|e| PolicyError::HttpFailure { reason: e.0 })?;
        self.check_time()?;
        if !response.is_success() {
            return Err(PolicyError::HttpFailure {
                reason: format!("HTTP {} from {}", response.status, request.url),
            });
        }
        Ok(match serde_json::from_str::<serde_json::Value>(&response.body) {
            Ok(json) => Value::from_json(&json),
            Err(_) => Value::Record(Rc::new(BTreeMap::from([(
                "raw".to_string(),
                Value::str(&response.body),
            )]))),
        })
    }
}

fn binary(op: BinOp, l: Value, r: Value, pos: Pos) -> Result<Value, PolicyError> {
    let mismatch = |l: &Value, r: &Value| {
        rt(
            pos,
            format!(
                "`{}` not defined for {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ),
        )
    };
    Ok(match op {
        BinOp::Eq => Value::Bool(l == r),
        BinOp::Ne => Value::Bool(l != r),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (&l, &r) {
                (Value::Num(a), Value::Num(b)) => a.partial_cmp(b),
                (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
                _ => return Err(mismatch(&l, &r)),
            };
            let Some(ord) = ord else {
                return Ok(Value::Bool(false));
            };
            Value::Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinOp::In | BinOp::NotIn => {
            let found = match (&l, &r) {
                (_, Value::List(items)) => items.contains(&l),
                (Value::Str(needle), Value::Str(hay)) => hay.contains(needle.as_ref()),
                (Value::Str(key), Value::Record(map)) => map.contains_key(key.as_ref()),
                _ => return Err(mismatch(&l, &r)),
            };
            Value::Bool(found == (op == BinOp::In))
        }
        BinOp::Add => match (&l, &r) {
            (Value::Num(a), Value::Num(b)) => Value::Num(a + b),
            (Value::List(a), Value::List(b)) => {
                if a.len() + b.len() > MAX_LIST_LEN {
                    return Err(rt(pos, format!("list exceeds {MAX_LIST_LEN} items")));
                }
                Value::List(Rc::new(a.iter().chain(b.iter()).cloned().collect()))
            }
            (Value::Str(_), Value::List(_) | Value::Record(_)) | (Value::List(_) | Value::Record(_), Value::Str(_)) => {
                return Err(mismatch(&l, &r))
            }
            (Value::Str(_), _) | (_, Value::Str(_)) => {
                let s = format!("{l}{r}");
                if s.len() > MAX_STRING_BYTES {
                    return Err(rt(pos, format!("string exceeds {MAX_STRING_BYTES} bytes")));
                }
                Value::str(s)
            }
            _ => return Err(mismatch(&l, &r)),
        },
        BinOp::Sub | BinOp::Mul | BinOp::Div => {
            let (Value::Num(a), Value::Num(b)) = (&l, &r) else {
                return Err(mismatch(&l, &r));
            };
            match op {
                BinOp::Sub => Value::Num(a - b),
                BinOp::Mul => Value::Num(a * b),
                _ if *b == 0.0 => return Err(rt(pos, "division by zero")),
                _ => Value::Num(a / b),
            }
        }
        BinOp::And | BinOp::Or => unreachable!("short-circuit operators are evaluated in Interp::eval"),
    })
}
