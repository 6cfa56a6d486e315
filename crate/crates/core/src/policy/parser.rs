use super::ast::{BinOp, Expr, ExprKind, Program, Stmt, StmtKind, UnOp};
use super::lexer::{tokenize, Pos, Tok, Token};
use super::PolicyError;

/// Host functions callable from any context.
pub const HOST_FUNCTIONS: [&str; 5] = ["http_get", "http_post", "regex_match", "len", "log"];

/// Actions across all contexts; which ones a script may use depends on its context.
pub const ACTIONS: [&str; 5] = ["allow", "block", "transition", "violation", "dispatch"];

const MAX_NESTING: usize = 64;

/// Parses PolicyLang source into a program. Function names are checked
/// against the host functions and actions; context compatibility is
/// checked when a script is compiled for a context.
pub fn parse_policy(source: &str) -> Result<Program, PolicyError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        at: 0,
        depth: 0,
    };
    let mut stmts = Vec::new();
    while !parser.check(&Tok::Eof) {
        stmts.push(parser.statement()?);
    }
    Ok(Program { stmts })
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn check(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.check(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_here(&self, expected: &str) -> PolicyError {
        let t = self.peek();
        PolicyError::syntax(t.pos, format!("expected {expected}, found {}", t.tok.describe()))
    }

    fn expect(&mut self, tok: &Tok, expected: &str) -> Result<Token, PolicyError> {
        if self.check(tok) {
            Ok(self.advance())
        } else {
            Err(self.error_here(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Pos), PolicyError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                let pos = self.advance().pos;
                Ok((name, pos))
            }
            _ => Err(self.error_here(expected)),
        }
    }

    fn enter(&mut self) -> Result<(), PolicyError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(PolicyError::syntax(self.peek().pos, "nesting too deep"));
        }
        Ok(())
    }

    fn statement(&mut self) -> Result<Stmt, PolicyError> {
        self.enter()?;
        let stmt = self.statement_inner();
        self.depth -= 1;
        stmt
    }

    fn statement_inner(&mut self) -> Result<Stmt, PolicyError> {
        let pos = self.peek().pos;
        let kind = match self.peek().tok.clone() {
            Tok::Let => {
                self.advance();
                let (name, _) = self.ident("variable name")?;
                self.expect(&Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Let { name, value }
            }
            Tok::If => return self.if_statement(),
            Tok::For => {
                self.advance();
                let (var, _) = self.ident("loop variable")?;
                self.expect(&Tok::In, "`in`")?;
                let iter = self.expr()?;
                let body = self.block()?;
                StmtKind::For { var, iter, body }
            }
            Tok::Ident(name) if self.peek_at(1) == &Tok::Assign => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Assign { name, value }
            }
            Tok::Ident(name) if self.peek_at(1) == &Tok::Semi => {
                self.advance();
                self.advance();
                check_callable(&name, pos)?;
                StmtKind::Call {
                    call: Expr {
                        pos,
                        kind: ExprKind::Call { name, args: Vec::new() },
                    },
                }
            }
            _ => {
                let call = self.expr()?;
                if !matches!(call.kind, ExprKind::Call { .. }) {
                    return Err(PolicyError::syntax(pos, "expression statement must be a call"));
                }
                self.expect(&Tok::Semi, "`;`")?;
                StmtKind::Call { call }
            }
        };
        Ok(Stmt { pos, kind })
    }

    fn if_statement(&mut self) -> Result<Stmt, PolicyError> {
        let pos = self.expect(&Tok::If, "`if`")?.pos;
        let cond = self.expr()?;
        let then = self.block()?;
        let otherwise = if self.eat(&Tok::Else) {
            if self.check(&Tok::If) {
                self.enter()?;
                let nested = self.if_statement();
                self.depth -= 1;
                Some(vec![nested?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            pos,
            kind: StmtKind::If { cond, then, otherwise },
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, PolicyError> {
        self.expect(&Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.check(&Tok::RBrace) {
            if self.check(&Tok::Eof) {
                return Err(self.error_here("`}`"));
            }
            stmts.push(self.statement()?);
        }
        self.advance();
        Ok(stmts)
    }

    fn expr(&mut self) -> Result<Expr, PolicyError> {
        self.enter()?;
        let e = self.or_expr();
        self.depth -= 1;
        e
    }

    fn or_expr(&mut self) -> Result<Expr, PolicyError> {
        let mut lhs = self.and_expr()?;
        while self.check(&Tok::Or) {
            let pos = self.advance().pos;
            let rhs = self.and_expr()?;
            lhs = binary(pos, BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, PolicyError> {
        let mut lhs = self.not_expr()?;
        while self.check(&Tok::And) {
            let pos = self.advance().pos;
            let rhs = self.not_expr()?;
            lhs = binary(pos, BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, PolicyError> {
        if self.check(&Tok::Not) {
            let pos = self.advance().pos;
            self.enter()?;
            let operand = self.not_expr();
            self.depth -= 1;
            return Ok(Expr {
                pos,
                kind: ExprKind::Unary {
                    op: UnOp::Not,
                    operand: Box::new(operand?),
                },
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, PolicyError> {
        let lhs = self.additive()?;
        let pos = self.peek().pos;
        let op = match self.peek().tok {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::In => BinOp::In,
            Tok::Not if self.peek_at(1) == &Tok::In => {
                self.advance();
                BinOp::NotIn
            }
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.additive()?;
        if matches!(
            self.peek().tok,
            Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::In
        ) {
            return Err(PolicyError::syntax(
                self.peek().pos,
                "comparisons cannot be chained; use `and`",
            ));
        }
        Ok(binary(pos, op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, PolicyError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.advance().pos;
            let rhs = self.multiplicative()?;
            lhs = binary(pos, op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, PolicyError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.advance().pos;
            let rhs = self.unary()?;
            lhs = binary(pos, op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, PolicyError> {
        if self.check(&Tok::Minus) {
            let pos = self.advance().pos;
            self.enter()?;
            let operand = self.unary();
            self.depth -= 1;
            return Ok(Expr {
                pos,
                kind: ExprKind::Unary {
                    op: UnOp::Neg,
                    operand: Box::new(operand?),
                },
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, PolicyError> {
        let mut e = self.primary()?;
        loop {
            match self.peek().tok {
                Tok::Dot => {
                    self.advance();
                    let pos = e.pos;
                    let (field, _) = self.ident("field name after `.`")?;
                    e = Expr {
                        pos,
                        kind: ExprKind::Member {
                            target: Box::new(e),
                            field,
                        },
                    };
                }
                Tok::LBracket => {
                    self.advance();
                    let pos = e.pos;
                    let index = self.expr()?;
                    self.expect(&Tok::RBracket, "`]`")?;
                    e = Expr {
                        pos,
                        kind: ExprKind::Index {
                            target: Box::new(e),
                            index: Box::new(index),
                        },
                    };
                }
                Tok::LParen => {
                    let ExprKind::Ident { name } = &e.kind else {
                        return Err(PolicyError::syntax(
                            self.peek().pos,
                            "only named functions can be called",
                        ));
                    };
                    let name = name.clone();
                    check_callable(&name, e.pos)?;
                    self.advance();
                    let args = self.comma_list(&Tok::RParen, "`)`", |p| p.expr())?;
                    e = Expr {
                        pos: e.pos,
                        kind: ExprKind::Call { name, args },
                    };
                }
                _ => return Ok(e),
            }
        }
    }

    fn comma_list<T>(
        &mut self,
        close: &Tok,
        close_desc: &str,
        mut item: impl FnMut(&mut Self) -> Result<T, PolicyError>,
    ) -> Result<Vec<T>, PolicyError> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(item(self)?);
            if self.eat(close) {
                return Ok(items);
            }
            self.expect(&Tok::Comma, &format!("`,` or {close_desc}"))?;
            // trailing comma
            if self.eat(close) {
                return Ok(items);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, PolicyError> {
        let token = self.peek().clone();
        let pos = token.pos;
        let kind = match token.tok {
            Tok::Null => {
                self.advance();
                ExprKind::Null
            }
            Tok::True | Tok::False => {
                self.advance();
                ExprKind::Bool {
                    value: token.tok == Tok::True,
                }
            }
            Tok::Num(value) => {
                self.advance();
                ExprKind::Num { value }
            }
            Tok::Str(value) => {
                self.advance();
                ExprKind::Str { value }
            }
            Tok::Ident(name) => {
                self.advance();
                ExprKind::Ident { name }
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            Tok::LBracket => {
                self.advance();
                let items = self.comma_list(&Tok::RBracket, "`]`", |p| p.expr())?;
                ExprKind::List { items }
            }
            Tok::LBrace => {
                self.advance();
                let fields = self.comma_list(&Tok::RBrace, "`}`", |p| {
                    let key = match &p.peek().tok {
                        Tok::Ident(k) | Tok::Str(k) => k.clone(),
                        _ => return Err(p.error_here("record key")),
                    };
                    p.advance();
                    p.expect(&Tok::Colon, "`:`")?;
                    Ok((key, p.expr()?))
                })?;
                let mut seen = std::collections::BTreeSet::new();
                for (k, _) in &fields {
                    if !seen.insert(k.as_str()) {
                        return Err(PolicyError::syntax(pos, format!("duplicate record key `{k}`")));
                    }
                }
                ExprKind::Record { fields }
            }
            _ => return Err(self.error_here("expression")),
        };
        Ok(Expr { pos, kind })
    }
}

fn binary(pos: Pos, op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    Expr {
        pos,
        kind: ExprKind::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
    }
}

fn check_callable(name: &str, pos: Pos) -> Result<(), PolicyError> {
    if HOST_FUNCTIONS.contains(&name) || ACTIONS.contains(&name) {
        Ok(())
    } else {
        Err(PolicyError::syntax(pos, format!("unknown function `{name}`")))
    }
}
