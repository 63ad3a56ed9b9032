//! Concrete syntax: parsing source text into [`Program`] and printing
//! the canonical form back out.
//!
//! Statements are separated by newlines or semicolons, loop and branch
//! bodies take explicit braces, and `//` starts a line comment. The
//! canonical printer uses two-space indents and one statement per
//! line; parsing its output reproduces the same tree.

use crate::ast::{BinOp, Command, Expression, Program, UnOp, VarId, EFFECT_VAR};
use std::fmt::Write as _;
use thiserror::Error;

/// Parse failure with a 1-based source position.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct SourceError {
    pub line: u32,
    pub column: u32,
    pub message: String,
    /// The token the parser was looking at, when there was one.
    pub token: Option<String>,
}

impl SourceError {
    fn new(line: u32, column: u32, message: impl Into<String>, token: Option<String>) -> Self {
        SourceError {
            line,
            column,
            message: message.into(),
            token,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    KwIf,
    KwThen,
    KwElse,
    KwWhile,
    KwDo,
    KwFor,
    KwUse,
    KwSkip,
    KwParallel,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Newline,
    Assign,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("literal `{n}`"),
            Tok::Newline => "end of line".to_string(),
            Tok::Eof => "end of input".to_string(),
            Tok::KwIf => "`if`".to_string(),
            Tok::KwThen => "`then`".to_string(),
            Tok::KwElse => "`else`".to_string(),
            Tok::KwWhile => "`while`".to_string(),
            Tok::KwDo => "`do`".to_string(),
            Tok::KwFor => "`for`".to_string(),
            Tok::KwUse => "`use`".to_string(),
            Tok::KwSkip => "`skip`".to_string(),
            Tok::KwParallel => "`parallel`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::Assign => "`=`".to_string(),
            Tok::EqEq => "`==`".to_string(),
            Tok::Ne => "`!=`".to_string(),
            Tok::Lt => "`<`".to_string(),
            Tok::Le => "`<=`".to_string(),
            Tok::Gt => "`>`".to_string(),
            Tok::Ge => "`>=`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
            Tok::Percent => "`%`".to_string(),
            Tok::AndAnd => "`&&`".to_string(),
            Tok::OrOr => "`||`".to_string(),
            Tok::Bang => "`!`".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(src: &str) -> Result<Vec<Token>, SourceError> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok| {
            toks.push(Token {
                tok,
                line: tl,
                col: tc,
            })
        };
        match c {
            '\n' => {
                push(Tok::Newline);
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
                continue;
            }
            '/' if bytes.get(i + 1) == Some(&'/') => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '[' => push(Tok::LBracket),
            ']' => push(Tok::RBracket),
            '{' => push(Tok::LBrace),
            '}' => push(Tok::RBrace),
            ',' => push(Tok::Comma),
            ';' => push(Tok::Semi),
            '+' => push(Tok::Plus),
            '-' => push(Tok::Minus),
            '*' => push(Tok::Star),
            '/' => push(Tok::Slash),
            '%' => push(Tok::Percent),
            '=' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push(Tok::EqEq);
                    i += 1;
                    col += 1;
                } else {
                    push(Tok::Assign);
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push(Tok::Ne);
                    i += 1;
                    col += 1;
                } else {
                    push(Tok::Bang);
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push(Tok::Le);
                    i += 1;
                    col += 1;
                } else {
                    push(Tok::Lt);
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&'=') {
                    push(Tok::Ge);
                    i += 1;
                    col += 1;
                } else {
                    push(Tok::Gt);
                }
            }
            '&' => {
                if bytes.get(i + 1) == Some(&'&') {
                    push(Tok::AndAnd);
                    i += 1;
                    col += 1;
                } else {
                    return Err(SourceError::new(
                        line,
                        col,
                        "unexpected `&`",
                        Some("&".into()),
                    ));
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&'|') {
                    push(Tok::OrOr);
                    i += 1;
                    col += 1;
                } else {
                    return Err(SourceError::new(
                        line,
                        col,
                        "unexpected `|`",
                        Some("|".into()),
                    ));
                }
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == '_') {
                    let bad: String = bytes[start..=i].iter().collect();
                    return Err(SourceError::new(tl, tc, "malformed number", Some(bad)));
                }
                let text: String = bytes[start..i].iter().collect();
                let n: i64 = text.parse().map_err(|_| {
                    SourceError::new(
                        tl,
                        tc,
                        "integer literal out of 64-bit range",
                        Some(text.clone()),
                    )
                })?;
                toks.push(Token {
                    tok: Tok::Int(n),
                    line: tl,
                    col: tc,
                });
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let tok = match text.as_str() {
                    "if" => Tok::KwIf,
                    "then" => Tok::KwThen,
                    "else" => Tok::KwElse,
                    "while" => Tok::KwWhile,
                    "do" => Tok::KwDo,
                    "for" => Tok::KwFor,
                    "use" => Tok::KwUse,
                    "skip" => Tok::KwSkip,
                    "parallel" => Tok::KwParallel,
                    _ => Tok::Ident(text),
                };
                toks.push(Token {
                    tok,
                    line: tl,
                    col: tc,
                });
                continue;
            }
            _ => {
                return Err(SourceError::new(
                    line,
                    col,
                    format!("unexpected character `{c}`"),
                    Some(c.to_string()),
                ));
            }
        }
        i += 1;
        col += 1;
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    allow_parallel: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err(&self, message: impl Into<String>) -> SourceError {
        let t = &self.toks[self.pos];
        SourceError::new(t.line, t.col, message, Some(t.tok.describe()))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SourceError> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {}", tok.describe())))
        }
    }

    /// Skips newline and semicolon separators; true if any were seen.
    fn skip_seps(&mut self) -> bool {
        let mut any = false;
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
            any = true;
        }
        any
    }

    fn ident(&mut self) -> Result<VarId, SourceError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Ident(name) => {
                if name == EFFECT_VAR {
                    return Err(SourceError::new(
                        line,
                        col,
                        format!("`{EFFECT_VAR}` is reserved"),
                        Some(name),
                    ));
                }
                self.bump();
                Ok(VarId::new(&name).expect("lexer produces valid identifiers"))
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn parse_stmt_list(&mut self, terminator: &Tok) -> Result<Vec<Command>, SourceError> {
        let mut stmts = Vec::new();
        self.skip_seps();
        loop {
            if self.peek() == terminator {
                break;
            }
            let mut group = self.parse_stmt()?;
            stmts.append(&mut group);
            if self.peek() == terminator {
                break;
            }
            if !self.skip_seps() {
                return Err(self.err("expected newline or `;` after statement"));
            }
        }
        Ok(stmts)
    }

    fn parse_block(&mut self) -> Result<Command, SourceError> {
        self.expect(Tok::LBrace)?;
        let stmts = self.parse_stmt_list(&Tok::RBrace)?;
        if stmts.is_empty() {
            return Err(self.err("empty block"));
        }
        self.expect(Tok::RBrace)?;
        Ok(Command::Seq(stmts))
    }

    /// One source statement. `for` sugar expands to two commands.
    fn parse_stmt(&mut self) -> Result<Vec<Command>, SourceError> {
        match self.peek().clone() {
            Tok::KwSkip => {
                self.bump();
                Ok(vec![Command::Skip])
            }
            Tok::KwUse => {
                self.bump();
                self.expect(Tok::LParen)?;
                let mut args = vec![self.ident()?];
                while self.eat(&Tok::Comma) {
                    args.push(self.ident()?);
                }
                self.expect(Tok::RParen)?;
                Ok(vec![Command::Use(args)])
            }
            Tok::KwIf => {
                self.bump();
                let cond = self.parse_expr()?;
                self.expect(Tok::KwThen)?;
                let then_branch = self.parse_block()?;
                let else_branch = if self.eat(&Tok::KwElse) {
                    self.parse_block()?
                } else {
                    Command::Skip
                };
                Ok(vec![Command::If {
                    cond,
                    then_branch: Box::new(then_branch),
                    else_branch: Box::new(else_branch),
                }])
            }
            Tok::KwWhile => {
                self.bump();
                let cond = self.parse_expr()?;
                self.expect(Tok::KwDo)?;
                let body = self.parse_block()?;
                Ok(vec![Command::While {
                    cond,
                    body: Box::new(body),
                }])
            }
            Tok::KwFor => {
                // for (init; cond; step) { body }
                // desugars to init; while cond do { body; step }
                self.bump();
                self.expect(Tok::LParen)?;
                let init = if self.peek() == &Tok::Semi {
                    None
                } else {
                    Some(self.parse_assign()?)
                };
                self.expect(Tok::Semi)?;
                let cond = self.parse_expr()?;
                self.expect(Tok::Semi)?;
                let step = if self.peek() == &Tok::RParen {
                    None
                } else {
                    Some(self.parse_assign()?)
                };
                self.expect(Tok::RParen)?;
                let body = self.parse_block()?;
                let mut body_items = match body {
                    Command::Seq(items) => items,
                    other => vec![other],
                };
                if let Some(step) = step {
                    body_items.push(step);
                }
                let whl = Command::While {
                    cond,
                    body: Box::new(Command::Seq(body_items)),
                };
                Ok(match init {
                    Some(init) => vec![init, whl],
                    None => vec![whl],
                })
            }
            Tok::KwParallel => {
                if !self.allow_parallel {
                    return Err(self.err("`parallel` is not allowed in source programs"));
                }
                self.bump();
                let mut branches = vec![self.parse_block()?];
                while self.peek() == &Tok::LBrace {
                    branches.push(self.parse_block()?);
                }
                if branches.len() < 2 {
                    return Err(self.err("`parallel` needs at least two branches"));
                }
                Ok(vec![Command::Parallel(branches)])
            }
            Tok::Ident(_) => Ok(vec![self.parse_assign()?]),
            _ => Err(self.err("expected statement")),
        }
    }

    /// `x = e` or `t[e1] = e2`; shared with the `for` header.
    fn parse_assign(&mut self) -> Result<Command, SourceError> {
        let name = self.ident()?;
        if self.eat(&Tok::LBracket) {
            let idx = self.parse_expr()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Assign)?;
            let rhs = self.parse_expr()?;
            Ok(Command::ArrayAssign(name, idx, rhs))
        } else {
            self.expect(Tok::Assign)?;
            let rhs = self.parse_expr()?;
            Ok(Command::Assign(name, rhs))
        }
    }

    fn parse_expr(&mut self) -> Result<Expression, SourceError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expression, SourceError> {
        let mut lhs = self.parse_and()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.parse_and()?;
            lhs = Expression::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expression, SourceError> {
        let mut lhs = self.parse_cmp()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.parse_cmp()?;
            lhs = Expression::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_cmp(&mut self) -> Result<Expression, SourceError> {
        let mut lhs = self.parse_add()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::Ne => BinOp::Ne,
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_add()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_add(&mut self) -> Result<Expression, SourceError> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_mul()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Expression, SourceError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expression, SourceError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let e = self.parse_unary()?;
                Ok(Expression::Unary(UnOp::Neg, Box::new(e)))
            }
            Tok::Bang => {
                self.bump();
                let e = self.parse_unary()?;
                Ok(Expression::Unary(UnOp::Not, Box::new(e)))
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> Result<Expression, SourceError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expression::Lit(n))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat(&Tok::LBracket) {
                    let idx = self.parse_expr()?;
                    self.expect(Tok::RBracket)?;
                    Ok(Expression::Index(name, Box::new(idx)))
                } else {
                    Ok(Expression::Var(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.err("expected expression")),
        }
    }
}

fn parse_inner(src: &str, allow_parallel: bool) -> Result<Program, SourceError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        allow_parallel,
    };
    let stmts = p.parse_stmt_list(&Tok::Eof)?;
    p.expect(Tok::Eof)?;
    if stmts.is_empty() {
        return Err(SourceError::new(1, 1, "empty program", None));
    }
    Ok(Program::new(stmts))
}

/// Parses a source program. Rejects `parallel` and the reserved
/// effect name.
pub fn parse_program(src: &str) -> Result<Program, SourceError> {
    parse_inner(src, false)
}

/// Parses a program that may contain `parallel` blocks, as written by
/// the fission pass. Used to re-ingest transformed output.
pub fn parse_program_with_parallel(src: &str) -> Result<Program, SourceError> {
    parse_inner(src, true)
}

// ---------------------------------------------------------------------------
// Canonical printer

const INDENT: &str = "  ";

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
    }
}

const PREC_UNARY: u8 = 6;
const PREC_PRIMARY: u8 = 7;

fn expr_prec(e: &Expression) -> u8 {
    match e {
        Expression::Var(_) | Expression::Index(..) | Expression::Lit(_) => PREC_PRIMARY,
        Expression::Unary(..) => PREC_UNARY,
        Expression::Binary(op, ..) => prec(*op),
    }
}

fn write_expr(out: &mut String, e: &Expression) {
    match e {
        Expression::Var(v) => {
            let _ = write!(out, "{v}");
        }
        Expression::Index(t, idx) => {
            let _ = write!(out, "{t}[");
            write_expr(out, idx);
            out.push(']');
        }
        Expression::Lit(n) => {
            let _ = write!(out, "{n}");
        }
        Expression::Unary(op, inner) => {
            out.push_str(op.symbol());
            if expr_prec(inner) == PREC_PRIMARY {
                write_expr(out, inner);
            } else {
                out.push('(');
                write_expr(out, inner);
                out.push(')');
            }
        }
        Expression::Binary(op, l, r) => {
            let p = prec(*op);
            // all binary operators associate to the left, so equal
            // precedence on the right keeps its parentheses
            if expr_prec(l) < p {
                out.push('(');
                write_expr(out, l);
                out.push(')');
            } else {
                write_expr(out, l);
            }
            let _ = write!(out, " {} ", op.symbol());
            if expr_prec(r) <= p {
                out.push('(');
                write_expr(out, r);
                out.push(')');
            } else {
                write_expr(out, r);
            }
        }
    }
}

pub(crate) fn expr_to_string(e: &Expression) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_block_body(out: &mut String, c: &Command, depth: usize) {
    match c {
        Command::Seq(items) => {
            for item in items {
                write_cmd(out, item, depth);
            }
        }
        other => write_cmd(out, other, depth),
    }
}

fn write_cmd(out: &mut String, c: &Command, depth: usize) {
    let pad = INDENT.repeat(depth);
    match c {
        Command::Assign(x, e) => {
            let _ = writeln!(out, "{pad}{x} = {}", expr_to_string(e));
        }
        Command::ArrayAssign(t, idx, rhs) => {
            let _ = writeln!(
                out,
                "{pad}{t}[{}] = {}",
                expr_to_string(idx),
                expr_to_string(rhs)
            );
        }
        Command::Skip => {
            let _ = writeln!(out, "{pad}skip");
        }
        Command::Use(args) => {
            let names: Vec<&str> = args.iter().map(|a| a.as_str()).collect();
            let _ = writeln!(out, "{pad}use({})", names.join(", "));
        }
        Command::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let _ = writeln!(out, "{pad}if {} then {{", expr_to_string(cond));
            write_block_body(out, then_branch, depth + 1);
            if matches!(**else_branch, Command::Skip) {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block_body(out, else_branch, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Command::While { cond, body } => {
            let _ = writeln!(out, "{pad}while {} do {{", expr_to_string(cond));
            write_block_body(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Command::Seq(items) => {
            for item in items {
                write_cmd(out, item, depth);
            }
        }
        Command::Parallel(branches) => {
            let _ = write!(out, "{pad}parallel {{");
            for (k, b) in branches.iter().enumerate() {
                if k > 0 {
                    let _ = write!(out, "{pad}}} {{");
                }
                out.push('\n');
                write_block_body(out, b, depth + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

/// Canonical text form of a program. Parsing the result yields a
/// structurally equal tree (for trees the parser can produce).
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for stmt in p.stmts() {
        write_cmd(&mut out, stmt, 0);
    }
    out
}

/// One-line rendering used for graph node labels.
pub(crate) fn command_summary(c: &Command) -> String {
    match c {
        Command::Assign(x, e) => format!("{x} = {}", expr_to_string(e)),
        Command::ArrayAssign(t, idx, rhs) => {
            format!("{t}[{}] = {}", expr_to_string(idx), expr_to_string(rhs))
        }
        Command::Skip => "skip".to_string(),
        Command::Use(args) => {
            let names: Vec<&str> = args.iter().map(|a| a.as_str()).collect();
            format!("use({})", names.join(", "))
        }
        Command::If {
            cond, else_branch, ..
        } => {
            if matches!(**else_branch, Command::Skip) {
                format!("if {} then {{ ... }}", expr_to_string(cond))
            } else {
                format!("if {} then {{ ... }} else {{ ... }}", expr_to_string(cond))
            }
        }
        Command::While { cond, .. } => format!("while {} do {{ ... }}", expr_to_string(cond)),
        Command::Seq(_) => "{ ... }".to_string(),
        Command::Parallel(_) => "parallel { ... }".to_string(),
    }
}
