//! Model Definition Language (MDL) and plan text.
//!
//! MDL is line oriented: one declaration per line, `#` starts a comment,
//! indentation is insignificant.
//!
//! ```text
//! model "NAME"
//! entity SORT: m1, m2, ...
//! var NAME(SORT, ...): bool|{e1,e2,...}|int[LO..HI] = INIT
//! init NAME(member, ...) = VALUE
//! action NAME(p1: SORT, ...)
//!   pre COMPARISON
//!   eff VARREF := TERM | VARREF := VARREF +/- INT
//! constraint always COMPARISON
//! goal COMPARISON
//! ```
//!
//! Model parsing is strict: any malformed line yields issues and no model.
//! Plan parsing is total: every nonempty line becomes a step, parsed or not.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{
    ActionParam, ActionSchema, Arg, CmpOp, Condition, Domain, Effect, EntitySort, InitOverride, ProblemModel,
    Term, Update, Value, VarRef, VariableDecl,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseIssueKind {
    Syntax,
    UnknownKeyword,
    MalformedTerm,
}

impl fmt::Display for ParseIssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseIssueKind::Syntax => "syntax",
            ParseIssueKind::UnknownKeyword => "unknown-keyword",
            ParseIssueKind::MalformedTerm => "malformed-term",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub line: usize,
    pub column: usize,
    pub kind: ParseIssueKind,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.line, self.column, self.kind, self.message)
    }
}

/// Identifies one declaration of a model, for mapping diagnostics back to
/// source lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Locator {
    Model,
    Sort(usize),
    Var(usize),
    Init(usize, usize),
    Action(usize),
    Pre(usize, usize),
    Eff(usize, usize),
    Constraint(usize),
    Goal(usize),
}

/// Source line of every declaration produced by [`parse_model_with_lines`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    lines: BTreeMap<Locator, usize>,
}

impl SourceMap {
    pub fn line(&self, loc: Locator) -> Option<usize> {
        self.lines.get(&loc).copied()
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign,
    Walrus,
    DotDot,
    Plus,
    Minus,
    Op(CmpOp),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Assign => f.write_str("`=`"),
            Tok::Walrus => f.write_str("`:=`"),
            Tok::DotDot => f.write_str("`..`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Op(op) => write!(f, "`{op}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    col: usize,
}

#[derive(Debug)]
struct LexError {
    col: usize,
    kind: ParseIssueKind,
    message: String,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// True if `s` is a valid MDL identifier.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_ident_start(c)) && chars.all(is_ident_char)
}

fn lex_line(line: &str) -> Result<Vec<Spanned>, LexError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let (tok, width) = match two.as_str() {
            ":=" => (Tok::Walrus, 2),
            ".." => (Tok::DotDot, 2),
            "==" => (Tok::Op(CmpOp::Eq), 2),
            "!=" => (Tok::Op(CmpOp::Ne), 2),
            "<=" => (Tok::Op(CmpOp::Le), 2),
            ">=" => (Tok::Op(CmpOp::Ge), 2),
            _ => match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                ',' => (Tok::Comma, 1),
                ':' => (Tok::Colon, 1),
                '=' => (Tok::Assign, 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '<' => (Tok::Op(CmpOp::Lt), 1),
                '>' => (Tok::Op(CmpOp::Gt), 1),
                '"' => {
                    let end = chars[i + 1..].iter().position(|&c| c == '"');
                    match end {
                        Some(n) => {
                            let s: String = chars[i + 1..i + 1 + n].iter().collect();
                            (Tok::Str(s), n + 2)
                        }
                        None => {
                            return Err(LexError {
                                col,
                                kind: ParseIssueKind::Syntax,
                                message: "unterminated string".into(),
                            })
                        }
                    }
                }
                c if c.is_ascii_digit() => {
                    let n = chars[i..].iter().take_while(|c| c.is_ascii_digit()).count();
                    let digits: String = chars[i..i + n].iter().collect();
                    match digits.parse::<i64>() {
                        Ok(v) => (Tok::Int(v), n),
                        Err(_) => {
                            return Err(LexError {
                                col,
                                kind: ParseIssueKind::MalformedTerm,
                                message: format!("integer literal `{digits}` out of range"),
                            })
                        }
                    }
                }
                c if is_ident_start(c) => {
                    let n = chars[i..].iter().take_while(|&&c| is_ident_char(c)).count();
                    (Tok::Ident(chars[i..i + n].iter().collect()), n)
                }
                c => {
                    return Err(LexError {
                        col,
                        kind: ParseIssueKind::Syntax,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            },
        };
        out.push(Spanned { tok, col });
        i += width;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Line parser

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line_len: usize,
}

type PResult<T> = Result<T, (usize, ParseIssueKind, String)>;

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|s| s.col).unwrap_or(self.line_len + 1)
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|s| &s.tok);
        self.pos += 1;
        t
    }

    fn err<T>(&self, kind: ParseIssueKind, msg: impl Into<String>) -> PResult<T> {
        Err((self.col(), kind, msg.into()))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        match self.peek() {
            Some(t) => self.err(ParseIssueKind::Syntax, format!("expected {wanted}, found {t}")),
            None => self.err(ParseIssueKind::Syntax, format!("expected {wanted}, found end of line")),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.unexpected(wanted)
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected(wanted),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.err(ParseIssueKind::Syntax, format!("unexpected trailing {t}")),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => self.unexpected("integer"),
        }
    }

    /// Comma-separated identifiers up to and including `close`.
    fn ident_list(&mut self, close: Tok, wanted: &str) -> PResult<Vec<String>> {
        let mut items = Vec::new();
        if self.eat(&close) {
            return Ok(items);
        }
        loop {
            items.push(self.ident(wanted)?);
            if self.eat(&close) {
                return Ok(items);
            }
            if !self.eat(&Tok::Comma) {
                return self.unexpected(&format!("`,` or {}", close));
            }
        }
    }
}

/// Names in scope while parsing one line.
struct Scope<'a> {
    params: &'a [String],
    vars: &'a HashSet<String>,
}

impl Scope<'_> {
    fn is_param(&self, s: &str) -> bool {
        self.params.iter().any(|p| p == s)
    }
}

fn parse_value(c: &mut Cursor) -> PResult<Value> {
    match c.peek() {
        Some(Tok::Ident(s)) if s == "true" => {
            c.pos += 1;
            Ok(Value::Bool(true))
        }
        Some(Tok::Ident(s)) if s == "false" => {
            c.pos += 1;
            Ok(Value::Bool(false))
        }
        Some(Tok::Ident(s)) => {
            let s = s.clone();
            c.pos += 1;
            Ok(Value::Sym(s))
        }
        Some(Tok::Int(_)) | Some(Tok::Minus) => c.int().map(Value::Int),
        _ => c.unexpected("value"),
    }
}

fn parse_var_args(c: &mut Cursor, scope: &Scope) -> PResult<Vec<Arg>> {
    let names = c.ident_list(Tok::RParen, "argument")?;
    Ok(names
        .into_iter()
        .map(|n| if scope.is_param(&n) { Arg::Param(n) } else { Arg::Entity(n) })
        .collect())
}

fn parse_var_ref(c: &mut Cursor, scope: &Scope) -> PResult<VarRef> {
    let name = c.ident("variable name")?;
    let args = if c.eat(&Tok::LParen) { parse_var_args(c, scope)? } else { Vec::new() };
    Ok(VarRef { name, args })
}

fn parse_term(c: &mut Cursor, scope: &Scope) -> PResult<Term> {
    match c.peek() {
        Some(Tok::Int(_)) | Some(Tok::Minus) => c.int().map(|v| Term::Lit(Value::Int(v))),
        Some(Tok::Ident(s)) => {
            let s = s.clone();
            c.pos += 1;
            if c.eat(&Tok::LParen) {
                if s == "true" || s == "false" {
                    return c.err(ParseIssueKind::MalformedTerm, format!("`{s}` cannot take arguments"));
                }
                let args = parse_var_args(c, scope)?;
                return Ok(Term::Var(VarRef { name: s, args }));
            }
            Ok(match s.as_str() {
                "true" => Term::Lit(Value::Bool(true)),
                "false" => Term::Lit(Value::Bool(false)),
                _ if scope.is_param(&s) => Term::Param(s),
                _ if scope.vars.contains(&s) => Term::Var(VarRef { name: s, args: Vec::new() }),
                _ => Term::Lit(Value::Sym(s)),
            })
        }
        _ => c.unexpected("term"),
    }
}

fn parse_comparison(c: &mut Cursor, scope: &Scope) -> PResult<Condition> {
    let lhs = parse_term(c, scope)?;
    let op = match c.next() {
        Some(Tok::Op(op)) => *op,
        _ => {
            c.pos -= 1;
            return c.unexpected("comparison operator");
        }
    };
    let rhs = parse_term(c, scope)?;
    c.end()?;
    Ok(Condition { lhs, op, rhs })
}

fn parse_domain(c: &mut Cursor) -> PResult<Domain> {
    match c.peek() {
        Some(Tok::Ident(s)) if s == "bool" => {
            c.pos += 1;
            Ok(Domain::Bool)
        }
        Some(Tok::Ident(s)) if s == "int" => {
            c.pos += 1;
            c.expect(Tok::LBracket, "`[`")?;
            let col = c.col();
            let lo = c.int()?;
            c.expect(Tok::DotDot, "`..`")?;
            let hi = c.int()?;
            c.expect(Tok::RBracket, "`]`")?;
            if lo > hi {
                return Err((col, ParseIssueKind::MalformedTerm, format!("empty integer range [{lo}..{hi}]")));
            }
            Ok(Domain::Int { lo, hi })
        }
        Some(Tok::LBrace) => {
            c.pos += 1;
            let col = c.col();
            let members = c.ident_list(Tok::RBrace, "enumeration member")?;
            if members.is_empty() {
                return Err((col, ParseIssueKind::MalformedTerm, "empty enumeration".into()));
            }
            Ok(Domain::Enum { members })
        }
        _ => c.unexpected("domain (`bool`, `{...}` or `int[lo..hi]`)"),
    }
}

fn reserved(s: &str) -> bool {
    matches!(s, "true" | "false")
}

#[derive(Default)]
struct Builder {
    model: ProblemModel,
    have_name: bool,
    map: SourceMap,
    current_action: Option<usize>,
    pending_inits: Vec<(usize, usize, String, InitOverride)>,
}

/// Parses MDL text into a structurally complete model.
pub fn parse_model(text: &str) -> Result<ProblemModel, Vec<ParseIssue>> {
    parse_model_with_lines(text).map(|(m, _)| m)
}

/// As [`parse_model`], also returning the source line of each declaration.
pub fn parse_model_with_lines(text: &str) -> Result<(ProblemModel, SourceMap), Vec<ParseIssue>> {
    let mut issues = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        match lex_line(raw) {
            Ok(toks) => lines.push((i + 1, raw.chars().count(), toks)),
            Err(e) => issues.push(ParseIssue { line: i + 1, column: e.col, kind: e.kind, message: e.message }),
        }
    }

    // Bare identifiers resolve to zero-arity variables wherever such a
    // variable is declared, so collect declared names up front.
    let vars: HashSet<String> = lines
        .iter()
        .filter_map(|(_, _, toks)| match (toks.first(), toks.get(1)) {
            (Some(Spanned { tok: Tok::Ident(k), .. }), Some(Spanned { tok: Tok::Ident(n), .. })) if k == "var" => {
                Some(n.clone())
            }
            _ => None,
        })
        .collect();

    let mut b = Builder::default();
    for (line_no, len, toks) in &lines {
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor { toks, pos: 0, line_len: *len };
        if let Err((column, kind, message)) = parse_line(&mut c, *line_no, &vars, &mut b) {
            issues.push(ParseIssue { line: *line_no, column, kind, message });
        }
    }

    for (line, col, name, ov) in std::mem::take(&mut b.pending_inits) {
        match b.model.variables.iter().position(|v| v.name == name) {
            Some(vi) => {
                let oi = b.model.variables[vi].overrides.len();
                b.model.variables[vi].overrides.push(ov);
                b.map.lines.insert(Locator::Init(vi, oi), line);
            }
            None => issues.push(ParseIssue {
                line,
                column: col,
                kind: ParseIssueKind::MalformedTerm,
                message: format!("init for undeclared variable `{name}`"),
            }),
        }
    }

    if issues.is_empty() && !b.have_name {
        issues.push(ParseIssue {
            line: 1,
            column: 1,
            kind: ParseIssueKind::Syntax,
            message: "missing `model \"NAME\"` declaration".into(),
        });
    }
    if issues.is_empty() {
        Ok((b.model, b.map))
    } else {
        issues.sort_by_key(|i| (i.line, i.column));
        Err(issues)
    }
}

fn parse_line(c: &mut Cursor, line_no: usize, vars: &HashSet<String>, b: &mut Builder) -> PResult<()> {
    let keyword = match c.peek() {
        Some(Tok::Ident(k)) => k.clone(),
        _ => return c.unexpected("declaration keyword"),
    };
    let in_action_body = matches!(keyword.as_str(), "pre" | "eff");
    if !in_action_body {
        b.current_action = None;
    }
    let no_params: [String; 0] = [];
    let global = Scope { params: &no_params, vars };
    c.pos += 1;
    match keyword.as_str() {
        "model" => {
            if b.have_name {
                return Err((1, ParseIssueKind::Syntax, "duplicate `model` declaration".into()));
            }
            match c.next() {
                Some(Tok::Str(s)) => b.model.name = s.clone(),
                _ => {
                    c.pos -= 1;
                    return c.unexpected("quoted model name");
                }
            }
            c.end()?;
            b.have_name = true;
            b.map.lines.insert(Locator::Model, line_no);
        }
        "entity" => {
            let name = c.ident("sort name")?;
            c.expect(Tok::Colon, "`:`")?;
            let mut members = vec![c.ident("entity member")?];
            while c.eat(&Tok::Comma) {
                members.push(c.ident("entity member")?);
            }
            c.end()?;
            b.map.lines.insert(Locator::Sort(b.model.sorts.len()), line_no);
            b.model.sorts.push(EntitySort { name, members });
        }
        "var" => {
            let col = c.col();
            let name = c.ident("variable name")?;
            if reserved(&name) {
                return Err((col, ParseIssueKind::MalformedTerm, format!("`{name}` is reserved")));
            }
            let params = if c.eat(&Tok::LParen) { c.ident_list(Tok::RParen, "sort name")? } else { Vec::new() };
            c.expect(Tok::Colon, "`:`")?;
            let domain = parse_domain(c)?;
            c.expect(Tok::Assign, "`=`")?;
            let initial = parse_value(c)?;
            c.end()?;
            b.map.lines.insert(Locator::Var(b.model.variables.len()), line_no);
            b.model.variables.push(VariableDecl { name, params, domain, initial, overrides: Vec::new() });
        }
        "init" => {
            let col = c.col();
            let name = c.ident("variable name")?;
            let args = if c.eat(&Tok::LParen) { c.ident_list(Tok::RParen, "entity member")? } else { Vec::new() };
            c.expect(Tok::Assign, "`=`")?;
            let value = parse_value(c)?;
            c.end()?;
            b.pending_inits.push((line_no, col, name, InitOverride { args, value }));
        }
        "action" => {
            let col = c.col();
            let name = c.ident("action name")?;
            if reserved(&name) {
                return Err((col, ParseIssueKind::MalformedTerm, format!("`{name}` is reserved")));
            }
            let mut params = Vec::new();
            if c.eat(&Tok::LParen) && !c.eat(&Tok::RParen) {
                loop {
                    let pname = c.ident("parameter name")?;
                    c.expect(Tok::Colon, "`:`")?;
                    let sort = c.ident("sort name")?;
                    params.push(ActionParam { name: pname, sort });
                    if c.eat(&Tok::RParen) {
                        break;
                    }
                    if !c.eat(&Tok::Comma) {
                        return c.unexpected("`,` or `)`");
                    }
                }
            }
            c.end()?;
            let idx = b.model.actions.len();
            b.map.lines.insert(Locator::Action(idx), line_no);
            b.model.actions.push(ActionSchema { name, params, preconditions: Vec::new(), effects: Vec::new() });
            b.current_action = Some(idx);
        }
        "pre" | "eff" => {
            let Some(ai) = b.current_action else {
                return Err((1, ParseIssueKind::Syntax, format!("`{keyword}` outside an action block")));
            };
            let params: Vec<String> = b.model.actions[ai].params.iter().map(|p| p.name.clone()).collect();
            let scope = Scope { params: &params, vars };
            if keyword == "pre" {
                let cond = parse_comparison(c, &scope)?;
                let action = &mut b.model.actions[ai];
                b.map.lines.insert(Locator::Pre(ai, action.preconditions.len()), line_no);
                action.preconditions.push(cond);
            } else {
                let eff = parse_effect(c, &scope)?;
                let action = &mut b.model.actions[ai];
                b.map.lines.insert(Locator::Eff(ai, action.effects.len()), line_no);
                action.effects.push(eff);
            }
        }
        "constraint" => {
            match c.peek() {
                Some(Tok::Ident(s)) if s == "always" => c.pos += 1,
                _ => return c.unexpected("`always`"),
            }
            let cond = parse_comparison(c, &global)?;
            b.map.lines.insert(Locator::Constraint(b.model.constraints.len()), line_no);
            b.model.constraints.push(cond);
        }
        "goal" => {
            let cond = parse_comparison(c, &global)?;
            b.map.lines.insert(Locator::Goal(b.model.goal.len()), line_no);
            b.model.goal.push(cond);
        }
        other => {
            return Err((1, ParseIssueKind::UnknownKeyword, format!("unknown keyword `{other}`")));
        }
    }
    Ok(())
}

fn parse_effect(c: &mut Cursor, scope: &Scope) -> PResult<Effect> {
    let target = parse_var_ref(c, scope)?;
    c.expect(Tok::Walrus, "`:=`")?;
    let rhs_col = c.col();
    let rhs = parse_term(c, scope)?;
    let sign = match c.peek() {
        Some(Tok::Plus) => 1,
        Some(Tok::Minus) => -1,
        _ => {
            c.end()?;
            return Ok(Effect { target, update: Update::Assign(rhs) });
        }
    };
    c.pos += 1;
    let amount = match c.next() {
        Some(Tok::Int(v)) => *v,
        _ => {
            c.pos -= 1;
            return c.unexpected("integer");
        }
    };
    c.end()?;
    let same_target = match &rhs {
        Term::Var(v) => *v == target,
        Term::Lit(Value::Sym(s)) => target.args.is_empty() && *s == target.name,
        _ => false,
    };
    if !same_target {
        return Err((
            rhs_col,
            ParseIssueKind::MalformedTerm,
            format!("an increment must read its own target `{target}`"),
        ));
    }
    Ok(Effect { target, update: Update::Delta(sign * amount) })
}

// ---------------------------------------------------------------------------
// Serialization

fn var_ref_text(v: &VarRef, declared: &HashSet<&str>) -> String {
    if v.args.is_empty() && !declared.contains(v.name.as_str()) {
        format!("{}()", v.name)
    } else {
        v.to_string()
    }
}

fn term_text(t: &Term, declared: &HashSet<&str>) -> String {
    match t {
        Term::Var(v) => var_ref_text(v, declared),
        other => other.to_string(),
    }
}

fn condition_text(c: &Condition, declared: &HashSet<&str>) -> String {
    format!("{} {} {}", term_text(&c.lhs, declared), c.op, term_text(&c.rhs, declared))
}

/// Canonical MDL text: sorts, variables (each followed by its overrides),
/// actions, constraints, goal. Empty sections emit nothing.
pub fn serialize_model(model: &ProblemModel) -> String {
    let declared: HashSet<&str> = model.variables.iter().map(|v| v.name.as_str()).collect();
    let mut out = String::new();
    out.push_str(&format!("model \"{}\"\n", model.name));
    for s in &model.sorts {
        out.push_str(&format!("entity {}: {}\n", s.name, s.members.join(", ")));
    }
    for v in &model.variables {
        let params = if v.params.is_empty() { String::new() } else { format!("({})", v.params.join(", ")) };
        out.push_str(&format!("var {}{}: {} = {}\n", v.name, params, v.domain, v.initial));
        for ov in &v.overrides {
            let args = if ov.args.is_empty() { String::new() } else { format!("({})", ov.args.join(", ")) };
            out.push_str(&format!("init {}{} = {}\n", v.name, args, ov.value));
        }
    }
    for a in &model.actions {
        let params: Vec<String> = a.params.iter().map(|p| format!("{}: {}", p.name, p.sort)).collect();
        out.push_str(&format!("action {}({})\n", a.name, params.join(", ")));
        for p in &a.preconditions {
            out.push_str(&format!("  pre {}\n", condition_text(p, &declared)));
        }
        for e in &a.effects {
            let target = var_ref_text(&e.target, &declared);
            let line = match &e.update {
                Update::Assign(t) => format!("{target} := {}", term_text(t, &declared)),
                Update::Delta(d) if *d < 0 => format!("{target} := {target} - {}", d.unsigned_abs()),
                Update::Delta(d) => format!("{target} := {target} + {d}"),
            };
            out.push_str(&format!("  eff {line}\n"));
        }
    }
    for c in &model.constraints {
        out.push_str(&format!("constraint always {}\n", condition_text(c, &declared)));
    }
    for g in &model.goal {
        out.push_str(&format!("goal {}\n", condition_text(g, &declared)));
    }
    out
}

// ---------------------------------------------------------------------------
// Plans

/// An action invocation as written in a plan step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepCall {
    pub action: String,
    pub args: Vec<String>,
}

impl fmt::Display for StepCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.action, self.args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanStep {
    /// 1-based position in the plan.
    pub index: usize,
    pub raw: String,
    pub parsed: Option<StepCall>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    /// Builds a fully parsed plan from action calls.
    pub fn from_calls(calls: impl IntoIterator<Item = StepCall>) -> Self {
        Plan {
            steps: calls
                .into_iter()
                .enumerate()
                .map(|(i, call)| PlanStep { index: i + 1, raw: format!("step {}: {}", i + 1, call), parsed: Some(call) })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Plan body text, one raw line per step.
    pub fn to_text(&self) -> String {
        self.steps.iter().map(|s| format!("{}\n", s.raw)).collect()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn step_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*[Ss]tep\s+\d+\s*:\s*([A-Za-z][A-Za-z0-9_]*)\s*(?:\(([^()]*)\))?\s*$").expect("step regex")
    })
}

/// Parses a single step line; `None` if it does not match the step grammar.
pub fn parse_step_line(line: &str) -> Option<StepCall> {
    let caps = step_regex().captures(line)?;
    let action = caps[1].to_string();
    let args = match caps.get(2) {
        None => Vec::new(),
        Some(m) if m.as_str().trim().is_empty() => Vec::new(),
        Some(m) => {
            let args: Vec<String> = m.as_str().split(',').map(|a| a.trim().to_string()).collect();
            if !args.iter().all(|a| is_identifier(a)) {
                return None;
            }
            args
        }
    };
    Some(StepCall { action, args })
}

/// Parses plan text. Never fails: each nonempty line becomes a step.
pub fn parse_plan(text: &str) -> Plan {
    let steps = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| PlanStep { index: i + 1, raw: l.trim().to_string(), parsed: parse_step_line(l) })
        .collect();
    Plan { steps }
}

// ---------------------------------------------------------------------------
// Block extraction

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Segment {
    Residue { text: String },
    Block { tag: String, open: String, body: String, close: String },
}

/// Fenced `mdl` / `plan` blocks pulled from free-form model output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedArtifacts {
    pub model_text: Option<String>,
    pub plan_text: Option<String>,
    pub residue: String,
    #[serde(skip)]
    pub segments: Vec<Segment>,
}

impl ExtractedArtifacts {
    /// Reassembles the original text from the segments.
    pub fn reconstruct(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Residue { text } => text.clone(),
                Segment::Block { open, body, close, .. } => format!("{open}{body}{close}"),
            })
            .collect()
    }
}

fn fence_tag(line: &str) -> Option<String> {
    let t = line.trim();
    t.strip_prefix("```").map(|rest| rest.trim().to_ascii_lowercase())
}

fn is_closing_fence(line: &str) -> bool {
    line.trim() == "```"
}

/// Splits model output into recognized `mdl`/`plan` blocks and residue.
/// When a tag occurs more than once, the last block wins. Other fences,
/// tagged or not, are residue.
pub fn extract_blocks(output: &str) -> ExtractedArtifacts {
    let lines: Vec<&str> = output.split_inclusive('\n').collect();
    let mut segments: Vec<Segment> = Vec::new();
    let mut residue = String::new();
    let mut i = 0;
    let push_residue = |segments: &mut Vec<Segment>, text: &str| {
        if let Some(Segment::Residue { text: t }) = segments.last_mut() {
            t.push_str(text);
        } else {
            segments.push(Segment::Residue { text: text.to_string() });
        }
    };
    while i < lines.len() {
        let line = lines[i];
        match fence_tag(line) {
            Some(tag) if tag == "mdl" || tag == "plan" => {
                let mut body = String::new();
                let mut close = String::new();
                i += 1;
                while i < lines.len() {
                    if is_closing_fence(lines[i]) {
                        close = lines[i].to_string();
                        i += 1;
                        break;
                    }
                    body.push_str(lines[i]);
                    i += 1;
                }
                segments.push(Segment::Block { tag, open: line.to_string(), body, close });
            }
            Some(_) => {
                // Opaque fence: copy through to its closing fence as residue.
                residue.push_str(line);
                push_residue(&mut segments, line);
                i += 1;
                while i < lines.len() {
                    residue.push_str(lines[i]);
                    push_residue(&mut segments, lines[i]);
                    let closed = is_closing_fence(lines[i]);
                    i += 1;
                    if closed {
                        break;
                    }
                }
            }
            None => {
                residue.push_str(line);
                push_residue(&mut segments, line);
                i += 1;
            }
        }
    }
    let last = |want: &str| {
        segments.iter().rev().find_map(|s| match s {
            Segment::Block { tag, body, .. } if tag == want => Some(body.clone()),
            _ => None,
        })
    };
    ExtractedArtifacts { model_text: last("mdl"), plan_text: last("plan"), residue, segments }
}
