//! System-definition files and the expression grammar.
//!
//! ```text
//! states: x y z
//! params: a > 0, b > 0        # optional
//! drift: [0, 0, 0]            # optional
//! control g1: [1, y, 0]
//! control g2: [0, 1, x*z]
//! candidate rho1: z           # optional
//! assume_nonzero: 1 + x       # optional, repeatable
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel::{normalize, parse_rational, Domain, Expr, ExprTree, KernelError, Sign, Symbol};

/// A position in the source text, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DslError {
    #[error("{pos}: syntax error: expected {expected}, found {found}")]
    Syntax { pos: Pos, expected: String, found: String },
    #[error("{pos}: unknown symbol `{name}`")]
    UnknownSymbol { pos: Pos, name: String },
    #[error("{pos}: {what} has {found} components, expected {expected}")]
    ArityMismatch { pos: Pos, what: String, found: usize, expected: usize },
    #[error("no control fields declared")]
    EmptyControlSet,
    #[error("{pos}: {msg}")]
    Invalid { pos: Pos, msg: String },
    #[error("{pos}: {source}")]
    Kernel { pos: Pos, source: KernelError },
}

impl DslError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            DslError::Syntax { pos, .. }
            | DslError::UnknownSymbol { pos, .. }
            | DslError::ArityMismatch { pos, .. }
            | DslError::Invalid { pos, .. }
            | DslError::Kernel { pos, .. } => Some(*pos),
            DslError::EmptyControlSet => None,
        }
    }

    fn shift(self, line: usize, col0: usize) -> Self {
        let fix = |p: Pos| Pos { line, col: p.col + col0 };
        match self {
            DslError::Syntax { pos, expected, found } => DslError::Syntax { pos: fix(pos), expected, found },
            DslError::UnknownSymbol { pos, name } => DslError::UnknownSymbol { pos: fix(pos), name },
            DslError::ArityMismatch { pos, what, found, expected } => {
                DslError::ArityMismatch { pos: fix(pos), what, found, expected }
            }
            DslError::Invalid { pos, msg } => DslError::Invalid { pos: fix(pos), msg },
            DslError::Kernel { pos, source } => DslError::Kernel { pos: fix(pos), source },
            e @ DslError::EmptyControlSet => e,
        }
    }
}

/// Declared symbols of a system, in term order.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    pub states: Vec<Symbol>,
    pub params: Vec<(Symbol, Sign)>,
}

impl SymbolTable {
    pub fn new(states: &[&str], params: &[(&str, Sign)]) -> Self {
        SymbolTable {
            states: states.iter().enumerate().map(|(i, n)| Symbol::state(i, *n)).collect(),
            params: params.iter().enumerate().map(|(i, (n, s))| (Symbol::param(i, *n), *s)).collect(),
        }
    }

    pub fn lookup(&self, name: &str) -> Option<&Symbol> {
        self.states
            .iter()
            .find(|s| s.name() == name)
            .or_else(|| self.params.iter().map(|(s, _)| s).find(|s| s.name() == name))
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty() && self.params.is_empty()
    }
}

/// A named control field.
#[derive(Clone, Debug)]
pub struct Control {
    pub name: String,
    pub field: Vec<Expr>,
}

/// A declared candidate `rho`.
#[derive(Clone, Debug)]
pub struct DeclaredCandidate {
    pub name: String,
    pub rho: Expr,
}

/// `x' = f(x) + sum_j g_j(x) u_j` with symbolic fields.
#[derive(Clone, Debug)]
pub struct ControlAffineSystem {
    pub symbols: SymbolTable,
    pub drift: Vec<Expr>,
    pub controls: Vec<Control>,
    pub candidates: Vec<DeclaredCandidate>,
    pub assume_nonzero: Vec<Expr>,
}

impl ControlAffineSystem {
    pub fn n(&self) -> usize {
        self.symbols.states.len()
    }

    pub fn m(&self) -> usize {
        self.controls.len()
    }

    pub fn has_drift(&self) -> bool {
        self.drift.iter().any(|e| !e.is_zero())
    }

    pub fn domain(&self) -> Domain {
        Domain {
            states: self.symbols.states.clone(),
            params: self.symbols.params.clone(),
            nonzero: self.assume_nonzero.clone(),
        }
    }

    /// The fields spanning the distribution: drift (when nonzero) then controls.
    pub fn spanning_fields(&self) -> Vec<Vec<Expr>> {
        let mut out = Vec::new();
        if self.has_drift() {
            out.push(self.drift.clone());
        }
        out.extend(self.controls.iter().map(|c| c.field.clone()));
        out
    }

    /// Drift first (possibly zero), then controls.
    pub fn all_fields(&self) -> Vec<Vec<Expr>> {
        let mut out = vec![self.drift.clone()];
        out.extend(self.controls.iter().map(|c| c.field.clone()));
        out
    }

    pub fn parse_expr(&self, text: &str) -> Result<Expr, DslError> {
        parse_expr(text, &self.symbols)
    }

    /// Canonical source text; parsing it yields an equal system.
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        let names: Vec<&str> = self.symbols.states.iter().map(|v| v.name()).collect();
        s.push_str(&format!("states: {}\n", names.join(" ")));
        if !self.symbols.params.is_empty() {
            let ps: Vec<String> = self
                .symbols
                .params
                .iter()
                .map(|(p, sign)| match sign {
                    Sign::Positive => format!("{} > 0", p.name()),
                    Sign::Negative => format!("{} < 0", p.name()),
                    Sign::Any => p.name().to_string(),
                })
                .collect();
            s.push_str(&format!("params: {}\n", ps.join(", ")));
        }
        if self.has_drift() {
            s.push_str(&format!("drift: {}\n", vector_text(&self.drift)));
        }
        for c in &self.controls {
            s.push_str(&format!("control {}: {}\n", c.name, vector_text(&c.field)));
        }
        for c in &self.candidates {
            s.push_str(&format!("candidate {}: {}\n", c.name, c.rho));
        }
        for e in &self.assume_nonzero {
            s.push_str(&format!("assume_nonzero: {e}\n"));
        }
        s
    }
}

pub fn vector_text(v: &[Expr]) -> String {
    let parts: Vec<String> = v.iter().map(|e| e.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// One piece of a piecewise-constant control.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulePiece {
    pub duration: f64,
    pub control: Vec<f64>,
}

/// A piecewise-constant control with finitely many pieces.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ControlSchedule {
    pub pieces: Vec<SchedulePiece>,
}

impl ControlSchedule {
    pub fn new(pieces: Vec<SchedulePiece>) -> Self {
        assert!(pieces.iter().all(|p| p.duration > 0.0), "durations must be positive");
        ControlSchedule { pieces }
    }

    pub fn constant(control: Vec<f64>, horizon: f64) -> Self {
        if horizon <= 0.0 {
            return ControlSchedule::default();
        }
        ControlSchedule::new(vec![SchedulePiece { duration: horizon, control }])
    }

    pub fn horizon(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }
}

// ---------------------------------------------------------------------------
// Expression grammar
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::Ident(i) => write!(f, "identifier `{i}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if s.matches('.').count() > 1 {
                return Err(syntax(col, "a number", &format!("`{s}`")));
            }
            out.push((Tok::Num(s), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else {
            return Err(syntax(col, "an expression", &format!("`{c}`")));
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

fn syntax(col: usize, expected: &str, found: &str) -> DslError {
    DslError::Syntax { pos: Pos { line: 1, col }, expected: expected.into(), found: found.into() }
}

/// Pratt parser over the token stream.
struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn col(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect_op(&mut self, c: char) -> Result<(), DslError> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.col(), &format!("`{c}`"), &self.peek().to_string()))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<ExprTree, DslError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek() {
                Tok::Op('+') => ('+', 1, 2),
                Tok::Op('-') => ('-', 1, 2),
                Tok::Op('*') => ('*', 3, 4),
                Tok::Op('/') => ('/', 3, 4),
                Tok::Op('^') => ('^', 7, 6),
                Tok::End | Tok::Op(')') => break,
                other => {
                    return Err(syntax(self.col(), "an operator", &other.to_string()));
                }
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            if op == '^' {
                let e = self.exponent()?;
                lhs = ExprTree::Pow(Arc::new(lhs), e);
                continue;
            }
            let rhs = self.expr(rbp)?;
            let (l, r) = (Arc::new(lhs), Arc::new(rhs));
            lhs = match op {
                '+' => ExprTree::Add(l, r),
                '-' => ExprTree::Sub(l, r),
                '*' => ExprTree::Mul(l, r),
                _ => ExprTree::Div(l, r),
            };
        }
        Ok(lhs)
    }

    fn exponent(&mut self) -> Result<i32, DslError> {
        let col = self.col();
        let mut neg = false;
        let mut paren = false;
        if *self.peek() == Tok::Op('(') {
            self.bump();
            paren = true;
        }
        if *self.peek() == Tok::Op('-') {
            self.bump();
            neg = true;
        }
        let e = match self.bump() {
            Tok::Num(n) if !n.contains('.') => n
                .parse::<i32>()
                .map_err(|_| syntax(col, "a small integer exponent", &format!("`{n}`")))?,
            other => return Err(syntax(col, "an integer exponent", &other.to_string())),
        };
        if paren {
            self.expect_op(')')?;
        }
        Ok(if neg { -e } else { e })
    }

    fn prefix(&mut self) -> Result<ExprTree, DslError> {
        let col = self.col();
        match self.bump() {
            Tok::Num(n) => {
                let q = parse_rational(&n).ok_or_else(|| syntax(col, "a number", &format!("`{n}`")))?;
                Ok(ExprTree::Const(q))
            }
            Tok::Op('-') => {
                // Unary minus binds looser than `^` and `*`.
                let inner = self.expr(5)?;
                Ok(ExprTree::Neg(Arc::new(inner)))
            }
            Tok::Op('+') => self.expr(5),
            Tok::Op('(') => {
                let inner = self.expr(0)?;
                self.expect_op(')')?;
                Ok(inner)
            }
            Tok::Ident(name) if (name == "sin" || name == "cos") && *self.peek() == Tok::Op('(') => {
                self.bump();
                let arg_col = self.col();
                let arg = match self.bump() {
                    Tok::Ident(v) => v,
                    other => {
                        return Err(DslError::Invalid {
                            pos: Pos { line: 1, col: arg_col },
                            msg: format!("trig functions take a single state variable, found {other}"),
                        })
                    }
                };
                let sym = self
                    .table
                    .lookup(&arg)
                    .ok_or_else(|| DslError::UnknownSymbol { pos: Pos { line: 1, col: arg_col }, name: arg.clone() })?
                    .clone();
                if !sym.is_state() {
                    return Err(DslError::Invalid {
                        pos: Pos { line: 1, col: arg_col },
                        msg: format!("trig argument `{arg}` must be a state variable"),
                    });
                }
                if *self.peek() != Tok::Op(')') {
                    return Err(DslError::Invalid {
                        pos: Pos { line: 1, col: self.col() },
                        msg: "trig functions take a single state variable".into(),
                    });
                }
                self.bump();
                Ok(if name == "sin" { ExprTree::Sin(sym) } else { ExprTree::Cos(sym) })
            }
            Tok::Ident(name) => match self.table.lookup(&name) {
                Some(s) => Ok(ExprTree::Sym(s.clone())),
                None => Err(DslError::UnknownSymbol { pos: Pos { line: 1, col }, name }),
            },
            other => Err(syntax(col, "an operand", &other.to_string())),
        }
    }
}

/// Parse to an unnormalized tree.
pub fn parse_tree(text: &str, table: &SymbolTable) -> Result<ExprTree, DslError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, table };
    let t = p.expr(0)?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.col(), "an operator or end of input", &p.peek().to_string()));
    }
    Ok(t)
}

/// Parse and normalize an expression.
pub fn parse_expr(text: &str, table: &SymbolTable) -> Result<Expr, DslError> {
    let t = parse_tree(text, table)?;
    normalize(&t).map_err(|source| DslError::Kernel { pos: Pos { line: 1, col: 1 }, source })
}

// ---------------------------------------------------------------------------
// System files
// ---------------------------------------------------------------------------

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

/// Split `[a, b, c]` at top-level commas. Returns (text, column offset) pairs.
fn split_vector(body: &str, line: usize, col0: usize) -> Result<Vec<(String, usize)>, DslError> {
    let trimmed_start = body.len() - body.trim_start().len();
    let t = body.trim();
    let open_col = col0 + trimmed_start;
    if !t.starts_with('[') {
        return Err(DslError::Syntax {
            pos: Pos { line, col: open_col + 1 },
            expected: "`[`".into(),
            found: t.chars().next().map_or("end of line".into(), |c| format!("`{c}`")),
        });
    }
    if !t.ends_with(']') {
        return Err(DslError::Syntax {
            pos: Pos { line, col: open_col + t.chars().count() + 1 },
            expected: "`]`".into(),
            found: "end of line".into(),
        });
    }
    let inner: Vec<char> = t.chars().collect();
    let inner = &inner[1..inner.len() - 1];
    let mut out: Vec<(String, usize)> = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in inner.iter().enumerate() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push((inner[start..i].iter().collect(), open_col + 1 + start));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((inner[start..].iter().collect(), open_col + 1 + start));
    if out.len() == 1 && out[0].0.trim().is_empty() {
        out.clear();
    }
    Ok(out)
}

/// Parse a system-definition file.
pub fn parse_system(text: &str) -> Result<ControlAffineSystem, DslError> {
    let mut table = SymbolTable::default();
    let mut states_seen = false;
    // Deferred lines: (line number, column of body, kind, name, body).
    let mut deferred: Vec<(usize, usize, String, String, String)> = Vec::new();

    for (ln0, raw) in text.lines().enumerate() {
        let line = ln0 + 1;
        let content = strip_comment(raw);
        if content.trim().is_empty() {
            continue;
        }
        let Some(colon) = content.find(':') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(DslError::Syntax {
                pos: Pos { line, col },
                expected: "`key: value`".into(),
                found: format!("`{}`", content.trim()),
            });
        };
        let key = content[..colon].trim();
        let body = &content[colon + 1..];
        let body_col = content[..colon + 1].chars().count();
        let mut words = key.split_whitespace();
        let head = words.next().unwrap_or("");
        let name = words.next().unwrap_or("").to_string();
        match head {
            "states" => {
                if states_seen {
                    return Err(DslError::Invalid { pos: Pos { line, col: 1 }, msg: "duplicate `states`".into() });
                }
                states_seen = true;
                for (i, v) in body.split_whitespace().enumerate() {
                    check_ident(v, line)?;
                    if table.lookup(v).is_some() {
                        return Err(DslError::Invalid { pos: Pos { line, col: 1 }, msg: format!("duplicate symbol `{v}`") });
                    }
                    table.states.push(Symbol::state(i, v));
                }
            }
            "params" => {
                for part in body.split(',') {
                    let p = part.trim();
                    if p.is_empty() {
                        continue;
                    }
                    let (pname, sign) = if let Some((n, rest)) = p.split_once('>') {
                        check_zero(rest, line)?;
                        (n.trim(), Sign::Positive)
                    } else if let Some((n, rest)) = p.split_once('<') {
                        check_zero(rest, line)?;
                        (n.trim(), Sign::Negative)
                    } else {
                        (p, Sign::Any)
                    };
                    check_ident(pname, line)?;
                    if table.lookup(pname).is_some() {
                        return Err(DslError::Invalid {
                            pos: Pos { line, col: 1 },
                            msg: format!("duplicate symbol `{pname}`"),
                        });
                    }
                    let idx = table.params.len();
                    table.params.push((Symbol::param(idx, pname), sign));
                }
            }
            "drift" | "control" | "candidate" | "assume_nonzero" => {
                if matches!(head, "control" | "candidate") && name.is_empty() {
                    return Err(DslError::Syntax {
                        pos: Pos { line, col: colon + 1 },
                        expected: format!("a name after `{head}`"),
                        found: "`:`".into(),
                    });
                }
                deferred.push((line, body_col, head.to_string(), name, body.to_string()));
            }
            other => {
                return Err(DslError::Syntax {
                    pos: Pos { line, col: 1 },
                    expected: "one of `states`, `params`, `drift`, `control`, `candidate`, `assume_nonzero`".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }

    if !states_seen || table.states.is_empty() {
        return Err(DslError::Invalid { pos: Pos { line: 1, col: 1 }, msg: "missing `states` declaration".into() });
    }
    let n = table.states.len();
    let mut sys = ControlAffineSystem {
        symbols: table,
        drift: vec![Expr::zero(); n],
        controls: Vec::new(),
        candidates: Vec::new(),
        assume_nonzero: Vec::new(),
    };

    for (line, col0, head, name, body) in deferred {
        let expr_at = |text: &str, col: usize| -> Result<Expr, DslError> {
            parse_expr(text, &sys.symbols).map_err(|e| e.shift(line, col))
        };
        match head.as_str() {
            "drift" | "control" => {
                let comps = split_vector(&body, line, col0)?;
                if comps.len() != n {
                    return Err(DslError::ArityMismatch {
                        pos: Pos { line, col: col0 + 1 },
                        what: if head == "drift" { "drift".into() } else { format!("control {name}") },
                        found: comps.len(),
                        expected: n,
                    });
                }
                let field = comps
                    .iter()
                    .map(|(t, c)| expr_at(t, *c))
                    .collect::<Result<Vec<_>, _>>()?;
                if head == "drift" {
                    sys.drift = field;
                } else {
                    if sys.controls.iter().any(|c| c.name == name) {
                        return Err(DslError::Invalid { pos: Pos { line, col: 1 }, msg: format!("duplicate control `{name}`") });
                    }
                    sys.controls.push(Control { name, field });
                }
            }
            "candidate" => {
                let rho = expr_at(&body, col0)?;
                sys.candidates.push(DeclaredCandidate { name, rho });
            }
            _ => {
                let e = expr_at(&body, col0)?;
                if e.is_zero() {
                    return Err(DslError::Invalid { pos: Pos { line, col: col0 + 1 }, msg: "assumed-nonzero expression is zero".into() });
                }
                sys.assume_nonzero.push(e);
            }
        }
    }

    if sys.controls.is_empty() {
        return Err(DslError::EmptyControlSet);
    }
    if sys.m() > n {
        return Err(DslError::Invalid {
            pos: Pos { line: 1, col: 1 },
            msg: format!("{} controls exceed state dimension {n}", sys.m()),
        });
    }
    Ok(sys)
}

fn check_ident(v: &str, line: usize) -> Result<(), DslError> {
    let ok = v.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && v.chars().all(|c| c.is_alphanumeric() || c == '_')
        && v != "sin"
        && v != "cos";
    if ok {
        Ok(())
    } else {
        Err(DslError::Syntax { pos: Pos { line, col: 1 }, expected: "an identifier".into(), found: format!("`{v}`") })
    }
}

fn check_zero(rest: &str, line: usize) -> Result<(), DslError> {
    if rest.trim() == "0" {
        Ok(())
    } else {
        Err(DslError::Syntax { pos: Pos { line, col: 1 }, expected: "`0` in a sign constraint".into(), found: format!("`{}`", rest.trim()) })
    }
}
