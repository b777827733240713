//! Interval propagation over the known inequalities between category,
//! topological complexity and its relative, pair, map and parametrised forms.
//!
//! A scenario declares symbolic spaces and fibrations with structural
//! annotations, parameter values, axiom facts and goals. Every rule of the
//! built-in table is instantiated as linear inequalities between quantities,
//! and bounds are narrowed to a fixpoint. Each bound keeps the derivation
//! that produced it, so goal intervals come with replayable traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("arithmetic overflow in `{0}`")]
    Overflow(String),
    #[error("line {line}: {quantity} is given the value {value}, below its floor {floor}")]
    BelowFloor { line: usize, quantity: String, value: i64, floor: i64 },
    #[error("line {line}: {quantity} has lower bound {lower} above upper bound {upper}")]
    EmptyInterval { line: usize, quantity: String, lower: i64, upper: i64 },
    #[error("unknown identifier `{0}`")]
    UnknownIdent(String),
    #[error("`{0}` is declared twice")]
    Duplicate(String),
    #[error("product `{0}` contains itself")]
    CyclicProduct(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("unknown goal `{0}`")]
    UnknownGoal(String),
    #[error("contradiction on {quantity}: lower {lower} [{lower_trace}] exceeds upper {upper} [{upper_trace}]")]
    Contradiction { quantity: String, lower: i64, upper: i64, lower_trace: String, upper_trace: String },
    #[error("propagation did not settle within {0} rounds")]
    NoFixpoint(usize),
}

type Result<T> = std::result::Result<T, LedgerError>;

/// Every rule identifier of the built-in table.
pub const RULES: &[&str] = &[
    "R1", "R2", "R3", "R4", "R5", "R5'", "R6", "R7", "R8", "R9", "R10", "R11", "R11'", "R12", "R13", "R14", "R15",
    "R16",
];

/// Integer expressions over scenario parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> std::result::Result<Expr, String> {
        let tokens = tokenize(text)?;
        let mut p = ExprParser { tokens, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(format!("unexpected `{}` in `{text}`", p.tokens[p.pos]));
        }
        Ok(e)
    }

    pub fn eval(&self, params: &BTreeMap<String, i64>) -> Result<i64> {
        let over = || LedgerError::Overflow(self.to_string());
        Ok(match self {
            Expr::Int(v) => *v,
            Expr::Param(name) => *params.get(name).ok_or_else(|| LedgerError::UnboundParameter(name.clone()))?,
            Expr::Neg(a) => a.eval(params)?.checked_neg().ok_or_else(over)?,
            Expr::Add(a, b) => a.eval(params)?.checked_add(b.eval(params)?).ok_or_else(over)?,
            Expr::Sub(a, b) => a.eval(params)?.checked_sub(b.eval(params)?).ok_or_else(over)?,
            Expr::Mul(a, b) => a.eval(params)?.checked_mul(b.eval(params)?).ok_or_else(over)?,
            Expr::Pow(a, b) => {
                let exp = u32::try_from(b.eval(params)?).map_err(|_| over())?;
                a.eval(params)?.checked_pow(exp).ok_or_else(over)?
            }
        })
    }

    pub fn params(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Param(p) => {
                out.insert(p.clone());
            }
            Expr::Neg(a) => a.params(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Pow(a, b) => {
                a.params(out);
                b.params(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
        }
    }
}

fn tokenize(text: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if "+-*·^()".contains(c) {
            out.push(if c == '·' { "*".to_string() } else { c.to_string() });
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}` in `{text}`"));
        }
    }
    Ok(out)
}

struct ExprParser {
    tokens: Vec<String>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn sum(&mut self) -> std::result::Result<Expr, String> {
        let mut acc = self.product()?;
        while let Some(op @ ("+" | "-")) = self.peek() {
            let add = op == "+";
            self.pos += 1;
            let rhs = self.product()?;
            acc = if add { Expr::Add(Box::new(acc), Box::new(rhs)) } else { Expr::Sub(Box::new(acc), Box::new(rhs)) };
        }
        Ok(acc)
    }

    fn product(&mut self) -> std::result::Result<Expr, String> {
        let mut acc = self.unary()?;
        while self.peek() == Some("*") {
            self.pos += 1;
            acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
        }
        Ok(acc)
    }

    fn unary(&mut self) -> std::result::Result<Expr, String> {
        if self.peek() == Some("-") {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, String> {
        let base = self.atom()?;
        if self.peek() == Some("^") {
            self.pos += 1;
            // right-associative, binds tighter than unary minus on its left
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, String> {
        let tok = self.peek().ok_or("expression ends early")?.to_string();
        self.pos += 1;
        if tok == "(" {
            let e = self.sum()?;
            if self.peek() != Some(")") {
                return Err("missing `)`".into());
            }
            self.pos += 1;
            return Ok(e);
        }
        if let Ok(v) = tok.parse::<i64>() {
            return Ok(Expr::Int(v));
        }
        if tok.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Ok(Expr::Param(tok));
        }
        Err(format!("unexpected `{tok}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Cat,
    Dim,
    /// `TC(X)`.
    Tc,
    /// `TC_n(X)`.
    TcN,
    /// `TC(q)` of a map.
    MapTc,
    MapTcN,
    /// `TC[q : E -> B]`.
    ParamTc,
    ParamTcN,
    /// `TC(A, B)`.
    PairTc,
    PairTcN,
    /// `TC_{n,X}(Y)`.
    RelTcN,
}

impl Kind {
    fn has_arity(self) -> bool {
        matches!(self, Kind::TcN | Kind::MapTcN | Kind::ParamTcN | Kind::PairTcN | Kind::RelTcN)
    }

    fn subjects(self) -> usize {
        match self {
            Kind::PairTc | Kind::PairTcN | Kind::RelTcN => 2,
            _ => 1,
        }
    }

    fn floor(self) -> i64 {
        if self == Kind::Dim {
            0
        } else {
            1
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            Kind::Cat => "cat",
            Kind::Dim => "dim",
            Kind::Tc => "TC",
            Kind::TcN => "TCn",
            Kind::MapTc => "TC_map",
            Kind::MapTcN => "TCn_map",
            Kind::ParamTc => "TC_param",
            Kind::ParamTcN => "TCn_param",
            Kind::PairTc => "TC_pair",
            Kind::PairTcN => "TCn_pair",
            Kind::RelTcN => "TCn_rel",
        }
    }

    fn from_keyword(word: &str) -> Option<Kind> {
        [
            Kind::Cat,
            Kind::Dim,
            Kind::Tc,
            Kind::TcN,
            Kind::MapTc,
            Kind::MapTcN,
            Kind::ParamTc,
            Kind::ParamTcN,
            Kind::PairTc,
            Kind::PairTcN,
            Kind::RelTcN,
        ]
        .into_iter()
        .find(|k| k.keyword() == word)
    }
}

/// A symbolic invariant of a declared space, pair or fibration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quantity {
    pub kind: Kind,
    pub subjects: Vec<String>,
    /// Set exactly for the arity-carrying kinds.
    pub arity: Option<i64>,
}

impl Quantity {
    pub fn new(kind: Kind, subject: &str) -> Self {
        Quantity { kind, subjects: vec![subject.to_string()], arity: None }
    }

    pub fn with_arity(kind: Kind, subjects: &[&str], n: i64) -> Self {
        Quantity { kind, subjects: subjects.iter().map(|s| s.to_string()).collect(), arity: Some(n) }
    }

    pub fn pair(kind: Kind, a: &str, b: &str) -> Self {
        Quantity { kind, subjects: vec![a.to_string(), b.to_string()], arity: None }
    }

    pub fn floor(&self) -> i64 {
        self.kind.floor()
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.subjects;
        let n = self.arity.unwrap_or(0);
        match self.kind {
            Kind::Cat => write!(f, "cat({})", s[0]),
            Kind::Dim => write!(f, "dim({})", s[0]),
            Kind::Tc | Kind::MapTc => write!(f, "TC({})", s[0]),
            Kind::TcN | Kind::MapTcN => write!(f, "TC_{n}({})", s[0]),
            Kind::ParamTc => write!(f, "TC[{}]", s[0]),
            Kind::ParamTcN => write!(f, "TC_{n}[{}]", s[0]),
            Kind::PairTc => write!(f, "TC({},{})", s[0], s[1]),
            Kind::PairTcN => write!(f, "TC_{n}({},{})", s[0], s[1]),
            Kind::RelTcN => write!(f, "TC_{n},{}({})", s[0], s[1]),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpaceDecl {
    pub paracompact: bool,
    pub loc_contractible: bool,
    pub dim: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fibration {
    pub total: String,
    pub base: String,
    pub fiber: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtLeast,
    AtMost,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fact {
    pub quantity: Quantity,
    pub relation: Relation,
    pub value: i64,
    pub cite: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Goal {
    /// The quantity as written in the scenario.
    pub text: String,
    pub quantity: Quantity,
}

/// A loaded scenario with all parameters bound.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scenario {
    pub params: BTreeMap<String, i64>,
    pub spaces: BTreeMap<String, SpaceDecl>,
    pub fibrations: BTreeMap<String, Fibration>,
    /// Declared products, of spaces or of fibrations.
    pub products: BTreeMap<String, Vec<String>>,
    /// `(sub, space)` pairs.
    pub retracts: Vec<(String, String)>,
    pub facts: Vec<Fact>,
    pub goals: Vec<Goal>,
}

/// Parses a scenario; `overrides` replace or supply parameter values.
pub fn load_scenario(text: &str, overrides: &BTreeMap<String, i64>) -> Result<Scenario> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut sc = Scenario::default();
    let err = |line: usize, reason: String| LedgerError::Parse { line, reason };
    for &(line, l) in &lines {
        if let Some(rest) = l.strip_prefix("param ") {
            let (name, value) = rest.split_once('=').ok_or_else(|| err(line, "expected `param <ident> = <int>`".into()))?;
            let name = ident(name.trim()).map_err(|r| err(line, r))?;
            let value = Expr::parse(value.trim()).map_err(|r| err(line, r))?;
            let value = value.eval(&sc.params).map_err(|e| err(line, e.to_string()))?;
            sc.params.insert(name, value);
        }
    }
    for (k, v) in overrides {
        sc.params.insert(k.clone(), *v);
    }
    for &(line, l) in &lines {
        let (head, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let rest = rest.trim();
        match head {
            "param" => {}
            "space" => {
                let (name, flags) = match rest.split_once('[') {
                    Some((n, f)) => (n.trim(), Some(f)),
                    None => (rest, None),
                };
                let name = ident(name).map_err(|r| err(line, r))?;
                let mut decl = SpaceDecl::default();
                if let Some(flags) = flags {
                    let flags = flags.strip_suffix(']').ok_or_else(|| err(line, "missing `]`".into()))?;
                    let flags = flags.trim().strip_prefix("flags:").unwrap_or(flags);
                    for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                        match flag {
                            "paracompact" => decl.paracompact = true,
                            "loc-contractible" => decl.loc_contractible = true,
                            _ => {
                                let expr = flag
                                    .strip_prefix("dim")
                                    .and_then(|f| f.trim_start().strip_prefix('='))
                                    .ok_or_else(|| err(line, format!("unknown flag `{flag}`")))?;
                                let e = Expr::parse(expr.trim()).map_err(|r| err(line, r))?;
                                decl.dim = Some(e.eval(&sc.params)?);
                            }
                        }
                    }
                }
                if sc.spaces.insert(name.clone(), decl).is_some() || sc.fibrations.contains_key(&name) {
                    return Err(LedgerError::Duplicate(name));
                }
            }
            "fibration" => {
                let mut words = rest.split_whitespace();
                let name = ident(words.next().unwrap_or("")).map_err(|r| err(line, r))?;
                let mut fields = BTreeMap::new();
                for w in words {
                    let (k, v) = w.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got `{w}`")))?;
                    fields.insert(k.to_string(), ident(v).map_err(|r| err(line, r))?);
                }
                let mut take = |k: &str| fields.remove(k);
                let total = take("total").ok_or_else(|| err(line, "fibration needs total=".into()))?;
                let base = take("base").ok_or_else(|| err(line, "fibration needs base=".into()))?;
                let fiber = take("fiber");
                if let Some(k) = fields.keys().next() {
                    return Err(err(line, format!("unknown field `{k}`")));
                }
                if sc.spaces.contains_key(&name) || sc.fibrations.insert(name.clone(), Fibration { total, base, fiber }).is_some() {
                    return Err(LedgerError::Duplicate(name));
                }
            }
            "product" => {
                let (name, factors) = rest.split_once('=').ok_or_else(|| err(line, "expected `product <ident> = <a> x <b>`".into()))?;
                let name = ident(name.trim()).map_err(|r| err(line, r))?;
                let factors: Vec<String> = factors
                    .split(['x', '×'])
                    .map(|f| ident(f.trim()))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|r| err(line, r))?;
                if factors.len() < 2 {
                    return Err(err(line, "a product needs at least two factors".into()));
                }
                if sc.products.insert(name.clone(), factors).is_some() {
                    return Err(LedgerError::Duplicate(name));
                }
            }
            "retract" => {
                let (sub, space) = rest.split_once(" of ").ok_or_else(|| err(line, "expected `retract <sub> of <space>`".into()))?;
                sc.retracts.push((ident(sub.trim()).map_err(|r| err(line, r))?, ident(space.trim()).map_err(|r| err(line, r))?));
            }
            "fact" => {
                let (body, cite) = match rest.split_once(" cite ") {
                    Some((b, c)) => (b.trim(), c.trim().trim_matches('"').to_string()),
                    None => (rest, String::new()),
                };
                let (pos, op, relation) = [(">=", Relation::AtLeast), ("<=", Relation::AtMost), ("=", Relation::Equal)]
                    .into_iter()
                    .find_map(|(op, rel)| body.find(op).map(|p| (p, op, rel)))
                    .ok_or_else(|| err(line, "fact needs >=, <= or =".into()))?;
                let quantity = parse_quantity(body[..pos].trim(), &sc.params).map_err(|e| relocate(e, line))?;
                let value = Expr::parse(body[pos + op.len()..].trim()).map_err(|r| err(line, r))?.eval(&sc.params)?;
                if value < quantity.floor() {
                    return Err(LedgerError::BelowFloor { line, quantity: quantity.to_string(), value, floor: quantity.floor() });
                }
                sc.facts.push(Fact { quantity, relation, value, cite, line });
            }
            "goal" => {
                let quantity = parse_quantity(rest, &sc.params).map_err(|e| relocate(e, line))?;
                sc.goals.push(Goal { text: rest.to_string(), quantity });
            }
            _ => return Err(err(line, format!("unknown directive `{head}`"))),
        }
    }
    sc.validate()?;
    Ok(sc)
}

fn relocate(e: LedgerError, line: usize) -> LedgerError {
    match e {
        LedgerError::Parse { reason, .. } => LedgerError::Parse { line, reason },
        other => other,
    }
}

fn ident(s: &str) -> std::result::Result<String, String> {
    let ok = !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'');
    if ok {
        Ok(s.to_string())
    } else {
        Err(format!("invalid identifier `{s}`"))
    }
}

/// Parses `cat(X)`, `TCn(X)`, `TCn_param[q]@3`, `TCn_pair(A,B)` and the like.
/// Arity-carrying forms default to the parameter `n`.
pub fn parse_quantity(text: &str, params: &BTreeMap<String, i64>) -> Result<Quantity> {
    let bad = |reason: String| LedgerError::Parse { line: 0, reason };
    let (body, arity) = match text.split_once('@') {
        Some((b, a)) => (b.trim(), Some(Expr::parse(a.trim()).map_err(bad)?)),
        None => (text.trim(), None),
    };
    let open = body.find(['(', '[']).ok_or_else(|| bad(format!("malformed quantity `{text}`")))?;
    let close = if &body[open..=open] == "(" { ')' } else { ']' };
    let kind = Kind::from_keyword(&body[..open]).ok_or_else(|| bad(format!("unknown quantity `{}`", &body[..open])))?;
    let param_form = close == ']';
    if param_form != matches!(kind, Kind::ParamTc | Kind::ParamTcN) {
        return Err(bad(format!("wrong brackets in `{text}`")));
    }
    let inner = body[open + 1..]
        .strip_suffix(close)
        .ok_or_else(|| bad(format!("missing `{close}` in `{text}`")))?;
    let subjects: Vec<String> = inner.split(',').map(|s| ident(s.trim())).collect::<std::result::Result<_, _>>().map_err(bad)?;
    if subjects.len() != kind.subjects() {
        return Err(bad(format!("`{text}` takes {} argument(s)", kind.subjects())));
    }
    let arity = match (kind.has_arity(), arity) {
        (true, a) => {
            let n = a.unwrap_or(Expr::Param("n".into())).eval(params)?;
            if n < 1 {
                return Err(bad(format!("arity {n} in `{text}` is below 1")));
            }
            Some(n)
        }
        (false, None) => None,
        (false, Some(_)) => return Err(bad(format!("`{}` takes no arity", kind.keyword()))),
    };
    Ok(Quantity { kind, subjects, arity })
}

impl Scenario {
    fn is_space(&self, s: &str) -> bool {
        self.spaces.contains_key(s) || self.products.get(s).is_some_and(|f| f.iter().all(|x| self.is_space(x)))
    }

    fn is_map(&self, s: &str) -> bool {
        self.fibrations.contains_key(s) || self.products.get(s).is_some_and(|f| f.iter().all(|x| self.is_map(x)))
    }

    fn validate(&self) -> Result<()> {
        for name in self.products.keys() {
            let mut stack = self.products[name].clone();
            let mut seen = BTreeSet::new();
            while let Some(f) = stack.pop() {
                if &f == name {
                    return Err(LedgerError::CyclicProduct(name.clone()));
                }
                if seen.insert(f.clone()) {
                    stack.extend(self.products.get(&f).cloned().unwrap_or_default());
                }
            }
        }
        for (name, factors) in &self.products {
            if self.spaces.contains_key(name) && !factors.iter().all(|f| self.is_space(f)) {
                return Err(LedgerError::UnknownIdent(name.clone()));
            }
            if !self.is_space(name) && !self.is_map(name) {
                let bad = factors.iter().find(|f| !self.is_space(f) && !self.is_map(f)).unwrap_or(name);
                return Err(LedgerError::UnknownIdent(bad.clone()));
            }
        }
        for fib in self.fibrations.values() {
            for s in [Some(&fib.total), Some(&fib.base), fib.fiber.as_ref()].into_iter().flatten() {
                if !self.is_space(s) {
                    return Err(LedgerError::UnknownIdent(s.clone()));
                }
            }
        }
        for (sub, space) in &self.retracts {
            for s in [sub, space] {
                if !self.is_space(s) {
                    return Err(LedgerError::UnknownIdent(s.clone()));
                }
            }
        }
        let quantities = self.facts.iter().map(|f| &f.quantity).chain(self.goals.iter().map(|g| &g.quantity));
        for q in quantities {
            let map_like = matches!(q.kind, Kind::MapTc | Kind::MapTcN | Kind::ParamTc | Kind::ParamTcN);
            for s in &q.subjects {
                let ok = if map_like { self.is_map(s) } else { self.is_space(s) };
                if !ok {
                    return Err(LedgerError::UnknownIdent(s.clone()));
                }
            }
        }
        let mut axioms: BTreeMap<&Quantity, (i64, Option<i64>)> = BTreeMap::new();
        for f in &self.facts {
            let e = axioms.entry(&f.quantity).or_insert((f.quantity.floor(), None));
            if f.relation != Relation::AtMost {
                e.0 = e.0.max(f.value);
            }
            if f.relation != Relation::AtLeast {
                e.1 = Some(e.1.map_or(f.value, |u| u.min(f.value)));
            }
            if let (lower, Some(upper)) = *e {
                if lower > upper {
                    return Err(LedgerError::EmptyInterval { line: f.line, quantity: f.quantity.to_string(), lower, upper });
                }
            }
        }
        Ok(())
    }

    /// Largest arity mentioned by a fact or goal, at least 2.
    fn max_arity(&self) -> i64 {
        let mentioned = self.facts.iter().map(|f| &f.quantity).chain(self.goals.iter().map(|g| &g.quantity));
        mentioned.filter_map(|q| q.arity).max().unwrap_or(2).max(2)
    }

    /// Declared products whose factors are `count` copies of `x`.
    fn power_of<'a>(&'a self, x: &'a str, count: usize) -> Option<&'a str> {
        if count == 1 {
            return Some(x);
        }
        self.products
            .iter()
            .find(|(_, f)| f.len() == count && f.iter().all(|y| y == x))
            .map(|(k, _)| k.as_str())
    }

    fn product_of(&self, a: &str, b: &str) -> Option<&str> {
        self.products.iter().find(|(_, f)| f.len() == 2 && f[0] == a && f[1] == b).map(|(k, _)| k.as_str())
    }

    fn flags(&self, s: &str) -> SpaceDecl {
        self.spaces.get(s).cloned().unwrap_or_default()
    }

    fn all_spaces(&self) -> Vec<String> {
        let mut out: BTreeSet<String> = self.spaces.keys().cloned().collect();
        out.extend(self.products.keys().filter(|p| self.is_space(p)).cloned());
        out.into_iter().collect()
    }
}

/// `Σ coef · quantity ≤ constant`, tagged with the rule it instantiates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub rule: &'static str,
    pub terms: Vec<(i64, usize)>,
    pub constant: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    /// The floor every quantity starts from.
    Floor,
    Axiom { cite: String },
    /// Bound obtained from `constraint` by solving for one of its terms;
    /// `premises` lists the other terms' bounds as `(term index, derivation)`.
    Rule { constraint: usize, premises: Vec<(usize, usize)> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub quantity: usize,
    pub side: Side,
    pub value: i64,
    pub source: Source,
    /// Whether this bound depends on the suspect rule R9.
    pub uses_r9: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lower: i64,
    pub upper: Option<i64>,
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "[{}, {}]", self.lower, u),
            None => write!(f, "[{}, unbounded]", self.lower),
        }
    }
}

/// Options controlling propagation.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub excluded: BTreeSet<String>,
    /// Order in which constraints are visited; identity when `None`.
    pub order: Option<Vec<usize>>,
}

impl Options {
    pub fn excluding(rules: &[&str]) -> Result<Self> {
        let mut excluded = BTreeSet::new();
        for r in rules {
            if !RULES.contains(r) {
                return Err(LedgerError::UnknownRule(r.to_string()));
            }
            excluded.insert(r.to_string());
        }
        Ok(Options { excluded, order: None })
    }
}

/// Bounds at the fixpoint together with their derivations.
#[derive(Clone, Debug)]
pub struct FactTable {
    pub quantities: Vec<Quantity>,
    pub constraints: Vec<Constraint>,
    pub derivations: Vec<Derivation>,
    lower: Vec<usize>,
    upper: Vec<Option<usize>>,
    index: BTreeMap<Quantity, usize>,
}

const MAX_ROUNDS: usize = 10_000;

struct Builder<'a> {
    sc: &'a Scenario,
    quantities: Vec<Quantity>,
    index: BTreeMap<Quantity, usize>,
    constraints: Vec<Constraint>,
}

impl Builder<'_> {
    fn q(&mut self, q: Quantity) -> usize {
        if let Some(&i) = self.index.get(&q) {
            return i;
        }
        self.quantities.push(q.clone());
        self.index.insert(q, self.quantities.len() - 1);
        self.quantities.len() - 1
    }

    /// `Σ coef · q ≤ constant`; repeated quantities are merged.
    fn le(&mut self, rule: &'static str, terms: &[(i64, usize)], constant: i64) {
        let mut merged: Vec<(i64, usize)> = Vec::new();
        for &(c, q) in terms {
            match merged.iter_mut().find(|(_, m)| *m == q) {
                Some(t) => t.0 += c,
                None => merged.push((c, q)),
            }
        }
        merged.retain(|&(c, _)| c != 0);
        if !merged.is_empty() {
            self.constraints.push(Constraint { rule, terms: merged, constant });
        }
    }

    /// `a ≤ b`.
    fn below(&mut self, rule: &'static str, a: usize, b: usize) {
        self.le(rule, &[(1, a), (-1, b)], 0);
    }

    fn equal(&mut self, rule: &'static str, a: usize, b: usize) {
        self.below(rule, a, b);
        self.below(rule, b, a);
    }

    fn instantiate(&mut self) {
        let sc = self.sc;
        let top = sc.max_arity();
        let arities: Vec<i64> = (1..=top).collect();
        for f in &sc.facts {
            self.q(f.quantity.clone());
        }
        for g in &sc.goals {
            self.q(g.quantity.clone());
        }
        for x in sc.all_spaces() {
            let flags = sc.flags(&x);
            let cat = self.q(Quantity::new(Kind::Cat, &x));
            let tc = self.q(Quantity::new(Kind::Tc, &x));
            self.below("R1", cat, tc);
            if flags.paracompact {
                self.le("R1", &[(1, tc), (-2, cat)], -1);
            }
            if flags.paracompact && flags.loc_contractible {
                let dim = self.q(Quantity::new(Kind::Dim, &x));
                self.le("R2", &[(1, tc), (-2, dim)], 1);
            }
            for &n in &arities {
                let tcn = self.q(Quantity::with_arity(Kind::TcN, &[&x], n));
                if n >= 2 {
                    if let Some(p) = sc.power_of(&x, (n - 1) as usize) {
                        let c = self.q(Quantity::new(Kind::Cat, p));
                        self.below("R4", c, tcn);
                    }
                    if let Some(p) = sc.power_of(&x, n as usize) {
                        let c = self.q(Quantity::new(Kind::Cat, p));
                        self.below("R4", tcn, c);
                    }
                }
                if n < top {
                    let next = self.q(Quantity::with_arity(Kind::TcN, &[&x], n + 1));
                    self.below("R5", tcn, next);
                }
                if n == 2 {
                    self.equal("R16", tcn, tc);
                }
            }
        }
        for (p, factors) in &sc.products {
            if sc.is_space(p) {
                let cat = self.q(Quantity::new(Kind::Cat, p));
                let mut terms = vec![(1, cat)];
                for f in factors {
                    terms.push((-1, self.q(Quantity::new(Kind::Cat, f))));
                }
                self.le("R3", &terms, 0);
            } else if factors.len() == 2 {
                let tq = self.q(Quantity::new(Kind::MapTc, p));
                let t1 = self.q(Quantity::new(Kind::MapTc, &factors[0]));
                let t2 = self.q(Quantity::new(Kind::MapTc, &factors[1]));
                self.below("R7", t1, tq);
                self.below("R7", t2, tq);
                self.le("R7", &[(1, tq), (-1, t1), (-1, t2)], -1);
                let pq = self.q(Quantity::new(Kind::ParamTc, p));
                let p1 = self.q(Quantity::new(Kind::ParamTc, &factors[0]));
                let p2 = self.q(Quantity::new(Kind::ParamTc, &factors[1]));
                self.le("R13", &[(1, pq), (-1, p1), (-1, p2)], 0);
            }
        }
        for (q, fib) in &sc.fibrations {
            let (e, b) = (fib.total.as_str(), fib.base.as_str());
            let cat_b = self.q(Quantity::new(Kind::Cat, b));
            let map_tc = self.q(Quantity::new(Kind::MapTc, q));
            let param_tc = self.q(Quantity::new(Kind::ParamTc, q));
            let tc_b = self.q(Quantity::new(Kind::Tc, b));
            let tc_e = self.q(Quantity::new(Kind::Tc, e));
            self.below("R10", cat_b, param_tc);
            self.below("R6", cat_b, map_tc);
            self.below("R6", map_tc, tc_b);
            if let Some(p) = sc.product_of(e, b) {
                let c = self.q(Quantity::new(Kind::Cat, p));
                self.below("R6", map_tc, c);
            }
            self.below("R8", param_tc, tc_e);
            self.below("R9", map_tc, param_tc);
            if let (Some(fiber), Some(p)) = (&fib.fiber, sc.product_of(b, b)) {
                let tc_f = self.q(Quantity::new(Kind::Tc, fiber));
                let c = self.q(Quantity::new(Kind::Cat, p));
                self.le("R15", &[(1, tc_e), (-1, tc_f), (-1, c)], 1);
            }
            for &n in &arities {
                let pn = self.q(Quantity::with_arity(Kind::ParamTcN, &[q], n));
                let mn = self.q(Quantity::with_arity(Kind::MapTcN, &[q], n));
                let en = self.q(Quantity::with_arity(Kind::TcN, &[e], n));
                self.below("R8", pn, en);
                self.below("R9", mn, pn);
                if n < top {
                    let next = self.q(Quantity::with_arity(Kind::ParamTcN, &[q], n + 1));
                    self.below("R5'", pn, next);
                }
                if n == 2 {
                    self.equal("R16", pn, param_tc);
                    self.equal("R16", mn, map_tc);
                }
            }
        }
        let mentioned: Vec<Quantity> = self.quantities.clone();
        let pairs: BTreeSet<(String, String)> = mentioned
            .iter()
            .filter(|q| matches!(q.kind, Kind::PairTc | Kind::PairTcN))
            .map(|q| (q.subjects[0].clone(), q.subjects[1].clone()))
            .collect();
        for (a, b) in &pairs {
            let plain = self.q(Quantity::pair(Kind::PairTc, a, b));
            let cat_b = self.q(Quantity::new(Kind::Cat, b));
            for &n in &arities {
                let tn = self.q(Quantity::with_arity(Kind::PairTcN, &[a, b], n));
                if n >= 2 {
                    if let Some(p) = sc.power_of(b, n as usize) {
                        let c = self.q(Quantity::new(Kind::Cat, p));
                        self.below("R11", tn, c);
                    }
                    if sc.flags(a).paracompact {
                        self.le("R11'", &[(1, tn), (-n, cat_b)], 0);
                    }
                }
                if n == 2 {
                    self.equal("R16", tn, plain);
                }
            }
        }
        let rels: BTreeSet<(String, String, i64)> = mentioned
            .iter()
            .filter(|q| q.kind == Kind::RelTcN)
            .map(|q| (q.subjects[0].clone(), q.subjects[1].clone(), q.arity.unwrap_or(2)))
            .collect();
        for (x, y, n) in &rels {
            let r = self.q(Quantity::with_arity(Kind::RelTcN, &[x, y], *n));
            let t = self.q(Quantity::with_arity(Kind::TcN, &[x], *n));
            self.below("R12", r, t);
        }
        for (y, x) in &sc.retracts {
            let (ty, tx) = (self.q(Quantity::new(Kind::Tc, y)), self.q(Quantity::new(Kind::Tc, x)));
            self.below("R14", ty, tx);
            for &n in &arities {
                let ty = self.q(Quantity::with_arity(Kind::TcN, &[y], n));
                let tx = self.q(Quantity::with_arity(Kind::TcN, &[x], n));
                self.below("R14", ty, tx);
            }
        }
    }
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

impl FactTable {
    fn bound(&self, q: usize, side: Side) -> Option<&Derivation> {
        match side {
            Side::Lower => Some(&self.derivations[self.lower[q]]),
            Side::Upper => self.upper[q].map(|d| &self.derivations[d]),
        }
    }

    /// Tightest bound for term `j` of `c` from the current bounds of the
    /// other terms, with the derivations used.
    fn solve(&self, c: &Constraint, j: usize) -> Option<(Side, i64, Vec<(usize, usize)>)> {
        let mut rest = c.constant;
        let mut premises = Vec::new();
        for (i, &(coef, q)) in c.terms.iter().enumerate() {
            if i == j {
                continue;
            }
            let side = if coef > 0 { Side::Lower } else { Side::Upper };
            let d = match side {
                Side::Lower => self.lower[q],
                Side::Upper => self.upper[q]?,
            };
            rest = rest.checked_sub(coef.checked_mul(self.derivations[d].value)?)?;
            premises.push((i, d));
        }
        let a = c.terms[j].0;
        if a > 0 {
            Some((Side::Upper, floor_div(rest, a), premises))
        } else {
            Some((Side::Lower, -floor_div(rest, -a), premises))
        }
    }

    /// Re-derives the value of derivation `d` from its recorded premises.
    pub fn replay(&self, d: usize) -> Option<i64> {
        let der = &self.derivations[d];
        match &der.source {
            Source::Floor => Some(self.quantities[der.quantity].floor()),
            Source::Axiom { .. } => Some(der.value),
            Source::Rule { constraint, premises } => {
                let c = &self.constraints[*constraint];
                let j = c.terms.iter().position(|&(_, q)| q == der.quantity)?;
                let mut rest = c.constant;
                for &(i, p) in premises {
                    if p >= d {
                        return None;
                    }
                    rest -= c.terms[i].0 * self.derivations[p].value;
                }
                let a = c.terms[j].0;
                Some(if a > 0 { floor_div(rest, a) } else { -floor_div(rest, -a) })
            }
        }
    }

    fn set(&mut self, q: usize, side: Side, value: i64, source: Source) -> Result<bool> {
        let uses_r9 = match &source {
            Source::Rule { constraint, premises } => {
                self.constraints[*constraint].rule == "R9" || premises.iter().any(|&(_, p)| self.derivations[p].uses_r9)
            }
            _ => false,
        };
        // An equal bound replaces one that leans on R9 when it does not.
        let better = match self.bound(q, side) {
            None => true,
            Some(cur) => {
                let tighter = match side {
                    Side::Lower => value > cur.value,
                    Side::Upper => value < cur.value,
                };
                tighter || (value == cur.value && cur.uses_r9 && !uses_r9)
            }
        };
        if !better {
            return Ok(false);
        }
        self.derivations.push(Derivation { quantity: q, side, value, source, uses_r9 });
        let id = self.derivations.len() - 1;
        match side {
            Side::Lower => self.lower[q] = id,
            Side::Upper => self.upper[q] = Some(id),
        }
        if let Some(u) = self.upper[q] {
            let (lo, up) = (self.derivations[self.lower[q]].value, self.derivations[u].value);
            if lo > up {
                return Err(LedgerError::Contradiction {
                    quantity: self.quantities[q].to_string(),
                    lower: lo,
                    upper: up,
                    lower_trace: self.inline_trace(self.lower[q]),
                    upper_trace: self.inline_trace(u),
                });
            }
        }
        Ok(true)
    }

    pub fn interval(&self, q: &Quantity) -> Option<Interval> {
        let &i = self.index.get(q)?;
        Some(Interval {
            lower: self.derivations[self.lower[i]].value,
            upper: self.upper[i].map(|d| self.derivations[d].value),
        })
    }

    pub fn lower_derivation(&self, q: &Quantity) -> Option<usize> {
        self.index.get(q).map(|&i| self.lower[i])
    }

    pub fn upper_derivation(&self, q: &Quantity) -> Option<usize> {
        self.index.get(q).and_then(|&i| self.upper[i])
    }

    /// Rules used anywhere beneath derivation `d`.
    pub fn rules_used(&self, d: usize) -> BTreeSet<&'static str> {
        let mut out = BTreeSet::new();
        let mut stack = vec![d];
        while let Some(d) = stack.pop() {
            if let Source::Rule { constraint, premises } = &self.derivations[d].source {
                out.insert(self.constraints[*constraint].rule);
                stack.extend(premises.iter().map(|&(_, p)| p));
            }
        }
        out
    }

    fn statement(&self, d: usize) -> String {
        let der = &self.derivations[d];
        let op = if der.side == Side::Lower { ">=" } else { "<=" };
        let how = match &der.source {
            Source::Floor => "by definition".to_string(),
            Source::Axiom { cite } if cite.is_empty() => "axiom".to_string(),
            Source::Axiom { cite } => format!("axiom \"{cite}\""),
            Source::Rule { constraint, .. } => format!("by {}", self.constraints[*constraint].rule),
        };
        let tag = if der.uses_r9 { " [uses R9]" } else { "" };
        format!("{} {op} {} {how}{tag}", self.quantities[der.quantity], der.value)
    }

    fn inline_trace(&self, d: usize) -> String {
        let rules: Vec<&str> = self.rules_used(d).into_iter().collect();
        format!("{}; rules: {}", self.statement(d), if rules.is_empty() { "none".into() } else { rules.join(", ") })
    }

    /// Indented derivation tree of `d`; repeated sub-derivations are elided.
    pub fn render(&self, d: usize, indent: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        self.render_into(d, indent, &mut seen, &mut out);
        out
    }

    fn render_into(&self, d: usize, indent: usize, seen: &mut BTreeSet<usize>, out: &mut Vec<String>) {
        let pad = "  ".repeat(indent);
        if !seen.insert(d) {
            out.push(format!("{pad}{} (as above)", self.statement(d)));
            return;
        }
        out.push(format!("{pad}{}", self.statement(d)));
        if let Source::Rule { premises, .. } = &self.derivations[d].source {
            for &(_, p) in premises {
                if self.derivations[p].source != Source::Floor {
                    self.render_into(p, indent + 1, seen, out);
                }
            }
        }
    }
}

/// Instantiates the rule table for `sc` and narrows every interval to the fixpoint.
pub fn propagate(sc: &Scenario, options: &Options) -> Result<FactTable> {
    for r in &options.excluded {
        if !RULES.contains(&r.as_str()) {
            return Err(LedgerError::UnknownRule(r.clone()));
        }
    }
    let mut b = Builder { sc, quantities: Vec::new(), index: BTreeMap::new(), constraints: Vec::new() };
    b.instantiate();
    let constraints: Vec<Constraint> =
        b.constraints.into_iter().filter(|c| !options.excluded.contains(c.rule)).collect();
    let mut table = FactTable {
        derivations: b
            .quantities
            .iter()
            .enumerate()
            .map(|(i, q)| Derivation { quantity: i, side: Side::Lower, value: q.floor(), source: Source::Floor, uses_r9: false })
            .collect(),
        lower: (0..b.quantities.len()).collect(),
        upper: vec![None; b.quantities.len()],
        quantities: b.quantities,
        constraints,
        index: b.index,
    };
    for f in &sc.facts {
        let q = table.index[&f.quantity];
        let source = Source::Axiom { cite: f.cite.clone() };
        if f.relation != Relation::AtMost {
            table.set(q, Side::Lower, f.value, source.clone())?;
        }
        if f.relation != Relation::AtLeast {
            table.set(q, Side::Upper, f.value, source)?;
        }
    }
    for (name, decl) in &sc.spaces {
        if let Some(dim) = decl.dim {
            if let Some(&q) = table.index.get(&Quantity::new(Kind::Dim, name)) {
                let source = Source::Axiom { cite: format!("dim={dim}") };
                table.set(q, Side::Lower, dim, source.clone())?;
                table.set(q, Side::Upper, dim, source)?;
            }
        }
    }
    let order: Vec<usize> = options.order.clone().unwrap_or_else(|| (0..table.constraints.len()).collect());
    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        for &ci in &order {
            let c = table.constraints[ci].clone();
            for j in 0..c.terms.len() {
                if let Some((side, value, premises)) = table.solve(&c, j) {
                    changed |= table.set(c.terms[j].1, side, value, Source::Rule { constraint: ci, premises })?;
                }
            }
        }
        if !changed {
            return Ok(table);
        }
    }
    Err(LedgerError::NoFixpoint(MAX_ROUNDS))
}

/// A goal's interval with the derivations of both ends.
#[derive(Clone, Debug)]
pub struct GoalReport {
    pub text: String,
    pub interval: Interval,
    pub lower: usize,
    pub upper: Option<usize>,
}

pub fn derive_interval(table: &FactTable, goal: &Goal) -> Result<GoalReport> {
    let interval = table.interval(&goal.quantity).ok_or_else(|| LedgerError::UnknownGoal(goal.text.clone()))?;
    Ok(GoalReport {
        text: goal.text.clone(),
        interval,
        lower: table.lower_derivation(&goal.quantity).expect("indexed"),
        upper: table.upper_derivation(&goal.quantity),
    })
}

/// Loads, propagates and renders every goal with its trace.
pub fn run(text: &str, overrides: &BTreeMap<String, i64>, options: &Options) -> Result<String> {
    let sc = load_scenario(text, overrides)?;
    let table = propagate(&sc, options)?;
    let mut out = String::new();
    for goal in &sc.goals {
        let r = derive_interval(&table, goal)?;
        out.push_str(&format!("{} in {}\n", r.text, r.interval));
        for d in std::iter::once(r.lower).chain(r.upper) {
            for line in table.render(d, 1) {
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    Ok(out)
}
