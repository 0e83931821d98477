//! Scenario files (`.cg`): a small brace-delimited language describing a
//! labeled graph, optional mechanisms and optional metric column bindings.
//!
//! ```text
//! # comments run to the end of the line
//! graph college {
//!   node A { kind: bernoulli, p: 0.5, role: sensitive }
//!   node D { kind: linear, intercept: 1.0, coef: { A: 4.0 }, sigma: 1.0 }
//!   node Y { kind: expr, expr: "sigmoid(2 * D)", sigma: 0.5, role: outcome }
//!   edge A -> D { label: unfair }
//!   bind { group: A, label: Y, score: S, threshold: 0.5 }
//! }
//! ```
//!
//! Coefficients and formula identifiers declare edges implicitly; an
//! explicit `edge` only adds a label. Nodes without `kind` describe a bare
//! graph, in which case no node may have a `kind`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::dataset::Bindings;
use crate::expr::Expr;
use crate::graph::{CausalGraph, FairnessLabel, GraphError, GraphSpec};
use crate::scm::{build_model, Mechanism, ModelError, StructuralModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
}

impl DslError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            DslError::Syntax { line, col, .. } | DslError::Semantic { line, col, .. } => {
                (*line, *col)
            }
        }
    }
}

/// A parsed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub graph: CausalGraph,
    pub model: Option<StructuralModel>,
    pub bindings: Option<Bindings>,
}

impl ScenarioSpec {
    pub fn from_model(name: &str, model: StructuralModel) -> Self {
        ScenarioSpec {
            name: name.to_string(),
            graph: model.graph().clone(),
            model: Some(model),
            bindings: None,
        }
    }

    /// Canonical text; `parse_spec` reads it back to an equal value.
    pub fn to_dsl(&self) -> String {
        serialize_spec(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String, Vec<Pos>),
    LBrace,
    RBrace,
    Colon,
    Comma,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(v) => write!(f, "number {v}"),
            Tok::Str(s, _) => write!(f, "string {s:?}"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn syntax(pos: Pos, expected: &str, found: impl fmt::Display) -> DslError {
    DslError::Syntax {
        line: pos.line,
        col: pos.col,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

fn semantic(pos: Pos, message: impl Into<String>) -> DslError {
    DslError::Semantic {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, pos));
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        let next = chars.get(i + 1).copied();
        if c == '-' && next == Some('>') {
            out.push((Tok::Arrow, pos));
            i += 2;
            col += 2;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                {
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut col, ch);
                }
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            continue;
        }
        if c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.')
                && next.is_some_and(|n| n.is_ascii_digit() || n == '.'))
        {
            let start = i;
            advance(&mut i, &mut line, &mut col, c);
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    advance(&mut i, &mut line, &mut col, d);
                } else {
                    break;
                }
            }
            let lit: String = chars[start..i].iter().collect();
            match lit.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push((Tok::Number(v), pos)),
                _ => return Err(syntax(pos, "a number", format!("`{lit}`"))),
            }
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            let mut cols = Vec::new();
            loop {
                let Some(&d) = chars.get(i) else {
                    return Err(syntax(Pos { line, col }, "`\"`", Tok::Eof));
                };
                let here = Pos { line, col };
                match d {
                    '"' => {
                        cols.push(here);
                        advance(&mut i, &mut line, &mut col, d);
                        break;
                    }
                    '\n' => return Err(syntax(here, "`\"`", "end of line")),
                    '\\' => {
                        advance(&mut i, &mut line, &mut col, d);
                        match chars.get(i) {
                            Some(&e @ ('"' | '\\')) => {
                                s.push(e);
                                cols.push(here);
                                advance(&mut i, &mut line, &mut col, e);
                            }
                            _ => {
                                return Err(syntax(
                                    Pos { line, col },
                                    "`\\\"` or `\\\\`",
                                    "another escape",
                                ))
                            }
                        }
                    }
                    _ => {
                        s.push(d);
                        cols.push(here);
                        advance(&mut i, &mut line, &mut col, d);
                    }
                }
            }
            out.push((Tok::Str(s, cols), pos));
            continue;
        }
        return Err(syntax(pos, "a token", format!("`{c}`")));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Pos, DslError> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            Err(syntax(self.pos(), what, self.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().1)),
            other => Err(syntax(self.pos(), what, other)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, DslError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => Ok(self.bump().1),
            other => Err(syntax(self.pos(), &format!("`{kw}`"), other)),
        }
    }

    fn number(&mut self) -> Result<f64, DslError> {
        match self.peek() {
            Tok::Number(v) => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            other => Err(syntax(self.pos(), "a number", other)),
        }
    }

    // `{ key: value, ... }` with an optional trailing comma
    fn entries<F>(&mut self, mut entry: F) -> Result<(), DslError>
    where
        F: FnMut(&mut Parser, String, Pos) -> Result<(), DslError>,
    {
        self.expect(Tok::LBrace, "`{`")?;
        loop {
            if *self.peek() == Tok::RBrace {
                self.bump();
                return Ok(());
            }
            let (key, pos) = self.ident("a key or `}`")?;
            self.expect(Tok::Colon, "`:`")?;
            entry(self, key, pos)?;
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBrace => {}
                other => return Err(syntax(self.pos(), "`,` or `}`", other.clone())),
            }
        }
    }
}

#[derive(Debug, Default)]
struct NodeDecl {
    name: String,
    pos: Pos,
    kind: Option<(String, Pos)>,
    values: BTreeMap<String, (f64, Pos)>,
    coef: Option<(Vec<(String, f64, Pos)>, Pos)>,
    expr: Option<(Expr, Pos)>,
    role: Option<(String, Pos)>,
    seen: Vec<String>,
}

impl Default for Pos {
    fn default() -> Self {
        Pos { line: 1, col: 1 }
    }
}

#[derive(Debug)]
struct EdgeDecl {
    parent: (String, Pos),
    child: (String, Pos),
    label: Option<FairnessLabel>,
    pos: Pos,
}

fn parse_node(p: &mut Parser) -> Result<NodeDecl, DslError> {
    let (name, pos) = p.ident("a node name")?;
    let mut decl = NodeDecl {
        name,
        pos,
        ..Default::default()
    };
    p.entries(|p, key, kpos| {
        if decl.seen.contains(&key) {
            return Err(semantic(kpos, format!("key `{key}` given twice")));
        }
        decl.seen.push(key.clone());
        match key.as_str() {
            "kind" | "role" => {
                let v = p.ident("an identifier")?;
                if key == "kind" {
                    decl.kind = Some(v);
                } else {
                    decl.role = Some(v);
                }
            }
            "p" | "intercept" | "sigma" | "value" => {
                let v = p.number()?;
                decl.values.insert(key, (v, kpos));
            }
            "coef" => {
                let mut list: Vec<(String, f64, Pos)> = Vec::new();
                p.entries(|p, parent, ppos| {
                    if list.iter().any(|(n, _, _)| *n == parent) {
                        return Err(semantic(
                            ppos,
                            format!("coefficient on `{parent}` given twice"),
                        ));
                    }
                    list.push((parent, p.number()?, ppos));
                    Ok(())
                })?;
                decl.coef = Some((list, kpos));
            }
            "expr" => {
                let spos = p.pos();
                let (text, cols) = match p.peek().clone() {
                    Tok::Str(s, cols) => {
                        p.bump();
                        (s, cols)
                    }
                    other => return Err(syntax(spos, "a quoted formula", other)),
                };
                let e = Expr::parse(&text).map_err(|e| {
                    let at = cols
                        .get(e.column.saturating_sub(1))
                        .copied()
                        .unwrap_or(spos);
                    semantic(at, format!("formula: {}", e.message))
                })?;
                decl.expr = Some((e, spos));
            }
            _ => return Err(semantic(kpos, format!("unknown key `{key}`"))),
        }
        Ok(())
    })?;
    Ok(decl)
}

fn parse_edge(p: &mut Parser, pos: Pos) -> Result<EdgeDecl, DslError> {
    let parent = p.ident("a node name")?;
    p.expect(Tok::Arrow, "`->`")?;
    let child = p.ident("a node name")?;
    let mut label = None;
    if *p.peek() == Tok::LBrace {
        p.entries(|p, key, kpos| {
            if key != "label" {
                return Err(semantic(kpos, format!("unknown edge key `{key}`")));
            }
            if label.is_some() {
                return Err(semantic(kpos, "key `label` given twice"));
            }
            let (v, vpos) = p.ident("`fair`, `unfair` or `unknown`")?;
            label = Some(match v.as_str() {
                "fair" => FairnessLabel::Fair,
                "unfair" => FairnessLabel::Unfair,
                "unknown" => FairnessLabel::Unknown,
                _ => {
                    return Err(syntax(
                        vpos,
                        "`fair`, `unfair` or `unknown`",
                        format!("`{v}`"),
                    ))
                }
            });
            Ok(())
        })?;
    }
    Ok(EdgeDecl {
        parent,
        child,
        label,
        pos,
    })
}

fn parse_bind(p: &mut Parser, pos: Pos) -> Result<Bindings, DslError> {
    let mut b = Bindings::default();
    let (mut group, mut label) = (None, None);
    let mut seen = Vec::new();
    p.entries(|p, key, kpos| {
        if seen.contains(&key) {
            return Err(semantic(kpos, format!("key `{key}` given twice")));
        }
        seen.push(key.clone());
        match key.as_str() {
            "threshold" => b.threshold = Some(p.number()?),
            "group" => group = Some(p.ident("a column name")?.0),
            "label" => label = Some(p.ident("a column name")?.0),
            "prediction" => b.prediction = Some(p.ident("a column name")?.0),
            "score" => b.score = Some(p.ident("a column name")?.0),
            _ => return Err(semantic(kpos, format!("unknown bind key `{key}`"))),
        }
        Ok(())
    })?;
    let (Some(g), Some(l)) = (group, label) else {
        return Err(semantic(pos, "bind needs both `group` and `label`"));
    };
    b.group = g;
    b.label = l;
    let complete = matches!(
        (&b.prediction, &b.score, b.threshold),
        (Some(_), None, None) | (None, Some(_), Some(_))
    );
    if !complete {
        return Err(semantic(
            pos,
            "bind needs either `prediction`, or `score` with `threshold`",
        ));
    }
    Ok(b)
}

fn mechanism_of(d: &NodeDecl) -> Result<Option<Mechanism>, DslError> {
    let Some((kind, kpos)) = &d.kind else {
        if let Some(k) = d.seen.iter().find(|k| *k != "role") {
            return Err(semantic(d.pos, format!("key `{k}` needs a `kind`")));
        }
        return Ok(None);
    };
    let allowed: &[&str] = match kind.as_str() {
        "bernoulli" => &["p"],
        "logistic" => &["intercept", "coef"],
        "linear" => &["intercept", "coef", "sigma"],
        "expr" => &["expr", "sigma"],
        "point" => &["value"],
        _ => {
            return Err(semantic(
                *kpos,
                format!(
                    "unknown kind `{kind}` (expected bernoulli, logistic, linear, expr or point)"
                ),
            ))
        }
    };
    for key in &d.seen {
        if key != "kind" && key != "role" && !allowed.contains(&key.as_str()) {
            return Err(semantic(
                d.pos,
                format!("key `{key}` does not apply to kind `{kind}`"),
            ));
        }
    }
    let value = |k: &str, default: Option<f64>| -> Result<f64, DslError> {
        d.values
            .get(k)
            .map(|v| v.0)
            .or(default)
            .ok_or_else(|| semantic(d.pos, format!("kind `{kind}` needs `{k}`")))
    };
    let coef: BTreeMap<String, f64> = d
        .coef
        .as_ref()
        .map(|(list, _)| list.iter().map(|(n, v, _)| (n.clone(), *v)).collect())
        .unwrap_or_default();
    Ok(Some(match kind.as_str() {
        "bernoulli" => Mechanism::BernoulliRoot {
            p: value("p", None)?,
        },
        "logistic" => Mechanism::BernoulliLogistic {
            intercept: value("intercept", Some(0.0))?,
            coefficients: coef,
        },
        "linear" => Mechanism::LinearGaussian {
            intercept: value("intercept", Some(0.0))?,
            coefficients: coef,
            noise_std: value("sigma", Some(1.0))?,
        },
        "expr" => Mechanism::Expression {
            formula: d
                .expr
                .as_ref()
                .map(|e| e.0.clone())
                .ok_or_else(|| semantic(d.pos, "kind `expr` needs `expr`"))?,
            noise_std: value("sigma", Some(1.0))?,
        },
        _ => Mechanism::PointMass {
            value: value("value", None)?,
        },
    }))
}

/// Parses scenario text, validating the graph and, when every node has a
/// kind, the structural model.
pub fn parse_spec(text: &str) -> Result<ScenarioSpec, DslError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    p.keyword("graph")?;
    let (name, _) = p.ident("a graph name")?;
    p.expect(Tok::LBrace, "`{`")?;
    let mut nodes: Vec<NodeDecl> = Vec::new();
    let mut edges: Vec<EdgeDecl> = Vec::new();
    let mut bindings = None;
    loop {
        match p.peek().clone() {
            Tok::RBrace => {
                p.bump();
                break;
            }
            Tok::Ident(kw) if kw == "node" => {
                p.bump();
                nodes.push(parse_node(&mut p)?);
            }
            Tok::Ident(kw) if kw == "edge" => {
                let pos = p.bump().1;
                edges.push(parse_edge(&mut p, pos)?);
            }
            Tok::Ident(kw) if kw == "bind" => {
                let pos = p.bump().1;
                if bindings.is_some() {
                    return Err(semantic(pos, "only one `bind` block is allowed"));
                }
                bindings = Some(parse_bind(&mut p, pos)?);
            }
            other => return Err(syntax(p.pos(), "`node`, `edge`, `bind` or `}`", other)),
        }
    }
    if *p.peek() != Tok::Eof {
        return Err(syntax(p.pos(), "end of input", p.peek().clone()));
    }

    let mut declared: HashMap<&str, Pos> = HashMap::new();
    for d in &nodes {
        if declared.insert(&d.name, d.pos).is_some() {
            return Err(semantic(d.pos, format!("node `{}` declared twice", d.name)));
        }
    }
    let mut spec = GraphSpec::new().nodes(nodes.iter().map(|d| d.name.clone()));
    for d in &nodes {
        if let Some((role, rpos)) = &d.role {
            let slot = match role.as_str() {
                "sensitive" => &mut spec.sensitive,
                "outcome" => &mut spec.outcome,
                _ => {
                    return Err(syntax(
                        *rpos,
                        "`sensitive` or `outcome`",
                        format!("`{role}`"),
                    ))
                }
            };
            if slot.is_some() {
                return Err(semantic(*rpos, format!("more than one {role} node")));
            }
            *slot = Some(d.name.clone());
        }
    }

    // implicit edges from coefficients and formulas, in declaration order
    let mut edge_pos: Vec<Pos> = Vec::new();
    for d in &nodes {
        let mut parents: Vec<(String, Pos)> = Vec::new();
        if let Some((list, _)) = &d.coef {
            parents.extend(list.iter().map(|(n, _, pos)| (n.clone(), *pos)));
        }
        if let Some((e, pos)) = &d.expr {
            parents.extend(e.variables().into_iter().map(|v| (v, *pos)));
        }
        for (parent, pos) in parents {
            if !declared.contains_key(parent.as_str()) {
                return Err(semantic(pos, format!("unknown node `{parent}`")));
            }
            spec = spec.edge(&parent, &d.name);
            edge_pos.push(pos);
        }
    }
    let implicit = spec.edges.len();
    for e in &edges {
        for (n, pos) in [&e.parent, &e.child] {
            if !declared.contains_key(n.as_str()) {
                return Err(semantic(*pos, format!("unknown node `{n}`")));
            }
        }
        let existing = spec
            .edges
            .iter()
            .position(|(a, b, _)| *a == e.parent.0 && *b == e.child.0);
        match existing {
            Some(k) if k >= implicit => {
                return Err(semantic(
                    e.pos,
                    format!("edge {} -> {} declared twice", e.parent.0, e.child.0),
                ));
            }
            Some(k) => {
                spec.edges[k].2 = e.label.unwrap_or_default();
                edge_pos[k] = e.pos;
            }
            None => {
                spec = spec.labeled(&e.parent.0, &e.child.0, e.label.unwrap_or_default());
                edge_pos.push(e.pos);
            }
        }
    }

    let locate = |name: &str| declared.get(name).copied().unwrap_or_default();
    let graph = spec.build().map_err(|err| {
        let at = match &err {
            GraphError::CycleDetected { cycle } => locate(&cycle[0]),
            GraphError::RoleConflict(n) => locate(n),
            _ => Pos::default(),
        };
        semantic(at, err.to_string())
    })?;

    let mechs: Vec<Option<Mechanism>> = nodes.iter().map(mechanism_of).collect::<Result<_, _>>()?;
    let model = if mechs.iter().all(Option::is_none) {
        None
    } else {
        if let Some(d) = nodes
            .iter()
            .zip(&mechs)
            .find(|(_, m)| m.is_none())
            .map(|(d, _)| d)
        {
            return Err(semantic(
                d.pos,
                format!("node `{}` has no `kind` while other nodes do", d.name),
            ));
        }
        let map = nodes
            .iter()
            .zip(mechs)
            .map(|(d, m)| (d.name.clone(), m.expect("checked")))
            .collect();
        Some(build_model(graph.clone(), map).map_err(|err| {
            let at = match &err {
                ModelError::ParentMismatch { node, .. } | ModelError::BadParameter { node, .. } => {
                    locate(node)
                }
                _ => Pos::default(),
            };
            semantic(at, err.to_string())
        })?)
    };

    Ok(ScenarioSpec {
        name,
        graph,
        model,
        bindings,
    })
}

fn real(v: f64) -> String {
    format!("{v:?}")
}

fn push_coef(out: &mut Vec<String>, coefficients: &BTreeMap<String, f64>) {
    if !coefficients.is_empty() {
        let body: Vec<String> = coefficients
            .iter()
            .map(|(k, v)| format!("{k}: {}", real(*v)))
            .collect();
        out.push(format!("coef: {{ {} }}", body.join(", ")));
    }
}

/// Canonical form: nodes in declaration order, every edge explicit with its
/// label, then the binding block.
pub fn serialize_spec(spec: &ScenarioSpec) -> String {
    let g = &spec.graph;
    let mut s = format!("graph {} {{\n", spec.name);
    for name in g.names() {
        let mut entries = Vec::new();
        if let Some(m) = &spec.model {
            match m.mechanism(name).expect("model covers the graph") {
                Mechanism::BernoulliRoot { p } => {
                    entries.push("kind: bernoulli".to_string());
                    entries.push(format!("p: {}", real(*p)));
                }
                Mechanism::BernoulliLogistic {
                    intercept,
                    coefficients,
                } => {
                    entries.push("kind: logistic".to_string());
                    entries.push(format!("intercept: {}", real(*intercept)));
                    push_coef(&mut entries, coefficients);
                }
                Mechanism::LinearGaussian {
                    intercept,
                    coefficients,
                    noise_std,
                } => {
                    entries.push("kind: linear".to_string());
                    entries.push(format!("intercept: {}", real(*intercept)));
                    push_coef(&mut entries, coefficients);
                    entries.push(format!("sigma: {}", real(*noise_std)));
                }
                Mechanism::Expression { formula, noise_std } => {
                    entries.push("kind: expr".to_string());
                    entries.push(format!("expr: \"{formula}\""));
                    entries.push(format!("sigma: {}", real(*noise_std)));
                }
                Mechanism::PointMass { value } => {
                    entries.push("kind: point".to_string());
                    entries.push(format!("value: {}", real(*value)));
                }
            }
        }
        if g.sensitive() == Some(name) {
            entries.push("role: sensitive".to_string());
        } else if g.outcome() == Some(name) {
            entries.push("role: outcome".to_string());
        }
        if entries.is_empty() {
            let _ = writeln!(s, "  node {name} {{ }}");
        } else {
            let _ = writeln!(s, "  node {name} {{ {} }}", entries.join(", "));
        }
    }
    for e in g.edges() {
        let _ = writeln!(
            s,
            "  edge {} -> {} {{ label: {} }}",
            g.name(e.parent),
            g.name(e.child),
            e.label
        );
    }
    if let Some(b) = &spec.bindings {
        let mut entries = vec![format!("group: {}", b.group), format!("label: {}", b.label)];
        if let Some(p) = &b.prediction {
            entries.push(format!("prediction: {p}"));
        }
        if let Some(sc) = &b.score {
            entries.push(format!("score: {sc}"));
        }
        if let Some(t) = b.threshold {
            entries.push(format!("threshold: {}", real(t)));
        }
        let _ = writeln!(s, "  bind {{ {} }}", entries.join(", "));
    }
    s.push_str("}\n");
    s
}
