//! Line-oriented text format for networks (`.pvm`).
//!
//! ```text
//! const t_dl 5
//! clock y
//! chan abort[6]
//! var pc 0..1 = 0
//! array c 6 0..1 = 0
//! template Spatial(id)
//!   clock x
//!   loc init initial
//!   loc wait inv x<=t_dl
//!   edge wait -> init guard x>0 sync abort[id]! do c[id]=0
//! end
//! system s2=Spatial(2)
//! query A[] not deadlock
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::{Pos, SyntaxError, Tok, Tokens};
use crate::ta::expr::Expr;
use crate::ta::model::{
    split_guard, Assign, ChanDecl, ClockCmp, Declarations, Edge, InstanceDecl, Location, ModelError, Network, Sync, Template, VarDecl,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("line {line}: {source}")]
    Model {
        line: usize,
        #[source]
        source: ModelError,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax(e) => e.pos.line,
            ParseError::Model { line, .. } => *line,
        }
    }
}

/// Parsed model file: the network plus its query lines.
#[derive(Clone, Debug)]
pub struct ModelDocument {
    pub network: Network,
    pub queries: Vec<String>,
}

pub fn parse_model(text: &str) -> Result<Network, ParseError> {
    parse_document(text).map(|d| d.network)
}

struct Parser {
    decls: Declarations,
    templates: Vec<Template>,
    system: Vec<InstanceDecl>,
    system_line: usize,
    queries: Vec<String>,
    names: HashSet<String>,
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax(SyntaxError::new(pos, msg))
}

fn model(line: usize, source: ModelError) -> ParseError {
    ParseError::Model { line, source }
}

pub fn parse_document(text: &str) -> Result<ModelDocument, ParseError> {
    let mut p = Parser {
        decls: Declarations::default(),
        templates: Vec::new(),
        system: Vec::new(),
        system_line: 0,
        queries: Vec::new(),
        names: HashSet::new(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut k = 0;
    while k < lines.len() {
        let ln = k + 1;
        let raw = lines[k];
        k += 1;
        let trimmed = raw.trim_start();
        if let Some(rest) = trimmed.strip_prefix("query") {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                let q = strip_comment(rest).trim();
                if q.is_empty() {
                    return Err(syntax(Pos { line: ln, col: raw.len() + 1 }, "empty query"));
                }
                p.queries.push(q.to_string());
                continue;
            }
        }
        let mut t = Tokens::parse(raw, ln)?;
        if t.at_end() {
            continue;
        }
        let pos = t.pos();
        let kw = t.ident()?;
        match kw.as_str() {
            "const" => {
                let name = p.fresh(&mut t)?;
                let e = t.expr()?;
                t.finish()?;
                let v =
                    e.eval_const(&|n| p.decls.constant(n)).ok_or_else(|| syntax(pos, format!("constant `{name}` must be an integer expression")))?;
                p.decls.consts.push((name, v));
            }
            "clock" => {
                loop {
                    let name = p.fresh(&mut t)?;
                    p.decls.clocks.push(name);
                    if !t.eat_sym(",") {
                        break;
                    }
                }
                t.finish()?;
            }
            "chan" => {
                loop {
                    let name = p.fresh(&mut t)?;
                    let size = if t.eat_sym("[") {
                        let n = p.const_int(&mut t)?;
                        t.expect_sym("]")?;
                        Some(n as usize)
                    } else {
                        None
                    };
                    p.decls.chans.push(ChanDecl { name, size });
                    if !t.eat_sym(",") {
                        break;
                    }
                }
                t.finish()?;
            }
            "var" | "bool" | "array" => {
                let name = p.fresh(&mut t)?;
                let v = p.var_tail(&kw, name, &mut t)?;
                p.decls.vars.push(v);
            }
            "template" => {
                let tpl = p.template(&mut t, &lines, &mut k)?;
                if p.templates.iter().any(|x| x.name == tpl.name) || p.names.contains(&tpl.name) {
                    return Err(model(ln, ModelError::Duplicate(tpl.name)));
                }
                p.templates.push(tpl);
            }
            "system" => {
                if p.system_line != 0 {
                    return Err(syntax(pos, "duplicate system line"));
                }
                p.system_line = ln;
                while !t.at_end() {
                    let name = t.ident()?;
                    t.expect_sym("=")?;
                    let template = t.ident()?;
                    let mut args = Vec::new();
                    if t.eat_sym("(") && !t.eat_sym(")") {
                        loop {
                            args.push(p.const_int(&mut t)?);
                            if t.eat_sym(")") {
                                break;
                            }
                            t.expect_sym(",")?;
                        }
                    }
                    t.eat_sym(",");
                    if p.system.iter().any(|s| s.name == name) {
                        return Err(model(ln, ModelError::Duplicate(name)));
                    }
                    if !p.templates.iter().any(|x| x.name == template) {
                        return Err(model(ln, ModelError::UnknownTemplate(template)));
                    }
                    p.system.push(InstanceDecl { name, template, args });
                }
            }
            other => return Err(syntax(pos, format!("unknown declaration `{other}`"))),
        }
    }
    if p.system_line == 0 {
        return Err(syntax(Pos { line: lines.len().max(1), col: 1 }, "missing system line"));
    }
    let line = p.system_line;
    let network = Network::new(p.decls, p.templates, p.system).map_err(|e| model(line, e))?;
    Ok(ModelDocument { network, queries: p.queries })
}

fn strip_comment(s: &str) -> &str {
    let cut = [s.find('#'), s.find("//")].into_iter().flatten().min();
    match cut {
        Some(k) => &s[..k],
        None => s,
    }
}

impl Parser {
    fn fresh(&mut self, t: &mut Tokens) -> Result<String, ParseError> {
        let pos = t.pos();
        let name = t.ident()?;
        if !self.names.insert(name.clone()) {
            return Err(model(pos.line, ModelError::Duplicate(name)));
        }
        Ok(name)
    }

    fn const_int(&self, t: &mut Tokens) -> Result<i64, ParseError> {
        let pos = t.pos();
        let e = t.expr()?;
        e.eval_const(&|n| self.decls.constant(n)).ok_or_else(|| syntax(pos, format!("expected a constant, found `{e}`")))
    }

    /// Rest of `var x lo..hi [= v]`, `bool b [= v]` or `array a n lo..hi [= v]`.
    fn var_tail(&self, kw: &str, name: String, t: &mut Tokens) -> Result<VarDecl, ParseError> {
        let size = if kw == "array" { Some(self.const_int(t)? as usize) } else { None };
        let (lo, hi) = if kw == "bool" {
            (0, 1)
        } else if t.is_word("bool") {
            t.next();
            (0, 1)
        } else {
            let lo = self.const_int(t)?;
            t.expect_sym("..")?;
            (lo, self.const_int(t)?)
        };
        let init = if t.eat_sym("=") { self.const_int(t)? } else { lo.max(0).min(hi) };
        t.finish()?;
        Ok(VarDecl { name, size, lo, hi, init })
    }

    fn template(&self, t: &mut Tokens, lines: &[&str], k: &mut usize) -> Result<Template, ParseError> {
        let mut tpl = Template::new(&t.ident()?);
        if t.eat_sym("(") && !t.eat_sym(")") {
            loop {
                tpl.params.push(t.ident()?);
                if t.eat_sym(")") {
                    break;
                }
                t.expect_sym(",")?;
            }
        }
        t.finish()?;
        let start_line = *k;
        let mut locals: HashSet<String> = tpl.params.iter().cloned().collect();
        let mut edge_lines = Vec::new();
        let mut inv_lines = Vec::new();
        loop {
            if *k >= lines.len() {
                return Err(syntax(Pos { line: start_line, col: 1 }, format!("template `{}` is missing `end`", tpl.name)));
            }
            let ln = *k + 1;
            let mut t = Tokens::parse(lines[*k], ln)?;
            *k += 1;
            if t.at_end() {
                continue;
            }
            let pos = t.pos();
            let kw = t.ident()?;
            match kw.as_str() {
                "end" => {
                    t.finish()?;
                    break;
                }
                "clock" => loop {
                    let n = t.ident()?;
                    if !locals.insert(n.clone()) {
                        return Err(model(ln, ModelError::Duplicate(n)));
                    }
                    tpl.clocks.push(n);
                    if !t.eat_sym(",") {
                        t.finish()?;
                        break;
                    }
                },
                "var" | "bool" | "array" => {
                    let n = t.ident()?;
                    if !locals.insert(n.clone()) {
                        return Err(model(ln, ModelError::Duplicate(n)));
                    }
                    tpl.vars.push(self.var_tail(&kw, n, &mut t)?);
                }
                "loc" => {
                    let name = t.ident()?;
                    if tpl.location(&name).is_some() {
                        return Err(model(ln, ModelError::Duplicate(name)));
                    }
                    let mut loc = Location::new(&name);
                    loop {
                        if t.eat_word("initial") {
                            if !tpl.initial.is_empty() {
                                return Err(syntax(pos, "second initial location"));
                            }
                            tpl.initial = name.clone();
                        } else if t.eat_word("committed") {
                            loc.committed = true;
                        } else if t.eat_word("inv") {
                            inv_lines.push((ln, tpl.locations.len(), t.expr()?));
                        } else {
                            break;
                        }
                    }
                    t.finish()?;
                    tpl.locations.push(loc);
                }
                "edge" => {
                    let src = t.ident()?;
                    t.expect_sym("->")?;
                    let dst = t.ident()?;
                    let mut guard = None;
                    let mut sync = None;
                    let mut updates = Vec::new();
                    loop {
                        if t.eat_word("guard") {
                            guard = Some(t.expr()?);
                        } else if t.eat_word("sync") {
                            let chan = t.ident()?;
                            let index = if t.eat_sym("[") {
                                let e = t.expr()?;
                                t.expect_sym("]")?;
                                Some(e)
                            } else {
                                None
                            };
                            sync = Some(if t.eat_sym("!") {
                                Sync::send(&chan, index)
                            } else if t.eat_sym("?") {
                                Sync::recv(&chan, index)
                            } else {
                                return Err(t.error("expected `!` or `?` after channel").into());
                            });
                        } else if t.eat_word("do") {
                            loop {
                                let target = t.ident()?;
                                let index = if t.eat_sym("[") {
                                    let e = t.expr()?;
                                    t.expect_sym("]")?;
                                    Some(e)
                                } else {
                                    None
                                };
                                if !t.eat_sym("=") {
                                    t.expect_sym(":=")?;
                                }
                                updates.push(Assign { target, index, value: t.expr()? });
                                if !t.eat_sym(",") {
                                    break;
                                }
                            }
                        } else {
                            break;
                        }
                    }
                    t.finish()?;
                    edge_lines.push((ln, pos, src, dst, guard, sync, updates));
                }
                other => return Err(syntax(pos, format!("unknown template item `{other}`"))),
            }
        }
        if tpl.initial.is_empty() {
            return Err(syntax(Pos { line: start_line, col: 1 }, format!("template `{}` has no initial location", tpl.name)));
        }
        let is_clock = |n: &str| tpl.clocks.iter().any(|c| c == n) || self.decls.is_clock(n);
        for (ln, idx, e) in inv_lines {
            let (clocks, rest) = split_guard(&e, &is_clock).map_err(|m| syntax(Pos { line: ln, col: 1 }, m))?;
            if let Some(r) = rest {
                return Err(syntax(Pos { line: ln, col: 1 }, format!("invariant part `{r}` is not a clock constraint")));
            }
            self.check_names(ln, &tpl, &Expr::Bool(true), &clocks)?;
            tpl.locations[idx].invariant = clocks;
        }
        for (ln, pos, src, dst, guard, sync, updates) in edge_lines {
            for l in [&src, &dst] {
                if tpl.location(l).is_none() {
                    return Err(model(ln, ModelError::UnknownLocation { template: tpl.name.clone(), location: l.clone() }));
                }
            }
            let mut edge = Edge::new(&src, &dst);
            if let Some(g) = guard {
                let (clocks, data) = split_guard(&g, &is_clock).map_err(|m| syntax(pos, m))?;
                if let Some(d) = &data {
                    self.check_names(ln, &tpl, d, &[])?;
                }
                self.check_names(ln, &tpl, &Expr::Bool(true), &clocks)?;
                edge.clock_guard = clocks;
                edge.data_guard = data;
            }
            if let Some(s) = &sync {
                let decl = self.decls.chan(&s.chan).ok_or_else(|| model(ln, ModelError::Undeclared { kind: "channel", name: s.chan.clone() }))?;
                if decl.size.is_some() != s.index.is_some() {
                    return Err(syntax(pos, format!("channel `{}` used with wrong indexing", s.chan)));
                }
                if let Some(i) = &s.index {
                    self.check_names(ln, &tpl, i, &[])?;
                }
            }
            for a in &updates {
                let known = tpl.vars.iter().any(|v| v.name == a.target) || self.decls.is_var(&a.target) || (a.index.is_none() && is_clock(&a.target));
                if !known {
                    return Err(model(ln, ModelError::Undeclared { kind: "variable", name: a.target.clone() }));
                }
                self.check_names(ln, &tpl, &a.value, &[])?;
                if let Some(i) = &a.index {
                    self.check_names(ln, &tpl, i, &[])?;
                }
            }
            edge.sync = sync;
            edge.updates = updates;
            tpl.edges.push(edge);
        }
        Ok(tpl)
    }

    fn check_names(&self, ln: usize, tpl: &Template, e: &Expr, clocks: &[ClockCmp]) -> Result<(), ParseError> {
        let mut names = Vec::new();
        e.names(&mut names);
        for c in clocks {
            names.push(c.clock.clone());
            c.bound.names(&mut names);
        }
        for n in names {
            let known = tpl.params.contains(&n)
                || tpl.clocks.contains(&n)
                || tpl.vars.iter().any(|v| v.name == n)
                || self.decls.constant(&n).is_some()
                || self.decls.is_clock(&n)
                || self.decls.is_var(&n);
            if !known {
                return Err(model(ln, ModelError::Undeclared { kind: "identifier", name: n }));
            }
        }
        Ok(())
    }
}

fn render_var(kw: &str, v: &VarDecl) -> String {
    match v.size {
        Some(n) => format!("{kw} {} {} {}..{} = {}", v.name, n, v.lo, v.hi, v.init),
        None => format!("{kw} {} {}..{} = {}", v.name, v.lo, v.hi, v.init),
    }
}

pub fn render_template(t: &Template) -> String {
    let mut out = String::new();
    if t.params.is_empty() {
        let _ = writeln!(out, "template {}", t.name);
    } else {
        let _ = writeln!(out, "template {}({})", t.name, t.params.join(", "));
    }
    if !t.clocks.is_empty() {
        let _ = writeln!(out, "  clock {}", t.clocks.join(", "));
    }
    for v in &t.vars {
        let kw = if v.size.is_some() { "array" } else { "var" };
        let _ = writeln!(out, "  {}", render_var(kw, v));
    }
    for l in &t.locations {
        let mut line = format!("  loc {}", l.name);
        if l.name == t.initial {
            line.push_str(" initial");
        }
        if l.committed {
            line.push_str(" committed");
        }
        if let Some(inv) = l.invariant.iter().map(ClockCmp::as_expr).reduce(Expr::and) {
            let _ = write!(line, " inv {inv}");
        }
        let _ = writeln!(out, "{line}");
    }
    for e in &t.edges {
        let mut line = format!("  edge {} -> {}", e.source, e.target);
        if let Some(g) = e.guard_expr() {
            let _ = write!(line, " guard {g}");
        }
        if let Some(s) = &e.sync {
            let _ = write!(line, " sync {}", s.render());
        }
        if !e.updates.is_empty() {
            let ups: Vec<String> = e.updates.iter().map(|a| a.render().replace(" = ", "=")).collect();
            let _ = write!(line, " do {}", ups.join(", "));
        }
        let _ = writeln!(out, "{line}");
    }
    out.push_str("end\n");
    out
}

/// Serializes a network (and optional queries) to the text format.
pub fn serialize(net: &Network, queries: &[String]) -> String {
    let mut out = String::new();
    for (n, v) in &net.decls.consts {
        let _ = writeln!(out, "const {n} {v}");
    }
    if !net.decls.clocks.is_empty() {
        let _ = writeln!(out, "clock {}", net.decls.clocks.join(", "));
    }
    for c in &net.decls.chans {
        match c.size {
            Some(n) => {
                let _ = writeln!(out, "chan {}[{}]", c.name, n);
            }
            None => {
                let _ = writeln!(out, "chan {}", c.name);
            }
        }
    }
    for v in &net.decls.vars {
        let kw = if v.size.is_some() { "array" } else { "var" };
        let _ = writeln!(out, "{}", render_var(kw, v));
    }
    for t in &net.templates {
        out.push('\n');
        out.push_str(&render_template(t));
    }
    out.push('\n');
    let parts: Vec<String> = net
        .system
        .iter()
        .map(|s| {
            if s.args.is_empty() {
                format!("{}={}", s.name, s.template)
            } else {
                let args: Vec<String> = s.args.iter().map(i64::to_string).collect();
                format!("{}={}({})", s.name, s.template, args.join(", "))
            }
        })
        .collect();
    let _ = writeln!(out, "system {}", parts.join(" "));
    for q in queries {
        let _ = writeln!(out, "query {q}");
    }
    out
}

/// Parses a standalone template block (as emitted by [`render_template`])
/// against the declarations of `net`.
pub fn parse_template(text: &str, decls: &Declarations) -> Result<Template, ParseError> {
    let p = Parser { decls: decls.clone(), templates: Vec::new(), system: Vec::new(), system_line: 0, queries: Vec::new(), names: HashSet::new() };
    let lines: Vec<&str> = text.lines().collect();
    let mut k = 0;
    while k < lines.len() {
        let mut t = Tokens::parse(lines[k], k + 1)?;
        k += 1;
        if t.at_end() {
            continue;
        }
        match t.peek() {
            Some(Tok::Ident(w)) if w == "template" => {
                t.next();
                return p.template(&mut t, &lines, &mut k);
            }
            _ => return Err(t.error("expected `template`").into()),
        }
    }
    Err(syntax(Pos { line: 1, col: 1 }, "no template found"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
const t_dl 5
clock y
chan abort[3], go
var pc 0..1 = 0
array c 3 0..1 = 0
template Spatial(id)
  clock x
  var r 0..1 = 0
  loc init initial
  loc wait inv x<=t_dl
  loc post committed
  edge init -> wait sync go? do c[id]=1, x=0
  edge wait -> post guard x>0 and x<t_dl and not pc sync abort[id]! do c[id]=0, r=1
  edge post -> init do r=0
end
template Env
  loc a initial
  edge a -> a sync go!
  edge a -> a sync abort[2]?
end
system s2=Spatial(2) e=Env
query A[] not deadlock
";

    #[test]
    fn minimal_document() {
        let d = parse_document("template T\n  loc l initial\nend\nsystem p=T\n").unwrap();
        assert_eq!(d.network.instances.len(), 1);
    }

    #[test]
    fn small_model_round_trips() {
        let d = parse_document(SMALL).unwrap();
        assert_eq!(d.queries, vec!["A[] not deadlock"]);
        let text = serialize(&d.network, &d.queries);
        let d2 = parse_document(&text).unwrap();
        assert_eq!(d2.network.templates, d.network.templates);
        assert_eq!(d2.network.decls, d.network.decls);
        assert_eq!(serialize(&d2.network, &d2.queries), text);
        let e = &d.network.templates[0].edges[1];
        assert_eq!(e.clock_guard.len(), 2);
        assert_eq!(e.data_guard.as_ref().unwrap().to_string(), "not pc");
    }

    #[test]
    fn undeclared_channel_names_line() {
        let text = SMALL.replace("sync go?", "sync went?");
        let err = parse_document(&text).unwrap_err();
        assert_eq!(err.line(), 12);
        assert!(err.to_string().contains("went"), "{err}");
    }

    #[test]
    fn syntax_error_has_column() {
        let err = parse_document("clock x\ntemplate T\n  loc l initial inv x <=\nend\nsystem p=T\n").unwrap_err();
        assert_eq!(err.line(), 3);
        assert!(matches!(err, ParseError::Syntax(_)));
    }

    #[test]
    fn duplicates_and_arity() {
        assert!(matches!(
            parse_document("clock x\nvar x 0..1\ntemplate T\n loc l initial\nend\nsystem p=T\n"),
            Err(ParseError::Model { line: 2, source: ModelError::Duplicate(_) })
        ));
        let err = parse_document("template T(id)\n loc l initial\nend\nsystem p=T\n").unwrap_err();
        assert!(matches!(err, ParseError::Model { source: ModelError::ArityMismatch { .. }, .. }));
    }
}
