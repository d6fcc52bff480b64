//! Templates, declarations and the compiled network.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::expr::{BinOp, CExpr, CmpOp, Expr};
use crate::zones::{Bound, ClockAtom, ClockConstraint};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("undeclared {kind} `{name}`")]
    Undeclared { kind: &'static str, name: String },
    #[error("duplicate declaration `{0}`")]
    Duplicate(String),
    #[error("template `{template}` expects {expected} argument(s), got {got}")]
    ArityMismatch { template: String, expected: usize, got: usize },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("unknown location `{location}` in template `{template}`")]
    UnknownLocation { template: String, location: String },
    #[error("expression `{0}` is not constant")]
    NonConstant(String),
    #[error("unsupported clock constraint `{0}`")]
    ClockConstraint(String),
    #[error("index {index} out of range for `{name}` of size {len}")]
    IndexOutOfRange { name: String, index: i64, len: usize },
    #[error("initial value {value} of `{name}` outside [{lo}, {hi}]")]
    InitialOutOfRange { name: String, value: i64, lo: i64, hi: i64 },
    #[error("initial state violates location invariants")]
    InitialInvariant,
}

/// `clock ⋈ bound`, where `⋈` is not `!=`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClockCmp {
    pub clock: String,
    pub op: CmpOp,
    pub bound: Expr,
}

impl ClockCmp {
    pub fn new(clock: &str, op: CmpOp, bound: Expr) -> Self {
        ClockCmp { clock: clock.to_string(), op, bound }
    }

    fn substitute(&self, p: &str, v: i64) -> Self {
        ClockCmp { clock: self.clock.clone(), op: self.op, bound: self.bound.substitute(p, v) }
    }

    pub fn as_expr(&self) -> Expr {
        Expr::cmp(self.op, Expr::Name(self.clock.clone()), self.bound.clone())
    }
}

/// Scalar or array variable with an inclusive integer domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub size: Option<usize>,
    pub lo: i64,
    pub hi: i64,
    pub init: i64,
}

impl VarDecl {
    pub fn boolean(name: &str, init: bool) -> Self {
        VarDecl { name: name.to_string(), size: None, lo: 0, hi: 1, init: i64::from(init) }
    }

    pub fn int(name: &str, lo: i64, hi: i64, init: i64) -> Self {
        VarDecl { name: name.to_string(), size: None, lo, hi, init }
    }

    pub fn bool_array(name: &str, size: usize) -> Self {
        VarDecl { name: name.to_string(), size: Some(size), lo: 0, hi: 1, init: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChanDecl {
    pub name: String,
    pub size: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Declarations {
    pub consts: Vec<(String, i64)>,
    pub clocks: Vec<String>,
    pub chans: Vec<ChanDecl>,
    pub vars: Vec<VarDecl>,
}

impl Declarations {
    pub fn constant(&self, name: &str) -> Option<i64> {
        self.consts.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn is_clock(&self, name: &str) -> bool {
        self.clocks.iter().any(|c| c == name)
    }

    pub fn is_var(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v.name == name)
    }

    pub fn chan(&self, name: &str) -> Option<&ChanDecl> {
        self.chans.iter().find(|c| c.name == name)
    }

    pub fn all_names(&self) -> impl Iterator<Item = &str> {
        self.consts
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.clocks.iter().map(String::as_str))
            .chain(self.chans.iter().map(|c| c.name.as_str()))
            .chain(self.vars.iter().map(|v| v.name.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Location {
    pub name: String,
    pub invariant: Vec<ClockCmp>,
    pub committed: bool,
}

impl Location {
    pub fn new(name: &str) -> Self {
        Location { name: name.to_string(), invariant: Vec::new(), committed: false }
    }

    pub fn with_invariant(mut self, inv: ClockCmp) -> Self {
        self.invariant.push(inv);
        self
    }

    pub fn committed(mut self) -> Self {
        self.committed = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyncDir {
    Send,
    Recv,
}

impl SyncDir {
    pub fn symbol(self) -> char {
        match self {
            SyncDir::Send => '!',
            SyncDir::Recv => '?',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sync {
    pub chan: String,
    pub index: Option<Expr>,
    pub dir: SyncDir,
}

impl Sync {
    pub fn send(chan: &str, index: Option<Expr>) -> Self {
        Sync { chan: chan.to_string(), index, dir: SyncDir::Send }
    }

    pub fn recv(chan: &str, index: Option<Expr>) -> Self {
        Sync { chan: chan.to_string(), index, dir: SyncDir::Recv }
    }

    pub fn render(&self) -> String {
        match &self.index {
            Some(i) => format!("{}[{}]{}", self.chan, i, self.dir.symbol()),
            None => format!("{}{}", self.chan, self.dir.symbol()),
        }
    }
}

/// `target[index] = value`. Targets naming clocks are resets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assign {
    pub target: String,
    pub index: Option<Expr>,
    pub value: Expr,
}

impl Assign {
    pub fn new(target: &str, value: Expr) -> Self {
        Assign { target: target.to_string(), index: None, value }
    }

    pub fn elem(target: &str, index: Expr, value: Expr) -> Self {
        Assign { target: target.to_string(), index: Some(index), value }
    }

    pub fn render(&self) -> String {
        match &self.index {
            Some(i) => format!("{}[{}] = {}", self.target, i, self.value),
            None => format!("{} = {}", self.target, self.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub clock_guard: Vec<ClockCmp>,
    pub data_guard: Option<Expr>,
    pub sync: Option<Sync>,
    pub updates: Vec<Assign>,
}

impl Edge {
    pub fn new(source: &str, target: &str) -> Self {
        Edge { source: source.to_string(), target: target.to_string(), clock_guard: Vec::new(), data_guard: None, sync: None, updates: Vec::new() }
    }

    pub fn clock(mut self, c: ClockCmp) -> Self {
        self.clock_guard.push(c);
        self
    }

    pub fn data(mut self, g: Expr) -> Self {
        self.data_guard = Some(match self.data_guard.take() {
            Some(prev) => Expr::and(prev, g),
            None => g,
        });
        self
    }

    pub fn sync(mut self, s: Sync) -> Self {
        self.sync = Some(s);
        self
    }

    pub fn update(mut self, a: Assign) -> Self {
        self.updates.push(a);
        self
    }

    /// Full guard as a single expression, clock atoms first.
    pub fn guard_expr(&self) -> Option<Expr> {
        let mut parts: Vec<Expr> = self.clock_guard.iter().map(ClockCmp::as_expr).collect();
        if let Some(d) = &self.data_guard {
            parts.push(d.clone());
        }
        parts.into_iter().reduce(Expr::and)
    }

    fn substitute(&self, p: &str, v: i64) -> Edge {
        Edge {
            source: self.source.clone(),
            target: self.target.clone(),
            clock_guard: self.clock_guard.iter().map(|c| c.substitute(p, v)).collect(),
            data_guard: self.data_guard.as_ref().map(|g| g.substitute(p, v)),
            sync: self.sync.as_ref().map(|s| Sync { chan: s.chan.clone(), index: s.index.as_ref().map(|i| i.substitute(p, v)), dir: s.dir }),
            updates: self
                .updates
                .iter()
                .map(|a| Assign { target: a.target.clone(), index: a.index.as_ref().map(|i| i.substitute(p, v)), value: a.value.substitute(p, v) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    pub name: String,
    pub params: Vec<String>,
    pub clocks: Vec<String>,
    pub vars: Vec<VarDecl>,
    pub locations: Vec<Location>,
    pub initial: String,
    pub edges: Vec<Edge>,
}

impl Template {
    pub fn new(name: &str) -> Self {
        Template {
            name: name.to_string(),
            params: Vec::new(),
            clocks: Vec::new(),
            vars: Vec::new(),
            locations: Vec::new(),
            initial: String::new(),
            edges: Vec::new(),
        }
    }

    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.name == name)
    }

    pub fn is_local_clock(&self, name: &str) -> bool {
        self.clocks.iter().any(|c| c == name)
    }

    /// Copy with parameter `param` replaced by `value`; `None` if there is
    /// no such parameter.
    pub fn bind(&self, param: &str, value: i64) -> Option<Template> {
        let k = self.params.iter().position(|p| p == param)?;
        let mut t = self.clone();
        t.params.remove(k);
        t.edges = self.edges.iter().map(|e| e.substitute(param, value)).collect();
        for loc in &mut t.locations {
            loc.invariant = loc.invariant.iter().map(|c| c.substitute(param, value)).collect();
        }
        Some(t)
    }

    /// True when no clock or clock-dependent annotation remains.
    pub fn is_untimed(&self) -> bool {
        self.clocks.is_empty() && self.locations.iter().all(|l| l.invariant.is_empty()) && self.edges.iter().all(|e| e.clock_guard.is_empty())
    }
}

/// Parameter-free copy of a template bound to an instance name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub template: String,
    pub args: Vec<i64>,
    pub body: Template,
}

pub fn instantiate(template: &Template, name: &str, args: &[i64]) -> Result<Instance, ModelError> {
    if args.len() != template.params.len() {
        return Err(ModelError::ArityMismatch { template: template.name.clone(), expected: template.params.len(), got: args.len() });
    }
    let mut body = template.clone();
    for (p, v) in template.params.iter().zip(args) {
        body = body.bind(p, *v).expect("declared parameter");
    }
    if body.location(&body.initial).is_none() {
        return Err(ModelError::UnknownLocation { template: template.name.clone(), location: body.initial.clone() });
    }
    Ok(Instance { name: name.to_string(), template: template.name.clone(), args: args.to_vec(), body })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceDecl {
    pub name: String,
    pub template: String,
    pub args: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarSlot {
    pub name: String,
    pub lo: i32,
    pub hi: i32,
    pub init: i32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LValue {
    Var(usize),
    Elem { base: usize, len: usize, index: CExpr },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CLocation {
    pub name: String,
    pub invariant: ClockConstraint,
    pub committed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CEdge {
    pub source: usize,
    pub target: usize,
    pub clock_guard: ClockConstraint,
    pub data_guard: Option<CExpr>,
    pub sync: Option<(usize, SyncDir)>,
    pub updates: Vec<(LValue, CExpr)>,
    pub resets: Vec<(usize, i32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CInstance {
    pub name: String,
    pub template: String,
    pub locations: Vec<CLocation>,
    pub edges: Vec<CEdge>,
    pub initial: usize,
}

impl CInstance {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }
}

/// A well-formed, instantiated network of timed automata.
#[derive(Clone, Debug)]
pub struct Network {
    pub decls: Declarations,
    pub templates: Vec<Template>,
    pub system: Vec<InstanceDecl>,
    /// Clock names; index 0 is the reference clock.
    pub clocks: Vec<String>,
    pub vars: Vec<VarSlot>,
    pub channels: Vec<String>,
    pub instances: Vec<CInstance>,
    arrays: HashMap<String, (usize, usize)>,
    scalars: HashMap<String, usize>,
    clock_index: HashMap<String, usize>,
    max_const: Vec<i32>,
    dead: Vec<Vec<Vec<usize>>>,
}

struct Scope<'a> {
    prefix: Option<&'a str>,
    local_clocks: &'a [String],
    local_vars: &'a [VarDecl],
}

impl Network {
    pub fn new(decls: Declarations, templates: Vec<Template>, system: Vec<InstanceDecl>) -> Result<Network, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for n in decls.all_names() {
            if !seen.insert(n.to_string()) {
                return Err(ModelError::Duplicate(n.to_string()));
            }
        }
        let mut tnames = std::collections::HashSet::new();
        for t in &templates {
            if !tnames.insert(t.name.clone()) {
                return Err(ModelError::Duplicate(t.name.clone()));
            }
        }
        let mut inames = std::collections::HashSet::new();
        for s in &system {
            if !inames.insert(s.name.clone()) {
                return Err(ModelError::Duplicate(s.name.clone()));
            }
        }

        let mut net = Network {
            decls,
            templates,
            system,
            clocks: vec!["0".to_string()],
            vars: Vec::new(),
            channels: Vec::new(),
            instances: Vec::new(),
            arrays: HashMap::new(),
            scalars: HashMap::new(),
            clock_index: HashMap::new(),
            max_const: Vec::new(),
            dead: Vec::new(),
        };

        let consts = net.decls.consts.clone();
        let lookup_const = |n: &str| consts.iter().find(|(c, _)| c == n).map(|(_, v)| *v);

        for c in net.decls.clocks.clone() {
            net.add_clock(c);
        }
        for v in net.decls.vars.clone() {
            net.add_var(&v.name, &v)?;
        }
        for ch in &net.decls.chans {
            match ch.size {
                Some(n) => {
                    for k in 0..n {
                        net.channels.push(format!("{}[{}]", ch.name, k));
                    }
                }
                None => net.channels.push(ch.name.clone()),
            }
        }

        let mut instances = Vec::new();
        for decl in &net.system {
            let t = net.templates.iter().find(|t| t.name == decl.template).ok_or_else(|| ModelError::UnknownTemplate(decl.template.clone()))?;
            instances.push(instantiate(t, &decl.name, &decl.args)?);
        }
        for inst in &instances {
            for c in &inst.body.clocks {
                net.add_clock(format!("{}.{}", inst.name, c));
            }
            for v in &inst.body.vars {
                net.add_var(&format!("{}.{}", inst.name, v.name), v)?;
            }
        }
        for inst in &instances {
            let scope = Scope { prefix: Some(&inst.name), local_clocks: &inst.body.clocks, local_vars: &inst.body.vars };
            let compiled = net.compile_instance(inst, &scope, &lookup_const)?;
            net.instances.push(compiled);
        }

        let mut max_const = vec![0i32; net.clocks.len()];
        fn note(max_const: &mut [i32], g: &ClockConstraint) {
            for a in &g.atoms {
                let c = a.bound.value().abs();
                for k in [a.i, a.j] {
                    if k != 0 {
                        max_const[k] = max_const[k].max(c);
                    }
                }
            }
        }
        for inst in &net.instances {
            for l in &inst.locations {
                note(&mut max_const, &l.invariant);
            }
            for e in &inst.edges {
                note(&mut max_const, &e.clock_guard);
                for (c, v) in &e.resets {
                    max_const[*c] = max_const[*c].max(v.abs());
                }
            }
        }
        net.max_const = max_const;
        net.dead = net.instances.iter().map(|inst| net.dead_table(inst)).collect();
        Ok(net)
    }

    /// Local clocks of `inst` that are reset on every path before being
    /// read again, per location.
    fn dead_table(&self, inst: &CInstance) -> Vec<Vec<usize>> {
        let prefix = format!("{}.", inst.name);
        let local: Vec<usize> = (1..self.clocks.len()).filter(|k| self.clocks[*k].starts_with(&prefix)).collect();
        let reads = |g: &ClockConstraint, out: &mut BTreeSet<usize>| {
            for a in &g.atoms {
                out.extend([a.i, a.j].into_iter().filter(|k| local.contains(k)));
            }
        };
        let mut live: Vec<BTreeSet<usize>> = inst
            .locations
            .iter()
            .map(|l| {
                let mut s = BTreeSet::new();
                reads(&l.invariant, &mut s);
                s
            })
            .collect();
        loop {
            let mut changed = false;
            for e in &inst.edges {
                let mut add = BTreeSet::new();
                reads(&e.clock_guard, &mut add);
                add.extend(live[e.target].iter().filter(|c| !e.resets.iter().any(|(r, _)| r == *c)));
                let before = live[e.source].len();
                live[e.source].extend(add);
                changed |= live[e.source].len() != before;
            }
            if !changed {
                break;
            }
        }
        live.iter().map(|l| local.iter().copied().filter(|c| !l.contains(c)).collect()).collect()
    }

    fn add_clock(&mut self, name: String) {
        self.clock_index.insert(name.clone(), self.clocks.len());
        self.clocks.push(name);
    }

    fn add_var(&mut self, name: &str, v: &VarDecl) -> Result<(), ModelError> {
        if v.init < v.lo || v.init > v.hi {
            return Err(ModelError::InitialOutOfRange { name: name.to_string(), value: v.init, lo: v.lo, hi: v.hi });
        }
        let slot = |n: String| VarSlot { name: n, lo: v.lo as i32, hi: v.hi as i32, init: v.init as i32 };
        match v.size {
            Some(n) => {
                self.arrays.insert(name.to_string(), (self.vars.len(), n));
                for k in 0..n {
                    self.vars.push(slot(format!("{name}[{k}]")));
                }
            }
            None => {
                self.scalars.insert(name.to_string(), self.vars.len());
                self.vars.push(slot(name.to_string()));
            }
        }
        Ok(())
    }

    fn qualify(scope: &Scope, name: &str, local: bool) -> String {
        match (local, scope.prefix) {
            (true, Some(p)) => format!("{p}.{name}"),
            _ => name.to_string(),
        }
    }

    fn resolve_clock(&self, scope: &Scope, name: &str) -> Option<usize> {
        let local = scope.local_clocks.iter().any(|c| c == name);
        self.clock_index.get(&Self::qualify(scope, name, local)).copied()
    }

    fn compile_expr(&self, scope: &Scope, e: &Expr, consts: &dyn Fn(&str) -> Option<i64>) -> Result<CExpr, ModelError> {
        Ok(match e {
            Expr::Int(v) => CExpr::Const(*v),
            Expr::Bool(b) => CExpr::Const(i64::from(*b)),
            Expr::Name(n) => {
                if let Some(v) = consts(n) {
                    CExpr::Const(v)
                } else {
                    let local = scope.local_vars.iter().any(|v| &v.name == n);
                    let q = Self::qualify(scope, n, local);
                    match self.scalars.get(&q) {
                        Some(k) => CExpr::Var(*k),
                        None => {
                            let kind = if self.resolve_clock(scope, n).is_some() { "variable (found clock)" } else { "identifier" };
                            return Err(ModelError::Undeclared { kind, name: n.clone() });
                        }
                    }
                }
            }
            Expr::Index(n, i) => {
                let local = scope.local_vars.iter().any(|v| &v.name == n);
                let q = Self::qualify(scope, n, local);
                let (base, len) = *self.arrays.get(&q).ok_or_else(|| ModelError::Undeclared { kind: "array", name: n.clone() })?;
                let index = self.compile_expr(scope, i, consts)?;
                if let CExpr::Const(k) = index {
                    if k < 0 || k as usize >= len {
                        return Err(ModelError::IndexOutOfRange { name: n.clone(), index: k, len });
                    }
                    CExpr::Var(base + k as usize)
                } else {
                    CExpr::Elem { base, len, index: Box::new(index) }
                }
            }
            Expr::Not(x) => CExpr::Not(Box::new(self.compile_expr(scope, x, consts)?)),
            Expr::Neg(x) => CExpr::Neg(Box::new(self.compile_expr(scope, x, consts)?)),
            Expr::Bin(op, a, b) => {
                let a = self.compile_expr(scope, a, consts)?;
                let b = self.compile_expr(scope, b, consts)?;
                if let (CExpr::Const(x), CExpr::Const(y)) = (&a, &b) {
                    CExpr::Const(super::expr::apply_bin(*op, *x, *y))
                } else {
                    CExpr::Bin(*op, Box::new(a), Box::new(b))
                }
            }
        })
    }

    fn const_of(&self, scope: &Scope, e: &Expr, consts: &dyn Fn(&str) -> Option<i64>) -> Result<i64, ModelError> {
        match self.compile_expr(scope, e, consts) {
            Ok(CExpr::Const(v)) => Ok(v),
            Ok(_) => Err(ModelError::NonConstant(e.to_string())),
            Err(ModelError::Undeclared { .. }) => Err(ModelError::NonConstant(e.to_string())),
            Err(err) => Err(err),
        }
    }

    fn compile_clock_cmp(&self, scope: &Scope, c: &ClockCmp, consts: &dyn Fn(&str) -> Option<i64>) -> Result<Vec<ClockAtom>, ModelError> {
        let x = self.resolve_clock(scope, &c.clock).ok_or_else(|| ModelError::Undeclared { kind: "clock", name: c.clock.clone() })?;
        let k = self.const_of(scope, &c.bound, consts)? as i32;
        clock_atoms(x, c.op, k).ok_or_else(|| ModelError::ClockConstraint(c.as_expr().to_string()))
    }

    fn compile_instance(&self, inst: &Instance, scope: &Scope, consts: &dyn Fn(&str) -> Option<i64>) -> Result<CInstance, ModelError> {
        let t = &inst.body;
        let mut locations = Vec::new();
        for l in &t.locations {
            let mut atoms = Vec::new();
            for c in &l.invariant {
                atoms.extend(self.compile_clock_cmp(scope, c, consts)?);
            }
            locations.push(CLocation { name: l.name.clone(), invariant: atoms.into(), committed: l.committed });
        }
        let loc_index = |n: &str| {
            t.locations
                .iter()
                .position(|l| l.name == n)
                .ok_or_else(|| ModelError::UnknownLocation { template: t.name.clone(), location: n.to_string() })
        };
        let mut edges = Vec::new();
        for e in &t.edges {
            let mut atoms = Vec::new();
            for c in &e.clock_guard {
                atoms.extend(self.compile_clock_cmp(scope, c, consts)?);
            }
            let data_guard = e.data_guard.as_ref().map(|g| self.compile_expr(scope, g, consts)).transpose()?;
            let sync = match &e.sync {
                None => None,
                Some(s) => {
                    let decl = self.decls.chan(&s.chan).ok_or_else(|| ModelError::Undeclared { kind: "channel", name: s.chan.clone() })?;
                    let full = match (&s.index, decl.size) {
                        (Some(i), Some(n)) => {
                            let k = self.const_of(scope, i, consts)?;
                            if k < 0 || k as usize >= n {
                                return Err(ModelError::IndexOutOfRange { name: s.chan.clone(), index: k, len: n });
                            }
                            format!("{}[{}]", s.chan, k)
                        }
                        (None, None) => s.chan.clone(),
                        _ => return Err(ModelError::Undeclared { kind: "channel", name: s.render() }),
                    };
                    let idx = self.channels.iter().position(|c| *c == full).expect("channel flattened");
                    Some((idx, s.dir))
                }
            };
            let mut updates = Vec::new();
            let mut resets = Vec::new();
            for a in &e.updates {
                if a.index.is_none() {
                    if let Some(x) = self.resolve_clock(scope, &a.target) {
                        let v = self.const_of(scope, &a.value, consts)?;
                        resets.push((x, v as i32));
                        continue;
                    }
                }
                let lv = match &a.index {
                    None => match self.compile_expr(scope, &Expr::Name(a.target.clone()), &|_| None)? {
                        CExpr::Var(k) => LValue::Var(k),
                        _ => return Err(ModelError::Undeclared { kind: "variable", name: a.target.clone() }),
                    },
                    Some(i) => match self.compile_expr(scope, &Expr::Index(a.target.clone(), Box::new(i.clone())), consts)? {
                        CExpr::Var(k) => LValue::Var(k),
                        CExpr::Elem { base, len, index } => LValue::Elem { base, len, index: *index },
                        _ => unreachable!(),
                    },
                };
                updates.push((lv, self.compile_expr(scope, &a.value, consts)?));
            }
            edges.push(CEdge {
                source: loc_index(&e.source)?,
                target: loc_index(&e.target)?,
                clock_guard: atoms.into(),
                data_guard,
                sync,
                updates,
                resets,
            });
        }
        Ok(CInstance { name: inst.name.clone(), template: inst.template.clone(), locations, edges, initial: loc_index(&t.initial)? })
    }

    /// Compiles an expression over global and qualified (`inst.var`) names.
    pub fn compile_global(&self, e: &Expr) -> Result<CExpr, ModelError> {
        let scope = Scope { prefix: None, local_clocks: &[], local_vars: &[] };
        let consts = |n: &str| self.decls.constant(n);
        self.compile_expr(&scope, e, &consts)
    }

    pub fn const_value(&self, e: &Expr) -> Option<i64> {
        e.eval_const(&|n| self.decls.constant(n))
    }

    pub fn num_clocks(&self) -> usize {
        self.clocks.len() - 1
    }

    /// Largest constant compared with each clock (index 0 unused).
    pub fn max_constants(&self) -> &[i32] {
        &self.max_const
    }

    /// Clocks of instance `inst` whose value is irrelevant in location `loc`.
    pub fn dead_clocks(&self, inst: usize, loc: usize) -> &[usize] {
        &self.dead[inst][loc]
    }

    pub fn instance_index(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.name == name)
    }

    pub fn clock(&self, name: &str) -> Option<usize> {
        self.clock_index.get(name).copied()
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.scalars.get(name).copied()
    }

    pub fn array(&self, name: &str) -> Option<(usize, usize)> {
        self.arrays.get(name).copied()
    }

    pub fn channel_base(&self, chan: usize) -> &str {
        let c = &self.channels[chan];
        c.split('[').next().unwrap_or(c)
    }

    pub fn initial_vars(&self) -> Vec<i32> {
        self.vars.iter().map(|v| v.init).collect()
    }

    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }
}

/// Atoms for `x ⋈ k`; `None` for `!=`.
pub fn clock_atoms(x: usize, op: CmpOp, k: i32) -> Option<Vec<ClockAtom>> {
    Some(match op {
        CmpOp::Lt => vec![ClockAtom::upper(x, Bound::lt(k))],
        CmpOp::Le => vec![ClockAtom::upper(x, Bound::le(k))],
        CmpOp::Eq => vec![ClockAtom::upper(x, Bound::le(k)), ClockAtom::lower(x, k, false)],
        CmpOp::Ge => vec![ClockAtom::lower(x, k, false)],
        CmpOp::Gt => vec![ClockAtom::lower(x, k, true)],
        CmpOp::Ne => return None,
    })
}

/// Splits a guard expression into clock comparisons and the data remainder.
pub fn split_guard(e: &Expr, is_clock: &dyn Fn(&str) -> bool) -> Result<(Vec<ClockCmp>, Option<Expr>), String> {
    let mut clocks = Vec::new();
    let mut data: Vec<Expr> = Vec::new();
    for c in e.conjuncts() {
        if let Expr::Bin(BinOp::Cmp(op), a, b) = c {
            if let Expr::Name(n) = a.as_ref() {
                if is_clock(n) {
                    if *op == CmpOp::Ne {
                        return Err(format!("clock disequality `{c}` is not supported"));
                    }
                    clocks.push(ClockCmp::new(n, *op, (**b).clone()));
                    continue;
                }
            }
        }
        let mut names = Vec::new();
        c.names(&mut names);
        if let Some(n) = names.iter().find(|n| is_clock(n)) {
            return Err(format!("clock `{n}` must appear as `{n} op constant` in a top-level conjunct"));
        }
        data.push(c.clone());
    }
    Ok((clocks, data.into_iter().reduce(Expr::and)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spatial_like() -> Template {
        let mut t = Template::new("Spatial");
        t.params = vec!["id".into()];
        t.clocks = vec!["x".into()];
        t.locations = vec![Location::new("init"), Location::new("wait").with_invariant(ClockCmp::new("x", CmpOp::Le, Expr::Int(5)))];
        t.initial = "init".into();
        t.edges = vec![Edge::new("init", "wait").update(Assign::elem("c", Expr::name("id"), Expr::Int(1))).update(Assign::new("x", Expr::Int(0)))];
        t
    }

    fn decls() -> Declarations {
        Declarations { vars: vec![VarDecl::bool_array("c", 4)], ..Default::default() }
    }

    #[test]
    fn instantiation_substitutes_parameter() {
        let inst = instantiate(&spatial_like(), "s2", &[2]).unwrap();
        assert_eq!(inst.body.edges[0].updates[0].index, Some(Expr::Int(2)));
        let net =
            Network::new(decls(), vec![spatial_like()], vec![InstanceDecl { name: "s2".into(), template: "Spatial".into(), args: vec![2] }]).unwrap();
        let c2 = net.array("c").unwrap().0 + 2;
        assert_eq!(net.instances[0].edges[0].updates[0].0, LValue::Var(c2));
    }

    #[test]
    fn parameterless_template_is_identical() {
        let mut t = spatial_like();
        t.params.clear();
        t.edges[0].updates[0].index = Some(Expr::Int(1));
        let inst = instantiate(&t, "s", &[]).unwrap();
        assert_eq!(inst.body, t);
    }

    #[test]
    fn clocks_are_renamed_apart() {
        let net = Network::new(
            decls(),
            vec![spatial_like()],
            vec![
                InstanceDecl { name: "s1".into(), template: "Spatial".into(), args: vec![1] },
                InstanceDecl { name: "s2".into(), template: "Spatial".into(), args: vec![2] },
            ],
        )
        .unwrap();
        assert_eq!(net.clocks, vec!["0", "s1.x", "s2.x"]);
        assert_eq!(net.instances[0].edges[0].resets, vec![(1, 0)]);
        assert_eq!(net.instances[1].edges[0].resets, vec![(2, 0)]);
        assert_eq!(net.max_constants(), &[0, 5, 5]);
    }

    #[test]
    fn arity_mismatch() {
        let err = instantiate(&spatial_like(), "s", &[]).unwrap_err();
        assert_eq!(err, ModelError::ArityMismatch { template: "Spatial".into(), expected: 1, got: 0 });
    }

    #[test]
    fn guard_splitting() {
        let g = Expr::and(
            Expr::and(Expr::cmp(CmpOp::Gt, Expr::name("x"), Expr::Int(0)), Expr::cmp(CmpOp::Lt, Expr::name("x"), Expr::name("t_dl"))),
            Expr::not(Expr::name("pc")),
        );
        let (c, d) = split_guard(&g, &|n| n == "x").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(d, Some(Expr::not(Expr::name("pc"))));
        let bad = Expr::or(Expr::cmp(CmpOp::Gt, Expr::name("x"), Expr::Int(0)), Expr::name("pc"));
        assert!(split_guard(&bad, &|n| n == "x").is_err());
    }
}
