//! Name resolution, typing and the static legality rules.
//!
//! Reals never reach an `if` condition, a loop bound, an index or an array
//! size, so every control decision is an integer computation that the
//! elaborator can run at compile time.

use std::collections::HashMap;

use super::consts::{eval_const, ConstEnv};
use super::typed::*;
use crate::diag::{Diagnostic, Span};
use crate::frontend::ast::{self, BinOp, ExprKind, Selector, StmtKind, SyntaxTree, TypeSpec};

#[derive(Debug, Clone, Copy)]
enum Sym {
    Const(i64),
    Param(SpaceId),
    Real(VarId),
    Int(IntId),
}

enum Typed {
    Int(IExpr),
    Real(RExpr),
}

struct Checker<'a> {
    consts: &'a ConstEnv,
    scopes: Vec<HashMap<String, Sym>>,
    vars: Vec<RealVar>,
    ints: Vec<IntVar>,
    spaces: Vec<Space>,
    discards: Vec<DiscardRule>,
    errors: Vec<Diagnostic>,
    next_stmt: u32,
    in_condition: bool,
}

/// Type-checks a parsed tree against folded constants.
pub fn typecheck(tree: &SyntaxTree, consts: &ConstEnv) -> Result<Program, Vec<Diagnostic>> {
    let mut ck = Checker {
        consts,
        scopes: vec![HashMap::new()],
        vars: Vec::new(),
        ints: Vec::new(),
        spaces: Vec::new(),
        discards: Vec::new(),
        errors: Vec::new(),
        next_stmt: 1,
        in_condition: false,
    };
    for (name, v) in consts.iter() {
        ck.scopes[0].insert(name.to_string(), Sym::Const(v));
    }
    for c in &tree.constants {
        ck.check_name(&c.name, c.span);
    }
    for p in &tree.parameters {
        ck.check_name(&p.name, p.span);
        let size = ck.const_size(&p.size, p.span, "parameter size");
        let id = ck.spaces.len();
        ck.spaces.push(Space {
            name: p.name.clone(),
            size,
            kind: SpaceKind::Parameter,
        });
        ck.scopes[0].insert(p.name.clone(), Sym::Param(id));
    }

    let f = &tree.function;
    ck.check_name(&f.name, f.span);
    if crate::codegen::c::is_reserved_c_name(&f.name) {
        ck.err(
            f.span,
            format!("function name `{}` is reserved in C", f.name),
        );
    }
    let (ret_size, ret_scalar) = match &f.ret {
        TypeSpec::Real => (1, true),
        TypeSpec::RealArray(n) => (ck.const_size(n, f.span, "array size"), false),
        TypeSpec::Int => {
            ck.err(f.span, "function must return `real` or `real[...]`");
            (1, true)
        }
    };
    let ret = ck.new_var(&f.name, ret_size, ret_scalar, VarRole::Return, f.span);
    let mut args = Vec::new();
    for a in &f.args {
        ck.check_name(&a.name, a.span);
        let (size, scalar) = match &a.ty {
            TypeSpec::Real => (1, true),
            TypeSpec::RealArray(n) => (ck.const_size(n, a.span, "array size"), false),
            TypeSpec::Int => {
                ck.err(
                    a.span,
                    format!("argument `{}` must be `real` or `real[...]`", a.name),
                );
                (1, true)
            }
        };
        args.push(ck.new_var(&a.name, size, scalar, VarRole::Argument, a.span));
    }
    for &a in &args {
        if ck.vars[a].scalar {
            ck.spaces.push(Space {
                name: ck.vars[a].name.clone(),
                size: 1,
                kind: SpaceKind::Argument(a),
            });
        }
    }

    let body = ck.block(&f.body);

    let mut vars = ck.vars;
    for v in vars.iter_mut() {
        v.bearing = v.role != VarRole::Argument || v.scalar;
    }
    mark_deriv_targets(&body, &mut vars);

    if !ck.errors.is_empty() {
        return Err(ck.errors);
    }
    Ok(Program {
        name: f.name.clone(),
        ret,
        args,
        vars,
        ints: ck.ints,
        spaces: ck.spaces,
        body,
        discards: ck.discards,
        consts: consts.clone(),
        stmt_count: ck.next_stmt,
    })
}

fn mark_deriv_targets(body: &[Stmt], vars: &mut [RealVar]) {
    for s in body {
        match s {
            Stmt::DerivAssign { target, .. } => vars[target.var].bearing = true,
            Stmt::For { body, .. } => mark_deriv_targets(body, vars),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                mark_deriv_targets(then_body, vars);
                mark_deriv_targets(else_body, vars);
            }
            _ => {}
        }
    }
}

impl<'a> Checker<'a> {
    fn err(&mut self, span: Span, msg: impl Into<String>) {
        self.errors.push(Diagnostic::error(span, msg));
    }

    fn check_name(&mut self, name: &str, span: Span) {
        if Builtin::from_name(name).is_some() {
            self.err(
                span,
                format!("`{name}` is a builtin function and cannot be declared"),
            );
        }
    }

    fn lookup(&self, name: &str) -> Option<Sym> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, sym: Sym, span: Span) {
        self.check_name(name, span);
        if self.lookup(name).is_some() {
            self.err(
                span,
                format!("duplicate declaration: `{name}` shadows an existing name"),
            );
        }
        self.scopes
            .last_mut()
            .unwrap()
            .insert(name.to_string(), sym);
    }

    fn new_var(
        &mut self,
        name: &str,
        size: usize,
        scalar: bool,
        role: VarRole,
        span: Span,
    ) -> VarId {
        if self.lookup(name).is_some() {
            self.err(
                span,
                format!("duplicate declaration: `{name}` shadows an existing name"),
            );
        }
        let id = self.vars.len();
        self.vars.push(RealVar {
            name: name.to_string(),
            size,
            scalar,
            role,
            bearing: true,
            span,
        });
        self.scopes[0].insert(name.to_string(), Sym::Real(id));
        id
    }

    fn const_size(&mut self, e: &ast::Expr, span: Span, what: &str) -> usize {
        match eval_const(e, self.consts) {
            Ok(v) if v < 0 => {
                self.err(span, format!("negative {what} {v}"));
                0
            }
            Ok(v) => v as usize,
            Err(d) => {
                let msg = if d.message.starts_with("non-constant") {
                    format!("non-constant {what}: {}", d.message)
                } else {
                    d.message
                };
                self.err(d.span, msg);
                0
            }
        }
    }

    fn stmt_id(&mut self) -> StmtId {
        let id = StmtId(self.next_stmt);
        self.next_stmt += 1;
        id
    }

    fn block(&mut self, body: &[ast::Stmt]) -> Vec<Stmt> {
        self.scopes.push(HashMap::new());
        let mut out = Vec::new();
        for s in body {
            self.stmt(s, &mut out);
        }
        self.scopes.pop();
        out
    }

    fn stmt(&mut self, s: &ast::Stmt, out: &mut Vec<Stmt>) {
        let span = s.span;
        match &s.kind {
            StmtKind::VarDecl { ty, name, init } => match ty {
                TypeSpec::Int => {
                    let value = match init {
                        Some(e) => self.int_expr(e, "integer variable initializer"),
                        None => IExpr::Lit(0),
                    };
                    let id = self.ints.len();
                    self.ints.push(IntVar {
                        name: name.clone(),
                        role: IntRole::Local,
                    });
                    self.declare(name, Sym::Int(id), span);
                    out.push(Stmt::IntAssign {
                        var: id,
                        value,
                        span,
                    });
                }
                TypeSpec::Real | TypeSpec::RealArray(_) => {
                    let (size, scalar) = match ty {
                        TypeSpec::RealArray(n) => (self.const_size(n, span, "array size"), false),
                        _ => (1, true),
                    };
                    let value = match init {
                        Some(e) => self.real_expr(e),
                        None => RExpr::Lit(0.0),
                    };
                    let id = self.vars.len();
                    self.vars.push(RealVar {
                        name: name.clone(),
                        size,
                        scalar,
                        role: VarRole::Local,
                        bearing: true,
                        span,
                    });
                    self.declare(name, Sym::Real(id), span);
                    let target = Place {
                        var: id,
                        sel: self.whole_sel(id),
                        span,
                    };
                    self.check_lengths(&target.sel, &value, span);
                    let id = self.stmt_id();
                    out.push(Stmt::Assign {
                        id,
                        target,
                        accumulate: false,
                        value,
                        span,
                    });
                }
            },
            StmtKind::Assign { target, op, value } => match self.lookup(&target.name) {
                Some(Sym::Int(id)) => {
                    if self.ints[id].role == IntRole::LoopIndex {
                        self.err(
                            target.span,
                            format!("loop index `{}` is immutable", target.name),
                        );
                    }
                    if *op == ast::AssignOp::Add {
                        self.err(span, "`+=` requires a real target");
                    }
                    if target.sel != Selector::Whole {
                        self.err(
                            target.span,
                            format!("integer `{}` cannot be indexed", target.name),
                        );
                    }
                    let value = self.int_expr(value, "integer assignment");
                    out.push(Stmt::IntAssign {
                        var: id,
                        value,
                        span,
                    });
                }
                Some(Sym::Real(_)) => {
                    let value = self.real_expr(value);
                    let Some(mut place) = self.place(target) else {
                        return;
                    };
                    if self.vars[place.var].role == VarRole::Argument {
                        self.err(
                            target.span,
                            format!("argument `{}` is read-only", target.name),
                        );
                    }
                    // `v[a : ]` as a target ends where the value does.
                    if let (Selector::Slice(Some(_), None), Sel::Range(lo, hi), Some(len)) =
                        (&target.sel, &mut place.sel, value.len())
                    {
                        let end = IExpr::bin(BinOp::Add, lo.clone(), len);
                        let size = self.vars[place.var].size;
                        if let (Some(a), Some(b)) = (lo.as_lit(), end.as_lit()) {
                            if b > size as i64 {
                                self.err(
                                    target.span,
                                    format!("index out of bounds: slice `{}[{a} : {b}]` with size {size}", target.name),
                                );
                            }
                        }
                        *hi = end;
                    }
                    self.check_lengths(&place.sel, &value, span);
                    let id = self.stmt_id();
                    out.push(Stmt::Assign {
                        id,
                        target: place,
                        accumulate: *op == ast::AssignOp::Add,
                        value,
                        span,
                    });
                }
                Some(Sym::Param(_)) => self.err(
                    target.span,
                    format!("parameter `{}` used as a value", target.name),
                ),
                Some(Sym::Const(_)) => self.err(
                    target.span,
                    format!("cannot assign to constant `{}`", target.name),
                ),
                None => self.err(target.span, format!("undefined name `{}`", target.name)),
            },
            StmtKind::DerivAssign { target, wrt, value } => {
                let Some(place) = self.deriv_numerator(target) else {
                    return;
                };
                let Some(wrt) = self.space_sel(wrt) else {
                    return;
                };
                let value = self.real_expr(value);
                let block = deriv_len(&place.sel, &wrt.sel);
                if let (Some(want), Some(got)) = (
                    block.as_ref().and_then(IExpr::as_lit),
                    value.len().as_ref().and_then(IExpr::as_lit),
                ) {
                    if want != got {
                        self.err(
                            span,
                            format!("slice length mismatch: derivative block has {want} entries, right-hand side has {got}"),
                        );
                    }
                } else if block.is_none() && value.len().is_some() {
                    self.err(
                        span,
                        "slice length mismatch: scalar derivative assigned a vector",
                    );
                }
                let id = self.stmt_id();
                out.push(Stmt::DerivAssign {
                    id,
                    target: place,
                    wrt,
                    value,
                    span,
                });
            }
            StmtKind::Discard { target, wrt } => {
                let Some(place) = self.deriv_numerator(target) else {
                    return;
                };
                if target.sel != Selector::Whole {
                    self.err(target.span, "`discard` applies to whole variables");
                }
                let Some(wrt) = self.space_sel(wrt) else {
                    return;
                };
                let size = self.spaces[wrt.space].size;
                let indices = match &wrt.sel {
                    Sel::Range(lo, hi)
                        if lo.as_lit() == Some(0) && hi.as_lit() == Some(size as i64) =>
                    {
                        None
                    }
                    Sel::Cell(i) => match i.as_lit() {
                        Some(i) => Some(vec![i as u32]),
                        None => {
                            self.err(wrt.span, "`discard` indices must be constant");
                            return;
                        }
                    },
                    Sel::Range(lo, hi) => match (lo.as_lit(), hi.as_lit()) {
                        (Some(lo), Some(hi)) => Some((lo as u32..hi as u32).collect()),
                        _ => {
                            self.err(wrt.span, "`discard` indices must be constant");
                            return;
                        }
                    },
                };
                self.discards.push(DiscardRule {
                    var: place.var,
                    space: wrt.space,
                    indices,
                    span,
                });
            }
            StmtKind::For { var, lo, hi, body } => {
                let lo = self.bound(lo);
                let hi = self.bound(hi);
                if let (Some(a), Some(b)) = (lo.as_lit(), hi.as_lit()) {
                    if a > b {
                        self.err(span, format!("reversed loop bounds [{a} : {b}]"));
                    }
                }
                let id = self.ints.len();
                self.ints.push(IntVar {
                    name: var.clone(),
                    role: IntRole::LoopIndex,
                });
                self.scopes.push(HashMap::new());
                self.declare(var, Sym::Int(id), span);
                let body = self.block(body);
                self.scopes.pop();
                out.push(Stmt::For {
                    var: id,
                    lo,
                    hi,
                    body,
                    span,
                });
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.in_condition = true;
                let cond = self.int_expr(cond, "condition");
                self.in_condition = false;
                let then_body = self.block(then_body);
                let else_body = else_body
                    .as_ref()
                    .map(|b| self.block(b))
                    .unwrap_or_default();
                out.push(Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    span,
                });
            }
        }
    }

    fn bound(&mut self, e: &ast::Expr) -> IExpr {
        match self.expr(e) {
            Some(Typed::Int(i)) => i,
            Some(Typed::Real(_)) => {
                self.err(
                    e.span,
                    "non-constant bound: loop bounds must be integer expressions",
                );
                IExpr::Lit(0)
            }
            None => IExpr::Lit(0),
        }
    }

    fn whole_sel(&self, var: VarId) -> Sel {
        let v = &self.vars[var];
        if v.scalar {
            Sel::Cell(IExpr::Lit(0))
        } else {
            Sel::Range(IExpr::Lit(0), IExpr::Lit(v.size as i64))
        }
    }

    fn check_lengths(&mut self, target: &Sel, value: &RExpr, span: Span) {
        match (target.len(), value.len()) {
            (None, Some(_)) => self.err(
                span,
                "slice length mismatch: a vector cannot be assigned to a single cell",
            ),
            (Some(t), Some(v)) => {
                if let (Some(a), Some(b)) = (t.as_lit(), v.as_lit()) {
                    if a != b {
                        self.err(span, format!("slice length mismatch: {a} vs {b}"));
                    }
                }
            }
            _ => {}
        }
    }

    fn int_expr(&mut self, e: &ast::Expr, what: &str) -> IExpr {
        match self.expr(e) {
            Some(Typed::Int(i)) => i,
            Some(Typed::Real(_)) => {
                if self.in_condition {
                    self.err(e.span, "real in condition");
                } else {
                    self.err(e.span, format!("real value used in {what}"));
                }
                IExpr::Lit(0)
            }
            None => IExpr::Lit(0),
        }
    }

    fn real_expr(&mut self, e: &ast::Expr) -> RExpr {
        match self.expr(e) {
            Some(Typed::Int(i)) => RExpr::Int(i),
            Some(Typed::Real(r)) => r,
            None => RExpr::Lit(0.0),
        }
    }

    fn index(&mut self, e: &ast::Expr) -> Option<IExpr> {
        match self.expr(e)? {
            Typed::Int(i) => Some(i),
            Typed::Real(_) => {
                self.err(e.span, "array index must be an integer expression");
                None
            }
        }
    }

    /// Resolves a selector against a vector of `size` cells.
    fn selector(
        &mut self,
        sel: &Selector,
        size: usize,
        scalar: bool,
        name: &str,
        span: Span,
    ) -> Option<Sel> {
        if scalar {
            if *sel != Selector::Whole {
                self.err(span, format!("`{name}` is a scalar and cannot be indexed"));
                return None;
            }
            return Some(Sel::Cell(IExpr::Lit(0)));
        }
        match sel {
            Selector::Whole => Some(Sel::Range(IExpr::Lit(0), IExpr::Lit(size as i64))),
            Selector::Index(i) => {
                let i = self.index(i)?;
                if let Some(v) = i.as_lit() {
                    if v < 0 || v as usize >= size {
                        self.err(
                            span,
                            format!("index out of bounds: `{name}[{v}]` with size {size}"),
                        );
                    }
                }
                Some(Sel::Cell(i))
            }
            Selector::Slice(lo, hi) => {
                let lo = match lo {
                    Some(e) => self.index(e)?,
                    None => IExpr::Lit(0),
                };
                let hi = match hi {
                    Some(e) => self.index(e)?,
                    None => IExpr::Lit(size as i64),
                };
                if let (Some(a), Some(b)) = (lo.as_lit(), hi.as_lit()) {
                    if a > b {
                        self.err(span, format!("reversed slice `{name}[{a} : {b}]`"));
                    } else if a < 0 || b as usize > size {
                        self.err(
                            span,
                            format!(
                                "index out of bounds: slice `{name}[{a} : {b}]` with size {size}"
                            ),
                        );
                    }
                }
                Some(Sel::Range(lo, hi))
            }
        }
    }

    fn place(&mut self, p: &ast::Place) -> Option<Place> {
        match self.lookup(&p.name) {
            Some(Sym::Real(var)) => {
                let v = &self.vars[var];
                let (size, scalar) = (v.size, v.scalar);
                let sel = self.selector(&p.sel, size, scalar, &p.name, p.span)?;
                Some(Place {
                    var,
                    sel,
                    span: p.span,
                })
            }
            Some(Sym::Param(_)) => {
                self.err(p.span, format!("parameter `{}` used as a value", p.name));
                None
            }
            Some(_) => {
                self.err(p.span, format!("`{}` is not a real variable", p.name));
                None
            }
            None => {
                self.err(p.span, format!("undefined name `{}`", p.name));
                None
            }
        }
    }

    fn deriv_numerator(&mut self, p: &ast::Place) -> Option<Place> {
        match self.lookup(&p.name) {
            Some(Sym::Int(_)) | Some(Sym::Const(_)) => {
                self.err(p.span, format!("derivative of integer `{}`", p.name));
                None
            }
            _ => self.place(p),
        }
    }

    fn space_sel(&mut self, p: &ast::Place) -> Option<SpaceSel> {
        let space = match self.lookup(&p.name) {
            Some(Sym::Param(s)) => s,
            Some(Sym::Real(v)) => match self
                .spaces
                .iter()
                .position(|s| s.kind == SpaceKind::Argument(v))
            {
                Some(s) => s,
                None => {
                    self.err(
                        p.span,
                        format!("`{}` cannot be differentiated against: expected a parameter or a scalar real argument", p.name),
                    );
                    return None;
                }
            },
            Some(_) => {
                self.err(
                    p.span,
                    format!("`{}` cannot be differentiated against: expected a parameter or a scalar real argument", p.name),
                );
                return None;
            }
            None => {
                self.err(p.span, format!("undefined name `{}`", p.name));
                return None;
            }
        };
        let s = &self.spaces[space];
        let (size, scalar) = (s.size, s.is_scalar());
        let sel = self.selector(&p.sel, size, scalar, &p.name, p.span)?;
        Some(SpaceSel {
            space,
            sel,
            span: p.span,
        })
    }

    fn expr(&mut self, e: &ast::Expr) -> Option<Typed> {
        match &e.kind {
            ExprKind::Int(v) => Some(Typed::Int(IExpr::Lit(*v))),
            ExprKind::Real(v) => Some(Typed::Real(RExpr::Lit(*v))),
            ExprKind::Place(p) => match self.lookup(&p.name) {
                Some(Sym::Const(v)) if p.sel == Selector::Whole => Some(Typed::Int(IExpr::Lit(v))),
                Some(Sym::Int(id)) if p.sel == Selector::Whole => Some(Typed::Int(IExpr::Var(id))),
                Some(Sym::Const(_)) | Some(Sym::Int(_)) => {
                    self.err(p.span, format!("integer `{}` cannot be indexed", p.name));
                    None
                }
                _ => self.place(p).map(|pl| Typed::Real(RExpr::Read(pl))),
            },
            ExprKind::Neg(a) => match self.expr(a)? {
                Typed::Int(i) => Some(Typed::Int(IExpr::negate(i))),
                Typed::Real(r) => Some(Typed::Real(RExpr::Neg(Box::new(r)))),
            },
            ExprKind::Not(a) => match self.expr(a)? {
                Typed::Int(i) => Some(Typed::Int(IExpr::logical_not(i))),
                Typed::Real(_) => {
                    self.real_in_int_context(a.span, "`!`");
                    None
                }
            },
            ExprKind::Binary(op, a, b) => {
                let l = self.expr(a);
                let r = self.expr(b);
                let (l, r) = (l?, r?);
                match (l, r) {
                    (Typed::Int(x), Typed::Int(y)) => {
                        if *op == BinOp::Div && y.as_lit() == Some(0) {
                            self.err(e.span, "constant division by zero");
                            return None;
                        }
                        Some(Typed::Int(IExpr::bin(*op, x, y)))
                    }
                    (l, r) => {
                        if op.is_comparison() || op.is_logical() {
                            self.real_in_int_context(e.span, &format!("`{}`", op.symbol()));
                            return None;
                        }
                        let l = promote(l);
                        let r = promote(r);
                        if let (Some(a), Some(b)) = (l.len(), r.len()) {
                            if let (Some(a), Some(b)) = (a.as_lit(), b.as_lit()) {
                                if a != b {
                                    self.err(e.span, format!("slice length mismatch: {a} vs {b}"));
                                }
                            }
                        }
                        let rop = match op {
                            BinOp::Add => RBinOp::Add,
                            BinOp::Sub => RBinOp::Sub,
                            BinOp::Mul => RBinOp::Mul,
                            _ => RBinOp::Div,
                        };
                        Some(Typed::Real(RExpr::Bin(rop, Box::new(l), Box::new(r))))
                    }
                }
            }
            ExprKind::Call(name, args) => {
                let Some(b) = Builtin::from_name(name) else {
                    self.err(e.span, format!("unknown function `{name}`"));
                    return None;
                };
                if args.len() != 1 {
                    self.err(
                        e.span,
                        format!("`{name}` takes exactly one argument, {} given", args.len()),
                    );
                    return None;
                }
                let a = promote(self.expr(&args[0])?);
                Some(Typed::Real(RExpr::Call(b, Box::new(a))))
            }
            ExprKind::Deriv(v, w) => {
                let v = self.deriv_numerator(v);
                let w = self.space_sel(w);
                Some(Typed::Real(RExpr::Deriv(v?, w?)))
            }
        }
    }

    fn real_in_int_context(&mut self, span: Span, what: &str) {
        if self.in_condition {
            self.err(span, "real in condition");
        } else {
            self.err(span, format!("{what} requires integer operands"));
        }
    }
}

fn promote(t: Typed) -> RExpr {
    match t {
        Typed::Int(i) => RExpr::Int(i),
        Typed::Real(r) => r,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::frontend::parse_source;
    use crate::sema::consts::fold_constants;

    fn check(src: &str) -> Result<Program, Vec<Diagnostic>> {
        let tree = parse_source(src).unwrap();
        let env = fold_constants(&tree, &BTreeMap::new())?;
        typecheck(&tree, &env)
    }

    fn errors(src: &str) -> Vec<String> {
        check(src)
            .unwrap_err()
            .into_iter()
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn integer_condition_over_loop_indices_accepted() {
        let p = check(
            "#lang landau\nreal[4] f(real[4] a) {\n  for i = [0 : 2]\n    for j = [0 : 2]\n      if (i != j) {\n        f[i] += a[j]\n      }\n}\n",
        )
        .unwrap();
        assert_eq!(p.ints.len(), 2);
    }

    #[test]
    fn real_condition_rejected() {
        let e = errors("#lang landau\nreal f(real x) {\n  if (x > 0) {\n    f = 1\n  }\n}\n");
        assert_eq!(e, ["real in condition"]);
    }

    #[test]
    fn slice_length_mismatch() {
        let e = errors("#lang landau\nreal f(real[4] b) {\n  real[3] a\n  a[ : ] = b[ : 4]\n}\n");
        assert_eq!(e, ["slice length mismatch: 3 vs 4"]);
    }

    #[test]
    fn parameter_as_value() {
        let e = errors("#lang landau\nparameter[2] p\nreal f() {\n  f = p[0]\n}\n");
        assert_eq!(e, ["parameter `p` used as a value"]);
    }

    #[test]
    fn derivative_of_integer() {
        let e =
            errors("#lang landau\nparameter[2] p\nreal f() {\n  int i = 1\n  f = i ' p[0]\n}\n");
        assert_eq!(e, ["derivative of integer `i`"]);
    }

    #[test]
    fn static_out_of_bounds_and_reversed_slice() {
        let e = errors("#lang landau\nreal f(real[4] b) {\n  f = b[4]\n}\n");
        assert!(e[0].contains("index out of bounds"));
        let e = errors("#lang landau\nreal[2] f(real[4] b) {\n  f = b[3 : 1]\n}\n");
        assert!(e[0].contains("reversed slice"));
    }

    #[test]
    fn argument_is_read_only_but_derivatives_may_be_fixed() {
        let e = errors("#lang landau\nreal f(real[2] b) {\n  b[0] = 1\n}\n");
        assert!(e[0].contains("read-only"));
        let p = check(
            "#lang landau\nparameter[2] q\nreal f(real[2] b, real[4] db) {\n  b[:] ' q[:] = db\n}\n",
        )
        .unwrap();
        assert!(p.vars[p.var_by_name("b").unwrap()].bearing);
        assert!(!p.vars[p.var_by_name("db").unwrap()].bearing);
    }

    #[test]
    fn scalar_arguments_become_spaces() {
        let p = check(
            "#lang landau\nparameter[6] initial\nreal[6] x_dot(real[6] x, real GM) {\n  x_dot[:] = x[:] ' GM\n}\n",
        )
        .unwrap();
        let names: Vec<_> = p.spaces.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["initial", "GM"]);
        assert_eq!(p.arg_space(p.var_by_name("GM").unwrap()), Some(1));
    }

    #[test]
    fn loop_index_is_immutable_and_unshadowable() {
        let e = errors("#lang landau\nreal f() {\n  for i = [0 : 2] {\n    i = 3\n  }\n}\n");
        assert!(e[0].contains("immutable"));
        let e = errors(
            "#lang landau\nreal f() {\n  for i = [0 : 2]\n    for i = [0 : 2] {\n    }\n}\n",
        );
        assert!(e[0].contains("shadows"));
    }

    #[test]
    fn non_constant_bound_and_size() {
        let e = errors("#lang landau\nreal f(real x) {\n  for i = [0 : x] {\n  }\n}\n");
        assert!(e[0].contains("non-constant bound"));
        let e = errors("#lang landau\nreal f() {\n  for i = [0 : 2] {\n    real[i] a\n  }\n}\n");
        assert!(e[0].contains("non-constant array size"), "{e:?}");
    }

    #[test]
    fn deriv_assign_block_shape() {
        let e = errors(
            "#lang landau\nparameter[3] q\nreal f(real[2] b, real[5] db) {\n  b[:] ' q[:] = db\n}\n",
        );
        assert!(e[0].contains("6 entries"), "{e:?}");
    }
}
