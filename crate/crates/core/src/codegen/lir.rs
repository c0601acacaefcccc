//! Loop-preserving lowered form shared by the interpreter and the C emitter.
//!
//! Vector statements become an element loop; each real assignment carries,
//! per active differentiation space, the terms of its derivative. Derivative
//! slots are addressed through the plan's mapping tables at run time, so
//! loops stay rolled.

use std::fmt::{self, Write};

use super::diff::differentiate_statement;
use crate::adplan::DerivPlan;
use crate::frontend::ast::BinOp;
use crate::sema::{
    Builtin, IExpr, IntRole, Program, RBinOp, RExpr, RealVar, Sel, Space, SpaceId, SpaceKind,
    SpaceSel, Stmt, StmtId, VarId,
};

pub type Reg = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    Local,
    LoopIndex,
    /// Synthetic index of a vector statement's element loop.
    Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegInfo {
    pub name: String,
    pub kind: RegKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LReal {
    Lit(f64),
    Int(IExpr),
    Read {
        var: VarId,
        cell: IExpr,
    },
    Neg(Box<LReal>),
    Bin(RBinOp, Box<LReal>, Box<LReal>),
    Call(Builtin, Box<LReal>),
    Deriv {
        var: VarId,
        cell: IExpr,
        space: SpaceId,
        param: IExpr,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coef {
    One,
    MinusOne,
    Temp(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub var: VarId,
    pub cell: IExpr,
    pub coef: Coef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceCode {
    pub space: SpaceId,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LAssign {
    pub stmt: StmtId,
    pub var: VarId,
    pub cell: IExpr,
    pub accumulate: bool,
    pub value: LReal,
    /// Coefficients evaluated once before any derivative update.
    pub temps: Vec<LReal>,
    pub spaces: Vec<SpaceCode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LSetDeriv {
    pub stmt: StmtId,
    pub var: VarId,
    pub cell: IExpr,
    pub space: SpaceId,
    pub param: IExpr,
    pub value: LReal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LStmt {
    SetInt {
        reg: Reg,
        value: IExpr,
    },
    Loop {
        reg: Reg,
        lo: IExpr,
        hi: IExpr,
        body: Vec<LStmt>,
    },
    If {
        cond: IExpr,
        then_body: Vec<LStmt>,
        else_body: Vec<LStmt>,
    },
    Assign(LAssign),
    SetDeriv(LSetDeriv),
    /// Sets the self-derivative of a scalar argument to 1.
    Seed {
        var: VarId,
        space: SpaceId,
    },
}

/// The interpretable artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Lir {
    pub name: String,
    pub ret: VarId,
    pub args: Vec<VarId>,
    pub vars: Vec<RealVar>,
    pub spaces: Vec<Space>,
    pub regs: Vec<RegInfo>,
    pub body: Vec<LStmt>,
    pub plan: DerivPlan,
}

impl Lir {
    pub fn ret_len(&self) -> usize {
        self.vars[self.ret].size
    }

    pub fn cell_name(&self, var: VarId, index: u32) -> String {
        let v = &self.vars[var];
        if v.scalar {
            v.name.clone()
        } else {
            format!("{}[{}]", v.name, index)
        }
    }

    pub fn param_name(&self, space: SpaceId, index: u32) -> String {
        let s = &self.spaces[space];
        if s.is_scalar() {
            s.name.clone()
        } else {
            format!("{}[{}]", s.name, index)
        }
    }
}

pub fn add(a: IExpr, b: IExpr) -> IExpr {
    match (a.as_lit(), b.as_lit()) {
        (Some(0), _) => b,
        (_, Some(0)) => a,
        _ => IExpr::bin(BinOp::Add, a, b),
    }
}

pub fn sub(a: IExpr, b: IExpr) -> IExpr {
    if b.as_lit() == Some(0) {
        return a;
    }
    IExpr::bin(BinOp::Sub, a, b)
}

pub fn mul(a: IExpr, b: IExpr) -> IExpr {
    match (a.as_lit(), b.as_lit()) {
        (Some(1), _) => b,
        (_, Some(1)) => a,
        _ => IExpr::bin(BinOp::Mul, a, b),
    }
}

pub fn div(a: IExpr, b: IExpr) -> IExpr {
    if b.as_lit() == Some(1) {
        return a;
    }
    IExpr::bin(BinOp::Div, a, b)
}

/// `a - (a / b) * b`; zero when `b` is 1.
pub fn rem(a: IExpr, b: IExpr) -> IExpr {
    if b.as_lit() == Some(1) {
        return IExpr::Lit(0);
    }
    sub(a.clone(), mul(div(a, b.clone()), b))
}

struct Lower<'a> {
    prog: &'a Program,
    plan: &'a DerivPlan,
    regs: Vec<RegInfo>,
}

/// Lowers a type-checked program against its derivative plan.
pub fn lower(prog: &Program, plan: DerivPlan) -> Lir {
    let regs = prog
        .ints
        .iter()
        .map(|i| RegInfo {
            name: i.name.clone(),
            kind: match i.role {
                IntRole::Local => RegKind::Local,
                IntRole::LoopIndex => RegKind::LoopIndex,
            },
        })
        .collect();
    let mut l = Lower {
        prog,
        plan: &plan,
        regs,
    };
    let mut body = Vec::new();
    for (s, space) in prog.spaces.iter().enumerate() {
        if let SpaceKind::Argument(v) = space.kind {
            if plan.get(v, s).is_some() && plan.is_active(StmtId::ENTRY, s) {
                body.push(LStmt::Seed { var: v, space: s });
            }
        }
    }
    body.extend(l.block(&prog.body));
    let regs = l.regs;
    Lir {
        name: prog.name.clone(),
        ret: prog.ret,
        args: prog.args.clone(),
        vars: prog.vars.clone(),
        spaces: prog.spaces.clone(),
        regs,
        body,
        plan,
    }
}

impl<'a> Lower<'a> {
    fn element_reg(&mut self) -> Reg {
        let r = self.regs.len();
        self.regs.push(RegInfo {
            name: format!("e{r}"),
            kind: RegKind::Element,
        });
        r
    }

    fn block(&mut self, body: &[Stmt]) -> Vec<LStmt> {
        let mut out = Vec::new();
        for s in body {
            self.stmt(s, &mut out);
        }
        out
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<LStmt>) {
        match s {
            Stmt::IntAssign { var, value, .. } => out.push(LStmt::SetInt {
                reg: *var,
                value: value.clone(),
            }),
            Stmt::For {
                var, lo, hi, body, ..
            } => {
                let body = self.block(body);
                out.push(LStmt::Loop {
                    reg: *var,
                    lo: lo.clone(),
                    hi: hi.clone(),
                    body,
                });
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                let then_body = self.block(then_body);
                let else_body = self.block(else_body);
                out.push(LStmt::If {
                    cond: cond.clone(),
                    then_body,
                    else_body,
                });
            }
            Stmt::Assign {
                id,
                target,
                accumulate,
                value,
                ..
            } => {
                let diff = differentiate_statement(self.prog, s).unwrap();
                let (elem, len) = match &target.sel {
                    Sel::Cell(_) => (None, None),
                    Sel::Range(lo, hi) => {
                        (Some(self.element_reg()), Some(sub(hi.clone(), lo.clone())))
                    }
                };
                let cell = self.cell(&target.sel, elem);
                let spaces: Vec<SpaceId> = self
                    .plan
                    .active
                    .spaces_of(*id)
                    .into_iter()
                    .filter(|&sp| self.plan.get(target.var, sp).is_some())
                    .collect();
                let mut temps = Vec::new();
                let mut coefs: Vec<Option<Coef>> = vec![None; diff.terms.len()];
                let mut codes = Vec::new();
                for &sp in &spaces {
                    let mut terms = Vec::new();
                    for (k, t) in diff.terms.iter().enumerate() {
                        if self.plan.get(t.source.var, sp).is_none() {
                            continue;
                        }
                        let coef = *coefs[k].get_or_insert_with(|| match &t.coef {
                            RExpr::Lit(v) if *v == 1.0 => Coef::One,
                            RExpr::Lit(v) if *v == -1.0 => Coef::MinusOne,
                            c => {
                                temps.push(self.real(c, elem));
                                Coef::Temp(temps.len() - 1)
                            }
                        });
                        terms.push(Term {
                            var: t.source.var,
                            cell: self.cell(&t.source.sel, elem),
                            coef,
                        });
                    }
                    codes.push(SpaceCode { space: sp, terms });
                }
                let a = LStmt::Assign(LAssign {
                    stmt: *id,
                    var: target.var,
                    cell,
                    accumulate: *accumulate,
                    value: self.real(value, elem),
                    temps,
                    spaces: codes,
                });
                out.push(wrap(elem, len, a));
            }
            Stmt::DerivAssign {
                id,
                target,
                wrt,
                value,
                ..
            } => {
                if self.plan.get(target.var, wrt.space).is_none()
                    || !self.plan.is_active(*id, wrt.space)
                {
                    return;
                }
                let block = match (target.sel.len(), wrt.sel.len()) {
                    (None, None) => None,
                    (a, b) => Some(mul(a.unwrap_or(IExpr::Lit(1)), b.unwrap_or(IExpr::Lit(1)))),
                };
                let elem = block.as_ref().map(|_| self.element_reg());
                let (cell, param) = self.deriv_cell(&target.sel, wrt, elem);
                let value_elem = if value.len().is_some() { elem } else { None };
                let sd = LStmt::SetDeriv(LSetDeriv {
                    stmt: *id,
                    var: target.var,
                    cell,
                    space: wrt.space,
                    param,
                    value: self.real(value, value_elem),
                });
                out.push(wrap(elem, block, sd));
            }
        }
    }

    fn cell(&self, sel: &Sel, elem: Option<Reg>) -> IExpr {
        match (sel, elem) {
            (Sel::Cell(i), _) => i.clone(),
            (Sel::Range(lo, _), Some(e)) => add(lo.clone(), IExpr::Var(e)),
            (Sel::Range(lo, _), None) => lo.clone(),
        }
    }

    /// (value cell, parameter) of element `elem` of a `value ' wrt` block.
    fn deriv_cell(&self, value: &Sel, wrt: &SpaceSel, elem: Option<Reg>) -> (IExpr, IExpr) {
        let vstart = value.start().clone();
        let wstart = wrt.sel.start().clone();
        match elem {
            None => (vstart, wstart),
            Some(e) => {
                let lw = wrt.sel.len().unwrap_or(IExpr::Lit(1));
                let e = IExpr::Var(e);
                (
                    add(vstart, div(e.clone(), lw.clone())),
                    add(wstart, rem(e, lw)),
                )
            }
        }
    }

    fn real(&self, e: &RExpr, elem: Option<Reg>) -> LReal {
        match e {
            RExpr::Lit(v) => LReal::Lit(*v),
            RExpr::Int(i) => LReal::Int(i.clone()),
            RExpr::Read(p) => LReal::Read {
                var: p.var,
                cell: self.cell(&p.sel, elem),
            },
            RExpr::Neg(a) => LReal::Neg(Box::new(self.real(a, elem))),
            RExpr::Bin(op, a, b) => LReal::Bin(
                *op,
                Box::new(self.real(a, elem)),
                Box::new(self.real(b, elem)),
            ),
            RExpr::Call(f, a) => LReal::Call(*f, Box::new(self.real(a, elem))),
            RExpr::Deriv(v, w) => {
                let e = if crate::sema::deriv_len(&v.sel, &w.sel).is_some() {
                    elem
                } else {
                    None
                };
                let (cell, param) = self.deriv_cell(&v.sel, w, e);
                LReal::Deriv {
                    var: v.var,
                    cell,
                    space: w.space,
                    param,
                }
            }
        }
    }
}

fn wrap(elem: Option<Reg>, len: Option<IExpr>, s: LStmt) -> LStmt {
    match (elem, len) {
        (Some(reg), Some(hi)) => LStmt::Loop {
            reg,
            lo: IExpr::Lit(0),
            hi,
            body: vec![s],
        },
        _ => s,
    }
}

/// Forward-mode accumulation statements of every real assignment, rendered
/// per active space (used by `dump`).
pub fn render_differentiation(prog: &Program, plan: &DerivPlan) -> String {
    fn walk(prog: &Program, plan: &DerivPlan, body: &[Stmt], out: &mut String) {
        for s in body {
            match s {
                Stmt::Assign { id, target, .. } => {
                    let d = differentiate_statement(prog, s).unwrap();
                    for sp in plan.active.spaces_of(*id) {
                        if plan.get(target.var, sp).is_some() {
                            let _ = writeln!(out, "{}", d.render(prog, sp));
                        }
                    }
                }
                Stmt::For { body, .. } => walk(prog, plan, body, out),
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    walk(prog, plan, then_body, out);
                    walk(prog, plan, else_body, out);
                }
                _ => {}
            }
        }
    }
    let mut out = String::new();
    walk(prog, plan, &prog.body, &mut out);
    out
}

impl fmt::Display for Lir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|&a| {
                let v = &self.vars[a];
                if v.scalar {
                    format!("real {}", v.name)
                } else {
                    format!("real[{}] {}", v.size, v.name)
                }
            })
            .collect();
        writeln!(
            f,
            "function {}[{}]({})",
            self.name,
            self.ret_len(),
            args.join(", ")
        )?;
        for vp in self.plan.vars.values() {
            writeln!(
                f,
                "  buffer d({})/d({}) packed {} width {}",
                self.vars[vp.var].name,
                self.spaces[vp.space].name,
                vp.total(),
                vp.width
            )?;
        }
        let mut out = String::new();
        Printer { lir: self }.block(&mut out, &self.body, 1);
        f.write_str(&out)
    }
}

struct Printer<'a> {
    lir: &'a Lir,
}

impl Printer<'_> {
    fn int(&self, e: &IExpr) -> String {
        match e {
            IExpr::Lit(v) => v.to_string(),
            IExpr::Var(r) => self.lir.regs[*r].name.clone(),
            IExpr::Neg(a) => format!("-({})", self.int(a)),
            IExpr::Not(a) => format!("!({})", self.int(a)),
            IExpr::Bin(op, a, b) => format!("({} {} {})", self.int(a), op.symbol(), self.int(b)),
        }
    }

    fn real(&self, e: &LReal) -> String {
        match e {
            LReal::Lit(v) => format!("{v:?}"),
            LReal::Int(i) => self.int(i),
            LReal::Read { var, cell } => {
                format!("{}[{}]", self.lir.vars[*var].name, self.int(cell))
            }
            LReal::Neg(a) => format!("-({})", self.real(a)),
            LReal::Bin(op, a, b) => format!("({} {} {})", self.real(a), op.symbol(), self.real(b)),
            LReal::Call(f, a) => format!("{}({})", f.name(), self.real(a)),
            LReal::Deriv {
                var,
                cell,
                space,
                param,
            } => format!(
                "d({}[{}])/d({}[{}])",
                self.lir.vars[*var].name,
                self.int(cell),
                self.lir.spaces[*space].name,
                self.int(param)
            ),
        }
    }

    fn block(&self, out: &mut String, body: &[LStmt], depth: usize) {
        for s in body {
            self.stmt(out, s, depth);
        }
    }

    fn stmt(&self, out: &mut String, s: &LStmt, depth: usize) {
        let pad = "  ".repeat(depth);
        match s {
            LStmt::SetInt { reg, value } => {
                let _ = writeln!(
                    out,
                    "{pad}{} := {}",
                    self.lir.regs[*reg].name,
                    self.int(value)
                );
            }
            LStmt::Loop { reg, lo, hi, body } => {
                let _ = writeln!(
                    out,
                    "{pad}for {} in [{} : {}]",
                    self.lir.regs[*reg].name,
                    self.int(lo),
                    self.int(hi)
                );
                self.block(out, body, depth + 1);
            }
            LStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let _ = writeln!(out, "{pad}if {}", self.int(cond));
                self.block(out, then_body, depth + 1);
                if !else_body.is_empty() {
                    let _ = writeln!(out, "{pad}else");
                    self.block(out, else_body, depth + 1);
                }
            }
            LStmt::Assign(a) => {
                let name = &self.lir.vars[a.var].name;
                for (k, t) in a.temps.iter().enumerate() {
                    let _ = writeln!(out, "{pad}t{k} := {}", self.real(t));
                }
                for sc in &a.spaces {
                    let Some(vp) = self.lir.plan.get(a.var, sc.space) else {
                        continue;
                    };
                    let terms: Vec<_> = sc
                        .terms
                        .iter()
                        .filter(|t| self.lir.plan.get(t.var, sc.space).is_some())
                        .collect();
                    if terms.is_empty() && a.accumulate {
                        continue;
                    }
                    let sp = &self.lir.spaces[sc.space].name;
                    let cell = self.int(&a.cell);
                    let rhs = |q: &str| {
                        let mut parts = Vec::new();
                        if a.accumulate {
                            parts.push(format!("d({name}[{cell}])/d({sp}[{q}])"));
                        }
                        for t in &terms {
                            let d = format!(
                                "d({}[{}])/d({sp}[{q}])",
                                self.lir.vars[t.var].name,
                                self.int(&t.cell)
                            );
                            parts.push(match t.coef {
                                Coef::One => d,
                                Coef::MinusOne => format!("-{d}"),
                                Coef::Temp(k) => format!("t{k} * {d}"),
                            });
                        }
                        if parts.is_empty() {
                            parts.push("0".into());
                        }
                        parts.join(" + ")
                    };
                    match a.cell.as_lit() {
                        Some(c) => {
                            for q in vp.params(c as usize) {
                                let q = q.to_string();
                                let _ = writeln!(
                                    out,
                                    "{pad}d({name}[{cell}])/d({sp}[{q}]) = {}",
                                    rhs(&q)
                                );
                            }
                        }
                        None => {
                            let _ = writeln!(
                                out,
                                "{pad}for q in mapping({name}, {sp}, {cell}): d({name}[{cell}])/d({sp}[q]) = {}",
                                rhs("q")
                            );
                        }
                    }
                }
                let op = if a.accumulate { "+=" } else { "=" };
                let _ = writeln!(
                    out,
                    "{pad}{name}[{}] {op} {}",
                    self.int(&a.cell),
                    self.real(&a.value)
                );
            }
            LStmt::SetDeriv(d) => {
                let _ = writeln!(
                    out,
                    "{pad}d({}[{}])/d({}[{}]) = {}",
                    self.lir.vars[d.var].name,
                    self.int(&d.cell),
                    self.lir.spaces[d.space].name,
                    self.int(&d.param),
                    self.real(&d.value)
                );
            }
            LStmt::Seed { var, space } => {
                let _ = writeln!(
                    out,
                    "{pad}d({})/d({}) = 1",
                    self.lir.vars[*var].name, self.lir.spaces[*space].name
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::adplan::plan;
    use crate::elaborator::unroll;
    use crate::frontend::parse_source;
    use crate::sema::analyze;

    fn lir(src: &str, defines: &[(&str, i64)]) -> Lir {
        let ov: BTreeMap<String, i64> = defines.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let prog = analyze(&parse_source(src).unwrap(), &ov).unwrap();
        let trace = unroll(&prog).unwrap();
        let (_, p) = plan(&prog, &trace);
        lower(&prog, p)
    }

    #[test]
    fn rem_and_div_fold_for_unit_width() {
        assert_eq!(rem(IExpr::Var(0), IExpr::Lit(1)), IExpr::Lit(0));
        assert_eq!(div(IExpr::Var(0), IExpr::Lit(1)), IExpr::Var(0));
        assert_eq!(add(IExpr::Lit(0), IExpr::Var(3)), IExpr::Var(3));
    }

    #[test]
    fn straight_line_program_has_no_loops() {
        let l = lir(
            "#lang landau\nreal[2] f(real E, real e) {\n  real M = E - e * sin(E)\n  f[0] = M ' E\n  f[1] = M ' e\n}\n",
            &[],
        );
        assert!(l.body.iter().all(|s| !matches!(s, LStmt::Loop { .. })));
        assert!(matches!(l.body[0], LStmt::Seed { .. }));
    }

    #[test]
    fn no_reads_means_value_code_only() {
        let l = lir(
            "#lang landau\nreal[2] f(real a) {\n  f[0] = a * a\n  f[1] = sin(a)\n}\n",
            &[],
        );
        assert!(l.plan.is_empty());
        for s in &l.body {
            let LStmt::Assign(a) = s else { panic!() };
            assert!(a.spaces.is_empty() && a.temps.is_empty());
        }
    }

    #[test]
    fn accumulation_keeps_the_loop_nest() {
        let l = lir(
            "#lang landau\nconst int N = 4\nparameter[N] p0\nreal[N * N] f(real[N * N] m, real[N] p, real[N * N] d) {\n  p[:] ' p0[:] = d[:]\n  real[N] p_dot\n  for i = [0 : N]\n    for j = [0 : N]\n      if (i != j) {\n        p_dot[i] += m[N * i + j] * p[j]\n      }\n  f[:] = p_dot[:] ' p0[:]\n}\n",
            &[],
        );
        let text = l.to_string();
        assert!(text.contains("for i in [0 : 4]"), "{text}");
        assert!(text.contains("t0 := m[((4 * i) + j)]"), "{text}");
        assert!(
            text.contains("d(p_dot[i])/d(p0[q]) = d(p_dot[i])/d(p0[q]) + t0 * d(p[j])/d(p0[q])"),
            "{text}"
        );
    }
}
