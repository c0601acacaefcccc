//! Stage 1: full unrolling of loops and conditionals into an action trace.
//!
//! Every executed real assignment contributes one `DependsFrom` per target
//! cell, every derivative assignment one `Have` per (cell, parameter) and
//! every derivative read one `Need`. Integer variables are evaluated here, so
//! all control flow is resolved statically.

use std::fmt::Write;

use smallvec::SmallVec;

use crate::diag::{Diagnostic, Span};
use crate::frontend::ast::BinOp;
use crate::sema::{IExpr, Place, Program, RExpr, Sel, SpaceKind, SpaceSel, Stmt, StmtId, VarId};

/// Upper bound on the unrolled trace length.
pub const MAX_ACTIONS: usize = 50_000_000;

/// One array cell (index 0 for scalars).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    pub var: u32,
    pub index: u32,
}

impl CellRef {
    pub fn new(var: VarId, index: u32) -> Self {
        CellRef {
            var: var as u32,
            index,
        }
    }

    pub fn var(self) -> VarId {
        self.var as VarId
    }
}

/// One differentiation variable: an index into a parameter vector, or 0 for
/// a scalar argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamRef {
    pub space: u32,
    pub index: u32,
}

impl ParamRef {
    pub fn new(space: usize, index: u32) -> Self {
        ParamRef {
            space: space as u32,
            index,
        }
    }

    pub fn space(self) -> usize {
        self.space as usize
    }
}

pub type Sources = SmallVec<[CellRef; 3]>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Need {
        stmt: StmtId,
        cell: CellRef,
        param: ParamRef,
    },
    DependsFrom {
        stmt: StmtId,
        target: CellRef,
        sources: Sources,
    },
    Have {
        stmt: StmtId,
        cell: CellRef,
        param: ParamRef,
    },
}

impl Action {
    pub fn stmt(&self) -> StmtId {
        match self {
            Action::Need { stmt, .. }
            | Action::DependsFrom { stmt, .. }
            | Action::Have { stmt, .. } => *stmt,
        }
    }
}

/// The unrolled program, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionTrace {
    pub actions: Vec<Action>,
}

impl ActionTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Action> {
        self.actions.iter()
    }

    /// The reversed trace, one action per line.
    pub fn render_reversed(&self, prog: &Program) -> String {
        let mut out = String::new();
        for a in self.actions.iter().rev() {
            out.push_str(&render_action(prog, a));
            out.push('\n');
        }
        out
    }
}

pub fn render_cell(prog: &Program, c: CellRef) -> String {
    prog.cell_name(c.var(), c.index)
}

pub fn render_param(prog: &Program, p: ParamRef) -> String {
    prog.param_name(p.space(), p.index)
}

pub fn render_action(prog: &Program, a: &Action) -> String {
    match a {
        Action::Need { cell, param, .. } => format!(
            "need-this-derivative {} ' {}",
            render_cell(prog, *cell),
            render_param(prog, *param)
        ),
        Action::Have { cell, param, .. } => format!(
            "have-this-derivative {} ' {}",
            render_cell(prog, *cell),
            render_param(prog, *param)
        ),
        Action::DependsFrom {
            target, sources, ..
        } => {
            let mut s = format!("{} depends-from {{", render_cell(prog, *target));
            for (i, c) in sources.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                let _ = write!(s, "{}", render_cell(prog, *c));
            }
            s.push('}');
            s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum IntEvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
}

/// Evaluates an integer expression with C semantics; `&&` and `||` short
/// circuit. `ints` holds the current value of every integer variable.
pub fn evaluate_int_expr(e: &IExpr, ints: &[i64]) -> Result<i64, IntEvalError> {
    match e {
        IExpr::Lit(v) => Ok(*v),
        IExpr::Var(id) => Ok(ints[*id]),
        IExpr::Neg(a) => evaluate_int_expr(a, ints)?
            .checked_neg()
            .ok_or(IntEvalError::Overflow),
        IExpr::Not(a) => Ok((evaluate_int_expr(a, ints)? == 0) as i64),
        IExpr::Bin(BinOp::And, a, b) => {
            Ok((evaluate_int_expr(a, ints)? != 0 && evaluate_int_expr(b, ints)? != 0) as i64)
        }
        IExpr::Bin(BinOp::Or, a, b) => {
            Ok((evaluate_int_expr(a, ints)? != 0 || evaluate_int_expr(b, ints)? != 0) as i64)
        }
        IExpr::Bin(op, a, b) => {
            let x = evaluate_int_expr(a, ints)?;
            let y = evaluate_int_expr(b, ints)?;
            if *op == BinOp::Div && y == 0 {
                return Err(IntEvalError::DivisionByZero);
            }
            crate::sema::typed::eval_bin(*op, x, y).ok_or(IntEvalError::Overflow)
        }
    }
}

/// A selector resolved for one execution: first cell and optional length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub start: i64,
    pub len: Option<i64>,
}

impl Resolved {
    /// Number of elements (1 for a single cell).
    pub fn count(self) -> i64 {
        self.len.unwrap_or(1)
    }
}

/// Resolves `sel` against an extent of `size` cells, checking bounds.
pub fn resolve_sel(
    sel: &Sel,
    size: usize,
    name: &str,
    ints: &[i64],
    span: Span,
) -> Result<Resolved, Diagnostic> {
    let ev = |e: &IExpr| {
        evaluate_int_expr(e, ints).map_err(|err| Diagnostic::error(span, err.to_string()))
    };
    match sel {
        Sel::Cell(i) => {
            let i = ev(i)?;
            if i < 0 || i as u64 >= size as u64 {
                return Err(Diagnostic::error(
                    span,
                    format!("index out of bounds: `{name}[{i}]` with size {size}"),
                ));
            }
            Ok(Resolved {
                start: i,
                len: None,
            })
        }
        Sel::Range(lo, hi) => {
            let (lo, hi) = (ev(lo)?, ev(hi)?);
            if lo > hi {
                return Err(Diagnostic::error(
                    span,
                    format!("reversed slice `{name}[{lo} : {hi}]`"),
                ));
            }
            if lo < 0 || hi as u64 > size as u64 {
                return Err(Diagnostic::error(
                    span,
                    format!("index out of bounds: slice `{name}[{lo} : {hi}]` with size {size}"),
                ));
            }
            Ok(Resolved {
                start: lo,
                len: Some(hi - lo),
            })
        }
    }
}

/// Element `e` of a flattened `value ' wrt` block: (value cell, parameter).
pub fn deriv_element(value: Resolved, wrt: Resolved, e: i64) -> (i64, i64) {
    let lw = wrt.count();
    (value.start + e / lw, wrt.start + e % lw)
}

/// Combined length of a derivative block, `None` for a single entry.
pub fn deriv_block_len(value: Resolved, wrt: Resolved) -> Option<i64> {
    match (value.len, wrt.len) {
        (None, None) => None,
        _ => Some(value.count() * wrt.count()),
    }
}

enum Leaf {
    Read {
        var: VarId,
        at: Resolved,
    },
    Deriv {
        var: VarId,
        value: Resolved,
        space: usize,
        wrt: Resolved,
    },
}

impl Leaf {
    fn len(&self) -> Option<i64> {
        match self {
            Leaf::Read { at, .. } => at.len,
            Leaf::Deriv { value, wrt, .. } => deriv_block_len(*value, *wrt),
        }
    }
}

struct Unroller<'p> {
    prog: &'p Program,
    ints: Vec<i64>,
    actions: Vec<Action>,
    leaves: Vec<Leaf>,
}

/// Unrolls a type-checked program into its action trace.
pub fn unroll(prog: &Program) -> Result<ActionTrace, Diagnostic> {
    let mut u = Unroller {
        prog,
        ints: vec![0; prog.ints.len()],
        actions: Vec::new(),
        leaves: Vec::new(),
    };
    for (s, space) in prog.spaces.iter().enumerate() {
        if let SpaceKind::Argument(v) = space.kind {
            u.actions.push(Action::Have {
                stmt: StmtId::ENTRY,
                cell: CellRef::new(v, 0),
                param: ParamRef::new(s, 0),
            });
        }
    }
    u.block(&prog.body)?;
    Ok(ActionTrace { actions: u.actions })
}

impl<'p> Unroller<'p> {
    fn eval(&self, e: &IExpr, span: Span) -> Result<i64, Diagnostic> {
        evaluate_int_expr(e, &self.ints).map_err(|err| Diagnostic::error(span, err.to_string()))
    }

    fn push(&mut self, a: Action, span: Span) -> Result<(), Diagnostic> {
        if self.actions.len() >= MAX_ACTIONS {
            return Err(Diagnostic::error(
                span,
                format!("program too large: unrolled trace exceeds {MAX_ACTIONS} actions"),
            ));
        }
        self.actions.push(a);
        Ok(())
    }

    fn place(&self, p: &Place) -> Result<Resolved, Diagnostic> {
        let v = self.prog.var(p.var);
        resolve_sel(&p.sel, v.size, &v.name, &self.ints, p.span)
    }

    fn space_sel(&self, w: &SpaceSel) -> Result<Resolved, Diagnostic> {
        let s = &self.prog.spaces[w.space];
        resolve_sel(&w.sel, s.size, &s.name, &self.ints, w.span)
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), Diagnostic> {
        for s in body {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), Diagnostic> {
        match s {
            Stmt::IntAssign { var, value, span } => {
                self.ints[*var] = self.eval(value, *span)?;
            }
            Stmt::For {
                var,
                lo,
                hi,
                body,
                span,
            } => {
                let lo = self.eval(lo, *span)?;
                let hi = self.eval(hi, *span)?;
                if lo > hi {
                    return Err(Diagnostic::error(
                        *span,
                        format!("reversed loop bounds [{lo} : {hi}]"),
                    ));
                }
                for i in lo..hi {
                    self.ints[*var] = i;
                    self.block(body)?;
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                span,
            } => {
                if self.eval(cond, *span)? != 0 {
                    self.block(then_body)?;
                } else {
                    self.block(else_body)?;
                }
            }
            Stmt::Assign {
                id,
                target,
                accumulate,
                value,
                span,
            } => {
                let t = self.place(target)?;
                let n = self.collect(value, t.len, *span)?;
                let leaves = std::mem::take(&mut self.leaves);
                for e in 0..n {
                    self.emit_needs(&leaves, *id, e, *span)?;
                    let target_cell = CellRef::new(target.var, (t.start + e) as u32);
                    let mut sources = Sources::new();
                    if *accumulate {
                        sources.push(target_cell);
                    }
                    for leaf in &leaves {
                        if let Leaf::Read { var, at } = leaf {
                            if !self.prog.var(*var).bearing {
                                continue;
                            }
                            let idx = at.start + if at.len.is_some() { e } else { 0 };
                            let c = CellRef::new(*var, idx as u32);
                            if !sources.contains(&c) {
                                sources.push(c);
                            }
                        }
                    }
                    self.push(
                        Action::DependsFrom {
                            stmt: *id,
                            target: target_cell,
                            sources,
                        },
                        *span,
                    )?;
                }
                self.leaves = leaves;
            }
            Stmt::DerivAssign {
                id,
                target,
                wrt,
                value,
                span,
            } => {
                let t = self.place(target)?;
                let w = self.space_sel(wrt)?;
                let n = self.collect(value, deriv_block_len(t, w), *span)?;
                let leaves = std::mem::take(&mut self.leaves);
                for e in 0..n {
                    self.emit_needs(&leaves, *id, e, *span)?;
                    let (c, p) = deriv_element(t, w, e);
                    self.push(
                        Action::Have {
                            stmt: *id,
                            cell: CellRef::new(target.var, c as u32),
                            param: ParamRef::new(wrt.space, p as u32),
                        },
                        *span,
                    )?;
                }
                self.leaves = leaves;
            }
        }
        Ok(())
    }

    /// Resolves every leaf of `value` into `self.leaves` and returns the
    /// number of elements the statement runs over.
    fn collect(
        &mut self,
        value: &RExpr,
        target_len: Option<i64>,
        span: Span,
    ) -> Result<i64, Diagnostic> {
        self.leaves.clear();
        self.walk(value, span)?;
        let mut len = target_len;
        for leaf in &self.leaves {
            if let Some(l) = leaf.len() {
                match len {
                    None if target_len.is_none() => {
                        return Err(Diagnostic::error(
                            span,
                            format!("slice length mismatch: a vector of length {l} cannot be assigned to a single cell"),
                        ))
                    }
                    Some(want) if want != l => {
                        return Err(Diagnostic::error(span, format!("slice length mismatch: {want} vs {l}")))
                    }
                    _ => len = Some(l),
                }
            }
        }
        Ok(len.unwrap_or(1))
    }

    fn walk(&mut self, e: &RExpr, span: Span) -> Result<(), Diagnostic> {
        match e {
            RExpr::Lit(_) => {}
            RExpr::Int(i) => {
                self.eval(i, span)?;
            }
            RExpr::Read(p) => {
                let at = self.place(p)?;
                self.leaves.push(Leaf::Read { var: p.var, at });
            }
            RExpr::Neg(a) | RExpr::Call(_, a) => self.walk(a, span)?,
            RExpr::Bin(_, a, b) => {
                self.walk(a, span)?;
                self.walk(b, span)?;
            }
            RExpr::Deriv(v, w) => {
                let value = self.place(v)?;
                let wrt = self.space_sel(w)?;
                self.leaves.push(Leaf::Deriv {
                    var: v.var,
                    value,
                    space: w.space,
                    wrt,
                });
            }
        }
        Ok(())
    }

    fn emit_needs(
        &mut self,
        leaves: &[Leaf],
        stmt: StmtId,
        e: i64,
        span: Span,
    ) -> Result<(), Diagnostic> {
        for leaf in leaves {
            if let Leaf::Deriv {
                var,
                value,
                space,
                wrt,
            } = leaf
            {
                let e = if deriv_block_len(*value, *wrt).is_some() {
                    e
                } else {
                    0
                };
                let (c, p) = deriv_element(*value, *wrt, e);
                self.push(
                    Action::Need {
                        stmt,
                        cell: CellRef::new(*var, c as u32),
                        param: ParamRef::new(*space, p as u32),
                    },
                    span,
                )?;
            }
        }
        Ok(())
    }
}
