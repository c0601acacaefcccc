//! Reference evaluator: walks the typed program directly, independent of the
//! derivative plan and of lowering.
//!
//! Two numeric lanes share the walker. The dense lane carries the full
//! gradient of every cell over every parameter and serves as the AD oracle.
//! The pair lane carries a base value and a perturbed value and drives the
//! finite-difference oracle.

use crate::adplan::DiscardMask;
use crate::elaborator::{
    deriv_block_len, deriv_element, evaluate_int_expr, resolve_sel, CellRef, ParamRef, Resolved,
};
use crate::sema::{Builtin, Program, RBinOp, RExpr, Sel, SpaceId, SpaceKind, Stmt, VarId};

/// One derivative read made by the program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadSample {
    pub cell: CellRef,
    pub param: ParamRef,
    pub value: f64,
    /// True for reads inside an assignment value (the entries a program
    /// exports); false for reads feeding a derivative assignment.
    pub in_value: bool,
}

struct Layout {
    mask: DiscardMask,
    offsets: Vec<usize>,
    width: usize,
}

impl Layout {
    fn new(prog: &Program) -> Self {
        let mut offsets = Vec::with_capacity(prog.spaces.len());
        let mut width = 0;
        for s in &prog.spaces {
            offsets.push(width);
            width += s.size;
        }
        Layout {
            mask: DiscardMask::from_program(prog),
            offsets,
            width,
        }
    }
}

trait Lane {
    type V: Clone;
    fn constant(&self, v: f64) -> Self::V;
    fn base(v: &Self::V) -> f64;
    fn neg(&self, a: Self::V) -> Self::V;
    fn bin(&self, op: RBinOp, a: Self::V, b: Self::V) -> Self::V;
    fn call(&self, f: Builtin, a: Self::V) -> Self::V;
    fn seed(&mut self, cell: &mut Self::V, var: VarId, space: SpaceId);
    fn set_deriv(&mut self, cell: &mut Self::V, var: VarId, space: SpaceId, q: u32, value: f64);
    fn after_write(&mut self, cell: &mut Self::V, var: VarId);
    fn read_deriv(&mut self, cell: &Self::V, at: CellRef, param: ParamRef, in_value: bool) -> f64;
}

fn derivative_of(f: Builtin, x: f64) -> f64 {
    match f {
        Builtin::Sin => x.cos(),
        Builtin::Cos => -x.sin(),
        Builtin::Tan => 1.0 / (x.cos() * x.cos()),
        Builtin::Exp => x.exp(),
        Builtin::Log => 1.0 / x,
        Builtin::Sqrt => 0.5 / x.sqrt(),
        Builtin::Sqr => 2.0 * x,
        Builtin::Atan => 1.0 / (1.0 + x * x),
    }
}

#[derive(Debug, Clone)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

struct DenseLane {
    layout: Layout,
    reads: Vec<ReadSample>,
}

impl DenseLane {
    fn zip(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    }
}

impl Lane for DenseLane {
    type V = Dual;

    fn constant(&self, v: f64) -> Dual {
        Dual {
            v,
            d: vec![0.0; self.layout.width],
        }
    }

    fn base(v: &Dual) -> f64 {
        v.v
    }

    fn neg(&self, a: Dual) -> Dual {
        Dual {
            v: -a.v,
            d: a.d.iter().map(|x| -x).collect(),
        }
    }

    fn bin(&self, op: RBinOp, a: Dual, b: Dual) -> Dual {
        let v = op.apply(a.v, b.v);
        let d = match op {
            RBinOp::Add => Self::zip(&a.d, &b.d, |x, y| x + y),
            RBinOp::Sub => Self::zip(&a.d, &b.d, |x, y| x - y),
            RBinOp::Mul => Self::zip(&a.d, &b.d, |x, y| b.v * x + a.v * y),
            RBinOp::Div => Self::zip(&a.d, &b.d, |x, y| (x * b.v - a.v * y) / (b.v * b.v)),
        };
        Dual { v, d }
    }

    fn call(&self, f: Builtin, a: Dual) -> Dual {
        let k = derivative_of(f, a.v);
        Dual {
            v: f.apply(a.v),
            d: a.d.iter().map(|x| k * x).collect(),
        }
    }

    fn seed(&mut self, cell: &mut Dual, var: VarId, space: SpaceId) {
        if !self.layout.mask.is_masked(var, space, 0) {
            cell.d[self.layout.offsets[space]] = 1.0;
        }
    }

    fn set_deriv(&mut self, cell: &mut Dual, var: VarId, space: SpaceId, q: u32, value: f64) {
        if !self.layout.mask.is_masked(var, space, q) {
            cell.d[self.layout.offsets[space] + q as usize] = value;
        }
    }

    fn after_write(&mut self, cell: &mut Dual, var: VarId) {
        let l = &self.layout;
        for (s, &off) in l.offsets.iter().enumerate() {
            let end = l.offsets.get(s + 1).copied().unwrap_or(l.width);
            if !l.mask.touches(var, s) {
                continue;
            }
            for q in 0..end - off {
                if l.mask.is_masked(var, s, q as u32) {
                    cell.d[off + q] = 0.0;
                }
            }
        }
    }

    fn read_deriv(&mut self, cell: &Dual, at: CellRef, param: ParamRef, in_value: bool) -> f64 {
        let value = cell.d[self.layout.offsets[param.space()] + param.index as usize];
        self.reads.push(ReadSample {
            cell: at,
            param,
            value,
            in_value,
        });
        value
    }
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    b: f64,
    p: f64,
}

struct PairLane<'r> {
    mask: DiscardMask,
    target: ParamRef,
    h: f64,
    reads: std::slice::Iter<'r, ReadSample>,
    samples: Vec<f64>,
}

impl Lane for PairLane<'_> {
    type V = Pair;

    fn constant(&self, v: f64) -> Pair {
        Pair { b: v, p: v }
    }

    fn base(v: &Pair) -> f64 {
        v.b
    }

    fn neg(&self, a: Pair) -> Pair {
        Pair { b: -a.b, p: -a.p }
    }

    fn bin(&self, op: RBinOp, a: Pair, b: Pair) -> Pair {
        Pair {
            b: op.apply(a.b, b.b),
            p: op.apply(a.p, b.p),
        }
    }

    fn call(&self, f: Builtin, a: Pair) -> Pair {
        Pair {
            b: f.apply(a.b),
            p: f.apply(a.p),
        }
    }

    fn seed(&mut self, cell: &mut Pair, var: VarId, space: SpaceId) {
        if self.target.space() == space && !self.mask.is_masked(var, space, 0) {
            cell.p = cell.b + self.h;
        }
    }

    fn set_deriv(&mut self, cell: &mut Pair, var: VarId, space: SpaceId, q: u32, value: f64) {
        if self.target == ParamRef::new(space, q) && !self.mask.is_masked(var, space, q) {
            cell.p = cell.b + self.h * value;
        }
    }

    fn after_write(&mut self, cell: &mut Pair, var: VarId) {
        if self
            .mask
            .is_masked(var, self.target.space(), self.target.index)
        {
            cell.p = cell.b;
        }
    }

    fn read_deriv(&mut self, cell: &Pair, _at: CellRef, _param: ParamRef, in_value: bool) -> f64 {
        if in_value {
            self.samples.push(cell.p);
        }
        self.reads.next().map_or(0.0, |r| r.value)
    }
}

struct Walker<'p, L: Lane> {
    prog: &'p Program,
    lane: L,
    ints: Vec<i64>,
    cells: Vec<Vec<L::V>>,
}

impl<'p, L: Lane> Walker<'p, L> {
    fn new(prog: &'p Program, lane: L, args: &[&[f64]]) -> Self {
        let mut cells: Vec<Vec<L::V>> = prog
            .vars
            .iter()
            .map(|v| vec![lane.constant(0.0); v.size])
            .collect();
        for (&a, data) in prog.args.iter().zip(args) {
            cells[a] = data.iter().map(|&x| lane.constant(x)).collect();
        }
        let mut w = Walker {
            prog,
            lane,
            ints: vec![0; prog.ints.len()],
            cells,
        };
        for (s, space) in prog.spaces.iter().enumerate() {
            if let SpaceKind::Argument(v) = space.kind {
                let mut c = w.cells[v][0].clone();
                w.lane.seed(&mut c, v, s);
                w.cells[v][0] = c;
            }
        }
        w
    }

    fn int(&self, e: &crate::sema::IExpr) -> i64 {
        evaluate_int_expr(e, &self.ints)
            .expect("integer expressions were checked during elaboration")
    }

    fn resolve(&self, sel: &Sel, size: usize) -> Resolved {
        resolve_sel(sel, size, "", &self.ints, Default::default())
            .expect("selectors were checked during elaboration")
    }

    fn block(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        let prog = self.prog;
        match s {
            Stmt::Assign {
                target,
                accumulate,
                value,
                ..
            } => {
                let t = self.resolve(&target.sel, prog.var(target.var).size);
                for e in 0..t.count() {
                    let c = (t.start + e) as usize;
                    let v = self.expr(value, e);
                    let mut new = if *accumulate {
                        let old = self.cells[target.var][c].clone();
                        self.lane.bin(RBinOp::Add, old, v)
                    } else {
                        v
                    };
                    self.lane.after_write(&mut new, target.var);
                    self.cells[target.var][c] = new;
                }
            }
            Stmt::DerivAssign {
                target, wrt, value, ..
            } => {
                let t = self.resolve(&target.sel, prog.var(target.var).size);
                let w = self.resolve(&wrt.sel, prog.spaces[wrt.space].size);
                let n = deriv_block_len(t, w).unwrap_or(1);
                for e in 0..n {
                    let (c, q) = deriv_element(t, w, e);
                    let v = self.expr_in(value, e, false);
                    let value = L::base(&v);
                    let mut cell = self.cells[target.var][c as usize].clone();
                    self.lane
                        .set_deriv(&mut cell, target.var, wrt.space, q as u32, value);
                    self.cells[target.var][c as usize] = cell;
                }
            }
            Stmt::IntAssign { var, value, .. } => self.ints[*var] = self.int(value),
            Stmt::For {
                var, lo, hi, body, ..
            } => {
                let (lo, hi) = (self.int(lo), self.int(hi));
                for i in lo..hi {
                    self.ints[*var] = i;
                    self.block(body);
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                if self.int(cond) != 0 {
                    self.block(then_body);
                } else {
                    self.block(else_body);
                }
            }
        }
    }

    fn expr(&mut self, e: &RExpr, elem: i64) -> L::V {
        self.expr_in(e, elem, true)
    }

    fn expr_in(&mut self, e: &RExpr, elem: i64, in_value: bool) -> L::V {
        match e {
            RExpr::Lit(v) => self.lane.constant(*v),
            RExpr::Int(i) => self.lane.constant(self.int(i) as f64),
            RExpr::Read(p) => {
                let r = self.resolve(&p.sel, self.prog.var(p.var).size);
                let idx = if r.len.is_some() {
                    r.start + elem
                } else {
                    r.start
                };
                self.cells[p.var][idx as usize].clone()
            }
            RExpr::Neg(a) => {
                let a = self.expr_in(a, elem, in_value);
                self.lane.neg(a)
            }
            RExpr::Bin(op, a, b) => {
                let a = self.expr_in(a, elem, in_value);
                let b = self.expr_in(b, elem, in_value);
                self.lane.bin(*op, a, b)
            }
            RExpr::Call(f, a) => {
                let a = self.expr_in(a, elem, in_value);
                self.lane.call(*f, a)
            }
            RExpr::Deriv(v, w) => {
                let vr = self.resolve(&v.sel, self.prog.var(v.var).size);
                let wr = self.resolve(&w.sel, self.prog.spaces[w.space].size);
                let (c, q) = if deriv_block_len(vr, wr).is_some() {
                    deriv_element(vr, wr, elem)
                } else {
                    (vr.start, wr.start)
                };
                let cell = self.cells[v.var][c as usize].clone();
                let at = CellRef::new(v.var, c as u32);
                let param = ParamRef::new(w.space, q as u32);
                let x = self.lane.read_deriv(&cell, at, param, in_value);
                self.lane.constant(x)
            }
        }
    }
}

/// Result of a dense-gradient run.
#[derive(Debug, Clone)]
pub struct DenseRun {
    pub outputs: Vec<f64>,
    /// Every derivative read, in execution order.
    pub reads: Vec<ReadSample>,
}

/// Runs the program carrying a dense gradient over all parameters of all
/// spaces. Argument shapes must match the program.
pub fn dense_dual(prog: &Program, args: &[&[f64]]) -> DenseRun {
    let lane = DenseLane {
        layout: Layout::new(prog),
        reads: Vec::new(),
    };
    let mut w = Walker::new(prog, lane, args);
    w.block(&prog.body);
    DenseRun {
        outputs: w.cells[prog.ret].iter().map(|d| d.v).collect(),
        reads: w.lane.reads,
    }
}

/// Result of a perturbed run.
#[derive(Debug, Clone)]
pub struct PerturbedRun {
    /// Outputs at the perturbed point.
    pub outputs: Vec<f64>,
    /// Perturbed value of the read cell at every in-value derivative read.
    pub samples: Vec<f64>,
}

/// Runs the program with parameter `target` moved by `h`. Derivative reads
/// take their values from `reads` (a prior [`dense_dual`] run at the same
/// inputs), so they act as constants exactly as in AD.
pub fn perturbed(
    prog: &Program,
    args: &[&[f64]],
    reads: &[ReadSample],
    target: ParamRef,
    h: f64,
) -> PerturbedRun {
    let lane = PairLane {
        mask: DiscardMask::from_program(prog),
        target,
        h,
        reads: reads.iter(),
        samples: Vec::new(),
    };
    let mut w = Walker::new(prog, lane, args);
    w.block(&prog.body);
    PerturbedRun {
        outputs: w.cells[prog.ret].iter().map(|c| c.p).collect(),
        samples: w.lane.samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::Machine;
    use crate::{compile, CompileOptions};

    const DISCARD: &str = include_str!("../../corpus/discard.landau");

    #[test]
    fn dense_lane_matches_compiled_kepler() {
        let c = compile(
            include_str!("../../corpus/kepler.landau"),
            &CompileOptions::default(),
        )
        .unwrap();
        let args: [&[f64]; 2] = [&[0.5], &[0.1]];
        let dense = dense_dual(&c.program, &args);
        let out = Machine::new(&c.lir).run_args(&args);
        assert_eq!(dense.outputs[0], out[0]);
        assert!((dense.outputs[1] - out[1]).abs() < 1e-15);
        assert!((dense.outputs[2] - out[2]).abs() < 1e-15);
        assert_eq!(dense.reads.len(), 2);
    }

    #[test]
    fn discard_masks_dense_gradient() {
        let c = compile(DISCARD, &CompileOptions::default()).unwrap();
        let a = 0.3f64;
        let dense = dense_dual(&c.program, &[&[a]]);
        assert!((dense.outputs[1] - (2.0 * a + a.exp())).abs() < 1e-15);
    }

    #[test]
    fn pair_lane_moves_scalar_argument() {
        let c = compile(
            include_str!("../../corpus/square.landau"),
            &CompileOptions::default(),
        )
        .unwrap();
        let dense = dense_dual(&c.program, &[&[3.0]]);
        let run = perturbed(
            &c.program,
            &[&[3.0]],
            &dense.reads,
            ParamRef::new(0, 0),
            0.5,
        );
        assert_eq!(run.outputs[0], 12.25);
        assert_eq!(run.samples, vec![12.25]);
    }
}
