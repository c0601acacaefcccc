//! Reference backend: executes the lowered program directly.
//!
//! Arithmetic follows the emitted C operation for operation, so both
//! backends round identically.

use super::lir::{Coef, LAssign, LReal, LSetDeriv, LStmt, Lir};
use crate::adplan::VarPlan;
use crate::elaborator::{evaluate_int_expr, CellRef, ParamRef};
use crate::inputs::{bind_inputs, InputError, Inputs};
use crate::sema::{IExpr, SpaceId, VarId};

/// One derivative read observed while evaluating an assignment's value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeEvent {
    pub cell: CellRef,
    pub param: ParamRef,
    pub value: f64,
}

struct Buffer<'a> {
    plan: &'a VarPlan,
    data: Vec<f64>,
}

/// Reusable execution state for one lowered program.
pub struct Machine<'a> {
    lir: &'a Lir,
    regs: Vec<i64>,
    values: Vec<Vec<f64>>,
    buffers: Vec<Buffer<'a>>,
    /// `index[var][space]` -> position in `buffers`.
    index: Vec<Vec<Option<usize>>>,
    temps: Vec<f64>,
    probe: Option<Vec<ProbeEvent>>,
}

impl<'a> Machine<'a> {
    pub fn new(lir: &'a Lir) -> Self {
        let mut index = vec![vec![None; lir.spaces.len()]; lir.vars.len()];
        let mut buffers = Vec::new();
        for ((v, s), vp) in &lir.plan.vars {
            index[*v][*s] = Some(buffers.len());
            buffers.push(Buffer {
                plan: vp,
                data: vec![0.0; vp.total()],
            });
        }
        Machine {
            lir,
            regs: vec![0; lir.regs.len()],
            values: lir.vars.iter().map(|v| vec![0.0; v.size]).collect(),
            buffers,
            index,
            temps: Vec::new(),
            probe: None,
        }
    }

    pub fn lir(&self) -> &'a Lir {
        self.lir
    }

    /// Runs with named inputs.
    pub fn run(&mut self, inputs: &Inputs) -> Result<Vec<f64>, InputError> {
        let args = bind_inputs(self.lir, inputs)?;
        let refs: Vec<&[f64]> = args.iter().map(Vec::as_slice).collect();
        Ok(self.run_args(&refs))
    }

    /// Runs with named inputs, also returning every derivative read made
    /// while evaluating assignment values, in execution order.
    pub fn run_probed(
        &mut self,
        inputs: &Inputs,
    ) -> Result<(Vec<f64>, Vec<ProbeEvent>), InputError> {
        self.probe = Some(Vec::new());
        let out = self.run(inputs);
        let events = self.probe.take().unwrap_or_default();
        out.map(|o| (o, events))
    }

    /// Starts recording derivative reads for subsequent runs.
    pub fn probe_start(&mut self) {
        self.probe = Some(Vec::new());
    }

    /// Stops recording and returns the reads made since [`Machine::probe_start`].
    pub fn probe_finish(&mut self) -> Vec<ProbeEvent> {
        self.probe.take().unwrap_or_default()
    }

    /// Runs with positional arguments whose lengths are already checked.
    pub fn run_args(&mut self, args: &[&[f64]]) -> Vec<f64> {
        for v in self.values.iter_mut() {
            v.fill(0.0);
        }
        for b in self.buffers.iter_mut() {
            b.data.fill(0.0);
        }
        self.regs.fill(0);
        for (&a, data) in self.lir.args.iter().zip(args) {
            self.values[a].copy_from_slice(data);
        }
        let lir = self.lir;
        self.block(&lir.body);
        self.values[lir.ret].clone()
    }

    fn int(&self, e: &IExpr) -> i64 {
        evaluate_int_expr(e, &self.regs).expect("integer errors are rejected during elaboration")
    }

    fn buffer(&self, var: VarId, space: SpaceId) -> Option<usize> {
        self.index[var][space]
    }

    fn lookup(&self, buf: usize, cell: usize, q: u32) -> f64 {
        let b = &self.buffers[buf];
        match b.plan.slot(cell, q) {
            Some(s) => b.data[s],
            None => 0.0,
        }
    }

    fn real(&mut self, e: &LReal) -> f64 {
        match e {
            LReal::Lit(v) => *v,
            LReal::Int(i) => self.int(i) as f64,
            LReal::Read { var, cell } => {
                let c = self.int(cell) as usize;
                self.values[*var][c]
            }
            LReal::Neg(a) => -self.real(a),
            LReal::Bin(op, a, b) => {
                let x = self.real(a);
                let y = self.real(b);
                op.apply(x, y)
            }
            LReal::Call(f, a) => {
                let x = self.real(a);
                f.apply(x)
            }
            LReal::Deriv {
                var,
                cell,
                space,
                param,
            } => {
                let c = self.int(cell);
                let q = self.int(param);
                let v = match self.buffer(*var, *space) {
                    Some(b) => self.lookup(b, c as usize, q as u32),
                    None => 0.0,
                };
                if let Some(p) = self.probe.as_mut() {
                    p.push(ProbeEvent {
                        cell: CellRef::new(*var, c as u32),
                        param: ParamRef::new(*space, q as u32),
                        value: v,
                    });
                }
                v
            }
        }
    }

    fn real_unprobed(&mut self, e: &LReal) -> f64 {
        let saved = self.probe.take();
        let v = self.real(e);
        self.probe = saved;
        v
    }

    fn block(&mut self, body: &[LStmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &LStmt) {
        match s {
            LStmt::SetInt { reg, value } => self.regs[*reg] = self.int(value),
            LStmt::Loop { reg, lo, hi, body } => {
                let lo = self.int(lo);
                let hi = self.int(hi);
                for i in lo..hi {
                    self.regs[*reg] = i;
                    self.block(body);
                }
            }
            LStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                if self.int(cond) != 0 {
                    self.block(then_body);
                } else {
                    self.block(else_body);
                }
            }
            LStmt::Assign(a) => self.assign(a),
            LStmt::SetDeriv(d) => self.set_deriv(d),
            LStmt::Seed { var, space } => {
                if let Some(b) = self.buffer(*var, *space) {
                    if let Some(s) = self.buffers[b].plan.slot(0, 0) {
                        self.buffers[b].data[s] = 1.0;
                    }
                }
            }
        }
    }

    fn assign(&mut self, a: &LAssign) {
        let cell = self.int(&a.cell) as usize;
        self.temps.clear();
        for t in &a.temps {
            let v = self.real_unprobed(t);
            self.temps.push(v);
        }
        for sc in &a.spaces {
            let Some(tb) = self.buffer(a.var, sc.space) else {
                continue;
            };
            let srcs: Vec<(usize, usize, Coef)> = sc
                .terms
                .iter()
                .filter_map(|t| {
                    let b = self.buffer(t.var, sc.space)?;
                    Some((b, self.int(&t.cell) as usize, t.coef))
                })
                .collect();
            let plan = self.buffers[tb].plan;
            let o = plan.offsets[cell] as usize;
            let n = plan.h(cell);
            for k in 0..n {
                let q = plan.mapping[o + k];
                let mut acc: Option<f64> = if a.accumulate {
                    Some(self.buffers[tb].data[o + k])
                } else {
                    None
                };
                for &(b, c, coef) in &srcs {
                    let x = self.lookup(b, c, q);
                    acc = Some(match (acc, coef) {
                        (None, Coef::One) => x,
                        (None, Coef::MinusOne) => -x,
                        (None, Coef::Temp(t)) => self.temps[t] * x,
                        (Some(s), Coef::One) => s + x,
                        (Some(s), Coef::MinusOne) => s - x,
                        (Some(s), Coef::Temp(t)) => s + self.temps[t] * x,
                    });
                }
                self.buffers[tb].data[o + k] = acc.unwrap_or(0.0);
            }
        }
        let v = self.real(&a.value);
        let slot = &mut self.values[a.var][cell];
        *slot = if a.accumulate { *slot + v } else { v };
    }

    fn set_deriv(&mut self, d: &LSetDeriv) {
        let Some(b) = self.buffer(d.var, d.space) else {
            return;
        };
        let c = self.int(&d.cell) as usize;
        let q = self.int(&d.param) as u32;
        if let Some(s) = self.buffers[b].plan.slot(c, q) {
            let v = self.real_unprobed(&d.value);
            self.buffers[b].data[s] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{compile, CompileOptions};

    fn inputs(pairs: &[(&str, &[f64])]) -> Inputs {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect()
    }

    const KEPLER: &str = "#lang landau\nreal[3] kepler(real E, real e) {\n  real M = E - e * sin(E)\n  kepler[0] = M\n  kepler[1] = M ' E\n  kepler[2] = M ' e\n}\n";

    #[test]
    fn kepler_value_and_derivatives() {
        let c = compile(KEPLER, &CompileOptions::default()).unwrap();
        let mut m = Machine::new(&c.lir);
        let out = m.run(&inputs(&[("E", &[0.5]), ("e", &[0.1])])).unwrap();
        assert!((out[0] - 0.452_057_446).abs() < 1e-9);
        assert!((out[1] - (1.0 - 0.1 * 0.5f64.cos())).abs() < 1e-15);
        assert!((out[2] + 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn probe_records_reads_in_order() {
        let c = compile(KEPLER, &CompileOptions::default()).unwrap();
        let mut m = Machine::new(&c.lir);
        let (_, ev) = m
            .run_probed(&inputs(&[("E", &[0.5]), ("e", &[0.1])]))
            .unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].param.space, 0);
        assert_eq!(ev[1].param.space, 1);
    }

    #[test]
    fn input_errors_name_the_argument() {
        let c = compile(KEPLER, &CompileOptions::default()).unwrap();
        let mut m = Machine::new(&c.lir);
        let err = m.run(&inputs(&[("E", &[0.5])])).unwrap_err();
        assert!(err.to_string().contains("`e`"), "{err}");
        let err = m
            .run(&inputs(&[("E", &[0.5]), ("e", &[0.1]), ("x", &[1.0])]))
            .unwrap_err();
        assert!(err.to_string().contains("`x`"), "{err}");
        let err = m
            .run(&inputs(&[("E", &[0.5, 1.0]), ("e", &[0.1])]))
            .unwrap_err();
        assert!(err.to_string().contains("`E`"), "{err}");
    }

    #[test]
    fn migration_at_origin_is_zero() {
        let src = "#lang landau\nconst int N = 4\nparameter[N] p0\nreal[N + N * N] f(real[N * N] m, real[N] p, real[N * N] d) {\n  p[:] ' p0[:] = d[:]\n  real[N] p_dot\n  for i = [0 : N]\n    for j = [0 : N]\n      if (i != j) {\n        p_dot[i] += m[N * i + j] * p[j]\n      }\n  f[0 : N] = p_dot[:]\n  f[N : N + N * N] = p_dot[:] ' p0[:]\n}\n";
        let c = compile(src, &CompileOptions::default()).unwrap();
        let mut m = Machine::new(&c.lir);
        let mut ident = vec![0.0; 16];
        for i in 0..4 {
            ident[i * 4 + i] = 1.0;
        }
        let out = m
            .run(&inputs(&[
                ("m", &[0.0; 16]),
                ("p", &[0.0; 4]),
                ("d", &ident),
            ]))
            .unwrap();
        assert!(out.iter().all(|&x| x == 0.0));

        let mvals: Vec<f64> = (0..16).map(|k| 0.1 * k as f64).collect();
        let out = m
            .run(&inputs(&[("m", &mvals), ("p", &[1.0; 4]), ("d", &ident)]))
            .unwrap();
        // d p_dot[i] / d p0[j] = m[4i + j] for j != i.
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.0 } else { mvals[4 * i + j] };
                assert_eq!(out[4 + 4 * i + j], want);
            }
        }
    }
}
