//! Central finite differences and the AD-versus-FD Jacobian report.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::adplan::ratio;
use crate::codegen::Machine;
use crate::elaborator::{render_cell, render_param, CellRef, ParamRef};
use crate::inputs::{bind_inputs, InputError, Inputs};
use crate::sema::{Program, SpaceKind};
use crate::Compilation;

use super::refeval::{dense_dual, perturbed};

/// Entries whose FD magnitude is below this use it as the error scale, so
/// `tol` times this value acts as an absolute floor.
pub const ERROR_SCALE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// Cube root of machine epsilon times `max(1, |x|)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FdError {
    #[error("invalid finite-difference step {0}")]
    InvalidStep(f64),
    #[error("non-finite value of {cell} at {point}")]
    NonFinite { cell: String, point: String },
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("derivative reads of the compiled program and the oracle disagree at entry {0}")]
    Misaligned(usize),
}

/// FD estimate of one derivative read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSample {
    pub cell: CellRef,
    pub param: ParamRef,
    pub fd: f64,
}

fn step_for(prog: &Program, args: &[&[f64]], p: ParamRef, step: Step) -> Result<f64, FdError> {
    let h = match step {
        Step::Fixed(h) => h,
        Step::Auto => {
            let x = match prog.spaces[p.space()].kind {
                SpaceKind::Argument(v) => {
                    let k = prog
                        .args
                        .iter()
                        .position(|&a| a == v)
                        .expect("scalar spaces are arguments");
                    args[k][0].abs()
                }
                SpaceKind::Parameter => 0.0,
            };
            f64::EPSILON.cbrt() * x.max(1.0)
        }
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(FdError::InvalidStep(h));
    }
    Ok(h)
}

/// Central-difference estimate of every derivative the program reads inside
/// an assignment value, in execution order. Perturbing a parameter moves
/// every cell whose derivative against it is fixed by a derivative
/// assignment; perturbing a scalar argument moves the argument.
pub fn finite_difference_jacobian(
    prog: &Program,
    args: &[&[f64]],
    step: Step,
) -> Result<Vec<FdSample>, FdError> {
    let base = dense_dual(prog, args);
    let targets: Vec<_> = base.reads.iter().filter(|r| r.in_value).collect();
    let params: BTreeSet<ParamRef> = targets.iter().map(|r| r.param).collect();
    let mut fd = vec![f64::NAN; targets.len()];
    for p in params {
        let h = step_for(prog, args, p, step)?;
        let plus = perturbed(prog, args, &base.reads, p, h);
        let minus = perturbed(prog, args, &base.reads, p, -h);
        for (k, r) in targets.iter().enumerate() {
            if r.param != p {
                continue;
            }
            let (a, b) = (plus.samples[k], minus.samples[k]);
            for (x, sign) in [(a, '+'), (b, '-')] {
                if !x.is_finite() {
                    return Err(FdError::NonFinite {
                        cell: render_cell(prog, r.cell),
                        point: format!("{} {sign} {h:e}", render_param(prog, p)),
                    });
                }
            }
            fd[k] = (a - b) / (2.0 * h);
        }
    }
    Ok(targets
        .iter()
        .zip(fd)
        .map(|(r, fd)| FdSample {
            cell: r.cell,
            param: r.param,
            fd,
        })
        .collect())
}

/// Scaled error used for pass/fail: `|ad - fd| / max(|fd|, 1e-3)`.
pub fn relative_error(ad: f64, fd: f64) -> f64 {
    let err = (ad - fd).abs();
    if err == 0.0 {
        0.0
    } else {
        err / fd.abs().max(ERROR_SCALE_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianEntry {
    pub cell: String,
    pub param: String,
    pub ad: f64,
    pub fd: f64,
    pub relerr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub tol: f64,
    pub entries: Vec<JacobianEntry>,
    pub max_relerr: f64,
    pub packed_slots: usize,
    pub dense_slots: usize,
}

impl JacobianReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.pass).count()
    }

    pub fn density(&self) -> f64 {
        ratio(self.packed_slots, self.dense_slots)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{} {} ' {}: ad {:.12e} fd {:.12e} relerr {:.3e}",
                if e.pass { "ok  " } else { "FAIL" },
                e.cell,
                e.param,
                e.ad,
                e.fd,
                e.relerr
            );
        }
        let _ = writeln!(
            s,
            "{} entries, {} failed, max relerr {:.3e}, tol {:e}",
            self.entries.len(),
            self.failures(),
            self.max_relerr,
            self.tol
        );
        let _ = writeln!(
            s,
            "packed slots {}, dense {}, density {:.6}",
            self.packed_slots,
            self.dense_slots,
            self.density()
        );
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = String::from("cell,param,ad,fd,relerr,pass\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{}",
                e.cell, e.param, e.ad, e.fd, e.relerr, e.pass
            );
        }
        s
    }
}

/// Compares every derivative the compiled program exports against central
/// differences at one input point. Entries are ordered by (cell, param),
/// repeated reads keeping execution order.
pub fn check_jacobian(
    c: &Compilation,
    inputs: &Inputs,
    tol: f64,
    step: Step,
) -> Result<JacobianReport, FdError> {
    let args = bind_inputs(&c.lir, inputs)?;
    let refs: Vec<&[f64]> = args.iter().map(Vec::as_slice).collect();
    check_jacobian_args(c, &refs, tol, step)
}

pub fn check_jacobian_args(
    c: &Compilation,
    args: &[&[f64]],
    tol: f64,
    step: Step,
) -> Result<JacobianReport, FdError> {
    let prog = &c.program;
    let mut machine = Machine::new(&c.lir);
    machine.probe_start();
    machine.run_args(args);
    let events = machine.probe_finish();
    let fd = finite_difference_jacobian(prog, args, step)?;
    if events.len() != fd.len() {
        return Err(FdError::Misaligned(events.len().min(fd.len())));
    }
    let mut rows = Vec::with_capacity(fd.len());
    for (k, (ev, f)) in events.iter().zip(&fd).enumerate() {
        if ev.cell != f.cell || ev.param != f.param {
            return Err(FdError::Misaligned(k));
        }
        rows.push((ev.cell, ev.param, k, ev.value, f.fd));
    }
    rows.sort_by_key(|r| (r.0, r.1, r.2));
    let entries: Vec<JacobianEntry> = rows
        .into_iter()
        .map(|(cell, param, _, ad, fd)| {
            let relerr = relative_error(ad, fd);
            JacobianEntry {
                cell: render_cell(prog, cell),
                param: render_param(prog, param),
                ad,
                fd,
                relerr,
                pass: relerr <= tol,
            }
        })
        .collect();
    let max_relerr =
        entries.iter().map(|e| e.relerr).fold(
            0.0,
            |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x) },
        );
    let dense: usize = c
        .lir
        .plan
        .vars
        .values()
        .map(|vp| vp.cells() * prog.spaces[vp.space].size)
        .sum();
    Ok(JacobianReport {
        tol,
        entries,
        max_relerr,
        packed_slots: c.lir.plan.total_slots(),
        dense_slots: dense,
    })
}
