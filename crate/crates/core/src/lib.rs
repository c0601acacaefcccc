//! Compiler for Landau, a small language for dynamical systems with
//! forward-mode differentiation by source transformation and sparse
//! Jacobian storage.

pub mod adplan;
pub mod codegen;
pub mod diag;
pub mod elaborator;
pub mod frontend;
pub mod harness;
pub mod inputs;
pub mod sema;

use std::collections::BTreeMap;

use adplan::NeedSet;
use diag::Diagnostics;
use elaborator::ActionTrace;
use sema::Program;

/// Options for [`compile`].
#[derive(Debug, Clone, Default)]
pub struct CompileOptions {
    /// Overrides for `const int` declarations.
    pub defines: BTreeMap<String, i64>,
}

/// Every artifact of a successful compilation.
#[derive(Debug, Clone)]
pub struct Compilation {
    pub program: Program,
    pub trace: ActionTrace,
    pub needs: NeedSet,
    pub lir: codegen::Lir,
}

/// Runs the whole pipeline up to the lowered program.
pub fn compile(source: &str, opts: &CompileOptions) -> Result<Compilation, Diagnostics> {
    let tree = frontend::parse_source(source).map_err(|d| Diagnostics::from_vec(vec![d]))?;
    let program = sema::analyze(&tree, &opts.defines)?;
    let trace = elaborator::unroll(&program).map_err(|d| Diagnostics::from_vec(vec![d]))?;
    let (needs, plan) = adplan::plan(&program, &trace);
    let lir = codegen::lower(&program, plan);
    Ok(Compilation {
        program,
        trace,
        needs,
        lir,
    })
}
