//! Semantic analysis: constant folding, name resolution and typing.

pub mod consts;
pub mod typeck;
pub mod typed;

use std::collections::BTreeMap;

pub use consts::{fold_constants, ConstEnv};
pub use typeck::typecheck;
pub use typed::*;

use crate::diag::Diagnostics;
use crate::frontend::ast::SyntaxTree;

/// Folds constants (applying `overrides`) and type-checks the tree.
pub fn analyze(
    tree: &SyntaxTree,
    overrides: &BTreeMap<String, i64>,
) -> Result<Program, Diagnostics> {
    let env = fold_constants(tree, overrides).map_err(Diagnostics::from_vec)?;
    typecheck(tree, &env).map_err(Diagnostics::from_vec)
}
