//! `const int` folding.

use std::collections::BTreeMap;

use crate::diag::{Diagnostic, Span};
use crate::frontend::ast::Expr;
use crate::frontend::ast::{ExprKind, Selector, SyntaxTree};
use crate::sema::typed::eval_bin;

/// Values of every `const int`, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstEnv {
    order: Vec<String>,
    values: BTreeMap<String, i64>,
}

impl ConstEnv {
    pub fn get(&self, name: &str) -> Option<i64> {
        self.values.get(name).copied()
    }

    pub fn insert(&mut self, name: &str, value: i64) {
        if self.values.insert(name.to_string(), value).is_none() {
            self.order.push(name.to_string());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.order.iter().map(|n| (n.as_str(), self.values[n]))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Folds every `const int` in declaration order. `overrides` replace the
/// declared value of the named constants (later constants that depend on them
/// are recomputed).
pub fn fold_constants(
    tree: &SyntaxTree,
    overrides: &BTreeMap<String, i64>,
) -> Result<ConstEnv, Vec<Diagnostic>> {
    let mut env = ConstEnv::default();
    let mut errors = Vec::new();
    for name in overrides.keys() {
        if !tree.constants.iter().any(|c| &c.name == name) {
            errors.push(Diagnostic::error(
                Span::new(1, 1),
                format!("override for unknown constant `{name}`"),
            ));
        }
    }
    for c in &tree.constants {
        if let Some(v) = overrides.get(&c.name) {
            env.insert(&c.name, *v);
            continue;
        }
        match eval_const(&c.value, &env) {
            Ok(v) => env.insert(&c.name, v),
            Err(d) => errors.push(d),
        }
    }
    if errors.is_empty() {
        Ok(env)
    } else {
        Err(errors)
    }
}

/// Evaluates an expression that may only mention integer literals and
/// already-folded constants.
pub fn eval_const(e: &Expr, env: &ConstEnv) -> Result<i64, Diagnostic> {
    match &e.kind {
        ExprKind::Int(v) => Ok(*v),
        ExprKind::Real(_) => Err(Diagnostic::error(
            e.span,
            "constant expression must be an integer",
        )),
        ExprKind::Place(p) if p.sel == Selector::Whole => env.get(&p.name).ok_or_else(|| {
            Diagnostic::error(
                p.span,
                format!(
                    "non-constant expression: `{}` is not a previously declared constant",
                    p.name
                ),
            )
        }),
        ExprKind::Neg(a) => eval_const(a, env)?
            .checked_neg()
            .ok_or_else(|| Diagnostic::error(e.span, "integer overflow in constant expression")),
        ExprKind::Not(a) => Ok((eval_const(a, env)? == 0) as i64),
        ExprKind::Binary(op, a, b) => {
            let x = eval_const(a, env)?;
            let y = eval_const(b, env)?;
            if *op == crate::frontend::ast::BinOp::Div && y == 0 {
                return Err(Diagnostic::error(e.span, "constant division by zero"));
            }
            eval_bin(*op, x, y)
                .ok_or_else(|| Diagnostic::error(e.span, "integer overflow in constant expression"))
        }
        _ => Err(Diagnostic::error(e.span, "non-constant expression")),
    }
}
