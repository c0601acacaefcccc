//! Forward-mode symbolic differentiation of single assignments.
//!
//! The right-hand side is differentiated with respect to each occurrence of
//! a derivative-bearing read. The result is a list of terms `coef * ∂source`
//! whose sum is the derivative of the target (plus the target's own
//! derivative for `+=`).

use crate::sema::{Builtin, IExpr, Place, Program, RBinOp, RExpr, Sel, Stmt, StmtId};

#[derive(Debug, Clone, PartialEq)]
pub struct DiffTerm {
    pub source: Place,
    pub coef: RExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffStatement {
    pub stmt: StmtId,
    pub target: Place,
    pub accumulate: bool,
    pub value: RExpr,
    pub terms: Vec<DiffTerm>,
}

/// Differentiates a real assignment. Other statements yield `None`.
pub fn differentiate_statement(prog: &Program, stmt: &Stmt) -> Option<DiffStatement> {
    let Stmt::Assign {
        id,
        target,
        accumulate,
        value,
        ..
    } = stmt
    else {
        return None;
    };
    let mut terms = Vec::new();
    collect_terms(prog, value, &lit(1.0), &mut terms);
    Some(DiffStatement {
        stmt: *id,
        target: target.clone(),
        accumulate: *accumulate,
        value: value.clone(),
        terms,
    })
}

fn lit(v: f64) -> RExpr {
    RExpr::Lit(v)
}

fn is_lit(e: &RExpr, v: f64) -> bool {
    matches!(e, RExpr::Lit(x) if *x == v)
}

pub fn neg(a: RExpr) -> RExpr {
    match a {
        RExpr::Neg(inner) => *inner,
        RExpr::Lit(v) => RExpr::Lit(-v),
        a => RExpr::Neg(Box::new(a)),
    }
}

pub fn mul(a: RExpr, b: RExpr) -> RExpr {
    if is_lit(&a, 1.0) {
        return b;
    }
    if is_lit(&b, 1.0) {
        return a;
    }
    if is_lit(&a, -1.0) {
        return neg(b);
    }
    if is_lit(&b, -1.0) {
        return neg(a);
    }
    if let RExpr::Neg(x) = a {
        return neg(mul(*x, b));
    }
    if let RExpr::Neg(y) = b {
        return neg(mul(a, *y));
    }
    RExpr::Bin(RBinOp::Mul, Box::new(a), Box::new(b))
}

fn div(a: RExpr, b: RExpr) -> RExpr {
    if is_lit(&b, 1.0) {
        return a;
    }
    if let RExpr::Neg(x) = a {
        return neg(div(*x, b));
    }
    RExpr::Bin(RBinOp::Div, Box::new(a), Box::new(b))
}

fn bin(op: RBinOp, a: &RExpr, b: &RExpr) -> RExpr {
    RExpr::Bin(op, Box::new(a.clone()), Box::new(b.clone()))
}

fn call(f: Builtin, a: &RExpr) -> RExpr {
    RExpr::Call(f, Box::new(a.clone()))
}

/// Closed-form derivative of a builtin at `a`.
pub fn builtin_derivative(f: Builtin, a: &RExpr) -> RExpr {
    match f {
        Builtin::Sin => call(Builtin::Cos, a),
        Builtin::Cos => neg(call(Builtin::Sin, a)),
        Builtin::Tan => bin(
            RBinOp::Add,
            &lit(1.0),
            &call(Builtin::Sqr, &call(Builtin::Tan, a)),
        ),
        Builtin::Exp => call(Builtin::Exp, a),
        Builtin::Log => div(lit(1.0), a.clone()),
        Builtin::Sqrt => div(
            lit(1.0),
            bin(RBinOp::Mul, &lit(2.0), &call(Builtin::Sqrt, a)),
        ),
        Builtin::Sqr => bin(RBinOp::Mul, &lit(2.0), a),
        Builtin::Atan => div(
            lit(1.0),
            bin(RBinOp::Add, &lit(1.0), &call(Builtin::Sqr, a)),
        ),
    }
}

/// `outer` is the derivative of the whole right-hand side with respect to
/// the subexpression `e`.
fn collect_terms(prog: &Program, e: &RExpr, outer: &RExpr, out: &mut Vec<DiffTerm>) {
    match e {
        RExpr::Lit(_) | RExpr::Int(_) | RExpr::Deriv(..) => {}
        RExpr::Read(p) => {
            if prog.var(p.var).bearing {
                out.push(DiffTerm {
                    source: p.clone(),
                    coef: outer.clone(),
                });
            }
        }
        RExpr::Neg(a) => collect_terms(prog, a, &neg(outer.clone()), out),
        RExpr::Call(f, a) => {
            let inner = mul(builtin_derivative(*f, a), outer.clone());
            collect_terms(prog, a, &inner, out);
        }
        RExpr::Bin(op, a, b) => match op {
            RBinOp::Add => {
                collect_terms(prog, a, outer, out);
                collect_terms(prog, b, outer, out);
            }
            RBinOp::Sub => {
                collect_terms(prog, a, outer, out);
                collect_terms(prog, b, &neg(outer.clone()), out);
            }
            RBinOp::Mul => {
                collect_terms(prog, a, &mul(outer.clone(), (**b).clone()), out);
                collect_terms(prog, b, &mul((**a).clone(), outer.clone()), out);
            }
            RBinOp::Div => {
                collect_terms(prog, a, &div(outer.clone(), (**b).clone()), out);
                let q = div((**a).clone(), bin(RBinOp::Mul, b, b));
                collect_terms(prog, b, &mul(neg(q), outer.clone()), out);
            }
        },
    }
}

/// Renders expressions over typed places back to source-like text.
pub struct Show<'a> {
    pub prog: &'a Program,
}

impl Show<'_> {
    pub fn int(&self, e: &IExpr) -> String {
        match e {
            IExpr::Lit(v) => v.to_string(),
            IExpr::Var(i) => self.prog.ints[*i].name.clone(),
            IExpr::Neg(a) => format!("-{}", self.int_atom(a)),
            IExpr::Not(a) => format!("!{}", self.int_atom(a)),
            IExpr::Bin(op, a, b) => {
                format!("{} {} {}", self.int_atom(a), op.symbol(), self.int_atom(b))
            }
        }
    }

    fn int_atom(&self, e: &IExpr) -> String {
        match e {
            IExpr::Bin(..) => format!("({})", self.int(e)),
            _ => self.int(e),
        }
    }

    pub fn sel(&self, name: &str, scalar: bool, sel: &Sel) -> String {
        match sel {
            Sel::Cell(_) if scalar => name.to_string(),
            Sel::Cell(i) => format!("{}[{}]", name, self.int(i)),
            Sel::Range(lo, hi) => format!("{}[{} : {}]", name, self.int(lo), self.int(hi)),
        }
    }

    pub fn place(&self, p: &Place) -> String {
        let v = self.prog.var(p.var);
        self.sel(&v.name, v.scalar, &p.sel)
    }

    pub fn real(&self, e: &RExpr) -> String {
        match e {
            RExpr::Lit(v) => format!("{v:?}"),
            RExpr::Int(i) => self.int(i),
            RExpr::Read(p) => self.place(p),
            RExpr::Neg(a) => format!("-{}", self.atom(a)),
            RExpr::Bin(op, a, b) => format!("{} {} {}", self.atom(a), op.symbol(), self.atom(b)),
            RExpr::Call(f, a) => format!("{}({})", f.name(), self.real(a)),
            RExpr::Deriv(v, w) => {
                let s = &self.prog.spaces[w.space];
                format!(
                    "d({})/d({})",
                    self.place(v),
                    self.sel(&s.name, s.is_scalar(), &w.sel)
                )
            }
        }
    }

    fn atom(&self, e: &RExpr) -> String {
        match e {
            RExpr::Bin(..) | RExpr::Neg(_) => format!("({})", self.real(e)),
            _ => self.real(e),
        }
    }
}

impl DiffStatement {
    /// Line-per-statement rendering for one differentiation space: derivative
    /// accumulation first, then the value update.
    pub fn render(&self, prog: &Program, space: usize) -> String {
        let show = Show { prog };
        let s = &prog.spaces[space].name;
        let d = |p: &Place| format!("d({})/d({})", show.place(p), s);
        let mut parts = Vec::new();
        if self.accumulate {
            parts.push(d(&self.target));
        }
        for t in &self.terms {
            let part = match &t.coef {
                RExpr::Lit(v) if *v == 1.0 => d(&t.source),
                RExpr::Lit(v) if *v == -1.0 => format!("-{}", d(&t.source)),
                c => format!("{} * {}", show.atom(c), d(&t.source)),
            };
            parts.push(part);
        }
        let rhs = if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ").replace("+ -", "- ")
        };
        let op = if self.accumulate { "+=" } else { "=" };
        format!(
            "{} = {}\n{} {} {}",
            d(&self.target),
            rhs,
            show.place(&self.target),
            op,
            show.real(&self.value)
        )
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::frontend::parse_source;
    use crate::sema::analyze;

    fn diffs(src: &str) -> (Program, Vec<DiffStatement>) {
        let prog = analyze(&parse_source(src).unwrap(), &BTreeMap::new()).unwrap();
        let d = prog
            .body
            .iter()
            .filter_map(|s| differentiate_statement(&prog, s))
            .collect();
        (prog, d)
    }

    const KEPLER: &str = "#lang landau\nreal M(real E, real e) {\n  real w1 = E\n  real w2 = e\n  real w3 = sin(w1)\n  real w4 = w3 * w2\n  real w5 = w1 - w4\n  M = w5\n}\n";

    #[test]
    fn product_rule_matches_forward_form() {
        let (prog, d) = diffs(KEPLER);
        assert_eq!(
            d[3].render(&prog, 0),
            "d(w4)/d(E) = w2 * d(w3)/d(E) + w3 * d(w2)/d(E)\nw4 = w3 * w2"
        );
        assert_eq!(
            d[2].render(&prog, 0),
            "d(w3)/d(E) = cos(w1) * d(w1)/d(E)\nw3 = sin(w1)"
        );
        assert_eq!(
            d[4].render(&prog, 1),
            "d(w5)/d(e) = d(w1)/d(e) - d(w4)/d(e)\nw5 = w1 - w4"
        );
    }

    #[test]
    fn constants_have_no_terms() {
        let (prog, d) = diffs("#lang landau\nreal f(real a) {\n  real x = 5\n  f = x\n}\n");
        assert!(d[0].terms.is_empty());
        assert_eq!(d[0].render(&prog, 0), "d(x)/d(a) = 0\nx = 5");
    }

    #[test]
    fn quotient_and_chain_rules() {
        let (prog, d) = diffs("#lang landau\nreal f(real a, real b) {\n  f = sqrt(a) / b\n}\n");
        let show = Show { prog: &prog };
        assert_eq!(
            show.real(&d[0].terms[0].coef),
            "(1.0 / (2.0 * sqrt(a))) * (1.0 / b)"
        );
        assert_eq!(show.real(&d[0].terms[1].coef), "-(sqrt(a) / (b * b))");
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let x = 0.7;
        for f in Builtin::ALL {
            let h = 1e-6;
            let fd = (f.apply(x + h) - f.apply(x - h)) / (2.0 * h);
            let d = builtin_derivative(f, &RExpr::Lit(x));
            let v = eval_const(&d);
            assert!((v - fd).abs() < 1e-8, "{}: {v} vs {fd}", f.name());
        }
    }

    fn eval_const(e: &RExpr) -> f64 {
        match e {
            RExpr::Lit(v) => *v,
            RExpr::Neg(a) => -eval_const(a),
            RExpr::Bin(op, a, b) => op.apply(eval_const(a), eval_const(b)),
            RExpr::Call(f, a) => f.apply(eval_const(a)),
            _ => unreachable!(),
        }
    }
}
