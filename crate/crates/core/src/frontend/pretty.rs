//! Pretty-printer producing canonical source from a syntax tree.

use std::fmt::Write;

use super::ast::*;
use super::lexer::HEADER;

pub fn pretty_print(tree: &SyntaxTree) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for c in &tree.constants {
        let _ = writeln!(out, "const int {} = {}", c.name, expr(&c.value));
    }
    for p in &tree.parameters {
        let _ = writeln!(out, "parameter[{}] {}", expr(&p.size), p.name);
    }
    let f = &tree.function;
    let args: Vec<String> = f
        .args
        .iter()
        .map(|a| format!("{} {}", type_spec(&a.ty), a.name))
        .collect();
    let _ = writeln!(
        out,
        "{} {}({}) {{",
        type_spec(&f.ret),
        f.name,
        args.join(", ")
    );
    block(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

fn type_spec(t: &TypeSpec) -> String {
    match t {
        TypeSpec::Int => "int".into(),
        TypeSpec::Real => "real".into(),
        TypeSpec::RealArray(n) => format!("real[{}]", expr(n)),
    }
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::VarDecl { ty, name, init } => {
            let _ = write!(out, "{} {}", type_spec(ty), name);
            if let Some(e) = init {
                let _ = write!(out, " = {}", expr(e));
            }
            out.push('\n');
        }
        StmtKind::Assign { target, op, value } => {
            let op = match op {
                AssignOp::Set => "=",
                AssignOp::Add => "+=",
            };
            let _ = writeln!(out, "{} {} {}", place(target), op, expr(value));
        }
        StmtKind::DerivAssign { target, wrt, value } => {
            let _ = writeln!(out, "{} ' {} = {}", place(target), place(wrt), expr(value));
        }
        StmtKind::Discard { target, wrt } => {
            let _ = writeln!(out, "discard {} ' {}", place(target), place(wrt));
        }
        StmtKind::For { var, lo, hi, body } => {
            let _ = writeln!(out, "for {} = [{} : {}] {{", var, expr(lo), expr(hi));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "if ({}) {{", expr(cond));
            block(out, then_body, depth + 1);
            indent(out, depth);
            match else_body {
                Some(e) => {
                    out.push_str("} else {\n");
                    block(out, e, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
    }
}

pub fn place(p: &Place) -> String {
    match &p.sel {
        Selector::Whole => p.name.clone(),
        Selector::Index(i) => format!("{}[{}]", p.name, expr(i)),
        Selector::Slice(lo, hi) => {
            let lo = lo.as_ref().map(|e| expr(e)).unwrap_or_default();
            let hi = hi.as_ref().map(|e| expr(e)).unwrap_or_default();
            format!("{}[{} : {}]", p.name, lo, hi)
        }
    }
}

const UNARY_PREC: u8 = 7;

pub fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

fn expr_prec(e: &Expr, ctx: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Real(v) => format!("{v:?}"),
        ExprKind::Place(p) => place(p),
        ExprKind::Deriv(v, w) => format!("{} ' {}", place(v), place(w)),
        ExprKind::Call(name, args) => {
            let args: Vec<String> = args.iter().map(expr).collect();
            format!("{}({})", name, args.join(", "))
        }
        ExprKind::Neg(inner) => format!("-{}", expr_prec(inner, UNARY_PREC)),
        ExprKind::Not(inner) => format!("!{}", expr_prec(inner, UNARY_PREC)),
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            let s = format!(
                "{} {} {}",
                expr_prec(l, p),
                op.symbol(),
                expr_prec(r, p + 1)
            );
            if p < ctx {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
