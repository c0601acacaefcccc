//! Portable C99 emission.
//!
//! One translation unit per program: constant mapping tables, two small
//! lookup helpers and the function itself. Derivative workspaces live on the
//! stack, so the function is reentrant.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use super::lir::{Coef, LAssign, LReal, LSetDeriv, LStmt, Lir, RegKind, Term};
use crate::adplan::VarPlan;
use crate::frontend::ast::BinOp;
use crate::sema::{Builtin, IExpr, SpaceId, VarId, VarRole};

const C_KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Complex",
    "_Imaginary",
    "main",
];

const MATH_H: &[&str] = &[
    "acos",
    "asin",
    "atan",
    "atan2",
    "cos",
    "sin",
    "tan",
    "acosh",
    "asinh",
    "atanh",
    "cosh",
    "sinh",
    "tanh",
    "exp",
    "exp2",
    "expm1",
    "frexp",
    "ilogb",
    "ldexp",
    "log",
    "log10",
    "log1p",
    "log2",
    "logb",
    "modf",
    "scalbn",
    "scalbln",
    "cbrt",
    "fabs",
    "hypot",
    "pow",
    "sqrt",
    "erf",
    "erfc",
    "lgamma",
    "tgamma",
    "ceil",
    "floor",
    "nearbyint",
    "rint",
    "lrint",
    "llrint",
    "round",
    "lround",
    "llround",
    "trunc",
    "fmod",
    "remainder",
    "remquo",
    "copysign",
    "nan",
    "nextafter",
    "nexttoward",
    "fdim",
    "fmax",
    "fmin",
    "fma",
    "j0",
    "j1",
    "jn",
    "y0",
    "y1",
    "yn",
    "gamma",
    "HUGE_VAL",
    "HUGE_VALF",
    "HUGE_VALL",
    "INFINITY",
    "NAN",
    "FP_INFINITE",
    "FP_NAN",
    "FP_NORMAL",
    "FP_SUBNORMAL",
    "FP_ZERO",
    "FP_ILOGB0",
    "FP_ILOGBNAN",
    "MATH_ERRNO",
    "MATH_ERREXCEPT",
    "math_errhandling",
    "signgam",
    "float_t",
    "double_t",
];

/// True for names that cannot be used verbatim as a C identifier in the
/// emitted unit.
pub fn is_reserved_c_name(name: &str) -> bool {
    C_KEYWORDS.contains(&name)
        || MATH_H.contains(&name)
        || name.starts_with("ld_")
        || name.starts_with('_')
        || name == "ret"
}

/// Fixed compiler flags the emitted code is written to pass.
pub const STRICT_FLAGS: &[&str] = &[
    "-std=c99",
    "-pedantic-errors",
    "-Wall",
    "-Wextra",
    "-Werror",
    "-ffp-contract=off",
];

#[derive(Default)]
struct Used {
    find: bool,
    get: bool,
    sqr: bool,
    off: BTreeSet<(VarId, SpaceId)>,
    map: BTreeSet<(VarId, SpaceId)>,
    inv: BTreeSet<(VarId, SpaceId)>,
    bufs: BTreeSet<(VarId, SpaceId)>,
    vars: BTreeSet<VarId>,
    regs: BTreeSet<usize>,
}

struct Emitter<'a> {
    lir: &'a Lir,
    var_names: Vec<String>,
    reg_names: Vec<String>,
    used: Used,
    out: String,
    hoist: usize,
}

/// C names of every real variable: DSL names where possible, prefixed and
/// numbered otherwise. The return variable is `ret`.
fn assign_names(lir: &Lir) -> (Vec<String>, Vec<String>) {
    let mut count: HashMap<&str, usize> = HashMap::new();
    for v in &lir.vars {
        *count.entry(v.name.as_str()).or_default() += 1;
    }
    for r in &lir.regs {
        *count.entry(r.name.as_str()).or_default() += 1;
    }
    let ok = |n: &str| !is_reserved_c_name(n) && n != lir.name && count[n] == 1;
    let vars = lir
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i == lir.ret {
                "ret".to_string()
            } else if ok(&v.name) {
                v.name.clone()
            } else {
                format!("ld_v{i}_{}", v.name.trim_start_matches('_'))
            }
        })
        .collect();
    let regs = lir
        .regs
        .iter()
        .enumerate()
        .map(|(i, r)| match r.kind {
            RegKind::Element => format!("ld_e{i}"),
            _ if ok(&r.name) => r.name.clone(),
            _ => format!("ld_i{i}_{}", r.name.trim_start_matches('_')),
        })
        .collect();
    (vars, regs)
}

/// Emits the complete translation unit.
pub fn emit_c(lir: &Lir) -> String {
    let (var_names, reg_names) = assign_names(lir);
    let mut e = Emitter {
        lir,
        var_names,
        reg_names,
        used: Used::default(),
        out: String::new(),
        hoist: 0,
    };
    e.block(&lir.body, 1);
    let body = std::mem::take(&mut e.out);
    let used = std::mem::take(&mut e.used);

    let mut out = String::new();
    out.push_str("#include <math.h>\n\n");
    let mut any_table = false;
    for (key, vp) in &lir.plan.vars {
        let (v, s) = *key;
        if used.off.contains(key) {
            table(&mut out, &format!("ld_off{v}_{s}"), &vp.offsets);
            any_table = true;
        }
        if used.map.contains(key) {
            table(&mut out, &format!("ld_map{v}_{s}"), &vp.mapping);
            any_table = true;
        }
        if used.inv.contains(key) {
            table(&mut out, &format!("ld_inv{v}_{s}"), &vp.inverse);
            any_table = true;
        }
    }
    if any_table {
        out.push('\n');
    }
    if used.find || used.get {
        out.push_str(
            "static long ld_find(const int *off, const int *inv, long width, long c, long q)\n{\n    int s;\n    if (q < 0 || q >= width) {\n        return -1;\n    }\n    s = inv[c * width + q];\n    return s < 0 ? -1 : off[c] + s;\n}\n\n",
        );
    }
    if used.get {
        out.push_str(
            "static double ld_get(const double *d, const int *off, const int *inv, long width, long c, long q)\n{\n    long s = ld_find(off, inv, width, c, q);\n    return s < 0 ? 0.0 : d[s];\n}\n\n",
        );
    }
    if used.sqr {
        out.push_str("static double ld_sqr(double x)\n{\n    return x * x;\n}\n\n");
    }

    let mut params = vec!["double *ret".to_string()];
    for &a in &lir.args {
        let v = &lir.vars[a];
        let n = &e.var_names[a];
        params.push(if v.scalar {
            format!("double {n}")
        } else {
            format!("const double *{n}")
        });
    }
    let _ = writeln!(out, "void {}({})\n{{", lir.name, params.join(", "));
    let mut voids = Vec::new();
    for (i, v) in lir.vars.iter().enumerate() {
        if v.role != VarRole::Local || !used.vars.contains(&i) {
            continue;
        }
        let n = &e.var_names[i];
        if v.scalar {
            let _ = writeln!(out, "    double {n} = 0.0;");
            voids.push(n.clone());
        } else {
            let _ = writeln!(out, "    double {n}[{}] = {{0}};", v.size.max(1));
        }
    }
    for (key, vp) in &lir.plan.vars {
        if !used.bufs.contains(key) {
            continue;
        }
        let (v, s) = *key;
        let _ = writeln!(
            out,
            "    double ld_d{v}_{s}[{}] = {{0}}; /* d({})/d({}) */",
            vp.total(),
            lir.vars[v].name,
            lir.spaces[s].name
        );
    }
    for (i, r) in lir.regs.iter().enumerate() {
        if r.kind == RegKind::Local && used.regs.contains(&i) {
            let _ = writeln!(out, "    long {} = 0;", e.reg_names[i]);
            voids.push(e.reg_names[i].clone());
        }
    }
    if !used.vars.contains(&lir.ret) {
        voids.push("ret".into());
    }
    for &a in &lir.args {
        if !used.vars.contains(&a) {
            voids.push(e.var_names[a].clone());
        }
    }
    for v in voids {
        let _ = writeln!(out, "    (void){v};");
    }
    out.push_str(&body);
    out.push_str("}\n");
    out
}

fn table<T: std::fmt::Display>(out: &mut String, name: &str, data: &[T]) {
    let _ = write!(out, "static const int {name}[{}] = {{", data.len().max(1));
    if data.is_empty() {
        out.push('0');
    }
    for (i, x) in data.iter().enumerate() {
        if i % 16 == 0 {
            out.push_str("\n    ");
        } else {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
        if i + 1 < data.len() {
            out.push(',');
        }
    }
    out.push_str("\n};\n");
}

fn real_lit(v: f64) -> String {
    if v.is_nan() {
        "(0.0 / 0.0)".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "HUGE_VAL".into()
        } else {
            "(-HUGE_VAL)".into()
        }
    } else if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        format!("({v:?})")
    } else {
        format!("{v:?}")
    }
}

fn int_lit(v: i64) -> String {
    if v == i64::MIN {
        "(-9223372036854775807L - 1)".into()
    } else if v < 0 {
        format!("({v}L)")
    } else if v > i32::MAX as i64 {
        format!("{v}L")
    } else {
        v.to_string()
    }
}

impl<'a> Emitter<'a> {
    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn vp(&self, var: VarId, space: SpaceId) -> Option<&'a VarPlan> {
        self.lir.plan.get(var, space)
    }

    fn int(&mut self, e: &IExpr) -> String {
        match e {
            IExpr::Lit(v) => int_lit(*v),
            IExpr::Var(r) => {
                self.used.regs.insert(*r);
                self.reg_names[*r].clone()
            }
            IExpr::Neg(a) => format!("(-{})", self.int(a)),
            IExpr::Not(a) => format!("(!{})", self.int(a)),
            IExpr::Bin(op, a, b) => {
                let a = self.int(a);
                let b = self.int(b);
                let sym = match op {
                    BinOp::And => "&&",
                    BinOp::Or => "||",
                    op => op.symbol(),
                };
                format!("({a} {sym} {b})")
            }
        }
    }

    fn read(&mut self, var: VarId, cell: &str) -> String {
        self.used.vars.insert(var);
        let v = &self.lir.vars[var];
        let n = &self.var_names[var];
        if v.scalar && var != self.lir.ret {
            n.clone()
        } else {
            format!("{n}[{cell}]")
        }
    }

    fn buf(&mut self, var: VarId, space: SpaceId) -> String {
        self.used.bufs.insert((var, space));
        format!("ld_d{var}_{space}")
    }

    /// `ld_get(...)` for a derivative of (var, cell) with respect to `q`.
    fn get(&mut self, var: VarId, space: SpaceId, cell: &str, q: &str) -> String {
        let Some(vp) = self.vp(var, space) else {
            return "0.0".into();
        };
        self.used.get = true;
        self.used.off.insert((var, space));
        self.used.inv.insert((var, space));
        let b = self.buf(var, space);
        format!(
            "ld_get({b}, ld_off{var}_{space}, ld_inv{var}_{space}, {}, {cell}, {q})",
            vp.width
        )
    }

    fn real(&mut self, e: &LReal) -> String {
        match e {
            LReal::Lit(v) => real_lit(*v),
            LReal::Int(i) => format!("(double){}", self.int(i)),
            LReal::Read { var, cell } => {
                let c = self.int(cell);
                self.read(*var, &c)
            }
            LReal::Neg(a) => format!("(-{})", self.real(a)),
            LReal::Bin(op, a, b) => {
                let a = self.real(a);
                let b = self.real(b);
                format!("({a} {} {b})", op.symbol())
            }
            LReal::Call(Builtin::Sqr, a) => {
                self.used.sqr = true;
                format!("ld_sqr({})", self.real(a))
            }
            LReal::Call(f, a) => format!("{}({})", f.name(), self.real(a)),
            LReal::Deriv {
                var,
                cell,
                space,
                param,
            } => {
                let c = self.int(cell);
                let q = self.int(param);
                self.get(*var, *space, &c, &q)
            }
        }
    }

    fn block(&mut self, body: &[LStmt], depth: usize) {
        for s in body {
            self.stmt(s, depth);
        }
    }

    fn stmt(&mut self, s: &LStmt, depth: usize) {
        match s {
            LStmt::SetInt { reg, value } => {
                let v = self.int(value);
                self.used.regs.insert(*reg);
                let line = format!("{} = {v};", self.reg_names[*reg]);
                self.line(depth, &line);
            }
            LStmt::Loop { reg, lo, hi, body } => {
                let lo = self.int(lo);
                let hi = self.int(hi);
                let i = self.reg_names[*reg].clone();
                let bound = if hi.parse::<i64>().is_ok() {
                    self.line(depth, "{");
                    hi
                } else {
                    self.hoist += 1;
                    let h = format!("ld_hi{}", self.hoist);
                    self.line(depth, "{");
                    self.line(depth + 1, &format!("const long {h} = {hi};"));
                    h
                };
                self.line(depth + 1, &format!("long {i};"));
                self.line(
                    depth + 1,
                    &format!("for ({i} = {lo}; {i} < {bound}; ++{i}) {{"),
                );
                self.block(body, depth + 2);
                self.line(depth + 1, "}");
                self.line(depth, "}");
            }
            LStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let c = self.int(cond);
                self.line(depth, &format!("if ({c}) {{"));
                self.block(then_body, depth + 1);
                if else_body.is_empty() {
                    self.line(depth, "}");
                } else {
                    self.line(depth, "} else {");
                    self.block(else_body, depth + 1);
                    self.line(depth, "}");
                }
            }
            LStmt::Assign(a) => self.assign(a, depth),
            LStmt::SetDeriv(d) => self.set_deriv(d, depth),
            LStmt::Seed { var, space } => {
                if let Some(slot) = self.vp(*var, *space).and_then(|vp| vp.slot(0, 0)) {
                    let b = self.buf(*var, *space);
                    self.line(depth, &format!("{b}[{slot}] = 1.0;"));
                }
            }
        }
    }

    fn assign(&mut self, a: &LAssign, depth: usize) {
        self.line(depth, "{");
        let d = depth + 1;
        let cell_ref = match a.cell.as_lit() {
            Some(cv) => cv.to_string(),
            None => {
                let c = self.int(&a.cell);
                self.line(d, &format!("const long ld_c = {c};"));
                "ld_c".to_string()
            }
        };
        for (k, t) in a.temps.iter().enumerate() {
            let v = self.real(t);
            self.line(d, &format!("const double ld_t{k} = {v};"));
        }
        for sc in &a.spaces {
            let Some(vp) = self.vp(a.var, sc.space) else {
                continue;
            };
            let (v, s) = (a.var, sc.space);
            let terms: Vec<_> = sc
                .terms
                .iter()
                .filter(|t| self.vp(t.var, s).is_some())
                .collect();
            if terms.is_empty() && a.accumulate {
                continue;
            }
            let tb = self.buf(v, s);
            if let Some(cv) = a.cell.as_lit() {
                self.static_slots(a, vp, cv as usize, &terms, &tb, d);
                continue;
            }
            self.used.off.insert((v, s));
            self.line(
                d,
                &format!(
                    "{{ /* d({})/d({}) */",
                    self.lir.vars[v].name, self.lir.spaces[s].name
                ),
            );
            let dd = d + 1;
            self.line(dd, &format!("const int ld_o = ld_off{v}_{s}[ld_c];"));
            self.line(
                dd,
                &format!("const int ld_n = ld_off{v}_{s}[ld_c + 1] - ld_o;"),
            );
            self.line(dd, "int ld_k;");
            let mut srcs = Vec::new();
            for (j, t) in terms.iter().enumerate() {
                if t.var == a.var && t.cell == a.cell {
                    srcs.push(None);
                } else {
                    let cell = self.int(&t.cell);
                    self.line(dd, &format!("const long ld_s{j} = {cell};"));
                    srcs.push(Some(format!("ld_s{j}")));
                }
            }
            self.line(dd, "for (ld_k = 0; ld_k < ld_n; ++ld_k) {");
            let d3 = dd + 1;
            if terms.is_empty() {
                self.line(d3, &format!("{tb}[ld_o + ld_k] = 0.0;"));
            } else {
                if srcs.iter().any(Option::is_some) {
                    self.used.map.insert((v, s));
                    self.line(
                        d3,
                        &format!("const long ld_q = ld_map{v}_{s}[ld_o + ld_k];"),
                    );
                }
                let mut acc_started = false;
                if a.accumulate {
                    self.line(d3, &format!("double ld_acc = {tb}[ld_o + ld_k];"));
                    acc_started = true;
                }
                for (t, src) in terms.iter().zip(&srcs) {
                    let x = match src {
                        None => format!("{tb}[ld_o + ld_k]"),
                        Some(cell) => self.get(t.var, s, cell, "ld_q"),
                    };
                    let line = match (acc_started, t.coef) {
                        (false, Coef::One) => format!("double ld_acc = {x};"),
                        (false, Coef::MinusOne) => format!("double ld_acc = -{x};"),
                        (false, Coef::Temp(k)) => format!("double ld_acc = ld_t{k} * {x};"),
                        (true, Coef::One) => format!("ld_acc = ld_acc + {x};"),
                        (true, Coef::MinusOne) => format!("ld_acc = ld_acc - {x};"),
                        (true, Coef::Temp(k)) => format!("ld_acc = ld_acc + ld_t{k} * {x};"),
                    };
                    self.line(d3, &line);
                    acc_started = true;
                }
                self.line(d3, &format!("{tb}[ld_o + ld_k] = ld_acc;"));
            }
            self.line(dd, "}");
            self.line(d, "}");
        }
        let value = self.real(&a.value);
        let target = self.read(a.var, &cell_ref);
        if a.accumulate {
            self.line(d, &format!("{target} = {target} + {value};"));
        } else {
            self.line(d, &format!("{target} = {value};"));
        }
        self.line(depth, "}");
    }

    /// Derivative update of a cell known at compile time: one line per
    /// packed slot, with parameter indices and source slots resolved.
    fn static_slots(
        &mut self,
        a: &LAssign,
        vp: &VarPlan,
        cell: usize,
        terms: &[&Term],
        tb: &str,
        depth: usize,
    ) {
        let s = vp.space;
        let o = vp.offsets[cell] as usize;
        for (k, &q) in vp.params(cell).iter().enumerate() {
            let slot = o + k;
            let mut acc = a.accumulate.then(|| format!("{tb}[{slot}]"));
            for t in terms {
                let x = if t.var == a.var && t.cell == a.cell {
                    format!("{tb}[{slot}]")
                } else if let Some(c) = t.cell.as_lit() {
                    match self.vp(t.var, s).and_then(|p| p.slot(c as usize, q)) {
                        Some(src) => format!("{}[{src}]", self.buf(t.var, s)),
                        None => "0.0".into(),
                    }
                } else {
                    let c = self.int(&t.cell);
                    self.get(t.var, s, &c, &q.to_string())
                };
                acc = Some(match (acc, t.coef) {
                    (None, Coef::One) => x,
                    (None, Coef::MinusOne) => format!("-{x}"),
                    (None, Coef::Temp(k)) => format!("ld_t{k} * {x}"),
                    (Some(p), Coef::One) => format!("({p} + {x})"),
                    (Some(p), Coef::MinusOne) => format!("({p} - {x})"),
                    (Some(p), Coef::Temp(k)) => format!("({p} + ld_t{k} * {x})"),
                });
            }
            let value = acc.unwrap_or_else(|| "0.0".into());
            self.line(depth, &format!("{tb}[{slot}] = {value};"));
        }
    }

    fn set_deriv(&mut self, sd: &LSetDeriv, depth: usize) {
        let Some(vp) = self.vp(sd.var, sd.space) else {
            return;
        };
        let (v, s) = (sd.var, sd.space);
        self.used.find = true;
        self.used.off.insert((v, s));
        self.used.inv.insert((v, s));
        let c = self.int(&sd.cell);
        let q = self.int(&sd.param);
        let b = self.buf(v, s);
        self.line(depth, "{");
        self.line(
            depth + 1,
            &format!(
                "const long ld_s = ld_find(ld_off{v}_{s}, ld_inv{v}_{s}, {}, {c}, {q});",
                vp.width
            ),
        );
        self.line(depth + 1, "if (ld_s >= 0) {");
        let value = self.real(&sd.value);
        self.line(depth + 2, &format!("{b}[ld_s] = {value};"));
        self.line(depth + 1, "}");
        self.line(depth, "}");
    }
}

/// Summary of the packed workspaces declared by [`emit_c`], keyed by
/// (variable, space).
pub fn workspace_sizes(lir: &Lir) -> BTreeMap<(VarId, SpaceId), usize> {
    lir.plan
        .vars
        .iter()
        .map(|(k, vp)| (*k, vp.total()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{compile, CompileOptions};

    #[test]
    fn kepler_signature_and_determinism() {
        let src = "#lang landau\nreal[3] kepler(real E, real e) {\n  real M = E - e * sin(E)\n  kepler[0] = M\n  kepler[1] = M ' E\n  kepler[2] = M ' e\n}\n";
        let c = compile(src, &CompileOptions::default()).unwrap();
        let a = emit_c(&c.lir);
        let b = emit_c(&c.lir);
        assert_eq!(a, b);
        assert!(
            a.contains("void kepler(double *ret, double E, double e)"),
            "{a}"
        );
        assert!(a.starts_with("#include <math.h>\n"));
        assert_eq!(a.matches("#include").count(), 1);
    }

    #[test]
    fn empty_function() {
        let c = compile("#lang landau\nreal f() {\n}\n", &CompileOptions::default()).unwrap();
        let text = emit_c(&c.lir);
        assert_eq!(
            text,
            "#include <math.h>\n\nvoid f(double *ret)\n{\n    (void)ret;\n}\n"
        );
    }

    #[test]
    fn reserved_names_are_mangled() {
        let c = compile(
            "#lang landau\nreal f(real[2] int_, real pow) {\n  real double_ = pow\n  f = double_ + int_[1]\n}\n",
            &CompileOptions::default(),
        )
        .unwrap();
        let text = emit_c(&c.lir);
        assert!(text.contains("double ld_v2_pow"), "{text}");
    }
}
