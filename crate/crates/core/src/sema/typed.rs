//! Name-resolved, typed program representation shared by every later stage.

use std::fmt;

use super::consts::ConstEnv;
use crate::diag::Span;
use crate::frontend::ast::BinOp;

pub type VarId = usize;
pub type IntId = usize;
pub type SpaceId = usize;

/// Identifies a real assignment or derivative assignment in the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtId(pub u32);

impl StmtId {
    /// Pseudo-statement for function entry (seeding scalar-argument spaces).
    pub const ENTRY: StmtId = StmtId(0);
}

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    Return,
    Argument,
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealVar {
    pub name: String,
    pub size: usize,
    pub scalar: bool,
    pub role: VarRole,
    /// False for arguments whose cells can never carry a derivative: they are
    /// never the target of a derivative assignment and are not a
    /// differentiation space themselves.
    pub bearing: bool,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntRole {
    Local,
    LoopIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntVar {
    pub name: String,
    pub role: IntRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// A `parameter[n]` declaration.
    Parameter,
    /// A scalar real function argument used as a differentiation variable.
    Argument(VarId),
}

/// A differentiation "denominator": a parameter vector or a scalar argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub name: String,
    pub size: usize,
    pub kind: SpaceKind,
}

impl Space {
    pub fn is_scalar(&self) -> bool {
        matches!(self.kind, SpaceKind::Argument(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IExpr {
    Lit(i64),
    Var(IntId),
    Neg(Box<IExpr>),
    Not(Box<IExpr>),
    Bin(BinOp, Box<IExpr>, Box<IExpr>),
}

impl IExpr {
    pub fn as_lit(&self) -> Option<i64> {
        match self {
            IExpr::Lit(v) => Some(*v),
            _ => None,
        }
    }

    /// Builds `op(a, b)`, folding when both sides are literals and the result
    /// is defined.
    pub fn bin(op: BinOp, a: IExpr, b: IExpr) -> IExpr {
        if let (Some(x), Some(y)) = (a.as_lit(), b.as_lit()) {
            if let Some(v) = eval_bin(op, x, y) {
                return IExpr::Lit(v);
            }
        }
        IExpr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn negate(a: IExpr) -> IExpr {
        match a.as_lit().and_then(i64::checked_neg) {
            Some(v) => IExpr::Lit(v),
            None => IExpr::Neg(Box::new(a)),
        }
    }

    pub fn logical_not(a: IExpr) -> IExpr {
        match a.as_lit() {
            Some(v) => IExpr::Lit((v == 0) as i64),
            None => IExpr::Not(Box::new(a)),
        }
    }
}

/// Integer binary operation with C semantics (truncating division, 0/1
/// booleans). `None` on division by zero or overflow.
pub fn eval_bin(op: BinOp, x: i64, y: i64) -> Option<i64> {
    Some(match op {
        BinOp::Add => x.checked_add(y)?,
        BinOp::Sub => x.checked_sub(y)?,
        BinOp::Mul => x.checked_mul(y)?,
        BinOp::Div => x.checked_div(y)?,
        BinOp::Eq => (x == y) as i64,
        BinOp::Ne => (x != y) as i64,
        BinOp::Lt => (x < y) as i64,
        BinOp::Le => (x <= y) as i64,
        BinOp::Gt => (x > y) as i64,
        BinOp::Ge => (x >= y) as i64,
        BinOp::And => (x != 0 && y != 0) as i64,
        BinOp::Or => (x != 0 || y != 0) as i64,
    })
}

/// A scalar cell or a half-open range of cells.
#[derive(Debug, Clone, PartialEq)]
pub enum Sel {
    Cell(IExpr),
    Range(IExpr, IExpr),
}

impl Sel {
    /// Vector length, or `None` for a single cell.
    pub fn len(&self) -> Option<IExpr> {
        match self {
            Sel::Cell(_) => None,
            Sel::Range(lo, hi) => Some(IExpr::bin(BinOp::Sub, hi.clone(), lo.clone())),
        }
    }

    pub fn start(&self) -> &IExpr {
        match self {
            Sel::Cell(i) => i,
            Sel::Range(lo, _) => lo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Place {
    pub var: VarId,
    pub sel: Sel,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSel {
    pub space: SpaceId,
    pub sel: Sel,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RBinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl RBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RBinOp::Add => "+",
            RBinOp::Sub => "-",
            RBinOp::Mul => "*",
            RBinOp::Div => "/",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            RBinOp::Add => a + b,
            RBinOp::Sub => a - b,
            RBinOp::Mul => a * b,
            RBinOp::Div => a / b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sqr,
    Atan,
}

impl Builtin {
    pub const ALL: [Builtin; 8] = [
        Builtin::Sin,
        Builtin::Cos,
        Builtin::Tan,
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sqrt,
        Builtin::Sqr,
        Builtin::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Tan => "tan",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Sqr => "sqr",
            Builtin::Atan => "atan",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Builtin::Sin => x.sin(),
            Builtin::Cos => x.cos(),
            Builtin::Tan => x.tan(),
            Builtin::Exp => x.exp(),
            Builtin::Log => x.ln(),
            Builtin::Sqrt => x.sqrt(),
            Builtin::Sqr => x * x,
            Builtin::Atan => x.atan(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RExpr {
    Lit(f64),
    /// Integer expression promoted to real.
    Int(IExpr),
    Read(Place),
    Neg(Box<RExpr>),
    Bin(RBinOp, Box<RExpr>, Box<RExpr>),
    Call(Builtin, Box<RExpr>),
    /// Derivative read `value ' wrt`; flattened row-major over
    /// (value cell, parameter index).
    Deriv(Place, SpaceSel),
}

impl RExpr {
    /// Vector length, or `None` for a scalar expression. For binary nodes the
    /// left operand's length is reported; equality is checked elsewhere.
    pub fn len(&self) -> Option<IExpr> {
        match self {
            RExpr::Lit(_) | RExpr::Int(_) => None,
            RExpr::Read(p) => p.sel.len(),
            RExpr::Neg(a) | RExpr::Call(_, a) => a.len(),
            RExpr::Bin(_, a, b) => a.len().or_else(|| b.len()),
            RExpr::Deriv(v, w) => deriv_len(&v.sel, &w.sel),
        }
    }
}

/// Length of a `value ' wrt` block: product of the two lengths, `None` when
/// both sides are single cells.
pub fn deriv_len(value: &Sel, wrt: &Sel) -> Option<IExpr> {
    match (value.len(), wrt.len()) {
        (None, None) => None,
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (Some(a), Some(b)) => Some(IExpr::bin(BinOp::Mul, a, b)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        id: StmtId,
        target: Place,
        accumulate: bool,
        value: RExpr,
        span: Span,
    },
    DerivAssign {
        id: StmtId,
        target: Place,
        wrt: SpaceSel,
        value: RExpr,
        span: Span,
    },
    IntAssign {
        var: IntId,
        value: IExpr,
        span: Span,
    },
    For {
        var: IntId,
        lo: IExpr,
        hi: IExpr,
        body: Vec<Stmt>,
        span: Span,
    },
    If {
        cond: IExpr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        span: Span,
    },
}

/// A `discard var ' space` rule. Applies to the whole function.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscardRule {
    pub var: VarId,
    pub space: SpaceId,
    /// `None` discards every index of the space.
    pub indices: Option<Vec<u32>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub name: String,
    pub ret: VarId,
    pub args: Vec<VarId>,
    pub vars: Vec<RealVar>,
    pub ints: Vec<IntVar>,
    pub spaces: Vec<Space>,
    pub body: Vec<Stmt>,
    pub discards: Vec<DiscardRule>,
    pub consts: ConstEnv,
    /// One past the largest statement id in use.
    pub stmt_count: u32,
}

impl Program {
    pub fn var(&self, id: VarId) -> &RealVar {
        &self.vars[id]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn space_by_name(&self, name: &str) -> Option<SpaceId> {
        self.spaces.iter().position(|s| s.name == name)
    }

    /// The space owned by a scalar argument, if any.
    pub fn arg_space(&self, var: VarId) -> Option<SpaceId> {
        self.spaces
            .iter()
            .position(|s| s.kind == SpaceKind::Argument(var))
    }

    pub fn ret_len(&self) -> usize {
        self.vars[self.ret].size
    }

    /// Renders a cell as `name[i]`, or `name` for scalars.
    pub fn cell_name(&self, var: VarId, index: u32) -> String {
        let v = &self.vars[var];
        if v.scalar {
            v.name.clone()
        } else {
            format!("{}[{}]", v.name, index)
        }
    }

    pub fn param_name(&self, space: SpaceId, index: u32) -> String {
        let s = &self.spaces[space];
        if s.is_scalar() {
            s.name.clone()
        } else {
            format!("{}[{}]", s.name, index)
        }
    }
}
