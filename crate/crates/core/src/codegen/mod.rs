//! Stage 2: statement differentiation, lowering and the two backends.

pub mod c;
pub mod diff;
pub mod interp;
pub mod lir;

pub use c::emit_c;
pub use diff::{differentiate_statement, DiffStatement, DiffTerm};
pub use interp::{Machine, ProbeEvent};
pub use lir::{lower, Lir};
