//! Packed versus dense derivative storage.

use std::fmt::Write;

use crate::adplan::{ratio, DerivPlan};
use crate::sema::Program;

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub var: String,
    pub space: String,
    pub cells: usize,
    pub packed: usize,
    pub dense: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsityStats {
    pub rows: Vec<StatRow>,
    pub packed: usize,
    pub dense: usize,
}

impl SparsityStats {
    pub fn ratio(&self) -> f64 {
        ratio(self.packed, self.dense)
    }

    /// Row for `var ' space`, if it stores anything.
    pub fn row(&self, var: &str, space: &str) -> Option<&StatRow> {
        self.rows.iter().find(|r| r.var == var && r.space == space)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{} ' {}: cells {}, packed {}, dense {}, ratio {:.6}",
                r.var,
                r.space,
                r.cells,
                r.packed,
                r.dense,
                ratio(r.packed, r.dense)
            );
        }
        let _ = writeln!(
            s,
            "total: packed {}, dense {}, ratio {:.6}",
            self.packed,
            self.dense,
            self.ratio()
        );
        s
    }
}

/// Dense storage for a stored (var, space) pair is every cell of the
/// variable times every parameter of the space.
pub fn report_stats(prog: &Program, plan: &DerivPlan) -> SparsityStats {
    let mut out = SparsityStats::default();
    for ((v, s), vp) in &plan.vars {
        let row = StatRow {
            var: prog.vars[*v].name.clone(),
            space: prog.spaces[*s].name.clone(),
            cells: vp.cells(),
            packed: vp.total(),
            dense: vp.cells() * prog.spaces[*s].size,
        };
        out.packed += row.packed;
        out.dense += row.dense;
        out.rows.push(row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{compile, CompileOptions};

    fn migration(n: i64, k: i64) -> SparsityStats {
        let defines = [("N".to_string(), n), ("k".to_string(), k)]
            .into_iter()
            .collect();
        let c = compile(
            include_str!("../../corpus/migration.landau"),
            &CompileOptions { defines },
        )
        .unwrap();
        report_stats(&c.program, &c.lir.plan)
    }

    #[test]
    fn migration_block_counts() {
        let s = migration(100, 10);
        let r = s.row("p_dot", "p0").unwrap();
        assert_eq!((r.packed, r.dense), (1000, 10000));
        assert!((ratio(r.packed, r.dense) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_plan() {
        let c = compile(
            "#lang landau\nreal f(real x) {\n  f = x\n}\n",
            &CompileOptions::default(),
        )
        .unwrap();
        let s = report_stats(&c.program, &c.lir.plan);
        assert_eq!(s.packed, 0);
        assert!(s.render().contains("total: packed 0, dense 0"));
    }
}
