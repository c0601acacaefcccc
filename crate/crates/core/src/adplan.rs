//! Need propagation over the reversed action trace and packed derivative
//! layout (mappings and inverse mappings).

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::elaborator::{Action, ActionTrace, CellRef, ParamRef};
use crate::sema::{Program, SpaceId, StmtId, VarId};

/// Inverse-mapping entry for a parameter the cell does not store.
pub const NONE: i32 = -1;

/// Variables and parameter indices excluded from propagation by `discard`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscardMask {
    /// (var, space) -> `None` for the whole space, else the discarded indices.
    rules: BTreeMap<(VarId, SpaceId), Option<Vec<u32>>>,
}

impl DiscardMask {
    pub fn from_program(prog: &Program) -> Self {
        let mut mask = DiscardMask::default();
        for d in &prog.discards {
            mask.add(d.var, d.space, d.indices.clone());
        }
        mask
    }

    pub fn add(&mut self, var: VarId, space: SpaceId, indices: Option<Vec<u32>>) {
        let entry = self
            .rules
            .entry((var, space))
            .or_insert_with(|| Some(Vec::new()));
        match (entry.as_mut(), indices) {
            (Some(_), None) => *entry = None,
            (Some(list), Some(more)) => {
                list.extend(more);
                list.sort_unstable();
                list.dedup();
            }
            (None, _) => {}
        }
    }

    pub fn is_masked(&self, var: VarId, space: SpaceId, index: u32) -> bool {
        match self.rules.get(&(var, space)) {
            None => false,
            Some(None) => true,
            Some(Some(list)) => list.binary_search(&index).is_ok(),
        }
    }

    /// True when any index of `space` is masked for `var`.
    pub fn touches(&self, var: VarId, space: SpaceId) -> bool {
        self.rules.contains_key(&(var, space))
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// For each (cell, space), the sorted parameter indices whose derivative the
/// cell must carry at some point of the execution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeedSet {
    pub entries: BTreeMap<(CellRef, SpaceId), Vec<u32>>,
}

impl NeedSet {
    pub fn get(&self, cell: CellRef, space: SpaceId) -> &[u32] {
        self.entries
            .get(&(cell, space))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, cell: CellRef, param: ParamRef) -> bool {
        self.get(cell, param.space())
            .binary_search(&param.index)
            .is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of (cell, parameter) pairs.
    pub fn count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// (statement, space) pairs whose derivative code must run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSet {
    spaces: usize,
    bits: Vec<bool>,
}

impl ActiveSet {
    pub fn new(stmts: u32, spaces: usize) -> Self {
        ActiveSet {
            spaces,
            bits: vec![false; stmts as usize * spaces],
        }
    }

    pub fn set(&mut self, stmt: StmtId, space: SpaceId) {
        self.bits[stmt.0 as usize * self.spaces + space] = true;
    }

    pub fn get(&self, stmt: StmtId, space: SpaceId) -> bool {
        self.bits
            .get(stmt.0 as usize * self.spaces + space)
            .copied()
            .unwrap_or(false)
    }

    /// Active spaces of one statement, ascending.
    pub fn spaces_of(&self, stmt: StmtId) -> Vec<SpaceId> {
        (0..self.spaces).filter(|&s| self.get(stmt, s)).collect()
    }
}

/// Result of need propagation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Needs {
    pub set: NeedSet,
    pub active: ActiveSet,
}

struct Bits {
    words: usize,
    cells: Vec<Vec<Option<Box<[u64]>>>>,
}

impl Bits {
    fn new(prog: &Program, width: usize) -> Self {
        let cells = prog
            .vars
            .iter()
            .map(|v| {
                if v.bearing {
                    vec![None; v.size]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Bits {
            words: width.div_ceil(64),
            cells,
        }
    }

    fn slot(&mut self, c: CellRef) -> Option<&mut Box<[u64]>> {
        let words = self.words;
        let row = self.cells.get_mut(c.var())?.get_mut(c.index as usize)?;
        Some(row.get_or_insert_with(|| vec![0u64; words].into_boxed_slice()))
    }

    fn take(&mut self, c: CellRef) -> Option<Box<[u64]>> {
        self.cells
            .get_mut(c.var())?
            .get_mut(c.index as usize)?
            .take()
    }
}

fn is_zero(words: &[u64]) -> bool {
    words.iter().all(|&w| w == 0)
}

/// Walks the trace backwards once per space, seeding needs, pushing them
/// through dependencies and stopping them at known derivatives.
pub fn propagate_needs(prog: &Program, trace: &ActionTrace, discards: &DiscardMask) -> Needs {
    let mut set = NeedSet::default();
    let mut active = ActiveSet::new(prog.stmt_count, prog.spaces.len());
    for (space, sp) in prog.spaces.iter().enumerate() {
        let width = sp.size;
        let mut live = Bits::new(prog, width);
        let mut ever = Bits::new(prog, width);
        let masked_words: Vec<Option<Box<[u64]>>> = prog
            .vars
            .iter()
            .enumerate()
            .map(|(v, _)| {
                if !discards.touches(v, space) {
                    return None;
                }
                let mut m = vec![0u64; width.div_ceil(64)].into_boxed_slice();
                for i in 0..width as u32 {
                    if discards.is_masked(v, space, i) {
                        m[(i / 64) as usize] |= 1 << (i % 64);
                    }
                }
                Some(m)
            })
            .collect();
        let mut scratch = vec![0u64; width.div_ceil(64)];

        for action in trace.actions.iter().rev() {
            match action {
                Action::Need { cell, param, .. } if param.space() == space => {
                    let i = param.index;
                    if discards.is_masked(cell.var(), space, i) {
                        continue;
                    }
                    let (w, b) = ((i / 64) as usize, 1u64 << (i % 64));
                    if let Some(row) = live.slot(*cell) {
                        row[w] |= b;
                        ever.slot(*cell).unwrap()[w] |= b;
                    }
                }
                Action::Have { stmt, cell, param } if param.space() == space => {
                    let i = param.index;
                    let (w, b) = ((i / 64) as usize, 1u64 << (i % 64));
                    if let Some(row) = live.slot(*cell) {
                        if row[w] & b != 0 {
                            row[w] &= !b;
                            active.set(*stmt, space);
                        }
                    }
                }
                Action::DependsFrom {
                    stmt,
                    target,
                    sources,
                } => {
                    let Some(taken) = live.take(*target) else {
                        continue;
                    };
                    if is_zero(&taken) {
                        continue;
                    }
                    active.set(*stmt, space);
                    for src in sources {
                        scratch.copy_from_slice(&taken);
                        if let Some(m) = &masked_words[src.var()] {
                            for (s, m) in scratch.iter_mut().zip(m.iter()) {
                                *s &= !m;
                            }
                        }
                        let Some(row) = live.slot(*src) else { continue };
                        for (r, s) in row.iter_mut().zip(&scratch) {
                            *r |= s;
                        }
                        for (r, s) in ever.slot(*src).unwrap().iter_mut().zip(&scratch) {
                            *r |= s;
                        }
                    }
                }
                _ => {}
            }
        }

        for (v, rows) in ever.cells.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                let Some(row) = row else { continue };
                let mut params = Vec::new();
                for (w, &word) in row.iter().enumerate() {
                    let mut word = word;
                    while word != 0 {
                        let b = word.trailing_zeros();
                        params.push(w as u32 * 64 + b);
                        word &= word - 1;
                    }
                }
                if !params.is_empty() {
                    set.entries
                        .insert((CellRef::new(v, i as u32), space), params);
                }
            }
        }
    }
    Needs { set, active }
}

/// Packed layout of one (variable, space) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarPlan {
    pub var: VarId,
    pub space: SpaceId,
    /// `offsets[c]..offsets[c + 1]` are the packed slots of cell `c`.
    pub offsets: Vec<u32>,
    /// Parameter index stored in each packed slot, ascending within a cell.
    pub mapping: Vec<u32>,
    /// Row width of the inverse table: largest stored parameter index + 1.
    pub width: u32,
    /// `inverse[c * width + q]` is the cell-local slot of parameter `q`, or
    /// [`NONE`].
    pub inverse: Vec<i32>,
}

impl VarPlan {
    pub fn cells(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap() as usize
    }

    /// Number of stored parameters of cell `c` (the cell's h).
    pub fn h(&self, c: usize) -> usize {
        (self.offsets[c + 1] - self.offsets[c]) as usize
    }

    pub fn params(&self, c: usize) -> &[u32] {
        &self.mapping[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    /// Cell-local slot of parameter `q`.
    pub fn local(&self, c: usize, q: u32) -> Option<u32> {
        if q >= self.width {
            return None;
        }
        let s = self.inverse[c * self.width as usize + q as usize];
        (s != NONE).then_some(s as u32)
    }

    /// Packed buffer position of parameter `q` of cell `c`.
    pub fn slot(&self, c: usize, q: u32) -> Option<usize> {
        self.local(c, q)
            .map(|s| self.offsets[c] as usize + s as usize)
    }

    /// True when every cell stores the same parameters `0..width`, so that
    /// the packed slot of (c, q) is `c * width + q`.
    pub fn is_dense(&self) -> bool {
        let w = self.width as usize;
        self.total() == self.cells() * w
            && (0..self.cells()).all(|c| {
                self.params(c)
                    .iter()
                    .enumerate()
                    .all(|(k, &q)| q as usize == k)
            })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DerivPlan {
    pub vars: BTreeMap<(VarId, SpaceId), VarPlan>,
    pub active: ActiveSet,
}

impl DerivPlan {
    pub fn get(&self, var: VarId, space: SpaceId) -> Option<&VarPlan> {
        self.vars.get(&(var, space))
    }

    pub fn is_active(&self, stmt: StmtId, space: SpaceId) -> bool {
        self.active.get(stmt, space)
    }

    pub fn total_slots(&self) -> usize {
        self.vars.values().map(VarPlan::total).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Lays out packed buffers: per cell, needed parameters in ascending order.
/// `sizes[v]` is the number of cells of variable `v`.
pub fn build_plan(needs: &NeedSet, sizes: &[usize]) -> BTreeMap<(VarId, SpaceId), VarPlan> {
    type Rows<'a> = Vec<(u32, &'a [u32])>;
    let mut by_pair: BTreeMap<(VarId, SpaceId), Rows> = BTreeMap::new();
    for ((cell, space), params) in &needs.entries {
        if params.is_empty() {
            continue;
        }
        by_pair
            .entry((cell.var(), *space))
            .or_default()
            .push((cell.index, params.as_slice()));
    }
    let mut out = BTreeMap::new();
    for ((var, space), cells) in by_pair {
        let n = sizes[var];
        let width = cells
            .iter()
            .flat_map(|(_, p)| p.iter())
            .max()
            .map(|&m| m + 1)
            .unwrap_or(0);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut mapping = Vec::new();
        let mut inverse = vec![NONE; n * width as usize];
        let mut it = cells.iter().peekable();
        for c in 0..n {
            offsets.push(mapping.len() as u32);
            if let Some((_, params)) = it.next_if(|(i, _)| *i as usize == c) {
                for (k, &q) in params.iter().enumerate() {
                    inverse[c * width as usize + q as usize] = k as i32;
                    mapping.push(q);
                }
            }
        }
        offsets.push(mapping.len() as u32);
        out.insert(
            (var, space),
            VarPlan {
                var,
                space,
                offsets,
                mapping,
                width,
                inverse,
            },
        );
    }
    out
}

/// Propagates needs and builds the full plan for a program.
pub fn plan(prog: &Program, trace: &ActionTrace) -> (NeedSet, DerivPlan) {
    let mask = DiscardMask::from_program(prog);
    let needs = propagate_needs(prog, trace, &mask);
    let sizes: Vec<usize> = prog.vars.iter().map(|v| v.size).collect();
    let vars = build_plan(&needs.set, &sizes);
    (
        needs.set,
        DerivPlan {
            vars,
            active: needs.active,
        },
    )
}

/// Deterministic text report of a plan: one block per (variable, space).
pub fn render_plan(prog: &Program, plan: &DerivPlan) -> String {
    let mut out = String::new();
    if plan.vars.is_empty() {
        out.push_str("no derivatives stored\n");
    }
    for vp in plan.vars.values() {
        let v = prog.var(vp.var);
        let s = &prog.spaces[vp.space];
        let dense = vp.cells() * s.size;
        let _ = writeln!(
            out,
            "{} ' {}: cells {}, packed {}, dense {}, density {:.6}",
            v.name,
            s.name,
            vp.cells(),
            vp.total(),
            dense,
            ratio(vp.total(), dense)
        );
        for c in 0..vp.cells() {
            let params = vp.params(c);
            if params.is_empty() {
                continue;
            }
            let _ = writeln!(
                out,
                "  {} h={} [{}]",
                prog.cell_name(vp.var, c as u32),
                params.len(),
                compress_ranges(params)
            );
        }
    }
    let _ = writeln!(out, "total packed slots: {}", plan.total_slots());
    out
}

pub fn ratio(packed: usize, dense: usize) -> f64 {
    if dense == 0 {
        0.0
    } else {
        packed as f64 / dense as f64
    }
}

/// `[0, 1, 2, 5, 7, 8]` -> `0..3, 5, 7..9` (half-open runs).
pub fn compress_ranges(sorted: &[u32]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[j] + 1 {
            j += 1;
        }
        if j == i {
            parts.push(sorted[i].to_string());
        } else {
            parts.push(format!("{}..{}", sorted[i], sorted[j] + 1));
        }
        i = j + 1;
    }
    parts.join(", ")
}
