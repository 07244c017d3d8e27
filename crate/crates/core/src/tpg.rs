//! Constant-count test generation for the adder chain and the test-mode
//! multiplier array.
//!
//! Both circuits are iterative arrays of one repeated cell, and their cells
//! are bijective enough that a cell's response can serve as its neighbour's
//! stimulus. The machinery here classifies the 8 exhaustive cell patterns by
//! how they carry chain values (the propagation groups), assembles whole-grid
//! pattern layouts that are *closed* — every internal chain edge hands the
//! downstream cell exactly the chain input its pattern calls for — and then
//! realizes each layout as one concrete primary-input vector. Because closure
//! is a per-edge property, the same handful of vectors works at every array
//! size: the suites are constant in n.

use std::fmt::Write as _;

use thiserror::Error;

use crate::netlist::Netlist;
use crate::sim::{good_net_words, SimError, TestVector};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TpgError {
    #[error("pair-tiling requires even width (got n = {0})")]
    OddWidth(usize),
    #[error("cell ({0},{1}) demands a partial-product value that no X, Y assignment produces")]
    UnrealizableXy(usize, usize),
}

// ---------------------------------------------------------------------------
// Propagation tables
// ---------------------------------------------------------------------------

/// How a cell pattern treats the chain values passing through it.
///
/// `Simple` patterns reproduce every chain input on the corresponding chain
/// output, so a uniform grid of one such pattern is closed by itself. The
/// complementary groups flip one or both chains per cell and therefore tile
/// in alternating pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationGroup {
    Simple,
    /// Adder only: the carry chain flips per cell.
    ComplementaryRow,
    /// Multiplier: carry chain preserved, column chain flips.
    ComplementaryColumn,
    /// Multiplier: both chains flip.
    TotallyComplementary,
}

/// One row of the adder cell's exhaustive pattern table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaCellPattern {
    pub a: bool,
    pub b: bool,
    pub cin: bool,
}

impl FaCellPattern {
    pub fn from_index(p: u8) -> FaCellPattern {
        assert!(p < 8);
        FaCellPattern { a: p & 4 != 0, b: p & 2 != 0, cin: p & 1 != 0 }
    }

    /// Row index: the (A, B, Cin) bits read as a 3-bit number.
    pub fn index(&self) -> u8 {
        (self.a as u8) << 2 | (self.b as u8) << 1 | self.cin as u8
    }

    pub fn s(&self) -> bool {
        self.a ^ self.b ^ self.cin
    }

    pub fn cout(&self) -> bool {
        (self.a & self.b) | (self.a & self.cin) | (self.b & self.cin)
    }

    pub fn group(&self) -> PropagationGroup {
        if self.cout() == self.cin {
            PropagationGroup::Simple
        } else {
            PropagationGroup::ComplementaryRow
        }
    }
}

/// The 8 exhaustive adder-cell patterns, indexed 0–7.
pub fn fa_propagation_table() -> [FaCellPattern; 8] {
    std::array::from_fn(|i| FaCellPattern::from_index(i as u8))
}

/// One row of the multiplier cell's pattern table.
///
/// The cell's adder sees (XY, Cin, Pin) where XY = X∧Y, so the cell pattern
/// is indexed by that 3-bit view; `x`/`y` are the canonical operand bits
/// producing the row's XY (X=1,Y=0 for XY=0 — keeping the X side sensitized —
/// and X=Y=1 for XY=1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultCellPattern {
    pub x: bool,
    pub y: bool,
    pub cin: bool,
    pub pin: bool,
}

impl MultCellPattern {
    pub fn from_index(p: u8) -> MultCellPattern {
        assert!(p < 8);
        let xy = p & 4 != 0;
        MultCellPattern { x: true, y: xy, cin: p & 2 != 0, pin: p & 1 != 0 }
    }

    pub fn xy(&self) -> bool {
        self.x & self.y
    }

    /// The adder's-eye view of the stimulus: (XY, Cin, Pin) as a 3-bit index.
    pub fn fa_view_index(&self) -> u8 {
        (self.xy() as u8) << 2 | (self.cin as u8) << 1 | self.pin as u8
    }

    pub fn pout(&self) -> bool {
        self.xy() ^ self.cin ^ self.pin
    }

    pub fn cout(&self) -> bool {
        let xy = self.xy();
        (xy & self.cin) | (xy & self.pin) | (self.cin & self.pin)
    }

    pub fn group(&self) -> PropagationGroup {
        match (self.cout() == self.cin, self.pout() == self.pin) {
            (true, true) => PropagationGroup::Simple,
            (true, false) => PropagationGroup::ComplementaryColumn,
            (false, false) => PropagationGroup::TotallyComplementary,
            (false, true) => PropagationGroup::ComplementaryRow, // unreachable for this cell
        }
    }
}

/// The 8 exhaustive multiplier-cell patterns, indexed by (XY, Cin, Pin).
pub fn mult_propagation_table() -> [MultCellPattern; 8] {
    std::array::from_fn(|i| MultCellPattern::from_index(i as u8))
}

// ---------------------------------------------------------------------------
// Layouts
// ---------------------------------------------------------------------------

/// A whole-grid tiling of cell-pattern indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Every cell gets pattern p. Closed only for Simple-group patterns.
    Uniform(u8),
    /// Rows alternate: even rows pattern p, odd rows q. Each row is uniform,
    /// so the pattern flips once per column-chain step — the tiling for the
    /// ComplementaryColumn pair.
    RowAlternating(u8, u8),
    /// Columns alternate: even columns p, odd columns q. The pattern flips
    /// along row chains and along the diagonal column chains alike — the
    /// tiling for the TotallyComplementary pair (drawn on the skewed array
    /// it reads as a checkerboard).
    Checkerboard(u8, u8),
}

impl Layout {
    /// Pattern index assigned to grid position (row, col).
    pub fn target(&self, row: usize, col: usize) -> u8 {
        match *self {
            Layout::Uniform(p) => p,
            Layout::RowAlternating(p, q) => {
                if row.is_multiple_of(2) {
                    p
                } else {
                    q
                }
            }
            Layout::Checkerboard(p, q) => {
                if col.is_multiple_of(2) {
                    p
                } else {
                    q
                }
            }
        }
    }

    /// Short name used as the vector label.
    pub fn label(&self) -> String {
        match *self {
            Layout::Uniform(p) => format!("uniform-p{p}"),
            Layout::RowAlternating(p, q) => format!("row-alt-p{p}-p{q}"),
            Layout::Checkerboard(p, q) => format!("checker-p{p}-p{q}"),
        }
    }
}

/// A layout bound to a concrete n×n grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternAssignment {
    pub layout: Layout,
    pub n: usize,
}

impl PatternAssignment {
    pub fn new(layout: Layout, n: usize) -> PatternAssignment {
        PatternAssignment { layout, n }
    }

    pub fn target(&self, row: usize, col: usize) -> u8 {
        self.layout.target(row, col)
    }

    /// The grid as one digit per cell, row 0 first.
    pub fn grid_string(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let _ = write!(s, "{}", self.target(i, j));
            }
            s.push('\n');
        }
        s
    }
}

/// Check the closure property of a multiplier layout: along every internal
/// chain edge of the test-mode array, the upstream cell's chain output must
/// equal the downstream cell's chain input.
///
/// Edges checked: row carries (i,j)→(i,j+1); diagonal column links
/// Pout(i,j+1)→Pin(i+1,j); and the test-mode loopback Pout(i,0)→Pin(i+1,n−1).
/// Border inputs are free — realization chooses them.
pub fn verify_closure(table: &[MultCellPattern; 8], pa: &PatternAssignment) -> bool {
    let n = pa.n;
    let at = |i: usize, j: usize| table[pa.target(i, j) as usize];
    for i in 0..n {
        for j in 0..n - 1 {
            if at(i, j).cout() != at(i, j + 1).cin {
                return false;
            }
        }
    }
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            if at(i, j + 1).pout() != at(i + 1, j).pin {
                return false;
            }
        }
        if at(i, 0).pout() != at(i + 1, n - 1).pin {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Realization: layout → primary inputs
// ---------------------------------------------------------------------------

/// Realize an arbitrary n×n grid of target cell-pattern indices as one
/// primary-input vector with `test_mode` pinned to 1.
///
/// The partial products obey XY(i,j) = X[j] ∧ Y[i], so the demanded XY grid
/// must be rank-1. The solver sets Y[i] exactly where row i demands some 1,
/// then forces X[j] to 0 only where a 1-row demands 0 — leaving X = all-ones
/// whenever possible, which keeps the partial-product AND's X input
/// sensitized. A non-rank-1 demand is reported with the offending position.
/// Border values follow from the targets: Cb from the column-0 carry-ins,
/// P_top from the row-0 column inputs.
pub fn realize_grid(grid: &[Vec<u8>], label: &str) -> Result<TestVector, TpgError> {
    let n = grid.len();
    if !n.is_multiple_of(2) {
        return Err(TpgError::OddWidth(n));
    }
    assert!(grid.iter().all(|row| row.len() == n), "target grid must be square");
    let table = mult_propagation_table();
    let demand = |i: usize, j: usize| table[grid[i][j] as usize].xy();

    let y: Vec<bool> = (0..n).map(|i| (0..n).any(|j| demand(i, j))).collect();
    let x: Vec<bool> = (0..n).map(|j| !(0..n).any(|i| y[i] && !demand(i, j))).collect();
    for (i, &yi) in y.iter().enumerate() {
        for (j, &xj) in x.iter().enumerate() {
            if (xj && yi) != demand(i, j) {
                return Err(TpgError::UnrealizableXy(i, j));
            }
        }
    }

    let mut v = TestVector::with_label(label);
    v.set("X", x);
    v.set("Y", y);
    v.set_fn("P_top", n, |j| table[grid[0][j] as usize].pin);
    v.set_fn("Cb", n, |i| table[grid[i][0] as usize].cin);
    v.set("test_mode", vec![true]);
    Ok(v)
}

/// Realize a layout-based assignment. See [`realize_grid`].
pub fn realize_assignment(pa: &PatternAssignment) -> Result<TestVector, TpgError> {
    let grid: Vec<Vec<u8>> =
        (0..pa.n).map(|i| (0..pa.n).map(|j| pa.target(i, j)).collect()).collect();
    realize_grid(&grid, &pa.layout.label())
}

// ---------------------------------------------------------------------------
// Multiplier suites
// ---------------------------------------------------------------------------

/// The five pair-tiled layouts behind the constant 5-vector multiplier
/// suite: one Simple uniform vector, the ComplementaryColumn pair in both
/// phases, and the TotallyComplementary pair in both phases.
pub fn table2_layouts(n: usize) -> [PatternAssignment; 5] {
    [
        PatternAssignment::new(Layout::Uniform(1), n),
        PatternAssignment::new(Layout::RowAlternating(3, 4), n),
        PatternAssignment::new(Layout::RowAlternating(4, 3), n),
        PatternAssignment::new(Layout::Checkerboard(2, 5), n),
        PatternAssignment::new(Layout::Checkerboard(5, 2), n),
    ]
}

/// The eight layouts that drive every cell through all 8 exhaustive
/// patterns: the four Simple patterns uniformly, plus both alternating pairs
/// in both phases.
pub fn exhaustive8_layouts(n: usize) -> [PatternAssignment; 8] {
    [
        PatternAssignment::new(Layout::Uniform(0), n),
        PatternAssignment::new(Layout::Uniform(1), n),
        PatternAssignment::new(Layout::Uniform(6), n),
        PatternAssignment::new(Layout::Uniform(7), n),
        PatternAssignment::new(Layout::RowAlternating(3, 4), n),
        PatternAssignment::new(Layout::RowAlternating(4, 3), n),
        PatternAssignment::new(Layout::Checkerboard(2, 5), n),
        PatternAssignment::new(Layout::Checkerboard(5, 2), n),
    ]
}

fn realize_all(layouts: &[PatternAssignment]) -> Result<Vec<TestVector>, TpgError> {
    let table = mult_propagation_table();
    layouts
        .iter()
        .map(|pa| {
            debug_assert!(verify_closure(&table, pa), "suite layout must be closed");
            realize_assignment(pa)
        })
        .collect()
}

/// The constant 5-vector test-mode suite for the DFT multiplier. Suite size
/// is 5 for every even n.
pub fn mult_table2_vectors(n: usize) -> Result<Vec<TestVector>, TpgError> {
    if !n.is_multiple_of(2) {
        return Err(TpgError::OddWidth(n));
    }
    realize_all(&table2_layouts(n))
}

/// The 8-vector exhaustive test-mode suite: every cell sees all 8 patterns.
pub fn mult_exhaustive_ctest_vectors(n: usize) -> Result<Vec<TestVector>, TpgError> {
    if !n.is_multiple_of(2) {
        return Err(TpgError::OddWidth(n));
    }
    realize_all(&exhaustive8_layouts(n))
}

// ---------------------------------------------------------------------------
// Adder suites
// ---------------------------------------------------------------------------

/// Build an adder vector that puts pattern `cells[j]` on cell j. The cell
/// patterns must chain (each cell's carry-out equals the next cell's
/// carry-in); debug builds assert it.
fn rca_vector_from_cells(cells: &[u8], label: &str) -> TestVector {
    let table = fa_propagation_table();
    let pats: Vec<FaCellPattern> = cells.iter().map(|&p| table[p as usize]).collect();
    for w in pats.windows(2) {
        debug_assert_eq!(w[0].cout(), w[1].cin, "adder cell patterns must chain");
    }
    let mut v = TestVector::with_label(label);
    v.set("A", pats.iter().map(|p| p.a).collect());
    v.set("B", pats.iter().map(|p| p.b).collect());
    v.set("Cin", vec![pats[0].cin]);
    v
}

fn rca_uniform(n: usize, p: u8) -> TestVector {
    rca_vector_from_cells(&vec![p; n], &format!("uniform-p{p}"))
}

fn rca_alternating(n: usize, p: u8, q: u8) -> TestVector {
    let cells: Vec<u8> = (0..n).map(|j| if j % 2 == 0 { p } else { q }).collect();
    rca_vector_from_cells(&cells, &format!("alt-p{p}-p{q}"))
}

/// The constant 8-vector adder suite: the six Simple patterns applied
/// uniformly, plus the ComplementaryRow pair {1,6} interleaved in both
/// phases. Every cell sees all 8 exhaustive patterns across the suite, at
/// any width.
pub fn rca_ctest_vectors(n: usize) -> Vec<TestVector> {
    let mut out: Vec<TestVector> = [0u8, 2, 3, 4, 5, 7].iter().map(|&p| rca_uniform(n, p)).collect();
    out.push(rca_alternating(n, 6, 1));
    out.push(rca_alternating(n, 1, 6));
    out
}

/// Which deterministic adder suite to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetVariant {
    /// Five vectors; per-cell pattern set {1,2,3,4,6}.
    Five,
    /// Four vectors; per-cell pattern set {1,3,4,6}. This drops pattern 2,
    /// whose A=0, B=1, Cin=0 stimulus is the only test for a stuck-at-1 on
    /// the carry AND gate's A input — see the coverage analysis in the test
    /// suite before relying on it.
    Four,
}

/// Deterministic (non-exhaustive) adder suites built from the same
/// justification rules as the 8-vector suite.
pub fn rca_deterministic_vectors(n: usize, variant: DetVariant) -> Vec<TestVector> {
    let uniforms: &[u8] = match variant {
        DetVariant::Five => &[2, 3, 4],
        DetVariant::Four => &[3, 4],
    };
    let mut out: Vec<TestVector> = uniforms.iter().map(|&p| rca_uniform(n, p)).collect();
    out.push(rca_alternating(n, 6, 1));
    out.push(rca_alternating(n, 1, 6));
    out
}

// ---------------------------------------------------------------------------
// Per-cell observation
// ---------------------------------------------------------------------------

/// Observe which cell pattern every grid position actually receives under
/// each vector, by probing the cell's chain-input nets in good simulation.
///
/// Result indexing: `[vector][row][col]` = the 3-bit pattern index seen by
/// that cell ((XY,Cin,Pin) for multiplier cells, (A,B,Cin) for adder cells).
pub fn probe_cell_patterns(
    m: &Netlist,
    vectors: &[TestVector],
) -> Result<Vec<Vec<Vec<u8>>>, SimError> {
    let (rows, cols) = m.grid_dims().expect("netlist has no cell grid");
    let mut out = Vec::with_capacity(vectors.len());
    for chunk_base in (0..vectors.len()).step_by(64) {
        let chunk = &vectors[chunk_base..(chunk_base + 64).min(vectors.len())];
        let values = good_net_words(m, chunk)?;
        for lane in 0..chunk.len() {
            let bit = |n: crate::netlist::NetId| values[n.0 as usize] >> lane & 1 != 0;
            let mut grid = vec![vec![0u8; cols]; rows];
            for (i, grid_row) in grid.iter_mut().enumerate() {
                for (j, slot) in grid_row.iter_mut().enumerate() {
                    *slot = if let Some(c) = m.mult_cell_nets(i, j) {
                        (bit(c.xy) as u8) << 2 | (bit(c.cin) as u8) << 1 | bit(c.pin) as u8
                    } else {
                        let c = m.fa_cell_nets(i, j).expect("cell has adder roles");
                        (bit(c.a) as u8) << 2 | (bit(c.b) as u8) << 1 | bit(c.cin) as u8
                    };
                }
            }
            out.push(grid);
        }
    }
    Ok(out)
}

/// Human-readable per-cell pattern grids for a suite, one block per vector —
/// the `--explain` view. Shows what the cells actually observe, not just
/// what the layout intended.
pub fn explain_patterns(m: &Netlist, vectors: &[TestVector]) -> Result<String, SimError> {
    let grids = probe_cell_patterns(m, vectors)?;
    let mut s = String::new();
    for (v, grid) in vectors.iter().zip(&grids) {
        let label = v.label.as_deref().unwrap_or("(unlabeled)");
        let _ = writeln!(s, "vector {label}: per-cell patterns");
        for row in grid {
            s.push_str("  ");
            for &p in row {
                let _ = write!(s, "{p}");
            }
            s.push('\n');
        }
    }
    Ok(s)
}
