//! The game world: a periodic square lattice of cooperators and defectors.
//!
//! Cells are stored row-major (`index = row * L + col`). Each cell plays the
//! one-shot game against its four von Neumann neighbors once per round, with
//! periodic wraparound in both axes and no self-interaction.

use rand::Rng;

use crate::error::{invalid_param, Error, Result};
use crate::rules::RuleKind;
use crate::seed::rng_from_seed;

/// Neighborhood degree on the square lattice.
pub const DEGREE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Strategy {
    Cooperate,
    Defect,
}

impl Strategy {
    pub fn is_cooperator(self) -> bool {
        self == Strategy::Cooperate
    }

    pub fn symbol(self) -> char {
        match self {
            Strategy::Cooperate => 'C',
            Strategy::Defect => 'D',
        }
    }
}

/// Payoff earned by `mine` against `theirs` for temptation `b`.
///
/// ```text
///        C   D
///   C    1   0
///   D    b   0
/// ```
pub fn pairwise_payoff(mine: Strategy, theirs: Strategy, b: f64) -> f64 {
    match (mine, theirs) {
        (Strategy::Cooperate, Strategy::Cooperate) => 1.0,
        (Strategy::Defect, Strategy::Cooperate) => b,
        (_, Strategy::Defect) => 0.0,
    }
}

/// How the initial lattice is populated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pattern {
    /// Each cell independently cooperates with probability `rho0`.
    Bernoulli(f64),
    /// All defectors except a centered `w x w` block of cooperators.
    CenteredCooperatorBlock(usize),
    /// All cooperators except a centered `w x w` block of defectors.
    AllCooperatorsWithDefectorBlock(usize),
}

impl Pattern {
    pub fn validate(&self, side: usize) -> Result<()> {
        match *self {
            Pattern::Bernoulli(p) if !(0.0..=1.0).contains(&p) => Err(Error::InvalidPattern(
                format!("Bernoulli probability {p} outside [0, 1]"),
            )),
            Pattern::CenteredCooperatorBlock(w) | Pattern::AllCooperatorsWithDefectorBlock(w)
                if w == 0 || w > side =>
            {
                Err(Error::InvalidPattern(format!(
                    "block width {w} must lie in [1, {side}]"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Pattern::Bernoulli(p) => format!("bernoulli:{p}"),
            Pattern::CenteredCooperatorBlock(w) => format!("cluster:{w}"),
            Pattern::AllCooperatorsWithDefectorBlock(w) => format!("invasion:{w}"),
        }
    }
}

/// First row/column of a centered block of width `w`.
///
/// The block center sits at `floor(L/2)`; for even widths the extra cell goes
/// toward the lower index.
pub fn block_origin(side: usize, w: usize) -> usize {
    side / 2 - w / 2
}

/// Square lattice with periodic boundaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    side: usize,
    cells: Vec<Strategy>,
}

impl Lattice {
    pub fn new(side: usize, pattern: Pattern, seed: u64) -> Result<Self> {
        if side < 3 {
            return Err(Error::InvalidSize(side));
        }
        pattern.validate(side)?;
        let n = side * side;
        let cells = match pattern {
            Pattern::Bernoulli(p) => {
                let mut rng = rng_from_seed(seed);
                (0..n)
                    .map(|_| {
                        if rng.random_bool(p) {
                            Strategy::Cooperate
                        } else {
                            Strategy::Defect
                        }
                    })
                    .collect()
            }
            Pattern::CenteredCooperatorBlock(w) => {
                block_cells(side, w, Strategy::Defect, Strategy::Cooperate)
            }
            Pattern::AllCooperatorsWithDefectorBlock(w) => {
                block_cells(side, w, Strategy::Cooperate, Strategy::Defect)
            }
        };
        Ok(Lattice { side, cells })
    }

    pub fn uniform(side: usize, strategy: Strategy) -> Result<Self> {
        Self::from_cells(side, vec![strategy; side * side])
    }

    pub fn from_cells(side: usize, cells: Vec<Strategy>) -> Result<Self> {
        if side < 3 {
            return Err(Error::InvalidSize(side));
        }
        if cells.len() != side * side {
            return Err(Error::InvalidInput(format!(
                "{} cells given for a {side}x{side} lattice",
                cells.len()
            )));
        }
        Ok(Lattice { side, cells })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Strategy] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Strategy {
        self.cells[self.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, s: Strategy) {
        let i = self.index(row, col);
        self.cells[i] = s;
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.side + col
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.side, index % self.side)
    }

    /// Up, down, left, right neighbors of `index` with wraparound.
    pub fn neighbors(&self, index: usize) -> Result<[usize; DEGREE]> {
        if index >= self.cells.len() {
            return Err(Error::IndexOutOfRange {
                index,
                cells: self.cells.len(),
            });
        }
        Ok(neighbor_indices(self.side, index))
    }

    pub fn cooperators(&self) -> usize {
        self.cells.iter().filter(|s| s.is_cooperator()).count()
    }

    pub fn cooperator_density(&self) -> f64 {
        self.cooperators() as f64 / self.cells.len() as f64
    }

    pub(crate) fn cells_mut(&mut self) -> &mut Vec<Strategy> {
        &mut self.cells
    }

    /// Number of defectors whose four neighbors are all defectors.
    pub fn defector_core_cells(&self) -> usize {
        (0..self.cells.len())
            .filter(|&i| {
                self.cells[i] == Strategy::Defect
                    && neighbor_indices(self.side, i)
                        .iter()
                        .all(|&k| self.cells[k] == Strategy::Defect)
            })
            .count()
    }
}

fn block_cells(side: usize, w: usize, background: Strategy, block: Strategy) -> Vec<Strategy> {
    let mut cells = vec![background; side * side];
    let origin = block_origin(side, w);
    for r in origin..origin + w {
        for c in origin..origin + w {
            cells[(r % side) * side + (c % side)] = block;
        }
    }
    cells
}

pub(crate) fn neighbor_indices(side: usize, index: usize) -> [usize; DEGREE] {
    let (r, c) = (index / side, index % side);
    let up = if r == 0 { side - 1 } else { r - 1 };
    let down = if r + 1 == side { 0 } else { r + 1 };
    let left = if c == 0 { side - 1 } else { c - 1 };
    let right = if c + 1 == side { 0 } else { c + 1 };
    [
        up * side + c,
        down * side + c,
        r * side + left,
        r * side + right,
    ]
}

/// Neighbor table for every cell of an `L x L` torus, flattened.
pub(crate) fn neighbor_table(side: usize) -> Vec<[u32; DEGREE]> {
    (0..side * side)
        .map(|i| neighbor_indices(side, i).map(|k| k as u32))
        .collect()
}

/// Temptation, degree and update rule for one game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameParams {
    b: f64,
    rule: RuleKind,
}

impl GameParams {
    pub fn new(b: f64, rule: RuleKind) -> Result<Self> {
        if !(b > 1.0 && b <= 2.0) {
            return Err(invalid_param("b", format!("temptation {b} not in (1, 2]")));
        }
        rule.validate()?;
        Ok(GameParams { b, rule })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn rule(&self) -> RuleKind {
        self.rule
    }

    pub fn with_b(self, b: f64) -> Result<Self> {
        Self::new(b, self.rule)
    }

    pub fn with_rule(self, rule: RuleKind) -> Result<Self> {
        Self::new(self.b, rule)
    }
}

/// Per-cell returns of a single round.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffField {
    returns: Vec<f64>,
}

impl PayoffField {
    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn get(&self, index: usize) -> f64 {
        self.returns[index]
    }

    /// Mean payoff of cells playing `strategy`, `None` if there are none.
    pub fn mean_for(&self, lattice: &Lattice, strategy: Strategy) -> Option<f64> {
        let (sum, n) = lattice
            .cells()
            .iter()
            .zip(&self.returns)
            .filter(|(s, _)| **s == strategy)
            .fold((0.0, 0usize), |(sum, n), (_, u)| (sum + u, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Returns of every cell against its four neighbors.
pub fn compute_payoffs(lattice: &Lattice, params: &GameParams) -> PayoffField {
    let mut returns = vec![0.0; lattice.len()];
    fill_payoffs(lattice.side, &lattice.cells, params.b, &mut returns);
    PayoffField { returns }
}

/// Payoff of a cell is `n_C` for a cooperator and `b * n_C` for a defector,
/// where `n_C` is the number of cooperating neighbors.
pub(crate) fn fill_payoffs(side: usize, cells: &[Strategy], b: f64, out: &mut [f64]) {
    let coop = |i: usize| cells[i].is_cooperator() as u8;
    for r in 0..side {
        let up = if r == 0 { side - 1 } else { r - 1 } * side;
        let down = if r + 1 == side { 0 } else { r + 1 } * side;
        let row = r * side;
        for c in 0..side {
            let left = if c == 0 { side - 1 } else { c - 1 };
            let right = if c + 1 == side { 0 } else { c + 1 };
            let n_c = coop(up + c) + coop(down + c) + coop(row + left) + coop(row + right);
            let unit = if cells[row + c].is_cooperator() {
                1.0
            } else {
                b
            };
            out[row + c] = n_c as f64 * unit;
        }
    }
}
