//! Strategy update rules and the synchronous round step.
//!
//! Four rules are supported:
//!
//! * **Monte Carlo (roulette)**: a cell keeps its strategy or copies one of
//!   the neighbors earning at least as much as itself, with probability
//!   proportional to payoff.
//! * **Unconditional imitation**: copy the best-earning neighbor if it beats
//!   the focal cell, ties among the best broken uniformly.
//! * **Replicator dynamics**: pick a random neighbor, copy it with probability
//!   proportional to the payoff gap when it earns more.
//! * **Fermi**: pick a random neighbor, copy it with a logistic probability of
//!   the payoff difference at noise `lambda`.
//!
//! All cells decide from the same pre-step payoffs and strategies.

use rand::{Rng, RngCore};

use crate::error::{invalid_param, Error, Result};
use crate::lattice::{neighbor_table, GameParams, Lattice, Strategy, DEGREE};

/// Fermi noise used for rule comparisons.
pub const FERMI_LAMBDA: f64 = 0.0625;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RuleKind {
    MonteCarlo,
    UnconditionalImitation,
    ReplicatorDynamics,
    Fermi { lambda: f64 },
}

impl RuleKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RuleKind::Fermi { lambda } if !(lambda > 0.0 && lambda.is_finite()) => Err(
                invalid_param("lambda", format!("Fermi noise {lambda} must be positive")),
            ),
            _ => Ok(()),
        }
    }

    /// Short name used in CSV output and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::MonteCarlo => "mc",
            RuleKind::UnconditionalImitation => "ui",
            RuleKind::ReplicatorDynamics => "rd",
            RuleKind::Fermi { .. } => "fermi",
        }
    }

    /// Parses `mc`, `ui`, `rd` or `fermi`; `lambda` applies to Fermi only.
    pub fn parse(name: &str, lambda: f64) -> Result<Self> {
        let rule = match name {
            "mc" | "monte-carlo" => RuleKind::MonteCarlo,
            "ui" | "unconditional-imitation" => RuleKind::UnconditionalImitation,
            "rd" | "replicator" => RuleKind::ReplicatorDynamics,
            "fermi" => RuleKind::Fermi { lambda },
            other => {
                return Err(invalid_param(
                    "rule",
                    format!("unknown rule `{other}` (expected mc, ui, rd or fermi)"),
                ))
            }
        };
        rule.validate()?;
        Ok(rule)
    }

    /// The four rules in reporting order.
    pub fn all() -> [RuleKind; 4] {
        [
            RuleKind::MonteCarlo,
            RuleKind::UnconditionalImitation,
            RuleKind::ReplicatorDynamics,
            RuleKind::Fermi {
                lambda: FERMI_LAMBDA,
            },
        ]
    }
}

/// Where an imitated strategy comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Keep,
    /// Position in the `[up, down, left, right]` neighbor list.
    Neighbor(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionDistribution {
    entries: Vec<(Source, f64)>,
}

impl TransitionDistribution {
    pub fn entries(&self) -> &[(Source, f64)] {
        &self.entries
    }

    pub fn probability(&self, source: Source) -> f64 {
        self.entries
            .iter()
            .find(|(s, _)| *s == source)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Eligibility gate of the roulette rule: 0 if `u_i > u_k`, else 1.
pub fn mc_eligibility(u_i: f64, u_k: f64) -> u8 {
    if u_i > u_k {
        0
    } else {
        1
    }
}

/// Roulette distribution over keeping the own strategy and copying each
/// neighbor.
pub fn mc_transition_distribution(
    u0: f64,
    neighbor_payoffs: &[f64; DEGREE],
) -> Result<TransitionDistribution> {
    if u0 < 0.0 || neighbor_payoffs.iter().any(|&u| u < 0.0) || u0.is_nan() {
        return Err(Error::InvalidInput(format!(
            "payoffs must be non-negative, got {u0} and {neighbor_payoffs:?}"
        )));
    }
    let denom = u0
        + neighbor_payoffs
            .iter()
            .map(|&u| mc_eligibility(u0, u) as f64 * u)
            .sum::<f64>();
    let mut entries = Vec::with_capacity(DEGREE + 1);
    if denom == 0.0 {
        entries.push((Source::Keep, 1.0));
        entries.extend((0..DEGREE).map(|k| (Source::Neighbor(k), 0.0)));
    } else {
        entries.push((Source::Keep, u0 / denom));
        entries.extend(neighbor_payoffs.iter().enumerate().map(|(k, &u)| {
            (
                Source::Neighbor(k),
                mc_eligibility(u0, u) as f64 * u / denom,
            )
        }));
    }
    Ok(TransitionDistribution { entries })
}

/// Unconditional imitation for one cell.
pub fn ui_next_strategy<R: Rng + ?Sized>(
    own: Strategy,
    u0: f64,
    neighbor_strategies: &[Strategy; DEGREE],
    neighbor_payoffs: &[f64; DEGREE],
    rng: &mut R,
) -> Strategy {
    let best = neighbor_payoffs.iter().copied().fold(f64::MIN, f64::max);
    if best <= u0 {
        return own;
    }
    let winners: Vec<Strategy> = (0..DEGREE)
        .filter(|&k| neighbor_payoffs[k] == best)
        .map(|k| neighbor_strategies[k])
        .collect();
    if winners.iter().all(|&s| s == winners[0]) {
        winners[0]
    } else {
        winners[rng.random_range(0..winners.len())]
    }
}

/// Replicator imitation probability, normalized by `b * max(k_i, k_j)`.
///
/// Returns 0 when `u_j <= u_i`: the rule only imitates better neighbors.
pub fn replicator_switch_prob(u_i: f64, u_j: f64, b: f64, k_i: usize, k_j: usize) -> f64 {
    if u_j <= u_i {
        return 0.0;
    }
    ((u_j - u_i) / (b * k_i.max(k_j) as f64)).clamp(0.0, 1.0)
}

/// Fermi imitation probability `1 / (1 + exp((u_i - u_j) / lambda))`.
pub fn fermi_switch_prob(u_i: f64, u_j: f64, lambda: f64) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(invalid_param(
            "lambda",
            format!("Fermi noise {lambda} must be positive"),
        ));
    }
    Ok(logistic_of_gap((u_i - u_j) / lambda))
}

/// `1 / (1 + e^x)` without overflow for large `|x|`.
fn logistic_of_gap(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Advances a lattice one round: payoffs are computed once, then every cell
/// draws its next strategy from the pre-step state.
pub fn step<R: RngCore>(lattice: &Lattice, params: &GameParams, rng: &mut R) -> Lattice {
    let mut next = lattice.clone();
    Stepper::new(lattice.side()).advance(&mut next, params, rng);
    next
}

/// Reusable buffers for stepping lattices of a fixed side length.
///
/// Every cell is summarized by a code `5 * is_defector + cooperating
/// neighbors`, so a payoff only ever takes one of ten values. The roulette
/// rule works on these codes through small lookup tables rebuilt whenever `b`
/// changes.
pub struct Stepper {
    side: usize,
    neighbors: Vec<[u32; DEGREE]>,
    codes: Vec<u8>,
    payoffs: Vec<f64>,
    next: Vec<Strategy>,
    roulette: Option<RouletteTables>,
}

/// What happened during one call to [`Stepper::advance`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    /// Cells whose strategy changed.
    pub changed: usize,
    /// Random draws whose outcome could have changed a cell.
    pub contested: usize,
}

const CODES: usize = 2 * (DEGREE + 1);
/// Mass units are packed as `cooperator_units * MASS_STRIDE + defector_units`.
const MASS_STRIDE: usize = 32;
const MAX_UNITS: usize = DEGREE * (DEGREE + 1);
const PACKED: usize = (MAX_UNITS + 1) * MASS_STRIDE;
/// Threshold meaning "cooperate with certainty".
const SURE: u64 = 1 << 53;

fn code_payoff(code: u8, b: f64) -> f64 {
    let n_c = (code as usize % (DEGREE + 1)) as f64;
    if (code as usize) <= DEGREE {
        n_c
    } else {
        n_c * b
    }
}

/// Roulette rule compiled for one temptation value.
///
/// A cooperator with `n` cooperating neighbors earns `n`, a defector earns
/// `n * b`, so the roulette mass of each strategy is an integer number of
/// units (`1` for cooperators, `b` for defectors).
struct RouletteTables {
    b: f64,
    /// Own contribution plus the table offset for the focal strategy.
    base: [u16; TABLE_CODES],
    /// Packed mass a neighbor with code `k` adds to a focal cell with code
    /// `o`, at `[o][k]`; zero when the neighbor earns less.
    contrib: [[u16; TABLE_CODES]; TABLE_CODES],
    /// 53-bit threshold for becoming a cooperator.
    threshold: Box<[u64; THRESHOLDS]>,
}

/// Code tables are padded to a power of two so masked lookups need no
/// bounds checks.
const TABLE_CODES: usize = 16;
const THRESHOLDS: usize = 2048;

impl RouletteTables {
    fn new(b: f64) -> Self {
        const _: () = assert!(2 * PACKED <= THRESHOLDS && CODES <= TABLE_CODES);
        let units = |code: usize| -> u16 {
            let n = (code % (DEGREE + 1)) as u16;
            if code <= DEGREE {
                n * MASS_STRIDE as u16
            } else {
                n
            }
        };
        let mut base = [0u16; TABLE_CODES];
        let mut contrib = [[0u16; TABLE_CODES]; TABLE_CODES];
        for o in 0..CODES {
            let offset = if o <= DEGREE { 0 } else { PACKED };
            base[o] = (offset + units(o) as usize) as u16;
            for (k, slot) in contrib[o].iter_mut().enumerate().take(CODES) {
                if mc_eligibility(code_payoff(o as u8, b), code_payoff(k as u8, b)) == 1 {
                    *slot = units(k);
                }
            }
        }
        let mut threshold = Box::new([0u64; THRESHOLDS]);
        for (own, chunk) in threshold[..2 * PACKED].chunks_mut(PACKED).enumerate() {
            for (packed, t) in chunk.iter_mut().enumerate() {
                let mc = (packed / MASS_STRIDE) as f64;
                let md = (packed % MASS_STRIDE) as f64 * b;
                *t = if mc + md == 0.0 {
                    if own == 0 {
                        SURE
                    } else {
                        0
                    }
                } else {
                    (mc / (mc + md) * SURE as f64).round() as u64
                };
            }
        }
        RouletteTables {
            b,
            base,
            contrib,
            threshold,
        }
    }

    #[inline(always)]
    fn lookup(&self, own: u8, nb: [u8; DEGREE]) -> u64 {
        let o = own as usize & (TABLE_CODES - 1);
        let row = &self.contrib[o];
        let mass = nb
            .iter()
            .map(|&k| row[k as usize & (TABLE_CODES - 1)])
            .sum::<u16>();
        self.threshold[(self.base[o] + mass) as usize & (THRESHOLDS - 1)]
    }

    fn threshold(&self, codes: &[u8], i: usize, nb: [usize; DEGREE]) -> u64 {
        self.lookup(codes[i], nb.map(|k| codes[k]))
    }
}

impl Stepper {
    pub fn new(side: usize) -> Self {
        let n = side * side;
        Stepper {
            side,
            neighbors: neighbor_table(side),
            codes: vec![0; n],
            payoffs: vec![0.0; n],
            next: Vec::with_capacity(n),
            roulette: None,
        }
    }

    /// Payoffs of the most recent pre-step state.
    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    /// Fills the payoff buffer for `lattice` without stepping.
    pub fn refresh_payoffs(&mut self, lattice: &Lattice, b: f64) {
        fill_codes(self.side, lattice.cells(), &mut self.codes);
        let table: [f64; CODES] = std::array::from_fn(|c| code_payoff(c as u8, b));
        for (u, &c) in self.payoffs.iter_mut().zip(&self.codes) {
            *u = table[c as usize];
        }
    }

    /// Exact probability that each cell cooperates after one roulette step.
    pub fn roulette_probabilities(&mut self, lattice: &Lattice, b: f64) -> Vec<f64> {
        assert_eq!(lattice.side(), self.side, "stepper built for another side");
        fill_codes(self.side, lattice.cells(), &mut self.codes);
        self.ensure_tables(b);
        let tables = self.roulette.as_ref().unwrap();
        (0..lattice.len())
            .map(|i| {
                let nb = self.neighbors[i].map(|k| k as usize);
                tables.threshold(&self.codes, i, nb) as f64 / SURE as f64
            })
            .collect()
    }

    fn ensure_tables(&mut self, b: f64) {
        if self.roulette.as_ref().is_none_or(|t| t.b != b) {
            self.roulette = Some(RouletteTables::new(b));
        }
    }

    /// Steps `lattice` in place.
    pub fn advance<R: RngCore>(
        &mut self,
        lattice: &mut Lattice,
        params: &GameParams,
        rng: &mut R,
    ) -> StepReport {
        assert_eq!(lattice.side(), self.side, "stepper built for another side");
        let b = params.b();
        self.next.clear();
        let mut contested = 0;
        match params.rule() {
            RuleKind::MonteCarlo => {
                fill_codes(self.side, lattice.cells(), &mut self.codes);
                self.ensure_tables(b);
                let tables = self.roulette.as_ref().unwrap();
                let side = self.side;
                let codes = &self.codes;
                self.next.resize(side * side, Strategy::Defect);
                let last = side - 1;
                for r in 0..side {
                    let up = if r == 0 { last } else { r - 1 } * side;
                    let down = if r == last { 0 } else { r + 1 } * side;
                    let row = &codes[r * side..(r + 1) * side];
                    let above = &codes[up..up + side];
                    let below = &codes[down..down + side];
                    let out = &mut self.next[r * side..(r + 1) * side];
                    for c in 0..side {
                        let left = if c == 0 { last } else { c - 1 };
                        let right = if c == last { 0 } else { c + 1 };
                        let t = tables.lookup(row[c], [above[c], below[c], row[left], row[right]]);
                        // Certain outcomes (t = 0 or SURE) still consume a draw,
                        // which keeps the loop free of unpredictable branches.
                        contested += (t.wrapping_sub(1) < SURE - 1) as usize;
                        out[c] = if rng.next_u64() >> 11 < t {
                            Strategy::Cooperate
                        } else {
                            Strategy::Defect
                        };
                    }
                }
            }
            RuleKind::UnconditionalImitation => {
                self.refresh_payoffs(lattice, b);
                let cells = lattice.cells();
                for (i, nb) in self.neighbors.iter().enumerate() {
                    let s = self.imitate_best(cells, i, nb, rng, &mut contested);
                    self.next.push(s);
                }
            }
            RuleKind::ReplicatorDynamics => {
                self.refresh_payoffs(lattice, b);
                let cells = lattice.cells();
                let scale = b * DEGREE as f64;
                for (i, nb) in self.neighbors.iter().enumerate() {
                    let s = self.pairwise(cells, i, nb, rng, &mut contested, |ui, uj| {
                        if uj > ui {
                            ((uj - ui) / scale).min(1.0)
                        } else {
                            0.0
                        }
                    });
                    self.next.push(s);
                }
            }
            RuleKind::Fermi { lambda } => {
                self.refresh_payoffs(lattice, b);
                let cells = lattice.cells();
                for (i, nb) in self.neighbors.iter().enumerate() {
                    let s = self.pairwise(cells, i, nb, rng, &mut contested, |ui, uj| {
                        logistic_of_gap((ui - uj) / lambda)
                    });
                    self.next.push(s);
                }
            }
        }
        let changed = lattice
            .cells()
            .iter()
            .zip(&self.next)
            .filter(|(a, b)| a != b)
            .count();
        std::mem::swap(lattice.cells_mut(), &mut self.next);
        StepReport { changed, contested }
    }

    #[inline]
    fn imitate_best<R: RngCore>(
        &self,
        cells: &[Strategy],
        i: usize,
        nb: &[u32; DEGREE],
        rng: &mut R,
        contested: &mut usize,
    ) -> Strategy {
        let u0 = self.payoffs[i];
        let best = nb
            .iter()
            .map(|&k| self.payoffs[k as usize])
            .fold(f64::MIN, f64::max);
        if best <= u0 {
            return cells[i];
        }
        let mut winners = [Strategy::Cooperate; DEGREE];
        let mut n = 0;
        for &k in nb {
            if self.payoffs[k as usize] == best {
                winners[n] = cells[k as usize];
                n += 1;
            }
        }
        if winners[..n].iter().all(|&s| s == winners[0]) {
            winners[0]
        } else {
            *contested += 1;
            winners[((rng.next_u32() as u64 * n as u64) >> 32) as usize]
        }
    }

    #[inline]
    fn pairwise<R: RngCore>(
        &self,
        cells: &[Strategy],
        i: usize,
        nb: &[u32; DEGREE],
        rng: &mut R,
        contested: &mut usize,
        prob: impl Fn(f64, f64) -> f64,
    ) -> Strategy {
        let j = nb[(rng.next_u32() >> 30) as usize] as usize;
        if cells[j] == cells[i] {
            return cells[i];
        }
        let p = prob(self.payoffs[i], self.payoffs[j]);
        if p <= 0.0 {
            return cells[i];
        }
        *contested += 1;
        if unit_f64(rng) < p {
            cells[j]
        } else {
            cells[i]
        }
    }
}

/// Writes `5 * is_defector + cooperating neighbors` for every cell.
fn fill_codes(side: usize, cells: &[Strategy], codes: &mut [u8]) {
    let coop = |s: Strategy| 1 - s as u8;
    let code = |own: Strategy, n: u8| (DEGREE as u8 + 1) * (own as u8) + n;
    for r in 0..side {
        let up = if r == 0 { side - 1 } else { r - 1 } * side;
        let down = if r + 1 == side { 0 } else { r + 1 } * side;
        let row = &cells[r * side..(r + 1) * side];
        let above = &cells[up..up + side];
        let below = &cells[down..down + side];
        let out = &mut codes[r * side..(r + 1) * side];
        let last = side - 1;
        out[0] = code(
            row[0],
            coop(above[0]) + coop(below[0]) + coop(row[last]) + coop(row[1]),
        );
        out[last] = code(
            row[last],
            coop(above[last]) + coop(below[last]) + coop(row[last - 1]) + coop(row[0]),
        );
        for c in 1..last {
            let n = coop(above[c]) + coop(below[c]) + coop(row[c - 1]) + coop(row[c + 1]);
            out[c] = code(row[c], n);
        }
    }
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
