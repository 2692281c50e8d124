//! Replicate runner, equilibrium statistics and the scenario protocols.
//!
//! A run is a set of independent replicates of the same configuration.
//! Replicate `r` builds its initial lattice from `derive_seed(seed, 2r)` and
//! drives the dynamics from `derive_seed(seed, 2r + 1)`, so results depend
//! only on the configuration and master seed. Replicates execute on the
//! rayon pool and are reduced in index order.

use rayon::prelude::*;

use crate::error::{invalid_param, Error, Result};
use crate::lattice::{GameParams, Lattice, Pattern, Strategy};
use crate::rules::{RuleKind, StepReport, Stepper, FERMI_LAMBDA};
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_ROUNDS: usize = 2000;
pub const DEFAULT_EQ_WINDOW: usize = 200;
/// Snapshot times of the single-cluster spreading protocol.
pub const DEFAULT_SNAPSHOT_ROUNDS: [usize; 8] = [0, 20, 100, 200, 400, 600, 800, 1000];

/// Everything needed to reproduce a replicated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub side: usize,
    pub params: GameParams,
    pub pattern: Pattern,
    pub rounds: usize,
    pub replicates: usize,
    pub seed: u64,
    pub eq_window: usize,
}

impl RunConfig {
    /// Half cooperators at random, default horizon and window, one replicate.
    pub fn new(side: usize, params: GameParams) -> Self {
        RunConfig {
            side,
            params,
            pattern: Pattern::Bernoulli(0.5),
            rounds: DEFAULT_ROUNDS,
            replicates: 1,
            seed: 0,
            eq_window: DEFAULT_EQ_WINDOW,
        }
    }

    pub fn pattern(mut self, pattern: Pattern) -> Self {
        self.pattern = pattern;
        self
    }

    pub fn rounds(mut self, rounds: usize, eq_window: usize) -> Self {
        self.rounds = rounds;
        self.eq_window = eq_window;
        self
    }

    pub fn replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 3 {
            return Err(Error::InvalidSize(self.side));
        }
        self.pattern.validate(self.side)?;
        if self.replicates == 0 {
            return Err(invalid_param("replicates", "at least one replicate"));
        }
        if self.eq_window == 0 || self.eq_window >= self.rounds {
            return Err(invalid_param(
                "window",
                format!(
                    "equilibrium window {} must lie in [1, rounds={})",
                    self.eq_window, self.rounds
                ),
            ));
        }
        Ok(())
    }

    pub fn lattice_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.seed, 2 * replicate as u64)
    }

    pub fn dynamics_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.seed, 2 * replicate as u64 + 1)
    }
}

/// One replicate trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Cooperator density after each round, starting with the initial state.
    pub series: Vec<f64>,
    pub final_lattice: Lattice,
    /// Requested `(round, lattice)` pairs in ascending round order.
    pub snapshots: Vec<(usize, Lattice)>,
    pub avg_return_c: Option<f64>,
    pub avg_return_d: Option<f64>,
    /// Round at which the lattice stopped changing for good, if it did.
    pub frozen_at: Option<usize>,
}

impl Trajectory {
    /// Mean density over the last `window` rounds.
    pub fn equilibrium(&self, window: usize) -> f64 {
        let tail = &self.series[self.series.len() - window..];
        tail.iter().sum::<f64>() / window as f64
    }
}

/// All-cooperator and all-defector lattices are fixed points of every rule.
fn is_absorbing(lattice: &Lattice) -> bool {
    let c = lattice.cooperators();
    c == 0 || c == lattice.len()
}

/// True when no later step can change the lattice.
fn is_frozen(rule: RuleKind, lattice: &Lattice, report: StepReport) -> bool {
    if is_absorbing(lattice) {
        return true;
    }
    // Without contested draws these rules are deterministic, so an unchanged
    // lattice repeats forever. Pairwise rules draw a partner every round.
    matches!(
        rule,
        RuleKind::MonteCarlo | RuleKind::UnconditionalImitation
    ) && report.changed == 0
        && report.contested == 0
}

/// Runs replicate `replicate` of `config`, keeping lattices at `snapshot_rounds`.
pub fn run_trajectory(
    config: &RunConfig,
    replicate: usize,
    snapshot_rounds: &[usize],
) -> Result<Trajectory> {
    config.validate()?;
    let mut lattice = Lattice::new(config.side, config.pattern, config.lattice_seed(replicate))?;
    let mut rng = rng_from_seed(config.dynamics_seed(replicate));
    let mut stepper = Stepper::new(config.side);
    let mut wanted: Vec<usize> = snapshot_rounds
        .iter()
        .copied()
        .filter(|&r| r <= config.rounds)
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut next_snapshot = wanted.iter().peekable();

    let mut series = Vec::with_capacity(config.rounds + 1);
    series.push(lattice.cooperator_density());
    let mut frozen_at = is_absorbing(&lattice).then_some(0);
    for round in 0..=config.rounds {
        while next_snapshot.peek() == Some(&&round) {
            snapshots.push((round, lattice.clone()));
            next_snapshot.next();
        }
        if round == config.rounds {
            break;
        }
        if frozen_at.is_some() {
            series.push(*series.last().unwrap());
            continue;
        }
        let report = stepper.advance(&mut lattice, &config.params, &mut rng);
        series.push(lattice.cooperator_density());
        if is_frozen(config.params.rule(), &lattice, report) {
            frozen_at = Some(round + 1);
        }
    }

    stepper.refresh_payoffs(&lattice, config.params.b());
    let mean_for = |s: Strategy| {
        let (sum, n) = lattice
            .cells()
            .iter()
            .zip(stepper.payoffs())
            .filter(|(c, _)| **c == s)
            .fold((0.0, 0usize), |(sum, n), (_, u)| (sum + u, n + 1));
        (n > 0).then(|| sum / n as f64)
    };
    Ok(Trajectory {
        series,
        avg_return_c: mean_for(Strategy::Cooperate),
        avg_return_d: mean_for(Strategy::Defect),
        final_lattice: lattice,
        snapshots,
        frozen_at,
    })
}

/// Aggregate over replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumStats {
    pub rho_mean: f64,
    /// Sample standard deviation of the per-replicate equilibria.
    pub rho_stddev: f64,
    /// Mean density per round across replicates, `rounds + 1` entries.
    pub series_mean: Vec<f64>,
    /// Mean final-round payoff of cooperators, over replicates where any
    /// survive.
    pub avg_return_c: Option<f64>,
    pub avg_return_d: Option<f64>,
    /// Per-replicate equilibrium densities, by replicate index.
    pub replicate_rho: Vec<f64>,
    /// Mean number of final-round defectors surrounded only by defectors.
    pub defector_core_mean: f64,
    pub eq_window: usize,
}

impl EquilibriumStats {
    pub fn replicates(&self) -> usize {
        self.replicate_rho.len()
    }

    pub fn standard_error(&self) -> f64 {
        self.rho_stddev / (self.replicates() as f64).sqrt()
    }

    /// Change of the averaged series across the trailing window, measured as
    /// the least-squares slope times the window length.
    pub fn trailing_drift(&self) -> f64 {
        let tail = &self.series_mean[self.series_mean.len() - self.eq_window..];
        (ols_slope(tail) * (self.eq_window - 1) as f64).abs()
    }
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    linear_slope(&xs, ys)
}

/// Least-squares slope of `ys` against `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = xs.iter().zip(ys).fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    sxy / sxx
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn mean_present(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = xs
        .flatten()
        .fold((0.0, 0usize), |(sum, n), x| (sum + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs all replicates of `config` and aggregates them.
pub fn run_replicates(config: &RunConfig) -> Result<EquilibriumStats> {
    config.validate()?;
    let trajectories: Vec<Trajectory> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_trajectory(config, r, &[]))
        .collect::<Result<_>>()?;
    Ok(aggregate(config, &trajectories))
}

fn aggregate(config: &RunConfig, trajectories: &[Trajectory]) -> EquilibriumStats {
    let n = trajectories.len() as f64;
    let replicate_rho: Vec<f64> = trajectories
        .iter()
        .map(|t| t.equilibrium(config.eq_window))
        .collect();
    let (rho_mean, rho_stddev) = mean_sd(&replicate_rho);
    let mut series_mean = vec![0.0; config.rounds + 1];
    for t in trajectories {
        for (acc, x) in series_mean.iter_mut().zip(&t.series) {
            *acc += x;
        }
    }
    series_mean.iter_mut().for_each(|x| *x /= n);
    EquilibriumStats {
        rho_mean,
        rho_stddev,
        series_mean,
        avg_return_c: mean_present(trajectories.iter().map(|t| t.avg_return_c)),
        avg_return_d: mean_present(trajectories.iter().map(|t| t.avg_return_d)),
        defector_core_mean: trajectories
            .iter()
            .map(|t| t.final_lattice.defector_core_cells() as f64)
            .sum::<f64>()
            / n,
        replicate_rho,
        eq_window: config.eq_window,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub b: f64,
    pub stats: EquilibriumStats,
}

/// One replicated run per temptation value, ordered by `b`.
pub fn sweep_b(base: &RunConfig, b_values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut bs = b_values.to_vec();
    for &b in &bs {
        if !(b > 1.0 && b <= 2.0) {
            return Err(invalid_param("b", format!("temptation {b} not in (1, 2]")));
        }
    }
    bs.sort_by(f64::total_cmp);
    bs.into_iter()
        .map(|b| {
            let config = RunConfig {
                params: base.params.with_b(b)?,
                ..base.clone()
            };
            Ok(SweepRow {
                b,
                stats: run_replicates(&config)?,
            })
        })
        .collect()
}

/// Evenly spaced grid `start, start + step, ...` up to `end` inclusive.
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(invalid_param(
            "grid",
            format!("cannot step from {start} to {end} by {step}"),
        ));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    // Rounded to 1e-12 so 1.02 + 14 * 0.02 prints as 1.3.
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Centered square defector block covering about `target_fraction` of an
/// all-cooperator lattice. Returns the pattern and the exact fraction.
pub fn invasion_scenario(side: usize, target_fraction: f64) -> Result<(Pattern, f64)> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::InvalidFraction(target_fraction));
    }
    let w = (side as f64 * target_fraction.sqrt()).round() as usize;
    if w < 1 || w > side {
        return Err(Error::InvalidFraction(target_fraction));
    }
    Ok((
        Pattern::AllCooperatorsWithDefectorBlock(w),
        (w * w) as f64 / (side * side) as f64,
    ))
}

/// All-defector lattice with a centered `w x w` cooperator block.
pub fn cluster_scenario(side: usize, w: usize) -> Result<Pattern> {
    let pattern = Pattern::CenteredCooperatorBlock(w);
    pattern.validate(side)?;
    Ok(pattern)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rho0Row {
    pub rho0: f64,
    pub stats: EquilibriumStats,
}

/// One replicated run per initial cooperator density.
pub fn sweep_rho0(base: &RunConfig, rho0_values: &[f64]) -> Result<Vec<Rho0Row>> {
    for &r in rho0_values {
        if !(r > 0.0 && r <= 1.0) {
            return Err(invalid_param("rho0", format!("{r} not in (0, 1]")));
        }
    }
    rho0_values
        .iter()
        .map(|&rho0| {
            let config = base.clone().pattern(Pattern::Bernoulli(rho0));
            Ok(Rho0Row {
                rho0,
                stats: run_replicates(&config)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationRow {
    pub side: usize,
    pub population: usize,
    pub stats: EquilibriumStats,
}

/// One replicated run per lattice side, keeping the base pattern.
pub fn sweep_population(base: &RunConfig, sides: &[usize]) -> Result<Vec<PopulationRow>> {
    sides
        .iter()
        .map(|&side| {
            let config = RunConfig {
                side,
                ..base.clone()
            };
            Ok(PopulationRow {
                side,
                population: side * side,
                stats: run_replicates(&config)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleRow {
    pub rule: RuleKind,
    pub stats: EquilibriumStats,
}

/// Runs the four rules from identical initial lattices. The Fermi rule uses
/// `lambda = 0.0625`.
pub fn compare_rules(base: &RunConfig) -> Result<Vec<RuleRow>> {
    compare_rules_with_lambda(base, FERMI_LAMBDA)
}

pub fn compare_rules_with_lambda(base: &RunConfig, lambda: f64) -> Result<Vec<RuleRow>> {
    RuleKind::all()
        .into_iter()
        .map(|rule| match rule {
            RuleKind::Fermi { .. } => RuleKind::Fermi { lambda },
            other => other,
        })
        .map(|rule| {
            let config = RunConfig {
                params: base.params.with_rule(rule)?,
                ..base.clone()
            };
            Ok(RuleRow {
                rule,
                stats: run_replicates(&config)?,
            })
        })
        .collect()
}
