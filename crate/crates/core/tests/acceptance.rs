//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//! Pass `ac3 ac7` (any subset) to run only those criteria. AC7 and AC10 reuse
//! the AC5 sweep, which runs on demand when AC5 itself is filtered out.

use std::process::ExitCode;
use std::time::Instant;

use gridgame::experiments::{
    compare_rules, grid, invasion_scenario, linear_slope, run_replicates, sweep_b,
    sweep_population, sweep_rho0, EquilibriumStats, RunConfig, SweepRow,
};
use gridgame::fitting::{
    evaluate_model, fit_model, FitFamily, FitModel, DEFAULT_STARTS, REFERENCE_QUADRATIC,
    REFERENCE_TRIG,
};
use gridgame::lattice::{GameParams, Lattice, Pattern, Strategy};
use gridgame::meanfield::mf_integrate;
use gridgame::rules::{mc_transition_distribution, step, RuleKind, Source, Stepper};
use gridgame::seed::rng_from_seed;
use rand::Rng;

const SIDE: usize = 100;
const B: f64 = 1.10;
const ROUNDS: usize = 2000;
const WINDOW: usize = 200;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn base(rule: RuleKind, replicates: usize, seed: u64) -> RunConfig {
    RunConfig::new(SIDE, GameParams::new(B, rule).unwrap())
        .rounds(ROUNDS, WINDOW)
        .replicates(replicates)
        .seed(seed)
}

fn ac1() -> Verdict {
    let stats = run_replicates(&base(RuleKind::MonteCarlo, 200, 1)).unwrap();
    let drift = stats.trailing_drift();
    verdict(
        stats.rho_mean > 0.05 && stats.rho_mean < 0.95 && drift < 0.01,
        format!(
            "rho={:.4} sd={:.4} drift={:.5} (200 replicates)",
            stats.rho_mean, stats.rho_stddev, drift
        ),
    )
}

fn ac2() -> Verdict {
    let coarse = mf_integrate(0.5, B, 4, 0.01, 1000.0).unwrap();
    let fine = mf_integrate(0.5, B, 4, 0.005, 1000.0).unwrap();
    let end = coarse.last().unwrap().rho;
    let gap = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a.rho - b.rho).abs())
        .fold(0.0, f64::max);
    verdict(
        end < 0.01 && gap < 1e-8,
        format!("rho(1000)={end:.3e} max step-halving gap={gap:.2e}"),
    )
}

const FRACTIONS: [f64; 3] = [0.04, 0.0625, 0.1089];

fn invasions(rule: RuleKind, seed: u64) -> Vec<(usize, EquilibriumStats)> {
    FRACTIONS
        .iter()
        .map(|&f| {
            let (pattern, _) = invasion_scenario(SIDE, f).unwrap();
            let Pattern::AllCooperatorsWithDefectorBlock(w) = pattern else {
                unreachable!()
            };
            let config = base(rule, 100, seed).pattern(pattern);
            (w, run_replicates(&config).unwrap())
        })
        .collect()
}

fn max_pairwise(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn ac3(mc: &[(usize, EquilibriumStats)]) -> Verdict {
    let rhos: Vec<f64> = mc.iter().map(|(_, s)| s.rho_mean).collect();
    let near = rhos.iter().all(|r| (r - 0.32).abs() <= 0.05);
    let spread = max_pairwise(&rhos);
    verdict(
        near && spread <= 0.05,
        format!(
            "{} spread={spread:.4}",
            mc.iter()
                .map(|(w, s)| format!("{w}x{w}:{:.4}", s.rho_mean))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn ac4(mc: &[(usize, EquilibriumStats)]) -> Verdict {
    let ui = invasions(RuleKind::UnconditionalImitation, 4);
    let plateau = mc.iter().map(|(_, s)| s.rho_mean).sum::<f64>() / mc.len() as f64;
    let rhos: Vec<f64> = ui.iter().map(|(_, s)| s.rho_mean).collect();
    let decreasing = rhos.windows(2).all(|w| w[1] < w[0]);
    let below = rhos.iter().all(|&r| r < plateau);
    let cores = ui.iter().all(|(_, s)| s.defector_core_mean > 0.0);
    verdict(
        decreasing && below && cores,
        format!(
            "{} MC plateau={plateau:.4} decreasing={decreasing} below={below} cores={cores}",
            ui.iter()
                .map(|(w, s)| format!(
                    "{w}x{w}:{:.4}/cores {:.1}",
                    s.rho_mean, s.defector_core_mean
                ))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn b_sweep() -> Vec<SweepRow> {
    let bs = grid(1.02, 1.40, 0.02).unwrap();
    sweep_b(&base(RuleKind::MonteCarlo, 100, 5), &bs).unwrap()
}

fn ac5(rows: &[SweepRow]) -> Verdict {
    let threshold = rows.iter().find(|r| r.stats.rho_mean < 0.005).map(|r| r.b);
    let curve = rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.b, r.stats.rho_mean))
        .collect::<Vec<_>>()
        .join(" ");
    match threshold {
        Some(b) => verdict(
            (1.28..=1.34).contains(&b),
            format!("extinction at b={b}; {curve}"),
        ),
        None => verdict(false, format!("no extinction on the grid; {curve}")),
    }
}

fn pooled(a: &EquilibriumStats, b: &EquilibriumStats) -> f64 {
    (a.standard_error().powi(2) + b.standard_error().powi(2)).sqrt()
}

fn ac6() -> Verdict {
    let rows = compare_rules(&base(RuleKind::MonteCarlo, 100, 6)).unwrap();
    let get = |name: &str| &rows.iter().find(|r| r.rule.name() == name).unwrap().stats;
    let (mc, ui, rd, fermi) = (get("mc"), get("ui"), get("rd"), get("fermi"));
    let worst = if rd.rho_mean >= fermi.rho_mean {
        rd
    } else {
        fermi
    };
    let ui_mc = ui.rho_mean - mc.rho_mean > 2.0 * pooled(ui, mc);
    let mc_rest = mc.rho_mean - worst.rho_mean > 2.0 * pooled(mc, worst);
    verdict(
        ui_mc && mc_rest,
        format!(
            "ui={:.4} mc={:.4} rd={:.4} fermi={:.4} (se {:.4}/{:.4}/{:.4}/{:.4}); ui>mc:{ui_mc} mc>others:{mc_rest}",
            ui.rho_mean,
            mc.rho_mean,
            rd.rho_mean,
            fermi.rho_mean,
            ui.standard_error(),
            mc.standard_error(),
            rd.standard_error(),
            fermi.standard_error()
        ),
    )
}

fn recovery_gap(model: &FitModel, seed: u64) -> f64 {
    let xs = grid(1.02, 1.40, 0.02).unwrap();
    let ys = evaluate_model(model, &xs);
    let fit = fit_model(model.family(), &xs, &ys, DEFAULT_STARTS, seed).unwrap();
    let truth = model.canonical();
    fit.model
        .parameters()
        .iter()
        .zip(truth.parameters())
        .map(|((_, a), (_, b))| (a - b).abs())
        .fold(0.0, f64::max)
}

fn ac7(rows: &[SweepRow]) -> Verdict {
    let xs: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.stats.rho_mean).collect();
    let rmse = |family| fit_model(family, &xs, &ys, DEFAULT_STARTS, 7).unwrap().rmse;
    let (trig, quad, power) = (
        rmse(FitFamily::Trigonometric),
        rmse(FitFamily::Quadratic),
        rmse(FitFamily::PowerLaw),
    );
    let ordered = trig <= quad && quad < power;
    let gaps = [
        recovery_gap(&REFERENCE_TRIG, 71),
        recovery_gap(&REFERENCE_QUADRATIC, 72),
        recovery_gap(
            &FitModel::PowerLaw {
                b_cr: 1.31,
                beta: 0.923,
                scale: 0.9,
            },
            73,
        ),
    ];
    let recovered = gaps.iter().all(|g| *g < 1e-3);
    verdict(
        ordered && recovered,
        format!(
            "rmse trig={trig:.4} quadratic={quad:.4} power-law={power:.4}; recovery gaps {:.1e}/{:.1e}/{:.1e}",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn ac8() -> Verdict {
    let values = [0.2, 0.4, 0.6, 0.8, 0.99];
    let rows = sweep_rho0(&base(RuleKind::MonteCarlo, 300, 8), &values).unwrap();
    let rhos: Vec<f64> = rows.iter().map(|r| r.stats.rho_mean).collect();
    let spread = max_pairwise(&rhos);
    verdict(
        spread <= 0.03,
        format!(
            "{} spread={spread:.4}",
            rows.iter()
                .map(|r| format!("{}:{:.4}", r.rho0, r.stats.rho_mean))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn ac9() -> Verdict {
    let rows = sweep_population(&base(RuleKind::MonteCarlo, 100, 9), &[10, 40, 60, 100]).unwrap();
    let plateau: Vec<f64> = rows[1..].iter().map(|r| r.stats.rho_mean).collect();
    let mean = plateau.iter().sum::<f64>() / plateau.len() as f64;
    let spread = max_pairwise(&plateau);
    let small = rows[0].stats.rho_mean;
    verdict(
        spread <= 0.05 && small <= mean - 0.05,
        format!(
            "{} plateau spread={spread:.4}, N=100 below plateau by {:.4}",
            rows.iter()
                .map(|r| format!("N={}:{:.4}", r.population, r.stats.rho_mean))
                .collect::<Vec<_>>()
                .join(" "),
            mean - small
        ),
    )
}

fn ac10(rows: &[SweepRow]) -> Verdict {
    let coexist: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.stats.rho_mean > 0.0 && r.stats.rho_mean < 1.0)
        .filter_map(|r| Some((r.b, r.stats.avg_return_c?, r.stats.avg_return_d?)))
        .collect();
    if coexist.len() < 3 {
        return verdict(false, format!("only {} coexistence points", coexist.len()));
    }
    let bs: Vec<f64> = coexist.iter().map(|p| p.0).collect();
    let uc: Vec<f64> = coexist.iter().map(|p| p.1).collect();
    let ud: Vec<f64> = coexist.iter().map(|p| p.2).collect();
    let (sc, sd) = (linear_slope(&bs, &uc), linear_slope(&bs, &ud));
    let pointwise = coexist.iter().all(|p| p.1 > p.2);
    verdict(
        sc.abs() < sd.abs() / 3.0 && sd < 0.0 && pointwise,
        format!(
            "{} points in b<={}: slope U_C={sc:.4} U_D={sd:.4}; U_C>U_D everywhere: {pointwise}",
            coexist.len(),
            bs.last().unwrap()
        ),
    )
}

fn ac11() -> Verdict {
    let mut rng = rng_from_seed(11);
    let mut worst_norm: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..10_000 {
        let u0 = rng.random_range(0.0..8.0);
        let nb: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..8.0));
        let d = mc_transition_distribution(u0, &nb).unwrap();
        worst_norm = worst_norm.max((d.total() - 1.0).abs());
        let c = rng.random_range(0.01..100.0);
        let scaled = mc_transition_distribution(c * u0, &nb.map(|u| c * u)).unwrap();
        for src in [
            Source::Keep,
            Source::Neighbor(0),
            Source::Neighbor(1),
            Source::Neighbor(2),
            Source::Neighbor(3),
        ] {
            worst_scale = worst_scale.max((d.probability(src) - scaled.probability(src)).abs());
        }
    }

    let fixed = RuleKind::all().iter().all(|&rule| {
        let params = GameParams::new(1.3, rule).unwrap();
        [Strategy::Cooperate, Strategy::Defect].iter().all(|&s| {
            let l = Lattice::uniform(5, s).unwrap();
            step(&l, &params, &mut rng) == l
        })
    });

    let mut exhaustive: f64 = 0.0;
    let mut stepper = Stepper::new(3);
    for bits in 0..512u32 {
        let cells: Vec<Strategy> = (0..9)
            .map(|i| {
                if bits >> i & 1 == 1 {
                    Strategy::Cooperate
                } else {
                    Strategy::Defect
                }
            })
            .collect();
        let l = Lattice::from_cells(3, cells).unwrap();
        let p = stepper.roulette_probabilities(&l, B)[4];
        let payoffs = gridgame::lattice::compute_payoffs(
            &l,
            &GameParams::new(B, RuleKind::MonteCarlo).unwrap(),
        );
        let nb = l.neighbors(4).unwrap();
        let dist = mc_transition_distribution(payoffs.get(4), &nb.map(|k| payoffs.get(k))).unwrap();
        let q: f64 = dist
            .entries()
            .iter()
            .filter(|(src, _)| match src {
                Source::Keep => l.cells()[4].is_cooperator(),
                Source::Neighbor(k) => l.cells()[nb[*k]].is_cooperator(),
            })
            .map(|(_, w)| w)
            .sum();
        exhaustive = exhaustive.max((p - q).abs());
    }

    let config = RunConfig::new(20, GameParams::new(B, RuleKind::MonteCarlo).unwrap())
        .rounds(100, 10)
        .replicates(4)
        .seed(11);
    let deterministic = run_replicates(&config).unwrap() == run_replicates(&config).unwrap();

    verdict(
        worst_norm <= 1e-12 && worst_scale <= 1e-12 && fixed && exhaustive <= 1e-12 && deterministic,
        format!(
            "normalization {worst_norm:.1e}, scale {worst_scale:.1e}, fixed points {fixed}, 3x3 enumeration {exhaustive:.1e}, reruns identical {deterministic}"
        ),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with("ac"))
        .collect();
    let selected = |id: &str| wanted.is_empty() || wanted.iter().any(|w| w == id);
    let names = [
        ("ac1", "coexistence under the roulette rule"),
        ("ac2", "mean-field extinction"),
        ("ac3", "invasion plateau"),
        ("ac4", "fragility under unconditional imitation"),
        ("ac5", "extinction threshold"),
        ("ac6", "rule ordering"),
        ("ac7", "fit ordering and parameter recovery"),
        ("ac8", "insensitivity to initial density"),
        ("ac9", "population-size plateau"),
        ("ac10", "returns versus temptation"),
        ("ac11", "property suites"),
    ];

    let mut mc_invasions = None;
    let mut sweep = None;
    let mut failures = 0;
    for (id, name) in names {
        if !selected(id) {
            continue;
        }
        let started = Instant::now();
        let v = match id {
            "ac1" => ac1(),
            "ac2" => ac2(),
            "ac3" => ac3(mc_invasions.get_or_insert_with(|| invasions(RuleKind::MonteCarlo, 3))),
            "ac4" => ac4(mc_invasions.get_or_insert_with(|| invasions(RuleKind::MonteCarlo, 3))),
            "ac5" => ac5(sweep.get_or_insert_with(b_sweep)),
            "ac6" => ac6(),
            "ac7" => ac7(sweep.get_or_insert_with(b_sweep)),
            "ac8" => ac8(),
            "ac9" => ac9(),
            "ac10" => ac10(sweep.get_or_insert_with(b_sweep)),
            "ac11" => ac11(),
            _ => unreachable!(),
        };
        if !v.pass {
            failures += 1;
        }
        println!(
            "{} {} {}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            id.to_uppercase(),
            name,
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failures} failed");
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
