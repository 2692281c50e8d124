//! One synchronous step of the roulette imitation rule, taken apart.
//!
//! A lone defector in a sea of cooperators: its payoff, the neighbors'
//! transition distributions and the exact probability that each cell
//! cooperates after one step.
//!
//!     cargo run --release --example roulette_rule

use gridgame::lattice::{compute_payoffs, GameParams, Lattice, Strategy};
use gridgame::rules::{mc_transition_distribution, RuleKind, Source, Stepper};

fn main() -> gridgame::error::Result<()> {
    let params = GameParams::new(1.1, RuleKind::MonteCarlo)?;
    let mut lattice = Lattice::uniform(5, Strategy::Cooperate)?;
    lattice.set(2, 2, Strategy::Defect);

    let payoffs = compute_payoffs(&lattice, &params);
    println!("payoffs (b = {}):", params.b());
    for row in payoffs.returns().chunks(lattice.side()) {
        let cells: Vec<String> = row.iter().map(|u| format!("{u:4.1}")).collect();
        println!("  {}", cells.join(" "));
    }

    // The cooperator just above the defector.
    let focal = lattice.index(1, 2);
    let nb = lattice.neighbors(focal)?;
    let dist = mc_transition_distribution(payoffs.get(focal), &nb.map(|k| payoffs.get(k)))?;
    println!("\nsources for cell (1, 2):");
    for (source, p) in dist.entries() {
        let (label, s) = match source {
            Source::Keep => ("self".to_string(), lattice.cells()[focal]),
            Source::Neighbor(k) => {
                let (r, c) = lattice.coords(nb[*k]);
                (format!("({r}, {c})"), lattice.cells()[nb[*k]])
            }
        };
        println!("  {label:>8} {} p = {p:.4}", s.symbol());
    }

    let mut stepper = Stepper::new(lattice.side());
    let p = stepper.roulette_probabilities(&lattice, params.b());
    println!("\nprobability of cooperating next round:");
    for row in p.chunks(lattice.side()) {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.3}")).collect();
        println!("  {}", cells.join(" "));
    }
    Ok(())
}
