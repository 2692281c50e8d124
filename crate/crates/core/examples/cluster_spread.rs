//! A 4x4 cooperator cluster among defectors, saved as PGM snapshots.
//!
//!     cargo run --release --example cluster_spread -- [output-dir]

use std::fs;
use std::path::PathBuf;

use gridgame::experiments::{cluster_scenario, run_trajectory, RunConfig, DEFAULT_SNAPSHOT_ROUNDS};
use gridgame::lattice::GameParams;
use gridgame::output::save_pgm;
use gridgame::rules::RuleKind;

fn main() -> gridgame::error::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "cluster-snapshots".into()),
    );
    fs::create_dir_all(&dir)?;

    let side = 100;
    let config = RunConfig::new(side, GameParams::new(1.1, RuleKind::MonteCarlo)?)
        .pattern(cluster_scenario(side, 4)?)
        .rounds(1000, 100)
        .seed(2);
    let trajectory = run_trajectory(&config, 0, &DEFAULT_SNAPSHOT_ROUNDS)?;

    for (round, lattice) in &trajectory.snapshots {
        let path = dir.join(format!("cluster_t{round:04}.pgm"));
        save_pgm(&path, lattice)?;
        println!(
            "t={round:<5} cooperators={:<5} rho={:.4} -> {}",
            lattice.cooperators(),
            lattice.cooperator_density(),
            path.display()
        );
    }
    Ok(())
}
