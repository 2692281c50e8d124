//! Well-mixed density trajectories for several temptation values.
//!
//!     cargo run --release --example mean_field

use gridgame::lattice::DEGREE;
use gridgame::meanfield::{mf_derivative, mf_integrate, DEFAULT_DT};

fn main() -> gridgame::error::Result<()> {
    let bs = [1.05, 1.1, 1.2, 1.4];
    let runs = bs
        .iter()
        .map(|&b| mf_integrate(0.5, b, DEGREE, DEFAULT_DT, 100.0))
        .collect::<Result<Vec<_>, _>>()?;

    print!("{:>5}", "t");
    for b in bs {
        print!(" {:>9}", format!("b={b}"));
    }
    println!();
    for t in [0, 1, 2, 5, 10, 20, 50, 100] {
        print!("{t:>5}");
        for run in &runs {
            print!(" {:>9.5}", run[t].rho);
        }
        println!();
    }
    println!(
        "\nd(rho)/dt at rho = 0.5, b = 1.1: {:.6}",
        mf_derivative(0.5, 1.1, DEGREE)
    );
    Ok(())
}
