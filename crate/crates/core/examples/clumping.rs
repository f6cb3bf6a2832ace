// Single-linkage clumping of a configuration and the line it induces.

use palmlab::clumping::{build_clumping, line_order, verify_clumping, z_line_factor};
use palmlab::process::sample_poisson;
use palmlab::rng::trial_rng;
use palmlab::{Carrier, Window};

pub fn run_example() -> palmlab::Result<bool> {
    let torus = Carrier::torus(2, 10.0)?;
    let c = sample_poisson(&torus, &Window::Full, 1.0, &mut trial_rng(13, 1, 0))?;
    let s = build_clumping(&c, 64)?;
    for (k, level) in s.levels().iter().enumerate() {
        println!("level {k}: {} classes", level.len());
    }
    let verdict = verify_clumping(&s);
    let line = z_line_factor(&s)?;
    let order = line_order(&line);
    println!(
        "axioms hold: {}, line visits {:?} points",
        verdict.passed(),
        order.map(|o| o.len())
    );
    Ok(verdict.passed() && line.is_hamiltonian_path())
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
