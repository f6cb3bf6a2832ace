// Balanced allocation of a Poisson configuration and its extra head point.

use palmlab::allocation::{balanced_allocation, extra_head_point};
use palmlab::io::allocation_pgm;
use palmlab::process::sample_poisson;
use palmlab::rng::trial_rng;
use palmlab::{Carrier, Window};

pub fn run_example() -> palmlab::Result<bool> {
    let torus = Carrier::torus(2, 10.0)?;
    let c = sample_poisson(&torus, &Window::Full, 1.0, &mut trial_rng(11, 1, 0))?;
    let a = balanced_allocation(&c, 10.0 / 128.0, 0.01, 500)?;
    println!(
        "{} points, capacity {:.4}, converged {} after {} rounds, unclaimed {:.4}",
        c.len(),
        a.capacity(),
        a.converged(),
        a.rounds(),
        a.unclaimed_volume()
    );
    match extra_head_point(&a) {
        Ok(x) => println!("extra head at {:?}", x.coords()),
        Err(e) => println!("no extra head: {e}"),
    }
    let pgm = allocation_pgm(&a)?;
    println!("raster: {} bytes", pgm.len());
    Ok(a.converged())
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
