// Samples Poisson configurations on the torus and estimates their intensity.

use palmlab::process::{estimate_intensity, sample_poisson};
use palmlab::rng::trial_rng;
use palmlab::{Carrier, Window};

pub fn run_example() -> palmlab::Result<f64> {
    let torus = Carrier::torus(2, 10.0)?;
    let samples = (0..200)
        .map(|i| sample_poisson(&torus, &Window::Full, 1.0, &mut trial_rng(7, 1, i)))
        .collect::<palmlab::Result<Vec<_>>>()?;
    println!("first configuration has {} points", samples[0].len());
    let r = estimate_intensity(&samples, &Window::Full)?;
    println!("intensity {:.4} +- {:.4}", r.estimate, r.stderr);
    Ok(r.estimate)
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
