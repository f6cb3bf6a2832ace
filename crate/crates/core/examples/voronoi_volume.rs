// Grid Voronoi tessellation and the Palm mean of the root cell volume.

use palmlab::allocation::check_voronoi_palm_volume;
use palmlab::factor::voronoi_partition;
use palmlab::palm::CheckParams;
use palmlab::process::{sample_poisson, ProcessSpec};
use palmlab::rng::trial_rng;
use palmlab::{Carrier, Window};

pub fn run_example() -> palmlab::Result<f64> {
    let torus = Carrier::torus(2, 10.0)?;
    let c = sample_poisson(&torus, &Window::Full, 1.0, &mut trial_rng(5, 1, 0))?;
    let v = voronoi_partition(&c, 10.0 / 256.0)?;
    let vols = v.volumes();
    println!("{} cells, total volume {}", vols.len(), vols.iter().sum::<f64>());
    let params = CheckParams::default().with_trials(100).with_seed(1);
    let r = check_voronoi_palm_volume(&ProcessSpec::poisson(1.0), &torus, 256, &params)?;
    println!("E0[root cell volume] = {:.4} +- {:.4}", r.estimate, r.stderr);
    Ok(r.estimate)
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
