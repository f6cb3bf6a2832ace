// The statistical utilities on their own.

use palmlab::stats::{chi_square_gof, mean_se, poisson_dispersion, poisson_gof, two_sample_ks};
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};

pub fn run_example() -> palmlab::Result<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let pois = Poisson::new(4.0).expect("positive mean");
    let draws: Vec<u64> = (0..10_000).map(|_| pois.sample(&mut rng) as u64).collect();
    let gof = poisson_gof(&draws, 4.0)?;
    println!("Pois(4) GOF: statistic {:.2}, p = {:.3}", gof.statistic, gof.p_value);
    println!("dispersion p = {:.3}", poisson_dispersion(&draws)?.p_value);
    let exact = chi_square_gof(&[10, 20, 30], &[10.0, 20.0, 30.0], 0)?;
    println!("exact counts: statistic {}, p = {}", exact.statistic, exact.p_value);
    let xs: Vec<f64> = draws.iter().map(|&d| d as f64).collect();
    println!("mean {:?}", mean_se(&xs));
    println!("KS of a sample with itself: {}", two_sample_ks(&xs, &xs)?.statistic);
    Ok(gof.p_value)
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
