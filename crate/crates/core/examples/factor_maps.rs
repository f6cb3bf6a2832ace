// Thinning, thickening, graphs and local mark encoding on one configuration.

use palmlab::factor::{
    constant_thickening, delta_thinning, distance_r_graph, local_decode_marks, local_encode_marks,
    nearest_neighbor_digraph, Sign,
};
use palmlab::process::{sample_poisson, MarkedConfiguration};
use palmlab::rng::trial_rng;
use palmlab::{Carrier, GroupPoint, Window};

pub fn run_example() -> palmlab::Result<usize> {
    let torus = Carrier::torus(2, 10.0)?;
    let c = sample_poisson(&torus, &Window::Full, 1.0, &mut trial_rng(3, 1, 0))?;
    let thin = delta_thinning(&c, 0.5);
    let offsets = [torus.identity(), GroupPoint::new(&[0.125, 0.0])];
    let thick = constant_thickening(&thin, &offsets)?;
    println!(
        "{} points, {} after thinning, {} after thickening",
        c.len(),
        thin.len(),
        thick.len()
    );
    println!("distance-1 graph: {} edges", distance_r_graph(&c, 1.0)?.edges().len());
    println!(
        "nearest-neighbour digraph: {} arrows",
        nearest_neighbor_digraph(&c)?.edges().len()
    );
    let signs = (0..thin.len())
        .map(|i| if i % 3 == 0 { Sign::Plus } else { Sign::Minus })
        .collect();
    let marked = MarkedConfiguration::new(thin, signs)?;
    let encoded = local_encode_marks(&marked, 0.5)?;
    assert_eq!(local_decode_marks(&encoded, 0.5)?, marked);
    println!("encoded {} marks into {} points", marked.len(), encoded.len());
    Ok(thick.len())
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
