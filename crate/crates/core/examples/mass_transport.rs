// Mass transport along nearest-neighbour arrows and the degree balance of the
// nearest-neighbour digraph.

use palmlab::palm::{check_degree_balance, check_mtp, nearest_neighbor_arrow, nearest_neighbor_transport, CheckParams};
use palmlab::process::ProcessSpec;
use palmlab::Carrier;

pub fn run_example() -> palmlab::Result<bool> {
    let torus = Carrier::torus(2, 10.0)?;
    let spec = ProcessSpec::poisson(1.0);
    let params = CheckParams::default().with_trials(200).with_seed(1);
    let mut reports = check_mtp(&nearest_neighbor_transport(2.4), &spec, &torus, &params)?;
    reports.extend(check_degree_balance(
        &nearest_neighbor_arrow(2.4),
        &spec,
        &torus,
        &params,
    )?);
    for r in &reports {
        println!(
            "{}/{} = {:.4} +- {:.4}",
            r.experiment, r.statistic, r.estimate, r.stderr
        );
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
