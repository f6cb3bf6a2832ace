// Translation equivariance of every factor operation.

use palmlab::equivariance::check_equivariance;
use palmlab::process::ProcessSpec;
use palmlab::Carrier;

pub fn run_example() -> palmlab::Result<bool> {
    let torus = Carrier::torus(2, 10.0)?;
    let reports = check_equivariance(&ProcessSpec::poisson(1.0), &torus, 20, 1)?;
    for r in &reports {
        println!("{:<28} {}/{}", r.statistic, (r.estimate * r.n as f64) as u64, r.n);
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
