// Both sides of the Campbell-Little-Mecke-Matthes identity for `1_U(x)` times
// the indicator that no other point lies within 1/2.

use palmlab::factor::Local;
use palmlab::palm::{check_clmm, CheckParams};
use palmlab::process::ProcessSpec;
use palmlab::{Carrier, GroupPoint, RootedConfiguration, Window};

pub fn run_example() -> palmlab::Result<bool> {
    let torus = Carrier::torus(2, 10.0)?;
    let f = Local::new(
        0.5,
        |_: &GroupPoint, v: &RootedConfiguration| {
            if v.count_within(0.5) == 0 {
                1.0
            } else {
                0.0
            }
        },
    );
    let u = Window::cube(0.0, 1.25, 2);
    let params = CheckParams::default().with_trials(2000).with_seed(1);
    let reports = check_clmm(&f, &u, 10.0 / 512.0, &ProcessSpec::poisson(1.0), &torus, &params)?;
    for r in &reports {
        println!("{:>14} {:.4} +- {:.4}", r.statistic, r.estimate, r.stderr);
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
