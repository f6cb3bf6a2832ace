// Palm samples of a Poisson process compared with the process with the root
// adjoined, plus the void probability of the Palm version.

use palmlab::palm::{check_mecke_slivnyak, palm_probability, palm_samples, CheckParams, Core};
use palmlab::process::ProcessSpec;
use palmlab::Carrier;

pub fn run_example() -> palmlab::Result<bool> {
    let torus = Carrier::torus(2, 10.0)?;
    let spec = ProcessSpec::poisson(1.0);
    let params = CheckParams::default().with_trials(1000).with_seed(1);
    let reports = check_mecke_slivnyak(&spec, &torus, &params)?;
    for r in &reports {
        println!("{} p = {:.3} pass = {}", r.statistic, r.estimate, r.pass);
    }
    let ps = palm_samples(&spec, &torus, 200, 0.5, Core::Full, 1)?;
    let void = palm_probability(&ps, |v| v.count_within(0.5) == 0);
    println!(
        "P0(no point within 0.5) = {:.4} +- {:.4}, exp(-pi/4) = {:.4}",
        void.estimate,
        void.stderr,
        (-std::f64::consts::PI / 4.0).exp()
    );
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
