// Runs an experiment from a JSON configuration, as the command line does.

use palmlab::harness::{run, ExperimentConfig};

const CONFIG: &str = r#"{
  "group": {"kind": "flat_torus", "dim": 2, "side": 10.0},
  "process": {"kind": "poisson", "intensity": 1.0},
  "experiment": {"name": "verify-mtp", "radius": 2.0},
  "trials": 100,
  "seed": 42
}"#;

pub fn run_example() -> palmlab::Result<bool> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let outcome = run(&cfg)?;
    print!("{}", outcome.csv);
    println!("config hash {}", outcome.manifest.config_hash);
    Ok(outcome.manifest.pass)
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
