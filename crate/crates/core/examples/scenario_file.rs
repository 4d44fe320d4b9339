//! Loading a scenario file, running its checks and writing the CSV, as the
//! `funnel run` command does.

use std::path::PathBuf;

use funnel_control::report::{verdict_report, write_csv};
use funnel_control::scenario::{run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/robot_arm.toml"));
    let scn = Scenario::load(&path)?;
    let outcome = run_scenario(&scn, 0.5)?;
    print!("{}", verdict_report(&outcome.id, &outcome.verdicts));
    if let Some(traj) = &outcome.trajectory {
        let file = std::env::temp_dir().join(format!("{}.csv", outcome.id));
        write_csv(traj, std::fs::File::create(&file)?)?;
        println!("{} samples written to {}", traj.len(), file.display());
    }
    Ok(())
}
