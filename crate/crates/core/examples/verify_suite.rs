//! Runs the scenario suite in parallel and exports the fields of the first
//! nontrivial solution as CSV and legacy VTK.

use kgmvar::field_io::{write_csv, write_vtk};
use kgmvar::harness::{run_all, scenario_set, HarnessConfig};

fn main() -> kgmvar::Result<()> {
    let grid = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(21);
    let scenarios = scenario_set("all", grid)?;
    let verdicts = run_all(&scenarios, &HarnessConfig::default());
    let out = std::env::temp_dir().join("kgmvar-suite");
    std::fs::create_dir_all(&out)?;
    for (s, v) in scenarios.iter().zip(verdicts) {
        match v {
            Ok(v) => {
                println!("{:<24} {}", s.name, if v.pass { "pass" } else { "FAIL" });
                if !v.fields.is_empty() {
                    let fields: Vec<(&str, _)> = v.fields.iter().map(|(n, f)| (n.as_str(), f)).collect();
                    write_csv(&out.join(format!("{}.csv", s.name)), &fields)?;
                    write_vtk(&out.join(format!("{}.vtk", s.name)), &fields, &s.name)?;
                }
            }
            Err(e) => println!("{:<24} error: {e}", s.name),
        }
    }
    println!("fields written to {}", out.display());
    Ok(())
}
