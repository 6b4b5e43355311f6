//! Runs every bundled scenario through the same path as `freebound run`,
//! then compares a run against a refined copy of itself.
//!
//!     cargo run --release --example scenario_runner [out-dir]

use std::path::{Path, PathBuf};

use freebound::scenario::{compare_json, run_scenario, RunOptions, Scenario};

fn main() -> freebound::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("freebound-runs"), PathBuf::from);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in &paths {
        let s = Scenario::load(path)?;
        let opts = RunOptions {
            out: Some(out.join(&s.name)),
            seed: None,
            normalize: true,
        };
        let r = run_scenario(&s, &opts)?;
        println!("{:<16} {:?} (exit {})", s.name, r.status, r.status.exit_code());
        for f in &r.flags {
            println!("    {f}");
        }
    }

    let mut coarse = Scenario::load(&dir.join("halfspace_pucci.json"))?;
    coarse.grid.h = 1.0 / 32.0;
    let mut fine = coarse.clone();
    fine.grid.h = 1.0 / 64.0;
    let run = |s: &Scenario, tag: &str| {
        let opts = RunOptions {
            out: Some(out.join(tag)),
            seed: None,
            normalize: true,
        };
        run_scenario(s, &opts)?.to_json()
    };
    let delta = compare_json(&run(&coarse, "coarse")?, &run(&fine, "fine")?, Some(1e-6))?;
    println!("\nrefinement deltas for {}:", delta.scenario);
    for row in &delta.rows {
        println!("  {:<28} {:?} -> {:?}", row.metric, row.a, row.b);
    }
    Ok(())
}
