//! Write the built-in scenario pack as JSON: the whole pack plus one file per
//! scenario, ready for `combidose simulate --scenario`.
//!
//! `cargo run --example scenario_pack -- [out_dir]`

use std::fs;
use std::path::PathBuf;

use combidose::harness::builtin_pack;
use combidose::report::write_json;

fn main() -> combidose::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    fs::create_dir_all(&dir)?;
    let pack = builtin_pack()?;
    write_json(&pack, &dir.join("pack.json"))?;
    for s in &pack.scenarios {
        write_json(s, &dir.join(format!("{}.json", s.name)))?;
    }
    println!("wrote {} scenarios to {}", pack.scenarios.len(), dir.display());
    Ok(())
}
