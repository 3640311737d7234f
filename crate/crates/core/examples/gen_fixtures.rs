//! Regenerates the bundled fixtures in `data/`: the EPA fading traces and
//! the versioned MCS table.
//!
//! cargo run -p coexsim --example gen_fixtures

use std::fs::File;
use std::path::Path;

use coexsim::fading::{generate_epa_trace, FadingLabel, GeneratorParams};
use coexsim::mac::McsTable;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for label in [FadingLabel::LowSpeed, FadingLabel::HighSpeed] {
        let params = GeneratorParams::bundled(label);
        let trace = generate_epa_trace(&params)?;
        let path = data.join(format!("fading_{}.csv", label.as_str()));
        trace.write_csv(File::create(&path)?)?;
        println!("{}: {} samples", path.display(), trace.samples.len());
    }
    let path = data.join("mcs_table_v1.csv");
    McsTable::from_formula().write_csv(File::create(&path)?)?;
    println!("{}", path.display());
    Ok(())
}
