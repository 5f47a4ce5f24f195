//! Writes the canonical fixture files used by the integration tests.
//!
//! Usage: `cargo run -p mixflow --example write_fixtures -- <dir>`

use std::path::PathBuf;

use mixflow::fixtures::{nguyen_dupuis, sioux_falls, NGUYEN_DEMAND, SIOUX_FALLS_DEMAND};
use mixflow::network::write_network;
use mixflow::ClassParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/tests/data".into())
        .into();
    std::fs::create_dir_all(&dir)?;
    let params = ClassParams::default();
    let nguyen = nguyen_dupuis(0, NGUYEN_DEMAND, &params)?;
    write_network(&nguyen, dir.join("nguyen_net.tntp"), dir.join("nguyen_trips.tntp"))?;
    let sf = sioux_falls(0, SIOUX_FALLS_DEMAND, &params)?;
    write_network(
        &sf,
        dir.join("sioux_falls_net.tntp"),
        dir.join("sioux_falls_trips.tntp"),
    )?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
