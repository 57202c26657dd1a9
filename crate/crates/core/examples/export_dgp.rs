//! Writes the built-in processes as TOML, ready to edit and pass to
//! `rdcov simulate --dgp <file>`.
//!
//!     cargo run --example export_dgp -- data

use std::path::PathBuf;

use rdcov::DgpSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    for spec in [DgpSpec::dgp1(), DgpSpec::dgp2()] {
        let path = dir.join(format!("{}.toml", spec.name));
        std::fs::write(&path, spec.to_toml_string()?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
