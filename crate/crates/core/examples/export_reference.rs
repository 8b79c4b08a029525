//! Write the built-in reference models as `.brep.json` documents.
//!
//! ```text
//! cargo run -p brepgraph-core --example export_reference -- out_dir
//! ```

use std::path::PathBuf;

use brepgraph::model::to_json;
use brepgraph::synth;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    let models = [
        ("cube", synth::unit_cube()),
        ("cylinder", synth::closed_cylinder(1.0, 2.0)),
        ("annular_plate", synth::annular_plate()),
        ("sphere", synth::unit_sphere()),
        ("torus", synth::torus(2.0, 0.5)),
        ("bezier_sheet", synth::bezier_sheet()),
        ("two_cubes", synth::two_cubes()),
    ];
    for (name, m) in models {
        let path = dir.join(format!("{name}.brep.json"));
        std::fs::write(&path, to_json(&m))?;
        println!("{}", path.display());
    }
    Ok(())
}
