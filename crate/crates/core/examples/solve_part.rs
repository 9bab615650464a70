//! Generates every registered part at its mid-range parameters, solves it
//! under a 1 MPa load and prints the metric triple.
//!
//! cargo run --release --example solve_part -- [mesh_density]

use std::time::Instant;

use cadloop::fem::{default_epsilon, solve_static, SimSettings};
use cadloop::geometry::{default_registry, generate_solid, ParamVector};
use cadloop::materials::default_library;
use cadloop::metrics::{cost, displacement_max, stress_max};

fn main() -> cadloop::Result<()> {
    let density: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let material = default_library().lookup("Carbon Steel - ASTM A105")?;
    let settings = SimSettings::pressure(1.0);
    println!(
        "{:<24} {:>6} {:>8} {:>12} {:>12} {:>10} {:>9}",
        "category", "elems", "iters", "u_max [um]", "sigma [MPa]", "cost", "time"
    );
    for category in default_registry().categories() {
        let mid = category.params.iter().map(|p| 0.5 * (p.lower + p.upper)).collect();
        let start = Instant::now();
        let solid = generate_solid(category, &ParamVector::new(mid), density)?;
        let field = solve_static(&solid, material, &settings, default_epsilon(&solid))?;
        let elapsed = start.elapsed();
        println!(
            "{:<24} {:>6} {:>8} {:>12.4} {:>12.4} {:>10.4} {:>8.1?}",
            category.id,
            solid.mesh.elements.len(),
            field.iterations,
            1000.0 * displacement_max(&field)?,
            stress_max(&field)?,
            cost(solid.volume_mm3, material),
            elapsed
        );
    }
    Ok(())
}
