//! Runs the closed-form solver checks and a mesh refinement study of the
//! cantilever tip deflection.
//!
//! cargo run --release --example verify_fem -- [max_density]

use cadloop::verify::{axial_bar, cantilever};

fn main() -> cadloop::Result<()> {
    let max: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    for c in axial_bar(2)? {
        println!("{:<40} rel.err {:.2e}", c.name, c.relative_error);
    }
    let mut previous = None;
    for d in 1..=max {
        let c = cantilever(d)?;
        let rate = previous.map(|p: f64| (p / c.relative_error).log2());
        println!(
            "{:<40} rel.err {:.4}  {:>8.3} s  {}",
            c.name,
            c.relative_error,
            c.seconds,
            rate.map(|r| format!("ratio log2 {r:.2}")).unwrap_or_default()
        );
        previous = Some(c.relative_error);
    }
    Ok(())
}
