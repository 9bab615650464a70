//! Generates a small task dataset and summarizes its reduction statistics.
//!
//! cargo run --release --example generate_dataset -- [out_dir] [n_train] [mesh_density]

use std::time::Instant;

use cadloop::taskgen::{export_dataset, DatasetSizes, GeneratorConfig};

fn main() -> cadloop::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "target/example-dataset".into());
    let train: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let density: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let sizes = DatasetSizes {
        train,
        test: train / 5,
        general: train / 10,
    };
    let config = GeneratorConfig {
        mesh_density: density,
        ..GeneratorConfig::default()
    };
    let start = Instant::now();
    let manifest = export_dataset(&out, sizes, config, 42)?;
    let n = manifest.tasks.len();
    let extreme = manifest.tasks.iter().filter(|t| t.generated.reduction.extreme).count();
    let attempts: usize = manifest.tasks.iter().map(|t| t.generated.design_attempts).sum();
    let redraws: usize = manifest.tasks.iter().map(|t| t.generated.reduction_redraws).sum();
    println!("{n} tasks written to {out} in {:.1?}", start.elapsed());
    println!("extreme reductions: {extreme} ({:.1}%)", 100.0 * extreme as f64 / n as f64);
    println!("initial designs drawn: {attempts} ({:.2} per task), plan redraws: {redraws}", attempts as f64 / n as f64);
    for k in 1..=3 {
        let c = manifest.tasks.iter().filter(|t| t.generated.reduction.items.len() == k).count();
        println!("reduce {k} item(s): {c}");
    }
    Ok(())
}
