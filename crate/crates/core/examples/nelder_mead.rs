//! The ask/tell Nelder–Mead optimizer on the Rosenbrock function over
//! [-2, 2]², mapped onto the unit box, showing the simplex contract toward
//! the minimum at (1, 1).
//!
//! cargo run --release --example nelder_mead -- [evaluations]

use cadloop::policies::NelderMead;

fn to_plane(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| 4.0 * v - 2.0).collect()
}

fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

fn main() {
    let budget: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let mut nm = NelderMead::new(vec![0.2, 0.75], 0.1);
    for i in 1..=budget {
        let x = nm.ask();
        nm.tell(rosenbrock(&to_plane(&x)));
        if i.is_power_of_two() {
            let (u, f) = nm.best().expect("simplex has vertices");
            let best = to_plane(&u);
            println!("{i:>5} evals  f={f:.3e}  x=({:.6}, {:.6})  diameter={:.2e}", best[0], best[1], nm.diameter());
        }
    }
}
