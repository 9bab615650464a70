//! Jacobi-preconditioned conjugate gradients on the constrained system.
//!
//! Constraints are imposed by elimination: fixed dofs are held at zero by
//! masking, which is algebraically the reduced system K_ff u_f = f_f.

use super::assembly::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// Overrides the default cap of 20·√(free dofs) + 1000.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iterations: None,
        }
    }
}

pub fn iteration_cap(free_dofs: usize) -> usize {
    (20.0 * (free_dofs as f64).sqrt()).ceil() as usize + 1000
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub cap: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn pcg(k: &CsrMatrix, b: &[f64], fixed: &[bool], opts: &SolverOptions) -> CgOutcome {
    let n = k.n;
    let free = fixed.iter().filter(|f| !**f).count();
    let cap = opts.max_iterations.unwrap_or_else(|| iteration_cap(free));
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = b
        .iter()
        .zip(fixed)
        .map(|(&bi, &f)| if f { 0.0 } else { bi })
        .collect();
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            cap,
        };
    }
    let inv_diag: Vec<f64> = k
        .diagonal()
        .iter()
        .zip(fixed)
        .map(|(&d, &f)| if f || d <= 0.0 { 0.0 } else { 1.0 / d })
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=cap {
        k.mul_vec(&p, &mut q);
        for (qi, &f) in q.iter_mut().zip(fixed) {
            if f {
                *qi = 0.0;
            }
        }
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
                converged: false,
                cap,
            };
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= opts.rel_tol {
            return CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
                converged: true,
                cap,
            };
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        x,
        iterations: cap,
        relative_residual: rel,
        converged: false,
        cap,
    }
}
