//! Baseline policies: submit-initial, random search and Nelder–Mead on the
//! constraint penalty.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Observation, Policy, PolicyContext};
use crate::design::DesignProposal;

/// Runs the initial design once and submits it.
#[derive(Debug, Default)]
pub struct SubmitInitial;

impl Policy for SubmitInitial {
    fn name(&self) -> &'static str {
        "submit_initial"
    }

    fn first(&mut self, ctx: &PolicyContext) -> DesignProposal {
        ctx.task.initial_design()
    }

    fn next(&mut self, _: &PolicyContext, _: &DesignProposal, _: &Observation) -> Option<DesignProposal> {
        None
    }
}

/// Initial design first, then uniform samples of parameters and material.
pub struct RandomSearch {
    rng: ChaCha8Rng,
}

impl RandomSearch {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomSearch {
    fn name(&self) -> &'static str {
        "random_search"
    }

    fn first(&mut self, ctx: &PolicyContext) -> DesignProposal {
        ctx.task.initial_design()
    }

    fn next(&mut self, ctx: &PolicyContext, _: &DesignProposal, obs: &Observation) -> Option<DesignProposal> {
        if obs.is_budget_stop() {
            return None;
        }
        let params = ctx
            .category
            .params
            .iter()
            .map(|s| (s.name.clone(), self.rng.gen_range(s.lower..=s.upper)))
            .collect();
        let names = ctx.library.list_materials();
        let material = names.choose(&mut self.rng).copied().unwrap_or_default().to_string();
        Some(ctx.clamp_design(DesignProposal { params, material }))
    }
}

#[derive(Debug, Clone)]
enum Phase {
    Init,
    Reflect { xr: Vec<f64> },
    Expand { xr: Vec<f64>, fr: f64, xe: Vec<f64> },
    ContractOutside { fr: f64, xc: Vec<f64> },
    ContractInside { xc: Vec<f64> },
    Shrink { index: usize },
}

/// Nelder–Mead minimizer in ask/tell form over the unit box: `ask` yields
/// the next point to evaluate, `tell` reports its value. Vertices may leave
/// the box; they are evaluated at their projection and charged for the
/// distance, which keeps the simplex from flattening against a face.
#[derive(Debug, Clone)]
pub struct NelderMead {
    simplex: Vec<(Vec<f64>, f64)>,
    /// Vertices awaiting their first evaluation.
    queue: Vec<Vec<f64>>,
    phase: Phase,
    pending: Option<Vec<f64>>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn clamp_unit(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// c + t (x − c)
fn along(c: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    c.iter().zip(x).map(|(c, x)| c + t * (x - c)).collect()
}

fn outside_distance(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - v.clamp(0.0, 1.0)).powi(2)).sum::<f64>().sqrt()
}

impl NelderMead {
    /// Simplex of `start` plus one vertex offset by `step` along each axis
    /// (inward where the outward vertex would leave the box).
    pub fn new(start: Vec<f64>, step: f64) -> Self {
        let start = clamp_unit(start);
        let mut queue = vec![start.clone()];
        for i in 0..start.len() {
            let mut v = start.clone();
            v[i] = if v[i] + step <= 1.0 { v[i] + step } else { v[i] - step };
            queue.push(v);
        }
        queue.reverse();
        Self {
            simplex: Vec::new(),
            queue,
            phase: Phase::Init,
            pending: None,
        }
    }

    fn best_vertex(&self) -> Option<&(Vec<f64>, f64)> {
        self.simplex.iter().min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Best point seen, projected into the box, and its penalized value.
    pub fn best(&self) -> Option<(Vec<f64>, f64)> {
        self.best_vertex().map(|(x, f)| (clamp_unit(x.clone()), *f))
    }

    /// Largest vertex distance from the best vertex.
    pub fn diameter(&self) -> f64 {
        let Some((b, _)) = self.best_vertex() else {
            return f64::INFINITY;
        };
        self.simplex
            .iter()
            .map(|(x, _)| x.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn sort(&mut self) {
        self.simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    }

    fn centroid(&self) -> Vec<f64> {
        let n = self.simplex.len() - 1;
        let mut c = vec![0.0; self.simplex[0].0.len()];
        for (x, _) in &self.simplex[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        c
    }

    fn start_iteration(&mut self) {
        self.sort();
        let c = self.centroid();
        let worst = &self.simplex.last().expect("simplex is full").0;
        self.phase = Phase::Reflect {
            xr: along(&c, worst, -REFLECT),
        };
    }

    fn replace_worst(&mut self, x: Vec<f64>, f: f64) {
        *self.simplex.last_mut().expect("simplex is full") = (x, f);
        self.start_iteration();
    }

    fn start_shrink(&mut self) {
        self.sort();
        let best = self.simplex[0].0.clone();
        for (x, _) in self.simplex.iter_mut().skip(1) {
            *x = along(&best, x, SHRINK);
        }
        self.phase = Phase::Shrink { index: 1 };
    }

    pub fn ask(&mut self) -> Vec<f64> {
        let x = if let Some(x) = self.queue.last() {
            x.clone()
        } else {
            match &self.phase {
                Phase::Init => unreachable!("initial vertices are queued"),
                Phase::Reflect { xr } => xr.clone(),
                Phase::Expand { xe, .. } => xe.clone(),
                Phase::ContractOutside { xc, .. } | Phase::ContractInside { xc } => xc.clone(),
                Phase::Shrink { index } => self.simplex[*index].0.clone(),
            }
        };
        self.pending = Some(x.clone());
        clamp_unit(x)
    }

    pub fn tell(&mut self, f: f64) {
        let Some(x) = self.pending.take() else {
            return;
        };
        let f = f + f.abs().max(1.0) * outside_distance(&x);
        if !self.queue.is_empty() {
            self.queue.pop();
            self.simplex.push((x, f));
            if self.queue.is_empty() {
                self.start_iteration();
            }
            return;
        }
        let n = self.simplex.len();
        let f_best = self.simplex[0].1;
        let f_second = self.simplex[n - 2].1;
        let f_worst = self.simplex[n - 1].1;
        match std::mem::replace(&mut self.phase, Phase::Init) {
            Phase::Init => {}
            Phase::Reflect { xr } => {
                let c = self.centroid();
                if f < f_best {
                    let xe = along(&c, &xr, EXPAND);
                    self.phase = Phase::Expand { xr, fr: f, xe };
                } else if f < f_second {
                    self.replace_worst(xr, f);
                } else if f < f_worst {
                    let xc = along(&c, &xr, CONTRACT);
                    self.phase = Phase::ContractOutside { fr: f, xc };
                } else {
                    let xc = along(&c, &self.simplex[n - 1].0, CONTRACT);
                    self.phase = Phase::ContractInside { xc };
                }
            }
            Phase::Expand { xr, fr, xe } => {
                if f < fr {
                    self.replace_worst(xe, f);
                } else {
                    self.replace_worst(xr, fr);
                }
            }
            Phase::ContractOutside { fr, xc } => {
                if f <= fr {
                    self.replace_worst(xc, f);
                } else {
                    self.start_shrink();
                }
            }
            Phase::ContractInside { xc } => {
                if f < f_worst {
                    self.replace_worst(xc, f);
                } else {
                    self.start_shrink();
                }
            }
            Phase::Shrink { index } => {
                self.simplex[index].1 = f;
                if index + 1 < n {
                    self.phase = Phase::Shrink { index: index + 1 };
                } else {
                    self.start_iteration();
                }
            }
        }
    }
}

/// Penalty value reported for a design the toolchain could not evaluate.
pub const FAILURE_PENALTY: f64 = 1e3;

/// Nelder–Mead over normalized parameters with the material held at the
/// task's initial choice.
pub struct NelderMeadPolicy {
    step: f64,
    optimizer: Option<NelderMead>,
}

impl NelderMeadPolicy {
    pub fn new(step: f64) -> Self {
        Self { step, optimizer: None }
    }

    fn to_design(ctx: &PolicyContext, x: &[f64]) -> DesignProposal {
        let params = ctx
            .category
            .params
            .iter()
            .zip(x)
            .map(|(s, u)| (s.name.clone(), s.lower + u * (s.upper - s.lower)))
            .collect();
        ctx.clamp_design(DesignProposal {
            params,
            material: ctx.task.initial_material.clone(),
        })
    }
}

impl Default for NelderMeadPolicy {
    fn default() -> Self {
        Self::new(0.1)
    }
}

impl Policy for NelderMeadPolicy {
    fn name(&self) -> &'static str {
        "nelder_mead"
    }

    fn first(&mut self, ctx: &PolicyContext) -> DesignProposal {
        let start = ctx
            .category
            .params
            .iter()
            .map(|s| (ctx.task.initial_params.get(&s.name).copied().unwrap_or(s.lower) - s.lower) / (s.upper - s.lower))
            .collect();
        let mut nm = NelderMead::new(start, self.step);
        let x = nm.ask();
        self.optimizer = Some(nm);
        Self::to_design(ctx, &x)
    }

    fn next(&mut self, ctx: &PolicyContext, last: &DesignProposal, obs: &Observation) -> Option<DesignProposal> {
        if obs.is_budget_stop() {
            return None;
        }
        let f = match obs {
            Observation::Metrics(t) => ctx.penalty(last, t),
            Observation::Failure(_) => FAILURE_PENALTY,
        };
        let nm = self.optimizer.as_mut()?;
        nm.tell(f);
        let x = nm.ask();
        Some(Self::to_design(ctx, &x))
    }
}
