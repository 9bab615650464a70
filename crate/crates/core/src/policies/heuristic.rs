//! Rule-based designer driven by the parameter tags of each template.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Observation, Policy, PolicyContext};
use crate::design::DesignProposal;
use crate::geometry::ParamTag;
use crate::metrics::MetricTriple;
use crate::toolserver::ErrorCode;

/// Largest and smallest multiplicative change of stiffness parameters per step.
pub const MAX_GROWTH: f64 = 1.5;
pub const MIN_GROWTH: f64 = 1.02;
/// Smallest bulk reduction per step when over budget.
pub const MIN_SHRINK: f64 = 0.98;
/// Required headroom on σ_max when moving to a cheaper material.
pub const STRESS_HEADROOM: f64 = 1.1;
/// Relative size of a random nudge after repeated failures.
pub const PERTURBATION: f64 = 0.01;

/// Multiplicative changes for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub stiffness: f64,
    pub bulk: f64,
    pub material: String,
}

pub struct Heuristic {
    rng: ChaCha8Rng,
    failures: usize,
    last_good: Option<DesignProposal>,
}

impl Heuristic {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            failures: 0,
            last_good: None,
        }
    }

    fn perturb(&mut self, ctx: &PolicyContext, design: &DesignProposal) -> DesignProposal {
        let mut out = design.clone();
        for v in out.params.values_mut() {
            *v *= 1.0 + self.rng.gen_range(-PERTURBATION..=PERTURBATION);
        }
        ctx.clamp_design(out)
    }
}

/// The rule set applied to one observed triple; `None` once every
/// constraint holds.
pub fn plan_step(ctx: &PolicyContext, design: &DesignProposal, t: &MetricTriple) -> Option<Step> {
    let lib = ctx.library;
    let current = lib.lookup(&design.material).ok().or_else(|| lib.strongest())?;
    let th = ctx.task.thresholds(current);
    let over_u = t.u_max > th.delta;
    let over_s = t.sigma_max > th.stress_bound;
    let over_c = t.cost > th.kappa;
    if !(over_u || over_s || over_c) && current.name == design.material {
        return None;
    }
    let mut step = Step {
        stiffness: 1.0,
        bulk: 1.0,
        material: current.name.clone(),
    };
    if over_u {
        step.stiffness = (t.u_max / th.delta).cbrt().clamp(MIN_GROWTH, MAX_GROWTH);
    }
    if over_s {
        let strongest = lib.strongest()?;
        if strongest.name != current.name {
            step.material = strongest.name.clone();
        } else {
            // bending stress falls with the square of section depth
            let grow = (t.sigma_max / th.stress_bound).sqrt().clamp(MIN_GROWTH, MAX_GROWTH);
            step.stiffness = step.stiffness.max(grow);
        }
    } else if over_c {
        let price = |m: &crate::materials::MaterialProps| m.density * m.unit_price;
        let cheaper = lib
            .iter()
            .filter(|m| price(m) < price(current))
            .filter(|m| ctx.task.stress_bound(m) >= t.sigma_max * STRESS_HEADROOM)
            .filter(|m| over_u || t.u_max * current.young_modulus / m.young_modulus <= th.delta)
            .min_by(|a, b| price(a).total_cmp(&price(b)));
        match cheaper {
            Some(m) => step.material = m.name.clone(),
            None => step.bulk = (th.kappa / t.cost).cbrt().min(MIN_SHRINK),
        }
    }
    Some(step)
}

pub fn apply_step(ctx: &PolicyContext, design: &DesignProposal, step: &Step) -> DesignProposal {
    let mut params = design.params.clone();
    for spec in &ctx.category.params {
        if let Some(v) = params.get_mut(&spec.name) {
            *v *= match spec.tag {
                ParamTag::Stiffness => step.stiffness,
                ParamTag::Bulk => step.bulk,
                ParamTag::Free => 1.0,
            };
        }
    }
    ctx.clamp_design(DesignProposal {
        params,
        material: step.material.clone(),
    })
}

impl Policy for Heuristic {
    fn name(&self) -> &'static str {
        "heuristic"
    }

    fn first(&mut self, ctx: &PolicyContext) -> DesignProposal {
        ctx.task.initial_design()
    }

    fn next(&mut self, ctx: &PolicyContext, last: &DesignProposal, obs: &Observation) -> Option<DesignProposal> {
        match obs {
            Observation::Metrics(t) => {
                self.failures = 0;
                self.last_good = Some(last.clone());
                let step = plan_step(ctx, last, t)?;
                let next = apply_step(ctx, last, &step);
                // pinned at a bound: nudge instead of repeating the same design
                Some(if next == *last { self.perturb(ctx, last) } else { next })
            }
            Observation::Failure(Some(ErrorCode::BudgetExhausted | ErrorCode::RoundLimit)) => None,
            Observation::Failure(_) => {
                self.failures += 1;
                match (self.failures, &self.last_good) {
                    (1, _) => Some(last.clone()),
                    (2, _) | (_, None) => Some(self.perturb(ctx, last)),
                    (_, Some(good)) => {
                        // the change keeps failing: retreat halfway to the last design that ran
                        let mut back = last.clone();
                        for (name, v) in back.params.iter_mut() {
                            if let Some(g) = good.params.get(name) {
                                *v = (*v * g).sqrt();
                            }
                        }
                        Some(ctx.clamp_design(back))
                    }
                }
            }
        }
    }
}
