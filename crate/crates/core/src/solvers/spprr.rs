use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{clamp_unit, project_cone_in_place, project_joint_in_place};
use crate::model::{component_at, component_operator, Dataset, Iterate, ProblemParams};
use crate::rng::{Stream, StreamRng};

use super::{Algo, EvalHooks, LazyAverage, Recorder, SolverTrace};

/// Stochastic proximal point with random reshuffling.
#[derive(Clone, Debug, PartialEq)]
pub struct SpprrConfig {
    pub eta: f64,
    pub epochs: u32,
    /// Fixed-point iterations per proximal step.
    pub fixed_point_m: u32,
    pub seed: u64,
    pub checkpoint_every_passes: f64,
}

impl Default for SpprrConfig {
    fn default() -> Self {
        SpprrConfig {
            eta: 0.1,
            epochs: 10,
            fixed_point_m: 2,
            seed: 0,
            checkpoint_every_passes: 0.5,
        }
    }
}

impl SpprrConfig {
    /// Largest step for which the fixed-point map is a ½-contraction.
    pub fn max_eta(p: &ProblemParams) -> f64 {
        1.0 / (2.0 * p.operator_lipschitz())
    }

    /// The step actually used: `eta` clamped to [`SpprrConfig::max_eta`].
    pub fn effective_eta(&self, p: &ProblemParams) -> f64 {
        self.eta.min(Self::max_eta(p))
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.fixed_point_m == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "fixed_point_m and the number of epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The fixed-point map `T(u) = P(anchor − η Fᵢ(u))` of one proximal step.
pub fn prox_map(anchor: &Iterate, i: usize, u: &Iterate, eta: f64, ds: &Dataset, p: &ProblemParams) -> Result<Iterate> {
    let c = component_operator(u, i, ds, p)?;
    let mut out = anchor.step(eta, &c.to_dense(ds));
    project_joint_in_place(&mut out, p.cone());
    Ok(out)
}

/// `m` applications of [`prox_map`] from `anchor`. Also returns the
/// residuals `‖u_k − T(u_k)‖` for `k = 0..=m`.
pub fn prox_fixed_point(
    anchor: &Iterate,
    i: usize,
    eta: f64,
    m: u32,
    ds: &Dataset,
    p: &ProblemParams,
) -> Result<(Iterate, Vec<f64>)> {
    let mut u = anchor.clone();
    let mut residuals = Vec::with_capacity(m as usize + 1);
    let mut next = prox_map(anchor, i, &u, eta, ds, p)?;
    residuals.push(u.distance(&next));
    for _ in 0..m {
        u = next;
        next = prox_map(anchor, i, &u, eta, ds, p)?;
        residuals.push(u.distance(&next));
    }
    Ok((u, residuals))
}

/// Runs SPPRR. Checkpoints report the running average of all iterates as
/// the primary point and the last iterate as the secondary one.
///
/// Only `λ`, `β` and `γᵢ` change during the proximal step on sample `i`, so
/// the step works on those coordinates alone. Cost: `M` component
/// evaluations per step, `n · M` per epoch.
pub fn spprr_run(ds: &Dataset, p: &ProblemParams, cfg: &SpprrConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    let mut rec = Recorder::new(Algo::Spprr, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate()?;
    let eta = cfg.effective_eta(p);
    if eta < cfg.eta {
        warn!("spprr: eta {} exceeds the contraction limit; using {eta}", cfg.eta);
    }
    let cone = p.cone();
    let (n, d) = (ds.n(), ds.d());
    let m = cfg.fixed_point_m;
    let mut rng = StreamRng::new(cfg.seed, Stream::Spprr);

    let mut u = hooks.start(ds, p)?;
    let mut avg = LazyAverage::new(d, n);
    let mut cur = u.beta.clone();
    let mut trial = u.beta.clone();
    let mut epoch = 0usize;
    rec.record(0, &u, None)?;

    'outer: for s in 0..cfg.epochs as usize {
        epoch = s;
        let perm = rng.permutation(n);
        for &i in &perm {
            if rec.exhausted() {
                break 'outer;
            }
            let (lam_t, g_t) = (u.lambda, u.gamma[i]);
            let (mut lam, mut g) = (lam_t, g_t);
            cur.copy_from_slice(&u.beta);
            for _ in 0..m {
                let c = component_at(lam, &cur, g, i, ds, p);
                trial.copy_from_slice(&u.beta);
                ds.axpy_row(i, -eta * c.beta_coef, &mut trial);
                let mut lam_next = lam_t - eta * c.d_lambda;
                project_cone_in_place(&mut lam_next, &mut trial, cone);
                g = clamp_unit(g_t - eta * c.d_gamma);
                lam = lam_next;
                std::mem::swap(&mut cur, &mut trial);
            }
            rec.add(m as u64);
            u.lambda = lam;
            u.beta.copy_from_slice(&cur);
            avg.touch(i, u.gamma[i]);
            u.gamma[i] = g;
            avg.push_primal(u.lambda, &u.beta);
            if rec.due() {
                let a = avg.mean(&u.gamma).expect("at least one step was averaged");
                rec.record(s, &a, Some(&u))?;
            }
        }
    }
    let averaged = avg.mean(&u.gamma).unwrap_or_else(|| u.clone());
    rec.finish(epoch, &averaged, Some(&u), cfg.seed, u.clone(), averaged.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkFunction;

    #[test]
    fn step_is_clamped_to_contraction_limit() {
        let p = ProblemParams::new(0.1, 1.0, LinkFunction::CanonicalLogistic).unwrap();
        let cfg = SpprrConfig {
            eta: 5.0,
            ..Default::default()
        };
        assert_eq!(cfg.effective_eta(&p), 1.0 / 4.5);
        let cfg = SpprrConfig {
            eta: 0.01,
            ..Default::default()
        };
        assert_eq!(cfg.effective_eta(&p), 0.01);
    }

    #[test]
    fn local_update_matches_full_fixed_point() {
        let ds = Dataset::from_dense(
            &[vec![0.3, -0.2, 0.5], vec![-0.4, 0.1, 0.2], vec![0.2, 0.6, -0.1]],
            &[1.0, -1.0, 1.0],
        )
        .unwrap();
        let p = ProblemParams::default();
        let hooks = EvalHooks {
            initial: Some(Iterate {
                lambda: 0.3,
                beta: vec![0.05, -0.02, 0.1],
                gamma: vec![0.2, -0.5, 0.9],
            }),
            ..Default::default()
        };
        let cfg = SpprrConfig {
            eta: 0.2,
            epochs: 1,
            fixed_point_m: 3,
            seed: 4,
            checkpoint_every_passes: 10.0,
        };
        let trace = spprr_run(&ds, &p, &cfg, &hooks).unwrap();
        let perm = StreamRng::new(4, Stream::Spprr).permutation(3);
        let mut u = hooks.initial.clone().unwrap();
        for &i in &perm {
            u = prox_fixed_point(&u, i, 0.2, 3, &ds, &p).unwrap().0;
        }
        assert!(trace.final_iterate.distance(&u) < 1e-14);
    }
}
