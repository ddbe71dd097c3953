//! Baselines: deterministic and stochastic descent-ascent, their
//! extragradient variants, and projected (stochastic) subgradient descent on
//! the convex primal.

use crate::error::{Error, Result};
use crate::geometry::{clamp_unit, project_cone_in_place, project_joint_in_place};
use crate::model::{
    component_at, convex_subgradient, full_operator_into, sample_subgradient_at, ComponentValue, Dataset, Iterate,
    OperatorValue, ProblemParams,
};
use crate::rng::{Stream, StreamRng};

use super::{primal_point, Algo, EvalHooks, Recorder, SolverTrace};

/// Shared configuration of the baselines. Deterministic methods ignore
/// `batch` and `seed` and use `eta0` as a constant step; the stochastic and
/// subgradient methods use `eta0 / √t`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub eta0: f64,
    pub iters: u64,
    pub batch: usize,
    pub seed: u64,
    pub checkpoint_every_passes: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            eta0: 0.1,
            iters: 1000,
            batch: 32,
            seed: 0,
            checkpoint_every_passes: 0.5,
        }
    }
}

impl BaselineConfig {
    fn validate(&self, n: usize, stochastic: bool) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if stochastic && (self.batch == 0 || self.batch > n) {
            return Err(Error::Config(format!("batch size {} not in 1..={n}", self.batch)));
        }
        Ok(())
    }
}

fn step_dense(u: &mut Iterate, step: f64, g: &OperatorValue) {
    u.lambda -= step * g.d_lambda;
    u.beta.iter_mut().zip(&g.d_beta).for_each(|(b, d)| *b -= step * d);
    u.gamma.iter_mut().zip(&g.d_gamma).for_each(|(b, d)| *b -= step * d);
}

/// Projected gradient descent-ascent `u ← P(u − η F(u))`. Cost `n` per iteration.
pub fn gda_run(ds: &Dataset, p: &ProblemParams, cfg: &BaselineConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    let mut rec = Recorder::new(Algo::Gda, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate(ds.n(), false)?;
    let cone = p.cone();
    let mut u = hooks.start(ds, p)?;
    let mut g = OperatorValue::zeros(ds.d(), ds.n());
    rec.record(0, &u, None)?;
    for _ in 0..cfg.iters {
        if rec.exhausted() {
            break;
        }
        full_operator_into(&u, ds, p, &mut g);
        step_dense(&mut u, cfg.eta0, &g);
        project_joint_in_place(&mut u, cone);
        rec.add(ds.n() as u64);
        if rec.due() {
            rec.record((rec.evals() / ds.n() as u64) as usize, &u, None)?;
        }
    }
    let last_epoch = (rec.evals() / ds.n() as u64) as usize;
    rec.finish(last_epoch, &u, None, cfg.seed, u.clone(), u.clone())
}

/// Deterministic extragradient. Cost `2n` per iteration.
pub fn extragda_run(ds: &Dataset, p: &ProblemParams, cfg: &BaselineConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    let mut rec = Recorder::new(Algo::ExtraGda, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate(ds.n(), false)?;
    let cone = p.cone();
    let mut u = hooks.start(ds, p)?;
    let mut bar = u.clone();
    let mut g = OperatorValue::zeros(ds.d(), ds.n());
    rec.record(0, &u, None)?;
    for _ in 0..cfg.iters {
        if rec.exhausted() {
            break;
        }
        full_operator_into(&u, ds, p, &mut g);
        bar.clone_from(&u);
        step_dense(&mut bar, cfg.eta0, &g);
        project_joint_in_place(&mut bar, cone);
        full_operator_into(&bar, ds, p, &mut g);
        step_dense(&mut u, cfg.eta0, &g);
        project_joint_in_place(&mut u, cone);
        rec.add(2 * ds.n() as u64);
        if rec.due() {
            rec.record((rec.evals() / ds.n() as u64) as usize, &u, None)?;
        }
    }
    let last_epoch = (rec.evals() / ds.n() as u64) as usize;
    rec.finish(last_epoch, &u, None, cfg.seed, u.clone(), u.clone())
}

/// Mini-batch operator estimate `(1/B) Σ_{i∈batch} Fᵢ(u)`.
pub fn sgda_direction(u: &Iterate, batch: &[usize], ds: &Dataset, p: &ProblemParams) -> Result<OperatorValue> {
    check_batch(batch, ds)?;
    if u.beta.len() != ds.d() || u.gamma.len() != ds.n() {
        return Err(Error::Shape("iterate does not match the dataset".into()));
    }
    let mut g = OperatorValue::zeros(ds.d(), ds.n());
    let w = 1.0 / batch.len() as f64;
    for &i in batch {
        g.add_component(w, &component_at(u.lambda, &u.beta, u.gamma[i], i, ds, p), ds);
    }
    Ok(g)
}

fn check_batch(batch: &[usize], ds: &Dataset) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= ds.n()) {
        return Err(Error::Index { index: i, len: ds.n() });
    }
    Ok(())
}

/// `u ← P(u − step · (1/B) Σ comps)`, touching only the sampled γ entries.
fn apply_components(u: &mut Iterate, step: f64, comps: &[ComponentValue], ds: &Dataset, p: &ProblemParams) {
    let w = step / comps.len() as f64;
    for c in comps {
        u.lambda -= w * c.d_lambda;
        ds.axpy_row(c.index, -w * c.beta_coef, &mut u.beta);
        u.gamma[c.index] -= w * c.d_gamma;
    }
    project_cone_in_place(&mut u.lambda, &mut u.beta, p.cone());
    for c in comps {
        u.gamma[c.index] = clamp_unit(u.gamma[c.index]);
    }
}

/// Stochastic descent-ascent with steps `η₀/√t`. Cost `B` per iteration.
pub fn sgda_run(ds: &Dataset, p: &ProblemParams, cfg: &BaselineConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    let mut rec = Recorder::new(Algo::Sgda, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate(ds.n(), true)?;
    let n = ds.n();
    let mut rng = StreamRng::new(cfg.seed, Stream::Sgda);
    let mut u = hooks.start(ds, p)?;
    let mut batch = Vec::with_capacity(cfg.batch);
    let mut comps = Vec::with_capacity(cfg.batch);
    rec.record(0, &u, None)?;
    for t in 1..=cfg.iters {
        if rec.exhausted() {
            break;
        }
        let step = cfg.eta0 / (t as f64).sqrt();
        rng.batch_into(n, cfg.batch, &mut batch);
        comps.clear();
        comps.extend(
            batch
                .iter()
                .map(|&i| component_at(u.lambda, &u.beta, u.gamma[i], i, ds, p)),
        );
        apply_components(&mut u, step, &comps, ds, p);
        rec.add(cfg.batch as u64);
        if rec.due() {
            rec.record((rec.evals() / n as u64) as usize, &u, None)?;
        }
    }
    let last_epoch = (rec.evals() / n as u64) as usize;
    rec.finish(last_epoch, &u, None, cfg.seed, u.clone(), u.clone())
}

/// Single-call stochastic extragradient: the extrapolation reuses the
/// previous iteration's estimate, so each iteration draws one batch.
///
/// `ū = P(u − η_t ĝ_{t−1})`, `ĝ_t = (1/B) Σ Fᵢ(ū)`, `u ← P(u − η_t ĝ_t)`,
/// with `ĝ_{−1} = 0`. Cost `B` per iteration.
pub fn extrasgda_run(ds: &Dataset, p: &ProblemParams, cfg: &BaselineConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    let mut rec = Recorder::new(Algo::ExtraSgda, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate(ds.n(), true)?;
    let (n, d) = (ds.n(), ds.d());
    let cone = p.cone();
    let mut rng = StreamRng::new(cfg.seed, Stream::ExtraSgda);
    let mut u = hooks.start(ds, p)?;
    let mut batch = Vec::with_capacity(cfg.batch);
    let mut prev: Vec<ComponentValue> = Vec::with_capacity(cfg.batch);
    let mut comps: Vec<ComponentValue> = Vec::with_capacity(cfg.batch);
    // γ-block of the previous estimate, dense but reset through `prev`
    let mut prev_dg = vec![0.0; n];
    let mut beta_bar = vec![0.0; d];
    rec.record(0, &u, None)?;
    for t in 1..=cfg.iters {
        if rec.exhausted() {
            break;
        }
        let step = cfg.eta0 / (t as f64).sqrt();
        let w = step / cfg.batch as f64;

        let mut lam_bar = u.lambda;
        beta_bar.copy_from_slice(&u.beta);
        for c in &prev {
            lam_bar -= w * c.d_lambda;
            ds.axpy_row(c.index, -w * c.beta_coef, &mut beta_bar);
        }
        project_cone_in_place(&mut lam_bar, &mut beta_bar, cone);

        rng.batch_into(n, cfg.batch, &mut batch);
        comps.clear();
        for &i in &batch {
            let g_bar = clamp_unit(u.gamma[i] - step * prev_dg[i]);
            comps.push(component_at(lam_bar, &beta_bar, g_bar, i, ds, p));
        }
        apply_components(&mut u, step, &comps, ds, p);

        for c in &prev {
            prev_dg[c.index] = 0.0;
        }
        for c in &comps {
            prev_dg[c.index] += c.d_gamma / cfg.batch as f64;
        }
        std::mem::swap(&mut prev, &mut comps);
        rec.add(cfg.batch as u64);
        if rec.due() {
            rec.record((rec.evals() / n as u64) as usize, &u, None)?;
        }
    }
    let last_epoch = (rec.evals() / n as u64) as usize;
    rec.finish(last_epoch, &u, None, cfg.seed, u.clone(), u.clone())
}

/// Mini-batch subgradient `(1/B) Σ_{i∈batch} ∂fᵢ(λ, β)`.
pub fn ssg_direction(
    lambda: f64,
    beta: &[f64],
    batch: &[usize],
    ds: &Dataset,
    p: &ProblemParams,
) -> Result<(f64, Vec<f64>)> {
    check_batch(batch, ds)?;
    if beta.len() != ds.d() {
        return Err(Error::Shape(format!(
            "beta has length {}, expected {}",
            beta.len(),
            ds.d()
        )));
    }
    let w = 1.0 / batch.len() as f64;
    let mut g_lambda = 0.0;
    let mut g_beta = vec![0.0; ds.d()];
    for &i in batch {
        let (gl, coef) = sample_subgradient_at(lambda, beta, i, ds, p);
        g_lambda += w * gl;
        ds.axpy_row(i, w * coef, &mut g_beta);
    }
    Ok((g_lambda, g_beta))
}

struct PrimalAverage {
    count: u64,
    lambda: f64,
    beta: Vec<f64>,
}

impl PrimalAverage {
    fn push(&mut self, lambda: f64, beta: &[f64]) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        self.lambda += w * (lambda - self.lambda);
        self.beta.iter_mut().zip(beta).for_each(|(a, b)| *a += w * (b - *a));
    }
}

fn subgradient_loop(
    algo: Algo,
    ds: &Dataset,
    p: &ProblemParams,
    cfg: &BaselineConfig,
    hooks: &EvalHooks,
    mut rng: Option<StreamRng>,
) -> Result<SolverTrace> {
    let mut rec = Recorder::new(algo, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate(ds.n(), rng.is_some())?;
    let n = ds.n();
    let cone = p.cone();
    let start = hooks.start(ds, p)?;
    let (mut lambda, mut beta) = (start.lambda, start.beta);
    let mut avg = PrimalAverage {
        count: 0,
        lambda: 0.0,
        beta: vec![0.0; ds.d()],
    };
    let mut batch = Vec::with_capacity(cfg.batch);
    let cost = if rng.is_some() { cfg.batch as u64 } else { n as u64 };
    rec.record(0, &primal_point(lambda, &beta, ds, p), None)?;
    for t in 1..=cfg.iters {
        if rec.exhausted() {
            break;
        }
        let step = cfg.eta0 / (t as f64).sqrt();
        let (gl, gb) = match rng.as_mut() {
            Some(r) => {
                r.batch_into(n, cfg.batch, &mut batch);
                ssg_direction(lambda, &beta, &batch, ds, p)?
            }
            None => convex_subgradient(lambda, &beta, ds, p)?,
        };
        lambda -= step * gl;
        beta.iter_mut().zip(&gb).for_each(|(b, g)| *b -= step * g);
        project_cone_in_place(&mut lambda, &mut beta, cone);
        avg.push(lambda, &beta);
        rec.add(cost);
        if rec.due() {
            let a = primal_point(avg.lambda, &avg.beta, ds, p);
            let raw = primal_point(lambda, &beta, ds, p);
            rec.record((rec.evals() / n as u64) as usize, &a, Some(&raw))?;
        }
    }
    let raw = primal_point(lambda, &beta, ds, p);
    let a = if avg.count > 0 {
        primal_point(avg.lambda, &avg.beta, ds, p)
    } else {
        raw.clone()
    };
    let last_epoch = (rec.evals() / n as u64) as usize;
    rec.finish(last_epoch, &a, Some(&raw), cfg.seed, raw.clone(), a.clone())
}

/// Projected subgradient descent on the convex primal over the cone, with
/// steps `η₀/√t`; reports the running average. Cost `n` per iteration.
pub fn sg_run(ds: &Dataset, p: &ProblemParams, cfg: &BaselineConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    subgradient_loop(Algo::Sg, ds, p, cfg, hooks, None)
}

/// Stochastic version of [`sg_run`] with mini-batches of size `B`.
pub fn ssg_run(ds: &Dataset, p: &ProblemParams, cfg: &BaselineConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    subgradient_loop(
        Algo::Ssg,
        ds,
        p,
        cfg,
        hooks,
        Some(StreamRng::new(cfg.seed, Stream::Ssg)),
    )
}
