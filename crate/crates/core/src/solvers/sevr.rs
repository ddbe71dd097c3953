use crate::error::{Error, Result};
use crate::geometry::project_joint_in_place;
use crate::model::{component_at, full_operator_into, Dataset, Iterate, OperatorValue, ProblemParams};
use crate::rng::{Stream, StreamRng};

use super::{Algo, EvalHooks, Recorder, SolverTrace};

/// Stochastic extragradient with variance reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct SevrConfig {
    pub eta: f64,
    /// Length of the first epoch; epoch `s` runs `k0 · 2ˢ` inner iterations.
    pub k0: u64,
    pub epochs: u32,
    pub batch: usize,
    pub seed: u64,
    pub checkpoint_every_passes: f64,
}

impl Default for SevrConfig {
    fn default() -> Self {
        SevrConfig {
            eta: 0.1,
            k0: 32,
            epochs: 8,
            batch: 32,
            seed: 0,
            checkpoint_every_passes: 0.5,
        }
    }
}

impl SevrConfig {
    /// `T = k0 · 2^S − k0`, the total number of inner iterations.
    pub fn total_inner(&self) -> Result<u64> {
        if self.epochs >= 63 {
            return Err(Error::Config(format!("too many epochs: {}", self.epochs)));
        }
        self.k0
            .checked_mul((1u64 << self.epochs) - 1)
            .ok_or_else(|| Error::Config("k0 · 2^S overflows".into()))
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.k0 == 0 || self.epochs == 0 {
            return Err(Error::Config("k0 and the number of epochs must be at least 1".into()));
        }
        if self.batch == 0 || self.batch > n {
            return Err(Error::Config(format!("batch size {} not in 1..={n}", self.batch)));
        }
        self.total_inner()?;
        Ok(())
    }
}

/// Inner-loop lengths `k0 · 2ˢ` for `s = 0..S`.
pub fn sevr_epoch_lengths(k0: u64, epochs: u32) -> Vec<u64> {
    (0..epochs).map(|s| k0 << s).collect()
}

/// Step at global inner counter `l ∈ 1..=T`: `η √T / √(2T − l)`.
pub fn sevr_step_size(eta: f64, total: u64, l: u64) -> f64 {
    let t = total as f64;
    eta * t.sqrt() / (2.0 * t - l as f64).sqrt()
}

/// Variance-reduced estimate `F(ũ) + (1/B) Σ_{i∈batch} (Fᵢ(u) − Fᵢ(ũ))`.
pub fn sevr_direction(
    u: &Iterate,
    anchor: &Iterate,
    f_anchor: &OperatorValue,
    batch: &[usize],
    ds: &Dataset,
    p: &ProblemParams,
) -> Result<OperatorValue> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= ds.n()) {
        return Err(Error::Index { index: i, len: ds.n() });
    }
    let mut g = f_anchor.clone();
    add_correction(u, anchor, batch, ds, p, &mut g);
    Ok(g)
}

fn add_correction(
    u: &Iterate,
    anchor: &Iterate,
    batch: &[usize],
    ds: &Dataset,
    p: &ProblemParams,
    g: &mut OperatorValue,
) {
    let w = 1.0 / batch.len() as f64;
    for &i in batch {
        let cu = component_at(u.lambda, &u.beta, u.gamma[i], i, ds, p);
        let ca = component_at(anchor.lambda, &anchor.beta, anchor.gamma[i], i, ds, p);
        g.d_lambda += w * (cu.d_lambda - ca.d_lambda);
        ds.axpy_row(i, w * (cu.beta_coef - ca.beta_coef), &mut g.d_beta);
        g.d_gamma[i] += w * (cu.d_gamma - ca.d_gamma);
    }
}

fn step_into(u: &Iterate, step: f64, g: &OperatorValue, out: &mut Iterate) {
    out.lambda = u.lambda - step * g.d_lambda;
    for (o, (b, d)) in out.beta.iter_mut().zip(u.beta.iter().zip(&g.d_beta)) {
        *o = b - step * d;
    }
    for (o, (b, d)) in out.gamma.iter_mut().zip(u.gamma.iter().zip(&g.d_gamma)) {
        *o = b - step * d;
    }
}

struct EpochSum {
    count: u64,
    sum: Iterate,
}

impl EpochSum {
    fn new(d: usize, n: usize) -> Self {
        EpochSum {
            count: 0,
            sum: Iterate::zeros(d, n),
        }
    }

    fn clear(&mut self) {
        self.count = 0;
        self.sum.lambda = 0.0;
        self.sum.beta.iter_mut().for_each(|v| *v = 0.0);
        self.sum.gamma.iter_mut().for_each(|v| *v = 0.0);
    }

    fn push(&mut self, u: &Iterate) {
        self.count += 1;
        self.sum.lambda += u.lambda;
        self.sum.beta.iter_mut().zip(&u.beta).for_each(|(s, v)| *s += v);
        self.sum.gamma.iter_mut().zip(&u.gamma).for_each(|(s, v)| *s += v);
    }

    fn mean(&self) -> Option<Iterate> {
        if self.count == 0 {
            return None;
        }
        let c = self.count as f64;
        Some(Iterate {
            lambda: self.sum.lambda / c,
            beta: self.sum.beta.iter().map(|v| v / c).collect(),
            gamma: self.sum.gamma.iter().map(|v| v / c).collect(),
        })
    }
}

/// Runs SEVR. Checkpoints report the raw iterate as the primary point and
/// the current epoch's running average as the secondary one.
///
/// Cost: `n` per epoch for the anchor operator plus `4B` per inner iteration.
pub fn sevr_run(ds: &Dataset, p: &ProblemParams, cfg: &SevrConfig, hooks: &EvalHooks) -> Result<SolverTrace> {
    let mut rec = Recorder::new(Algo::Sevr, ds, p, hooks, cfg.checkpoint_every_passes)?;
    cfg.validate(ds.n())?;
    let total = cfg.total_inner()?;
    let cone = p.cone();
    let (n, d) = (ds.n(), ds.d());
    let mut rng = StreamRng::new(cfg.seed, Stream::Sevr);

    let mut u = hooks.start(ds, p)?;
    let mut anchor = u.clone();
    let mut bar = u.clone();
    let mut next = u.clone();
    let mut f_anchor = OperatorValue::zeros(d, n);
    let mut g = OperatorValue::zeros(d, n);
    let mut batch = Vec::with_capacity(cfg.batch);
    let mut epoch_sum = EpochSum::new(d, n);
    let mut l = 0u64;
    let mut epoch = 0usize;
    rec.record(0, &u, None)?;

    'outer: for (s, k_s) in sevr_epoch_lengths(cfg.k0, cfg.epochs).into_iter().enumerate() {
        epoch = s;
        if rec.exhausted() {
            break;
        }
        full_operator_into(&anchor, ds, p, &mut f_anchor);
        rec.add(n as u64);
        epoch_sum.clear();
        for _ in 0..k_s {
            if rec.exhausted() {
                if let Some(m) = epoch_sum.mean() {
                    anchor = m;
                }
                break 'outer;
            }
            l += 1;
            let step = sevr_step_size(cfg.eta, total, l);

            rng.batch_into(n, cfg.batch, &mut batch);
            g.clone_from(&f_anchor);
            add_correction(&u, &anchor, &batch, ds, p, &mut g);
            step_into(&u, step, &g, &mut bar);
            project_joint_in_place(&mut bar, cone);

            rng.batch_into(n, cfg.batch, &mut batch);
            g.clone_from(&f_anchor);
            add_correction(&bar, &anchor, &batch, ds, p, &mut g);
            step_into(&u, step, &g, &mut next);
            project_joint_in_place(&mut next, cone);
            std::mem::swap(&mut u, &mut next);
            rec.add(4 * cfg.batch as u64);

            epoch_sum.push(&u);
            if rec.due() {
                let avg = epoch_sum.mean();
                rec.record(s, &u, avg.as_ref())?;
            }
        }
        anchor = epoch_sum.mean().unwrap_or(anchor);
    }
    rec.finish(epoch, &u.clone(), Some(&anchor), cfg.seed, u, anchor.clone())
}
