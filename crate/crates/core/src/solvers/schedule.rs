//! Parameter schedules that follow the convergence guarantees, and the
//! component-bound estimate they need.

use crate::error::{Error, Result};
use crate::model::{component_at, Dataset, GammaInit, Iterate, ProblemParams};
use crate::rng::{Stream, StreamRng};

use super::{SevrConfig, SpprrConfig};

/// Problem-dependent constants of the guarantees: distance bound `d_u` from
/// the start to a saddle point, initial gap bound `d_l`, target accuracy
/// `epsilon ∈ (0, 1)` and the component bound `g` (SPPRR only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryScheduleInputs {
    pub d_u: f64,
    pub d_l: f64,
    pub epsilon: f64,
    pub g: f64,
}

impl TheoryScheduleInputs {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        for (name, v) in [("d_u", self.d_u), ("d_l", self.d_l), ("g", self.g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// SEVR schedule with unit batches:
///
/// ```text
/// S  = 1 + ⌊log₂(10 D_L / ε)⌋
/// η  = min{1/(100 Lip), ε/(2000 √2 Lip² D_u²), D_u² / D_L}
/// k₀ = ⌈D_u² / (η D_L)⌉
/// ```
///
/// with `Lip = ℓ + κ + 1`. `S` is at least 1.
pub fn sevr_theory_schedule(inputs: &TheoryScheduleInputs, p: &ProblemParams) -> Result<SevrConfig> {
    inputs.validate()?;
    let lip = p.operator_lipschitz();
    let (du2, dl, eps) = (inputs.d_u * inputs.d_u, inputs.d_l, inputs.epsilon);
    let epochs = (1.0 + (10.0 * dl / eps).log2().floor()).max(1.0);
    let eta = (1.0 / (100.0 * lip))
        .min(eps / (2000.0 * std::f64::consts::SQRT_2 * lip * lip * du2))
        .min(du2 / dl);
    let k0 = (du2 / (eta * dl)).ceil().max(1.0);
    if epochs > 62.0 || k0 > u64::MAX as f64 {
        return Err(Error::Domain("theory schedule out of range".into()));
    }
    Ok(SevrConfig {
        eta,
        k0: k0 as u64,
        epochs: epochs as u32,
        batch: 1,
        ..Default::default()
    })
}

/// Smallest `S` with
/// `2 Lip D_u²/(nS) + 3 G² D_u²/(ε n S) + 2 G D_u/(5 √(nS)) ≤ ε/2`.
pub fn spprr_required_epochs(inputs: &TheoryScheduleInputs, n: usize, p: &ProblemParams) -> Result<u64> {
    inputs.validate()?;
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let lip = p.operator_lipschitz();
    let (du, g, eps) = (inputs.d_u, inputs.g, inputs.epsilon);
    let a = 2.0 * lip * du * du + 3.0 * g * g * du * du / eps;
    let b = 2.0 * g * du / 5.0;
    let bound = |s: f64| {
        let ns = n as f64 * s;
        a / ns + b / ns.sqrt()
    };
    // positive root in x = 1/√(nS) of a x² + b x = ε/2
    let x = (-b + (b * b + 2.0 * a * eps).sqrt()) / (2.0 * a);
    let mut s = (1.0 / (n as f64 * x * x)).ceil().max(1.0);
    while bound(s) > eps / 2.0 {
        s += 1.0;
    }
    while s > 1.0 && bound(s - 1.0) <= eps / 2.0 {
        s -= 1.0;
    }
    if s > u32::MAX as f64 {
        return Err(Error::Domain("theory schedule out of range".into()));
    }
    Ok(s as u64)
}

/// SPPRR schedule: `η = min{1/(2 Lip), ε/(4G²)}`, `S` from
/// [`spprr_required_epochs`], `M = 1 + ⌊log₂(10 n S)⌋`.
pub fn spprr_theory_schedule(inputs: &TheoryScheduleInputs, n: usize, p: &ProblemParams) -> Result<SpprrConfig> {
    let epochs = spprr_required_epochs(inputs, n, p)?;
    let lip = p.operator_lipschitz();
    let eta = (1.0 / (2.0 * lip)).min(inputs.epsilon / (4.0 * inputs.g * inputs.g));
    let m = 1.0 + (10.0 * n as f64 * epochs as f64).log2().floor();
    Ok(SpprrConfig {
        eta,
        epochs: epochs as u32,
        fixed_point_m: m as u32,
        ..Default::default()
    })
}

/// Estimate of `sup ‖Fᵢ‖`: the maximum over all components at the default
/// start and at `samples` random feasible points with `λ ≤ lambda_cap`.
pub fn estimate_component_bound(
    ds: &Dataset,
    p: &ProblemParams,
    samples: usize,
    lambda_cap: f64,
    seed: u64,
) -> Result<f64> {
    if ds.n() == 0 {
        return Err(Error::Domain("empty dataset".into()));
    }
    if !(lambda_cap > 0.0) {
        return Err(Error::Domain(format!("lambda_cap must be positive, got {lambda_cap}")));
    }
    let c = p.cone().ratio;
    let mut rng = StreamRng::new(seed, Stream::Sampling);
    let mut best: f64 = 0.0;
    let mut eval = |u: &Iterate| {
        for i in 0..ds.n() {
            let v = component_at(u.lambda, &u.beta, u.gamma[i], i, ds, p);
            let r = ds.row_norm(i);
            let norm = (v.d_lambda * v.d_lambda + v.beta_coef * v.beta_coef * r * r + v.d_gamma * v.d_gamma).sqrt();
            best = best.max(norm);
        }
    };
    eval(&Iterate::initial(ds, p, GammaInit::default()));
    for _ in 0..samples {
        let lambda = lambda_cap * rng.uniform();
        let mut beta: Vec<f64> = (0..ds.d()).map(|_| rng.standard_normal()).collect();
        let norm = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = lambda / c * rng.uniform();
        if norm > 0.0 {
            beta.iter_mut().for_each(|v| *v *= radius / norm);
        }
        let gamma = (0..ds.n()).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        eval(&Iterate { lambda, beta, gamma });
    }
    Ok(best)
}
