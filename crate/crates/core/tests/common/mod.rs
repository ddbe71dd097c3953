#![allow(dead_code)]

use drsl_core::data::{synth_generate, SynthSpec};
use drsl_core::solvers::{sevr_theory_schedule, spprr_required_epochs, spprr_theory_schedule, TheoryScheduleInputs};
use drsl_core::{Dataset, Iterate, LinkFunction, ProblemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn synth(n: usize, d: usize, seed: u64) -> Dataset {
    synth_generate(&SynthSpec::new(n, d, seed)).unwrap().0
}

/// Two-sample dataset with a hand-checkable optimum.
pub fn toy() -> (Dataset, ProblemParams) {
    let ds = Dataset::from_dense(&[vec![0.8, 0.3], vec![-0.1, 0.9]], &[1.0, -1.0]).unwrap();
    let p = ProblemParams::new(0.1, 1.0, LinkFunction::SymmetricLogistic).unwrap();
    (ds, p)
}

pub fn uniform_vec(r: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| scale * (r.random::<f64>() * 2.0 - 1.0)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random point of `Λ × Γ` with `λ ≤ lambda_cap`.
pub fn random_feasible(r: &mut ChaCha8Rng, ds: &Dataset, p: &ProblemParams, lambda_cap: f64) -> Iterate {
    let c = p.cone().ratio;
    let lambda = lambda_cap * r.random::<f64>();
    let mut beta = uniform_vec(r, ds.d(), 1.0);
    let nb = norm(&beta);
    let radius = lambda / c * r.random::<f64>();
    if nb > 0.0 {
        beta.iter_mut().for_each(|v| *v *= radius / nb);
    }
    let gamma = (0..ds.n()).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    Iterate { lambda, beta, gamma }
}

/// Arbitrary (possibly infeasible) point.
pub fn random_point(r: &mut ChaCha8Rng, ds: &Dataset, scale: f64) -> Iterate {
    Iterate {
        lambda: scale * (r.random::<f64>() * 2.0 - 1.0),
        beta: uniform_vec(r, ds.d(), scale),
        gamma: uniform_vec(r, ds.n(), scale),
    }
}

/// Checks every inequality defining both schedules, re-derived here.
pub fn check_schedules(inputs: &TheoryScheduleInputs, n: usize, p: &ProblemParams) -> Result<(), String> {
    let lip = p.operator_lipschitz();
    let TheoryScheduleInputs {
        d_u,
        d_l,
        epsilon: eps,
        g,
    } = *inputs;
    let du2 = d_u * d_u;

    let sevr = sevr_theory_schedule(inputs, p).map_err(|e| e.to_string())?;
    let bounds = [
        1.0 / (100.0 * lip),
        eps / (2000.0 * 2f64.sqrt() * lip * lip * du2),
        du2 / d_l,
    ];
    let min = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    if bounds.iter().any(|&b| sevr.eta > b) || sevr.eta != min {
        return Err(format!("sevr eta {} vs bounds {bounds:?}", sevr.eta));
    }
    let ratio = 10.0 * d_l / eps;
    let s = sevr.epochs as f64;
    if ratio >= 1.0 {
        // S = 1 + ⌊log₂ ratio⌋  ⇔  2^(S−1) ≤ ratio < 2^S
        if !(2f64.powf(s - 1.0) <= ratio && ratio < 2f64.powf(s)) {
            return Err(format!("sevr S = {s} for ratio {ratio}"));
        }
    } else if sevr.epochs != 1 {
        return Err(format!("sevr S = {s} for ratio {ratio} < 1"));
    }
    let k_min = du2 / (sevr.eta * d_l);
    let k0 = sevr.k0 as f64;
    if !(k0 >= k_min * (1.0 - 1e-12) && k0 - 1.0 < k_min.max(1.0)) {
        return Err(format!("sevr k0 = {k0} for bound {k_min}"));
    }
    if sevr.batch != 1 {
        return Err("sevr batch".into());
    }

    let sp = spprr_theory_schedule(inputs, n, p).map_err(|e| e.to_string())?;
    let eb = [1.0 / (2.0 * lip), eps / (4.0 * g * g)];
    if sp.eta > eb[0] || sp.eta > eb[1] || sp.eta != eb[0].min(eb[1]) {
        return Err(format!("spprr eta {} vs {eb:?}", sp.eta));
    }
    let s = sp.epochs as f64;
    let ns = |s: f64| n as f64 * s;
    let bound =
        |s: f64| 2.0 * lip * du2 / ns(s) + 3.0 * g * g * du2 / (eps * ns(s)) + 2.0 * g * d_u / (5.0 * ns(s).sqrt());
    if bound(s) > eps / 2.0 {
        return Err(format!("spprr S = {s} leaves bound {} > eps/2", bound(s)));
    }
    if s > 1.0 && bound(s - 1.0) <= eps / 2.0 {
        return Err(format!("spprr S = {s} is not minimal"));
    }
    // the two leading terms alone, as a substitution check
    if 2.0 * lip * du2 / ns(s) + 3.0 * g * g * du2 / (eps * ns(s)) > eps / 2.0 {
        return Err("spprr leading terms".into());
    }
    let m = sp.fixed_point_m as f64;
    let r = 10.0 * ns(s);
    if !(2f64.powf(m - 1.0) <= r && r < 2f64.powf(m)) {
        return Err(format!("spprr M = {m} for 10nS = {r}"));
    }
    if spprr_required_epochs(inputs, n, p).map_err(|e| e.to_string())? != sp.epochs as u64 {
        return Err("spprr epochs disagree".into());
    }
    Ok(())
}
