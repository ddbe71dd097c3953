//! Euclidean projections onto the feasible sets: the scaled second-order
//! cone `Λ = {(λ, β) : c‖β‖ ≤ λ}` and the box `Γ = [−1, 1]ⁿ`.

use crate::error::{Error, Result};
use crate::model::Iterate;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    /// `c = L + 1`.
    pub ratio: f64,
}

impl ConeSpec {
    pub fn new(ratio: f64) -> Self {
        debug_assert!(ratio > 0.0);
        ConeSpec { ratio }
    }

    pub fn contains(&self, lambda: f64, beta: &[f64], tol: f64) -> bool {
        self.ratio * norm(beta) <= lambda + tol
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projection of `(λ, β)` onto the cone.
pub fn project_cone(lambda: f64, beta: &[f64], cone: ConeSpec) -> Result<(f64, Vec<f64>)> {
    if !lambda.is_finite() || beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cone projection of a non-finite point".into()));
    }
    let mut lam = lambda;
    let mut b = beta.to_vec();
    project_cone_in_place(&mut lam, &mut b, cone);
    Ok((lam, b))
}

/// In-place cone projection; no finiteness check.
pub fn project_cone_in_place(lambda: &mut f64, beta: &mut [f64], cone: ConeSpec) {
    let c = cone.ratio;
    let r = norm(beta);
    if c * r <= *lambda {
        return;
    }
    if r == 0.0 {
        // only reachable with λ < 0
        *lambda = lambda.max(0.0);
        return;
    }
    if *lambda <= -r / c {
        *lambda = 0.0;
        beta.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let rho = (c * *lambda + r) / (1.0 + c * c);
    let s = rho / r;
    beta.iter_mut().for_each(|v| *v *= s);
    *lambda = c * rho;
}

/// Entrywise clamp to `[−1, 1]`.
pub fn project_box(gamma: &[f64]) -> Vec<f64> {
    gamma.iter().map(|&g| clamp_unit(g)).collect()
}

#[inline]
pub fn clamp_unit(g: f64) -> f64 {
    g.clamp(-1.0, 1.0)
}

/// Blockwise projection onto `Λ × Γ`.
pub fn project_joint(u: &Iterate, cone: ConeSpec) -> Iterate {
    let mut out = u.clone();
    project_joint_in_place(&mut out, cone);
    out
}

pub fn project_joint_in_place(u: &mut Iterate, cone: ConeSpec) {
    project_cone_in_place(&mut u.lambda, &mut u.beta, cone);
    u.gamma.iter_mut().for_each(|g| *g = clamp_unit(*g));
}
