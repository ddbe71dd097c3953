//! The saddle objective of the Wasserstein robust generalized linear problem
//!
//! ```text
//! L(λ, β, γ) = λ(δ − κ) + (1/n) Σ Ψ(⟨x̂ᵢ, β⟩) + (1/n) Σ γᵢ (ŷᵢ⟨x̂ᵢ, β⟩ − λκ)
//! ```
//!
//! minimized over the cone `(L+1)‖β‖ ≤ λ` and maximized over `‖γ‖∞ ≤ 1`,
//! together with its monotone operator `F = (∇_{λ,β} L, −∇_γ L)`, the
//! per-sample components `Fᵢ`, and the equivalent nonsmooth convex primal.
//!
//! Every reduction over samples runs in ascending index order so results are
//! bitwise reproducible.

mod dataset;
mod link;

pub use dataset::Dataset;
pub use link::LinkFunction;

use crate::error::{Error, Result};
use crate::eval::ReferenceSolution;
use crate::geometry::ConeSpec;

/// Robustness radius, label-flip cost and link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemParams {
    pub delta: f64,
    pub kappa: f64,
    pub link: LinkFunction,
}

impl ProblemParams {
    pub fn new(delta: f64, kappa: f64, link: LinkFunction) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be >= 0, got {delta}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(ProblemParams { delta, kappa, link })
    }

    /// The primal cone `{(λ, β) : (L+1)‖β‖ ≤ λ}`.
    pub fn cone(&self) -> ConeSpec {
        ConeSpec::new(self.link.lipschitz() + 1.0)
    }

    /// Lipschitz bound `ℓ + κ + 1` shared by every component operator.
    pub fn operator_lipschitz(&self) -> f64 {
        self.link.smoothness() + self.kappa + 1.0
    }
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            delta: 0.1,
            kappa: 1.0,
            link: LinkFunction::CanonicalLogistic,
        }
    }
}

/// How the dual block of the starting point is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GammaInit {
    Zero,
    /// `γ₀ = best_response_gamma(λ₀, β₀)`.
    #[default]
    BestResponse,
}

impl std::str::FromStr for GammaInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(GammaInit::Zero),
            "best-response" | "best_response" => Ok(GammaInit::BestResponse),
            other => Err(Error::Config(format!("unknown gamma init `{other}`"))),
        }
    }
}

/// Joint point `u = (λ, β, γ) ∈ ℝ × ℝᵈ × ℝⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Iterate {
    pub fn zeros(d: usize, n: usize) -> Self {
        Iterate {
            lambda: 0.0,
            beta: vec![0.0; d],
            gamma: vec![0.0; n],
        }
    }

    /// Default solver start: `λ = 1`, `β = 0`, `γ` per `init`, then projected.
    pub fn initial(ds: &Dataset, p: &ProblemParams, init: GammaInit) -> Self {
        let mut u = Iterate::zeros(ds.d(), ds.n());
        u.lambda = 1.0;
        if init == GammaInit::BestResponse {
            u.gamma = best_response_gamma(u.lambda, &u.beta, ds, p);
        }
        crate::geometry::project_joint_in_place(&mut u, p.cone());
        u
    }

    pub fn dim(&self) -> usize {
        1 + self.beta.len() + self.gamma.len()
    }

    pub fn norm(&self) -> f64 {
        (self.lambda * self.lambda + sq_norm(&self.beta) + sq_norm(&self.gamma)).sqrt()
    }

    pub fn distance(&self, other: &Iterate) -> f64 {
        let dl = self.lambda - other.lambda;
        (dl * dl + sq_dist(&self.beta, &other.beta) + sq_dist(&self.gamma, &other.gamma)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.is_finite() && self.beta.iter().all(|v| v.is_finite()) && self.gamma.iter().all(|v| v.is_finite())
    }

    /// Membership in `Λ × Γ` up to `tol`.
    pub fn is_feasible(&self, cone: ConeSpec, tol: f64) -> bool {
        cone.contains(self.lambda, &self.beta, tol) && self.gamma.iter().all(|g| g.abs() <= 1.0 + tol)
    }

    /// `self − step · v`.
    pub fn step(&self, step: f64, v: &OperatorValue) -> Iterate {
        Iterate {
            lambda: self.lambda - step * v.d_lambda,
            beta: self.beta.iter().zip(&v.d_beta).map(|(b, g)| b - step * g).collect(),
            gamma: self.gamma.iter().zip(&v.d_gamma).map(|(b, g)| b - step * g).collect(),
        }
    }

    fn check_dims(&self, ds: &Dataset) -> Result<()> {
        if self.beta.len() != ds.d() || self.gamma.len() != ds.n() {
            return Err(Error::Shape(format!(
                "iterate has (d, n) = ({}, {}), dataset has ({}, {})",
                self.beta.len(),
                self.gamma.len(),
                ds.d(),
                ds.n()
            )));
        }
        Ok(())
    }
}

/// Dense value of `F(u)` or `Fᵢ(u)`. `d_gamma` already carries the minus
/// sign, i.e. it stores `−∇_γ L`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorValue {
    pub d_lambda: f64,
    pub d_beta: Vec<f64>,
    pub d_gamma: Vec<f64>,
}

impl OperatorValue {
    pub fn zeros(d: usize, n: usize) -> Self {
        OperatorValue {
            d_lambda: 0.0,
            d_beta: vec![0.0; d],
            d_gamma: vec![0.0; n],
        }
    }

    pub fn norm(&self) -> f64 {
        (self.d_lambda * self.d_lambda + sq_norm(&self.d_beta) + sq_norm(&self.d_gamma)).sqrt()
    }

    pub fn distance(&self, other: &OperatorValue) -> f64 {
        let dl = self.d_lambda - other.d_lambda;
        (dl * dl + sq_dist(&self.d_beta, &other.d_beta) + sq_dist(&self.d_gamma, &other.d_gamma)).sqrt()
    }

    /// `⟨F, u⟩` over the concatenated blocks.
    pub fn dot(&self, u: &Iterate) -> f64 {
        self.d_lambda * u.lambda + dot(&self.d_beta, &u.beta) + dot(&self.d_gamma, &u.gamma)
    }

    /// `self += a · c` for a sparse component value.
    pub fn add_component(&mut self, a: f64, c: &ComponentValue, ds: &Dataset) {
        self.d_lambda += a * c.d_lambda;
        ds.axpy_row(c.index, a * c.beta_coef, &mut self.d_beta);
        self.d_gamma[c.index] += a * c.d_gamma;
    }
}

/// Sparse form of `Fᵢ(u)`: the β-block is `beta_coef · x̂ᵢ` and the only
/// nonzero γ entry sits at `index`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentValue {
    pub index: usize,
    pub d_lambda: f64,
    pub beta_coef: f64,
    pub d_gamma: f64,
}

impl ComponentValue {
    pub fn to_dense(&self, ds: &Dataset) -> OperatorValue {
        let mut out = OperatorValue::zeros(ds.d(), ds.n());
        out.add_component(1.0, self, ds);
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_beta(beta: &[f64], ds: &Dataset) -> Result<()> {
    if beta.len() != ds.d() {
        return Err(Error::Shape(format!(
            "beta has length {}, expected {}",
            beta.len(),
            ds.d()
        )));
    }
    Ok(())
}

/// Saddle objective `L(λ, β, γ)`. Defined for any `u`, feasible or not.
pub fn objective_l(u: &Iterate, ds: &Dataset, p: &ProblemParams) -> Result<f64> {
    u.check_dims(ds)?;
    Ok(objective_l_unchecked(u.lambda, &u.beta, &u.gamma, ds, p))
}

pub(crate) fn objective_l_unchecked(lambda: f64, beta: &[f64], gamma: &[f64], ds: &Dataset, p: &ProblemParams) -> f64 {
    let n = ds.n() as f64;
    let mut psi_sum = 0.0;
    let mut coupling = 0.0;
    for (i, g) in gamma.iter().enumerate() {
        let z = ds.dot_row(i, beta);
        psi_sum += p.link.value(z);
        coupling += g * (ds.label(i) * z - lambda * p.kappa);
    }
    lambda * (p.delta - p.kappa) + psi_sum / n + coupling / n
}

/// Full operator `F(u)`.
pub fn full_operator(u: &Iterate, ds: &Dataset, p: &ProblemParams) -> Result<OperatorValue> {
    u.check_dims(ds)?;
    if ds.n() == 0 {
        return Err(Error::Shape("empty dataset".into()));
    }
    let mut out = OperatorValue::zeros(ds.d(), ds.n());
    full_operator_into(u, ds, p, &mut out);
    Ok(out)
}

pub(crate) fn full_operator_into(u: &Iterate, ds: &Dataset, p: &ProblemParams, out: &mut OperatorValue) {
    let n = ds.n();
    let inv_n = 1.0 / n as f64;
    out.d_beta.iter_mut().for_each(|v| *v = 0.0);
    let mut gamma_sum = 0.0;
    for i in 0..n {
        let y = ds.label(i);
        let z = ds.dot_row(i, &u.beta);
        let g = u.gamma[i];
        gamma_sum += g;
        ds.axpy_row(i, p.link.derivative(z) + g * y, &mut out.d_beta);
        out.d_gamma[i] = -inv_n * (y * z - u.lambda * p.kappa);
    }
    out.d_lambda = p.delta - p.kappa * (1.0 + gamma_sum * inv_n);
    out.d_beta.iter_mut().for_each(|v| *v *= inv_n);
}

/// Component operator `Fᵢ(u)` in sparse form. Costs `O(nnz(x̂ᵢ))`.
///
/// The γ entry carries no `1/n` factor, so `(1/n) Σᵢ Fᵢ = F` block by block.
pub fn component_operator(u: &Iterate, i: usize, ds: &Dataset, p: &ProblemParams) -> Result<ComponentValue> {
    u.check_dims(ds)?;
    if i >= ds.n() {
        return Err(Error::Index { index: i, len: ds.n() });
    }
    Ok(component_at(u.lambda, &u.beta, u.gamma[i], i, ds, p))
}

/// `Fᵢ` evaluated from the only coordinates it reads: `λ`, `β` and `γᵢ`.
#[inline]
pub(crate) fn component_at(
    lambda: f64,
    beta: &[f64],
    gamma_i: f64,
    i: usize,
    ds: &Dataset,
    p: &ProblemParams,
) -> ComponentValue {
    let y = ds.label(i);
    let z = ds.dot_row(i, beta);
    ComponentValue {
        index: i,
        d_lambda: p.delta - p.kappa * (1.0 + gamma_i),
        beta_coef: p.link.derivative(z) + gamma_i * y,
        d_gamma: -(y * z - lambda * p.kappa),
    }
}

/// Maximizer of `L(λ, β, ·)` over `Γ`: `γᵢ = sign(ŷᵢ⟨x̂ᵢ, β⟩ − λκ)`, with
/// exact ties mapped to 0.
pub fn best_response_gamma(lambda: f64, beta: &[f64], ds: &Dataset, p: &ProblemParams) -> Vec<f64> {
    (0..ds.n())
        .map(|i| {
            let a = ds.label(i) * ds.dot_row(i, beta) - lambda * p.kappa;
            if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Nonsmooth convex primal
/// `f(λ, β) = λδ + (1/n) Σ [Ψ(zᵢ) − ŷᵢzᵢ] + (1/n) Σ max{0, 2ŷᵢzᵢ − 2λκ}`.
pub fn convex_objective_f(lambda: f64, beta: &[f64], ds: &Dataset, p: &ProblemParams) -> Result<f64> {
    check_beta(beta, ds)?;
    Ok(convex_objective_from_margins(lambda, &ds.margins(beta), ds, p))
}

pub(crate) fn convex_objective_from_margins(lambda: f64, margins: &[f64], ds: &Dataset, p: &ProblemParams) -> f64 {
    let n = ds.n() as f64;
    let mut loss = 0.0;
    let mut hinge = 0.0;
    for (i, &z) in margins.iter().enumerate() {
        let yz = ds.label(i) * z;
        loss += p.link.value(z) - yz;
        hinge += (2.0 * yz - 2.0 * lambda * p.kappa).max(0.0);
    }
    lambda * p.delta + loss / n + hinge / n
}

/// Subgradient of [`convex_objective_f`]; the hinge contributes 0 at kinks.
pub fn convex_subgradient(lambda: f64, beta: &[f64], ds: &Dataset, p: &ProblemParams) -> Result<(f64, Vec<f64>)> {
    check_beta(beta, ds)?;
    let n = ds.n() as f64;
    let mut g_beta = vec![0.0; ds.d()];
    let mut g_lambda = 0.0;
    for i in 0..ds.n() {
        let (gl, coef) = sample_subgradient_at(lambda, beta, i, ds, p);
        g_lambda += gl;
        ds.axpy_row(i, coef, &mut g_beta);
    }
    g_beta.iter_mut().for_each(|v| *v /= n);
    Ok((g_lambda / n, g_beta))
}

/// Per-sample subgradient `(g_λ, c)` with β-part `c · x̂ᵢ`; averages to
/// [`convex_subgradient`].
#[inline]
pub(crate) fn sample_subgradient_at(
    lambda: f64,
    beta: &[f64],
    i: usize,
    ds: &Dataset,
    p: &ProblemParams,
) -> (f64, f64) {
    let y = ds.label(i);
    let z = ds.dot_row(i, beta);
    let active = 2.0 * y * z - 2.0 * lambda * p.kappa > 0.0;
    let mut coef = p.link.derivative(z) - y;
    let mut g_lambda = p.delta;
    if active {
        coef += 2.0 * y;
        g_lambda -= 2.0 * p.kappa;
    }
    (g_lambda, coef)
}

/// Duality gap `Δ(û) = L(λ̂, β̂, γ*) − L(λ*, β*, γ̂)` against a reference saddle point.
pub fn duality_gap(u: &Iterate, reference: &ReferenceSolution, ds: &Dataset, p: &ProblemParams) -> Result<f64> {
    u.check_dims(ds)?;
    if reference.beta_star.len() != ds.d() || reference.gamma_star.len() != ds.n() {
        return Err(Error::State("reference solution does not match the dataset".into()));
    }
    let upper = objective_l_unchecked(u.lambda, &u.beta, &reference.gamma_star, ds, p);
    let lower = objective_l_unchecked(reference.lambda_star, &reference.beta_star, &u.gamma, ds, p);
    Ok(upper - lower)
}
