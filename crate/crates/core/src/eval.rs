//! Reference saddle points, suboptimality, Wasserstein robust loss and test
//! metrics.
//!
//! The reference solver is a deterministic extragradient loop whose output
//! is certified by a primal upper bound (exact λ refinement at fixed β) and
//! a dual lower bound (linearization of Ψ at the current margins). The
//! reported `tolerance` is the difference of the two bounds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use sha2::{Digest, Sha256};

use crate::data::write_dataset;
use crate::error::{Error, Result};
use crate::geometry::{clamp_unit, project_cone_in_place, project_joint_in_place};
use crate::model::{
    convex_objective_f, convex_objective_from_margins, full_operator_into, sq_norm, Dataset, GammaInit, Iterate,
    OperatorValue, ProblemParams,
};
use crate::util::{fmt17, write_atomic};

/// High-accuracy saddle point `(λ*, β*, γ*)` with its primal value.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution {
    pub lambda_star: f64,
    pub beta_star: Vec<f64>,
    pub gamma_star: Vec<f64>,
    pub f_star: f64,
    /// Certified bound on `f_star − min f`.
    pub tolerance: f64,
    /// False when the budget ran out before `tol_target` was met.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceOptions {
    /// Maximum number of full-operator evaluations.
    pub budget: usize,
    pub tol_target: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            budget: 20_000,
            tol_target: 1e-10,
        }
    }
}

/// Primal/dual bounds at one candidate point.
#[derive(Clone, Debug)]
struct Certificate {
    lambda: f64,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    upper: f64,
    lower: f64,
}

impl Certificate {
    fn gap(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }
}

/// Smallest minimizer of the piecewise-linear map `λ ↦ f(λ, β)` over
/// `λ ≥ c‖β‖`, given the margins `zᵢ = ⟨x̂ᵢ, β⟩`.
///
/// The slope is `δ − (2κ/n)·#{i : ŷᵢzᵢ > λκ}`, so at most
/// `⌊nδ / 2κ⌋` hinges may stay active at the minimizer.
pub(crate) fn refine_lambda(beta_norm: f64, margins: &[f64], ds: &Dataset, p: &ProblemParams) -> f64 {
    let lo = p.cone().ratio * beta_norm;
    let n = margins.len();
    let k_max = (n as f64 * p.delta / (2.0 * p.kappa)).floor();
    if k_max >= n as f64 {
        return lo;
    }
    let k = k_max as usize;
    let mut t: Vec<f64> = margins
        .iter()
        .enumerate()
        .map(|(i, z)| ds.label(i) * z / p.kappa)
        .collect();
    // (k+1)-th largest threshold
    let (_, kth, _) = t.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    lo.max(*kth)
}

fn certify(beta: &[f64], solver_gamma: &[f64], ds: &Dataset, p: &ProblemParams) -> Certificate {
    let n = ds.n() as f64;
    let c = p.cone().ratio;
    let margins = ds.margins(beta);
    let lambda = refine_lambda(sq_norm(beta).sqrt(), &margins, ds, p);
    let upper = convex_objective_from_margins(lambda, &margins, ds, p);

    let mut base = 0.0;
    for &z in &margins {
        base += p.link.value(z) - z * p.link.derivative(z);
    }
    base /= n;
    let radius = (10.0 * lambda).max(10.0);

    // Exact ties may take any value in [−1, 1]; try a few fills and keep the best bound.
    let mut best: Option<(f64, Vec<f64>)> = None;
    // The last fill balances the λ-slope: Σγ = n(δ/κ − 1).
    let (mut ties, mut fixed_sum) = (0usize, 0.0);
    for (i, &z) in margins.iter().enumerate() {
        let a = ds.label(i) * z - lambda * p.kappa;
        if a == 0.0 {
            ties += 1;
        } else {
            fixed_sum += a.signum();
        }
    }
    let balance = if ties > 0 {
        clamp_unit((n * (p.delta / p.kappa - 1.0) - fixed_sum) / ties as f64)
    } else {
        0.0
    };
    let fills: [Option<f64>; 5] = [None, Some(-1.0), Some(0.0), Some(1.0), Some(balance)];
    let mut w = vec![0.0; ds.d()];
    for fill in fills {
        let mut gamma = Vec::with_capacity(ds.n());
        let mut any_tie = false;
        for (i, &z) in margins.iter().enumerate() {
            let a = ds.label(i) * z - lambda * p.kappa;
            gamma.push(if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                any_tie = true;
                fill.unwrap_or_else(|| clamp_unit(solver_gamma[i]))
            });
        }
        if !any_tie && fill.is_some() {
            continue;
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        let mut gamma_sum = 0.0;
        for (i, &z) in margins.iter().enumerate() {
            gamma_sum += gamma[i];
            ds.axpy_row(i, p.link.derivative(z) + gamma[i] * ds.label(i), &mut w);
        }
        let slope_lambda = p.delta - p.kappa * (1.0 + gamma_sum / n);
        let w_norm = sq_norm(&w).sqrt() / n;
        let lower = base + radius * (slope_lambda - w_norm / c).min(0.0);
        if best.as_ref().is_none_or(|(b, _)| lower > *b) {
            best = Some((lower, gamma));
        }
    }
    let (lower, gamma) = best.expect("at least one fill is evaluated");
    Certificate {
        lambda,
        beta: beta.to_vec(),
        gamma,
        upper,
        lower,
    }
}

/// Deterministic reference saddle point.
///
/// Runs projected extragradient in the metric that rescales the γ block by
/// `n` (so every block has an `O(1)` Lipschitz constant) and certifies the
/// iterate after each stage. If the gap blows up, the step is halved and the
/// loop restarts from the best certificate. Stops when the gap is below
/// `tol_target` or the budget is spent; in the latter case the best
/// certificate is returned with `converged = false`.
pub fn compute_reference(ds: &Dataset, p: &ProblemParams, opts: &ReferenceOptions) -> Result<ReferenceSolution> {
    if ds.n() == 0 {
        return Err(Error::Domain("reference solution of an empty dataset".into()));
    }
    if opts.budget < 2 {
        return Err(Error::Domain(
            "reference budget must allow at least one iteration".into(),
        ));
    }
    let cone = p.cone();
    let n = ds.n() as f64;
    let stage_len = 50usize;
    let mut eta = 0.9 / p.operator_lipschitz();
    let mut u = Iterate::initial(ds, p, GammaInit::BestResponse);
    let mut bar = u.clone();
    let mut f_u = OperatorValue::zeros(ds.d(), ds.n());
    let mut f_bar = OperatorValue::zeros(ds.d(), ds.n());
    let mut best = certify(&u.beta, &u.gamma, ds, p);
    let mut stage_start_gap = best.gap();
    let mut evals = 0usize;

    while best.gap() > opts.tol_target && evals + 2 <= opts.budget {
        for _ in 0..stage_len {
            if evals + 2 > opts.budget {
                break;
            }
            full_operator_into(&u, ds, p, &mut f_u);
            scaled_step(&u, &f_u, eta, n, &mut bar);
            project_joint_in_place(&mut bar, cone);
            full_operator_into(&bar, ds, p, &mut f_bar);
            let prev = u.clone();
            scaled_step(&prev, &f_bar, eta, n, &mut u);
            project_joint_in_place(&mut u, cone);
            evals += 2;
        }
        if !u.is_finite() {
            return Err(Error::Divergence("reference iterate became non-finite".into()));
        }
        let cert = certify(&u.beta, &u.gamma, ds, p);
        let cert_gap = cert.gap();
        debug!("reference: evals {evals}, eta {eta:.3e}, gap {cert_gap:.3e}");
        if cert.gap() < best.gap() {
            best = cert;
        }
        if cert_gap > 100.0 * stage_start_gap {
            // oscillation: restart from the best certified point with a smaller step
            eta *= 0.5;
            u.lambda = best.lambda;
            u.beta.clone_from(&best.beta);
            u.gamma.clone_from(&best.gamma);
            project_cone_in_place(&mut u.lambda, &mut u.beta, cone);
        }
        stage_start_gap = best.gap();
        if eta < 1e-12 {
            break;
        }
    }
    let converged = best.gap() <= opts.tol_target;
    if !converged {
        warn!(
            "reference solution not certified to {:.1e}; achieved {:.3e}",
            opts.tol_target,
            best.gap()
        );
    }
    Ok(ReferenceSolution {
        lambda_star: best.lambda,
        f_star: best.upper,
        tolerance: best.gap(),
        beta_star: best.beta,
        gamma_star: best.gamma,
        converged,
    })
}

fn scaled_step(u: &Iterate, v: &OperatorValue, eta: f64, n: f64, out: &mut Iterate) {
    out.lambda = u.lambda - eta * v.d_lambda;
    for (o, (b, g)) in out.beta.iter_mut().zip(u.beta.iter().zip(&v.d_beta)) {
        *o = b - eta * g;
    }
    let eta_g = eta * n;
    for (o, (b, g)) in out.gamma.iter_mut().zip(u.gamma.iter().zip(&v.d_gamma)) {
        *o = b - eta_g * g;
    }
}

/// `f(λ, β) − f*`, after projecting `(λ, β)` onto the cone.
pub fn suboptimality(
    lambda: f64,
    beta: &[f64],
    ds: &Dataset,
    p: &ProblemParams,
    reference: &ReferenceSolution,
) -> Result<f64> {
    let mut lam = lambda;
    let mut b = beta.to_vec();
    project_cone_in_place(&mut lam, &mut b, p.cone());
    Ok(convex_objective_f(lam, &b, ds, p)? - reference.f_star)
}

/// Wasserstein robust loss `min_{λ ≥ (L+1)‖β‖} f(λ, β)` on a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustLossReport {
    pub beta: Vec<f64>,
    pub delta: f64,
    pub value: f64,
    pub argmin_lambda: f64,
}

/// Golden-section search in λ on `[(L+1)‖β‖, λ_hi]`, with `λ_hi` doubled
/// until the objective stops decreasing. The result is snapped to the best
/// nearby breakpoint of the piecewise-linear objective.
pub fn robust_loss_w(beta: &[f64], ds: &Dataset, delta: f64, p: &ProblemParams) -> Result<RobustLossReport> {
    if ds.n() == 0 {
        return Err(Error::Domain("robust loss of an empty dataset".into()));
    }
    let p = ProblemParams::new(delta, p.kappa, p.link)?;
    if beta.len() != ds.d() {
        return Err(Error::Shape(format!(
            "beta has length {}, expected {}",
            beta.len(),
            ds.d()
        )));
    }
    let margins = ds.margins(beta);
    let f = |lam: f64| convex_objective_from_margins(lam, &margins, ds, &p);
    let lo = p.cone().ratio * sq_norm(beta).sqrt();

    let mut step = lo.max(1.0);
    let mut prev = f(lo);
    let mut hi = lo + step;
    let mut f_hi = f(hi);
    while f_hi < prev && step < 1e15 {
        prev = f_hi;
        step *= 2.0;
        hi = lo + step;
        f_hi = f(hi);
    }

    let tol = 1e-9;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let mut best_lam = 0.5 * (a + b);
    let mut best_val = f(best_lam);
    let window = 1e-6 * best_lam.abs().max(1.0);
    let center = best_lam;
    let candidates: Vec<f64> = std::iter::once(lo)
        .chain(
            margins
                .iter()
                .enumerate()
                .map(|(i, z)| ds.label(i) * z / p.kappa)
                .filter(|t| *t >= lo && (t - center).abs() <= window),
        )
        .collect();
    for lam in candidates {
        let v = f(lam);
        if v < best_val || (v == best_val && lam < best_lam) {
            best_val = v;
            best_lam = lam;
        }
    }
    Ok(RobustLossReport {
        beta: beta.to_vec(),
        delta,
        value: best_val,
        argmin_lambda: best_lam,
    })
}

/// 0/1 error of `sign(⟨x, β⟩)` (0 predicts +1) and mean `Ψ(z) − yz`.
pub fn test_metrics(beta: &[f64], ds: &Dataset, p: &ProblemParams) -> Result<(f64, f64)> {
    if ds.n() == 0 {
        return Err(Error::Domain("metrics of an empty dataset".into()));
    }
    if beta.len() != ds.d() {
        return Err(Error::Shape(format!(
            "beta has length {}, expected {}",
            beta.len(),
            ds.d()
        )));
    }
    let mut errors = 0usize;
    let mut loss = 0.0;
    for i in 0..ds.n() {
        let z = ds.dot_row(i, beta);
        let y = ds.label(i);
        let pred = if z >= 0.0 { 1.0 } else { -1.0 };
        if pred != y {
            errors += 1;
        }
        loss += p.link.value(z) - y * z;
    }
    let n = ds.n() as f64;
    Ok((errors as f64 / n, loss / n))
}

/// Hex SHA-256 of the dataset cache bytes followed by the parameter bytes.
pub fn content_hash(ds: &Dataset, p: &ProblemParams) -> String {
    let mut bytes = Vec::new();
    write_dataset(ds, &mut bytes).expect("writing to memory");
    let mut h = Sha256::new();
    h.update(&bytes);
    h.update(p.delta.to_le_bytes());
    h.update(p.kappa.to_le_bytes());
    h.update(p.link.name().as_bytes());
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// On-disk cache of reference solutions keyed by [`content_hash`].
#[derive(Clone, Debug)]
pub struct ReferenceCache {
    dir: PathBuf,
}

pub const CACHE_DIR_ENV: &str = "DRSL_CACHE_DIR";

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    /// Directory from `DRSL_CACHE_DIR`, else `.drsl_cache`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".drsl_cache"));
        ReferenceCache::new(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.ref"))
    }

    /// Cached entry whose tolerance meets `tol_target`, if any.
    pub fn load(&self, ds: &Dataset, p: &ProblemParams, tol_target: f64) -> Result<Option<ReferenceSolution>> {
        let hash = content_hash(ds, p);
        let path = self.path_for(&hash);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let r = parse_reference(&text, &hash)?;
        if r.beta_star.len() != ds.d() || r.gamma_star.len() != ds.n() {
            return Err(Error::State(format!(
                "cache entry {} has wrong dimensions",
                path.display()
            )));
        }
        Ok((r.tolerance <= tol_target).then_some(r))
    }

    pub fn store(&self, ds: &Dataset, p: &ProblemParams, r: &ReferenceSolution) -> Result<PathBuf> {
        let hash = content_hash(ds, p);
        let path = self.path_for(&hash);
        write_atomic(&path, format_reference(r, &hash).as_bytes())?;
        Ok(path)
    }
}

/// Cache entry text: hash header, then `λ*`, `f*`, tolerance, `β*`, `γ*`.
pub fn format_reference(r: &ReferenceSolution, hash: &str) -> String {
    let join = |v: &[f64]| v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(" ");
    format!(
        "# drsl-reference {hash}\nlambda_star {}\nf_star {}\ntolerance {}\nconverged {}\nbeta_star {}\ngamma_star {}\n",
        fmt17(r.lambda_star),
        fmt17(r.f_star),
        fmt17(r.tolerance),
        r.converged,
        join(&r.beta_star),
        join(&r.gamma_star),
    )
}

pub fn parse_reference(text: &str, expected_hash: &str) -> Result<ReferenceSolution> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty reference file"))?;
    let hash = header
        .strip_prefix("# drsl-reference ")
        .ok_or_else(|| bad(1, "missing reference header"))?;
    if hash.trim() != expected_hash {
        return Err(Error::State("reference cache hash mismatch".into()));
    }
    let mut scalar = |key: &str| -> Result<(usize, String)> {
        let (i, line) = lines.next().ok_or_else(|| bad(0, "truncated reference file"))?;
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| bad(i + 1, &format!("expected `{key}`")))?;
        Ok((i + 1, rest.trim().to_string()))
    };
    let num =
        |(i, s): (usize, String)| -> Result<f64> { s.parse().map_err(|_| bad(i, &format!("invalid number `{s}`"))) };
    let vec = |(i, s): (usize, String)| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(i, &format!("invalid number `{t}`"))))
            .collect()
    };
    let lambda_star = num(scalar("lambda_star")?)?;
    let f_star = num(scalar("f_star")?)?;
    let tolerance = num(scalar("tolerance")?)?;
    let (i, conv) = scalar("converged")?;
    let converged = conv.parse().map_err(|_| bad(i, "invalid converged flag"))?;
    let beta_star = vec(scalar("beta_star")?)?;
    let gamma_star = vec(scalar("gamma_star")?)?;
    Ok(ReferenceSolution {
        lambda_star,
        beta_star,
        gamma_star,
        f_star,
        tolerance,
        converged,
    })
}

/// Cache lookup, else compute and store. The flag is true on a cache hit.
pub fn reference_cached(
    cache: &ReferenceCache,
    ds: &Dataset,
    p: &ProblemParams,
    opts: &ReferenceOptions,
) -> Result<(ReferenceSolution, bool)> {
    if let Some(r) = cache.load(ds, p, opts.tol_target)? {
        return Ok((r, true));
    }
    let r = compute_reference(ds, p, opts)?;
    cache.store(ds, p, &r)?;
    Ok((r, false))
}
