//! Saddle-point solvers and their shared bookkeeping.
//!
//! Every solver counts component-operator evaluations (a full operator costs
//! `n`), records a checkpoint every `checkpoint_every_passes` data passes,
//! and checks feasibility and divergence at each checkpoint.

mod baselines;
mod schedule;
mod sevr;
mod spprr;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use baselines::{
    extragda_run, extrasgda_run, gda_run, sg_run, sgda_direction, sgda_run, ssg_direction, ssg_run, BaselineConfig,
};
pub use schedule::{
    estimate_component_bound, sevr_theory_schedule, spprr_required_epochs, spprr_theory_schedule, TheoryScheduleInputs,
};
pub use sevr::{sevr_direction, sevr_epoch_lengths, sevr_run, sevr_step_size, SevrConfig};
pub use spprr::{prox_fixed_point, prox_map, spprr_run, SpprrConfig};

use crate::error::{Error, Result};
use crate::eval::{suboptimality, ReferenceSolution};
use crate::model::{
    best_response_gamma, convex_objective_f, duality_gap, objective_l, Dataset, GammaInit, Iterate, ProblemParams,
};

/// Tolerance of the feasibility check at checkpoints.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Divergence threshold on `|L|`.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algo {
    Sevr,
    Spprr,
    Gda,
    ExtraGda,
    Sgda,
    ExtraSgda,
    Sg,
    Ssg,
}

impl Algo {
    pub const ALL: [Algo; 8] = [
        Algo::Sevr,
        Algo::Spprr,
        Algo::Gda,
        Algo::ExtraGda,
        Algo::Sgda,
        Algo::ExtraSgda,
        Algo::Sg,
        Algo::Ssg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Sevr => "sevr",
            Algo::Spprr => "spprr",
            Algo::Gda => "gda",
            Algo::ExtraGda => "extragda",
            Algo::Sgda => "sgda",
            Algo::ExtraSgda => "extrasgda",
            Algo::Sg => "sg",
            Algo::Ssg => "ssg",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Evaluation context shared by all solvers.
#[derive(Clone, Debug, Default)]
pub struct EvalHooks<'a> {
    /// When present, checkpoints report suboptimality and duality gap.
    pub reference: Option<&'a ReferenceSolution>,
    /// Stop once this many data passes have been spent.
    pub max_passes: Option<f64>,
    /// Starting point; defaults to [`Iterate::initial`] with the default γ rule.
    pub initial: Option<Iterate>,
}

impl<'a> EvalHooks<'a> {
    pub fn with_reference(reference: &'a ReferenceSolution) -> Self {
        EvalHooks {
            reference: Some(reference),
            ..Default::default()
        }
    }

    pub(crate) fn start(&self, ds: &Dataset, p: &ProblemParams) -> Result<Iterate> {
        match &self.initial {
            None => Ok(Iterate::initial(ds, p, GammaInit::default())),
            Some(u) => {
                if u.beta.len() != ds.d() || u.gamma.len() != ds.n() {
                    return Err(Error::Shape("initial iterate does not match the dataset".into()));
                }
                let mut u = u.clone();
                crate::geometry::project_joint_in_place(&mut u, p.cone());
                Ok(u)
            }
        }
    }
}

/// One checkpoint of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    pub data_passes: f64,
    pub component_evals: u64,
    /// `f(λ, β) − f*` at the reported point; NaN without a reference.
    pub subopt: f64,
    pub gap: Option<f64>,
    pub wall_ms: f64,
    /// `f(λ, β)` at the reported point.
    pub objective: f64,
    /// Suboptimality at the secondary point (epoch average for SEVR, last
    /// iterate for SPPRR and the subgradient methods).
    pub alt_subopt: Option<f64>,
}

/// Result of one solver run.
#[derive(Clone, Debug)]
pub struct SolverTrace {
    pub algo: Algo,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// Last raw iterate.
    pub final_iterate: Iterate,
    /// The method's averaged output (SEVR: last epoch average; SPPRR: average
    /// of all iterates; SG/SSG: running average). Equal to `final_iterate`
    /// for methods without averaging.
    pub averaged_iterate: Iterate,
}

impl SolverTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace always has a final record")
    }

    /// Data passes of the first checkpoint with `subopt ≤ threshold`.
    pub fn passes_to(&self, threshold: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.subopt <= threshold)
            .map(|r| r.data_passes)
    }

    /// Suboptimality of the last checkpoint at or before `passes`.
    pub fn subopt_at(&self, passes: f64) -> Option<f64> {
        self.records
            .iter()
            .take_while(|r| r.data_passes <= passes + 1e-12)
            .last()
            .map(|r| r.subopt)
    }
}

/// Evaluation counter and checkpoint writer.
pub(crate) struct Recorder<'a> {
    algo: Algo,
    ds: &'a Dataset,
    p: &'a ProblemParams,
    reference: Option<&'a ReferenceSolution>,
    n: u64,
    every: f64,
    next_index: u64,
    next_at: u64,
    budget: Option<u64>,
    evals: u64,
    start: Instant,
    records: Vec<TraceRecord>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        algo: Algo,
        ds: &'a Dataset,
        p: &'a ProblemParams,
        hooks: &EvalHooks<'a>,
        every: f64,
    ) -> Result<Self> {
        if ds.n() == 0 {
            return Err(Error::Domain("solver run on an empty dataset".into()));
        }
        if !(every > 0.0 && every.is_finite()) {
            return Err(Error::Config(format!(
                "checkpoint interval must be positive, got {every}"
            )));
        }
        if let Some(r) = hooks.reference {
            if r.beta_star.len() != ds.d() || r.gamma_star.len() != ds.n() {
                return Err(Error::State("reference solution does not match the dataset".into()));
            }
        }
        let n = ds.n() as u64;
        let budget = match hooks.max_passes {
            Some(m) if !(m > 0.0) => return Err(Error::Config(format!("max_passes must be positive, got {m}"))),
            Some(m) => Some((m * n as f64).ceil() as u64),
            None => None,
        };
        Ok(Recorder {
            algo,
            ds,
            p,
            reference: hooks.reference,
            n,
            every,
            next_index: 0,
            next_at: 0,
            budget,
            evals: 0,
            start: Instant::now(),
            records: Vec::new(),
        })
    }

    #[inline]
    pub(crate) fn add(&mut self, k: u64) {
        self.evals += k;
    }

    pub(crate) fn evals(&self) -> u64 {
        self.evals
    }

    #[inline]
    pub(crate) fn due(&self) -> bool {
        self.evals >= self.next_at
    }

    /// True once the pass budget is spent.
    #[inline]
    pub(crate) fn exhausted(&self) -> bool {
        self.budget.is_some_and(|b| self.evals >= b)
    }

    fn subopt_of(&self, lambda: f64, beta: &[f64]) -> Result<f64> {
        match self.reference {
            Some(r) => suboptimality(lambda, beta, self.ds, self.p, r),
            None => Ok(f64::NAN),
        }
    }

    /// Records a checkpoint at `point`; `alt` is the secondary point.
    pub(crate) fn record(&mut self, epoch: usize, point: &Iterate, alt: Option<&Iterate>) -> Result<()> {
        if self.records.last().is_some_and(|r| r.component_evals == self.evals) {
            return Ok(());
        }
        self.check(point)?;
        if let Some(a) = alt {
            self.check(a)?;
        }
        let objective = convex_objective_f(point.lambda, &point.beta, self.ds, self.p)?;
        let subopt = self.subopt_of(point.lambda, &point.beta)?;
        let gap = match self.reference {
            Some(r) => Some(duality_gap(point, r, self.ds, self.p)?),
            None => None,
        };
        let alt_subopt = match alt {
            Some(a) if self.reference.is_some() => Some(self.subopt_of(a.lambda, &a.beta)?),
            _ => None,
        };
        self.records.push(TraceRecord {
            epoch,
            data_passes: self.evals as f64 / self.n as f64,
            component_evals: self.evals,
            subopt,
            gap,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
            objective,
            alt_subopt,
        });
        while self.next_at <= self.evals {
            self.next_index += 1;
            self.next_at = (self.next_index as f64 * self.every * self.n as f64).ceil() as u64;
        }
        Ok(())
    }

    fn check(&self, u: &Iterate) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Divergence(format!(
                "{}: non-finite iterate after {} component evaluations",
                self.algo, self.evals
            )));
        }
        let l = objective_l(u, self.ds, self.p)?;
        if !l.is_finite() || l.abs() > DIVERGENCE_BOUND {
            return Err(Error::Divergence(format!(
                "{}: |L| = {l:e} after {} component evaluations",
                self.algo, self.evals
            )));
        }
        if !u.is_feasible(self.p.cone(), FEASIBILITY_TOL) {
            return Err(Error::State(format!(
                "{}: infeasible iterate after {} component evaluations",
                self.algo, self.evals
            )));
        }
        Ok(())
    }

    pub(crate) fn finish(
        mut self,
        epoch: usize,
        point: &Iterate,
        alt: Option<&Iterate>,
        seed: u64,
        final_iterate: Iterate,
        averaged_iterate: Iterate,
    ) -> Result<SolverTrace> {
        self.record(epoch, point, alt)?;
        Ok(SolverTrace {
            algo: self.algo,
            seed,
            records: self.records,
            final_iterate,
            averaged_iterate,
        })
    }
}

/// Completes a primal point `(λ, β)` to a joint iterate with the best-response γ.
pub(crate) fn primal_point(lambda: f64, beta: &[f64], ds: &Dataset, p: &ProblemParams) -> Iterate {
    Iterate {
        lambda,
        beta: beta.to_vec(),
        gamma: best_response_gamma(lambda, beta, ds, p),
    }
}

/// Running uniform average of `λ`, `β` and a lazily maintained `γ`.
///
/// Callers that change only a few γ coordinates per step report them with
/// [`LazyAverage::touch`] before the change, so the cost per step is
/// `O(d + touched)` instead of `O(d + n)`.
pub(crate) struct LazyAverage {
    count: u64,
    lambda_sum: f64,
    beta_sum: Vec<f64>,
    gamma_sum: Vec<f64>,
    gamma_since: Vec<u64>,
}

impl LazyAverage {
    pub(crate) fn new(d: usize, n: usize) -> Self {
        LazyAverage {
            count: 0,
            lambda_sum: 0.0,
            beta_sum: vec![0.0; d],
            gamma_sum: vec![0.0; n],
            gamma_since: vec![0; n],
        }
    }

    /// Flushes the contribution of γⱼ held constant since its last touch.
    #[inline]
    pub(crate) fn touch(&mut self, j: usize, gamma_j: f64) {
        let held = self.count - self.gamma_since[j];
        self.gamma_sum[j] += held as f64 * gamma_j;
        self.gamma_since[j] = self.count;
    }

    /// Adds the current `(λ, β)` as one more sample; γ is accounted lazily.
    #[inline]
    pub(crate) fn push_primal(&mut self, lambda: f64, beta: &[f64]) {
        self.count += 1;
        self.lambda_sum += lambda;
        for (s, b) in self.beta_sum.iter_mut().zip(beta) {
            *s += b;
        }
    }

    /// The average so far, given the current γ.
    pub(crate) fn mean(&self, gamma: &[f64]) -> Option<Iterate> {
        if self.count == 0 {
            return None;
        }
        let c = self.count as f64;
        Some(Iterate {
            lambda: self.lambda_sum / c,
            beta: self.beta_sum.iter().map(|s| s / c).collect(),
            gamma: self
                .gamma_sum
                .iter()
                .zip(&self.gamma_since)
                .zip(gamma)
                .map(|((s, &since), g)| (s + (self.count - since) as f64 * g) / c)
                .collect(),
        })
    }
}
