mod common;

use common::{random_feasible, random_point, rng, synth, toy};
use drsl_core::model::{
    best_response_gamma, component_operator, convex_objective_f, convex_subgradient, full_operator, objective_l,
};
use drsl_core::{Iterate, LinkFunction, OperatorValue, ProblemParams};
use proptest::prelude::*;

fn params(link: LinkFunction, delta: f64, kappa: f64) -> ProblemParams {
    ProblemParams::new(delta, kappa, link).unwrap()
}

fn link() -> impl Strategy<Value = LinkFunction> {
    prop_oneof![
        Just(LinkFunction::CanonicalLogistic),
        Just(LinkFunction::SymmetricLogistic)
    ]
}

fn diff(a: &Iterate, b: &Iterate) -> f64 {
    a.distance(b)
}

fn inner(f: &OperatorValue, g: &OperatorValue, u: &Iterate, v: &Iterate) -> f64 {
    let mut s = (f.d_lambda - g.d_lambda) * (u.lambda - v.lambda);
    for j in 0..u.beta.len() {
        s += (f.d_beta[j] - g.d_beta[j]) * (u.beta[j] - v.beta[j]);
    }
    for i in 0..u.gamma.len() {
        s += (f.d_gamma[i] - g.d_gamma[i]) * (u.gamma[i] - v.gamma[i]);
    }
    s
}

/// `(∂λ L, ∇β L, −∇γ L)` by central differences.
fn fd_operator(u: &Iterate, ds: &drsl_core::Dataset, p: &ProblemParams, h: f64) -> OperatorValue {
    let l = |v: &Iterate| objective_l(v, ds, p).unwrap();
    let mut out = OperatorValue::zeros(ds.d(), ds.n());
    let mut v = u.clone();
    v.lambda = u.lambda + h;
    let lp = l(&v);
    v.lambda = u.lambda - h;
    out.d_lambda = (lp - l(&v)) / (2.0 * h);
    v.lambda = u.lambda;
    for j in 0..ds.d() {
        v.beta[j] = u.beta[j] + h;
        let lp = l(&v);
        v.beta[j] = u.beta[j] - h;
        out.d_beta[j] = (lp - l(&v)) / (2.0 * h);
        v.beta[j] = u.beta[j];
    }
    for i in 0..ds.n() {
        v.gamma[i] = u.gamma[i] + h;
        let lp = l(&v);
        v.gamma[i] = u.gamma[i] - h;
        out.d_gamma[i] = -(lp - l(&v)) / (2.0 * h);
        v.gamma[i] = u.gamma[i];
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_matches_finite_differences(seed in any::<u64>(), link in link()) {
        let ds = synth(20, 5, seed);
        let p = params(link, 0.1, 1.0);
        let mut r = rng(seed);
        let u = random_feasible(&mut r, &ds, &p, 5.0);
        let f = full_operator(&u, &ds, &p).unwrap();
        let fd = fd_operator(&u, &ds, &p, 1e-6);
        prop_assert!(f.distance(&fd) <= 1e-5 * f.norm().max(1e-3));
    }

    #[test]
    fn components_average_to_full_operator(seed in any::<u64>(), link in link(), kappa in 0.1..5.0f64) {
        let ds = synth(15, 4, seed);
        let p = params(link, 0.2, kappa);
        let u = random_point(&mut rng(seed), &ds, 3.0);
        let f = full_operator(&u, &ds, &p).unwrap();
        let mut avg = OperatorValue::zeros(ds.d(), ds.n());
        for i in 0..ds.n() {
            avg.add_component(1.0 / ds.n() as f64, &component_operator(&u, i, &ds, &p).unwrap(), &ds);
        }
        prop_assert!(avg.distance(&f) <= 1e-10);
    }

    #[test]
    fn monotone_and_lipschitz(seed in any::<u64>(), link in link(), kappa in 0.1..5.0f64) {
        let ds = synth(15, 4, seed);
        let p = params(link, 0.1, kappa);
        let mut r = rng(seed);
        let u = random_feasible(&mut r, &ds, &p, 10.0);
        let v = random_feasible(&mut r, &ds, &p, 10.0);
        let (fu, fv) = (full_operator(&u, &ds, &p).unwrap(), full_operator(&v, &ds, &p).unwrap());
        prop_assert!(inner(&fu, &fv, &u, &v) >= -1e-10);
        let lip = p.operator_lipschitz();
        prop_assert!(fu.distance(&fv) <= lip * diff(&u, &v) * (1.0 + 1e-12));
        for i in 0..ds.n() {
            let cu = component_operator(&u, i, &ds, &p).unwrap().to_dense(&ds);
            let cv = component_operator(&v, i, &ds, &p).unwrap().to_dense(&ds);
            prop_assert!(inner(&cu, &cv, &u, &v) >= -1e-10);
            prop_assert!(cu.distance(&cv) <= lip * diff(&u, &v) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn best_response_recovers_convex_primal(seed in any::<u64>(), link in link(), delta in 0.0..1.0f64, kappa in 0.1..3.0f64) {
        let ds = synth(25, 6, seed);
        let p = params(link, delta, kappa);
        let mut r = rng(seed);
        // small λ so that some hinges are active
        let u = random_feasible(&mut r, &ds, &p, 0.5);
        let g = best_response_gamma(u.lambda, &u.beta, &ds, &p);
        let l = objective_l(&Iterate { gamma: g.clone(), ..u.clone() }, &ds, &p).unwrap();
        let f = convex_objective_f(u.lambda, &u.beta, &ds, &p).unwrap();
        prop_assert!((l - f).abs() <= 1e-10);
        // no other γ does better
        prop_assert!(objective_l(&u, &ds, &p).unwrap() <= l + 1e-12);
    }

    #[test]
    fn subgradient_inequality(seed in any::<u64>()) {
        let ds = synth(20, 4, seed);
        let p = ProblemParams::default();
        let mut r = rng(seed);
        let u = random_feasible(&mut r, &ds, &p, 2.0);
        let v = random_feasible(&mut r, &ds, &p, 2.0);
        let (gl, gb) = convex_subgradient(u.lambda, &u.beta, &ds, &p).unwrap();
        let fu = convex_objective_f(u.lambda, &u.beta, &ds, &p).unwrap();
        let fv = convex_objective_f(v.lambda, &v.beta, &ds, &p).unwrap();
        let lin: f64 = gl * (v.lambda - u.lambda) + gb.iter().zip(v.beta.iter().zip(&u.beta)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
        prop_assert!(fv >= fu + lin - 1e-12);
    }
}

#[test]
fn ties_leave_the_objective_unchanged() {
    // at β = 0 and λ = 0 every margin ties, so L does not depend on γ
    let (ds, p) = toy();
    let base = Iterate::zeros(ds.d(), ds.n());
    let l0 = objective_l(&base, &ds, &p).unwrap();
    for g in [-1.0, -0.3, 0.0, 0.7, 1.0] {
        let u = Iterate {
            gamma: vec![g; ds.n()],
            ..base.clone()
        };
        assert!((objective_l(&u, &ds, &p).unwrap() - l0).abs() < 1e-15);
    }
    assert_eq!(best_response_gamma(0.0, &[0.0, 0.0], &ds, &p), vec![0.0, 0.0]);
    let f = convex_objective_f(0.0, &[0.0, 0.0], &ds, &p).unwrap();
    assert!((f - l0).abs() < 1e-15);
}

#[test]
fn best_response_on_a_single_row() {
    let ds = drsl_core::Dataset::from_dense(&[vec![0.6, 0.0]], &[1.0]).unwrap();
    let p = ProblemParams::default();
    // y z − λκ = 0.6 − 0.5 > 0
    assert_eq!(best_response_gamma(0.5, &[1.0, 0.0], &ds, &p), vec![1.0]);
    assert_eq!(best_response_gamma(0.7, &[1.0, 0.0], &ds, &p), vec![-1.0]);
}
