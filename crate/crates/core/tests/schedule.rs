mod common;

use common::check_schedules;
use drsl_core::solvers::{estimate_component_bound, sevr_theory_schedule, spprr_theory_schedule, TheoryScheduleInputs};
use drsl_core::ProblemParams;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schedules_satisfy_their_inequalities(
        d_u in 0.1..20.0f64,
        d_l in 0.01..50.0f64,
        eps in 1e-4..0.99f64,
        g in 0.1..10.0f64,
        n in 1usize..100_000,
        kappa in 0.1..5.0f64,
    ) {
        let p = ProblemParams::new(0.1, kappa, drsl_core::LinkFunction::CanonicalLogistic).unwrap();
        let inputs = TheoryScheduleInputs { d_u, d_l, epsilon: eps, g };
        prop_assert_eq!(check_schedules(&inputs, n, &p), Ok(()));
    }
}

#[test]
fn documented_substitutions() {
    let p = ProblemParams::default();
    let inputs = TheoryScheduleInputs {
        d_u: 1.0,
        d_l: 1.0,
        epsilon: 0.1,
        g: 1.0,
    };
    assert_eq!(sevr_theory_schedule(&inputs, &p).unwrap().epochs, 7);
    let bad = TheoryScheduleInputs { epsilon: 1.0, ..inputs };
    assert!(sevr_theory_schedule(&bad, &p).is_err());
    assert!(spprr_theory_schedule(&bad, 10, &p).is_err());
}

#[test]
fn component_bound_dominates_sampled_norms() {
    let ds = common::synth(30, 4, 1);
    let p = ProblemParams::default();
    let g = estimate_component_bound(&ds, &p, 100, 10.0, 0).unwrap();
    // the λ entry of a component is δ wherever γᵢ = −1
    assert!(g.is_finite() && g >= p.delta);
    let g2 = estimate_component_bound(&ds, &p, 100, 10.0, 0).unwrap();
    assert_eq!(g, g2);
    assert!(estimate_component_bound(&ds, &p, 10, 0.0, 0).is_err());
}
