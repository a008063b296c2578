use boxreach::flow::{flow, InputSignal};
use boxreach::hub::{auto_method, run_method};
use boxreach::sensitivity::{bounds_via_sampling_falsification, SfOptions};
use boxreach::system::{ContractionData, FnField};
use boxreach::{solve, solve_all, IntervalBox, IntervalMatrix, Method, MethodChoice, ReachProblem, SolverConfig, SystemModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn metzler(a: DMatrix<f64>) -> SystemModel {
    let n = a.nrows();
    let (a2, a3) = (a.clone(), a.clone());
    let field = FnField::new(n, n, move |_, x, p, out| {
        let v = &a * DVector::from_column_slice(x) + DVector::from_column_slice(p);
        out.copy_from_slice(v.as_slice());
    })
    .with_jacobian(move |_, _, _, jx, jp| {
        jx.copy_from(&a2);
        jp.fill_with_identity();
    });
    SystemModel::continuous(field)
        .with_jacobian_bounds(IntervalMatrix::point(&a3), IntervalMatrix::identity(n))
        .unwrap()
        .with_contraction(ContractionData::matrix(a3))
        .unwrap()
        .with_additive_input()
        .unwrap()
}

prop_compose! {
    fn metzler_2x2()(d in prop::array::uniform2(-2.0..0.5f64), o in prop::array::uniform2(0.0..1.0f64)) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[d[0], o[0], o[1], d[1]])
    }
}

prop_compose! {
    fn small_box()(lo in prop::array::uniform2(-1.0..1.0f64), w in prop::array::uniform2(0.0..0.5f64)) -> IntervalBox {
        IntervalBox::new(lo.to_vec(), vec![lo[0] + w[0], lo[1] + w[1]]).unwrap()
    }
}

fn lerp(b: &IntervalBox, s: &[f64]) -> Vec<f64> {
    (0..b.dim()).map(|i| b.lower()[i] + s[i] * (b.upper()[i] - b.lower()[i])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_method_contains_sampled_successors(
        a in metzler_2x2(),
        x0 in small_box(),
        s in prop::collection::vec(prop::array::uniform4(0.0..=1.0f64), 20),
    ) {
        let p = IntervalBox::new(vec![0.0, -0.1], vec![0.2, 0.1]).unwrap();
        let sys = metzler(a);
        let prob = ReachProblem::continuous(0.0, 1.0, x0.clone(), p.clone()).with_steps(100);
        let report = solve_all(&sys, &prob, &SolverConfig::default()).unwrap();
        prop_assert!(report.skipped.iter().all(|k| !k.failed), "{:?}", report.skipped);
        prop_assert!(report.results.len() >= 4);
        for u in &s {
            let x = lerp(&x0, &u[..2]);
            let q = lerp(&p, &u[2..]);
            let y = flow(&sys, 0.0, 1.0, &x, InputSignal::Constant(&q), 100).unwrap();
            for r in &report.results {
                prop_assert!(r.over_approx.slack(&y) >= -1e-9, "{} misses {:?}", r.method, y);
            }
        }
    }

    #[test]
    fn nested_initial_boxes_give_nested_results(a in metzler_2x2(), x0 in small_box(), shrink in 0.0..0.5f64) {
        let p = IntervalBox::new(vec![0.0, 0.0], vec![0.1, 0.1]).unwrap();
        let (c, r) = x0.center_halfwidth();
        let inner = IntervalBox::new(
            c.iter().zip(&r).map(|(c, r)| c - shrink * r).collect(),
            c.iter().zip(&r).map(|(c, r)| c + shrink * r).collect(),
        ).unwrap();
        let sys = metzler(a);
        let cfg = SolverConfig::default();
        for m in [Method::GrowthBound, Method::CtMixedMono, Method::Monotone] {
            let outer = run_method(&sys, &ReachProblem::continuous(0.0, 1.0, x0.clone(), p.clone()), m, &cfg).unwrap();
            let small = run_method(&sys, &ReachProblem::continuous(0.0, 1.0, inner.clone(), p.clone()), m, &cfg).unwrap();
            for i in 0..2 {
                prop_assert!(small.over_approx.lower()[i] >= outer.over_approx.lower()[i] - 1e-9, "{}", m);
                prop_assert!(small.over_approx.upper()[i] <= outer.over_approx.upper()[i] + 1e-9, "{}", m);
            }
        }
    }
}

#[test]
fn auto_matches_the_explicit_choice() {
    let sys = metzler(DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.2, -2.0]));
    let prob = ReachProblem::continuous(0.0, 1.0, IntervalBox::uniform(2, 0.0, 1.0).unwrap(), IntervalBox::uniform(2, 0.0, 0.1).unwrap());
    let cfg = SolverConfig::default();
    let m = auto_method(&sys, &prob).unwrap();
    let auto = solve(&sys, &prob, MethodChoice::Auto, &cfg).unwrap();
    let explicit = solve(&sys, &prob, MethodChoice::Explicit(m), &cfg).unwrap();
    assert_eq!(auto.method, m);
    assert_eq!(auto.over_approx, explicit.over_approx);
    assert_eq!(auto.trajectory_evals, explicit.trajectory_evals);
}

#[test]
fn sampling_bounds_are_seed_deterministic() {
    let sys = metzler(DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.6, -0.5]));
    let prob = ReachProblem::continuous(0.0, 1.0, IntervalBox::uniform(2, -0.5, 0.5).unwrap(), IntervalBox::uniform(2, 0.0, 0.1).unwrap());
    let a = bounds_via_sampling_falsification(&sys, &prob, SfOptions::default()).unwrap();
    let b = bounds_via_sampling_falsification(&sys, &prob, SfOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn discrete_problems_only_get_discrete_methods() {
    let sys = SystemModel::discrete(FnField::new(1, 1, |_, x, p, out| out[0] = 0.5 * x[0] + p[0]))
        .with_jacobian_bounds(
            IntervalMatrix::point(&DMatrix::from_element(1, 1, 0.5)),
            IntervalMatrix::identity(1),
        )
        .unwrap();
    let prob = ReachProblem::discrete(0.0, IntervalBox::uniform(1, -1.0, 1.0).unwrap(), IntervalBox::uniform(1, 0.0, 1.0).unwrap());
    let report = solve_all(&sys, &prob, &SolverConfig::default()).unwrap();
    assert_eq!(report.results.len(), 1);
    assert_eq!(report.results[0].method, Method::DtMixedMono);
    assert_eq!(report.results[0].over_approx, IntervalBox::new(vec![-0.5], vec![1.5]).unwrap());
    assert!(run_method(&sys, &prob, Method::CtMixedMono, &SolverConfig::default()).is_err());
}
