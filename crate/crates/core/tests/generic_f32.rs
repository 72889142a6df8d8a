use recourse_core::adversary::Neighborhood;
use recourse_core::glm::{ModelParams, RecourseQuery};
use recourse_core::solver::{optimal_robust_recourse, SolverConfig};
use recourse_core::tradeoff::{blended_recourse, BlendConfig, TradeoffQuery};
use recourse_core::{ModelParamsF32, ModelParamsF64};

fn solve<T: recourse_core::Scalar>(base: ModelParams<T>) -> Vec<T> {
    let q = RecourseQuery::new(vec![T::zero()], T::from(0.1).unwrap()).unwrap();
    let n = Neighborhood::new(base, T::from(0.5).unwrap()).unwrap();
    optimal_robust_recourse(&q, &n, &SolverConfig::default())
        .unwrap()
        .x_prime
}

#[test]
fn single_and_double_precision_agree() {
    let x32 = solve(ModelParamsF32::without_intercept(vec![1.0]).unwrap());
    let x64 = solve(ModelParamsF64::without_intercept(vec![1.0]).unwrap());
    assert!((x64[0] - 2.772589).abs() < 1e-5);
    assert!((f64::from(x32[0]) - x64[0]).abs() < 1e-3);
}

#[test]
fn blend_runs_in_single_precision() {
    let q = RecourseQuery::new(vec![0.0f32, 0.0], 0.1).unwrap();
    let base = ModelParams::new(vec![1.0f32, 0.5], 0.0).unwrap();
    let tq = TradeoffQuery {
        query: q,
        neighborhood: Neighborhood::new(base.clone(), 0.3).unwrap(),
        prediction: ModelParams::new(vec![1.2f32, 0.6], 0.1).unwrap(),
        beta: 0.5,
    };
    let plan = blended_recourse(&tq, &BlendConfig::default()).unwrap();
    assert!(plan.x_prime.iter().all(|v| v.is_finite()));
    assert!(base.score(&plan.x_prime).unwrap() > 0.0);
}
