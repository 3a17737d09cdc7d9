use fulladagrad::data::{make_toeplitz_cov, replication_rng, GaussianLinearSource};
use fulladagrad::linalg::{frobenius_distance, inv_sqrt_eig};
use fulladagrad::{
    LinearRegression, Model, PowerSchedule, PrecondMode, PrecondState, SymMatrix, Vector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn defaults(d: usize) -> PrecondState<f64> {
    PrecondState::new(
        d,
        0.1,
        PowerSchedule::decay(1.0, 0.75).unwrap(),
        PowerSchedule::growth(1.0, 0.75).unwrap(),
        2.0,
    )
    .unwrap()
}

fn gaussian(d: usize, rng: &mut ChaCha8Rng) -> Vector<f64> {
    Vector::from_fn(d, |_| StandardNormal.sample(rng))
}

#[test]
fn averaged_matrix_matches_unrolled_recursion() {
    let mut s = defaults(3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut history = vec![];
    for _ in 0..25 {
        s.rm_update(&gaussian(3, &mut rng), 1).unwrap();
        history.push(s.current().clone());
    }
    // closed form: weight ln(j)^2 on the j-th produced matrix
    let weights: Vec<f64> = (1..=history.len())
        .map(|j| (j as f64).ln().powi(2))
        .collect();
    let total: f64 = weights.iter().sum();
    let expected = SymMatrix::from_fn(3, |i, j| {
        history
            .iter()
            .zip(&weights)
            .map(|(m, w)| w * m.get(i, j))
            .sum::<f64>()
            / total
    })
    .unwrap();
    assert!(
        s.effective_matrix(PrecondMode::Averaged)
            .max_abs_diff(&expected)
            .unwrap()
            < 1e-12
    );
    assert_eq!(
        s.effective_matrix(PrecondMode::Current),
        history.last().unwrap()
    );
}

#[test]
fn fresh_state_modes_agree() {
    let s = defaults(4);
    let a0 = SymMatrix::scaled_identity(4, 0.1).unwrap();
    assert_eq!(s.effective_matrix(PrecondMode::Current), &a0);
    assert_eq!(s.effective_matrix(PrecondMode::Averaged), &a0);
}

#[test]
fn eigen_bounds_hold_every_step_on_gaussian_gradients() {
    let mut s = defaults(5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        s.rm_update(&gaussian(5, &mut rng), 1).unwrap();
        let r = s.check_eigen_bounds();
        assert!(r.holds(), "{r:?}");
    }
    assert!(s.skipped_updates() > 0);
}

#[test]
fn eigen_bounds_hold_with_heavy_gradients_and_blocks() {
    let mut s = defaults(3).with_invariant_checks(true);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..3000 {
        let mut g = gaussian(3, &mut rng);
        g.scale(if k % 7 == 0 { 30.0 } else { 2.0 });
        s.rm_update(&g, 1 + k % 5).unwrap();
    }
}

#[test]
fn identical_inputs_give_identical_states() {
    let run = || {
        let mut s = defaults(4);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            s.rm_update(&gaussian(4, &mut rng), 1).unwrap();
        }
        s
    };
    assert_eq!(run(), run());
}

#[test]
fn estimate_approaches_inverse_sqrt_covariance() {
    // gradients at theta*: g = -eps x with covariance Sigma_X
    let d = 3;
    let cov = make_toeplitz_cov(d, 0.5).unwrap();
    let theta_star = Vector::from_vec(vec![1.0, -0.5, 0.25]);
    let src =
        GaussianLinearSource::new(theta_star.clone(), &cov, 1.0, replication_rng(3, 0)).unwrap();
    let target = inv_sqrt_eig(&cov).unwrap();
    let mut s = defaults(d);
    let start = frobenius_distance(s.averaged(), &target).unwrap();
    for sample in src.take(50_000) {
        s.rm_update(&LinearRegression.grad(&theta_star, &sample).unwrap(), 1)
            .unwrap();
    }
    let end = frobenius_distance(s.averaged(), &target).unwrap();
    assert!(
        end < 0.15 * target.frobenius_norm(),
        "start {start}, end {end}"
    );
}
