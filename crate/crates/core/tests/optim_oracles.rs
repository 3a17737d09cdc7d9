//! Optimizer traces checked against independent 2-d re-implementations
//! written with plain arrays.

use fulladagrad::data::{
    make_toeplitz_cov, replication_rng, sample_theta_star, GaussianLinearSource,
};
use fulladagrad::linalg::{kernel_counts, reset_kernel_counts};
use fulladagrad::optim::record_trajectory;
use fulladagrad::{
    run_optimizer, GradientBlock, LabeledSample, LinearRegression, Model, OptimizerConfig,
    OptimizerKind, OptimizerState, PrecondMode, SymMatrix, Vector,
};

type M2 = [[f64; 2]; 2];

fn mv(a: &M2, g: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * g[0] + a[0][1] * g[1],
        a[1][0] * g[0] + a[1][1] * g[1],
    ]
}

/// One truncated Robbins-Monro step, written out longhand.
fn rm_step(a: &mut M2, g: [f64; 2], n: f64, t: usize) {
    let step = (t + 1) as f64;
    let gamma = step.powf(-0.75);
    let beta = step.powf(0.75);
    let ag = mv(a, g);
    let q = n * (g[0] * ag[0] + g[1] * ag[1]);
    if q <= beta {
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                a[i][j] -= gamma * (n * ag[i] * ag[j] - id);
            }
        }
    }
}

fn log_coef(t: usize, tau: f64) -> f64 {
    let w = |k: usize| ((k + 1) as f64).ln().powf(tau);
    let s: f64 = (0..=t).map(w).sum();
    if s == 0.0 {
        0.0
    } else {
        w(t) / s
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn v(x: [f64; 2]) -> Vector<f64> {
    Vector::from_vec(x.to_vec())
}

#[test]
fn full_adagrad_matches_unrolled_trace() {
    let grads = [[0.4, -0.3], [1.2, 0.8], [-0.5, 0.9]];
    let mut s = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::FullAdagrad, 1).unwrap(),
        v([1.0, -1.0]),
    )
    .unwrap();
    let mut theta = [1.0, -1.0];
    let mut a: M2 = [[0.1, 0.0], [0.0, 0.1]];
    for (t, g) in grads.iter().enumerate() {
        s.step(&GradientBlock::single(v(*g))).unwrap();
        let nu = ((t + 1) as f64).powf(-0.75);
        let ag = mv(&a, *g);
        theta = [theta[0] - nu * ag[0], theta[1] - nu * ag[1]];
        rm_step(&mut a, *g, 1.0, t);
        assert!(close(s.theta().as_slice(), &theta, 1e-14));
        let got = s.precond().unwrap().current();
        assert!(close(
            got.as_slice(),
            &[a[0][0], a[0][1], a[1][0], a[1][1]],
            1e-14
        ));
    }
}

/// Longhand WAFA/SWAFA with the averaged preconditioner in the parameter step.
struct WafaOracle {
    theta: [f64; 2],
    theta_avg: [f64; 2],
    a: M2,
    a_avg: M2,
    t: usize,
    n: f64,
    c_nu: f64,
}

impl WafaOracle {
    fn new(theta0: [f64; 2], n: f64) -> Self {
        let a = [[0.1, 0.0], [0.0, 0.1]];
        Self {
            theta: theta0,
            theta_avg: theta0,
            a,
            a_avg: a,
            t: 0,
            n,
            c_nu: n.sqrt(),
        }
    }

    fn step(&mut self, g: [f64; 2], g_avg: [f64; 2]) {
        let nu = self.c_nu * ((self.t + 1) as f64).powf(-0.75);
        let dir = mv(&self.a_avg, g);
        self.theta = [self.theta[0] - nu * dir[0], self.theta[1] - nu * dir[1]];
        let c = log_coef(self.t, 2.0);
        for i in 0..2 {
            self.theta_avg[i] = (1.0 - c) * self.theta_avg[i] + c * self.theta[i];
        }
        rm_step(&mut self.a, g_avg, self.n, self.t);
        for i in 0..2 {
            for j in 0..2 {
                self.a_avg[i][j] = (1.0 - c) * self.a_avg[i][j] + c * self.a[i][j];
            }
        }
        self.t += 1;
    }

    fn check(&self, s: &OptimizerState<f64>) {
        let flat = |m: &M2| [m[0][0], m[0][1], m[1][0], m[1][1]];
        assert!(close(s.theta().as_slice(), &self.theta, 1e-13));
        assert!(close(s.theta_avg().as_slice(), &self.theta_avg, 1e-13));
        let p = s.precond().unwrap();
        assert!(close(p.current().as_slice(), &flat(&self.a), 1e-13));
        assert!(close(p.averaged().as_slice(), &flat(&self.a_avg), 1e-13));
    }
}

#[test]
fn wafa_matches_unrolled_trace() {
    let pairs = [
        ([0.4, -0.3], [0.5, -0.2]),
        ([1.2, 0.8], [0.9, 0.7]),
        ([-0.5, 0.9], [-0.6, 1.0]),
    ];
    let mut s = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Wafa, 1).unwrap(),
        v([1.0, -1.0]),
    )
    .unwrap();
    let mut o = WafaOracle::new([1.0, -1.0], 1.0);
    for (g, ga) in pairs {
        s.step(&GradientBlock::with_averaged(v(g), v(ga), 1))
            .unwrap();
        o.step(g, ga);
        o.check(&s);
    }
}

#[test]
fn swafa_block_matches_unrolled_trace() {
    // d = 2, n = 2, linear model on scripted samples
    let samples = [
        ([1.0, 0.5], 0.3),
        ([-0.4, 1.1], -1.0),
        ([0.2, -0.9], 0.8),
        ([1.5, 0.1], 1.2),
        ([-0.3, -0.3], 0.0),
        ([0.7, 0.6], -0.4),
    ];
    let data: Vec<LabeledSample<f64>> = samples
        .iter()
        .map(|(x, y)| LabeledSample::new(v(*x), *y))
        .collect();
    let cfg = OptimizerConfig::defaults(OptimizerKind::Swafa, 2).unwrap();
    let mut s = OptimizerState::new(cfg, v([0.5, 0.5])).unwrap();
    let mut o = WafaOracle::new([0.5, 0.5], 2.0);
    let grad = |theta: [f64; 2], (x, y): ([f64; 2], f64)| {
        let r = x[0] * theta[0] + x[1] * theta[1] - y;
        [r * x[0], r * x[1]]
    };
    for pair in samples.chunks(2) {
        let mean = |th: [f64; 2]| {
            let a = grad(th, pair[0]);
            let b = grad(th, pair[1]);
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        };
        o.step(mean(o.theta), mean(o.theta_avg));
    }
    run_optimizer(&mut s, &data, &LinearRegression, 3, |_| {}).unwrap();
    o.check(&s);
    assert_eq!(s.samples_seen(), 6);
}

fn linear_stream(seed: u64, d: usize, rho: f64) -> (Vector<f64>, GaussianLinearSource<f64>) {
    let mut rng = replication_rng(seed, 0);
    let theta_star = sample_theta_star(d, &mut rng);
    let cov = make_toeplitz_cov(d, rho).unwrap();
    let src = GaussianLinearSource::new(theta_star.clone(), &cov, 1.0, rng).unwrap();
    (theta_star, src)
}

#[test]
fn collapsed_wafa_equals_full_adagrad_bitwise() {
    let mut cfg = OptimizerConfig::defaults(OptimizerKind::Wafa, 1).unwrap();
    cfg.tau = 0.0;
    cfg.tau_prime = 0.0;
    cfg.precond_mode = PrecondMode::Current;
    cfg.grad_reuse = true;
    let theta0 = Vector::zeros(4);
    let mut wafa = OptimizerState::new(cfg, theta0.clone()).unwrap();
    let mut full = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::FullAdagrad, 1).unwrap(),
        theta0,
    )
    .unwrap();
    let (_, src) = linear_stream(9, 4, 0.5);
    for sample in src.take(2000) {
        let gw = wafa.gradient_block(&LinearRegression, &[&sample]).unwrap();
        let gf = full.gradient_block(&LinearRegression, &[&sample]).unwrap();
        wafa.step(&gw).unwrap();
        full.step(&gf).unwrap();
        assert_eq!(wafa.theta(), full.theta());
    }
    assert_ne!(wafa.estimate(), full.estimate());
}

#[test]
fn swafa_with_unit_blocks_equals_wafa() {
    let (_, src) = linear_stream(21, 3, 0.9);
    let data: Vec<_> = src.take(3000).collect();
    let theta0 = Vector::from_vec(vec![0.5, -0.5, 1.0]);
    let mut wafa = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Wafa, 1).unwrap(),
        theta0.clone(),
    )
    .unwrap();
    let mut swafa = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Swafa, 1).unwrap(),
        theta0,
    )
    .unwrap();
    for s in &data {
        let b = wafa
            .gradient_block(&LinearRegression, std::slice::from_ref(s))
            .unwrap();
        wafa.step(&b).unwrap();
        let b = swafa
            .gradient_block(&LinearRegression, std::slice::from_ref(s))
            .unwrap();
        swafa.step(&b).unwrap();
        assert!(wafa.theta().max_abs_diff(swafa.theta()).unwrap() <= 1e-10);
        assert!(wafa.theta_avg().max_abs_diff(swafa.theta_avg()).unwrap() <= 1e-10);
        let (pw, ps) = (wafa.precond().unwrap(), swafa.precond().unwrap());
        assert!(pw.current().max_abs_diff(ps.current()).unwrap() <= 1e-10);
        assert!(pw.averaged().max_abs_diff(ps.averaged()).unwrap() <= 1e-10);
    }
}

#[test]
fn diagonal_accumulator_is_monotone() {
    let (_, src) = linear_stream(4, 5, 0.9);
    let mut s = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Waa, 1).unwrap(),
        Vector::zeros(5),
    )
    .unwrap();
    let mut prev = Vector::zeros(5);
    run_optimizer(&mut s, src, &LinearRegression, 500, |st| {
        let acc = st.diag_accum().unwrap();
        assert!(acc.iter().zip(prev.iter()).all(|(a, p)| a >= p));
        prev = acc.clone();
    })
    .unwrap();
}

#[test]
fn stepping_path_uses_only_quadratic_kernels() {
    let (_, src) = linear_stream(5, 6, 0.9);
    let data: Vec<_> = src.take(64).collect();
    for kind in OptimizerKind::ALL {
        for (mode, reuse) in [
            (PrecondMode::Averaged, false),
            (PrecondMode::Current, true),
            (PrecondMode::Current, false),
        ] {
            let n = if kind == OptimizerKind::Swafa { 4 } else { 1 };
            let mut cfg = OptimizerConfig::defaults(kind, n).unwrap();
            cfg.precond_mode = mode;
            cfg.grad_reuse = reuse;
            let mut s = OptimizerState::new(cfg, Vector::zeros(6)).unwrap();
            for block in data.chunks(n).take(10) {
                let b = s.gradient_block(&LinearRegression, block).unwrap();
                reset_kernel_counts();
                s.step(&b).unwrap();
                let k = kernel_counts();
                assert_eq!(k.cubic, 0, "{kind}");
                assert!(
                    k.quadratic <= 6,
                    "{kind}: {} quadratic kernels",
                    k.quadratic
                );
                if !kind.is_full() {
                    assert_eq!(k.quadratic, 0, "{kind}");
                }
            }
        }
    }
}

#[test]
fn empty_run_keeps_initial_state() {
    let mut s = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Wafa, 1).unwrap(),
        v([1.0, 2.0]),
    )
    .unwrap();
    let before = s.clone();
    let points = record_trajectory(
        &mut s,
        std::iter::empty::<LabeledSample<f64>>(),
        &LinearRegression,
        0,
        1,
        true,
    )
    .unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0].step, 0);
    assert_eq!(s, before);
}

#[test]
fn exhausted_stream_is_reported() {
    let mut s = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Sgd, 1).unwrap(),
        v([0.0, 0.0]),
    )
    .unwrap();
    let data = vec![LabeledSample::new(v([1.0, 0.0]), 1.0); 3];
    let err = run_optimizer(&mut s, &data, &LinearRegression, 5, |_| {}).unwrap_err();
    assert!(matches!(
        err,
        fulladagrad::Error::StreamExhausted {
            completed: 3,
            requested: 5
        }
    ));
}

/// Exact gradient of F(theta) = theta^2 / 2 presented as a "sample".
struct Quadratic;

impl Model<f64> for Quadratic {
    fn loss(&self, theta: &Vector<f64>, _: &LabeledSample<f64>) -> fulladagrad::Result<f64> {
        Ok(0.5 * theta.norm_sq())
    }

    fn accumulate_grad(
        &self,
        theta: &Vector<f64>,
        _: &LabeledSample<f64>,
        w: f64,
        out: &mut Vector<f64>,
    ) -> fulladagrad::Result<()> {
        out.axpy(w, theta)
    }
}

#[test]
fn sgd_on_exact_quadratic_contracts() {
    let dummy = LabeledSample::new(Vector::zeros(1), 0.0);
    // nu_1 = 1 would land on the optimum in one step
    let mut cfg = OptimizerConfig::defaults(OptimizerKind::Sgd, 1).unwrap();
    cfg.nu = fulladagrad::PowerSchedule::decay(0.5, 0.75).unwrap();
    let mut s = OptimizerState::new(cfg, Vector::from_vec(vec![3.0])).unwrap();
    let mut at = Vec::new();
    run_optimizer(&mut s, std::iter::repeat(&dummy), &Quadratic, 1000, |st| {
        if [10, 100, 1000].contains(&st.steps()) {
            at.push(st.theta()[0].abs());
        }
    })
    .unwrap();
    assert_eq!(at.len(), 3);
    assert!(at[0] > at[1] && at[1] > at[2], "{at:?}");
}

#[test]
fn wafa_reduces_error_tenfold_on_simulated_linear_model() {
    let mut rng = replication_rng(2024, 0);
    let theta_star: Vector<f64> = sample_theta_star(5, &mut rng);
    let theta0 = Vector::zeros(5);
    let src = GaussianLinearSource::new(
        theta_star.clone(),
        &SymMatrix::identity(5).unwrap(),
        1.0,
        rng,
    )
    .unwrap();
    let mut s = OptimizerState::new(
        OptimizerConfig::defaults(OptimizerKind::Wafa, 1).unwrap(),
        theta0.clone(),
    )
    .unwrap();
    run_optimizer(&mut s, src, &LinearRegression, 10_000, |_| {}).unwrap();
    let start = theta0.sub(&theta_star).unwrap().norm();
    let end = s.theta_avg().sub(&theta_star).unwrap().norm();
    assert!(end < start / 10.0, "start {start}, end {end}");
}

#[test]
fn seeded_runs_are_identical() {
    let run = || {
        let (_, src) = linear_stream(77, 4, 0.9);
        let mut s = OptimizerState::new(
            OptimizerConfig::defaults(OptimizerKind::Wafa, 1).unwrap(),
            Vector::zeros(4),
        )
        .unwrap();
        record_trajectory(&mut s, src, &LinearRegression, 300, 50, true).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn single_precision_instantiation_runs() {
    let mut rng = replication_rng(1, 0);
    let theta_star: Vector<f32> = sample_theta_star(3, &mut rng);
    let src = GaussianLinearSource::new(
        theta_star.clone(),
        &SymMatrix::identity(3).unwrap(),
        1.0f32,
        rng,
    )
    .unwrap();
    let mut s = OptimizerState::new(
        OptimizerConfig::<f32>::defaults(OptimizerKind::Wafa, 1).unwrap(),
        Vector::zeros(3),
    )
    .unwrap();
    run_optimizer(&mut s, src, &LinearRegression, 5000, |_| {}).unwrap();
    let err = s.theta_avg().sub(&theta_star).unwrap().norm();
    assert!(err.is_finite() && err < 0.2, "f32 error {err}");
}
