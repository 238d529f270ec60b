use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use rmhmc::counting::CountingModel;
use rmhmc::integrators::{
    flow, glf_a_step, glf_b_step, im_a_step, im_b_step, integrate, leapfrog_step, IntegratorConfig,
    IntegratorKind,
};
use rmhmc::models::{reference_banana, Bundled, GaussianModel, HarmonicOscillator, ModelKind};
use rmhmc::sampler::sample_momentum;
use rmhmc::{hamiltonian, Error, PhasePoint, Stage, TargetModel};

fn one_step(eps: f64, tol: f64) -> IntegratorConfig {
    IntegratorConfig::new(eps, 1, tol)
}

fn cayley(a: f64) -> DMatrix<f64> {
    let c = 1.0 / (1.0 + a * a);
    DMatrix::from_row_slice(2, 2, &[c * (1.0 - a * a), c * 2.0 * a, -c * 2.0 * a, c * (1.0 - a * a)])
}

fn random_state<M: TargetModel>(model: &Bundled, as_model: &M, rng: &mut ChaCha20Rng) -> PhasePoint {
    let q = model.draw_probe(rng);
    let p = sample_momentum(as_model, &q, rng).unwrap();
    PhasePoint::new(q, p)
}

#[test]
fn leapfrog_recurrence_example() {
    let osc = HarmonicOscillator::default();
    let z = PhasePoint::from_slices(&[1.0], &[0.0]);
    let cfg = one_step(0.1, 1e-12);
    for step in [glf_a_step, glf_b_step, leapfrog_step] {
        let out = step(&osc, &z, &cfg).unwrap();
        assert_relative_eq!(out.point.q[0], 0.995, epsilon = 1e-15);
        assert_relative_eq!(out.point.p[0], -0.09975, epsilon = 1e-15);
        assert!(out.converged);
    }
}

#[test]
fn implicit_midpoint_is_the_cayley_map() {
    let osc = HarmonicOscillator::default();
    let z = PhasePoint::from_slices(&[1.0], &[0.0]);
    let cfg = one_step(0.1, 1e-15);
    for step in [im_a_step, im_b_step] {
        let out = step(&osc, &z, &cfg).unwrap().point;
        assert_relative_eq!(out.q[0], 0.9950124688279301, epsilon = 1e-14);
        assert_relative_eq!(out.p[0], -0.09975062344139652, epsilon = 1e-14);
        let norm_sq = out.q[0] * out.q[0] + out.p[0] * out.p[0];
        assert!((norm_sq - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn measured_linear_map_matches_cayley_matrix() {
    let osc = HarmonicOscillator::default();
    let eps = 0.7;
    let cfg = one_step(eps, 1e-15);
    let mut measured = DMatrix::zeros(2, 2);
    for (j, basis) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
        let out = im_a_step(&osc, &PhasePoint::from_slices(&[basis[0]], &[basis[1]]), &cfg).unwrap();
        measured.set_column(j, &out.point.to_vector());
    }
    let expected = cayley(eps / 2.0);
    assert!((&measured - &expected).amax() <= 1e-10);
    for ev in measured.complex_eigenvalues().iter() {
        assert!((ev.norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn zero_step_is_identity() {
    let banana = reference_banana();
    let z = PhasePoint::from_slices(&[0.3, 0.6], &[1.5, -2.0]);
    let cfg = one_step(0.0, 1e-9);
    for kind in [IntegratorKind::GlfA, IntegratorKind::GlfB, IntegratorKind::ImA, IntegratorKind::ImB] {
        let out = kind.step(&banana, &z, &cfg).unwrap();
        assert_eq!(out.point, z, "{kind}");
        assert!(out.converged);
    }
    let gauss = GaussianModel::reference();
    let out = leapfrog_step(&gauss, &z, &cfg).unwrap();
    assert_eq!(out.point, z);
}

#[test]
fn glf_reduces_to_leapfrog_for_constant_metric() {
    let gauss = GaussianModel::reference();
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let bundled = Bundled::Gaussian(gauss.clone());
    for _ in 0..20 {
        let z = random_state(&bundled, &gauss, &mut rng);
        for eps in [0.01, 0.1, 1.0] {
            let cfg = IntegratorConfig::new(eps, 10, 1e-14);
            let lf = flow(&gauss, &z, &cfg, IntegratorKind::Leapfrog).unwrap().point;
            let glf = flow(&gauss, &z, &cfg, IntegratorKind::GlfA).unwrap().point;
            assert!(lf.max_distance(&glf) <= 1e-12, "ε = {eps}");
        }
    }
}

#[test]
fn leapfrog_rejects_position_dependent_metric() {
    let banana = reference_banana();
    let z = PhasePoint::from_slices(&[0.3, 0.6], &[1.5, -2.0]);
    assert!(matches!(
        leapfrog_step(&banana, &z, &one_step(0.1, 1e-9)),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn variants_agree_on_banana() {
    let banana = Bundled::reference(ModelKind::Banana);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let cfg = one_step(0.1, 1e-12);
    let mut compared = 0;
    while compared < 100 {
        let z = random_state(&banana, &banana, &mut rng);
        let pairs = [(glf_a_step(&banana, &z, &cfg), glf_b_step(&banana, &z, &cfg)), (im_a_step(&banana, &z, &cfg), im_b_step(&banana, &z, &cfg))];
        for (a, b) in pairs {
            match (a, b) {
                (Ok(a), Ok(b)) => assert!(a.point.max_distance(&b.point) <= 1e-10),
                (Err(a), Err(b)) => assert_eq!(a.is_nonconvergence(), b.is_nonconvergence()),
                (a, b) => panic!("variants disagree on failure: {a:?} vs {b:?}"),
            }
        }
        compared += 1;
    }
}

#[test]
fn cached_leapfrog_evaluates_the_metric_less_often() {
    let banana = reference_banana();
    let z = PhasePoint::from_slices(&[0.4, 0.7], &[2.0, -1.0]);
    let cfg = one_step(0.1, 1e-6);
    let a = CountingModel::new(&banana);
    let b = CountingModel::new(&banana);
    glf_a_step(&a, &z, &cfg).unwrap();
    glf_b_step(&b, &z, &cfg).unwrap();
    assert!(b.counts().metric < a.counts().metric, "{:?} vs {:?}", b.counts(), a.counts());
}

#[test]
fn implicit_midpoint_conserves_quadratic_energy() {
    let gauss = GaussianModel::reference();
    let bundled = Bundled::Gaussian(gauss.clone());
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..50 {
        let z = random_state(&bundled, &gauss, &mut rng);
        let h0 = hamiltonian(&gauss, &z).unwrap();
        for eps in [0.01, 0.1, 1.0] {
            let out = im_a_step(&gauss, &z, &one_step(eps, 1e-13)).unwrap();
            let h1 = hamiltonian(&gauss, &out.point).unwrap();
            assert!((h1 - h0).abs() <= 1e-9, "ε = {eps}: {}", (h1 - h0).abs());
        }
    }
}

#[test]
fn implicit_midpoint_is_stable_at_unit_step() {
    let osc = HarmonicOscillator::default();
    let z = PhasePoint::from_slices(&[1.0], &[0.0]);
    let traj = integrate(&osc, &z, &IntegratorConfig::new(1.0, 1000, 1e-13), IntegratorKind::ImA).unwrap();
    for s in &traj.steps {
        let norm = s.point.to_vector().norm();
        assert!((0.99..=1.01).contains(&norm), "{norm}");
    }
}

#[test]
fn leapfrog_diverges_beyond_threshold() {
    let osc = HarmonicOscillator::default();
    let z = PhasePoint::from_slices(&[1.0], &[0.0]);
    let traj = integrate(&osc, &z, &IntegratorConfig::new(2.1, 1000, 0.0), IntegratorKind::Leapfrog);
    // The state overflows long before 1000 steps; either outcome shows divergence.
    let max_norm = match traj {
        Ok(t) => t.steps.iter().map(|s| s.point.to_vector().norm()).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    assert!(max_norm > 1e3);

    // Scalar recurrence: the leapfrog matrix has spectral radius (|2-ε²| + √((2-ε²)²-4)) / 2.
    let t: f64 = 2.0 - 2.1f64 * 2.1;
    let radius = (t.abs() + (t * t - 4.0).sqrt()) / 2.0;
    let traj = integrate(&osc, &z, &IntegratorConfig::new(2.1, 20, 0.0), IntegratorKind::Leapfrog).unwrap();
    let growth = (traj.steps[19].point.to_vector().norm() / traj.steps[9].point.to_vector().norm()).powf(0.1);
    assert_relative_eq!(growth, radius, max_relative = 1e-2);
}

#[test]
fn errors_carry_step_and_stage() {
    let osc = HarmonicOscillator::default();
    let z = PhasePoint::from_slices(&[1.0], &[0.0]);
    let err = flow(&osc, &z, &IntegratorConfig::new(3.0, 2, 1e-12), IntegratorKind::ImA).unwrap_err();
    match err {
        Error::TrajectoryFailed { step, source } => {
            assert_eq!(step, 0);
            assert!(matches!(*source, Error::StepFailed { stage: Stage::MidpointSolve, .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn single_step_trajectory_matches_step_call() {
    let banana = reference_banana();
    let z = PhasePoint::from_slices(&[0.2, 0.8], &[1.0, 3.0]);
    let cfg = one_step(0.05, 1e-10);
    for kind in [IntegratorKind::GlfA, IntegratorKind::GlfB, IntegratorKind::ImA, IntegratorKind::ImB] {
        let direct = kind.step(&banana, &z, &cfg).unwrap();
        let traj = integrate(&banana, &z, &cfg, kind).unwrap();
        assert_eq!(traj.steps.len(), 1);
        assert_eq!(traj.end(), &direct.point);
        assert_eq!(traj.last.fixed_point_iterations, direct.fixed_point_iterations);
    }
}

fn double_application(kind: IntegratorKind, model: &dyn TargetModel, z: &PhasePoint, cfg: &IntegratorConfig) -> Option<f64> {
    let forward = kind.step(model, z, cfg).ok()?.point;
    let back = kind.step(model, &forward.flipped(), cfg).ok()?.point.flipped();
    Some(z.max_distance(&back))
}

#[test]
fn momentum_negation_on_every_model() {
    let cfg = one_step(0.1, 1e-13);
    for kind in [ModelKind::Gaussian, ModelKind::Banana, ModelKind::Funnel, ModelKind::Logistic] {
        let model = Bundled::reference(kind);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..10 {
            let z = random_state(&model, &model, &mut rng);
            let err = double_application(IntegratorKind::ImA, &model, &z, &cfg).expect("im_a converges");
            assert!(err <= 1e-8, "{kind}: {err}");
            // Generalized leapfrog is symmetric too wherever its solves converge.
            if let Some(err) = double_application(IntegratorKind::GlfA, &model, &z, &cfg) {
                assert!(err <= 1e-8, "{kind} glf: {err}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oscillator_orbits_stay_on_circle(q in -3.0f64..3.0, p in -3.0f64..3.0, eps in 0.01f64..1.5) {
        let osc = HarmonicOscillator::default();
        let z = PhasePoint::from_slices(&[q], &[p]);
        let out = flow(&osc, &z, &IntegratorConfig::new(eps, 20, 1e-14), IntegratorKind::ImB).unwrap();
        let r0 = q.hypot(p);
        let r1 = out.point.q[0].hypot(out.point.p[0]);
        prop_assert!((r1 - r0).abs() <= 1e-11 * r0.max(1.0));
    }

    #[test]
    fn banana_implicit_midpoint_is_reversible(t1 in -1.0f64..1.0, t2 in -1.0f64..1.0, p1 in -5.0f64..5.0, p2 in -5.0f64..5.0) {
        let banana = reference_banana();
        let z = PhasePoint::new(DVector::from_vec(vec![t1, t2]), DVector::from_vec(vec![p1, p2]));
        let cfg = IntegratorConfig::new(0.02, 3, 1e-13);
        let kind = IntegratorKind::ImA;
        if let Ok(forward) = flow(&banana, &z, &cfg, kind) {
            let back = flow(&banana, &forward.point.flipped(), &cfg, kind).unwrap().point.flipped();
            prop_assert!(z.max_distance(&back) <= 1e-8);
        }
    }
}

/// Two unit masses joined by a spring, identity metric. Total momentum is a
/// linear first integral.
struct Spring;

impl TargetModel for Spring {
    fn dim(&self) -> usize {
        2
    }
    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        -0.5 * (q[0] - q[1]).powi(2)
    }
    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        let d = q[0] - q[1];
        DVector::from_vec(vec![-d, d])
    }
    fn metric(&self, _: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
    fn metric_grad(&self, _: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(2, 2); 2]
    }
}

#[test]
fn linear_first_integrals_are_preserved() {
    let z = PhasePoint::from_slices(&[0.3, -1.2], &[0.7, 0.4]);
    let cfg = IntegratorConfig::new(0.3, 25, 1e-14);
    for kind in [IntegratorKind::GlfA, IntegratorKind::GlfB, IntegratorKind::ImA, IntegratorKind::ImB] {
        let out = flow(&Spring, &z, &cfg, kind).unwrap().point;
        assert!((out.p.sum() - z.p.sum()).abs() <= 1e-12, "{kind}");
    }
}

#[test]
fn implicit_midpoint_preserves_angular_momentum() {
    let osc = HarmonicOscillator::new(1.3, 2);
    let z = PhasePoint::from_slices(&[0.3, -1.2], &[0.7, 0.4]);
    let angular = |z: &PhasePoint| z.q[0] * z.p[1] - z.q[1] * z.p[0];
    let cfg = IntegratorConfig::new(0.5, 40, 1e-14);
    for kind in [IntegratorKind::ImA, IntegratorKind::ImB] {
        let out = flow(&osc, &z, &cfg, kind).unwrap().point;
        assert!((angular(&out) - angular(&z)).abs() <= 1e-12, "{kind}");
        let h = |z: &PhasePoint| hamiltonian(&osc, z).unwrap();
        assert!((h(&out) - h(&z)).abs() <= 1e-12, "{kind}");
    }
}
