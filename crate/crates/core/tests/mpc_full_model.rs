use idc_core::linearize::state_index;
use idc_core::mpc::{build_constraints, build_cost, build_prediction, dare_residual, MpcConfig, MpcController};
use idc_core::{LinearModel, SystemParams};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::OnceLock;

fn model() -> &'static LinearModel {
    static MODEL: OnceLock<LinearModel> = OnceLock::new();
    MODEL.get_or_init(|| LinearModel::about_hover(&SystemParams::reference_quad(), Vector3::zeros(), 0.05).unwrap())
}

fn controller() -> MpcController<f64> {
    static CTRL: OnceLock<MpcController<f64>> = OnceLock::new();
    CTRL.get_or_init(|| MpcController::new(model().clone(), MpcConfig::default_for(model())).unwrap())
        .clone()
}

fn hover_reference(np: usize, offset: Vector3<f64>) -> Vec<DVector<f64>> {
    let m = model();
    let mut y = &m.c * &m.x_e;
    for i in 0..3 {
        y[i] += offset[i];
    }
    vec![y; np + 1]
}

fn randn(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| { let v: f64 = StandardNormal.sample(rng); v * scale })
}

#[test]
fn dare_solution_satisfies_riccati_equation() {
    let m = model();
    let ctrl = controller();
    let cfg = ctrl.config();
    let qs = m.c.tr_mul(&(&cfg.q * &m.c));
    let p = ctrl.terminal_weight();
    let res = dare_residual(&m.a, &m.b, &qs, &cfg.r, p);
    assert!(res < 1e-8, "residual {res:e}");
    assert!((p - p.transpose()).amax() < 1e-10);
    assert!(p.clone().symmetric_eigenvalues().min() > -1e-8);
}

#[test]
fn prediction_matches_simulation() {
    let m = model();
    let np = 6;
    let pred = build_prediction(m, np);
    let (n, k) = (m.state_dim(), m.input_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let dx = randn(&mut rng, n, 0.1);
        let du = randn(&mut rng, k * np, 0.5);
        let stacked = &pred.f * &dx + &pred.h * &du;
        let mut x = dx.clone();
        for t in 0..np {
            let block = stacked.rows(t * n, n);
            assert!((block - &x).amax() < 1e-10 * (1.0 + x.amax()));
            x = &m.a * &x + &m.b * du.rows(t * k, k);
        }
        let terminal = &pred.f_terminal * &dx + &pred.h_terminal * &du;
        assert!((terminal - x).amax() < 1e-10 * (1.0 + dx.amax()));
    }
}

#[test]
fn prediction_is_causal() {
    let m = model();
    let np = 5;
    let pred = build_prediction(m, np);
    let (n, k) = (m.state_dim(), m.input_dim());
    for i in 0..np {
        for j in i..np {
            assert_eq!(pred.h.view((i * n, j * k), (n, k)).amax(), 0.0, "block ({i},{j})");
        }
    }
    assert_eq!(pred.f.view((0, 0), (n, n)).into_owned(), DMatrix::identity(n, n));
}

#[test]
fn cost_gradient_matches_finite_differences() {
    let m = model();
    let mut cfg = MpcConfig::default_for(m);
    cfg.horizon = 4;
    let ctrl = MpcController::new(m.clone(), cfg.clone()).unwrap();
    let cons = build_constraints(&cfg, m, cfg.horizon).unwrap();
    let (n, k, p) = (m.state_dim(), m.input_dim(), m.output_dim());
    let qf = ctrl.terminal_weight().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // terminal target A z, z the least-squares solution of [C; CA] z = [y_{N-1}; y_N]
    let stacked = DMatrix::from_fn(2 * p, n, |i, j| if i < p { m.c[(i, j)] } else { (&m.c * &m.a)[(i - p, j)] });
    let svd = stacked.svd(true, true);
    for _ in 0..10 {
        let dx = randn(&mut rng, n, 0.05);
        let refs: Vec<DVector<f64>> = (0..=cfg.horizon).map(|_| &m.c * &m.x_e + randn(&mut rng, p, 0.3)).collect();
        let qp = build_cost(m, &cfg, &qf, &cons, &dx, &refs).unwrap();
        // direct evaluation of the cost from simulated states
        let cost = |du: &DVector<f64>| {
            let mut x = dx.clone();
            let mut j = 0.0;
            for (t, r) in refs.iter().take(cfg.horizon).enumerate() {
                let e = &m.c * (&m.x_e + &x) - r;
                j += e.dot(&(&cfg.q * &e));
                let u = du.rows(t * k, k).into_owned();
                j += u.dot(&(&cfg.r * &u));
                x = &m.a * &x + &m.b * &u;
            }
            let ye = &m.c * &m.x_e;
            let rhs = DVector::from_iterator(
                2 * p,
                (&refs[cfg.horizon - 1] - &ye).iter().chain((&refs[cfg.horizon] - &ye).iter()).copied(),
            );
            let dxr = &m.a * svd.solve(&rhs, 1e-12).unwrap();
            let e = x - dxr;
            j + e.dot(&(&qf * &e))
        };
        let du = randn(&mut rng, k * cfg.horizon, 0.2);
        let analytic = &qp.h * &du + &qp.g;
        let hstep = 1e-5;
        for i in (0..du.len()).step_by(7) {
            let mut up = du.clone();
            up[i] += hstep;
            let mut dn = du.clone();
            dn[i] -= hstep;
            let fd = (cost(&up) - cost(&dn)) / (2.0 * hstep);
            assert!((fd - analytic[i]).abs() < 1e-6 * (1.0 + fd.abs()), "entry {i}: fd {fd} vs {}", analytic[i]);
        }
    }
}

#[test]
fn hessian_is_positive_definite() {
    let ctrl = controller();
    let min = ctrl.hessian().clone().symmetric_eigenvalues().min();
    assert!(min > 0.0, "min eigenvalue {min}");
}

#[test]
fn hover_is_a_fixed_point() {
    let mut ctrl = controller();
    let m = model();
    let sol = ctrl
        .solve_tracking(&DVector::zeros(m.state_dim()), &hover_reference(ctrl.horizon(), Vector3::zeros()))
        .unwrap();
    assert!((&sol.u - &m.u_e).amax() < 1e-9);
}

#[test]
fn climb_step_raises_all_thrusts_equally() {
    let mut ctrl = controller();
    let m = model();
    let sol = ctrl
        .solve_tracking(&DVector::zeros(m.state_dim()), &hover_reference(ctrl.horizon(), Vector3::new(0.0, 0.0, -1.0)))
        .unwrap();
    let thrusts: Vec<f64> = (0..4).map(|i| sol.u[4 * i] - m.u_e[4 * i]).collect();
    assert!(thrusts[0] > 1e-3, "thrust change {thrusts:?}");
    for t in &thrusts {
        assert!((t - thrusts[0]).abs() < 1e-6 * thrusts[0].abs().max(1.0));
    }
    for i in 0..4 {
        for a in 1..4 {
            assert!(sol.u[4 * i + a].abs() < 1e-6);
        }
    }
}

#[test]
fn solution_respects_predicted_constraints() {
    let mut ctrl = controller();
    let m = model();
    let sol = ctrl
        .solve_tracking(&DVector::zeros(m.state_dim()), &hover_reference(ctrl.horizon(), Vector3::new(8.0, 0.0, 0.0)))
        .unwrap();
    let du = &sol.delta_u;
    for (t, chunk) in du.as_slice().chunks(m.input_dim()).enumerate() {
        for (i, v) in chunk.iter().enumerate() {
            let u = m.u_e[i] + v;
            assert!(u <= ctrl.config().u_ub[i] + 1e-8 && u >= ctrl.config().u_lb[i] - 1e-8, "step {t} input {i}");
        }
    }
    let limit = 5f64.to_radians();
    let pitch = state_index(4, "theta0.pitch").unwrap();
    let z = state_index(4, "r0.z").unwrap();
    let predicted = ctrl.predict(&DVector::zeros(m.state_dim()), du);
    let mut max_att: f64 = 0.0;
    for x in predicted.iter().take(ctrl.horizon()) {
        for a in 0..3 {
            let v = (m.x_e[6 + a] + x[6 + a]).abs();
            assert!(v <= limit + 1e-8);
        }
        assert!(m.x_e[z] + x[z] <= 1e-8);
        max_att = max_att.max((m.x_e[pitch] + x[pitch]).abs());
    }
    // a large lateral step saturates the tilt bound
    assert!((max_att - limit).abs() < 1e-8, "max predicted pitch {max_att}, limit {limit}");
    assert!(sol.qp.active_set.iter().any(|&j| j >= ctrl.constraints().m_u.nrows()));
}

#[test]
fn receding_horizon_is_consistent() {
    let mut ctrl = controller();
    let m = model();
    let n = m.state_dim();
    let mut dx = DVector::zeros(n);
    dx[0] = 0.3;
    dx[1] = -0.2;
    dx[2] = -0.1;
    let refs = hover_reference(ctrl.horizon(), Vector3::zeros());
    let first = ctrl.solve_tracking(&dx, &refs).unwrap();
    let k = m.input_dim();
    let next = &m.a * &dx + &m.b * first.delta_u.rows(0, k);
    let second = ctrl.solve_tracking(&next, &refs).unwrap();
    let len = first.delta_u.len();
    let tail = first.delta_u.rows(k, len - k);
    let head = second.delta_u.rows(0, len - k);
    let mismatch = (tail - head).amax();
    assert!(mismatch < 1e-3, "shift mismatch {mismatch:e}");
}
