//! Condensed linear MPC tracking controller.
//!
//! Predicted deviations over the horizon are eliminated through
//! `X = F Δx_k + H ΔU` with `X = [Δx_k; …; Δx_{k+N_p−1}]`, so the decision
//! variable is the stacked input deviation `ΔU`. The stage cost weighs the
//! output error against the reference at the `N_p` instants `k … k+N_p−1`;
//! the terminal state `Δx_{k+N_p}` is weighed with the DARE solution `Q_f`
//! against a state target reconstructed from the last two reference samples.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linearize::{state_index, LinearModel, LinearizeError};
use crate::qp::{PreparedQp, QpError, QpProblem, QpSolution};
use crate::Real;

pub const DEFAULT_HORIZON: usize = 20;
pub const DARE_TOLERANCE: f64 = 1e-10;
pub const DARE_MAX_ITERATIONS: usize = 10_000;
/// Thrust upper bound as a multiple of the hover thrust.
pub const THRUST_HEADROOM: f64 = 2.5;
pub const TORQUE_LIMIT: f64 = 1.0;
pub const ATTITUDE_LIMIT_DEG: f64 = 5.0;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("Riccati iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid MPC configuration: {0}")]
    InvalidConfig(String),
    #[error("reference window has {got} samples, expected {expected}")]
    ReferenceLength { expected: usize, got: usize },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
}

/// Two-sided bound on one named state; infinite sides are not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBound<T: Real> {
    pub name: String,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone)]
pub struct MpcConfig<T: Real> {
    pub horizon: usize,
    /// Output weight, `p × p`.
    pub q: DMatrix<T>,
    /// Input weight, `m × m`.
    pub r: DMatrix<T>,
    /// Terminal state weight; solved from the DARE when absent.
    pub q_f: Option<DMatrix<T>>,
    pub state_bounds: Vec<StateBound<T>>,
    pub u_lb: DVector<T>,
    pub u_ub: DVector<T>,
}

impl<T: Real> MpcConfig<T> {
    /// Weights and bounds for a model with the default output selection:
    /// position 10, payload roll and pitch 10, payload yaw 100, link x/y 1.
    /// UAV attitudes, when selected as outputs, get 1 on roll and pitch and
    /// 100 on yaw.
    ///
    /// Vertical link components get zero weight. At hover they only enter
    /// through the unit-norm constraint, so their linearized modes are
    /// uncontrollable and the DARE diverges with any positive weight there.
    pub fn default_for(model: &LinearModel<T>) -> Self {
        let p = model.output_dim();
        let mut q = DMatrix::zeros(p, p);
        for (i, name) in model.output_names.iter().enumerate() {
            q[(i, i)] = T::lit(default_output_weight(name));
        }
        let m = model.input_dim();
        let mut u_lb = DVector::zeros(m);
        let mut u_ub = DVector::zeros(m);
        for i in 0..m {
            if i % crate::dynamics::UAV_INPUTS == 0 {
                u_lb[i] = T::zero();
                u_ub[i] = model.u_e[i] * T::lit(THRUST_HEADROOM);
            } else {
                u_lb[i] = T::lit(-TORQUE_LIMIT);
                u_ub[i] = T::lit(TORQUE_LIMIT);
            }
        }
        let att = T::lit(ATTITUDE_LIMIT_DEG.to_radians());
        let mut state_bounds = vec![StateBound {
            name: "r0.z".into(),
            lower: T::lit(f64::NEG_INFINITY),
            upper: T::zero(),
        }];
        for axis in ["roll", "pitch", "yaw"] {
            state_bounds.push(StateBound {
                name: format!("theta0.{axis}"),
                lower: -att,
                upper: att,
            });
        }
        Self {
            horizon: DEFAULT_HORIZON,
            q,
            r: DMatrix::identity(m, m) * T::lit(0.1),
            q_f: None,
            state_bounds,
            u_lb,
            u_ub,
        }
    }

    pub fn validate(&self, model: &LinearModel<T>) -> Result<(), MpcError> {
        let bad = |m: String| Err(MpcError::InvalidConfig(m));
        let (n, m, p) = (model.state_dim(), model.input_dim(), model.output_dim());
        if self.horizon == 0 {
            return bad("horizon must be at least one step".into());
        }
        if self.q.shape() != (p, p) || self.r.shape() != (m, m) {
            return bad(format!("Q must be {p}x{p} and R {m}x{m}"));
        }
        if let Some(qf) = &self.q_f {
            if qf.shape() != (n, n) {
                return bad(format!("Q_f must be {n}x{n}"));
            }
        }
        if !is_symmetric(&self.q) || !is_symmetric(&self.r) {
            return bad("Q and R must be symmetric".into());
        }
        let q_min = self.q.clone().symmetric_eigenvalues().min();
        if q_min < -T::tol(1e-12) * (T::one() + self.q.amax()) {
            return bad("Q must be positive semidefinite".into());
        }
        if self.r.clone().cholesky().is_none() {
            return bad("R must be positive definite".into());
        }
        if self.u_lb.len() != m || self.u_ub.len() != m {
            return bad(format!("input bounds must have {m} entries"));
        }
        for i in 0..m {
            if !(self.u_lb[i] < model.u_e[i] && model.u_e[i] < self.u_ub[i]) {
                return bad(format!("equilibrium input {i} is not strictly inside its bounds"));
            }
        }
        for sb in &self.state_bounds {
            state_index(model.n_uavs, &sb.name)?;
            if !(sb.lower < sb.upper) {
                return bad(format!("empty bound interval for {}", sb.name));
            }
        }
        Ok(())
    }

    /// Rows of `c_z`, one per bounded state.
    pub fn selection_matrix(&self, model: &LinearModel<T>) -> Result<DMatrix<T>, MpcError> {
        let mut cz = DMatrix::zeros(self.state_bounds.len(), model.state_dim());
        for (r, sb) in self.state_bounds.iter().enumerate() {
            cz[(r, state_index(model.n_uavs, &sb.name)?)] = T::one();
        }
        Ok(cz)
    }
}

fn default_output_weight(name: &str) -> f64 {
    match name {
        n if n.starts_with("theta") && n.ends_with(".yaw") => 100.0,
        n if n.starts_with("r0.") || n.starts_with("theta0.") => 10.0,
        n if n.starts_with('q') && n.ends_with(".z") => 0.0,
        _ => 1.0,
    }
}

fn is_symmetric<T: Real>(m: &DMatrix<T>) -> bool {
    (m - m.transpose()).amax() <= T::tol(1e-10) * (T::one() + m.amax())
}

#[derive(Debug, Clone)]
pub struct DareSolution<T: Real> {
    pub p: DMatrix<T>,
    pub iterations: usize,
}

/// Solves `P = AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q` by fixed-point iteration from
/// `P₀ = Q`.
pub fn solve_dare<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
) -> Result<DareSolution<T>, MpcError> {
    let mut p = q.clone();
    let at = a.transpose();
    let bt = b.transpose();
    let mut change = T::zero();
    for k in 0..DARE_MAX_ITERATIONS {
        let next = riccati_step(a, &at, b, &bt, q, r, &p)?;
        change = (&next - &p).amax();
        if !change.is_finite() {
            break;
        }
        p = next;
        if change < T::lit(DARE_TOLERANCE) {
            return Ok(DareSolution { p, iterations: k + 1 });
        }
    }
    Err(MpcError::NoConvergence {
        iterations: DARE_MAX_ITERATIONS,
        residual: change.as_f64(),
    })
}

fn riccati_step<T: Real>(
    a: &DMatrix<T>,
    at: &DMatrix<T>,
    b: &DMatrix<T>,
    bt: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p: &DMatrix<T>,
) -> Result<DMatrix<T>, MpcError> {
    let pa = p * a;
    let pb = p * b;
    let s = r + bt * &pb;
    let gain = s
        .cholesky()
        .ok_or_else(|| MpcError::InvalidConfig("R + BᵀPB is not positive definite".into()))?
        .solve(&(bt * &pa));
    let next = at * &pa - (at * &pb) * gain + q;
    Ok((&next + next.transpose()) * T::lit(0.5))
}

/// Residual of the Riccati equation at `p`.
pub fn dare_residual<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, q: &DMatrix<T>, r: &DMatrix<T>, p: &DMatrix<T>) -> T {
    match riccati_step(a, &a.transpose(), b, &b.transpose(), q, r, p) {
        Ok(next) => (next - p).amax(),
        Err(_) => T::lit(f64::INFINITY),
    }
}

/// Free and forced response over the horizon plus the terminal row.
#[derive(Debug, Clone)]
pub struct Prediction<T: Real> {
    /// `[I; A; …; A^{N_p−1}]`.
    pub f: DMatrix<T>,
    /// Block `(i, j)` is `A^{i−1−j} B` below the diagonal, zero elsewhere.
    pub h: DMatrix<T>,
    /// `A^{N_p}`.
    pub f_terminal: DMatrix<T>,
    /// `[A^{N_p−1}B, …, AB, B]`.
    pub h_terminal: DMatrix<T>,
}

pub fn build_prediction<T: Real>(model: &LinearModel<T>, horizon: usize) -> Prediction<T> {
    let (n, m) = (model.state_dim(), model.input_dim());
    let mut powers = vec![DMatrix::identity(n, n)];
    for k in 0..horizon {
        powers.push(&model.a * &powers[k]);
    }
    let ab: Vec<DMatrix<T>> = powers.iter().map(|ak| ak * &model.b).collect();
    let mut f = DMatrix::zeros(n * horizon, n);
    let mut h = DMatrix::zeros(n * horizon, m * horizon);
    let mut h_terminal = DMatrix::zeros(n, m * horizon);
    for i in 0..horizon {
        f.view_mut((i * n, 0), (n, n)).copy_from(&powers[i]);
        for j in 0..i {
            h.view_mut((i * n, j * m), (n, m)).copy_from(&ab[i - 1 - j]);
        }
        h_terminal.view_mut((0, i * m), (n, m)).copy_from(&ab[horizon - 1 - i]);
    }
    Prediction {
        f,
        h,
        f_terminal: powers[horizon].clone(),
        h_terminal,
    }
}

/// Input and state bounds stacked over the horizon, infinite rows removed.
#[derive(Debug, Clone)]
pub struct StackedConstraints<T: Real> {
    /// `M_U ΔU ≤ ΔU_b`.
    pub m_u: DMatrix<T>,
    pub du_b: DVector<T>,
    /// `M_x X ≤ ΔZ_b`.
    pub m_x: DMatrix<T>,
    pub dz_b: DVector<T>,
    pub prediction: Prediction<T>,
}

impl<T: Real> StackedConstraints<T> {
    /// Inequality rows `[M_U; M_x H]` in `ΔU` with their right-hand side at
    /// `Δx`. State rows that do not depend on `ΔU` (the current step) are
    /// omitted; `state_rows` lists which rows of `M_x` were kept.
    pub fn input_space_rows(&self) -> (DMatrix<T>, Vec<usize>) {
        let mh = &self.m_x * &self.prediction.h;
        let kept: Vec<usize> = (0..mh.nrows()).filter(|&r| mh.row(r).amax() > T::zero()).collect();
        let mu = self.m_u.nrows();
        let mut a = DMatrix::zeros(mu + kept.len(), self.m_u.ncols());
        a.view_mut((0, 0), (mu, self.m_u.ncols())).copy_from(&self.m_u);
        for (k, &r) in kept.iter().enumerate() {
            a.row_mut(mu + k).copy_from(&mh.row(r));
        }
        (a, kept)
    }

    pub fn input_space_rhs(&self, dx: &DVector<T>, state_rows: &[usize]) -> DVector<T> {
        let free = &self.m_x * (&self.prediction.f * dx);
        let mu = self.du_b.len();
        let mut b = DVector::zeros(mu + state_rows.len());
        b.rows_mut(0, mu).copy_from(&self.du_b);
        for (k, &r) in state_rows.iter().enumerate() {
            b[mu + k] = self.dz_b[r] - free[r];
        }
        b
    }
}

pub fn build_constraints<T: Real>(
    config: &MpcConfig<T>,
    model: &LinearModel<T>,
    horizon: usize,
) -> Result<StackedConstraints<T>, MpcError> {
    let (n, m) = (model.state_dim(), model.input_dim());
    let mut u_rows: Vec<(usize, T, T)> = Vec::new();
    for i in 0..m {
        if config.u_ub[i].is_finite() {
            u_rows.push((i, T::one(), config.u_ub[i] - model.u_e[i]));
        }
        if config.u_lb[i].is_finite() {
            u_rows.push((i, -T::one(), model.u_e[i] - config.u_lb[i]));
        }
    }
    let mut x_rows: Vec<(usize, T, T)> = Vec::new();
    for sb in &config.state_bounds {
        let idx = state_index(model.n_uavs, &sb.name)?;
        if sb.upper.is_finite() {
            x_rows.push((idx, T::one(), sb.upper - model.x_e[idx]));
        }
        if sb.lower.is_finite() {
            x_rows.push((idx, -T::one(), model.x_e[idx] - sb.lower));
        }
    }
    let mut m_u = DMatrix::zeros(u_rows.len() * horizon, m * horizon);
    let mut du_b = DVector::zeros(u_rows.len() * horizon);
    let mut m_x = DMatrix::zeros(x_rows.len() * horizon, n * horizon);
    let mut dz_b = DVector::zeros(x_rows.len() * horizon);
    for k in 0..horizon {
        for (r, &(i, sign, bound)) in u_rows.iter().enumerate() {
            let row = k * u_rows.len() + r;
            m_u[(row, k * m + i)] = sign;
            du_b[row] = bound;
        }
        for (r, &(i, sign, bound)) in x_rows.iter().enumerate() {
            let row = k * x_rows.len() + r;
            m_x[(row, k * n + i)] = sign;
            dz_b[row] = bound;
        }
    }
    Ok(StackedConstraints {
        m_u,
        du_b,
        m_x,
        dz_b,
        prediction: build_prediction(model, horizon),
    })
}

/// Quadratic cost in `ΔU` with the parts that do not depend on the current
/// deviation or reference precomputed.
#[derive(Debug, Clone)]
pub struct CostTerms<T: Real> {
    /// `H_qp = 2 (Hᵀ C̄ᵀ Q̄ C̄ H + R̄ + H_Nᵀ Q_f H_N)`.
    pub hessian: DMatrix<T>,
    /// `2 (C̄H)ᵀ Q̄`.
    stage_gradient: DMatrix<T>,
    /// `C̄ F`.
    output_free: DMatrix<T>,
    /// `2 H_Nᵀ Q_f`.
    terminal_gradient: DMatrix<T>,
    f_terminal: DMatrix<T>,
    output_offset: DVector<T>,
    /// Maps a terminal output error to the state deviation it corresponds to.
    output_to_state: DMatrix<T>,
    horizon: usize,
}

impl<T: Real> CostTerms<T> {
    pub fn new(model: &LinearModel<T>, config: &MpcConfig<T>, q_f: &DMatrix<T>, prediction: &Prediction<T>) -> Self {
        let (n, m, p) = (model.state_dim(), model.input_dim(), model.output_dim());
        let np = config.horizon;
        let mut ch = DMatrix::zeros(p * np, m * np);
        let mut cf = DMatrix::zeros(p * np, n);
        let mut qch = DMatrix::zeros(p * np, m * np);
        for i in 0..np {
            let rows = prediction.h.rows(i * n, n);
            let block = &model.c * rows;
            qch.rows_mut(i * p, p).copy_from(&(&config.q * &block));
            ch.rows_mut(i * p, p).copy_from(&block);
            cf.rows_mut(i * p, p).copy_from(&(&model.c * prediction.f.rows(i * n, n)));
        }
        let two = T::lit(2.0);
        let mut r_bar = DMatrix::zeros(m * np, m * np);
        for i in 0..np {
            r_bar.view_mut((i * m, i * m), (m, m)).copy_from(&config.r);
        }
        let qf_hn = q_f * &prediction.h_terminal;
        let hessian = (ch.tr_mul(&qch) + r_bar + prediction.h_terminal.tr_mul(&qf_hn)) * two;
        let hessian = (&hessian + hessian.transpose()) * T::lit(0.5);
        let cxe = &model.c * &model.x_e;
        let mut output_offset = DVector::zeros(p * np);
        for i in 0..np {
            output_offset.rows_mut(i * p, p).copy_from(&cxe);
        }
        let output_to_state = terminal_target_map(model);
        Self {
            hessian,
            stage_gradient: qch.transpose() * two,
            output_free: cf,
            terminal_gradient: prediction.h_terminal.tr_mul(q_f) * two,
            f_terminal: prediction.f_terminal.clone(),
            output_offset,
            output_to_state,
            horizon: np,
        }
    }

    /// Linear term `g_qp` for deviation `dx` and reference samples at steps
    /// `0 … N_p`; the last two define the terminal state target.
    pub fn gradient(&self, model: &LinearModel<T>, dx: &DVector<T>, reference: &[DVector<T>]) -> Result<DVector<T>, MpcError> {
        let np = self.horizon;
        if reference.len() != np + 1 {
            return Err(MpcError::ReferenceLength {
                expected: np + 1,
                got: reference.len(),
            });
        }
        let p = model.output_dim();
        let mut err = &self.output_offset + &self.output_free * dx;
        for (i, y) in reference.iter().take(np).enumerate() {
            if y.len() != p {
                return Err(MpcError::InvalidConfig(format!("reference sample {i} has {} entries, expected {p}", y.len())));
            }
            let mut seg = err.rows_mut(i * p, p);
            seg -= y;
        }
        let y_n = &reference[np];
        if y_n.len() != p {
            return Err(MpcError::InvalidConfig("terminal reference has the wrong length".into()));
        }
        let y_e = &model.c * &model.x_e;
        let mut pair = DVector::zeros(2 * p);
        pair.rows_mut(0, p).copy_from(&(&reference[np - 1] - &y_e));
        pair.rows_mut(p, p).copy_from(&(y_n - &y_e));
        let dx_ref = &self.output_to_state * pair;
        let terminal = &self.f_terminal * dx - dx_ref;
        Ok(&self.stage_gradient * err + &self.terminal_gradient * terminal)
    }
}

/// Maps the last two reference samples, as deviations from the equilibrium
/// output, to a terminal state target. The target is the free-response
/// successor `A z` of the least-squares state `z` with `C z ≈ y_{N−1}` and
/// `C A z ≈ y_N`, so it carries the rates implied by the reference.
fn terminal_target_map<T: Real>(model: &LinearModel<T>) -> DMatrix<T> {
    let (n, p) = (model.state_dim(), model.output_dim());
    let mut stacked = DMatrix::zeros(2 * p, n);
    stacked.rows_mut(0, p).copy_from(&model.c);
    stacked.rows_mut(p, p).copy_from(&(&model.c * &model.a));
    let inv = stacked
        .clone()
        .pseudo_inverse(T::tol(1e-12))
        .unwrap_or_else(|_| stacked.transpose());
    &model.a * inv
}

/// Assembles the tracking QP at deviation `dx`, without the constant term.
pub fn build_cost<T: Real>(
    model: &LinearModel<T>,
    config: &MpcConfig<T>,
    q_f: &DMatrix<T>,
    constraints: &StackedConstraints<T>,
    dx: &DVector<T>,
    reference: &[DVector<T>],
) -> Result<QpProblem<T>, MpcError> {
    let terms = CostTerms::new(model, config, q_f, &constraints.prediction);
    let g = terms.gradient(model, dx, reference)?;
    let (a, rows) = constraints.input_space_rows();
    let b = constraints.input_space_rhs(dx, &rows);
    Ok(QpProblem::new(terms.hessian, g, a, b)?)
}

#[derive(Debug, Clone)]
pub struct TrackingSolution<T: Real> {
    /// Stacked input deviations over the horizon.
    pub delta_u: DVector<T>,
    /// First move `u_e + Δu_k`.
    pub u: DVector<T>,
    pub qp: QpSolution<T>,
}

/// Tracking controller with all horizon matrices and the QP factorization
/// built once.
#[derive(Debug, Clone)]
pub struct MpcController<T: Real> {
    model: LinearModel<T>,
    config: MpcConfig<T>,
    q_f: DMatrix<T>,
    constraints: StackedConstraints<T>,
    cost: CostTerms<T>,
    state_rows: Vec<usize>,
    solver: PreparedQp<T>,
    previous: Option<DVector<T>>,
}

impl<T: Real> MpcController<T> {
    pub fn new(model: LinearModel<T>, config: MpcConfig<T>) -> Result<Self, MpcError> {
        config.validate(&model)?;
        let q_f = match &config.q_f {
            Some(qf) => qf.clone(),
            None => {
                let qs = model.c.tr_mul(&(&config.q * &model.c));
                solve_dare(&model.a, &model.b, &qs, &config.r)?.p
            }
        };
        let constraints = build_constraints(&config, &model, config.horizon)?;
        let cost = CostTerms::new(&model, &config, &q_f, &constraints.prediction);
        let (a, state_rows) = constraints.input_space_rows();
        let solver = PreparedQp::new(&cost.hessian, &a)?;
        Ok(Self {
            model,
            config,
            q_f,
            constraints,
            cost,
            state_rows,
            solver,
            previous: None,
        })
    }

    pub fn model(&self) -> &LinearModel<T> {
        &self.model
    }

    pub fn config(&self) -> &MpcConfig<T> {
        &self.config
    }

    pub fn terminal_weight(&self) -> &DMatrix<T> {
        &self.q_f
    }

    pub fn constraints(&self) -> &StackedConstraints<T> {
        &self.constraints
    }

    pub fn hessian(&self) -> &DMatrix<T> {
        &self.cost.hessian
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    /// Forgets the warm start.
    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// Solves the tracking QP at deviation `dx = x − x_e` for reference
    /// outputs at steps `0 … N_p`. The previous solution, shifted by one
    /// step, warm starts the solver.
    pub fn solve_tracking(&mut self, dx: &DVector<T>, reference: &[DVector<T>]) -> Result<TrackingSolution<T>, MpcError> {
        let g = self.cost.gradient(&self.model, dx, reference)?;
        let b = self.constraints.input_space_rhs(dx, &self.state_rows);
        let warm = self.previous.as_ref().map(|prev| shift(prev, self.model.input_dim()));
        let qp = self.solver.solve(&g, &b, warm.as_ref())?;
        let m = self.model.input_dim();
        let u = &self.model.u_e + qp.z.rows(0, m);
        self.previous = Some(qp.z.clone());
        Ok(TrackingSolution {
            delta_u: qp.z.clone(),
            u,
            qp,
        })
    }

    /// Predicted deviations at steps `0 … N_p`.
    pub fn predict(&self, dx: &DVector<T>, delta_u: &DVector<T>) -> Vec<DVector<T>> {
        let pred = &self.constraints.prediction;
        let n = self.model.state_dim();
        let stacked = &pred.f * dx + &pred.h * delta_u;
        let mut out: Vec<DVector<T>> = (0..self.config.horizon).map(|i| stacked.rows(i * n, n).into_owned()).collect();
        out.push(&pred.f_terminal * dx + &pred.h_terminal * delta_u);
        out
    }
}

/// Drops the first move and repeats the last one.
fn shift<T: Real>(prev: &DVector<T>, m: usize) -> DVector<T> {
    let len = prev.len();
    let mut out = DVector::zeros(len);
    out.rows_mut(0, len - m).copy_from(&prev.rows(m, len - m));
    out.rows_mut(len - m, m).copy_from(&prev.rows(len - m, m));
    out
}
