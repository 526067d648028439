//! Dense strictly convex QP solver.
//!
//! Solves `min ½ zᵀHz + gᵀz  s.t.  A z ≤ b` with a primal active-set method
//! in range-space form: `H = L Lᵀ` is factored once, every constraint row is
//! stored as `u_j = L⁻¹ a_j`, and the equality-constrained subproblems are
//! solved through a Cholesky factor of the Schur complement `U_Wᵀ U_W`
//! that is updated as rows enter and leave the working set.
//!
//! Infeasible starting points go through an elastic phase: the rows are
//! relaxed by a single slack `s ≥ 0` penalized by `ρ s + ½ s²`, starting from
//! a point that satisfies the relaxed rows. Phase one ends as soon as the
//! slack reaches zero; if it settles at a positive value for the largest
//! penalty the problem is reported infeasible.
//!
//! The factorization is independent of `g` and `b`, so [`PreparedQp`] keeps
//! it for repeated solves with the same Hessian and constraint matrix.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("no point satisfies the constraints (smallest uniform violation {violation:e})")]
    Infeasible { violation: f64 },
    #[error("iteration cap of {iterations} reached")]
    MaxIterations { iterations: usize },
    #[error("Hessian is not positive definite")]
    IllConditioned,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// `min ½ zᵀHz + gᵀz  s.t.  A z ≤ b`.
#[derive(Debug, Clone)]
pub struct QpProblem<T: Real> {
    pub h: DMatrix<T>,
    pub g: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(h: DMatrix<T>, g: DVector<T>, a: DMatrix<T>, b: DVector<T>) -> Result<Self, QpError> {
        let d = g.len();
        if h.shape() != (d, d) {
            return Err(QpError::InvalidProblem(format!("H is {:?}, expected {d}x{d}", h.shape())));
        }
        if a.ncols() != d || a.nrows() != b.len() {
            return Err(QpError::InvalidProblem(format!(
                "A is {:?} but g has {d} entries and b has {}",
                a.shape(),
                b.len()
            )));
        }
        let scale = T::one() + h.amax();
        if (&h - h.transpose()).amax() > T::tol(1e-10) * scale {
            return Err(QpError::InvalidProblem("H is not symmetric".into()));
        }
        Ok(Self { h, g, a, b })
    }

    pub fn unconstrained(h: DMatrix<T>, g: DVector<T>) -> Result<Self, QpError> {
        let d = g.len();
        Self::new(h, g, DMatrix::zeros(0, d), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, z: &DVector<T>) -> T {
        (z.dot(&(&self.h * z))) * T::lit(0.5) + self.g.dot(z)
    }

    /// Largest constraint violation `max(A z − b)` (zero when unconstrained).
    pub fn max_violation(&self, z: &DVector<T>) -> T {
        if self.b.is_empty() {
            return T::zero();
        }
        (&self.a * z - &self.b).max().max(T::zero())
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution<T: Real> {
    pub z: DVector<T>,
    /// Working-set rows at the solution, sorted.
    pub active_set: Vec<usize>,
    /// One multiplier per constraint row, zero off the active set.
    pub multipliers: DVector<T>,
    pub iterations: usize,
    /// Max of scaled stationarity, dual infeasibility, primal infeasibility
    /// and complementarity.
    pub kkt_residual: T,
    pub objective: T,
    /// Objective after every optimality-phase iteration; nonincreasing.
    pub objective_trace: Vec<T>,
    /// Whether the starting point needed the elastic phase.
    pub used_phase_one: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QpSettings<T: Real> {
    /// Accepted constraint violation.
    pub feasibility_tol: T,
    /// Multiplier sign tolerance, relative to `max(1, ‖g‖∞)`.
    pub optimality_tol: T,
    /// Threshold below which a search direction counts as zero, relative to
    /// the terms it is assembled from.
    pub step_tol: T,
    /// Relative pivot below which an entering row is treated as dependent.
    pub dependency_tol: T,
    /// Overrides the default cap of `50 (d + c)` iterations.
    pub max_iterations: Option<usize>,
}

impl<T: Real> Default for QpSettings<T> {
    fn default() -> Self {
        Self {
            feasibility_tol: T::tol(1e-9),
            optimality_tol: T::tol(1e-11),
            step_tol: T::tol(1e-12),
            dependency_tol: T::tol(1e-12),
            max_iterations: None,
        }
    }
}

/// Solves `problem` from an optional warm start with default settings.
pub fn solve<T: Real>(problem: &QpProblem<T>, warm_start: Option<&DVector<T>>) -> Result<QpSolution<T>, QpError> {
    PreparedQp::new(&problem.h, &problem.a)?.solve(&problem.g, &problem.b, warm_start)
}

/// Factored Hessian and transformed constraint rows, reusable across solves
/// that only change `g` and `b`.
#[derive(Debug, Clone)]
pub struct PreparedQp<T: Real> {
    h: DMatrix<T>,
    l: DMatrix<T>,
    a: DMatrix<T>,
    /// Column `j` is `L⁻¹ a_j`.
    u: DMatrix<T>,
    pub settings: QpSettings<T>,
}

impl<T: Real> PreparedQp<T> {
    pub fn new(h: &DMatrix<T>, a: &DMatrix<T>) -> Result<Self, QpError> {
        let d = h.nrows();
        if h.ncols() != d || a.ncols() != d {
            return Err(QpError::InvalidProblem("dimension mismatch between H and A".into()));
        }
        let chol = h.clone().cholesky().ok_or(QpError::IllConditioned)?;
        let l = chol.l();
        let diag_min = l.diagonal().iter().fold(T::max_value().unwrap_or(T::one()), |m, v| m.min(*v));
        let diag_max = l.diagonal().amax();
        if d > 0 && !(diag_min > diag_max * T::default_epsilon().sqrt() * T::lit(1e-2)) {
            return Err(QpError::IllConditioned);
        }
        let u = if a.nrows() == 0 {
            DMatrix::zeros(d, 0)
        } else {
            l.solve_lower_triangular(&a.transpose()).ok_or(QpError::IllConditioned)?
        };
        Ok(Self {
            h: h.clone(),
            l,
            a: a.clone(),
            u,
            settings: QpSettings::default(),
        })
    }

    pub fn with_settings(mut self, settings: QpSettings<T>) -> Self {
        self.settings = settings;
        self
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn hessian(&self) -> &DMatrix<T> {
        &self.h
    }

    pub fn constraints(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn solve(&self, g: &DVector<T>, b: &DVector<T>, warm_start: Option<&DVector<T>>) -> Result<QpSolution<T>, QpError> {
        let d = self.dim();
        let c = self.n_constraints();
        if g.len() != d || b.len() != c {
            return Err(QpError::InvalidProblem("g or b has the wrong length".into()));
        }
        let set = self.settings;
        let cap = set.max_iterations.unwrap_or(50 * (d + c).max(1));
        let mut z = match warm_start {
            Some(w) if w.len() == d => w.clone(),
            Some(_) => return Err(QpError::InvalidProblem("warm start has the wrong length".into())),
            None => DVector::zeros(d),
        };
        let violation = if c == 0 {
            T::zero()
        } else {
            (&self.a * &z - b).max()
        };
        let mut iterations = 0;
        let mut used_phase_one = false;
        let mut start_set = None;
        if violation > set.feasibility_tol {
            used_phase_one = true;
            let (zf, w, its) = self.phase_one(g, b, &z, violation, cap)?;
            iterations += its;
            z = zf;
            start_set = Some(w);
        }
        let core = Core {
            l: &self.l,
            u: &self.u,
            a: &self.a,
            b,
            linv_g: self.l.solve_lower_triangular(g).ok_or(QpError::IllConditioned)?,
            row_norms: row_norms(&self.a),
            settings: set,
            g_scale: g.amax().max(T::one()),
        };
        let preferred = start_set.unwrap_or_default();
        let mut run = core.start(z, &preferred);
        let its = core.optimize(&mut run, cap.saturating_sub(iterations), None)?;
        iterations += its.iterations;
        Ok(self.finish(g, b, run, iterations, used_phase_one))
    }

    /// Elastic phase: minimize the objective plus `ρ s + ½ s²` subject to
    /// `A z − s ≤ b`, `s ≥ 0`, stopping once `s` reaches zero.
    fn phase_one(
        &self,
        g: &DVector<T>,
        b: &DVector<T>,
        z0: &DVector<T>,
        violation: T,
        cap: usize,
    ) -> Result<(DVector<T>, Vec<usize>, usize), QpError> {
        let d = self.dim();
        let c = self.n_constraints();
        let set = self.settings;
        let mut l = DMatrix::zeros(d + 1, d + 1);
        l.view_mut((0, 0), (d, d)).copy_from(&self.l);
        l[(d, d)] = T::one();
        let mut u = DMatrix::zeros(d + 1, c + 1);
        u.view_mut((0, 0), (d, c)).copy_from(&self.u);
        let mut a = DMatrix::zeros(c + 1, d + 1);
        a.view_mut((0, 0), (c, d)).copy_from(&self.a);
        for j in 0..c {
            u[(d, j)] = -T::one();
            a[(j, d)] = -T::one();
        }
        u[(d, c)] = -T::one();
        a[(c, d)] = -T::one();
        let mut bb = DVector::zeros(c + 1);
        bb.rows_mut(0, c).copy_from(b);

        let mut x = DVector::zeros(d + 1);
        x.rows_mut(0, d).copy_from(z0);
        x[d] = violation;
        let mut rho = T::lit(1e4) * g.amax().max(T::one());
        let rho_max = rho * T::lit(1e10);
        let mut iterations = 0;
        let mut preferred: Vec<usize> = Vec::new();
        loop {
            let mut gg = DVector::zeros(d + 1);
            gg.rows_mut(0, d).copy_from(g);
            gg[d] = rho;
            let core = Core {
                l: &l,
                u: &u,
                a: &a,
                b: &bb,
                linv_g: l.solve_lower_triangular(&gg).ok_or(QpError::IllConditioned)?,
                row_norms: row_norms(&a),
                settings: set,
                g_scale: gg.amax().max(T::one()),
            };
            let mut run = core.start(x.clone(), &preferred);
            let out = core.optimize(&mut run, cap.saturating_sub(iterations), Some(c))?;
            iterations += out.iterations;
            x = run.x.clone();
            if out.stopped_on_guard || x[d] <= set.feasibility_tol {
                let working = run.working.iter().copied().filter(|&j| j < c).collect();
                return Ok((x.rows(0, d).into_owned(), working, iterations));
            }
            if rho >= rho_max {
                return Err(QpError::Infeasible {
                    violation: x[d].as_f64(),
                });
            }
            rho *= T::lit(100.0);
            preferred = run.working.clone();
        }
    }

    fn finish(&self, g: &DVector<T>, b: &DVector<T>, run: Run<T>, iterations: usize, used_phase_one: bool) -> QpSolution<T> {
        let c = self.n_constraints();
        let mut multipliers = DVector::zeros(c);
        for (k, &j) in run.working.iter().enumerate() {
            multipliers[j] = run.lambda[k];
        }
        let z = run.x;
        let hz = &self.h * &z;
        let mut grad = &hz + g;
        if c > 0 {
            grad += self.a.tr_mul(&multipliers);
        }
        let scale = T::one().max(g.amax()).max(hz.amax());
        let mut kkt = grad.amax() / scale;
        if c > 0 {
            let slack = b - &self.a * &z;
            kkt = kkt.max((-slack.min()).max(T::zero()));
            kkt = kkt.max((-multipliers.min()).max(T::zero()));
            for j in 0..c {
                kkt = kkt.max((multipliers[j] * slack[j]).abs() / scale);
            }
        }
        let objective = z.dot(&hz) * T::lit(0.5) + g.dot(&z);
        let mut active_set = run.working.clone();
        active_set.sort_unstable();
        QpSolution {
            z,
            active_set,
            multipliers,
            iterations,
            kkt_residual: kkt,
            objective,
            objective_trace: run.trace,
            used_phase_one,
        }
    }
}

/// Problem data in factored form.
struct Core<'a, T: Real> {
    l: &'a DMatrix<T>,
    u: &'a DMatrix<T>,
    a: &'a DMatrix<T>,
    b: &'a DVector<T>,
    linv_g: DVector<T>,
    row_norms: Vec<T>,
    settings: QpSettings<T>,
    g_scale: T,
}

struct Outcome {
    iterations: usize,
    stopped_on_guard: bool,
}

fn row_norms<T: Real>(a: &DMatrix<T>) -> Vec<T> {
    let mut sq = vec![T::zero(); a.nrows()];
    for col in a.column_iter() {
        for (s, v) in sq.iter_mut().zip(col.iter()) {
            *s += *v * *v;
        }
    }
    sq.into_iter().map(|s| s.sqrt()).collect()
}

/// Active-set iterate with the Schur-complement factor of its working set.
struct Run<T: Real> {
    x: DVector<T>,
    /// `Lᵀ x + L⁻¹ g`, so the gradient is `L w`.
    w: DVector<T>,
    /// `b − A x`.
    slack: DVector<T>,
    working: Vec<usize>,
    in_working: Vec<bool>,
    /// Lower Cholesky factor of `U_Wᵀ U_W`, row `i` has `i + 1` entries.
    factor: Vec<Vec<T>>,
    lambda: Vec<T>,
    trace: Vec<T>,
}

impl<'a, T: Real> Core<'a, T> {
    fn start(&self, x: DVector<T>, preferred: &[usize]) -> Run<T> {
        let w = self.l.tr_mul(&x) + &self.linv_g;
        let slack = self.b - self.a * &x;
        let mut run = Run {
            x,
            w,
            slack,
            working: Vec::new(),
            in_working: vec![false; self.b.len()],
            factor: Vec::new(),
            lambda: Vec::new(),
            trace: Vec::new(),
        };
        let tight = self.settings.feasibility_tol;
        let is_tight: Vec<bool> = run.slack.iter().map(|s| s.abs() <= tight).collect();
        for j in preferred.iter().copied().chain(0..self.b.len()) {
            if is_tight[j] {
                self.try_add(&mut run, j);
            }
        }
        run
    }

    fn column(&self, j: usize) -> nalgebra::DVectorView<'_, T> {
        self.u.column(j)
    }

    /// Appends row `j` to the working set unless it is numerically dependent
    /// on the rows already there.
    fn try_add(&self, run: &mut Run<T>, j: usize) -> bool {
        if run.in_working[j] {
            return false;
        }
        let uj = self.column(j);
        let norm_sq = uj.norm_squared();
        if norm_sq == T::zero() {
            return false;
        }
        let k = run.working.len();
        let mut r: Vec<T> = run.working.iter().map(|&i| self.column(i).dot(&uj)).collect();
        for i in 0..k {
            let mut acc = r[i];
            for (t, rt) in r.iter().enumerate().take(i) {
                acc -= run.factor[i][t] * *rt;
            }
            r[i] = acc / run.factor[i][i];
        }
        let pivot = norm_sq - r.iter().fold(T::zero(), |s, v| s + *v * *v);
        if !(pivot > self.settings.dependency_tol * norm_sq) {
            return false;
        }
        r.push(pivot.sqrt());
        run.factor.push(r);
        run.working.push(j);
        run.in_working[j] = true;
        true
    }

    fn remove(&self, run: &mut Run<T>, k: usize) {
        let j = run.working.remove(k);
        run.in_working[j] = false;
        run.factor.remove(k);
        let mut x: Vec<T> = run.factor[k..].iter_mut().map(|row| row.remove(k)).collect();
        // rank-one update of the trailing block restores the factorization
        let m = x.len();
        for i in 0..m {
            let row = k + i;
            let lii = run.factor[row][row];
            let r = (lii * lii + x[i] * x[i]).sqrt();
            let cs = r / lii;
            let sn = x[i] / lii;
            run.factor[row][row] = r;
            for (t, xt) in x.iter_mut().enumerate().skip(i + 1) {
                let below = k + t;
                let updated = (run.factor[below][row] + sn * *xt) / cs;
                *xt = cs * *xt - sn * updated;
                run.factor[below][row] = updated;
            }
        }
    }

    fn multipliers(&self, run: &Run<T>) -> Vec<T> {
        let k = run.working.len();
        let mut y: Vec<T> = run.working.iter().map(|&j| -self.column(j).dot(&run.w)).collect();
        for i in 0..k {
            let mut acc = y[i];
            for (t, yt) in y.iter().enumerate().take(i) {
                acc -= run.factor[i][t] * *yt;
            }
            y[i] = acc / run.factor[i][i];
        }
        for i in (0..k).rev() {
            let mut acc = y[i];
            for (t, yt) in y.iter().enumerate().skip(i + 1) {
                acc -= run.factor[t][i] * *yt;
            }
            y[i] = acc / run.factor[i][i];
        }
        y
    }

    fn objective(&self, run: &Run<T>) -> T {
        (run.w.norm_squared() - self.linv_g.norm_squared()) * T::lit(0.5)
    }

    /// Iterates until optimality for the current data. With `guard`, stops as
    /// soon as that row blocks a step (phase one uses it for `s ≥ 0`).
    fn optimize(&self, run: &mut Run<T>, budget: usize, guard: Option<usize>) -> Result<Outcome, QpError> {
        let set = self.settings;
        let opt_tol = set.optimality_tol * self.g_scale;
        let mut at_minimum = false;
        let mut iterations = 0;
        run.trace.push(self.objective(run));
        loop {
            if iterations >= budget {
                return Err(QpError::MaxIterations { iterations: budget });
            }
            iterations += 1;
            run.lambda = self.multipliers(run);
            if !at_minimum {
                let mut v = run.w.clone();
                let mut magnitude = run.w.amax().max(T::one());
                for (k, &j) in run.working.iter().enumerate() {
                    let uj = self.column(j);
                    magnitude = magnitude.max(run.lambda[k].abs() * uj.amax());
                    v.axpy(run.lambda[k], &uj, T::one());
                }
                if v.amax() > set.step_tol * magnitude {
                    let p = -self.l.tr_solve_lower_triangular(&v).ok_or(QpError::IllConditioned)?;
                    let ap = self.a * &p;
                    let pn = p.norm();
                    let mut alpha = T::one();
                    let mut blocking = None;
                    for j in 0..ap.len() {
                        if run.in_working[j] {
                            continue;
                        }
                        let rate = ap[j];
                        if rate > T::default_epsilon() * pn * self.row_norms[j] {
                            let ratio = run.slack[j].max(T::zero()) / rate;
                            if ratio < alpha {
                                alpha = ratio;
                                blocking = Some(j);
                            }
                        }
                    }
                    run.x.axpy(alpha, &p, T::one());
                    run.w.axpy(-alpha, &v, T::one());
                    run.slack.axpy(-alpha, &ap, T::one());
                    run.trace.push(self.objective(run));
                    match blocking {
                        Some(j) => {
                            if Some(j) == guard {
                                return Ok(Outcome {
                                    iterations,
                                    stopped_on_guard: true,
                                });
                            }
                            // a dependent blocking row means the step was roundoff
                            at_minimum = !self.try_add(run, j);
                        }
                        None => at_minimum = true,
                    }
                    continue;
                }
            }
            // x minimizes the objective on the current working set
            let worst = run
                .lambda
                .iter()
                .enumerate()
                .fold(None, |acc: Option<(usize, T)>, (k, &l)| match acc {
                    Some((_, best)) if !(l < best) => acc,
                    _ => Some((k, l)),
                });
            match worst {
                Some((k, l)) if l < -opt_tol => {
                    self.remove(run, k);
                    at_minimum = false;
                }
                _ => {
                    return Ok(Outcome {
                        iterations,
                        stopped_on_guard: false,
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_minimum() {
        let p = QpProblem::unconstrained(DMatrix::identity(1, 1), DVector::from_element(1, -2.0)).unwrap();
        let s = solve(&p, None).unwrap();
        assert_relative_eq!(s.z[0], 2.0, epsilon = 1e-14);
        assert!(s.active_set.is_empty());
    }

    #[test]
    fn single_active_bound() {
        // (z − 1)² = z² − 2z + 1  →  H = 2, g = −2
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 2.0_f64),
            DVector::from_element(1, -2.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.0),
        )
        .unwrap();
        let s = solve(&p, None).unwrap();
        assert!(s.z[0].abs() < 1e-14_f64);
        assert_eq!(s.active_set, vec![0]);
        assert_relative_eq!(s.multipliers[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_start_goes_through_phase_one() {
        // z ≥ 3 with the unconstrained minimum at 0
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            DVector::from_element(1, -3.0),
        )
        .unwrap();
        let s = solve(&p, None).unwrap();
        assert!(s.used_phase_one);
        assert_relative_eq!(s.z[0], 3.0, epsilon = 1e-10);
        assert!(s.kkt_residual < 1e-8);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let p = QpProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_column_slice(&[-1.0, -1.0]),
        )
        .unwrap();
        assert!(matches!(solve(&p, None), Err(QpError::Infeasible { .. })));
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = QpProblem::unconstrained(h, DVector::zeros(2)).unwrap();
        assert!(matches!(solve(&p, None), Err(QpError::IllConditioned)));
    }

    #[test]
    fn asymmetric_hessian_is_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QpProblem::unconstrained(h, DVector::zeros(2)).is_err());
    }

    #[test]
    fn duplicate_rows_do_not_break_the_factor() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_column_slice(&[-1.0, -1.0, -2.0]);
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2), a, b).unwrap();
        let s = solve(&p, None).unwrap();
        assert_relative_eq!(s.z, DVector::from_column_slice(&[-0.5, -0.5]), epsilon = 1e-10);
        assert_eq!(s.active_set.len(), 1);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[-1.0, -1.0]);
        let prep = PreparedQp::new(&DMatrix::identity(2, 2), &a).unwrap().with_settings(QpSettings {
            max_iterations: Some(1),
            ..QpSettings::default()
        });
        assert!(matches!(
            prep.solve(&DVector::zeros(2), &b, Some(&DVector::from_column_slice(&[-2.0, -2.0]))),
            Err(QpError::MaxIterations { .. })
        ));
    }

    #[test]
    fn box_constrained_projection() {
        let h = DMatrix::identity(3, 3);
        let g = DVector::from_column_slice(&[-3.0, 0.5, -0.2]);
        let mut a = DMatrix::zeros(6, 3);
        let mut b = DVector::zeros(6);
        for i in 0..3 {
            a[(2 * i, i)] = 1.0;
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i] = 1.0;
            b[2 * i + 1] = 1.0;
        }
        let p = QpProblem::new(h, g, a, b).unwrap();
        let s = solve(&p, None).unwrap();
        assert_relative_eq!(s.z, DVector::from_column_slice(&[1.0, -0.5, 0.2]), epsilon = 1e-12);
        assert_eq!(s.active_set, vec![0]);
        for w in s.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
