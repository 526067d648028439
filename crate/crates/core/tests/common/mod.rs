//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use idc_core::hull::ConvexHull;
use idc_core::qp::QpProblem;
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

/// Random hull around `n` points drawn in a box of half-width `scale`.
pub fn random_hull<R: Rng>(rng: &mut R, n: usize, scale: f64) -> ConvexHull<f64> {
    loop {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|_| Vector3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect();
        if let Ok(h) = ConvexHull::from_points(&pts) {
            return h;
        }
    }
}

/// Smallest distance from `p` to `samples` points spread over the hull
/// boundary: every vertex, points along every facet edge and uniformly
/// distributed facet points, with facet counts proportional to area.
pub fn sampled_distance<R: Rng>(rng: &mut R, hull: &ConvexHull<f64>, p: &Vector3<f64>, samples: usize) -> f64 {
    let mut best = hull.vertices.iter().map(|v| (v - p).norm()).fold(f64::INFINITY, f64::min);
    let areas: Vec<f64> = hull
        .facets
        .iter()
        .map(|f| {
            let [a, b, c] = f.vertices.map(|i| hull.vertices[i]);
            0.5 * (b - a).cross(&(c - a)).norm()
        })
        .collect();
    let total: f64 = areas.iter().sum();
    let edge_budget = samples / 5;
    let per_edge = (edge_budget / (3 * hull.facets.len()).max(1)).max(1);
    for f in &hull.facets {
        let [a, b, c] = f.vertices.map(|i| hull.vertices[i]);
        for (s, e) in [(a, b), (b, c), (c, a)] {
            for k in 0..=per_edge {
                let t = k as f64 / per_edge as f64;
                best = best.min((s + (e - s) * t - p).norm());
            }
        }
    }
    let face_budget = samples - edge_budget;
    for (f, area) in hull.facets.iter().zip(&areas) {
        let [a, b, c] = f.vertices.map(|i| hull.vertices[i]);
        let count = ((face_budget as f64) * area / total).ceil() as usize;
        for _ in 0..count {
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            best = best.min((a + (b - a) * u + (c - a) * v - p).norm());
        }
    }
    best
}

/// Random point on a sphere of radius `r` around the origin.
pub fn random_direction<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random strictly convex QP whose feasible set contains a known interior point.
pub fn random_problem<R: Rng>(rng: &mut R, d: usize, c: usize) -> QpProblem<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let h = &m * m.transpose() + DMatrix::identity(d, d) * 0.5;
    let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal) * 3.0);
    let a = DMatrix::from_fn(c, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z0 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
    let b = &a * &z0 + DVector::from_fn(c, |_, _| rng.random_range(0.05..1.5));
    QpProblem::new(h, g, a, b).unwrap()
}

/// Minimum over all subsets S of the equality-constrained minimizer on S that
/// is primal feasible with nonnegative multipliers.
pub fn enumerate(p: &QpProblem<f64>) -> (DVector<f64>, f64) {
    let d = p.dim();
    let c = p.n_constraints();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << c) {
        let rows: Vec<usize> = (0..c).filter(|j| mask & (1 << j) != 0).collect();
        let k = rows.len();
        if k > d {
            continue;
        }
        let mut kkt = DMatrix::zeros(d + k, d + k);
        let mut rhs = DVector::zeros(d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(&p.h);
        rhs.rows_mut(0, d).copy_from(&(-&p.g));
        for (i, &j) in rows.iter().enumerate() {
            for t in 0..d {
                kkt[(d + i, t)] = p.a[(j, t)];
                kkt[(t, d + i)] = p.a[(j, t)];
            }
            rhs[d + i] = p.b[j];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let z = sol.rows(0, d).into_owned();
        if p.max_violation(&z) > 1e-9 || sol.rows(d, k).iter().any(|&l| l < -1e-9) {
            continue;
        }
        let f = p.objective(&z);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((z, f));
        }
    }
    best.expect("feasible problem has a KKT point")
}
