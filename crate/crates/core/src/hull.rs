//! Safe convex hull around the payload and UAVs, obstacle models and
//! closest-point queries.
//!
//! The hull is the convex hull of the payload box corners and a small
//! octahedron around every UAV. It is stored both as its extreme vertices and
//! as outward half-spaces `n·x ≤ d`; closest-point queries project onto the
//! half-space description with the dense QP solver.

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{euler_to_rotation, uav_positions, SystemParams, SystemState};
use crate::qp::{PreparedQp, QpError};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("hull vertices are coplanar or coincident")]
    DegenerateHull,
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleShape {
    Sphere { center: [f64; 3], radius: f64 },
    CylinderZ { axis_xy: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleMotion {
    #[default]
    Static,
    /// `mean + amplitude · sin(ω t + phase)`.
    HarmonicOscillator {
        mean: [f64; 3],
        amplitude: [f64; 3],
        angular_frequency: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: ObstacleShape,
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub motion: ObstacleMotion,
}

/// Obstacle position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl Obstacle {
    pub fn sphere(center: [f64; 3], radius: f64, margin: f64) -> Self {
        Self {
            shape: ObstacleShape::Sphere { center, radius },
            margin,
            motion: ObstacleMotion::Static,
        }
    }

    pub fn cylinder(axis_xy: [f64; 2], radius: f64, margin: f64) -> Self {
        Self {
            shape: ObstacleShape::CylinderZ { axis_xy, radius },
            margin,
            motion: ObstacleMotion::Static,
        }
    }

    pub fn with_motion(mut self, motion: ObstacleMotion) -> Self {
        self.motion = motion;
        self
    }

    pub fn radius(&self) -> f64 {
        match self.shape {
            ObstacleShape::Sphere { radius, .. } | ObstacleShape::CylinderZ { radius, .. } => radius,
        }
    }

    /// `R_o`, the radius the barrier keeps the hull outside of.
    pub fn effective_radius(&self) -> f64 {
        self.radius() + self.margin
    }

    /// Cylinders only constrain the horizontal distance.
    pub fn is_planar(&self) -> bool {
        matches!(self.shape, ObstacleShape::CylinderZ { .. })
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius() > 0.0) {
            return Err("obstacle radius must be positive".into());
        }
        if !(self.margin >= 0.0) {
            return Err("obstacle margin must be nonnegative".into());
        }
        if let ObstacleMotion::HarmonicOscillator { angular_frequency, .. } = self.motion {
            if !angular_frequency.is_finite() {
                return Err("angular frequency must be finite".into());
            }
        }
        Ok(())
    }

    fn nominal_position(&self) -> Vector3<f64> {
        match self.shape {
            ObstacleShape::Sphere { center, .. } => Vector3::from(center),
            ObstacleShape::CylinderZ { axis_xy, .. } => Vector3::new(axis_xy[0], axis_xy[1], 0.0),
        }
    }
}

/// Kinematic state of `obstacle` at time `t`.
pub fn obstacle_state(obstacle: &Obstacle, t: f64) -> ObstacleState {
    match obstacle.motion {
        ObstacleMotion::Static => ObstacleState {
            position: obstacle.nominal_position(),
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
        },
        ObstacleMotion::HarmonicOscillator {
            mean,
            amplitude,
            angular_frequency: w,
            phase,
        } => {
            let a = Vector3::from(amplitude);
            let arg = w * t + phase;
            ObstacleState {
                position: Vector3::from(mean) + a * arg.sin(),
                velocity: a * (w * arg.cos()),
                acceleration: a * (-w * w * arg.sin()),
            }
        }
    }
}

/// Shape parameters of the hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HullGeometry {
    /// Payload box half-extents, payload frame (m).
    pub payload_half_extents: [f64; 3],
    /// Circumradius of the octahedron placed around each UAV (m).
    pub inflation: f64,
}

impl Default for HullGeometry {
    fn default() -> Self {
        Self {
            payload_half_extents: [0.5, 0.5, 0.25],
            inflation: 0.35,
        }
    }
}

/// Outward half-space `normal · x ≤ offset` supporting one hull facet.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet<T: Real> {
    pub vertices: [usize; 3],
    pub normal: Vector3<T>,
    pub offset: T,
}

/// Footprint edge `n·x ≤ d` in the horizontal plane.
type HalfPlane<T> = (Vector2<T>, T);

#[derive(Debug, Clone)]
pub struct ConvexHull<T: Real> {
    /// Extreme points of the hull.
    pub vertices: Vec<Vector3<T>>,
    /// Triangulated boundary; indices refer to `vertices`.
    pub facets: Vec<Facet<T>>,
    /// Distinct supporting half-spaces (coplanar facets merged).
    halfspaces: Vec<(Vector3<T>, T)>,
    interior: Vector3<T>,
    scale: T,
}

impl<T: Real> ConvexHull<T> {
    /// Convex hull of a point cloud by incremental construction.
    pub fn from_points(points: &[Vector3<T>]) -> Result<Self, HullError> {
        let pts = dedup(points);
        if pts.len() < 4 {
            return Err(HullError::DegenerateHull);
        }
        let scale = pts
            .iter()
            .fold(T::zero(), |m, p| m.max((p - pts[0]).amax()))
            .max(T::one());
        let eps = T::tol(1e-10) * scale;

        let i0 = (0..pts.len())
            .min_by(|&a, &b| pts[a].x.partial_cmp(&pts[b].x).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0);
        let i1 = argmax(&pts, |p| (p - pts[i0]).norm());
        let dir = (pts[i1] - pts[i0]).normalize();
        let i2 = argmax(&pts, |p| {
            let d = p - pts[i0];
            (d - dir * d.dot(&dir)).norm()
        });
        let plane = (pts[i1] - pts[i0]).cross(&(pts[i2] - pts[i0]));
        if plane.norm() <= eps * scale {
            return Err(HullError::DegenerateHull);
        }
        let plane = plane.normalize();
        let i3 = argmax(&pts, |p| (p - pts[i0]).dot(&plane).abs());
        if (pts[i3] - pts[i0]).dot(&plane).abs() <= eps {
            return Err(HullError::DegenerateHull);
        }
        let interior = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) * T::lit(0.25);

        let mut faces: Vec<[usize; 3]> = vec![[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]];
        let mut planes: Vec<(Vector3<T>, T)> = Vec::new();
        for f in &mut faces {
            let (n, d) = oriented_plane(&pts, f, &interior);
            planes.push((n, d));
        }

        for (k, p) in pts.iter().enumerate() {
            if [i0, i1, i2, i3].contains(&k) {
                continue;
            }
            let visible: Vec<bool> = planes.iter().map(|(n, d)| n.dot(p) - *d > eps).collect();
            if !visible.iter().any(|v| *v) {
                continue;
            }
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for (f, face) in faces.iter().enumerate() {
                if visible[f] {
                    for e in 0..3 {
                        edges.push((face[e], face[(e + 1) % 3]));
                    }
                }
            }
            let horizon: Vec<(usize, usize)> = edges
                .iter()
                .copied()
                .filter(|&(a, b)| !edges.contains(&(b, a)))
                .collect();
            let mut kept_faces = Vec::with_capacity(faces.len());
            let mut kept_planes = Vec::with_capacity(faces.len());
            for (f, face) in faces.iter().enumerate() {
                if !visible[f] {
                    kept_faces.push(*face);
                    kept_planes.push(planes[f]);
                }
            }
            for (a, b) in horizon {
                let mut face = [a, b, k];
                let pl = oriented_plane(&pts, &mut face, &interior);
                kept_faces.push(face);
                kept_planes.push(pl);
            }
            faces = kept_faces;
            planes = kept_planes;
        }

        let mut used: Vec<usize> = faces.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        let remap = |i: usize| used.binary_search(&i).unwrap_or(0);
        let vertices: Vec<Vector3<T>> = used.iter().map(|&i| pts[i]).collect();
        let facets: Vec<Facet<T>> = faces
            .iter()
            .zip(&planes)
            .map(|(f, (n, d))| Facet {
                vertices: [remap(f[0]), remap(f[1]), remap(f[2])],
                normal: *n,
                offset: *d,
            })
            .collect();
        let mut halfspaces: Vec<(Vector3<T>, T)> = Vec::new();
        let merge = T::tol(1e-9);
        for (n, d) in &planes {
            if !halfspaces
                .iter()
                .any(|(m, e)| (m - n).amax() <= merge && (*e - *d).abs() <= merge * scale)
            {
                halfspaces.push((*n, *d));
            }
        }
        Ok(Self {
            vertices,
            facets,
            halfspaces,
            interior,
            scale,
        })
    }

    pub fn halfspaces(&self) -> &[(Vector3<T>, T)] {
        &self.halfspaces
    }

    /// Point strictly inside the hull.
    pub fn interior_point(&self) -> Vector3<T> {
        self.interior
    }

    /// Negative inside (depth below the nearest facet plane), positive
    /// outside (Euclidean distance to the hull).
    pub fn signed_distance(&self, p: &Vector3<T>) -> Result<T, HullError> {
        let worst = self
            .halfspaces
            .iter()
            .fold(T::lit(f64::NEG_INFINITY), |m, (n, d)| m.max(n.dot(p) - *d));
        if worst <= T::zero() {
            Ok(worst)
        } else {
            Ok(self.closest_point(p)?.1)
        }
    }

    /// Closest hull point to `p` and its distance; `p` itself when inside.
    pub fn closest_point(&self, p: &Vector3<T>) -> Result<(Vector3<T>, T), HullError> {
        if self.halfspaces.iter().all(|(n, d)| n.dot(p) <= *d) {
            return Ok((*p, T::zero()));
        }
        let rows: Vec<Vec<T>> = self.halfspaces.iter().map(|(n, _)| vec![n.x, n.y, n.z]).collect();
        let b: Vec<T> = self.halfspaces.iter().map(|(_, d)| *d).collect();
        let z = project_onto_polyhedron(&rows, &b, p.as_slice(), self.interior.as_slice())?;
        let c = Vector3::new(z[0], z[1], z[2]);
        Ok((c, (c - p).norm()))
    }

    /// Projector onto the span of the outward normals of the half-spaces
    /// through the boundary point `c`: `n nᵀ` on a facet, rank two on an
    /// edge and the identity at a vertex or inside.
    pub fn normal_space(&self, c: &Vector3<T>) -> Matrix3<T> {
        let tol = T::tol(1e-7) * self.scale;
        let active = self.halfspaces.iter().filter(|(n, d)| (n.dot(c) - *d).abs() <= tol).map(|(n, _)| *n);
        span_projector(active).unwrap_or_else(Matrix3::identity)
    }

    /// Outward edge normals `n·x ≤ d` of the horizontal footprint, counter-
    /// clockwise; empty when the footprint has no area.
    fn footprint_edges(&self) -> (Vec<Vector2<T>>, Vec<HalfPlane<T>>) {
        let footprint = monotone_chain(&self.vertices.iter().map(|v| Vector2::new(v.x, v.y)).collect::<Vec<_>>());
        let k = footprint.len();
        if k < 3 {
            return (footprint, Vec::new());
        }
        let edges = (0..k)
            .map(|i| {
                let e = footprint[(i + 1) % k] - footprint[i];
                let n = Vector2::new(e.y, -e.x).normalize();
                (n, n.dot(&footprint[i]))
            })
            .collect();
        (footprint, edges)
    }

    /// Closest point to the vertical line through `axis_xy`, measured in the
    /// horizontal plane. The returned 3D point has the hull footprint's
    /// closest xy and height `z`.
    pub fn closest_point_xy(&self, axis_xy: &Vector2<T>, z: T) -> Result<(Vector3<T>, T), HullError> {
        let (footprint, edges) = self.footprint_edges();
        let c = if edges.is_empty() {
            // vertical hull face only; the closest footprint point is a vertex
            footprint
                .iter()
                .min_by(|a, b| {
                    (*a - axis_xy)
                        .norm()
                        .partial_cmp(&(*b - axis_xy).norm())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .copied()
                .unwrap_or(*axis_xy)
        } else if edges.iter().all(|(n, d)| n.dot(axis_xy) <= *d) {
            *axis_xy
        } else {
            let rows: Vec<Vec<T>> = edges.iter().map(|(n, _)| vec![n.x, n.y]).collect();
            let b: Vec<T> = edges.iter().map(|(_, d)| *d).collect();
            let centroid = footprint.iter().fold(Vector2::zeros(), |s, v| s + v) / T::lit(footprint.len() as f64);
            let z = project_onto_polyhedron(&rows, &b, axis_xy.as_slice(), centroid.as_slice())?;
            Vector2::new(z[0], z[1])
        };
        Ok((Vector3::new(c.x, c.y, z), (c - axis_xy).norm()))
    }

    /// Footprint counterpart of [`normal_space`](Self::normal_space) for a
    /// point returned by [`closest_point_xy`](Self::closest_point_xy); the
    /// vertical direction is excluded.
    pub fn footprint_normal_space(&self, c_xy: &Vector2<T>) -> Matrix3<T> {
        let tol = T::tol(1e-7) * self.scale;
        let active = self
            .footprint_edges()
            .1
            .into_iter()
            .filter(|(n, d)| (n.dot(c_xy) - *d).abs() <= tol)
            .map(|(n, _)| Vector3::new(n.x, n.y, T::zero()));
        span_projector(active).unwrap_or_else(|| Matrix3::from_diagonal(&Vector3::new(T::one(), T::one(), T::zero())))
    }
}

/// Orthogonal projector onto the span of `vectors`; `None` when empty.
fn span_projector<T: Real>(vectors: impl Iterator<Item = Vector3<T>>) -> Option<Matrix3<T>> {
    let mut basis: Vec<Vector3<T>> = Vec::with_capacity(3);
    for v in vectors {
        let r = basis.iter().fold(v, |r, q| r - q * q.dot(&r));
        if r.norm() > T::tol(1e-6) * v.norm() {
            basis.push(r.normalize());
        }
    }
    if basis.is_empty() {
        return None;
    }
    Some(basis.iter().fold(Matrix3::zeros(), |p, q| p + q * q.transpose()))
}

fn argmax<T: Real>(pts: &[Vector3<T>], f: impl Fn(&Vector3<T>) -> T) -> usize {
    let mut best = 0;
    let mut value = T::lit(f64::NEG_INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let v = f(p);
        if v > value {
            value = v;
            best = i;
        }
    }
    best
}

fn dedup<T: Real>(points: &[Vector3<T>]) -> Vec<Vector3<T>> {
    let mut out: Vec<Vector3<T>> = Vec::with_capacity(points.len());
    let tol = T::tol(1e-12);
    for p in points {
        if !out.iter().any(|q| (q - p).amax() <= tol * (T::one() + p.amax())) {
            out.push(*p);
        }
    }
    out
}

/// Unit normal and offset of the face plane, reordering the face so the
/// normal points away from `interior`.
fn oriented_plane<T: Real>(pts: &[Vector3<T>], face: &mut [usize; 3], interior: &Vector3<T>) -> (Vector3<T>, T) {
    let [a, b, c] = *face;
    let mut n = (pts[b] - pts[a]).cross(&(pts[c] - pts[a]));
    if n.dot(&(interior - pts[a])) > T::zero() {
        face.swap(1, 2);
        n = -n;
    }
    let n = n.normalize();
    (n, n.dot(&pts[face[0]]))
}

/// Counter-clockwise convex hull of planar points.
fn monotone_chain<T: Real>(points: &[Vector2<T>]) -> Vec<Vector2<T>> {
    let mut pts: Vec<Vector2<T>> = points.to_vec();
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
    });
    let tol = T::tol(1e-12);
    pts.dedup_by(|a, b| (*a - *b).amax() <= tol);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector2<T>, a: &Vector2<T>, b: &Vector2<T>| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Vector2<T>> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= tol {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= tol {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Euclidean projection of `p` onto `{x : rows·x ≤ b}` starting from the
/// feasible point `start`.
fn project_onto_polyhedron<T: Real>(rows: &[Vec<T>], b: &[T], p: &[T], start: &[T]) -> Result<DVector<T>, HullError> {
    let d = p.len();
    let a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let h = DMatrix::identity(d, d) * T::lit(2.0);
    let g = DVector::from_iterator(d, p.iter().map(|v| -*v * T::lit(2.0)));
    let solver = PreparedQp::new(&h, &a)?;
    let sol = solver.solve(&g, &DVector::from_column_slice(b), Some(&DVector::from_column_slice(start)))?;
    Ok(sol.z)
}

/// Points whose hull is the safety hull: payload box corners and an
/// octahedron of radius `inflation` around each UAV.
pub fn hull_points<T: Real>(params: &SystemParams<T>, state: &SystemState<T>, geometry: &HullGeometry) -> Vec<Vector3<T>> {
    let r0 = euler_to_rotation(&state.theta0);
    let [hx, hy, hz] = geometry.payload_half_extents.map(T::lit);
    let mut pts = Vec::with_capacity(8 + 6 * params.n_uavs());
    for sx in [-T::one(), T::one()] {
        for sy in [-T::one(), T::one()] {
            for sz in [-T::one(), T::one()] {
                pts.push(state.r0 + r0 * Vector3::new(sx * hx, sy * hy, sz * hz));
            }
        }
    }
    let inf = T::lit(geometry.inflation);
    for ri in uav_positions(params, state) {
        if inf > T::zero() {
            for axis in 0..3 {
                let mut e = Vector3::zeros();
                e[axis] = inf;
                pts.push(ri + e);
                pts.push(ri - e);
            }
        } else {
            pts.push(ri);
        }
    }
    pts
}

pub fn build_hull<T: Real>(
    params: &SystemParams<T>,
    state: &SystemState<T>,
    geometry: &HullGeometry,
) -> Result<ConvexHull<T>, HullError> {
    ConvexHull::from_points(&hull_points(params, state, geometry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::equilibrium;
    use approx::assert_relative_eq;

    fn unit_cube() -> ConvexHull<f64> {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        ConvexHull::from_points(&pts).unwrap()
    }

    #[test]
    fn cube_face_projection() {
        let hull = unit_cube();
        assert_eq!(hull.vertices.len(), 8);
        assert_eq!(hull.halfspaces().len(), 6);
        let (c, d) = hull.closest_point(&Vector3::new(2.0, 0.5, 0.5)).unwrap();
        assert_relative_eq!(c, Vector3::new(1.0, 0.5, 0.5), epsilon = 1e-9);
        assert_relative_eq!(d, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn normal_space_rank_follows_active_facets() {
        let hull = unit_cube();
        let face = hull.normal_space(&Vector3::new(1.0, 0.5, 0.5));
        assert_relative_eq!(face, Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0)), epsilon = 1e-9);
        let edge = hull.normal_space(&Vector3::new(1.0, 1.0, 0.5));
        assert_relative_eq!(edge, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)), epsilon = 1e-9);
        let corner = hull.normal_space(&Vector3::new(1.0, 1.0, 1.0));
        assert_relative_eq!(corner, Matrix3::identity(), epsilon = 1e-9);
        let inside = hull.normal_space(&Vector3::new(0.5, 0.5, 0.5));
        assert_relative_eq!(inside, Matrix3::identity(), epsilon = 1e-9);
    }

    #[test]
    fn footprint_normal_space_is_horizontal() {
        let hull = unit_cube();
        let side = hull.footprint_normal_space(&Vector2::new(1.0, 0.5));
        assert_relative_eq!(side, Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0)), epsilon = 1e-9);
        let corner = hull.footprint_normal_space(&Vector2::new(0.0, 0.0));
        assert_relative_eq!(corner, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)), epsilon = 1e-9);
    }

    #[test]
    fn vertex_and_interior_queries() {
        let hull = unit_cube();
        let (c, d) = hull.closest_point(&Vector3::new(1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(c, Vector3::new(1.0, 1.0, 0.0), epsilon = 1e-12);
        assert!(d < 1e-12);
        let p = Vector3::new(0.3, 0.4, 0.5);
        assert_eq!(hull.closest_point(&p).unwrap(), (p, 0.0));
        assert_relative_eq!(hull.signed_distance(&p).unwrap(), -0.3, epsilon = 1e-12);
        let (c, d) = hull.closest_point(&Vector3::new(2.0, 2.0, 2.0)).unwrap();
        assert_relative_eq!(c, Vector3::new(1.0, 1.0, 1.0), epsilon = 1e-9);
        assert_relative_eq!(d, 3f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let pts: Vec<Vector3<f64>> = (0..6).map(|i| Vector3::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert_eq!(ConvexHull::from_points(&pts).unwrap_err(), HullError::DegenerateHull);
    }

    #[test]
    fn footprint_distance() {
        let hull = unit_cube();
        let (c, d) = hull.closest_point_xy(&Vector2::new(3.0, 0.5), -2.0).unwrap();
        assert_relative_eq!(d, 2.0, epsilon = 1e-9);
        assert_relative_eq!(c, Vector3::new(1.0, 0.5, -2.0), epsilon = 1e-9);
        let (_, d) = hull.closest_point_xy(&Vector2::new(0.2, 0.7), 0.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn point_payload_pyramid() {
        let params = SystemParams::<f64>::reference_quad();
        let (mut state, _) = equilibrium(&params, Vector3::zeros());
        state.r0 = Vector3::zeros();
        let geom = HullGeometry {
            payload_half_extents: [0.0; 3],
            inflation: 0.0,
        };
        let hull = build_hull(&params, &state, &geom).unwrap();
        assert_eq!(hull.vertices.len(), 5);
        assert_eq!(hull.halfspaces().len(), 5);
    }

    #[test]
    fn hull_translates_with_payload() {
        let params = SystemParams::<f64>::reference_quad();
        let (state, _) = equilibrium(&params, Vector3::zeros());
        let mut moved = state.clone();
        let d = Vector3::new(1.5, -2.0, 0.7);
        moved.r0 += d;
        let geom = HullGeometry::default();
        let a = build_hull(&params, &state, &geom).unwrap();
        let b = build_hull(&params, &moved, &geom).unwrap();
        assert_eq!(a.vertices.len(), b.vertices.len());
        for (va, vb) in a.vertices.iter().zip(&b.vertices) {
            assert_relative_eq!(vb - va, d, epsilon = 1e-12);
        }
    }

    #[test]
    fn uavs_and_corners_are_contained() {
        let params = SystemParams::<f64>::reference_quad();
        let (mut state, _) = equilibrium(&params, Vector3::new(1.0, 2.0, -5.0));
        state.theta0 = Vector3::new(0.05, -0.03, 0.4);
        state.uavs[1].q = Vector3::new(0.2, 0.1, 1.0).normalize();
        let hull = build_hull(&params, &state, &HullGeometry::default()).unwrap();
        for p in hull_points(&params, &state, &HullGeometry::default()) {
            assert!(hull.signed_distance(&p).unwrap() <= 1e-9);
        }
        for r in uav_positions(&params, &state) {
            assert!(hull.signed_distance(&r).unwrap() < 0.0);
        }
    }

    #[test]
    fn obstacle_kinematics() {
        let s = Obstacle::sphere([-6.0, 0.0, -5.0], 0.5, 0.5);
        assert_eq!(s.effective_radius(), 1.0);
        let st = obstacle_state(&s, 3.0);
        assert_eq!(st.position, Vector3::new(-6.0, 0.0, -5.0));
        assert_eq!(st.velocity, Vector3::zeros());
        assert_eq!(st.acceleration, Vector3::zeros());
        let shm = s.with_motion(ObstacleMotion::HarmonicOscillator {
            mean: [6.0, 0.0, -5.0],
            amplitude: [3.0, 0.0, 0.0],
            angular_frequency: 0.5,
            phase: 0.0,
        });
        let st = obstacle_state(&shm, 0.0);
        assert_eq!(st.position, Vector3::new(6.0, 0.0, -5.0));
        assert_relative_eq!(st.velocity, Vector3::new(1.5, 0.0, 0.0));
        // velocity is the derivative of position
        let h = 1e-6;
        let fd = (obstacle_state(&shm, 1.3 + h).position - obstacle_state(&shm, 1.3 - h).position) / (2.0 * h);
        assert_relative_eq!(fd, obstacle_state(&shm, 1.3).velocity, epsilon = 1e-8);
        let fd = (obstacle_state(&shm, 1.3 + h).velocity - obstacle_state(&shm, 1.3 - h).velocity) / (2.0 * h);
        assert_relative_eq!(fd, obstacle_state(&shm, 1.3).acceleration, epsilon = 1e-8);
    }
}
