//! Convex solid primitives: half-space clipping, volumes, face contact and rigid transforms.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Classification band for vertices lying on a clipping plane (meters).
pub const PLANE_EPS: f64 = 1e-9;
/// Polyhedra whose volume falls below this are treated as empty (m³).
pub const SLIVER_VOLUME: f64 = 1e-12;
/// Maximum plane separation for two faces to count as touching (m).
pub const COPLANAR_TOL: f64 = 1e-6;
/// Tolerance on `1 + n_a · n_b` for two face normals to count as opposed.
pub const ANTI_ALIGN_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Vec3::new(v, v, v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn try_normalize(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 1e-300 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    /// Any unit vector orthogonal to `self` (which must be unit length).
    pub fn any_orthonormal(self) -> Vec3 {
        let helper = if self.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        self.cross(helper).try_normalize().unwrap_or(Vec3::Z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::splat_const(f64::INFINITY),
        max: Vec3::splat_const(f64::NEG_INFINITY),
    };

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Aabb {
        points.into_iter().fold(Aabb::EMPTY, |b, p| b.grow(*p))
    }

    pub fn grow(self, p: Vec3) -> Aabb {
        Aabb { min: self.min.min(p), max: self.max.max(p) }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    /// Overlap test with a symmetric slack `tol` on every axis.
    pub fn overlaps(&self, o: &Aabb, tol: f64) -> bool {
        self.min.x <= o.max.x + tol
            && o.min.x <= self.max.x + tol
            && self.min.y <= o.max.y + tol
            && o.min.y <= self.max.y + tol
            && self.min.z <= o.max.z + tol
            && o.min.z <= self.max.z + tol
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: Vec3) -> f64 {
        let clamped = p.max(self.min).min(self.max);
        (p - clamped).norm_squared()
    }

    /// Ray slab test; returns the parametric entry/exit interval if hit.
    pub fn ray_interval(&self, origin: Vec3, inv_dir: Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for axis in 0..3 {
            let o = origin.component(axis);
            let inv = inv_dir.component(axis);
            let (lo, hi) = (self.min.component(axis), self.max.component(axis));
            let mut a = (lo - o) * inv;
            let mut b = (hi - o) * inv;
            if a.is_nan() || b.is_nan() {
                // Ray parallel to the slab and lying on its boundary.
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

impl Vec3 {
    const fn splat_const(v: f64) -> Vec3 {
        Vec3 { x: v, y: v, z: v }
    }
}

/// Points `p` with `normal · p <= offset` are inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    /// Builds a half-space, normalizing `normal` (and scaling `offset` to match).
    pub fn new(normal: Vec3, offset: f64) -> Option<HalfSpace> {
        let n = normal.norm();
        if !n.is_finite() || n <= 1e-300 || !offset.is_finite() {
            return None;
        }
        Some(HalfSpace { normal: normal / n, offset: offset / n })
    }

    /// Half-space bounded by the plane through `point` with outward `normal`.
    pub fn through_point(normal: Vec3, point: Vec3) -> Option<HalfSpace> {
        let n = normal.try_normalize()?;
        Some(HalfSpace { normal: n, offset: n.dot(point) })
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.signed_distance(p) <= 0.0
    }

    /// The complementary half-space (sharing the boundary plane).
    pub fn flipped(&self) -> HalfSpace {
        HalfSpace { normal: -self.normal, offset: -self.offset }
    }

    pub fn is_normalized(&self) -> bool {
        (self.normal.norm() - 1.0).abs() <= 1e-9
    }
}

/// Unit quaternion, scalar-first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Serialize for Quat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.w, self.x, self.y, self.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Quat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        Ok(Quat { w, x, y, z })
    }
}

/// Hamilton product; `a * b` rotates by `b` first.
impl std::ops::Mul for Quat {
    type Output = Quat;

    fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let Some(a) = axis.try_normalize() else {
            return Quat::IDENTITY;
        };
        let (s, c) = (angle * 0.5).sin_cos();
        Quat { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    /// Rotation whose columns are the given orthonormal basis vectors.
    pub fn from_basis(x: Vec3, y: Vec3, z: Vec3) -> Quat {
        let (m00, m01, m02) = (x.x, y.x, z.x);
        let (m10, m11, m12) = (x.y, y.y, z.y);
        let (m20, m21, m22) = (x.z, y.z, z.z);
        let trace = m00 + m11 + m22;
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat { w: 0.25 * s, x: (m21 - m12) / s, y: (m02 - m20) / s, z: (m10 - m01) / s }
        } else if m00 > m11 && m00 > m22 {
            let s = (1.0 + m00 - m11 - m22).sqrt() * 2.0;
            Quat { w: (m21 - m12) / s, x: 0.25 * s, y: (m01 + m10) / s, z: (m02 + m20) / s }
        } else if m11 > m22 {
            let s = (1.0 + m11 - m00 - m22).sqrt() * 2.0;
            Quat { w: (m02 - m20) / s, x: (m01 + m10) / s, y: 0.25 * s, z: (m12 + m21) / s }
        } else {
            let s = (1.0 + m22 - m00 - m11).sqrt() * 2.0;
            Quat { w: (m10 - m01) / s, x: (m02 + m20) / s, y: (m12 + m21) / s, z: 0.25 * s }
        };
        q.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Quat::IDENTITY;
        }
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }

    pub fn conjugate(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Rigid transform: rotate, then translate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transform {
    pub translation: Vec3,
    pub rotation: Quat,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { translation: Vec3::ZERO, rotation: Quat::IDENTITY };

    pub fn new(translation: Vec3, rotation: Quat) -> Transform {
        Transform { translation, rotation }
    }

    pub fn from_translation(translation: Vec3) -> Transform {
        Transform { translation, rotation: Quat::IDENTITY }
    }

    /// Camera-style pose at `eye` whose local −Z axis points at `target` and local +Y is
    /// as close to `up` as possible.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Transform {
        let forward = (target - eye).try_normalize().unwrap_or(-Vec3::Z);
        let right = forward.cross(up).try_normalize().unwrap_or_else(|| forward.any_orthonormal());
        let true_up = right.cross(forward);
        Transform { translation: eye, rotation: Quat::from_basis(right, true_up, -forward) }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            translation: self.apply(other.translation),
            rotation: (self.rotation * other.rotation).normalized(),
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv = self.rotation.conjugate();
        Transform { translation: -inv.rotate(self.translation), rotation: inv }
    }
}

/// Closed convex solid as an explicit vertex list plus face loops, each loop
/// counter-clockwise when seen from outside.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolyhedron {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<Vec<usize>>,
}

impl ConvexPolyhedron {
    /// Axis-aligned box spanning `min..max`.
    pub fn cuboid(min: Vec3, max: Vec3) -> ConvexPolyhedron {
        let v = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        let vertices = vec![
            v(false, false, false),
            v(true, false, false),
            v(true, true, false),
            v(false, true, false),
            v(false, false, true),
            v(true, false, true),
            v(true, true, true),
            v(false, true, true),
        ];
        let faces = vec![
            vec![0, 3, 2, 1], // -z
            vec![4, 5, 6, 7], // +z
            vec![0, 4, 7, 3], // -x
            vec![1, 2, 6, 5], // +x
            vec![0, 1, 5, 4], // -y
            vec![3, 7, 6, 2], // +y
        ];
        ConvexPolyhedron { vertices, faces }
    }

    pub fn unit_cube() -> ConvexPolyhedron {
        ConvexPolyhedron::cuboid(Vec3::ZERO, Vec3::splat(1.0))
    }

    /// Tetrahedron from four points; the orientation is fixed up automatically.
    pub fn tetrahedron(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> ConvexPolyhedron {
        let (b, c) = if (b - a).cross(c - a).dot(d - a) > 0.0 { (c, b) } else { (b, c) };
        ConvexPolyhedron {
            vertices: vec![a, b, c, d],
            faces: vec![vec![0, 1, 2], vec![0, 3, 1], vec![1, 3, 2], vec![2, 3, 0]],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.len() < 4 || self.vertices.len() < 4
    }

    pub fn face_points(&self, face: usize) -> impl Iterator<Item = Vec3> + '_ {
        self.faces[face].iter().map(move |&i| self.vertices[i])
    }

    /// Area-weighted outward normal (Newell); its length is twice the face area.
    fn face_newell(&self, face: usize) -> Vec3 {
        newell(&self.faces[face].iter().map(|&i| self.vertices[i]).collect::<Vec<_>>())
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_newell(face).try_normalize().unwrap_or(Vec3::ZERO)
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_newell(face).norm()
    }

    pub fn face_centroid(&self, face: usize) -> Vec3 {
        let loop_ = &self.faces[face];
        loop_.iter().fold(Vec3::ZERO, |acc, &i| acc + self.vertices[i]) / loop_.len() as f64
    }

    /// Supporting half-space of a face (outward normal).
    pub fn face_plane(&self, face: usize) -> HalfSpace {
        let n = self.face_normal(face);
        HalfSpace { normal: n, offset: n.dot(self.face_centroid(face)) }
    }

    /// Signed volume by the divergence theorem; non-negative for valid solids.
    pub fn volume(&self) -> f64 {
        let origin = self.vertices.first().copied().unwrap_or(Vec3::ZERO);
        let mut six_v = 0.0;
        for face in &self.faces {
            if face.len() < 3 {
                continue;
            }
            let a = self.vertices[face[0]] - origin;
            for k in 1..face.len() - 1 {
                let b = self.vertices[face[k]] - origin;
                let c = self.vertices[face[k + 1]] - origin;
                six_v += a.dot(b.cross(c));
            }
        }
        six_v / 6.0
    }

    /// Center of mass of the uniform-density solid.
    pub fn centroid(&self) -> Vec3 {
        let origin = self.vertices.first().copied().unwrap_or(Vec3::ZERO);
        let mut six_v = 0.0;
        let mut acc = Vec3::ZERO;
        for face in &self.faces {
            if face.len() < 3 {
                continue;
            }
            let a = self.vertices[face[0]] - origin;
            for k in 1..face.len() - 1 {
                let b = self.vertices[face[k]] - origin;
                let c = self.vertices[face[k + 1]] - origin;
                let v = a.dot(b.cross(c));
                six_v += v;
                acc += (a + b + c) * (v / 4.0);
            }
        }
        if six_v.abs() < 1e-300 {
            return self.vertices.iter().fold(Vec3::ZERO, |s, &v| s + v)
                / self.vertices.len().max(1) as f64;
        }
        origin + acc / six_v
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Point inclusion with slack `tol` on every face plane.
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        (0..self.faces.len()).all(|f| self.face_plane(f).signed_distance(p) <= tol)
    }

    /// Cached planes for repeated inclusion tests.
    pub fn planes(&self) -> Vec<HalfSpace> {
        (0..self.faces.len()).map(|f| self.face_plane(f)).collect()
    }

    pub fn transformed(&self, t: &Transform) -> ConvexPolyhedron {
        ConvexPolyhedron {
            vertices: self.vertices.iter().map(|&v| t.apply(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, d: Vec3) -> ConvexPolyhedron {
        ConvexPolyhedron {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Checks convexity (tol 1e-7), closedness and orientation.
    pub fn validate(&self) -> Result<(), String> {
        if self.is_empty() {
            return Err("fewer than 4 faces or vertices".into());
        }
        for (fi, face) in self.faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(format!("face {fi} has {} vertices", face.len()));
            }
            if face.iter().any(|&i| i >= self.vertices.len()) {
                return Err(format!("face {fi} references a missing vertex"));
            }
        }
        let mut edges = std::collections::BTreeMap::<(usize, usize), i32>::new();
        for face in &self.faces {
            for k in 0..face.len() {
                let (a, b) = (face[k], face[(k + 1) % face.len()]);
                *edges.entry((a, b)).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &edges {
            if n != 1 || edges.get(&(b, a)) != Some(&1) {
                return Err(format!("edge {a}-{b} is not shared by exactly two faces"));
            }
        }
        for f in 0..self.faces.len() {
            let plane = self.face_plane(f);
            for (vi, &v) in self.vertices.iter().enumerate() {
                let d = plane.signed_distance(v);
                if d > 1e-7 {
                    return Err(format!("vertex {vi} lies {d:e} outside face {f}"));
                }
            }
        }
        if self.volume() < 0.0 {
            return Err("negative volume".into());
        }
        Ok(())
    }

    /// `self ∩ hs`, or `None` when the intersection is empty or a sliver
    /// (volume below [`SLIVER_VOLUME`]).
    pub fn clip(&self, hs: &HalfSpace) -> Option<ConvexPolyhedron> {
        let dist: Vec<f64> = self.vertices.iter().map(|&v| hs.signed_distance(v)).collect();
        if dist.iter().all(|&d| d <= PLANE_EPS) {
            return Some(self.clone());
        }
        if dist.iter().all(|&d| d >= -PLANE_EPS) {
            return None;
        }
        let side = |d: f64| -> i8 {
            if d > PLANE_EPS {
                1
            } else if d < -PLANE_EPS {
                -1
            } else {
                0
            }
        };

        let mut vertices = self.vertices.clone();
        let mut edge_points = std::collections::BTreeMap::<(usize, usize), usize>::new();
        let mut faces: Vec<Vec<usize>> = Vec::with_capacity(self.faces.len() + 1);
        let mut on_plane = std::collections::BTreeSet::new();

        for face in &self.faces {
            if face.iter().all(|&i| side(dist[i]) == 0) {
                // Coplanar with the cut; the cap face replaces it.
                continue;
            }
            let mut out = Vec::with_capacity(face.len() + 1);
            for k in 0..face.len() {
                let a = face[k];
                let b = face[(k + 1) % face.len()];
                let (sa, sb) = (side(dist[a]), side(dist[b]));
                if sa <= 0 {
                    out.push(a);
                    if sa == 0 {
                        on_plane.insert(a);
                    }
                }
                if (sa < 0 && sb > 0) || (sa > 0 && sb < 0) {
                    let key = (a.min(b), a.max(b));
                    let idx = *edge_points.entry(key).or_insert_with(|| {
                        let (p, q) = (self.vertices[key.0], self.vertices[key.1]);
                        let (dp, dq) = (dist[key.0], dist[key.1]);
                        vertices.push(p + (q - p) * (dp / (dp - dq)));
                        vertices.len() - 1
                    });
                    on_plane.insert(idx);
                    out.push(idx);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }

        if on_plane.len() >= 3 {
            let cap: Vec<usize> = on_plane.into_iter().collect();
            faces.push(order_loop(&vertices, &cap, hs.normal));
        }

        // Drop zero-area faces (e.g. a face touching the plane along an edge).
        faces.retain(|f| newell(&f.iter().map(|&i| vertices[i]).collect::<Vec<_>>()).norm() > 1e-18);

        let poly = compact(vertices, faces);
        if poly.is_empty() || poly.volume() < SLIVER_VOLUME {
            return None;
        }
        Some(poly)
    }

    /// Splits by the plane of `hs` into (inside, outside) parts.
    pub fn split(&self, hs: &HalfSpace) -> (Option<ConvexPolyhedron>, Option<ConvexPolyhedron>) {
        (self.clip(hs), self.clip(&hs.flipped()))
    }

    /// Intersection with a sequence of half-spaces.
    pub fn clip_all<'a>(&self, planes: impl IntoIterator<Item = &'a HalfSpace>) -> Option<ConvexPolyhedron> {
        let mut cur = self.clone();
        for hs in planes {
            cur = cur.clip(hs)?;
        }
        Some(cur)
    }
}

/// Area and centroid of the touching region between two solids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub area: f64,
    pub centroid: Vec3,
}

/// Total area of overlap between coplanar, oppositely oriented face pairs of
/// `a` and `b`. Zero when the solids do not touch.
pub fn shared_face_area(a: &ConvexPolyhedron, b: &ConvexPolyhedron) -> f64 {
    shared_face_contact(a, b).map_or(0.0, |c| c.area)
}

/// Like [`shared_face_area`] but also reports the area-weighted centroid of the
/// contact region.
pub fn shared_face_contact(a: &ConvexPolyhedron, b: &ConvexPolyhedron) -> Option<Contact> {
    if !a.aabb().overlaps(&b.aabb(), COPLANAR_TOL) {
        return None;
    }
    let planes_b = b.planes();
    let mut area = 0.0;
    let mut moment = Vec3::ZERO;
    for fa in 0..a.faces.len() {
        let pa = a.face_plane(fa);
        if pa.normal == Vec3::ZERO {
            continue;
        }
        for (fb, pb) in planes_b.iter().enumerate() {
            if 1.0 + pa.normal.dot(pb.normal) > ANTI_ALIGN_TOL {
                continue;
            }
            if b.face_points(fb).any(|p| pa.signed_distance(p).abs() > COPLANAR_TOL) {
                continue;
            }
            if a.face_points(fa).any(|p| pb.signed_distance(p).abs() > COPLANAR_TOL) {
                continue;
            }
            // Project both loops onto a's face plane; b's loop is reversed there.
            let u = pa.normal.any_orthonormal();
            let v = pa.normal.cross(u);
            let origin = a.face_centroid(fa);
            let to2 = |p: Vec3| [(p - origin).dot(u), (p - origin).dot(v)];
            let poly_a: Vec<[f64; 2]> = a.face_points(fa).map(to2).collect();
            let mut poly_b: Vec<[f64; 2]> = b.face_points(fb).map(to2).collect();
            poly_b.reverse();
            let overlap = convex_polygon_intersection(&poly_a, &poly_b);
            let (ar, c) = polygon_area_centroid(&overlap);
            if ar > 0.0 {
                area += ar;
                moment += (origin + u * c[0] + v * c[1]) * ar;
            }
        }
    }
    (area > 0.0).then(|| Contact { area, centroid: moment / area })
}

/// Newell normal of a polygon loop; length equals twice the area.
pub(crate) fn newell(points: &[Vec3]) -> Vec3 {
    let mut n = Vec3::ZERO;
    for k in 0..points.len() {
        let (a, b) = (points[k], points[(k + 1) % points.len()]);
        n.x += (a.y - b.y) * (a.z + b.z);
        n.y += (a.z - b.z) * (a.x + b.x);
        n.z += (a.x - b.x) * (a.y + b.y);
    }
    n
}

/// Orders coplanar points counter-clockwise around `normal`.
fn order_loop(vertices: &[Vec3], idx: &[usize], normal: Vec3) -> Vec<usize> {
    let center = idx.iter().fold(Vec3::ZERO, |s, &i| s + vertices[i]) / idx.len() as f64;
    let u = normal.any_orthonormal();
    let v = normal.cross(u);
    let mut keyed: Vec<(f64, usize)> = idx
        .iter()
        .map(|&i| {
            let d = vertices[i] - center;
            (d.dot(v).atan2(d.dot(u)), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Removes unreferenced vertices and renumbers face loops.
fn compact(vertices: Vec<Vec3>, faces: Vec<Vec<usize>>) -> ConvexPolyhedron {
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out = Vec::new();
    let faces = faces
        .into_iter()
        .map(|f| {
            f.into_iter()
                .map(|i| {
                    if remap[i] == usize::MAX {
                        remap[i] = out.len();
                        out.push(vertices[i]);
                    }
                    remap[i]
                })
                .collect()
        })
        .collect();
    ConvexPolyhedron { vertices: out, faces }
}

/// Sutherland–Hodgman clip of convex CCW polygon `subject` by convex CCW `clipper`.
pub(crate) fn convex_polygon_intersection(subject: &[[f64; 2]], clipper: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    for k in 0..clipper.len() {
        if out.is_empty() {
            break;
        }
        let a = clipper[k];
        let b = clipper[(k + 1) % clipper.len()];
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let p = input[i];
            let q = input[(i + 1) % input.len()];
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]);
            }
        }
    }
    out
}

pub(crate) fn polygon_area_centroid(poly: &[[f64; 2]]) -> (f64, [f64; 2]) {
    if poly.len() < 3 {
        return (0.0, [0.0, 0.0]);
    }
    let mut a2 = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let cr = p[0] * q[1] - q[0] * p[1];
        a2 += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    if a2.abs() < 1e-300 {
        return (0.0, [0.0, 0.0]);
    }
    (0.5 * a2, [cx / (3.0 * a2), cy / (3.0 * a2)])
}
