//! Planar primitives: vectors, closed segments, disks, ray casting and
//! segment intersection predicates.
//!
//! All tolerances are absolute and expressed in cell units.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Tolerance on normalized orientation values.
pub const EPS_GEOM: f64 = 1e-12;
/// Minimum ray parameter accepted as a forward hit.
pub const RAY_T_MIN: f64 = 1e-9;
/// Discriminant band treated as tangential contact.
pub const EPS_TANGENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `theta` from the x axis.
    #[inline]
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2 { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `angle`.
    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Closed segment `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    #[inline]
    pub fn new(a: Vec2, b: Vec2) -> Self {
        debug_assert!(a.is_finite() && b.is_finite());
        Segment { a, b }
    }

    #[inline]
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    #[inline]
    pub fn translate(&self, by: Vec2) -> Segment {
        Segment::new(self.a + by, self.b + by)
    }

    /// `(min, max)` corners of the bounding box.
    #[inline]
    pub fn bbox(&self) -> (Vec2, Vec2) {
        (
            Vec2::new(self.a.x.min(self.b.x), self.a.y.min(self.b.y)),
            Vec2::new(self.a.x.max(self.b.x), self.a.y.max(self.b.y)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Disk { center, radius }
    }

    #[inline]
    pub fn translate(&self, by: Vec2) -> Disk {
        Disk {
            center: self.center + by,
            radius: self.radius,
        }
    }

    /// Point of the boundary circle at angular position `theta`.
    #[inline]
    pub fn boundary_point(&self, theta: f64) -> Vec2 {
        self.center + Vec2::from_angle(theta) * self.radius
    }
}

/// Forward ray parameter of the first contact with `disk`, if any.
///
/// Returns the smallest root `t > RAY_T_MIN` of `|origin + t d - c| = r`.
/// A discriminant within `EPS_TANGENT` of zero counts as a grazing hit.
#[inline]
pub fn ray_disk_hit_t(origin: Vec2, direction: Vec2, disk: &Disk) -> Option<f64> {
    let oc = origin - disk.center;
    let b = oc.dot(direction);
    let c = oc.norm2() - disk.radius * disk.radius;
    let mut disc = b * b - c;
    if disc < -EPS_TANGENT {
        return None;
    }
    if disc < 0.0 {
        disc = 0.0;
    }
    let sq = disc.sqrt();
    // Near root via the cancellation-free form when heading towards the disk.
    let near = if b < 0.0 { c / (-b + sq) } else { -b - sq };
    if near.is_finite() && near > RAY_T_MIN {
        return Some(near);
    }
    let far = -b + sq;
    if far > RAY_T_MIN {
        Some(far)
    } else {
        None
    }
}

/// First intersection of a ray with a disk boundary, returning the ray
/// parameter and the contact point.
pub fn ray_disk_first_hit(origin: Vec2, direction: Vec2, disk: &Disk) -> Option<(f64, Vec2)> {
    debug_assert!((direction.norm() - 1.0).abs() <= 1e-12);
    ray_disk_hit_t(origin, direction, disk).map(|t| (t, origin + direction * t))
}

/// Specular reflection of `v` across the line orthogonal to `normal`.
#[inline]
pub fn reflect(v: Vec2, normal: Vec2) -> Vec2 {
    debug_assert!((v.norm() - 1.0).abs() <= 1e-12, "reflect: |v| != 1");
    debug_assert!((normal.norm() - 1.0).abs() <= 1e-12, "reflect: |n| != 1");
    debug_assert!(v.dot(normal) <= 1e-12, "reflect: v points away from the surface");
    v - normal * (2.0 * v.dot(normal))
}

/// How two closed segments meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    Disjoint,
    /// Single transversal crossing away from all endpoints.
    Proper,
    /// Intersecting, but at least one orientation test fell inside the
    /// tolerance band (touching endpoints, near-degenerate crossings).
    Touching,
    /// Collinear and overlapping in more than a point.
    CollinearOverlap,
}

impl Contact {
    #[inline]
    pub fn intersects(self) -> bool {
        !matches!(self, Contact::Disjoint)
    }
}

#[inline]
fn sign_with_tol(v: f64) -> i8 {
    if v > EPS_GEOM {
        1
    } else if v < -EPS_GEOM {
        -1
    } else {
        0
    }
}

#[inline]
fn bboxes_overlap(s1: &Segment, s2: &Segment, pad: f64) -> bool {
    let (lo1, hi1) = s1.bbox();
    let (lo2, hi2) = s2.bbox();
    lo1.x <= hi2.x + pad && lo2.x <= hi1.x + pad && lo1.y <= hi2.y + pad && lo2.y <= hi1.y + pad
}

/// Classify the contact between two closed segments.
///
/// Orientation values are cross products divided by the squared extent of
/// the pair's joint bounding box, then compared with `EPS_GEOM`.
pub fn classify(s1: &Segment, s2: &Segment) -> Contact {
    let (lo1, hi1) = s1.bbox();
    let (lo2, hi2) = s2.bbox();
    let span = (hi1.x.max(hi2.x) - lo1.x.min(lo2.x)).max(hi1.y.max(hi2.y) - lo1.y.min(lo2.y));
    if span == 0.0 {
        return Contact::Touching;
    }
    let pad = EPS_GEOM * span;
    if !bboxes_overlap(s1, s2, pad) {
        return Contact::Disjoint;
    }
    let inv = 1.0 / (span * span);
    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let o1 = sign_with_tol(d1.cross(s2.a - s1.a) * inv);
    let o2 = sign_with_tol(d1.cross(s2.b - s1.a) * inv);
    let o3 = sign_with_tol(d2.cross(s1.a - s2.a) * inv);
    let o4 = sign_with_tol(d2.cross(s1.b - s2.a) * inv);

    if o1 * o2 < 0 && o3 * o4 < 0 {
        return Contact::Proper;
    }
    if (o1 == 0 && o2 == 0) || (o3 == 0 && o4 == 0) {
        // Collinear within tolerance: compare projections on the longer axis.
        let along = if d1.norm2() >= d2.norm2() { d1 } else { d2 };
        let p = |v: Vec2| v.dot(along);
        let (a0, a1) = minmax(p(s1.a), p(s1.b));
        let (b0, b1) = minmax(p(s2.a), p(s2.b));
        let tol = pad * along.norm();
        let lo = a0.max(b0);
        let hi = a1.min(b1);
        return if hi < lo - tol {
            Contact::Disjoint
        } else if hi - lo > tol {
            Contact::CollinearOverlap
        } else {
            Contact::Touching
        };
    }
    if o1 * o2 > 0 || o3 * o4 > 0 {
        return Contact::Disjoint;
    }
    // One or more orientations vanish: an endpoint lies on the other segment's
    // supporting line, and the bounding boxes overlap, so the segments touch.
    Contact::Touching
}

#[inline]
fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// True iff the closed segments share at least one point.
#[inline]
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> bool {
    classify(s1, s2).intersects()
}

/// The unique common point of two segments, or `None` when they are
/// disjoint or collinear.
pub fn segment_crossing_point(s1: &Segment, s2: &Segment) -> Option<Vec2> {
    match classify(s1, s2) {
        Contact::Disjoint | Contact::CollinearOverlap => None,
        Contact::Proper | Contact::Touching => {
            let d1 = s1.b - s1.a;
            let d2 = s2.b - s2.a;
            let denom = d1.cross(d2);
            let scale = d1.norm() * d2.norm();
            if denom.abs() <= EPS_GEOM * scale {
                // Collinear touching at an endpoint: return the shared end.
                return [s1.a, s1.b]
                    .into_iter()
                    .flat_map(|p| [(p, s2.a), (p, s2.b)])
                    .min_by(|x, y| {
                        (x.0 - x.1)
                            .norm2()
                            .partial_cmp(&(y.0 - y.1).norm2())
                            .unwrap()
                    })
                    .map(|(p, q)| (p + q) * 0.5);
            }
            let t = (s2.a - s1.a).cross(d2) / denom;
            Some(s1.a + d1 * t.clamp(0.0, 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Vec2::new(ax, ay), Vec2::new(bx, by))
    }

    #[test]
    fn ray_hits_axis_aligned() {
        let d = Disk::new(Vec2::ZERO, 1.0);
        let (t, p) = ray_disk_first_hit(Vec2::new(-2.0, 0.0), Vec2::new(1.0, 0.0), &d).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!((p - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ray_misses() {
        let d = Disk::new(Vec2::ZERO, 1.0);
        assert!(ray_disk_first_hit(Vec2::new(-2.0, 2.0), Vec2::new(1.0, 0.0), &d).is_none());
    }

    #[test]
    fn ray_grazing_counts() {
        let d = Disk::new(Vec2::ZERO, 1.0);
        let (t, p) = ray_disk_first_hit(Vec2::new(-2.0, 1.0), Vec2::new(1.0, 0.0), &d).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!((p - Vec2::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn ray_leaving_boundary_does_not_rehit() {
        let d = Disk::new(Vec2::ZERO, 1.0);
        let o = Vec2::new(1.0, 0.0);
        assert!(ray_disk_first_hit(o, Vec2::from_angle(0.3), &d).is_none());
    }

    #[test]
    fn reflect_examples() {
        let r = reflect(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0));
        assert_eq!(r, Vec2::new(-1.0, 0.0));
        let r = reflect(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(r, Vec2::new(1.0, 0.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = reflect(Vec2::new(h, -h), Vec2::new(0.0, 1.0));
        assert!((r - Vec2::new(h, h)).norm() < 1e-15);
    }

    #[test]
    fn intersect_examples() {
        assert!(segments_intersect(&seg(0., 0., 1., 1.), &seg(0., 1., 1., 0.)));
        assert!(!segments_intersect(&seg(0., 0., 1., 0.), &seg(0., 1., 1., 1.)));
        assert!(segments_intersect(&seg(0., 0., 1., 0.), &seg(1., 0., 2., 1.)));
    }

    #[test]
    fn collinear_cases() {
        assert_eq!(
            classify(&seg(0., 0., 2., 0.), &seg(1., 0., 3., 0.)),
            Contact::CollinearOverlap
        );
        assert_eq!(
            classify(&seg(0., 0., 1., 0.), &seg(2., 0., 3., 0.)),
            Contact::Disjoint
        );
        assert_eq!(
            classify(&seg(0., 0., 1., 0.), &seg(1., 0., 3., 0.)),
            Contact::Touching
        );
        assert!(segment_crossing_point(&seg(0., 0., 2., 0.), &seg(1., 0., 3., 0.)).is_none());
    }

    #[test]
    fn crossing_point_examples() {
        let p = segment_crossing_point(&seg(0., 0., 2., 0.), &seg(1., -1., 1., 1.)).unwrap();
        assert!((p - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert!(segment_crossing_point(&seg(0., 0., 1., 0.), &seg(2., 0., 3., 0.)).is_none());
        assert!(segment_crossing_point(&seg(0., 0., 1., 1.), &seg(1., 0., 2., 1.)).is_none());
        let p = segment_crossing_point(&seg(0., 0., 1., 0.), &seg(1., 0., 2., 1.)).unwrap();
        assert!((p - Vec2::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn t_junction_touches() {
        assert_eq!(
            classify(&seg(0., 0., 2., 0.), &seg(1., 0., 1., 1.)),
            Contact::Touching
        );
    }
}
