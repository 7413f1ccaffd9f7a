//! Plane geometry: points, triangles, and cavity shape descriptions.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// z-component of the cross product, twice the signed area of (0, self, other).
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }
}

impl<T: Scalar> Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

/// Signed area of triangle (a, b, c); positive for counterclockwise order.
pub fn signed_area<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    (b - a).cross(c - a) * T::half()
}

/// Barycentric coordinates of `p` with respect to triangle (a, b, c).
pub fn barycentric<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>, c: Point2<T>) -> [T; 3] {
    let area = signed_area(a, b, c);
    let la = signed_area(p, b, c) / area;
    let lb = signed_area(a, p, c) / area;
    let lc = signed_area(a, b, p) / area;
    [la, lb, lc]
}

/// Cavity geometry used for synthetic data and reconstruction scoring.
///
/// Every variant has a well-defined inside test on the whole plane. Bean is a
/// star-shaped nonconvex closed curve `rho(theta) = r (1 + 0.25 cos t - 0.35 cos 2t)`
/// around its center.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec<T> {
    Disk { center: [T; 2], r: T },
    Ellipse { center: [T; 2], a: T, b: T },
    Rectangle { center: [T; 2], hx: T, hy: T },
    Bean { center: [T; 2], r: T },
    Union { parts: Vec<ShapeSpec<T>> },
}

impl<T: Scalar> ShapeSpec<T> {
    pub fn contains(&self, p: Point2<T>) -> bool {
        match self {
            ShapeSpec::Disk { center, r } => {
                let d = p - Point2::new(center[0], center[1]);
                d.dot(d) <= *r * *r
            }
            ShapeSpec::Ellipse { center, a, b } => {
                let d = p - Point2::new(center[0], center[1]);
                let u = d.x / *a;
                let v = d.y / *b;
                u * u + v * v <= T::one()
            }
            ShapeSpec::Rectangle { center, hx, hy } => {
                let d = p - Point2::new(center[0], center[1]);
                d.x.abs() <= *hx && d.y.abs() <= *hy
            }
            ShapeSpec::Bean { center, r } => {
                let d = p - Point2::new(center[0], center[1]);
                let dist = d.norm();
                if dist == T::zero() {
                    return true;
                }
                let theta = d.y.atan2(d.x);
                dist <= *r * bean_radius(theta)
            }
            ShapeSpec::Union { parts } => parts.iter().any(|s| s.contains(p)),
        }
    }

    /// Axis-aligned bounding box (xmin, ymin, xmax, ymax).
    pub fn bbox(&self) -> [T; 4] {
        match self {
            ShapeSpec::Disk { center, r } => {
                [center[0] - *r, center[1] - *r, center[0] + *r, center[1] + *r]
            }
            ShapeSpec::Ellipse { center, a, b } => {
                [center[0] - *a, center[1] - *b, center[0] + *a, center[1] + *b]
            }
            ShapeSpec::Rectangle { center, hx, hy } => {
                [center[0] - *hx, center[1] - *hy, center[0] + *hx, center[1] + *hy]
            }
            ShapeSpec::Bean { center, r } => {
                // rho <= 1.6 r for the fixed profile
                let m = *r * T::cast(1.6);
                [center[0] - m, center[1] - m, center[0] + m, center[1] + m]
            }
            ShapeSpec::Union { parts } => {
                let mut bb = [T::infinity(), T::infinity(), -T::infinity(), -T::infinity()];
                for s in parts {
                    let b = s.bbox();
                    bb[0] = bb[0].min(b[0]);
                    bb[1] = bb[1].min(b[1]);
                    bb[2] = bb[2].max(b[2]);
                    bb[3] = bb[3].max(b[3]);
                }
                bb
            }
        }
    }

    /// Closed polyline outlining the shape (for overlays and reports).
    pub fn outline(&self, samples: usize) -> Vec<Vec<Point2<T>>> {
        match self {
            ShapeSpec::Disk { center, r } => {
                let c = Point2::new(center[0], center[1]);
                vec![param_curve(samples, |t: T| {
                    c + Point2::new(t.cos() * *r, t.sin() * *r)
                })]
            }
            ShapeSpec::Ellipse { center, a, b } => {
                let c = Point2::new(center[0], center[1]);
                vec![param_curve(samples, |t: T| {
                    c + Point2::new(t.cos() * *a, t.sin() * *b)
                })]
            }
            ShapeSpec::Rectangle { center, hx, hy } => {
                let c = Point2::new(center[0], center[1]);
                vec![vec![
                    c + Point2::new(-*hx, -*hy),
                    c + Point2::new(*hx, -*hy),
                    c + Point2::new(*hx, *hy),
                    c + Point2::new(-*hx, *hy),
                    c + Point2::new(-*hx, -*hy),
                ]]
            }
            ShapeSpec::Bean { center, r } => {
                let c = Point2::new(center[0], center[1]);
                vec![param_curve(samples, |t: T| {
                    let rho = *r * bean_radius(t);
                    c + Point2::new(t.cos() * rho, t.sin() * rho)
                })]
            }
            ShapeSpec::Union { parts } => {
                parts.iter().flat_map(|s| s.outline(samples)).collect()
            }
        }
    }
}

fn bean_radius<T: Scalar>(theta: T) -> T {
    T::one() + T::cast(0.25) * theta.cos() - T::cast(0.35) * (theta * T::two()).cos()
}

fn param_curve<T: Scalar>(samples: usize, f: impl Fn(T) -> Point2<T>) -> Vec<Point2<T>> {
    let n = samples.max(8);
    (0..=n)
        .map(|i| {
            let t = T::cast(2.0 * std::f64::consts::PI) * T::cast(i as f64) / T::cast(n as f64);
            f(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_area_orientation() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(1.0, 0.0);
        let c = Point2::new(0.0, 1.0);
        assert_eq!(signed_area(a, b, c), 0.5);
        assert_eq!(signed_area(a, c, b), -0.5);
    }

    #[test]
    fn barycentric_partition_of_unity() {
        let a = Point2::new(-0.3, 0.1);
        let b = Point2::new(0.9, 0.2);
        let c = Point2::new(0.1, 1.4);
        let p = Point2::new(0.2, 0.5);
        let l = barycentric(p, a, b, c);
        assert!((l[0] + l[1] + l[2] - 1.0f64).abs() < 1e-14);
        let q = a * l[0] + b * l[1] + c * l[2];
        assert!((q - p).norm() < 1e-14);
    }

    #[test]
    fn shape_inside_tests() {
        let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
        assert!(disk.contains(Point2::new(0.2, 0.1)));
        assert!(!disk.contains(Point2::new(0.3, 0.3)));

        let rect = ShapeSpec::Rectangle { center: [0.1, 0.0], hx: 0.2, hy: 0.1 };
        assert!(rect.contains(Point2::new(0.25, 0.05)));
        assert!(!rect.contains(Point2::new(0.35, 0.0)));

        let bean = ShapeSpec::Bean { center: [0.0, 0.0], r: 0.3 };
        assert!(bean.contains(Point2::new(0.0, 0.0)));
        // pinched side (theta = pi): rho = r * 0.4
        assert!(!bean.contains(Point2::new(-0.2, 0.0)));
        assert!(bean.contains(Point2::new(0.0, 0.35)));

        let union = ShapeSpec::Union { parts: vec![disk.clone(), rect] };
        assert!(union.contains(Point2::new(0.25, 0.05)));
        assert!(union.contains(Point2::new(-0.2, 0.1)));
    }
}
