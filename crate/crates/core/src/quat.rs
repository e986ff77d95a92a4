//! Quaternion scalar algebra.
//!
//! A quaternion is stored as its four real components in the fixed order
//! `(r, x, y, z)`, i.e. `q = r + x i + y j + z k` with
//! `i^2 = j^2 = k^2 = ijk = -1`. Every layout and serialization in this crate
//! follows that component order.

use std::ops::{Add, Mul, Neg, Sub};

/// One hypercomplex scalar in double precision.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quaternion {
    pub r: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);

    /// Multiplicative identity `1 + 0i + 0j + 0k`.
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(r: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { r, x, y, z }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.r, self.x, self.y, self.z]
    }

    /// Hamilton product `self ⊗ rhs`. Non-commutative.
    #[inline(always)]
    pub fn hamilton(self, q: Quaternion) -> Quaternion {
        Quaternion {
            r: self.r * q.r - self.x * q.x - self.y * q.y - self.z * q.z,
            x: self.r * q.x + self.x * q.r + self.y * q.z - self.z * q.y,
            y: self.r * q.y - self.x * q.z + self.y * q.r + self.z * q.x,
            z: self.r * q.z + self.x * q.y - self.y * q.x + self.z * q.r,
        }
    }

    /// Conjugate `r - xi - yj - zk`.
    ///
    /// Left-multiplication by the conjugate is the adjoint of
    /// left-multiplication by `self` under the Euclidean inner product on the
    /// four components, which is what the backward passes rely on.
    #[inline(always)]
    pub const fn conjugate(self) -> Quaternion {
        Quaternion {
            r: self.r,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Euclidean norm of the four components.
    pub fn norm(self) -> f64 {
        (self.r * self.r + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// The 4x4 real matrix `M(q)` with `M(q) · vec(p) = vec(q ⊗ p)` for every
    /// `p`, where `vec` stacks components in `(r, x, y, z)` order. Rows follow
    /// the four output lines of the Hamilton product.
    pub fn to_real_matrix(self) -> [[f64; 4]; 4] {
        let Quaternion { r, x, y, z } = self;
        [
            [r, -x, -y, -z],
            [x, r, -z, y],
            [y, z, r, -x],
            [z, -y, x, r],
        ]
    }

    /// Apply a real function to each of the four components ("split" form).
    pub fn split_apply(self, f: impl Fn(f64) -> f64) -> Quaternion {
        Quaternion {
            r: f(self.r),
            x: f(self.x),
            y: f(self.y),
            z: f(self.z),
        }
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, q: Quaternion) -> Quaternion {
        Quaternion::new(self.r + q.r, self.x + q.x, self.y + q.y, self.z + q.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, q: Quaternion) -> Quaternion {
        Quaternion::new(self.r - q.r, self.x - q.x, self.y - q.y, self.z - q.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.r, -self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.r * s, self.x * s, self.y * s, self.z * s)
    }
}

/// Multiply a 4x4 matrix by a component vector. Used by tests comparing the
/// matrix representation against the Hamilton product.
pub fn mat4_mul_vec(m: &[[f64; 4]; 4], v: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (row, o) in m.iter().zip(out.iter_mut()) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}
