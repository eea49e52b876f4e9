//! Fixed-size 2×2 linear algebra.

use crate::scalar::Real;

/// Plane vector `(u, v)`.
pub type Vec2<T> = [T; 2];

pub fn norm2<T: Real>(v: Vec2<T>) -> T {
    v[0].hypot(v[1])
}

/// Symmetric 2×2 matrix stored by its three independent entries, so the
/// off-diagonal pair is identical by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2<T> {
    pub p11: T,
    pub p12: T,
    pub p22: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(p11: T, p12: T, p22: T) -> Self {
        Self { p11, p12, p22 }
    }

    pub fn diag(d1: T, d2: T) -> Self {
        Self::new(d1, T::zero(), d2)
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn det(&self) -> T {
        self.p11 * self.p22 - self.p12 * self.p12
    }

    pub fn trace(&self) -> T {
        self.p11 + self.p22
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.p11 * s, self.p12 * s, self.p22 * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.p11 + o.p11, self.p12 + o.p12, self.p22 + o.p22)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.p11 - o.p11, self.p12 - o.p12, self.p22 - o.p22)
    }

    /// Spectral (operator 2-) norm: largest eigenvalue modulus.
    pub fn norm(&self) -> T {
        let half = T::lit(0.5);
        let m = (self.p11 + self.p22) * half;
        let r = ((self.p11 - self.p22) * half).hypot(self.p12);
        m.abs() + r
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (T, T) {
        let half = T::lit(0.5);
        let m = (self.p11 + self.p22) * half;
        let r = ((self.p11 - self.p22) * half).hypot(self.p12);
        (m - r, m + r)
    }

    pub fn apply(&self, z: Vec2<T>) -> Vec2<T> {
        [self.p11 * z[0] + self.p12 * z[1], self.p12 * z[0] + self.p22 * z[1]]
    }

    /// Quadratic form `⟨M e, e⟩` at the unit vector `e = (cos θ, sin θ)`.
    pub fn quad_at_angle(&self, theta: T) -> T {
        let (s, c) = theta.sin_cos();
        self.p11 * c * c + (self.p12 + self.p12) * c * s + self.p22 * s * s
    }

    pub fn to_mat(&self) -> Mat2<T> {
        Mat2::new(self.p11, self.p12, self.p12, self.p22)
    }
}

/// General 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

impl<T: Real> Mat2<T> {
    pub fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn apply(&self, z: Vec2<T>) -> Vec2<T> {
        [self.a11 * z[0] + self.a12 * z[1], self.a21 * z[0] + self.a22 * z[1]]
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    /// Real eigenvalues `(lo, hi)` when the discriminant is non-negative.
    pub fn real_eigenvalues(&self) -> Option<(T, T)> {
        let half = T::lit(0.5);
        let m = self.trace() * half;
        let disc = m * m - self.det();
        if disc < T::zero() {
            return None;
        }
        let r = disc.sqrt();
        Some((m - r, m + r))
    }

    /// Unit eigenvector for a real eigenvalue `sigma`.
    pub fn eigenvector(&self, sigma: T) -> Vec2<T> {
        // Rows of (A - σI) are orthogonal to the eigenvector; use the larger one.
        let r1 = [self.a11 - sigma, self.a12];
        let r2 = [self.a21, self.a22 - sigma];
        let row = if norm2(r1) >= norm2(r2) { r1 } else { r2 };
        let v = if norm2(row) == T::zero() { [T::one(), T::zero()] } else { [-row[1], row[0]] };
        let n = norm2(v);
        [v[0] / n, v[1] / n]
    }
}

/// `J⁻¹ M` for `J = [[0, 1], [-1, 0]]`, i.e. `J⁻¹ = [[0, -1], [1, 0]]`.
pub fn j_inv_times<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    Mat2::new(-m.a21, -m.a22, m.a11, m.a12)
}

/// Right-hand side of `z' = J⁻¹(λ I − M) z` for symmetric `M`.
pub fn linear_field<T: Real>(m: &Sym2<T>, lambda: T, z: Vec2<T>) -> Vec2<T> {
    // J⁻¹ (a, b) = (−b, a)
    let a = (lambda - m.p11) * z[0] - m.p12 * z[1];
    let b = -m.p12 * z[0] + (lambda - m.p22) * z[1];
    [-b, a]
}
