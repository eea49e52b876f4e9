//! Natural cubic spline in `ln x` for tabulated potentials.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Interpolant of `V(x)` through `(x_i, V_i)`, cubic in `ln x` inside the
/// table and a pure power law `c / x^a` outside it.
#[derive(Debug, Clone)]
pub struct LogSpline<T> {
    s: Vec<T>,
    v: Vec<T>,
    m: Vec<T>,
    /// `(c, a)` with `V ≈ c / x^a` below the table.
    pub head: (T, T),
    /// `(c, a)` with `V ≈ c / x^a` above the table.
    pub tail: (T, T),
}

fn power_fit<T: Real>(x0: T, v0: T, x1: T, v1: T) -> Result<(T, T)> {
    if v0 == T::zero() || v1 == T::zero() || v0.signum() != v1.signum() {
        return Err(Error::Table("end values must be nonzero with a common sign for power-law extrapolation".into()));
    }
    let a = -(v1 / v0).ln() / (x1 / x0).ln();
    Ok((v0 * x0.powf(a), a))
}

impl<T: Real> LogSpline<T> {
    pub fn new(xs: &[T], vs: &[T]) -> Result<Self> {
        let n = xs.len();
        if n < 3 || vs.len() != n {
            return Err(Error::Table("need at least three (x, V) rows".into()));
        }
        if xs[0] <= T::zero() || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("x must be positive and strictly increasing".into()));
        }
        if vs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Table("V must be finite".into()));
        }
        let s: Vec<T> = xs.iter().map(|x| x.ln()).collect();
        // Tridiagonal solve for second derivatives, natural ends.
        let mut m = vec![T::zero(); n];
        let mut c = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        for i in 1..n - 1 {
            let h0 = s[i] - s[i - 1];
            let h1 = s[i + 1] - s[i];
            let rhs = six * ((vs[i + 1] - vs[i]) / h1 - (vs[i] - vs[i - 1]) / h0);
            let diag = two * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        let head = power_fit(xs[0], vs[0], xs[1], vs[1])?;
        let tail = power_fit(xs[n - 2], vs[n - 2], xs[n - 1], vs[n - 1])?;
        Ok(Self { s, v: vs.to_vec(), m, head, tail })
    }

    fn locate(&self, s: T) -> usize {
        match self.s.binary_search_by(|p| p.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(self.s.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.s.len() - 2),
        }
    }

    /// `(V(x), V'(x))`.
    pub fn eval(&self, x: T) -> (T, T) {
        let s = x.ln();
        let n = self.s.len();
        if s < self.s[0] {
            let (c, a) = self.head;
            let v = c / x.powf(a);
            return (v, -a * v / x);
        }
        if s > self.s[n - 1] {
            let (c, a) = self.tail;
            let v = c / x.powf(a);
            return (v, -a * v / x);
        }
        let i = self.locate(s);
        let h = self.s[i + 1] - self.s[i];
        let a = (self.s[i + 1] - s) / h;
        let b = (s - self.s[i]) / h;
        let six = T::lit(6.0);
        let v = a * self.v[i]
            + b * self.v[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six;
        let three = T::lit(3.0);
        let dvds = (self.v[i + 1] - self.v[i]) / h
            - (three * a * a - T::one()) * h * self.m[i] / six
            + (three * b * b - T::one()) * h * self.m[i + 1] / six;
        (v, dvds / x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::log_space;

    #[test]
    fn reproduces_coulomb_inside_and_outside() {
        let xs = log_space(1e-3_f64, 1e3, 241);
        let vs: Vec<f64> = xs.iter().map(|x| -0.5 / x).collect();
        let sp = LogSpline::new(&xs, &vs).unwrap();
        for &x in &[1e-5, 3.3e-3, 0.7, 12.0, 500.0, 1e6] {
            let (v, dv) = sp.eval(x);
            assert!(((v + 0.5 / x) * x).abs() < 1e-6, "x={x} v={v}");
            assert!(((dv - 0.5 / (x * x)) * x * x).abs() < 1e-4, "x={x} dv={dv}");
        }
        assert!((sp.head.1 - 1.0).abs() < 1e-12 && (sp.tail.0 + 0.5).abs() < 1e-10);
    }

    #[test]
    fn passes_through_knots() {
        let xs = [0.1_f64, 0.5, 1.0, 4.0, 9.0];
        let vs = [-3.0_f64, -1.1, -0.4, -0.2, -0.05];
        let sp = LogSpline::new(&xs, &vs).unwrap();
        for (x, v) in xs.iter().zip(vs) {
            assert!((sp.eval(*x).0 - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LogSpline::new(&[1.0, 0.5, 2.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(LogSpline::new(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(LogSpline::new(&[1.0, 2.0, 3.0], &[0.0, 1.0, 1.0]).is_err());
    }
}
