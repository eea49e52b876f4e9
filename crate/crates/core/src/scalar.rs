//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Every routine in the crate is written against this trait. Tolerances quoted in
/// the documentation are meaningful for `f64`; `f32` instantiations work but only
/// reach single-precision accuracy.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `n` points spaced uniformly in `log10` between `lo` and `hi` (inclusive).
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / T::from_count(n - 1);
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + step * T::from_count(i)).exp()
                    }
                })
                .collect()
        }
    }
}

/// Log grid from `10^lo_exp` to `10^hi_exp` with `per_decade` points per
/// decade; decade points are exact powers of ten.
pub fn decade_grid<T: Real>(lo_exp: i32, hi_exp: i32, per_decade: usize) -> Vec<T> {
    let ten = T::lit(10.0);
    let mut out = Vec::new();
    for d in lo_exp..hi_exp {
        let base = ten.powi(d);
        for j in 0..per_decade {
            let frac = T::from_count(j) / T::from_count(per_decade);
            out.push(if j == 0 { base } else { base * ten.powf(frac) });
        }
    }
    out.push(ten.powi(hi_exp));
    out
}

/// `n` points spaced uniformly between `lo` and `hi` (inclusive).
pub fn lin_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_count(n - 1);
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * T::from_count(i) })
                .collect()
        }
    }
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ls_slope<T: Real>(xs: &[T], ys: &[T]) -> Option<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = T::from_count(xs.len());
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    if sxx <= T::zero() {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_hits_both_ends() {
        let g = log_space(1e-3_f64, 1e3, 7);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[6], 1e3);
        assert!((g[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decade_grid_contains_exact_decades() {
        let g = decade_grid::<f64>(-2, 2, 16);
        assert_eq!(g.len(), 65);
        assert!(g.contains(&10.0) && g.contains(&1.0) && g.contains(&0.1));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn slope_of_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert!((ls_slope(&xs, &ys).unwrap() - 2.0_f64).abs() < 1e-14);
        assert!(ls_slope(&[1.0_f64], &[1.0]).is_none());
    }
}
