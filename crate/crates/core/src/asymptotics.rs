//! Endpoint eigen-structure, boundary angles and truncation windows.

use crate::error::{Error, Result};
use crate::linalg::{j_inv_times, norm2, Mat2, Vec2};
use crate::model::{require_admissible, CoefficientFamily};
use crate::prufer::prufer_rhs;
use crate::scalar::{decade_grid, lin_space, log_space, Real};

/// Decaying and growing directions at infinity for one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfinityData<T> {
    pub lambda: T,
    pub delta: T,
    /// Unit eigenvector of `B_λ` for `−√Δ_λ`.
    pub b1: Vec2<T>,
    /// Unit eigenvector of `B_λ` for `+√Δ_λ`.
    pub b2: Vec2<T>,
    pub theta_inf: T,
}

impl<T: Real> InfinityData<T> {
    pub fn sqrt_delta(&self) -> T {
        self.delta.sqrt()
    }
}

/// `B_λ = J⁻¹(λ I − P∞)`.
pub fn b_matrix<T: Real>(mu_minus: T, mu_plus: T, lambda: T) -> Mat2<T> {
    j_inv_times(&Mat2::new(lambda - mu_minus, T::zero(), T::zero(), lambda - mu_plus))
}

/// `arctan √((λ − μ⁻)/(μ⁺ − λ))`, the shift between `ν` and `ν*`.
pub fn gap_arctan<T: Real>(mu_minus: T, mu_plus: T, lambda: T) -> T {
    ((lambda - mu_minus) / (mu_plus - lambda)).sqrt().atan()
}

pub fn infinity_data<T: Real>(mu_minus: T, mu_plus: T, lambda: T) -> Result<InfinityData<T>> {
    if !(lambda > mu_minus && lambda < mu_plus) {
        return Err(Error::OutsideGap { lambda: lambda.as_f64(), lo: mu_minus.as_f64(), hi: mu_plus.as_f64() });
    }
    let delta = (mu_plus - lambda) * (lambda - mu_minus);
    let sd = delta.sqrt();
    let unit = |v: Vec2<T>| {
        let n = norm2(v);
        [v[0] / n, v[1] / n]
    };
    Ok(InfinityData {
        lambda,
        delta,
        b1: unit([lambda - mu_plus, sd]),
        b2: unit([mu_plus - lambda, sd]),
        theta_inf: T::PI() - gap_arctan(mu_minus, mu_plus, lambda),
    })
}

/// Position of the boundary angle at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    /// `θ₀ ∈ (0, π/2)`.
    First,
    /// `θ₀ ∈ (π/2, π)`.
    Second,
    /// `θ₀ = π/2`.
    Vertical,
    /// `θ₀ = π`, i.e. the horizontal axis.
    Horizontal,
}

impl Quadrant {
    pub fn is_degenerate(self) -> bool {
        matches!(self, Quadrant::Vertical | Quadrant::Horizontal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::First => "first",
            Quadrant::Second => "second",
            Quadrant::Vertical => "vertical (degenerate)",
            Quadrant::Horizontal => "horizontal (degenerate)",
        }
    }
}

/// Integer index from a rotation number: `⌊r⌋` for the first quadrant,
/// `⌊r + 1/2⌋` for the second. Degenerate angles use the first-quadrant rule.
///
/// The flag is set when `r` sits within `1e−9` of a breakpoint or the
/// angle is degenerate.
pub fn index_from_rotation<T: Real>(rot: T, quadrant: Quadrant) -> (i64, bool) {
    let shifted = match quadrant {
        Quadrant::Second => rot + T::lit(0.5),
        _ => rot,
    };
    let i = shifted.floor();
    let frac = shifted - i;
    let near = frac < T::lit(1e-9) || frac > T::one() - T::lit(1e-9);
    (i.to_i64().unwrap_or(i64::MIN), near || quadrant.is_degenerate())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroData<T> {
    pub beta: T,
    pub delta_star: T,
    pub c: Mat2<T>,
    /// Eigenvalues `σ⁻ < 0 < σ⁺` of `C`.
    pub sigma: (T, T),
    pub w1: Vec2<T>,
    pub w2: Vec2<T>,
    pub theta0: T,
    pub quadrant: Quadrant,
}

impl<T: Real> ZeroData<T> {
    pub fn sqrt_delta_star(&self) -> T {
        self.delta_star.sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.quadrant.is_degenerate()
    }

    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::DegenerateAngle { theta0: self.theta0.as_f64() })
        } else {
            Ok(())
        }
    }
}

/// Unit vector with polar angle in `(0, π]`.
fn upper_half<T: Real>(v: Vec2<T>) -> Vec2<T> {
    let n = norm2(v);
    let mut w = [v[0] / n, v[1] / n];
    if w[1] < T::zero() || (w[1] == T::zero() && w[0] > T::zero()) {
        w = [-w[0], -w[1]];
    }
    if w[1] == T::zero() {
        w[1] = T::zero();
    }
    w
}

pub fn zero_data<T: Real>(family: &CoefficientFamily<T>) -> Result<ZeroData<T>> {
    let cls = require_admissible(family)?;
    let mut c = j_inv_times(&family.p_star.to_mat());
    if family.beta > T::one() {
        c = c.scale(T::one() / (family.beta - T::one()));
    }
    let sigma = c
        .real_eigenvalues()
        .ok_or_else(|| Error::Inadmissible("J^-1 P* has complex eigenvalues".into()))?;
    let w1 = upper_half(c.eigenvector(sigma.0));
    let w2 = upper_half(c.eigenvector(sigma.1));
    let theta0 = w1[1].atan2(w1[0]);
    let tol = T::lit(1e-9);
    let quadrant = if (theta0 - T::FRAC_PI_2()).abs() < tol {
        Quadrant::Vertical
    } else if theta0 < tol || theta0 > T::PI() - tol {
        Quadrant::Horizontal
    } else if theta0 < T::FRAC_PI_2() {
        Quadrant::First
    } else {
        Quadrant::Second
    };
    Ok(ZeroData { beta: family.beta, delta_star: cls.delta_star, c, sigma, w1, w2, theta0, quadrant })
}

/// Interval `[x₀, X∞]` on which the equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWindow<T> {
    pub x0: T,
    pub x_inf: T,
    pub delta: T,
    pub epsilon: T,
}

impl<T: Real> TruncationWindow<T> {
    pub fn new(x0: T, x_inf: T, delta: T, epsilon: T) -> Result<Self> {
        if !(x0 > T::zero() && x_inf > x0) {
            return Err(Error::InvalidParameter(format!("window needs 0 < x0 < X_inf, got [{x0}, {x_inf}]")));
        }
        Ok(Self { x0, x_inf, delta, epsilon })
    }

    /// Geometric mean of the ends, kept a decade away from each end.
    pub fn x_mid(&self) -> T {
        let ten = T::lit(10.0);
        let g = (self.x0 * self.x_inf).sqrt();
        if self.x_inf > self.x0 * T::lit(100.0) {
            g.max(self.x0 * ten).min(self.x_inf / ten)
        } else {
            g
        }
    }

    /// `X∞` doubled and `x₀` halved.
    pub fn widened(&self) -> Self {
        Self { x0: self.x0 * T::lit(0.5), x_inf: self.x_inf * T::lit(2.0), ..*self }
    }
}

/// Defaults `δ = 1e−4 (μ⁺ − μ⁻)` and `ε = 1e−3`.
pub fn default_delta<T: Real>(family: &CoefficientFamily<T>) -> T {
    T::lit(1e-4) * (family.mu_plus - family.mu_minus)
}

pub const DEFAULT_EPSILON: f64 = 1e-3;

const GRID_LO: i32 = -8;
const GRID_HI: i32 = 8;
const GRID_PER_DECADE: usize = 64;
const CONE_SAMPLES: usize = 32;

fn cone_ok_at_infinity<T: Real>(family: &CoefficientFamily<T>, lambdas: &[T], x_inf: T, eps: T) -> Result<bool> {
    for &x in &log_space(x_inf, x_inf * T::lit(1e4), CONE_SAMPLES) {
        let p = family.eval(x);
        for &lam in lambdas {
            let th = infinity_data(family.mu_minus, family.mu_plus, lam)?.theta_inf;
            let up = prufer_rhs(&p, lam, th + eps).0;
            let down = prufer_rhs(&p, lam, th - eps).0;
            if !(up > T::zero() && down < T::zero()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn cone_ok_at_zero<T: Real>(family: &CoefficientFamily<T>, lambdas: &[T], theta0: T, x0: T, eps: T) -> bool {
    for &x in &log_space(x0 * T::lit(1e-4), x0, CONE_SAMPLES) {
        let p = family.eval(x);
        let scale = family.x_pow_beta(x);
        for &lam in lambdas {
            let up = prufer_rhs(&p, lam, theta0 + eps).0 * scale;
            let down = prufer_rhs(&p, lam, theta0 - eps).0 * scale;
            if !(up < T::zero() && down > T::zero()) {
                return false;
            }
        }
    }
    true
}

/// Cutoffs where `P` is `δ`-close to its endpoint limits and the Prüfer
/// field leaves the `ε`-cones around the boundary angles.
pub fn select_truncation<T: Real>(
    family: &CoefficientFamily<T>,
    lambda_range: (T, T),
    delta: T,
    epsilon: T,
) -> Result<TruncationWindow<T>> {
    let (lo, hi) = lambda_range;
    if !(lo <= hi) || !family.in_gap(lo) || !family.in_gap(hi) {
        return Err(Error::OutsideGap {
            lambda: if family.in_gap(lo) { hi.as_f64() } else { lo.as_f64() },
            lo: family.mu_minus.as_f64(),
            hi: family.mu_plus.as_f64(),
        });
    }
    if !(delta > T::zero() && epsilon > T::zero()) {
        return Err(Error::InvalidParameter("delta and epsilon must be positive".into()));
    }
    let zero = zero_data(family)?;
    let grid: Vec<T> = decade_grid(GRID_LO, GRID_HI, GRID_PER_DECADE);
    let n = grid.len();

    let r_inf: Vec<T> = grid.iter().map(|&x| family.r_inf(x).norm()).collect();
    if !(r_inf[n - 1] < delta) {
        return Err(Error::NoWindow(format!(
            "|P - P_inf| = {} at x = 1e{GRID_HI} exceeds delta = {delta}",
            r_inf[n - 1]
        )));
    }
    let mut i_inf = n - 1;
    while i_inf > 0 && r_inf[i_inf - 1] < delta {
        i_inf -= 1;
    }
    let r0: Vec<T> = grid.iter().map(|&x| family.r_zero(x).norm()).collect();
    if !(r0[0] < delta) {
        return Err(Error::NoWindow(format!(
            "|x^beta P - P*| = {} at x = 1e{GRID_LO} exceeds delta = {delta}",
            r0[0]
        )));
    }
    let mut i0 = 0;
    while i0 + 1 < n && r0[i0 + 1] < delta {
        i0 += 1;
    }

    let lambdas = lin_space(lo, hi, 5);
    let x_max = grid[n - 1];
    let x_min = grid[0];
    let mut x_inf = grid[i_inf];
    while !cone_ok_at_infinity(family, &lambdas, x_inf, epsilon)? {
        x_inf = x_inf * T::lit(2.0);
        if x_inf > x_max {
            return Err(Error::NoWindow("cone condition at infinity not met below x = 1e8".into()));
        }
    }
    let mut x0 = grid[i0];
    while !cone_ok_at_zero(family, &lambdas, zero.theta0, x0, epsilon) {
        x0 = x0 * T::lit(0.5);
        if x0 < x_min {
            return Err(Error::NoWindow("cone condition at zero not met above x = 1e-8".into()));
        }
    }
    if !(x0 < x_inf) {
        return Err(Error::NoWindow(format!("cutoffs cross: x0 = {x0}, X_inf = {x_inf}")));
    }
    Ok(TruncationWindow { x0, x_inf, delta, epsilon })
}
