//! Coefficient families `P(x)`, nonlinear couplings `S(x, z)` and the
//! numerical admissibility checks run before any spectral computation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Sym2, Vec2};
use crate::scalar::{log_space, ls_slope, Real};
use crate::spline::LogSpline;

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type MatrixFn<T> = Arc<dyn Fn(T) -> Sym2<T> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    PureCoulomb,
    CoulombWithRemainder,
    Tabulated,
}

/// Remainder term with an optional derivative.
#[derive(Clone)]
pub struct Remainder<T> {
    pub value: ScalarFn<T>,
    pub derivative: Option<ScalarFn<T>>,
}

impl<T: Real> Remainder<T> {
    pub fn zero() -> Self {
        Self { value: Arc::new(|_| T::zero()), derivative: Some(Arc::new(|_| T::zero())) }
    }
}

/// `V(x) = γ₀/x^α₀ + R₀(x)` on `(0, 1]` and `γ∞/x^α∞ + R∞(x)` on `(1, ∞)`.
#[derive(Clone)]
pub struct PotentialSpec<T> {
    pub kind: PotentialKind,
    pub gamma0: T,
    pub alpha0: T,
    pub gamma_inf: T,
    pub alpha_inf: T,
    remainder_zero: Remainder<T>,
    remainder_inf: Remainder<T>,
    table: Option<Arc<LogSpline<T>>>,
}

impl<T: Real> fmt::Debug for PotentialSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("kind", &self.kind)
            .field("gamma0", &self.gamma0)
            .field("alpha0", &self.alpha0)
            .field("gamma_inf", &self.gamma_inf)
            .field("alpha_inf", &self.alpha_inf)
            .finish()
    }
}

impl<T: Real> PotentialSpec<T> {
    /// `V(x) = γ/x`.
    pub fn coulomb(gamma: T) -> Self {
        Self {
            kind: PotentialKind::PureCoulomb,
            gamma0: gamma,
            alpha0: T::one(),
            gamma_inf: gamma,
            alpha_inf: T::one(),
            remainder_zero: Remainder::zero(),
            remainder_inf: Remainder::zero(),
            table: None,
        }
    }

    pub fn zero() -> Self {
        Self::coulomb(T::zero())
    }

    /// `V(x) = γ/x^α` on the whole half-line.
    pub fn power(gamma: T, alpha: T) -> Result<Self> {
        Self::with_remainder(gamma, alpha, gamma, alpha, Remainder::zero(), Remainder::zero())
    }

    pub fn with_remainder(
        gamma0: T,
        alpha0: T,
        gamma_inf: T,
        alpha_inf: T,
        remainder_zero: Remainder<T>,
        remainder_inf: Remainder<T>,
    ) -> Result<Self> {
        if !(alpha0 > T::zero()) || !(alpha_inf > T::zero()) {
            return Err(Error::InvalidParameter("exponents alpha0 and alpha_inf must be positive".into()));
        }
        Ok(Self {
            kind: PotentialKind::CoulombWithRemainder,
            gamma0,
            alpha0,
            gamma_inf,
            alpha_inf,
            remainder_zero,
            remainder_inf,
            table: None,
        })
    }

    /// Spline through `(x_i, V_i)`; leading terms come from the end slopes.
    pub fn tabulated(xs: &[T], vs: &[T]) -> Result<Self> {
        let spline = LogSpline::new(xs, vs)?;
        let (gamma0, alpha0) = spline.head;
        let (gamma_inf, alpha_inf) = spline.tail;
        if !(alpha0 > T::zero()) || !(alpha_inf > T::zero()) {
            return Err(Error::Table(format!(
                "fitted end exponents must be positive (alpha0 = {alpha0}, alpha_inf = {alpha_inf})"
            )));
        }
        // Snap exponents that are one to rounding so the family keeps β = 1.
        let snap = |a: T| if (a - T::one()).abs() < T::lit(1e-6) { T::one() } else { a };
        Ok(Self {
            kind: PotentialKind::Tabulated,
            gamma0,
            alpha0: snap(alpha0),
            gamma_inf,
            alpha_inf: snap(alpha_inf),
            remainder_zero: Remainder::zero(),
            remainder_inf: Remainder::zero(),
            table: Some(Arc::new(spline)),
        })
    }

    pub fn value(&self, x: T) -> T {
        if let Some(t) = &self.table {
            return t.eval(x).0;
        }
        if x <= T::one() {
            self.gamma0 / x.powf(self.alpha0) + (self.remainder_zero.value)(x)
        } else {
            self.gamma_inf / x.powf(self.alpha_inf) + (self.remainder_inf.value)(x)
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.table.is_some() || (self.remainder_zero.derivative.is_some() && self.remainder_inf.derivative.is_some())
    }

    pub fn derivative(&self, x: T) -> Option<T> {
        if let Some(t) = &self.table {
            return Some(t.eval(x).1);
        }
        if x <= T::one() {
            let d = self.remainder_zero.derivative.as_ref()?;
            Some(-self.alpha0 * self.gamma0 / x.powf(self.alpha0 + T::one()) + d(x))
        } else {
            let d = self.remainder_inf.derivative.as_ref()?;
            Some(-self.alpha_inf * self.gamma_inf / x.powf(self.alpha_inf + T::one()) + d(x))
        }
    }

    /// `V(x) − γ₀/x^α₀`, valid on the whole half-line.
    pub fn remainder_zero(&self, x: T) -> T {
        self.value(x) - self.gamma0 / x.powf(self.alpha0)
    }

    pub fn remainder_inf(&self, x: T) -> T {
        self.value(x) - self.gamma_inf / x.powf(self.alpha_inf)
    }

    pub fn remainder_zero_derivative(&self, x: T) -> Option<T> {
        Some(self.derivative(x)? + self.alpha0 * self.gamma0 / x.powf(self.alpha0 + T::one()))
    }

    pub fn remainder_inf_derivative(&self, x: T) -> Option<T> {
        Some(self.derivative(x)? + self.alpha_inf * self.gamma_inf / x.powf(self.alpha_inf + T::one()))
    }
}

#[derive(Clone)]
pub struct DiracRadialParams<T> {
    pub k: i32,
    pub mu_a: T,
    pub potential: PotentialSpec<T>,
}

impl<T: Real> fmt::Debug for DiracRadialParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiracRadialParams").field("k", &self.k).field("mu_a", &self.mu_a).field("potential", &self.potential).finish()
    }
}

/// `P(x)` together with its endpoint data.
#[derive(Clone)]
pub struct CoefficientFamily<T> {
    eval: MatrixFn<T>,
    pub mu_minus: T,
    pub mu_plus: T,
    pub beta: T,
    pub p_star: Sym2<T>,
    pub q0: T,
    pub q_inf: T,
    pub dirac: Option<DiracRadialParams<T>>,
}

impl<T: Real> fmt::Debug for CoefficientFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientFamily")
            .field("mu_minus", &self.mu_minus)
            .field("mu_plus", &self.mu_plus)
            .field("beta", &self.beta)
            .field("p_star", &self.p_star)
            .field("q0", &self.q0)
            .field("q_inf", &self.q_inf)
            .field("dirac", &self.dirac)
            .finish()
    }
}

impl<T: Real> CoefficientFamily<T> {
    pub fn new(eval: MatrixFn<T>, mu_minus: T, mu_plus: T, beta: T, p_star: Sym2<T>, q0: T, q_inf: T) -> Result<Self> {
        if !(mu_minus < mu_plus) {
            return Err(Error::InvalidParameter(format!("gap edges must satisfy mu- < mu+ ({mu_minus}, {mu_plus})")));
        }
        if !(beta >= T::one()) {
            return Err(Error::InvalidParameter(format!("beta must be at least 1, got {beta}")));
        }
        if !(q0 >= T::one()) || !(q_inf >= T::one()) {
            return Err(Error::InvalidParameter("integrability exponents must be at least 1".into()));
        }
        Ok(Self { eval, mu_minus, mu_plus, beta, p_star, q0, q_inf, dirac: None })
    }

    /// Override the integrability exponents.
    pub fn with_exponents(mut self, q0: T, q_inf: T) -> Result<Self> {
        if !(q0 >= T::one()) || !(q_inf >= T::one()) {
            return Err(Error::InvalidParameter("integrability exponents must be at least 1".into()));
        }
        self.q0 = q0;
        self.q_inf = q_inf;
        Ok(self)
    }

    #[inline]
    pub fn eval(&self, x: T) -> Sym2<T> {
        (self.eval)(x)
    }

    pub fn p_inf(&self) -> Sym2<T> {
        Sym2::diag(self.mu_minus, self.mu_plus)
    }

    pub fn r_inf(&self, x: T) -> Sym2<T> {
        self.eval(x).sub(&self.p_inf())
    }

    pub fn x_pow_beta(&self, x: T) -> T {
        if self.beta == T::one() {
            x
        } else {
            x.powf(self.beta)
        }
    }

    pub fn r_zero(&self, x: T) -> Sym2<T> {
        self.eval(x).scale(self.x_pow_beta(x)).sub(&self.p_star)
    }

    pub fn in_gap(&self, lambda: T) -> bool {
        lambda > self.mu_minus && lambda < self.mu_plus
    }

    pub fn check_in_gap(&self, lambda: T) -> Result<()> {
        if self.in_gap(lambda) {
            Ok(())
        } else {
            Err(Error::OutsideGap { lambda: lambda.as_f64(), lo: self.mu_minus.as_f64(), hi: self.mu_plus.as_f64() })
        }
    }

    /// Family obtained from `(u, v) ↦ (v, u)`, `λ ↦ −λ`.
    ///
    /// Its upper gap edge is `−μ⁻`, so accumulation at `μ⁻` of `self` is
    /// accumulation at the upper edge of the mirror.
    pub fn mirrored(&self) -> Self {
        let inner = self.eval.clone();
        let flip = |m: Sym2<T>| Sym2::new(-m.p22, -m.p12, -m.p11);
        Self {
            eval: Arc::new(move |x| flip(inner(x))),
            mu_minus: -self.mu_plus,
            mu_plus: -self.mu_minus,
            beta: self.beta,
            p_star: flip(self.p_star),
            q0: self.q0,
            q_inf: self.q_inf,
            dirac: None,
        }
    }
}

/// Radial Dirac matrix with electrostatic potential and anomalous magnetic moment.
pub fn build_dirac_family<T: Real>(params: DiracRadialParams<T>) -> Result<CoefficientFamily<T>> {
    if params.k == 0 {
        return Err(Error::ZeroK);
    }
    let pot = &params.potential;
    let mu_a = params.mu_a;
    if mu_a != T::zero() && !pot.has_derivative() {
        return Err(Error::MissingDerivative);
    }
    let k = T::lit(params.k as f64);
    let (g0, a0) = (pot.gamma0, pot.alpha0);
    let (beta, p_star, q0) = if mu_a == T::zero() {
        let p_star = if g0 == T::zero() || a0 < T::one() {
            Sym2::new(T::zero(), -k, T::zero())
        } else if a0 == T::one() {
            Sym2::new(g0, -k, g0)
        } else {
            return Err(Error::InvalidParameter(format!(
                "alpha0 = {a0} > 1 with gamma0 != 0 needs mu_a != 0 for x P(x) to converge"
            )));
        };
        (T::one(), p_star, T::one())
    } else {
        let c = mu_a * a0 * g0;
        (a0 + T::one(), Sym2::new(T::zero(), c, T::zero()), a0.max(T::one()) + T::one())
    };
    let q_inf = (T::one() / pot.alpha_inf).max(T::one()) + T::one();
    let pot_eval = pot.clone();
    let eval: MatrixFn<T> = if mu_a == T::zero() {
        Arc::new(move |x: T| {
            let v = pot_eval.value(x);
            Sym2::new(-T::one() + v, -k / x, T::one() + v)
        })
    } else {
        Arc::new(move |x: T| {
            let v = pot_eval.value(x);
            let dv = pot_eval.derivative(x).unwrap_or_else(T::nan);
            Sym2::new(-T::one() + v, -k / x - mu_a * dv, T::one() + v)
        })
    };
    let mut fam = CoefficientFamily::new(eval, -T::one(), T::one(), beta, p_star, q0, q_inf)?;
    fam.dirac = Some(params);
    Ok(fam)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroClassification<T> {
    pub beta: T,
    pub p_star: Sym2<T>,
    pub det_p_star: T,
    pub delta_star: T,
    pub admissible: bool,
    pub statement: String,
}

/// Endpoint test `det P* < −1/4` (β = 1) or `det P* < 0` (β > 1).
pub fn classify_zero_endpoint<T: Real>(family: &CoefficientFamily<T>) -> ZeroClassification<T> {
    let det = family.p_star.det();
    let bound = if family.beta == T::one() { -T::lit(0.25) } else { T::zero() };
    let admissible = det < bound;
    let statement = if admissible {
        format!(
            "det P* = {det} < {bound}: limit point at 0, the operator has a unique self-adjoint realization and the boundary angle at 0 is fixed"
        )
    } else {
        format!("det P* = {det} >= {bound}: the endpoint hypothesis at 0 fails; spectral computations are refused")
    };
    ZeroClassification { beta: family.beta, p_star: family.p_star, det_p_star: det, delta_star: -det, admissible, statement }
}

pub fn require_admissible<T: Real>(family: &CoefficientFamily<T>) -> Result<ZeroClassification<T>> {
    let c = classify_zero_endpoint(family);
    if c.admissible {
        Ok(c)
    } else {
        Err(Error::Inadmissible(c.statement))
    }
}

/// Log-uniform sample grid spanning `[x_min, x_max]` with `x_min < 1 < x_max`.
#[derive(Debug, Clone, Copy)]
pub struct SampleGrid<T> {
    pub x_min: T,
    pub x_max: T,
    pub points: usize,
}

impl<T: Real> Default for SampleGrid<T> {
    fn default() -> Self {
        Self { x_min: T::lit(1e-8), x_max: T::lit(1e8), points: 16 * 32 + 1 }
    }
}

impl<T: Real> SampleGrid<T> {
    pub fn per_decade(&self) -> T {
        T::from_count(self.points.saturating_sub(1)) / (self.x_max / self.x_min).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &'static str, passed: bool, measured: f64, detail: String) -> HypothesisCheck {
    HypothesisCheck { name, passed, measured, detail }
}

/// `f` vanishes at the endpoint: small at the extreme sample and no larger
/// than one decade further in. `samples` runs from the endpoint inward.
fn vanishing(samples: &[f64], scale: f64) -> (bool, f64) {
    let first = samples[0].abs();
    let inner = samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    (first.is_finite() && first <= 1e-3 * scale.max(1.0) && first <= inner * (1.0 + 1e-9) + 1e-300, first)
}

/// Trapezoid in `ln x` of `g` over sorted samples.
fn log_trapezoid(xs: &[f64], gs: &[f64]) -> f64 {
    xs.windows(2)
        .zip(gs.windows(2))
        .map(|(x, g)| 0.5 * (g[0] * x[0] + g[1] * x[1]) * (x[1] / x[0]).ln())
        .sum()
}

/// Power-law slope of `g` against `x` on the given samples; `None` when `g` vanishes.
fn power_slope(xs: &[f64], gs: &[f64]) -> Option<f64> {
    if gs.iter().any(|g| *g <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let lg: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    ls_slope(&lx, &lg)
}

/// Numerical surrogate for the endpoint hypotheses on a sample grid.
pub fn validate_hypotheses<T: Real>(family: &CoefficientFamily<T>, grid: &SampleGrid<T>) -> Result<HypothesisReport> {
    let per_decade = grid.per_decade().as_f64();
    if !(grid.x_min < T::one() && grid.x_max > T::one()) {
        return Err(Error::InvalidParameter("hypothesis grid must straddle x = 1".into()));
    }
    if per_decade < 16.0 - 1e-9 {
        return Err(Error::GridTooCoarse { per_decade });
    }
    let xs: Vec<f64> = log_space(grid.x_min, grid.x_max, grid.points).into_iter().map(|x| x.as_f64()).collect();
    let at = |x: f64| T::lit(x);
    let decade = per_decade.round() as usize;
    let lo: Vec<f64> = xs.iter().copied().filter(|&x| x <= 1.0).collect();
    let hi: Vec<f64> = xs.iter().copied().filter(|&x| x >= 1.0).collect();
    let head: Vec<f64> = lo.iter().take(decade + 1).copied().collect();
    let tail: Vec<f64> = hi.iter().rev().take(decade + 1).copied().collect();
    let mut checks = Vec::new();

    let p_star_norm = family.p_star.norm().as_f64();
    let r0: Vec<f64> = head.iter().map(|&x| family.r_zero(at(x)).norm().as_f64()).collect();
    let (ok, m) = vanishing(&r0, p_star_norm);
    checks.push(check("limit at zero", ok, m, format!("|x^beta P(x) - P*| = {m:.3e} at x = {:.1e}", head[0])));

    let rinf: Vec<f64> = tail.iter().map(|&x| family.r_inf(at(x)).norm().as_f64()).collect();
    let (ok, m) = vanishing(&rinf, 1.0);
    checks.push(check("limit at infinity", ok, m, format!("|P(x) - P_inf| = {m:.3e} at x = {:.1e}", tail[0])));

    let q_inf = family.q_inf.as_f64();
    let g_inf: Vec<f64> = hi.iter().map(|&x| family.r_inf(at(x)).norm().as_f64().powf(q_inf)).collect();
    let body = log_trapezoid(&hi, &g_inf);
    let n = hi.len();
    let (tx, tg) = (&hi[n - decade - 1..], &g_inf[n - decade - 1..]);
    let (ok, total, detail) = match power_slope(tx, tg) {
        None => (tg.iter().all(|g| *g == 0.0) && body.is_finite(), body, "remainder vanishes in the tail".to_string()),
        Some(s) if s < -1.0 - 1e-3 => {
            let t = tg[tg.len() - 1] * tx[tx.len() - 1] / (-s - 1.0);
            (body.is_finite(), body + t, format!("tail decays like x^{s:.3}, tail bound {t:.3e}"))
        }
        Some(s) => (false, f64::INFINITY, format!("tail decays like x^{s:.3}, not integrable")),
    };
    checks.push(check("integral at infinity", ok, total, format!("q_inf = {q_inf}: {detail}")));

    let q0 = family.q0.as_f64();
    let beta = family.beta.as_f64();
    let g0: Vec<f64> =
        lo.iter().map(|&x| family.r_zero(at(x)).norm().as_f64().powf(q0) / x.powf(beta)).collect();
    let body = log_trapezoid(&lo, &g0);
    let (hx, hg) = (&lo[..decade + 1], &g0[..decade + 1]);
    let (ok, total, detail) = match power_slope(hx, hg) {
        None => (hg.iter().all(|g| *g == 0.0) && body.is_finite(), body, "remainder vanishes near zero".to_string()),
        Some(s) if s > -1.0 + 1e-3 => {
            let t = hg[0] * hx[0] / (s + 1.0);
            (body.is_finite(), body + t, format!("integrand behaves like x^{s:.3}, head bound {t:.3e}"))
        }
        Some(s) => (false, f64::INFINITY, format!("integrand behaves like x^{s:.3}, not integrable")),
    };
    checks.push(check("integral at zero", ok, total, format!("q0 = {q0}: {detail}")));

    let z = classify_zero_endpoint(family);
    checks.push(check("determinant at zero", z.admissible, z.det_p_star.as_f64(), z.statement.clone()));

    if let Some(d) = &family.dirac {
        potential_checks(d, &head, &tail, &mut checks);
    }
    Ok(HypothesisReport { checks })
}

fn potential_checks<T: Real>(d: &DiracRadialParams<T>, head: &[f64], tail: &[f64], checks: &mut Vec<HypothesisCheck>) {
    let p = &d.potential;
    let at = |x: f64| T::lit(x);
    let g_inf = p.gamma_inf.as_f64().abs();
    let a_inf = p.alpha_inf.as_f64();
    let s: Vec<f64> = tail.iter().map(|&x| x.powf(a_inf) * p.remainder_inf(at(x)).as_f64()).collect();
    let (ok, m) = vanishing(&s, g_inf);
    checks.push(check("potential remainder at infinity", ok, m, format!("x^alpha_inf R(x) = {m:.3e}")));
    if p.has_derivative() {
        let s: Vec<f64> = tail
            .iter()
            .map(|&x| x.powf(a_inf + 1.0) * p.remainder_inf_derivative(at(x)).map_or(f64::NAN, |v| v.as_f64()))
            .collect();
        let (ok, m) = vanishing(&s, g_inf);
        checks.push(check("potential remainder derivative at infinity", ok, m, format!("x^(alpha_inf+1) R'(x) = {m:.3e}")));
    }

    let g0 = p.gamma0.as_f64();
    let a0 = p.alpha0.as_f64();
    let k = d.k as f64;
    if d.mu_a == T::zero() {
        let ok = (a0 - 1.0).abs() < 1e-12;
        checks.push(check("potential exponent at zero", ok, a0, format!("alpha0 = {a0}, must equal 1 when mu_a = 0")));
        let s: Vec<f64> = head.iter().map(|&x| x * p.remainder_zero(at(x)).as_f64()).collect();
        let (ok, m) = vanishing(&s, g0.abs());
        checks.push(check("potential remainder at zero", ok, m, format!("x R(x) = {m:.3e}")));
        let bound = k * k - 0.25;
        checks.push(check(
            "coupling bound at zero",
            g0 * g0 < bound,
            g0 * g0,
            format!("gamma0^2 = {:.6} against k^2 - 1/4 = {bound:.6}", g0 * g0),
        ));
    } else {
        let s: Vec<f64> = head.iter().map(|&x| x.powf(a0) * p.remainder_zero(at(x)).as_f64()).collect();
        let (ok, m) = vanishing(&s, g0.abs());
        checks.push(check("potential remainder at zero", ok, m, format!("x^alpha0 R(x) = {m:.3e}")));
        let s: Vec<f64> = head
            .iter()
            .map(|&x| x.powf(a0 + 1.0) * p.remainder_zero_derivative(at(x)).map_or(f64::NAN, |v| v.as_f64()))
            .collect();
        let (ok, m) = vanishing(&s, g0.abs());
        checks.push(check("potential remainder derivative at zero", ok, m, format!("x^(alpha0+1) R'(x) = {m:.3e}")));
        checks.push(check("coupling bound at zero", g0 != 0.0, g0, format!("gamma0 = {g0} must be nonzero")));
    }
}

/// `S(x, z) = γ(x) F((u² − v²)/(c x²)) diag(1, −1)`.
#[derive(Clone)]
pub struct NonlinearCoupling<T> {
    gamma: ScalarFn<T>,
    f: ScalarFn<T>,
    pub lipschitz: T,
    /// Normalisation `c` in the argument of `F`; `4π` for the Soler model.
    pub constant: T,
}

impl<T: Real> fmt::Debug for NonlinearCoupling<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearCoupling").field("lipschitz", &self.lipschitz).field("constant", &self.constant).finish()
    }
}

impl<T: Real> NonlinearCoupling<T> {
    /// `S ≡ 0`.
    pub fn zero() -> Self {
        Self {
            gamma: Arc::new(|_| T::zero()),
            f: Arc::new(|_| T::zero()),
            lipschitz: T::zero(),
            constant: T::lit(4.0) * T::PI(),
        }
    }

    pub fn gamma(&self, x: T) -> T {
        (self.gamma)(x)
    }

    /// Diagonal entry `s` of `S = diag(s, −s)`.
    pub fn diagonal(&self, x: T, z: Vec2<T>) -> T {
        let arg = (z[0] * z[0] - z[1] * z[1]) / (self.constant * x * x);
        (self.gamma)(x) * (self.f)(arg)
    }

    pub fn eval(&self, x: T, z: Vec2<T>) -> Sym2<T> {
        let s = self.diagonal(x, z);
        Sym2::diag(s, -s)
    }

    pub fn envelope(&self, x: T) -> T {
        self.lipschitz * (self.gamma)(x).abs() / (self.constant * x * x)
    }

    /// `η₁₁ = η₂₂ = |u² − v²|`, `η₁₂ = η₂₁ = 0`.
    pub fn moduli(&self, z: Vec2<T>) -> [[T; 2]; 2] {
        let e = (z[0] * z[0] - z[1] * z[1]).abs();
        [[e, T::zero()], [T::zero(), e]]
    }
}

/// Soler coupling with the `4π` normalisation.
pub fn build_soler_coupling<T: Real>(gamma: ScalarFn<T>, f: ScalarFn<T>, lipschitz_bound: T) -> Result<NonlinearCoupling<T>> {
    build_soler_coupling_with_constant(gamma, f, lipschitz_bound, T::lit(4.0) * T::PI())
}

pub fn build_soler_coupling_with_constant<T: Real>(
    gamma: ScalarFn<T>,
    f: ScalarFn<T>,
    lipschitz_bound: T,
    constant: T,
) -> Result<NonlinearCoupling<T>> {
    if !(lipschitz_bound >= T::zero()) || !(constant > T::zero()) {
        return Err(Error::InvalidParameter("Lipschitz bound must be non-negative and the constant positive".into()));
    }
    let c = NonlinearCoupling { gamma, f, lipschitz: lipschitz_bound, constant };
    let per = 16;
    let xs: Vec<T> = log_space(T::lit(1e-8), T::lit(1e8), 16 * per + 1);
    let alpha: Vec<f64> = xs.iter().map(|&x| c.envelope(x).as_f64()).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.as_f64().ln()).collect();
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::CouplingRejected("envelope is not finite on the sample grid".into()));
    }
    let slope = |lo: usize, hi: usize| -> f64 {
        let (x, a): (Vec<f64>, Vec<f64>) =
            lx[lo..hi].iter().zip(&alpha[lo..hi]).filter(|(_, a)| **a > 0.0).map(|(x, a)| (*x, a.ln())).unzip();
        ls_slope(&x, &a).unwrap_or(f64::NEG_INFINITY)
    };
    let n = xs.len();
    if slope(0, 2 * per + 1) < -1e-2 {
        return Err(Error::CouplingRejected(format!(
            "envelope alpha(r) grows like r^{:.3} as r -> 0; gamma must be O(r^2) near 0",
            slope(0, 2 * per + 1)
        )));
    }
    let tail_slope = slope(n - 2 * per - 1, n);
    let peak = alpha.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 && !(tail_slope < -1e-2 && alpha[n - 1] < 1e-6 * peak) {
        return Err(Error::CouplingRejected(format!("envelope alpha(r) does not decay at infinity (slope {tail_slope:.3})")));
    }
    let r2g: Vec<f64> = xs.iter().map(|&x| (x * x * c.gamma(x)).as_f64().abs()).collect();
    if r2g[n - 1] > 1e-3 || r2g[n - 1] > r2g[n - per - 1] * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::CouplingRejected(format!("r^2 gamma(r) = {:.3e} does not vanish at infinity", r2g[n - 1])));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn coulomb(k: i32, gamma: f64, mu_a: f64) -> CoefficientFamily<f64> {
        build_dirac_family(DiracRadialParams { k, mu_a, potential: PotentialSpec::coulomb(gamma) }).unwrap()
    }

    #[test]
    fn dirac_matrix_by_substitution() {
        let f = coulomb(-1, -0.5, 0.0);
        let p = f.eval(1.0);
        // −1 + V, −k/x, 1 + V with V(1) = −0.5
        assert_eq!(p, Sym2::new(-1.5, 1.0, 0.5));
        assert_eq!(f.p_inf(), Sym2::diag(-1.0, 1.0));
        assert!(f.r_inf(1e9).norm() < 1e-8);
    }

    #[test]
    fn anomalous_moment_regularizes() {
        let f = coulomb(-1, -2.0, 1.0);
        assert_eq!(f.beta, 2.0);
        assert_eq!(f.p_star, Sym2::new(0.0, -2.0, 0.0));
        let c = classify_zero_endpoint(&f);
        assert!(c.admissible);
        assert_abs_diff_eq!(c.det_p_star, -4.0);
        assert!(f.r_zero(1e-6).norm() < 1e-5);
    }

    #[test]
    fn zero_endpoint_classification() {
        let c = classify_zero_endpoint(&coulomb(-1, -0.5, 0.0));
        assert_eq!(c.beta, 1.0);
        assert_abs_diff_eq!(c.det_p_star, -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c.delta_star, 0.75, epsilon = 1e-15);
        assert!(c.admissible);
        let c = classify_zero_endpoint(&coulomb(-1, -1.0, 0.0));
        assert_eq!(c.det_p_star, 0.0);
        assert!(!c.admissible);
    }

    #[test]
    fn errors_on_bad_parameters() {
        let p = DiracRadialParams { k: 0, mu_a: 0.0, potential: PotentialSpec::coulomb(-0.5) };
        assert_eq!(build_dirac_family(p).unwrap_err(), Error::ZeroK);
        let no_deriv = PotentialSpec::with_remainder(
            -0.5,
            1.0,
            -0.5,
            1.0,
            Remainder { value: Arc::new(|_| 0.0), derivative: None },
            Remainder::zero(),
        )
        .unwrap();
        let p = DiracRadialParams { k: -1, mu_a: 1.0, potential: no_deriv };
        assert_eq!(build_dirac_family(p).unwrap_err(), Error::MissingDerivative);
    }

    #[test]
    fn remainder_at_zero_is_diagonal_without_moment() {
        let f = coulomb(2, -0.7, 0.0);
        for x in [1e-6, 1e-3, 0.5, 3.0, 100.0] {
            assert_eq!(f.r_zero(x).p12, 0.0);
        }
    }

    #[test]
    fn hypotheses_pass_for_coulomb_and_free_field() {
        let r = validate_hypotheses(&coulomb(-1, -0.5, 0.0), &SampleGrid::default()).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let r = validate_hypotheses(&coulomb(-1, 0.0, 0.0), &SampleGrid::default()).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let r = validate_hypotheses(&coulomb(-1, -2.0, 1.0), &SampleGrid::default()).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn coupling_bound_fails_near_critical_charge() {
        let r = validate_hypotheses(&coulomb(-1, -0.99, 0.0), &SampleGrid::default()).unwrap();
        let c = r.get("coupling bound at zero").unwrap();
        assert!(!c.passed);
        assert_abs_diff_eq!(c.measured, 0.9801, epsilon = 1e-12);
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = SampleGrid { x_min: 1e-4, x_max: 1e4, points: 100 };
        assert!(matches!(validate_hypotheses(&coulomb(-1, -0.5, 0.0), &g), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn soler_coupling_acceptance() {
        let c = build_soler_coupling::<f64>(Arc::new(|r| r * r / (1.0 + r.powi(5))), Arc::new(|s| s), 1.0).unwrap();
        for r in [1e-3_f64, 0.5, 2.0, 40.0] {
            let expect = 1.0 / (4.0 * std::f64::consts::PI * (1.0 + r.powi(5)));
            assert!((c.envelope(r) - expect).abs() < 1e-15 * expect.max(1.0));
            assert_eq!(c.eval(r, [0.0, 0.0]), Sym2::zero());
        }
        let z = [0.3, -1.2];
        let s = c.eval(0.8, z);
        assert_eq!(s.p11, -s.p22);
        assert!(s.p11.abs() <= c.envelope(0.8) * c.moduli(z)[0][0] * (1.0 + 1e-12));

        let bad = build_soler_coupling::<f64>(Arc::new(|r| 1.0 / (1.0 + r * r)), Arc::new(|s| s), 1.0);
        assert!(matches!(bad, Err(Error::CouplingRejected(_))));
    }

    #[test]
    fn mirror_swaps_gap() {
        let f = coulomb(-1, -0.5, 0.0);
        let m = f.mirrored();
        assert_eq!((m.mu_minus, m.mu_plus), (-1.0, 1.0));
        let p = f.eval(2.0);
        let q = m.eval(2.0);
        assert_eq!(q, Sym2::new(-p.p22, -p.p12, -p.p11));
        assert_eq!(m.p_star.det(), f.p_star.det());
    }

    #[test]
    fn tabulated_coulomb_matches_closed_form() {
        let xs = log_space(1e-4, 1e4, 321);
        let vs: Vec<f64> = xs.iter().map(|x| -0.5 / x).collect();
        let p = PotentialSpec::tabulated(&xs, &vs).unwrap();
        assert_eq!(p.alpha0, 1.0);
        let f = build_dirac_family(DiracRadialParams { k: -1, mu_a: 0.0, potential: p }).unwrap();
        assert!((f.p_star.p11 + 0.5).abs() < 1e-9);
        assert!((f.eval(0.37).p11 - (-1.0 - 0.5 / 0.37)).abs() < 1e-6);
    }
}
