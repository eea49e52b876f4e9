//! Prüfer angle / log-amplitude integration and the Cartesian cross-check.
//!
//! Near zero the independent variable is `ln x` (β = 1) or `x^{1−β}` (β > 1),
//! which keeps the right-hand side bounded; beyond `x = 1` it is `x` itself.

use std::f64::consts::PI;

use crate::asymptotics::TruncationWindow;
use crate::error::{Error, Result};
use crate::linalg::{linear_field, norm2, Sym2, Vec2};
use crate::model::CoefficientFamily;
use crate::ode::{integrate, Control, DenseStep, OdeError, OdeOptions, OdeStats};
use crate::scalar::{log_space, Real};

/// `(θ', (ln ρ)')` for `z = ρ (cos θ, sin θ)` solving `J z' + P z = λ z`.
#[inline]
pub fn prufer_rhs<T: Real>(p: &Sym2<T>, lambda: T, theta: T) -> (T, T) {
    let (s, c) = theta.sin_cos();
    let two = T::lit(2.0);
    let dtheta = (lambda - p.p11) * c * c - two * p.p12 * c * s + (lambda - p.p22) * s * s;
    let dlogrho = p.p12 * (c * c - s * s) + (p.p22 - p.p11) * s * c;
    (dtheta, dlogrho)
}

/// Independent variable used on a stretch of the half-line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart<T> {
    Linear,
    Log,
    /// `ξ = x^{1−β}`.
    Power(T),
}

impl<T: Real> Chart<T> {
    #[inline]
    pub fn to_xi(&self, x: T) -> T {
        match *self {
            Chart::Linear => x,
            Chart::Log => x.ln(),
            Chart::Power(b) => x.powf(T::one() - b),
        }
    }

    #[inline]
    pub fn to_x(&self, xi: T) -> T {
        match *self {
            Chart::Linear => xi,
            Chart::Log => xi.exp(),
            Chart::Power(b) => xi.powf(T::one() / (T::one() - b)),
        }
    }

    /// `dx/dξ` at `x`.
    #[inline]
    pub fn jacobian(&self, x: T) -> T {
        match *self {
            Chart::Linear => T::one(),
            Chart::Log => x,
            Chart::Power(b) => x.powf(b) / (T::one() - b),
        }
    }

    fn near_zero(beta: T) -> Self {
        if beta == T::one() {
            Chart::Log
        } else {
            Chart::Power(beta)
        }
    }
}

/// Sub-intervals of `x_from → x_to` in integration order, split at `x = 1`.
fn chart_pieces<T: Real>(beta: T, x_from: T, x_to: T) -> Vec<(Chart<T>, T, T)> {
    let near = Chart::near_zero(beta);
    let one = T::one();
    let (lo, hi) = if x_from < x_to { (x_from, x_to) } else { (x_to, x_from) };
    if hi <= one {
        vec![(near, x_from, x_to)]
    } else if lo >= one {
        vec![(Chart::Linear, x_from, x_to)]
    } else if x_from < x_to {
        vec![(near, x_from, one), (Chart::Linear, one, x_to)]
    } else {
        vec![(Chart::Linear, x_from, one), (near, one, x_to)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruferState<T> {
    pub x: T,
    pub theta: T,
    pub logrho: T,
}

impl<T: Real> PruferState<T> {
    /// `z = e^{ln ρ} (cos θ, sin θ)`.
    pub fn z(&self) -> Vec2<T> {
        let r = self.logrho.exp();
        let (s, c) = self.theta.sin_cos();
        [r * c, r * s]
    }
}

/// One accepted step together with the chart it was taken in.
#[derive(Debug, Clone, Copy)]
pub struct Piece<T, const N: usize> {
    pub chart: Chart<T>,
    pub step: DenseStep<T, N>,
    /// Ascending `x` range covered by the step.
    pub x_lo: T,
    pub x_hi: T,
}

impl<T: Real, const N: usize> Piece<T, N> {
    fn new(chart: Chart<T>, step: DenseStep<T, N>) -> Self {
        let a = chart.to_x(step.t0);
        let b = chart.to_x(step.t1());
        let (x_lo, x_hi) = if a < b { (a, b) } else { (b, a) };
        Self { chart, step, x_lo, x_hi }
    }

    pub fn eval(&self, x: T) -> [T; N] {
        self.step.eval(self.chart.to_xi(x))
    }
}

/// Piece containing `x`. Bounds are chart round trips, so a few ulps of
/// slack are allowed at the outer ends.
fn locate<T: Real, P>(pieces: &[P], range: impl Fn(&P) -> (T, T), x: T) -> Option<usize> {
    let slack = T::lit(16.0) * T::epsilon();
    let (first, last) = (pieces.first()?, pieces.last()?);
    if x < range(first).0 * (T::one() - slack) || x > range(last).1 * (T::one() + slack) {
        return None;
    }
    let i = pieces.partition_point(|p| range(p).1 < x);
    Some(i.min(pieces.len() - 1))
}

/// Integration statistics and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationInfo<T> {
    pub stats: OdeStats,
    pub rtol: T,
    pub atol: T,
}

#[derive(Debug, Clone)]
pub struct PruferTrajectory<T> {
    pub lambda: T,
    pub direction: Direction,
    pub start: PruferState<T>,
    pub end: PruferState<T>,
    /// Steps sorted by ascending `x`; empty when dense output was not kept.
    pieces: Vec<Piece<T, 2>>,
    pub info: IntegrationInfo<T>,
}

impl<T: Real> PruferTrajectory<T> {
    pub fn x_range(&self) -> (T, T) {
        if self.start.x < self.end.x {
            (self.start.x, self.end.x)
        } else {
            (self.end.x, self.start.x)
        }
    }

    pub fn has_dense(&self) -> bool {
        !self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[Piece<T, 2>] {
        &self.pieces
    }

    /// State at any `x` inside the range.
    pub fn at(&self, x: T) -> Option<PruferState<T>> {
        if x == self.start.x {
            return Some(self.start);
        }
        if x == self.end.x {
            return Some(self.end);
        }
        let p = &self.pieces[locate(&self.pieces, |p| (p.x_lo, p.x_hi), x)?];
        let y = p.eval(x);
        Some(PruferState { x, theta: y[0], logrho: y[1] })
    }

    /// States at the accepted step boundaries, ascending in `x`.
    pub fn knots(&self) -> Vec<PruferState<T>> {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        for (i, p) in self.pieces.iter().enumerate() {
            let (lo, hi) = if p.chart.to_x(p.step.t0) <= p.chart.to_x(p.step.t1()) {
                (p.step.y0(), p.step.y1())
            } else {
                (p.step.y1(), p.step.y0())
            };
            if i == 0 {
                out.push(PruferState { x: p.x_lo, theta: lo[0], logrho: lo[1] });
            }
            out.push(PruferState { x: p.x_hi, theta: hi[0], logrho: hi[1] });
        }
        out
    }

    /// `n` states log-spaced over the range.
    pub fn sample(&self, n: usize) -> Vec<PruferState<T>> {
        let (a, b) = self.x_range();
        log_space(a, b, n).into_iter().filter_map(|x| self.at(x)).collect()
    }
}

fn lift_err<T: Real>(chart: Chart<T>, e: OdeError) -> Error {
    let xi = match e {
        OdeError::StepUnderflow { t } | OdeError::MaxSteps { t, .. } | OdeError::NonFinite { t } => t,
    };
    Error::Integration { x: chart.to_x(T::lit(xi)).as_f64(), source: e }
}

/// Polar integration with a state-dependent matrix `coef(x, θ, ln ρ)`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_polar<T, M>(
    coef: M,
    beta: T,
    lambda: T,
    x_from: T,
    x_to: T,
    theta: T,
    logrho: T,
    opts: &OdeOptions<T>,
    keep_dense: bool,
) -> Result<PruferTrajectory<T>>
where
    T: Real,
    M: Fn(T, T, T) -> Sym2<T>,
{
    if !theta.is_finite() {
        return Err(Error::InvalidParameter("initial angle must be finite".into()));
    }
    let direction = if x_to >= x_from { Direction::Forward } else { Direction::Backward };
    let start = PruferState { x: x_from, theta, logrho };
    let mut y = [theta, logrho];
    let mut pieces = Vec::new();
    let mut stats = OdeStats::default();
    let step_opts = OdeOptions { dense: keep_dense, ..*opts };
    for (chart, a, b) in chart_pieces(beta, x_from, x_to) {
        let rhs = |xi: T, s: &[T; 2]| {
            let x = chart.to_x(xi);
            let jac = chart.jacobian(x);
            let p = coef(x, s[0], s[1]);
            let (dt, dl) = prufer_rhs(&p, lambda, s[0]);
            [dt * jac, dl * jac]
        };
        let end = integrate(rhs, chart.to_xi(a), y, chart.to_xi(b), &step_opts, |st| {
            if keep_dense {
                pieces.push(Piece::new(chart, *st));
            }
            Control::Continue
        })
        .map_err(|e| lift_err(chart, e))?;
        y = end.y;
        stats.accepted += end.stats.accepted;
        stats.rejected += end.stats.rejected;
        stats.evals += end.stats.evals;
    }
    if direction == Direction::Backward {
        pieces.reverse();
    }
    Ok(PruferTrajectory {
        lambda,
        direction,
        start,
        end: PruferState { x: x_to, theta: y[0], logrho: y[1] },
        pieces,
        info: IntegrationInfo { stats, rtol: opts.rtol, atol: opts.atol },
    })
}

/// Linear Prüfer system between two arbitrary points.
#[allow(clippy::too_many_arguments)]
pub fn integrate_prufer_between<T: Real>(
    family: &CoefficientFamily<T>,
    lambda: T,
    x_from: T,
    x_to: T,
    theta: T,
    logrho: T,
    opts: &OdeOptions<T>,
    keep_dense: bool,
) -> Result<PruferTrajectory<T>> {
    integrate_polar(|x, _, _| family.eval(x), family.beta, lambda, x_from, x_to, theta, logrho, opts, keep_dense)
}

/// Linear Prüfer system across the whole window, `ln ρ = 0` at the start.
pub fn integrate_prufer<T: Real>(
    family: &CoefficientFamily<T>,
    lambda: T,
    window: &TruncationWindow<T>,
    theta_init: T,
    direction: Direction,
    opts: &OdeOptions<T>,
) -> Result<PruferTrajectory<T>> {
    let (a, b) = match direction {
        Direction::Forward => (window.x0, window.x_inf),
        Direction::Backward => (window.x_inf, window.x0),
    };
    integrate_prufer_between(family, lambda, a, b, theta_init, T::zero(), opts, true)
}

/// Cartesian step with its amplitude scale and unwrapped angles at
/// quarter points of the step.
#[derive(Debug, Clone, Copy)]
struct CartesianPiece<T> {
    piece: Piece<T, 2>,
    log_scale: T,
    /// Unwrapped angles at `ξ = t0 + j h / 4`, `j = 0..=4`.
    angles: [T; 5],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianSample<T> {
    pub x: T,
    pub u: T,
    pub v: T,
    /// `ln` of the factor removed by renormalisation so far.
    pub log_scale: T,
    /// Unwrapped polar angle.
    pub angle: T,
}

impl<T: Real> CartesianSample<T> {
    /// `ln ‖z‖` including the renormalisation log.
    pub fn log_norm(&self) -> T {
        norm2([self.u, self.v]).ln() + self.log_scale
    }
}

#[derive(Debug, Clone)]
pub struct CartesianTrajectory<T> {
    pub lambda: T,
    pub direction: Direction,
    pieces: Vec<CartesianPiece<T>>,
    /// `(x, ln factor)` for each renormalisation, in integration order.
    pub renormalizations: Vec<(T, T)>,
    pub start: CartesianSample<T>,
    pub end: CartesianSample<T>,
    pub info: IntegrationInfo<T>,
}

fn unwrap_near<T: Real>(raw: T, reference: T) -> T {
    let two_pi = T::lit(2.0 * PI);
    raw + two_pi * ((reference - raw) / two_pi).round()
}

impl<T: Real> CartesianTrajectory<T> {
    pub fn at(&self, x: T) -> Option<CartesianSample<T>> {
        let i = locate(&self.pieces, |p| (p.piece.x_lo, p.piece.x_hi), x)?;
        let cp = &self.pieces[i];
        let xi = cp.piece.chart.to_xi(x);
        let z = cp.piece.step.eval(xi);
        let s = (xi - cp.piece.step.t0) / cp.piece.step.h;
        let j = (s * T::lit(4.0)).round().to_usize().unwrap_or(0).min(4);
        let angle = unwrap_near(z[1].atan2(z[0]), cp.angles[j]);
        Some(CartesianSample { x, u: z[0], v: z[1], log_scale: cp.log_scale, angle })
    }
}

const RENORM_HI: f64 = 1e150;
const RENORM_LO: f64 = 1e-150;

/// `z' = J⁻¹(λ − P) z` with renormalisation and continuous angle tracking.
pub fn integrate_cartesian<T: Real>(
    family: &CoefficientFamily<T>,
    lambda: T,
    window: &TruncationWindow<T>,
    z_init: Vec2<T>,
    direction: Direction,
    opts: &OdeOptions<T>,
) -> Result<CartesianTrajectory<T>> {
    let (a, b) = match direction {
        Direction::Forward => (window.x0, window.x_inf),
        Direction::Backward => (window.x_inf, window.x0),
    };
    integrate_cartesian_between(family, lambda, a, b, z_init, opts)
}

pub fn integrate_cartesian_between<T: Real>(
    family: &CoefficientFamily<T>,
    lambda: T,
    x_from: T,
    x_to: T,
    z_init: Vec2<T>,
    opts: &OdeOptions<T>,
) -> Result<CartesianTrajectory<T>> {
    if norm2(z_init) == T::zero() || !z_init.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("initial vector must be finite and nonzero".into()));
    }
    let direction = if x_to >= x_from { Direction::Forward } else { Direction::Backward };
    let angle0 = z_init[1].atan2(z_init[0]);
    let start = CartesianSample { x: x_from, u: z_init[0], v: z_init[1], log_scale: T::zero(), angle: angle0 };
    let mut y = z_init;
    let mut log_scale = T::zero();
    let mut angle = angle0;
    let mut pieces: Vec<CartesianPiece<T>> = Vec::new();
    let mut renorm = Vec::new();
    let mut stats = OdeStats::default();
    let (hi, lo) = (T::lit(RENORM_HI), T::lit(RENORM_LO));
    for (chart, a, b) in chart_pieces(family.beta, x_from, x_to) {
        let rhs = |xi: T, z: &[T; 2]| {
            let x = chart.to_x(xi);
            let jac = chart.jacobian(x);
            let d = linear_field(&family.eval(x), lambda, *z);
            [d[0] * jac, d[1] * jac]
        };
        let end = integrate(rhs, chart.to_xi(a), y, chart.to_xi(b), opts, |st| {
            let mut angles = [angle; 5];
            for (j, slot) in angles.iter_mut().enumerate().skip(1) {
                let z = st.eval(st.t0 + st.h * T::from_count(j) / T::lit(4.0));
                angle = unwrap_near(z[1].atan2(z[0]), angle);
                *slot = angle;
            }
            pieces.push(CartesianPiece { piece: Piece::new(chart, *st), log_scale, angles });
            let z = st.y1();
            let n = norm2(z);
            if n > hi || n < lo {
                log_scale = log_scale + n.ln();
                renorm.push((chart.to_x(st.t1()), n.ln()));
                Control::Replace([z[0] / n, z[1] / n])
            } else {
                Control::Continue
            }
        })
        .map_err(|e| lift_err(chart, e))?;
        y = end.y;
        stats.accepted += end.stats.accepted;
        stats.rejected += end.stats.rejected;
        stats.evals += end.stats.evals;
    }
    if direction == Direction::Backward {
        pieces.reverse();
    }
    Ok(CartesianTrajectory {
        lambda,
        direction,
        pieces,
        renormalizations: renorm,
        start,
        end: CartesianSample { x: x_to, u: y[0], v: y[1], log_scale, angle },
        info: IntegrationInfo { stats, rtol: opts.rtol, atol: opts.atol },
    })
}

/// Largest relative defect of the reconstructed `z` in `z' = J⁻¹(λ − P) z`,
/// by fourth-order central differences at `sample_count` interior points.
pub fn ode_residual<T: Real>(
    trajectory: &PruferTrajectory<T>,
    family: &CoefficientFamily<T>,
    lambda: T,
    sample_count: usize,
) -> T {
    if sample_count == 0 || !trajectory.has_dense() {
        return T::zero();
    }
    let (a, b) = trajectory.x_range();
    let margin = T::lit(1.02);
    let xs = log_space(a * margin, b / margin, sample_count);
    let mut worst = T::zero();
    for x in xs {
        let p = family.eval(x);
        let scale = Sym2::new(lambda - p.p11, -p.p12, lambda - p.p22).norm().max(T::min_positive_value());
        // Step resolves both the geometric scale and the local rate.
        let h = T::lit(1e-3) * x.min(T::one()).min(T::one() / scale);
        let Some(c) = trajectory.at(x) else { continue };
        let z_at = |xx: T| -> Option<Vec2<T>> {
            let s = trajectory.at(xx)?;
            let r = (s.logrho - c.logrho).exp();
            let (sn, cs) = s.theta.sin_cos();
            Some([r * cs, r * sn])
        };
        let (Some(p2), Some(p1), Some(m1), Some(m2)) =
            (z_at(x + h + h), z_at(x + h), z_at(x - h), z_at(x - h - h))
        else {
            continue;
        };
        let twelve_h = T::lit(12.0) * h;
        let eight = T::lit(8.0);
        let fd = [
            (-p2[0] + eight * p1[0] - eight * m1[0] + m2[0]) / twelve_h,
            (-p2[1] + eight * p1[1] - eight * m1[1] + m2[1]) / twelve_h,
        ];
        let z0 = [c.theta.cos(), c.theta.sin()];
        let rhs = linear_field(&p, lambda, z0);
        let r = norm2([fd[0] - rhs[0], fd[1] - rhs[1]]) / scale;
        if r > worst {
            worst = r;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{infinity_data, zero_data};
    use crate::model::{build_dirac_family, DiracRadialParams, PotentialSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn free_limit() -> CoefficientFamily<f64> {
        let p = Sym2::diag(-1.0, 1.0);
        CoefficientFamily::new(Arc::new(move |_| p), -1.0, 1.0, 1.0, Sym2::new(0.0, 1.0, 0.0), 1.0, 2.0).unwrap()
    }

    fn coulomb(k: i32, gamma: f64) -> CoefficientFamily<f64> {
        build_dirac_family(DiracRadialParams { k, mu_a: 0.0, potential: PotentialSpec::coulomb(gamma) }).unwrap()
    }

    #[test]
    fn rhs_on_axes() {
        let p = Sym2::new(0.3, -0.7, 1.9);
        let (dt, dl) = prufer_rhs(&p, 0.4, 0.0);
        assert_abs_diff_eq!(dt, 0.4 - 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(dl, -0.7);
        let (dt, dl) = prufer_rhs(&p, 0.4, PI / 2.0);
        assert_abs_diff_eq!(dt, 0.4 - 1.9, epsilon = 1e-15);
        assert_abs_diff_eq!(dl, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn rhs_can_decrease_angle() {
        let (dt, _) = prufer_rhs(&Sym2::new(-1.5, 1.0, 0.5), 0.0, PI / 4.0);
        assert_abs_diff_eq!(dt, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn stationary_angle_for_constant_matrix() {
        let f = free_limit();
        let w = TruncationWindow::new(1e-3, 50.0, 2e-4, 1e-3).unwrap();
        let t = integrate_prufer(&f, 0.0, &w, 0.25 * PI, Direction::Forward, &OdeOptions::default()).unwrap();
        for s in t.sample(40) {
            assert_abs_diff_eq!(s.theta, 0.25 * PI, epsilon = 1e-8);
        }
        for lam in [-0.6, 0.1, 0.9] {
            let th = infinity_data(-1.0, 1.0, lam).unwrap().theta_inf;
            // θ∞ attracts backward flow, π − θ∞ attracts forward flow.
            let opts = OdeOptions::default();
            let t = integrate_prufer(&f, lam, &w, th, Direction::Backward, &opts).unwrap();
            assert_abs_diff_eq!(t.end.theta, th, epsilon = 1e-8);
            let t = integrate_prufer(&f, lam, &w, PI - th, Direction::Forward, &opts).unwrap();
            assert_abs_diff_eq!(t.end.theta, PI - th, epsilon = 1e-8);
        }
    }

    #[test]
    fn cartesian_decay_and_growth_rates() {
        let f = free_limit();
        let w = TruncationWindow::new(1.0, 400.0, 2e-4, 1e-3).unwrap();
        let d = infinity_data(-1.0, 1.0, 0.0).unwrap();
        let opts = OdeOptions::default();
        let t = integrate_cartesian(&f, 0.0, &w, d.b1, Direction::Backward, &opts).unwrap();
        assert_abs_diff_eq!(t.end.log_norm(), 399.0, epsilon = 1e-7);
        assert!(!t.renormalizations.is_empty());
        assert_abs_diff_eq!(t.end.angle, d.theta_inf, epsilon = 1e-9);
        let t = integrate_cartesian(&f, 0.0, &w, d.b2, Direction::Forward, &opts).unwrap();
        assert_abs_diff_eq!(t.end.log_norm() / 399.0, d.sqrt_delta(), epsilon = 1e-9);
    }

    #[test]
    fn polar_and_cartesian_agree_on_coulomb() {
        let f = coulomb(-1, -0.5);
        let z = zero_data(&f).unwrap();
        let w = TruncationWindow::new(2e-4, 60.0, 2e-4, 1e-3).unwrap();
        let opts = OdeOptions::default();
        for lam in [0.3, 0.9] {
            let p = integrate_prufer(&f, lam, &w, z.theta0, Direction::Forward, &opts).unwrap();
            let c = integrate_cartesian(&f, lam, &w, z.w1, Direction::Forward, &opts).unwrap();
            for x in log_space(w.x0, w.x_inf, 64) {
                let a = p.at(x).unwrap();
                let b = c.at(x).unwrap();
                assert!((a.theta - b.angle).abs() < 1e-8, "x={x} {} {}", a.theta, b.angle);
                assert!((a.logrho - b.log_norm()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn backward_flow_returns_to_start() {
        let f = coulomb(-1, -0.3);
        let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
        let fwd = integrate_prufer_between(&f, 0.2, 0.1, 5.0, 1.0, 0.0, &opts, true).unwrap();
        let bwd = integrate_prufer_between(&f, 0.2, 5.0, 0.1, fwd.end.theta, fwd.end.logrho, &opts, true).unwrap();
        assert_abs_diff_eq!(bwd.end.theta, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(bwd.end.logrho, 0.0, epsilon = 1e-8);
        let mid = bwd.at(2.0).unwrap();
        assert_abs_diff_eq!(mid.theta, fwd.at(2.0).unwrap().theta, epsilon = 1e-8);
    }

    #[test]
    fn residual_of_constant_family() {
        let f = free_limit();
        let w = TruncationWindow::new(1e-2, 30.0, 2e-4, 1e-3).unwrap();
        let t = integrate_prufer(&f, 0.3, &w, 0.4, Direction::Forward, &OdeOptions::default()).unwrap();
        assert!(ode_residual(&t, &f, 0.3, 50) < 1e-7);
        assert_eq!(ode_residual(&t, &f, 0.3, 0), 0.0);
    }

    #[test]
    fn power_chart_for_anomalous_moment() {
        let f = build_dirac_family(DiracRadialParams { k: -1, mu_a: 1.0, potential: PotentialSpec::coulomb(-2.0) })
            .unwrap();
        let z = zero_data(&f).unwrap();
        let opts = OdeOptions::default();
        let t = integrate_prufer_between(&f, 0.1, 1e-3, 20.0, z.theta0, 0.0, &opts, true).unwrap();
        assert!(t.pieces().iter().any(|p| matches!(p.chart, Chart::Power(_))));
        let r = ode_residual(&t, &f, 0.1, 40);
        assert!(r < 1e-6, "residual {r}");
        let c = integrate_cartesian_between(&f, 0.1, 1e-3, 20.0, z.w1, &opts).unwrap();
        for x in log_space(1e-3_f64, 20.0, 30) {
            assert!((t.at(x).unwrap().theta - c.at(x).unwrap().angle).abs() < 1e-8);
        }
    }
}
