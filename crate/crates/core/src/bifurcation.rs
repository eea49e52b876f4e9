//! Nonlinear shooting and amplitude continuation from a gap eigenvalue.
//!
//! The state is carried in polar form, so the nonlinear system is the Prüfer
//! system of `P_eff(x) = P(x) − S(x, z(x))`. The left amplitude `a` is the
//! coefficient of the regular solution at zero (`z ≈ a x^{√Δ*} w₁` for
//! β = 1), the right scale `b` is referred to `x_mid` through the linear
//! decay rate: `ln ρ(X∞) = ln b − √Δ (X∞ − x_mid)`.

use crate::asymptotics::{index_from_rotation, infinity_data, zero_data, Quadrant, TruncationWindow, ZeroData};
use crate::error::{Error, Result};
use crate::linalg::{norm2, Vec2};
use crate::model::{CoefficientFamily, NonlinearCoupling};
use crate::ode::OdeOptions;
use crate::prufer::{integrate_polar, PruferState, PruferTrajectory};
use crate::scalar::{log_space, Real};
use crate::spectrum::{head_log_amplitude, log_head, log_integral, log_sum_exp, EigenvalueRecord};

/// Everything fixed along a branch.
#[derive(Clone)]
pub struct ShootingProblem<T> {
    pub family: CoefficientFamily<T>,
    pub coupling: NonlinearCoupling<T>,
    pub window: TruncationWindow<T>,
    /// Level of the seed; fixes the branch of the angle at `X∞`.
    pub level: i64,
    pub zero: ZeroData<T>,
    pub ode: OdeOptions<T>,
}

impl<T: Real> std::fmt::Debug for ShootingProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShootingProblem")
            .field("family", &self.family)
            .field("window", &self.window)
            .field("level", &self.level)
            .finish()
    }
}

impl<T: Real> ShootingProblem<T> {
    pub fn new(
        family: CoefficientFamily<T>,
        coupling: NonlinearCoupling<T>,
        window: TruncationWindow<T>,
        level: i64,
        ode: OdeOptions<T>,
    ) -> Result<Self> {
        let zero = zero_data(&family)?;
        Ok(Self { family, coupling, window, level, zero, ode })
    }

    fn legs(&self, lambda: T, ln_a: T, ln_b: T, dense: bool) -> Result<(PruferTrajectory<T>, PruferTrajectory<T>)> {
        let inf = infinity_data(self.family.mu_minus, self.family.mu_plus, lambda)?;
        let w = &self.window;
        let x_mid = w.x_mid();
        let coef = |x: T, th: T, lr: T| {
            let r = lr.exp();
            let (s, c) = th.sin_cos();
            self.family.eval(x).sub(&self.coupling.eval(x, [r * c, r * s]))
        };
        let fwd = integrate_polar(
            coef,
            self.family.beta,
            lambda,
            w.x0,
            x_mid,
            self.zero.theta0,
            ln_a + head_log_amplitude(&self.zero, w.x0),
            &self.ode,
            dense,
        )?;
        let theta_end = inf.theta_inf + T::lit((self.level - 1) as f64) * T::PI();
        let start = ln_b - inf.sqrt_delta() * (w.x_inf - x_mid);
        let bwd = integrate_polar(coef, self.family.beta, lambda, w.x_inf, x_mid, theta_end, start, &self.ode, dense)?;
        for t in [&fwd, &bwd] {
            if !(t.end.logrho < T::lit(700.0)) {
                return Err(Error::Overflow { x: t.end.x.as_f64() });
            }
        }
        Ok((fwd, bwd))
    }

    /// `(θ_fwd − θ_bwd, ln ρ_fwd − ln ρ_bwd)` at `x_mid`.
    fn polar_residual(&self, lambda: T, ln_a: T, ln_b: T) -> Result<Vec2<T>> {
        let (f, b) = self.legs(lambda, ln_a, ln_b, false)?;
        Ok([f.end.theta - b.end.theta, f.end.logrho - b.end.logrho])
    }
}

/// `z_fwd(x_mid) − z_bwd(x_mid)` for left amplitude `a` and right scale `b`.
pub fn shoot_nonlinear<T: Real>(problem: &ShootingProblem<T>, lambda: T, a: T, b: T) -> Result<Vec2<T>> {
    if !(a >= T::zero() && b >= T::zero()) {
        return Err(Error::InvalidParameter("shooting scales must be non-negative".into()));
    }
    problem.family.check_in_gap(lambda)?;
    // S(x, 0) = 0, so a zero scale gives the trivial solution on that leg.
    let (ln_a, ln_b) = (a.ln(), b.ln());
    let (zf, zb) = match (a > T::zero(), b > T::zero()) {
        (false, false) => return Ok([T::zero(); 2]),
        (true, true) => {
            let (f, g) = problem.legs(lambda, ln_a, ln_b, false)?;
            (f.end.z(), g.end.z())
        }
        (true, false) => {
            let (f, _) = problem.legs(lambda, ln_a, T::zero(), false)?;
            (f.end.z(), [T::zero(); 2])
        }
        (false, true) => {
            let (_, g) = problem.legs(lambda, T::zero(), ln_b, false)?;
            ([T::zero(); 2], g.end.z())
        }
    };
    Ok([zf[0] - zb[0], zf[1] - zb[1]])
}

/// Quantity held fixed by the corrector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint<T> {
    Amplitude(T),
    Lambda(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorOptions<T> {
    /// Target for `‖z_fwd − z_bwd‖ / ‖z_fwd‖` at `x_mid`.
    pub tol: T,
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: T,
    pub n_samples: usize,
}

impl<T: Real> Default for CorrectorOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iter: 25, fd_step: T::lit(1e-7), n_samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint<T> {
    pub lambda: T,
    pub amplitude: T,
    pub log_b: T,
    /// `(x, u, v)`.
    pub samples: Vec<(T, T, T)>,
    pub l2_norm: T,
    pub theta_start: T,
    pub theta_end: T,
    pub j: T,
    pub i: i64,
    pub i_flagged: bool,
    pub bvp_residual: T,
    pub iterations: usize,
}

/// `j = (θ(X∞) − θ(x₀))/π` and the quadrant floor rule.
pub fn sweep_index<T: Real>(theta_start: T, theta_end: T, quadrant: Quadrant) -> (T, i64, bool) {
    let j = (theta_end - theta_start) / T::PI();
    let (i, flagged) = index_from_rotation(j, quadrant);
    (j, i, flagged)
}

/// Index pair of a solved point from its own angle sweep.
pub fn linearized_index<T: Real>(problem: &ShootingProblem<T>, point: &BranchPoint<T>) -> Result<(T, i64)> {
    if point.samples.iter().any(|&(x, u, v)| !(norm2([u, v]) > T::zero()) && x > T::zero()) {
        let x = point.samples.iter().find(|s| !(norm2([s.1, s.2]) > T::zero())).map_or(0.0, |s| s.0.as_f64());
        return Err(Error::VanishingSolution { x });
    }
    let (j, i, _) = sweep_index(point.theta_start, point.theta_end, problem.zero.quadrant);
    Ok((j, i))
}

fn solve2<T: Real>(m: [[T; 2]; 2], r: Vec2<T>) -> Result<Vec2<T>> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|v| v.abs()).fold(T::zero(), T::max);
    if !(det.abs() > T::lit(1e-14) * scale * scale) {
        let cond = if det == T::zero() { f64::INFINITY } else { (scale * scale / det.abs()).as_f64() };
        return Err(Error::SingularJacobian { condition: cond });
    }
    Ok([(m[1][1] * r[0] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - m[1][0] * r[0]) / det])
}

/// Relative Cartesian mismatch for a polar residual `(Δθ, Δ ln ρ)`.
fn cartesian_relative<T: Real>(r: Vec2<T>) -> T {
    // |1 − e^{−Δl} e^{−iΔθ}|
    let q = (-r[1]).exp();
    let (s, c) = r[0].sin_cos();
    norm2([T::one() - q * c, q * s])
}

/// Newton corrector on `(λ, ln b)` at fixed amplitude, or `(ln a, ln b)` at
/// fixed `λ`, from `guess = (λ, a, ln b)`.
pub fn solve_point<T: Real>(
    problem: &ShootingProblem<T>,
    guess: (T, T, T),
    constraint: Constraint<T>,
    opts: &CorrectorOptions<T>,
) -> Result<BranchPoint<T>> {
    let (lam0, a0, lb0) = guess;
    let (mut p, fixed) = match constraint {
        Constraint::Amplitude(a) => {
            if !(a > T::zero()) {
                return Err(Error::InvalidParameter("amplitude target must be positive".into()));
            }
            ([lam0, lb0], a)
        }
        Constraint::Lambda(l) => ([a0.max(T::min_positive_value()).ln(), lb0], l),
    };
    let unpack = |p: [T; 2]| match constraint {
        Constraint::Amplitude(_) => (p[0], fixed.ln(), p[1]),
        Constraint::Lambda(_) => (fixed, p[0], p[1]),
    };
    let fam = &problem.family;
    let residual = |p: [T; 2]| -> Result<Vec2<T>> {
        let (l, la, lb) = unpack(p);
        if !fam.in_gap(l) {
            return Err(Error::OutsideGap { lambda: l.as_f64(), lo: fam.mu_minus.as_f64(), hi: fam.mu_plus.as_f64() });
        }
        problem.polar_residual(l, la, lb)
    };
    let non_conv = |iterations: usize, r: T| Error::NonConvergence { iterations, residual: r.as_f64() };
    let mut r = match residual(p) {
        Ok(r) => r,
        Err(Error::OutsideGap { .. }) => return Err(non_conv(0, T::infinity())),
        Err(e) => return Err(e),
    };
    let mut iterations = 0;
    while cartesian_relative(r) >= opts.tol {
        if iterations >= opts.max_iter {
            return Err(non_conv(iterations, cartesian_relative(r)));
        }
        iterations += 1;
        let mut jac = [[T::zero(); 2]; 2];
        for col in 0..2 {
            let h = opts.fd_step * p[col].abs().max(T::one());
            let mut q = p;
            q[col] = q[col] + h;
            let rq = residual(q).map_err(|_| non_conv(iterations, cartesian_relative(r)))?;
            jac[0][col] = (rq[0] - r[0]) / h;
            jac[1][col] = (rq[1] - r[1]) / h;
        }
        let d = solve2(jac, r)?;
        let norm = norm2(r);
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..8 {
            let q = [p[0] - t * d[0], p[1] - t * d[1]];
            if let Ok(rq) = residual(q) {
                if norm2(rq) < norm {
                    accepted = Some((q, rq));
                    break;
                }
            }
            t = t * T::lit(0.5);
        }
        let Some((q, rq)) = accepted else {
            return Err(non_conv(iterations, cartesian_relative(r)));
        };
        p = q;
        r = rq;
    }
    let (lambda, ln_a, ln_b) = unpack(p);
    finish_point(problem, lambda, ln_a, ln_b, iterations, opts.n_samples)
}

fn finish_point<T: Real>(
    problem: &ShootingProblem<T>,
    lambda: T,
    ln_a: T,
    ln_b: T,
    iterations: usize,
    n_samples: usize,
) -> Result<BranchPoint<T>> {
    let (fwd, bwd) = problem.legs(lambda, ln_a, ln_b, true)?;
    let zf = fwd.end.z();
    let zb = bwd.end.z();
    let bvp_residual = norm2([zf[0] - zb[0], zf[1] - zb[1]]) / norm2(zf);
    let x_mid = problem.window.x_mid();
    let at = |x: T| -> Option<PruferState<T>> {
        if x <= x_mid {
            fwd.at(x)
        } else {
            bwd.at(x)
        }
    };
    let mut samples = Vec::with_capacity(n_samples);
    for x in log_space(problem.window.x0, problem.window.x_inf, n_samples) {
        let s = at(x).ok_or(Error::VanishingSolution { x: x.as_f64() })?;
        if !s.logrho.is_finite() {
            return Err(Error::VanishingSolution { x: x.as_f64() });
        }
        let z = s.z();
        samples.push((x, z[0], z[1]));
    }
    let inf = infinity_data(problem.family.mu_minus, problem.family.mu_plus, lambda)?;
    let mut terms = Vec::new();
    log_integral(&fwd, T::zero(), &mut terms);
    log_integral(&bwd, T::zero(), &mut terms);
    terms.push(log_head(&problem.zero, problem.window.x0, fwd.start.logrho));
    terms.push(T::lit(2.0) * bwd.start.logrho - (T::lit(2.0) * inf.sqrt_delta()).ln());
    let l2_norm = (T::lit(0.5) * log_sum_exp(&terms)).exp();
    let theta_start = fwd.start.theta;
    let theta_end = bwd.start.theta + (fwd.end.theta - bwd.end.theta);
    let (j, i, i_flagged) = sweep_index(theta_start, theta_end, problem.zero.quadrant);
    Ok(BranchPoint {
        lambda,
        amplitude: ln_a.exp(),
        log_b: ln_b,
        samples,
        l2_norm,
        theta_start,
        theta_end,
        j,
        i,
        i_flagged,
        bvp_residual,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxSteps,
    GapEdgeReached,
    AmplitudeLimit,
    StepFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::MaxSteps => "max-steps",
            Termination::GapEdgeReached => "gap-edge-reached",
            Termination::AmplitudeLimit => "amplitude-limit",
            Termination::StepFailure => "step-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions<T> {
    /// Amplitude step; also the first amplitude.
    pub ds: T,
    pub max_steps: usize,
    pub a_max: T,
    pub max_halvings: usize,
    /// Distance to a gap edge that ends the branch.
    pub edge_margin: T,
    /// Largest accepted seed residual `|m_k|`.
    pub seed_limit: T,
    pub corrector: CorrectorOptions<T>,
}

impl<T: Real> Default for ContinuationOptions<T> {
    fn default() -> Self {
        Self {
            ds: T::lit(0.01),
            max_steps: 25,
            a_max: T::infinity(),
            max_halvings: 4,
            edge_margin: T::lit(1e-6),
            seed_limit: T::lit(1e-6),
            corrector: CorrectorOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Branch<T> {
    pub seed: EigenvalueRecord<T>,
    pub points: Vec<BranchPoint<T>>,
    pub termination: Termination,
    /// Step numbers whose index differs from the seed's nodal index.
    pub index_violations: Vec<usize>,
}

impl<T: Real> Branch<T> {
    pub fn index_constant(&self) -> bool {
        self.index_violations.is_empty() && self.points.iter().all(|p| p.i == self.seed.nodal_index)
    }

    /// `p` from `λ = p + q a² + r a⁴` through the first three points.
    pub fn extrapolate_to_zero(&self) -> Option<T> {
        if self.points.len() < 3 {
            return None;
        }
        let s: Vec<(T, T)> = self.points[..3].iter().map(|p| (p.amplitude * p.amplitude, p.lambda)).collect();
        // Neville on t = a².
        let (t0, l0) = s[0];
        let (t1, l1) = s[1];
        let (t2, l2) = s[2];
        let p01 = (l0 * t1 - l1 * t0) / (t1 - t0);
        let p12 = (l1 * t2 - l2 * t1) / (t2 - t1);
        Some((p01 * t2 - p12 * t0) / (t2 - t0))
    }

    /// Sign of `λ(a) − λ_k` along the branch.
    pub fn drift(&self) -> T {
        self.points.last().map_or(T::zero(), |p| (p.lambda - self.seed.lambda).signum())
    }
}

/// Secant-predicted, Newton-corrected march in the amplitude.
pub fn continue_branch<T: Real>(
    family: &CoefficientFamily<T>,
    coupling: &NonlinearCoupling<T>,
    seed: &EigenvalueRecord<T>,
    ode: &OdeOptions<T>,
    opts: &ContinuationOptions<T>,
) -> Result<Branch<T>> {
    if !(opts.ds > T::zero()) {
        return Err(Error::InvalidParameter("continuation step must be positive".into()));
    }
    if !(seed.residual <= opts.seed_limit) {
        return Err(Error::SeedResidual { residual: seed.residual.as_f64(), limit: opts.seed_limit.as_f64() });
    }
    let problem = ShootingProblem::new(family.clone(), coupling.clone(), seed.window, seed.k, *ode)?;
    // Linear right scale for a = 1: one residual evaluation fixes ln b exactly.
    let lin = ShootingProblem::new(family.clone(), NonlinearCoupling::zero(), seed.window, seed.k, *ode)?;
    let offset = lin.polar_residual(seed.lambda, T::zero(), T::zero())?[1];

    let mut points: Vec<BranchPoint<T>> = Vec::new();
    let mut violations = Vec::new();
    let mut ds = opts.ds;
    let mut halvings = 0;
    let mut a = opts.ds;
    let termination = loop {
        if points.len() >= opts.max_steps {
            break Termination::MaxSteps;
        }
        if a > opts.a_max {
            break Termination::AmplitudeLimit;
        }
        let guess = match points.len() {
            0 => (seed.lambda, a, a.ln() + offset),
            1 => {
                let p = &points[0];
                (p.lambda, a, a.ln() + p.log_b - p.amplitude.ln())
            }
            n => {
                let (p, q) = (&points[n - 1], &points[n - 2]);
                let s = (a - p.amplitude) / (p.amplitude - q.amplitude);
                let off_p = p.log_b - p.amplitude.ln();
                let off_q = q.log_b - q.amplitude.ln();
                (p.lambda + s * (p.lambda - q.lambda), a, a.ln() + off_p + s * (off_p - off_q))
            }
        };
        match solve_point(&problem, guess, Constraint::Amplitude(a), &opts.corrector) {
            Ok(pt) => {
                if pt.i != seed.nodal_index || pt.i_flagged {
                    violations.push(points.len());
                }
                let lam = pt.lambda;
                points.push(pt);
                if lam - family.mu_minus < opts.edge_margin || family.mu_plus - lam < opts.edge_margin {
                    break Termination::GapEdgeReached;
                }
                halvings = 0;
                a = a + ds;
            }
            Err(e) => {
                if halvings >= opts.max_halvings {
                    if points.is_empty() {
                        return Err(e);
                    }
                    break Termination::StepFailure;
                }
                halvings += 1;
                ds = ds * T::lit(0.5);
                a = points.last().map_or(ds, |p| p.amplitude + ds);
            }
        }
    };
    Ok(Branch { seed: seed.clone(), points, termination, index_violations: violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{default_delta, select_truncation};
    use crate::model::{build_dirac_family, build_soler_coupling, DiracRadialParams, PotentialSpec};
    use crate::spectrum::{solve_level, SolveOptions};
    use std::sync::Arc;

    fn setup() -> (CoefficientFamily<f64>, EigenvalueRecord<f64>) {
        let f = build_dirac_family(DiracRadialParams { k: -1, mu_a: 0.0, potential: PotentialSpec::coulomb(-0.5) })
            .unwrap();
        let w = select_truncation(&f, (-0.9, 0.999), default_delta(&f), 1e-3).unwrap();
        let rec = solve_level(&f, 1, (0.95, 0.975), &w, &SolveOptions::default()).unwrap();
        (f, rec)
    }

    fn soler() -> NonlinearCoupling<f64> {
        build_soler_coupling(Arc::new(|r: f64| r * r / (1.0 + r.powi(5))), Arc::new(|s| s), 1.0).unwrap()
    }

    fn problem(f: &CoefficientFamily<f64>, c: NonlinearCoupling<f64>, rec: &EigenvalueRecord<f64>) -> ShootingProblem<f64> {
        ShootingProblem::new(f.clone(), c, rec.window, rec.k, OdeOptions::default()).unwrap()
    }

    #[test]
    fn trivial_shot() {
        let (f, rec) = setup();
        let p = problem(&f, soler(), &rec);
        assert_eq!(shoot_nonlinear(&p, rec.lambda, 0.0, 0.0).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn linear_eigenpair_closes_the_shot() {
        let (f, rec) = setup();
        let p = problem(&f, NonlinearCoupling::zero(), &rec);
        let off = p.polar_residual(rec.lambda, 0.0, 0.0).unwrap()[1];
        for a in [1e-3, 1e-1] {
            let m = shoot_nonlinear(&p, rec.lambda, a, a * off.exp()).unwrap();
            let zf = p.legs(rec.lambda, a.ln(), 0.0, false).unwrap().0.end.z();
            assert!(norm2(m) / norm2(zf) < 1e-7, "{m:?}");
        }
    }

    #[test]
    fn mismatch_is_superlinear_in_amplitude() {
        let (f, rec) = setup();
        let lin = problem(&f, NonlinearCoupling::zero(), &rec);
        let off = lin.polar_residual(rec.lambda, 0.0, 0.0).unwrap()[1];
        let p = problem(&f, soler(), &rec);
        let ratio: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&a| norm2(shoot_nonlinear(&p, rec.lambda, a, a * off.exp()).unwrap()) / a)
            .collect();
        // ‖m‖/a = O(a²).
        assert!(ratio[1] / ratio[0] > 50.0 && ratio[1] / ratio[0] < 200.0, "{ratio:?}");
        assert!(ratio[2] / ratio[1] > 50.0 && ratio[2] / ratio[1] < 200.0, "{ratio:?}");
    }

    #[test]
    fn zero_coupling_gives_vertical_branch() {
        let (f, rec) = setup();
        let p = problem(&f, NonlinearCoupling::zero(), &rec);
        let opts = CorrectorOptions::default();
        let mut offsets = Vec::new();
        for a in [1e-3, 1e-1] {
            let pt = solve_point(&p, (rec.lambda + 1e-4, a, a.ln()), Constraint::Amplitude(a), &opts).unwrap();
            assert!((pt.lambda - rec.lambda).abs() < 1e-9, "{} {}", pt.lambda, rec.lambda);
            assert!(pt.bvp_residual < 1e-8);
            offsets.push(pt.log_b - a.ln());
        }
        assert!((offsets[0] - offsets[1]).abs() < 1e-7);
    }

    #[test]
    fn soler_shift_is_quadratic() {
        let (f, rec) = setup();
        let p = problem(&f, soler(), &rec);
        let opts = CorrectorOptions::default();
        let shift = |a: f64| {
            solve_point(&p, (rec.lambda, a, a.ln()), Constraint::Amplitude(a), &opts).unwrap().lambda - rec.lambda
        };
        let (s1, s2) = (shift(1e-3), shift(2e-3));
        assert!((s2 / s1 - 4.0).abs() < 0.05, "{s1} {s2}");
    }

    #[test]
    fn lambda_outside_gap_does_not_converge() {
        let (f, rec) = setup();
        let p = problem(&f, soler(), &rec);
        let e = solve_point(&p, (1.2, 1e-2, 0.0), Constraint::Lambda(1.2), &CorrectorOptions::default()).unwrap_err();
        assert!(matches!(e, Error::NonConvergence { .. }));
    }

    #[test]
    fn sweep_index_is_sign_invariant() {
        let q = Quadrant::First;
        let (j, i, _) = sweep_index(0.3, 1.7, q);
        let (j2, i2, _) = sweep_index(0.3 + std::f64::consts::PI, 1.7 + std::f64::consts::PI, q);
        assert!((j - j2).abs() < 1e-15 && i == i2);
    }

    #[test]
    fn seed_residual_gate() {
        let (f, mut rec) = setup();
        rec.residual = 1.0;
        let e = continue_branch(&f, &soler(), &rec, &OdeOptions::default(), &ContinuationOptions::default()).unwrap_err();
        assert!(matches!(e, Error::SeedResidual { .. }));
    }
}
