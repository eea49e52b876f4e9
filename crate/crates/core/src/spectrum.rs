//! Gap eigenvalues as level crossings of the shifted asymptotic angle.
//!
//! `ν*(λ) = θ(X∞; λ) + arctan √((λ − μ⁻)/(μ⁺ − λ))` with the forward angle
//! started at `θ₀`. Away from eigenvalues the forward angle settles on
//! `π − θ∞ (mod π)`, so `ν* ≡ 2 arctan(..) (mod π)` never sits on a level;
//! across an eigenvalue `ν*` climbs by `π`. `λ_k` is where `ν*` meets `kπ`.
//!
//! The forward angle at `X∞` is exponentially sensitive at an eigenvalue, so
//! refinement uses the two-sided matching function
//! `m_k(λ) = θ_fwd(x_mid) − θ_bwd(x_mid)`, with the backward leg started
//! at `θ∞ + (k − 1)π`. `m_k` is increasing and vanishes exactly at `λ_k`.

use crate::asymptotics::{gap_arctan, index_from_rotation, infinity_data, zero_data, Quadrant, TruncationWindow, ZeroData};
use crate::error::{Error, Result};
use crate::model::CoefficientFamily;
use crate::ode::OdeOptions;
use crate::prufer::{integrate_prufer_between, PruferState, PruferTrajectory};
use crate::scalar::{lin_space, log_space, ls_slope, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T> {
    pub ode: OdeOptions<T>,
    /// Tolerances once the bracket is narrower than `tighten_below`.
    pub tight: OdeOptions<T>,
    pub tighten_below: T,
    /// Target for `|m_k|`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            tight: OdeOptions::with_tolerances(T::lit(1e-12), T::lit(1e-14)),
            tighten_below: T::lit(1e-9),
            tol: T::lit(1e-9),
            max_iter: 200,
        }
    }
}

impl<T: Real> SolveOptions<T> {
    /// Slack used for monotonicity checks on `ν*`.
    pub fn monotone_slack(&self, value: T) -> T {
        T::lit(10.0) * (self.ode.rtol * value.abs().max(T::one()) + self.ode.atol)
    }
}

/// `θ(X∞)` of the forward trajectory from `(x₀, θ₀)`.
pub fn nu<T: Real>(family: &CoefficientFamily<T>, lambda: T, window: &TruncationWindow<T>, opts: &OdeOptions<T>) -> Result<T> {
    family.check_in_gap(lambda)?;
    let zero = zero_data(family)?;
    nu_from(family, lambda, window, zero.theta0, opts)
}

/// `θ(X∞)` from an explicit starting angle.
pub fn nu_from<T: Real>(
    family: &CoefficientFamily<T>,
    lambda: T,
    window: &TruncationWindow<T>,
    theta_init: T,
    opts: &OdeOptions<T>,
) -> Result<T> {
    let t = integrate_prufer_between(family, lambda, window.x0, window.x_inf, theta_init, T::zero(), opts, false)?;
    Ok(t.end.theta)
}

pub fn nu_star<T: Real>(family: &CoefficientFamily<T>, lambda: T, window: &TruncationWindow<T>, opts: &OdeOptions<T>) -> Result<T> {
    Ok(nu(family, lambda, window, opts)? + gap_arctan(family.mu_minus, family.mu_plus, lambda))
}

/// Interval on which `ν*` crosses `kπ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket<T> {
    pub k: i64,
    pub lo: T,
    pub hi: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScan<T> {
    /// `(λ, ν*(λ))` on the grid.
    pub values: Vec<(T, T)>,
    pub brackets: Vec<Bracket<T>>,
    /// Largest decrease between consecutive grid points (0 when monotone).
    pub max_drop: T,
    /// Decreases beyond the slack.
    pub violations: usize,
}

impl<T: Real> SpectrumScan<T> {
    pub fn is_monotone(&self) -> bool {
        self.violations == 0
    }
}

/// `ν*` on a grid with every level crossing bracketed. Fails when `ν*` drops
/// by more than the slack.
pub fn scan_spectrum<T: Real>(
    family: &CoefficientFamily<T>,
    grid: &[T],
    window: &TruncationWindow<T>,
    opts: &SolveOptions<T>,
) -> Result<SpectrumScan<T>> {
    let scan = scan_nu_star(family, grid, window, opts)?;
    if scan.violations > 0 {
        let (i, _) = scan
            .values
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[0].1 - w[1].1))
            .fold((0, T::neg_infinity()), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
        return Err(Error::Monotonicity {
            lo: scan.values[i].0.as_f64(),
            hi: scan.values[i + 1].0.as_f64(),
            drop: scan.max_drop.as_f64(),
        });
    }
    Ok(scan)
}

/// Like [`scan_spectrum`] but reports violations instead of failing.
pub fn scan_nu_star<T: Real>(
    family: &CoefficientFamily<T>,
    grid: &[T],
    window: &TruncationWindow<T>,
    opts: &SolveOptions<T>,
) -> Result<SpectrumScan<T>> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut values = Vec::with_capacity(sorted.len());
    for &lam in &sorted {
        values.push((lam, nu_star(family, lam, window, &opts.ode)?));
    }
    let mut brackets = Vec::new();
    let mut max_drop = T::zero();
    let mut violations = 0;
    for w in values.windows(2) {
        let ((l0, v0), (l1, v1)) = (w[0], w[1]);
        let drop = v0 - v1;
        if drop > max_drop {
            max_drop = drop;
        }
        if drop > opts.monotone_slack(v0) {
            violations += 1;
        }
        let first = (v0 / T::PI()).floor().to_i64().unwrap_or(0) + 1;
        let last = (v1 / T::PI()).ceil().to_i64().unwrap_or(0) - 1;
        for k in first..=last {
            brackets.push(Bracket { k, lo: l0, hi: l1 });
        }
    }
    Ok(SpectrumScan { values, brackets, max_drop, violations })
}

/// `{λ_k, z_k}` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueRecord<T> {
    /// Level with `ν*(λ_k) = kπ`.
    pub k: i64,
    pub lambda: T,
    /// `(θ(X∞) − θ₀)/π` along the spliced trajectory.
    pub rot: T,
    pub nodal_index: i64,
    /// Rotation within `1e−9` of a breakpoint or degenerate `θ₀`.
    pub nodal_flagged: bool,
    /// `|m_k(λ_k)|`.
    pub residual: T,
    pub bracket_width: T,
    pub iterations: usize,
    pub window: TruncationWindow<T>,
    pub theta0: T,
    pub theta_inf: T,
    pub quadrant: Quadrant,
    pub decay_fit: Option<DecayFit<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    /// Slope of `ln ρ` against `x` over the last decade.
    pub exponent_at_inf: T,
    pub expected_at_inf: T,
    /// Slope of `ln ρ` against `ln x` (`β = 1`) or `x^{1−β}` (`β > 1`)
    /// over the first decade.
    pub exponent_at_zero: T,
    pub expected_at_zero: T,
}

impl<T: Real> DecayFit<T> {
    pub fn relative_error_at_inf(&self) -> T {
        ((self.exponent_at_inf - self.expected_at_inf) / self.expected_at_inf).abs()
    }

    pub fn relative_error_at_zero(&self) -> T {
        ((self.exponent_at_zero - self.expected_at_zero) / self.expected_at_zero).abs()
    }
}

/// Both legs of the matching construction at one `λ`.
struct Legs<T> {
    fwd: PruferTrajectory<T>,
    bwd: PruferTrajectory<T>,
}

impl<T: Real> Legs<T> {
    fn mismatch(&self) -> T {
        self.fwd.end.theta - self.bwd.end.theta
    }
}

#[allow(clippy::too_many_arguments)]
fn legs<T: Real>(
    family: &CoefficientFamily<T>,
    zero: &ZeroData<T>,
    k: i64,
    lambda: T,
    window: &TruncationWindow<T>,
    opts: &OdeOptions<T>,
    dense: bool,
) -> Result<Legs<T>> {
    let inf = infinity_data(family.mu_minus, family.mu_plus, lambda)?;
    let x_mid = window.x_mid();
    let start_logrho = head_log_amplitude(zero, window.x0);
    let fwd = integrate_prufer_between(family, lambda, window.x0, x_mid, zero.theta0, start_logrho, opts, dense)?;
    let theta_end = inf.theta_inf + T::lit((k - 1) as f64) * T::PI();
    let bwd = integrate_prufer_between(family, lambda, window.x_inf, x_mid, theta_end, T::zero(), opts, dense)?;
    Ok(Legs { fwd, bwd })
}

/// `ln ρ(x₀)` for the regular solution normalised as `x^{√Δ*}` (β = 1) or
/// `exp(−√Δ* x^{1−β}/(β−1))` (β > 1).
pub(crate) fn head_log_amplitude<T: Real>(zero: &ZeroData<T>, x0: T) -> T {
    let s = zero.sqrt_delta_star();
    if zero.beta == T::one() {
        s * x0.ln()
    } else {
        -s / (zero.beta - T::one()) * x0.powf(T::one() - zero.beta)
    }
}

/// `m_k(λ)`.
pub fn matching_function<T: Real>(
    family: &CoefficientFamily<T>,
    k: i64,
    lambda: T,
    window: &TruncationWindow<T>,
    opts: &OdeOptions<T>,
) -> Result<T> {
    family.check_in_gap(lambda)?;
    let zero = zero_data(family)?;
    Ok(legs(family, &zero, k, lambda, window, opts, false)?.mismatch())
}

/// Root of `m_k` inside `bracket` by Illinois regula falsi, plus the
/// eigenfunction decay report.
pub fn find_eigenvalue<T: Real>(
    family: &CoefficientFamily<T>,
    k: i64,
    bracket: (T, T),
    window: &TruncationWindow<T>,
    opts: &SolveOptions<T>,
) -> Result<EigenvalueRecord<T>> {
    let mut rec = solve_level(family, k, bracket, window, opts)?;
    let ef = eigenfunction(family, &rec, 2, opts)?;
    rec.decay_fit = Some(ef.decay);
    Ok(rec)
}

/// [`find_eigenvalue`] without the eigenfunction pass.
pub fn solve_level<T: Real>(
    family: &CoefficientFamily<T>,
    k: i64,
    bracket: (T, T),
    window: &TruncationWindow<T>,
    opts: &SolveOptions<T>,
) -> Result<EigenvalueRecord<T>> {
    let (mut a, mut b) = bracket;
    family.check_in_gap(a)?;
    family.check_in_gap(b)?;
    if !(a < b) {
        return Err(Error::InvalidParameter(format!("empty bracket [{a}, {b}]")));
    }
    let zero = zero_data(family)?;
    let mut ode = opts.ode;
    let eval = |lam: T, o: &OdeOptions<T>| -> Result<T> { Ok(legs(family, &zero, k, lam, window, o, false)?.mismatch()) };
    let mut fa = eval(a, &ode)?;
    let mut fb = eval(b, &ode)?;
    let invalid = |a: T, b: T, fa: T, fb: T| Error::BracketInvalid {
        lo: a.as_f64(),
        hi: b.as_f64(),
        g_lo: fa.as_f64(),
        g_hi: fb.as_f64(),
    };
    if !(fa <= T::zero() && fb >= T::zero()) {
        return Err(invalid(a, b, fa, fb));
    }
    let mut tightened = false;
    let mut side = 0i8;
    let (mut lam, mut f) = if -fa < fb { (a, fa) } else { (b, fb) };
    let floor_width = T::lit(4.0) * T::epsilon() * b.abs().max(T::one());
    let mut iterations = 0;
    while f.abs() >= opts.tol && b - a > floor_width {
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterations { iterations, residual: f.abs().as_f64() });
        }
        iterations += 1;
        if !tightened && b - a < opts.tighten_below {
            tightened = true;
            ode = opts.tight;
            fa = eval(a, &ode)?;
            fb = eval(b, &ode)?;
            // The root can move by more than the bracket width under the
            // tighter tolerances; widen back towards the original bracket.
            let mut grow = b - a;
            while fa > T::zero() && a > bracket.0 {
                grow = grow * T::lit(4.0);
                a = (a - grow).max(bracket.0);
                fa = eval(a, &ode)?;
            }
            grow = b - a;
            while fb < T::zero() && b < bracket.1 {
                grow = grow * T::lit(4.0);
                b = (b + grow).min(bracket.1);
                fb = eval(b, &ode)?;
            }
            if !(fa <= T::zero() && fb >= T::zero()) {
                return Err(invalid(a, b, fa, fb));
            }
            side = 0;
            (lam, f) = if -fa < fb { (a, fa) } else { (b, fb) };
            continue;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = T::lit(0.5) * (a + b);
        }
        let fc = eval(c, &ode)?;
        if fc < T::zero() {
            a = c;
            fa = fc;
            if side == -1 {
                fb = fb * T::lit(0.5);
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa = fa * T::lit(0.5);
            }
            side = 1;
        }
        lam = c;
        f = fc;
        if fc == T::zero() {
            break;
        }
    }
    let inf = infinity_data(family.mu_minus, family.mu_plus, lam)?;
    let end_angle = inf.theta_inf + T::lit((k - 1) as f64) * T::PI();
    let rot = (end_angle - zero.theta0) / T::PI();
    let (nodal_index, nodal_flagged) = index_from_rotation(rot, zero.quadrant);
    Ok(EigenvalueRecord {
        k,
        lambda: lam,
        rot,
        nodal_index,
        nodal_flagged,
        residual: f.abs(),
        bracket_width: b - a,
        iterations,
        window: *window,
        theta0: zero.theta0,
        theta_inf: inf.theta_inf,
        quadrant: zero.quadrant,
        decay_fit: None,
    })
}

/// Scan followed by refinement of every bracket.
pub fn compute_spectrum<T: Real>(
    family: &CoefficientFamily<T>,
    grid: &[T],
    window: &TruncationWindow<T>,
    opts: &SolveOptions<T>,
) -> Result<(SpectrumScan<T>, Vec<EigenvalueRecord<T>>)> {
    let scan = scan_spectrum(family, grid, window, opts)?;
    let mut records = Vec::with_capacity(scan.brackets.len());
    for br in &scan.brackets {
        records.push(find_eigenvalue(family, br.k, (br.lo, br.hi), window, opts)?);
    }
    Ok((scan, records))
}

/// 50 points from 5% to 99.95% of the gap.
pub fn default_lambda_grid<T: Real>(family: &CoefficientFamily<T>) -> Vec<T> {
    let w = family.mu_plus - family.mu_minus;
    lin_space(family.mu_minus + T::lit(0.05) * w, family.mu_plus - T::lit(5e-4) * w, 50)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSample<T> {
    pub x: T,
    pub u: T,
    pub v: T,
    pub theta: T,
    /// `ln ρ` after normalisation.
    pub logrho: T,
}

#[derive(Debug, Clone)]
pub struct Eigenfunction<T> {
    pub lambda: T,
    pub samples: Vec<EigenSample<T>>,
    /// `|θ_fwd(x_mid) − θ_bwd(x_mid) − nπ|`.
    pub angle_mismatch: T,
    /// `n` above.
    pub branch_shift: i64,
    /// `ln ‖z‖²` before normalisation.
    pub log_norm_sq: T,
    /// `∫‖z‖²` of the normalised function by composite Simpson in `ln x`.
    pub norm_check: T,
    pub decay: DecayFit<T>,
    spliced: Spliced<T>,
}

impl<T: Real> Eigenfunction<T> {
    /// Normalised state anywhere in the window.
    pub fn at(&self, x: T) -> Option<PruferState<T>> {
        self.spliced.at(x).map(|s| PruferState { logrho: s.logrho - T::lit(0.5) * self.log_norm_sq, ..s })
    }

    pub fn trajectories(&self) -> (&PruferTrajectory<T>, &PruferTrajectory<T>) {
        (&self.spliced.fwd, &self.spliced.bwd)
    }
}

#[derive(Debug, Clone)]
struct Spliced<T> {
    fwd: PruferTrajectory<T>,
    bwd: PruferTrajectory<T>,
    x_mid: T,
    theta_shift: T,
    logrho_shift: T,
}

impl<T: Real> Spliced<T> {
    fn at(&self, x: T) -> Option<PruferState<T>> {
        if x <= self.x_mid {
            self.fwd.at(x)
        } else {
            self.bwd
                .at(x)
                .map(|s| PruferState { x, theta: s.theta + self.theta_shift, logrho: s.logrho + self.logrho_shift })
        }
    }
}

const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

pub(crate) fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let m = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|&t| (t - m).exp()).fold(T::zero(), |a, b| a + b).ln()
}

/// `ln ∫ ρ² dx` over a trajectory, eight-point Gauss–Legendre per step in
/// the chart variable.
pub(crate) fn log_integral<T: Real>(traj: &PruferTrajectory<T>, shift: T, out: &mut Vec<T>) {
    for p in traj.pieces() {
        let half = p.step.h.abs() * T::lit(0.5);
        let mid = p.step.t0 + p.step.h * T::lit(0.5);
        for (i, &node) in GL_NODES.iter().enumerate() {
            for sgn in [-1.0, 1.0] {
                let xi = mid + T::lit(sgn * node) * p.step.h * T::lit(0.5);
                let x = p.chart.to_x(xi);
                let y = p.step.eval(xi);
                let jac = p.chart.jacobian(x).abs();
                out.push(T::lit(2.0) * (y[1] + shift) + (jac * half * T::lit(GL_WEIGHTS[i])).ln());
            }
        }
    }
}

/// `ln ∫₀^{x₀} ρ² dx` for the regular head.
pub(crate) fn log_head<T: Real>(zero: &ZeroData<T>, x0: T, logrho0: T) -> T {
    let s = zero.sqrt_delta_star();
    let two = T::lit(2.0);
    if zero.beta == T::one() {
        return two * logrho0 + x0.ln() - (two * s + T::one()).ln();
    }
    // u = 2c (x^{1−β} − x₀^{1−β}): ∫₀^∞ e^{−u} x^β / (2c(β−1)) du.
    let bm1 = zero.beta - T::one();
    let c = s / bm1;
    let t0 = x0.powf(-bm1);
    let n = 4000;
    let u_max = T::lit(60.0);
    let du = u_max / T::from_count(n);
    let mut acc = T::zero();
    for i in 0..=n {
        let u = du * T::from_count(i);
        let x = (t0 + u / (two * c)).powf(-T::one() / bm1);
        let w = if i == 0 || i == n { T::lit(0.5) } else { T::one() };
        acc = acc + w * (-u).exp() * x.powf(zero.beta);
    }
    two * logrho0 + (acc * du / (two * c * bm1)).ln()
}

/// Spliced, `L²`-normalised eigenfunction with decay fits.
pub fn eigenfunction<T: Real>(
    family: &CoefficientFamily<T>,
    record: &EigenvalueRecord<T>,
    n_samples: usize,
    opts: &SolveOptions<T>,
) -> Result<Eigenfunction<T>> {
    let zero = zero_data(family)?;
    let window = record.window;
    let lg = legs(family, &zero, record.k, record.lambda, &window, &opts.tight, true)?;
    let x_mid = window.x_mid();
    let n = (lg.mismatch() / T::PI()).round();
    let angle_mismatch = (lg.mismatch() - n * T::PI()).abs();
    let angle_tol = T::lit(1e-6).max(opts.tol * T::lit(100.0));
    if !(angle_mismatch < angle_tol) {
        return Err(Error::AngleMismatch { mismatch: angle_mismatch.as_f64() });
    }
    let theta_shift = n * T::PI();
    let logrho_shift = lg.fwd.end.logrho - lg.bwd.end.logrho;

    let inf = infinity_data(family.mu_minus, family.mu_plus, record.lambda)?;
    let mut terms = Vec::new();
    log_integral(&lg.fwd, T::zero(), &mut terms);
    log_integral(&lg.bwd, logrho_shift, &mut terms);
    let head = log_head(&zero, window.x0, lg.fwd.start.logrho);
    let tail_logrho = lg.bwd.start.logrho + logrho_shift;
    let tail = T::lit(2.0) * tail_logrho - (T::lit(2.0) * inf.sqrt_delta()).ln();
    terms.push(head);
    terms.push(tail);
    let log_norm_sq = log_sum_exp(&terms);

    let spliced = Spliced { fwd: lg.fwd, bwd: lg.bwd, x_mid, theta_shift, logrho_shift };
    let half = T::lit(0.5) * log_norm_sq;

    // Independent check: Simpson in ln x on the spliced, normalised ρ².
    let m = 20_001;
    let xs = log_space(window.x0, window.x_inf, m);
    let hl = (window.x_inf / window.x0).ln() / T::from_count(m - 1);
    let mut simpson = T::zero();
    for (i, &x) in xs.iter().enumerate() {
        let s = spliced.at(x).ok_or(Error::VanishingSolution { x: x.as_f64() })?;
        let f = (T::lit(2.0) * (s.logrho - half)).exp() * x;
        let w = if i == 0 || i == m - 1 {
            T::one()
        } else if i % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        simpson = simpson + w * f;
    }
    let norm_check = simpson * hl / T::lit(3.0) + (head - log_norm_sq).exp() + (tail - log_norm_sq).exp();

    let decay = decay_fit(&spliced, &zero, &window, inf.sqrt_delta())?;

    let mut samples = Vec::with_capacity(n_samples);
    for x in log_space(window.x0, window.x_inf, n_samples) {
        let s = spliced.at(x).ok_or(Error::VanishingSolution { x: x.as_f64() })?;
        let logrho = s.logrho - half;
        let r = logrho.exp();
        let (sn, cs) = s.theta.sin_cos();
        samples.push(EigenSample { x, u: r * cs, v: r * sn, theta: s.theta, logrho });
    }
    Ok(Eigenfunction {
        lambda: record.lambda,
        samples,
        angle_mismatch,
        branch_shift: n.to_i64().unwrap_or(0),
        log_norm_sq,
        norm_check,
        decay,
        spliced,
    })
}

fn decay_fit<T: Real>(spliced: &Spliced<T>, zero: &ZeroData<T>, window: &TruncationWindow<T>, sqrt_delta: T) -> Result<DecayFit<T>> {
    let pts = 200;
    let ten = T::lit(10.0);
    let tail_lo = (window.x_inf / ten).max(window.x_mid());
    let mut xs = Vec::with_capacity(pts);
    let mut ys = Vec::with_capacity(pts);
    for x in log_space(tail_lo, window.x_inf, pts) {
        xs.push(x);
        ys.push(spliced.at(x).ok_or(Error::VanishingSolution { x: x.as_f64() })?.logrho);
    }
    let at_inf = ls_slope(&xs, &ys).unwrap_or(T::nan());
    let head_hi = (window.x0 * ten).min(window.x_mid());
    xs.clear();
    ys.clear();
    for x in log_space(window.x0, head_hi, pts) {
        let abscissa = if zero.beta == T::one() { x.ln() } else { x.powf(T::one() - zero.beta) };
        xs.push(abscissa);
        ys.push(spliced.at(x).ok_or(Error::VanishingSolution { x: x.as_f64() })?.logrho);
    }
    let at_zero = ls_slope(&xs, &ys).unwrap_or(T::nan());
    let expected_zero = if zero.beta == T::one() {
        zero.sqrt_delta_star()
    } else {
        -zero.sqrt_delta_star() / (zero.beta - T::one())
    };
    Ok(DecayFit { exponent_at_inf: at_inf, expected_at_inf: -sqrt_delta, exponent_at_zero: at_zero, expected_at_zero: expected_zero })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

impl Endpoint {
    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::Lower => "lower",
            Endpoint::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accumulating,
    Finite,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accumulating => "accumulating",
            Verdict::Finite => "finite",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccumulationVerdict<T> {
    pub endpoint: Endpoint,
    pub verdict: Verdict,
    /// `(X, θ(X))` at the gap edge.
    pub theta_growth: Vec<(T, T)>,
    /// `p₁₁ < μ⁻` at every checked `x ≥ X₁` (mirrored for the lower edge).
    pub monotonicity_check: bool,
    pub epsilon: T,
}

pub fn default_schedule<T: Real>() -> Vec<T> {
    vec![T::lit(1e2), T::lit(1e3), T::lit(1e4), T::lit(1e5)]
}

/// Angle growth at the gap edge itself. The lower edge is handled through
/// `(u, v) ↦ (v, u)`, `λ ↦ −λ`, which swaps the roles of `p₁₁` and `p₂₂`.
pub fn detect_accumulation<T: Real>(
    family: &CoefficientFamily<T>,
    endpoint: Endpoint,
    schedule: &[T],
    x0: T,
    epsilon: T,
    opts: &OdeOptions<T>,
) -> Result<AccumulationVerdict<T>> {
    let fam = match endpoint {
        Endpoint::Upper => family.clone(),
        Endpoint::Lower => family.mirrored(),
    };
    let mut sched = schedule.to_vec();
    sched.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if sched.len() < 2 || !(sched[0] > x0) {
        return Err(Error::InvalidParameter("schedule needs two points beyond x0".into()));
    }
    let zero = zero_data(&fam)?;
    let lambda = fam.mu_plus;
    let mut growth = Vec::with_capacity(sched.len());
    let (mut x, mut theta) = (x0, zero.theta0);
    for &target in &sched {
        let t = integrate_prufer_between(&fam, lambda, x, target, theta, T::zero(), opts, false)?;
        x = target;
        theta = t.end.theta;
        growth.push((x, theta));
    }
    let first = sched[0];
    let last = sched[sched.len() - 1];
    let decades = (last / first).log10().ceil().to_usize().unwrap_or(1).max(1);
    let monotone = log_space(first, last, 64 * decades + 1)
        .into_iter()
        .all(|x| fam.eval(x).p11 < fam.mu_minus);
    let two_pi = T::lit(2.0) * T::PI();
    let grows = growth.windows(2).all(|w| w[1].1 - w[0].1 >= two_pi);
    let n = growth.len();
    let settled = (growth[n - 1].1 - growth[n - 2].1).abs() < epsilon;
    let verdict = if grows && monotone {
        Verdict::Accumulating
    } else if settled {
        Verdict::Finite
    } else {
        Verdict::Inconclusive
    };
    Ok(AccumulationVerdict { endpoint, verdict, theta_growth: growth, monotonicity_check: monotone, epsilon })
}
