//! Dormand–Prince 8(5,3) with 7th-order dense output.
//!
//! The state is a fixed-size array so the integrator allocates nothing per
//! step. Each accepted step is handed to an observer as a [`DenseStep`];
//! the observer may keep it, replace the state, or stop the integration.

// Tableau coefficients are kept digit for digit as published.
#![allow(clippy::excessive_precision)]

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("maximum step count {max_steps} reached at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Zero selects the automatic initial step.
    pub h_init: T,
    pub h_max: T,
    pub max_steps: usize,
    /// When false, steps carry a cubic Hermite interpolant instead of the
    /// 7th-order one and three right-hand-side calls per step are saved.
    pub dense: bool,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-10),
            atol: T::lit(1e-12),
            h_init: T::zero(),
            h_max: T::infinity(),
            max_steps: 500_000,
            dense: true,
        }
    }
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tolerances(rtol: T, atol: T) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

/// Interpolant over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<T, const N: usize> {
    pub t0: T,
    pub h: T,
    cont: [[T; N]; 8],
}

impl<T: Real, const N: usize> DenseStep<T, N> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    pub fn y0(&self) -> [T; N] {
        self.cont[0]
    }

    pub fn y1(&self) -> [T; N] {
        let mut y = [T::zero(); N];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.cont[0][i] + self.cont[1][i];
        }
        y
    }

    pub fn eval(&self, t: T) -> [T; N] {
        let s = (t - self.t0) / self.h;
        let s1 = T::one() - s;
        let c = &self.cont;
        let mut y = [T::zero(); N];
        for (i, yi) in y.iter_mut().enumerate() {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            *yi = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
        y
    }

    /// Whether `t` lies in the closed step interval.
    pub fn contains(&self, t: T) -> bool {
        let (a, b) = if self.h >= T::zero() { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= a && t <= b
    }

    /// Multiply every interpolation coefficient by `factor` (linear systems only).
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = *self;
        for row in out.cont.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * factor;
            }
        }
        out
    }
}

pub enum Control<T, const N: usize> {
    Continue,
    /// Restart from this state at the current time.
    Replace([T; N]),
    Stop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeEnd<T, const N: usize> {
    pub t: T,
    pub y: [T; N],
    pub stats: OdeStats,
    pub stopped: bool,
}

fn combo<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for &(c, k) in terms {
        let ch = T::lit(c) * h;
        for i in 0..N {
            out[i] = out[i] + ch * k[i];
        }
    }
    out
}

fn weighted<T: Real, const N: usize>(terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = [T::zero(); N];
    for &(c, k) in terms {
        let c = T::lit(c);
        for i in 0..N {
            out[i] = out[i] + c * k[i];
        }
    }
    out
}

fn all_finite<T: Real, const N: usize>(y: &[T; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn initial_step<T: Real, const N: usize, F>(f: &mut F, t: T, y: &[T; N], f0: &[T; N], dir: T, opts: &OdeOptions<T>) -> T
where
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let mut dnf = T::zero();
    let mut dny = T::zero();
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y[i].abs();
        dnf = dnf + (f0[i] / sk).powi(2);
        dny = dny + (y[i] / sk).powi(2);
    }
    let tiny = T::lit(1e-10);
    let mut h = if dnf <= tiny || dny <= tiny { T::lit(1e-6) } else { (dny / dnf).sqrt() * T::lit(0.01) };
    h = h.min(opts.h_max) * dir;
    let y1 = combo(y, h, &[(1.0, f0)]);
    let f1 = f(t + h, &y1);
    let mut der2 = T::zero();
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y[i].abs();
        der2 = der2 + ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h.abs();
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= T::lit(1e-15) {
        (h.abs() * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / der12).powf(T::lit(1.0 / 8.0))
    };
    (T::lit(100.0) * h.abs()).min(h1).min(opts.h_max) * dir
}

/// Integrate `y' = f(t, y)` from `t0` to `t1`.
pub fn integrate<T, const N: usize, F, O>(
    mut f: F,
    t0: T,
    y0: [T; N],
    t1: T,
    opts: &OdeOptions<T>,
    mut observer: O,
) -> Result<OdeEnd<T, N>, OdeError>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
    O: FnMut(&DenseStep<T, N>) -> Control<T, N>,
{
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0;
    if t1 == t0 {
        return Ok(OdeEnd { t, y, stats, stopped: false });
    }
    if !all_finite(&y) {
        return Err(OdeError::NonFinite { t: t.as_f64() });
    }
    let dir = if t1 > t0 { T::one() } else { -T::one() };
    let mut k1 = f(t, &y);
    stats.evals += 1;
    let mut h = if opts.h_init > T::zero() {
        opts.h_init.min(opts.h_max) * dir
    } else {
        stats.evals += 1;
        initial_step(&mut f, t, &y, &k1, dir, opts)
    };
    let mut last_rejected = false;
    let expo = T::lit(1.0 / 8.0);
    let safe = T::lit(0.9);
    let facc1 = T::lit(1.0 / 0.333);
    let facc2 = T::lit(1.0 / 6.0);
    let eps = T::epsilon();

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::MaxSteps { t: t.as_f64(), max_steps: opts.max_steps });
        }
        let mut last = false;
        if (t + T::lit(1.01) * h - t1) * dir >= T::zero() {
            h = t1 - t;
            last = true;
        }
        if h.abs() <= T::lit(10.0) * eps * t.abs().max(T::min_positive_value().sqrt()) {
            return Err(OdeError::StepUnderflow { t: t.as_f64() });
        }

        let k2 = f(t + T::lit(C2) * h, &combo(&y, h, &[(A21, &k1)]));
        let k3 = f(t + T::lit(C3) * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + T::lit(C4) * h, &combo(&y, h, &[(A41, &k1), (A43, &k3)]));
        let k5 = f(t + T::lit(C5) * h, &combo(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + T::lit(C6) * h, &combo(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]));
        let k7 = f(t + T::lit(C7) * h, &combo(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]));
        let k8 = f(
            t + T::lit(C8) * h,
            &combo(&y, h, &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
        );
        let k9 = f(
            t + T::lit(C9) * h,
            &combo(&y, h, &[(A91, &k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]),
        );
        let k10 = f(
            t + T::lit(C10) * h,
            &combo(
                &y,
                h,
                &[(A101, &k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
            ),
        );
        let k11 = f(
            t + T::lit(C11) * h,
            &combo(
                &y,
                h,
                &[
                    (A111, &k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
        );
        let t_new = t + h;
        let yy1 = combo(
            &y,
            h,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        );
        let k12 = f(t_new, &yy1);
        stats.evals += 11;
        let kb = weighted(&[
            (B1, &k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ]);
        let y_new = combo(&y, h, &[(1.0, &kb)]);

        let mut err = T::zero();
        let mut err2 = T::zero();
        for i in 0..N {
            let sk = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let e2 = kb[i] - T::lit(BHH1) * k1[i] - T::lit(BHH2) * k9[i] - T::lit(BHH3) * k12[i];
            err2 = err2 + (e2 / sk).powi(2);
            let e = T::lit(ER1) * k1[i]
                + T::lit(ER6) * k6[i]
                + T::lit(ER7) * k7[i]
                + T::lit(ER8) * k8[i]
                + T::lit(ER9) * k9[i]
                + T::lit(ER10) * k10[i]
                + T::lit(ER11) * k11[i]
                + T::lit(ER12) * k12[i];
            err = err + (e / sk).powi(2);
        }
        let mut deno = err + T::lit(0.01) * err2;
        if deno <= T::zero() {
            deno = T::one();
        }
        err = h.abs() * err * (T::one() / (deno * T::from_count(N))).sqrt();

        if !err.is_finite() || !all_finite(&y_new) {
            stats.rejected += 1;
            h = h * T::lit(0.2);
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(expo);
        let fac = facc2.max(facc1.min(fac11 / safe));
        let mut h_new = h / fac;

        if err <= T::one() {
            let k13 = f(t_new, &y_new);
            stats.evals += 1;
            stats.accepted += 1;

            let mut cont = [[T::zero(); N]; 8];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k13[i] - bspl;
            }
            if opts.dense {
                let k14 = f(
                    t + T::lit(C14) * h,
                    &combo(
                        &y,
                        h,
                        &[
                            (A141, &k1),
                            (A147, &k7),
                            (A148, &k8),
                            (A149, &k9),
                            (A1410, &k10),
                            (A1411, &k11),
                            (A1412, &k12),
                            (A1413, &k13),
                        ],
                    ),
                );
                let k15 = f(
                    t + T::lit(C15) * h,
                    &combo(
                        &y,
                        h,
                        &[
                            (A151, &k1),
                            (A156, &k6),
                            (A157, &k7),
                            (A158, &k8),
                            (A1511, &k11),
                            (A1512, &k12),
                            (A1513, &k13),
                            (A1514, &k14),
                        ],
                    ),
                );
                let k16 = f(
                    t + T::lit(C16) * h,
                    &combo(
                        &y,
                        h,
                        &[
                            (A161, &k1),
                            (A166, &k6),
                            (A167, &k7),
                            (A168, &k8),
                            (A169, &k9),
                            (A1613, &k13),
                            (A1614, &k14),
                            (A1615, &k15),
                        ],
                    ),
                );
                stats.evals += 3;
                let ks = [&k1, &k6, &k7, &k8, &k9, &k10, &k11, &k12, &k13, &k14, &k15, &k16];
                for (row, d) in [D4, D5, D6, D7].iter().enumerate() {
                    let terms: Vec<(f64, &[T; N])> = d.iter().copied().zip(ks.iter().copied()).collect();
                    let w = weighted(&terms);
                    for i in 0..N {
                        cont[4 + row][i] = h * w[i];
                    }
                }
            }
            let step = DenseStep { t0: t, h, cont };

            t = t_new;
            y = y_new;
            k1 = k13;
            if last_rejected {
                h_new = if dir > T::zero() { h_new.min(h) } else { h_new.max(h) };
            }
            last_rejected = false;

            match observer(&step) {
                Control::Continue => {}
                Control::Stop => return Ok(OdeEnd { t, y, stats, stopped: true }),
                Control::Replace(y_rep) => {
                    y = y_rep;
                    k1 = f(t, &y);
                    stats.evals += 1;
                }
            }
            if last {
                return Ok(OdeEnd { t, y, stats, stopped: false });
            }
            if h_new.abs() > opts.h_max {
                h_new = opts.h_max * dir;
            }
            h = h_new;
        } else {
            h_new = h / facc1.min(fac11 / safe);
            stats.rejected += 1;
            last_rejected = true;
            h = h_new;
        }
    }
}

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

// Dense-output weights, ordered as k1, k6..k12, k13 (derivative at the new
// point), k14, k15, k16.
const D4: [f64; 12] = [
    -0.84289382761090128651353491142E+01,
    0.56671495351937776962531783590E+00,
    -0.30689499459498916912797304727E+01,
    0.23846676565120698287728149680E+01,
    0.21170345824450282767155149946E+01,
    -0.87139158377797299206789907490E+00,
    0.22404374302607882758541771650E+01,
    0.63157877876946881815570249290E+00,
    -0.88990336451333310820698117400E-01,
    0.18148505520854727256656404962E+02,
    -0.91946323924783554000451984436E+01,
    -0.44360363875948939664310572000E+01,
];
const D5: [f64; 12] = [
    0.10427508642579134603413151009E+02,
    0.24228349177525818288430175319E+03,
    0.16520045171727028198505394887E+03,
    -0.37454675472269020279518312152E+03,
    -0.22113666853125306036270938578E+02,
    0.77334326684722638389603898808E+01,
    -0.30674084731089398182061213626E+02,
    -0.93321305264302278729567221706E+01,
    0.15697238121770843886131091075E+02,
    -0.31139403219565177677282850411E+02,
    -0.93529243588444783865713862664E+01,
    0.35816841486394083752465898540E+02,
];
const D6: [f64; 12] = [
    0.19985053242002433820987653617E+02,
    -0.38703730874935176555105901742E+03,
    -0.18917813819516756882830838328E+03,
    0.52780815920542364900561016686E+03,
    -0.11573902539959630126141871134E+02,
    0.68812326946963000169666922661E+01,
    -0.10006050966910838403183860980E+01,
    0.77771377980534432092869265740E+00,
    -0.27782057523535084065932004339E+01,
    -0.60196695231264120758267380846E+02,
    0.84320405506677161018159903784E+02,
    0.11992291136182789328035130030E+02,
];
const D7: [f64; 12] = [
    -0.25693933462703749003312586129E+02,
    -0.15418974869023643374053993627E+03,
    -0.23152937917604549567536039109E+03,
    0.35763911791061412378285349910E+03,
    0.93405324183624310003907691704E+02,
    -0.37458323136451633156875139351E+02,
    0.10409964950896230045147246184E+03,
    0.29840293426660503123344363579E+02,
    -0.43533456590011143754432175058E+02,
    0.96324553959188282948394950600E+02,
    -0.39177261675615439165231486172E+02,
    -0.14972683625798562581422125276E+03,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let opts = OdeOptions::<f64>::default();
        let end = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &opts, |_| Control::Continue).unwrap();
        assert_eq!(end.t, 5.0);
        assert!((end.y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let opts = OdeOptions::<f64>::default();
        let end = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 10.0, [10f64.sin(), 10f64.cos()], 0.0, &opts, |_| {
            Control::Continue
        })
        .unwrap();
        assert!(end.y[0].abs() < 1e-9 && (end.y[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dense_output_is_seventh_order_accurate() {
        let opts = OdeOptions::<f64>::with_tolerances(1e-11, 1e-13);
        let mut worst = 0.0f64;
        integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 20.0, &opts, |s| {
            for j in 1..8 {
                let t = s.t0 + s.h * (j as f64) / 8.0;
                let y = s.eval(t);
                worst = worst.max((y[0] - t.sin()).abs()).max((y[1] - t.cos()).abs());
            }
            Control::Continue
        })
        .unwrap();
        assert!(worst < 1e-9, "dense error {worst}");
    }

    #[test]
    fn stop_and_replace() {
        let opts = OdeOptions::<f64>::default();
        let end = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 100.0, &opts, |s| {
            if s.t1() > 1.0 { Control::Stop } else { Control::Continue }
        })
        .unwrap();
        assert!(end.stopped && end.t > 1.0 && end.t < 100.0);

        let end = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 50.0, &opts, |s| {
            let y = s.y1();
            if y[0] > 1e3 { Control::Replace([y[0] * 1e-3]) } else { Control::Continue }
        })
        .unwrap();
        assert!(end.y[0] < 1e3);
    }

    #[test]
    fn max_steps_reported() {
        let opts = OdeOptions::<f64> { max_steps: 3, ..Default::default() };
        let r = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 1000.0, &opts, |_| Control::Continue);
        assert!(matches!(r, Err(OdeError::MaxSteps { .. })));
    }

    #[test]
    fn f32_works() {
        let opts = OdeOptions::<f32>::with_tolerances(1e-5, 1e-6);
        let end = integrate(|_, y: &[f32; 1]| [-y[0]], 0.0, [1.0], 2.0, &opts, |_| Control::Continue).unwrap();
        assert!((end.y[0] - (-2.0f32).exp()).abs() < 1e-4);
    }
}
