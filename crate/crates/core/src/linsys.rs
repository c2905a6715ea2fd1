//! Real-coefficient polynomials, rational transfer functions, frequency responses,
//! stability margins, and fixed-step time responses.
//!
//! Conventions used throughout the crate:
//! - polynomial coefficients are stored ascending: `coeffs[k]` multiplies `s^k`
//! - transfer functions are normalized so the denominator's leading coefficient is 1
//! - frequencies are rad/s, magnitudes in dB are `20 log10 |G|`, phases in degrees

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write;

/// Dense univariate polynomial with real coefficients, ascending powers.
///
/// Invariant: the highest-order stored coefficient is nonzero, except for the zero
/// polynomial which is stored as the single coefficient `[0.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing zeros.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// Monomial `c * s^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Polynomial::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            coeffs[k] += c;
        }
        Polynomial::new(coeffs)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// All complex roots with multiplicity, via simultaneous (Durand-Kerner)
    /// iteration followed by a Newton polish and exact conjugate pairing.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if !self.coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFiniteCoefficients);
        }
        if self.is_zero() {
            return Err(Error::DegenerateSystem(
                "roots of the zero polynomial".into(),
            ));
        }
        let deg = self.degree();
        if deg == 0 {
            return Ok(vec![]);
        }
        // Roots at the origin are deflated exactly.
        let nz = self.coeffs.iter().position(|c| *c != 0.0).unwrap();
        let mut roots = vec![Complex64::new(0.0, 0.0); nz];
        let work = &self.coeffs[nz..];
        let n = work.len() - 1;
        if n == 0 {
            return Ok(roots);
        }
        let lead = *work.last().unwrap();
        let monic: Vec<f64> = work.iter().map(|c| c / lead).collect();

        let eval = |z: Complex64| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for &c in monic.iter().rev() {
                acc = acc * z + c;
            }
            acc
        };
        let eval_deriv = |z: Complex64| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in monic.iter().enumerate().skip(1).rev() {
                acc = acc * z + c * k as f64;
            }
            acc
        };

        // Cauchy bound on root magnitudes; initial guesses spread on staggered circles
        // with an irrational angular offset so symmetric configurations do not stall.
        let bound = 1.0 + monic[..n].iter().map(|c| c.abs()).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let ang = 2.0 * PI * k as f64 / n as f64 + 0.4371;
                let r = bound * (0.55 + 0.4 * (k as f64 + 1.0) / n as f64);
                Complex64::from_polar(r, ang)
            })
            .collect();

        for _ in 0..600 {
            let mut max_step = 0.0f64;
            for i in 0..n {
                let mut denom = Complex64::new(1.0, 0.0);
                for j in 0..n {
                    if i != j {
                        let d = z[i] - z[j];
                        denom *= if d.norm_sqr() == 0.0 {
                            Complex64::new(1e-12, 1e-12)
                        } else {
                            d
                        };
                    }
                }
                let step = eval(z[i]) / denom;
                z[i] -= step;
                let rel = step.norm() / (1.0 + z[i].norm());
                if rel > max_step {
                    max_step = rel;
                }
            }
            if max_step < 1e-14 {
                break;
            }
        }

        // Newton polish sharpens each root; skipped when the derivative vanishes
        // (root clusters keep their Durand-Kerner estimate).
        for zi in z.iter_mut() {
            for _ in 0..20 {
                let d = eval_deriv(*zi);
                if d.norm() < 1e-300 {
                    break;
                }
                let step = eval(*zi) / d;
                if !step.re.is_finite() || !step.im.is_finite() {
                    break;
                }
                *zi -= step;
                if step.norm() <= 1e-16 * (1.0 + zi.norm()) {
                    break;
                }
            }
        }

        // Real coefficients force conjugate symmetry; enforce it exactly so callers
        // can rely on bitwise-paired roots and clean real roots.
        let mut out: Vec<Complex64> = Vec::with_capacity(n);
        let mut used = vec![false; n];
        let tol = |w: Complex64| 1e-7 * (1.0 + w.norm());
        for i in 0..n {
            if used[i] {
                continue;
            }
            used[i] = true;
            if z[i].im.abs() <= tol(z[i]) {
                out.push(Complex64::new(z[i].re, 0.0));
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in (i + 1)..n {
                if used[j] || z[j].im.abs() <= tol(z[j]) {
                    continue;
                }
                if z[i].im.signum() == z[j].im.signum() {
                    continue;
                }
                let d = (z[i] - z[j].conj()).norm();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            match best {
                Some((j, d)) if d <= 2.0 * tol(z[i]) => {
                    used[j] = true;
                    let re = 0.5 * (z[i].re + z[j].re);
                    let im = 0.5 * (z[i].im.abs() + z[j].im.abs());
                    out.push(Complex64::new(re, im));
                    out.push(Complex64::new(re, -im));
                }
                _ => out.push(z[i]),
            }
        }
        roots.extend(out);
        Ok(roots)
    }
}

/// Strictly real-rational transfer function `num(s)/den(s)`.
///
/// Invariant: the denominator is monic (leading coefficient 1); the numerator
/// carries the gain.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalTransferFunction {
    /// Builds and normalizes a transfer function. The denominator must not be
    /// identically zero.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DegenerateSystem("zero denominator".into()));
        }
        if !num.coeffs().iter().all(|c| c.is_finite())
            || !den.coeffs().iter().all(|c| c.is_finite())
        {
            return Err(Error::NonFiniteCoefficients);
        }
        let lead = den.leading();
        Ok(RationalTransferFunction {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    pub fn from_coeffs(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Self::new(Polynomial::new(num), Polynomial::new(den))
    }

    /// Constant gain as a transfer function.
    pub fn gain(k: f64) -> Self {
        RationalTransferFunction {
            num: Polynomial::constant(k),
            den: Polynomial::constant(1.0),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_proper(&self) -> bool {
        self.num.degree() <= self.den.degree() || self.num.is_zero()
    }

    /// Denominator roots (system poles) with multiplicity.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    /// Numerator roots (system zeros) with multiplicity.
    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() {
            return Ok(vec![]);
        }
        self.num.roots()
    }

    /// Evaluates the transfer function at an arbitrary complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }

    /// `G(j omega)`. Errors if the evaluation lands on an imaginary-axis pole.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let d = self.den.eval(s);
        if d.norm() == 0.0 {
            return Err(Error::PoleOnImaginaryAxis { omega });
        }
        let g = self.num.eval(s) / d;
        if !g.re.is_finite() || !g.im.is_finite() {
            return Err(Error::PoleOnImaginaryAxis { omega });
        }
        Ok(g)
    }

    /// Series interconnection `self * other`.
    pub fn series(&self, other: &RationalTransferFunction) -> Result<RationalTransferFunction> {
        RationalTransferFunction::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    /// Scales the numerator by a constant.
    pub fn scale(&self, k: f64) -> RationalTransferFunction {
        RationalTransferFunction {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    /// Sum `self + other` over the common denominator. No cancellation is applied.
    pub fn add(&self, other: &RationalTransferFunction) -> Result<RationalTransferFunction> {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        RationalTransferFunction::new(num, self.den.mul(&other.den))
    }

    pub fn sub(&self, other: &RationalTransferFunction) -> Result<RationalTransferFunction> {
        self.add(&other.scale(-1.0))
    }

    /// Quotient `self / other`.
    pub fn div(&self, other: &RationalTransferFunction) -> Result<RationalTransferFunction> {
        if other.num.is_zero() {
            return Err(Error::DegenerateSystem("division by zero system".into()));
        }
        RationalTransferFunction::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    /// Parallel impedance combination `self*other / (self + other)`.
    pub fn parallel(&self, other: &RationalTransferFunction) -> Result<RationalTransferFunction> {
        let prod = self.series(other)?;
        let sum = self.add(other)?;
        prod.div(&sum)
    }

    /// Cancels numerator/zero pairs against denominator roots that agree within a
    /// relative tolerance, then rebuilds real polynomials from the survivors.
    /// Intended for cleaning up results of rational algebra, not for plant data.
    pub fn reduced(&self, rel_tol: f64) -> Result<RationalTransferFunction> {
        if self.num.is_zero() {
            return Ok(self.clone());
        }
        let mut zs = self.zeros()?;
        let mut ps = self.poles()?;
        let mut cancelled = true;
        while cancelled {
            cancelled = false;
            'outer: for i in 0..zs.len() {
                for j in 0..ps.len() {
                    let scale = 1.0 + zs[i].norm().max(ps[j].norm());
                    if (zs[i] - ps[j]).norm() <= rel_tol * scale {
                        zs.remove(i);
                        ps.remove(j);
                        cancelled = true;
                        break 'outer;
                    }
                }
            }
        }
        let num = poly_from_roots(&zs).scale(self.num.leading());
        let den = poly_from_roots(&ps).scale(self.den.leading());
        RationalTransferFunction::new(num, den)
    }

    /// Unit step response on a fixed grid, trapezoidal discretization.
    pub fn step_response(&self, t_end: f64, dt: f64) -> Result<TimeSeries> {
        self.simulate_input(t_end, dt, |_| 1.0)
    }

    /// Unit ramp response (`u(t) = t`) on a fixed grid.
    pub fn ramp_response(&self, t_end: f64, dt: f64) -> Result<TimeSeries> {
        self.simulate_input(t_end, dt, |t| t)
    }

    fn simulate_input(&self, t_end: f64, dt: f64, u: impl Fn(f64) -> f64) -> Result<TimeSeries> {
        if !self.is_proper() {
            return Err(Error::ImproperSystem);
        }
        if !(dt > 0.0 && t_end > 0.0 && dt <= t_end) {
            return Err(Error::InvalidInput(format!(
                "need 0 < dt <= t_end, got dt = {dt}, t_end = {t_end}"
            )));
        }
        let (a, b, c, d) = self.to_state_space();
        let n = a.len();
        let steps = (t_end / dt).round() as usize;

        // Trapezoidal update: x+ = M x + v (u_k + u_{k+1}) with
        // M = (I - dt/2 A)^-1 (I + dt/2 A), v = (I - dt/2 A)^-1 (dt/2 B).
        let half = 0.5 * dt;
        let mut lhs = vec![vec![0.0; n]; n];
        let mut rhs = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                lhs[i][j] = -half * a[i][j];
                rhs[i][j] = half * a[i][j];
            }
            lhs[i][i] += 1.0;
            rhs[i][i] += 1.0;
        }
        let lhs_inv = invert(&lhs).ok_or_else(|| {
            Error::DegenerateSystem("singular trapezoidal update; reduce dt".into())
        })?;
        let m = mat_mul(&lhs_inv, &rhs);
        let v: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| lhs_inv[i][j] * half * b[j]).sum())
            .collect();

        let mut x = vec![0.0; n];
        let mut t_out = Vec::with_capacity(steps + 1);
        let mut y_out = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = k as f64 * dt;
            let y: f64 = (0..n).map(|i| c[i] * x[i]).sum::<f64>() + d * u(t);
            t_out.push(t);
            y_out.push(y);
            if k < steps {
                let uk = u(t);
                let uk1 = u(t + dt);
                let mut xn = vec![0.0; n];
                for i in 0..n {
                    let mut acc = v[i] * (uk + uk1);
                    for j in 0..n {
                        acc += m[i][j] * x[j];
                    }
                    xn[i] = acc;
                }
                x = xn;
            }
        }
        TimeSeries::new(t_out, y_out)
    }

    /// Controllable-canonical realization; the state dimension equals the
    /// denominator degree. Errors on improper systems.
    pub fn state_space(&self) -> Result<StateSpace> {
        if !self.is_proper() {
            return Err(Error::ImproperSystem);
        }
        let (a, b, c, d) = self.to_state_space();
        Ok(StateSpace { a, b, c, d })
    }

    /// Controllable-canonical realization of a proper transfer function.
    /// Returns (A, B, C, D); the state dimension equals the denominator degree.
    fn to_state_space(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
        let n = self.den.degree();
        if n == 0 {
            // Pure gain: num and den are constants, den is 1 after normalization.
            return (vec![], vec![], vec![], self.num.coeffs()[0]);
        }
        let a_coeffs = &self.den.coeffs()[..n];
        // Direct feedthrough is the coefficient of s^n in the numerator (0 when strictly proper).
        let d = if self.num.degree() == n {
            self.num.coeffs()[n]
        } else {
            0.0
        };
        let mut c = vec![0.0; n];
        for k in 0..n {
            let bk = self.num.coeffs().get(k).copied().unwrap_or(0.0);
            c[k] = bk - d * a_coeffs[k];
        }
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n - 1 {
            a[i][i + 1] = 1.0;
        }
        for j in 0..n {
            a[n - 1][j] = -a_coeffs[j];
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        (a, b, c, d)
    }
}

/// Series interconnection of two systems.
pub fn series(
    a: &RationalTransferFunction,
    b: &RationalTransferFunction,
) -> Result<RationalTransferFunction> {
    a.series(b)
}

/// Negative unity feedback closure `G / (1 + G)`.
pub fn feedback_unity(g: &RationalTransferFunction) -> Result<RationalTransferFunction> {
    let den = g.den().add(g.num());
    if den.is_zero() {
        return Err(Error::DegenerateSystem(
            "unity feedback cancels the system".into(),
        ));
    }
    RationalTransferFunction::new(g.num().clone(), den)
}

/// Builds a real polynomial from a conjugate-closed root set. Roots with nonzero
/// imaginary part must appear in conjugate pairs (as produced by `roots()`).
pub fn poly_from_roots(roots: &[Complex64]) -> Polynomial {
    let mut p = Polynomial::constant(1.0);
    let mut pending: Vec<Complex64> = Vec::new();
    for &r in roots {
        if r.im == 0.0 {
            p = p.mul(&Polynomial::new(vec![-r.re, 1.0]));
        } else if let Some(idx) = pending
            .iter()
            .position(|q| (q.conj() - r).norm() <= 1e-9 * (1.0 + r.norm()))
        {
            let q = pending.remove(idx);
            let re = 0.5 * (q.re + r.re);
            let im = 0.5 * (q.im.abs() + r.im.abs());
            p = p.mul(&Polynomial::new(vec![re * re + im * im, -2.0 * re, 1.0]));
        } else {
            pending.push(r);
        }
    }
    // Unpaired complex roots only arise from caller error; fold them in by their
    // real projection so the result stays a real polynomial.
    for q in pending {
        p = p.mul(&Polynomial::new(vec![-q.re, 1.0]));
    }
    p
}

/// Stability margins of an open-loop transfer function.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMargins {
    /// Lowest unity-gain crossover in the scanned window, rad/s.
    pub gain_crossover_rad_s: f64,
    /// `180 deg + phase` at the gain crossover, degrees.
    pub phase_margin_deg: f64,
    /// Crossing of the unwrapped phase through -180 deg, if any.
    pub phase_crossover_rad_s: Option<f64>,
    /// `-20 log10 |G|` at the phase crossover; infinite when there is none.
    pub gain_margin_db: f64,
    /// True when the magnitude crosses unity more than once in the window.
    pub multiple_gain_crossovers: bool,
}

/// Computes gain/phase margins of `g` over `[omega_lo, omega_hi]`.
///
/// The magnitude and unwrapped phase are sampled on a log grid (96 points per
/// decade), crossings are bracketed on the grid and refined by bisection to a
/// relative frequency tolerance of 1e-9.
pub fn margins(
    g: &RationalTransferFunction,
    omega_lo: f64,
    omega_hi: f64,
) -> Result<StabilityMargins> {
    if !(omega_lo > 0.0 && omega_hi > omega_lo) {
        return Err(Error::InvalidInput(format!(
            "need 0 < omega_lo < omega_hi, got [{omega_lo}, {omega_hi}]"
        )));
    }
    let pts = log_grid(omega_lo, omega_hi, 96);
    let mut mags = Vec::with_capacity(pts.len());
    let mut phases = Vec::with_capacity(pts.len());
    for &w in &pts {
        let r = g.freq_response(w)?;
        mags.push(r.norm());
        phases.push(r.arg());
    }
    unwrap_phases(&mut phases);

    // Gain crossovers: sign changes of |G| - 1.
    let mut crossovers = Vec::new();
    for i in 0..pts.len() - 1 {
        let f0 = mags[i] - 1.0;
        let f1 = mags[i + 1] - 1.0;
        if f0 == 0.0 {
            crossovers.push(pts[i]);
        } else if f0 * f1 < 0.0 {
            let w = bisect(pts[i], pts[i + 1], |w| {
                g.freq_response(w).map(|r| r.norm() - 1.0).unwrap_or(f64::NAN)
            });
            crossovers.push(w);
        }
    }
    if *mags.last().unwrap() == 1.0 {
        crossovers.push(*pts.last().unwrap());
    }
    if crossovers.is_empty() {
        return Err(Error::NoGainCrossover {
            omega_lo,
            omega_hi,
        });
    }
    let wc = crossovers[0];
    let phase_at_wc = phase_near(g, wc, &pts, &phases)?;
    let pm = 180.0 + phase_at_wc.to_degrees();

    // Phase crossovers: sign changes of unwrapped phase + 180 deg. Among several,
    // keep the one with the least gain margin (the binding one).
    let target = -PI;
    let mut gm_db = f64::INFINITY;
    let mut w180 = None;
    for i in 0..pts.len() - 1 {
        let f0 = phases[i] - target;
        let f1 = phases[i + 1] - target;
        let w = if f0 == 0.0 {
            Some(pts[i])
        } else if f0 * f1 < 0.0 {
            // Phase is smooth between grid points; refine on the interpolated branch.
            let base = phases[i];
            Some(bisect(pts[i], pts[i + 1], |w| {
                g.freq_response(w)
                    .map(|r| unwrap_to(r.arg(), base) - target)
                    .unwrap_or(f64::NAN)
            }))
        } else {
            None
        };
        if let Some(w) = w {
            if let Ok(r) = g.freq_response(w) {
                let db = -20.0 * r.norm().log10();
                if db < gm_db {
                    gm_db = db;
                    w180 = Some(w);
                }
            }
        }
    }

    Ok(StabilityMargins {
        gain_crossover_rad_s: wc,
        phase_margin_deg: pm,
        phase_crossover_rad_s: w180,
        gain_margin_db: gm_db,
        multiple_gain_crossovers: crossovers.len() > 1,
    })
}

/// Unwrapped phase at an off-grid frequency, referenced to the nearest grid point
/// at or below it.
fn phase_near(
    g: &RationalTransferFunction,
    w: f64,
    grid: &[f64],
    unwrapped: &[f64],
) -> Result<f64> {
    let idx = match grid.binary_search_by(|p| p.partial_cmp(&w).unwrap()) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) => i - 1,
    };
    let raw = g.freq_response(w)?.arg();
    Ok(unwrap_to(raw, unwrapped[idx]))
}

/// Shifts `phase` by a multiple of 2 pi so it lies within pi of `reference`.
fn unwrap_to(phase: f64, reference: f64) -> f64 {
    let k = ((reference - phase) / (2.0 * PI)).round();
    phase + k * 2.0 * PI
}

fn unwrap_phases(phases: &mut [f64]) {
    for i in 1..phases.len() {
        phases[i] = unwrap_to(phases[i], phases[i - 1]);
    }
}

/// Log-spaced grid including both endpoints.
pub fn log_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * points_per_decade as f64).ceil() as usize).max(2);
    (0..=n)
        .map(|k| lo * 10f64.powf(decades * k as f64 / n as f64))
        .collect()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= 1e-9 * mid {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (flo < 0.0) == (fm < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Continuous-time single-input single-output state-space model
/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

/// Backward-Euler discretization of a proper transfer function, with owned
/// state: `x_k = (I - dt A)^{-1} (x_{k-1} + dt B u_k)`, `y_k = C x_k + D u_k`.
/// A-stable, so safe for stiff blocks at fixed simulation steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    ss: StateSpace,
    /// (I - dt A)^{-1}
    m: Vec<Vec<f64>>,
    dt: f64,
    x: Vec<f64>,
}

impl DiscreteStateSpace {
    pub fn new(tf: &RationalTransferFunction, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("need dt > 0, got {dt}")));
        }
        let ss = tf.state_space()?;
        let n = ss.a.len();
        let mut lhs = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                lhs[i][j] = -dt * ss.a[i][j];
            }
            lhs[i][i] += 1.0;
        }
        let m = invert(&lhs)
            .ok_or_else(|| Error::DegenerateSystem("singular backward-Euler update".into()))?;
        Ok(DiscreteStateSpace {
            ss,
            m,
            dt,
            x: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances one step with input `u`, returning the output.
    pub fn step(&mut self, u: f64) -> f64 {
        let n = self.x.len();
        if n > 0 {
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                rhs[i] = self.x[i] + self.dt * self.ss.b[i] * u;
            }
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.m[i][j] * rhs[j];
                }
                self.x[i] = acc;
            }
        }
        self.output(u)
    }

    fn output(&self, u: f64) -> f64 {
        self.ss
            .c
            .iter()
            .zip(self.x.iter())
            .map(|(c, x)| c * x)
            .sum::<f64>()
            + self.ss.d * u
    }

    /// Sets the internal state to the equilibrium for a constant input, so the
    /// next `step(u0)` returns `G(0) * u0` with no transient.
    pub fn preset_dc(&mut self, u0: f64) -> Result<()> {
        let n = self.x.len();
        if n == 0 {
            return Ok(());
        }
        // Solve A x = -B u0.
        let a_inv = invert(&self.ss.a).ok_or_else(|| {
            Error::DegenerateSystem("integrating system has no constant-input equilibrium".into())
        })?;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a_inv[i][j] * (-self.ss.b[j] * u0);
            }
            self.x[i] = acc;
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        for x in self.x.iter_mut() {
            *x = 0.0;
        }
    }
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() || t.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "time series needs matching lengths >= 2, got {} and {}",
                t.len(),
                y.len()
            )));
        }
        if !t.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput(
                "time axis must be strictly increasing".into(),
            ));
        }
        Ok(TimeSeries { t, y })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear interpolation; clamps outside the time range.
    pub fn sample(&self, t: f64) -> f64 {
        if t <= self.t[0] {
            return self.y[0];
        }
        if t >= *self.t.last().unwrap() {
            return *self.y.last().unwrap();
        }
        let idx = match self.t.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i,
        };
        let (t0, t1) = (self.t[idx - 1], self.t[idx]);
        let (y0, y1) = (self.y[idx - 1], self.y[idx]);
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }
}

/// One row of a Bode table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    pub omega_rad_s: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

/// Samples magnitude and unwrapped phase on a log grid.
pub fn bode_points(
    g: &RationalTransferFunction,
    omega_lo: f64,
    omega_hi: f64,
    points_per_decade: usize,
) -> Result<Vec<BodePoint>> {
    if !(omega_lo > 0.0 && omega_hi > omega_lo) {
        return Err(Error::InvalidInput(format!(
            "need 0 < omega_lo < omega_hi, got [{omega_lo}, {omega_hi}]"
        )));
    }
    let grid = log_grid(omega_lo, omega_hi, points_per_decade.max(2));
    let mut phases = Vec::with_capacity(grid.len());
    let mut mags = Vec::with_capacity(grid.len());
    for &w in &grid {
        let r = g.freq_response(w)?;
        mags.push(20.0 * r.norm().log10());
        phases.push(r.arg());
    }
    unwrap_phases(&mut phases);
    Ok(grid
        .iter()
        .zip(mags.iter().zip(phases.iter()))
        .map(|(&w, (&m, &p))| BodePoint {
            omega_rad_s: w,
            mag_db: m,
            phase_deg: p.to_degrees(),
        })
        .collect())
}

/// Writes a Bode table as CSV with header `omega_rad_s,mag_db,phase_deg`.
/// When margins are given they are appended as `#`-prefixed trailer comments.
pub fn write_bode_csv(
    points: &[BodePoint],
    margins: Option<&StabilityMargins>,
    mut w: impl Write,
) -> Result<()> {
    writeln!(w, "omega_rad_s,mag_db,phase_deg")?;
    for p in points {
        writeln!(w, "{},{},{}", p.omega_rad_s, p.mag_db, p.phase_deg)?;
    }
    if let Some(m) = margins {
        writeln!(
            w,
            "# gain_crossover_rad_s = {:.6}, phase_margin_deg = {:.4}",
            m.gain_crossover_rad_s, m.phase_margin_deg
        )?;
        match m.phase_crossover_rad_s {
            Some(w180) => writeln!(
                w,
                "# phase_crossover_rad_s = {:.6}, gain_margin_db = {:.4}",
                w180, m.gain_margin_db
            )?,
            None => writeln!(w, "# no phase crossover, gain_margin_db = inf")?,
        }
        if m.multiple_gain_crossovers {
            writeln!(w, "# warning: multiple gain crossovers in window")?;
        }
    }
    Ok(())
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting; None when singular.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            aug[i][col]
                .abs()
                .partial_cmp(&aug[j][col].abs())
                .unwrap()
        })?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        let sub = f * aug[col][j];
                        aug[row][j] -= sub;
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: Vec<f64>, den: Vec<f64>) -> RationalTransferFunction {
        RationalTransferFunction::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn trims_trailing_zeros_and_keeps_zero_poly() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        let z = Polynomial::new(vec![0.0, 0.0]);
        assert!(z.is_zero());
        assert_eq!(z.coeffs(), &[0.0]);
    }

    #[test]
    fn denominator_normalization_is_idempotent() {
        let g = tf(vec![2.0], vec![4.0, 2.0]);
        assert_eq!(g.den().leading(), 1.0);
        assert_eq!(g.den().coeffs(), &[2.0, 1.0]);
        assert_eq!(g.num().coeffs(), &[1.0]);
        let g2 = RationalTransferFunction::new(g.num().clone(), g.den().clone()).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn quadratic_poles_match_damping_form() {
        // s^2 + 2*zeta*omega*s + omega^2 with zeta = 0.5, omega = 100
        let p = Polynomial::new(vec![10_000.0, 100.0, 1.0]);
        let mut roots = p.roots().unwrap();
        roots.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((roots[0].re - -50.0).abs() < 1e-9);
        assert!((roots[0].im - -86.602_540_378_443_86).abs() < 1e-9);
        assert!((roots[1].re - -50.0).abs() < 1e-9);
        assert!((roots[1].im - 86.602_540_378_443_86).abs() < 1e-9);
    }

    #[test]
    fn integrator_margin_is_ninety_degrees() {
        let g = tf(vec![10.0], vec![0.0, 1.0]);
        let m = margins(&g, 0.1, 1e3).unwrap();
        assert!((m.gain_crossover_rad_s - 10.0).abs() < 1e-6 * 10.0);
        assert!((m.phase_margin_deg - 90.0).abs() < 1e-6);
        assert!(m.phase_crossover_rad_s.is_none());
        assert!(m.gain_margin_db.is_infinite());
        assert!(!m.multiple_gain_crossovers);
    }

    #[test]
    fn double_integrator_margin_is_zero() {
        let g = tf(vec![1.0], vec![0.0, 0.0, 1.0]);
        let m = margins(&g, 1e-2, 1e2).unwrap();
        assert!((m.gain_crossover_rad_s - 1.0).abs() < 1e-6);
        assert!(m.phase_margin_deg.abs() < 1e-6);
    }

    #[test]
    fn no_crossover_is_reported() {
        let g = tf(vec![0.5], vec![1.0]);
        match margins(&g, 0.1, 10.0) {
            Err(Error::NoGainCrossover { .. }) => {}
            other => panic!("expected NoGainCrossover, got {other:?}"),
        }
    }

    #[test]
    fn first_order_step_value() {
        // 1/(s+1) at t = 1 is 1 - e^-1
        let g = tf(vec![1.0], vec![1.0, 1.0]);
        let r = g.step_response(2.0, 1e-4).unwrap();
        let expected = 1.0 - (-1.0f64).exp();
        assert!((r.sample(1.0) - expected).abs() < 1e-6);
        assert!((r.sample(1.0) - 0.632_12).abs() < 1e-5);
    }

    #[test]
    fn integrator_ramp_value() {
        // Integral of t from 0 to 2 is 2.0
        let g = tf(vec![1.0], vec![0.0, 1.0]);
        let r = g.ramp_response(2.0, 1e-3).unwrap();
        assert!((r.sample(2.0) - 2.0).abs() < 1e-7);
    }

    #[test]
    fn biproper_step_has_feedthrough_jump() {
        // (s + 10)/(s + 1): initial value 1, final value 10
        let g = tf(vec![10.0, 1.0], vec![1.0, 1.0]);
        let r = g.step_response(10.0, 1e-3).unwrap();
        assert!((r.y()[0] - 1.0).abs() < 1e-12);
        assert!((r.sample(10.0) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn improper_time_response_rejected() {
        let g = tf(vec![0.0, 0.0, 1.0], vec![1.0, 1.0]);
        assert!(matches!(
            g.step_response(1.0, 1e-3),
            Err(Error::ImproperSystem)
        ));
    }

    #[test]
    fn freq_response_first_order_point() {
        let g = tf(vec![1.0], vec![1.0, 1.0]);
        let r = g.freq_response(1.0).unwrap();
        assert!((r.re - 0.5).abs() < 1e-12);
        assert!((r.im - -0.5).abs() < 1e-12);
    }

    #[test]
    fn freq_response_conjugate_symmetry() {
        let g = tf(vec![3.0, 1.0], vec![2.0, 0.4, 1.0]);
        for &w in &[0.1, 1.0, 7.3, 150.0] {
            let pos = g.freq_response(w).unwrap();
            let neg = g.freq_response(-w).unwrap();
            assert!((pos - neg.conj()).norm() < 1e-12 * pos.norm().max(1.0));
        }
    }

    #[test]
    fn pole_on_axis_detected() {
        // 1/(s^2 + 4) has poles at +/- 2j
        let g = tf(vec![1.0], vec![4.0, 0.0, 1.0]);
        assert!(matches!(
            g.freq_response(2.0),
            Err(Error::PoleOnImaginaryAxis { .. })
        ));
        assert!(g.freq_response(1.9).is_ok());
    }

    #[test]
    fn series_and_feedback_shapes() {
        let a = tf(vec![1.0], vec![1.0, 1.0]);
        let b = tf(vec![2.0], vec![3.0, 1.0]);
        let s = series(&a, &b).unwrap();
        assert_eq!(s.num().coeffs(), &[2.0]);
        assert_eq!(s.den().coeffs(), &[3.0, 4.0, 1.0]);

        // Unity feedback of k/s has DC gain 1 regardless of k.
        let g = tf(vec![17.0], vec![0.0, 1.0]);
        let cl = feedback_unity(&g).unwrap();
        let dc = cl.freq_response(1e-9).unwrap();
        assert!((dc.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rational_add_and_parallel() {
        // 1/s + 1/s = 2/s (unreduced: 2s/s^2)
        let g = tf(vec![1.0], vec![0.0, 1.0]);
        let sum = g.add(&g).unwrap();
        let r = sum.freq_response(3.0).unwrap();
        let expect = Complex64::new(0.0, -2.0 / 3.0);
        assert!((r - expect).norm() < 1e-12);

        // Parallel of equal impedances halves each: 1/(2s) at omega = 3.
        let par = g.parallel(&g).unwrap();
        let rp = par.freq_response(3.0).unwrap();
        assert!((rp - Complex64::new(0.0, -1.0 / 6.0)).norm() < 1e-12);
    }

    #[test]
    fn reduced_cancels_matching_pair() {
        // (s+1)(s+2) / (s+1)(s+3) reduces to (s+2)/(s+3)
        let num = Polynomial::new(vec![1.0, 1.0]).mul(&Polynomial::new(vec![2.0, 1.0]));
        let den = Polynomial::new(vec![1.0, 1.0]).mul(&Polynomial::new(vec![3.0, 1.0]));
        let g = RationalTransferFunction::new(num, den).unwrap();
        let r = g.reduced(1e-6).unwrap();
        assert_eq!(r.den().degree(), 1);
        let at = r.freq_response(5.0).unwrap();
        let expect = Complex64::new(2.0, 5.0) / Complex64::new(3.0, 5.0);
        assert!((at - expect).norm() < 1e-9);
    }

    #[test]
    fn random_stable_polynomials_have_small_residuals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_1234);
        for _ in 0..1000 {
            let deg = rng.gen_range(2..=8usize);
            // Build a stable polynomial from random left-half-plane roots.
            let mut roots: Vec<Complex64> = Vec::new();
            let mut remaining = deg;
            while remaining > 0 {
                if remaining >= 2 && rng.gen_bool(0.5) {
                    let re = -rng.gen_range(0.01..50.0);
                    let im = rng.gen_range(0.01..50.0);
                    roots.push(Complex64::new(re, im));
                    roots.push(Complex64::new(re, -im));
                    remaining -= 2;
                } else {
                    roots.push(Complex64::new(-rng.gen_range(0.01..50.0), 0.0));
                    remaining -= 1;
                }
            }
            let p = poly_from_roots(&roots).scale(rng.gen_range(0.5..2.0));
            let max_coeff = p.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let found = p.roots().unwrap();
            assert_eq!(found.len(), deg);
            for r in found {
                let residual = p.eval(r).norm();
                assert!(
                    residual < 1e-6 * max_coeff,
                    "residual {residual:e} too large for degree {deg}"
                );
            }
        }
    }

    #[test]
    fn roots_come_in_exact_conjugate_pairs() {
        let p = Polynomial::new(vec![10_000.0, 100.0, 1.0]).mul(&Polynomial::new(vec![1.0, 1.0]));
        let roots = p.roots().unwrap();
        let complex: Vec<_> = roots.iter().filter(|r| r.im != 0.0).collect();
        assert_eq!(complex.len(), 2);
        assert_eq!(complex[0].re, complex[1].re);
        assert_eq!(complex[0].im, -complex[1].im);
    }

    #[test]
    fn origin_roots_are_exact() {
        // s^2 (s + 3)
        let p = Polynomial::new(vec![0.0, 0.0, 3.0, 1.0]);
        let roots = p.roots().unwrap();
        let zeros_at_origin = roots.iter().filter(|r| r.re == 0.0 && r.im == 0.0).count();
        assert_eq!(zeros_at_origin, 2);
        assert!(roots.iter().any(|r| (r.re - -3.0).abs() < 1e-9));
    }

    #[test]
    fn bode_csv_header_and_rows() {
        let g = tf(vec![10.0], vec![0.0, 1.0]);
        let pts = bode_points(&g, 0.1, 100.0, 10).unwrap();
        let m = margins(&g, 0.1, 100.0).unwrap();
        let mut buf = Vec::new();
        write_bode_csv(&pts, Some(&m), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "omega_rad_s,mag_db,phase_deg");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 3);
        assert!((first[0].parse::<f64>().unwrap() - 0.1).abs() < 1e-12);
        assert!(text.contains("# gain_crossover_rad_s"));
        // -90 phase for the integrator all along the grid
        assert!(pts.iter().all(|p| (p.phase_deg - -90.0).abs() < 1e-9));
    }

    #[test]
    fn margins_flag_multiple_crossovers() {
        // Sharp resonance pushes |G| back above 1 after the first crossover:
        // G = 10/s * (w0^2 + small damping resonance peak) via parallel sum.
        // Simpler: G = (10 (s^2 + 0.2 s + 400)) / (s (s^2 + 0.02 s + 400))
        // has a notch then a peak near 20 rad/s.
        let g = tf(
            vec![4000.0, 2.0, 10.0],
            vec![0.0, 400.0, 0.02, 1.0],
        );
        let m = margins(&g, 0.1, 1e3).unwrap();
        assert!(m.multiple_gain_crossovers);
        // Lowest crossover still near 10 rad/s.
        assert!((m.gain_crossover_rad_s - 10.0).abs() < 1.0);
    }

    #[test]
    fn discrete_block_tracks_first_order_step() {
        // 1/(0.01 s + 1): backward Euler at dt = 50 us tracks the exponential
        let g = tf(vec![1.0], vec![1.0, 0.01]);
        let mut blk = DiscreteStateSpace::new(&g, 50e-6).unwrap();
        let mut y = 0.0;
        let steps = (0.05 / 50e-6) as usize;
        for _ in 0..steps {
            y = blk.step(1.0);
        }
        let expected = 1.0 - (-5.0f64).exp();
        assert!((y - expected).abs() < 1e-3);
    }

    #[test]
    fn discrete_block_dc_preset_removes_transient() {
        // Biproper lead-lag with unit DC gain
        let g = tf(vec![1.0, 0.002], vec![1.0, 0.0001, 1e-8]);
        let mut blk = DiscreteStateSpace::new(&g, 50e-6).unwrap();
        blk.preset_dc(7.0).unwrap();
        for _ in 0..5 {
            let y = blk.step(7.0);
            assert!((y - 7.0).abs() < 1e-9, "preset failed: {y}");
        }
    }

    #[test]
    fn time_series_validation() {
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        let ts = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 10.0, 20.0]).unwrap();
        assert!((ts.sample(0.5) - 5.0).abs() < 1e-12);
        assert!((ts.sample(-1.0) - 0.0).abs() < 1e-12);
        assert!((ts.sample(3.0) - 20.0).abs() < 1e-12);
    }
}
