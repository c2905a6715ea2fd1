//! Per-unit bases, AC-link operating points, the active-power transfer function of a
//! series R-L link, and its virtual-resistance damped linearization for loop shaping.
//!
//! Frame convention: phasor quantities are expressed in a dq frame whose angle
//! relative to the remote source `e` is `delta`. The local voltage has components
//! `(u_d, u_q)` in that frame; `e` lies at angle `-delta`, so with `delta = 0` the
//! frame is aligned to `e` and with `(u_d, u_q) = (U, 0)` it is aligned to `u`.
//! Power expressions are amplitude-invariant dq: `P = 3/2 (u_d i_d + u_q i_q)` in SI.

use crate::error::{Error, Result};
use crate::linsys::{Polynomial, RationalTransferFunction};
use std::f64::consts::{FRAC_PI_2, PI};

/// Amplitude-invariant per-unit base set for a three-phase system.
///
/// `u_b` and `i_b` are peak phase quantities: `u_b = sqrt(2/3) U_N`,
/// `i_b = sqrt(2/3) S_N / U_N`, so `s_n = 3/2 u_b i_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBase {
    pub s_n: f64,
    pub u_n: f64,
    pub f_n: f64,
    pub u_b: f64,
    pub i_b: f64,
    pub z_b: f64,
    pub l_b: f64,
    pub omega_b: f64,
}

/// Builds the per-unit base set from rated apparent power `s_n` (VA),
/// rated line-to-line RMS voltage `u_n` (V), and rated frequency `f_n` (Hz).
pub fn per_unit_base(s_n: f64, u_n: f64, f_n: f64) -> Result<PerUnitBase> {
    if !(s_n > 0.0 && u_n > 0.0 && f_n > 0.0) {
        return Err(Error::InvalidInput(format!(
            "per-unit base needs positive ratings, got s_n = {s_n}, u_n = {u_n}, f_n = {f_n}"
        )));
    }
    let u_b = (2.0f64 / 3.0).sqrt() * u_n;
    let i_b = (2.0f64 / 3.0).sqrt() * s_n / u_n;
    let z_b = u_b / i_b;
    let omega_b = 2.0 * PI * f_n;
    Ok(PerUnitBase {
        s_n,
        u_n,
        f_n,
        u_b,
        i_b,
        z_b,
        l_b: z_b / omega_b,
        omega_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitSystem {
    Si,
    PerUnit,
}

/// Series R-L link between a local voltage `u` and a remote source `e`.
///
/// `r`, `l`, `omega1`, `u`, `e` are all in the same unit system: SI
/// (ohm, henry, rad/s, volt peak) or per-unit (with `omega1` in multiples of the
/// base frequency). Transfer functions built from per-unit parameters have their
/// `s` axis in multiples of the base frequency as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcLinkParameters {
    pub r: f64,
    pub l: f64,
    pub omega1: f64,
    pub u: f64,
    pub e: f64,
    pub unit_system: UnitSystem,
}

impl AcLinkParameters {
    pub fn new(
        r: f64,
        l: f64,
        omega1: f64,
        u: f64,
        e: f64,
        unit_system: UnitSystem,
    ) -> Result<Self> {
        if !(r >= 0.0 && l > 0.0 && u > 0.0 && e > 0.0 && omega1 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "AC link needs r >= 0 and positive l, omega1, u, e; \
                 got r = {r}, l = {l}, omega1 = {omega1}, u = {u}, e = {e}"
            )));
        }
        Ok(AcLinkParameters {
            r,
            l,
            omega1,
            u,
            e,
            unit_system,
        })
    }

    pub fn per_unit(r: f64, l: f64, omega1: f64, u: f64, e: f64) -> Result<Self> {
        Self::new(r, l, omega1, u, e, UnitSystem::PerUnit)
    }

    pub fn si(r: f64, l: f64, omega1: f64, u: f64, e: f64) -> Result<Self> {
        Self::new(r, l, omega1, u, e, UnitSystem::Si)
    }

    /// Series reactance at the fundamental.
    pub fn x(&self) -> f64 {
        self.omega1 * self.l
    }
}

/// Steady operating point of an AC link, expressed in the frame of the remote
/// source `e` (so `u` lies at angle `delta_o`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub delta_o: f64,
    pub u_o: f64,
    pub e_o: f64,
    pub u_do: f64,
    pub u_qo: f64,
    pub i_do: f64,
    pub i_qo: f64,
    pub i_o: f64,
    /// Current angle in the e-aligned frame.
    pub theta_io: f64,
    /// Current angle relative to the local voltage: `phi_o = theta_io - delta_o`.
    pub phi_o: f64,
}

/// Computes the steady current phasor of the link at local angle `delta_o`.
pub fn operating_point(params: &AcLinkParameters, delta_o: f64) -> Result<OperatingPoint> {
    if !(-FRAC_PI_2 < delta_o && delta_o < FRAC_PI_2) {
        return Err(Error::InvalidInput(format!(
            "operating angle must lie in (-pi/2, pi/2), got {delta_o}"
        )));
    }
    let u_do = params.u * delta_o.cos();
    let u_qo = params.u * delta_o.sin();
    let z = (params.r * params.r + params.x() * params.x()).sqrt();
    let i_o = ((u_do - params.e).powi(2) + u_qo * u_qo).sqrt() / z;
    let theta_io = f64::atan2(u_qo, u_do - params.e) - f64::atan2(params.x(), params.r);
    Ok(OperatingPoint {
        delta_o,
        u_o: params.u,
        e_o: params.e,
        u_do,
        u_qo,
        i_do: i_o * theta_io.cos(),
        i_qo: i_o * theta_io.sin(),
        i_o,
        theta_io,
        phi_o: theta_io - delta_o,
    })
}

/// Active power delivered by `u` into the link at steady state and angle `delta`.
pub fn steady_power(params: &AcLinkParameters, delta: f64) -> f64 {
    let tf = nonlinear_power_tf(
        params,
        params.u * delta.cos(),
        params.u * delta.sin(),
        0.0,
    );
    tf.num().coeffs()[0] / tf.den().coeffs()[0]
}

/// Solves `steady_power(params, delta) = p_target` for `delta` on
/// (-pi/2, pi/2) by bisection; the power curve is strictly increasing there
/// (for realistic R << X), so the solution is unique when it exists. Negative
/// targets place the local terminal at the receiving end. `tol` bounds the
/// residual power mismatch.
pub fn solve_delta_for_power(params: &AcLinkParameters, p_target: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !p_target.is_finite() {
        return Err(Error::InvalidInput(format!(
            "power target must be finite, got {p_target}"
        )));
    }
    let mut lo = -FRAC_PI_2 * (1.0 - 1e-12);
    let mut hi = FRAC_PI_2 * (1.0 - 1e-12);
    let f_lo = steady_power(params, lo) - p_target;
    let f_hi = steady_power(params, hi) - p_target;
    if f_lo > tol {
        return Err(Error::Infeasible(format!(
            "power target {p_target} is below the link capability {}",
            f_lo + p_target
        )));
    }
    if f_hi < -tol {
        return Err(Error::Infeasible(format!(
            "power target {p_target} exceeds the link capability {}",
            f_hi + p_target
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = steady_power(params, mid) - p_target;
        if f.abs() <= tol && (hi - lo) < 1e-12 {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    if (steady_power(params, delta) - p_target).abs() <= tol {
        Ok(delta)
    } else {
        Err(Error::Infeasible(format!(
            "bisection stalled at delta = {delta} for target {p_target}"
        )))
    }
}

/// Active-power response of the R-L link with the current dynamics retained:
///
/// `P(s) = (alpha_1 s + alpha_0) / ((s L + R)^2 + (omega1 L)^2)`
///
/// where `(u_d, u_q)` is the local voltage in a frame at angle `delta` to the
/// remote source. At `s = 0` this reduces to the classical steady power flow.
pub fn nonlinear_power_tf(
    params: &AcLinkParameters,
    u_d: f64,
    u_q: f64,
    delta: f64,
) -> RationalTransferFunction {
    let (r, l, w, e) = (params.r, params.l, params.omega1, params.e);
    let u_sq = u_d * u_d + u_q * u_q;
    let (sin_d, cos_d) = delta.sin_cos();
    let alpha_1 = -l * e * u_d * cos_d + l * e * u_q * sin_d + u_sq * l;
    let alpha_0 = e * (l * w * u_q - r * u_d) * cos_d
        + e * (l * w * u_d + r * u_q) * sin_d
        + u_sq * r;
    let num = Polynomial::new(vec![alpha_0, alpha_1]);
    let den = Polynomial::new(vec![r * r + w * w * l * l, 2.0 * l * r, l * l]);
    RationalTransferFunction::new(num, den).expect("denominator nonzero for l > 0")
}

/// Effective damping factor introduced by a virtual resistance `r_v` (p.u.)
/// low-pass filtered with time constant `t_v` (s), evaluated at real `s = s_mag`
/// (rad/s). `l` is the link inductance in p.u., `omega_b` the base frequency.
pub fn beta(s_mag: f64, r_v: f64, t_v: f64, l: f64, omega_b: f64) -> Result<f64> {
    if !(t_v >= 0.0 && l > 0.0 && r_v >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "beta needs t_v >= 0, r_v >= 0, l > 0; got t_v = {t_v}, r_v = {r_v}, l = {l}"
        )));
    }
    let p = t_v * s_mag + 1.0;
    Ok(1.0 + (r_v * t_v * omega_b - 2.0 * l) / (2.0 * l * p) - r_v * t_v * omega_b / (2.0 * l * p * p))
}

/// Parameters of the filtered virtual resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualResistanceParams {
    /// Virtual resistance, p.u.
    pub r_v: f64,
    /// High-pass / filter time constant, s.
    pub t_v: f64,
}

impl VirtualResistanceParams {
    pub fn new(r_v: f64, t_v: f64) -> Result<Self> {
        if !(r_v >= 0.0 && t_v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "virtual resistance needs r_v >= 0 and t_v > 0, got r_v = {r_v}, t_v = {t_v}"
            )));
        }
        Ok(VirtualResistanceParams { r_v, t_v })
    }
}

/// Small-signal power-angle response of the virtual-resistance damped link,
/// in per-unit power per radian with `s` in rad/s:
///
/// `G(s) = U_o ( omega1 U_o omega_b^2 / (L (s^2 + 2 beta (R_v/L) omega_b s
///          + omega1^2 omega_b^2)) + I_o sin phi_o )`
///
/// The series resistance of `params` is ignored; damping comes from the virtual
/// resistance alone, with `beta` frozen at `s = omega_b`.
pub fn gpac(
    params: &AcLinkParameters,
    vr: &VirtualResistanceParams,
    op: &OperatingPoint,
    base: &PerUnitBase,
) -> Result<RationalTransferFunction> {
    if params.unit_system != UnitSystem::PerUnit {
        return Err(Error::InvalidInput(
            "power-angle linearization expects per-unit link parameters".into(),
        ));
    }
    let wb = base.omega_b;
    let b = beta(wb, vr.r_v, vr.t_v, params.l, wb)?;
    let den = Polynomial::new(vec![
        params.omega1 * params.omega1 * wb * wb,
        2.0 * b * (vr.r_v / params.l) * wb,
        1.0,
    ]);
    let resonant = Polynomial::constant(params.omega1 * op.u_o * wb * wb / params.l);
    let feedthrough = op.i_o * op.phi_o.sin();
    let num = resonant.add(&den.scale(feedthrough)).scale(op.u_o);
    RationalTransferFunction::new(num, den)
}

/// Natural frequency and damping ratio of the single complex pole pair of `tf`.
pub fn gpac_pole_metrics(tf: &RationalTransferFunction) -> Result<(f64, f64)> {
    let poles = tf.poles()?;
    let mut pairs: Vec<_> = poles.iter().filter(|p| p.im > 0.0).collect();
    pairs.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
    match pairs.as_slice() {
        [p] => {
            let wn = p.norm();
            Ok((wn, -p.re / wn))
        }
        [] => Err(Error::NoComplexPolePair(
            "all poles are real (overdamped)".into(),
        )),
        _ => Err(Error::NoComplexPolePair(format!(
            "expected one complex pair, found {}",
            pairs.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_values_with_unit_friendly_ratings() {
        let b = per_unit_base(1.5, 1.0, 1.0 / (2.0 * PI)).unwrap();
        assert!((b.u_b - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((b.i_b - (2.0f64 / 3.0).sqrt() * 1.5).abs() < 1e-15);
        assert!((b.omega_b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn base_values_for_thousand_mva_class() {
        let b = per_unit_base(1000e6, 400e3, 50.0).unwrap();
        assert!((b.u_b - 326_598.63).abs() < 0.5);
        assert!((b.i_b - 2041.2414).abs() < 1e-3);
        assert!((b.z_b - 160.0).abs() < 1e-9);
        assert!((b.omega_b - 314.159_265).abs() < 1e-6);
        assert!((b.l_b - 0.509_30).abs() < 1e-5);
    }

    #[test]
    fn base_identity_holds_for_random_ratings() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let s: f64 = rng.gen_range(1e3..1e10);
            let u: f64 = rng.gen_range(1e2..1e6);
            let f: f64 = rng.gen_range(10.0..400.0);
            let b = per_unit_base(s, u, f).unwrap();
            assert!((b.z_b * b.i_b - b.u_b).abs() < 1e-9 * b.u_b);
            // s_n recovers from the peak bases
            assert!((1.5 * b.u_b * b.i_b - s).abs() < 1e-9 * s);
        }
    }

    #[test]
    fn rejects_nonpositive_ratings() {
        assert!(per_unit_base(0.0, 1.0, 50.0).is_err());
        assert!(per_unit_base(1.0, -1.0, 50.0).is_err());
        assert!(per_unit_base(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_angle_equal_magnitude_carries_no_current() {
        let p = AcLinkParameters::per_unit(0.01, 0.2, 1.0, 1.0, 1.0).unwrap();
        let op = operating_point(&p, 0.0).unwrap();
        assert!(op.i_o.abs() < 1e-15);
    }

    #[test]
    fn lossless_current_matches_phasor_oracle() {
        let p = AcLinkParameters::per_unit(0.0, 0.2, 1.0, 1.0, 1.0).unwrap();
        let op = operating_point(&p, 0.2).unwrap();
        // |1 at angle 0.2 - 1| / 0.2 = 2 sin(0.1) / 0.2
        let expected = 2.0 * (0.1f64).sin() / 0.2;
        assert!((op.i_o - expected).abs() < 1e-12);
        assert!((op.i_o - 0.998_334_17).abs() < 1e-8);
        // Lossless symmetric link: current bisects the angle, phi = -delta/2.
        assert!((op.phi_o - -0.1).abs() < 1e-12);
    }

    #[test]
    fn current_angle_identities_hold() {
        let p = AcLinkParameters::per_unit(0.05, 0.3, 1.0, 1.02, 0.98).unwrap();
        let op = operating_point(&p, 0.37).unwrap();
        assert!((op.u_do - op.u_o * op.delta_o.cos()).abs() < 1e-15);
        assert!((op.u_qo - op.u_o * op.delta_o.sin()).abs() < 1e-15);
        assert!((op.i_do - op.i_o * op.theta_io.cos()).abs() < 1e-15);
        assert!((op.i_qo - op.i_o * op.theta_io.sin()).abs() < 1e-15);
        let phi = f64::atan2(op.i_qo, op.i_do) - f64::atan2(op.u_qo, op.u_do);
        assert!((phi - op.phi_o).abs() < 1e-12);
    }

    #[test]
    fn angle_bounds_enforced() {
        let p = AcLinkParameters::per_unit(0.0, 0.2, 1.0, 1.0, 1.0).unwrap();
        assert!(operating_point(&p, FRAC_PI_2).is_err());
        assert!(operating_point(&p, -FRAC_PI_2).is_err());
    }

    #[test]
    fn zero_target_at_equal_voltages_gives_zero_angle() {
        let p = AcLinkParameters::per_unit(0.0, 0.2, 1.0, 1.0, 1.0).unwrap();
        let d = solve_delta_for_power(&p, 0.0, 1e-12).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn lossless_half_capability_angle() {
        // P = UE sin(delta)/X; target 0.5 UE/X lands at asin(0.5)
        let p = AcLinkParameters::per_unit(0.0, 0.2, 1.0, 1.0, 1.0).unwrap();
        let target = 0.5 / 0.2;
        let d = solve_delta_for_power(&p, target, 1e-12).unwrap();
        assert!((d - 0.523_598_78).abs() < 1e-7);
        assert!((d - (0.5f64).asin()).abs() < 1e-9);
    }

    #[test]
    fn solved_angle_reproduces_target_power() {
        let p = AcLinkParameters::per_unit(0.03, 0.25, 1.0, 1.01, 0.99).unwrap();
        for target in [0.1, 0.5, 0.9, 2.0] {
            let d = solve_delta_for_power(&p, target, 1e-11).unwrap();
            assert!((steady_power(&p, d) - target).abs() <= 1e-11);
        }
    }

    #[test]
    fn unreachable_power_is_infeasible() {
        let p = AcLinkParameters::per_unit(0.0, 0.2, 1.0, 1.0, 1.0).unwrap();
        // capability tops out at UE/X = 5 on (0, pi/2)
        assert!(matches!(
            solve_delta_for_power(&p, 5.5, 1e-9),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn power_tf_reduces_to_classical_flow_at_dc() {
        let p = AcLinkParameters::per_unit(0.0, 0.2, 1.0, 1.0, 1.0).unwrap();
        let delta = 0.3f64;
        // u expressed in its own frame, link angle passed explicitly
        let tf = nonlinear_power_tf(&p, p.u, 0.0, delta);
        let dc = tf.num().coeffs()[0] / tf.den().coeffs()[0];
        let classical = p.u * p.e * delta.sin() / p.x();
        assert!((dc - classical).abs() < 1e-12);
    }

    #[test]
    fn power_tf_is_frame_invariant() {
        let p = AcLinkParameters::per_unit(0.04, 0.2, 1.0, 1.0, 0.97).unwrap();
        let delta = 0.3f64;
        let in_u_frame = nonlinear_power_tf(&p, p.u, 0.0, delta);
        let in_e_frame =
            nonlinear_power_tf(&p, p.u * delta.cos(), p.u * delta.sin(), 0.0);
        for c in 0..2 {
            let a = in_u_frame.num().coeffs().get(c).copied().unwrap_or(0.0);
            let b = in_e_frame.num().coeffs().get(c).copied().unwrap_or(0.0);
            assert!((a - b).abs() < 1e-12, "coefficient {c} differs: {a} vs {b}");
        }
    }

    #[test]
    fn power_tf_zero_at_aligned_equal_voltages() {
        let p = AcLinkParameters::per_unit(0.0, 0.15, 1.0, 1.0, 1.0).unwrap();
        let tf = nonlinear_power_tf(&p, 1.0, 0.0, 0.0);
        assert_eq!(tf.num().coeffs()[0], 0.0);
        assert!(steady_power(&p, 0.0).abs() < 1e-15);
    }

    #[test]
    fn power_tf_poles_sit_at_link_eigenvalues() {
        let p = AcLinkParameters::si(2.0, 0.05, 100.0 * PI, 326e3, 320e3).unwrap();
        let tf = nonlinear_power_tf(&p, p.u, 0.0, 0.1);
        let mut poles = tf.poles().unwrap();
        poles.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        let re = -p.r / p.l;
        let im = p.omega1;
        assert!((poles[0].re - re).abs() < 1e-6 * re.abs());
        assert!((poles[0].im - -im).abs() < 1e-6 * im);
        assert!((poles[1].im - im).abs() < 1e-6 * im);
    }

    #[test]
    fn beta_limits_match_bounds() {
        let l = 0.3;
        let wb = 100.0 * PI;
        // vanishing filter time removes the damping contribution entirely
        assert!(beta(wb, 0.2, 0.0, l, wb).unwrap().abs() < 1e-12);
        // long filter time saturates at 1 + R_v/(2L)
        let b_inf = beta(wb, 0.2, 1e6, l, wb).unwrap();
        assert!((b_inf - (1.0 + 0.2 / (2.0 * l))).abs() < 1e-3);
        // zero virtual resistance leaves the first-order washout only
        let t_v = 0.02;
        let b0 = beta(1.0 / t_v, 0.0, t_v, l, wb).unwrap();
        assert!((b0 - 0.5).abs() < 1e-12);
    }

    fn bench_base() -> PerUnitBase {
        per_unit_base(1000e6, 400e3, 50.0).unwrap()
    }

    #[test]
    fn undamped_link_has_imaginary_pole_pair() {
        let base = bench_base();
        let p = AcLinkParameters::per_unit(0.0, 0.3, 1.0, 1.0, 1.0).unwrap();
        let op = operating_point(&p, 0.0).unwrap();
        let vr = VirtualResistanceParams::new(0.0, 0.02).unwrap();
        let g = gpac(&p, &vr, &op, &base).unwrap();
        let poles = g.poles().unwrap();
        for pole in poles {
            assert!(pole.re.abs() < 1e-9 * base.omega_b);
            assert!((pole.im.abs() - base.omega_b).abs() < 1e-6 * base.omega_b);
        }
    }

    #[test]
    fn dc_gain_matches_closed_form() {
        let base = bench_base();
        let p = AcLinkParameters::per_unit(0.0, 0.3, 1.0, 1.0, 1.0).unwrap();
        let op = operating_point(&p, 0.24).unwrap();
        let vr = VirtualResistanceParams::new(0.17, 0.021).unwrap();
        let g = gpac(&p, &vr, &op, &base).unwrap();
        let dc = g.freq_response(1e-12).unwrap().re;
        let expect = op.u_o * (op.u_o / (p.omega1 * p.l) + op.i_o * op.phi_o.sin());
        assert!((dc - expect).abs() < 1e-9 * expect.abs());
        // Lossless slope identity: U E cos(delta) / X
        let classical = p.u * p.e * op.delta_o.cos() / p.x();
        assert!((dc - classical).abs() < 1e-9 * classical);
    }

    #[test]
    fn pole_metrics_read_quadratic_form() {
        let tf = RationalTransferFunction::from_coeffs(
            vec![10_000.0],
            vec![10_000.0, 2.0 * 0.3 * 100.0, 1.0],
        )
        .unwrap();
        let (wn, zeta) = gpac_pole_metrics(&tf).unwrap();
        assert!((wn - 100.0).abs() < 1e-9);
        assert!((zeta - 0.3).abs() < 1e-12);
    }

    #[test]
    fn default_damped_link_resonates_near_base_frequency() {
        let base = bench_base();
        let p = AcLinkParameters::per_unit(0.0, 0.6, 1.0, 1.0, 1.0).unwrap();
        let op = operating_point(&p, 0.2).unwrap();
        let vr = VirtualResistanceParams::new(0.2, 7.5 / base.omega_b).unwrap();
        let g = gpac(&p, &vr, &op, &base).unwrap();
        let (wn, zeta) = gpac_pole_metrics(&g).unwrap();
        assert!((wn - base.omega_b).abs() < 0.01 * base.omega_b);
        // damping ratio equals beta R_v / (L omega1) by construction
        let b = beta(base.omega_b, vr.r_v, vr.t_v, p.l, base.omega_b).unwrap();
        let zeta_formula = b * vr.r_v / (p.l * p.omega1);
        assert!((zeta - zeta_formula).abs() < 0.1 * zeta_formula);
        assert!((zeta - zeta_formula).abs() < 1e-9);
    }

    #[test]
    fn overdamped_link_reports_shape_error() {
        // Two real poles: no complex pair to characterize.
        let tf =
            RationalTransferFunction::from_coeffs(vec![1.0], vec![1.0, 3.0, 1.0]).unwrap();
        assert!(matches!(
            gpac_pole_metrics(&tf),
            Err(Error::NoComplexPolePair(_))
        ));
    }
}
