//! Discrete-time grid-forming controllers: the holistic MMC controller
//! (energy-synchronized angle, virtual resistance, droop-coordinated DC-voltage
//! and DC-current loops with resonance compensator) and the wind-turbine
//! controller (DC-link-synchronized GSC plus frequency-response power command).
//!
//! Every controller consumes only measurements available at its own terminal;
//! `locality_audit` turns that claim into a checkable property.
//!
//! Conventions shared with the plant models:
//! - AC current measurements arrive in the common frame; controllers rotate
//!   them into their own frame internally
//! - DC current measurements are export-positive (into the HVDC line) at both
//!   terminals, so the midpoint estimate is one formula for either end; the
//!   inner current loop converts to the import-positive plant convention at its
//!   boundary
//! - all integrators and filters use backward Euler at the simulation step

use crate::error::{Error, Result};
use crate::linsys::{DiscreteStateSpace, RationalTransferFunction};
use crate::plant::rotate;
use std::f64::consts::PI;

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta % two_pi;
    if t <= -PI {
        t += two_pi;
    } else if t > PI {
        t -= two_pi;
    }
    t
}

/// Gains and setpoints of the holistic MMC controller.
#[derive(Debug, Clone, PartialEq)]
pub struct MmcControllerGains {
    /// Energy-to-frequency gain, Hz/J.
    pub k_h: f64,
    /// Derivative shaping gain, rad/Hz.
    pub k_d: f64,
    /// Frequency-to-DC-voltage droop, V/Hz.
    pub k_r: f64,
    /// Virtual resistance, ohm.
    pub r_v: f64,
    /// Virtual-resistance washout time constant, s.
    pub t_v: f64,
    /// DC-voltage loop PI, A/V and A/(V s).
    pub k_p_udc: f64,
    pub k_i_udc: f64,
    /// DC-current loop PI, V/A and V/(A s).
    pub k_p_idc: f64,
    pub k_i_idc: f64,
    /// Resonance compensator in series after the voltage PI.
    pub cmp: RationalTransferFunction,
    /// Frequency setpoint, Hz.
    pub f_star: f64,
    /// Nominal grid frequency defining the common frame, Hz.
    pub f_n: f64,
    /// Midpoint DC-voltage setpoint, V.
    pub u_mid_star: f64,
    /// Stored-energy setpoint, J.
    pub w_t_star: f64,
    /// Half-line resistance used by the midpoint estimator, ohm.
    pub r_dc_half: f64,
}

impl MmcControllerGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_h > 0.0 && self.k_d >= 0.0 && self.t_v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "controller needs k_h > 0, k_d >= 0, t_v > 0; got k_h = {}, k_d = {}, t_v = {}",
                self.k_h, self.k_d, self.t_v
            )));
        }
        if !(self.w_t_star > 0.0 && self.f_star > 0.0 && self.f_n > 0.0) {
            return Err(Error::InvalidInput(
                "controller needs positive w_t_star, f_star, f_n".into(),
            ));
        }
        for pole in self.cmp.poles()? {
            if pole.re >= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "compensator pole at {pole} is not strictly stable"
                )));
            }
        }
        Ok(())
    }
}

/// Terminal measurements consumed by the MMC controller. All values are local.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcMeasurements {
    /// Stored equivalent-capacitor energy, J.
    pub w_t: f64,
    /// AC branch current in the common frame, A peak.
    pub i_s_dq: (f64, f64),
    /// DC terminal voltage, V.
    pub u_dc: f64,
    /// DC terminal current, export-positive, A.
    pub i_dc: f64,
    /// AC voltage amplitude command, V peak.
    pub u_ac_setpoint: f64,
}

impl MmcMeasurements {
    fn is_finite(&self) -> bool {
        self.w_t.is_finite()
            && self.i_s_dq.0.is_finite()
            && self.i_s_dq.1.is_finite()
            && self.u_dc.is_finite()
            && self.i_dc.is_finite()
            && self.u_ac_setpoint.is_finite()
    }
}

/// Actuation produced by one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MmcActuation {
    /// Converter AC voltage command in the controller's own frame, V peak.
    pub u_diff_dq: (f64, f64),
    /// Controller frame angle relative to the common frame, rad.
    pub theta: f64,
    /// Per-arm DC-component voltage command, V (plant uses 2 u_sum0).
    pub u_sum0: f64,
}

/// First-order washout `R_v s/(s + 1/T_v)` per axis. The low-pass state is
/// captured from the first sample so a constant input never produces a kick.
#[derive(Debug, Clone, PartialEq, Default)]
struct VirtualResistanceFilter {
    lp: Option<(f64, f64)>,
}

impl VirtualResistanceFilter {
    fn step(&mut self, i_dq: (f64, f64), r_v: f64, t_v: f64, dt: f64) -> (f64, f64) {
        let lp = self.lp.get_or_insert(i_dq);
        let a = dt / t_v;
        lp.0 = (lp.0 + a * i_dq.0) / (1.0 + a);
        lp.1 = (lp.1 + a * i_dq.1) / (1.0 + a);
        (r_v * (i_dq.0 - lp.0), r_v * (i_dq.1 - lp.1))
    }

    fn preset(&mut self, i_dq: (f64, f64)) {
        self.lp = Some(i_dq);
    }
}

/// Energy-synchronization angle path shared by the MMC and WTG controllers:
/// the frequency deviation is a PD function of the stored-energy error,
/// realized on the angle as PI so that path never computes a derivative:
/// `delta_theta(s)/delta_w(s) = K_H (2 pi + K_D s)/s`.
///
/// The reported frequency does need the energy rate, but an unfiltered
/// difference closes an unstable loop that bypasses the angle: rate ->
/// droop -> DC-voltage PI -> current PI -> submodule voltage -> DC power ->
/// energy. The rate term therefore uses a washout s/(T_f s + 1) with
/// T_f = K_D / DERIV_POLE_RATIO. The angle keeps the full K_D lead (it is
/// produced by the PI realization, not by this signal), so the washout only
/// band-limits the droop injection and the logged frequency; the pole is
/// placed so that loop's gain stays below about 0.2 at every frequency.
#[derive(Debug, Clone, PartialEq, Default)]
struct EnergySynchronizer {
    /// Unwrapped angle relative to the common frame, rad.
    theta: f64,
    prev_dw: Option<f64>,
    /// Low-pass companion state of the washout; captured from the first
    /// sample so presets and constant inputs produce no kick.
    lp_dw: Option<f64>,
    delta_f: f64,
}

/// Washout pole at DERIV_POLE_RATIO / K_D rad/s; with K_D = 2 pi h / omega_N
/// that is 10 omega_N / (2 pi h), e.g. 100 rad/s for h = 5 at 50 Hz.
const DERIV_POLE_RATIO: f64 = 10.0;

impl EnergySynchronizer {
    fn step(&mut self, dw: f64, k_h: f64, k_d: f64, f_star: f64, f_n: f64, dt: f64) {
        let prev = *self.prev_dw.get_or_insert(dw);
        let ddw = dw - prev;
        self.theta += dt * 2.0 * PI * (f_star - f_n) + dt * 2.0 * PI * k_h * dw + k_h * k_d * ddw;
        let rate = if k_d > 0.0 {
            let t_f = k_d / DERIV_POLE_RATIO;
            let lp = self.lp_dw.get_or_insert(dw);
            *lp = (*lp + dt / t_f * dw) / (1.0 + dt / t_f);
            (dw - *lp) / t_f
        } else {
            0.0
        };
        self.delta_f = k_h * dw + k_h * k_d / (2.0 * PI) * rate;
        self.prev_dw = Some(dw);
    }
}

/// Discrete PI with backward-Euler integral.
#[derive(Debug, Clone, PartialEq, Default)]
struct PiState {
    int: f64,
}

impl PiState {
    fn step(&mut self, e: f64, k_p: f64, k_i: f64, dt: f64) -> f64 {
        self.int += k_i * e * dt;
        k_p * e + self.int
    }
}

/// Holistic grid-forming MMC controller.
#[derive(Debug, Clone)]
pub struct MmcController {
    gains: MmcControllerGains,
    sync: EnergySynchronizer,
    vr: VirtualResistanceFilter,
    udc_pi: PiState,
    idc_pi: PiState,
    cmp_block: Option<DiscreteStateSpace>,
    cmp_preset_input: Option<f64>,
    last: MmcActuation,
    fault: bool,
}

impl MmcController {
    pub fn new(gains: MmcControllerGains) -> Result<Self> {
        gains.validate()?;
        Ok(MmcController {
            gains,
            sync: EnergySynchronizer::default(),
            vr: VirtualResistanceFilter::default(),
            udc_pi: PiState::default(),
            idc_pi: PiState::default(),
            cmp_block: None,
            cmp_preset_input: None,
            last: MmcActuation::default(),
            fault: false,
        })
    }

    pub fn gains(&self) -> &MmcControllerGains {
        &self.gains
    }

    #[cfg(test)]
    pub(crate) fn gains_mut(&mut self) -> &mut MmcControllerGains {
        &mut self.gains
    }

    /// Frame angle relative to the common frame, wrapped to (-pi, pi].
    pub fn theta(&self) -> f64 {
        wrap_angle(self.sync.theta)
    }

    /// Latest frequency deviation from nominal, Hz.
    pub fn delta_f(&self) -> f64 {
        self.sync.delta_f
    }

    /// True once a non-finite measurement was seen; actuation holds from then on.
    pub fn faulted(&self) -> bool {
        self.fault
    }

    /// Runtime midpoint-voltage setpoint change (scenario dispatch).
    pub fn set_u_mid_star(&mut self, value: f64) {
        self.gains.u_mid_star = value;
    }

    /// Installs the steady-state solution so the first step produces no
    /// transient: frame angle, stored-energy reference tracking (zero error),
    /// voltage-loop output `i_ref_export0`, current-loop output `u_adj0`
    /// (the steady `u_dc - 2 u_sum0`), and the washout charge state.
    pub fn preset_steady(
        &mut self,
        theta0: f64,
        i_conv_frame: (f64, f64),
        i_ref_export0: f64,
        u_adj0: f64,
    ) {
        self.sync.theta = theta0;
        self.sync.prev_dw = None;
        self.sync.lp_dw = None;
        self.vr.preset(i_conv_frame);
        self.udc_pi.int = i_ref_export0;
        self.cmp_preset_input = Some(i_ref_export0);
        // current loop regulates import current: output is -u_adj of the export view
        self.idc_pi.int = u_adj0;
        if let Some(blk) = self.cmp_block.as_mut() {
            let _ = blk.preset_dc(i_ref_export0);
        }
    }

    pub fn step(&mut self, meas: &MmcMeasurements, dt: f64) -> Result<MmcActuation> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("need dt > 0, got {dt}")));
        }
        if !meas.is_finite() {
            self.fault = true;
            return Ok(self.last);
        }

        // Synchronization: stored-energy error drives the frame angle.
        let dw = meas.w_t - self.gains.w_t_star;
        self.sync.step(
            dw,
            self.gains.k_h,
            self.gains.k_d,
            self.gains.f_star,
            self.gains.f_n,
            dt,
        );
        let theta = self.sync.theta;

        // AC command: setpoint amplitude on the local d-axis minus the
        // virtual-resistance transient term, all in the controller frame.
        let i_local = rotate(meas.i_s_dq.0, meas.i_s_dq.1, -theta);
        let vr = self.vr.step(i_local, self.gains.r_v, self.gains.t_v, dt);
        let u_diff = (meas.u_ac_setpoint - vr.0, -vr.1);

        // DC side: estimate the line midpoint from local quantities, steer it
        // with the droop-shifted reference, close voltage and current loops.
        let u_mid_est = meas.u_dc - self.gains.r_dc_half * meas.i_dc;
        let e_dc = self.gains.u_mid_star + self.gains.k_r * self.sync.delta_f - u_mid_est;
        let i_ref_raw = self
            .udc_pi
            .step(e_dc, self.gains.k_p_udc, self.gains.k_i_udc, dt);

        let cmp_block = match self.cmp_block.as_mut() {
            Some(blk) if blk.dt() == dt => blk,
            _ => {
                let mut blk = DiscreteStateSpace::new(&self.gains.cmp, dt)?;
                if let Some(u0) = self.cmp_preset_input {
                    blk.preset_dc(u0)?;
                }
                self.cmp_block = Some(blk);
                self.cmp_block.as_mut().unwrap()
            }
        };
        let i_ref_export = cmp_block.step(i_ref_raw);

        // Import-positive inner loop per the plant's DC equation.
        let e_i = -i_ref_export - (-meas.i_dc);
        let u_adj = self
            .idc_pi
            .step(e_i, self.gains.k_p_idc, self.gains.k_i_idc, dt);
        let u_sum0 = 0.5 * (meas.u_dc - u_adj);

        self.last = MmcActuation {
            u_diff_dq: u_diff,
            theta,
            u_sum0,
        };
        Ok(self.last)
    }
}

/// Gains and setpoints of the wind-turbine controller.
#[derive(Debug, Clone, PartialEq)]
pub struct WtgControllerGains {
    /// DC-link energy-to-frequency gain, Hz/J.
    pub k_hlink: f64,
    /// Derivative shaping gain, rad/Hz.
    pub k_dlink: f64,
    /// Virtual resistance, ohm.
    pub r_vw: f64,
    /// Washout time constant, s.
    pub t_vw: f64,
    /// Inertial response gain, W s/Hz.
    pub k_hw: f64,
    /// Droop response gain, W/Hz.
    pub k_rw: f64,
    /// Wind dispatch, W.
    pub p_set: f64,
    /// DC-link energy setpoint, J.
    pub w_link_star: f64,
    /// Nominal DC-link voltage used by the RoCoF estimator, V.
    pub u_link_nom: f64,
    /// Frequency setpoint, Hz.
    pub f_star: f64,
    /// Nominal grid frequency defining the common frame, Hz.
    pub f_n: f64,
}

impl WtgControllerGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_hlink > 0.0 && self.k_dlink >= 0.0 && self.t_vw > 0.0) {
            return Err(Error::InvalidInput(format!(
                "controller needs k_hlink > 0, k_dlink >= 0, t_vw > 0; got {}, {}, {}",
                self.k_hlink, self.k_dlink, self.t_vw
            )));
        }
        if !(self.w_link_star > 0.0 && self.u_link_nom > 0.0 && self.f_star > 0.0 && self.f_n > 0.0)
        {
            return Err(Error::InvalidInput(
                "controller needs positive w_link_star, u_link_nom, f_star, f_n".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal measurements consumed by the WTG controller. All values are local.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtgMeasurements {
    /// DC-link energy, J.
    pub w_link: f64,
    /// DC-link voltage, V.
    pub u_link: f64,
    /// Machine-side converter DC current into the link, A.
    pub i_msc: f64,
    /// Grid-side converter DC current out of the link, A.
    pub i_gsc: f64,
    /// GSC branch current in the common frame, A peak.
    pub i_w_dq: (f64, f64),
    /// AC voltage amplitude command, V peak.
    pub u_ac_setpoint: f64,
}

impl WtgMeasurements {
    fn is_finite(&self) -> bool {
        self.w_link.is_finite()
            && self.u_link.is_finite()
            && self.i_msc.is_finite()
            && self.i_gsc.is_finite()
            && self.i_w_dq.0.is_finite()
            && self.i_w_dq.1.is_finite()
            && self.u_ac_setpoint.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WtgActuation {
    /// GSC AC voltage command in the controller's own frame, V peak.
    pub u_gsc_dq: (f64, f64),
    /// Controller frame angle relative to the common frame, rad.
    pub theta: f64,
    /// Machine-side power command, W.
    pub p_msc_cmd: f64,
}

/// Wind-turbine controller: GSC synchronized through the DC-link energy,
/// frequency response injected through the machine-side power command.
#[derive(Debug, Clone)]
pub struct WtgController {
    gains: WtgControllerGains,
    sync: EnergySynchronizer,
    vr: VirtualResistanceFilter,
    rocof_est: f64,
    last: WtgActuation,
    fault: bool,
}

impl WtgController {
    pub fn new(gains: WtgControllerGains) -> Result<Self> {
        gains.validate()?;
        Ok(WtgController {
            gains,
            sync: EnergySynchronizer::default(),
            vr: VirtualResistanceFilter::default(),
            rocof_est: 0.0,
            last: WtgActuation::default(),
            fault: false,
        })
    }

    pub fn gains(&self) -> &WtgControllerGains {
        &self.gains
    }

    pub fn theta(&self) -> f64 {
        wrap_angle(self.sync.theta)
    }

    pub fn delta_f(&self) -> f64 {
        self.sync.delta_f
    }

    /// Latest local RoCoF estimate, Hz/s.
    pub fn rocof_est(&self) -> f64 {
        self.rocof_est
    }

    pub fn faulted(&self) -> bool {
        self.fault
    }

    pub fn preset_steady(&mut self, theta0: f64, i_conv_frame: (f64, f64)) {
        self.sync.theta = theta0;
        self.sync.prev_dw = None;
        self.sync.lp_dw = None;
        self.vr.preset(i_conv_frame);
    }

    /// Runtime dispatch change (scenario wind-power step or setpoint event).
    pub fn set_p_set(&mut self, value: f64) {
        self.gains.p_set = value;
    }

    /// Runtime droop-response gain change, W/Hz.
    pub fn set_k_rw(&mut self, value: f64) {
        self.gains.k_rw = value;
    }

    /// Runtime inertial-response gain change, W s/Hz.
    pub fn set_k_hw(&mut self, value: f64) {
        self.gains.k_hw = value;
    }

    pub fn step(&mut self, meas: &WtgMeasurements, dt: f64) -> Result<WtgActuation> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("need dt > 0, got {dt}")));
        }
        if !meas.is_finite() {
            self.fault = true;
            return Ok(self.last);
        }

        let dw = meas.w_link - self.gains.w_link_star;
        self.sync.step(
            dw,
            self.gains.k_hlink,
            self.gains.k_dlink,
            self.gains.f_star,
            self.gains.f_n,
            dt,
        );
        let theta = self.sync.theta;

        let i_local = rotate(meas.i_w_dq.0, meas.i_w_dq.1, -theta);
        let vr = self.vr.step(i_local, self.gains.r_vw, self.gains.t_vw, dt);
        let u_gsc = (meas.u_ac_setpoint - vr.0, -vr.1);

        // Local RoCoF from the DC-link current mismatch: the frequency deviation
        // is proportional to the link energy, so its rate follows the net charge
        // current without any differentiation.
        self.rocof_est = self.gains.k_hlink * self.gains.u_link_nom * (meas.i_msc - meas.i_gsc);

        // Under-frequency (negative deviation, negative rocof) raises the command.
        let p_fr = -(self.gains.k_hw * self.rocof_est + self.gains.k_rw * self.sync.delta_f);
        let p_msc_cmd = self.gains.p_set + p_fr;

        self.last = WtgActuation {
            u_gsc_dq: u_gsc,
            theta,
            p_msc_cmd,
        };
        Ok(self.last)
    }
}

/// Where a consumed signal physically originates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalOrigin {
    /// Measured at the converter's own terminal.
    LocalTerminal,
    /// Produced at another terminal; consuming it would require communication.
    RemoteTerminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalDependency {
    pub name: &'static str,
    pub origin: SignalOrigin,
}

/// A controller that can enumerate every measurement it consumes.
pub trait AuditableController {
    fn controller_name(&self) -> &str;
    fn signal_dependencies(&self) -> Vec<SignalDependency>;
}

impl AuditableController for MmcController {
    fn controller_name(&self) -> &str {
        "mmc"
    }

    fn signal_dependencies(&self) -> Vec<SignalDependency> {
        use SignalOrigin::LocalTerminal;
        vec![
            SignalDependency { name: "w_t", origin: LocalTerminal },
            SignalDependency { name: "i_s_dq", origin: LocalTerminal },
            SignalDependency { name: "u_dc", origin: LocalTerminal },
            SignalDependency { name: "i_dc", origin: LocalTerminal },
            SignalDependency { name: "u_ac_setpoint", origin: LocalTerminal },
        ]
    }
}

impl AuditableController for WtgController {
    fn controller_name(&self) -> &str {
        "wtg"
    }

    fn signal_dependencies(&self) -> Vec<SignalDependency> {
        use SignalOrigin::LocalTerminal;
        vec![
            SignalDependency { name: "w_link", origin: LocalTerminal },
            SignalDependency { name: "u_link", origin: LocalTerminal },
            SignalDependency { name: "i_msc", origin: LocalTerminal },
            SignalDependency { name: "i_gsc", origin: LocalTerminal },
            SignalDependency { name: "i_w_dq", origin: LocalTerminal },
            SignalDependency { name: "u_ac_setpoint", origin: LocalTerminal },
        ]
    }
}

/// Audit fixture: a controller wired to the onshore frequency, which no
/// offshore device can measure locally. Exists to prove the audit rejects
/// remote dependencies; never used by the simulation.
#[derive(Debug, Default)]
pub struct RemoteCoupledProbe;

impl AuditableController for RemoteCoupledProbe {
    fn controller_name(&self) -> &str {
        "remote-coupled probe"
    }

    fn signal_dependencies(&self) -> Vec<SignalDependency> {
        vec![
            SignalDependency {
                name: "w_link",
                origin: SignalOrigin::LocalTerminal,
            },
            SignalDependency {
                name: "f_onshore",
                origin: SignalOrigin::RemoteTerminal,
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalityReport {
    pub controller: String,
    pub signals: Vec<String>,
}

/// Verifies that a controller consumes local-terminal signals only.
pub fn locality_audit(controller: &dyn AuditableController) -> Result<LocalityReport> {
    let deps = controller.signal_dependencies();
    let remote: Vec<String> = deps
        .iter()
        .filter(|d| d.origin == SignalOrigin::RemoteTerminal)
        .map(|d| d.name.to_string())
        .collect();
    if !remote.is_empty() {
        return Err(Error::LocalityViolation {
            controller: controller.controller_name().to_string(),
            signals: remote,
        });
    }
    Ok(LocalityReport {
        controller: controller.controller_name().to_string(),
        signals: deps.iter().map(|d| d.name.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_gains() -> MmcControllerGains {
        MmcControllerGains {
            k_h: 4.34e-7,
            k_d: 0.1,
            k_r: 3.84e4,
            r_v: 27.2,
            t_v: 0.021,
            k_p_udc: 0.024,
            k_i_udc: 6.0,
            k_p_idc: 130.0,
            k_i_idc: 2048.0,
            cmp: RationalTransferFunction::from_coeffs(
                vec![16.0, 2.1e-4, 3.4992e-6],
                vec![16.0, 32.0e-4, 16.0e-8],
            )
            .unwrap(),
            f_star: 50.0,
            f_n: 50.0,
            u_mid_star: 640e3,
            w_t_star: 4.096e7,
            r_dc_half: 4.375 / 2.0,
        }
    }

    fn steady_meas(g: &MmcControllerGains) -> MmcMeasurements {
        MmcMeasurements {
            w_t: g.w_t_star,
            i_s_dq: (0.0, 0.0),
            u_dc: 640e3,
            i_dc: 0.0,
            u_ac_setpoint: 326_598.0,
        }
    }

    #[test]
    fn equilibrium_holds_with_zero_integrators() {
        let g = test_gains();
        let mut c = MmcController::new(g.clone()).unwrap();
        let meas = MmcMeasurements {
            u_dc: g.u_mid_star, // zero current: terminal equals midpoint
            ..steady_meas(&g)
        };
        let dt = 50e-6;
        let act = c.step(&meas, dt).unwrap();
        assert!((act.theta - 0.0).abs() < 1e-15); // f_star == f_n: no drift
        assert!(c.delta_f().abs() < 1e-15);
        assert!((act.u_sum0 - g.u_mid_star / 2.0).abs() < 1e-9);
        assert!((act.u_diff_dq.0 - meas.u_ac_setpoint).abs() < 1e-9);
        assert!(act.u_diff_dq.1.abs() < 1e-12);
    }

    #[test]
    fn constant_energy_error_integrates_linearly_without_kd() {
        let mut g = test_gains();
        g.k_d = 0.0;
        let k_h = g.k_h;
        let w_err = 1e5;
        let mut c = MmcController::new(g.clone()).unwrap();
        let meas = MmcMeasurements {
            w_t: g.w_t_star + w_err,
            ..steady_meas(&g)
        };
        let dt = 50e-6;
        let steps = 2000;
        for _ in 0..steps {
            c.step(&meas, dt).unwrap();
        }
        let t = steps as f64 * dt;
        let expected = 2.0 * PI * k_h * w_err * t;
        assert!(
            (c.theta() - expected).abs() < 1e-9 * expected.abs(),
            "theta {} vs {expected}",
            c.theta()
        );
    }

    #[test]
    fn angle_path_matches_continuous_transfer_function() {
        // Drive stored energy sinusoidally and demodulate the angle response;
        // compare with K_H (2 pi + K_D s)/s on the imaginary axis.
        let g = test_gains();
        let dt = 50e-6;
        for &omega in &[1.0f64, 5.0, 31.4] {
            let mut c = MmcController::new(g.clone()).unwrap();
            let period = 2.0 * PI / omega;
            let settle_steps = (2.0 * period / dt) as usize;
            let demod_steps = (10.0 * period / dt) as usize;
            let amp = 1e4;
            let mut acc_sin = 0.0;
            let mut acc_cos = 0.0;
            let mut k_total = 0usize;
            for k in 0..(settle_steps + demod_steps) {
                let t = k as f64 * dt;
                let meas = MmcMeasurements {
                    w_t: g.w_t_star + amp * (omega * t).sin(),
                    ..steady_meas(&g)
                };
                c.step(&meas, dt).unwrap();
                if k >= settle_steps {
                    let theta = c.theta();
                    acc_sin += theta * (omega * t).sin() * dt;
                    acc_cos += theta * (omega * t).cos() * dt;
                    k_total += 1;
                }
            }
            let t_window = k_total as f64 * dt;
            // theta(t) = re sin(wt) + im cos(wt) corresponds to response re + j im
            let re = 2.0 * acc_sin / t_window;
            let im = 2.0 * acc_cos / t_window;
            let measured = num_complex::Complex64::new(re, im) / amp;
            let s = num_complex::Complex64::new(0.0, omega);
            let expected = g.k_h * (2.0 * PI + g.k_d * s) / s;
            let mag_err = (measured.norm() - expected.norm()).abs() / expected.norm();
            let phase_err = (measured.arg() - expected.arg()).abs().to_degrees();
            assert!(
                mag_err < 0.01,
                "omega {omega}: magnitude error {mag_err:.4}"
            );
            assert!(phase_err < 1.0, "omega {omega}: phase error {phase_err:.3} deg");
        }
    }

    #[test]
    fn washout_ignores_constant_current() {
        let g = test_gains();
        let mut c = MmcController::new(g.clone()).unwrap();
        let meas = MmcMeasurements {
            i_s_dq: (1200.0, -300.0),
            ..steady_meas(&g)
        };
        let dt = 50e-6;
        let steps = (10.0 * g.t_v / dt) as usize;
        let mut act = MmcActuation::default();
        for _ in 0..steps {
            act = c.step(&meas, dt).unwrap();
        }
        // theta stays 0 here (w_t at setpoint), so the local current is constant
        assert!((act.u_diff_dq.0 - meas.u_ac_setpoint).abs() < 1e-9);
        assert!(act.u_diff_dq.1.abs() < 1e-9);
    }

    #[test]
    fn nan_measurement_freezes_actuation() {
        let g = test_gains();
        let mut c = MmcController::new(g.clone()).unwrap();
        let good = steady_meas(&g);
        let dt = 50e-6;
        let before = c.step(&good, dt).unwrap();
        let bad = MmcMeasurements {
            w_t: f64::NAN,
            ..good
        };
        let held = c.step(&bad, dt).unwrap();
        assert!(c.faulted());
        assert_eq!(before, held);
    }

    #[test]
    fn controller_stepping_is_deterministic() {
        let g = test_gains();
        let run = || {
            let mut c = MmcController::new(g.clone()).unwrap();
            let dt = 50e-6;
            let mut outs = Vec::new();
            for k in 0..500 {
                let t = k as f64 * dt;
                let meas = MmcMeasurements {
                    w_t: g.w_t_star + 1e4 * (3.0 * t).sin(),
                    i_s_dq: (100.0 * t.cos(), 50.0 * t.sin()),
                    u_dc: 640e3 + 100.0 * (7.0 * t).sin(),
                    i_dc: 20.0 * t.sin(),
                    u_ac_setpoint: 326_598.0,
                };
                outs.push(c.step(&meas, dt).unwrap());
            }
            outs
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn unstable_compensator_rejected() {
        let mut g = test_gains();
        // pole in the right half plane
        g.cmp = RationalTransferFunction::from_coeffs(vec![1.0], vec![-1.0, 1.0]).unwrap();
        assert!(MmcController::new(g).is_err());
    }

    fn wtg_gains() -> WtgControllerGains {
        WtgControllerGains {
            k_hlink: 8.355e-8,
            k_dlink: 0.3,
            r_vw: 24.0,
            t_vw: 0.015,
            k_hw: 8e7,
            k_rw: 4e8,
            p_set: 800e6,
            w_link_star: 4.504e7,
            u_link_nom: 132e3,
            f_star: 50.0,
            f_n: 50.0,
        }
    }

    #[test]
    fn balanced_link_currents_give_zero_rocof() {
        let g = wtg_gains();
        let mut c = WtgController::new(g.clone()).unwrap();
        let meas = WtgMeasurements {
            w_link: g.w_link_star,
            u_link: g.u_link_nom,
            i_msc: 500.0,
            i_gsc: 500.0,
            i_w_dq: (0.0, 0.0),
            u_ac_setpoint: 150e3,
        };
        c.step(&meas, 50e-6).unwrap();
        assert_eq!(c.rocof_est(), 0.0);
    }

    #[test]
    fn droop_raises_power_under_low_frequency() {
        // Steady -0.2 Hz with 4e8 W/Hz droop must command +80 MW.
        let mut g = wtg_gains();
        g.k_hw = 0.0;
        g.k_dlink = 0.0;
        // pick the energy error that makes delta_f exactly -0.2 Hz
        let df_target = -0.2;
        let dw = df_target / g.k_hlink;
        let mut c = WtgController::new(g.clone()).unwrap();
        let meas = WtgMeasurements {
            w_link: g.w_link_star + dw,
            u_link: g.u_link_nom,
            i_msc: 0.0,
            i_gsc: 0.0,
            i_w_dq: (0.0, 0.0),
            u_ac_setpoint: 150e3,
        };
        let act = c.step(&meas, 50e-6).unwrap();
        assert!((c.delta_f() - df_target).abs() < 1e-12);
        let p_fr = act.p_msc_cmd - g.p_set;
        assert!(
            (p_fr - 80e6).abs() < 1e-3 * 80e6,
            "p_fr = {p_fr}"
        );
    }

    #[test]
    fn rocof_estimate_tracks_link_voltage_slope() {
        // Feed consistent currents: net current charges the link, and the
        // estimate must equal K_Hlink * C * U * dU/dt computed from the log.
        let g = wtg_gains();
        let c_link = 5.17e-3;
        let mut c = WtgController::new(g.clone()).unwrap();
        let dt = 50e-6;
        let mut u_link = g.u_link_nom;
        let mut w_link = 0.5 * c_link * u_link * u_link;
        let i_msc = 150.0;
        let i_gsc = 100.0;
        let mut est = 0.0;
        let mut du_dt = 0.0;
        for _ in 0..2000 {
            let meas = WtgMeasurements {
                w_link,
                u_link,
                i_msc,
                i_gsc,
                i_w_dq: (0.0, 0.0),
                u_ac_setpoint: 150e3,
            };
            c.step(&meas, dt).unwrap();
            est = c.rocof_est();
            // plant side: net DC current into the capacitor
            du_dt = (i_msc - i_gsc) / c_link;
            u_link += du_dt * dt;
            w_link = 0.5 * c_link * u_link * u_link;
        }
        let reference = g.k_hlink * c_link * u_link * du_dt;
        assert!(
            (est - reference).abs() < 0.01 * reference.abs(),
            "estimate {est}, reference {reference}"
        );
    }

    #[test]
    fn audit_passes_shipped_controllers_and_rejects_probe() {
        let mmc = MmcController::new(test_gains()).unwrap();
        let wtg = WtgController::new(wtg_gains()).unwrap();
        let r1 = locality_audit(&mmc).unwrap();
        assert_eq!(r1.signals.len(), 5);
        let r2 = locality_audit(&wtg).unwrap();
        assert_eq!(r2.signals.len(), 6);
        match locality_audit(&RemoteCoupledProbe) {
            Err(Error::LocalityViolation { signals, .. }) => {
                assert_eq!(signals, vec!["f_onshore".to_string()]);
            }
            other => panic!("expected locality violation, got {other:?}"),
        }
    }

    #[test]
    fn angle_wrap_has_half_open_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-9);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }
}
