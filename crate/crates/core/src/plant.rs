//! Continuous-time dq-frame models of the physical components: Thévenin grids,
//! the onshore equivalent machine, the two MMC terminals, the aggregated wind
//! turbine, and the two-pi-section HVDC line.
//!
//! All quantities are SI (volts, amperes, henries, ohms, farads, watts, joules,
//! radians). Voltages and currents are peak dq components in a common frame
//! rotating at the electrical speed `omega` passed to each derivative; converter
//! commands given in a local frame are rotated by the local angle first.
//! Three-phase power is amplitude-invariant: `P = 3/2 (u_d i_d + u_q i_q)`.
//!
//! Sign conventions, fixed here once:
//! - branch currents flow from the named source toward the named remote end
//! - MMC DC current `i_dc` is positive flowing from the line into the converter
//! - stored-energy derivatives are `P_in - P_out` with both powers flow-signed

use crate::error::{Error, Result};

/// Rotates local dq components into the common frame (`theta` = local frame angle).
pub fn rotate(d: f64, q: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (d * c - q * s, d * s + q * c)
}

/// Amplitude-invariant three-phase active power from peak dq components.
pub fn ac_power(u: (f64, f64), i: (f64, f64)) -> f64 {
    1.5 * (u.0 * i.0 + u.1 * i.1)
}

/// Capacitor voltage equivalent of a stored energy `w` on capacitance `c`.
pub fn voltage_from_energy(w: f64, c: f64) -> f64 {
    (2.0 * w / c).sqrt()
}

/// Stored energy of capacitance `c` charged to voltage `u`.
pub fn energy_from_voltage(u: f64, c: f64) -> f64 {
    0.5 * c * u * u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencySource {
    /// Source angle advances at the nominal frequency.
    FixedNominal,
    /// Source angle is the machine rotor angle.
    Machine,
}

/// Thévenin equivalent behind a converter terminal. The branch impedance is
/// folded into the converter's series parameters at assembly time; this struct
/// carries the source itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninGrid {
    /// Source amplitude, V peak.
    pub u_th: f64,
    pub r_th: f64,
    pub l_th: f64,
    pub frequency_source: FrequencySource,
}

/// Aggregated synchronous machine with a first-order governor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncMachineParams {
    /// Inertia constant, s.
    pub h: f64,
    /// Speed droop, p.u. (0.05 = 5%).
    pub droop: f64,
    /// Governor time constant, s.
    pub t_gov: f64,
    /// Machine rating, VA.
    pub s_base: f64,
    /// Nominal frequency, Hz.
    pub f_n: f64,
    /// Dispatch setpoint, W.
    pub p_set: f64,
}

impl SyncMachineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.droop > 0.0 && self.droop <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "machine needs h > 0 and droop in (0, 1], got h = {}, droop = {}",
                self.h, self.droop
            )));
        }
        if !(self.t_gov > 0.0 && self.s_base > 0.0 && self.f_n > 0.0) {
            return Err(Error::InvalidInput(
                "machine needs positive t_gov, s_base, f_n".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncMachineState {
    /// Rotor electrical angle relative to the common frame, rad.
    pub delta: f64,
    /// Rotor speed, p.u. of nominal.
    pub omega_pu: f64,
    /// Mechanical power, W.
    pub p_m: f64,
}

/// Swing equation with first-order governor.
///
/// Returns `(d delta/dt, d omega_pu/dt, d p_m/dt)`. `p_e` is the electrical
/// power drawn from the machine, W. The angle state is kept relative to the
/// common synchronous frame, so it is constant at nominal speed.
pub fn sync_machine_derivative(
    params: &SyncMachineParams,
    state: &SyncMachineState,
    p_e: f64,
) -> (f64, f64, f64) {
    let omega_n = 2.0 * std::f64::consts::PI * params.f_n;
    let d_delta = (state.omega_pu - 1.0) * omega_n;
    let d_omega = (state.p_m - p_e) / (2.0 * params.h * params.s_base);
    let p_gov = params.p_set - (state.omega_pu - 1.0) * params.s_base / params.droop;
    let d_pm = (p_gov - state.p_m) / params.t_gov;
    (d_delta, d_omega, d_pm)
}

/// MMC electrical parameters. The AC series values are the converter's own
/// (transformer plus arm equivalents) with the local Thévenin branch folded in
/// by the system assembly, so the derivative sees one series R-L to the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcParams {
    /// Total AC-side series resistance, ohm.
    pub r_s: f64,
    /// Total AC-side series inductance, H.
    pub l_s: f64,
    /// DC-side series resistance, ohm.
    pub r_d: f64,
    /// DC-side series inductance, H.
    pub l_d: f64,
    /// Equivalent submodule capacitance, F.
    pub c_eq: f64,
    /// Nominal equivalent-capacitor voltage, V.
    pub u_eq_nom: f64,
}

impl MmcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_s >= 0.0
            && self.l_s > 0.0
            && self.r_d >= 0.0
            && self.l_d > 0.0
            && self.c_eq > 0.0
            && self.u_eq_nom > 0.0)
        {
            return Err(Error::InvalidInput(
                "MMC needs nonnegative resistances and positive l_s, l_d, c_eq, u_eq_nom".into(),
            ));
        }
        Ok(())
    }

    /// Nominal stored energy of the equivalent capacitor, J.
    pub fn w_t_nom(&self) -> f64 {
        energy_from_voltage(self.u_eq_nom, self.c_eq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcState {
    /// AC branch current in the common frame, A peak (positive toward the grid).
    pub i_s_d: f64,
    pub i_s_q: f64,
    /// DC terminal current, A (positive from the line into the converter).
    pub i_dc: f64,
    /// Equivalent-capacitor energy, J.
    pub w_t: f64,
}

/// AC branch dynamics of an MMC in the common frame:
///
/// `L_s di/dt = u_diff - u_grid - R_s i - j omega L_s i`
///
/// `u_diff_dq` is the converter voltage command in its own frame at angle
/// `theta_diff`; the Thévenin source has amplitude `u_th` at angle `theta_th`.
pub fn mmc_ac_derivative(
    params: &MmcParams,
    state: &MmcState,
    u_diff_dq: (f64, f64),
    theta_diff: f64,
    u_th: f64,
    theta_th: f64,
    omega: f64,
) -> (f64, f64) {
    let u = rotate(u_diff_dq.0, u_diff_dq.1, theta_diff);
    let e = rotate(u_th, 0.0, theta_th);
    branch_derivative(
        params.r_s,
        params.l_s,
        (state.i_s_d, state.i_s_q),
        u,
        e,
        omega,
    )
}

/// Series R-L branch in a frame rotating at `omega`, current flowing from
/// `u_src` toward `u_dst`.
pub fn branch_derivative(
    r: f64,
    l: f64,
    i: (f64, f64),
    u_src: (f64, f64),
    u_dst: (f64, f64),
    omega: f64,
) -> (f64, f64) {
    let di_d = (u_src.0 - u_dst.0 - r * i.0 + omega * l * i.1) / l;
    let di_q = (u_src.1 - u_dst.1 - r * i.1 - omega * l * i.0) / l;
    (di_d, di_q)
}

/// DC terminal dynamics: `L_d di_dc/dt = -2 u_sum0 + u_dc_terminal - R_d i_dc`,
/// with `i_dc` positive from the line into the converter.
pub fn mmc_dc_derivative(
    params: &MmcParams,
    state: &MmcState,
    u_sum0_cmd: f64,
    u_dc_terminal: f64,
) -> f64 {
    (-2.0 * u_sum0_cmd + u_dc_terminal - params.r_d * state.i_dc) / params.l_d
}

/// Stored-energy balance of the equivalent capacitor: `dW_t/dt = p_dc - p_ac`.
pub fn mmc_energy_derivative(p_dc: f64, p_ac: f64) -> f64 {
    p_dc - p_ac
}

/// Aggregated type-4 wind turbine: grid-side converter filter plus collector
/// branch (folded totals through to the offshore MMC terminal), DC-link
/// capacitor, and a first-order machine-side power lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtgParams {
    /// GSC filter resistance, ohm.
    pub r_gsc: f64,
    /// GSC filter inductance, H.
    pub l_gsc: f64,
    /// Collector network resistance up to the remote terminal, ohm.
    pub r_thw: f64,
    /// Collector network inductance up to the remote terminal, H.
    pub l_thw: f64,
    /// DC-link capacitance, F.
    pub c_link: f64,
    /// Nominal DC-link voltage, V.
    pub u_link_nom: f64,
    /// Machine-side converter lag, s.
    pub t_msc: f64,
}

impl WtgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_gsc >= 0.0
            && self.l_gsc > 0.0
            && self.r_thw >= 0.0
            && self.l_thw >= 0.0
            && self.c_link > 0.0
            && self.u_link_nom > 0.0
            && self.t_msc > 0.0)
        {
            return Err(Error::InvalidInput(
                "WTG needs positive l_gsc, c_link, u_link_nom, t_msc".into(),
            ));
        }
        Ok(())
    }

    pub fn r_total(&self) -> f64 {
        self.r_gsc + self.r_thw
    }

    pub fn l_total(&self) -> f64 {
        self.l_gsc + self.l_thw
    }

    /// Nominal DC-link stored energy, J.
    pub fn w_link_nom(&self) -> f64 {
        energy_from_voltage(self.u_link_nom, self.c_link)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtgState {
    /// GSC branch current in the common frame, A peak (positive toward the remote end).
    pub i_w_d: f64,
    pub i_w_q: f64,
    /// DC-link energy, J.
    pub w_link: f64,
    /// Machine-side power actually delivered, W.
    pub p_msc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtgDerivative {
    pub di_w_d: f64,
    pub di_w_q: f64,
    pub dw_link: f64,
    pub dp_msc: f64,
}

/// Wind-turbine dynamics. The GSC commands `u_gsc_dq` in its frame at
/// `theta_gsc`; the remote terminal (offshore MMC) holds amplitude `u_thw` at
/// `theta_thw`. `dW_link/dt = p_msc - p_gsc` with `p_gsc` the power leaving the
/// GSC into the branch.
pub fn wtg_derivative(
    params: &WtgParams,
    state: &WtgState,
    u_gsc_dq: (f64, f64),
    theta_gsc: f64,
    u_thw: f64,
    theta_thw: f64,
    omega: f64,
    p_msc_cmd: f64,
) -> WtgDerivative {
    let u = rotate(u_gsc_dq.0, u_gsc_dq.1, theta_gsc);
    let e = rotate(u_thw, 0.0, theta_thw);
    let i = (state.i_w_d, state.i_w_q);
    let (di_d, di_q) = branch_derivative(params.r_total(), params.l_total(), i, u, e, omega);
    let p_gsc = ac_power(u, i);
    WtgDerivative {
        di_w_d: di_d,
        di_w_q: di_q,
        dw_link: state.p_msc - p_gsc,
        dp_msc: (p_msc_cmd - state.p_msc) / params.t_msc,
    }
}

/// HVDC line lumped as two pi-sections. `r_dc`, `l_dc`, `c_dc` are whole-line
/// totals; each section carries half the series impedance, and the shunt
/// capacitance splits C/4 - C/2 - C/4 across the three nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvdcLineParams {
    pub r_dc: f64,
    pub l_dc: f64,
    pub c_dc: f64,
}

impl HvdcLineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_dc > 0.0 && self.l_dc > 0.0 && self.c_dc > 0.0) {
            return Err(Error::InvalidInput(
                "HVDC line needs positive r_dc, l_dc, c_dc".into(),
            ));
        }
        Ok(())
    }

    /// Angular frequency of the symmetric end-to-end resonant mode, rad/s.
    pub fn symmetric_mode_rad_s(&self) -> f64 {
        (16.0 / (self.c_dc * self.l_dc)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvdcLineState {
    pub u_dc_on: f64,
    pub u_mid: f64,
    pub u_dc_off: f64,
    /// Section current, onshore node toward midpoint, A.
    pub i_sec1: f64,
    /// Section current, midpoint toward offshore node, A.
    pub i_sec2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvdcLineDerivative {
    pub du_dc_on: f64,
    pub du_mid: f64,
    pub du_dc_off: f64,
    pub di_sec1: f64,
    pub di_sec2: f64,
}

/// Line node and section dynamics. Injections are currents flowing into the
/// respective end node from the attached converter.
pub fn hvdc_line_derivative(
    params: &HvdcLineParams,
    state: &HvdcLineState,
    i_inject_on: f64,
    i_inject_off: f64,
) -> HvdcLineDerivative {
    let c_end = params.c_dc / 4.0;
    let c_mid = params.c_dc / 2.0;
    let r_half = params.r_dc / 2.0;
    let l_half = params.l_dc / 2.0;
    HvdcLineDerivative {
        du_dc_on: (i_inject_on - state.i_sec1) / c_end,
        di_sec1: (state.u_dc_on - state.u_mid - r_half * state.i_sec1) / l_half,
        du_mid: (state.i_sec1 - state.i_sec2) / c_mid,
        di_sec2: (state.u_mid - state.u_dc_off - r_half * state.i_sec2) / l_half,
        du_dc_off: (state.i_sec2 + i_inject_off) / c_end,
    }
}

/// Total charge stored on the three line capacitances, C.
pub fn hvdc_line_charge(params: &HvdcLineParams, state: &HvdcLineState) -> f64 {
    params.c_dc / 4.0 * (state.u_dc_on + state.u_dc_off) + params.c_dc / 2.0 * state.u_mid
}

/// Total energy stored in the line capacitances and inductances, J.
pub fn hvdc_line_energy(params: &HvdcLineParams, state: &HvdcLineState) -> f64 {
    energy_from_voltage(state.u_dc_on, params.c_dc / 4.0)
        + energy_from_voltage(state.u_mid, params.c_dc / 2.0)
        + energy_from_voltage(state.u_dc_off, params.c_dc / 4.0)
        + 0.5 * params.l_dc / 2.0 * (state.i_sec1 * state.i_sec1 + state.i_sec2 * state.i_sec2)
}
