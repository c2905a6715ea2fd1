//! Fixed-step time-domain engine for the two-terminal benchmark: swing-equation
//! machine, two grid-forming MMCs coupled by the HVDC line, and the aggregated
//! wind turbine behind the offshore terminal.
//!
//! Integration is Heun (trapezoidal predictor-corrector) at the scenario step
//! (50 us default), the same scheme for every plant state, with the discrete
//! controllers stepped once per dt under zero-order hold. A first-order Euler
//! variant exists for convergence cross-checks at reduced dt; at 50 us its
//! artificial negative damping exceeds the DC line resonance's natural damping
//! and the run diverges, so it is not the default.
//!
//! Sign conventions by channel:
//! - `I_dc_on` is the onshore DC terminal current, positive importing from the
//!   line; `I_dc_off` is the offshore terminal current, positive exporting into
//!   the line. Normal flow makes both positive.
//! - `P_ac_on` leaves the onshore MMC into its AC branch; `P_ac_off` enters the
//!   offshore MMC from its branch; `P_dc_on` enters the onshore stored-energy
//!   capacitor from the DC side; `P_dc_off` leaves the offshore capacitor
//!   toward the line; `P_gsc` leaves the wind turbine's grid-side converter;
//!   `P_msc` enters the turbine DC link from the machine side.
//! - With those orientations the stored energies obey
//!   `dW_t_on = P_dc_on - P_ac_on`, `dW_t_off = P_ac_off - P_dc_off`,
//!   `dW_link = P_msc - P_gsc`, which is what the invariant checker integrates.
//!   Power channels are logged as the integrator's per-step average so those
//!   books close; states and frequencies are sampled at the step boundary.

use crate::acpower::{operating_point, solve_delta_for_power, AcLinkParameters, PerUnitBase};
use crate::config::{Config, Converter, EventKind, ScenarioConfig};
use crate::control::{
    MmcActuation, MmcController, MmcControllerGains, MmcMeasurements, WtgActuation,
    WtgController, WtgControllerGains, WtgMeasurements,
};
use crate::error::{Error, Result};
use crate::linsys::TimeSeries;
use crate::plant::{
    ac_power, branch_derivative, hvdc_line_derivative, mmc_ac_derivative, mmc_dc_derivative,
    mmc_energy_derivative, rotate, sync_machine_derivative, voltage_from_energy, HvdcLineParams,
    HvdcLineState, MmcParams, MmcState, SyncMachineParams, SyncMachineState, WtgParams,
};
use crate::tuning::{tune_mmc, tune_wtg, MmcTerminal};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Everything the engine needs, in SI, assembled from a configuration.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub base: PerUnitBase,
    pub machine: SyncMachineParams,
    /// Machine EMF amplitude, V peak.
    pub u_th: f64,
    /// Initial onshore load, W.
    pub p_load: f64,
    pub mmc_on: MmcParams,
    /// Offshore MMC with the whole series chain to the GSC folded into `l_s`.
    pub mmc_off: MmcParams,
    pub wtg: WtgParams,
    pub line: HvdcLineParams,
    pub gains_on: MmcControllerGains,
    pub gains_off: MmcControllerGains,
    pub gains_wtg: WtgControllerGains,
    /// AC amplitude commands, V peak.
    pub u_set_on: f64,
    pub u_set_off: f64,
    pub u_set_wtg: f64,
    pub f_n: f64,
    /// Per-unit link parameters for steady-state phasor solves.
    pub link_on_pu: AcLinkParameters,
    pub link_off_pu: AcLinkParameters,
}

/// Controller gain sets for all three converters.
#[derive(Debug, Clone)]
pub struct GainSet {
    pub mmc_on: MmcControllerGains,
    pub mmc_off: MmcControllerGains,
    pub wtg: WtgControllerGains,
}

/// Gains from the config's explicit `[gains]` section when present, otherwise
/// from the tuning pipeline at the configured ratios and operating point.
pub fn build_gain_set(cfg: &Config) -> Result<GainSet> {
    if let Some(g) = &cfg.gains {
        return Ok(GainSet {
            mmc_on: g.mmc_on.to_gains()?,
            mmc_off: g.mmc_off.to_gains()?,
            wtg: g.wtg.to_gains(),
        });
    }
    let on = tune_mmc(
        &cfg.tuning_inputs(Converter::MmcOnshore)?,
        MmcTerminal::Onshore,
        &cfg.gpac_si(Converter::MmcOnshore)?,
        &cfg.mmc_setpoints(MmcTerminal::Onshore)?,
    )?;
    let off = tune_mmc(
        &cfg.tuning_inputs(Converter::MmcOffshore)?,
        MmcTerminal::Offshore,
        &cfg.gpac_si(Converter::MmcOffshore)?,
        &cfg.mmc_setpoints(MmcTerminal::Offshore)?,
    )?;
    let wtg = tune_wtg(
        &cfg.tuning_inputs(Converter::Wtg)?,
        &cfg.gpac_si(Converter::Wtg)?,
        &cfg.wtg_setpoints(),
    )?;
    Ok(GainSet {
        mmc_on: on.gains,
        mmc_off: off.gains,
        wtg: wtg.gains,
    })
}

impl SystemModel {
    pub fn from_config(cfg: &Config) -> Result<SystemModel> {
        let gains = build_gain_set(cfg)?;
        let base = cfg.base()?;
        Ok(SystemModel {
            machine: cfg.machine_params()?,
            u_th: cfg.system.onshore.u_th * base.u_b,
            p_load: cfg.system.onshore.p_load,
            mmc_on: cfg.mmc_params(MmcTerminal::Onshore)?,
            mmc_off: cfg.mmc_params(MmcTerminal::Offshore)?,
            wtg: cfg.wtg_params()?,
            line: cfg.hvdc_line_params(),
            gains_on: gains.mmc_on,
            gains_off: gains.mmc_off,
            gains_wtg: gains.wtg,
            u_set_on: cfg.system.mmc_on.u_ac_set * base.u_b,
            u_set_off: cfg.system.mmc_off.u_ac_set * base.u_b,
            u_set_wtg: cfg.system.owpp.u_ac_set * base.u_b,
            f_n: cfg.system.f_n,
            link_on_pu: cfg.ac_link(Converter::MmcOnshore)?,
            link_off_pu: cfg.ac_link(Converter::Wtg)?,
            base,
        })
    }
}

/// The 18 plant states. The offshore AC network is one series path, so a single
/// branch current serves both the wind turbine's GSC and the offshore MMC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub machine: SyncMachineState,
    /// Onshore MMC: branch current toward the machine, DC import current,
    /// stored energy.
    pub mmc_on: MmcState,
    /// Offshore MMC: branch current oriented GSC -> MMC, DC import current
    /// (negative in normal export), stored energy.
    pub mmc_off: MmcState,
    pub line: HvdcLineState,
    /// Turbine DC-link energy and machine-side power lag state.
    pub w_link: f64,
    pub p_msc: f64,
}

impl SimState {
    fn zero() -> SimState {
        SimState {
            machine: SyncMachineState {
                delta: 0.0,
                omega_pu: 1.0,
                p_m: 0.0,
            },
            mmc_on: MmcState {
                i_s_d: 0.0,
                i_s_q: 0.0,
                i_dc: 0.0,
                w_t: 0.0,
            },
            mmc_off: MmcState {
                i_s_d: 0.0,
                i_s_q: 0.0,
                i_dc: 0.0,
                w_t: 0.0,
            },
            line: HvdcLineState {
                u_dc_on: 0.0,
                u_mid: 0.0,
                u_dc_off: 0.0,
                i_sec1: 0.0,
                i_sec2: 0.0,
            },
            w_link: 0.0,
            p_msc: 0.0,
        }
    }

    fn as_array(&self) -> [f64; 18] {
        [
            self.machine.delta,
            self.machine.omega_pu,
            self.machine.p_m,
            self.mmc_on.i_s_d,
            self.mmc_on.i_s_q,
            self.mmc_on.i_dc,
            self.mmc_on.w_t,
            self.mmc_off.i_s_d,
            self.mmc_off.i_s_q,
            self.mmc_off.i_dc,
            self.mmc_off.w_t,
            self.line.u_dc_on,
            self.line.u_mid,
            self.line.u_dc_off,
            self.line.i_sec1,
            self.line.i_sec2,
            self.w_link,
            self.p_msc,
        ]
    }
}

const STATE_NAMES: [&str; 18] = [
    "machine.delta",
    "machine.omega_pu",
    "machine.p_m",
    "mmc_on.i_s_d",
    "mmc_on.i_s_q",
    "mmc_on.i_dc",
    "mmc_on.w_t",
    "mmc_off.i_s_d",
    "mmc_off.i_s_q",
    "mmc_off.i_dc",
    "mmc_off.w_t",
    "line.u_dc_on",
    "line.u_mid",
    "line.u_dc_off",
    "line.i_sec1",
    "line.i_sec2",
    "wtg.w_link",
    "wtg.p_msc",
];

#[derive(Debug, Clone, Copy)]
struct Derivs {
    machine: (f64, f64, f64),
    di_on: (f64, f64),
    di_off: (f64, f64),
    di_dc_on: f64,
    di_dc_off: f64,
    dw_t_on: f64,
    dw_t_off: f64,
    du_dc_on: f64,
    du_mid: f64,
    du_dc_off: f64,
    di_sec1: f64,
    di_sec2: f64,
    dw_link: f64,
    dp_msc: f64,
}

/// Electrical power flows shared by logging and bookkeeping. Logged rows
/// carry the integrator's per-step stage average, not the first-stage
/// snapshot: the sample-and-hold controllers make the first stage sit at a
/// fixed phase of the intra-step correction cycle, and that snapshot holds a
/// small permanent offset against the stored-energy increments (about 700 W
/// at the benchmark dispatch, enough to leak tens of kJ over a run).
#[derive(Debug, Clone, Copy)]
struct Powers {
    p_ac_on: f64,
    p_dc_on: f64,
    p_ac_off: f64,
    p_dc_off: f64,
    p_gsc: f64,
    p_recv_machine: f64,
}

impl Powers {
    fn mean(a: &Powers, b: &Powers) -> Powers {
        Powers {
            p_ac_on: 0.5 * (a.p_ac_on + b.p_ac_on),
            p_dc_on: 0.5 * (a.p_dc_on + b.p_dc_on),
            p_ac_off: 0.5 * (a.p_ac_off + b.p_ac_off),
            p_dc_off: 0.5 * (a.p_dc_off + b.p_dc_off),
            p_gsc: 0.5 * (a.p_gsc + b.p_gsc),
            p_recv_machine: 0.5 * (a.p_recv_machine + b.p_recv_machine),
        }
    }
}

// ---- log --------------------------------------------------------------------

/// Exported CSV channels, in header order after `t`.
pub const CSV_CHANNEL_COUNT: usize = 17;
const CHANNELS: [&str; 21] = [
    "f_on",
    "f_off",
    "f_wtg",
    "P_ac_on",
    "P_dc_on",
    "P_ac_off",
    "P_dc_off",
    "P_gsc",
    "P_msc",
    "W_t_on",
    "W_t_off",
    "W_link",
    "U_dc_on",
    "U_mid",
    "U_dc_off",
    "I_dc_on",
    "I_dc_off",
    // diagnostic channels, kept in memory but not exported
    "f_machine",
    "p_load",
    "p_m",
    "p_recv_machine",
];

/// Decimated time-series record of a run. All channels share one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    t: Vec<f64>,
    cols: Vec<Vec<f64>>,
}

impl SimLog {
    fn new() -> SimLog {
        SimLog {
            t: Vec::new(),
            cols: vec![Vec::new(); CHANNELS.len()],
        }
    }

    fn push(&mut self, t: f64, row: &[f64; 21]) {
        self.t.push(t);
        for (col, v) in self.cols.iter_mut().zip(row) {
            col.push(*v);
        }
    }

    pub fn channel_names() -> &'static [&'static str] {
        &CHANNELS
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn channel_slice(&self, name: &str) -> Option<&[f64]> {
        let idx = CHANNELS.iter().position(|c| *c == name)?;
        Some(&self.cols[idx])
    }

    pub fn channel(&self, name: &str) -> Option<TimeSeries> {
        let values = self.channel_slice(name)?;
        TimeSeries::new(self.t.clone(), values.to_vec()).ok()
    }

    /// Overwrites one channel in place; a diagnostic hook for fault-injection
    /// checks (for example, leaking power out of a bookkeeping channel).
    pub fn replace_channel(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        let idx = CHANNELS
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::InvalidInput(format!("no channel named {name}")))?;
        if values.len() != self.t.len() {
            return Err(Error::InvalidInput(format!(
                "channel {name} needs {} samples, got {}",
                self.t.len(),
                values.len()
            )));
        }
        self.cols[idx] = values;
        Ok(())
    }

    /// RFC-4180 CSV of the contract channels, one row per stored step.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.t.len() * 24 * (CSV_CHANNEL_COUNT + 1));
        out.push('t');
        for name in &CHANNELS[..CSV_CHANNEL_COUNT] {
            out.push(',');
            out.push_str(name);
        }
        out.push_str("\r\n");
        for k in 0..self.t.len() {
            let _ = write!(out, "{:e}", self.t[k]);
            for col in &self.cols[..CSV_CHANNEL_COUNT] {
                let _ = write!(out, ",{:e}", col[k]);
            }
            out.push_str("\r\n");
        }
        out
    }
}

// ---- engine -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationScheme {
    /// First-order explicit stepping. Adds roughly omega^2 dt / 2 of negative
    /// damping to every oscillatory mode, which at the default 50 us step
    /// overwhelms the DC line resonance's small natural damping. Kept for
    /// cross-checks at reduced dt; not fit as the default at 50 us.
    Euler,
    /// Trapezoidal predictor-corrector over the plant states (controllers
    /// still step once per dt, zero-order hold). Default scheme.
    Heun,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub full_rate: bool,
    pub scheme: IntegrationScheme,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            full_rate: false,
            scheme: IntegrationScheme::Heun,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub model: SystemModel,
    pub state: SimState,
    ctrl_on: MmcController,
    ctrl_off: MmcController,
    ctrl_wtg: WtgController,
    p_load: f64,
    t: f64,
    initialized: bool,
    /// Last GSC actuation, needed to reconstruct the DC-side current
    /// measurement of the turbine link.
    last_wtg_act: WtgActuation,
    divergence_scale: [f64; 18],
}

impl Engine {
    pub fn new(model: SystemModel) -> Result<Engine> {
        model.machine.validate()?;
        model.mmc_on.validate()?;
        model.mmc_off.validate()?;
        model.wtg.validate()?;
        model.line.validate()?;
        let ctrl_on = MmcController::new(model.gains_on.clone())?;
        let ctrl_off = MmcController::new(model.gains_off.clone())?;
        let ctrl_wtg = WtgController::new(model.gains_wtg.clone())?;
        let i_ac = model.base.i_b;
        let u_dc = model.gains_on.u_mid_star;
        let i_dc = model.base.s_n / u_dc;
        let divergence_scale = [
            1e12 * PI,
            1e12,
            1e12 * model.machine.s_base,
            1e12 * i_ac,
            1e12 * i_ac,
            1e12 * i_dc,
            1e12 * model.mmc_on.w_t_nom(),
            1e12 * i_ac,
            1e12 * i_ac,
            1e12 * i_dc,
            1e12 * model.mmc_off.w_t_nom(),
            1e12 * u_dc,
            1e12 * u_dc,
            1e12 * u_dc,
            1e12 * i_dc,
            1e12 * i_dc,
            1e12 * model.wtg.w_link_nom(),
            1e12 * model.base.s_n,
        ];
        let last_wtg_act = WtgActuation {
            u_gsc_dq: (model.u_set_wtg, 0.0),
            theta: 0.0,
            p_msc_cmd: model.gains_wtg.p_set,
        };
        Ok(Engine {
            model,
            state: SimState::zero(),
            ctrl_on,
            ctrl_off,
            ctrl_wtg,
            p_load: 0.0,
            t: 0.0,
            initialized: false,
            last_wtg_act,
            divergence_scale,
        })
    }

    pub fn from_config(cfg: &Config) -> Result<Engine> {
        Engine::new(SystemModel::from_config(cfg)?)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p_load(&self) -> f64 {
        self.p_load
    }

    fn measurements(&self) -> (MmcMeasurements, MmcMeasurements, WtgMeasurements) {
        let s = &self.state;
        let m = &self.model;
        let meas_on = MmcMeasurements {
            w_t: s.mmc_on.w_t,
            i_s_dq: (s.mmc_on.i_s_d, s.mmc_on.i_s_q),
            u_dc: s.line.u_dc_on,
            i_dc: -s.mmc_on.i_dc,
            u_ac_setpoint: m.u_set_on,
        };
        // the offshore converter's own output current is the branch current
        // reversed: the shared branch is oriented GSC -> MMC
        let meas_off = MmcMeasurements {
            w_t: s.mmc_off.w_t,
            i_s_dq: (-s.mmc_off.i_s_d, -s.mmc_off.i_s_q),
            u_dc: s.line.u_dc_off,
            i_dc: -s.mmc_off.i_dc,
            u_ac_setpoint: m.u_set_off,
        };
        let u_link = voltage_from_energy(s.w_link.max(0.0), m.wtg.c_link);
        let u_gsc_prev = rotate(
            self.last_wtg_act.u_gsc_dq.0,
            self.last_wtg_act.u_gsc_dq.1,
            self.last_wtg_act.theta,
        );
        let p_gsc_prev = ac_power(u_gsc_prev, (s.mmc_off.i_s_d, s.mmc_off.i_s_q));
        let (i_msc, i_gsc) = if u_link > 0.0 {
            (s.p_msc / u_link, p_gsc_prev / u_link)
        } else {
            (0.0, 0.0)
        };
        let meas_wtg = WtgMeasurements {
            w_link: s.w_link,
            u_link,
            i_msc,
            i_gsc,
            i_w_dq: (s.mmc_off.i_s_d, s.mmc_off.i_s_q),
            u_ac_setpoint: m.u_set_wtg,
        };
        (meas_on, meas_off, meas_wtg)
    }

    fn physics(
        &self,
        state: &SimState,
        act_on: &MmcActuation,
        act_off: &MmcActuation,
        act_wtg: &WtgActuation,
        p_load: f64,
    ) -> (Derivs, Powers) {
        let m = &self.model;
        let omega = 2.0 * PI * m.f_n;
        let i_on = (state.mmc_on.i_s_d, state.mmc_on.i_s_q);
        let i_off = (state.mmc_off.i_s_d, state.mmc_off.i_s_q);

        let u_diff_on = rotate(act_on.u_diff_dq.0, act_on.u_diff_dq.1, act_on.theta);
        let u_diff_off = rotate(act_off.u_diff_dq.0, act_off.u_diff_dq.1, act_off.theta);
        let u_gsc = rotate(act_wtg.u_gsc_dq.0, act_wtg.u_gsc_dq.1, act_wtg.theta);
        let e_machine = rotate(m.u_th, 0.0, state.machine.delta);

        let p_ac_on = ac_power(u_diff_on, i_on);
        let p_recv_machine = ac_power(e_machine, i_on);
        let p_gsc = ac_power(u_gsc, i_off);
        let p_ac_off = ac_power(u_diff_off, i_off);
        let p_dc_on = 2.0 * act_on.u_sum0 * state.mmc_on.i_dc;
        let p_dc_off_cap = 2.0 * act_off.u_sum0 * state.mmc_off.i_dc;

        let p_e = p_load - p_recv_machine;
        let machine = sync_machine_derivative(&m.machine, &state.machine, p_e);

        let di_on = mmc_ac_derivative(
            &m.mmc_on,
            &state.mmc_on,
            act_on.u_diff_dq,
            act_on.theta,
            m.u_th,
            state.machine.delta,
            omega,
        );
        let di_off = branch_derivative(
            m.mmc_off.r_s,
            m.mmc_off.l_s,
            i_off,
            u_gsc,
            u_diff_off,
            omega,
        );
        let di_dc_on = mmc_dc_derivative(&m.mmc_on, &state.mmc_on, act_on.u_sum0, state.line.u_dc_on);
        let di_dc_off = mmc_dc_derivative(
            &m.mmc_off,
            &state.mmc_off,
            act_off.u_sum0,
            state.line.u_dc_off,
        );
        // offshore cap: AC power flows in (current into the converter), DC out
        let dw_t_on = mmc_energy_derivative(p_dc_on, p_ac_on);
        let dw_t_off = mmc_energy_derivative(p_dc_off_cap, -p_ac_off);

        let line = hvdc_line_derivative(
            &m.line,
            &state.line,
            -state.mmc_on.i_dc,
            -state.mmc_off.i_dc,
        );

        let dw_link = state.p_msc - p_gsc;
        let dp_msc = (act_wtg.p_msc_cmd - state.p_msc) / m.wtg.t_msc;

        (
            Derivs {
                machine,
                di_on,
                di_off,
                di_dc_on,
                di_dc_off,
                dw_t_on,
                dw_t_off,
                du_dc_on: line.du_dc_on,
                du_mid: line.du_mid,
                du_dc_off: line.du_dc_off,
                di_sec1: line.di_sec1,
                di_sec2: line.di_sec2,
                dw_link,
                dp_msc,
            },
            Powers {
                p_ac_on,
                p_dc_on,
                p_ac_off,
                p_dc_off: -p_dc_off_cap,
                p_gsc,
                p_recv_machine,
            },
        )
    }

    fn advance(state: &SimState, d: &Derivs, dt: f64) -> SimState {
        SimState {
            machine: SyncMachineState {
                delta: state.machine.delta + dt * d.machine.0,
                omega_pu: state.machine.omega_pu + dt * d.machine.1,
                p_m: state.machine.p_m + dt * d.machine.2,
            },
            mmc_on: MmcState {
                i_s_d: state.mmc_on.i_s_d + dt * d.di_on.0,
                i_s_q: state.mmc_on.i_s_q + dt * d.di_on.1,
                i_dc: state.mmc_on.i_dc + dt * d.di_dc_on,
                w_t: state.mmc_on.w_t + dt * d.dw_t_on,
            },
            mmc_off: MmcState {
                i_s_d: state.mmc_off.i_s_d + dt * d.di_off.0,
                i_s_q: state.mmc_off.i_s_q + dt * d.di_off.1,
                i_dc: state.mmc_off.i_dc + dt * d.di_dc_off,
                w_t: state.mmc_off.w_t + dt * d.dw_t_off,
            },
            line: HvdcLineState {
                u_dc_on: state.line.u_dc_on + dt * d.du_dc_on,
                u_mid: state.line.u_mid + dt * d.du_mid,
                u_dc_off: state.line.u_dc_off + dt * d.du_dc_off,
                i_sec1: state.line.i_sec1 + dt * d.di_sec1,
                i_sec2: state.line.i_sec2 + dt * d.di_sec2,
            },
            w_link: state.w_link + dt * d.dw_link,
            p_msc: state.p_msc + dt * d.dp_msc,
        }
    }

    fn check_divergence(&self) -> Result<()> {
        let values = self.state.as_array();
        for ((v, scale), name) in values
            .iter()
            .zip(&self.divergence_scale)
            .zip(&STATE_NAMES)
        {
            if !v.is_finite() || v.abs() > *scale {
                return Err(Error::Divergence {
                    t: self.t,
                    what: format!("{name} = {v:.3e}"),
                });
            }
        }
        Ok(())
    }

    /// One controller-plus-plant step. Returns the pre-update log row.
    fn step_once(&mut self, dt: f64, scheme: IntegrationScheme) -> Result<[f64; 21]> {
        let (meas_on, meas_off, meas_wtg) = self.measurements();
        let act_on = self.ctrl_on.step(&meas_on, dt)?;
        let act_off = self.ctrl_off.step(&meas_off, dt)?;
        let act_wtg = self.ctrl_wtg.step(&meas_wtg, dt)?;

        let (d1, powers1) = self.physics(&self.state, &act_on, &act_off, &act_wtg, self.p_load);
        let (next_state, powers) = match scheme {
            IntegrationScheme::Euler => (Self::advance(&self.state, &d1, dt), powers1),
            IntegrationScheme::Heun => {
                let predictor = Self::advance(&self.state, &d1, dt);
                let (d2, powers2) =
                    self.physics(&predictor, &act_on, &act_off, &act_wtg, self.p_load);
                let half = Self::advance(&self.state, &d1, 0.5 * dt);
                (
                    Self::advance(&half, &d2, 0.5 * dt),
                    Powers::mean(&powers1, &powers2),
                )
            }
        };

        let row = [
            self.model.gains_on.f_star + self.ctrl_on.delta_f(),
            self.model.gains_off.f_star + self.ctrl_off.delta_f(),
            self.model.gains_wtg.f_star + self.ctrl_wtg.delta_f(),
            powers.p_ac_on,
            powers.p_dc_on,
            powers.p_ac_off,
            powers.p_dc_off,
            powers.p_gsc,
            self.state.p_msc,
            self.state.mmc_on.w_t,
            self.state.mmc_off.w_t,
            self.state.w_link,
            self.state.line.u_dc_on,
            self.state.line.u_mid,
            self.state.line.u_dc_off,
            self.state.mmc_on.i_dc,
            -self.state.mmc_off.i_dc,
            self.model.f_n * self.state.machine.omega_pu,
            self.p_load,
            self.state.machine.p_m,
            powers.p_recv_machine,
        ];

        self.state = next_state;
        self.last_wtg_act = act_wtg;
        self.t += dt;
        self.check_divergence()?;
        Ok(row)
    }

    /// Algebraic pre-solve, state installation, silent settle, and residual
    /// check. The run clock is reset to zero afterwards.
    pub fn initialize(&mut self, settle_time: f64) -> Result<InitReport> {
        if !(settle_time >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "settle_time must be nonnegative, got {settle_time}"
            )));
        }
        let solution = steady_solve(&self.model)?;
        self.install(&solution);

        let dt = 50e-6;
        let steps = (settle_time / dt).round() as u64;
        for _ in 0..steps {
            self.step_once(dt, IntegrationScheme::Heun).map_err(|e| {
                Error::InitializationFailed(format!("settle simulation failed: {e}"))
            })?;
        }
        // The two terminals integrate the same midpoint voltage, so the
        // difference of their voltage-loop integrals is observable only
        // through the resistive droop closure; that near-neutral pair rings
        // near 0.4 rad/s at the 1e-5 level for minutes. The gate is set
        // above that floor; install mistakes show up at 1e-3 and larger.
        let max_residual = self.residual(dt)?;
        if !(max_residual < 1e-4) {
            return Err(Error::InitializationFailed(format!(
                "settled state still moving: residual {max_residual:.3e} of nominal rates"
            )));
        }
        self.t = 0.0;
        self.initialized = true;
        Ok(InitReport {
            delta_f_on: solution.delta_f_on,
            delta_f_off: solution.delta_f_off,
            iterations: solution.iterations,
            max_residual,
            solution,
        })
    }

    fn install(&mut self, sol: &SteadySolution) {
        let m = &self.model;
        self.state = SimState {
            machine: SyncMachineState {
                delta: 0.0,
                omega_pu: 1.0 + sol.delta_f_on / m.f_n,
                p_m: sol.p_m,
            },
            mmc_on: MmcState {
                i_s_d: sol.i_on_dq.0,
                i_s_q: sol.i_on_dq.1,
                i_dc: sol.i_line,
                w_t: sol.w_t_on,
            },
            mmc_off: MmcState {
                i_s_d: sol.i_off_dq.0,
                i_s_q: sol.i_off_dq.1,
                i_dc: -sol.i_line,
                w_t: sol.w_t_off,
            },
            line: HvdcLineState {
                u_dc_on: sol.u_on,
                u_mid: sol.u_mid,
                u_dc_off: sol.u_off,
                i_sec1: -sol.i_line,
                i_sec2: -sol.i_line,
            },
            w_link: sol.w_link,
            p_msc: sol.p_msc,
        };
        self.p_load = m.p_load;
        self.t = 0.0;

        self.ctrl_on = MmcController::new(m.gains_on.clone()).expect("gains already validated");
        self.ctrl_off = MmcController::new(m.gains_off.clone()).expect("gains already validated");
        self.ctrl_wtg = WtgController::new(m.gains_wtg.clone()).expect("gains already validated");
        let i_on_local = rotate(sol.i_on_dq.0, sol.i_on_dq.1, -sol.delta_on);
        self.ctrl_on.preset_steady(
            sol.delta_on,
            i_on_local,
            -sol.i_line,
            m.mmc_on.r_d * sol.i_line,
        );
        // offshore converter frame is the offshore anchor (angle zero); its own
        // output current is the reversed branch current
        self.ctrl_off.preset_steady(
            0.0,
            (-sol.i_off_dq.0, -sol.i_off_dq.1),
            sol.i_line,
            -m.mmc_off.r_d * sol.i_line,
        );
        let i_wtg_local = rotate(sol.i_off_dq.0, sol.i_off_dq.1, -sol.delta_off);
        self.ctrl_wtg.preset_steady(sol.delta_off, i_wtg_local);
        self.last_wtg_act = WtgActuation {
            u_gsc_dq: (m.u_set_wtg, 0.0),
            theta: sol.delta_off,
            p_msc_cmd: sol.p_msc,
        };
    }

    /// Maximum derivative residual relative to nominal rates, with the common
    /// steady rotation (all frames drifting together at the settled frequency
    /// offset) subtracted.
    fn residual(&mut self, dt: f64) -> Result<f64> {
        let (meas_on, meas_off, meas_wtg) = self.measurements();
        // a throwaway controller step gives self-consistent actuations without
        // advancing the plant; controller states move by one benign sample
        let act_on = self.ctrl_on.step(&meas_on, dt)?;
        let act_off = self.ctrl_off.step(&meas_off, dt)?;
        let act_wtg = self.ctrl_wtg.step(&meas_wtg, dt)?;
        let (d, _) = self.physics(&self.state, &act_on, &act_off, &act_wtg, self.p_load);

        let m = &self.model;
        let omega_n = 2.0 * PI * m.f_n;
        let omega_on = (self.state.machine.omega_pu - 1.0) * omega_n;
        let omega_off = 2.0 * PI * self.ctrl_off.delta_f();
        let i_ac_rate = m.base.i_b * omega_n;
        let i_dc_nom = m.base.s_n / m.gains_on.u_mid_star;
        let dc_rate = 1e3;

        let checks = [
            (d.machine.1, 1.0),
            (d.machine.2, m.machine.s_base),
            (d.di_on.0 + omega_on * self.state.mmc_on.i_s_q, i_ac_rate),
            (d.di_on.1 - omega_on * self.state.mmc_on.i_s_d, i_ac_rate),
            (d.di_off.0 + omega_off * self.state.mmc_off.i_s_q, i_ac_rate),
            (d.di_off.1 - omega_off * self.state.mmc_off.i_s_d, i_ac_rate),
            (d.di_dc_on, i_dc_nom * dc_rate),
            (d.di_dc_off, i_dc_nom * dc_rate),
            (d.dw_t_on, m.base.s_n),
            (d.dw_t_off, m.base.s_n),
            (d.du_dc_on, m.gains_on.u_mid_star * dc_rate),
            (d.du_mid, m.gains_on.u_mid_star * dc_rate),
            (d.du_dc_off, m.gains_on.u_mid_star * dc_rate),
            (d.di_sec1, i_dc_nom * dc_rate),
            (d.di_sec2, i_dc_nom * dc_rate),
            (d.dw_link, m.base.s_n),
            (d.dp_msc, m.base.s_n / m.wtg.t_msc),
        ];
        Ok(checks
            .iter()
            .map(|(r, scale)| (r / scale).abs())
            .fold(0.0, f64::max))
    }

    /// Integrates the scenario from the initialized state, returning the
    /// decimated log. Events fire at the first step whose time has reached
    /// them. Bit-for-bit deterministic for identical inputs.
    pub fn run(&mut self, scenario: &ScenarioConfig) -> Result<SimLog> {
        self.run_with(scenario, &RunOptions::default())
    }

    pub fn run_with(&mut self, scenario: &ScenarioConfig, opts: &RunOptions) -> Result<SimLog> {
        if !self.initialized {
            return Err(Error::InvalidInput(
                "engine must be initialized before running a scenario".into(),
            ));
        }
        let dt = scenario.dt;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("need dt > 0, got {dt}")));
        }
        if scenario
            .events
            .windows(2)
            .any(|w| w[0].t > w[1].t)
        {
            return Err(Error::InvalidInput("events must be sorted by time".into()));
        }
        let decim = if opts.full_rate {
            1
        } else {
            ((1e-4 / dt).round() as usize).max(1)
        };
        let steps = (scenario.duration / dt).round() as u64;
        let mut log = SimLog::new();
        let mut next_event = 0usize;
        for k in 0..steps {
            while next_event < scenario.events.len() && scenario.events[next_event].t <= self.t {
                let ev = &scenario.events[next_event];
                self.apply_event(&ev.kind)?;
                next_event += 1;
            }
            let row = self.step_once(dt, opts.scheme)?;
            if k as usize % decim == 0 {
                // the row belongs to the instant before this step's update
                log.push(self.t - dt, &row);
            }
        }
        Ok(log)
    }

    fn apply_event(&mut self, kind: &EventKind) -> Result<()> {
        match kind {
            EventKind::OnshoreLoadStep { delta_p } => {
                self.p_load += delta_p;
            }
            EventKind::WindPowerStep { delta_p } => {
                let p = self.ctrl_wtg.gains().p_set + delta_p;
                self.ctrl_wtg.set_p_set(p);
            }
            EventKind::SetpointChange { target, value } => match target.as_str() {
                "p_set_wtg" => self.ctrl_wtg.set_p_set(*value),
                "k_rw" => self.ctrl_wtg.set_k_rw(*value),
                "k_hw" => self.ctrl_wtg.set_k_hw(*value),
                "u_mid_star" => {
                    self.ctrl_on.set_u_mid_star(*value);
                    self.ctrl_off.set_u_mid_star(*value);
                }
                "p_load" => self.p_load = *value,
                other => {
                    return Err(Error::Config(format!(
                        "unknown setpoint target {other:?}"
                    )))
                }
            },
        }
        Ok(())
    }
}

/// Builds, initializes, and runs a configuration's scenario in one call.
pub fn simulate(cfg: &Config) -> Result<(SimLog, Engine)> {
    simulate_with(cfg, &RunOptions::default())
}

pub fn simulate_with(cfg: &Config, opts: &RunOptions) -> Result<(SimLog, Engine)> {
    cfg.validate()?;
    let mut engine = Engine::from_config(cfg)?;
    engine.initialize(cfg.scenario.settle_time)?;
    let log = engine.run_with(&cfg.scenario, opts)?;
    Ok((log, engine))
}

// ---- steady-state solve -------------------------------------------------------

/// Self-consistent operating point of the whole corridor: one frequency offset
/// per AC island (tied through the DC droop ratio), the DC line current and
/// node voltages, and both AC branch phasors.
#[derive(Debug, Clone, Copy)]
pub struct SteadySolution {
    pub delta_f_on: f64,
    pub delta_f_off: f64,
    /// DC line current, offshore exporting toward onshore, A.
    pub i_line: f64,
    pub u_on: f64,
    pub u_mid: f64,
    pub u_off: f64,
    pub p_msc: f64,
    pub p_gsc: f64,
    pub p_ac_off: f64,
    pub p_dc_on: f64,
    pub p_ac_on: f64,
    pub p_recv_machine: f64,
    /// Onshore MMC angle lead over the machine EMF, rad.
    pub delta_on: f64,
    /// GSC angle lead over the offshore MMC, rad.
    pub delta_off: f64,
    pub i_on_dq: (f64, f64),
    pub i_off_dq: (f64, f64),
    pub w_t_on: f64,
    pub w_t_off: f64,
    pub w_link: f64,
    pub p_m: f64,
    pub iterations: usize,
}

/// One dispatch evaluation at a trial onshore frequency offset: propagate the
/// wind droop through the corridor and return the operating point together
/// with the offset the machine droop would answer with. A fixed point of that
/// map is the system equilibrium.
fn steady_eval(m: &SystemModel, delta_f_on: f64) -> Result<(SteadySolution, f64)> {
    let s_n = m.base.s_n;
    let i_b = m.base.i_b;
    let ratio = m.gains_on.k_r / m.gains_off.k_r;
    let a_q = m.line.r_dc / 2.0 + m.mmc_off.r_d;

    let delta_f_off = ratio * delta_f_on;
    let p_msc = m.gains_wtg.p_set - m.gains_wtg.k_rw * delta_f_off;
    let p_gsc = p_msc;

    let delta_off = solve_delta_for_power(&m.link_off_pu, p_gsc / s_n, 1e-13)?;
    let op_off = operating_point(&m.link_off_pu, delta_off)?;
    let p_ac_off = m.link_off_pu.e * op_off.i_do * s_n;

    let u_mid = m.gains_on.u_mid_star + m.gains_on.k_r * delta_f_on;
    // (r_dc/2 + r_d) I^2 + u_mid I - p_ac_off = 0, stable quadratic form
    let disc = (u_mid * u_mid + 4.0 * a_q * p_ac_off).sqrt();
    let i_line = 2.0 * p_ac_off / (u_mid + disc);
    let u_off = u_mid + m.line.r_dc / 2.0 * i_line;
    let u_on = u_mid - m.line.r_dc / 2.0 * i_line;

    let p_dc_on = (u_on - m.mmc_on.r_d * i_line) * i_line;
    let p_ac_on = p_dc_on;
    let delta_on = solve_delta_for_power(&m.link_on_pu, p_ac_on / s_n, 1e-13)?;
    let op_on = operating_point(&m.link_on_pu, delta_on)?;
    let p_recv_machine = m.link_on_pu.e * op_on.i_do * s_n;

    let p_e = m.p_load - p_recv_machine;
    let delta_f_next =
        (m.machine.p_set - p_e) * m.machine.droop * m.machine.f_n / m.machine.s_base;

    let sol = SteadySolution {
        delta_f_on,
        delta_f_off,
        i_line,
        u_on,
        u_mid,
        u_off,
        p_msc,
        p_gsc,
        p_ac_off,
        p_dc_on,
        p_ac_on,
        p_recv_machine,
        delta_on,
        delta_off,
        i_on_dq: (op_on.i_do * i_b, op_on.i_qo * i_b),
        i_off_dq: (op_off.i_do * i_b, op_off.i_qo * i_b),
        w_t_on: m.gains_on.w_t_star + delta_f_on / m.gains_on.k_h,
        w_t_off: m.gains_off.w_t_star + delta_f_off / m.gains_off.k_h,
        w_link: m.gains_wtg.w_link_star + delta_f_off / m.gains_wtg.k_hlink,
        p_m: p_e,
        iterations: 0,
    };
    Ok((sol, delta_f_next))
}

pub fn steady_solve(model: &SystemModel) -> Result<SteadySolution> {
    // Root of g(x) = F(x) - x where F is the dispatch map. F is decreasing in
    // x for non-negative droop gains (a lower frequency raises the wind
    // injection, which unloads the machine), so g is strictly decreasing and a
    // sign change brackets the unique equilibrium. Bisection is used instead
    // of plain fixed-point iteration because the inner angle solves leave
    // noise near 1e-13 Hz on g, which a last-digit convergence gate on the
    // iterates cannot distinguish from non-convergence.
    const G_TOL: f64 = 1e-12;
    const X_TOL: f64 = 1e-12;

    let mut evals = 0usize;
    let (sol0, next0) = steady_eval(model, 0.0)?;
    evals += 1;
    let g0 = next0;
    if g0.abs() < G_TOL {
        let mut sol = sol0;
        sol.iterations = evals;
        return Ok(sol);
    }

    // g' <= -1 everywhere, so the root is no farther from 0 than |g(0)|; the
    // geometric expansion only guards against a locally flat map.
    let dir = g0.signum();
    let mut inner = 0.0f64;
    let mut step = g0.abs();
    let mut outer = None;
    for _ in 0..40 {
        let x = inner + dir * step;
        let (_, next) = steady_eval(model, x)?;
        evals += 1;
        let g_x = next - x;
        if g_x == 0.0 || g_x.signum() != dir {
            outer = Some(x);
            break;
        }
        inner = x;
        step *= 2.0;
        if x.abs() > 16.0 {
            break;
        }
    }
    let Some(outer) = outer else {
        return Err(Error::InitializationFailed(format!(
            "dispatch equilibrium not bracketed after {evals} evaluations \
             (g(0) = {g0:.6e} Hz, last trial {inner:.6e} Hz)"
        )));
    };

    // g decreasing puts the non-negative side on the left: g(lo) >= 0 >= g(hi)
    let (mut lo, mut hi) = if inner < outer {
        (inner, outer)
    } else {
        (outer, inner)
    };
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        let (mut sol, next) = steady_eval(model, mid)?;
        evals += 1;
        let g_mid = next - mid;
        if g_mid.abs() < G_TOL || hi - lo < X_TOL {
            sol.iterations = evals;
            return Ok(sol);
        }
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::InitializationFailed(format!(
        "dispatch equilibrium did not converge after {evals} evaluations \
         (bracket [{lo:.6e}, {hi:.6e}] Hz)"
    )))
}

// ---- metrics --------------------------------------------------------------------

/// Frequency-support quality measures of one disturbance response.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub f_nadir: f64,
    /// Largest sliding-window frequency slope magnitude, Hz/s (500 ms window).
    pub max_rocof: f64,
    /// Time from the event until the response stays inside the 5% band, s.
    /// `None` when the log never settles.
    pub settling_time: Option<f64>,
    pub steady_delta_f_on: f64,
    pub steady_delta_f_off: f64,
    /// `[P_msc, P_gsc, P_ac_off, P_dc_off, P_dc_on, P_ac_on]`, final-second means.
    pub steady_power_chain: [f64; 6],
    pub pre_event_f_on: f64,
    pub pre_event_p_gsc: f64,
}

/// Largest magnitude of the two-point slope over windows of at least `window`
/// seconds, scanning the whole series.
pub fn windowed_rocof(ts: &TimeSeries, window: f64) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::InvalidInput(format!(
            "window must be positive, got {window}"
        )));
    }
    let t = ts.t();
    let y = ts.y();
    if t.len() < 2 {
        return Err(Error::MetricsUnavailable(
            "need at least two samples for a slope".into(),
        ));
    }
    let mut max_slope = 0.0f64;
    let mut j = 0usize;
    let mut found = false;
    for i in 0..t.len() {
        if j < i + 1 {
            j = i + 1;
        }
        while j < t.len() && t[j] - t[i] < window {
            j += 1;
        }
        if j >= t.len() {
            break;
        }
        let slope = (y[j] - y[i]) / (t[j] - t[i]);
        max_slope = max_slope.max(slope.abs());
        found = true;
    }
    if !found {
        return Err(Error::MetricsUnavailable(format!(
            "series too short for a {window} s window"
        )));
    }
    Ok(max_slope)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn final_second_mean(t: &[f64], y: &[f64]) -> f64 {
    let t_end = *t.last().unwrap();
    let start = t.partition_point(|&v| v < t_end - 1.0);
    mean(&y[start..])
}

pub fn compute_metrics(log: &SimLog, event_time: f64) -> Result<Metrics> {
    let t = log.t();
    if t.is_empty() {
        return Err(Error::MetricsUnavailable("log is empty".into()));
    }
    let t_end = *t.last().unwrap();
    if event_time < t[0] || event_time > t_end {
        return Err(Error::MetricsUnavailable(format!(
            "event at {event_time} s lies outside the log span [{}, {t_end}]",
            t[0]
        )));
    }
    if t_end - event_time < 10.0 {
        return Err(Error::MetricsUnavailable(format!(
            "log ends {:.3} s after the event; need 10 s",
            t_end - event_time
        )));
    }
    let f_on = log.channel_slice("f_on").expect("contract channel");
    let f_off = log.channel_slice("f_off").expect("contract channel");
    let p_gsc = log.channel_slice("P_gsc").expect("contract channel");

    // last sample at or before the event is the pre-event baseline
    let event_idx = t.partition_point(|&v| v <= event_time).saturating_sub(1);
    let pre_event_f_on = f_on[event_idx];
    let pre_event_p_gsc = p_gsc[event_idx];

    let post_t = &t[event_idx..];
    let post_f = &f_on[event_idx..];
    let f_nadir = post_f.iter().copied().fold(f64::INFINITY, f64::min);

    let post_series = TimeSeries::new(post_t.to_vec(), post_f.to_vec())?;
    let max_rocof = windowed_rocof(&post_series, 0.5)?;

    let f_final = final_second_mean(t, f_on);
    let delta_final = f_final - pre_event_f_on;
    let band = 0.05 * delta_final.abs();
    let settling_time = if delta_final.abs() < 1e-12 {
        Some(0.0)
    } else {
        // scan backwards for the last excursion outside the band
        let mut last_outside: Option<usize> = None;
        for k in (event_idx..t.len()).rev() {
            if (f_on[k] - f_final).abs() > band {
                last_outside = Some(k);
                break;
            }
        }
        match last_outside {
            None => Some(0.0),
            Some(k) if k + 1 < t.len() => Some(t[k + 1] - event_time),
            Some(_) => None,
        }
    };

    let nominal = {
        // frequency setpoint is the pre-event plateau by construction; steady
        // deviations are reported against the nominal 50/60 Hz grid value,
        // taken from the rounded pre-event mean
        let pre = &f_on[..event_idx.max(1)];
        mean(pre).round()
    };
    let steady_delta_f_on = f_final - nominal;
    let steady_delta_f_off = final_second_mean(t, f_off) - nominal;

    let chain = [
        final_second_mean(t, log.channel_slice("P_msc").unwrap()),
        final_second_mean(t, log.channel_slice("P_gsc").unwrap()),
        final_second_mean(t, log.channel_slice("P_ac_off").unwrap()),
        final_second_mean(t, log.channel_slice("P_dc_off").unwrap()),
        final_second_mean(t, log.channel_slice("P_dc_on").unwrap()),
        final_second_mean(t, log.channel_slice("P_ac_on").unwrap()),
    ];

    Ok(Metrics {
        f_nadir,
        max_rocof,
        settling_time,
        steady_delta_f_on,
        steady_delta_f_off,
        steady_power_chain: chain,
        pre_event_f_on,
        pre_event_p_gsc,
    })
}

// ---- invariant checks --------------------------------------------------------

#[derive(Debug, Clone)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed violation, in the same unit as `tolerance`.
    pub magnitude: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Cumulative trapezoidal integral of `y` over `t`, same length as the inputs.
pub fn cumtrapz(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(t.len());
    let mut total = 0.0;
    acc.push(0.0);
    for k in 1..t.len() {
        total += 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1]);
        acc.push(total);
    }
    acc
}

/// Report-only audit of a finished run: stored-energy bookkeeping against the
/// integrated power flows, steady power-chain ordering, and droop-law closure
/// at both DC terminals.
pub fn verify_invariants(log: &SimLog, model: &SystemModel) -> InvariantReport {
    let mut checks = Vec::new();
    let t = log.t();
    if t.len() < 3 {
        checks.push(InvariantCheck {
            name: "log_length".into(),
            passed: false,
            magnitude: t.len() as f64,
            tolerance: 3.0,
            detail: "log too short to audit".into(),
        });
        return InvariantReport { checks };
    }

    let energy_check = |name: &str, w: &[f64], p_in: &[f64], p_out: &[f64], w_nom: f64| {
        let net: Vec<f64> = p_in.iter().zip(p_out).map(|(a, b)| a - b).collect();
        let integral = cumtrapz(t, &net);
        let worst = w
            .iter()
            .zip(&integral)
            .map(|(wk, ik)| (wk - w[0] - ik).abs())
            .fold(0.0, f64::max);
        let tol = 1e-3 * w_nom;
        InvariantCheck {
            name: name.into(),
            passed: worst <= tol,
            magnitude: worst,
            tolerance: tol,
            detail: format!("max |W - W0 - integral(P_in - P_out)| = {worst:.3e} J"),
        }
    };

    let ch = |name: &str| log.channel_slice(name).expect("contract channel");
    checks.push(energy_check(
        "energy_w_t_on",
        ch("W_t_on"),
        ch("P_dc_on"),
        ch("P_ac_on"),
        model.mmc_on.w_t_nom(),
    ));
    checks.push(energy_check(
        "energy_w_t_off",
        ch("W_t_off"),
        ch("P_ac_off"),
        ch("P_dc_off"),
        model.mmc_off.w_t_nom(),
    ));
    checks.push(energy_check(
        "energy_w_link",
        ch("W_link"),
        ch("P_msc"),
        ch("P_gsc"),
        model.wtg.w_link_nom(),
    ));

    // steady chain: power must not grow along the flow direction
    let chain_names = ["P_msc", "P_gsc", "P_ac_off", "P_dc_off", "P_dc_on", "P_ac_on"];
    let chain: Vec<f64> = chain_names
        .iter()
        .map(|n| final_second_mean(t, ch(n)))
        .collect();
    let slack = 1e-3 * model.base.s_n;
    let mut worst_rise = 0.0f64;
    for w in chain.windows(2) {
        worst_rise = worst_rise.max(w[1] - w[0]);
    }
    let total_drop = chain[0] - chain[chain.len() - 1];
    let chain_ok = worst_rise <= slack && total_drop >= -slack && total_drop <= 0.1 * model.base.s_n;
    checks.push(InvariantCheck {
        name: "steady_power_chain".into(),
        passed: chain_ok,
        magnitude: worst_rise,
        tolerance: slack,
        detail: format!(
            "chain MW {:?}, losses {:.2} MW",
            chain.iter().map(|p| (p / 1e6 * 100.0).round() / 100.0).collect::<Vec<_>>(),
            total_drop / 1e6
        ),
    });

    // droop closure: the estimated midpoint voltage must sit on the droop line
    let droop_check = |name: &str,
                       u_dc: &[f64],
                       i_signed: &[f64],
                       f: &[f64],
                       gains: &MmcControllerGains,
                       import_positive: bool| {
        let u_est: f64 = final_second_mean(
            t,
            &u_dc
                .iter()
                .zip(i_signed)
                .map(|(u, i)| {
                    if import_positive {
                        u + model.line.r_dc / 2.0 * i
                    } else {
                        u - model.line.r_dc / 2.0 * i
                    }
                })
                .collect::<Vec<_>>(),
        );
        let delta_f = final_second_mean(t, f) - gains.f_star;
        let reference = gains.u_mid_star + gains.k_r * delta_f;
        let err = (u_est - reference).abs();
        let tol = 1e-4 * gains.u_mid_star;
        InvariantCheck {
            name: name.into(),
            passed: err <= tol,
            magnitude: err,
            tolerance: tol,
            detail: format!(
                "midpoint estimate {u_est:.1} V vs droop reference {reference:.1} V"
            ),
        }
    };
    checks.push(droop_check(
        "droop_closure_on",
        ch("U_dc_on"),
        ch("I_dc_on"),
        ch("f_on"),
        &model.gains_on,
        true,
    ));
    checks.push(droop_check(
        "droop_closure_off",
        ch("U_dc_off"),
        ch("I_dc_off"),
        ch("f_off"),
        &model.gains_off,
        false,
    ));

    InvariantReport { checks }
}

// ---- single-link angle-step experiment -----------------------------------------

/// Nonlinear dq response of one AC link with its virtual-resistance loop to a
/// remote-source angle step: the converter holds amplitude and frame, the
/// remote angle jumps by `dtheta` at t = 0, and the power deviation is
/// recorded. Used to validate the small-signal power-angle model.
pub fn single_link_angle_step(
    link: &AcLinkParameters,
    r_v_pu: f64,
    t_v: f64,
    base: &PerUnitBase,
    dispatch_pu: f64,
    dtheta: f64,
    t_end: f64,
    dt: f64,
) -> Result<TimeSeries> {
    if link.unit_system != crate::acpower::UnitSystem::PerUnit {
        return Err(Error::InvalidInput(
            "single-link experiment expects per-unit link parameters".into(),
        ));
    }
    if !(dt > 0.0 && t_end > dt) {
        return Err(Error::InvalidInput(format!(
            "need 0 < dt < t_end, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let delta0 = solve_delta_for_power(link, dispatch_pu, 1e-13)?;
    let op = operating_point(link, delta0)?;

    let r_si = link.r * base.z_b;
    let l_si = link.l * base.l_b;
    let r_v_si = r_v_pu * base.z_b;
    let u_amp = link.u * base.u_b;
    let e_amp = link.e * base.u_b;
    let omega = base.omega_b;
    let p0 = crate::acpower::steady_power(link, delta0) * base.s_n;

    // converter frame at delta0; current state in the remote-source frame
    let mut i = (op.i_do * base.i_b, op.i_qo * base.i_b);
    // washout low-pass state in the converter frame, preset to the operating
    // point so the virtual resistance starts inactive
    let mut lp = rotate(i.0, i.1, -delta0);

    let steps = (t_end / dt).round() as usize;
    let mut ts = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    let a = dt / t_v;
    for k in 0..steps {
        let t = k as f64 * dt;
        let theta_e = if k == 0 { 0.0 } else { dtheta };

        let i_local = rotate(i.0, i.1, -delta0);
        lp = ((lp.0 + a * i_local.0) / (1.0 + a), (lp.1 + a * i_local.1) / (1.0 + a));
        let vr = (r_v_si * (i_local.0 - lp.0), r_v_si * (i_local.1 - lp.1));
        let u_cmd = (u_amp - vr.0, -vr.1);
        let u = rotate(u_cmd.0, u_cmd.1, delta0);
        let e = rotate(e_amp, 0.0, theta_e);

        let p = ac_power(u, i);
        ts.push(t);
        ys.push(p - p0);

        let (did, diq) = branch_derivative(r_si, l_si, i, u, e, omega);
        i = (i.0 + dt * did, i.1 + dt * diq);
    }
    TimeSeries::new(ts, ys)
}


/// Initialization summary: the solved operating point and the settle residual.
#[derive(Debug, Clone)]
pub struct InitReport {
    pub delta_f_on: f64,
    pub delta_f_off: f64,
    pub iterations: usize,
    pub max_residual: f64,
    pub solution: SteadySolution,
}
