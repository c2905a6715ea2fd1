//! Configuration ingestion and emission: the TOML system/tuning/scenario
//! document with benchmark defaults, the flat gains file, and the assembly of
//! SI-valued model parameters from the per-unit entries.
//!
//! Every key is optional in the document; missing keys take the documented
//! benchmark values, unknown keys are rejected with the offending name.
//! Electrical branch entries are in per-unit on the system base; DC-side and
//! controller quantities are SI, matching how the hardware is specified.

use crate::acpower::{
    gpac, operating_point, per_unit_base, solve_delta_for_power, AcLinkParameters, PerUnitBase,
    VirtualResistanceParams,
};
use crate::control::{MmcControllerGains, WtgControllerGains};
use crate::error::{Error, Result};
use crate::linsys::RationalTransferFunction;
use crate::plant::{HvdcLineParams, MmcParams, SyncMachineParams, WtgParams};
use crate::tuning::{MmcOperatingSetpoints, MmcTerminal, TuningInputs, WtgOperatingSetpoints};
use serde::Deserialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Resolved top-level configuration; every field concrete.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub system: SystemConfig,
    pub tuning: TuningConfig,
    /// Explicit gain override; when absent the tuning pipeline supplies gains.
    pub gains: Option<GainsData>,
    pub scenario: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// System base power (VA), line voltage (V RMS), frequency (Hz).
    pub s_n: f64,
    pub u_n: f64,
    pub f_n: f64,
    pub onshore: OnshoreConfig,
    pub mmc_on: MmcConfig,
    pub mmc_off: MmcConfig,
    pub hvdc_line: HvdcLineConfig,
    pub owpp: OwppConfig,
}

/// Onshore grid equivalent: swing-equation machine with governor droop behind
/// a Thevenin branch.
#[derive(Debug, Clone, PartialEq)]
pub struct OnshoreConfig {
    pub s_machine: f64,
    /// Inertia constant, s.
    pub h: f64,
    pub droop: f64,
    pub t_gov: f64,
    pub p_set_machine: f64,
    pub p_load: f64,
    /// Thevenin branch, p.u. on the system base.
    pub r_th: f64,
    pub l_th: f64,
    /// Machine EMF amplitude, p.u.
    pub u_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmcConfig {
    /// Transformer branch, p.u.
    pub r_s: f64,
    pub l_s: f64,
    /// DC-side arm inductance/resistance, SI.
    pub l_d: f64,
    pub r_d: f64,
    /// Equivalent stored-energy capacitance and its nominal voltage.
    pub c_eq: f64,
    pub u_eq_nom: f64,
    /// Virtual resistance, ohm, and washout time constant, s.
    pub r_v: f64,
    pub t_v: f64,
    /// AC voltage amplitude setpoint, p.u.
    pub u_ac_set: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HvdcLineConfig {
    pub r_dc: f64,
    pub l_dc: f64,
    pub c_dc: f64,
    pub u_dc_nom: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwppConfig {
    /// GSC transformer and collector branches, p.u.
    pub r_gsc: f64,
    pub l_gsc: f64,
    pub r_thw: f64,
    pub l_thw: f64,
    pub c_link: f64,
    pub u_link_nom: f64,
    pub t_msc: f64,
    /// Wind dispatch, W.
    pub p_set: f64,
    pub r_vw: f64,
    pub t_vw: f64,
    /// Frequency-response presets; zero disables.
    pub k_hw: f64,
    pub k_rw: f64,
    pub u_ac_set: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    pub omega_s: f64,
    pub h_ac: f64,
    pub h_dc: f64,
    pub h_ac_wtg: f64,
    pub delta_u_dcm: f64,
    pub delta_f_m_on: f64,
    pub delta_f_m_off: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub dt: f64,
    pub settle_time: f64,
    pub events: Vec<EventConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventConfig {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    OnshoreLoadStep { delta_p: f64 },
    WindPowerStep { delta_p: f64 },
    SetpointChange { target: String, value: f64 },
}

pub mod defaults {
    //! Benchmark values: a 1000 MVA / 400 kV / 50 Hz link exporting 800 MW of
    //! wind through a symmetric-monopole MMC-HVDC corridor into a 2000 MVA
    //! equivalent machine area, with the DC quantities consistent with the
    //! published controller gain set.

    pub const S_N: f64 = 1000e6;
    pub const U_N: f64 = 400e3;
    pub const F_N: f64 = 50.0;

    pub const S_MACHINE: f64 = 2000e6;
    pub const H_MACHINE: f64 = 2.0;
    pub const DROOP: f64 = 0.05;
    pub const T_GOV: f64 = 0.5;
    pub const P_SET_MACHINE: f64 = 800e6;
    pub const P_LOAD: f64 = 1600e6;
    pub const R_TH: f64 = 0.005;
    pub const L_TH: f64 = 0.15;
    pub const U_TH: f64 = 1.0;

    pub const R_S: f64 = 0.005;
    pub const L_S: f64 = 0.15;
    pub const R_S_OFF: f64 = 0.004;
    pub const L_S_OFF: f64 = 0.12;
    pub const L_D: f64 = 0.13;
    pub const R_D: f64 = 2.048;
    pub const C_EQ: f64 = 2e-4;
    pub const U_EQ_NOM: f64 = 640e3;
    pub const R_V: f64 = 27.2;
    pub const T_V_ON: f64 = 0.021;
    pub const T_V_OFF: f64 = 0.017;
    pub const U_AC_SET: f64 = 1.0;

    pub const R_DC: f64 = 4.375;
    pub const L_DC: f64 = 0.0729;
    pub const C_DC: f64 = 4.8e-5;
    pub const U_DC_NOM: f64 = 640e3;

    pub const R_GSC: f64 = 0.004;
    pub const L_GSC: f64 = 0.10;
    pub const R_THW: f64 = 0.004;
    pub const L_THW: f64 = 0.08;
    pub const C_LINK: f64 = 5.17e-3;
    pub const U_LINK_NOM: f64 = 132e3;
    pub const T_MSC: f64 = 0.05;
    pub const P_SET_WTG: f64 = 800e6;
    pub const R_VW: f64 = 24.0;
    pub const T_VW: f64 = 0.015;

    pub const OMEGA_S: f64 = 1e4;
    pub const H_AC: f64 = 5.0;
    pub const H_DC: f64 = 4.0;
    pub const H_AC_WTG: f64 = 15.0;
    pub const DELTA_U_DCM: f64 = 19.2e3;
    pub const DELTA_F_M: f64 = 0.5;

    pub const DURATION: f64 = 20.0;
    pub const DT: f64 = 50e-6;
    pub const SETTLE_TIME: f64 = 5.0;
    /// Default disturbance: 5% of the machine rating.
    pub const LOAD_STEP: f64 = 100e6;
    pub const LOAD_STEP_TIME: f64 = 5.0;
}

// ---- raw (all-optional) shadow structs -------------------------------------

macro_rules! opt {
    ($raw:expr, $default:expr) => {
        $raw.unwrap_or($default)
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<RawSystem>,
    tuning: Option<RawTuning>,
    gains: Option<RawGains>,
    scenario: Option<RawScenario>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    s_n: Option<f64>,
    u_n: Option<f64>,
    f_n: Option<f64>,
    onshore: Option<RawOnshore>,
    mmc_on: Option<RawMmc>,
    mmc_off: Option<RawMmc>,
    hvdc_line: Option<RawHvdcLine>,
    owpp: Option<RawOwpp>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOnshore {
    s_machine: Option<f64>,
    h: Option<f64>,
    droop: Option<f64>,
    t_gov: Option<f64>,
    p_set_machine: Option<f64>,
    p_load: Option<f64>,
    r_th: Option<f64>,
    l_th: Option<f64>,
    u_th: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMmc {
    r_s: Option<f64>,
    l_s: Option<f64>,
    l_d: Option<f64>,
    r_d: Option<f64>,
    c_eq: Option<f64>,
    u_eq_nom: Option<f64>,
    r_v: Option<f64>,
    t_v: Option<f64>,
    u_ac_set: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHvdcLine {
    r_dc: Option<f64>,
    l_dc: Option<f64>,
    c_dc: Option<f64>,
    u_dc_nom: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOwpp {
    r_gsc: Option<f64>,
    l_gsc: Option<f64>,
    r_thw: Option<f64>,
    l_thw: Option<f64>,
    c_link: Option<f64>,
    u_link_nom: Option<f64>,
    t_msc: Option<f64>,
    p_set: Option<f64>,
    r_vw: Option<f64>,
    t_vw: Option<f64>,
    k_hw: Option<f64>,
    k_rw: Option<f64>,
    u_ac_set: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTuning {
    omega_s: Option<f64>,
    h_ac: Option<f64>,
    h_dc: Option<f64>,
    h_ac_wtg: Option<f64>,
    delta_u_dcm: Option<f64>,
    delta_f_m_on: Option<f64>,
    delta_f_m_off: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    duration: Option<f64>,
    dt: Option<f64>,
    settle_time: Option<f64>,
    events: Option<Vec<RawEvent>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t: f64,
    kind: String,
    delta_p: Option<f64>,
    target: Option<String>,
    value: Option<f64>,
}

impl Config {
    /// Parses a configuration document, filling gaps with benchmark defaults.
    pub fn from_toml(text: &str) -> Result<Config> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("configuration parse failed: {e}")))?;
        let cfg = resolve(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The benchmark system with no overrides.
    pub fn benchmark() -> Config {
        Config::from_toml("").expect("benchmark defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.machine_params()?.validate()?;
        self.mmc_params(MmcTerminal::Onshore)?.validate()?;
        self.mmc_params(MmcTerminal::Offshore)?.validate()?;
        self.wtg_params()?.validate()?;
        self.hvdc_line_params().validate()?;
        let s = &self.scenario;
        if !(s.dt > 0.0 && s.duration > 0.0 && s.settle_time >= 0.0) {
            return Err(Error::Config(format!(
                "scenario needs dt > 0, duration > 0, settle_time >= 0; got {}, {}, {}",
                s.dt, s.duration, s.settle_time
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, ev) in s.events.iter().enumerate() {
            if ev.t < s.settle_time {
                return Err(Error::Config(format!(
                    "scenario.events[{i}].t = {} precedes settle_time = {}",
                    ev.t, s.settle_time
                )));
            }
            if ev.t < prev {
                return Err(Error::Config(format!(
                    "scenario.events[{i}] is out of order (t = {} after t = {prev})",
                    ev.t
                )));
            }
            prev = ev.t;
        }
        Ok(())
    }

    // ---- SI assembly --------------------------------------------------------

    pub fn base(&self) -> Result<PerUnitBase> {
        per_unit_base(self.system.s_n, self.system.u_n, self.system.f_n)
    }

    pub fn machine_params(&self) -> Result<SyncMachineParams> {
        let o = &self.system.onshore;
        Ok(SyncMachineParams {
            h: o.h,
            droop: o.droop,
            t_gov: o.t_gov,
            s_base: o.s_machine,
            f_n: self.system.f_n,
            p_set: o.p_set_machine,
        })
    }

    /// MMC parameters with the AC branch folded to SI: the onshore branch
    /// absorbs the machine Thevenin impedance, the offshore branch absorbs the
    /// whole WTG chain (GSC transformer + collector) since the offshore AC
    /// network is a single series path.
    pub fn mmc_params(&self, terminal: MmcTerminal) -> Result<MmcParams> {
        let base = self.base()?;
        let (m, r_extra, l_extra) = match terminal {
            MmcTerminal::Onshore => (
                &self.system.mmc_on,
                self.system.onshore.r_th,
                self.system.onshore.l_th,
            ),
            MmcTerminal::Offshore => (
                &self.system.mmc_off,
                self.system.owpp.r_gsc + self.system.owpp.r_thw,
                self.system.owpp.l_gsc + self.system.owpp.l_thw,
            ),
        };
        Ok(MmcParams {
            r_s: (m.r_s + r_extra) * base.z_b,
            l_s: (m.l_s + l_extra) * base.l_b,
            r_d: m.r_d,
            l_d: m.l_d,
            c_eq: m.c_eq,
            u_eq_nom: m.u_eq_nom,
        })
    }

    pub fn wtg_params(&self) -> Result<WtgParams> {
        let base = self.base()?;
        let w = &self.system.owpp;
        Ok(WtgParams {
            r_gsc: w.r_gsc * base.z_b,
            l_gsc: w.l_gsc * base.l_b,
            r_thw: w.r_thw * base.z_b,
            l_thw: w.l_thw * base.l_b,
            c_link: w.c_link,
            u_link_nom: w.u_link_nom,
            t_msc: w.t_msc,
        })
    }

    pub fn hvdc_line_params(&self) -> HvdcLineParams {
        let l = &self.system.hvdc_line;
        HvdcLineParams {
            r_dc: l.r_dc,
            l_dc: l.l_dc,
            c_dc: l.c_dc,
        }
    }

    /// Per-unit AC link parameters of one converter's angle-to-power plant:
    /// full series path to its remote voltage source.
    pub fn ac_link(&self, who: Converter) -> Result<AcLinkParameters> {
        let (r, l, u, e) = match who {
            Converter::MmcOnshore => (
                self.system.mmc_on.r_s + self.system.onshore.r_th,
                self.system.mmc_on.l_s + self.system.onshore.l_th,
                self.system.mmc_on.u_ac_set,
                self.system.onshore.u_th,
            ),
            Converter::MmcOffshore => (
                self.offshore_chain_r(),
                self.offshore_chain_l(),
                self.system.mmc_off.u_ac_set,
                self.system.owpp.u_ac_set,
            ),
            Converter::Wtg => (
                self.offshore_chain_r(),
                self.offshore_chain_l(),
                self.system.owpp.u_ac_set,
                self.system.mmc_off.u_ac_set,
            ),
        };
        AcLinkParameters::per_unit(r, l, 1.0, u, e)
    }

    fn offshore_chain_r(&self) -> f64 {
        self.system.owpp.r_gsc + self.system.owpp.r_thw + self.system.mmc_off.r_s
    }

    fn offshore_chain_l(&self) -> f64 {
        self.system.owpp.l_gsc + self.system.owpp.l_thw + self.system.mmc_off.l_s
    }

    /// Pre-event dispatch through each link, p.u. of the system base, signed
    /// by the converter's sending direction.
    pub fn dispatch_pu(&self, who: Converter) -> f64 {
        let p = self.system.owpp.p_set / self.system.s_n;
        match who {
            // the offshore MMC receives; its sending dispatch is negative
            Converter::MmcOffshore => -p,
            _ => p,
        }
    }

    fn vr_params(&self, who: Converter) -> Result<VirtualResistanceParams> {
        let base = self.base()?;
        let (r_v, t_v) = match who {
            Converter::MmcOnshore => (self.system.mmc_on.r_v, self.system.mmc_on.t_v),
            Converter::MmcOffshore => (self.system.mmc_off.r_v, self.system.mmc_off.t_v),
            Converter::Wtg => (self.system.owpp.r_vw, self.system.owpp.t_vw),
        };
        Ok(VirtualResistanceParams {
            r_v: r_v / base.z_b,
            t_v,
        })
    }

    /// Angle-to-power plant of one converter at its dispatch operating point,
    /// in SI (W/rad).
    pub fn gpac_si(&self, who: Converter) -> Result<RationalTransferFunction> {
        let params = self.ac_link(who)?;
        let dispatch = self.dispatch_pu(who);
        let delta = solve_delta_for_power(&params, dispatch, 1e-12)?;
        let op = operating_point(&params, delta)?;
        let vr = self.vr_params(who)?;
        let base = self.base()?;
        Ok(gpac(&params, &vr, &op, &base)?.scale(self.system.s_n))
    }

    pub fn tuning_inputs(&self, who: Converter) -> Result<TuningInputs> {
        let g = self.gpac_si(who)?;
        let gpac_dc_gain = g.eval(num_complex::Complex64::new(0.0, 0.0)).re;
        let h_ac = match who {
            Converter::Wtg => self.tuning.h_ac_wtg,
            _ => self.tuning.h_ac,
        };
        let m = match who {
            Converter::MmcOffshore => &self.system.mmc_off,
            _ => &self.system.mmc_on,
        };
        Ok(TuningInputs {
            omega_n: 2.0 * PI * self.system.f_n,
            omega_s: self.tuning.omega_s,
            h_ac,
            h_dc: self.tuning.h_dc,
            gpac_dc_gain,
            l_d: m.l_d,
            r_d: m.r_d,
            c_dc: self.system.hvdc_line.c_dc,
            l_dc: self.system.hvdc_line.l_dc,
            r_dc: self.system.hvdc_line.r_dc,
            delta_u_dcm: self.tuning.delta_u_dcm,
            delta_f_m_on: self.tuning.delta_f_m_on,
            delta_f_m_off: self.tuning.delta_f_m_off,
        })
    }

    pub fn mmc_setpoints(&self, terminal: MmcTerminal) -> Result<MmcOperatingSetpoints> {
        let m = match terminal {
            MmcTerminal::Onshore => &self.system.mmc_on,
            MmcTerminal::Offshore => &self.system.mmc_off,
        };
        Ok(MmcOperatingSetpoints {
            r_v: m.r_v,
            t_v: m.t_v,
            f_star: self.system.f_n,
            f_n: self.system.f_n,
            u_mid_star: self.system.hvdc_line.u_dc_nom,
            w_t_star: 0.5 * m.c_eq * m.u_eq_nom * m.u_eq_nom,
            r_dc_half: self.system.hvdc_line.r_dc / 2.0,
        })
    }

    pub fn wtg_setpoints(&self) -> WtgOperatingSetpoints {
        let w = &self.system.owpp;
        WtgOperatingSetpoints {
            r_vw: w.r_vw,
            t_vw: w.t_vw,
            k_hw: w.k_hw,
            k_rw: w.k_rw,
            p_set: w.p_set,
            w_link_star: 0.5 * w.c_link * w.u_link_nom * w.u_link_nom,
            u_link_nom: w.u_link_nom,
            f_star: self.system.f_n,
            f_n: self.system.f_n,
        }
    }

    /// Serializes the resolved configuration deterministically. Floats use
    /// exponent notation, which round-trips exactly, so parse(serialize(c))
    /// equals c.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let w = |s: &mut String, key: &str, v: f64| {
            let _ = writeln!(s, "{key} = {}", fmt_float(v));
        };
        s.push_str("[system]\n");
        w(&mut s, "s_n", self.system.s_n);
        w(&mut s, "u_n", self.system.u_n);
        w(&mut s, "f_n", self.system.f_n);
        s.push_str("\n[system.onshore]\n");
        let o = &self.system.onshore;
        w(&mut s, "s_machine", o.s_machine);
        w(&mut s, "h", o.h);
        w(&mut s, "droop", o.droop);
        w(&mut s, "t_gov", o.t_gov);
        w(&mut s, "p_set_machine", o.p_set_machine);
        w(&mut s, "p_load", o.p_load);
        w(&mut s, "r_th", o.r_th);
        w(&mut s, "l_th", o.l_th);
        w(&mut s, "u_th", o.u_th);
        for (name, m) in [("mmc_on", &self.system.mmc_on), ("mmc_off", &self.system.mmc_off)] {
            let _ = writeln!(s, "\n[system.{name}]");
            w(&mut s, "r_s", m.r_s);
            w(&mut s, "l_s", m.l_s);
            w(&mut s, "l_d", m.l_d);
            w(&mut s, "r_d", m.r_d);
            w(&mut s, "c_eq", m.c_eq);
            w(&mut s, "u_eq_nom", m.u_eq_nom);
            w(&mut s, "r_v", m.r_v);
            w(&mut s, "t_v", m.t_v);
            w(&mut s, "u_ac_set", m.u_ac_set);
        }
        s.push_str("\n[system.hvdc_line]\n");
        let l = &self.system.hvdc_line;
        w(&mut s, "r_dc", l.r_dc);
        w(&mut s, "l_dc", l.l_dc);
        w(&mut s, "c_dc", l.c_dc);
        w(&mut s, "u_dc_nom", l.u_dc_nom);
        s.push_str("\n[system.owpp]\n");
        let p = &self.system.owpp;
        w(&mut s, "r_gsc", p.r_gsc);
        w(&mut s, "l_gsc", p.l_gsc);
        w(&mut s, "r_thw", p.r_thw);
        w(&mut s, "l_thw", p.l_thw);
        w(&mut s, "c_link", p.c_link);
        w(&mut s, "u_link_nom", p.u_link_nom);
        w(&mut s, "t_msc", p.t_msc);
        w(&mut s, "p_set", p.p_set);
        w(&mut s, "r_vw", p.r_vw);
        w(&mut s, "t_vw", p.t_vw);
        w(&mut s, "k_hw", p.k_hw);
        w(&mut s, "k_rw", p.k_rw);
        w(&mut s, "u_ac_set", p.u_ac_set);
        s.push_str("\n[tuning]\n");
        let t = &self.tuning;
        w(&mut s, "omega_s", t.omega_s);
        w(&mut s, "h_ac", t.h_ac);
        w(&mut s, "h_dc", t.h_dc);
        w(&mut s, "h_ac_wtg", t.h_ac_wtg);
        w(&mut s, "delta_u_dcm", t.delta_u_dcm);
        w(&mut s, "delta_f_m_on", t.delta_f_m_on);
        w(&mut s, "delta_f_m_off", t.delta_f_m_off);
        if let Some(g) = &self.gains {
            s.push('\n');
            s.push_str(&g.to_toml_sections("gains"));
        }
        s.push_str("\n[scenario]\n");
        let sc = &self.scenario;
        w(&mut s, "duration", sc.duration);
        w(&mut s, "dt", sc.dt);
        w(&mut s, "settle_time", sc.settle_time);
        for ev in &sc.events {
            s.push_str("\n[[scenario.events]]\n");
            w(&mut s, "t", ev.t);
            match &ev.kind {
                EventKind::OnshoreLoadStep { delta_p } => {
                    s.push_str("kind = \"onshore_load_step\"\n");
                    w(&mut s, "delta_p", *delta_p);
                }
                EventKind::WindPowerStep { delta_p } => {
                    s.push_str("kind = \"wind_power_step\"\n");
                    w(&mut s, "delta_p", *delta_p);
                }
                EventKind::SetpointChange { target, value } => {
                    s.push_str("kind = \"setpoint_change\"\n");
                    let _ = writeln!(s, "target = \"{target}\"");
                    w(&mut s, "value", *value);
                }
            }
        }
        s
    }
}

/// Which converter a per-converter query concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Converter {
    MmcOnshore,
    MmcOffshore,
    Wtg,
}

fn fmt_float(v: f64) -> String {
    // exponent form parses back to the identical f64 and never collides with
    // TOML integer syntax
    format!("{v:e}")
}

fn resolve(raw: RawConfig) -> Result<Config> {
    use defaults as d;
    let sys = raw.system.unwrap_or_default();
    let on = sys.onshore.unwrap_or_default();
    let mon = sys.mmc_on.unwrap_or_default();
    let moff = sys.mmc_off.unwrap_or_default();
    let line = sys.hvdc_line.unwrap_or_default();
    let owpp = sys.owpp.unwrap_or_default();
    let tun = raw.tuning.unwrap_or_default();
    let scen = raw.scenario.unwrap_or_default();

    let system = SystemConfig {
        s_n: opt!(sys.s_n, d::S_N),
        u_n: opt!(sys.u_n, d::U_N),
        f_n: opt!(sys.f_n, d::F_N),
        onshore: OnshoreConfig {
            s_machine: opt!(on.s_machine, d::S_MACHINE),
            h: opt!(on.h, d::H_MACHINE),
            droop: opt!(on.droop, d::DROOP),
            t_gov: opt!(on.t_gov, d::T_GOV),
            p_set_machine: opt!(on.p_set_machine, d::P_SET_MACHINE),
            p_load: opt!(on.p_load, d::P_LOAD),
            r_th: opt!(on.r_th, d::R_TH),
            l_th: opt!(on.l_th, d::L_TH),
            u_th: opt!(on.u_th, d::U_TH),
        },
        mmc_on: MmcConfig {
            r_s: opt!(mon.r_s, d::R_S),
            l_s: opt!(mon.l_s, d::L_S),
            l_d: opt!(mon.l_d, d::L_D),
            r_d: opt!(mon.r_d, d::R_D),
            c_eq: opt!(mon.c_eq, d::C_EQ),
            u_eq_nom: opt!(mon.u_eq_nom, d::U_EQ_NOM),
            r_v: opt!(mon.r_v, d::R_V),
            t_v: opt!(mon.t_v, d::T_V_ON),
            u_ac_set: opt!(mon.u_ac_set, d::U_AC_SET),
        },
        mmc_off: MmcConfig {
            r_s: opt!(moff.r_s, d::R_S_OFF),
            l_s: opt!(moff.l_s, d::L_S_OFF),
            l_d: opt!(moff.l_d, d::L_D),
            r_d: opt!(moff.r_d, d::R_D),
            c_eq: opt!(moff.c_eq, d::C_EQ),
            u_eq_nom: opt!(moff.u_eq_nom, d::U_EQ_NOM),
            r_v: opt!(moff.r_v, d::R_V),
            t_v: opt!(moff.t_v, d::T_V_OFF),
            u_ac_set: opt!(moff.u_ac_set, d::U_AC_SET),
        },
        hvdc_line: HvdcLineConfig {
            r_dc: opt!(line.r_dc, d::R_DC),
            l_dc: opt!(line.l_dc, d::L_DC),
            c_dc: opt!(line.c_dc, d::C_DC),
            u_dc_nom: opt!(line.u_dc_nom, d::U_DC_NOM),
        },
        owpp: OwppConfig {
            r_gsc: opt!(owpp.r_gsc, d::R_GSC),
            l_gsc: opt!(owpp.l_gsc, d::L_GSC),
            r_thw: opt!(owpp.r_thw, d::R_THW),
            l_thw: opt!(owpp.l_thw, d::L_THW),
            c_link: opt!(owpp.c_link, d::C_LINK),
            u_link_nom: opt!(owpp.u_link_nom, d::U_LINK_NOM),
            t_msc: opt!(owpp.t_msc, d::T_MSC),
            p_set: opt!(owpp.p_set, d::P_SET_WTG),
            r_vw: opt!(owpp.r_vw, d::R_VW),
            t_vw: opt!(owpp.t_vw, d::T_VW),
            k_hw: opt!(owpp.k_hw, 0.0),
            k_rw: opt!(owpp.k_rw, 0.0),
            u_ac_set: opt!(owpp.u_ac_set, d::U_AC_SET),
        },
    };
    let tuning = TuningConfig {
        omega_s: opt!(tun.omega_s, d::OMEGA_S),
        h_ac: opt!(tun.h_ac, d::H_AC),
        h_dc: opt!(tun.h_dc, d::H_DC),
        h_ac_wtg: opt!(tun.h_ac_wtg, d::H_AC_WTG),
        delta_u_dcm: opt!(tun.delta_u_dcm, d::DELTA_U_DCM),
        delta_f_m_on: opt!(tun.delta_f_m_on, d::DELTA_F_M),
        delta_f_m_off: opt!(tun.delta_f_m_off, d::DELTA_F_M),
    };
    let events = match scen.events {
        Some(raw_events) => raw_events
            .into_iter()
            .enumerate()
            .map(|(i, e)| resolve_event(i, e))
            .collect::<Result<Vec<_>>>()?,
        None => vec![EventConfig {
            t: d::LOAD_STEP_TIME,
            kind: EventKind::OnshoreLoadStep {
                delta_p: d::LOAD_STEP,
            },
        }],
    };
    let scenario = ScenarioConfig {
        duration: opt!(scen.duration, d::DURATION),
        dt: opt!(scen.dt, d::DT),
        settle_time: opt!(scen.settle_time, d::SETTLE_TIME),
        events,
    };
    let gains = raw.gains.map(resolve_gains).transpose()?;
    Ok(Config {
        system,
        tuning,
        gains,
        scenario,
    })
}

fn resolve_event(i: usize, e: RawEvent) -> Result<EventConfig> {
    let kind = match e.kind.as_str() {
        "onshore_load_step" => EventKind::OnshoreLoadStep {
            delta_p: e.delta_p.ok_or_else(|| {
                Error::Config(format!("scenario.events[{i}]: onshore_load_step needs delta_p"))
            })?,
        },
        "wind_power_step" => EventKind::WindPowerStep {
            delta_p: e.delta_p.ok_or_else(|| {
                Error::Config(format!("scenario.events[{i}]: wind_power_step needs delta_p"))
            })?,
        },
        "setpoint_change" => EventKind::SetpointChange {
            target: e.target.ok_or_else(|| {
                Error::Config(format!("scenario.events[{i}]: setpoint_change needs target"))
            })?,
            value: e.value.ok_or_else(|| {
                Error::Config(format!("scenario.events[{i}]: setpoint_change needs value"))
            })?,
        },
        other => {
            return Err(Error::Config(format!(
                "scenario.events[{i}].kind = {other:?} is not one of onshore_load_step, wind_power_step, setpoint_change"
            )))
        }
    };
    Ok(EventConfig { t: e.t, kind })
}

// ---- gains file -------------------------------------------------------------

/// Flat controller gain sets plus the provenance of the tuning run that
/// produced them. This is both the `[gains]` override section of a config and
/// the payload of a standalone gains file.
#[derive(Debug, Clone, PartialEq)]
pub struct GainsData {
    pub provenance: Provenance,
    pub mmc_on: MmcGainsEntry,
    pub mmc_off: MmcGainsEntry,
    pub wtg: WtgGainsEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub h_ac: f64,
    pub h_dc: f64,
    pub h_ac_wtg: f64,
    pub omega_idc: f64,
    pub gpac_dc_gain_on: f64,
    pub gpac_dc_gain_off: f64,
    pub gpac_dc_gain_wtg: f64,
    pub dispatch_pu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmcGainsEntry {
    pub k_h: f64,
    pub k_d: f64,
    pub k_r: f64,
    pub r_v: f64,
    pub t_v: f64,
    pub k_p_udc: f64,
    pub k_i_udc: f64,
    pub k_p_idc: f64,
    pub k_i_idc: f64,
    pub cmp_num: Vec<f64>,
    pub cmp_den: Vec<f64>,
    pub f_star: f64,
    pub f_n: f64,
    pub u_mid_star: f64,
    pub w_t_star: f64,
    pub r_dc_half: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtgGainsEntry {
    pub k_hlink: f64,
    pub k_dlink: f64,
    pub r_vw: f64,
    pub t_vw: f64,
    pub k_hw: f64,
    pub k_rw: f64,
    pub p_set: f64,
    pub w_link_star: f64,
    pub u_link_nom: f64,
    pub f_star: f64,
    pub f_n: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    provenance: RawProvenance,
    mmc_on: RawMmcGains,
    mmc_off: RawMmcGains,
    wtg: RawWtgGains,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProvenance {
    h_ac: f64,
    h_dc: f64,
    h_ac_wtg: f64,
    omega_idc: f64,
    gpac_dc_gain_on: f64,
    gpac_dc_gain_off: f64,
    gpac_dc_gain_wtg: f64,
    dispatch_pu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMmcGains {
    k_h: f64,
    k_d: f64,
    k_r: f64,
    r_v: f64,
    t_v: f64,
    k_p_udc: f64,
    k_i_udc: f64,
    k_p_idc: f64,
    k_i_idc: f64,
    cmp_num: Vec<f64>,
    cmp_den: Vec<f64>,
    f_star: f64,
    f_n: f64,
    u_mid_star: f64,
    w_t_star: f64,
    r_dc_half: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWtgGains {
    k_hlink: f64,
    k_dlink: f64,
    r_vw: f64,
    t_vw: f64,
    k_hw: f64,
    k_rw: f64,
    p_set: f64,
    w_link_star: f64,
    u_link_nom: f64,
    f_star: f64,
    f_n: f64,
}

fn resolve_gains(raw: RawGains) -> Result<GainsData> {
    let p = raw.provenance;
    let m = |r: RawMmcGains| MmcGainsEntry {
        k_h: r.k_h,
        k_d: r.k_d,
        k_r: r.k_r,
        r_v: r.r_v,
        t_v: r.t_v,
        k_p_udc: r.k_p_udc,
        k_i_udc: r.k_i_udc,
        k_p_idc: r.k_p_idc,
        k_i_idc: r.k_i_idc,
        cmp_num: r.cmp_num,
        cmp_den: r.cmp_den,
        f_star: r.f_star,
        f_n: r.f_n,
        u_mid_star: r.u_mid_star,
        w_t_star: r.w_t_star,
        r_dc_half: r.r_dc_half,
    };
    Ok(GainsData {
        provenance: Provenance {
            h_ac: p.h_ac,
            h_dc: p.h_dc,
            h_ac_wtg: p.h_ac_wtg,
            omega_idc: p.omega_idc,
            gpac_dc_gain_on: p.gpac_dc_gain_on,
            gpac_dc_gain_off: p.gpac_dc_gain_off,
            gpac_dc_gain_wtg: p.gpac_dc_gain_wtg,
            dispatch_pu: p.dispatch_pu,
        },
        mmc_on: m(raw.mmc_on),
        mmc_off: m(raw.mmc_off),
        wtg: WtgGainsEntry {
            k_hlink: raw.wtg.k_hlink,
            k_dlink: raw.wtg.k_dlink,
            r_vw: raw.wtg.r_vw,
            t_vw: raw.wtg.t_vw,
            k_hw: raw.wtg.k_hw,
            k_rw: raw.wtg.k_rw,
            p_set: raw.wtg.p_set,
            w_link_star: raw.wtg.w_link_star,
            u_link_nom: raw.wtg.u_link_nom,
            f_star: raw.wtg.f_star,
            f_n: raw.wtg.f_n,
        },
    })
}

impl MmcGainsEntry {
    pub fn from_gains(g: &MmcControllerGains) -> MmcGainsEntry {
        MmcGainsEntry {
            k_h: g.k_h,
            k_d: g.k_d,
            k_r: g.k_r,
            r_v: g.r_v,
            t_v: g.t_v,
            k_p_udc: g.k_p_udc,
            k_i_udc: g.k_i_udc,
            k_p_idc: g.k_p_idc,
            k_i_idc: g.k_i_idc,
            cmp_num: g.cmp.num().coeffs().to_vec(),
            cmp_den: g.cmp.den().coeffs().to_vec(),
            f_star: g.f_star,
            f_n: g.f_n,
            u_mid_star: g.u_mid_star,
            w_t_star: g.w_t_star,
            r_dc_half: g.r_dc_half,
        }
    }

    pub fn to_gains(&self) -> Result<MmcControllerGains> {
        Ok(MmcControllerGains {
            k_h: self.k_h,
            k_d: self.k_d,
            k_r: self.k_r,
            r_v: self.r_v,
            t_v: self.t_v,
            k_p_udc: self.k_p_udc,
            k_i_udc: self.k_i_udc,
            k_p_idc: self.k_p_idc,
            k_i_idc: self.k_i_idc,
            cmp: RationalTransferFunction::from_coeffs(
                self.cmp_num.clone(),
                self.cmp_den.clone(),
            )?,
            f_star: self.f_star,
            f_n: self.f_n,
            u_mid_star: self.u_mid_star,
            w_t_star: self.w_t_star,
            r_dc_half: self.r_dc_half,
        })
    }
}

impl WtgGainsEntry {
    pub fn from_gains(g: &WtgControllerGains) -> WtgGainsEntry {
        WtgGainsEntry {
            k_hlink: g.k_hlink,
            k_dlink: g.k_dlink,
            r_vw: g.r_vw,
            t_vw: g.t_vw,
            k_hw: g.k_hw,
            k_rw: g.k_rw,
            p_set: g.p_set,
            w_link_star: g.w_link_star,
            u_link_nom: g.u_link_nom,
            f_star: g.f_star,
            f_n: g.f_n,
        }
    }

    pub fn to_gains(&self) -> WtgControllerGains {
        WtgControllerGains {
            k_hlink: self.k_hlink,
            k_dlink: self.k_dlink,
            r_vw: self.r_vw,
            t_vw: self.t_vw,
            k_hw: self.k_hw,
            k_rw: self.k_rw,
            p_set: self.p_set,
            w_link_star: self.w_link_star,
            u_link_nom: self.u_link_nom,
            f_star: self.f_star,
            f_n: self.f_n,
        }
    }
}

impl GainsData {
    /// Parses a standalone gains file.
    pub fn from_toml(text: &str) -> Result<GainsData> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Top {
            provenance: RawProvenance,
            mmc_on: RawMmcGains,
            mmc_off: RawMmcGains,
            wtg: RawWtgGains,
        }
        let top: Top = toml::from_str(text)
            .map_err(|e| Error::Config(format!("gains file parse failed: {e}")))?;
        resolve_gains(RawGains {
            provenance: top.provenance,
            mmc_on: top.mmc_on,
            mmc_off: top.mmc_off,
            wtg: top.wtg,
        })
    }

    /// Writes the standalone gains file. Deterministic: identical data always
    /// produces identical bytes, so write -> read -> write is a fixed point.
    pub fn to_toml(&self) -> String {
        self.to_toml_sections("")
    }

    fn to_toml_sections(&self, prefix: &str) -> String {
        let dot = if prefix.is_empty() { "" } else { "." };
        let mut s = String::new();
        let w = |s: &mut String, key: &str, v: f64, unit: &str| {
            if unit.is_empty() {
                let _ = writeln!(s, "{key} = {}", fmt_float(v));
            } else {
                let _ = writeln!(s, "{key} = {} # {unit}", fmt_float(v));
            }
        };
        let warr = |s: &mut String, key: &str, v: &[f64]| {
            let parts: Vec<String> = v.iter().map(|x| fmt_float(*x)).collect();
            let _ = writeln!(s, "{key} = [{}]", parts.join(", "));
        };
        let _ = writeln!(s, "[{prefix}{dot}provenance]");
        let p = &self.provenance;
        w(&mut s, "h_ac", p.h_ac, "");
        w(&mut s, "h_dc", p.h_dc, "");
        w(&mut s, "h_ac_wtg", p.h_ac_wtg, "");
        w(&mut s, "omega_idc", p.omega_idc, "rad/s");
        w(&mut s, "gpac_dc_gain_on", p.gpac_dc_gain_on, "W/rad");
        w(&mut s, "gpac_dc_gain_off", p.gpac_dc_gain_off, "W/rad");
        w(&mut s, "gpac_dc_gain_wtg", p.gpac_dc_gain_wtg, "W/rad");
        w(&mut s, "dispatch_pu", p.dispatch_pu, "p.u.");
        for (name, m) in [("mmc_on", &self.mmc_on), ("mmc_off", &self.mmc_off)] {
            let _ = writeln!(s, "\n[{prefix}{dot}{name}]");
            w(&mut s, "k_h", m.k_h, "Hz/J");
            w(&mut s, "k_d", m.k_d, "rad/Hz");
            w(&mut s, "k_r", m.k_r, "V/Hz");
            w(&mut s, "r_v", m.r_v, "ohm");
            w(&mut s, "t_v", m.t_v, "s");
            w(&mut s, "k_p_udc", m.k_p_udc, "A/V");
            w(&mut s, "k_i_udc", m.k_i_udc, "A/(V s)");
            w(&mut s, "k_p_idc", m.k_p_idc, "V/A");
            w(&mut s, "k_i_idc", m.k_i_idc, "V/(A s)");
            warr(&mut s, "cmp_num", &m.cmp_num);
            warr(&mut s, "cmp_den", &m.cmp_den);
            w(&mut s, "f_star", m.f_star, "Hz");
            w(&mut s, "f_n", m.f_n, "Hz");
            w(&mut s, "u_mid_star", m.u_mid_star, "V");
            w(&mut s, "w_t_star", m.w_t_star, "J");
            w(&mut s, "r_dc_half", m.r_dc_half, "ohm");
        }
        let _ = writeln!(s, "\n[{prefix}{dot}wtg]");
        let g = &self.wtg;
        w(&mut s, "k_hlink", g.k_hlink, "Hz/J");
        w(&mut s, "k_dlink", g.k_dlink, "rad/Hz");
        w(&mut s, "r_vw", g.r_vw, "ohm");
        w(&mut s, "t_vw", g.t_vw, "s");
        w(&mut s, "k_hw", g.k_hw, "W s/Hz");
        w(&mut s, "k_rw", g.k_rw, "W/Hz");
        w(&mut s, "p_set", g.p_set, "W");
        w(&mut s, "w_link_star", g.w_link_star, "J");
        w(&mut s, "u_link_nom", g.u_link_nom, "V");
        w(&mut s, "f_star", g.f_star, "Hz");
        w(&mut s, "f_n", g.f_n, "Hz");
        s
    }
}
