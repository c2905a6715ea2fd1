//! Executable release checklist. Every published behavior claim of the
//! toolkit is checked here at its stated tolerance: gain formulas, loop
//! margins, pole placement, linear/nonlinear agreement, the benchmark
//! frequency-support runs, energy bookkeeping, and the locality audit.
//!
//! The `acceptance` integration test and `gfmsim verify` both call
//! [`run_suite`] and print one line per check, so a regression names the
//! claim it broke instead of a panicking assertion somewhere downstream.

use std::f64::consts::PI;
use std::time::Instant;

use crate::acpower::{
    gpac, gpac_pole_metrics, operating_point, solve_delta_for_power, AcLinkParameters,
    VirtualResistanceParams,
};
use crate::config::{Config, Converter};
use crate::control::{locality_audit, MmcController, RemoteCoupledProbe, WtgController};
use crate::error::{Error, Result};
use crate::linsys::{feedback_unity, RationalTransferFunction, TimeSeries};
use crate::sim::{
    build_gain_set, compute_metrics, cumtrapz, simulate, single_link_angle_step,
    verify_invariants, windowed_rocof, Engine, Metrics, SimLog,
};
use crate::tuning::{
    default_virtual_resistance, design_compensator, tune_dc_current, tune_dc_voltage,
    tune_energy_loop, tune_mmc, MmcTerminal,
};

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct AcceptanceCheck {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Quantitative evidence: the measured numbers next to their limits.
    pub detail: String,
}

pub fn suite_passed(checks: &[AcceptanceCheck]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Runs the whole checklist against one configuration. Always returns all
/// eleven outcomes; a check that cannot even run reports as failed with the
/// error text as its evidence.
pub fn run_suite(cfg: &Config) -> Vec<AcceptanceCheck> {
    let mut out = Vec::new();
    push(&mut out, 1, "gain formulas reproduce the published controller set", gain_formulas());
    push(&mut out, 2, "energy and dc-voltage loop margins sit in the design window", loop_margins(cfg));
    push(&mut out, 3, "virtual resistance places the power-angle poles on the base circle", pole_placement(cfg));
    push(&mut out, 4, "dc current loop matches its first-order design model", current_loop_step(cfg));
    push(&mut out, 5, "linearized power-angle model matches the nonlinear dq response", small_signal_agreement(cfg));

    // the remaining checks share three full benchmark runs plus the gain sweeps
    match PresetRuns::prepare(cfg) {
        Ok(runs) => {
            push(&mut out, 6, "island frequency deviations stay proportional to the droop ratio", droop_proportionality(&runs));
            push(&mut out, 7, "droop preset delivers the commanded containment power", containment_delivery(cfg, &runs));
            push(&mut out, 8, "inertia preset delivers the commanded inertial energy", inertial_delivery(&runs));
            push(&mut out, 9, "stored-energy bookkeeping closes on every benchmark run", energy_bookkeeping(&runs));
            push(&mut out, 10, "shipped controllers use only local measurements", locality(cfg));
            push(&mut out, 11, "frequency-support presets improve nadir and rocof monotonically", preset_improvements(&runs));
        }
        Err(e) => {
            let names: [(usize, &'static str); 6] = [
                (6, "island frequency deviations stay proportional to the droop ratio"),
                (7, "droop preset delivers the commanded containment power"),
                (8, "inertia preset delivers the commanded inertial energy"),
                (9, "stored-energy bookkeeping closes on every benchmark run"),
                (10, "shipped controllers use only local measurements"),
                (11, "frequency-support presets improve nadir and rocof monotonically"),
            ];
            // the locality audit does not need the runs, so still attempt it
            for (id, name) in names {
                if id == 10 {
                    push(&mut out, id, name, locality(cfg));
                } else {
                    out.push(AcceptanceCheck {
                        id,
                        name,
                        passed: false,
                        detail: format!("benchmark runs unavailable: {e}"),
                    });
                }
            }
        }
    }
    out
}

fn push(out: &mut Vec<AcceptanceCheck>, id: usize, name: &'static str, r: Result<(bool, String)>) {
    let (passed, detail) = match r {
        Ok((p, d)) => (p, d),
        Err(e) => (false, format!("errored: {e}")),
    };
    out.push(AcceptanceCheck { id, name, passed, detail });
}

fn rel(actual: f64, reference: f64) -> f64 {
    (actual - reference).abs() / reference.abs()
}

// ---- 1: closed-form gains against the published set ---------------------------

/// The published controller set for the 1000 MVA / 640 kV benchmark, used as
/// fixed reference values regardless of the configuration under test: the
/// formulas themselves are the claim here.
fn gain_formulas() -> Result<(bool, String)> {
    let t0 = Instant::now();
    let omega_n = 2.0 * PI * 50.0;

    // the angle-lead gain depends only on the bandwidth ratio
    let (_, k_d) = tune_energy_loop(5.0, 1.0, omega_n)?;
    let (_, k_dlink) = tune_energy_loop(15.0, 1.0, omega_n)?;
    let (k_p_udc, k_i_udc) = tune_dc_voltage(4.8e-5, 1000.0, 4.0)?;
    let (k_p_idc, k_i_idc) = tune_dc_current(0.13, 2.048, 1000.0)?;

    // compensator coefficients, ascending powers of s, as printed for the
    // benchmark line; the library normalizes to a monic denominator, so
    // rescale both sides to the printed leading constant before comparing
    let cmp = design_compensator(4.8e-5, 0.0729, 4.375, 1000.0)?;
    let num_ref = [16.0, 2.1e-4, 3.5e-6];
    let den_ref = [16.0, 3.2e-3, 1.6e-7];
    let scale = 16.0 / cmp.den().coeffs()[0];
    let mut worst_coeff = 0.0f64;
    for (c, r) in cmp.num().coeffs().iter().zip(num_ref) {
        worst_coeff = worst_coeff.max(rel(c * scale, r));
    }
    for (c, r) in cmp.den().coeffs().iter().zip(den_ref) {
        worst_coeff = worst_coeff.max(rel(c * scale, r));
    }

    let elapsed = t0.elapsed().as_secs_f64();
    let exact = 1e-12;
    let ok = rel(k_d, 0.1) < exact
        && rel(k_dlink, 0.31) < 0.05
        && rel(k_p_udc, 0.024) < exact
        && rel(k_i_udc, 6.1) < 0.02
        && rel(k_p_idc, 130.0) < exact
        && rel(k_i_idc, 2048.0) < exact
        && worst_coeff < 5e-3
        && elapsed < 1.0;
    let detail = format!(
        "K_D {k_d:.4} rad/Hz, K_Dlink {k_dlink:.3} (ref 0.31, err {:.1}%), U_dc PI ({k_p_udc:.4}, {:.3}) \
         (K_i ref 6.1, err {:.1}%), I_dc PI ({k_p_idc:.0}, {k_i_idc:.0}), worst compensator \
         coefficient err {:.1e} (limit 5e-3), {:.0} ms",
        100.0 * rel(k_dlink, 0.31),
        k_i_udc,
        100.0 * rel(k_i_udc, 6.1),
        worst_coeff,
        1e3 * elapsed,
    );
    Ok((ok, detail))
}

// ---- 2: loop-shaping margins ---------------------------------------------------

fn loop_margins(cfg: &Config) -> Result<(bool, String)> {
    let t0 = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (who, term, label) in [
        (Converter::MmcOnshore, MmcTerminal::Onshore, "onshore"),
        (Converter::MmcOffshore, MmcTerminal::Offshore, "offshore"),
    ] {
        let rep = tune_mmc(
            &cfg.tuning_inputs(who)?,
            term,
            &cfg.gpac_si(who)?,
            &cfg.mmc_setpoints(term)?,
        )?;
        let pm_e = rep.energy_margins.phase_margin_deg;
        let pm_d = rep.dc_margins.phase_margin_deg;
        ok &= (25.0..=40.0).contains(&pm_e) && rep.crossover_placement_error <= 0.15;
        ok &= (25.0..=40.0).contains(&pm_d) && rep.dc_crossover_placement_error <= 0.15;
        parts.push(format!(
            "{label} energy PM {pm_e:.1} deg / crossover err {:.1}%, dc PM {pm_d:.1} deg / err {:.1}%",
            100.0 * rep.crossover_placement_error,
            100.0 * rep.dc_crossover_placement_error,
        ));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    Ok((ok, format!("{} (PM window [25, 40] deg, crossover within 15%), {:.0} ms", parts.join("; "), 1e3 * elapsed)))
}

// ---- 3: damped power-angle poles -----------------------------------------------

fn pole_placement(cfg: &Config) -> Result<(bool, String)> {
    let base = cfg.base()?;
    // design-study fixture: a weak, nearly lossless link, so the pole pair
    // stays complex across the whole resistance sweep; the benchmark's stiff
    // combined link would go overdamped before R_v reaches 0.4 pu
    let link = AcLinkParameters::per_unit(0.01, 0.6, 1.0, 1.0, 1.0)?;
    let omega_n = 2.0 * PI * cfg.system.f_n;
    let vr0 = default_virtual_resistance(omega_n, 1.0)?;
    let dispatch = 0.8;
    let delta = solve_delta_for_power(&link, dispatch, 1e-12)?;
    let op = operating_point(&link, delta)?;

    let g = gpac(&link, &vr0, &op, &base)?;
    let (wn, zeta0) = gpac_pole_metrics(&g)?;
    let mag_err = rel(wn, base.omega_b);
    let mut ok = mag_err < 0.01;

    // damping must grow strictly with the virtual resistance
    let mut zetas = Vec::new();
    for k in 0..5 {
        let r_v = 0.05 + 0.35 * k as f64 / 4.0;
        let vr = VirtualResistanceParams { r_v, t_v: vr0.t_v };
        let gk = gpac(&link, &vr, &op, &base)?;
        zetas.push(gpac_pole_metrics(&gk)?.1);
    }
    let monotone = zetas.windows(2).all(|w| w[1] > w[0]);
    ok &= monotone;

    let detail = format!(
        "|poles| {wn:.1} rad/s vs base {:.1} (err {:.2}%, limit 1%); zeta {zeta0:.3} at default R_v, \
         sweep over [0.05, 0.4] pu {} ({:.3} to {:.3})",
        base.omega_b,
        100.0 * mag_err,
        if monotone { "strictly increasing" } else { "NOT monotone" },
        zetas[0],
        zetas[4],
    );
    Ok((ok, detail))
}

// ---- 4: current-loop step response ---------------------------------------------

fn current_loop_step(cfg: &Config) -> Result<(bool, String)> {
    let m = &cfg.system.mmc_on;
    let omega_idc = cfg.tuning.omega_s / 10.0;
    let (k_p, k_i) = tune_dc_current(m.l_d, m.r_d, omega_idc)?;
    let pi_ctrl = RationalTransferFunction::from_coeffs(vec![k_i, k_p], vec![0.0, 1.0])?;
    let branch = RationalTransferFunction::from_coeffs(vec![1.0], vec![m.r_d, m.l_d])?;
    let closed = feedback_unity(&pi_ctrl.series(&branch)?)?;

    let t_end = 8.0 / omega_idc;
    let dt = 1e-3 / omega_idc;
    let resp = closed.step_response(t_end, dt)?;
    let mut worst = 0.0f64;
    for (t, y) in resp.t().iter().zip(resp.y()) {
        let ideal = 1.0 - (-omega_idc * t).exp();
        worst = worst.max((y - ideal).abs());
    }
    // final value is exactly 1 (integrating controller), so the deviation is
    // already relative
    let ok = worst < 0.02;
    Ok((ok, format!(
        "worst deviation from 1 - exp(-{omega_idc:.0} t) is {:.2}% of final value (limit 2%)",
        100.0 * worst
    )))
}

// ---- 5: linear vs nonlinear angle step -----------------------------------------

fn small_signal_agreement(cfg: &Config) -> Result<(bool, String)> {
    let base = cfg.base()?;
    let link = cfg.ac_link(Converter::MmcOnshore)?;
    let r_v_pu = cfg.system.mmc_on.r_v / base.z_b;
    let t_v = cfg.system.mmc_on.t_v;
    let dispatch = cfg.dispatch_pu(Converter::MmcOnshore);
    let g = cfg.gpac_si(Converter::MmcOnshore)?;

    let dtheta = 0.01;
    let nonlinear =
        single_link_angle_step(&link, r_v_pu, t_v, &base, dispatch, dtheta, 0.1, 50e-6)?;
    let linear = g.step_response(0.1, 50e-6)?;
    let peak_nl = nonlinear.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak_lin = linear.y().iter().map(|v| (v * dtheta).abs()).fold(0.0f64, f64::max);
    let err = (peak_nl - peak_lin).abs() / peak_lin;
    let ok = err <= 0.05;
    Ok((ok, format!(
        "peak power deviation {:.3} MW nonlinear vs {:.3} MW linear over 100 ms (err {:.1}%, limit 5%)",
        1e-6 * peak_nl,
        1e-6 * peak_lin,
        100.0 * err
    )))
}

// ---- shared benchmark runs ------------------------------------------------------

/// Reference workload for the wall-clock budget: 5 s of settling plus 20 s of
/// logged dynamics at a 50 us step.
const REF_STEPS: f64 = 25.0 / 50e-6;
const WALL_BUDGET_S: f64 = 30.0;

/// Post-event observation window for nadir / rocof extraction, seconds. Short
/// enough to fit the trimmed sweep runs, long enough to contain the nadir.
const OBS_WINDOW_S: f64 = 4.5;

struct PresetRuns {
    event_t: f64,
    f_n: f64,
    k_rw_full: f64,
    k_hw_full: f64,
    base: (SimLog, Engine),
    fcr: (SimLog, Engine),
    fcr_metrics: Metrics,
    fcr_wall_s: f64,
    fcr_steps: f64,
    inertia: (SimLog, Engine),
    /// (gain, |f_nadir - f_n|) for the droop sweep, ascending gain.
    depth_sweep: Vec<(f64, f64)>,
    /// (gain, max rocof) for the inertia sweep, ascending gain.
    rocof_sweep: Vec<(f64, f64)>,
}

impl PresetRuns {
    fn prepare(cfg: &Config) -> Result<PresetRuns> {
        let event_t = cfg
            .scenario
            .events
            .first()
            .map(|e| e.t)
            .ok_or_else(|| {
                Error::MetricsUnavailable("configuration defines no disturbance event".into())
            })?;
        let f_n = cfg.system.f_n;
        // 5% droop on the plant rating, and 2H = 4 s of rated inertia
        let k_rw_full = cfg.system.s_n / (0.05 * f_n);
        let k_hw_full = 4.0 * cfg.system.s_n / f_n;
        // steady-state metrics need 10 s of post-event record
        let horizon = (event_t + 12.0).max(cfg.scenario.duration);

        let base = simulate(cfg)?;

        let mut fcr_cfg = cfg.clone();
        fcr_cfg.system.owpp.k_rw = k_rw_full;
        fcr_cfg.system.owpp.k_hw = 0.0;
        fcr_cfg.scenario.duration = horizon;
        let t0 = Instant::now();
        let fcr = simulate(&fcr_cfg)?;
        let fcr_wall_s = t0.elapsed().as_secs_f64();
        let fcr_steps =
            (fcr_cfg.scenario.settle_time + fcr_cfg.scenario.duration) / fcr_cfg.scenario.dt;
        let fcr_metrics = compute_metrics(&fcr.0, event_t)?;

        let mut in_cfg = cfg.clone();
        in_cfg.system.owpp.k_hw = k_hw_full;
        in_cfg.system.owpp.k_rw = 0.0;
        in_cfg.scenario.duration = horizon;
        let inertia = simulate(&in_cfg)?;

        // interior sweep points only need the observation window, so trim them
        let sweep_duration = event_t + OBS_WINDOW_S + 0.5;
        let mut depth_sweep = vec![(0.0, post_event_window(&base.0, event_t, f_n)?.0)];
        for frac in [0.25, 0.5, 0.75] {
            let mut c = cfg.clone();
            c.system.owpp.k_rw = frac * k_rw_full;
            c.system.owpp.k_hw = 0.0;
            c.scenario.duration = sweep_duration;
            let (log, _) = simulate(&c)?;
            depth_sweep.push((frac * k_rw_full, post_event_window(&log, event_t, f_n)?.0));
        }
        depth_sweep.push((k_rw_full, post_event_window(&fcr.0, event_t, f_n)?.0));

        let mut rocof_sweep = vec![(0.0, post_event_window(&base.0, event_t, f_n)?.1)];
        for frac in [0.25, 0.5, 0.75] {
            let mut c = cfg.clone();
            c.system.owpp.k_hw = frac * k_hw_full;
            c.system.owpp.k_rw = 0.0;
            c.scenario.duration = sweep_duration;
            let (log, _) = simulate(&c)?;
            rocof_sweep.push((frac * k_hw_full, post_event_window(&log, event_t, f_n)?.1));
        }
        rocof_sweep.push((k_hw_full, post_event_window(&inertia.0, event_t, f_n)?.1));

        Ok(PresetRuns {
            event_t,
            f_n,
            k_rw_full,
            k_hw_full,
            base,
            fcr,
            fcr_metrics,
            fcr_wall_s,
            fcr_steps,
            inertia,
            depth_sweep,
            rocof_sweep,
        })
    }
}

/// Nadir depth below nominal and max sliding-window rocof over the first
/// [`OBS_WINDOW_S`] seconds after the event. Extracted the same way for every
/// run so sweep points of different durations stay comparable.
fn post_event_window(log: &SimLog, event_t: f64, f_n: f64) -> Result<(f64, f64)> {
    let t = log.t();
    let f = log
        .channel_slice("f_on")
        .ok_or_else(|| Error::MetricsUnavailable("f_on channel missing".into()))?;
    let i0 = t.partition_point(|&v| v <= event_t).saturating_sub(1);
    let i1 = t.partition_point(|&v| v <= event_t + OBS_WINDOW_S);
    if i1 < i0 + 3 {
        return Err(Error::MetricsUnavailable(format!(
            "log too short after the event at {event_t} s; need {OBS_WINDOW_S} s"
        )));
    }
    let nadir = f[i0..i1].iter().copied().fold(f64::INFINITY, f64::min);
    let series = TimeSeries::new(t[i0..i1].to_vec(), f[i0..i1].to_vec())?;
    let rocof = windowed_rocof(&series, 0.5)?;
    Ok(((nadir - f_n).abs(), rocof))
}

// ---- 6: droop-ratio proportionality --------------------------------------------

fn droop_proportionality(runs: &PresetRuns) -> Result<(bool, String)> {
    let m = &runs.fcr_metrics;
    let model = &runs.fcr.1.model;
    let ratio = model.gains_on.k_r / model.gains_off.k_r;
    let err = (m.steady_delta_f_off - ratio * m.steady_delta_f_on).abs();
    let lim = 0.01 * m.steady_delta_f_on.abs();

    let budget = WALL_BUDGET_S * (runs.fcr_steps / REF_STEPS).max(1.0);
    let ok = err < lim && runs.fcr_wall_s <= budget;
    Ok((ok, format!(
        "delta_f_off {:.4} Hz vs {ratio:.2} x delta_f_on {:.4} Hz (err {:.2}% of |delta_f_on|, limit 1%); \
         run took {:.1} s wall (budget {budget:.0} s)",
        m.steady_delta_f_off,
        ratio * m.steady_delta_f_on,
        100.0 * err / m.steady_delta_f_on.abs(),
        runs.fcr_wall_s,
    )))
}

// ---- 7: containment power delivery ----------------------------------------------

fn containment_delivery(cfg: &Config, runs: &PresetRuns) -> Result<(bool, String)> {
    let m = &runs.fcr_metrics;
    // steady plant output against its dispatch; the droop law makes the
    // difference exactly K_Rw times the frequency deviation
    let rise = m.steady_power_chain[1] - cfg.system.owpp.p_set;
    let target = runs.k_rw_full * m.steady_delta_f_on.abs();
    let err = (rise - target).abs() / target;
    let ok = err <= 0.03;
    Ok((ok, format!(
        "steady wind-plant output rose {:.2} MW vs K_Rw |delta_f| {:.2} MW (err {:.1}%, limit 3%)",
        1e-6 * rise,
        1e-6 * target,
        100.0 * err
    )))
}

// ---- 8: inertial energy delivery -------------------------------------------------

fn inertial_delivery(runs: &PresetRuns) -> Result<(bool, String)> {
    let log = &runs.inertia.0;
    let t = log.t();
    let f = log
        .channel_slice("f_on")
        .ok_or_else(|| Error::MetricsUnavailable("f_on channel missing".into()))?;
    let p = log
        .channel_slice("P_gsc")
        .ok_or_else(|| Error::MetricsUnavailable("P_gsc channel missing".into()))?;
    let t_e = runs.event_t;

    let a = t.partition_point(|&v| v < t_e - 1.0);
    let b = t.partition_point(|&v| v <= t_e);
    if a >= b {
        return Err(Error::MetricsUnavailable(
            "no pre-event record to baseline the plant output".into(),
        ));
    }
    let pre = p[a..b].iter().sum::<f64>() / (b - a) as f64;

    // delivered energy over the first 2 s, against the plant's total inertial
    // coefficient: the commanded K_Hw plus the DC-link capacitor's intrinsic
    // share. The energy synchronizer slaves the link energy to the frequency
    // (delta_f = K_Hlink dW), so a falling frequency discharges the capacitor
    // by df/K_Hlink straight through the grid-side converter, on top of the
    // machine-side command -K_Hw df/dt.
    let i0 = b.saturating_sub(1);
    let i2 = t.partition_point(|&v| v <= t_e + 2.0);
    if i2 < i0 + 3 {
        return Err(Error::MetricsUnavailable(
            "log ends less than 2 s after the event".into(),
        ));
    }
    let dp: Vec<f64> = p[i0..i2].iter().map(|v| v - pre).collect();
    let delivered = *cumtrapz(&t[i0..i2], &dp)
        .last()
        .expect("window has samples");
    let k_cap = 1.0 / runs.inertia.1.model.gains_wtg.k_hlink;
    let target = -(runs.k_hw_full + k_cap) * (f[i2 - 1] - f[i0]);
    let err = (delivered - target).abs() / target.abs();
    let ok = err <= 0.10;
    Ok((ok, format!(
        "delivered {:.2} MJ over the first 2 s vs inertial target {:.2} MJ (err {:.1}%, limit 10%; \
         target includes {:.2} MJ/Hz of dc-link capacitor inertia beside the commanded {:.2} MJ/Hz)",
        1e-6 * delivered,
        1e-6 * target,
        100.0 * err,
        1e-6 * k_cap,
        1e-6 * runs.k_hw_full,
    )))
}

// ---- 9: energy bookkeeping -------------------------------------------------------

fn energy_bookkeeping(runs: &PresetRuns) -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    let mut n = 0usize;
    for (label, (log, engine)) in [
        ("baseline", &runs.base),
        ("droop preset", &runs.fcr),
        ("inertia preset", &runs.inertia),
    ] {
        let rep = verify_invariants(log, &engine.model);
        for c in rep.checks.iter().filter(|c| c.name.starts_with("energy_")) {
            n += 1;
            ok &= c.passed;
            let r = c.magnitude / c.tolerance;
            if r > worst {
                worst = r;
                worst_name = format!("{} on the {label} run", c.name);
            }
        }
    }
    if n == 0 {
        return Err(Error::MetricsUnavailable(
            "no stored-energy checks were produced".into(),
        ));
    }
    Ok((ok, format!(
        "{n} stored-energy balances checked across 3 runs; worst residual {:.0}% of its 0.1% budget ({worst_name})",
        100.0 * worst
    )))
}

// ---- 10: locality audit -----------------------------------------------------------

fn locality(cfg: &Config) -> Result<(bool, String)> {
    let gains = build_gain_set(cfg)?;
    let on = MmcController::new(gains.mmc_on)?;
    let off = MmcController::new(gains.mmc_off)?;
    let wtg = WtgController::new(gains.wtg)?;

    let mut ok = true;
    let mut parts = Vec::new();
    for (label, c) in [
        ("onshore mmc", &on as &dyn crate::control::AuditableController),
        ("offshore mmc", &off),
        ("wind turbine", &wtg),
    ] {
        match locality_audit(c) {
            Ok(rep) => parts.push(format!("{label}: {} local signals", rep.signals.len())),
            Err(e) => {
                ok = false;
                parts.push(format!("{label}: {e}"));
            }
        }
    }
    // the deliberately remote-coupled probe must be rejected
    match locality_audit(&RemoteCoupledProbe) {
        Err(Error::LocalityViolation { signals, .. }) => {
            parts.push(format!("probe rejected ({})", signals.join(", ")));
        }
        Ok(_) => {
            ok = false;
            parts.push("probe NOT rejected".into());
        }
        Err(e) => {
            ok = false;
            parts.push(format!("probe audit failed for the wrong reason: {e}"));
        }
    }
    Ok((ok, parts.join("; ")))
}

// ---- 11: preset improvements and monotone sweeps ------------------------------------

fn preset_improvements(runs: &PresetRuns) -> Result<(bool, String)> {
    let (d_base, r_base) = post_event_window(&runs.base.0, runs.event_t, runs.f_n)?;
    let d_fcr = runs.depth_sweep.last().expect("five points").1;
    let r_inertia = runs.rocof_sweep.last().expect("five points").1;

    let strict = d_fcr < d_base && r_inertia < r_base;

    // slack guards only float ties between adjacent sweep points
    let slack_d = 1e-6 * d_base;
    let slack_r = 1e-6 * r_base;
    let depth_monotone = runs
        .depth_sweep
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + slack_d);
    let rocof_monotone = runs
        .rocof_sweep
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + slack_r);

    let ok = strict && depth_monotone && rocof_monotone;
    let depths: Vec<String> = runs
        .depth_sweep
        .iter()
        .map(|(_, d)| format!("{:.1}", 1e3 * d))
        .collect();
    let rocofs: Vec<String> = runs
        .rocof_sweep
        .iter()
        .map(|(_, r)| format!("{r:.3}"))
        .collect();
    Ok((ok, format!(
        "nadir depth {:.1} -> {:.1} mHz with the droop preset, rocof {:.3} -> {:.3} Hz/s with the \
         inertia preset; sweep depths [{}] mHz {}, sweep rocofs [{}] Hz/s {}",
        1e3 * d_base,
        1e3 * d_fcr,
        r_base,
        r_inertia,
        depths.join(", "),
        if depth_monotone { "non-increasing" } else { "NOT monotone" },
        rocofs.join(", "),
        if rocof_monotone { "non-increasing" } else { "NOT monotone" },
    )))
}
