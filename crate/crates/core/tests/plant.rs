//! Integration closures of the plant models: phasor steady states, line
//! resonance and Ohm behavior, energy-form equivalence, frame invariance.

use gfmsim::plant::{
    self, HvdcLineParams, HvdcLineState, MmcParams, MmcState,
};
use num_complex::Complex64;

fn mmc() -> MmcParams {
    MmcParams {
        r_s: 1.6,
        l_s: 0.1528,
        r_d: 2.048,
        l_d: 0.13,
        c_eq: 2e-4,
        u_eq_nom: 640e3,
    }
}

#[test]
fn ac_branch_settles_to_phasor_solution() {
    let p = mmc();
    let omega = 100.0 * std::f64::consts::PI;
    let u = 326_598.0;
    let e = 320_000.0;
    let delta = 0.24;
    let mut state = MmcState {
        i_s_d: 0.0,
        i_s_q: 0.0,
        i_dc: 0.0,
        w_t: p.w_t_nom(),
    };
    let tau = p.l_s / p.r_s;
    let dt = 1e-6;
    // transient amplitude is e^{-t/tau}; 10 tau leaves well under 0.1%
    let steps = (10.0 * tau / dt) as usize;
    for _ in 0..steps {
        let (dd, dq) = plant::mmc_ac_derivative(&p, &state, (u, 0.0), delta, e, 0.0, omega);
        state.i_s_d += dd * dt;
        state.i_s_q += dq * dt;
    }
    // phasor oracle: I = (U e^{j delta} - E) / (R + j omega L)
    let u_ph = Complex64::from_polar(u, delta);
    let i_ph = (u_ph - e) / Complex64::new(p.r_s, omega * p.l_s);
    let i_sim = Complex64::new(state.i_s_d, state.i_s_q);
    let err = (i_sim - i_ph).norm() / i_ph.norm();
    assert!(err < 1e-3, "phasor mismatch {err:.2e}");
}

#[test]
fn line_symmetric_mode_rings_at_predicted_frequency() {
    // Lossless line, symmetric perturbation: ends together, midpoint opposing.
    let p = HvdcLineParams {
        r_dc: 1e-9,
        l_dc: 0.0729,
        c_dc: 4.8e-5,
    };
    let nominal = 640e3;
    let eps = 100.0;
    let mut s = HvdcLineState {
        u_dc_on: nominal + eps,
        u_mid: nominal - eps,
        u_dc_off: nominal + eps,
        i_sec1: 0.0,
        i_sec2: 0.0,
    };
    let dt = 2e-7;
    let t_end = 0.012;
    let mut crossings = Vec::new();
    let mut last = s.u_dc_on - s.u_mid;
    for k in 0..(t_end / dt) as usize {
        let d = plant::hvdc_line_derivative(&p, &s, 0.0, 0.0);
        s.u_dc_on += d.du_dc_on * dt;
        s.u_mid += d.du_mid * dt;
        s.u_dc_off += d.du_dc_off * dt;
        s.i_sec1 += d.di_sec1 * dt;
        s.i_sec2 += d.di_sec2 * dt;
        let now = s.u_dc_on - s.u_mid;
        if last <= 0.0 && now > 0.0 {
            crossings.push(k as f64 * dt);
        }
        last = now;
    }
    assert!(crossings.len() >= 3, "expected several oscillation periods");
    let period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
    let omega = 2.0 * std::f64::consts::PI / period;
    let predicted = p.symmetric_mode_rad_s();
    assert!(
        (omega - predicted).abs() < 0.01 * predicted,
        "mode at {omega:.1} rad/s, predicted {predicted:.1}"
    );
}

#[test]
fn line_charge_conserved_without_injection() {
    let p = HvdcLineParams {
        r_dc: 4.375,
        l_dc: 0.0729,
        c_dc: 4.8e-5,
    };
    let mut s = HvdcLineState {
        u_dc_on: 641e3,
        u_mid: 639e3,
        u_dc_off: 640e3,
        i_sec1: 10.0,
        i_sec2: -5.0,
    };
    let q0 = plant::hvdc_line_charge(&p, &s);
    let dt = 1e-6;
    for _ in 0..200_000 {
        let d = plant::hvdc_line_derivative(&p, &s, 0.0, 0.0);
        s.u_dc_on += d.du_dc_on * dt;
        s.u_mid += d.du_mid * dt;
        s.u_dc_off += d.du_dc_off * dt;
        s.i_sec1 += d.di_sec1 * dt;
        s.i_sec2 += d.di_sec2 * dt;
    }
    let q1 = plant::hvdc_line_charge(&p, &s);
    assert!(
        (q1 - q0).abs() < 1e-9 * q0.abs(),
        "charge drifted from {q0} to {q1}"
    );
}

#[test]
fn line_steady_drop_follows_ohm() {
    let p = HvdcLineParams {
        r_dc: 4.375,
        l_dc: 0.0729,
        c_dc: 4.8e-5,
    };
    // Constant through-current: offshore injects, onshore draws.
    let i = 1000.0;
    let mut s = HvdcLineState {
        u_dc_on: 640e3,
        u_mid: 640e3,
        u_dc_off: 640e3,
        i_sec1: 0.0,
        i_sec2: 0.0,
    };
    let dt = 1e-6;
    for _ in 0..400_000 {
        let d = plant::hvdc_line_derivative(&p, &s, -i, i);
        s.u_dc_on += d.du_dc_on * dt;
        s.u_mid += d.du_mid * dt;
        s.u_dc_off += d.du_dc_off * dt;
        s.i_sec1 += d.di_sec1 * dt;
        s.i_sec2 += d.di_sec2 * dt;
    }
    let drop = s.u_dc_off - s.u_dc_on;
    let expected = p.r_dc * i;
    assert!(
        (drop - expected).abs() < 1e-3 * expected,
        "drop {drop}, expected {expected}"
    );
}

#[test]
fn energy_and_voltage_forms_integrate_identically() {
    let p = mmc();
    let dt = 1e-5;
    let mut w = p.w_t_nom();
    let mut u_eq = p.u_eq_nom;
    for k in 0..200_000 {
        let t = k as f64 * dt;
        // oscillating power imbalance, up to 50 MW
        let p_dc = 50e6 * (2.0 * t).sin();
        let p_ac = 20e6 * (5.0 * t).sin();
        w += plant::mmc_energy_derivative(p_dc, p_ac) * dt;
        // equivalent-capacitor charge form: C dU/dt = I_in - I_out at voltage U
        u_eq += (p_dc / u_eq - p_ac / u_eq) / p.c_eq * dt;
    }
    let w_from_u = plant::energy_from_voltage(u_eq, p.c_eq);
    let scale = (w - p.w_t_nom()).abs().max(1e6);
    assert!(
        (w - w_from_u).abs() < 1e-3 * scale,
        "energy {w}, voltage-form energy {w_from_u}"
    );
}

#[test]
fn derivatives_are_frame_covariant() {
    // Rotating every angle and current by a common offset rotates the
    // derivatives by the same offset and leaves power unchanged.
    let p = mmc();
    let omega = 314.159;
    let base = MmcState {
        i_s_d: 900.0,
        i_s_q: -150.0,
        i_dc: 0.0,
        w_t: p.w_t_nom(),
    };
    let chi = 0.9123;
    let (i_d2, i_q2) = plant::rotate(base.i_s_d, base.i_s_q, chi);
    let rotated = MmcState {
        i_s_d: i_d2,
        i_s_q: i_q2,
        ..base
    };
    let (dd1, dq1) =
        plant::mmc_ac_derivative(&p, &base, (330e3, 5e3), 0.2, 326e3, -0.1, omega);
    let (dd2, dq2) =
        plant::mmc_ac_derivative(&p, &rotated, (330e3, 5e3), 0.2 + chi, 326e3, -0.1 + chi, omega);
    let (dd1r, dq1r) = plant::rotate(dd1, dq1, chi);
    assert!((dd2 - dd1r).abs() < 1e-6 * dd1r.abs().max(1.0));
    assert!((dq2 - dq1r).abs() < 1e-6 * dq1r.abs().max(1.0));

    let u1 = plant::rotate(330e3, 5e3, 0.2);
    let u2 = plant::rotate(330e3, 5e3, 0.2 + chi);
    let p1 = plant::ac_power(u1, (base.i_s_d, base.i_s_q));
    let p2 = plant::ac_power(u2, (rotated.i_s_d, rotated.i_s_q));
    assert!((p1 - p2).abs() < 1e-9 * p1.abs());
}
