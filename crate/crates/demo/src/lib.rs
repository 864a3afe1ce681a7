//! Browser demo bindings: small interactive runs of the structure-preserving
//! integrators, returning flat trajectory buffers for canvas rendering.
//!
//! Build with `wasm-pack build crates/demo --target web` and serve `www/`.

use wasm_bindgen::prelude::*;

use geomint::grid::{GridFunction, Mesh};
use geomint::lphj::{
    deep_lp_hamiltonian, lp_semidirect_step, rigid_body_step, RigidBodyLift, RigidBodyScheme,
    RigidBodyState, SemidirectState, SemidirectVariant,
};
use geomint::peakon::{
    conserved_traces, lax_matrices, peakon_hamiltonian, peakon_step, Kernel, PeakonState,
};
use geomint::phase::{euler_step, rk4_step, PhaseBatch};
use geomint::rng::seeded;
use geomint::validation::smooth_field;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Free rigid body Π-trajectory under `integrator` ∈ {euler, rk4, lphj},
/// starting from the (normalized) initial momentum. Returns rows of
/// (Πx, Πy, Πz, ‖Π‖ − ‖Π₀‖) flattened.
#[wasm_bindgen]
pub fn rigid_body_orbit(
    integrator: &str,
    px: f64,
    py: f64,
    pz: f64,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<Vec<f64>, JsValue> {
    let norm = (px * px + py * py + pz * pz).sqrt();
    if norm <= 0.0 {
        return Err(err("initial momentum must be nonzero"));
    }
    let pi0 = [px / norm, py / norm, pz / norm];
    let inertia = [1.0, 2.0, 3.0];
    let every = record_every.max(1);
    let mut rows = Vec::with_capacity(4 * (steps / every + 2));
    let mut push = |pi: [f64; 3], rows: &mut Vec<f64>| {
        let n = (pi[0] * pi[0] + pi[1] * pi[1] + pi[2] * pi[2]).sqrt();
        rows.extend_from_slice(&[pi[0], pi[1], pi[2], n - 1.0]);
    };
    match integrator {
        "lphj" => {
            let mut state = RigidBodyState::new(pi0, inertia).map_err(err)?;
            push(state.pi, &mut rows);
            for step in 1..=steps {
                state =
                    rigid_body_step(&state, dt, 1e-14, RigidBodyScheme::Midpoint).map_err(err)?;
                if step % every == 0 {
                    push(state.pi, &mut rows);
                }
            }
        }
        "euler" | "rk4" => {
            let lift = RigidBodyLift { inertia };
            let mut batch = PhaseBatch::new(pi0.to_vec(), vec![0.0; 3], 3).map_err(err)?;
            push(pi0, &mut rows);
            for step in 1..=steps {
                batch = if integrator == "euler" {
                    euler_step(&lift, &batch, dt).map_err(err)?
                } else {
                    rk4_step(&lift, &batch, dt).map_err(err)?
                };
                if step % every == 0 {
                    push([batch.q()[0], batch.q()[1], batch.q()[2]], &mut rows);
                }
            }
        }
        other => return Err(err(format!("unknown integrator '{other}'"))),
    }
    Ok(rows)
}

/// N-peakon trajectory with conservation diagnostics. Returns rows of
/// (t, q…, p…, H, TrL², TrL³) flattened; the Lax traces are NaN for the
/// Gaussian kernel, which makes no integrability claim.
#[wasm_bindgen]
pub fn peakon_run(
    kernel: &str,
    n: usize,
    dt: f64,
    t_final: f64,
    record_every: usize,
) -> Result<Vec<f64>, JsValue> {
    let kernel = match kernel {
        "gaussian" => Kernel::Gaussian { scale: 1.0 },
        "exponential" => Kernel::Exponential { scale: 1.0 },
        other => return Err(err(format!("unknown kernel '{other}'"))),
    };
    if n == 0 || n > 8 {
        return Err(err("1..=8 peakons in the demo"));
    }
    let exponential = matches!(kernel, Kernel::Exponential { .. });
    let mut state = if n == 3 {
        PeakonState::new(vec![-5.0, 0.0, 5.0], vec![0.4, 0.6, 0.9], kernel).map_err(err)?
    } else {
        let q: Vec<f64> = (0..n)
            .map(|i| 4.0 * i as f64 - 2.0 * (n as f64 - 1.0))
            .collect();
        let p: Vec<f64> = (0..n).map(|i| 0.3 + 0.6 * (i + 1) as f64 / n as f64).collect();
        PeakonState::new(q, p, kernel).map_err(err)?
    };
    let steps = (t_final / dt).round().max(1.0) as usize;
    let every = record_every.max(1);
    let mut rows = Vec::new();
    let record = |state: &PeakonState, t: f64, rows: &mut Vec<f64>| -> Result<(), JsValue> {
        rows.push(t);
        rows.extend_from_slice(&state.q);
        rows.extend_from_slice(&state.p);
        rows.push(peakon_hamiltonian(state));
        if exponential && n >= 3 && state.p.iter().all(|v| *v > 0.0) {
            let pair = lax_matrices(state, 0.5).map_err(err)?;
            let traces = conserved_traces(&pair.l, 3).map_err(err)?;
            rows.push(traces[0]);
            rows.push(traces[1]);
        } else {
            rows.push(f64::NAN);
            rows.push(f64::NAN);
        }
        Ok(())
    };
    record(&state, 0.0, &mut rows)?;
    for step in 1..=steps {
        state = peakon_step(&state, dt, 2, 1e-12, 400).map_err(err)?;
        if step % every == 0 || step == steps {
            record(&state, step as f64 * dt, &mut rows)?;
        }
    }
    Ok(rows)
}

/// Semidirect Lie–Poisson field evolution from a seeded smooth state.
/// Returns frames of (m₀…m_{nx−1}, ρ₀…ρ_{nx−1}) flattened, every
/// `record_every` steps, with the max mass drift of the run appended last.
#[wasm_bindgen]
pub fn lp_field_run(
    nx: usize,
    dt: f64,
    steps: usize,
    nu: f64,
    seed: u64,
    record_every: usize,
) -> Result<Vec<f64>, JsValue> {
    let mesh = Mesh::unit_circle(nx).map_err(err)?;
    let mut rng = seeded(seed);
    let m = GridFunction::new(mesh, smooth_field(&mut rng, nx, 3, 0.0, 0.05)).map_err(err)?;
    let rho = GridFunction::new(mesh, smooth_field(&mut rng, nx, 3, 1.0, 0.15)).map_err(err)?;
    let mut state = SemidirectState::unit_mass(m, rho, nu).map_err(err)?;
    let hamiltonian = deep_lp_hamiltonian(nu).map_err(err)?;
    let mass0 = state.mass();
    let every = record_every.max(1);
    let mut rows = Vec::new();
    rows.extend_from_slice(state.m.values());
    rows.extend_from_slice(state.rho.values());
    let mut worst_mass = 0.0_f64;
    for step in 1..=steps {
        state = lp_semidirect_step(&state, &hamiltonian, dt, SemidirectVariant::Conservative)
            .map_err(err)?;
        worst_mass = worst_mass.max((state.mass() - mass0).abs());
        if step % every == 0 || step == steps {
            rows.extend_from_slice(state.m.values());
            rows.extend_from_slice(state.rho.values());
        }
    }
    rows.push(worst_mass);
    Ok(rows)
}
