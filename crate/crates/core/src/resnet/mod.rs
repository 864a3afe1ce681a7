//! Residual-network training as an optimal-control boundary-value problem.
//!
//! The control Hamiltonian over a batch of N samples is
//!
//! ```text
//! H(q, p, θ) = Σᵢ ⟨pᵢ, tanh(u·qᵢ + b)⟩ − (γ/2)(‖u‖²_F + ‖b‖²),
//! ```
//!
//! and stationarity ∂H/∂θ = 0 eliminates the control:
//! u = (1/γ)Σᵢ (pᵢ⊙σ′(zᵢ))qᵢᵀ, b = (1/γ)Σᵢ pᵢ⊙σ′(zᵢ), a fixed point since the
//! pre-activations z depend on θ. Substituting θ*(q, p) back yields a
//! Hamiltonian on phase space alone; because ∂H/∂θ vanishes at θ*, its exact
//! gradients are the partials of H at the eliminated control, which is what
//! makes the implicit layer recursion and the generating-function machinery
//! line up.

mod dataset;
mod train;

pub use dataset::{generate_dataset, Dataset, DatasetKind, Split};
pub use train::{forward_pass, shooting_gradient, train, NetState, RunLog};

use crate::error::{Error, Result};
use crate::phase::{Hamiltonian, PhaseBatch};

/// Weight matrix (d×d, row-major) and bias of one control.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    pub u: Vec<f64>,
    pub b: Vec<f64>,
    pub dim: usize,
}

impl ControlParams {
    pub fn zeros(dim: usize) -> Self {
        ControlParams {
            u: vec![0.0; dim * dim],
            b: vec![0.0; dim],
            dim,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.u.iter().map(|v| v * v).sum::<f64>() + self.b.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &ControlParams) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.b.iter().zip(&other.b))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// z = u·q + b for one sample.
    pub fn preactivation(&self, q: &[f64], z: &mut [f64]) {
        let d = self.dim;
        for r in 0..d {
            let mut acc = self.b[r];
            for c in 0..d {
                acc += self.u[r * d + c] * q[c];
            }
            z[r] = acc;
        }
    }
}

pub(crate) fn sigma(x: f64) -> f64 {
    x.tanh()
}

pub(crate) fn sigma_prime_from_value(s: f64) -> f64 {
    1.0 - s * s
}

/// Training hyperparameters shared by every integrator tag.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub layers: usize,
    pub dt: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub integrator: IntegratorTag,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Usage("layer count must be ≥ 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::Usage(format!("layer step {} must be > 0", self.dt)));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Usage(format!(
                "regularisation weight {} must be > 0",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorTag {
    Euler,
    Rk4,
    Symplectic,
}

impl std::str::FromStr for IntegratorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(IntegratorTag::Euler),
            "rk4" => Ok(IntegratorTag::Rk4),
            "symplectic" => Ok(IntegratorTag::Symplectic),
            other => Err(Error::Usage(format!(
                "unknown integrator '{other}' (euler|rk4|symplectic)"
            ))),
        }
    }
}

impl std::fmt::Display for IntegratorTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            IntegratorTag::Euler => "euler",
            IntegratorTag::Rk4 => "rk4",
            IntegratorTag::Symplectic => "symplectic",
        };
        f.write_str(s)
    }
}

/// H(q, p, θ) over the whole batch.
pub fn control_hamiltonian(batch: &PhaseBatch, theta: &ControlParams, gamma: f64) -> f64 {
    let d = batch.dim();
    debug_assert_eq!(theta.dim, d);
    let mut z = vec![0.0; d];
    let mut acc = 0.0;
    for i in 0..batch.len() {
        let q = &batch.q()[i * d..(i + 1) * d];
        let p = &batch.p()[i * d..(i + 1) * d];
        theta.preactivation(q, &mut z);
        for r in 0..d {
            acc += p[r] * sigma(z[r]);
        }
    }
    acc - 0.5 * gamma * theta.norm_sq()
}

/// ∂H/∂θ at (batch, θ): the stationarity residual.
pub fn control_gradient(batch: &PhaseBatch, theta: &ControlParams, gamma: f64) -> ControlParams {
    let d = batch.dim();
    let mut grad = ControlParams::zeros(d);
    let mut z = vec![0.0; d];
    for i in 0..batch.len() {
        let q = &batch.q()[i * d..(i + 1) * d];
        let p = &batch.p()[i * d..(i + 1) * d];
        theta.preactivation(q, &mut z);
        for r in 0..d {
            let w = p[r] * sigma_prime_from_value(sigma(z[r]));
            grad.b[r] += w;
            for c in 0..d {
                grad.u[r * d + c] += w * q[c];
            }
        }
    }
    for r in 0..d {
        grad.b[r] -= gamma * theta.b[r];
        for c in 0..d {
            grad.u[r * d + c] -= gamma * theta.u[r * d + c];
        }
    }
    grad
}

fn eliminate_from(
    batch: &PhaseBatch,
    gamma: f64,
    start: ControlParams,
    tol: f64,
    max_iter: usize,
) -> Result<ControlParams> {
    let d = batch.dim();
    let mut theta = start;
    let mut z = vec![0.0; d];
    let mut damping = 1.0_f64;
    let mut last_residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = ControlParams::zeros(d);
        for i in 0..batch.len() {
            let q = &batch.q()[i * d..(i + 1) * d];
            let p = &batch.p()[i * d..(i + 1) * d];
            theta.preactivation(q, &mut z);
            for r in 0..d {
                let w = p[r] * sigma_prime_from_value(sigma(z[r])) / gamma;
                next.b[r] += w;
                for c in 0..d {
                    next.u[r * d + c] += w * q[c];
                }
            }
        }
        let residual = theta.max_abs_diff(&next);
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                component: "eliminate_control residual".into(),
            });
        }
        if residual <= tol {
            return Ok(next);
        }
        if residual > 0.9 * last_residual {
            damping = (damping * 0.5).max(1.0 / 64.0);
        } else {
            damping = (damping * 1.5).min(1.0);
        }
        last_residual = residual;
        for (t, n) in theta.u.iter_mut().zip(&next.u) {
            *t += damping * (n - *t);
        }
        for (t, n) in theta.b.iter_mut().zip(&next.b) {
            *t += damping * (n - *t);
        }
    }
    Err(Error::Convergence {
        context: "eliminate_control".into(),
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Solve the stationarity fixed point θ = (1/γ)Σ(pᵢ⊙σ′(zᵢ))qᵢᵀ (and its bias
/// row) by damped iteration from θ = 0.
pub fn eliminate_control(
    batch: &PhaseBatch,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ControlParams> {
    if gamma <= 0.0 {
        return Err(Error::Usage(format!("gamma = {gamma} must be > 0")));
    }
    eliminate_from(batch, gamma, ControlParams::zeros(batch.dim()), tol, max_iter)
}

/// The Hamiltonian with the control eliminated: H(q, p, θ*(q, p)) exposed on
/// phase space. Gradients come from the stationarity identity — ∂H/∂θ = 0 at
/// θ* makes the partials at fixed θ* the exact total derivatives — and the
/// finite-difference check below is the test of that identity.
#[derive(Debug, Clone, Copy)]
pub struct ReducedHamiltonian {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl ReducedHamiltonian {
    pub fn eliminate(&self, s: &PhaseBatch) -> Result<ControlParams> {
        eliminate_control(s, self.gamma, self.tol, self.max_iter)
    }
}

pub fn reduced_hamiltonian(gamma: f64, tol: f64, max_iter: usize) -> ReducedHamiltonian {
    ReducedHamiltonian {
        gamma,
        tol,
        max_iter,
    }
}

impl Hamiltonian for ReducedHamiltonian {
    fn value(&self, s: &PhaseBatch) -> f64 {
        let theta = self.eliminate(s).expect("control elimination");
        control_hamiltonian(s, &theta, self.gamma)
    }

    fn grad_q(&self, s: &PhaseBatch) -> Vec<f64> {
        let theta = self.eliminate(s).expect("control elimination");
        let d = s.dim();
        let mut g = vec![0.0; s.coords()];
        let mut z = vec![0.0; d];
        for i in 0..s.len() {
            let q = &s.q()[i * d..(i + 1) * d];
            let p = &s.p()[i * d..(i + 1) * d];
            theta.preactivation(q, &mut z);
            // uᵀ(p ⊙ σ′(z))
            for c in 0..d {
                let mut acc = 0.0;
                for r in 0..d {
                    acc += theta.u[r * d + c] * p[r] * sigma_prime_from_value(sigma(z[r]));
                }
                g[i * d + c] = acc;
            }
        }
        g
    }

    fn grad_p(&self, s: &PhaseBatch) -> Vec<f64> {
        let theta = self.eliminate(s).expect("control elimination");
        let d = s.dim();
        let mut g = vec![0.0; s.coords()];
        let mut z = vec![0.0; d];
        for i in 0..s.len() {
            let q = &s.q()[i * d..(i + 1) * d];
            theta.preactivation(q, &mut z);
            for r in 0..d {
                g[i * d + r] = sigma(z[r]);
            }
        }
        g
    }

    fn name(&self) -> &str {
        "resnet-reduced"
    }

    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("gamma", self.gamma)]
    }
}

/// Solve the d²+d dimensional fixed point θ = Φ(θ) by damped iteration with
/// Newton acceleration: once the plain sweeps have settled near the solution,
/// a forward-difference Jacobian of Φ turns the residual equation into a
/// small Newton solve, which also handles the marginally-contractive regimes
/// the training trajectories pass through. Newton steps are accepted only
/// when they shrink the residual; otherwise the damped sweep continues.
fn solve_theta_fixed_point<F>(
    phi: F,
    start: ControlParams,
    tol: f64,
    max_iter: usize,
    context: &str,
) -> Result<ControlParams>
where
    F: Fn(&ControlParams) -> Result<ControlParams>,
{
    let d = start.dim;
    let slots = d * d + d;
    let get = |t: &ControlParams, j: usize| if j < d * d { t.u[j] } else { t.b[j - d * d] };
    let set = |t: &mut ControlParams, j: usize, v: f64| {
        if j < d * d {
            t.u[j] = v;
        } else {
            t.b[j - d * d] = v;
        }
    };

    let mut theta = start;
    let mut damping = 1.0_f64;
    let mut last_residual = f64::INFINITY;
    for iteration in 0..max_iter {
        let image = phi(&theta)?;
        let residual = theta.max_abs_diff(&image);
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                component: format!("{context} residual"),
            });
        }
        if residual <= tol {
            return Ok(image);
        }

        if iteration >= 2 {
            // Newton on g(θ) = Φ(θ) − θ with a forward-difference Jacobian.
            let h = 1e-7_f64.max(1e-7 * residual);
            let mut jac = vec![0.0; slots * slots]; // row-major, J_g = Φ' − I
            for j in 0..slots {
                let mut probe = theta.clone();
                set(&mut probe, j, get(&theta, j) + h);
                let shifted = phi(&probe)?;
                for i in 0..slots {
                    let base = get(&image, i);
                    let diff = (get(&shifted, i) - base) / h;
                    jac[i * slots + j] = diff - if i == j { 1.0 } else { 0.0 };
                }
            }
            let mut rhs = vec![0.0; slots];
            for i in 0..slots {
                rhs[i] = get(&image, i) - get(&theta, i);
            }
            if let Some(delta) = solve_dense(&mut jac, &mut rhs, slots) {
                // Backtracking line search along the Newton direction.
                let mut step = 1.0_f64;
                let mut accepted = false;
                while step >= 1.0 / 64.0 {
                    let mut candidate = theta.clone();
                    for (j, dv) in delta.iter().enumerate() {
                        set(&mut candidate, j, get(&theta, j) - step * dv);
                    }
                    let candidate_image = phi(&candidate)?;
                    let candidate_residual = candidate.max_abs_diff(&candidate_image);
                    if candidate_residual.is_finite() && candidate_residual < residual {
                        theta = candidate;
                        last_residual = candidate_residual;
                        if candidate_residual <= tol {
                            return Ok(candidate_image);
                        }
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if accepted {
                    continue;
                }
            }
        }

        if residual > 0.9 * last_residual {
            damping = (damping * 0.5).max(1.0 / 64.0);
        } else {
            damping = (damping * 1.5).min(1.0);
        }
        last_residual = residual;
        for j in 0..slots {
            let current = get(&theta, j);
            set(&mut theta, j, current + damping * (get(&image, j) - current));
        }
    }
    Err(Error::Convergence {
        context: context.into(),
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Gaussian elimination with partial pivoting; returns None on singularity.
fn solve_dense(a: &mut [f64], rhs: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-13 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut out = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * out[k];
        }
        out[col] = acc / a[col * n + col];
    }
    Some(out)
}

/// One implicit symplectic layer: the coupled recursion
///
/// ```text
/// qᵢ' = qᵢ + Δt·σ(u*qᵢ + b*),   pᵢ' = pᵢ − Δt·u*ᵀ(pᵢ'⊙σ′(u*qᵢ + b*)),
/// ```
///
/// with θ* = (u*, b*) the eliminated control at (q, p'). Solved as one damped
/// fixed point over (θ, p'); equivalent to the order-1 generating-function
/// step of [`ReducedHamiltonian`] (the suite checks the two paths agree).
pub fn symplectic_layer_step(
    batch: &PhaseBatch,
    dt: f64,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PhaseBatch> {
    let mut out = batch.clone();
    let mut theta = ControlParams::zeros(batch.dim());
    symplectic_layer_step_into(batch, dt, gamma, tol, max_iter, &mut theta, &mut out)?;
    Ok(out)
}

/// Workhorse form: `theta` carries the warm start in and the eliminated
/// control out; `out` receives the stepped batch.
///
/// Given θ, the costate equation is linear in p' and solves exactly per
/// sample (a d×d system), so the fixed point runs over θ alone.
pub fn symplectic_layer_step_into(
    batch: &PhaseBatch,
    dt: f64,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    theta: &mut ControlParams,
    out: &mut PhaseBatch,
) -> Result<()> {
    if dt == 0.0 {
        out.clone_from(batch);
        return Ok(());
    }
    let d = batch.dim();
    let n = batch.len();
    out.clone_from(batch);

    let phi = |t: &ControlParams| -> Result<ControlParams> {
        let mut z = vec![0.0; d];
        let mut sp = vec![0.0; d];
        let mut p_new = vec![0.0; d];
        let mut next = ControlParams::zeros(d);
        for i in 0..n {
            let q = &batch.q()[i * d..(i + 1) * d];
            let p = &batch.p()[i * d..(i + 1) * d];
            t.preactivation(q, &mut z);
            for r in 0..d {
                sp[r] = sigma_prime_from_value(sigma(z[r]));
            }
            solve_costate(t, dt, &sp, p, &mut p_new)?;
            for r in 0..d {
                let w = p_new[r] * sp[r] / gamma;
                next.b[r] += w;
                for c in 0..d {
                    next.u[r * d + c] += w * q[c];
                }
            }
        }
        Ok(next)
    };

    let solved = solve_theta_fixed_point(phi, theta.clone(), tol, max_iter, "symplectic_layer_step")?;

    let mut z = vec![0.0; d];
    let mut sp = vec![0.0; d];
    for i in 0..n {
        let q = &batch.q()[i * d..(i + 1) * d];
        let p = &batch.p()[i * d..(i + 1) * d];
        solved.preactivation(q, &mut z);
        for r in 0..d {
            sp[r] = sigma_prime_from_value(sigma(z[r]));
            out.q_mut()[i * d + r] = q[r] + dt * sigma(z[r]);
        }
        let mut p_new = vec![0.0; d];
        solve_costate(&solved, dt, &sp, p, &mut p_new)?;
        out.p_mut()[i * d..(i + 1) * d].copy_from_slice(&p_new);
    }
    *theta = solved;
    Ok(())
}

/// Solve (I + dt·uᵀdiag(s))·p' = p for one sample.
fn solve_costate(
    theta: &ControlParams,
    dt: f64,
    s: &[f64],
    p: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let d = theta.dim;
    if d == 2 {
        let a00 = 1.0 + dt * theta.u[0] * s[0];
        let a01 = dt * theta.u[2] * s[1];
        let a10 = dt * theta.u[1] * s[0];
        let a11 = 1.0 + dt * theta.u[3] * s[1];
        let det = a00 * a11 - a01 * a10;
        if det.abs() < 1e-14 {
            return Err(Error::Domain(
                "singular costate system in symplectic layer".into(),
            ));
        }
        out[0] = (a11 * p[0] - a01 * p[1]) / det;
        out[1] = (a00 * p[1] - a10 * p[0]) / det;
        return Ok(());
    }
    // General d: Gaussian elimination on the small dense system.
    let mut a = vec![0.0; d * d];
    for c in 0..d {
        for r in 0..d {
            a[c * d + r] = dt * theta.u[r * d + c] * s[r];
        }
        a[c * d + c] += 1.0;
    }
    let mut rhs = p.to_vec();
    for col in 0..d {
        let mut pivot = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[pivot * d + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * d + col].abs() < 1e-14 {
            return Err(Error::Domain(
                "singular costate system in symplectic layer".into(),
            ));
        }
        if pivot != col {
            for k in 0..d {
                a.swap(col * d + k, pivot * d + k);
            }
            rhs.swap(col, pivot);
        }
        for r in col + 1..d {
            let f = a[r * d + col] / a[col * d + col];
            for k in col..d {
                a[r * d + k] -= f * a[col * d + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    for col in (0..d).rev() {
        let mut acc = rhs[col];
        for k in col + 1..d {
            acc -= a[col * d + k] * out[k];
        }
        out[col] = acc / a[col * d + col];
    }
    Ok(())
}

/// Newton solve of q = target − dt·σ(u·q + b) for one sample, warm-started
/// at the incoming `q`. Falls back to plain iteration when the 2×2 Jacobian
/// degenerates.
fn solve_position(
    theta: &ControlParams,
    dt: f64,
    target: &[f64],
    q: &mut [f64],
    tol: f64,
) -> Result<()> {
    let d = theta.dim;
    let mut z = vec![0.0; d];
    for _ in 0..60 {
        theta.preactivation(q, &mut z);
        // g = q − target + dt·σ(z)
        let mut g_norm = 0.0_f64;
        let mut g = vec![0.0; d];
        for r in 0..d {
            g[r] = q[r] - target[r] + dt * sigma(z[r]);
            g_norm = g_norm.max(g[r].abs());
        }
        if g_norm <= 0.01 * tol {
            return Ok(());
        }
        if d == 2 {
            let s0 = sigma_prime_from_value(sigma(z[0]));
            let s1 = sigma_prime_from_value(sigma(z[1]));
            let a00 = 1.0 + dt * s0 * theta.u[0];
            let a01 = dt * s0 * theta.u[1];
            let a10 = dt * s1 * theta.u[2];
            let a11 = 1.0 + dt * s1 * theta.u[3];
            let det = a00 * a11 - a01 * a10;
            if det.abs() > 1e-12 {
                q[0] -= (a11 * g[0] - a01 * g[1]) / det;
                q[1] -= (a00 * g[1] - a10 * g[0]) / det;
                continue;
            }
        }
        // Plain contraction step.
        for r in 0..d {
            q[r] -= g[r];
        }
    }
    // Converged or not, the caller's θ-level residual decides; positions this
    // far unconverged only happen outside the scheme's solvable region.
    Ok(())
}

/// Inverse of the symplectic layer: recover (q, p) from (q', p'). Given θ
/// the position equation decouples per sample (a d-dimensional contraction),
/// so the fixed point again runs over θ alone; `q_guess` warm-starts the
/// positions. With (θ, q) converged, the costate equation is explicit.
pub fn symplectic_layer_unstep_into(
    stepped: &PhaseBatch,
    dt: f64,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    q_guess: &[f64],
    theta_guess: &ControlParams,
) -> Result<PhaseBatch> {
    let d = stepped.dim();
    let n = stepped.len();
    let q_cache = std::cell::RefCell::new(q_guess.to_vec());

    let phi = |t: &ControlParams| -> Result<ControlParams> {
        let mut q = q_cache.borrow_mut();
        let mut z = vec![0.0; d];
        let mut next = ControlParams::zeros(d);
        for i in 0..n {
            // Per-sample Newton for q = q' − dt·σ(uq + b) at fixed θ
            // (g(q) = q − q' + dt·σ, J = I + dt·diag(σ′)·u).
            solve_position(t, dt, &stepped.q()[i * d..(i + 1) * d], &mut q[i * d..(i + 1) * d], tol)?;
            t.preactivation(&q[i * d..(i + 1) * d], &mut z);
            for r in 0..d {
                let w = stepped.p()[i * d + r] * sigma_prime_from_value(sigma(z[r])) / gamma;
                next.b[r] += w;
                for c in 0..d {
                    next.u[r * d + c] += w * q[i * d + c];
                }
            }
        }
        Ok(next)
    };

    let solved = solve_theta_fixed_point(
        phi,
        theta_guess.clone(),
        tol,
        max_iter,
        "symplectic_layer_unstep",
    )?;
    // One more position pass at the converged control, then the explicit
    // costate recovery.
    let _ = phi(&solved)?;
    let q = q_cache.into_inner();
    let mut z = vec![0.0; d];
    let mut p = stepped.p().to_vec();
    for i in 0..n {
        solved.preactivation(&q[i * d..(i + 1) * d], &mut z);
        for c in 0..d {
            let mut acc = 0.0;
            for r in 0..d {
                acc += solved.u[r * d + c]
                    * stepped.p()[i * d + r]
                    * sigma_prime_from_value(sigma(z[r]));
            }
            p[i * d + c] += dt * acc;
        }
    }
    PhaseBatch::new(q, p, d)
}

/// Squared-error residual Σᵢ(π(readout)−cᵢ)² and classification accuracy,
/// with π the logistic readout of the first state coordinate.
pub fn loss_and_accuracy(final_batch: &PhaseBatch, labels: &[u8]) -> (f64, f64) {
    let d = final_batch.dim();
    let n = final_batch.len();
    debug_assert_eq!(n, labels.len());
    let mut residual = 0.0;
    let mut hits = 0usize;
    for i in 0..n {
        let readout = final_batch.q()[i * d];
        let pi = 1.0 / (1.0 + (-readout).exp());
        let c = labels[i] as f64;
        residual += (pi - c) * (pi - c);
        let predicted = u8::from(pi >= 0.5);
        if predicted == labels[i] {
            hits += 1;
        }
    }
    (residual, hits as f64 / n as f64)
}
