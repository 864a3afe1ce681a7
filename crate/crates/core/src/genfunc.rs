//! Type-II generating-function symplectic integrator.
//!
//! The one-step map solves, for a truncated series S(q, p', t) built from the
//! Hamiltonian,
//!
//! ```text
//! q' = q + ∂S/∂p (q, p', dt),    p' = p − ∂S/∂q (q, p', dt),
//! ```
//!
//! with the momentum equation closed by damped fixed-point iteration. The
//! series is anchored so dt = 0 generates the identity; with one term the map
//! reduces to the symplectic Euler scheme, and each extra term raises the
//! order by one.
//!
//! Series terms beyond the first use second derivatives of the Hamiltonian,
//! formed by central finite differences of its analytic gradients (step
//! [`FD_STEP`]); the cubic term's own gradient is differenced once more.

use crate::error::{Error, Result};
use crate::phase::{Hamiltonian, PhaseBatch, FD_STEP};

/// Highest supported series order.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Copy)]
enum GradKind {
    Q,
    P,
}

#[derive(Clone, Copy)]
enum Wrt {
    Q,
    P,
}

/// Truncated generating series of a Hamiltonian, with term values and the
/// series gradients needed by the implicit step.
pub struct GeneratingSeries<'a> {
    order: usize,
    source: &'a dyn Hamiltonian,
}

/// Build the `m`-term series for `h`. Terms one and two have closed forms
/// (the Hamiltonian itself and ½⟨∂H/∂q, ∂H/∂p⟩); the third is the t²
/// coefficient obtained by pushing the series through the type-II
/// Hamilton–Jacobi equation.
pub fn build_series(h: &dyn Hamiltonian, m: usize) -> Result<GeneratingSeries<'_>> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order: m });
    }
    Ok(GeneratingSeries { order: m, source: h })
}

impl<'a> GeneratingSeries<'a> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn source(&self) -> &'a dyn Hamiltonian {
        self.source
    }

    /// Directional derivative of one analytic gradient, central-differenced
    /// along `dir` (normalized internally; zero direction gives zeros).
    fn grad_directional(&self, s: &PhaseBatch, kind: GradKind, wrt: Wrt, dir: &[f64]) -> Vec<f64> {
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; s.coords()];
        }
        let mut plus = s.clone();
        let mut minus = s.clone();
        for i in 0..s.coords() {
            let delta = FD_STEP * dir[i] / norm;
            match wrt {
                Wrt::Q => {
                    plus.q_mut()[i] += delta;
                    minus.q_mut()[i] -= delta;
                }
                Wrt::P => {
                    plus.p_mut()[i] += delta;
                    minus.p_mut()[i] -= delta;
                }
            }
        }
        let (gp, gm) = match kind {
            GradKind::Q => (self.source.grad_q(&plus), self.source.grad_q(&minus)),
            GradKind::P => (self.source.grad_p(&plus), self.source.grad_p(&minus)),
        };
        gp.iter()
            .zip(&gm)
            .map(|(a, b)| norm * (a - b) / (2.0 * FD_STEP))
            .collect()
    }

    /// Value of series term `i` (1-based) at the state.
    pub fn term_value(&self, i: usize, s: &PhaseBatch) -> f64 {
        match i {
            1 => self.source.value(s),
            2 => {
                let a = self.source.grad_q(s);
                let b = self.source.grad_p(s);
                0.5 * dot(&a, &b)
            }
            3 => {
                let a = self.source.grad_q(s);
                let b = self.source.grad_p(s);
                // ⟨H_p, H_qq H_p⟩ + ⟨H_q, H_pp H_q⟩ + ⟨H_p, (∂²H/∂q∂p) H_q⟩, /6
                let hqq_b = self.grad_directional(s, GradKind::Q, Wrt::Q, &b);
                let hpp_a = self.grad_directional(s, GradKind::P, Wrt::P, &a);
                let mixed = self.grad_directional(s, GradKind::Q, Wrt::P, &a);
                (dot(&b, &hqq_b) + dot(&a, &hpp_a) + dot(&b, &mixed)) / 6.0
            }
            _ => panic!("series term {i} out of range"),
        }
    }

    /// S(q, p, t) = Σ tᶦ · term_i(q, p).
    pub fn value(&self, s: &PhaseBatch, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut tp = 1.0;
        for i in 1..=self.order {
            tp *= t;
            acc += tp * self.term_value(i, s);
        }
        acc
    }

    /// (∂S/∂q, ∂S/∂p) at the state.
    pub fn gradients(&self, s: &PhaseBatch, t: f64) -> (Vec<f64>, Vec<f64>) {
        let c = s.coords();
        let mut sq = vec![0.0; c];
        let mut sp = vec![0.0; c];

        let gq = self.source.grad_q(s);
        let gp = self.source.grad_p(s);
        axpy(t, &gq, &mut sq);
        axpy(t, &gp, &mut sp);

        if self.order >= 2 {
            let t2 = t * t;
            // ∂/∂q ½⟨H_q,H_p⟩ = ½(H_qq H_p + (∂²H/∂p∂q)ᵀ H_q), and symmetrically in p;
            // every Hessian product is a differenced directional derivative.
            let hqq_b = self.grad_directional(s, GradKind::Q, Wrt::Q, &gp);
            let hq_pa = self.grad_directional(s, GradKind::Q, Wrt::P, &gq);
            let hp_qb = self.grad_directional(s, GradKind::P, Wrt::Q, &gp);
            let hpp_a = self.grad_directional(s, GradKind::P, Wrt::P, &gq);
            for i in 0..c {
                sq[i] += t2 * 0.5 * (hqq_b[i] + hq_pa[i]);
                sp[i] += t2 * 0.5 * (hp_qb[i] + hpp_a[i]);
            }
        }

        if self.order >= 3 {
            let t3 = t * t * t;
            // Third derivatives of H would be needed in closed form; difference
            // the term value instead.
            let mut probe = s.clone();
            for i in 0..c {
                let orig = probe.q()[i];
                probe.q_mut()[i] = orig + FD_STEP;
                let plus = self.term_value(3, &probe);
                probe.q_mut()[i] = orig - FD_STEP;
                let minus = self.term_value(3, &probe);
                probe.q_mut()[i] = orig;
                sq[i] += t3 * (plus - minus) / (2.0 * FD_STEP);
            }
            for i in 0..c {
                let orig = probe.p()[i];
                probe.p_mut()[i] = orig + FD_STEP;
                let plus = self.term_value(3, &probe);
                probe.p_mut()[i] = orig - FD_STEP;
                let minus = self.term_value(3, &probe);
                probe.p_mut()[i] = orig;
                sp[i] += t3 * (plus - minus) / (2.0 * FD_STEP);
            }
        }

        (sq, sp)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// One implicit symplectic step of the series map. `dt = 0` returns the input
/// exactly. The momentum equation is solved by damped fixed-point iteration
/// (full step first, damping halved whenever the residual grows) to residual
/// ≤ `tol` in the max norm.
pub fn symplectic_step(
    series: &GeneratingSeries,
    s: &PhaseBatch,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PhaseBatch> {
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::Usage(format!("symplectic_step: dt = {dt} must be ≥ 0")));
    }
    if tol <= 0.0 {
        return Err(Error::Usage(format!("symplectic_step: tol = {tol} must be > 0")));
    }
    if dt == 0.0 {
        return Ok(s.clone());
    }

    let c = s.coords();
    // Mixed-argument state: old q, trial new p.
    let mut mixed = s.clone();
    let mut damping = 1.0_f64;
    let mut last_residual = f64::INFINITY;

    for iteration in 0..max_iter {
        let (sq, _) = series.gradients(&mixed, dt);
        let mut residual = 0.0_f64;
        for i in 0..c {
            let target = s.p()[i] - sq[i];
            let delta = target - mixed.p()[i];
            residual = residual.max(delta.abs());
        }
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                component: format!("symplectic_step residual at iteration {iteration}"),
            });
        }
        if residual <= tol {
            let (_, sp) = series.gradients(&mixed, dt);
            let mut out = mixed.clone();
            for i in 0..c {
                out.q_mut()[i] = s.q()[i] + sp[i];
            }
            out.check_finite("symplectic_step output")?;
            return Ok(out);
        }
        if residual > 0.9 * last_residual {
            damping = (damping * 0.5).max(1.0 / 64.0);
        } else {
            damping = (damping * 1.5).min(1.0);
        }
        last_residual = residual;
        for i in 0..c {
            let target = s.p()[i] - sq[i];
            let pi = mixed.p()[i];
            mixed.p_mut()[i] = pi + damping * (target - pi);
        }
    }

    Err(Error::Convergence {
        context: format!("symplectic_step (order {})", series.order()),
        iterations: max_iter,
        residual: last_residual,
    })
}

/// ‖Jᵀ Ω J − Ω‖_∞ for the Jacobian J of a one-step map, with Ω the canonical
/// skew block matrix. J is formed by central differences with step `h_fd`;
/// an exactly symplectic smooth map measures ~0, explicit Euler measures
/// O(dt²).
pub fn symplecticity_defect<F>(step: F, s: &PhaseBatch, h_fd: f64) -> Result<f64>
where
    F: Fn(&PhaseBatch) -> Result<PhaseBatch>,
{
    let c = s.coords();
    let dim = 2 * c;
    // Column k = d(step)/d(coordinate k), coordinates stacked (q..., p...).
    let mut jac = vec![vec![0.0_f64; dim]; dim];
    let mut probe = s.clone();
    for k in 0..dim {
        let (orig, is_q) = if k < c {
            (probe.q()[k], true)
        } else {
            (probe.p()[k - c], false)
        };
        let set = |b: &mut PhaseBatch, v: f64| {
            if is_q {
                b.q_mut()[k % c] = v;
            } else {
                b.p_mut()[k - c] = v;
            }
        };
        set(&mut probe, orig + h_fd);
        let plus = step(&probe)?;
        set(&mut probe, orig - h_fd);
        let minus = step(&probe)?;
        set(&mut probe, orig);
        for r in 0..dim {
            let (vp, vm) = if r < c {
                (plus.q()[r], minus.q()[r])
            } else {
                (plus.p()[r - c], minus.p()[r - c])
            };
            jac[r][k] = (vp - vm) / (2.0 * h_fd);
        }
    }

    // Ω J: top block rows take J's p-rows, bottom rows take −(q-rows).
    let omega_j: Vec<Vec<f64>> = (0..dim)
        .map(|r| {
            if r < c {
                jac[r + c].clone()
            } else {
                jac[r - c].iter().map(|v| -v).collect()
            }
        })
        .collect();

    let mut defect = 0.0_f64;
    for r in 0..dim {
        for k in 0..dim {
            // (Jᵀ Ω J)[r][k] = Σ_m J[m][r] (ΩJ)[m][k]
            let mut acc = 0.0;
            for m in 0..dim {
                acc += jac[m][r] * omega_j[m][k];
            }
            let omega_rk = if r < c && k == r + c {
                1.0
            } else if r >= c && k == r - c {
                -1.0
            } else {
                0.0
            };
            defect = defect.max((acc - omega_rk).abs());
        }
    }
    Ok(defect)
}
