//! Canonical phase-space containers and the Hamiltonian contract.
//!
//! A [`PhaseBatch`] holds positions and conjugate momenta for a batch of
//! samples, flattened row-major (`sample * dim + coord`). Hamiltonians are
//! functions of the *whole batch* — this matters for the coupled network
//! Hamiltonians, where samples interact through shared sums.
//!
//! Also hosts the non-geometric reference integrators (explicit Euler and
//! classical RK4 on the canonical vector field) used as comparison baselines,
//! and a finite-difference gradient checker.

use crate::error::{Error, Result};

/// One sample: position `q` and conjugate momentum `p` of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Usage(format!(
                "phase point dimension mismatch: q has {}, p has {}",
                q.len(),
                p.len()
            )));
        }
        for (i, v) in q.iter().chain(p.iter()).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    component: format!("phase point entry {i}"),
                });
            }
        }
        Ok(PhasePoint { q, p })
    }
}

/// A batch of `n` phase points of uniform dimension `d`, stored flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBatch {
    q: Vec<f64>,
    p: Vec<f64>,
    n: usize,
    d: usize,
}

impl PhaseBatch {
    pub fn new(q: Vec<f64>, p: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || q.len() != p.len() || q.is_empty() || q.len() % dim != 0 {
            return Err(Error::Usage(format!(
                "batch shape invalid: |q|={}, |p|={}, d={}",
                q.len(),
                p.len(),
                dim
            )));
        }
        let batch = PhaseBatch {
            n: q.len() / dim,
            d: dim,
            q,
            p,
        };
        batch.check_finite("batch construction")?;
        Ok(batch)
    }

    pub fn from_points(points: &[PhasePoint]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Usage("batch needs at least one sample".into()))?;
        let d = first.q.len();
        let mut q = Vec::with_capacity(points.len() * d);
        let mut p = Vec::with_capacity(points.len() * d);
        for pt in points {
            if pt.q.len() != d {
                return Err(Error::Usage("non-uniform sample dimension in batch".into()));
            }
            q.extend_from_slice(&pt.q);
            p.extend_from_slice(&pt.p);
        }
        PhaseBatch::new(q, p, d)
    }

    /// Single point, dimension 1 — convenient for scalar test systems.
    pub fn scalar(q: f64, p: f64) -> Self {
        PhaseBatch::new(vec![q], vec![p], 1).expect("scalar batch")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: n >= 1
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Total number of (q, p) coordinate pairs, `n * d`.
    pub fn coords(&self) -> usize {
        self.n * self.d
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn point(&self, i: usize) -> PhasePoint {
        let lo = i * self.d;
        let hi = lo + self.d;
        PhasePoint {
            q: self.q[lo..hi].to_vec(),
            p: self.p[lo..hi].to_vec(),
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        for (i, v) in self.q.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    component: format!("{context}: q[sample {}][coord {}]", i / self.d, i % self.d),
                });
            }
        }
        for (i, v) in self.p.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    component: format!("{context}: p[sample {}][coord {}]", i / self.d, i % self.d),
                });
            }
        }
        Ok(())
    }
}

/// Hamiltonian on the batch phase space: a scalar value plus analytic first
/// derivatives. Gradients are flattened like the batch arrays.
///
/// Implementations must be pure; higher derivatives, when an algorithm needs
/// them, are formed by central finite differences of these gradients.
pub trait Hamiltonian {
    fn value(&self, s: &PhaseBatch) -> f64;
    fn grad_q(&self, s: &PhaseBatch) -> Vec<f64>;
    fn grad_p(&self, s: &PhaseBatch) -> Vec<f64>;
    fn name(&self) -> &str;
    /// Named scalar parameters, for run metadata.
    fn parameters(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

/// Step size for finite differences of supplied gradients (crate convention).
pub const FD_STEP: f64 = 1e-5;

fn check_grad_finite(g: &[f64], what: &str, d: usize) -> Result<()> {
    for (i, v) in g.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                component: format!("{what}[sample {}][coord {}]", i / d, i % d),
            });
        }
    }
    Ok(())
}

/// One explicit-Euler step of the canonical equations
/// q' = q + dt ∂H/∂p, p' = p − dt ∂H/∂q.
pub fn euler_step<H: Hamiltonian + ?Sized>(h: &H, s: &PhaseBatch, dt: f64) -> Result<PhaseBatch> {
    if !dt.is_finite() {
        return Err(Error::Usage(format!("euler_step: dt = {dt} not finite")));
    }
    let gq = h.grad_q(s);
    let gp = h.grad_p(s);
    check_grad_finite(&gq, "euler_step grad_q", s.dim())?;
    check_grad_finite(&gp, "euler_step grad_p", s.dim())?;
    let mut out = s.clone();
    for i in 0..s.coords() {
        out.q_mut()[i] = s.q()[i] + dt * gp[i];
        out.p_mut()[i] = s.p()[i] - dt * gq[i];
    }
    Ok(out)
}

/// One classical four-stage Runge–Kutta step of the canonical vector field
/// (∂H/∂p, −∂H/∂q).
pub fn rk4_step<H: Hamiltonian + ?Sized>(h: &H, s: &PhaseBatch, dt: f64) -> Result<PhaseBatch> {
    if !dt.is_finite() {
        return Err(Error::Usage(format!("rk4_step: dt = {dt} not finite")));
    }
    let field = |state: &PhaseBatch| -> Result<(Vec<f64>, Vec<f64>)> {
        let gq = h.grad_q(state);
        let gp = h.grad_p(state);
        check_grad_finite(&gq, "rk4_step grad_q", state.dim())?;
        check_grad_finite(&gp, "rk4_step grad_p", state.dim())?;
        let dq = gp;
        let dp: Vec<f64> = gq.iter().map(|v| -v).collect();
        Ok((dq, dp))
    };
    let shifted = |base: &PhaseBatch, kq: &[f64], kp: &[f64], c: f64| -> PhaseBatch {
        let mut out = base.clone();
        for i in 0..base.coords() {
            out.q_mut()[i] = base.q()[i] + c * kq[i];
            out.p_mut()[i] = base.p()[i] + c * kp[i];
        }
        out
    };

    let (k1q, k1p) = field(s)?;
    let (k2q, k2p) = field(&shifted(s, &k1q, &k1p, dt / 2.0))?;
    let (k3q, k3p) = field(&shifted(s, &k2q, &k2p, dt / 2.0))?;
    let (k4q, k4p) = field(&shifted(s, &k3q, &k3p, dt))?;

    let mut out = s.clone();
    for i in 0..s.coords() {
        out.q_mut()[i] = s.q()[i] + dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
        out.p_mut()[i] = s.p()[i] + dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
    }
    Ok(out)
}

/// Max abs deviation between the analytic gradients of `h` and central finite
/// differences of its value, over all q and p coordinates.
pub fn check_gradients<H: Hamiltonian + ?Sized>(h: &H, s: &PhaseBatch, h_fd: f64) -> Result<f64> {
    if h_fd <= 0.0 {
        return Err(Error::Usage(format!("check_gradients: h_fd = {h_fd} must be > 0")));
    }
    let gq = h.grad_q(s);
    let gp = h.grad_p(s);
    let mut worst = 0.0_f64;
    let mut probe = s.clone();
    for i in 0..s.coords() {
        let orig = probe.q()[i];
        probe.q_mut()[i] = orig + h_fd;
        let plus = h.value(&probe);
        probe.q_mut()[i] = orig - h_fd;
        let minus = h.value(&probe);
        probe.q_mut()[i] = orig;
        worst = worst.max((gq[i] - (plus - minus) / (2.0 * h_fd)).abs());
    }
    for i in 0..s.coords() {
        let orig = probe.p()[i];
        probe.p_mut()[i] = orig + h_fd;
        let plus = h.value(&probe);
        probe.p_mut()[i] = orig - h_fd;
        let minus = h.value(&probe);
        probe.p_mut()[i] = orig;
        worst = worst.max((gp[i] - (plus - minus) / (2.0 * h_fd)).abs());
    }
    Ok(worst)
}

/// H = ½ Σ (q² + p²): the standard oscillator benchmark, summed over the batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicOscillator;

impl Hamiltonian for HarmonicOscillator {
    fn value(&self, s: &PhaseBatch) -> f64 {
        let sq: f64 = s.q().iter().map(|v| v * v).sum();
        let sp: f64 = s.p().iter().map(|v| v * v).sum();
        0.5 * (sq + sp)
    }

    fn grad_q(&self, s: &PhaseBatch) -> Vec<f64> {
        s.q().to_vec()
    }

    fn grad_p(&self, s: &PhaseBatch) -> Vec<f64> {
        s.p().to_vec()
    }

    fn name(&self) -> &str {
        "harmonic-oscillator"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_step_direct_substitution() {
        // H = (q²+p²)/2 at (1,0), dt = 0.1 → (1.0, −0.1)
        let s = PhaseBatch::scalar(1.0, 0.0);
        let out = euler_step(&HarmonicOscillator, &s, 0.1).unwrap();
        assert_eq!(out.q()[0], 1.0);
        assert_eq!(out.p()[0], -0.1);
    }

    #[test]
    fn euler_step_zero_dt_is_identity() {
        let s = PhaseBatch::new(vec![0.3, -1.2], vec![0.7, 2.0], 2).unwrap();
        let out = euler_step(&HarmonicOscillator, &s, 0.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn rk4_step_zero_dt_is_identity() {
        let s = PhaseBatch::new(vec![0.3, -1.2], vec![0.7, 2.0], 2).unwrap();
        let out = rk4_step(&HarmonicOscillator, &s, 0.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn rk4_step_matches_oscillator_rotation() {
        // Exact flow of the oscillator is a rotation by dt.
        let dt = 0.1;
        let s = PhaseBatch::scalar(1.0, 0.0);
        let out = rk4_step(&HarmonicOscillator, &s, dt).unwrap();
        assert!((out.q()[0] - dt.cos()).abs() <= 1e-7, "q error too large");
        assert!((out.p()[0] + dt.sin()).abs() <= 1e-7, "p error too large");
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        let exact = |q0: f64, p0: f64, t: f64| (q0 * t.cos() + p0 * t.sin(), -q0 * t.sin() + p0 * t.cos());
        let mut errs = Vec::new();
        let dts = [0.1, 0.05, 0.025, 0.0125];
        for &dt in &dts {
            let s = PhaseBatch::scalar(0.8, 0.55);
            let out = rk4_step(&HarmonicOscillator, &s, dt).unwrap();
            let (qe, pe) = exact(0.8, 0.55, dt);
            let err = ((out.q()[0] - qe).powi(2) + (out.p()[0] - pe).powi(2)).sqrt();
            errs.push(err);
        }
        let slope = crate::validation::loglog_slope(&dts, &errs);
        assert!(
            (slope - 5.0).abs() <= 0.15,
            "rk4 local error slope {slope}, expected 5±0.15"
        );
    }

    #[test]
    fn rk4_halving_step_gap_is_fifth_order() {
        let mut gaps = Vec::new();
        let dts = [0.1, 0.05, 0.025, 0.0125];
        for &dt in &dts {
            let s = PhaseBatch::scalar(0.8, 0.55);
            let full = rk4_step(&HarmonicOscillator, &s, dt).unwrap();
            let half = rk4_step(&HarmonicOscillator, &s, dt / 2.0).unwrap();
            let half2 = rk4_step(&HarmonicOscillator, &half, dt / 2.0).unwrap();
            let gap = ((full.q()[0] - half2.q()[0]).powi(2) + (full.p()[0] - half2.p()[0]).powi(2)).sqrt();
            gaps.push(gap);
        }
        let slope = crate::validation::loglog_slope(&dts, &gaps);
        assert!(
            (slope - 5.0).abs() <= 0.15,
            "rk4 two-half-step gap slope {slope}, expected 5±0.15"
        );
    }

    #[test]
    fn gradient_check_quadratic_is_near_exact() {
        // Central differences are exact on quadratics up to rounding.
        let s = PhaseBatch::scalar(1.0, 2.0);
        let dev = check_gradients(&HarmonicOscillator, &s, 1e-5).unwrap();
        assert!(dev <= 1e-9, "deviation {dev}");
    }

    #[test]
    fn gradient_check_constant_hamiltonian() {
        struct Constant;
        impl Hamiltonian for Constant {
            fn value(&self, _: &PhaseBatch) -> f64 {
                3.5
            }
            fn grad_q(&self, s: &PhaseBatch) -> Vec<f64> {
                vec![0.0; s.coords()]
            }
            fn grad_p(&self, s: &PhaseBatch) -> Vec<f64> {
                vec![0.0; s.coords()]
            }
            fn name(&self) -> &str {
                "constant"
            }
        }
        let s = PhaseBatch::new(vec![0.1, 0.2, 0.3], vec![-0.1, 0.0, 2.0], 3).unwrap();
        let dev = check_gradients(&Constant, &s, 1e-5).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn non_finite_gradient_is_reported_with_component() {
        struct Bad;
        impl Hamiltonian for Bad {
            fn value(&self, _: &PhaseBatch) -> f64 {
                0.0
            }
            fn grad_q(&self, s: &PhaseBatch) -> Vec<f64> {
                let mut g = vec![0.0; s.coords()];
                g[1] = f64::NAN;
                g
            }
            fn grad_p(&self, s: &PhaseBatch) -> Vec<f64> {
                vec![0.0; s.coords()]
            }
            fn name(&self) -> &str {
                "bad"
            }
        }
        let s = PhaseBatch::new(vec![0.0, 0.0], vec![0.0, 0.0], 2).unwrap();
        let err = euler_step(&Bad, &s, 0.1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("grad_q"), "message was: {msg}");
        assert!(msg.contains("coord 1"), "message was: {msg}");
    }
}
