//! Catalogue of the Hamiltonians shipped by this crate, with seeded sample
//! states, so gradient checks and symplecticity sweeps can run over all of
//! them uniformly (the `gradcheck` subcommand and the acceptance suite do).

use rand::Rng;

use crate::lphj::RigidBodyLift;
use crate::peakon::{Kernel, PeakonHamiltonian};
use crate::phase::{Hamiltonian, HarmonicOscillator, PhaseBatch};
use crate::resnet::reduced_hamiltonian;
use crate::rng::seeded;

pub struct RegisteredHamiltonian {
    pub name: &'static str,
    pub hamiltonian: Box<dyn Hamiltonian>,
    sample: Box<dyn Fn(u64) -> PhaseBatch>,
}

impl RegisteredHamiltonian {
    pub fn sample_state(&self, seed: u64) -> PhaseBatch {
        (self.sample)(seed)
    }
}

fn uniform_batch(seed: u64, n: usize, d: usize, q_range: f64, p_range: f64) -> PhaseBatch {
    let mut rng = seeded(seed);
    let q: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-q_range..q_range)).collect();
    let p: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-p_range..p_range)).collect();
    PhaseBatch::new(q, p, d).expect("sample state")
}

/// Particles kept separated so the exponential kernel's kink at coincidence
/// is never sampled.
fn separated_particles(seed: u64, n: usize) -> PhaseBatch {
    let mut rng = seeded(seed);
    let q: Vec<f64> = (0..n)
        .map(|i| 3.0 * i as f64 + rng.gen_range(-0.8..0.8))
        .collect();
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
    PhaseBatch::new(q, p, 1).expect("sample state")
}

pub fn registered_hamiltonians() -> Vec<RegisteredHamiltonian> {
    vec![
        RegisteredHamiltonian {
            name: "harmonic-oscillator",
            hamiltonian: Box::new(HarmonicOscillator),
            sample: Box::new(|seed| uniform_batch(seed, 2, 2, 1.5, 1.5)),
        },
        RegisteredHamiltonian {
            name: "rigid-body-lift",
            hamiltonian: Box::new(RigidBodyLift {
                inertia: [1.0, 2.0, 3.0],
            }),
            sample: Box::new(|seed| uniform_batch(seed, 1, 3, 1.0, 1.0)),
        },
        RegisteredHamiltonian {
            name: "peakon-gaussian",
            hamiltonian: Box::new(PeakonHamiltonian {
                kernel: Kernel::Gaussian { scale: 1.0 },
            }),
            sample: Box::new(|seed| separated_particles(seed, 3)),
        },
        RegisteredHamiltonian {
            name: "peakon-exponential",
            hamiltonian: Box::new(PeakonHamiltonian {
                kernel: Kernel::Exponential { scale: 1.0 },
            }),
            sample: Box::new(|seed| separated_particles(seed, 3)),
        },
        RegisteredHamiltonian {
            name: "resnet-reduced",
            hamiltonian: Box::new(reduced_hamiltonian(4.0, 1e-13, 400)),
            sample: Box::new(|seed| uniform_batch(seed, 4, 2, 1.0, 0.5)),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::check_gradients;

    #[test]
    fn every_registered_hamiltonian_passes_gradient_checks() {
        // 100 seeded states each, deviation ≤ 1e-5.
        for entry in registered_hamiltonians() {
            let mut worst = 0.0_f64;
            for seed in 0..100 {
                let state = entry.sample_state(seed);
                let dev = check_gradients(entry.hamiltonian.as_ref(), &state, 1e-5).unwrap();
                worst = worst.max(dev);
            }
            assert!(worst <= 1e-5, "{}: worst deviation {worst}", entry.name);
        }
    }

    #[test]
    fn generating_step_is_symplectic_for_every_registered_hamiltonian() {
        use crate::genfunc::{build_series, symplectic_step, symplecticity_defect};
        for entry in registered_hamiltonians() {
            for m in 1..=3 {
                let series = build_series(entry.hamiltonian.as_ref(), m).unwrap();
                let state = entry.sample_state(7);
                let defect = symplecticity_defect(
                    |b| symplectic_step(&series, b, 0.01, 1e-12, 400),
                    &state,
                    1e-5,
                )
                .unwrap();
                assert!(
                    defect <= 1e-6,
                    "{} m={m}: defect {defect}",
                    entry.name
                );
            }
        }
    }
}
