//! Deterministic two-class benchmark datasets in the plane.
//!
//! Spirals: parameter t uniform on [0, 3π], radius 0.1 + 0.9·t/(3π), point
//! r·(cos(t+cπ), sin(t+cπ)) plus N(0, 0.02²) per coordinate. Circles: radius
//! 0.5 (class 0) or 1.0 (class 1) at a uniform angle plus N(0, 0.05²).
//! Everything flows from one ChaCha stream keyed by (kind, n, seed, split),
//! so regeneration is bit-identical.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{seeded, standard_normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Spirals,
    Circles,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spirals" => Ok(DatasetKind::Spirals),
            "circles" => Ok(DatasetKind::Circles),
            other => Err(Error::Usage(format!(
                "unknown dataset '{other}' (spirals|circles)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    /// n×2 row-major sample coordinates.
    pub inputs: Vec<f64>,
    pub labels: Vec<u8>,
    pub split: Split,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Balanced deterministic dataset: class 0 gets ⌈n/2⌉ points, class 1 the
/// rest, generated class-major from the seeded stream.
pub fn generate_dataset(kind: DatasetKind, n: usize, seed: u64, split: Split) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Usage("dataset size must be ≥ 1".into()));
    }
    let salt = match split {
        Split::Train => 0x7261_u64,
        Split::Test => 0x7465_u64,
    };
    let mut rng = seeded(seed ^ (salt << 32));
    let n0 = n / 2 + n % 2;
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for class in [0u8, 1u8] {
        let count = if class == 0 { n0 } else { n - n0 };
        for _ in 0..count {
            let (x, y) = match kind {
                DatasetKind::Spirals => {
                    let t: f64 = rng.gen_range(0.0..3.0 * std::f64::consts::PI);
                    let r = 0.1 + 0.9 * t / (3.0 * std::f64::consts::PI);
                    let phase = t + class as f64 * std::f64::consts::PI;
                    (
                        r * phase.cos() + 0.02 * standard_normal(&mut rng),
                        r * phase.sin() + 0.02 * standard_normal(&mut rng),
                    )
                }
                DatasetKind::Circles => {
                    let radius = if class == 0 { 0.5 } else { 1.0 };
                    let angle: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                    (
                        radius * angle.cos() + 0.05 * standard_normal(&mut rng),
                        radius * angle.sin() + 0.05 * standard_normal(&mut rng),
                    )
                }
            };
            inputs.push(x);
            inputs.push(y);
            labels.push(class);
        }
    }
    Ok(Dataset {
        kind,
        inputs,
        labels,
        split,
        seed,
    })
}
