//! Periodic 1D meshes and grid functions with centered differences.

use crate::error::{Error, Result};

/// Uniform periodic mesh: `n` points with spacing `dx` (domain length n·dx).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub n: usize,
    pub dx: f64,
}

impl Mesh {
    /// Mesh over [0, 2π) with `n` points.
    pub fn unit_circle(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Usage(format!("mesh needs ≥ 4 points, got {n}")));
        }
        Ok(Mesh {
            n,
            dx: 2.0 * std::f64::consts::PI / n as f64,
        })
    }

    pub fn node(&self, j: usize) -> f64 {
        self.dx * j as f64
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n as f64
    }
}

/// Real-valued samples on a periodic mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n {
            return Err(Error::MeshMismatch(format!(
                "{} values on a {}-point mesh",
                values.len(),
                mesh.n
            )));
        }
        for (j, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    component: format!("grid value at index {j}"),
                });
            }
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn constant(mesh: Mesh, c: f64) -> Self {
        GridFunction {
            mesh,
            values: vec![c; mesh.n],
        }
    }

    pub fn sample(mesh: Mesh, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..mesh.n).map(|j| f(mesh.node(j))).collect();
        GridFunction { mesh, values }
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            mesh: self.mesh,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        debug_assert_eq!(self.mesh, other.mesh);
        GridFunction {
            mesh: self.mesh,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Σ f·Δx over the period.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.mesh.dx
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Centered second-order periodic difference, applied `order` times.
pub fn dx(f: &GridFunction, order: usize) -> GridFunction {
    let mut current = f.clone();
    for _ in 0..order {
        current = dx_once(&current);
    }
    current
}

fn dx_once(f: &GridFunction) -> GridFunction {
    let n = f.mesh.n;
    let two_dx = 2.0 * f.mesh.dx;
    let v = &f.values;
    let values = (0..n)
        .map(|j| (v[(j + 1) % n] - v[(j + n - 1) % n]) / two_dx)
        .collect();
    GridFunction {
        mesh: f.mesh,
        values,
    }
}

/// Discrete L² pairing Σ f·g·Δx.
pub fn l2_pairing(f: &GridFunction, g: &GridFunction) -> f64 {
    f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * f.mesh.dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_derivative() {
        let mesh = Mesh::unit_circle(16).unwrap();
        let f = GridFunction::constant(mesh, 3.2);
        assert_eq!(dx(&f, 1).max_abs(), 0.0);
    }

    #[test]
    fn sine_derivative_close_to_cosine() {
        let mesh = Mesh::unit_circle(256).unwrap();
        let f = GridFunction::sample(mesh, f64::sin);
        let df = dx(&f, 1);
        let worst = (0..mesh.n)
            .map(|j| (df.values()[j] - mesh.node(j).cos()).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst <= 1e-3, "max error {worst}");
    }

    #[test]
    fn differencing_is_linear() {
        let mesh = Mesh::unit_circle(32).unwrap();
        let f = GridFunction::sample(mesh, |x| (2.0 * x).sin());
        let g = GridFunction::sample(mesh, |x| x.cos() + 0.3);
        let (a, b) = (1.7, -0.4);
        let combo = f.zip(&g, |fv, gv| a * fv + b * gv);
        let lhs = dx(&combo, 1);
        let dfa = dx(&f, 1);
        let dgb = dx(&g, 1);
        for j in 0..mesh.n {
            let rhs = a * dfa.values()[j] + b * dgb.values()[j];
            assert!((lhs.values()[j] - rhs).abs() <= 1e-14);
        }
    }

    #[test]
    fn summation_by_parts_is_exact() {
        // Σ u·(Dv) = −Σ (Du)·v for the centered periodic difference.
        let mesh = Mesh::unit_circle(64).unwrap();
        let u = GridFunction::sample(mesh, |x| (3.0 * x).cos() + 0.2 * x.sin());
        let v = GridFunction::sample(mesh, |x| (2.0 * x).sin());
        let lhs = l2_pairing(&u, &dx(&v, 1));
        let rhs = -l2_pairing(&dx(&u, 1), &v);
        assert!((lhs - rhs).abs() <= 1e-13, "{lhs} vs {rhs}");
    }
}
