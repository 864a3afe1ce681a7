//! Discrete pseudodifferential symbols on a periodic mesh.
//!
//! A symbol is a Laurent polynomial in a formal variable ξ whose coefficients
//! are grid functions. Composition follows the graded product rule
//!
//! ```text
//! a ∘ b = Σ_α (1/α!) ∂_ξ^α(a) · Dₓ^α(b),
//! ```
//!
//! where ∂_ξ acts formally on exponents (ξᵏ ↦ k ξᵏ⁻¹) and Dₓ is the centered
//! periodic difference. Products are truncated to an exponent window; dropped
//! exponents are recorded on the result rather than silently discarded.
//!
//! The trace reads the ξ⁻¹ coefficient, scaled by Δx so that it approximates
//! the integral of the residue and stays consistent under mesh refinement.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::grid::{dx as grid_dx, GridFunction, Mesh};

/// Exponent window kept by default; the formulas this algebra serves use
/// exponents in exactly this range.
pub const DEFAULT_WINDOW: (i32, i32) = (-4, 2);

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    mesh: Mesh,
    coeffs: BTreeMap<i32, Vec<f64>>,
    window: (i32, i32),
    clipped: BTreeSet<i32>,
}

impl Symbol {
    pub fn zero(mesh: Mesh, window: (i32, i32)) -> Self {
        Symbol {
            mesh,
            coeffs: BTreeMap::new(),
            window,
            clipped: BTreeSet::new(),
        }
    }

    /// Coefficient 1 at exponent 0.
    pub fn identity(mesh: Mesh, window: (i32, i32)) -> Self {
        let mut s = Symbol::zero(mesh, window);
        s.set_coeff(0, vec![1.0; mesh.n]).expect("identity coeff");
        s
    }

    pub fn from_coeffs(mesh: Mesh, window: (i32, i32), entries: &[(i32, GridFunction)]) -> Result<Self> {
        let mut s = Symbol::zero(mesh, window);
        for (exp, gf) in entries {
            if gf.mesh() != mesh {
                return Err(Error::MeshMismatch(format!(
                    "coefficient at exponent {exp} lives on a different mesh"
                )));
            }
            s.set_coeff(*exp, gf.values().to_vec())?;
        }
        Ok(s)
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn window(&self) -> (i32, i32) {
        self.window
    }

    /// Exponents an operation produced but had to drop to honor the window.
    pub fn clipped(&self) -> impl Iterator<Item = i32> + '_ {
        self.clipped.iter().copied()
    }

    pub fn exponents(&self) -> impl Iterator<Item = i32> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn coeff(&self, exp: i32) -> Option<&[f64]> {
        self.coeffs.get(&exp).map(|v| v.as_slice())
    }

    /// Coefficient as a grid function; absent exponents are zero.
    pub fn coeff_grid(&self, exp: i32) -> GridFunction {
        match self.coeffs.get(&exp) {
            Some(v) => GridFunction::new(self.mesh, v.clone()).expect("stored coeff is valid"),
            None => GridFunction::constant(self.mesh, 0.0),
        }
    }

    pub fn set_coeff(&mut self, exp: i32, values: Vec<f64>) -> Result<()> {
        if exp < self.window.0 || exp > self.window.1 {
            return Err(Error::Usage(format!(
                "exponent {exp} outside window [{}, {}]",
                self.window.0, self.window.1
            )));
        }
        if values.len() != self.mesh.n {
            return Err(Error::MeshMismatch(format!(
                "{} values on a {}-point mesh",
                values.len(),
                self.mesh.n
            )));
        }
        self.coeffs.insert(exp, values);
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Symbol {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            for x in v.iter_mut() {
                *x *= c;
            }
        }
        out
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Symbol, f: impl Fn(f64, f64) -> f64) -> Result<Symbol> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch("symbol operands on different meshes".into()));
        }
        let window = (
            self.window.0.min(other.window.0),
            self.window.1.max(other.window.1),
        );
        let mut out = Symbol::zero(self.mesh, window);
        out.clipped = self.clipped.union(&other.clipped).copied().collect();
        let exps: BTreeSet<i32> = self.exponents().chain(other.exponents()).collect();
        for exp in exps {
            let zero = vec![0.0; self.mesh.n];
            let a = self.coeffs.get(&exp).unwrap_or(&zero);
            let b = other.coeffs.get(&exp).unwrap_or(&zero);
            let vals: Vec<f64> = a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
            out.coeffs.insert(exp, vals);
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Max abs difference per matching exponent (absent = zero).
    pub fn max_abs_diff(&self, other: &Symbol) -> f64 {
        let exps: BTreeSet<i32> = self.exponents().chain(other.exponents()).collect();
        let mut worst = 0.0_f64;
        for exp in exps {
            let zero = vec![0.0; self.mesh.n];
            let a = self.coeffs.get(&exp).unwrap_or(&zero);
            let b = other.coeffs.get(&exp).unwrap_or(&zero);
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    /// Fixture serialization: `{"mesh":{"n":..,"dx":..},"coeffs":{"<exp>":[..]}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: serde_json::Map<String, serde_json::Value> = self
            .coeffs
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
            .collect();
        serde_json::json!({
            "mesh": { "n": self.mesh.n, "dx": self.mesh.dx },
            "coeffs": coeffs,
        })
    }

    pub fn from_json(value: &serde_json::Value, window: (i32, i32)) -> Result<Symbol> {
        let bad = |what: &str| Error::Schema(format!("symbol fixture: {what}"));
        let n = value["mesh"]["n"].as_u64().ok_or_else(|| bad("missing mesh.n"))? as usize;
        let dx = value["mesh"]["dx"].as_f64().ok_or_else(|| bad("missing mesh.dx"))?;
        let mesh = Mesh { n, dx };
        let mut out = Symbol::zero(mesh, window);
        let coeffs = value["coeffs"].as_object().ok_or_else(|| bad("missing coeffs"))?;
        for (key, arr) in coeffs {
            let exp: i32 = key.parse().map_err(|_| bad("non-integer exponent key"))?;
            let vals: Vec<f64> = arr
                .as_array()
                .ok_or_else(|| bad("coefficient is not an array"))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| bad("non-numeric coefficient entry")))
                .collect::<Result<_>>()?;
            out.set_coeff(exp, vals)?;
        }
        Ok(out)
    }
}

/// Centered periodic difference of order `order` (re-export of the grid op
/// for callers working at the symbol level).
pub fn dx(f: &GridFunction, order: usize) -> GridFunction {
    grid_dx(f, order)
}

/// Graded composition a ∘ b truncated to `window`.
pub fn compose(a: &Symbol, b: &Symbol, window: (i32, i32)) -> Result<Symbol> {
    if a.mesh != b.mesh {
        return Err(Error::MeshMismatch("compose operands on different meshes".into()));
    }
    let mesh = a.mesh;
    let mut out = Symbol::zero(mesh, window);
    out.clipped = a.clipped.union(&b.clipped).copied().collect();
    let mut acc: BTreeMap<i32, Vec<f64>> = BTreeMap::new();

    for (&kb, vb) in &b.coeffs {
        // Lazily extended table of Dₓ^α applied to this coefficient.
        let mut diffs: Vec<Vec<f64>> = vec![vb.clone()];
        for (&ka, va) in &a.coeffs {
            // Falling-factorial weight (ka)_α / α!, built incrementally.
            let mut weight = 1.0_f64;
            let mut alpha: i32 = 0;
            loop {
                let e = ka - alpha + kb;
                if e < window.0 {
                    // Every later α lands even lower; record the first drop.
                    if weight != 0.0 {
                        out.clipped.insert(e);
                    }
                    break;
                }
                if weight == 0.0 {
                    break; // polynomial part of ∂_ξ exhausted
                }
                if e > window.1 {
                    out.clipped.insert(e);
                } else {
                    while diffs.len() <= alpha as usize {
                        let prev = GridFunction::new(mesh, diffs.last().unwrap().clone())
                            .expect("diff table entry");
                        diffs.push(grid_dx(&prev, 1).values().to_vec());
                    }
                    let db = &diffs[alpha as usize];
                    let entry = acc.entry(e).or_insert_with(|| vec![0.0; mesh.n]);
                    for (slot, (x, y)) in entry.iter_mut().zip(va.iter().zip(db)) {
                        *slot += weight * x * y;
                    }
                }
                weight *= (ka - alpha) as f64 / (alpha + 1) as f64;
                alpha += 1;
            }
        }
    }

    out.coeffs = acc;
    Ok(out)
}

/// Commutator [a, b] = a∘b − b∘a under the same truncation.
pub fn commutator(a: &Symbol, b: &Symbol, window: (i32, i32)) -> Result<Symbol> {
    let ab = compose(a, b, window)?;
    let ba = compose(b, a, window)?;
    ab.sub(&ba)
}

/// Tr(a) = Δx Σ_j a_{−1,j}: the discrete integral of the residue.
pub fn trace(a: &Symbol) -> f64 {
    match a.coeff(-1) {
        Some(v) => v.iter().sum::<f64>() * a.mesh.dx,
        None => 0.0,
    }
}

/// ⟨a, b⟩ = Tr(a ∘ b). Only the ξ⁻¹ band of the product is needed, and every
/// α contributing there is computed, so no truncation loss enters.
pub fn pairing(a: &Symbol, b: &Symbol) -> Result<f64> {
    let product = compose(a, b, (-1, -1))?;
    Ok(trace(&product))
}

/// δF/δM as a symbol: central differences of `f` with respect to every
/// coefficient sample of `m`, scaled by 1/Δx, placed at the mirrored
/// exponent (−i for coefficient i).
pub fn functional_derivative(
    f: &dyn Fn(&Symbol) -> f64,
    m: &Symbol,
    h_fd: f64,
) -> Result<Symbol> {
    let mesh = m.mesh;
    let exps: Vec<i32> = m.exponents().collect();
    let window = exps
        .iter()
        .fold((i32::MAX, i32::MIN), |(lo, hi), &e| (lo.min(-e), hi.max(-e)));
    let window = if exps.is_empty() { (0, 0) } else { window };
    let mut out = Symbol::zero(mesh, window);
    let mut probe = m.clone();
    for exp in exps {
        let mut grad = vec![0.0; mesh.n];
        for j in 0..mesh.n {
            let orig = probe.coeffs[&exp][j];
            probe.coeffs.get_mut(&exp).unwrap()[j] = orig + h_fd;
            let plus = f(&probe);
            probe.coeffs.get_mut(&exp).unwrap()[j] = orig - h_fd;
            let minus = f(&probe);
            probe.coeffs.get_mut(&exp).unwrap()[j] = orig;
            grad[j] = (plus - minus) / (2.0 * h_fd * mesh.dx);
        }
        out.set_coeff(-exp, grad)?;
    }
    Ok(out)
}

fn require_group_element(g: &Symbol) -> Result<()> {
    let ok_unit = match g.coeff(0) {
        Some(v) => v.iter().all(|x| (x - 1.0).abs() <= 1e-12),
        None => false,
    };
    let only_negative = g.exponents().all(|e| e <= 0);
    if !ok_unit || !only_negative {
        return Err(Error::Usage(
            "group element must have unit coefficient at exponent 0 and only negative-exponent corrections".into(),
        ));
    }
    Ok(())
}

/// Cotangent lift of the left group action on a dual element: α ∘ g.
pub fn lift_left_star(g: &Symbol, alpha: &Symbol, window: (i32, i32)) -> Result<Symbol> {
    require_group_element(g)?;
    compose(alpha, g, window)
}

/// Cotangent lift of the right group action: g ∘ α.
pub fn lift_right_star(g: &Symbol, alpha: &Symbol, window: (i32, i32)) -> Result<Symbol> {
    require_group_element(g)?;
    compose(g, alpha, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::smooth_field;

    fn mesh() -> Mesh {
        Mesh::unit_circle(64).unwrap()
    }

    fn field(seed: u64, mesh: Mesh) -> GridFunction {
        let mut rng = crate::rng::seeded(seed);
        GridFunction::new(mesh, smooth_field(&mut rng, mesh.n, 4, 0.0, 1.0)).unwrap()
    }

    fn single(mesh: Mesh, exp: i32, gf: &GridFunction) -> Symbol {
        Symbol::from_coeffs(mesh, DEFAULT_WINDOW, &[(exp, gf.clone())]).unwrap()
    }

    #[test]
    fn identity_composes_trivially() {
        let m = mesh();
        let a = Symbol::from_coeffs(
            m,
            DEFAULT_WINDOW,
            &[(1, field(1, m)), (-2, field(2, m))],
        )
        .unwrap();
        let id = Symbol::identity(m, DEFAULT_WINDOW);
        let left = compose(&id, &a, DEFAULT_WINDOW).unwrap();
        // Only α = 0 survives: ∂_ξ kills the constant, Dₓ of the unit vanishes.
        assert!(left.max_abs_diff(&a) <= 1e-15);
        let right = compose(&a, &id, DEFAULT_WINDOW).unwrap();
        assert!(right.max_abs_diff(&a) <= 1e-15);
    }

    #[test]
    fn xi_compose_function_shifts_and_differentiates() {
        // ξ ∘ f = f·ξ + Dₓf
        let m = mesh();
        let f = field(3, m);
        let xi = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, GridFunction::constant(m, 1.0))]).unwrap();
        let fs = single(m, 0, &f);
        let prod = compose(&xi, &fs, DEFAULT_WINDOW).unwrap();
        let df = dx(&f, 1);
        assert!(prod.coeff_grid(1).zip(&f, |a, b| a - b).max_abs() <= 1e-14);
        assert!(prod.coeff_grid(0).zip(&df, |a, b| a - b).max_abs() <= 1e-14);
        assert!(prod.coeff(2).is_none() && prod.coeff(-1).is_none());
    }

    #[test]
    fn xi_inverse_compose_function_alternates() {
        // ξ⁻¹ ∘ f = f ξ⁻¹ − Dₓf ξ⁻² + Dₓ²f ξ⁻³ − …
        let m = mesh();
        let f = field(4, m);
        let xi_inv =
            Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(-1, GridFunction::constant(m, 1.0))]).unwrap();
        let fs = single(m, 0, &f);
        let prod = compose(&xi_inv, &fs, DEFAULT_WINDOW).unwrap();
        for (order, exp) in [(0usize, -1i32), (1, -2), (2, -3), (3, -4)] {
            let expect = dx(&f, order).map(|v| if order % 2 == 0 { v } else { -v });
            let got = prod.coeff_grid(exp);
            assert!(
                got.zip(&expect, |a, b| a - b).max_abs() <= 1e-12,
                "mismatch at exponent {exp}"
            );
        }
        // The ξ⁻⁵ tail was produced and dropped — the window reports it.
        assert!(prod.clipped().any(|e| e == -5));
    }

    #[test]
    fn self_commutator_vanishes_exactly() {
        let m = mesh();
        let a = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, field(5, m)), (0, field(6, m))]).unwrap();
        let c = commutator(&a, &a, DEFAULT_WINDOW).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn commutator_of_xi_with_function_is_its_derivative() {
        let m = mesh();
        let f = field(7, m);
        let xi = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, GridFunction::constant(m, 1.0))]).unwrap();
        let fs = single(m, 0, &f);
        let c = commutator(&xi, &fs, DEFAULT_WINDOW).unwrap();
        let df = dx(&f, 1);
        assert!(c.coeff_grid(0).zip(&df, |a, b| a - b).max_abs() <= 1e-13);
        assert!(c.coeff_grid(1).max_abs() <= 1e-15);
    }

    #[test]
    fn commutator_antisymmetry() {
        let m = mesh();
        let a = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, field(8, m)), (-1, field(9, m))]).unwrap();
        let b = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(0, field(10, m)), (-2, field(11, m))]).unwrap();
        let ab = commutator(&a, &b, DEFAULT_WINDOW).unwrap();
        let ba = commutator(&b, &a, DEFAULT_WINDOW).unwrap();
        assert!(ab.add(&ba).unwrap().max_abs() <= 1e-14);
    }

    #[test]
    fn trace_reads_residue_with_measure() {
        let m = Mesh::unit_circle(8).unwrap();
        let ones = GridFunction::constant(m, 1.0);
        let a = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(-1, ones)]).unwrap();
        assert!((trace(&a) - 2.0 * std::f64::consts::PI).abs() <= 1e-14);
        let b = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(0, field(12, m))]).unwrap();
        assert_eq!(trace(&b), 0.0);
    }

    #[test]
    fn trace_of_commutator_vanishes() {
        // The discrete residue-trace property: summation by parts cancels the
        // two orderings exactly.
        for seed in 0..20 {
            let m = mesh();
            let a = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(-1, field(100 + seed, m)), (-2, field(200 + seed, m))],
            )
            .unwrap();
            let b = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(0, field(300 + seed, m)), (1, field(400 + seed, m))],
            )
            .unwrap();
            let c = commutator(&a, &b, DEFAULT_WINDOW).unwrap();
            assert!(trace(&c).abs() <= 1e-12, "seed {seed}: {}", trace(&c));
        }
    }

    #[test]
    fn pairing_of_dual_bands_is_the_field_integral() {
        // ⟨u ξ⁻¹, m⟩: only α = 0 lands on exponent −1, giving ∫ u·m.
        let m = mesh();
        let u = field(13, m);
        let w = field(14, m);
        let a = single(m, -1, &u);
        let b = single(m, 0, &w);
        let expect = crate::grid::l2_pairing(&u, &w);
        assert!((pairing(&a, &b).unwrap() - expect).abs() <= 1e-12);
        assert!((pairing(&b, &a).unwrap() - expect).abs() <= 1e-12);
    }

    #[test]
    fn pairing_with_identity_reads_residue() {
        let m = mesh();
        let id = Symbol::identity(m, DEFAULT_WINDOW);
        let no_residue = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(0, field(15, m)), (1, field(16, m))]).unwrap();
        assert_eq!(pairing(&id, &no_residue).unwrap(), 0.0);
    }

    #[test]
    fn pairing_symmetry_on_random_symbols() {
        for seed in 0..20 {
            let m = mesh();
            let a = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(-1, field(500 + seed, m)), (-2, field(600 + seed, m))],
            )
            .unwrap();
            let b = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(1, field(700 + seed, m)), (0, field(800 + seed, m))],
            )
            .unwrap();
            let fwd = pairing(&a, &b).unwrap();
            let rev = pairing(&b, &a).unwrap();
            assert!((fwd - rev).abs() <= 1e-12, "seed {seed}: {fwd} vs {rev}");
        }
    }

    #[test]
    fn compose_is_bilinear() {
        let m = mesh();
        let a = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, field(17, m))]).unwrap();
        let b = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(0, field(18, m))]).unwrap();
        let c = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(-1, field(19, m))]).unwrap();
        let (x, y) = (1.3, -0.7);
        let lhs = compose(&a.scale(x).add(&b.scale(y)).unwrap(), &c, DEFAULT_WINDOW).unwrap();
        let rhs = compose(&a, &c, DEFAULT_WINDOW)
            .unwrap()
            .scale(x)
            .add(&compose(&b, &c, DEFAULT_WINDOW).unwrap().scale(y))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) <= 1e-14);
    }

    fn constant_symbol(seed: u64, mesh: Mesh, exps: &[i32]) -> Symbol {
        let mut rng = crate::rng::seeded(seed);
        let mut s = Symbol::zero(mesh, DEFAULT_WINDOW);
        for &e in exps {
            let c: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
            s.set_coeff(e, vec![c; mesh.n]).unwrap();
        }
        s
    }

    // The centered difference is not a derivation (no exact Leibniz rule), so
    // triple-product identities hold exactly only when derivative chains never
    // land on a product of two x-dependent coefficients. Associativity is
    // exact with a constant-coefficient rightmost factor; the fully rough case
    // carries an O(Δx²) defect inherent to the discrete product rule.
    #[test]
    fn associativity_on_unclipped_exponents() {
        for seed in 0..10 {
            let m = mesh();
            let a = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, field(20 + seed, m)), (-1, field(30 + seed, m))]).unwrap();
            let b = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(0, field(40 + seed, m)), (-1, field(50 + seed, m))]).unwrap();
            let c = constant_symbol(60 + seed, m, &[1, -1]);
            let lhs = compose(&compose(&a, &b, DEFAULT_WINDOW).unwrap(), &c, DEFAULT_WINDOW).unwrap();
            let rhs = compose(&a, &compose(&b, &c, DEFAULT_WINDOW).unwrap(), DEFAULT_WINDOW).unwrap();
            // Intermediates clipped below the window can only feed exponents
            // ≤ window.0 − 1 + max exponent of the outer factor.
            let safe = DEFAULT_WINDOW.0 + 1.max(0);
            let mut worst = 0.0_f64;
            for e in safe..=DEFAULT_WINDOW.1 {
                worst = worst.max(
                    lhs.coeff_grid(e)
                        .zip(&rhs.coeff_grid(e), |x, y| x - y)
                        .max_abs(),
                );
            }
            assert!(worst <= 1e-10, "seed {seed}: associativity defect {worst}");
        }
    }

    #[test]
    fn jacobi_identity_on_unclipped_exponents() {
        // One rough symbol per trial (rotating position); see the Leibniz note
        // on the associativity test.
        for seed in 0..9 {
            let m = mesh();
            let rough = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(1, field(70 + seed, m)), (0, field(80 + seed, m))],
            )
            .unwrap();
            let c1 = constant_symbol(90 + seed, m, &[0, -1]);
            let c2 = constant_symbol(95 + seed, m, &[1, -1]);
            let (a, b, c) = match seed % 3 {
                0 => (rough, c1, c2),
                1 => (c1, rough, c2),
                _ => (c1, c2, rough),
            };
            let j1 = commutator(&a, &commutator(&b, &c, DEFAULT_WINDOW).unwrap(), DEFAULT_WINDOW).unwrap();
            let j2 = commutator(&b, &commutator(&c, &a, DEFAULT_WINDOW).unwrap(), DEFAULT_WINDOW).unwrap();
            let j3 = commutator(&c, &commutator(&a, &b, DEFAULT_WINDOW).unwrap(), DEFAULT_WINDOW).unwrap();
            let total = j1.add(&j2).unwrap().add(&j3).unwrap();
            let safe = DEFAULT_WINDOW.0 + 1;
            let mut worst = 0.0_f64;
            for e in safe..=DEFAULT_WINDOW.1 {
                worst = worst.max(total.coeff_grid(e).max_abs());
            }
            assert!(worst <= 1e-10, "seed {seed}: jacobi defect {worst}");
        }
    }

    #[test]
    fn functional_derivative_of_linear_functional_is_its_kernel() {
        // F = Tr(C ∘ M) is linear in M: the derivative is independent of the
        // base point and pairs back to F.
        let m = mesh();
        let c = single(m, -1, &field(21, m));
        let f = move |s: &Symbol| trace(&compose(&c, s, (-1, -1)).unwrap());
        let m1 = single(m, 0, &field(22, m));
        let m2 = single(m, 0, &field(23, m));
        let d1 = functional_derivative(&f, &m1, 1e-6).unwrap();
        let d2 = functional_derivative(&f, &m2, 1e-6).unwrap();
        assert!(d1.max_abs_diff(&d2) <= 1e-7, "derivative depends on base point");
        // For C = c ξ⁻¹ and M at exponent 0, F = ∫ c·m, so δF/δm = c.
        let kernel = d1.coeff_grid(0);
        assert!(kernel.zip(&field(21, m), |a, b| a - b).max_abs() <= 1e-7);
    }

    #[test]
    fn functional_derivative_of_constant_is_zero() {
        let m = mesh();
        let f = |_: &Symbol| 4.2;
        let base = single(m, 0, &field(24, m));
        let d = functional_derivative(&f, &base, 1e-6).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn functional_derivative_duality_check() {
        // pairing(δF/δM placed at ξ⁻¹, direction at ξ⁰) matches the
        // directional derivative of F.
        let m = mesh();
        let c = single(m, -1, &field(25, m));
        let k = single(m, 0, &field(26, m));
        // Mildly nonlinear functional of the exponent-0 coefficient.
        let f = move |s: &Symbol| {
            let lin = trace(&compose(&c, s, (-1, -1)).unwrap());
            let quad = crate::grid::l2_pairing(&s.coeff_grid(0), &s.coeff_grid(0));
            lin + 0.5 * quad * quad
        };
        let base = single(m, 0, &field(27, m));
        let delta = field(28, m);
        let deriv = functional_derivative(&f, &base, 1e-6).unwrap();
        let lhs = crate::grid::l2_pairing(&deriv.coeff_grid(0), &delta);
        let eps = 1e-6;
        let mut plus = base.clone();
        let mut minus = base.clone();
        let pv: Vec<f64> = base.coeff(0).unwrap().iter().zip(delta.values()).map(|(a, b)| a + eps * b).collect();
        let mv: Vec<f64> = base.coeff(0).unwrap().iter().zip(delta.values()).map(|(a, b)| a - eps * b).collect();
        plus.set_coeff(0, pv).unwrap();
        minus.set_coeff(0, mv).unwrap();
        let rhs = (f(&plus) - f(&minus)) / (2.0 * eps);
        assert!((lhs - rhs).abs() <= 1e-6, "{lhs} vs {rhs}");
        let _ = k;
    }

    #[test]
    fn lift_requires_group_element() {
        let m = mesh();
        let alpha = single(m, 1, &field(29, m));
        let not_group = single(m, -1, &field(30, m)); // no unit at exponent 0
        assert!(lift_left_star(&not_group, &alpha, DEFAULT_WINDOW).is_err());
        let bad_unit = Symbol::from_coeffs(
            m,
            DEFAULT_WINDOW,
            &[(0, GridFunction::constant(m, 2.0))],
        )
        .unwrap();
        assert!(lift_right_star(&bad_unit, &alpha, DEFAULT_WINDOW).is_err());
    }

    #[test]
    fn lift_by_identity_is_identity() {
        let m = mesh();
        let alpha = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, field(31, m)), (2, field(32, m))]).unwrap();
        let id = Symbol::identity(m, DEFAULT_WINDOW);
        assert!(lift_left_star(&id, &alpha, DEFAULT_WINDOW).unwrap().max_abs_diff(&alpha) <= 1e-15);
        assert!(lift_right_star(&id, &alpha, DEFAULT_WINDOW).unwrap().max_abs_diff(&alpha) <= 1e-15);
    }

    #[test]
    fn lift_adjointness_against_compose() {
        // ⟨TL*_g α, X⟩ = ⟨α, g ∘ X⟩ and ⟨TR*_g α, X⟩ = ⟨α, X ∘ g⟩.
        // Trace-level regrouping is again exact only up to the Leibniz defect,
        // so each trial keeps one operand's coefficients constant: rough α and
        // X with a constant-coefficient group element, then rough g and α
        // against a constant-coefficient X.
        for seed in 0..10 {
            let m = mesh();
            let mut g_const = Symbol::identity(m, DEFAULT_WINDOW);
            {
                let mut rng = crate::rng::seeded(2000 + seed);
                let c1: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
                let c2: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
                g_const.set_coeff(-1, vec![c1; m.n]).unwrap();
                g_const.set_coeff(-2, vec![c2; m.n]).unwrap();
            }
            let alpha = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(1, field(1200 + seed, m)), (2, field(1300 + seed, m))],
            )
            .unwrap();
            let x_rough = Symbol::from_coeffs(
                m,
                DEFAULT_WINDOW,
                &[(-1, field(1400 + seed, m)), (-2, field(1500 + seed, m))],
            )
            .unwrap();

            let check = |g: &Symbol, x: &Symbol, label: &str| {
                let left = lift_left_star(g, &alpha, DEFAULT_WINDOW).unwrap();
                let lhs = pairing(&left, x).unwrap();
                let gx = compose(g, x, (-6, 2)).unwrap();
                let rhs = pairing(&alpha, &gx).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12,
                    "left adjointness {label} seed {seed}: {lhs} vs {rhs}"
                );

                let right = lift_right_star(g, &alpha, DEFAULT_WINDOW).unwrap();
                let lhs = pairing(&right, x).unwrap();
                let xg = compose(x, g, (-6, 2)).unwrap();
                let rhs = pairing(&alpha, &xg).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12,
                    "right adjointness {label} seed {seed}: {lhs} vs {rhs}"
                );
            };

            check(&g_const, &x_rough, "constant g");

            let mut g_rough = Symbol::identity(m, DEFAULT_WINDOW);
            g_rough.set_coeff(-1, field(1000 + seed, m).values().to_vec()).unwrap();
            g_rough.set_coeff(-2, field(1100 + seed, m).values().to_vec()).unwrap();
            let x_const = constant_symbol(2100 + seed, m, &[-1, -2]);
            check(&g_rough, &x_const, "constant X");
        }
    }

    #[test]
    fn displayed_expansion_coefficients() {
        // g = 1 + u₁ξ⁻¹ + u₂ξ⁻², α = α₁ξ + α₂ξ²: check the expansions
        // against the product rule, coefficient by coefficient.
        let m = mesh();
        let u1 = field(33, m);
        let u2 = field(34, m);
        let a1 = field(35, m);
        let a2 = field(36, m);
        let mut g = Symbol::identity(m, DEFAULT_WINDOW);
        g.set_coeff(-1, u1.values().to_vec()).unwrap();
        g.set_coeff(-2, u2.values().to_vec()).unwrap();
        let alpha = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(1, a1.clone()), (2, a2.clone())]).unwrap();

        let left = lift_left_star(&g, &alpha, DEFAULT_WINDOW).unwrap();
        let check = |got: GridFunction, want: Vec<f64>, label: &str| {
            let want = GridFunction::new(m, want).unwrap();
            let diff = got.zip(&want, |x, y| x - y).max_abs();
            assert!(diff <= 1e-12, "{label}: defect {diff}");
        };
        let n = m.n;
        let du1 = dx(&u1, 1);
        let du2 = dx(&u2, 1);
        let d2u1 = dx(&u1, 2);
        let d2u2 = dx(&u2, 2);

        check(left.coeff_grid(2), a2.values().to_vec(), "left ξ²");
        check(
            left.coeff_grid(1),
            (0..n).map(|j| u1.values()[j] * a2.values()[j] + a1.values()[j]).collect(),
            "left ξ",
        );
        check(
            left.coeff_grid(0),
            (0..n)
                .map(|j| {
                    u1.values()[j] * a1.values()[j]
                        + u2.values()[j] * a2.values()[j]
                        + 2.0 * a2.values()[j] * du1.values()[j]
                })
                .collect(),
            "left ξ⁰",
        );
        check(
            left.coeff_grid(-1),
            (0..n)
                .map(|j| {
                    u2.values()[j] * a1.values()[j]
                        + a1.values()[j] * du1.values()[j]
                        + a2.values()[j] * d2u1.values()[j]
                        + 2.0 * a2.values()[j] * du2.values()[j]
                })
                .collect(),
            "left ξ⁻¹",
        );
        check(
            left.coeff_grid(-2),
            (0..n)
                .map(|j| a1.values()[j] * du2.values()[j] + a2.values()[j] * d2u2.values()[j])
                .collect(),
            "left ξ⁻²",
        );

        let right = lift_right_star(&g, &alpha, DEFAULT_WINDOW).unwrap();
        let da1 = dx(&a1, 1);
        let da2 = dx(&a2, 1);
        let d2a1 = dx(&a1, 2);
        let d2a2 = dx(&a2, 2);
        let d3a2 = dx(&a2, 3);
        check(right.coeff_grid(2), a2.values().to_vec(), "right ξ²");
        check(
            right.coeff_grid(1),
            (0..n).map(|j| u1.values()[j] * a2.values()[j] + a1.values()[j]).collect(),
            "right ξ",
        );
        check(
            right.coeff_grid(0),
            (0..n)
                .map(|j| {
                    u1.values()[j] * a1.values()[j] - u1.values()[j] * da2.values()[j]
                        + u2.values()[j] * a2.values()[j]
                })
                .collect(),
            "right ξ⁰",
        );
        check(
            right.coeff_grid(-1),
            (0..n)
                .map(|j| {
                    -u1.values()[j] * da1.values()[j]
                        + u1.values()[j] * d2a2.values()[j]
                        + u2.values()[j] * a1.values()[j]
                        - 2.0 * u2.values()[j] * da2.values()[j]
                })
                .collect(),
            "right ξ⁻¹",
        );
        // The full product rule carries one extra third-difference term at
        // ξ⁻² beyond the second-order expansion.
        check(
            right.coeff_grid(-2),
            (0..n)
                .map(|j| {
                    u1.values()[j] * d2a1.values()[j] - 2.0 * u2.values()[j] * da1.values()[j]
                        + 3.0 * u2.values()[j] * d2a2.values()[j]
                        - u1.values()[j] * d3a2.values()[j]
                })
                .collect(),
            "right ξ⁻²",
        );
    }

    #[test]
    fn json_round_trip() {
        let m = mesh();
        let a = Symbol::from_coeffs(m, DEFAULT_WINDOW, &[(-1, field(37, m)), (2, field(38, m))]).unwrap();
        let json = a.to_json();
        let back = Symbol::from_json(&json, DEFAULT_WINDOW).unwrap();
        assert!(a.max_abs_diff(&back) == 0.0);
        assert_eq!(back.mesh(), m);
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let m1 = Mesh::unit_circle(64).unwrap();
        let m2 = Mesh::unit_circle(32).unwrap();
        let a = Symbol::identity(m1, DEFAULT_WINDOW);
        let b = Symbol::identity(m2, DEFAULT_WINDOW);
        assert!(matches!(
            compose(&a, &b, DEFAULT_WINDOW),
            Err(Error::MeshMismatch(_))
        ));
    }
}
