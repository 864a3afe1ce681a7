//! Support code for the numerical validation suites: a pass/fail check
//! harness, log-log slope fits for order studies, and smooth random fields.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Collects named checks and prints one pass/fail line per check.
pub struct ValidationHarness {
    name: String,
    failures: Vec<String>,
    checks: usize,
}

impl ValidationHarness {
    pub fn new(name: &str) -> Self {
        ValidationHarness {
            name: name.to_string(),
            failures: Vec::new(),
            checks: 0,
        }
    }

    fn record(&mut self, label: &str, ok: bool, detail: String) {
        self.checks += 1;
        let status = if ok { "PASS" } else { "FAIL" };
        println!("[{status}] {label}: {detail}");
        if !ok {
            self.failures.push(format!("{label}: {detail}"));
        }
    }

    pub fn check_bool(&mut self, label: &str, ok: bool) {
        self.record(label, ok, format!("{ok}"));
    }

    /// |value| ≤ bound.
    pub fn check_upper(&mut self, label: &str, value: f64, bound: f64) {
        self.record(
            label,
            value.abs() <= bound,
            format!("|{value:.6e}| ≤ {bound:.1e}"),
        );
    }

    /// value ≥ bound.
    pub fn check_lower(&mut self, label: &str, value: f64, bound: f64) {
        self.record(label, value >= bound, format!("{value:.6e} ≥ {bound:.1e}"));
    }

    /// |value − target| ≤ tol.
    pub fn check_near(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        self.record(
            label,
            (value - target).abs() <= tol,
            format!("{value:.6e} vs {target:.6e} ± {tol:.1e}"),
        );
    }

    /// Panics (failing the test) if any check failed; prints a summary first.
    pub fn finish(self) {
        println!(
            "{}: {}/{} checks passed",
            self.name,
            self.checks - self.failures.len(),
            self.checks
        );
        assert!(
            self.failures.is_empty(),
            "{} failing checks in {}:\n{}",
            self.failures.len(),
            self.name,
            self.failures.join("\n")
        );
    }
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Periodic band-limited random field on `n` points over [0, 2π):
/// a mean plus `k_max` Fourier modes with coefficients of size ~`amplitude`.
pub fn smooth_field(rng: &mut ChaCha8Rng, n: usize, k_max: usize, mean: f64, amplitude: f64) -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        coeffs.push((a, b));
    }
    (0..n)
        .map(|j| {
            let x = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let mut v = mean;
            for (k, (a, b)) in coeffs.iter().enumerate() {
                let kk = (k + 1) as f64;
                // Higher modes damped so the field stays smooth.
                let damp = amplitude / kk;
                v += damp * (a * (kk * x).cos() + b * (kk * x).sin());
            }
            v
        })
        .collect()
}

/// Strictly positive band-limited field: mean 1 with bounded relative ripple.
pub fn positive_field(rng: &mut ChaCha8Rng, n: usize, k_max: usize, ripple: f64) -> Vec<f64> {
    assert!(ripple < 1.0);
    smooth_field(rng, n, k_max, 1.0, ripple / 2.0)
}
