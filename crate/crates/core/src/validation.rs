//! Identity checks for the series code and the discretizer against the
//! reference routes in [`crate::oracle`].

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::discretizer;
use crate::error::Result;
use crate::matseries::{self, max_norm, SeriesOptions};
use crate::oracle;
use crate::plant::MotorParams;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Periods at which the reference motor matrix joins the random set.
pub const TABLE_ONE_PERIODS: [f64; 3] = [0.05, 0.11, 0.2];

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// 3×3 matrix with entries uniform in `[-bound, bound]`.
pub fn random_matrix(rng: &mut ChaCha8Rng, bound: f64) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |_, _| uniform(rng, -bound, bound))
}

/// `I + 0.3 R` resampled until its 2-norm condition number is below 100.
pub fn random_well_conditioned(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let t = DMatrix::identity(3, 3) + random_matrix(rng, 1.0) * 0.3;
        let sv = t.singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() < 100.0 {
            return t;
        }
    }
}

/// Random matrices followed by `A h` for the reference motor.
pub fn test_matrices(count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<DMatrix<f64>> = (0..count).map(|_| random_matrix(&mut rng, 5.0)).collect();
    let (a, _) = MotorParams::table_one().continuous_matrices();
    for h in TABLE_ONE_PERIODS {
        out.push(DMatrix::from_fn(3, 3, |i, j| a[(i, j)] * h));
    }
    out
}

struct Acc {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    max_error: f64,
    passed: bool,
}

impl Acc {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            cases: 0,
            max_error: 0.0,
            passed: true,
        }
    }

    /// Records an error already normalized so that `≤ tolerance` passes.
    fn push(&mut self, err: f64) {
        self.cases += 1;
        self.max_error = self.max_error.max(err);
        self.passed &= err <= self.tolerance;
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            cases: self.cases,
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed: self.passed,
        }
    }
}

fn rel(diff: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    max_norm(diff) / max_norm(reference).max(1.0)
}

/// Runs every identity check with the given truncation options.
pub fn run_identity_suite(opts: &SeriesOptions, count: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let matrices = test_matrices(count, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut commute = Acc::new("commutation M·Φ(M) = Φ(M)·M", 1e-10);
    let mut exp = Acc::new("exponential e^M = I + M·Φ(M)", 1e-8);
    let mut integral = Acc::new("integral ∫e^{Mτ}dτ = hΦ(Mh)", 1e-7);
    let mut similar = Acc::new("similarity Φ(T⁻¹MT) = T⁻¹Φ(M)T", 1e-8);

    for m in &matrices {
        let n = max_norm(m);
        let p = matseries::phi_with(m, opts)?;
        // ‖MΦ − ΦM‖ ≤ 1e-10 (1 + ‖M‖²), reported normalized
        commute.push(max_norm(&(m * &p - &p * m)) / (1.0 + n * n));

        let reference = oracle::expm_pade(m);
        exp.push(rel(&(matseries::expm_via_phi_with(m, opts)? - &reference), &reference));

        let t = random_well_conditioned(&mut rng);
        let t_inv = t.clone().try_inverse().expect("well-conditioned");
        let lhs = matseries::phi_with(&(&t_inv * m * &t), opts)?;
        let rhs = &t_inv * &p * &t;
        similar.push(rel(&(lhs - &rhs), &rhs));
    }

    let (a3, _) = MotorParams::table_one().continuous_matrices();
    let a_ref = DMatrix::from_fn(3, 3, |i, j| a3[(i, j)]);
    let mut integral_cases: Vec<(DMatrix<f64>, f64)> = matrices[..count]
        .iter()
        .map(|m| (m.clone(), uniform(&mut rng, 0.01, 0.5)))
        .collect();
    integral_cases.extend(TABLE_ONE_PERIODS.iter().map(|&h| (a_ref.clone(), h)));
    for (m, h) in &integral_cases {
        let mh = m * *h;
        let panels = ((max_norm(&mh) * 2.0).ceil() as usize).max(40);
        let quad = oracle::integral_of_exp(m, *h, panels);
        let series = matseries::phi_with(&mh, opts)? * *h;
        integral.push(rel(&(series - &quad), &quad));
    }

    let mut disc = Acc::new("discretization vs augmented exponential", 1e-8);
    let p = MotorParams::table_one();
    let (a, b) = p.continuous_matrices();
    for i in 0..50 {
        let h = 0.01 + (0.3 - 0.01) * i as f64 / 49.0;
        let m = discretizer::discretize_with(&p, h, 1e-4, opts)?;
        let (f, g) = oracle::zoh_augmented(&a, &b, h);
        let ef = (m.f - f).amax() / f.amax();
        let eg = (m.g - g).amax() / g.amax();
        disc.push(ef.max(eg));
    }

    Ok(vec![
        commute.finish(),
        exp.finish(),
        integral.finish(),
        similar.finish(),
        disc.finish(),
    ])
}
