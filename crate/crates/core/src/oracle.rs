//! Reference routes kept independent of the series code: a Padé-based
//! matrix exponential, the augmented-matrix ZOH discretization, a
//! Gauss–Legendre integral of `e^{Mτ}`, and a fixed-step RK4 integrator.
//! Used by the `validate` command and by tests.

use nalgebra::{DMatrix, Matrix3, Vector3};

/// Diagonal Padé (6,6) approximant with scaling and squaring.
pub fn expm_pade(m: &DMatrix<f64>) -> DMatrix<f64> {
    const C: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let n = m.nrows();
    let norm = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0i32;
    if norm > 0.25 {
        s = (norm / 0.25).log2().ceil() as i32;
    }
    let x = m / 2f64.powi(s);
    let identity = DMatrix::<f64>::identity(n, n);
    let mut power = identity.clone();
    let mut even = identity.clone() * C[0];
    let mut odd = DMatrix::<f64>::zeros(n, n);
    for (k, c) in C.iter().enumerate().skip(1) {
        power = &power * &x;
        if k % 2 == 0 {
            even += &power * *c;
        } else {
            odd += &power * *c;
        }
    }
    let numer = &even + &odd;
    let denom = &even - &odd;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Exact ZOH pair from the exponential of `[[A h, B h], [0, 0]]`.
pub fn zoh_augmented(a: &Matrix3<f64>, b: &Vector3<f64>, h: f64) -> (Matrix3<f64>, Vector3<f64>) {
    let mut aug = DMatrix::<f64>::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            aug[(i, j)] = a[(i, j)] * h;
        }
        aug[(i, 3)] = b[i] * h;
    }
    let e = expm_pade(&aug);
    let f = Matrix3::from_fn(|i, j| e[(i, j)]);
    let g = Vector3::from_fn(|i, _| e[(i, 3)]);
    (f, g)
}

/// `∫₀^h e^{Mτ} dτ` by composite 5-point Gauss–Legendre on `panels` pieces.
pub fn integral_of_exp(m: &DMatrix<f64>, h: f64, panels: usize) -> DMatrix<f64> {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let n = m.nrows();
    let width = h / panels as f64;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (node, w) in NODES.iter().zip(WEIGHTS.iter()) {
            let tau = mid + 0.5 * width * node;
            acc += expm_pade(&(m * tau)) * (0.5 * width * w);
        }
    }
    acc
}

/// Classical RK4 on `ẋ = A x + B u` with `u` held, landing exactly on `h`.
pub fn rk4_hold(
    a: &Matrix3<f64>,
    b: &Vector3<f64>,
    x0: Vector3<f64>,
    u: f64,
    h: f64,
    max_step: f64,
) -> Vector3<f64> {
    let steps = (h / max_step).ceil().max(1.0) as usize;
    let dt = h / steps as f64;
    let bu = b * u;
    let f = |x: &Vector3<f64>| a * x + bu;
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(x + k1 * (dt / 2.0)));
        let k3 = f(&(x + k2 * (dt / 2.0)));
        let k4 = f(&(x + k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}
