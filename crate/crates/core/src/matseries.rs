//! Maclaurin-series matrix function `Φ(M) = Σ_{i≥0} M^i / (i+1)!` and the
//! exponential built from it, `e^M = I + M·Φ(M)`.
//!
//! The series is only summed on a scaled argument `X = M / 2^s` with
//! `‖X‖_max ≤ 0.5`. The result is brought back to `M` with the doubling pair
//!
//! ```text
//! Φ(2X) = ½ Φ(X) (e^X + I)
//! e^{2X} = (e^X)²
//! ```
//!
//! which needs no inverse of `M`, so singular and stiff arguments take the
//! same path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major dense square matrix used throughout the series code.
pub type SquareMatrix = DMatrix<f64>;

/// Truncation control for the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Summation stops once the max-norm of the next term drops below this.
    pub tol: f64,
    /// Hard cap on the number of summed terms.
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: 60,
        }
    }
}

impl SeriesOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "series tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_terms < 2 {
            return Err(Error::InvalidConfig(format!(
                "series max_terms must be at least 2, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }
}

/// Largest absolute entry.
pub fn max_norm(m: &SquareMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check_square_finite(m: &SquareMatrix) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix argument"));
    }
    Ok(())
}

/// Both `Φ(M)` and `e^M`, sharing the scaling and squaring work.
#[derive(Debug, Clone)]
pub struct PhiExp {
    pub phi: SquareMatrix,
    pub exp: SquareMatrix,
}

/// Sums the plain series for `Φ(X)` and returns it with `e^X = I + XΦ(X)`.
fn series(x: &SquareMatrix, opts: &SeriesOptions) -> Result<PhiExp> {
    let n = x.nrows();
    let identity = SquareMatrix::identity(n, n);
    let mut sum = identity.clone();
    let mut term = identity.clone();
    let mut terms = 1;
    loop {
        // term_i = X^i / (i+1)!
        let next = &term * x / (terms as f64 + 1.0);
        let norm = max_norm(&next);
        if norm < opts.tol {
            break;
        }
        if terms >= opts.max_terms {
            return Err(Error::NonConvergence {
                terms,
                residual: norm,
            });
        }
        sum += &next;
        term = next;
        terms += 1;
    }
    let exp = &identity + x * &sum;
    Ok(PhiExp { phi: sum, exp })
}

/// Number of halvings needed to bring `‖M‖_max` to at most 0.5.
fn scaling_exponent(norm: f64) -> u32 {
    let mut s = 0;
    let mut scaled = norm;
    while scaled > 0.5 {
        scaled *= 0.5;
        s += 1;
    }
    s
}

/// `Φ(M)` and `e^M` together.
pub fn phi_exp_with(m: &SquareMatrix, opts: &SeriesOptions) -> Result<PhiExp> {
    check_square_finite(m)?;
    opts.validate()?;
    let s = scaling_exponent(max_norm(m));
    let x = m / 2f64.powi(s as i32);
    let PhiExp { mut phi, mut exp } = series(&x, opts)?;
    let n = m.nrows();
    let identity = SquareMatrix::identity(n, n);
    for _ in 0..s {
        phi = (&phi * (&exp + &identity)) * 0.5;
        exp = &exp * &exp;
    }
    if phi.iter().chain(exp.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series result"));
    }
    Ok(PhiExp { phi, exp })
}

/// `Φ(M)` with explicit truncation options.
pub fn phi_with(m: &SquareMatrix, opts: &SeriesOptions) -> Result<SquareMatrix> {
    phi_exp_with(m, opts).map(|r| r.phi)
}

/// `Φ(M)` with default truncation.
pub fn phi(m: &SquareMatrix) -> Result<SquareMatrix> {
    phi_with(m, &SeriesOptions::default())
}

/// `I + M·Φ(M)` with explicit truncation options.
pub fn expm_via_phi_with(m: &SquareMatrix, opts: &SeriesOptions) -> Result<SquareMatrix> {
    let p = phi_with(m, opts)?;
    let n = m.nrows();
    Ok(SquareMatrix::identity(n, n) + m * p)
}

/// `e^M` computed as `I + M·Φ(M)`.
pub fn expm_via_phi(m: &SquareMatrix) -> Result<SquareMatrix> {
    expm_via_phi_with(m, &SeriesOptions::default())
}
