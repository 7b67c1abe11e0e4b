//! Complex-valued loss functions.
//!
//! A loss `ρ: ℂ → ℝ₀⁺` here is circularly symmetric (`ρ(e^{iθ}x) = ρ(x)`),
//! vanishes at zero, increases in `|x|` and is convex. The score function `ψ`
//! is the Wirtinger derivative `∂ρ/∂x*`, so for least squares `ψ(x) = x`.
//!
//! Huber's loss with threshold `c` is quadratic up to `|e| = c` and linear
//! beyond it; its score clips residuals to modulus `c` while keeping the phase.
//! Least squares is the `c → ∞` member of the same family.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Complex signum `e/|e|`, with `sign(0) = 0`.
#[inline]
pub fn csign(e: Complex64) -> Complex64 {
    let r = e.norm();
    if r == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        e / r
    }
}

/// CDF of the chi-squared distribution with 2 degrees of freedom.
#[inline]
pub fn chi2_2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-0.5 * x).exp_m1()
    }
}

/// CDF of the chi-squared distribution with 4 degrees of freedom.
#[inline]
pub fn chi2_4_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-0.5 * x).exp() * (1.0 + 0.5 * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFamily {
    /// Huber's loss with threshold `c` applied to scale-normalized residuals.
    Huber {
        c: f64,
    },
    LeastSquares,
}

impl LossFamily {
    pub fn huber(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("Huber threshold must be finite and positive, got {c}")));
        }
        Ok(Self::Huber { c })
    }

    /// Huber loss whose threshold puts `2c²` at the `q`-quantile of χ²₂.
    pub fn huber_from_quantile(q: f64) -> Result<Self> {
        Self::huber(threshold_from_quantile(q)?)
    }

    /// Clipping threshold; infinite for least squares.
    #[inline]
    pub fn threshold(&self) -> f64 {
        match *self {
            Self::Huber { c } => c,
            Self::LeastSquares => f64::INFINITY,
        }
    }

    #[inline]
    pub fn rho(&self, e: Complex64) -> f64 {
        let r = e.norm();
        match *self {
            Self::Huber { c } if r > c => 2.0 * c * r - c * c,
            _ => e.norm_sqr(),
        }
    }

    #[inline]
    pub fn psi(&self, e: Complex64) -> Complex64 {
        match *self {
            Self::Huber { c } if e.norm() > c => csign(e) * c,
            _ => e,
        }
    }

    /// `χ(|e|) = ρ₀'(|e|)|e| − ρ₀(|e|)`; equals `|ψ(e)|²` for this family.
    #[inline]
    pub fn chi(&self, e: Complex64) -> f64 {
        match *self {
            Self::Huber { c } if e.norm() > c => c * c,
            _ => e.norm_sqr(),
        }
    }

    /// `ψ(e)/e`, defined as 1 at the origin.
    #[inline]
    pub fn weight(&self, e: Complex64) -> f64 {
        match *self {
            Self::Huber { c } => {
                let r = e.norm();
                if r > c {
                    c / r
                } else {
                    1.0
                }
            }
            Self::LeastSquares => 1.0,
        }
    }

    /// Fisher-consistency factors for the scale estimate under CN(0, 1) errors.
    pub fn consistency(&self) -> ConsistencyFactors {
        consistency_factor(self.threshold())
    }
}

/// Threshold `c` with `2c²` equal to the `q`-quantile of χ²₂, i.e. `√(−ln(1−q))`.
pub fn threshold_from_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid(format!("quantile must lie in (0, 1), got {q}")));
    }
    Ok((-(-q).ln_1p()).sqrt())
}

/// Scaling constants of the joint signal/scale criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyFactors {
    pub c: f64,
    /// `E[χ(e)]` for `e ~ CN(0, 1)`.
    pub beta: f64,
    /// Scale penalty weight; equal to `beta`.
    pub alpha: f64,
}

/// `β(c) = c²(1 − F_{χ²₂}(2c²)) + F_{χ²₄}(2c²)`. An infinite `c` gives the
/// least-squares limit `β = 1`.
pub fn consistency_factor(c: f64) -> ConsistencyFactors {
    let beta = if c.is_infinite() {
        1.0
    } else {
        let x = 2.0 * c * c;
        c * c * (1.0 - chi2_2_cdf(x)) + chi2_4_cdf(x)
    };
    ConsistencyFactors { c, beta, alpha: beta }
}
