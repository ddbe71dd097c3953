use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Convex link `Ψ` of the generalized linear loss `Ψ(⟨x, β⟩) − y⟨x, β⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum LinkFunction {
    /// `Ψ(t) = ln(1 + eᵗ)`, 1-Lipschitz and 1/4-smooth.
    #[default]
    CanonicalLogistic,
    /// `Ψ(t) = ln(2 cosh t)`, 1-Lipschitz and 1-smooth. With `y ∈ {−1, +1}`
    /// the loss becomes `ln(1 + e^{−2yt})`.
    SymmetricLogistic,
}

impl LinkFunction {
    /// Lipschitz constant `L` of `Ψ`.
    pub fn lipschitz(self) -> f64 {
        1.0
    }

    /// Smoothness constant `ℓ` of `Ψ`.
    pub fn smoothness(self) -> f64 {
        match self {
            LinkFunction::CanonicalLogistic => 0.25,
            LinkFunction::SymmetricLogistic => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::CanonicalLogistic => "canonical-logistic",
            LinkFunction::SymmetricLogistic => "symmetric-logistic",
        }
    }

    /// `Ψ(t)` without the domain check; callers guarantee `t` is finite.
    #[inline]
    pub(crate) fn value(self, t: f64) -> f64 {
        match self {
            LinkFunction::CanonicalLogistic => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            LinkFunction::SymmetricLogistic => {
                let a = t.abs();
                a + (-2.0 * a).exp().ln_1p()
            }
        }
    }

    /// `Ψ′(t)` without the domain check.
    #[inline]
    pub(crate) fn derivative(self, t: f64) -> f64 {
        match self {
            LinkFunction::CanonicalLogistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            LinkFunction::SymmetricLogistic => t.tanh(),
        }
    }

    pub fn psi(self, t: f64) -> Result<f64> {
        check_finite(t)?;
        Ok(self.value(t))
    }

    pub fn psi_prime(self, t: f64) -> Result<f64> {
        check_finite(t)?;
        Ok(self.derivative(t))
    }
}

fn check_finite(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("link argument must be finite, got {t}")))
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "canonical-logistic" | "canonical" | "logistic" => Ok(LinkFunction::CanonicalLogistic),
            "symmetric-logistic" | "symmetric" => Ok(LinkFunction::SymmetricLogistic),
            other => Err(Error::Config(format!("unknown link function `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_at_zero() {
        let link = LinkFunction::CanonicalLogistic;
        assert!((link.psi(0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((link.psi_prime(0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn canonical_asymptote() {
        let link = LinkFunction::CanonicalLogistic;
        let v = link.psi(1000.0).unwrap();
        assert!(((v - 1000.0) / 1000.0).abs() < 1e-12);
        assert!((link.psi_prime(1000.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(link.psi(-1000.0).unwrap() >= 0.0);
        assert_eq!(link.psi_prime(-1e8).unwrap(), 0.0);
        assert!(link.psi(1e8).unwrap().is_finite());
    }

    #[test]
    fn symmetric_at_zero() {
        let link = LinkFunction::SymmetricLogistic;
        assert!((link.psi(0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(link.psi_prime(0.0).unwrap(), 0.0);
        assert!((link.psi(-1e8).unwrap() - 1e8).abs() < 1e-6);
    }

    #[test]
    fn symmetric_matches_margin_loss() {
        let link = LinkFunction::SymmetricLogistic;
        for &t in &[-3.0, -0.4, 0.0, 0.7, 5.0] {
            for &y in &[-1.0, 1.0] {
                let lhs = link.psi(t).unwrap() - y * t;
                let rhs = (-2.0 * y * t).exp().ln_1p();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let link = LinkFunction::CanonicalLogistic;
        assert!(matches!(link.psi(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(link.psi_prime(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for link in [LinkFunction::CanonicalLogistic, LinkFunction::SymmetricLogistic] {
            for &t in &[-5.0, -1.0, 0.3, 2.0, 8.0] {
                let h = 1e-6;
                let fd = (link.value(t + h) - link.value(t - h)) / (2.0 * h);
                assert!((fd - link.derivative(t)).abs() < 1e-8, "{link} at {t}");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "canonical-logistic".parse::<LinkFunction>().unwrap(),
            LinkFunction::CanonicalLogistic
        );
        assert_eq!(
            "symmetric-logistic".parse::<LinkFunction>().unwrap(),
            LinkFunction::SymmetricLogistic
        );
        assert!("probit".parse::<LinkFunction>().is_err());
    }
}
