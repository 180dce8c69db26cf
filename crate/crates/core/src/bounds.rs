//! Closed-form stability quantities for iterative retraining with
//! correction: the amplification `rho(lambda)`, the per-generation
//! contraction factor, the admissibility condition, the statistical error
//! floor `tau_n(delta)` and the resulting distance bound after `t`
//! generations.
//!
//! `None` marks the region where the theory gives no guarantee
//! (`alpha - lambda (alpha + eps L) <= 0`); it is a value, not an error.

use crate::correction::Gamma;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    /// Strong concavity of the expected log-likelihood at the optimum.
    pub alpha: f64,
    /// Lipschitz constant of the log-likelihood Hessian in `x`.
    pub lipschitz: f64,
    /// Wasserstein-2 distance between the data and the best model.
    pub epsilon: f64,
    pub eps_opt: f64,
    pub a: f64,
    pub b: f64,
}

impl StabilityConstants {
    pub fn new(
        alpha: f64,
        lipschitz: f64,
        epsilon: f64,
        eps_opt: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        let c = Self {
            alpha,
            lipschitz,
            epsilon,
            eps_opt,
            a,
            b,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha,
            self.lipschitz,
            self.epsilon,
            self.eps_opt,
            self.a,
            self.b,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("constants", "must be finite"));
        }
        if self.alpha <= 0.0 || self.b <= 0.0 {
            return Err(CoreError::invalid(
                "constants",
                "alpha and b must be positive",
            ));
        }
        if self.lipschitz < 0.0 || self.epsilon < 0.0 || self.eps_opt < 0.0 || self.a < 0.0 {
            return Err(CoreError::invalid(
                "constants",
                "L, epsilon, eps_opt and a must be nonnegative",
            ));
        }
        Ok(())
    }

    fn slope(&self) -> f64 {
        self.alpha + self.epsilon * self.lipschitz
    }
}

/// `lambda (alpha + eps L) / (alpha - lambda (alpha + eps L))`.
pub fn rho(lambda: f64, c: &StabilityConstants) -> Option<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return None;
    }
    let num = lambda * c.slope();
    let den = c.alpha - num;
    (den > 0.0).then(|| num / den)
}

/// `rho(lambda) / (1 + gamma)`; zero at infinite strength.
pub fn contraction_factor(lambda: f64, gamma: Gamma, c: &StabilityConstants) -> Option<f64> {
    let r = rho(lambda, c)?;
    Some(match gamma {
        Gamma::Finite(g) => r / (1.0 + g),
        Gamma::Infinite => 0.0,
    })
}

/// Largest admissible `lambda` is strictly below this value:
/// `alpha / (alpha + eps L) * (1 + gamma) / (2 + gamma)`.
pub fn admissible_threshold(gamma: Gamma, c: &StabilityConstants) -> f64 {
    let ratio = match gamma {
        Gamma::Finite(g) => (1.0 + g) / (2.0 + g),
        Gamma::Infinite => 1.0,
    };
    ratio * c.alpha / c.slope()
}

/// `lambda (1 + eps L / alpha) < (1 + gamma) / (2 + gamma)`.
pub fn admissible(lambda: f64, gamma: Gamma, c: &StabilityConstants) -> bool {
    let ratio = match gamma {
        Gamma::Finite(g) => (1.0 + g) / (2.0 + g),
        Gamma::Infinite => 1.0,
    };
    lambda >= 0.0 && lambda * (1.0 + c.epsilon * c.lipschitz / c.alpha) < ratio
}

/// `eps_opt + a / sqrt(n) * sqrt(log(b / delta))`.
pub fn tau_n(delta: f64, n: usize, c: &StabilityConstants) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CoreError::InvalidDelta(delta));
    }
    if n == 0 {
        return Err(CoreError::invalid("n", "must be positive"));
    }
    let arg = c.b / delta;
    if arg <= 1.0 {
        return Err(CoreError::NonPositiveLogArgument(arg));
    }
    Ok(c.eps_opt + c.a / (n as f64).sqrt() * arg.ln().sqrt())
}

/// `tau * sum_{i=0}^{t} kappa^i + kappa^t * theta0_dist`, with the
/// geometric sum in closed form.
pub fn stability_bound(tau: f64, kappa: f64, t: usize, theta0_dist: f64) -> f64 {
    let t_exp = t as i32;
    let sum = if kappa == 1.0 {
        (t + 1) as f64
    } else {
        (1.0 - kappa.powi(t_exp + 1)) / (1.0 - kappa)
    };
    tau * sum + kappa.powi(t_exp) * theta0_dist
}

/// Distance bound after `t >= 1` generations, using `tau_n(delta / t)`.
#[allow(clippy::too_many_arguments)]
pub fn bound_trajectory(
    t: usize,
    n: usize,
    delta: f64,
    theta0_dist: f64,
    lambda: f64,
    gamma: Gamma,
    c: &StabilityConstants,
) -> Result<Option<f64>> {
    if t == 0 {
        return Err(CoreError::InvalidHorizon);
    }
    if !(theta0_dist >= 0.0 && theta0_dist.is_finite()) {
        return Err(CoreError::invalid("theta0_dist", format!("{theta0_dist}")));
    }
    let tau = tau_n(delta / t as f64, n, c)?;
    Ok(contraction_factor(lambda, gamma, c)
        .map(|kappa| stability_bound(tau, kappa, t, theta0_dist)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub lambda: f64,
    pub gamma: Gamma,
    pub admissible: bool,
    pub rho: Option<f64>,
    pub contraction_factor: Option<f64>,
}

/// One cell per `(lambda, gamma)` pair, lambda-major.
pub fn admissibility_grid(
    lambdas: &[f64],
    gammas: &[Gamma],
    c: &StabilityConstants,
) -> Vec<GridCell> {
    lambdas
        .iter()
        .flat_map(|&lambda| {
            gammas.iter().map(move |&gamma| GridCell {
                lambda,
                gamma,
                admissible: admissible(lambda, gamma, c),
                rho: rho(lambda, c),
                contraction_factor: contraction_factor(lambda, gamma, c),
            })
        })
        .collect()
}
