//! Market model parameters and the closed-form post-sale consumption problem.
//!
//! The investor holds wealth in one tradable risky asset (drift `mu`,
//! volatility `sigma`), consumes at a controlled rate, and owns one unit of
//! an indivisible asset (drift `mu_tilde`, volatility `sigma_tilde`) that can
//! be sold exactly once, with the proceeds folded into wealth. Utility of
//! consumption is CRRA with exponent `alpha` in (0, 1), discounted at rate
//! `beta`.
//!
//! Once the indivisible asset is sold the problem collapses to the classical
//! single-asset consumption problem, whose value is `A x^alpha` with the
//! coefficient `A` and proportional consumption rate provided by
//! [`MertonClosedForm`]. Everything before the sale is handled by the
//! free-boundary machinery in [`crate::hjb`], which relies on the
//! admissibility conditions enforced here at construction.

use crate::error::{Error, Result};

/// Validated market constants.
///
/// Construction via [`ModelParams::new`] enforces every admissibility
/// condition; instances are immutable afterwards, so all downstream code can
/// assume the conditions hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    mu: f64,
    sigma: f64,
    mu_tilde: f64,
    sigma_tilde: f64,
    beta: f64,
    alpha: f64,
}

/// Closed-form quantities of the post-sale consumption problem: the value
/// function is `A x^alpha` and the optimal consumption level is `c_rate * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonClosedForm {
    /// Value-function coefficient `A`.
    pub a: f64,
    /// Optimal proportional consumption rate, per unit time.
    pub c_rate: f64,
}

impl ModelParams {
    /// Validates a raw parameter set.
    ///
    /// Checks, in order:
    /// - all six values finite; `sigma`, `sigma_tilde` positive; `alpha` in (0, 1);
    /// - the discount rate strictly dominates the utility-weighted growth of
    ///   both assets (otherwise postponing the sale forever is unboundedly
    ///   good and the problem has no solution);
    /// - the relative drift lies strictly inside the band that makes the
    ///   sale region a ratio threshold.
    ///
    /// All inequalities are strict with no tolerance slack; boundary cases
    /// are rejected.
    pub fn new(
        mu: f64,
        sigma: f64,
        mu_tilde: f64,
        sigma_tilde: f64,
        beta: f64,
        alpha: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("mu", mu),
            ("sigma", sigma),
            ("mu_tilde", mu_tilde),
            ("sigma_tilde", sigma_tilde),
            ("beta", beta),
            ("alpha", alpha),
        ] {
            if !v.is_finite() {
                return Err(Error::Range(format!("{name} must be finite, got {v}")));
            }
        }
        if sigma <= 0.0 {
            return Err(Error::Range(format!("sigma must be positive, got {sigma}")));
        }
        if sigma_tilde <= 0.0 {
            return Err(Error::Range(format!(
                "sigma_tilde must be positive, got {sigma_tilde}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Range(format!(
                "alpha must lie strictly inside (0, 1), got {alpha}"
            )));
        }

        let p = ModelParams {
            mu,
            sigma,
            mu_tilde,
            sigma_tilde,
            beta,
            alpha,
        };

        let floor = p.beta_floor();
        if !(beta > floor) {
            return Err(Error::BetaTooSmall(format!(
                "beta = {beta} must strictly exceed max(0, {}, {}) = {floor}",
                p.growth_rate_tradable(),
                p.growth_rate_indivisible()
            )));
        }

        let gap = mu_tilde - mu;
        let lower = (alpha - 1.0) * sigma * sigma;
        let upper = 0.5 * (alpha - 1.0) * (sigma * sigma - sigma_tilde * sigma_tilde);
        if !(gap > lower && gap < upper) {
            return Err(Error::DriftCondition(format!(
                "mu_tilde - mu = {gap} must lie strictly inside ({lower}, {upper})"
            )));
        }

        Ok(p)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn mu_tilde(&self) -> f64 {
        self.mu_tilde
    }
    pub fn sigma_tilde(&self) -> f64 {
        self.sigma_tilde
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Utility-weighted growth rate of the tradable asset,
    /// `alpha mu + alpha (alpha - 1) sigma^2 / 2`.
    pub fn growth_rate_tradable(&self) -> f64 {
        self.alpha * self.mu + 0.5 * self.alpha * (self.alpha - 1.0) * self.sigma * self.sigma
    }

    /// Utility-weighted growth rate of the indivisible asset.
    pub fn growth_rate_indivisible(&self) -> f64 {
        self.alpha * self.mu_tilde
            + 0.5 * self.alpha * (self.alpha - 1.0) * self.sigma_tilde * self.sigma_tilde
    }

    /// The strict lower bound the discount rate must exceed.
    pub fn beta_floor(&self) -> f64 {
        0.0f64
            .max(self.growth_rate_tradable())
            .max(self.growth_rate_indivisible())
    }

    /// Closed form of the post-sale problem.
    pub fn merton(&self) -> MertonClosedForm {
        let bracket = (self.beta - self.mu * self.alpha
            - 0.5 * self.alpha * (self.alpha - 1.0) * self.sigma * self.sigma)
            / (1.0 - self.alpha);
        // bracket > 0 is guaranteed by the discount-rate check at construction.
        let a = bracket.powf(self.alpha - 1.0) / self.alpha;
        MertonClosedForm { a, c_rate: bracket }
    }

    /// Post-sale value `A x^alpha` of wealth `x > 0`.
    pub fn merton_value(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Range(format!("wealth must be positive, got {x}")));
        }
        Ok(self.merton().a * x.powf(self.alpha))
    }

    /// Residual of the post-sale dynamic-programming equation at `V = A x^alpha`
    /// with consumption at the optimizing rate. Zero (to rounding) for the
    /// true coefficient; see [`ModelParams::merton_hjb_residual_with`] for
    /// perturbation studies.
    pub fn merton_hjb_residual(&self, x: f64) -> f64 {
        self.merton_hjb_residual_with(self.merton().a, x)
    }

    /// Same residual with the value coefficient replaced by `coef`, the
    /// consumption chosen as the optimizer for that coefficient.
    pub fn merton_hjb_residual_with(&self, coef: f64, x: f64) -> f64 {
        let alpha = self.alpha;
        let v = coef * x.powf(alpha);
        let vp = coef * alpha * x.powf(alpha - 1.0);
        let vpp = coef * alpha * (alpha - 1.0) * x.powf(alpha - 2.0);
        // First-order condition: (c x)^(alpha-1) = V'(x).
        let c_level = (coef * alpha).powf(1.0 / (alpha - 1.0)) * x;
        -self.beta * v
            + (self.mu * x - c_level) * vp
            + 0.5 * self.sigma * self.sigma * x * x * vpp
            + c_level.powf(alpha) / alpha
    }

    /// Upper bound for the sale boundary in the wealth-to-asset ratio: the
    /// root of [`ModelParams::sale_region_lhs`]. Positive for every validated
    /// parameter set.
    pub fn zbar_upper_bound(&self) -> f64 {
        let num = self.mu - self.mu_tilde
            + 0.5
                * (self.alpha - 1.0)
                * (self.sigma * self.sigma - self.sigma_tilde * self.sigma_tilde);
        let den = self.mu_tilde - self.mu - (self.alpha - 1.0) * self.sigma * self.sigma;
        num / den
    }

    /// Linear function of the ratio whose nonpositivity certifies that
    /// selling dominates holding at ratio `z`. Strictly increasing in `z`
    /// under the drift condition, with root [`ModelParams::zbar_upper_bound`].
    pub fn sale_region_lhs(&self, z: f64) -> f64 {
        let slope = self.mu_tilde - self.mu - (self.alpha - 1.0) * self.sigma * self.sigma;
        let intercept = self.mu_tilde - self.mu
            + 0.5
                * (self.alpha - 1.0)
                * (self.sigma_tilde * self.sigma_tilde - self.sigma * self.sigma);
        slope * z + intercept
    }
}
