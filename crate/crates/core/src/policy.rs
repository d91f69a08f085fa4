//! Decision layer built on a located free boundary: value function, optimal
//! consumption level and the sell/hold rule.
//!
//! Below the boundary ratio the asset is sold immediately and the closed-form
//! post-sale expressions apply; at or above it the tabulated continuation
//! solution is interpolated. Queries beyond the tabulated ratio domain are
//! rejected rather than extrapolated.

use crate::error::{Error, Result};
use crate::hjb::FreeBoundary;
use crate::interp::MonotoneCubic;
use crate::model::{MertonClosedForm, ModelParams};

#[derive(Debug, Clone)]
pub struct Policy {
    params: ModelParams,
    merton: MertonClosedForm,
    boundary: FreeBoundary,
    k_interp: MonotoneCubic,
    kprime_interp: MonotoneCubic,
    z_max: f64,
}

impl Policy {
    /// Builds the decision layer from a boundary whose trajectory reached the
    /// end of the domain within bounds.
    pub fn new(params: ModelParams, boundary: FreeBoundary) -> Result<Self> {
        if !boundary.solution.classification.kind.is_global() {
            return Err(Error::Range(format!(
                "policy requires a globally admissible solution, got {}",
                boundary.solution.classification.kind
            )));
        }
        let sol = &boundary.solution;
        let k_interp = MonotoneCubic::new(sol.grid.clone(), sol.k_values.clone())?;
        let kprime_interp = MonotoneCubic::new(sol.grid.clone(), sol.kprime_values.clone())?;
        let z_max = *sol.grid.last().unwrap();
        Ok(Policy {
            merton: params.merton(),
            params,
            boundary,
            k_interp,
            kprime_interp,
            z_max,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn merton(&self) -> MertonClosedForm {
        self.merton
    }

    pub fn boundary(&self) -> &FreeBoundary {
        &self.boundary
    }

    /// The sale threshold in the wealth-to-asset ratio.
    pub fn z_hat(&self) -> f64 {
        self.boundary.z_hat
    }

    /// End of the tabulated ratio domain; queries beyond it are rejected.
    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// Continuation value factor `K(z)` for a ratio in `[z_hat, z_max]`.
    pub fn k_at(&self, z: f64) -> Result<f64> {
        self.check_ratio(z)?;
        Ok(self.k_interp.eval(z))
    }

    /// Slope `K'(z)` for a ratio in `[z_hat, z_max]`.
    pub fn kprime_at(&self, z: f64) -> Result<f64> {
        self.check_ratio(z)?;
        Ok(self.kprime_interp.eval(z))
    }

    fn check_ratio(&self, z: f64) -> Result<()> {
        if z > self.z_max {
            return Err(Error::OutOfRange {
                ratio: z,
                z_max: self.z_max,
            });
        }
        if z < self.k_interp.x_min() {
            return Err(Error::Range(format!(
                "ratio {z} below the tabulated boundary {}",
                self.k_interp.x_min()
            )));
        }
        Ok(())
    }

    fn positive_state(x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Range(format!("wealth must be positive, got {x}")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Range(format!(
                "asset value must be positive, got {y}"
            )));
        }
        Ok(x / y)
    }

    /// Value at wealth `x` and asset value `y`: the post-sale closed form
    /// `A (x+y)^alpha` in the sale region, `y^alpha K(x/y)` in the
    /// continuation region. Both branches agree at the boundary ratio.
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        let z = Self::positive_state(x, y)?;
        let alpha = self.params.alpha();
        if z < self.z_hat() {
            Ok(self.merton.a * (x + y).powf(alpha))
        } else {
            self.check_ratio(z)?;
            Ok(y.powf(alpha) * self.k_interp.eval(z))
        }
    }

    /// Optimal consumption level (consumption per unit time, not a fraction).
    /// In the continuation region it is `y (K'(x/y))^(1/(alpha-1))`; in the
    /// sale region the post-sale rate applies to the merged wealth `x + y`.
    pub fn consumption_level(&self, x: f64, y: f64) -> Result<f64> {
        let z = Self::positive_state(x, y)?;
        if z < self.z_hat() {
            Ok(self.merton.c_rate * (x + y))
        } else {
            self.check_ratio(z)?;
            let kp = self.kprime_interp.eval(z);
            Ok(y * kp.powf(1.0 / (self.params.alpha() - 1.0)))
        }
    }

    /// Consumption level with the ratio clamped to the tabulated domain end.
    /// Returns the level and whether clamping occurred; used by the simulator,
    /// which counts clamp events instead of extrapolating.
    pub fn consumption_level_clamped(&self, x: f64, y: f64) -> Result<(f64, bool)> {
        let z = Self::positive_state(x, y)?;
        if z < self.z_hat() {
            return Ok((self.merton.c_rate * (x + y), false));
        }
        let (z_eval, clamped) = if z > self.z_max {
            (self.z_max, true)
        } else {
            (z, false)
        };
        let kp = self.kprime_interp.eval(z_eval);
        Ok((y * kp.powf(1.0 / (self.params.alpha() - 1.0)), clamped))
    }

    /// The stopping rule: sell as soon as the ratio is at or below the
    /// boundary. The boundary itself belongs to the sale region.
    pub fn should_sell(&self, x: f64, y: f64) -> bool {
        x / y <= self.z_hat()
    }
}
