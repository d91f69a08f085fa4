//! Monotone piecewise-cubic interpolation (Fritsch-Carlson tangents).
//!
//! Used by the policy layer to evaluate the tabulated continuation value and
//! its derivative between solver grid nodes. Node values are reproduced
//! exactly and monotone data yields a monotone interpolant, so band bounds
//! that hold on the grid are not overshot between nodes.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneCubic {
    pub(crate) fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Range(format!(
                "interpolation needs two equal-length columns, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Range(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }

        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = delta[0];
            m[1] = delta[0];
        } else {
            m[0] = edge_tangent(h[0], h[1], delta[0], delta[1]);
            m[n - 1] = edge_tangent(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    m[i] = 0.0;
                } else {
                    // Weighted harmonic mean of adjacent secant slopes.
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
        }

        Ok(MonotoneCubic {
            xs,
            ys,
            tangents: m,
        })
    }

    pub(crate) fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub(crate) fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    /// Evaluates at `x`, which must lie within the tabulated domain.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        assert!(
            x >= self.x_min() && x <= self.x_max(),
            "interpolation query {x} outside [{}, {}]",
            self.x_min(),
            self.x_max()
        );
        let n = self.xs.len();
        // Index of the segment [xs[i], xs[i+1]] containing x.
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            j if j >= n => n - 2,
            j => j - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.tangents[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.tangents[i + 1]
    }
}

fn edge_tangent(h_near: f64, h_far: f64, d_near: f64, d_far: f64) -> f64 {
    let m = ((2.0 * h_near + h_far) * d_near - h_near * d_far) / (h_near + h_far);
    if m * d_near <= 0.0 {
        0.0
    } else if d_near * d_far < 0.0 && m.abs() > 3.0 * d_near.abs() {
        3.0 * d_near
    } else {
        m
    }
}
