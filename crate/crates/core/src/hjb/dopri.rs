//! Dormand-Prince 5(4) step kernel with fourth-order dense output,
//! specialized to the two-component state (K, K').
//!
//! The shot driver in the parent module owns step-size control and event
//! handling; this file only evaluates one trial step and its embedded error
//! estimate, and exposes the dense interpolant of an accepted step.

pub(crate) type State = [f64; 2];

/// Why a right-hand-side evaluation failed at some stage point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RhsFailure {
    /// K' dropped to zero or below; the nonlinear consumption term is
    /// undefined there.
    NonpositiveDerivative,
    /// Overflow or NaN.
    NonFinite,
}

pub(crate) trait Rhs {
    fn eval(&self, z: f64, y: State) -> Result<State, RhsFailure>;
}

/// Result of one trial step from `(z, y)` with step `h`.
pub(crate) struct Attempt {
    pub y1: State,
    /// Derivative at the step end (reused as the first stage of the next
    /// step and for blow-down detection).
    pub f1: State,
    /// Weighted RMS error estimate; accept when <= 1.
    pub err: f64,
    pub dense: DenseStep,
}

/// Dense-output polynomial of an accepted step, valid for s in [0, 1].
#[derive(Debug, Clone)]
pub(crate) struct DenseStep {
    pub z0: f64,
    pub h: f64,
    cont: [State; 5],
}

impl DenseStep {
    pub fn eval(&self, s: f64) -> State {
        let s1 = 1.0 - s;
        let mut out = [0.0; 2];
        for c in 0..2 {
            out[c] = self.cont[0][c]
                + s * (self.cont[1][c]
                    + s1 * (self.cont[2][c] + s * (self.cont[3][c] + s1 * self.cont[4][c])));
        }
        out
    }

    pub fn z_at(&self, s: f64) -> f64 {
        self.z0 + s * self.h
    }

    pub fn s_of(&self, z: f64) -> f64 {
        (z - self.z0) / self.h
    }
}

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

fn axpy(y: State, h: f64, coeffs: &[f64], ks: &[State]) -> State {
    let mut out = y;
    for (a, k) in coeffs.iter().zip(ks.iter()) {
        if *a != 0.0 {
            out[0] += h * a * k[0];
            out[1] += h * a * k[1];
        }
    }
    out
}

/// Evaluates one Dormand-Prince step. No side effects: the caller decides
/// acceptance from `err`.
pub(crate) fn try_step<R: Rhs>(
    rhs: &R,
    z: f64,
    y: State,
    f0: State,
    h: f64,
    atol: f64,
    rtol: f64,
) -> Result<Attempt, RhsFailure> {
    let mut k = [[0.0f64; 2]; 7];
    k[0] = f0;
    k[1] = rhs.eval(z + C[1] * h, axpy(y, h, &A2, &k[..1]))?;
    k[2] = rhs.eval(z + C[2] * h, axpy(y, h, &A3, &k[..2]))?;
    k[3] = rhs.eval(z + C[3] * h, axpy(y, h, &A4, &k[..3]))?;
    k[4] = rhs.eval(z + C[4] * h, axpy(y, h, &A5, &k[..4]))?;
    k[5] = rhs.eval(z + C[5] * h, axpy(y, h, &A6, &k[..5]))?;
    // The seventh stage doubles as the fifth-order solution.
    let y1 = axpy(y, h, &A7, &k[..6]);
    if !(y1[0].is_finite() && y1[1].is_finite()) {
        return Err(RhsFailure::NonFinite);
    }
    let f1 = rhs.eval(z + h, y1)?;
    k[6] = f1;

    let mut err = 0.0;
    for c in 0..2 {
        let mut e = 0.0;
        for j in 0..7 {
            e += E[j] * k[j][c];
        }
        e *= h;
        let scale = atol + rtol * y[c].abs().max(y1[c].abs());
        err += (e / scale) * (e / scale);
    }
    let err = (err / 2.0).sqrt();
    if !err.is_finite() {
        return Err(RhsFailure::NonFinite);
    }

    let ydiff = [y1[0] - y[0], y1[1] - y[1]];
    let bspl = [h * f0[0] - ydiff[0], h * f0[1] - ydiff[1]];
    let mut dsum = [0.0f64; 2];
    for c in 0..2 {
        for j in 0..7 {
            dsum[c] += D[j] * k[j][c];
        }
        dsum[c] *= h;
    }
    let cont = [
        y,
        ydiff,
        bspl,
        [
            ydiff[0] - h * f1[0] - bspl[0],
            ydiff[1] - h * f1[1] - bspl[1],
        ],
        dsum,
    ];

    Ok(Attempt {
        y1,
        f1,
        err,
        dense: DenseStep { z0: z, h, cont },
    })
}
