//! Weakly nonlinear long-wave balance for the streamfunction amplitude.
//!
//! The amplitude `A(X)` of `psi = eps^2 A(eps x) phi0(y)` obeys
//! `A'' = -(1/s) A - (r/s) A^2` with
//!
//! ```text
//! s = -(c0 / 2) I2 / I1,   r = -(3 / 4) I3 / I1,
//! I1 = int rho phi0'^2,  I2 = int rho phi0^2,  I3 = int rho phi0'^3,
//! ```
//!
//! and the homoclinic solution `A = a sech^2(k X)`, `a = -3 / (2 r)`, `k = 1 / (2 sqrt(-s))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::{genericity_integral, VerticalMode};
use crate::quadrature::{integrate, simpson_weights};
use crate::stratification::StratificationProfile;

/// Default lower bound on `|int rho phi0^3|` and `|I3| / I1`.
pub const DEFAULT_GENERICITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KdvCoefficients {
    pub r: f64,
    pub s: f64,
    /// Soliton amplitude.
    pub a: f64,
    /// Soliton inverse width.
    pub k: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// Instability constant `(1/c0) int A^2 dX * I1`.
    pub instability: f64,
    /// Footnote-style genericity integral `int rho phi0^3`.
    pub genericity: f64,
}

impl KdvCoefficients {
    /// Coefficients consistent with a prescribed `a sech^2(k X)` soliton.
    ///
    /// Only the soliton-related fields are meaningful; the integrals are zero.
    pub fn from_soliton(a: f64, k: f64) -> Self {
        let s = -1.0 / (4.0 * k * k);
        let r = -1.5 / a;
        Self {
            r,
            s,
            a,
            k,
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            instability: 0.0,
            genericity: 0.0,
        }
    }

    /// `A(X) = a sech^2(k X)`.
    pub fn soliton(&self, x: f64) -> f64 {
        let sech = 1.0 / (self.k * x).cosh();
        self.a * sech * sech
    }

    /// `dA/dX`.
    pub fn soliton_slope(&self, x: f64) -> f64 {
        let u = self.k * x;
        let sech = 1.0 / u.cosh();
        -2.0 * self.a * self.k * sech * sech * u.tanh()
    }

    /// `int A^2 dX = (4/3) a^2 / k`.
    pub fn soliton_mass(&self) -> f64 {
        4.0 / 3.0 * self.a * self.a / self.k
    }

    /// Right-hand side of the amplitude ODE at amplitude `amp`.
    pub fn ode_rhs(&self, amp: f64) -> f64 {
        -amp / self.s - self.r / self.s * amp * amp
    }
}

/// `(1/c0) * mass * I1`; errors unless strictly positive.
pub fn instability_constant(c0: f64, soliton_mass: f64, i1: f64) -> Result<f64> {
    let k = soliton_mass * i1 / c0;
    if k > 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(Error::Invariant(format!(
            "instability constant K = {k} must be positive"
        )))
    }
}

/// Computes `(r, s)`, the soliton parameters and `K` for a mode.
pub fn compute_coefficients(
    mode: &VerticalMode,
    profile: &StratificationProfile,
    threshold: f64,
) -> Result<KdvCoefficients> {
    let w = simpson_weights(mode.ny, mode.spacing());
    let rho: Vec<f64> = mode.heights().map(|y| profile.density(y)).collect();
    let weighted = |f: &dyn Fn(usize) -> f64| {
        let v: Vec<f64> = (0..mode.ny).map(|j| rho[j] * f(j)).collect();
        integrate(&w, &v)
    };
    let d = &mode.phi0_prime;
    let p = &mode.phi0;
    let i1 = weighted(&|j| d[j] * d[j]);
    let i2 = weighted(&|j| p[j] * p[j]);
    let i3 = weighted(&|j| d[j] * d[j] * d[j]);
    let genericity = genericity_integral(mode, profile);
    if genericity.abs() < threshold {
        return Err(Error::Genericity {
            value: genericity,
            threshold,
        });
    }
    let ratio = i3.abs() / i1;
    if ratio < threshold {
        return Err(Error::DegenerateNonlinearity { ratio, threshold });
    }
    let c0 = mode.c0;
    let s = -0.5 * c0 * i2 / i1;
    if !(s < 0.0) {
        return Err(Error::Invariant(format!(
            "dispersive coefficient s = {s} must be negative"
        )));
    }
    let r = -0.75 * i3 / i1;
    let a = -1.5 / r;
    let k = 0.5 / (-s).sqrt();
    let mut coeffs = KdvCoefficients {
        r,
        s,
        a,
        k,
        i1,
        i2,
        i3,
        instability: 0.0,
        genericity,
    };
    coeffs.instability = instability_constant(c0, coeffs.soliton_mass(), i1)?;
    Ok(coeffs)
}
