//! Analytic background stratifications and the quiescent state they define.
//!
//! Heights are nondimensional, `y = 0` at the bottom and `y = 1` at the lid.
//! The background density must be positive and strictly decreasing upward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_16;

/// Root tolerance (in height) for the iterative inverse of the tanh profile.
pub const INVERSE_TOLERANCE: f64 = 1e-13;

/// Shape and parameters of a background density profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// `rho0 * exp(-beta * y)`.
    Exponential { rho0: f64, beta: f64 },
    /// Linear interpolation between `rho_bottom` at `y = 0` and `rho_top` at `y = 1`.
    Linear { rho_bottom: f64, rho_top: f64 },
    /// `rho0 * (1 - amplitude * tanh((y - center) / thickness))`.
    TanhPycnocline {
        rho0: f64,
        amplitude: f64,
        center: f64,
        thickness: f64,
    },
}

/// Background density profile together with the gravitational acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProfileSpec", from = "ProfileSpec")]
pub struct StratificationProfile {
    pub kind: ProfileKind,
    pub g: f64,
}

fn default_gravity() -> f64 {
    1.0
}

/// JSON shape of a profile: `{"kind": "exponential", "rho0": 1, "beta": 1, "g": 1}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ProfileSpec {
    Exponential {
        rho0: f64,
        beta: f64,
        #[serde(default = "default_gravity")]
        g: f64,
    },
    Linear {
        rho_bottom: f64,
        rho_top: f64,
        #[serde(default = "default_gravity")]
        g: f64,
    },
    TanhPycnocline {
        rho0: f64,
        amplitude: f64,
        center: f64,
        thickness: f64,
        #[serde(default = "default_gravity")]
        g: f64,
    },
}

impl From<ProfileSpec> for StratificationProfile {
    fn from(spec: ProfileSpec) -> Self {
        match spec {
            ProfileSpec::Exponential { rho0, beta, g } => Self::exponential(rho0, beta, g),
            ProfileSpec::Linear {
                rho_bottom,
                rho_top,
                g,
            } => Self::linear(rho_bottom, rho_top, g),
            ProfileSpec::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
                g,
            } => Self::tanh_pycnocline(rho0, amplitude, center, thickness, g),
        }
    }
}

impl From<StratificationProfile> for ProfileSpec {
    fn from(p: StratificationProfile) -> Self {
        let g = p.g;
        match p.kind {
            ProfileKind::Exponential { rho0, beta } => ProfileSpec::Exponential { rho0, beta, g },
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => ProfileSpec::Linear {
                rho_bottom,
                rho_top,
                g,
            },
            ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            } => ProfileSpec::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
                g,
            },
        }
    }
}

/// Quiescent-state values at one height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuiescentState {
    pub density: f64,
    pub density_slope: f64,
    pub pressure: f64,
}

/// Outcome of sampling the profile invariants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub min_density: f64,
    /// Largest (least negative) slope seen; strictly negative for a valid profile.
    pub max_slope: f64,
    pub max_inverse_error: f64,
}

impl StratificationProfile {
    pub fn exponential(rho0: f64, beta: f64, g: f64) -> Self {
        Self {
            kind: ProfileKind::Exponential { rho0, beta },
            g,
        }
    }

    pub fn linear(rho_bottom: f64, rho_top: f64, g: f64) -> Self {
        Self {
            kind: ProfileKind::Linear {
                rho_bottom,
                rho_top,
            },
            g,
        }
    }

    pub fn tanh_pycnocline(rho0: f64, amplitude: f64, center: f64, thickness: f64, g: f64) -> Self {
        Self {
            kind: ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            },
            g,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Exponential { .. } => "exponential",
            ProfileKind::Linear { .. } => "linear",
            ProfileKind::TanhPycnocline { .. } => "tanh-pycnocline",
        }
    }

    /// Background density at `y` (no range check).
    pub fn density(&self, y: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential { rho0, beta } => rho0 * (-beta * y).exp(),
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => rho_bottom + (rho_top - rho_bottom) * y,
            ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            } => rho0 * (1.0 - amplitude * ((y - center) / thickness).tanh()),
        }
    }

    pub fn density_slope(&self, y: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential { rho0, beta } => -beta * rho0 * (-beta * y).exp(),
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => rho_top - rho_bottom,
            ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            } => {
                let sech = 1.0 / ((y - center) / thickness).cosh();
                -rho0 * amplitude / thickness * sech * sech
            }
        }
    }

    pub fn density_curvature(&self, y: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential { rho0, beta } => beta * beta * rho0 * (-beta * y).exp(),
            ProfileKind::Linear { .. } => 0.0,
            ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            } => {
                let u = (y - center) / thickness;
                let sech = 1.0 / u.cosh();
                2.0 * rho0 * amplitude / (thickness * thickness) * sech * sech * u.tanh()
            }
        }
    }

    /// Hydrostatic pressure `-g * int_0^y rho(eta) d eta` in closed form.
    pub fn pressure(&self, y: f64) -> f64 {
        let mass = match self.kind {
            ProfileKind::Exponential { rho0, beta } => -rho0 * (-beta * y).exp_m1() / beta,
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => rho_bottom * y + 0.5 * (rho_top - rho_bottom) * y * y,
            ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            } => {
                let lc = |u: f64| log_cosh(u);
                rho0 * (y - amplitude
                    * thickness
                    * (lc((y - center) / thickness) - lc(-center / thickness)))
            }
        };
        -self.g * mass
    }

    /// Checked evaluation of density, slope and pressure.
    pub fn evaluate(&self, y: f64) -> Result<QuiescentState> {
        check_height(y)?;
        Ok(QuiescentState {
            density: self.density(y),
            density_slope: self.density_slope(y),
            pressure: self.pressure(y),
        })
    }

    /// `(rho(1), rho(0))`: the admissible density interval.
    pub fn density_range(&self) -> (f64, f64) {
        (self.density(1.0), self.density(0.0))
    }

    /// Open interval on which the closed-form inverse continues analytically
    /// past the admissible range.
    pub fn continuation_range(&self) -> (f64, f64) {
        match self.kind {
            ProfileKind::Exponential { .. } => (0.0, f64::INFINITY),
            ProfileKind::Linear { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ProfileKind::TanhPycnocline {
                rho0, amplitude, ..
            } => (
                rho0 * (1.0 - amplitude.abs()),
                rho0 * (1.0 + amplitude.abs()),
            ),
        }
    }

    fn check_continuation(&self, rho: f64) -> Result<()> {
        let (min, max) = self.continuation_range();
        if rho.is_finite() && rho > min && rho < max {
            Ok(())
        } else {
            Err(Error::DensityRange { rho, min, max })
        }
    }

    /// Analytic continuation of [`Self::inverse_density`]; heights may leave `[0, 1]`.
    pub fn inverse_density_extended(&self, rho: f64) -> Result<f64> {
        self.check_continuation(rho)?;
        let (lo, hi) = self.density_range();
        if rho >= lo && rho <= hi {
            return self.inverse_density(rho);
        }
        Ok(match self.kind {
            ProfileKind::Exponential { rho0, beta } => -(rho / rho0).ln() / beta,
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => (rho - rho_bottom) / (rho_top - rho_bottom),
            ProfileKind::TanhPycnocline { .. } => {
                let y = if rho > hi { 0.0 } else { 1.0 };
                y - self.height_offset_unchecked(rho, y)
            }
        })
    }

    fn check_density(&self, rho: f64) -> Result<()> {
        let (min, max) = self.density_range();
        if rho.is_finite() && rho >= min && rho <= max {
            Ok(())
        } else {
            Err(Error::DensityRange { rho, min, max })
        }
    }

    /// Height at which the background takes the density `rho`.
    pub fn inverse_density(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        Ok(match self.kind {
            ProfileKind::Exponential { rho0, beta } => (-(rho / rho0).ln() / beta).clamp(0.0, 1.0),
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => ((rho - rho_bottom) / (rho_top - rho_bottom)).clamp(0.0, 1.0),
            ProfileKind::TanhPycnocline { .. } => self.newton_inverse(rho),
        })
    }

    /// Safeguarded Newton on `rho(y) - target` with a shrinking bisection bracket.
    fn newton_inverse(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let (rho_lo, rho_hi) = (self.density(1.0), self.density(0.0));
        if target == rho_hi {
            return 0.0;
        }
        if target == rho_lo {
            return 1.0;
        }
        // linear guess between the endpoint densities
        let mut y = ((rho_hi - target) / (rho_hi - rho_lo)).clamp(0.0, 1.0);
        for _ in 0..200 {
            let f = self.density(y) - target;
            // density decreases with y
            if f > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let slope = self.density_slope(y);
            let mut next = y - f / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - y).abs();
            y = next;
            if step < INVERSE_TOLERANCE || hi - lo < INVERSE_TOLERANCE {
                break;
            }
        }
        y
    }

    /// `y - rho^{-1}(rho)`, evaluated without cancellation where a closed form allows.
    pub fn height_offset(&self, rho: f64, y: f64) -> Result<f64> {
        self.check_continuation(rho)?;
        Ok(self.height_offset_unchecked(rho, y))
    }

    fn height_offset_unchecked(&self, rho: f64, y: f64) -> f64 {
        match self.kind {
            ProfileKind::Exponential { rho0, beta } => {
                let base = rho0 * (-beta * y).exp();
                ((rho - base) / base).ln_1p() / beta
            }
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => {
                let base = rho_bottom + (rho_top - rho_bottom) * y;
                (base - rho) / (rho_top - rho_bottom)
            }
            ProfileKind::TanhPycnocline {
                rho0,
                amplitude,
                center,
                thickness,
            } => {
                // atanh(u0) - atanh(u) = atanh((u0 - u) / (1 - u0 u))
                let u0 = ((y - center) / thickness).tanh();
                let u = u0 - (rho - self.density(y)) / (rho0 * amplitude);
                thickness * ((u0 - u) / (1.0 - u0 * u)).atanh()
            }
        }
    }

    /// Derivative of the inverse density, `1 / rho'(rho^{-1}(rho))`.
    pub fn inverse_density_slope(&self, rho: f64) -> Result<f64> {
        let y = self.inverse_density_extended(rho)?;
        Ok(1.0 / self.density_slope(y))
    }

    /// Second derivative of the inverse density, `-rho'' / rho'^3` at `rho^{-1}(rho)`.
    pub fn inverse_density_curvature(&self, rho: f64) -> Result<f64> {
        let y = self.inverse_density_extended(rho)?;
        let s = self.density_slope(y);
        Ok(-self.density_curvature(y) / (s * s * s))
    }

    /// `W(rho, y) = int_{rho(y)}^{rho} (y - rho^{-1}(q)) dq`, the combined potential
    /// and Casimir density. Non-negative, quadratic in `rho - rho(y)`.
    pub fn casimir_potential(&self, rho: f64, y: f64) -> Result<f64> {
        self.check_continuation(rho)?;
        let base = self.density(y);
        Ok(match self.kind {
            ProfileKind::Exponential { beta, .. } => {
                let t = (rho - base) / base;
                base / beta * ((1.0 + t) * t.ln_1p() - t)
            }
            ProfileKind::Linear {
                rho_bottom,
                rho_top,
            } => {
                let d = rho - base;
                -d * d / (2.0 * (rho_top - rho_bottom))
            }
            ProfileKind::TanhPycnocline { .. } => {
                gauss_legendre_16(base, rho, |q| self.height_offset_unchecked(q, y))
            }
        })
    }

    /// `F(rho, y) = int_{rho(y)}^{rho} rho^{-1}(q) dq`.
    pub fn inverse_primitive(&self, rho: f64, y: f64) -> Result<f64> {
        Ok(y * (rho - self.density(y)) - self.casimir_potential(rho, y)?)
    }

    /// Samples the invariants on `samples` uniform heights.
    pub fn validate(&self, samples: usize) -> Result<ValidationReport> {
        if samples < 2 {
            return Err(Error::param("samples", "at least 2 samples required"));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::param(
                "g",
                format!("must be positive, got {}", self.g),
            ));
        }
        if let ProfileKind::TanhPycnocline { thickness, .. } = self.kind {
            if !(thickness > 0.0) {
                return Err(Error::param("thickness", "must be positive"));
            }
        }
        let mut min_density = f64::INFINITY;
        let mut max_slope = f64::NEG_INFINITY;
        for n in 0..samples {
            let y = n as f64 / (samples - 1) as f64;
            let rho = self.density(y);
            let slope = self.density_slope(y);
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Profile {
                    invariant: "positive density",
                    y,
                    value: rho,
                });
            }
            if !(slope < 0.0) {
                return Err(Error::Profile {
                    invariant: "strictly decreasing density",
                    y,
                    value: slope,
                });
            }
            min_density = min_density.min(rho);
            max_slope = max_slope.max(slope);
        }
        let mut max_inverse_error: f64 = 0.0;
        for n in 0..samples {
            let y = n as f64 / (samples - 1) as f64;
            let back = self.inverse_density(self.density(y))?;
            max_inverse_error = max_inverse_error.max((back - y).abs());
        }
        Ok(ValidationReport {
            samples,
            min_density,
            max_slope,
            max_inverse_error,
        })
    }
}

fn check_height(y: f64) -> Result<()> {
    if (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(Error::Domain { y })
    }
}

fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> StratificationProfile {
        StratificationProfile::exponential(1.0, 1.0, 1.0)
    }

    fn tanh_default() -> StratificationProfile {
        StratificationProfile::tanh_pycnocline(1.0, 0.05, 0.5, 0.1, 1.0)
    }

    #[test]
    fn exponential_endpoints() {
        let q = exp1().evaluate(0.0).unwrap();
        assert_eq!((q.density, q.density_slope, q.pressure), (1.0, -1.0, 0.0));
        let q = exp1().evaluate(1.0).unwrap();
        assert!((q.density - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((q.pressure + 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn tanh_center_values() {
        let q = tanh_default().evaluate(0.5).unwrap();
        assert_eq!(q.density, 1.0);
        assert!((q.density_slope + 0.5).abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_heights_outside_unit_interval() {
        assert!(matches!(exp1().evaluate(1.5), Err(Error::Domain { .. })));
        assert!(matches!(exp1().evaluate(-1e-9), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_density_exponential() {
        let p = exp1();
        assert_eq!(p.inverse_density(1.0).unwrap(), 0.0);
        assert!((p.inverse_density((-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        let y = p.inverse_density(0.7).unwrap();
        assert!((y - 0.356_674_943_938_732_4).abs() < 1e-14);
        // bisection cross-check on rho(y) - 0.7
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if p.density(mid) > 0.7 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((y - lo).abs() < 1e-14);
    }

    #[test]
    fn inverse_density_out_of_range() {
        assert!(matches!(
            exp1().inverse_density(1.01),
            Err(Error::DensityRange { .. })
        ));
        assert!(matches!(
            tanh_default().inverse_density(0.5),
            Err(Error::DensityRange { .. })
        ));
    }

    #[test]
    fn tanh_newton_matches_atanh_closed_form() {
        let p = tanh_default();
        for n in 0..=50 {
            let y = n as f64 / 50.0;
            let rho = p.density(y);
            let closed = 0.5 + 0.1 * ((1.0 - rho) / 0.05).atanh();
            assert!((p.inverse_density(rho).unwrap() - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_reports() {
        let r = exp1().validate(101).unwrap();
        assert!(r.max_slope < 0.0);
        assert!((r.min_density - (-1.0f64).exp()).abs() < 1e-15);

        let bad = StratificationProfile::tanh_pycnocline(1.0, 2.0, 0.5, 0.1, 1.0);
        match bad.validate(101) {
            Err(Error::Profile { invariant, .. }) => assert_eq!(invariant, "positive density"),
            other => panic!("expected positivity failure, got {other:?}"),
        }
        let flat = StratificationProfile::linear(1.0, 1.0, 1.0);
        match flat.validate(101) {
            Err(Error::Profile { invariant, y, .. }) => {
                assert_eq!(invariant, "strictly decreasing density");
                assert_eq!(y, 0.0);
            }
            other => panic!("expected monotonicity failure, got {other:?}"),
        }
        assert!(exp1().validate(1).is_err());
    }

    #[test]
    fn pressure_matches_quadrature() {
        let p = exp1();
        // fine Simpson of -g rho over [0, y]
        for &y in &[0.25, 0.5, 1.0] {
            let n = 2001;
            let w = crate::quadrature::simpson_weights(n, y / (n - 1) as f64);
            let v: Vec<f64> = (0..n)
                .map(|i| -p.g * p.density(y * i as f64 / (n - 1) as f64))
                .collect();
            assert!((crate::quadrature::integrate(&w, &v) - p.pressure(y)).abs() < 1e-10);
        }
        let t = tanh_default();
        let n = 4001;
        let w = crate::quadrature::simpson_weights(n, 1.0 / (n - 1) as f64);
        let v: Vec<f64> = (0..n)
            .map(|i| -t.density(i as f64 / (n - 1) as f64))
            .collect();
        assert!((crate::quadrature::integrate(&w, &v) - t.pressure(1.0)).abs() < 1e-10);
    }

    #[test]
    fn casimir_potential_matches_quadrature() {
        for p in [
            exp1(),
            StratificationProfile::linear(1.2, 1.0, 1.0),
            tanh_default(),
        ] {
            let y = 0.4;
            let base = p.density(y);
            let rho = base + 0.3 * (p.density(0.0) - base);
            let direct = crate::quadrature::gauss_legendre_16(base, rho, |q| {
                y - p.inverse_density(q).unwrap()
            });
            let w = p.casimir_potential(rho, y).unwrap();
            assert!(w > 0.0);
            assert!((w - direct).abs() < 1e-13 * (1.0 + w.abs()), "{}", p.name());
            assert_eq!(p.casimir_potential(base, y).unwrap(), 0.0);
        }
    }

    #[test]
    fn height_offset_matches_inverse() {
        for p in [
            exp1(),
            StratificationProfile::linear(1.2, 1.0, 1.0),
            tanh_default(),
        ] {
            for &y in &[0.1, 0.5, 0.9] {
                let rho = p.density(y) + 0.2 * (p.density(0.0) - p.density(y));
                let lhs = p.height_offset(rho, y).unwrap();
                let rhs = y - p.inverse_density(rho).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{} at {y}", p.name());
            }
        }
    }

    #[test]
    fn profile_json_shape() {
        let p: StratificationProfile =
            serde_json::from_str(r#"{"kind":"exponential","rho0":1.0,"beta":1.0}"#).unwrap();
        assert_eq!(p, exp1());
        let err = serde_json::from_str::<StratificationProfile>(
            r#"{"kind":"exponential","rho0":1.0,"beta":1.0,"bogus":2}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn continuation_past_range() {
        let e = StratificationProfile::exponential(1.0, 1.0, 1.0);
        assert!(e.inverse_density(1.01).is_err());
        assert!((e.inverse_density_extended(1.01).unwrap() + 1.01f64.ln()).abs() < 1e-15);
        assert_eq!(
            e.inverse_density_extended(0.7).unwrap(),
            e.inverse_density(0.7).unwrap()
        );
        assert!(e.inverse_density_extended(0.0).is_err());
        let t = tanh_default();
        let (lo, hi) = t.density_range();
        for rho in [
            hi + 0.3 * (t.continuation_range().1 - hi),
            lo - 0.2 * (lo - t.continuation_range().0),
        ] {
            let y = t.inverse_density_extended(rho).unwrap();
            assert!(!(0.0..=1.0).contains(&y));
            assert!((t.density(y) - rho).abs() < 1e-12);
            // offset and potential stay consistent with the continued inverse
            let off = t.height_offset(rho, 0.5).unwrap();
            assert!((off - (0.5 - y)).abs() < 1e-11);
            assert!(t.casimir_potential(rho, 0.5).unwrap() > 0.0);
        }
        assert!(t
            .inverse_density_extended(t.continuation_range().1)
            .is_err());
    }
}
