//! Approximate small-amplitude solitary-wave fields on a truncated domain.
//!
//! `c = c0 + eps^2`, `psi = eps^2 A(eps x) phi0(y)`,
//! `rho = rho_bar(y) - (eps^2 / c0) A(eps x) rho_bar'(y) phi0(y)` and
//! `sigma = -div(rho grad psi)`. `psi` is pinned to zero on the whole boundary,
//! including the truncation lines `x = +-L`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{partial_x, sigma_from_psi, Field, Grid2D, Variation};
use crate::kdv::{compute_coefficients, KdvCoefficients};
use crate::modes::{solve_fundamental_mode, VerticalMode};
use crate::stratification::StratificationProfile;

/// Half-width in units of the soliton length `1 / (k eps)`.
pub const DECAY_WIDTHS: f64 = 10.0;
pub const DEFAULT_NX: usize = 1025;
pub const DEFAULT_NY: usize = 257;

#[derive(Debug, Clone, Serialize)]
pub struct WaveField {
    pub grid: Grid2D,
    pub c0: f64,
    pub c: f64,
    pub eps: f64,
    #[serde(skip)]
    pub rho: Field,
    #[serde(skip)]
    pub psi: Field,
    #[serde(skip)]
    pub sigma: Field,
    pub warnings: Vec<String>,
}

impl WaveField {
    /// The `(rho, sigma)` state as a pair.
    pub fn state(&self) -> Variation {
        Variation {
            d_rho: self.rho.clone(),
            d_sigma: self.sigma.clone(),
        }
    }

    /// `(d rho / dx, d sigma / dx)`.
    pub fn partial_x(&self) -> Variation {
        Variation {
            d_rho: partial_x(&self.rho, &self.grid),
            d_sigma: partial_x(&self.sigma, &self.grid),
        }
    }
}

/// Background state on a grid: `rho = rho_bar`, `psi = sigma = 0`.
pub fn quiescent(profile: &StratificationProfile, grid: &Grid2D, c0: f64) -> WaveField {
    WaveField {
        grid: *grid,
        c0,
        c: c0,
        eps: 0.0,
        rho: grid.from_fn(|_, y| profile.density(y)),
        psi: grid.zeros(),
        sigma: grid.zeros(),
        warnings: Vec::new(),
    }
}

/// Mode, coefficients and profile needed to build waves on one vertical resolution.
#[derive(Debug, Clone)]
pub struct WaveBuilder {
    pub profile: StratificationProfile,
    pub mode: VerticalMode,
    pub coeffs: KdvCoefficients,
    /// Truncation shortfall becomes an error instead of a warning.
    pub strict: bool,
    /// Grid policy: `L = decay_widths / (k eps)`.
    pub decay_widths: f64,
}

impl WaveBuilder {
    /// Solves the vertical mode on `ny` nodes and derives the coefficients.
    pub fn new(
        profile: StratificationProfile,
        ny: usize,
        genericity_threshold: f64,
    ) -> Result<Self> {
        profile.validate(ny.max(2))?;
        let mode = solve_fundamental_mode(&profile, ny)?;
        let coeffs = compute_coefficients(&mode, &profile, genericity_threshold)?;
        Ok(Self {
            profile,
            mode,
            coeffs,
            strict: false,
            decay_widths: DECAY_WIDTHS,
        })
    }

    pub fn from_parts(
        profile: StratificationProfile,
        mode: VerticalMode,
        coeffs: KdvCoefficients,
    ) -> Self {
        Self {
            profile,
            mode,
            coeffs,
            strict: false,
            decay_widths: DECAY_WIDTHS,
        }
    }

    pub fn c0(&self) -> f64 {
        self.mode.c0
    }

    /// `L = 10 / (k eps)`, the shortest half-width that resolves the tail.
    pub fn decay_half_width(&self, eps: f64) -> f64 {
        DECAY_WIDTHS / (self.coeffs.k * eps)
    }

    /// Grid with the policy half-width for `eps` and the builder's vertical resolution.
    pub fn grid_for(&self, eps: f64, nx: usize) -> Result<Grid2D> {
        Grid2D::new(nx, self.mode.ny, self.decay_widths / (self.coeffs.k * eps))
    }

    /// Builds the wave of amplitude parameter `eps` on `grid`.
    pub fn build(&self, eps: f64, grid: &Grid2D) -> Result<WaveField> {
        if grid.ny != self.mode.ny {
            return Err(Error::param(
                "ny",
                format!(
                    "grid ny = {} differs from mode ny = {}",
                    grid.ny, self.mode.ny
                ),
            ));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::param(
                "eps",
                format!("must be non-negative, got {eps}"),
            ));
        }
        let c0 = self.mode.c0;
        if eps == 0.0 {
            return Ok(quiescent(&self.profile, grid, c0));
        }
        let mut warnings = Vec::new();
        let required = self.decay_half_width(eps);
        if grid.half_width < required * (1.0 - 1e-12) {
            if self.strict {
                return Err(Error::Truncation {
                    half_width: grid.half_width,
                    required,
                });
            }
            warnings.push(format!(
                "half-width {} below decay length {required}; tail not resolved",
                grid.half_width
            ));
        }
        let eps2 = eps * eps;
        let amp: Vec<f64> = (0..grid.nx)
            .map(|i| self.coeffs.soliton(eps * grid.x(i)))
            .collect();
        let rho_bar: Vec<f64> = (0..grid.ny)
            .map(|j| self.profile.density(grid.y(j)))
            .collect();
        let slope: Vec<f64> = (0..grid.ny)
            .map(|j| self.profile.density_slope(grid.y(j)))
            .collect();
        let phi = &self.mode.phi0;
        let mut psi = grid.zeros();
        let mut rho = grid.zeros();
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let value = eps2 * amp[i] * phi[j];
                if i > 0 && i < grid.nx - 1 {
                    psi[[i, j]] = value;
                }
                let r = rho_bar[j] - eps2 / c0 * amp[i] * slope[j] * phi[j];
                if !(r > 0.0) {
                    return Err(Error::AmplitudeTooLarge { rho: r, i, j });
                }
                rho[[i, j]] = r;
            }
        }
        let sigma = sigma_from_psi(&rho, &psi, grid);
        Ok(WaveField {
            grid: *grid,
            c0,
            c: c0 + eps2,
            eps,
            rho,
            psi,
            sigma,
            warnings,
        })
    }

    /// Wave with the speed `c0 + eps^2 + dc` on a given grid.
    fn build_at_speed(&self, c: f64, grid: &Grid2D) -> Result<WaveField> {
        let eps = (c - self.mode.c0).sqrt();
        self.build(eps, grid)
    }

    /// `(d rho / dc, d sigma / dc)` by central differencing the wave family at fixed grid.
    pub fn partial_c(&self, eps: f64, delta_c: f64, grid: &Grid2D) -> Result<Variation> {
        let eps_sq = eps * eps;
        if !(delta_c > 0.0 && delta_c < eps_sq) {
            return Err(Error::Step { delta_c, eps_sq });
        }
        let c = self.mode.c0 + eps_sq;
        let plus = self.build_at_speed(c + delta_c, grid)?;
        let minus = self.build_at_speed(c - delta_c, grid)?;
        let inv = 0.5 / delta_c;
        Ok(Variation {
            d_rho: (&plus.rho - &minus.rho) * inv,
            d_sigma: (&plus.sigma - &minus.sigma) * inv,
        })
    }

    /// Analytic `d/d(eps^2)` of the leading-order fields; cross-check for [`Self::partial_c`].
    pub fn partial_c_expansion(&self, eps: f64, grid: &Grid2D) -> Variation {
        // d/d(eps^2) [eps^2 A(eps x)] = A + (eps x / 2) A'(eps x)
        let c0 = self.mode.c0;
        let mut dpsi = grid.zeros();
        let mut drho = grid.zeros();
        for i in 1..grid.nx - 1 {
            let xx = eps * grid.x(i);
            let g = self.coeffs.soliton(xx) + 0.5 * xx * self.coeffs.soliton_slope(xx);
            for j in 0..grid.ny {
                dpsi[[i, j]] = g * self.mode.phi0[j];
            }
        }
        for i in 0..grid.nx {
            let xx = eps * grid.x(i);
            let g = self.coeffs.soliton(xx) + 0.5 * xx * self.coeffs.soliton_slope(xx);
            for j in 0..grid.ny {
                let y = grid.y(j);
                drho[[i, j]] = -g / c0 * self.profile.density_slope(y) * self.mode.phi0[j];
            }
        }
        // sigma is bilinear in (rho, psi)
        let (rho, psi) = match self.build(eps, grid) {
            Ok(w) => (w.rho, w.psi),
            Err(_) => (grid.from_fn(|_, y| self.profile.density(y)), grid.zeros()),
        };
        let d_sigma = sigma_from_psi(&rho, &dpsi, grid) + sigma_from_psi(&drho, &psi, grid);
        Variation {
            d_rho: drho,
            d_sigma,
        }
    }
}
