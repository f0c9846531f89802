//! Long-wave vertical modes: `(rho phi')' = (g / c0^2) rho' phi` with `phi(0) = phi(1) = 0`.
//!
//! The operator is discretized in flux form with arithmetic-mean face densities on a
//! uniform grid. With `lambda = g / c0^2` this is the symmetric-definite pencil
//! `A v = lambda B v`, `B = diag(-rho')`, reduced to a symmetric tridiagonal matrix and
//! solved by Sturm-sequence bisection plus inverse iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, simpson_weights};
use crate::stratification::StratificationProfile;

pub const MIN_MODE_NODES: usize = 16;

/// Sampled eigenpair of the vertical mode problem.
///
/// `phi0` is normalized to `max |phi0| = 1` with a positive extremum.
#[derive(Debug, Clone, Serialize)]
pub struct VerticalMode {
    pub c0: f64,
    /// `g / c0^2`.
    pub lambda: f64,
    pub phi0: Vec<f64>,
    pub phi0_prime: Vec<f64>,
    pub ny: usize,
    pub mode_index: usize,
}

impl VerticalMode {
    pub fn spacing(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.ny).map(move |j| j as f64 * h)
    }
}

/// Which finite-difference form of the mode operator a residual uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// The solver's own conservative form; the discrete eigenvector satisfies it exactly.
    Flux,
    /// `rho phi'' + rho' phi'` with analytic coefficients; an independent discretization.
    Expanded,
}

/// The reduced symmetric tridiagonal `B^{-1/2} A B^{-1/2}` on interior nodes.
struct Pencil {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// `sqrt(-rho')` on interior nodes.
    weight_sqrt: Vec<f64>,
}

fn face_densities(profile: &StratificationProfile, ny: usize) -> Vec<f64> {
    let h = 1.0 / (ny - 1) as f64;
    (0..ny - 1)
        .map(|j| 0.5 * (profile.density(j as f64 * h) + profile.density((j + 1) as f64 * h)))
        .collect()
}

impl Pencil {
    fn assemble(profile: &StratificationProfile, ny: usize) -> Result<Self> {
        if ny < MIN_MODE_NODES {
            return Err(Error::param(
                "ny",
                format!("ny >= {MIN_MODE_NODES} required, got {ny}"),
            ));
        }
        let h = 1.0 / (ny - 1) as f64;
        let h2 = h * h;
        let faces = face_densities(profile, ny);
        let n = ny - 2;
        let mut weight_sqrt = Vec::with_capacity(n);
        for j in 1..=n {
            let b = -profile.density_slope(j as f64 * h);
            if !(b > 0.0) {
                return Err(Error::Profile {
                    invariant: "strictly decreasing density",
                    y: j as f64 * h,
                    value: -b,
                });
            }
            weight_sqrt.push(b.sqrt());
        }
        let diag = (0..n)
            .map(|k| (faces[k] + faces[k + 1]) / (h2 * weight_sqrt[k] * weight_sqrt[k]))
            .collect();
        let off = (0..n - 1)
            .map(|k| -faces[k + 1] / (h2 * weight_sqrt[k] * weight_sqrt[k + 1]))
            .collect();
        Ok(Self {
            diag,
            off,
            weight_sqrt,
        })
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x`.
    fn sturm_count(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for k in 1..self.len() {
            let denom = if q == 0.0 {
                f64::EPSILON * self.off[k - 1].abs().max(1.0)
            } else {
                q
            };
            q = self.diag[k] - x - self.off[k - 1] * self.off[k - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            let r = if k > 0 { self.off[k - 1].abs() } else { 0.0 }
                + if k + 1 < n { self.off[k].abs() } else { 0.0 };
            lo = lo.min(self.diag[k] - r);
            hi = hi.max(self.diag[k] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Inverse iteration for the eigenvector of `lambda`.
    fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let shift = lambda * (1.0 - 4.0 * f64::EPSILON) - f64::MIN_POSITIVE;
        let mut v: Vec<f64> = (0..n)
            .map(|k| 1.0 + 0.01 * ((k * 7919) % 13) as f64)
            .collect();
        for _ in 0..4 {
            v = solve_shifted(&self.diag, &self.off, shift, &v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Numerical("inverse iteration diverged".into()));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Thomas elimination of `(T - shift I) x = rhs` for symmetric tridiagonal `T`.
fn solve_shifted(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let tiny = 1e-300;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0] - shift;
    if piv.abs() < tiny {
        piv = tiny;
    }
    c[0] = if n > 1 { off[0] / piv } else { 0.0 };
    d[0] = rhs[0] / piv;
    for k in 1..n {
        piv = diag[k] - shift - off[k - 1] * c[k - 1];
        if piv.abs() < tiny {
            piv = tiny;
        }
        c[k] = if k + 1 < n { off[k] / piv } else { 0.0 };
        d[k] = (rhs[k] - off[k - 1] * d[k - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

fn sign_changes(v: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &x in v {
        if x == 0.0 {
            continue;
        }
        if last != 0.0 && (x > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = x;
    }
    count
}

/// Second-order derivative samples, one-sided at the ends.
pub(crate) fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * h);
    }
    d
}

/// The `count` smallest values of `lambda = g / c^2` of the discrete pencil.
pub fn generalized_eigenvalues(
    profile: &StratificationProfile,
    ny: usize,
    count: usize,
) -> Result<Vec<f64>> {
    let pencil = Pencil::assemble(profile, ny)?;
    Ok((0..count.min(pencil.len()))
        .map(|k| pencil.eigenvalue(k))
        .collect())
}

/// Solves for the fundamental (no interior zero) mode.
pub fn solve_fundamental_mode(profile: &StratificationProfile, ny: usize) -> Result<VerticalMode> {
    solve_mode(profile, ny, 1)
}

/// Solves for the mode with `mode_index - 1` interior zeros.
///
/// Eigenpairs are scanned upward from the smallest `lambda`; the first eigenvector with
/// the requested zero count is taken.
pub fn solve_mode(
    profile: &StratificationProfile,
    ny: usize,
    mode_index: usize,
) -> Result<VerticalMode> {
    if mode_index == 0 {
        return Err(Error::param("mode_index", "must be >= 1"));
    }
    let pencil = Pencil::assemble(profile, ny)?;
    let scan = (mode_index + 2).min(pencil.len());
    for k in 0..scan {
        let lambda = pencil.eigenvalue(k);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Solver(format!("non-positive eigenvalue {lambda}")));
        }
        let w = pencil.eigenvector(lambda)?;
        let interior: Vec<f64> = w
            .iter()
            .zip(&pencil.weight_sqrt)
            .map(|(w, s)| w / s)
            .collect();
        if sign_changes(&interior) != mode_index - 1 {
            continue;
        }
        let mut phi0 = Vec::with_capacity(ny);
        phi0.push(0.0);
        phi0.extend_from_slice(&interior);
        phi0.push(0.0);
        let (idx, _) = phi0
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        let scale = phi0[idx];
        phi0.iter_mut().for_each(|v| *v /= scale);
        phi0[0] = 0.0;
        phi0[ny - 1] = 0.0;
        let h = 1.0 / (ny - 1) as f64;
        let phi0_prime = derivative(&phi0, h);
        return Ok(VerticalMode {
            c0: (profile.g / lambda).sqrt(),
            lambda,
            phi0,
            phi0_prime,
            ny,
            mode_index,
        });
    }
    Err(Error::Solver(format!(
        "no eigenvector with {} interior zeros among the {scan} smallest eigenvalues",
        mode_index - 1
    )))
}

/// `int_0^1 rho phi0^3 dy` (composite Simpson).
pub fn genericity_integral(mode: &VerticalMode, profile: &StratificationProfile) -> f64 {
    let w = simpson_weights(mode.ny, mode.spacing());
    let v: Vec<f64> = mode
        .heights()
        .zip(&mode.phi0)
        .map(|(y, p)| profile.density(y) * p * p * p)
        .collect();
    integrate(&w, &v)
}

/// Relative max-norm residual of `(rho phi')' - lambda rho' phi` on interior nodes.
pub fn mode_residual(
    mode: &VerticalMode,
    profile: &StratificationProfile,
    stencil: Stencil,
) -> f64 {
    operator_residual(profile, mode.lambda, &mode.phi0, stencil)
}

/// Residual of an arbitrary sample vector (endpoints included) against the mode operator.
pub fn operator_residual(
    profile: &StratificationProfile,
    lambda: f64,
    values: &[f64],
    stencil: Stencil,
) -> f64 {
    let ny = values.len();
    let h = 1.0 / (ny - 1) as f64;
    let faces = face_densities(profile, ny);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 1..ny - 1 {
        let y = j as f64 * h;
        let rhs = lambda * profile.density_slope(y) * values[j];
        let lhs = match stencil {
            Stencil::Flux => {
                (faces[j] * (values[j + 1] - values[j])
                    - faces[j - 1] * (values[j] - values[j - 1]))
                    / (h * h)
            }
            Stencil::Expanded => {
                profile.density(y) * (values[j + 1] - 2.0 * values[j] + values[j - 1]) / (h * h)
                    + profile.density_slope(y) * (values[j + 1] - values[j - 1]) / (2.0 * h)
            }
        };
        worst = worst.max((lhs - rhs).abs());
        scale = scale.max(rhs.abs());
    }
    worst / scale.max(f64::MIN_POSITIVE)
}
