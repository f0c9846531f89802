//! Uniform tensor grid on `[-L, L] x [0, 1]`, nodal fields and discrete derivatives.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::trapezoid_weights;

pub const MIN_GRID_NODES: usize = 16;

/// A nodal field indexed `[[i, j]]` with `i` along x and `j` along y.
pub type Field = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub half_width: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, half_width: f64) -> Result<Self> {
        if nx < MIN_GRID_NODES {
            return Err(Error::param(
                "nx",
                format!("nx >= {MIN_GRID_NODES} required, got {nx}"),
            ));
        }
        if ny < MIN_GRID_NODES {
            return Err(Error::param(
                "ny",
                format!("ny >= {MIN_GRID_NODES} required, got {ny}"),
            ));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::param(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        Ok(Self {
            nx,
            ny,
            half_width,
            hx: 2.0 * half_width / (nx - 1) as f64,
            hy: 1.0 / (ny - 1) as f64,
        })
    }

    /// The grid with every spacing halved (`2n - 1` nodes per direction).
    pub fn refined(&self) -> Self {
        Self::new(2 * self.nx - 1, 2 * self.ny - 1, self.half_width).expect("refining a valid grid")
    }

    /// Node abscissa; exactly antisymmetric about the center node.
    pub fn x(&self, i: usize) -> f64 {
        let offset = 2.0 * i as f64 - (self.nx - 1) as f64;
        offset * (self.half_width / (self.nx - 1) as f64)
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            1.0
        } else {
            j as f64 * self.hy
        }
    }

    pub fn zeros(&self) -> Field {
        Array2::zeros((self.nx, self.ny))
    }

    pub fn from_fn(&self, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        Array2::from_shape_fn((self.nx, self.ny), |(i, j)| f(self.x(i), self.y(j)))
    }

    /// Tensor-product trapezoid weights.
    pub fn weights(&self) -> Field {
        let wx = trapezoid_weights(self.nx, self.hx);
        let wy = trapezoid_weights(self.ny, self.hy);
        Array2::from_shape_fn((self.nx, self.ny), |(i, j)| wx[i] * wy[j])
    }

    pub fn check_shape(&self, f: &Field) -> Result<()> {
        if f.dim() == (self.nx, self.ny) {
            Ok(())
        } else {
            Err(Error::param(
                "field",
                format!(
                    "shape {:?} does not match grid ({}, {})",
                    f.dim(),
                    self.nx,
                    self.ny
                ),
            ))
        }
    }
}

/// Weighted sum `sum w f`.
pub fn integrate(weights: &Field, f: &Field) -> f64 {
    let mut acc = 0.0;
    Zip::from(weights).and(f).for_each(|w, v| acc += w * v);
    acc
}

/// A `(rho, sigma)` pair on one grid: a state increment, a test direction or a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Variation {
    pub d_rho: Field,
    pub d_sigma: Field,
}

impl Variation {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            d_rho: grid.zeros(),
            d_sigma: grid.zeros(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d_rho: &self.d_rho * factor,
            d_sigma: &self.d_sigma * factor,
        }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Variation) -> Self {
        let mut out = self.clone();
        out.d_rho.scaled_add(factor, &other.d_rho);
        out.d_sigma.scaled_add(factor, &other.d_sigma);
        out
    }

    /// Max-norm over both components.
    pub fn max_norm(&self) -> f64 {
        self.d_rho
            .iter()
            .chain(self.d_sigma.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.d_rho
            .iter()
            .chain(self.d_sigma.iter())
            .all(|v| v.is_finite())
    }
}

/// Quadrature-weighted L2 pairing of the rho- and sigma-components.
pub fn pairing(grid: &Grid2D, u: &Variation, v: &Variation) -> f64 {
    let w = grid.weights();
    let mut acc = 0.0;
    Zip::from(&w)
        .and(&u.d_rho)
        .and(&v.d_rho)
        .and(&u.d_sigma)
        .and(&v.d_sigma)
        .for_each(|w, a, b, c, d| acc += w * (a * b + c * d));
    acc
}

pub fn pairing_norm(grid: &Grid2D, u: &Variation) -> f64 {
    pairing(grid, u, u).sqrt()
}

/// `(-3 f0 + 4 f1 - f2) / 2h` written in differences so constants give exactly zero.
fn one_sided(f0: f64, f1: f64, f2: f64, h: f64) -> f64 {
    (3.0 * (f1 - f0) - (f2 - f1)) / (2.0 * h)
}

/// Central difference along x, second-order one-sided at the ends.
pub fn partial_x(f: &Field, grid: &Grid2D) -> Field {
    let (nx, ny) = f.dim();
    let h = grid.hx;
    let mut d = Array2::zeros((nx, ny));
    for j in 0..ny {
        d[[0, j]] = one_sided(f[[0, j]], f[[1, j]], f[[2, j]], h);
        d[[nx - 1, j]] = -one_sided(f[[nx - 1, j]], f[[nx - 2, j]], f[[nx - 3, j]], h);
    }
    for i in 1..nx - 1 {
        for j in 0..ny {
            d[[i, j]] = (f[[i + 1, j]] - f[[i - 1, j]]) / (2.0 * h);
        }
    }
    d
}

/// Central difference along y, second-order one-sided at the ends.
pub fn partial_y(f: &Field, grid: &Grid2D) -> Field {
    let (nx, ny) = f.dim();
    let h = grid.hy;
    let mut d = Array2::zeros((nx, ny));
    for i in 0..nx {
        d[[i, 0]] = one_sided(f[[i, 0]], f[[i, 1]], f[[i, 2]], h);
        d[[i, ny - 1]] = -one_sided(f[[i, ny - 1]], f[[i, ny - 2]], f[[i, ny - 3]], h);
        for j in 1..ny - 1 {
            d[[i, j]] = (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * h);
        }
    }
    d
}

/// `sigma = -div(rho grad psi)` in flux form with arithmetic-mean face densities.
///
/// Interior nodes use the conservative three-point difference of face fluxes; boundary
/// nodes use a second-order one-sided difference of the three nearest face fluxes.
pub fn sigma_from_psi(rho: &Field, psi: &Field, grid: &Grid2D) -> Field {
    let (nx, ny) = psi.dim();
    let (hx, hy) = (grid.hx, grid.hy);
    // face fluxes: qx[i] between i and i+1, qy[j] between j and j+1
    let mut qx = Array2::zeros((nx - 1, ny));
    for i in 0..nx - 1 {
        for j in 0..ny {
            let f = 0.5 * (rho[[i, j]] + rho[[i + 1, j]]);
            qx[[i, j]] = f * (psi[[i + 1, j]] - psi[[i, j]]) / hx;
        }
    }
    let mut qy = Array2::zeros((nx, ny - 1));
    for i in 0..nx {
        for j in 0..ny - 1 {
            let f = 0.5 * (rho[[i, j]] + rho[[i, j + 1]]);
            qy[[i, j]] = f * (psi[[i, j + 1]] - psi[[i, j]]) / hy;
        }
    }
    let mut sigma = Array2::zeros((nx, ny));
    for i in 0..nx {
        for j in 0..ny {
            let dqx = if i == 0 {
                (-2.0 * qx[[0, j]] + 3.0 * qx[[1, j]] - qx[[2, j]]) / hx
            } else if i == nx - 1 {
                (2.0 * qx[[nx - 2, j]] - 3.0 * qx[[nx - 3, j]] + qx[[nx - 4, j]]) / hx
            } else {
                (qx[[i, j]] - qx[[i - 1, j]]) / hx
            };
            let dqy = if j == 0 {
                (-2.0 * qy[[i, 0]] + 3.0 * qy[[i, 1]] - qy[[i, 2]]) / hy
            } else if j == ny - 1 {
                (2.0 * qy[[i, ny - 2]] - 3.0 * qy[[i, ny - 3]] + qy[[i, ny - 4]]) / hy
            } else {
                (qy[[i, j]] - qy[[i, j - 1]]) / hy
            };
            sigma[[i, j]] = -(dqx + dqy);
        }
    }
    sigma
}

/// `1/2 sum over faces of rho_face |difference of psi|^2`, the discrete `1/2 int rho |grad psi|^2`.
///
/// For `psi` vanishing on the boundary this equals `1/2 <psi, sigma_from_psi(rho, psi)>`
/// over interior nodes exactly (summation by parts).
pub fn kinetic_energy(rho: &Field, psi: &Field, grid: &Grid2D) -> f64 {
    let (nx, ny) = psi.dim();
    let (hx, hy) = (grid.hx, grid.hy);
    let area = hx * hy;
    let mut acc = 0.0;
    for i in 0..nx - 1 {
        for j in 0..ny {
            let f = 0.5 * (rho[[i, j]] + rho[[i + 1, j]]);
            let d = (psi[[i + 1, j]] - psi[[i, j]]) / hx;
            acc += f * d * d;
        }
    }
    for i in 0..nx {
        for j in 0..ny - 1 {
            let f = 0.5 * (rho[[i, j]] + rho[[i, j + 1]]);
            let d = (psi[[i, j + 1]] - psi[[i, j]]) / hy;
            acc += f * d * d;
        }
    }
    0.5 * acc * area
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_validation() {
        assert!(Grid2D::new(8, 32, 1.0).is_err());
        assert!(Grid2D::new(32, 8, 1.0).is_err());
        assert!(Grid2D::new(32, 32, 0.0).is_err());
        let g = Grid2D::new(33, 17, 2.0).unwrap();
        assert_eq!(g.hx, 0.125);
        assert_eq!(g.hy, 1.0 / 16.0);
        assert_eq!(g.x(0), -2.0);
        assert_eq!(g.x(32), 2.0);
        assert_eq!(g.x(16), 0.0);
    }

    #[test]
    fn sigma_of_zero_is_zero() {
        let g = Grid2D::new(33, 17, 2.0).unwrap();
        let rho = g.from_fn(|_, y| 1.0 - 0.1 * y);
        let s = sigma_from_psi(&rho, &g.zeros(), &g);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    fn manufactured_error(n: usize) -> f64 {
        // rho = 1, psi = sin(pi y) G(x), G = exp(-x^2): sigma = -(G'' - pi^2 G) sin(pi y)
        let g = Grid2D::new(4 * n + 1, n + 1, 4.0).unwrap();
        let rho = g.from_fn(|_, _| 1.0);
        let psi = g.from_fn(|x, y| (PI * y).sin() * (-x * x).exp());
        let s = sigma_from_psi(&rho, &psi, &g);
        let mut err: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                let (x, y) = (g.x(i), g.y(j));
                let gx = (-x * x).exp();
                let g2 = (4.0 * x * x - 2.0) * gx;
                let exact = -(g2 - PI * PI * gx) * (PI * y).sin();
                err = err.max((s[[i, j]] - exact).abs());
            }
        }
        err
    }

    #[test]
    fn sigma_manufactured_second_order() {
        let (e1, e2) = (manufactured_error(32), manufactured_error(64));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio = {ratio}");
    }

    #[test]
    fn summation_by_parts_identity() {
        let g = Grid2D::new(65, 33, 3.0).unwrap();
        let rho = g.from_fn(|x, y| 1.0 - 0.2 * y + 0.01 * (-x * x).exp());
        let mut psi = g.from_fn(|x, y| (PI * y).sin() * (-x * x).exp() * (1.0 + y));
        for j in 0..g.ny {
            psi[[0, j]] = 0.0;
            psi[[g.nx - 1, j]] = 0.0;
        }
        let sigma = sigma_from_psi(&rho, &psi, &g);
        let mut inner = 0.0;
        for i in 1..g.nx - 1 {
            for j in 1..g.ny - 1 {
                inner += psi[[i, j]] * sigma[[i, j]];
            }
        }
        inner *= g.hx * g.hy;
        let t = kinetic_energy(&rho, &psi, &g);
        assert!((0.5 * inner - t).abs() < 1e-13 * t.abs());
    }

    #[test]
    fn discrete_divergence_theorem() {
        // compactly supported psi: interior sum of sigma vanishes up to the boundary flux
        let g = Grid2D::new(81, 41, 4.0).unwrap();
        let rho = g.from_fn(|_, y| 1.0 - 0.3 * y);
        let bump = |t: f64| {
            if t.abs() < 1.0 {
                (1.0 - t * t).powi(4)
            } else {
                0.0
            }
        };
        let psi = g.from_fn(|x, y| bump(x / 2.0) * bump((y - 0.5) / 0.3));
        let s = sigma_from_psi(&rho, &psi, &g);
        let total: f64 = s.iter().sum::<f64>() * g.hx * g.hy;
        let scale: f64 = s.iter().map(|v| v.abs()).sum::<f64>() * g.hx * g.hy;
        assert!(total.abs() < 1e-12 * scale);
    }

    #[test]
    fn partial_x_symmetry() {
        let g = Grid2D::new(65, 17, 3.0).unwrap();
        let f = g.from_fn(|x, y| (-x * x).exp() * y);
        let d = partial_x(&f, &g);
        for j in 0..g.ny {
            assert!(d[[32, j]].abs() < 1e-15);
            for i in 0..g.nx {
                assert!((d[[i, j]] + d[[g.nx - 1 - i, j]]).abs() < 1e-12);
            }
        }
    }
}
