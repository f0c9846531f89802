//! Solver for `-div(rho grad psi) = sigma` with `psi = 0` on the whole boundary.
//!
//! Preconditioned conjugate gradients on interior nodes. The preconditioner is the exact
//! inverse of the operator for the background density `rho(y)`: a sine transform in x
//! diagonalizes the horizontal part, leaving one tridiagonal solve in y per wavenumber.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Field, Grid2D};
use crate::stratification::StratificationProfile;

const RELATIVE_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 500;

pub struct EllipticSolver {
    grid: Grid2D,
    fft: Arc<dyn Fft<f64>>,
    /// Per-wavenumber Thomas factors: `upper[k][j]`, `inv_pivot[k][j]` over interior j.
    upper: Vec<Vec<f64>>,
    inv_pivot: Vec<Vec<f64>>,
    lower: Vec<f64>,
}

/// Outcome of one solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub psi: Field,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl EllipticSolver {
    pub fn new(grid: &Grid2D, profile: &StratificationProfile) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let m = nx - 2;
        let n = ny - 2;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (m + 1));
        let rho: Vec<f64> = (0..ny).map(|j| profile.density(grid.y(j))).collect();
        let faces: Vec<f64> = (0..ny - 1).map(|j| 0.5 * (rho[j] + rho[j + 1])).collect();
        let hy2 = grid.hy * grid.hy;
        let hx2 = grid.hx * grid.hx;
        // off-diagonal couples interior j and j+1 through face j+1
        let lower: Vec<f64> = (0..n.saturating_sub(1))
            .map(|t| -faces[t + 1] / hy2)
            .collect();
        let mut upper = Vec::with_capacity(m);
        let mut inv_pivot = Vec::with_capacity(m);
        for k in 1..=m {
            let s = (std::f64::consts::PI * k as f64 / (2.0 * (m + 1) as f64)).sin();
            let mu = 4.0 * s * s / hx2;
            let mut up = vec![0.0; n];
            let mut ip = vec![0.0; n];
            let mut prev_up = 0.0;
            for t in 0..n {
                let j = t + 1;
                let diag = rho[j] * mu + (faces[j - 1] + faces[j]) / hy2;
                let sub = if t > 0 { lower[t - 1] } else { 0.0 };
                let piv = diag - sub * prev_up;
                ip[t] = 1.0 / piv;
                up[t] = if t + 1 < n { lower[t] / piv } else { 0.0 };
                prev_up = up[t];
            }
            upper.push(up);
            inv_pivot.push(ip);
        }
        Self {
            grid: *grid,
            fft,
            upper,
            inv_pivot,
            lower,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// In-place DST-I along x of every interior row.
    fn sine_transform(&self, data: &mut Array2<f64>, scale: f64) {
        let (nx, ny) = data.dim();
        let m = nx - 2;
        let len = 2 * (m + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for j in 1..ny - 1 {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for n in 1..=m {
                let v = data[[n, j]];
                buf[n] = Complex::new(v, 0.0);
                buf[len - n] = Complex::new(-v, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 1..=m {
                data[[k, j]] = -0.5 * buf[k].im * scale;
            }
        }
    }

    /// Exact inverse of the background-density operator on interior nodes.
    fn precondition(&self, r: &Field) -> Field {
        let (nx, ny) = r.dim();
        let m = nx - 2;
        let n = ny - 2;
        let mut z = r.clone();
        self.sine_transform(&mut z, 1.0);
        let mut d = vec![0.0; n];
        for k in 1..=m {
            let up = &self.upper[k - 1];
            let ip = &self.inv_pivot[k - 1];
            for t in 0..n {
                let sub = if t > 0 {
                    self.lower[t - 1] * d[t - 1]
                } else {
                    0.0
                };
                d[t] = (z[[k, t + 1]] - sub) * ip[t];
            }
            for t in (0..n.saturating_sub(1)).rev() {
                d[t] -= up[t] * d[t + 1];
            }
            for t in 0..n {
                z[[k, t + 1]] = d[t];
            }
        }
        self.sine_transform(&mut z, 2.0 / (m + 1) as f64);
        clear_boundary(&mut z);
        z
    }

    /// Solves `L_rho psi = sigma` on interior nodes, starting from `guess` when given.
    pub fn solve(&self, rho: &Field, sigma: &Field, guess: Option<&Field>) -> Result<Solution> {
        self.grid.check_shape(rho)?;
        self.grid.check_shape(sigma)?;
        let op = FluxOperator::new(rho, &self.grid);
        let mut b = sigma.clone();
        clear_boundary(&mut b);
        let b_norm = dot(&b, &b).sqrt();
        let mut x = match guess {
            Some(g) => {
                let mut g = g.clone();
                clear_boundary(&mut g);
                g
            }
            None => self.grid.zeros(),
        };
        if b_norm == 0.0 {
            return Ok(Solution {
                psi: self.grid.zeros(),
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let mut r = &b - &op.apply(&x);
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut best = dot(&r, &r).sqrt() / b_norm;
        let mut iterations = 0;
        let mut stalls = 0;
        while best > RELATIVE_TOLERANCE && iterations < MAX_ITERATIONS {
            let ap = op.apply(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Numerical(format!(
                    "operator not positive definite (p.Ap = {pap})"
                )));
            }
            let alpha = rz / pap;
            x.scaled_add(alpha, &p);
            r.scaled_add(-alpha, &ap);
            iterations += 1;
            let res = dot(&r, &r).sqrt() / b_norm;
            if res < 0.5 * best {
                stalls = 0;
            } else {
                stalls += 1;
            }
            best = best.min(res);
            if stalls > 8 {
                break;
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p = &z + &(&p * beta);
        }
        if !(best < 1e-8) {
            return Err(Error::Numerical(format!(
                "conjugate gradients stalled at relative residual {best:e}"
            )));
        }
        Ok(Solution {
            psi: x,
            iterations,
            relative_residual: best,
        })
    }
}

fn clear_boundary(f: &mut Field) {
    let (nx, ny) = f.dim();
    for i in 0..nx {
        f[[i, 0]] = 0.0;
        f[[i, ny - 1]] = 0.0;
    }
    for j in 0..ny {
        f[[0, j]] = 0.0;
        f[[nx - 1, j]] = 0.0;
    }
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `-div(rho grad .)` restricted to interior nodes (boundary rows map to zero).
pub(crate) struct FluxOperator {
    fx: Array2<f64>,
    fy: Array2<f64>,
    hx2: f64,
    hy2: f64,
}

impl FluxOperator {
    pub(crate) fn new(rho: &Field, grid: &Grid2D) -> Self {
        let (nx, ny) = rho.dim();
        let fx =
            Array2::from_shape_fn((nx - 1, ny), |(i, j)| 0.5 * (rho[[i, j]] + rho[[i + 1, j]]));
        let fy =
            Array2::from_shape_fn((nx, ny - 1), |(i, j)| 0.5 * (rho[[i, j]] + rho[[i, j + 1]]));
        Self {
            fx,
            fy,
            hx2: grid.hx * grid.hx,
            hy2: grid.hy * grid.hy,
        }
    }

    pub(crate) fn apply(&self, psi: &Field) -> Field {
        let (nx, ny) = psi.dim();
        let mut out = Array2::zeros((nx, ny));
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let c = psi[[i, j]];
                let ax = self.fx[[i, j]] * (psi[[i + 1, j]] - c)
                    - self.fx[[i - 1, j]] * (c - psi[[i - 1, j]]);
                let ay = self.fy[[i, j]] * (psi[[i, j + 1]] - c)
                    - self.fy[[i, j - 1]] * (c - psi[[i, j - 1]]);
                out[[i, j]] = -(ax / self.hx2 + ay / self.hy2);
            }
        }
        out
    }
}
