//! Energy, momentum and Casimir functionals on gridded states, with finite-difference
//! first and second variations and the skew operator `J`.
//!
//! A state is the pair `(rho, sigma)`; `psi` is recovered from `sigma = -div(rho grad psi)`.
//! For perturbed states the kinetic energy is taken in the stationary form
//! `T = <sigma, psi> - T_face(rho, psi)`, whose error is quadratic in the solve error.

use std::fmt;
use std::str::FromStr;

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::elliptic::EllipticSolver;
use crate::error::{Error, Result};
use crate::field::{kinetic_energy, partial_x, partial_y, Field, Grid2D, Variation};
use crate::stratification::StratificationProfile;
use crate::wavefields::WaveField;

/// Which functional a probe differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    H,
    I,
    #[serde(rename = "h-minus-ci")]
    HMinusCI,
    Htilde,
    Itilde,
}

impl Selector {
    pub const ALL: [Selector; 5] = [
        Selector::H,
        Selector::I,
        Selector::HMinusCI,
        Selector::Htilde,
        Selector::Itilde,
    ];

    fn needs_kinetic(self) -> bool {
        !matches!(self, Selector::I | Selector::Itilde)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Selector::H => "h",
            Selector::I => "i",
            Selector::HMinusCI => "h-minus-ci",
            Selector::Htilde => "htilde",
            Selector::Itilde => "itilde",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|sel| sel.as_str() == s)
            .ok_or_else(|| Error::param("selector", format!("unknown functional `{s}`")))
    }
}

/// Form of the Casimir part of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CasimirForm {
    /// `dH = -g int F(rho, y)`.
    #[default]
    SigmaFree,
    /// `dH = -g int F(rho, y) sigma`; debug variant, not a Casimir of the bracket.
    SigmaWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalValues {
    pub htilde: f64,
    pub itilde: f64,
    pub dh: f64,
    pub di: f64,
    pub h: f64,
    pub i: f64,
    /// `H - c I`, assembled as `T + g int W - c int (y - rho^{-1}(rho)) sigma` in the
    /// sigma-free form to avoid cancellation.
    pub m: f64,
    pub c: f64,
}

impl FunctionalValues {
    pub fn select(&self, selector: Selector) -> f64 {
        match selector {
            Selector::H => self.h,
            Selector::I => self.i,
            Selector::HMinusCI => self.m,
            Selector::Htilde => self.htilde,
            Selector::Itilde => self.itilde,
        }
    }
}

pub struct Functionals {
    profile: StratificationProfile,
    grid: Grid2D,
    form: CasimirForm,
    solver: EllipticSolver,
    weights: Field,
}

impl Functionals {
    pub fn new(profile: &StratificationProfile, grid: &Grid2D, form: CasimirForm) -> Self {
        Self {
            profile: *profile,
            grid: *grid,
            form,
            solver: EllipticSolver::new(grid, profile),
            weights: grid.weights(),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn profile(&self) -> &StratificationProfile {
        &self.profile
    }

    pub fn form(&self) -> CasimirForm {
        self.form
    }

    fn check_wave(&self, wave: &WaveField) -> Result<()> {
        if wave.grid != self.grid {
            return Err(Error::param(
                "grid",
                "wave grid differs from the functional grid",
            ));
        }
        Ok(())
    }

    /// All functionals at the wave, using its own `psi`.
    pub fn evaluate(&self, wave: &WaveField) -> Result<FunctionalValues> {
        self.check_wave(wave)?;
        let t = kinetic_energy(&wave.rho, &wave.psi, &self.grid);
        self.assemble(&wave.rho, &wave.sigma, t, wave.c)
    }

    /// All functionals at an arbitrary state; `psi` is solved for, warm-started from `guess`.
    pub fn evaluate_state(
        &self,
        rho: &Field,
        sigma: &Field,
        c: f64,
        guess: Option<&Field>,
    ) -> Result<FunctionalValues> {
        let t = self.stationary_kinetic(rho, sigma, guess)?;
        self.assemble(rho, sigma, t, c)
    }

    fn stationary_kinetic(&self, rho: &Field, sigma: &Field, guess: Option<&Field>) -> Result<f64> {
        let sol = self.solver.solve(rho, sigma, guess)?;
        let mut inner = 0.0;
        Zip::from(&self.weights)
            .and(sigma)
            .and(&sol.psi)
            .for_each(|w, s, p| inner += w * s * p);
        Ok(inner - kinetic_energy(rho, &sol.psi, &self.grid))
    }

    fn assemble(
        &self,
        rho: &Field,
        sigma: &Field,
        kinetic: f64,
        c: f64,
    ) -> Result<FunctionalValues> {
        self.grid.check_shape(rho)?;
        self.grid.check_shape(sigma)?;
        let g = self.profile.g;
        let (mut pot, mut w_sum, mut f_sum, mut y_sigma, mut q_sigma, mut off_sigma) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..self.grid.ny {
            let y = self.grid.y(j);
            let base = self.profile.density(y);
            for i in 0..self.grid.nx {
                let w = self.weights[[i, j]];
                let (r, s) = (rho[[i, j]], sigma[[i, j]]);
                let offset = self.profile.height_offset(r, y)?;
                let cas = self.profile.casimir_potential(r, y)?;
                let prim = y * (r - base) - cas;
                pot += w * y * (r - base);
                w_sum += w * cas;
                f_sum += w * match self.form {
                    CasimirForm::SigmaFree => prim,
                    CasimirForm::SigmaWeighted => prim * s,
                };
                y_sigma += w * y * s;
                q_sigma += w * (y - offset) * s;
                off_sigma += w * offset * s;
            }
        }
        let htilde = kinetic + g * pot;
        let dh = 0.0 - g * f_sum;
        let di = 0.0 - q_sigma;
        let i = off_sigma;
        let h = match self.form {
            CasimirForm::SigmaFree => kinetic + g * w_sum,
            CasimirForm::SigmaWeighted => htilde + dh,
        };
        Ok(FunctionalValues {
            htilde,
            itilde: y_sigma,
            dh,
            di,
            h,
            i,
            m: h - c * i,
            c,
        })
    }

    fn value_at(&self, selector: Selector, wave: &WaveField, shift: &Variation) -> Result<f64> {
        let rho = &wave.rho + &shift.d_rho;
        let sigma = &wave.sigma + &shift.d_sigma;
        let t = if selector.needs_kinetic() {
            self.stationary_kinetic(&rho, &sigma, Some(&wave.psi))?
        } else {
            0.0
        };
        Ok(self.assemble(&rho, &sigma, t, wave.c)?.select(selector))
    }

    fn check_step(h: f64) -> Result<()> {
        if h > 0.0 && h.is_finite() {
            Ok(())
        } else {
            Err(Error::param(
                "h",
                format!("probe step must be positive, got {h}"),
            ))
        }
    }

    /// Central difference `(F(phi + h eta) - F(phi - h eta)) / 2h`.
    pub fn gateaux(
        &self,
        selector: Selector,
        wave: &WaveField,
        eta: &Variation,
        h: f64,
    ) -> Result<f64> {
        self.check_wave(wave)?;
        Self::check_step(h)?;
        let plus = self.value_at(selector, wave, &eta.scaled(h))?;
        let minus = self.value_at(selector, wave, &eta.scaled(-h))?;
        Ok((plus - minus) / (2.0 * h))
    }

    /// Four-corner estimate of `<eta, F'' zeta>`.
    pub fn hessian_bilinear(
        &self,
        selector: Selector,
        wave: &WaveField,
        eta: &Variation,
        zeta: &Variation,
        h: f64,
    ) -> Result<f64> {
        self.check_wave(wave)?;
        Self::check_step(h)?;
        let corner = |a: f64, b: f64| {
            let shift = eta.scaled(a * h).axpy(b * h, zeta);
            self.value_at(selector, wave, &shift)
        };
        let pp = corner(1.0, 1.0)?;
        let pm = corner(1.0, -1.0)?;
        let mp = corner(-1.0, 1.0)?;
        let mm = corner(-1.0, -1.0)?;
        Ok(((pp - pm) - (mp - mm)) / (4.0 * h * h))
    }

    /// `I'(phi) = (-sigma / rho_bar'(rho_bar^{-1}(rho)), y - rho_bar^{-1}(rho))`.
    pub fn first_variation_i(&self, wave: &WaveField) -> Result<Variation> {
        self.check_wave(wave)?;
        let mut out = Variation::zeros(&self.grid);
        for i in 0..self.grid.nx {
            for j in 0..self.grid.ny {
                let y = self.grid.y(j);
                let (r, s) = (wave.rho[[i, j]], wave.sigma[[i, j]]);
                out.d_rho[[i, j]] = 0.0 - s * self.profile.inverse_density_slope(r)?;
                out.d_sigma[[i, j]] = self.profile.height_offset(r, y)?;
            }
        }
        Ok(out)
    }

    /// `(1/c) int rho |grad psi|^2` with the face-form gradient.
    pub fn momentum_kinetic_form(&self, wave: &WaveField) -> Result<f64> {
        self.check_wave(wave)?;
        if !(wave.c > 0.0) {
            return Err(Error::param("c", "wave speed must be positive"));
        }
        Ok(2.0 * kinetic_energy(&wave.rho, &wave.psi, &self.grid) / wave.c)
    }
}

/// Action of the state-dependent skew operator on `v = (a, b)`:
/// `(rho_y b_x - rho_x b_y, rho_y a_x - rho_x a_y + sigma_y b_x - sigma_x b_y)`.
pub fn apply_j(wave: &WaveField, v: &Variation) -> Variation {
    let g = &wave.grid;
    let (rx, ry) = (partial_x(&wave.rho, g), partial_y(&wave.rho, g));
    let (sx, sy) = (partial_x(&wave.sigma, g), partial_y(&wave.sigma, g));
    let (ax, ay) = (partial_x(&v.d_rho, g), partial_y(&v.d_rho, g));
    let (bx, by) = (partial_x(&v.d_sigma, g), partial_y(&v.d_sigma, g));
    let d_rho = &ry * &bx - &rx * &by;
    let d_sigma = &ry * &ax - &rx * &ay + &sy * &bx - &sx * &by;
    Variation { d_rho, d_sigma }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::pairing;
    use crate::kdv::DEFAULT_GENERICITY_THRESHOLD;
    use crate::wavefields::{quiescent, WaveBuilder};
    use std::f64::consts::PI;

    fn profile() -> StratificationProfile {
        StratificationProfile::exponential(1.0, 1.0, 1.0)
    }

    fn setup(eps: f64, nx: usize, ny: usize) -> (WaveBuilder, WaveField, Functionals) {
        let b = WaveBuilder::new(profile(), ny, DEFAULT_GENERICITY_THRESHOLD).unwrap();
        let g = b.grid_for(eps, nx).unwrap();
        let w = b.build(eps, &g).unwrap();
        let f = Functionals::new(&b.profile, &g, CasimirForm::SigmaFree);
        (b, w, f)
    }

    fn bump(grid: &Grid2D, x0: f64, width: f64, m: f64, a: f64, b: f64) -> Variation {
        let shape = |x: f64, y: f64| (-((x - x0) / width).powi(2)).exp() * (m * PI * y).sin();
        Variation {
            d_rho: grid.from_fn(|x, y| a * shape(x, y)),
            d_sigma: grid.from_fn(|x, y| b * shape(x, y)),
        }
    }

    #[test]
    fn quiescent_annihilates_everything() {
        let p = profile();
        let g = Grid2D::new(65, 33, 20.0).unwrap();
        let q = quiescent(&p, &g, 0.3);
        for form in [CasimirForm::SigmaFree, CasimirForm::SigmaWeighted] {
            let f = Functionals::new(&p, &g, form);
            for v in [
                f.evaluate(&q).unwrap(),
                f.evaluate_state(&q.rho, &q.sigma, q.c, None).unwrap(),
            ] {
                for x in [v.htilde, v.itilde, v.dh, v.di, v.h, v.i, v.m] {
                    assert_eq!(x, 0.0);
                }
            }
            let iv = f.first_variation_i(&q).unwrap();
            assert_eq!(iv.max_norm(), 0.0);
        }
    }

    #[test]
    fn definitional_identities() {
        let (_, w, f) = setup(0.1, 257, 65);
        let v = f.evaluate(&w).unwrap();
        let scale = v.htilde.abs() + v.dh.abs() + v.c * (v.itilde.abs() + v.di.abs());
        assert!((v.h - (v.htilde + v.dh)).abs() < 1e-13 * scale);
        assert!((v.i - (v.itilde + v.di)).abs() < 1e-13 * scale);
        assert!((v.m - (v.h - v.c * v.i)).abs() < 1e-13 * scale);
    }

    #[test]
    fn stationary_kinetic_matches_direct() {
        let (_, w, f) = setup(0.1, 257, 65);
        let a = f.evaluate(&w).unwrap();
        let b = f.evaluate_state(&w.rho, &w.sigma, w.c, None).unwrap();
        assert!((a.h - b.h).abs() < 1e-12 * a.h.abs());
        assert_eq!(a.i, b.i);
    }

    #[test]
    fn momentum_at_crest_scale() {
        let (b, w, f) = setup(0.1, 513, 129);
        let v = f.evaluate(&w).unwrap();
        let k = b.coeffs.instability;
        let rel = (v.i - k * 1e-3).abs() / (k * 1e-3);
        assert!(rel < 0.05, "I = {}, K eps^3 = {}", v.i, k * 1e-3);
    }

    #[test]
    fn momentum_kinetic_form_linear_in_rho() {
        let (_, mut w, f) = setup(0.1, 129, 33);
        let base = f.momentum_kinetic_form(&w).unwrap();
        w.rho *= 2.0;
        let doubled = f.momentum_kinetic_form(&w).unwrap();
        assert!((doubled - 2.0 * base).abs() < 1e-14 * base);
    }

    #[test]
    fn momentum_linear_in_sigma() {
        let (_, w, f) = setup(0.1, 129, 33);
        let mut eta = bump(&w.grid, 1.0, 5.0, 2.0, 0.0, 1.0);
        eta.d_rho.fill(0.0);
        let iv = f.first_variation_i(&w).unwrap();
        let exact = pairing(&w.grid, &iv, &eta);
        for h in [1e-2, 1e-4] {
            let d = f.gateaux(Selector::I, &w, &eta, h).unwrap();
            // exact up to cancellation round-off eps_mach |I| / h
            assert!((d - exact).abs() < 1e-9 * exact.abs(), "{d} vs {exact}");
        }
    }

    #[test]
    fn first_variation_matches_gateaux_in_rho() {
        let (_, w, f) = setup(0.1, 129, 33);
        let mut eta = bump(&w.grid, -2.0, 6.0, 1.0, 0.02, 0.0);
        eta.d_sigma.fill(0.0);
        let iv = f.first_variation_i(&w).unwrap();
        let exact = pairing(&w.grid, &iv, &eta);
        let e1 = (f.gateaux(Selector::I, &w, &eta, 0.2).unwrap() - exact).abs();
        let e2 = (f.gateaux(Selector::I, &w, &eta, 0.1).unwrap() - exact).abs();
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn first_variation_sigma_part_is_displacement() {
        // y - rho^{-1}(rho) = psi / c + O(eps^4)
        let b = WaveBuilder::new(profile(), 65, DEFAULT_GENERICITY_THRESHOLD).unwrap();
        let mut errs = Vec::new();
        for eps in [0.1, 0.05] {
            let g = b.grid_for(eps, 129).unwrap();
            let w = b.build(eps, &g).unwrap();
            let f = Functionals::new(&b.profile, &g, CasimirForm::SigmaFree);
            let iv = f.first_variation_i(&w).unwrap();
            let d = &iv.d_sigma - &(&w.psi / w.c);
            errs.push(d.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.5, "order {order}");
    }

    #[test]
    fn gateaux_richardson() {
        let (_, w, f) = setup(0.1, 129, 33);
        let eta = bump(&w.grid, 1.0, 8.0, 1.0, 0.5, -1.0);
        let d = |h| f.gateaux(Selector::Htilde, &w, &eta, h).unwrap();
        let (d1, d2, d4) = (d(0.04), d(0.02), d(0.01));
        let ratio = (d1 - d2) / (d2 - d4);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn hessian_symmetric_and_matches_analytic_momentum() {
        let (_, w, f) = setup(0.1, 129, 33);
        let eta = bump(&w.grid, 1.0, 6.0, 1.0, 0.5, 1.0);
        let zeta = bump(&w.grid, -1.0, 4.0, 2.0, -0.7, 0.6);
        let a = f
            .hessian_bilinear(Selector::HMinusCI, &w, &eta, &zeta, 1e-3)
            .unwrap();
        let b = f
            .hessian_bilinear(Selector::HMinusCI, &w, &zeta, &eta, 1e-3)
            .unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs());

        // <eta, I'' zeta> = -int [Q''(rho) sigma a_r z_r + Q'(rho)(a_r z_s + z_r a_s)]
        let p = profile();
        let mut exact = 0.0;
        let wts = w.grid.weights();
        for i in 0..w.grid.nx {
            for j in 0..w.grid.ny {
                let r = w.rho[[i, j]];
                let q1 = p.inverse_density_slope(r).unwrap();
                let q2 = p.inverse_density_curvature(r).unwrap();
                let (er, es, zr, zs) = (
                    eta.d_rho[[i, j]],
                    eta.d_sigma[[i, j]],
                    zeta.d_rho[[i, j]],
                    zeta.d_sigma[[i, j]],
                );
                exact -= wts[[i, j]] * (q2 * w.sigma[[i, j]] * er * zr + q1 * (er * zs + zr * es));
            }
        }
        let fd = f
            .hessian_bilinear(Selector::I, &w, &eta, &zeta, 1e-3)
            .unwrap();
        assert!((fd - exact).abs() < 1e-5 * exact.abs(), "{fd} vs {exact}");
    }

    #[test]
    fn sigma_weighted_form_differs() {
        let (_, w, f) = setup(0.1, 129, 33);
        let weighted = Functionals::new(&profile(), &w.grid, CasimirForm::SigmaWeighted);
        let a = f.evaluate(&w).unwrap();
        let b = weighted.evaluate(&w).unwrap();
        assert_eq!(a.i, b.i);
        assert!((a.h - b.h).abs() > 1e-6);
    }

    fn casimir_residual(n: usize) -> f64 {
        let (_, w, _) = setup(0.1, 4 * n + 1, n + 1);
        let v = Variation {
            d_rho: w.rho.mapv(|r| r * r + r.sin()),
            d_sigma: w.grid.zeros(),
        };
        let jv = apply_j(&w, &v);
        let mut m: f64 = 0.0;
        for i in 1..w.grid.nx - 1 {
            for j in 1..w.grid.ny - 1 {
                m = m.max(jv.d_rho[[i, j]].abs()).max(jv.d_sigma[[i, j]].abs());
            }
        }
        m
    }

    #[test]
    fn casimir_direction_is_annihilated() {
        let (a, b) = (casimir_residual(32), casimir_residual(64));
        assert!((a / b) > 3.5, "ratio {}", a / b);
    }

    #[test]
    fn j_is_skew_for_compact_directions() {
        let (_, w, _) = setup(0.1, 257, 65);
        let grid = w.grid;
        let u = bump(&grid, 1.0, 3.0, 1.0, 1.0, -0.5);
        let v = bump(&grid, -0.5, 4.0, 2.0, 0.3, 0.8);
        let s = pairing(&grid, &u, &apply_j(&w, &v)) + pairing(&grid, &v, &apply_j(&w, &u));
        let scale = pairing(&grid, &u, &u).sqrt() * pairing(&grid, &v, &v).sqrt();
        assert!(s.abs() < 1e-3 * scale, "{s} vs {scale}");
    }

    #[test]
    fn manufactured_kinetic_energy_converges() {
        // rho = rho_bar, psi = sin(pi y) exp(-x^2): T = (1/2) int rho_bar (psi_x^2 + psi_y^2)
        let p = profile();
        let t = |n: usize| {
            let g = Grid2D::new(4 * n + 1, n + 1, 6.0).unwrap();
            let rho = g.from_fn(|_, y| p.density(y));
            let mut psi = g.from_fn(|x, y| (PI * y).sin() * (-x * x).exp());
            for j in 0..g.ny {
                psi[[0, j]] = 0.0;
                psi[[g.nx - 1, j]] = 0.0;
            }
            let sigma = crate::field::sigma_from_psi(&rho, &psi, &g);
            let f = Functionals::new(&p, &g, CasimirForm::SigmaFree);
            f.evaluate_state(&rho, &sigma, 1.0, None).unwrap().htilde
        };
        // closed form: int exp(-2x^2) = sqrt(pi/2), int 4x^2 exp(-2x^2) = sqrt(pi/2),
        // int rho_bar sin^2 = a, int rho_bar pi^2 cos^2 = b
        let quad = |f: &dyn Fn(f64) -> f64| {
            crate::quadrature::gauss_legendre_16(0.0, 0.5, f)
                + crate::quadrature::gauss_legendre_16(0.5, 1.0, f)
        };
        let a = quad(&|y| p.density(y) * (PI * y).sin().powi(2));
        let b = quad(&|y| p.density(y) * (PI * (PI * y).cos()).powi(2));
        let exact = 0.5 * (PI / 2.0).sqrt() * (a + b);
        let (e1, e2) = ((t(32) - exact).abs(), (t(64) - exact).abs());
        assert!((e1 / e2 - 4.0).abs() < 0.5, "ratio {}", e1 / e2);
    }
}
