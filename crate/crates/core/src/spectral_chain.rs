//! Weak-form checks of the Jordan chain at zero for the linearized operator
//! `J (H - cI)''` and the Fredholm scalar `<I'(phi), d phi / dc> = dI/dc`.
//!
//! All residuals are scalar pairings `<eta, .>` against a direction dictionary, using
//! the trapezoid-weighted L2 pairing of the `(rho, sigma)` components. The checks show
//! that `I'(phi)` lies in the discrete adjoint kernel; they cannot show that it spans it.

use rayon::prelude::*;
use serde::Serialize;

use crate::directions::{probe_step, state_scale, DirectionSpec, ProbeSteps};
use crate::error::{Error, Result};
use crate::field::{pairing, Field, Grid2D, Variation};
use crate::functionals::{apply_j, Functionals, Selector};
use crate::wavefields::{WaveBuilder, WaveField};

/// Fredholm scalar is declared nonzero above this multiple of the step-refinement spread.
pub const NOISE_FACTOR: f64 = 10.0;

/// Normalized max-norms of `J I'(phi) + d phi / dx`, per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JqtResidual {
    pub rho: f64,
    pub sigma: f64,
}

impl JqtResidual {
    pub fn max(&self) -> f64 {
        self.rho.max(self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FredholmEstimate {
    /// `<I'(phi), d phi / dc>` at step `delta_c`.
    pub pairing: f64,
    /// `(I(c + dc) - I(c - dc)) / (2 dc)`.
    pub direct: f64,
    pub relative_gap: f64,
    /// `|pairing(dc) - pairing(dc / 2)|`.
    pub noise: f64,
    pub delta_c: f64,
    pub chain_terminates: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub eps: f64,
    pub c: f64,
    pub jqt_residual: JqtResidual,
    pub eigen_residuals: Vec<f64>,
    pub haupt_residuals: Vec<f64>,
    pub fredholm_scalar: f64,
    pub m_second: f64,
    pub chain_terminates: bool,
    pub fredholm: FredholmEstimate,
    pub directions: Vec<DirectionSpec>,
    pub pairing: &'static str,
}

pub const PAIRING_NAME: &str = "trapezoid-weighted L2 of (rho, sigma)";

fn max_abs(f: &Field) -> f64 {
    f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn normalized(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

/// `J I'(phi) + (rho_x, sigma_x)`, each component divided by the max-norm of `d phi / dx`.
pub fn check_jqt(functionals: &Functionals, wave: &WaveField) -> Result<JqtResidual> {
    let iv = functionals.first_variation_i(wave)?;
    let j = apply_j(wave, &iv);
    let dx = wave.partial_x();
    let r = &j.d_rho + &dx.d_rho;
    let s = &j.d_sigma + &dx.d_sigma;
    Ok(JqtResidual {
        rho: normalized(max_abs(&r), max_abs(&dx.d_rho)),
        sigma: normalized(max_abs(&s), max_abs(&dx.d_sigma)),
    })
}

/// `<eta, (H - cI)'' zeta>` with both directions rescaled to unit max-norm before probing.
pub fn hessian_pairing(
    functionals: &Functionals,
    wave: &WaveField,
    eta: &Variation,
    zeta: &Variation,
    scale: f64,
    step: f64,
) -> Result<f64> {
    let (ne, nz) = (eta.max_norm(), zeta.max_norm());
    if ne == 0.0 || nz == 0.0 {
        return Ok(0.0);
    }
    let (eh, zh) = (eta.scaled(1.0 / ne), zeta.scaled(1.0 / nz));
    let h = probe_step(step, scale, &eh);
    Ok(ne * nz * functionals.hessian_bilinear(Selector::HMinusCI, wave, &eh, &zh, h)?)
}

fn scale_of(functionals: &Functionals, wave: &WaveField) -> f64 {
    let p = functionals.profile();
    state_scale(wave, |y| p.density(y))
}

/// `<eta_i, (H - cI)''(phi) d phi / dx>` for each direction.
pub fn check_eigenfunction(
    functionals: &Functionals,
    wave: &WaveField,
    directions: &[Variation],
    step: f64,
) -> Result<Vec<f64>> {
    let dx = wave.partial_x();
    let scale = scale_of(functionals, wave);
    directions
        .par_iter()
        .map(|eta| hessian_pairing(functionals, wave, eta, &dx, scale, step))
        .collect()
}

/// `<eta_i, (H - cI)''(phi) d phi / dc> - <I'(phi), eta_i>` for each direction.
pub fn check_generalized_eigenfunction(
    functionals: &Functionals,
    builder: &WaveBuilder,
    wave: &WaveField,
    delta_c: f64,
    directions: &[Variation],
    step: f64,
) -> Result<Vec<f64>> {
    let dc = builder.partial_c(wave.eps, delta_c, &wave.grid)?;
    let iv = functionals.first_variation_i(wave)?;
    let scale = scale_of(functionals, wave);
    directions
        .par_iter()
        .map(|eta| {
            let hess = hessian_pairing(functionals, wave, eta, &dc, scale, step)?;
            Ok(hess - pairing(&wave.grid, &iv, eta))
        })
        .collect()
}

/// Pairing and direct estimates of `dI/dc` at the wave of amplitude `eps`.
pub fn fredholm_scalar(
    functionals: &Functionals,
    builder: &WaveBuilder,
    eps: f64,
    delta_c: f64,
    grid: &Grid2D,
    noise_factor: f64,
) -> Result<FredholmEstimate> {
    let wave = builder.build(eps, grid)?;
    let iv = functionals.first_variation_i(&wave)?;
    let scalar = |dc: f64| -> Result<f64> {
        let d = builder.partial_c(eps, dc, grid)?;
        Ok(pairing(grid, &iv, &d))
    };
    let p = scalar(delta_c)?;
    let noise = (p - scalar(0.5 * delta_c)?).abs();
    let c = wave.c;
    let at = |cc: f64| -> Result<f64> {
        let w = builder.build((cc - builder.c0()).sqrt(), grid)?;
        Ok(functionals.evaluate(&w)?.i)
    };
    let direct = (at(c + delta_c)? - at(c - delta_c)?) / (2.0 * delta_c);
    Ok(FredholmEstimate {
        pairing: p,
        direct,
        relative_gap: (p - direct).abs() / direct.abs(),
        noise,
        delta_c,
        chain_terminates: p.abs() > noise_factor * noise,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub delta_c: f64,
    pub steps: ProbeSteps,
    pub noise_factor: f64,
}

/// Full chain report at one amplitude.
pub fn chain_check(
    functionals: &Functionals,
    builder: &WaveBuilder,
    eps: f64,
    directions: &[DirectionSpec],
    options: &ChainOptions,
) -> Result<ChainReport> {
    let (delta_c, steps) = (options.delta_c, options.steps);
    if !(eps > 0.0) {
        return Err(Error::param("eps", "chain check needs a nonzero amplitude"));
    }
    let grid = *functionals.grid();
    let wave = builder.build(eps, &grid)?;
    let samples: Vec<Variation> = directions.iter().map(|d| d.sample(&grid)).collect();
    let jqt_residual = check_jqt(functionals, &wave)?;
    let eigen_residuals = check_eigenfunction(functionals, &wave, &samples, steps.hessian)?;
    let haupt_residuals = check_generalized_eigenfunction(
        functionals,
        builder,
        &wave,
        delta_c,
        &samples,
        steps.hessian,
    )?;
    let fredholm = fredholm_scalar(
        functionals,
        builder,
        eps,
        delta_c,
        &grid,
        options.noise_factor,
    )?;
    Ok(ChainReport {
        eps,
        c: wave.c,
        jqt_residual,
        eigen_residuals,
        haupt_residuals,
        fredholm_scalar: fredholm.pairing,
        m_second: -fredholm.pairing,
        chain_terminates: fredholm.chain_terminates,
        fredholm,
        directions: directions.to_vec(),
        pairing: PAIRING_NAME,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::{dictionary, DEFAULT_SEED};
    use crate::functionals::CasimirForm;
    use crate::kdv::DEFAULT_GENERICITY_THRESHOLD;
    use crate::stratification::StratificationProfile;
    use crate::wavefields::quiescent;

    fn profile() -> StratificationProfile {
        StratificationProfile::exponential(1.0, 1.0, 1.0)
    }

    fn bump_state(n: usize) -> (Functionals, WaveField) {
        let p = profile();
        let g = Grid2D::new(2 * n + 1, n + 1, 4.0).unwrap();
        let mut w = quiescent(&p, &g, 0.3);
        w.rho = g.from_fn(|x, y| {
            p.density(y) * (1.0 + 0.05 * (-x * x).exp() * (std::f64::consts::PI * y).sin())
        });
        (Functionals::new(&p, &g, CasimirForm::SigmaFree), w)
    }

    #[test]
    fn jqt_second_order_on_density_bump() {
        let r: Vec<f64> = [32, 64]
            .into_iter()
            .map(|n| {
                let (f, w) = bump_state(n);
                check_jqt(&f, &w).unwrap().rho
            })
            .collect();
        let order = (r[0] / r[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn jqt_vanishes_for_x_independent_fields() {
        let p = profile();
        let g = Grid2D::new(33, 17, 4.0).unwrap();
        let mut w = quiescent(&p, &g, 0.3);
        w.rho = g.from_fn(|_, y| p.density(y) + 0.01 * (3.0 * y).sin() * y * (1.0 - y));
        w.sigma = g.from_fn(|_, y| (2.0 * y).cos());
        let f = Functionals::new(&p, &g, CasimirForm::SigmaFree);
        let r = check_jqt(&f, &w).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn small_grid_chain_report() {
        let b = WaveBuilder::new(profile(), 33, DEFAULT_GENERICITY_THRESHOLD).unwrap();
        let eps = 0.1;
        let g = b.grid_for(eps, 129).unwrap();
        let f = Functionals::new(&b.profile, &g, CasimirForm::SigmaFree);
        let opts = ChainOptions {
            delta_c: eps * eps / 20.0,
            steps: ProbeSteps::default(),
            noise_factor: NOISE_FACTOR,
        };
        let r = chain_check(&f, &b, eps, &dictionary(DEFAULT_SEED, 2), &opts).unwrap();
        assert_eq!(r.m_second, -r.fredholm_scalar);
        assert!(r.chain_terminates && r.m_second < 0.0);
        assert!(r.fredholm.relative_gap < 1e-2);
        assert_eq!(r.eigen_residuals.len(), 2);
        assert!(chain_check(&f, &b, 0.0, &[], &opts).is_err());
    }

    #[test]
    fn fredholm_scalar_linear_in_eps() {
        let b = WaveBuilder::new(profile(), 33, DEFAULT_GENERICITY_THRESHOLD).unwrap();
        let s: Vec<f64> = [0.04, 0.02]
            .into_iter()
            .map(|eps| {
                let g = b.grid_for(eps, 129).unwrap();
                let f = Functionals::new(&b.profile, &g, CasimirForm::SigmaFree);
                fredholm_scalar(&f, &b, eps, eps * eps / 20.0, &g, NOISE_FACTOR)
                    .unwrap()
                    .pairing
            })
            .collect();
        assert!((s[0] / s[1] - 2.0).abs() < 0.1, "ratio {}", s[0] / s[1]);
    }
}
