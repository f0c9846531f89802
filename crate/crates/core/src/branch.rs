//! Sweeps the small-amplitude branch in `c`, tabulates `I(c)` and `m(c) = (H - cI)(phi_c)`,
//! differentiates `m` and fits the power laws in `c - c0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::directions::{probe_step, state_scale, DirectionSpec};
use crate::error::{Error, Result};
use crate::functionals::{CasimirForm, Functionals, Selector};
use crate::kdv::DEFAULT_GENERICITY_THRESHOLD;
use crate::wavefields::WaveBuilder;

pub const DEFAULT_EPS_MIN: f64 = 0.02;
pub const DEFAULT_EPS_MAX: f64 = 0.1;
pub const DEFAULT_POINTS: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub eps: f64,
    pub c: f64,
    pub i_def: f64,
    pub i_kin: f64,
    pub m: f64,
    /// Largest `|D_eta (H - cI)|` over the direction dictionary.
    pub criticality_residual_max: f64,
    /// Set when the point could not be evaluated; the numeric fields are then NaN.
    pub error: Option<String>,
}

impl BranchPoint {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Second difference of `m` and first difference of `-I` at an interior point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondDerivative {
    pub index: usize,
    pub c: f64,
    pub eps: f64,
    pub m_second_fd: f64,
    pub minus_di_dc: f64,
    /// `-(3/2) K sqrt(c - c0)`.
    pub m_second_closed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fits {
    pub momentum: Option<PowerFit>,
    pub minus_m_second: Option<PowerFit>,
}

/// One point recomputed on the doubled grid to monitor quadrature error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlPoint {
    pub eps: f64,
    pub i_def: f64,
    pub i_def_refined: f64,
    pub m: f64,
    pub m_refined: f64,
    pub relative_change_i: f64,
    pub relative_change_m: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchTable {
    pub c0: f64,
    /// `K` in `I ~ K (c - c0)^{3/2}`.
    pub k: f64,
    pub nx: usize,
    pub ny: usize,
    pub points: Vec<BranchPoint>,
    pub m_second: Vec<SecondDerivative>,
    pub fits: Fits,
    pub control: Option<ControlPoint>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub nx: usize,
    pub form: CasimirForm,
    pub directions: Vec<DirectionSpec>,
    /// Relative Gateaux probe step for the criticality column.
    pub gateaux_step: f64,
    /// Recompute the middle point on the doubled grid.
    pub control: bool,
}

/// `n` speeds uniform in `c` from `c0 + eps_min^2` to `c0 + eps_max^2`.
pub fn uniform_speeds(c0: f64, eps_min: f64, eps_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(eps_min > 0.0 && eps_max > eps_min) {
        return Err(Error::param(
            "eps",
            format!("need 0 < eps_min < eps_max, got {eps_min}, {eps_max}"),
        ));
    }
    let (a, b) = (eps_min * eps_min, eps_max * eps_max);
    Ok(match n {
        0 => Vec::new(),
        1 => vec![c0 + b],
        _ => (0..n)
            .map(|i| c0 + a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    })
}

fn failed(eps: f64, c: f64, err: &Error) -> BranchPoint {
    BranchPoint {
        eps,
        c,
        i_def: f64::NAN,
        i_kin: f64::NAN,
        m: f64::NAN,
        criticality_residual_max: f64::NAN,
        error: Some(err.to_string()),
    }
}

fn evaluate_point(builder: &WaveBuilder, c: f64, options: &SweepOptions) -> Result<BranchPoint> {
    let c0 = builder.c0();
    if !(c > c0) {
        return Err(Error::param("c", format!("speed {c} not above c0 = {c0}")));
    }
    let eps = (c - c0).sqrt();
    let grid = builder.grid_for(eps, options.nx)?;
    let wave = builder.build(eps, &grid)?;
    let f = Functionals::new(&builder.profile, &grid, options.form);
    let values = f.evaluate(&wave)?;
    let i_kin = f.momentum_kinetic_form(&wave)?;
    let scale = state_scale(&wave, |y| builder.profile.density(y));
    let mut residual: f64 = 0.0;
    for d in &options.directions {
        let eta = d.sample(&grid);
        let h = probe_step(options.gateaux_step, scale, &eta);
        residual = residual.max(f.gateaux(Selector::HMinusCI, &wave, &eta, h)?.abs());
    }
    Ok(BranchPoint {
        eps,
        c: wave.c,
        i_def: values.i,
        i_kin,
        m: values.m,
        criticality_residual_max: residual,
        error: None,
    })
}

fn control_point(
    builder: &WaveBuilder,
    point: &BranchPoint,
    options: &SweepOptions,
) -> Result<ControlPoint> {
    let grid = builder.grid_for(point.eps, options.nx)?.refined();
    let fine = WaveBuilder::new(builder.profile, grid.ny, DEFAULT_GENERICITY_THRESHOLD)?;
    let wave = fine.build(point.eps, &grid)?;
    let values = Functionals::new(&fine.profile, &grid, options.form).evaluate(&wave)?;
    Ok(ControlPoint {
        eps: point.eps,
        i_def: point.i_def,
        i_def_refined: values.i,
        m: point.m,
        m_refined: values.m,
        relative_change_i: (values.i - point.i_def).abs() / point.i_def.abs(),
        relative_change_m: (values.m - point.m).abs() / point.m.abs(),
    })
}

/// Builds and evaluates the wave at every speed; failed points are kept and flagged.
pub fn sweep(builder: &WaveBuilder, speeds: &[f64], options: &SweepOptions) -> BranchTable {
    let c0 = builder.c0();
    let points: Vec<BranchPoint> = speeds
        .par_iter()
        .map(|&c| {
            evaluate_point(builder, c, options)
                .unwrap_or_else(|e| failed((c - c0).max(0.0).sqrt(), c, &e))
        })
        .collect();
    let k = builder.coeffs.instability;
    let m_second = second_derivative_m(&points, c0, k).unwrap_or_default();
    let offsets: Vec<f64> = points
        .iter()
        .filter(|p| p.is_ok())
        .map(|p| p.c - c0)
        .collect();
    let momenta: Vec<f64> = points
        .iter()
        .filter(|p| p.is_ok())
        .map(|p| p.i_def)
        .collect();
    let fits = Fits {
        momentum: fit_power_law(&offsets, &momenta).ok(),
        minus_m_second: fit_power_law(
            &m_second.iter().map(|s| s.c - c0).collect::<Vec<_>>(),
            &m_second.iter().map(|s| -s.m_second_fd).collect::<Vec<_>>(),
        )
        .ok(),
    };
    let control = if options.control {
        let ok: Vec<&BranchPoint> = points.iter().filter(|p| p.is_ok()).collect();
        ok.get(ok.len() / 2)
            .and_then(|p| control_point(builder, p, options).ok())
    } else {
        None
    };
    BranchTable {
        c0,
        k,
        nx: options.nx,
        ny: builder.mode.ny,
        points,
        m_second,
        fits,
        control,
    }
}

/// Central second difference of `m` and central first difference of `-I` on interior
/// points whose neighbours were evaluated.
pub fn second_derivative_m(
    points: &[BranchPoint],
    c0: f64,
    k: f64,
) -> Result<Vec<SecondDerivative>> {
    if points.len() < 3 {
        return Err(Error::param("points", "at least 3 branch points required"));
    }
    let dc = points[1].c - points[0].c;
    if !(dc > 0.0) {
        return Err(Error::NonUniform { index: 1 });
    }
    for (index, w) in points.windows(2).enumerate() {
        if ((w[1].c - w[0].c) - dc).abs() > 1e-9 * dc {
            return Err(Error::NonUniform { index: index + 1 });
        }
    }
    Ok(points
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w.iter().all(BranchPoint::is_ok))
        .map(|(i, w)| {
            let offset = w[1].c - c0;
            SecondDerivative {
                index: i + 1,
                c: w[1].c,
                eps: w[1].eps,
                m_second_fd: (w[2].m - 2.0 * w[1].m + w[0].m) / (dc * dc),
                minus_di_dc: -(w[2].i_def - w[0].i_def) / (2.0 * dc),
                m_second_closed: -1.5 * k * offset.max(0.0).sqrt(),
            }
        })
        .collect())
}

/// Least squares for `log y = p log x + log A`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(Error::param("ys", "xs and ys differ in length"));
    }
    if xs.len() < 3 {
        return Err(Error::param("xs", "at least 3 points required"));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::param(
            "xs",
            format!("power-law fit needs positive data, got {v}"),
        ));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("xs", "abscissae are all equal"));
    }
    let exponent = sxy / sxx;
    Ok(PowerFit {
        exponent,
        prefactor: (my - exponent * mx).exp(),
    })
}
