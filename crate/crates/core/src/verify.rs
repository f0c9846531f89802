//! The acceptance suite: shared computations and one check per criterion.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::branch::{fit_power_law, sweep, uniform_speeds, BranchTable, SweepOptions};
use crate::config::RunConfig;
use crate::directions::{dictionary, probe_step, state_scale, DirectionSpec};
use crate::error::Result;
use crate::field::Grid2D;
use crate::functionals::{CasimirForm, Functionals, Selector};
use crate::modes::solve_fundamental_mode;
use crate::output::{branch_csv, json_document, sci};
use crate::spectral_chain::{chain_check, check_jqt, ChainOptions, ChainReport};
use crate::stratification::StratificationProfile;
use crate::wavefields::{quiescent, WaveBuilder, WaveField};

pub const MODE_SPEED_TOL: f64 = 1e-5;
pub const MODE_RATIO: f64 = 4.0;
pub const MODE_RATIO_TOL: f64 = 0.5;
pub const MOMENTUM_EXPONENT_TOL: f64 = 0.1;
pub const MOMENTUM_PREFACTOR_TOL: f64 = 0.05;
pub const M_SECOND_CLOSED_TOL: f64 = 0.10;
pub const M_SECOND_EXPONENT_TOL: f64 = 0.1;
/// Interior points counted as "smallest eps" for the closed-form comparison.
pub const SMALLEST_POINTS: usize = 3;
pub const CRITICALITY_MIN_ORDER: f64 = 3.0;
pub const SIGMA_WEIGHTED_MAX_ORDER: f64 = 2.0;
pub const JQT_ORDER_TOL: f64 = 0.3;
pub const EIGEN_MIN_ORDER: f64 = 3.0;
pub const HAUPT_MIN_ORDER: f64 = 2.0;
pub const FREDHOLM_GAP_TOL: f64 = 1e-2;
pub const FREDHOLM_EPS: f64 = 0.1;
pub const IDENTITY_TOL: f64 = 0.05;
pub const MOMENTUM_GAP_MIN_ORDER: f64 = 1.5;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u32, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name,
            passed,
            detail,
        }
    }

    fn failed(id: u32, name: &'static str, err: &crate::Error) -> Self {
        Self::new(id, name, false, format!("error: {err}"))
    }

    /// `PASS [id] name: detail`.
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} [{:>2}] {}: {}", self.id, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub eps: f64,
    pub direction: usize,
    pub form: CasimirForm,
    pub value: f64,
}

/// Gateaux residuals of `H - cI` over the dictionary for both Casimir forms.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualStudy {
    pub eps: Vec<f64>,
    pub directions: Vec<DirectionSpec>,
    pub rows: Vec<ResidualRow>,
    pub orders_sigma_free: Vec<Option<f64>>,
    pub orders_sigma_weighted: Vec<Option<f64>>,
}

impl ResidualStudy {
    fn values(&self, form: CasimirForm, direction: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.form == form && r.direction == direction)
            .map(|r| r.value)
            .collect()
    }
}

pub fn residuals_csv(study: &ResidualStudy) -> String {
    let mut out = String::from("eps,direction,form,value\n");
    for r in &study.rows {
        let form = match r.form {
            CasimirForm::SigmaFree => "sigma-free",
            CasimirForm::SigmaWeighted => "sigma-weighted",
        };
        out.push_str(&format!(
            "{},{},{form},{}\n",
            sci(r.eps),
            r.direction,
            sci(r.value)
        ));
    }
    out
}

/// Least-squares slope of `log |v|` against `log eps`; `None` if any value is zero.
pub fn fitted_order(eps: &[f64], values: &[f64]) -> Option<f64> {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    fit_power_law(eps, &abs).ok().map(|f| f.exponent)
}

/// Wave builder on `ny` heights; `strict` turns truncation warnings into errors.
pub fn builder_for(config: &RunConfig, ny: usize, strict: bool) -> Result<WaveBuilder> {
    let mut b = WaveBuilder::new(config.profile, ny, config.thresholds.genericity)?;
    b.decay_widths = config.grid.decay_widths;
    b.strict = strict;
    Ok(b)
}

pub fn residual_study(config: &RunConfig, builder: &WaveBuilder) -> Result<ResidualStudy> {
    let directions = dictionary(config.probes.seed, config.probes.directions);
    let eps = config.sweep.residual_eps.clone();
    let per_eps: Vec<Vec<ResidualRow>> =
        eps.par_iter()
            .map(|&e| -> Result<Vec<ResidualRow>> {
                let grid = builder.grid_for(e, config.grid.nx)?;
                let wave = builder.build(e, &grid)?;
                let scale = state_scale(&wave, |y| builder.profile.density(y));
                let mut rows = Vec::new();
                for form in [CasimirForm::SigmaFree, CasimirForm::SigmaWeighted] {
                    let f = Functionals::new(&builder.profile, &grid, form);
                    let values: Vec<f64> = directions
                        .par_iter()
                        .map(|d| {
                            let eta = d.sample(&grid);
                            let h = probe_step(config.probes.gateaux_step, scale, &eta);
                            f.gateaux(Selector::HMinusCI, &wave, &eta, h)
                        })
                        .collect::<Result<_>>()?;
                    rows.extend(values.into_iter().enumerate().map(|(direction, value)| {
                        ResidualRow {
                            eps: e,
                            direction,
                            form,
                            value,
                        }
                    }));
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
    let mut study = ResidualStudy {
        eps,
        directions,
        rows: per_eps.into_iter().flatten().collect(),
        orders_sigma_free: Vec::new(),
        orders_sigma_weighted: Vec::new(),
    };
    for d in 0..study.directions.len() {
        study.orders_sigma_free.push(fitted_order(
            &study.eps,
            &study.values(CasimirForm::SigmaFree, d),
        ));
        study.orders_sigma_weighted.push(fitted_order(
            &study.eps,
            &study.values(CasimirForm::SigmaWeighted, d),
        ));
    }
    Ok(study)
}

/// Branch speeds from the config: explicit `c_list`, then `eps_list`, then uniform in `c`.
pub fn branch_speeds(config: &RunConfig, c0: f64) -> Result<Vec<f64>> {
    if let Some(cs) = &config.sweep.c_list {
        return Ok(cs.clone());
    }
    if let Some(es) = &config.sweep.eps_list {
        return Ok(es.iter().map(|e| c0 + e * e).collect());
    }
    uniform_speeds(
        c0,
        config.sweep.eps_min,
        config.sweep.eps_max,
        config.sweep.points,
    )
}

pub fn branch_table(config: &RunConfig, builder: &WaveBuilder) -> Result<BranchTable> {
    let speeds = branch_speeds(config, builder.c0())?;
    let options = SweepOptions {
        nx: config.grid.nx,
        form: config.casimir_form,
        directions: dictionary(config.probes.seed, config.probes.directions),
        gateaux_step: config.probes.gateaux_step,
        control: true,
    };
    Ok(sweep(builder, &speeds, &options))
}

pub fn chain_reports(config: &RunConfig, builder: &WaveBuilder) -> Result<Vec<ChainReport>> {
    let directions = dictionary(config.probes.seed, config.probes.directions);
    config
        .sweep
        .residual_eps
        .iter()
        .map(|&eps| {
            let grid = builder.grid_for(eps, config.grid.nx)?;
            let f = Functionals::new(&builder.profile, &grid, config.casimir_form);
            let options = ChainOptions {
                delta_c: config.delta_c(eps),
                steps: config.probes.steps(),
                noise_factor: config.thresholds.chain_noise_factor,
            };
            chain_check(&f, builder, eps, &directions, &options)
        })
        .collect()
}

/// Everything the criteria read.
pub struct Suite {
    pub builder: WaveBuilder,
    pub branch: BranchTable,
    pub residuals: ResidualStudy,
    pub chains: Vec<ChainReport>,
}

impl Suite {
    pub fn run(config: &RunConfig, strict: bool) -> Result<Self> {
        let builder = builder_for(config, config.grid.ny, strict)?;
        let branch = branch_table(config, &builder)?;
        let residuals = residual_study(config, &builder)?;
        let chains = chain_reports(config, &builder)?;
        Ok(Self {
            builder,
            branch,
            residuals,
            chains,
        })
    }

    /// Data files of the suite, in a fixed order.
    pub fn render(&self, config: &RunConfig, warnings: &[String]) -> Result<Vec<(String, String)>> {
        Ok(vec![
            ("branch.csv".into(), branch_csv(&self.branch)),
            (
                "branch.json".into(),
                json_document("branch", config, warnings, &self.branch)?,
            ),
            ("residuals.csv".into(), residuals_csv(&self.residuals)),
            (
                "residuals.json".into(),
                json_document("residuals", config, warnings, &self.residuals)?,
            ),
            (
                "chain.json".into(),
                json_document("chain-check", config, warnings, &self.chains)?,
            ),
        ])
    }
}

/// `c0 = sqrt(g beta / (pi^2 + beta^2 / 4))` for the exponential profile.
pub fn exponential_mode_speed(beta: f64, g: f64) -> f64 {
    (g * beta / (PI * PI + 0.25 * beta * beta)).sqrt()
}

pub fn criterion_1_mode_speed() -> CriterionResult {
    let name = "mode speed";
    let p = StratificationProfile::exponential(1.0, 1.0, 1.0);
    let exact = exponential_mode_speed(1.0, 1.0);
    let err = |ny| solve_fundamental_mode(&p, ny).map(|m| (m.c0 - exact).abs() / exact);
    match (err(2001), err(501), err(1001)) {
        (Ok(e2001), Ok(e501), Ok(e1001)) => {
            let ratio = e501 / e1001;
            let passed = e2001 <= MODE_SPEED_TOL && (ratio - MODE_RATIO).abs() <= MODE_RATIO_TOL;
            CriterionResult::new(
                1,
                name,
                passed,
                format!("rel err {e2001:.3e} at ny=2001 (tol {MODE_SPEED_TOL:e}); ratio 501/1001 = {ratio:.3}"),
            )
        }
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => CriterionResult::failed(1, name, &e),
    }
}

pub fn criterion_2_momentum_law(table: &BranchTable) -> CriterionResult {
    let name = "momentum power law";
    match table.fits.momentum {
        Some(fit) => {
            let rel = (fit.prefactor - table.k).abs() / table.k;
            let passed = (fit.exponent - 1.5).abs() <= MOMENTUM_EXPONENT_TOL
                && rel <= MOMENTUM_PREFACTOR_TOL;
            CriterionResult::new(
                2,
                name,
                passed,
                format!(
                    "exponent {:.4}, prefactor {:.4} vs K = {:.4} ({:.2}%)",
                    fit.exponent,
                    fit.prefactor,
                    table.k,
                    100.0 * rel
                ),
            )
        }
        None => CriterionResult::new(2, name, false, "momentum fit unavailable".into()),
    }
}

pub fn criterion_3_m_second_law(table: &BranchTable) -> CriterionResult {
    let name = "sign and law of m''";
    let s = &table.m_second;
    if s.is_empty() {
        return CriterionResult::new(3, name, false, "no interior branch points".into());
    }
    let positive: Vec<f64> = s
        .iter()
        .filter(|p| !(p.m_second_fd < 0.0))
        .map(|p| p.eps)
        .collect();
    let worst_small = s
        .iter()
        .take(SMALLEST_POINTS)
        .map(|p| (p.m_second_fd - p.m_second_closed).abs() / p.m_second_closed.abs())
        .fold(0.0f64, f64::max);
    let xs: Vec<f64> = s.iter().map(|p| p.c - table.c0).collect();
    let ys: Vec<f64> = s.iter().map(|p| -p.m_second_fd).collect();
    let fit = fit_power_law(&xs, &ys).ok();
    let exponent_ok = fit.is_some_and(|f| (f.exponent - 0.5).abs() <= M_SECOND_EXPONENT_TOL);
    let passed = positive.is_empty() && worst_small <= M_SECOND_CLOSED_TOL && exponent_ok;
    let fit_text = fit.map_or("fit undefined (nonnegative m'')".to_string(), |f| {
        format!("exponent {:.4}", f.exponent)
    });
    CriterionResult::new(
        3,
        name,
        passed,
        format!(
            "{} of {} interior points with m'' >= 0{}; worst rel gap to closed form at smallest eps {:.2}%; {fit_text}",
            positive.len(),
            s.len(),
            positive.first().map_or(String::new(), |e| format!(" (first at eps {e:.4})")),
            100.0 * worst_small
        ),
    )
}

pub fn criterion_4_criticality(study: &ResidualStudy) -> CriterionResult {
    let name = "criticality residual";
    let free_min = study
        .orders_sigma_free
        .iter()
        .map(|o| o.unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min);
    let weighted_max = study
        .orders_sigma_weighted
        .iter()
        .map(|o| o.unwrap_or(f64::NAN))
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = free_min >= CRITICALITY_MIN_ORDER && weighted_max < SIGMA_WEIGHTED_MAX_ORDER;
    CriterionResult::new(
        4,
        name,
        passed,
        format!("sigma-free min order {free_min:.3} (>= {CRITICALITY_MIN_ORDER}); sigma-weighted max order {weighted_max:.3} (< {SIGMA_WEIGHTED_MAX_ORDER})"),
    )
}

fn bump_state(profile: &StratificationProfile, grid: &Grid2D, c0: f64) -> WaveField {
    let mut w = quiescent(profile, grid, c0);
    let width = 0.2 * grid.half_width;
    w.rho = grid.from_fn(|x, y| {
        profile.density(y) * (1.0 + 0.05 * (-(x / width).powi(2)).exp() * (PI * y).sin())
    });
    w
}

fn jqt_order(coarse: (&Functionals, &WaveField), fine: (&Functionals, &WaveField)) -> Result<f64> {
    let a = check_jqt(coarse.0, coarse.1)?.max();
    let b = check_jqt(fine.0, fine.1)?.max();
    Ok((a / b).log2())
}

pub fn criterion_5_jqt(config: &RunConfig, builder: &WaveBuilder) -> CriterionResult {
    let name = "operator identity J I' = -d/dx";
    let run = || -> Result<(f64, f64)> {
        let p = &builder.profile;
        let form = config.casimir_form;
        let g1 = Grid2D::new(config.grid.nx, config.grid.ny, 10.0)?;
        let g2 = g1.refined();
        let (f1, f2) = (
            Functionals::new(p, &g1, form),
            Functionals::new(p, &g2, form),
        );
        let synthetic = jqt_order(
            (&f1, &bump_state(p, &g1, builder.c0())),
            (&f2, &bump_state(p, &g2, builder.c0())),
        )?;
        let fine = builder_for(config, g1.refined().ny, builder.strict)?;
        let w1 = builder.grid_for(FREDHOLM_EPS, config.grid.nx)?;
        let w2 = w1.refined();
        let (f1, f2) = (
            Functionals::new(p, &w1, form),
            Functionals::new(p, &w2, form),
        );
        let wave = jqt_order(
            (&f1, &builder.build(FREDHOLM_EPS, &w1)?),
            (&f2, &fine.build(FREDHOLM_EPS, &w2)?),
        )?;
        Ok((synthetic, wave))
    };
    match run() {
        Ok((s, w)) => CriterionResult::new(
            5,
            name,
            (s - 2.0).abs() <= JQT_ORDER_TOL && (w - 2.0).abs() <= JQT_ORDER_TOL,
            format!("grid order {s:.3} (synthetic), {w:.3} (wave eps={FREDHOLM_EPS})"),
        ),
        Err(e) => CriterionResult::failed(5, name, &e),
    }
}

pub fn criterion_6_chain(chains: &[ChainReport], directions: usize) -> CriterionResult {
    let name = "Jordan chain residuals";
    if chains.len() < 2 {
        return CriterionResult::new(6, name, false, "need at least two amplitudes".into());
    }
    let eps: Vec<f64> = chains.iter().map(|c| c.eps).collect();
    let order = |pick: &dyn Fn(&ChainReport) -> &[f64]| -> f64 {
        (0..directions)
            .map(|d| {
                let v: Vec<f64> = chains.iter().map(|c| pick(c)[d]).collect();
                fitted_order(&eps, &v).unwrap_or(f64::NAN)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let eigen = order(&|c| &c.eigen_residuals);
    let haupt = order(&|c| &c.haupt_residuals);
    let at = chains
        .iter()
        .min_by(|a, b| {
            (a.eps - FREDHOLM_EPS)
                .abs()
                .total_cmp(&(b.eps - FREDHOLM_EPS).abs())
        })
        .expect("nonempty");
    let fredholm_ok = at.fredholm_scalar > 0.0
        && at.fredholm.relative_gap <= FREDHOLM_GAP_TOL
        && at.chain_terminates;
    let passed = eigen >= EIGEN_MIN_ORDER && haupt >= HAUPT_MIN_ORDER && fredholm_ok;
    CriterionResult::new(
        6,
        name,
        passed,
        format!(
            "eigen min order {eigen:.3} (>= {EIGEN_MIN_ORDER}); generalized min order {haupt:.3} (>= {HAUPT_MIN_ORDER}); fredholm {:.5} at eps {}, gap {:.3e}, terminates {}",
            at.fredholm_scalar, at.eps, at.fredholm.relative_gap, at.chain_terminates
        ),
    )
}

pub fn criterion_7_identity(table: &BranchTable) -> CriterionResult {
    let name = "identity m'' = -dI/dc";
    if table.m_second.is_empty() {
        return CriterionResult::new(7, name, false, "no interior branch points".into());
    }
    let gaps: Vec<f64> = table
        .m_second
        .iter()
        .map(|s| (s.m_second_fd - s.minus_di_dc).abs() / s.minus_di_dc.abs())
        .collect();
    let worst = gaps.iter().copied().fold(0.0f64, f64::max);
    let failing = gaps.iter().filter(|g| !(**g <= IDENTITY_TOL)).count();
    CriterionResult::new(
        7,
        name,
        failing == 0,
        format!(
            "{failing} of {} interior points above {}%; gaps {:.2}% .. {:.2}%",
            gaps.len(),
            100.0 * IDENTITY_TOL,
            100.0 * gaps.iter().copied().fold(f64::INFINITY, f64::min),
            100.0 * worst
        ),
    )
}

pub fn criterion_8_momentum_equivalence(table: &BranchTable) -> CriterionResult {
    let name = "momentum equivalence";
    let ok: Vec<_> = table.points.iter().filter(|p| p.is_ok()).collect();
    let eps: Vec<f64> = ok.iter().map(|p| p.eps).collect();
    let gaps: Vec<f64> = ok
        .iter()
        .map(|p| (p.i_def - p.i_kin).abs() / p.i_def.abs())
        .collect();
    match fitted_order(&eps, &gaps) {
        Some(order) => CriterionResult::new(
            8,
            name,
            order >= MOMENTUM_GAP_MIN_ORDER,
            format!(
                "fitted order {order:.3} (>= {MOMENTUM_GAP_MIN_ORDER}); gap {:.3e} .. {:.3e}",
                gaps.first().copied().unwrap_or(f64::NAN),
                gaps.last().copied().unwrap_or(f64::NAN)
            ),
        ),
        None => CriterionResult::new(8, name, false, "fit undefined".into()),
    }
}

pub fn criterion_9_quiescent(config: &RunConfig, builder: &WaveBuilder) -> CriterionResult {
    let name = "quiescent annihilation";
    let run = || -> Result<(bool, bool)> {
        let grid = builder.grid_for(FREDHOLM_EPS, config.grid.nx)?;
        let q = quiescent(&builder.profile, &grid, builder.c0());
        let mut zero = true;
        for form in [CasimirForm::SigmaFree, CasimirForm::SigmaWeighted] {
            let f = Functionals::new(&builder.profile, &grid, form);
            for v in [
                f.evaluate(&q)?,
                f.evaluate_state(&q.rho, &q.sigma, q.c, None)?,
            ] {
                zero &= [v.htilde, v.itilde, v.dh, v.di, v.h, v.i, v.m]
                    .iter()
                    .all(|x| *x == 0.0);
            }
            zero &=
                f.first_variation_i(&q)?.max_norm() == 0.0 && f.momentum_kinetic_form(&q)? == 0.0;
        }
        let w = builder.build(0.0, &grid)?;
        let bits = |a: &crate::field::Field, b: &crate::field::Field| {
            a.iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits())
        };
        let identical =
            bits(&w.rho, &q.rho) && bits(&w.psi, &q.psi) && bits(&w.sigma, &q.sigma) && w.c == q.c;
        Ok((zero, identical))
    };
    match run() {
        Ok((zero, identical)) => CriterionResult::new(
            9,
            name,
            zero && identical,
            format!(
                "all functionals exactly zero: {zero}; build_wave(0) bit-identical: {identical}"
            ),
        ),
        Err(e) => CriterionResult::failed(9, name, &e),
    }
}

/// Reduced configuration for the in-process determinism check.
pub fn reduced(config: &RunConfig) -> RunConfig {
    let mut c = config.clone();
    c.grid.nx = c.grid.nx.min(129);
    c.grid.ny = c.grid.ny.min(33);
    c.sweep.points = c.sweep.points.min(5);
    c.probes.directions = c.probes.directions.min(2);
    c
}

pub fn criterion_10_determinism(config: &RunConfig) -> CriterionResult {
    let name = "determinism";
    let small = reduced(config);
    let render =
        || -> Result<Vec<(String, String)>> { Suite::run(&small, false)?.render(&small, &[]) };
    match (render(), render()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x.1.as_bytes() != y.1.as_bytes())
                .map(|(x, _)| x.0.as_str())
                .collect();
            CriterionResult::new(
                10,
                name,
                differing.is_empty() && a.len() == b.len(),
                format!(
                    "{} data files rendered twice at nx={}, ny={}; differing: [{}]",
                    a.len(),
                    small.grid.nx,
                    small.grid.ny,
                    differing.join(", ")
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => CriterionResult::failed(10, name, &e),
    }
}

/// Runs every criterion on an already computed suite.
pub fn evaluate(config: &RunConfig, suite: &Suite) -> VerifyReport {
    let criteria = vec![
        criterion_1_mode_speed(),
        criterion_2_momentum_law(&suite.branch),
        criterion_3_m_second_law(&suite.branch),
        criterion_4_criticality(&suite.residuals),
        criterion_5_jqt(config, &suite.builder),
        criterion_6_chain(&suite.chains, config.probes.directions),
        criterion_7_identity(&suite.branch),
        criterion_8_momentum_equivalence(&suite.branch),
        criterion_9_quiescent(config, &suite.builder),
        criterion_10_determinism(config),
    ];
    let all_passed = criteria.iter().all(|c| c.passed);
    VerifyReport {
        criteria,
        all_passed,
    }
}
