//! Rendering of data products: JSON documents and full-precision CSV.
//!
//! Data files carry no timestamps, so identical inputs render to identical bytes.

use std::fmt::Write as _;

use serde::Serialize;

use crate::branch::BranchTable;
use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::field::{Field, Grid2D};
use crate::modes::VerticalMode;
use crate::wavefields::WaveField;

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    config: &'a RunConfig,
    warnings: &'a [String],
    data: &'a T,
}

/// Pretty JSON with the schema version and the resolved configuration.
pub fn json_document<T: Serialize>(
    kind: &str,
    config: &RunConfig,
    warnings: &[String],
    data: &T,
) -> Result<String> {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        kind,
        config,
        warnings,
        data,
    };
    let mut s = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Numerical(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// 17 significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn row(out: &mut String, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|v| sci(*v)).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn branch_csv(table: &BranchTable) -> String {
    let mut out =
        String::from("eps,c,I_def,I_kin,m,m_second_fd,m_second_closed,criticality_residual\n");
    for (i, p) in table.points.iter().enumerate() {
        let second = table.m_second.iter().find(|s| s.index == i);
        let fd = second.map_or(f64::NAN, |s| s.m_second_fd);
        let closed = -1.5 * table.k * (p.c - table.c0).max(0.0).sqrt();
        row(
            &mut out,
            &[
                p.eps,
                p.c,
                p.i_def,
                p.i_kin,
                p.m,
                fd,
                closed,
                p.criticality_residual_max,
            ],
        );
    }
    out
}

pub fn mode_csv(mode: &VerticalMode) -> String {
    let mut out = String::from("y,phi0,phi0_prime\n");
    for (j, y) in mode.heights().enumerate() {
        row(&mut out, &[y, mode.phi0[j], mode.phi0_prime[j]]);
    }
    out
}

pub fn wave_csv(wave: &WaveField) -> String {
    let g = &wave.grid;
    let mut out = String::with_capacity(g.nx * g.ny * 5 * 24);
    out.push_str("x,y,rho,psi,sigma\n");
    for i in 0..g.nx {
        for j in 0..g.ny {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sci(g.x(i)),
                sci(g.y(j)),
                sci(wave.rho[[i, j]]),
                sci(wave.psi[[i, j]]),
                sci(wave.sigma[[i, j]])
            );
        }
    }
    out
}

/// Sidecar describing a wave CSV.
#[derive(Debug, Clone, Serialize)]
pub struct WaveSidecar<'a> {
    pub c0: f64,
    pub c: f64,
    pub eps: f64,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub nx: usize,
    pub ny: usize,
    pub profile: &'a crate::stratification::StratificationProfile,
}

/// Reads `(rho, psi, sigma)` back from [`wave_csv`] output on a known grid.
pub fn parse_wave_csv(text: &str, grid: &Grid2D) -> Result<(Field, Field, Field)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != "x,y,rho,psi,sigma" {
        return Err(Error::param(
            "wave",
            format!("unexpected header `{header}`"),
        ));
    }
    let (mut rho, mut psi, mut sigma) = (grid.zeros(), grid.zeros(), grid.zeros());
    let mut count = 0;
    for (n, line) in lines.enumerate() {
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::param("wave", format!("line {}: {e}", n + 2)))?;
        if cells.len() != 5 {
            return Err(Error::param(
                "wave",
                format!("line {}: expected 5 columns", n + 2),
            ));
        }
        if n >= grid.nx * grid.ny {
            return Err(Error::param("wave", "more rows than grid nodes"));
        }
        let (i, j) = (n / grid.ny, n % grid.ny);
        rho[[i, j]] = cells[2];
        psi[[i, j]] = cells[3];
        sigma[[i, j]] = cells[4];
        count += 1;
    }
    if count != grid.nx * grid.ny {
        return Err(Error::param(
            "wave",
            format!("expected {} rows, found {count}", grid.nx * grid.ny),
        ));
    }
    Ok((rho, psi, sigma))
}
