//! `vrelease analyze`

use anyhow::Result;
use serde::Serialize;
use vector_release::analysis::{
    equilibria_seir, equilibria_wb_all, r0_sit, r0_wb, EquilibriumSet, R0Report,
};
use vector_release::model::{big_g, theta};
use vector_release::EpiParams;

use crate::output::{ensure_dir, to_pretty, versioned, write_json};
use crate::AnalyzeArgs;

#[derive(Debug, Serialize)]
struct Threshold {
    theta: f64,
    #[serde(rename = "G_theta")]
    g_theta: f64,
}

#[derive(Debug, Serialize)]
struct WbEquilibria {
    p_star: f64,
    #[serde(flatten)]
    set: EquilibriumSet,
}

#[derive(Debug, Serialize)]
struct Report {
    params: EpiParams,
    #[serde(rename = "K_star")]
    k_star: f64,
    r0_sit: R0Report,
    r0_wb_free: R0Report,
    r0_wb_invaded: R0Report,
    /// Absent when the parameters admit no interior threshold.
    threshold: Option<Threshold>,
    threshold_error: Option<String>,
    equilibria_seir: EquilibriumSet,
    equilibria_wb: Vec<WbEquilibria>,
    max_residual: f64,
}

pub fn run(args: &AnalyzeArgs) -> Result<u8> {
    let scenario = args.common.resolve()?;
    let p = scenario.params;
    let (free, invaded) = r0_wb(&p)?;
    let (threshold, threshold_error) = match theta(&p).and_then(|th| Ok((th, big_g(th, &p)?))) {
        Ok((theta, g_theta)) => (Some(Threshold { theta, g_theta }), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let seir = equilibria_seir(&p)?;
    let wb: Vec<WbEquilibria> = equilibria_wb_all(&p)?
        .into_iter()
        .map(|(p_star, set)| WbEquilibria { p_star, set })
        .collect();
    let max_residual = seir
        .equilibria
        .iter()
        .chain(wb.iter().flat_map(|w| &w.set.equilibria))
        .filter(|e| e.exists)
        .map(|e| e.residual)
        .fold(0.0, f64::max);
    let report = Report {
        params: p,
        k_star: p.k_star(),
        r0_sit: r0_sit(&p)?,
        r0_wb_free: free,
        r0_wb_invaded: invaded,
        threshold,
        threshold_error,
        equilibria_seir: seir,
        equilibria_wb: wb,
        max_residual,
    };
    let json = versioned("analyze", &report)?;
    if let Some(dir) = &scenario.output.dir {
        write_json(&ensure_dir(dir)?.join("analysis.json"), &json)?;
    }
    print!("{}", to_pretty(&json)?);
    Ok(0)
}
