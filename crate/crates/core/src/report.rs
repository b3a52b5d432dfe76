//! End-to-end runs and their serialized forms: the JSON run report, the
//! CSV series and the plain-text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundsReport, LowerVerdict, UpperVerdict};
use crate::cyclic::{self, StarEstimate, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::model::EnvironmentModel;
use crate::sim::{self, SimConfig, SimResult};
use crate::spectral;

/// Bumped on every change to the JSON report layout.
pub const REPORT_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "n,cesaro_mean,ci95_halfwidth";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Bounds,
    Simulate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub lax: bool,
    pub star: bool,
    pub samples: usize,
    pub seed: u64,
    pub simulation: Option<SimConfig>,
}

impl RunConfig {
    pub fn bounds(star: bool, samples: usize, seed: u64) -> Self {
        Self {
            command: Command::Bounds,
            lax: false,
            star,
            samples,
            seed,
            simulation: None,
        }
    }

    pub fn simulate(sim: SimConfig) -> Self {
        Self {
            command: Command::Simulate,
            lax: false,
            star: false,
            samples: DEFAULT_SAMPLES,
            seed: sim.seed,
            simulation: Some(sim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: Option<String>,
    pub path: Option<String>,
    pub m: usize,
    pub r: usize,
    pub rates: Vec<f64>,
    /// Visiting order (1-based) when the environment is cyclic.
    pub cycle: Option<Vec<usize>>,
}

impl ModelSummary {
    pub fn of(model: &EnvironmentModel, path: Option<&str>) -> Self {
        Self {
            name: model.name().map(str::to_owned),
            path: path.map(str::to_owned),
            m: model.m(),
            r: model.r(),
            rates: model.rates().to_vec(),
            cycle: model
                .detect_cycle()
                .map(|o| o.into_iter().map(|k| k + 1).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub tool_version: String,
    pub model: ModelSummary,
    pub config: RunConfig,
    pub bounds: BoundsReport,
    pub star: Option<StarEstimate>,
    pub simulation: Option<SimResult>,
    /// Wall-clock stage timings; only present when requested, since they
    /// make reports non-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

struct Stopwatch {
    enabled: bool,
    times: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        if self.enabled {
            self.times
                .insert(stage.to_owned(), start.elapsed().as_secs_f64() * 1e3);
        }
        Ok(out)
    }
}

/// Runs the bounds (always), the cyclic bound and the simulation as the
/// configuration requests.
pub fn run(
    model: &EnvironmentModel,
    path: Option<&str>,
    config: RunConfig,
    record_timings: bool,
) -> Result<RunReport> {
    let mut watch = Stopwatch {
        enabled: record_timings,
        times: BTreeMap::new(),
    };
    let prep = watch.time("prepare", || spectral::prepare(model))?;
    let star = if config.star {
        let order = model.detect_cycle().ok_or(Error::NotCyclic)?;
        Some(watch.time("star", || {
            let cp = cyclic::cyclic_prepare(&prep, &order)?;
            cyclic::omega_star(&cp, &prep, config.samples, config.seed)
        })?)
    } else {
        None
    };
    let bounds = watch.time("bounds", || bounds::compute_bounds(&prep, star.as_ref()))?;
    let simulation = match &config.simulation {
        Some(cfg) => Some(watch.time("simulate", || sim::simulate_omega(&prep, cfg))?),
        None => None,
    };
    Ok(RunReport {
        version: REPORT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        model: ModelSummary::of(model, path),
        config,
        bounds,
        star,
        simulation,
        timings_ms: record_timings.then_some(watch.times),
    })
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// CSV of the Cesàro series: LF line endings, shortest round-trip decimals.
pub fn series_csv(result: &SimResult) -> String {
    let mut out = String::with_capacity(40 * (result.series.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in &result.series {
        writeln!(out, "{},{},{}", p.n, p.cesaro_mean, p.ci95_halfwidth).unwrap();
    }
    out
}

/// Human-readable summary with four decimals.
pub fn format_table(report: &RunReport) -> String {
    let b = &report.bounds;
    let mut out = String::new();
    let mut row = |label: &str, value: String| {
        writeln!(out, "{label:<16} {value}").unwrap();
    };
    row("growth term", format!("{:.4}", b.growth_term));
    row("omega_L", format!("{:.4}", b.omega_lower));
    row("omega_L~", format!("{:.4}", b.omega_lower_alt));
    if let Some(s) = &b.omega_lower_star {
        row("omega_L*", format!("{:.4} ± {:.4}", s.value, s.std_error));
        row(
            "omega_L* (wtd)",
            format!("{:.4} ± {:.4}", s.weighted_value, s.weighted_std_error),
        );
    }
    if let Some(sim) = &report.simulation {
        row(
            "omega_sim",
            format!("{:.4} ± {:.4}", sim.omega_sim, sim.ci95),
        );
    }
    row("omega_U", format!("{:.4}", b.omega_upper));
    row(
        "from above",
        match b.verdict_upper {
            UpperVerdict::ExtinctAlmostSurely => "extinct almost surely".into(),
            UpperVerdict::InconclusiveFromAbove => "inconclusive".into(),
        },
    );
    row(
        "from below",
        match b.verdict_lower {
            LowerVerdict::SurvivesWithPositiveProbability => {
                "survives with positive probability".into()
            }
            LowerVerdict::InconclusiveFromBelow => "inconclusive".into(),
        },
    );
    out
}
