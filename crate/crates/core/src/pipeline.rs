//! End-to-end run: profile, return map, catalog, counts and homology.
//!
//! Every stage writes its artifacts into the output directory as soon as it
//! finishes. A failed stage is recorded in `failures.json` and the stages
//! that depend on it are skipped; the artifacts already written stay in
//! place. `summary.json` holds only values computed by the library, with no
//! timings or paths, so that the same configuration reproduces it byte for
//! byte.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{coprime_series, geodesic_count, GrowthSeries};
use crate::error::{Error, Result};
use crate::geodesic::{GeodesicFlow, GeodesicState};
use crate::io::{write_columns, write_json, write_return_table, HomologySummary};
use crate::numerics::ode::Tolerances;
use crate::numerics::quadrature::QuadratureConfig;
use crate::orbits::{catalog, Catalog};
use crate::profile::{Profile, ProfileParams};
use crate::return_map::{FTable, ReturnMap, ReturnRow, TABLE_ODE_TOL};
use crate::symplectic::morse_bott::{PerturbationData, Which};
use crate::symplectic::{assemble_model_homology, gradient_flowlines, perturbed_pair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    pub ode: Tolerances,
    pub quadrature: QuadratureConfig,
    /// Time resolution of section-crossing location.
    pub event: f64,
    /// Residual tolerance of the `eta` root solve.
    pub newton: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            ode: TABLE_ODE_TOL,
            quadrature: QuadratureConfig::default(),
            event: crate::geodesic::EVENT_TOL,
            newton: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationConfig {
    /// Twist constant used for every family.
    pub c: f64,
    /// Upper bound on the perturbation size; smaller values are used for
    /// long orbits so the elliptic member rotates by less than a turn.
    pub delta_max: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            c: 1.0,
            delta_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub profile: ProfileParams,
    pub band: (f64, f64),
    pub q_max: usize,
    /// Points of the tabulated return map on `[-eta_max, eta_max]`.
    pub table_points: usize,
    pub eta_max: f64,
    /// Random initial conditions for the Clairaut drift check.
    pub clairaut_samples: usize,
    /// Largest `t` of the coprime count.
    pub count_t_max: usize,
    pub tolerances: ToleranceConfig,
    pub perturbation: PerturbationConfig,
    pub seed: u64,
    /// Not part of the summary, so runs into different directories agree.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: ProfileParams::default(),
            band: (0.0, 1.0),
            q_max: 12,
            table_points: 200,
            eta_max: 0.99,
            clairaut_samples: 20,
            count_t_max: 1000,
            tolerances: ToleranceConfig::default(),
            perturbation: PerturbationConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "CLAIRAUT_OUT_DIR";

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        let positive = [
            ("ode.rel", t.ode.rel),
            ("ode.abs", t.ode.abs),
            ("quadrature.abs_tol", t.quadrature.abs_tol),
            ("quadrature.rel_tol", t.quadrature.rel_tol),
            ("event", t.event),
            ("newton", t.newton),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "tolerance {name} = {v} must be positive"
                )));
            }
        }
        if !(self.band.0 < self.band.1) {
            return Err(Error::InvalidParams(format!(
                "band ({}, {}) is empty",
                self.band.0, self.band.1
            )));
        }
        if self.q_max == 0 || self.table_points < 2 || self.count_t_max < 10 {
            return Err(Error::InvalidParams(
                "q_max, table_points and count_t_max are too small".into(),
            ));
        }
        if !(self.eta_max > 0.0 && self.eta_max < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eta_max = {} must lie in (0, 1)",
                self.eta_max
            )));
        }
        Ok(())
    }

    /// Output directory: the config, then the environment, then `out`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub validation_passed: bool,
    pub checks: Vec<(String, f64, bool)>,
    pub clairaut_max_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMapSummary {
    pub points: usize,
    pub f_strictly_decreasing: bool,
    /// Smallest decrease of `f` between neighbouring table points.
    pub f_margin: f64,
    pub max_w_residual: f64,
    pub max_f_residual: f64,
    /// Largest `|tau_flow - (F - eta f)| / tau` on the table.
    pub max_tau_relative_residual: f64,
    pub max_f_odd_residual: f64,
    pub max_tau_even_residual: f64,
    pub min_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub size: usize,
    pub failures: usize,
    pub max_closure_residual: f64,
    pub winding_exact: bool,
    pub action_bound_holds: bool,
    pub all_primitive: bool,
    pub all_distinct: bool,
    pub complete_up_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub totient_sum_10: u64,
    pub coprime: GrowthSeriesSummary,
    pub geodesics: GrowthSeriesSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeriesSummary {
    pub window: (f64, f64),
    pub exponent: f64,
    pub residual: f64,
    pub monotone: bool,
}

impl From<&GrowthSeries> for GrowthSeriesSummary {
    fn from(s: &GrowthSeries) -> Self {
        GrowthSeriesSummary {
            window: s.window,
            exponent: s.exponent,
            residual: s.residual,
            monotone: s.is_monotone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyHomology {
    pub p: i64,
    pub q: u64,
    #[serde(rename = "T")]
    pub period: f64,
    pub delta: f64,
    pub mu_max: i32,
    pub mu_min: i32,
    pub action_max: f64,
    pub action_min: f64,
    pub flowlines: usize,
    pub offset: i32,
    pub homology: HomologySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologyStageSummary {
    pub families: usize,
    /// Every family has ranks `(1, 1)` in two adjacent degrees.
    pub all_circle: bool,
    pub index_gap_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub profile: Option<ProfileSummary>,
    pub return_map: Option<ReturnMapSummary>,
    pub catalog: Option<CatalogSummary>,
    pub counts: Option<CountSummary>,
    pub homology: Option<HomologyStageSummary>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub summary: Summary,
    pub failures: Vec<StageFailure>,
}

impl PipelineOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.summary.passed
    }
}

fn csv_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Largest Clairaut drift over `n` seeded initial conditions flowed for `10 M`.
/// Conditions whose Clairaut constant is within 0.05 of a pole are redrawn,
/// since those geodesics pass the pole guard.
pub fn clairaut_drift(profile: &Profile, tol: Tolerances, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = profile.half_length();
    let mut starts = Vec::with_capacity(n);
    while starts.len() < n {
        let s = rng.gen_range(0.3..half - 0.3);
        let st = GeodesicState::new(s, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        if crate::geodesic::clairaut(profile, &st).abs() > 0.05 {
            starts.push(st);
        }
    }
    let flow = GeodesicFlow::with_tolerances(profile, tol);
    let horizon = 10.0 * profile.length();
    let drifts = starts
        .par_iter()
        .map(|&st| Ok(flow.flow(st, horizon)?.clairaut_drift))
        .collect::<Result<Vec<f64>>>()?;
    Ok(drifts.into_iter().fold(0.0, f64::max))
}

/// Cross-checks of a tabulated return map against the quadratures and the
/// table of `F`.
pub fn summarize_table(
    rows: &[ReturnRow],
    map: &ReturnMap<'_>,
    table: &FTable,
) -> Result<ReturnMapSummary> {
    let n = rows.len();
    let f_margin = rows
        .windows(2)
        .map(|w| w[0].f - w[1].f)
        .fold(f64::INFINITY, f64::min);
    let mut max_w: f64 = 0.0;
    let mut max_tau: f64 = 0.0;
    for r in rows {
        if r.eta < 0.0 {
            max_w = max_w.max((r.w - map.winding_quadrature(r.eta)?).abs());
        }
        max_tau = max_tau.max((r.tau - table.tau(r.eta)?).abs() / r.tau);
    }
    let mut odd: f64 = 0.0;
    let mut even: f64 = 0.0;
    for i in 0..n / 2 {
        let (a, b) = (&rows[i], &rows[n - 1 - i]);
        odd = odd.max((a.f + b.f).abs());
        even = even.max((a.tau - b.tau).abs());
    }
    Ok(ReturnMapSummary {
        points: n,
        f_strictly_decreasing: f_margin > 0.0,
        f_margin,
        max_w_residual: max_w,
        max_f_residual: rows
            .iter()
            .map(|r| r.f_quadrature_residual.abs())
            .fold(0.0, f64::max),
        max_tau_relative_residual: max_tau,
        max_f_odd_residual: odd,
        max_tau_even_residual: even,
        min_tau: rows.iter().map(|r| r.tau).fold(f64::INFINITY, f64::min),
    })
}

/// Perturbation size for a family of period `period`: at most `delta_max`,
/// and small enough that the elliptic member turns by at most half a turn.
pub fn family_delta(period: f64, c: f64, delta_max: f64) -> f64 {
    delta_max.min(0.25 * (TAU / period).powi(2) / c.abs())
}

/// Perturbed pair, flowlines and model homology of one family.
pub fn family_homology(
    p: i64,
    q: u64,
    period: f64,
    cfg: &PerturbationConfig,
) -> Result<FamilyHomology> {
    let delta = family_delta(period, cfg.c, cfg.delta_max);
    let data = PerturbationData::new(period, delta, cfg.c)?;
    let pair = perturbed_pair(&data)?;
    let flowlines = gradient_flowlines(delta)?.len();
    let model = assemble_model_homology(pair.mu_min, pair.mu_max, flowlines)?;
    Ok(FamilyHomology {
        p,
        q,
        period,
        delta,
        mu_max: pair.mu_max,
        mu_min: pair.mu_min,
        action_max: data.action(Which::Max),
        action_min: data.action(Which::Min),
        flowlines,
        offset: model.offset,
        homology: HomologySummary::from_ranks(&model.ranks),
    })
}

struct Run {
    dir: PathBuf,
    failures: Vec<StageFailure>,
}

impl Run {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&Path) -> Result<T>) -> Option<T> {
        match f(&self.dir) {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(StageFailure {
                    stage: name.into(),
                    message: e.to_string(),
                });
                None
            }
        }
    }

    fn check(&mut self, name: &str, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(StageFailure {
                stage: name.into(),
                message: message(),
            });
        }
    }
}

/// Runs every stage and writes artifacts into the resolved output directory.
/// Returns `Err` only for an invalid configuration or an unwritable
/// directory; stage failures are reported in the outcome.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let dir = config.resolve_out_dir();
    std::fs::create_dir_all(&dir)?;
    let _ = std::fs::remove_file(dir.join("failures.json"));
    let mut run = Run {
        dir: dir.clone(),
        failures: Vec::new(),
    };
    let tol = &config.tolerances;

    let profile = run.stage("profile", |d| {
        let profile = Profile::build(config.profile)?;
        profile.save(d.join("profile.json"))?;
        Ok(profile)
    });
    let profile_summary = profile.as_ref().and_then(|p| {
        run.stage("clairaut", |_| {
            let report = p.validate();
            Ok(ProfileSummary {
                validation_passed: report.passed(),
                checks: report
                    .checks
                    .iter()
                    .map(|c| (c.name.clone(), c.residual, c.passed))
                    .collect(),
                clairaut_max_drift: clairaut_drift(
                    p,
                    tol.ode,
                    config.clairaut_samples,
                    config.seed,
                )?,
            })
        })
    });
    if let Some(s) = &profile_summary {
        run.check("clairaut", s.clairaut_max_drift < 1e-8, || {
            format!("Clairaut drift {:.3e} exceeds 1e-8", s.clairaut_max_drift)
        });
    }

    let map = profile.as_ref().map(|p| {
        let mut m = ReturnMap::with_tolerances(p, tol.ode, tol.quadrature);
        m.solve_tol = tol.newton;
        m.set_event_tol(tol.event);
        m
    });

    let return_summary = map.as_ref().and_then(|m| {
        run.stage("return-map", |d| {
            let rows = m.tabulate(config.table_points, config.eta_max)?;
            write_return_table(csv_file(d, "return_map.csv")?, &rows)?;
            write_columns(csv_file(d, "f.dat")?, rows.iter().map(|r| (r.eta, r.f)))?;
            let table = FTable::build(m, 16, 10)?;
            summarize_table(&rows, m, &table)
        })
    });
    if let Some(s) = &return_summary {
        run.check("return-map", s.f_strictly_decreasing, || {
            format!("f not decreasing (margin {})", s.f_margin)
        });
    }

    let cat: Option<Catalog> = map.as_ref().and_then(|m| {
        run.stage("catalog", |d| {
            let c = catalog(m, config.band.0, config.band.1, config.q_max)?;
            c.write_csv(csv_file(d, "catalog.csv")?)?;
            write_json(d.join("catalog.json"), &c)?;
            Ok(c)
        })
    });
    let catalog_summary = cat.as_ref().map(|c| CatalogSummary {
        size: c.records.len(),
        failures: c.failures.len(),
        max_closure_residual: c
            .records
            .iter()
            .map(|r| r.closure_residual)
            .fold(0.0, f64::max),
        winding_exact: c
            .records
            .iter()
            .all(|r| r.winding_total == r.p + if r.p >= 0 { r.q as i64 } else { -(r.q as i64) }),
        action_bound_holds: c.action_bound_holds,
        all_primitive: c.all_primitive,
        all_distinct: c.all_distinct,
        complete_up_to: c.complete_up_to,
    });
    if let Some(c) = &cat {
        run.check("catalog", c.failures.is_empty(), || {
            format!("{} families failed to close", c.failures.len())
        });
    }

    let counts = run.stage("counts", |d| {
        let ts: Vec<usize> = (1..=config.count_t_max / 10).map(|k| 10 * k).collect();
        let top = config.count_t_max as f64;
        let coprime = GrowthSeries::with_window(
            coprime_series(config.band.0, config.band.1, &ts)?,
            (top / 10.0, top),
        )?;
        coprime.write_csv(csv_file(d, "coprime_counts.csv")?)?;
        write_columns(
            csv_file(d, "coprime_counts.dat")?,
            coprime.points.iter().map(|&(t, c)| (t, c as f64)),
        )?;
        let c = cat
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("no catalog to count".into()))?;
        let ts: Vec<f64> = (1..=200)
            .map(|k| c.complete_up_to * k as f64 / 200.0)
            .collect();
        let geodesics = GrowthSeries::new(geodesic_count(&c.lengths(), &ts))?;
        geodesics.write_csv(csv_file(d, "geodesic_counts.csv")?)?;
        Ok(CountSummary {
            totient_sum_10: crate::counting::totient_sum(10),
            coprime: (&coprime).into(),
            geodesics: (&geodesics).into(),
        })
    });

    let homology = cat.as_ref().and_then(|c| {
        run.stage("homology", |d| {
            let families = c
                .records
                .iter()
                .map(|r| family_homology(r.p, r.q, r.length, &config.perturbation))
                .collect::<Result<Vec<_>>>()?;
            write_json(d.join("homology.json"), &families)?;
            let all_circle = families.iter().all(|f| {
                f.homology.degrees.values().copied().collect::<Vec<_>>() == vec![1, 1]
                    && f.homology.degrees.keys().copied().collect::<Vec<_>>()
                        == vec![f.offset, f.offset + 1]
            });
            Ok(HomologyStageSummary {
                families: families.len(),
                all_circle,
                index_gap_one: families.iter().all(|f| f.mu_max - f.mu_min == 1),
            })
        })
    });

    let passed = run.failures.is_empty()
        && profile_summary
            .as_ref()
            .is_some_and(|s| s.validation_passed)
        && catalog_summary
            .as_ref()
            .is_some_and(|s| s.winding_exact && s.all_distinct && s.all_primitive)
        && homology
            .as_ref()
            .is_some_and(|h| h.all_circle && h.index_gap_one);
    let summary = Summary {
        config: config.clone(),
        profile: profile_summary,
        return_map: return_summary,
        catalog: catalog_summary,
        counts,
        homology,
        passed,
    };
    write_json(dir.join("summary.json"), &summary)?;
    if !run.failures.is_empty() {
        write_json(dir.join("failures.json"), &run.failures)?;
    }
    Ok(PipelineOutcome {
        out_dir: dir,
        summary,
        failures: run.failures,
    })
}
