use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use clairaut::annulus::{count_orbits, AnnulusMapSpec, SeedGrid};
use clairaut::counting::{coprime_series, geodesic_count, GrowthSeries};
use clairaut::geodesic::{GeodesicFlow, GeodesicState};
use clairaut::io::{read_curve, read_json, write_json, write_return_table, HomologySummary};
use clairaut::linking::{linking_number, verify_link_table, DEFAULT_SAMPLES};
use clairaut::numerics::ode::Tolerances;
use clairaut::orbits::{catalog, Catalog};
use clairaut::pipeline::{
    family_homology, run_pipeline, PerturbationConfig, RunConfig, OUT_DIR_ENV,
};
use clairaut::profile::{Profile, ProfileParams};
use clairaut::return_map::ReturnMap;
use clairaut::symplectic::morse_bott::PerturbationData;
use clairaut::symplectic::{cz_index, gradient_flowlines, perturbed_pair, SymplecticPath};

#[derive(Parser)]
#[command(
    name = "clairaut",
    version,
    about = "Geodesics, return maps and closed-orbit census on a model sphere"
)]
struct Cli {
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or validate a profile.
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Integrate one geodesic.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Tabulate or invert the return map.
    #[command(subcommand, name = "return-map")]
    ReturnMap(ReturnMapCmd),
    /// Catalog closed geodesics.
    #[command(subcommand)]
    Orbits(OrbitsCmd),
    /// Linking numbers of curves in the three-sphere.
    #[command(subcommand)]
    Link(LinkCmd),
    /// Periodic orbits of annulus twist maps.
    #[command(subcommand)]
    Annulus(AnnulusCmd),
    /// Coprime and geodesic counts.
    #[command(subcommand)]
    Count(CountCmd),
    /// Conley–Zehnder index of a symplectic path.
    #[command(subcommand)]
    Cz(CzCmd),
    /// Morse–Bott perturbation of a circle family.
    #[command(subcommand)]
    Mb(MbCmd),
    /// Model homology of a perturbed family.
    #[command(subcommand)]
    Homology(HomologyCmd),
    /// Run every stage and write all artifacts.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ProfileSource {
    /// Profile JSON; the default profile is used when absent.
    #[arg(long)]
    profile: Option<PathBuf>,
}

impl ProfileSource {
    fn load(&self) -> Result<Profile> {
        match &self.profile {
            Some(path) => {
                let (profile, _) =
                    Profile::load(path).with_context(|| format!("reading {}", path.display()))?;
                let report = profile.validate();
                if !report.passed() {
                    bail!("profile {} fails validation", path.display());
                }
                Ok(profile)
            }
            None => Ok(Profile::build(ProfileParams::default())?),
        }
    }
}

#[derive(Subcommand)]
enum ProfileCmd {
    Build {
        #[arg(long, default_value_t = 0.5)]
        r_min: f64,
        /// Meridian length `M`.
        #[arg(long, default_value_t = 4.0 * std::f64::consts::PI)]
        length: f64,
        #[arg(long, default_value_t = 1.0)]
        curvature: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    Run {
        #[command(flatten)]
        source: ProfileSource,
        #[arg(long)]
        s0: f64,
        #[arg(long, default_value_t = 0.0)]
        theta0: f64,
        #[arg(long)]
        beta0: f64,
        #[arg(long)]
        t_end: f64,
        /// Relative tolerance; the absolute tolerance is a tenth of it.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// CSV output; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReturnMapCmd {
    Tabulate {
        #[command(flatten)]
        source: ProfileSource,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.99)]
        eta_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Solve {
        #[command(flatten)]
        source: ProfileSource,
        /// Rotation number, as `p/q` or a decimal.
        #[arg(long)]
        ratio: String,
    },
}

#[derive(Subcommand)]
enum OrbitsCmd {
    Catalog {
        #[command(flatten)]
        source: ProfileSource,
        #[arg(long, value_parser = parse_pair, default_value = "0,1")]
        band: (f64, f64),
        #[arg(long, default_value_t = 12)]
        q_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the catalog as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LinkCmd {
    Compute {
        #[arg(long)]
        curve_a: PathBuf,
        #[arg(long)]
        curve_b: PathBuf,
    },
    #[command(name = "verify-table")]
    VerifyTable {
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum AnnulusCmd {
    Count {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = parse_pair, default_value = "0,1")]
        band: (f64, f64),
        #[arg(long, default_value_t = 30)]
        t_max: usize,
        #[arg(long, default_value_t = 16)]
        seeds_x: usize,
        #[arg(long, default_value_t = 5)]
        seeds_eta: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CountCmd {
    Coprime {
        #[arg(long, value_parser = parse_pair, default_value = "0,1")]
        band: (f64, f64),
        #[arg(long, default_value_t = 1000)]
        t_max: usize,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Geodesics {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CzCmd {
    Index {
        /// JSON `{"times": [...], "matrices": [[[a, b], [c, d]], ...]}`.
        #[arg(long)]
        path: PathBuf,
    },
}

#[derive(Subcommand)]
enum MbCmd {
    Pair {
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long = "T")]
        period: f64,
    },
}

#[derive(Subcommand)]
enum HomologyCmd {
    Assemble {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, value_parser = parse_pq)]
        pq: (i64, u64),
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 0.1)]
        delta_max: f64,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_pair)]
    band: Option<(f64, f64)>,
    #[arg(long)]
    q_max: Option<usize>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn parse_pq(s: &str) -> Result<(i64, u64), String> {
    let (p, q) = s.split_once(',').ok_or("expected p,q")?;
    Ok((
        p.trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| e.to_string())?,
        q.trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| e.to_string())?,
    ))
}

fn parse_ratio(s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse()?, q.trim().parse()?);
            if q == 0.0 {
                bail!("zero denominator in {s}");
            }
            Ok(p / q)
        }
        None => Ok(s.trim().parse()?),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_catalog(path: &Path) -> Result<Catalog> {
    read_json(path).with_context(|| format!("reading catalog {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Profile(ProfileCmd::Build {
            r_min,
            length,
            curvature,
            out,
        }) => {
            let params = ProfileParams {
                r_min,
                length,
                cap_junction_curvature: curvature,
            };
            let profile = Profile::build(params)?;
            profile.save(&out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Profile(ProfileCmd::Validate { input }) => {
            let (profile, deviation) = Profile::load(&input)?;
            let report = profile.validate();
            print_json(&serde_json::json!({ "report": report, "grid_deviation": deviation }))?;
            if !report.passed() || deviation > 1e-9 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Flow(FlowCmd::Run {
            source,
            s0,
            theta0,
            beta0,
            t_end,
            tol,
            out,
        }) => {
            let profile = source.load()?;
            let flow = GeodesicFlow::with_tolerances(
                &profile,
                Tolerances {
                    rel: tol,
                    abs: 0.1 * tol,
                },
            );
            let traj = flow.flow(GeodesicState::new(s0, theta0, beta0), t_end)?;
            traj.write_csv(&profile, output(&out)?)?;
            eprintln!("Clairaut drift {:.3e}", traj.clairaut_drift);
        }
        Command::ReturnMap(ReturnMapCmd::Tabulate {
            source,
            n,
            eta_max,
            out,
        }) => {
            let profile = source.load()?;
            let rows = ReturnMap::new(&profile).tabulate(n, eta_max)?;
            write_return_table(output(&out)?, &rows)?;
        }
        Command::ReturnMap(ReturnMapCmd::Solve { source, ratio }) => {
            let profile = source.load()?;
            let map = ReturnMap::new(&profile);
            let eta = map.solve_eta(parse_ratio(&ratio)?)?;
            print_json(&map.flow(eta)?)?;
        }
        Command::Orbits(OrbitsCmd::Catalog {
            source,
            band,
            q_max,
            out,
            json,
        }) => {
            let profile = source.load()?;
            let map = ReturnMap::new(&profile);
            let c = catalog(&map, band.0, band.1, q_max)?;
            c.write_csv(output(&out)?)?;
            if let Some(path) = json {
                write_json(path, &c)?;
            }
            if !c.failures.is_empty() {
                for f in &c.failures {
                    eprintln!("({}, {}): {}", f.p, f.q, f.error);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Link(LinkCmd::Compute { curve_a, curve_b }) => {
            let a = read_curve(&curve_a)?;
            let b = read_curve(&curve_b)?;
            print_json(&linking_number(&a, &b)?)?;
        }
        Command::Link(LinkCmd::VerifyTable { samples }) => {
            let report = verify_link_table(samples)?;
            print_json(&report)?;
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Annulus(AnnulusCmd::Count {
            map,
            band,
            t_max,
            seeds_x,
            seeds_eta,
            out,
        }) => {
            let spec: AnnulusMapSpec = read_json(&map)?;
            let seeds = SeedGrid {
                nx: seeds_x,
                neta: seeds_eta,
                ..SeedGrid::default()
            };
            let count = count_orbits(&spec, band, t_max, seeds, None)?;
            count.write_csv(output(&out)?)?;
            eprintln!(
                "P^{t_max} = {}, exponent {:.3} over [{}, {}], {} pairs without orbits",
                count.series.points.last().map_or(0, |p| p.1),
                count.series.exponent,
                count.series.window.0,
                count.series.window.1,
                count.missing.len()
            );
        }
        Command::Count(CountCmd::Coprime {
            band,
            t_max,
            step,
            out,
        }) => {
            let step = step.max(1);
            let ts: Vec<usize> = (1..=t_max / step).map(|k| k * step).collect();
            let series = GrowthSeries::new(coprime_series(band.0, band.1, &ts)?)?;
            series.write_csv(output(&out)?)?;
            eprintln!(
                "{}",
                serde_json::json!({ "exponent": series.exponent, "window": series.window })
            );
        }
        Command::Count(CountCmd::Geodesics {
            catalog,
            points,
            out,
        }) => {
            let c = load_catalog(&catalog)?;
            let ts: Vec<f64> = (1..=points)
                .map(|k| c.complete_up_to * k as f64 / points as f64)
                .collect();
            let series = GrowthSeries::new(geodesic_count(&c.lengths(), &ts))?;
            series.write_csv(output(&out)?)?;
            eprintln!(
                "{}",
                serde_json::json!({ "exponent": series.exponent, "window": series.window })
            );
        }
        Command::Cz(CzCmd::Index { path }) => {
            let raw: SymplecticPath = read_json(&path)?;
            let path = SymplecticPath::new(raw.times, raw.matrices)?;
            print_json(&serde_json::json!({ "cz_index": cz_index(&path)? }))?;
        }
        Command::Mb(MbCmd::Pair { c, delta, period }) => {
            let data = PerturbationData::new(period, delta, c)?;
            let pair = perturbed_pair(&data)?;
            let flowlines = gradient_flowlines(delta)?.len();
            print_json(&serde_json::json!({ "pair": pair, "flowlines": flowlines }))?;
        }
        Command::Homology(HomologyCmd::Assemble {
            catalog,
            pq,
            c,
            delta_max,
        }) => {
            let cat = load_catalog(&catalog)?;
            let rec = cat
                .records
                .iter()
                .find(|r| (r.p, r.q) == pq)
                .with_context(|| format!("({}, {}) is not in the catalog", pq.0, pq.1))?;
            let fam = family_homology(
                rec.p,
                rec.q,
                rec.length,
                &PerturbationConfig { c, delta_max },
            )?;
            let summary: &HomologySummary = &fam.homology;
            print_json(
                &serde_json::json!({ "degrees": summary.degrees, "offset": fam.offset, "family": fam }),
            )?;
        }
        Command::Pipeline(args) => {
            let mut config: RunConfig = match &args.config {
                Some(p) => {
                    read_json(p).with_context(|| format!("reading config {}", p.display()))?
                }
                None => RunConfig::default(),
            };
            if let Some(d) = args.out_dir {
                config.out_dir = Some(d);
            }
            if let Some(b) = args.band {
                config.band = b;
            }
            if let Some(q) = args.q_max {
                config.q_max = q;
            }
            if let Some(r) = args.r_min {
                config.profile.r_min = r;
            }
            if let Some(m) = args.length {
                config.profile.length = m;
            }
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            let outcome = run_pipeline(&config)?;
            eprintln!("artifacts in {}", outcome.out_dir.display());
            for f in &outcome.failures {
                eprintln!("{} failed: {}", f.stage, f.message);
            }
            if !outcome.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>()
                .and_then(|j| j.io_error_kind())
                == Some(io::ErrorKind::BrokenPipe)
            || c.to_string().contains("Broken pipe")
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
