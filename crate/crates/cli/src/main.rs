//! `hotspots`: solve, analyze and sweep second Neumann eigenfunctions of triangles.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hotspots_core::acceptance::{Suite, CRITERIA};
use hotspots_core::analysis::hot_spots_verdict;
use hotspots_core::config::RunConfig;
use hotspots_core::contour::contour_svg;
use hotspots_core::eigensolver::{find_mu2, residual_certificate, Eigenpair};
use hotspots_core::field::{grid_samples, write_grid_csv};
use hotspots_core::geometry::{LabeledTriangle, TriangleRecord};
use hotspots_core::sweep::isosceles::write_isosceles_csv;
use hotspots_core::sweep::map::sweep_svg;
use hotspots_core::sweep::path::{continuation_with, write_path_csv};
use hotspots_core::sweep::{
    crit_trajectory, isosceles_scan, moduli_sweep_with, summarize, write_sweep_csv,
    CERTIFICATE_SAMPLES,
};
use hotspots_core::Error;

#[derive(Parser)]
#[command(
    name = "hotspots",
    version,
    about = "Critical points of second Neumann eigenfunctions on triangles"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat-key TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set solver.terms=24`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute μ₂ and its eigenfunction; writes eigenpair.json.
    Solve(TriangleArgs),
    /// Critical points, nodal arc, extrema and verdict of a saved eigenpair.
    Analyze {
        /// Eigenpair JSON written by `solve`.
        eigenpair: PathBuf,
    },
    /// Classify a grid over the angle simplex; writes sweep.csv and sweep.svg.
    Sweep {
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Follow the eigenfunction along the straight-line path to (0, 1, i).
    Path {
        #[command(flatten)]
        triangle: TriangleArgs,
        #[arg(long)]
        steps: Option<usize>,
        /// Start from the negated eigenfunction.
        #[arg(long)]
        flip: bool,
    },
    /// Locate the apex angle where isosceles triangles lose their critical point.
    Isosceles {
        #[arg(long, default_value_t = 0.6)]
        lo: f64,
        #[arg(long, default_value_t = 1.4)]
        hi: f64,
        #[arg(long, default_value_t = 40)]
        steps: usize,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct TriangleArgs {
    /// Angles at v1 and v2 in radians, e.g. `--angles 1.1,0.75`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        conflicts_with = "triangle"
    )]
    angles: Option<Vec<f64>>,
    /// Triangle JSON `{"v": [[x1,y1],[x2,y2],[x3,y3]]}`, inline or as a file path.
    #[arg(long)]
    triangle: Option<String>,
}

/// Exit status 1: bad input or configuration. Exit status 2: a result
/// could not be certified or verified.
enum Failure {
    Usage(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::DegenerateTriangle(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Verify(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    cfg.apply_env()?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Solve(tri) => solve(&cfg, &tri),
        Command::Analyze { eigenpair } => analyze(&cfg, &eigenpair),
        Command::Sweep {
            resolution,
            margin,
            workers,
        } => {
            let mut cfg = cfg;
            if let Some(r) = resolution {
                cfg.set("sweep.resolution", &r.to_string())?;
            }
            if let Some(m) = margin {
                cfg.set("sweep.margin", &m.to_string())?;
            }
            if let Some(w) = workers {
                cfg.set("sweep.workers", &w.to_string())?;
            }
            run_sweep(&cfg)
        }
        Command::Path {
            triangle,
            steps,
            flip,
        } => path(&cfg, &triangle, steps, flip),
        Command::Isosceles { lo, hi, steps } => isosceles(&cfg, lo, hi, steps),
        Command::Selftest { only } => selftest(&cfg, &only),
    }
}

fn parse_triangle(args: &TriangleArgs) -> Result<LabeledTriangle, Failure> {
    if let Some(a) = &args.angles {
        if a.len() != 2 {
            return Err(Failure::Usage(format!(
                "--angles expects two values, got {}",
                a.len()
            )));
        }
        return Ok(LabeledTriangle::from_angles(a[0], a[1])?);
    }
    let Some(spec) = &args.triangle else {
        return Err(Failure::Usage(
            "give --angles β1,β2 or --triangle JSON".into(),
        ));
    };
    let text = if Path::new(spec).is_file() {
        fs::read_to_string(spec).map_err(|e| Failure::Usage(format!("{spec}: {e}")))?
    } else {
        spec.clone()
    };
    let rec: TriangleRecord = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed triangle JSON: {e}")))?;
    Ok(LabeledTriangle::try_from(&rec)?)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Pretty JSON object with `header` as its first key.
fn stamped(header: &str, value: &impl serde::Serialize) -> Result<String, Failure> {
    let body = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    let rest = body
        .strip_prefix('{')
        .ok_or_else(|| Failure::Usage("expected a JSON object".into()))?;
    let sep = if rest.trim_start().starts_with('}') {
        ""
    } else {
        ","
    };
    Ok(format!(
        "{{\n  \"header\": {}{sep}{rest}\n",
        serde_json::to_string(header).expect("string")
    ))
}

fn solve(cfg: &RunConfig, tri: &TriangleArgs) -> Outcome {
    let t = parse_triangle(tri)?;
    let ep = find_mu2(&t, &cfg.solver)?;
    let cert = residual_certificate(&ep, CERTIFICATE_SAMPLES, &cfg.solver)?;
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    write(&dir.join("eigenpair.json"), &stamped(&header, &ep)?)?;
    let report = json!({
        "mu": ep.mu,
        "sigma": ep.sigma,
        "sigma_gap": ep.sigma_gap,
        "multiplicity_two": ep.multiplicity_two,
        "normal_residual": cert.normal_residual,
        "helmholtz_residual": cert.helmholtz_residual,
        "certified": cert.certified,
        "eigenpair": dir.join("eigenpair.json"),
    });
    println!("{}", stamped(&header, &report)?.trim_end());
    if cert.certified {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "sigma {:.3e}, normal residual {:.3e} exceed the certificate bounds",
            cert.sigma, cert.normal_residual
        )))
    }
}

fn analyze(cfg: &RunConfig, path: &Path) -> Outcome {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let ep = Eigenpair::from_json(&text).map_err(|e| match e {
        Error::Json(_) => Failure::Usage(format!("malformed eigenpair: {e}")),
        other => Failure::Verify(other.to_string()),
    })?;
    let field = ep.field();
    let verdict = hot_spots_verdict(&field, &cfg.analysis)?;
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    write(&dir.join("verdict.json"), &stamped(&header, &verdict)?)?;

    let mut nodal = format!("# {header}\narc,x,y\n");
    for (i, arc) in verdict.nodal.arcs.iter().enumerate() {
        for p in arc.polyline() {
            nodal.push_str(&format!("{i},{},{}\n", p.x, p.y));
        }
    }
    write(&dir.join("nodal.csv"), &nodal)?;

    let mut grid = Vec::new();
    grid.extend_from_slice(format!("# {header}\n").as_bytes());
    write_grid_csv(&mut grid, &grid_samples(&field, cfg.output.contour_grid))?;
    write(
        &dir.join("grid.csv"),
        &String::from_utf8(grid).expect("ascii"),
    )?;

    let marks: Vec<[f64; 2]> = verdict.reports.iter().map(|r| r.location).collect();
    write(
        &dir.join("contour.svg"),
        &contour_svg(&field, cfg.output.contour_grid, 8, &marks, &header),
    )?;

    let summary = json!({
        "classification": verdict.classification,
        "critical_points": verdict.reports,
        "vertex_values": verdict.vertex_values,
        "c1": [verdict.c1(0), verdict.c1(1), verdict.c1(2)],
        "vertex_kinds": verdict.vertex_kinds,
        "nodal_arcs": verdict.nodal.arc_count(),
        "extremum_at_vertices": verdict.extremum_at_vertices,
        "margins": verdict.margins,
    });
    println!("{}", stamped(&header, &summary)?.trim_end());
    Ok(())
}

fn run_sweep(cfg: &RunConfig) -> Outcome {
    let recs = moduli_sweep_with(
        cfg.sweep.resolution,
        cfg.sweep.margin,
        cfg,
        |done, total| {
            eprint!("\r{done}/{total} nodes");
        },
    )?;
    eprintln!();
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &recs, &header)?;
    write(
        &dir.join("sweep.csv"),
        &String::from_utf8(csv).expect("utf-8"),
    )?;
    write(&dir.join("sweep.svg"), &sweep_svg(&recs, &header))?;
    let summary = summarize(&recs, cfg);
    println!("{}", stamped(&header, &summary)?.trim_end());
    Ok(())
}

fn path(cfg: &RunConfig, tri: &TriangleArgs, steps: Option<usize>, flip: bool) -> Outcome {
    let t0 = parse_triangle(tri)?;
    let steps = steps.unwrap_or(cfg.sweep.path_steps);
    let records = continuation_with(&t0, steps, cfg, flip)?;
    let traj = crit_trajectory(&records);
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    let mut csv = Vec::new();
    write_path_csv(&mut csv, &records, &header)?;
    write(
        &dir.join("path.csv"),
        &String::from_utf8(csv).expect("utf-8"),
    )?;
    write(&dir.join("trajectory.json"), &stamped(&header, &traj)?)?;
    let jump = records
        .windows(2)
        .map(|w| (w[1].eigenpair.mu - w[0].eigenpair.mu).abs() / w[0].eigenpair.mu)
        .fold(0.0_f64, f64::max);
    let summary = json!({
        "records": records.len(),
        "max_relative_mu_jump": jump,
        "alignment_flags": records.iter().filter(|r| r.flags.iter().any(|f| f == "alignment")).count(),
        "crit_present_until": traj.last_present_t,
        "crit_disappears": traj.disappears,
        "last_min_vertex_value": traj.last_min_vertex_value,
    });
    println!("{}", stamped(&header, &summary)?.trim_end());
    Ok(())
}

fn isosceles(cfg: &RunConfig, lo: f64, hi: f64, steps: usize) -> Outcome {
    let est = isosceles_scan(lo, hi, steps, cfg)?;
    let dir = out_dir(cfg)?;
    let header = cfg.header();
    let mut csv = Vec::new();
    write_isosceles_csv(&mut csv, &est, &header)?;
    write(
        &dir.join("isosceles.csv"),
        &String::from_utf8(csv).expect("utf-8"),
    )?;
    let summary = json!({
        "threshold": est.threshold,
        "bracket": [est.lo, est.hi],
        "non_monotone": est.non_monotone,
        "bisection_stopped": est.bisection_stopped,
    });
    println!("{}", stamped(&header, &summary)?.trim_end());
    if est.non_monotone {
        return Err(Failure::Verify(
            "verdicts along the isosceles family are not monotone".into(),
        ));
    }
    Ok(())
}

fn selftest(cfg: &RunConfig, only: &[u8]) -> Outcome {
    for id in only {
        if !CRITERIA.iter().any(|c| c.0 == *id) {
            return Err(Failure::Usage(format!("no acceptance criterion {id}")));
        }
    }
    let suite = Suite::new(cfg.clone());
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let r = suite.run(id);
        println!("{r}");
        if !r.pass {
            failed.push(id.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "criteria {} failed",
            failed.join(", ")
        )))
    }
}
