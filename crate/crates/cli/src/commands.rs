use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use landau_core::checkpoint::Checkpoint;
use landau_core::config::{parse_config, SimulationConfig};
use landau_core::diagnostics::{fit_decay_rate, null_structure_gain, DiagnosticRecord};
use landau_core::maxwellian::fit_maxwellian;
use landau_core::oracles::{catalog, check_dispersion, check_hls, check_interpolation, HlsBranch, RadialShape, TestFunction};
use landau_core::phase::DistributionField;
use landau_core::stepper::{free_deviation, run as run_sim, RunEvent, RunSummary};
use landau_core::transport::pullback_sharp;
use landau_core::Error;
use serde_json::json;

use crate::output::{self, checkpoint_path, write_line, CSV, FINAL_CHECKPOINT, NDJSON};
use crate::{Context, Failure};

const DEFAULT_DIR: &str = "landau_output";

fn load_config(ctx: &Context) -> Result<SimulationConfig, Failure> {
    let path = ctx
        .config
        .as_ref()
        .ok_or_else(|| Failure::Error("cli::MissingArgument: --config PATH is required".into()))?;
    Ok(parse_config(path)?)
}

fn resume_field(ctx: &Context, cfg: &SimulationConfig) -> Result<Option<DistributionField>, Failure> {
    let Some(path) = &ctx.resume else { return Ok(None) };
    let c = Checkpoint::load(path)?;
    if c.gamma != cfg.gamma {
        return Err(Error::ConfigInvalid(format!("checkpoint gamma {} differs from the configuration", c.gamma)).into());
    }
    Ok(Some(c.field))
}

fn output_dir(ctx: &Context, cfg: &SimulationConfig) -> PathBuf {
    ctx.output
        .clone()
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DIR))
}

fn progress_line(r: &DiagnosticRecord) -> String {
    format!(
        "t = {:<10.4} mass {:.6e}  rho_sup {:.3e}  H {:.6e}  clipped {:.1e}",
        r.t, r.mass, r.rho_sup, r.h_value, r.clipped_mass
    )
}

/// NDJSON rows to stdout, mirrored to `<output>/<name>` when an output directory is given.
struct RowSink {
    file: Option<BufWriter<File>>,
}

impl RowSink {
    fn new(ctx: &Context, name: &str) -> Result<Self, Failure> {
        let file = match &ctx.output {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Some(BufWriter::new(File::create(dir.join(name))?))
            }
            None => None,
        };
        Ok(Self { file })
    }

    fn push(&mut self, row: &serde_json::Value) -> Result<(), Failure> {
        write_line(&mut std::io::stdout().lock(), row)?;
        if let Some(f) = &mut self.file {
            write_line(f, row)?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(), Failure> {
        if let Some(f) = &mut self.file {
            f.flush()?;
        }
        Ok(())
    }
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let cfg = load_config(ctx)?;
    let dir = output_dir(ctx, &cfg);
    fs::create_dir_all(&dir)?;
    let resume = resume_field(ctx, &cfg)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let ndjson = dir.join(NDJSON);
    let file = match &resume {
        Some(f) => {
            output::truncate_after(&ndjson, f.time)?;
            OpenOptions::new().create(true).append(true).open(&ndjson)?
        }
        None => File::create(&ndjson)?,
    };
    let mut out = BufWriter::new(file);
    let mut failed: Option<Failure> = None;
    let result = run_sim(&cfg, resume, |e| {
        match e {
            RunEvent::Record(r) => {
                if let Err(f) = write_line(&mut out, r) {
                    failed = Some(f);
                    return Err(Error::Io(std::io::Error::other("stopped")));
                }
                ctx.progress(progress_line(r));
            }
            RunEvent::Checkpoint { index, field } => {
                Checkpoint { gamma: cfg.gamma, field: field.clone() }.save(&checkpoint_path(&dir, index))?;
            }
            RunEvent::Output(_) => {}
        }
        Ok(())
    });
    if let Some(f) = failed {
        return Err(f);
    }
    // keep what was written even when the run stops early
    out.flush()?;
    drop(out);
    let summary = result?;
    output::ndjson_to_csv(&ndjson, &dir.join(CSV))?;
    Checkpoint { gamma: cfg.gamma, field: summary.final_field }.save(&dir.join(FINAL_CHECKPOINT))?;
    ctx.progress(format!(
        "{} steps, clipped mass {:.3e}; wrote {}",
        summary.steps,
        summary.clipped_mass,
        dir.display()
    ));
    Ok(())
}

struct Target {
    name: &'static str,
    slope: f64,
    target: f64,
    tol: f64,
}

impl Target {
    fn pass(&self) -> bool {
        (self.slope - self.target).abs() <= self.tol
    }
}

pub fn fit_report(ctx: &Context) -> Result<(), Failure> {
    let cfg = load_config(ctx)?;
    let stored = ctx.output.as_ref().map(|d| d.join(NDJSON)).filter(|p| p.exists());
    let records = match stored {
        Some(p) => {
            ctx.progress(format!("reading {}", p.display()));
            output::read_records(&p)?
        }
        None => in_memory_run(ctx, &cfg)?.records,
    };
    let window = cfg.fit_window();
    let series = |f: fn(&DiagnosticRecord) -> f64| -> Vec<(f64, f64)> { records.iter().map(|r| (r.t, f(r))).collect() };
    let d_x = cfg.dims.d_x as f64;
    let mut rows = Vec::new();
    if cfg.dims.d_x > 0 {
        let dispersive: [(&'static str, fn(&DiagnosticRecord) -> f64); 3] =
            [("rho_sup", |r| r.rho_sup), ("m_sup", |r| r.m_sup), ("e_sup", |r| r.e_sup)];
        for (name, f) in dispersive {
            rows.push(Target { name, slope: fit_decay_rate(&series(f), window)?.slope, target: -d_x, tol: 0.1 });
        }
    }
    let coefficients = cfg.dims.d_x > 0 && cfg.diagnostics.coefficient_norms && cfg.solver.collisions;
    let mut gain = None;
    if coefficients {
        let plain = series(|r| r.a_bar_plain_sup);
        let weighted = series(|r| r.a_bar_weighted_sup);
        rows.push(Target { name: "a_bar_plain_sup", slope: fit_decay_rate(&plain, window)?.slope, target: -d_x, tol: 0.15 });
        gain = Some(null_structure_gain(&plain, &weighted, window)?);
    }
    println!("fit window [{}, {}]", window.0, window.1);
    println!("{:<18} {:>9} {:>8} {:>6}  status", "quantity", "slope", "target", "tol");
    for r in &rows {
        println!(
            "{:<18} {:>9.4} {:>8.2} {:>6.2}  {}",
            r.name,
            r.slope,
            r.target,
            r.tol,
            if r.pass() { "PASS" } else { "FAIL" }
        );
    }
    if let Some(g) = gain {
        println!("null-structure gain {g:.4}");
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("slopes off target: {}", failed.join(", "))))
    }
}

fn in_memory_run(ctx: &Context, cfg: &SimulationConfig) -> Result<RunSummary, Failure> {
    let resume = resume_field(ctx, cfg)?;
    Ok(run_sim(cfg, resume, |e| {
        if let RunEvent::Record(r) = e {
            ctx.progress(progress_line(r));
        }
        Ok(())
    })?)
}

/// Runs the configuration and hands every output-time field to `each`.
fn for_each_output<F>(ctx: &Context, cfg: &SimulationConfig, name: &str, mut each: F) -> Result<(), Failure>
where
    F: FnMut(&DistributionField) -> Result<serde_json::Value, Failure>,
{
    let resume = resume_field(ctx, cfg)?;
    let mut sink = RowSink::new(ctx, name)?;
    let mut failed: Option<Failure> = None;
    let result = run_sim(cfg, resume, |e| {
        if let RunEvent::Output(f) = e {
            if let Err(x) = each(f).and_then(|row| sink.push(&row)) {
                failed = Some(x);
                return Err(Error::Io(std::io::Error::other("stopped")));
            }
            ctx.progress(format!("t = {:.4}", f.time));
        }
        Ok(())
    });
    if let Some(f) = failed {
        return Err(f);
    }
    result?;
    sink.finish()
}

pub fn maxfit(ctx: &Context) -> Result<(), Failure> {
    let cfg = load_config(ctx)?;
    for_each_output(ctx, &cfg, "maxfit.ndjson", |f| {
        let fit = fit_maxwellian(&pullback_sharp(f))?;
        Ok(json!({
            "t": f.time,
            "residual": fit.residual,
            "input_norm": fit.input_norm,
            "relative_residual": fit.residual / fit.input_norm,
            "converged": fit.converged,
            "params": fit.params,
        }))
    })
}

pub fn compare_free(ctx: &Context) -> Result<(), Failure> {
    let cfg = load_config(ctx)?;
    let initial = cfg.initial_field()?;
    let [l, m] = cfg.diagnostics.weight_powers;
    for_each_output(ctx, &cfg, "compare_free.ndjson", |f| {
        Ok(json!({ "t": f.time, "deviation": free_deviation(f, &initial, l, m)? }))
    })
}

fn shape_label(h: &TestFunction) -> String {
    match h.shape {
        RadialShape::Gaussian { width } => format!("gaussian w={width}"),
        RadialShape::Ball { radius } => format!("ball R={radius}"),
        RadialShape::Bump { radius, power } => format!("bump R={radius} k={power}"),
        RadialShape::GaussianPair { coeff, width } => format!("gauss-pair c={coeff} w={width}"),
        RadialShape::Shell { width } => format!("shell w={width}"),
    }
}

/// Interpolation, HLS and dispersion checks over the catalog. A check fails
/// when a ratio is not finite or moves by more than 1e−3 under refinement.
pub fn oracle(ctx: &Context, level: u32) -> Result<(), Failure> {
    const STABLE: f64 = 1e-3;
    let mut bad = Vec::new();
    let ball = TestFunction::new(RadialShape::Ball { radius: 1.0 });
    let two_pi = (ball.riesz_at([0.0; 3], 1.0, level)? - 2.0 * std::f64::consts::PI).abs();
    println!("ball R=1, nu=1 at the origin: |value - 2pi| = {two_pi:.2e}");
    if two_pi > STABLE {
        bad.push("2pi example".to_string());
    }
    println!("{:<22} {:>5} {:>6} {:>12} {:>12}", "function", "kind", "nu", "ratio", "refine");
    let hls = [(0.5, HlsBranch::L15Over4Nu), (1.5, HlsBranch::L15Over4Nu), (2.0, HlsBranch::L2), (2.5, HlsBranch::L2)];
    for h in catalog() {
        let label = shape_label(&h);
        ctx.progress(format!("checking {label}"));
        let mut rows = Vec::new();
        for nu in [0.5, 1.0, 1.5, 2.5] {
            let r = check_interpolation(&h, nu, level)?;
            rows.push(("interp", nu, r.ratio, r.refinement_change));
        }
        for (nu, branch) in hls {
            let r = check_hls(&h, nu, branch, level)?;
            rows.push(("hls", nu, r.ratio, r.refinement_change));
        }
        for (kind, nu, ratio, change) in rows {
            println!("{label:<22} {kind:>5} {nu:>6.2} {ratio:>12.5e} {change:>12.2e}");
            if !ratio.is_finite() || change > STABLE {
                bad.push(format!("{label} {kind} nu={nu}"));
            }
        }
    }
    let times = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let a = check_dispersion(&times, 1.0, level)?;
    let b = check_dispersion(&times, 1.0, level + 1)?;
    println!("{:<8} {:>12} {:>12} {:>12}", "t", "ratio", "closed form", "refine");
    for (p, q) in a.iter().zip(&b) {
        let change = (p.ratio - q.ratio).abs() / p.ratio;
        println!("{:<8} {:>12.5} {:>12.5} {:>12.2e}", p.t, p.ratio, p.closed_form_ratio, change);
        if !p.ratio.is_finite() || change > STABLE {
            bad.push(format!("dispersion t={}", p.t));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("unstable or non-finite oracle checks: {}", bad.join("; "))))
    }
}
