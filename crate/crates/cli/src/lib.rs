//! Command-line front end: declarative experiment configuration, pipeline
//! orchestration, and machine-readable result emission.
//!
//! Exit codes: 0 = all configured assertions pass, 1 = numerical-tolerance
//! failure, 2 = configuration error, 3 = I/O error.

pub mod config;

use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{json, Value};

use ou_elliptic::diffusion::{self, McConfig};
use ou_elliptic::harmonics::{self, BoundarySpec};
use ou_elliptic::{convexity, radial, solver};

use config::{Command, OutputFormat, RunConfig};

/// Errors ranked by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit status 1: a configured numerical assertion failed.
    Tolerance(String),
    /// Exit status 2: the configuration does not parse or validate.
    Config(String),
    /// Exit status 3: filesystem failure.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Tolerance(m) | CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ou_elliptic::Error> for CliError {
    fn from(e: ou_elliptic::Error) -> Self {
        CliError::Tolerance(format!("numerical failure: {e}"))
    }
}

/// Parsed command-line flags; overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub workers: Option<usize>,
    pub dry_run: bool,
}

/// Entry point shared by the binary and the integration tests. Returns the
/// rendered output (also written to the configured destination).
pub fn entry(inv: &Invocation) -> Result<String, CliError> {
    let path = inv
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(cmd) = &inv.command {
        cfg.command = Some(cmd.parse()?);
    }
    if let Some(seed) = inv.seed {
        cfg.mc.seed = seed;
    }
    if let Some(output) = &inv.output {
        cfg.output_path = Some(output.display().to_string());
    }
    if let Some(format) = &inv.format {
        cfg.format = Some(match format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(CliError::Config(format!(
                    "unknown format '{other}' (expected csv | json)"
                )))
            }
        });
    }
    let command = cfg
        .command
        .ok_or_else(|| CliError::Config("no command given (config 'command' or --command)".into()))?;

    if inv.dry_run {
        let plan = describe(&cfg, command)?;
        println!("{plan}");
        return Ok(plan);
    }

    let run_now = || run(&cfg, command);
    #[cfg(feature = "parallel")]
    let rendered = match inv.workers {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
            pool.install(run_now)?
        }
        _ => run_now()?,
    };
    #[cfg(not(feature = "parallel"))]
    let rendered = run_now()?;

    write_output(&cfg, &rendered)?;
    Ok(rendered)
}

fn write_output(cfg: &RunConfig, rendered: &str) -> Result<(), CliError> {
    match &cfg.output_path {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| CliError::Io(format!("cannot write {path}: {e}"))),
        None => {
            println!("{rendered}");
            Ok(())
        }
    }
}

/// Executes the configured pipeline and returns the rendered artifact.
/// Assertion failures are reported after the artifact has been produced, via
/// the error channel of `entry`.
pub fn run(cfg: &RunConfig, command: Command) -> Result<String, CliError> {
    match command {
        Command::Solve => run_solve(cfg),
        Command::Verify => run_verify(cfg),
        Command::Simulate => run_simulate(cfg),
        Command::Convexity => run_convexity(cfg),
    }
}

/// The truncation degree: explicit lmax, or the certified tail-bound rule at
/// the largest grid radius.
fn truncation(cfg: &RunConfig, g: &BoundarySpec) -> Result<u32, CliError> {
    if let Some(l) = cfg.lmax {
        return Ok(l.min(solver::MAX_TRUNCATION));
    }
    let r_max = cfg.grid.radii.iter().cloned().fold(1.0f64, f64::max);
    Ok(solver::default_truncation(g, r_max)?)
}

fn run_solve(cfg: &RunConfig) -> Result<String, CliError> {
    let g = cfg.boundary_spec()?;
    let d = cfg.dimension()?;
    let max_degree = truncation(cfg, &g)?;
    let u = solver::solve(&g, max_degree)?;
    let h_fd = cfg.tolerances.get("residual_h_fd").copied();
    let dirs = harmonics::sample_directions(d, cfg.grid.directions);
    let mut rows: Vec<(Vec<f64>, f64, f64, f64, Option<f64>)> = Vec::new();
    for &radius in &cfg.grid.radii {
        if !(radius >= 0.0) {
            return Err(CliError::Config(format!("field 'grid.radii': bad radius {radius}")));
        }
        for dir in &dirs {
            let x: Vec<f64> = dir.components().iter().map(|c| c * radius).collect();
            let (value, tail_bound) = solver::evaluate(&u, &x)?;
            let res = match h_fd {
                Some(h) if radius > h => Some(solver::residual(&u, &x, h)?),
                _ => None,
            };
            rows.push((x, radius, value, tail_bound, res));
        }
    }
    match cfg.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# config_hash: {}", cfg.hash());
            let headers: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
            let _ = write!(out, "{}", headers.join(","));
            let _ = write!(out, ",radius,value,tail_bound");
            if h_fd.is_some() {
                let _ = write!(out, ",residual");
            }
            let _ = writeln!(out);
            for (x, radius, value, tail, res) in &rows {
                let coords: Vec<String> = x.iter().map(|c| format!("{c}")).collect();
                let _ = write!(out, "{},{radius},{value},{tail}", coords.join(","));
                if let Some(r) = res {
                    let _ = write!(out, ",{r}");
                }
                let _ = writeln!(out);
            }
            Ok(out)
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(x, radius, value, tail, res)| {
                    let mut obj = json!({
                        "x": x,
                        "radius": radius,
                        "value": value,
                        "tail_bound": tail,
                    });
                    if let Some(r) = res {
                        obj["residual"] = json!(r);
                    }
                    obj
                })
                .collect();
            render_json(cfg, json!({ "lmax": max_degree, "c": u.c, "rows": rows }))
        }
    }
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn run_verify(cfg: &RunConfig) -> Result<String, CliError> {
    let g = cfg.boundary_spec()?;
    let d = cfg.dimension()?;
    let max_degree = truncation(cfg, &g)?;
    let u = solver::solve(&g, max_degree)?;
    let mut checks: Vec<Check> = Vec::new();

    // gamma_d sanity against the closed forms gamma_2 = 1/2, gamma_3 = 2/pi.
    let g2 = ou_elliptic::specfun::gamma_d(2)?;
    let g3 = ou_elliptic::specfun::gamma_d(3)?;
    let gap = (g2 - 0.5).abs().max((g3 - 2.0 / std::f64::consts::PI).abs());
    checks.push(Check {
        name: "gamma_d_closed_forms",
        pass: gap < 1e-12,
        detail: format!("max deviation {gap:.3e}"),
    });

    // c = gamma_d * mean(g) consistency between the two routes.
    let c_direct = solver::constant_c(&g)?;
    checks.push(Check {
        name: "constant_c_consistency",
        pass: (c_direct - u.c).abs() < 1e-10 * (1.0 + c_direct.abs()),
        detail: format!("constant_c {c_direct}, solution c {}", u.c),
    });

    // u(0) = 0 exactly.
    let origin = vec![0.0; d as usize];
    let at0 = solver::evaluate(&u, &origin)?;
    checks.push(Check {
        name: "u_vanishes_at_origin",
        pass: at0 == (0.0, 0.0),
        detail: format!("u(0) = {:?}", at0),
    });

    // PDE residual on the configured radii (clamped to the well-conditioned
    // band) with a handful of directions.
    let h_fd = cfg.tolerance("residual_h_fd", 1e-3);
    let res_tol = cfg.tolerance("residual", 1e-5);
    let mut worst_res = 0.0f64;
    for &radius in &cfg.grid.radii {
        let radius = radius.clamp(0.2, 20.0);
        for dir in harmonics::sample_directions(d, 8) {
            let x: Vec<f64> = dir.components().iter().map(|c| c * radius).collect();
            worst_res = worst_res.max(solver::residual(&u, &x, h_fd)?);
        }
    }
    checks.push(Check {
        name: "pde_residual",
        pass: worst_res < res_tol,
        detail: format!("max residual {worst_res:.3e} (tolerance {res_tol:.1e})"),
    });

    // Boundary gap nonincreasing along the sorted radii.
    let mut radii = cfg.grid.radii.clone();
    radii.sort_by(f64::total_cmp);
    let mut gaps = Vec::new();
    for &radius in &radii {
        gaps.push(solver::boundary_gap(&u, &g, radius, cfg.grid.directions.max(8))?);
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    checks.push(Check {
        name: "boundary_gap_monotone",
        pass: monotone,
        detail: format!("gaps along {radii:?}: {gaps:?}"),
    });

    // Eigenrelation residual for the leading degrees.
    let mut worst_eig = 0.0f64;
    for l in 0..=max_degree.min(8) {
        let sup = u.spectrum.sup_norms[l as usize];
        let res = harmonics::eigenrelation_residual(&u.spectrum, l)?;
        worst_eig = worst_eig.max(res / (1.0 + sup));
    }
    checks.push(Check {
        name: "eigenrelation_residual",
        pass: worst_eig < 1e-6,
        detail: format!("max scaled residual {worst_eig:.3e}"),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    let body: Vec<Value> = checks
        .iter()
        .map(|c| json!({ "check": c.name, "pass": c.pass, "detail": c.detail }))
        .collect();
    let rendered = render_json(cfg, json!({ "lmax": max_degree, "checks": body, "pass": all_pass }))?;
    if all_pass {
        Ok(rendered)
    } else {
        write_output(cfg, &rendered)?;
        Err(CliError::Tolerance(
            checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; "),
        ))
    }
}

struct McRecord {
    experiment: &'static str,
    params: Value,
    estimate: diffusion::McEstimate,
    reference: Option<f64>,
    z: Option<f64>,
    pass: bool,
}

impl McRecord {
    fn to_json(&self, seed: u64) -> Value {
        let mut obj = json!({
            "experiment": self.experiment,
            "params": self.params,
            "estimate": self.estimate.mean,
            "std_error": self.estimate.std_error,
            "n": self.estimate.n,
            "rejected": self.estimate.rejected,
            "warnings": self.estimate.warnings,
            "pass": self.pass,
            "seed": seed,
        });
        if let Some(r) = self.reference {
            obj["reference_value"] = json!(r);
        }
        if let Some(z) = self.z {
            obj["z_score"] = json!(z);
        }
        obj
    }
}

fn run_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let d = cfg.dimension()?;
    let mc: McConfig = cfg.mc_config();
    mc.validate()?;
    let z_max = cfg.tolerance("z_max", 3.0);
    let mut records: Vec<McRecord> = Vec::new();

    let mut e1 = vec![0.0; d as usize];
    e1[0] = 1.0;

    // Second moment against the closed form (|x|^2 + d) e^t - d.
    let t = mc.t_max;
    let est = diffusion::second_moment(d, &e1, t, &mc)?;
    let reference = diffusion::second_moment_reference(d, &e1, t);
    let z = (est.mean - reference) / est.std_error.max(1e-300);
    records.push(McRecord {
        experiment: "second_moment",
        params: json!({ "d": d, "x": e1, "t": t }),
        estimate: est,
        reference: Some(reference),
        z: Some(z),
        pass: z.abs() < z_max,
    });

    // Exit probability from |x| = 1 in the annulus (0.5, 2) against the
    // scale-function formula.
    let (r_in, r_out) = (0.5, 2.0);
    let h = |r: f64| radial::scale_h(d, r);
    let reference = (h(1.0)? - h(r_in)?) / (h(r_out)? - h(r_in)?);
    let est = diffusion::exit_probability(d, &e1, r_in, r_out, &mc)?;
    let z = (est.mean - reference) / est.std_error.max(1e-300);
    records.push(McRecord {
        experiment: "exit_probability",
        params: json!({ "d": d, "x": e1, "r": r_in, "R": r_out }),
        estimate: est,
        reference: Some(reference),
        z: Some(z),
        pass: z.abs() < z_max,
    });

    // Feynman-Kac l = 1 mode: sandwiched between f_1(r) = r (limit) and r.
    let mode = radial::RadialMode::new(d, 1)?;
    let f_limit = radial::f_l(&mode, 1.0)?;
    let est = diffusion::feynman_kac_mode(d, 1, 1.0, t, &mc)?;
    let pass = est.mean <= 1.0 + z_max * est.std_error
        && est.mean >= f_limit - z_max * est.std_error;
    records.push(McRecord {
        experiment: "feynman_kac_mode",
        params: json!({ "d": d, "l": 1, "r": 1.0, "t": t }),
        estimate: est,
        reference: Some(f_limit),
        z: None,
        pass,
    });

    // lambda_d from the invariant law; no reference value exists, so the
    // assertion is finiteness of the error bar.
    let est = diffusion::estimate_lambda(d, &mc)?;
    let pass = est.std_error.is_finite() && est.mean.is_finite();
    records.push(McRecord {
        experiment: "estimate_lambda",
        params: json!({ "d": d }),
        estimate: est,
        reference: None,
        z: None,
        pass,
    });

    let all_pass = records.iter().all(|r| r.pass);
    let body: Vec<Value> = records.iter().map(|r| r.to_json(mc.seed)).collect();
    let rendered = render_json(cfg, json!({ "records": body, "pass": all_pass }))?;
    if all_pass {
        Ok(rendered)
    } else {
        write_output(cfg, &rendered)?;
        Err(CliError::Tolerance(
            records
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("{} failed its acceptance band", r.experiment))
                .collect::<Vec<_>>()
                .join("; "),
        ))
    }
}

fn run_convexity(cfg: &RunConfig) -> Result<String, CliError> {
    let g = cfg.boundary_spec()?;
    let max_degree = cfg.lmax.unwrap_or(64).min(solver::MAX_TRUNCATION);
    let probe = convexity::ProbeConfig {
        seed: cfg.mc.seed,
        ..convexity::ProbeConfig::default()
    };
    let (u_report, v_report, agree) = convexity::theorem2_harness(&g, max_degree, &probe)?;
    let render = |r: &convexity::ConvexityReport| {
        let verdict = match r.verdict {
            convexity::Verdict::ConvexWithinTolerance => "convex_within_tolerance",
            convexity::Verdict::NonconvexWitnessFound => "nonconvex_witness_found",
        };
        let mut obj = json!({
            "verdict": verdict,
            "min_hessian_eigenvalue": r.min_hessian_eigenvalue,
        });
        if let Some(w) = &r.witness {
            obj["witness"] = json!({
                "x": w.x,
                "y": w.y,
                "alpha": w.alpha,
                "violation": w.violation,
            });
        }
        obj
    };
    let rendered = render_json(
        cfg,
        json!({
            "lmax": max_degree,
            "u": render(&u_report),
            "v": render(&v_report),
            "agree": agree,
        }),
    )?;
    if agree {
        Ok(rendered)
    } else {
        write_output(cfg, &rendered)?;
        Err(CliError::Tolerance(
            "Theorem 2 harness: u and v verdicts disagree".into(),
        ))
    }
}

/// Wraps a result body with the resolved config and its hash, pretty-printed
/// deterministically.
fn render_json(cfg: &RunConfig, body: Value) -> Result<String, CliError> {
    let doc = json!({
        "config": serde_json::to_value(cfg).expect("config serialization cannot fail"),
        "config_hash": cfg.hash(),
        "result": body,
    });
    serde_json::to_string_pretty(&doc)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Io(format!("serialization failure: {e}")))
}

/// Prints the resolved experiment plan without executing it.
pub fn describe(cfg: &RunConfig, command: Command) -> Result<String, CliError> {
    let g = cfg.boundary_spec()?;
    let d = cfg.dimension()?;
    let mut out = String::new();
    let _ = writeln!(out, "command: {command:?}");
    let _ = writeln!(out, "dimension: {d}");
    let _ = writeln!(out, "boundary: {g:?}");
    match command {
        Command::Solve | Command::Verify => {
            let max_degree = truncation(cfg, &g)?;
            let nodes = if d == 2 {
                (4 * max_degree as usize + 16).max(4096)
            } else {
                2 * max_degree as usize + 16
            };
            let _ = writeln!(out, "truncation degree L: {max_degree} (tail-bound rule unless lmax set)");
            let _ = writeln!(out, "projection quadrature nodes: {nodes}");
            let _ = writeln!(
                out,
                "grid: {} radii x {} directions",
                cfg.grid.radii.len(),
                cfg.grid.directions
            );
        }
        Command::Simulate => {
            let _ = writeln!(out, "paths: {}", cfg.mc.n_paths);
            let _ = writeln!(out, "dt: {}", cfg.mc.dt);
            let _ = writeln!(out, "t_max: {}", cfg.mc.t_max);
            let _ = writeln!(out, "seed: {}", cfg.mc.seed);
            let _ = writeln!(out, "worker streams: {} (0 = scheduler default)", cfg.mc.worker_streams);
        }
        Command::Convexity => {
            let max_degree = cfg.lmax.unwrap_or(64).min(solver::MAX_TRUNCATION);
            let probe = convexity::ProbeConfig::default();
            let _ = writeln!(out, "truncation degree L: {max_degree}");
            let _ = writeln!(
                out,
                "probes: {} Hessian points, {} midpoint triples, h_fd {}, ball radius {}, exclusion {}",
                probe.n_probes, probe.n_triples, probe.h_fd, probe.radius, probe.exclusion
            );
        }
    }
    let _ = writeln!(
        out,
        "output: {} ({:?})",
        cfg.output_path.as_deref().unwrap_or("<stdout>"),
        cfg.format.unwrap_or(OutputFormat::Csv)
    );
    let _ = write!(out, "config hash: {}", cfg.hash());
    Ok(out)
}
