use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use shrinker_lab::field::NormalField;
use shrinker_lab::graphgeom::{evaluate_geometry, GeometryOptions};
use shrinker_lab::harness::interp::frequency_sweep;
use shrinker_lab::harness::{
    constant_report, scaling_slopes, sweep_csv, CylinderSpec, ExperimentConfig, Harness,
    CONFIG_FORMAT_VERSION, REPORT_FORMAT_VERSION,
};
use shrinker_lab::jacobi::{build_kernel_basis, growth_constants, kernel_residual};
use shrinker_lab::profile::{
    compute_b2, export_curve, import_curve, shrinker_residual, solve_abresch_langer, CurveSource,
    ProfileCurve, ProfileKind, ProfileSpec, PROFILE_FORMAT_VERSION,
};
use shrinker_lab::variation::{comparison_csv, compare_first_variations, DEFAULT_STEP};
use shrinker_lab::{LabError, Result};

/// Hard thresholds for a solved profile.
const RESIDUAL_LIMIT: f64 = 1e-8;
const SPREAD_LIMIT: f64 = 1e-7;
/// Kernel residual limit `‖LJ‖/‖J‖`.
const KERNEL_LIMIT: f64 = 1e-6;
/// Analytic-vs-numeric relative gap limit.
const VARIATION_LIMIT: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "shrinker-lab", version, about = "Numerical checks near generalized cylinders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile curves.
    Profile {
        #[command(subcommand)]
        action: ProfileAction,
    },
    /// Cylinder grids.
    Grid {
        #[command(subcommand)]
        action: GridAction,
    },
    /// Geometry of a normal graph.
    Geometry {
        #[command(subcommand)]
        action: GeometryAction,
    },
    /// Jacobi fields.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// First variation formulas against finite differences.
    Variation {
        #[command(subcommand)]
        action: VariationAction,
    },
    /// Second-variation constants: targets and measured ratios.
    Constants {
        /// Round sphere dimension `k`.
        #[arg(long, conflicts_with_all = ["p", "q"])]
        round_k: Option<u32>,
        #[arg(long, requires = "q")]
        p: Option<u32>,
        #[arg(long, requires = "p")]
        q: Option<u32>,
        #[arg(long, default_value_t = 256)]
        nodes: usize,
        #[arg(long, default_value_t = 257)]
        axial: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Inequality sweeps.
    Loja {
        #[command(subcommand)]
        action: LojaAction,
    },
    /// Interpolation inequality.
    Interp {
        #[command(subcommand)]
        action: InterpAction,
    },
}

#[derive(Subcommand)]
enum ProfileAction {
    /// Solve for an Abresch-Langer curve.
    Solve {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        q: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1024)]
        nodes: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-check a stored curve file.
    Check { file: PathBuf },
}

#[derive(Args, Clone)]
struct CylArgs {
    /// Round profile (only k = 1 has a grid).
    #[arg(long, conflicts_with_all = ["p", "q"])]
    round_k: Option<u32>,
    #[arg(long, requires = "q")]
    p: Option<u32>,
    #[arg(long, requires = "p")]
    q: Option<u32>,
    #[arg(long, default_value_t = 256)]
    nodes: usize,
    #[arg(long, default_value_t = 257)]
    axial: usize,
    #[arg(long, default_value_t = 12.0)]
    y_max: f64,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

impl CylArgs {
    fn spec(&self) -> CylinderSpec {
        let profile = match (self.p, self.q) {
            (Some(p), Some(q)) => ProfileKind::AbreschLanger { p, q },
            _ => ProfileKind::Round {
                k: self.round_k.unwrap_or(1),
            },
        };
        CylinderSpec {
            profile,
            profile_nodes: self.nodes,
            axial_nodes: self.axial,
            y_max: self.y_max,
            ambient_dim: self.dim,
            tolerance: self.tol,
        }
    }
}

#[derive(Subcommand)]
enum GridAction {
    /// Build a grid and report its Gaussian area.
    Build {
        #[command(flatten)]
        cyl: CylArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GeometryAction {
    /// Per-node geometry of the graph of a random smooth field.
    Eval {
        #[command(flatten)]
        cyl: CylArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `|U|_{C²}` of the field.
        #[arg(long, default_value_t = 0.01)]
        amplitude: f64,
        #[arg(long, default_value_t = 6.0)]
        support: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Residuals and growth constants of every kernel basis field.
    Verify {
        #[command(flatten)]
        cyl: CylArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum VariationAction {
    /// Compare the closed-form first variations with finite differences.
    Check {
        #[command(flatten)]
        cyl: CylArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        fields: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LojaAction {
    /// Run every inequality over the configured families.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum InterpAction {
    /// Frequency sweep of `sin(ωy)·bump` on a ball.
    Check {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        j: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        omegas: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Write through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn profile_summary(curve: &ProfileCurve) -> (f64, f64, bool) {
    let residual = shrinker_residual(curve);
    let spread = curve.conserved_spread();
    (residual, spread, residual <= RESIDUAL_LIMIT && spread <= SPREAD_LIMIT)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Profile { action } => match action {
            ProfileAction::Solve {
                p,
                q,
                tol,
                nodes,
                output,
            } => {
                let curve = solve_abresch_langer(&ProfileSpec::abresch_langer(p, q, tol), nodes)?;
                let (residual, spread, ok) = profile_summary(&curve);
                if let CurveSource::AbreschLanger { kappa_max, .. } = curve.source {
                    println!(
                        "AL({p},{q}) kappa_max {kappa_max:.15} length {:.12} residual {residual:.3e} spread {spread:.3e} closure {:.3e} B2 {:.10} {}",
                        curve.length,
                        curve.closure_defect,
                        compute_b2(&curve)?,
                        verdict(ok)
                    );
                }
                if let Some(path) = output {
                    write_atomic(&path, &export_curve(&curve))?;
                }
                Ok(ok)
            }
            ProfileAction::Check { file } => {
                let text = std::fs::read_to_string(&file)?;
                let curve = import_curve(&text)?;
                let (residual, spread, ok) = profile_summary(&curve);
                println!(
                    "{}: nodes {} length {:.12} residual {residual:.3e} spread {spread:.3e} {}",
                    file.display(),
                    curve.len(),
                    curve.length,
                    verdict(ok)
                );
                Ok(ok)
            }
        },
        Command::Grid {
            action: GridAction::Build { cyl, output },
        } => {
            let grid = cyl.spec().build()?;
            let area = shrinker_lab::cylinder::gaussian_area(&grid, None)?;
            println!(
                "grid {}x{} y_max {} dim {} F {:.12} tail {:.3e}{}",
                grid.ns,
                grid.ny,
                grid.y_max,
                grid.ambient_dim,
                area,
                grid.tail_bound,
                if grid.tail_flagged { " (tail flagged)" } else { "" }
            );
            if let Some(path) = output {
                write_atomic(&path, &grid.export_grid())?;
            }
            Ok(true)
        }
        Command::Geometry {
            action:
                GeometryAction::Eval {
                    cyl,
                    seed,
                    amplitude,
                    support,
                    output,
                },
        } => {
            let grid = cyl.spec().build()?;
            let u = NormalField::random_smooth(&grid, seed, support, grid.ambient_dim == 4)?
                .normalized_c2(amplitude)?;
            let state = evaluate_geometry(&grid, &u, &GeometryOptions::default())?;
            let defect = state.grad_h_identity_defect(&grid, 8);
            println!(
                "geometry nodes {} |H| threshold {:.4e} grad-H identity defect {:.3e}",
                grid.len(),
                state.h_threshold,
                defect
            );
            if let Some(path) = output {
                write_atomic(&path, &state.to_csv(&grid)?)?;
            }
            Ok(true)
        }
        Command::Kernel {
            action: KernelAction::Verify { cyl, output },
        } => {
            let grid = cyl.spec().build()?;
            let basis = build_kernel_basis(&grid)?;
            let mut ok = true;
            println!(
                "kernel dim {} (K0 {}, K1 {}) gram condition {:.3e} pruned {:?}",
                basis.dim(),
                basis.k0().count(),
                basis.k1().count(),
                basis.gram_condition,
                basis.pruned
            );
            for b in &basis.fields {
                let res = kernel_residual(&grid, &b.field);
                let gc = growth_constants(&grid, &b.field);
                let pass = res <= KERNEL_LIMIT;
                ok &= pass;
                println!(
                    "  {:<14} {:?} residual {res:.3e} C0 {:.4e} C2 {:.4e} {}",
                    b.name,
                    b.part,
                    gc.c0,
                    gc.c2,
                    verdict(pass)
                );
            }
            if let Some(path) = output {
                write_atomic(&path, &basis.to_csv(&grid)?)?;
            }
            Ok(ok)
        }
        Command::Variation {
            action:
                VariationAction::Check {
                    cyl,
                    seed,
                    fields,
                    step,
                    output,
                },
        } => {
            let grid = cyl.spec().build()?;
            let mut ok = true;
            let mut csv = String::new();
            for k in 0..fields as u64 {
                let u = NormalField::random_smooth(&grid, seed + k, 6.0, grid.ambient_dim == 4)?
                    .normalized_c2(1.0)?;
                let rows = compare_first_variations(&grid, &u, step)?;
                println!("field seed {}", seed + k);
                for r in &rows {
                    let diagnostic = r.quantity.contains("projection terms only");
                    let limit = VARIATION_LIMIT.max(10.0 * r.richardson_error / r.max_numeric.max(1e-300));
                    let pass = diagnostic || r.relative_gap <= limit;
                    ok &= pass;
                    println!(
                        "  {:<36} rel gap {:.3e} richardson {:.3e} {}",
                        r.quantity,
                        r.relative_gap,
                        r.richardson_error,
                        if diagnostic { "diagnostic" } else { verdict(pass) }
                    );
                }
                csv.push_str(&comparison_csv(&rows)?);
            }
            if let Some(path) = output {
                write_atomic(&path, &csv)?;
            }
            Ok(ok)
        }
        Command::Constants {
            round_k,
            p,
            q,
            nodes,
            axial,
            output,
        } => {
            let profile = match (p, q) {
                (Some(p), Some(q)) => ProfileKind::AbreschLanger { p, q },
                _ => ProfileKind::Round {
                    k: round_k.unwrap_or(1),
                },
            };
            let spec = CylinderSpec {
                profile,
                profile_nodes: nodes,
                axial_nodes: axial,
                ambient_dim: 3,
                ..CylinderSpec::default()
            };
            let rep = constant_report(&spec)?;
            let measured = rep
                .measured
                .map_or("n/a".to_string(), |m| format!("{m:.6}"));
            println!(
                "{} target {}{:.6} measured {}",
                rep.label,
                if rep.lower_bound { ">= " } else { "" },
                rep.target,
                measured
            );
            if let Some(path) = output {
                write_atomic(&path, &to_json(&rep))?;
            }
            Ok(true)
        }
        Command::Loja {
            action: LojaAction::Sweep { config, output },
        } => {
            let started = Instant::now();
            let cfg = match &config {
                Some(path) => ExperimentConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
                None => ExperimentConfig::default(),
            };
            let harness = Harness::new(cfg.clone())?;
            let sweeps = harness.sweep()?;
            let reports = harness.all_reports(&sweeps)?;
            let wide = NormalField::random_smooth(
                &harness.grid,
                cfg.family.seed,
                cfg.cylinder.y_max - 1.0,
                harness.grid.ambient_dim == 4,
            )?
            .normalized_c2(0.1 * cfg.eps2)?;
            let cutoff = harness.cutoff_constants(&wide)?;
            for r in &reports {
                print!("{}", r.to_text());
            }
            std::fs::create_dir_all(&output)?;
            let body = json!({
                "report_format_version": REPORT_FORMAT_VERSION,
                "exponents": cfg.exponents(),
                "reports": reports,
                "scaling": scaling_slopes(&sweeps),
                "cutoff": cutoff,
                "measures": sweeps,
            });
            write_atomic(&output.join("loja_report.json"), &to_json(&body))?;
            write_atomic(&output.join("loja_sweep.csv"), &sweep_csv(&reports)?)?;
            let text: String = reports.iter().map(|r| r.to_text()).collect();
            write_atomic(&output.join("loja_report.txt"), &text)?;
            let manifest = json!({
                "config_path": config.as_ref().map(|p| p.display().to_string()),
                "config": cfg,
                "schema_versions": {
                    "profile": PROFILE_FORMAT_VERSION,
                    "report": REPORT_FORMAT_VERSION,
                    "config": CONFIG_FORMAT_VERSION,
                },
                "seed": cfg.family.seed,
                "wall_clock_seconds": started.elapsed().as_secs_f64(),
            });
            write_atomic(&output.join("manifest.json"), &to_json(&manifest))?;
            // inequality reports are soft: they never fail the run
            Ok(true)
        }
        Command::Interp {
            action:
                InterpAction::Check {
                    n,
                    m,
                    j,
                    r,
                    omegas,
                    output,
                },
        } => {
            let sweep = frequency_sweep(n, r, m, j, &omegas)?;
            for p in &sweep.points {
                println!(
                    "omega {:>6} lhs {:.4e} rhs {:.4e} ratio {:.4e}",
                    p.parameter, p.lhs, p.rhs, p.ratio
                );
            }
            println!(
                "a = {:.6} tail slope {:.3} (predicted {:.3}) {}",
                sweep.points.first().map_or(f64::NAN, |p| p.exponent),
                sweep.tail_slope,
                sweep.predicted_slope,
                if sweep.bounded { "bounded" } else { "growing" }
            );
            if let Some(path) = output {
                write_atomic(&path, &to_json(&sweep))?;
            }
            Ok(true)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SHRINKER_LAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| LabError::InvalidInput(format!("SHRINKER_LAB_THREADS = '{v}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
