//! Batch front end: validation benchmark, potential maps, shape discovery
//! runs with checkpoint/resume, geometry export, and material listings.
//!
//! Exit codes: 0 success, 2 validation/configuration failure, 3 numerical
//! failure (a checkpoint is left behind when one exists).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpforge::config::RunConfig;
use cpforge::error::Error;
use cpforge::export;
use cpforge::geom::Vec3;
use cpforge::materials;
use cpforge::optim::{self, Checkpoint, DiscoveryContext, OptimizationState, RunStatus};
use cpforge::report;

#[derive(Parser)]
#[command(name = "cpforge", version, about = "Casimir-Polder inverse design in the time domain")]
struct Cli {
    /// Cap the number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root for output directories; overrides CPFORGE_OUTPUT_ROOT.
    #[arg(long, global = true)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration file.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// PEC-plane benchmark against the image-dipole oracle.
    ValidatePlane {
        #[command(flatten)]
        config: ConfigArg,
        /// Also rerun the ladder at doubled resolution and compare.
        #[arg(long)]
        resolution_study: bool,
    },
    /// Evaluate the potential at points listed in a file (x y z per line).
    Potential {
        #[command(flatten)]
        config: ConfigArg,
        /// Points file.
        #[arg(long)]
        points: PathBuf,
    },
    /// Run the shape-discovery loop.
    Optimize {
        #[command(flatten)]
        config: ConfigArg,
        /// Keep only the merit history and the final geometry.
        #[arg(long)]
        lean: bool,
    },
    /// Continue an interrupted discovery run.
    Resume {
        /// Checkpoint written by `optimize`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Convert a level-set snapshot to a contour (2D) or mesh (3D).
    Export {
        /// Level-set field snapshot.
        #[arg(long)]
        input: PathBuf,
        /// Output path (.txt polylines for 2D, .obj for 3D).
        #[arg(long)]
        output: PathBuf,
    },
    /// Material preset utilities.
    Materials {
        #[command(subcommand)]
        action: MaterialsAction,
    },
}

#[derive(Subcommand)]
enum MaterialsAction {
    /// Print the available presets in simulation units.
    List {
        /// Length scale for the unit conversion (nm).
        #[arg(long, default_value_t = 100.0)]
        l0_nm: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("failed to size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let output_root = cli
        .output_root
        .or_else(|| std::env::var_os("CPFORGE_OUTPUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let result = match cli.command {
        Command::ValidatePlane { config, resolution_study } => {
            cmd_validate_plane(&config.config, resolution_study)
        }
        Command::Potential { config, points } => {
            cmd_potential(&config.config, &points, &output_root)
        }
        Command::Optimize { config, lean } => cmd_optimize(&config.config, lean, &output_root),
        Command::Resume { checkpoint } => cmd_resume(&checkpoint, &output_root),
        Command::Export { input, output } => cmd_export(&input, &output),
        Command::Materials { action } => match action {
            MaterialsAction::List { l0_nm } => cmd_materials_list(l0_nm),
        },
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

enum CmdError {
    Validation(String),
    Numerical(String),
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(m) => CmdError::Numerical(m),
            other => CmdError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Validation(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Validation(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::parse(&text)?)
}

fn cmd_validate_plane(config: &Path, resolution_study: bool) -> Result<(), CmdError> {
    let cfg = load_config(config)?;
    let rep = report::validate_plane(&cfg, &report::PLANE_SEPARATIONS, report::PLANE_TOLERANCE)?;
    print!("{}", rep.render());

    if resolution_study {
        let mut fine = cfg.clone();
        fine.resolution *= 2;
        let rep2 =
            report::validate_plane(&fine, &report::PLANE_SEPARATIONS, report::PLANE_TOLERANCE)?;
        println!("\nat {} cells/L0:", fine.resolution);
        print!("{}", rep2.render());
        let med = |r: &report::PlaneReport| {
            let mut e: Vec<f64> = r.rows.iter().map(|x| x.rel_err).collect();
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            e[e.len() / 2]
        };
        println!(
            "median relative error: {:.3} -> {:.3} after doubling resolution",
            med(&rep),
            med(&rep2)
        );
    }
    if rep.passed {
        Ok(())
    } else {
        Err(CmdError::Validation("plane benchmark out of tolerance".into()))
    }
}

fn parse_points(path: &Path) -> Result<Vec<Vec3>, CmdError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                CmdError::Validation(format!("points file line {}: not numbers", lineno + 1))
            })?;
        if parts.len() != 3 {
            return Err(CmdError::Validation(format!(
                "points file line {}: expected three coordinates",
                lineno + 1
            )));
        }
        out.push(Vec3::new(parts[0], parts[1], parts[2]));
    }
    Ok(out)
}

fn out_dir(root: &Path, cfg: &RunConfig) -> Result<PathBuf, CmdError> {
    let dir = root.join(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    export::check_provenance(&dir, cfg.hash())?;
    Ok(dir)
}

fn cmd_potential(config: &Path, points: &Path, root: &Path) -> Result<(), CmdError> {
    let cfg = load_config(config)?;
    let pts = parse_points(points)?;
    let rows = report::potential_map(&cfg, &pts)?;
    let dir = out_dir(root, &cfg)?;
    let table = export::potential_table(&rows, cfg.hash());
    let path = dir.join("potential.csv");
    std::fs::write(&path, table)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn write_run_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    state: &OptimizationState,
) -> Result<(), CmdError> {
    std::fs::write(dir.join("merit_history.csv"), export::merit_history_csv(state, cfg.hash()))?;
    export::write_level_set(&dir.join("geometry_final.field"), &state.phi, cfg.hash())?;
    if !cfg.lean {
        for (q, snap) in state.snapshots.iter().enumerate() {
            export::write_level_set(&dir.join(format!("geometry_{q:03}.field")), snap, cfg.hash())?;
        }
    }
    let status = match state.status {
        Some(RunStatus::Converged) => "converged",
        Some(RunStatus::Budget) => "budget",
        Some(RunStatus::Stalled) => "stalled",
        None => "incomplete",
    };
    let final_merit = state.current_merit().unwrap_or(f64::NAN);
    let summary = format!(
        "status {status}\niterations {}\nfinal_merit {final_merit:.9e}\nbacktracks {}\nconfig_hash {:016x}\n",
        state.iteration, state.backtrack_events, cfg.hash()
    );
    std::fs::write(dir.join("summary.txt"), summary)?;
    println!(
        "{status} after {} iterations, final merit {final_merit:.6e} -> {}",
        state.iteration,
        dir.display()
    );
    Ok(())
}

fn drive(
    cfg: &RunConfig,
    state: OptimizationState,
    dir: &Path,
) -> Result<OptimizationState, CmdError> {
    let ctx = DiscoveryContext {
        pipeline: cfg.pipeline()?,
        metal: cfg.drude()?,
        settings: cfg.optimizer_settings(),
    };
    let checkpoint_path = dir.join("checkpoint.cpf");
    let cfg_text = cfg.canonical_text();
    let cfg_hash = cfg.hash();
    let result = optim::run(&ctx, state, |state, report| {
        println!(
            "iteration {:>3}: merit {:+.6e} ({}{})",
            state.iteration,
            report.merit,
            if report.accepted { "accepted" } else { "rejected" },
            if report.halvings > 0 {
                format!(", {} halvings", report.halvings)
            } else {
                String::new()
            }
        );
        let cp = Checkpoint {
            config_hash: cfg_hash,
            config_text: cfg_text.clone(),
            state: state.clone(),
        };
        if let Err(e) = cp.save(&checkpoint_path) {
            eprintln!("warning: checkpoint write failed: {e}");
        }
    });
    match result {
        Ok(state) => Ok(state),
        Err(e @ Error::Numerical(_)) => {
            eprintln!("run aborted; checkpoint retained at {}", checkpoint_path.display());
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_optimize(config: &Path, lean: bool, root: &Path) -> Result<(), CmdError> {
    let mut cfg = load_config(config)?;
    if lean {
        cfg.lean = true;
    }
    let dir = out_dir(root, &cfg)?;
    let state = OptimizationState::new(cfg.initial_level_set()?);
    let state = drive(&cfg, state, &dir)?;
    write_run_artifacts(&dir, &cfg, &state)
}

fn cmd_resume(checkpoint: &Path, root: &Path) -> Result<(), CmdError> {
    let cp = Checkpoint::load(checkpoint)?;
    let cfg = RunConfig::parse(&cp.config_text)?;
    cp.verify(cfg.hash(), cfg.sim_config().dims())?;
    let dir = out_dir(root, &cfg)?;
    let state = drive(&cfg, cp.state, &dir)?;
    write_run_artifacts(&dir, &cfg, &state)
}

fn cmd_export(input: &Path, output: &Path) -> Result<(), CmdError> {
    let (field, header) = export::read_level_set(input)?;
    if field.two_d {
        let lines = export::contour_polylines(&field);
        if lines.is_empty() {
            return Err(CmdError::Validation("level set has an empty interior".into()));
        }
        std::fs::write(output, export::polylines_to_text(&lines, header.config_hash))?;
        println!("wrote {} polylines to {}", lines.len(), output.display());
    } else {
        let mesh = export::isosurface(&field)?;
        std::fs::write(output, mesh.to_obj(header.config_hash))?;
        println!(
            "wrote mesh: {} vertices, {} triangles, Euler characteristic {}",
            mesh.vertices.len(),
            mesh.triangles.len(),
            mesh.euler_characteristic()
        );
    }
    Ok(())
}

fn cmd_materials_list(l0_nm: f64) -> Result<(), CmdError> {
    println!("presets at L0 = {l0_nm} nm (angular frequencies in c/L0):");
    for name in materials::preset_names() {
        let p = materials::preset(name, l0_nm * 1e-9)?;
        println!(
            "  {name}: eps_inf = {}, omega_p = {:.6}, gamma_p = {:.6}",
            p.eps_inf, p.omega_p, p.gamma_p
        );
    }
    Ok(())
}
