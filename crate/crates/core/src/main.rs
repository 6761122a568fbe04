use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use descent_pde::experiment::{
    compute_reference, fem_convergence_probe, reference::cache_dir, run_checks, run_table, CheckOptions,
    ExperimentConfig, ExperimentError, FINE_SCALE_LEVEL,
};
use descent_pde::{build_lshape, FemSystem};

#[derive(Parser)]
#[command(version, about = "Fixed-point iterations and PNCG for a quasilinear elliptic model problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print vertex, triangle and dof counts of the L-shape mesh.
    MeshInfo {
        #[arg(long)]
        level: u32,
        /// Write the mesh as `v x y` / `t i j k` lines.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Compute (or load from cache) the discrete reference solution.
    Reference {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the iteration-count table.
    Table {
        #[arg(long)]
        config: PathBuf,
        /// Use the finer mesh level instead of the configured one.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Run the property-check battery.
    Checks {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report discretisation errors across mesh levels.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        levels: Vec<u32>,
    },
}

fn setup(cfg: &ExperimentConfig) -> Result<FemSystem, ExperimentError> {
    Ok(FemSystem::new(build_lshape(cfg.mesh_level)?, cfg.model())?)
}

fn execute(command: Command) -> Result<bool, ExperimentError> {
    match command {
        Command::MeshInfo { level, dump } => {
            let mesh = build_lshape(level)?;
            println!("level      {level}");
            println!("vertices   {}", mesh.num_vertices());
            println!("triangles  {}", mesh.num_triangles());
            println!("dofs       {}", mesh.interior_dof_map().len());
            println!("area       {}", mesh.total_area());
            if let Some(path) = dump {
                std::fs::write(&path, mesh.to_text()).map_err(|e| ExperimentError::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                println!("mesh written to {}", path.display());
            }
            Ok(true)
        }
        Command::Reference { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let sys = setup(&cfg)?;
            let start = Instant::now();
            let r = compute_reference(&cfg, &sys)?;
            println!(
                "reference {} for case ({}), level {}, {} dofs in {:.1?}",
                if r.from_cache { "loaded" } else { "computed" },
                cfg.case_label,
                cfg.mesh_level,
                sys.num_dofs(),
                start.elapsed()
            );
            println!("||u_ref||_X = {:.12e}", sys.x_norm(&r.u));
            if let Some(p) = r.path {
                println!("cache {}", p.display());
            }
            Ok(true)
        }
        Command::Table { config, paper_scale } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if paper_scale {
                cfg = cfg.with_level(FINE_SCALE_LEVEL);
            }
            let sys = setup(&cfg)?;
            let start = Instant::now();
            let r = compute_reference(&cfg, &sys)?;
            eprintln!("reference ready after {:.1?} (cache {})", start.elapsed(), cache_dir(&cfg).display());
            let table = run_table(&cfg, &sys, &r.u);
            print!("{}", table.to_text());
            let files = table.write(&cfg.output_dir)?;
            eprintln!("{} files written to {} in {:.1?}", files.len(), cfg.output_dir.display(), start.elapsed());
            Ok(true)
        }
        Command::Checks { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_checks(&cfg, &CheckOptions::default())?;
            print!("{}", report.to_text());
            Ok(report.passed())
        }
        Command::Converge { config, levels } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = fem_convergence_probe(&cfg, &levels)?;
            print!("{}", report.to_text());
            std::fs::create_dir_all(&cfg.output_dir)
                .and_then(|()| {
                    std::fs::write(
                        cfg.output_dir.join(format!("converge_{}.csv", cfg.case_label)),
                        report.to_csv(),
                    )
                })
                .map_err(|e| ExperimentError::Io {
                    path: cfg.output_dir.display().to_string(),
                    source: e,
                })?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
