//! Command-line front end and experiment harness for the fracell solver.
//!
//! Subcommands: `solve`, `eig`, `sweep`, `oracle-check`, `mesh-gen`.
//! Exit codes: 0 ok, 2 usage, 3 validation, 4 numerical failure, 5 io.

pub mod commands;
pub mod config;
pub mod error;
pub mod fmt;
pub mod vtk;

use error::CliError;

const USAGE: &str = "\
usage: fracell <subcommand> [flags]

subcommands:
  solve         integrate the pseudo-parabolic problem, write trace/summary/vtk
  eig           smallest generalized eigenvalue of (K, M)
  sweep         Cartesian sweep over steps/alpha/sigma/mu lists
  oracle-check  time-stepper error against the dense spectral solution
  mesh-gen      generate a mesh and write it in the plain-text format

flags:
  --mesh <square:n|cut:n|file:path>   mesh source (required)
  --mu <v> --k <v> --c <v>            coefficients (defaults 10, 1, 0)
  --alpha <v>                         fractional exponent in (0,1), default 0.5
  --sigma <v>                         scheme weight in [0.5,1], default 0.5
  --steps <n[,n...]>                  time steps; lists for sweep/oracle-check
  --delta-scale <f> | --delta-fixed <v>  delta policy (default: computed)
  --out <dir>                         output directory, default `out`
  --config <file>                     key = value file; flags override
  --vtk | --no-vtk                    toggle VTK output (default on)
  --strict                            enforce sweep convergence-ratio checks
";

/// Parses the argument vector, runs the requested command and maps errors to
/// exit codes. `args` excludes the program name.
pub fn dispatch(args: &[String]) -> i32 {
    match dispatch_inner(args) {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("{error}");
            if matches!(error, CliError::Usage(_)) {
                eprintln!("{USAGE}");
            }
            error.exit_code()
        }
    }
}

fn dispatch_inner(args: &[String]) -> Result<(), CliError> {
    if args.first().map(String::as_str) == Some("--help") {
        println!("{USAGE}");
        return Ok(());
    }
    let (subcommand, options) = config::parse_raw(args)?;
    match subcommand.as_str() {
        "solve" => commands::cmd_solve(&config::build_run_config(&options)?),
        "eig" => commands::cmd_eig(&config::build_run_config(&options)?),
        "sweep" => commands::cmd_sweep(&config::build_sweep_plan(&options)?),
        "oracle-check" => {
            let steps_list = config::build_steps_list(&options)?;
            // per-run steps come from the list; the single-value slot is a
            // placeholder satisfying validation
            let mut single = options.clone();
            single.set_value("steps", steps_list.iter().max().unwrap().to_string());
            commands::cmd_oracle_check(&config::build_run_config(&single)?, &steps_list)
        }
        "mesh-gen" => commands::cmd_mesh_gen(&config::build_run_config(&options)?),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}
