//! Flag and config-file parsing.
//!
//! Configuration comes from `key = value` file lines (UTF-8, `#` comments)
//! and command-line flags; flags override the file. Keys mirror the flag
//! names without the leading dashes.

use crate::error::CliError;
use fracell::eigen::DeltaPolicy;
use fracell::fem::{ProblemSpec, RightHandSide};
use fracell::mesh::{generate_cut_square_mesh, generate_square_mesh, load_mesh, Mesh};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Where the mesh comes from: a generator (`square:n` / `cut:n`) or a mesh
/// file (`file:path`).
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Square(usize),
    Cut(usize),
    File(PathBuf),
}

impl MeshSource {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let (kind, arg) = text.split_once(':').ok_or_else(|| {
            CliError::Usage(format!(
                "mesh `{text}` should be square:<n>, cut:<n> or file:<path>"
            ))
        })?;
        match kind {
            "square" | "cut" => {
                let n: usize = arg.parse().map_err(|_| {
                    CliError::Usage(format!("mesh subdivision `{arg}` is not an integer"))
                })?;
                if kind == "square" {
                    if n < 1 {
                        return Err(CliError::Validation("square mesh needs n >= 1".into()));
                    }
                    Ok(MeshSource::Square(n))
                } else {
                    if n < 4 || !n.is_multiple_of(2) {
                        return Err(CliError::Validation(
                            "cut mesh needs even n >= 4 so grid lines hit (0.5, 0) and (0, 0.5)"
                                .into(),
                        ));
                    }
                    Ok(MeshSource::Cut(n))
                }
            }
            "file" => Ok(MeshSource::File(PathBuf::from(arg))),
            other => Err(CliError::Usage(format!("unknown mesh kind `{other}`"))),
        }
    }

    pub fn load(&self) -> Result<Mesh, CliError> {
        match self {
            MeshSource::Square(n) => Ok(generate_square_mesh(*n)),
            MeshSource::Cut(n) => Ok(generate_cut_square_mesh(*n)?),
            MeshSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                Ok(load_mesh(&text)?)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeshSource::Square(n) => format!("square:{n}"),
            MeshSource::Cut(n) => format!("cut:{n}"),
            MeshSource::File(path) => format!("file:{}", path.display()),
        }
    }
}

/// One fully validated run: problem coefficients, scheme parameters, delta
/// policy and output options.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub mu: f64,
    pub k: f64,
    pub c: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub steps: usize,
    pub delta: DeltaPolicy,
    pub out_dir: PathBuf,
    pub emit_vtk: bool,
    pub strict: bool,
}

impl RunConfig {
    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            k: self.k,
            c: self.c,
            mu: self.mu,
            f: RightHandSide::Constant(1.0),
            alpha: self.alpha,
        }
    }
}

/// Lists for the sweep harness; the Cartesian product over (N, alpha, sigma,
/// mu) is bounded to keep a sweep desk-scale.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub steps_list: Vec<usize>,
    pub alpha_list: Vec<f64>,
    pub sigma_list: Vec<f64>,
    pub mu_list: Vec<f64>,
    pub base: RunConfig,
}

pub const MAX_SWEEP_RUNS: usize = 500;

impl SweepPlan {
    pub fn run_count(&self) -> usize {
        self.steps_list.len() * self.alpha_list.len() * self.sigma_list.len() * self.mu_list.len()
    }
}

const VALUE_KEYS: &[&str] = &[
    "mesh",
    "mu",
    "k",
    "c",
    "alpha",
    "sigma",
    "steps",
    "delta-scale",
    "delta-fixed",
    "out",
    "config",
];
const SWITCH_KEYS: &[&str] = &["strict", "vtk", "no-vtk"];

/// Raw key/value view of flags plus config file, before semantic validation.
#[derive(Debug, Default, Clone)]
pub struct RawOptions {
    values: BTreeMap<String, String>,
    switches: Vec<String>,
}

impl RawOptions {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set_value(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn has_switch(&self, key: &str) -> bool {
        self.switches.iter().any(|s| s == key)
    }
}

/// Splits the argument vector into a subcommand and raw options, merging in
/// the `--config` file when given (flags win).
pub fn parse_raw(args: &[String]) -> Result<(String, RawOptions), CliError> {
    let mut iter = args.iter();
    let subcommand = iter
        .next()
        .ok_or_else(|| CliError::Usage("missing subcommand; see --help".into()))?
        .clone();
    let mut flag_values = BTreeMap::new();
    let mut switches = Vec::new();
    while let Some(arg) = iter.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("expected a --flag, found `{arg}`")))?;
        if SWITCH_KEYS.contains(&key) {
            switches.push(key.to_string());
        } else if VALUE_KEYS.contains(&key) {
            let value = iter
                .next()
                .ok_or_else(|| CliError::Usage(format!("flag --{key} needs a value")))?;
            flag_values.insert(key.to_string(), value.clone());
        } else {
            return Err(CliError::Usage(format!("unknown flag --{key}")));
        }
    }

    let mut values = BTreeMap::new();
    if let Some(path) = flag_values.get("config") {
        for (number, raw_line) in std::fs::read_to_string(path)?.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "config line {} is not `key = value`: `{line}`",
                    number + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if SWITCH_KEYS.contains(&key) {
                let on: bool = value.parse().map_err(|_| {
                    CliError::Usage(format!("config switch `{key}` must be true/false"))
                })?;
                if on {
                    switches.push(key.to_string());
                }
            } else if VALUE_KEYS.contains(&key) && key != "config" {
                values.insert(key.to_string(), value.to_string());
            } else {
                return Err(CliError::Usage(format!("unknown config key `{key}`")));
            }
        }
    }
    // flags override the file
    values.extend(flag_values);
    Ok((subcommand, RawOptions { values, switches }))
}

fn parse_number(options: &RawOptions, key: &str, default: f64) -> Result<f64, CliError> {
    match options.get(key) {
        None => Ok(default),
        Some(text) => text
            .parse()
            .map_err(|_| CliError::Usage(format!("--{key} value `{text}` is not a number"))),
    }
}

fn parse_count(options: &RawOptions, key: &str, default: usize) -> Result<usize, CliError> {
    match options.get(key) {
        None => Ok(default),
        Some(text) => text
            .parse()
            .map_err(|_| CliError::Usage(format!("--{key} value `{text}` is not an integer"))),
    }
}

fn parse_list<T: std::str::FromStr + Clone>(
    options: &RawOptions,
    key: &str,
    default: &[T],
) -> Result<Vec<T>, CliError> {
    match options.get(key) {
        None => Ok(default.to_vec()),
        Some(text) => text
            .split(',')
            .map(|tok| {
                tok.trim().parse().map_err(|_| {
                    CliError::Usage(format!("--{key} entry `{tok}` is not valid"))
                })
            })
            .collect(),
    }
}

fn parse_delta_policy(options: &RawOptions) -> Result<DeltaPolicy, CliError> {
    match (options.get("delta-scale"), options.get("delta-fixed")) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--delta-scale and --delta-fixed are mutually exclusive".into(),
        )),
        (Some(text), None) => {
            let factor: f64 = text.parse().map_err(|_| {
                CliError::Usage(format!("--delta-scale value `{text}` is not a number"))
            })?;
            if !factor.is_finite() || factor <= 0.0 || factor > 1.0 {
                return Err(CliError::Validation(format!(
                    "delta scale must lie in (0, 1], got {factor}"
                )));
            }
            Ok(DeltaPolicy::Scaled(factor))
        }
        (None, Some(text)) => {
            let value: f64 = text.parse().map_err(|_| {
                CliError::Usage(format!("--delta-fixed value `{text}` is not a number"))
            })?;
            if !value.is_finite() || value <= 0.0 {
                return Err(CliError::Validation(format!(
                    "fixed delta must be positive, got {value}"
                )));
            }
            Ok(DeltaPolicy::Fixed(value))
        }
        (None, None) => Ok(DeltaPolicy::Computed),
    }
}

/// Builds a single-run configuration; the §5 baseline values are the
/// defaults: k=1, c=0, mu=10, alpha=0.5, sigma=0.5, N=100.
pub fn build_run_config(options: &RawOptions) -> Result<RunConfig, CliError> {
    let mesh_text = options
        .get("mesh")
        .ok_or_else(|| CliError::Usage("--mesh <square:n|cut:n|file:path> is required".into()))?;
    let config = RunConfig {
        mesh: MeshSource::parse(mesh_text)?,
        mu: parse_number(options, "mu", 10.0)?,
        k: parse_number(options, "k", 1.0)?,
        c: parse_number(options, "c", 0.0)?,
        alpha: parse_number(options, "alpha", 0.5)?,
        sigma: parse_number(options, "sigma", 0.5)?,
        steps: parse_count(options, "steps", 100)?,
        delta: parse_delta_policy(options)?,
        out_dir: PathBuf::from(options.get("out").unwrap_or("out")),
        emit_vtk: !options.has_switch("no-vtk"),
        strict: options.has_switch("strict"),
    };
    validate_run_config(&config)?;
    Ok(config)
}

fn validate_scalars(k: f64, c: f64, mu: f64, alpha: f64, sigma: f64, steps: usize) -> Result<(), CliError> {
    let spec = ProblemSpec {
        k,
        c,
        mu,
        f: RightHandSide::Constant(1.0),
        alpha,
    };
    spec.validate().map_err(CliError::from)?;
    if !(0.5..=1.0).contains(&sigma) {
        return Err(CliError::Validation(format!(
            "sigma must lie in [0.5, 1] for the scheme to be stable, got {sigma}"
        )));
    }
    if steps == 0 {
        return Err(CliError::Validation("steps must be at least 1".into()));
    }
    Ok(())
}

fn validate_run_config(config: &RunConfig) -> Result<(), CliError> {
    validate_scalars(
        config.k,
        config.c,
        config.mu,
        config.alpha,
        config.sigma,
        config.steps,
    )
}

/// Builds a sweep plan; list-valued flags take comma-separated entries.
pub fn build_sweep_plan(options: &RawOptions) -> Result<SweepPlan, CliError> {
    let steps_list: Vec<usize> = parse_list(options, "steps", &[5, 10, 25, 50, 100])?;
    let alpha_list: Vec<f64> = parse_list(options, "alpha", &[0.5])?;
    let sigma_list: Vec<f64> = parse_list(options, "sigma", &[0.5])?;
    let mu_list: Vec<f64> = parse_list(options, "mu", &[10.0])?;
    if steps_list.is_empty() || alpha_list.is_empty() || sigma_list.is_empty() || mu_list.is_empty()
    {
        return Err(CliError::Validation("sweep lists must be non-empty".into()));
    }
    let mesh_text = options
        .get("mesh")
        .ok_or_else(|| CliError::Usage("--mesh <square:n|cut:n|file:path> is required".into()))?;
    let base = RunConfig {
        mesh: MeshSource::parse(mesh_text)?,
        mu: mu_list[0],
        k: parse_number(options, "k", 1.0)?,
        c: parse_number(options, "c", 0.0)?,
        alpha: alpha_list[0],
        sigma: sigma_list[0],
        steps: *steps_list.last().unwrap(),
        delta: parse_delta_policy(options)?,
        out_dir: PathBuf::from(options.get("out").unwrap_or("out")),
        emit_vtk: !options.has_switch("no-vtk"),
        strict: options.has_switch("strict"),
    };
    let plan = SweepPlan {
        steps_list,
        alpha_list,
        sigma_list,
        mu_list,
        base,
    };
    for &alpha in &plan.alpha_list {
        for &sigma in &plan.sigma_list {
            for &mu in &plan.mu_list {
                for &steps in &plan.steps_list {
                    validate_scalars(plan.base.k, plan.base.c, mu, alpha, sigma, steps)?;
                }
            }
        }
    }
    if plan.run_count() > MAX_SWEEP_RUNS {
        return Err(CliError::Validation(format!(
            "sweep would launch {} runs, the cap is {MAX_SWEEP_RUNS}",
            plan.run_count()
        )));
    }
    Ok(plan)
}

/// N list for oracle-check convergence studies.
pub fn build_steps_list(options: &RawOptions) -> Result<Vec<usize>, CliError> {
    let list: Vec<usize> = parse_list(options, "steps", &[8, 16, 32, 64])?;
    if list.is_empty() {
        return Err(CliError::Validation("steps list must be non-empty".into()));
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn baseline_flags() {
        let (cmd, options) = parse_raw(&args(&[
            "solve", "--mesh", "cut:16", "--mu", "10", "--alpha", "0.5", "--sigma", "0.5",
            "--steps", "100",
        ]))
        .unwrap();
        assert_eq!(cmd, "solve");
        let config = build_run_config(&options).unwrap();
        assert_eq!(config.mesh, MeshSource::Cut(16));
        assert_eq!(config.mu, 10.0);
        assert_eq!(config.alpha, 0.5);
        assert_eq!(config.sigma, 0.5);
        assert_eq!(config.steps, 100);
        assert_eq!(config.delta, DeltaPolicy::Computed);
        assert!(config.emit_vtk);
    }

    #[test]
    fn sigma_below_half_is_validation_error() {
        let (_, options) = parse_raw(&args(&["solve", "--mesh", "cut:16", "--sigma", "0.3"])).unwrap();
        let err = build_run_config(&options).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn delta_scale_flag() {
        let (_, options) =
            parse_raw(&args(&["solve", "--mesh", "cut:16", "--delta-scale", "0.25"])).unwrap();
        let config = build_run_config(&options).unwrap();
        assert_eq!(config.delta, DeltaPolicy::Scaled(0.25));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let err = parse_raw(&args(&["solve", "--bogus", "1"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn conflicting_delta_flags() {
        let (_, options) = parse_raw(&args(&[
            "solve", "--mesh", "cut:16", "--delta-scale", "0.5", "--delta-fixed", "2.0",
        ]))
        .unwrap();
        let err = build_run_config(&options).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn config_file_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# baseline\nmesh = cut:16\nmu = 10\nsigma = 0.5\n").unwrap();
        let (_, options) = parse_raw(&args(&[
            "solve",
            "--config",
            path.to_str().unwrap(),
            "--mu",
            "100",
        ]))
        .unwrap();
        let config = build_run_config(&options).unwrap();
        assert_eq!(config.mu, 100.0, "flag overrides file");
        assert_eq!(config.mesh, MeshSource::Cut(16));
    }

    #[test]
    fn sweep_cap_enforced() {
        let (_, options) = parse_raw(&args(&[
            "sweep",
            "--mesh",
            "cut:8",
            "--steps",
            &(1..=101).map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            "--alpha",
            "0.2,0.3,0.4,0.5,0.6,0.7",
        ]))
        .unwrap();
        let err = build_sweep_plan(&options).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn mesh_source_validation() {
        assert!(MeshSource::parse("cut:15").is_err());
        assert!(MeshSource::parse("cut:2").is_err());
        assert!(MeshSource::parse("square:0").is_err());
        assert!(MeshSource::parse("torus:4").is_err());
        assert!(MeshSource::parse("16").is_err());
        assert_eq!(
            MeshSource::parse("file:meshes/domain.txt").unwrap(),
            MeshSource::File(PathBuf::from("meshes/domain.txt"))
        );
    }
}
