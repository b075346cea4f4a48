//! Command-line front end. Each subcommand prints one JSON record on stdout
//! and, with `--out DIR`, writes its JSON and CSV files into `DIR`.
//!
//! Exit codes: 0 success, 10 not quasiconvex (`classify`), 11 oracle
//! deviation above the configured bound (`oracle-check`), 2 usage or input
//! errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::convexity::classify_all;
use crate::energies::{resolve, Energy};
use crate::envelope::{monotone_convex_envelope, EnvelopeConfig, PiecewiseEnvelope};
use crate::grid::{log_space, LogGrid};
use crate::kinematics::{k_from_kk, Mat2};
use crate::microsim::{apply_affine_bc, export_fields, make_disc_mesh, minimize, quartiles, SimConfig};
use crate::oracles::{compare_oracle_to_envelope, polyconvex_envelope_diag, sc_envelope_grid, symmetric_log_axis, GridFunction2D};
use crate::relaxation::{disc_energies, laminate_certificate, max_gap, qw_eval};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_QUASICONVEX: i32 = 10;
pub const EXIT_ORACLE_DEVIATION: i32 = 11;

#[derive(Debug, Parser)]
#[command(name = "confrelax", version, about = "Relaxation of conformally invariant planar energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Energy tag such as `exp_hencky{k=0.11}`, or `table:<path>` for a sampled h.
    #[arg(long, global = true)]
    pub energy: Option<String>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for JSON and CSV files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Mesh level for `simulate`.
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Singular value ratio for `eval` and `laminate`.
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Perturbation seed for `simulate`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Convexity criteria; exit 10 if the energy is not quasiconvex.
    Classify,
    /// The relaxed profile `C_m h` and a sampled table `t, h, cmh`.
    Envelope,
    /// Binodal region, largest gap and the disc energies at its location.
    Gap,
    /// `W` and `QW` at a ratio `--t` or at `eval.matrix`.
    Eval,
    /// Laminate whose average has ratio `--t`.
    Laminate,
    /// Grid oracles against the envelope; exit 11 above the bounds.
    OracleCheck,
    /// Finite-element minimization on the unit disc.
    Simulate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// `h` is checked on `[1, h_t_max]`.
    pub h_t_max: f64,
    pub h_samples: usize,
    /// `g` is checked on `[g_lo, g_hi]²`.
    pub g_lo: f64,
    pub g_hi: f64,
    pub g_samples: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            h_t_max: 1e3,
            h_samples: 2000,
            g_lo: 0.1,
            g_hi: 10.0,
            g_samples: 200,
        }
    }
}

/// Sampling of the `envelope.csv` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub t_max: f64,
    pub samples: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            t_max: 100.0,
            samples: 1000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointConfig {
    pub t: Option<f64>,
    /// Row-major `[e11, e12, e21, e22]`.
    pub matrix: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Grids cover `[e^-radius, e^radius]` on both axes.
    pub radius: f64,
    pub sc_samples: usize,
    pub sc_tol: f64,
    pub max_sweeps: usize,
    pub sc_bound: f64,
    /// Set to 0 to skip the polyconvex check.
    pub pc_samples: usize,
    /// Radius for the polyconvex grid; defaults to `radius`.
    pub pc_radius: Option<f64>,
    pub pc_bound: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            radius: 4.0,
            sc_samples: 200,
            sc_tol: 1e-12,
            max_sweeps: 2000,
            sc_bound: 5e-3,
            pc_samples: 30,
            pc_radius: None,
            pc_bound: 1e-2,
        }
    }
}

/// Dirichlet data `F₀`: `f0` if given, else `diag(√stretch, 1/√stretch)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub stretch: f64,
    pub f0: Option<[f64; 4]>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { stretch: 1.0, f0: None }
    }
}

impl BoundaryConfig {
    pub fn f0(&self) -> Result<Mat2> {
        let f = match self.f0 {
            Some([a, b, c, d]) => Mat2::new(a, b, c, d),
            None => {
                if !(self.stretch > 0.0 && self.stretch.is_finite()) {
                    return Err(Error::Argument(format!("stretch must be positive, got {}", self.stretch)));
                }
                let s = self.stretch.sqrt();
                Mat2::diag(s, 1.0 / s)
            }
        };
        if !f.is_finite() || !(f.det() > 0.0) {
            return Err(Error::Domain(format!("boundary gradient needs det > 0, got {}", f.det())));
        }
        Ok(f)
    }
}

/// Everything a run reads; see `configs/` for recipes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub energy: Option<String>,
    pub out: Option<PathBuf>,
    pub envelope: EnvelopeConfig,
    pub classify: ClassifyConfig,
    pub table: TableConfig,
    pub eval: PointConfig,
    pub laminate: PointConfig,
    pub oracle: OracleConfig,
    pub boundary: BoundaryConfig,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Config file (if any) with the command-line flags applied on top.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(e) = &cli.energy {
            cfg.energy = Some(e.clone());
        }
        if let Some(o) = &cli.out {
            cfg.out = Some(o.clone());
        }
        if let Some(l) = cli.level {
            cfg.sim.level = l;
        }
        if let Some(s) = cli.seed {
            cfg.sim.seed = s;
        }
        if let Some(t) = cli.t {
            cfg.eval.t = Some(t);
            cfg.eval.matrix = None;
            cfg.laminate.t = Some(t);
        }
        cfg.envelope.validate()?;
        cfg.sim.validate()?;
        Ok(cfg)
    }

    fn energy(&self) -> Result<Energy> {
        let tag = self
            .energy
            .as_deref()
            .ok_or_else(|| Error::Argument("no energy given; use --energy or `energy = ...` in the config".into()))?;
        resolve(tag)
    }
}

/// Result of a subcommand: the stdout record and the exit code.
pub struct Outcome {
    pub record: Value,
    pub code: i32,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

fn out_dir(cfg: &RunConfig) -> Result<Option<&Path>> {
    match cfg.out.as_deref() {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Ok(Some(dir))
        }
        None => Ok(None),
    }
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let map = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(map)?;
    w.write_record(header).map_err(map)?;
    for row in rows {
        w.serialize(row).map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn envelope_for(cfg: &RunConfig) -> Result<(Energy, PiecewiseEnvelope)> {
    let e = cfg.energy()?;
    let env = monotone_convex_envelope(&e, &cfg.envelope)?;
    Ok((e, env))
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<Outcome> {
    let e = cfg.energy()?;
    let c = &cfg.classify;
    let grid = LogGrid::new(1.0, c.h_t_max, c.h_samples)?;
    let g_axis = LogGrid::new(c.g_lo, c.g_hi, c.g_samples)?;
    let verdict = classify_all(&e, &grid, &g_axis)?;
    let record = json!({
        "energy": e.label(),
        "quasiconvex": verdict.overall,
        "verdict": to_value(&verdict)?,
    });
    if let Some(dir) = out_dir(cfg)? {
        write_json(dir, "classify.json", &record)?;
    }
    let code = if verdict.overall { EXIT_OK } else { EXIT_NOT_QUASICONVEX };
    Ok(Outcome { record, code })
}

pub fn cmd_envelope(cfg: &RunConfig) -> Result<Outcome> {
    let (e, env) = envelope_for(cfg)?;
    let record: Value = serde_json::from_str(&env.to_json()?).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(dir) = out_dir(cfg)? {
        write_json(dir, "envelope.json", &record)?;
        let t = &cfg.table;
        LogGrid::new(1.0, t.t_max, t.samples)?;
        let rows = log_space(1.0, t.t_max, t.samples).into_iter().map(|x| (x, e.h(x), env.eval(x)));
        write_csv(&dir.join("envelope.csv"), &["t", "h", "cmh"], rows)?;
    }
    Ok(Outcome { record, code: EXIT_OK })
}

pub fn cmd_gap(cfg: &RunConfig) -> Result<Outcome> {
    let (e, env) = envelope_for(cfg)?;
    let gap = max_gap(&e, &env, &cfg.envelope)?;
    let s = gap.x0.sqrt();
    let (hom, rel) = disc_energies(&e, &env, &Mat2::diag(s, 1.0 / s))?;
    let record = json!({
        "energy": e.label(),
        "gap": to_value(&gap)?,
        "h_x0": e.h(gap.x0),
        "cmh_x0": env.eval(gap.x0),
        "disc_homogeneous": hom,
        "disc_relaxed": rel,
    });
    if let Some(dir) = out_dir(cfg)? {
        write_json(dir, "gap.json", &record)?;
    }
    Ok(Outcome { record, code: EXIT_OK })
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Outcome> {
    let (e, env) = envelope_for(cfg)?;
    let f = match (cfg.eval.matrix, cfg.eval.t) {
        (Some([a, b, c, d]), _) => Mat2::new(a, b, c, d),
        (None, Some(t)) => {
            if !(t >= 1.0 && t.is_finite()) {
                return Err(Error::Domain(format!("--t must be a ratio >= 1, got {t}")));
            }
            Mat2::diag(t, 1.0)
        }
        (None, None) => return Err(Error::Argument("eval needs --t or eval.matrix".into())),
    };
    let kk = crate::kinematics::outer_distortion(&f)?;
    let t = k_from_kk(kk)?;
    let w = e.eval_energy(&f)?;
    let qw = qw_eval(&e, &env, &f)?;
    let record = json!({
        "energy": e.label(),
        "matrix": to_value(&f)?,
        "t": t,
        "kk": kk,
        "w": w,
        "w_by_kk": e.eval_by_kk(&f)?,
        "qw": qw,
        "gap": w - qw,
    });
    if let Some(dir) = out_dir(cfg)? {
        write_json(dir, "eval.json", &record)?;
    }
    Ok(Outcome { record, code: EXIT_OK })
}

pub fn cmd_laminate(cfg: &RunConfig) -> Result<Outcome> {
    let (e, env) = envelope_for(cfg)?;
    let t = cfg.laminate.t.ok_or_else(|| Error::Argument("laminate needs --t or laminate.t".into()))?;
    let cert = laminate_certificate(&e, &env, t)?;
    let record = json!({ "energy": e.label(), "certificate": to_value(&cert)? });
    if let Some(dir) = out_dir(cfg)? {
        write_json(dir, "laminate.json", &record)?;
    }
    Ok(Outcome { record, code: EXIT_OK })
}

pub fn cmd_oracle_check(cfg: &RunConfig) -> Result<Outcome> {
    let (e, env) = envelope_for(cfg)?;
    let o = &cfg.oracle;
    if !(o.sc_bound > 0.0 && o.pc_bound > 0.0) {
        return Err(Error::Argument("oracle bounds must be positive".into()));
    }
    let sc_grid = GridFunction2D::sample(&e, &symmetric_log_axis(o.radius, o.sc_samples)?)?;
    let sc = sc_envelope_grid(&sc_grid, o.sc_tol, o.max_sweeps)?;
    let sc_cmp = compare_oracle_to_envelope(&sc.grid, &env)?;
    let mut pass = sc_cmp.max_abs_deviation <= o.sc_bound;
    let mut record = json!({
        "energy": e.label(),
        "separately_convex": {
            "radius": o.radius,
            "samples": o.sc_samples,
            "sweeps": sc.sweeps,
            "converged": sc.converged,
            "comparison": to_value(&sc_cmp)?,
            "bound": o.sc_bound,
            "pass": pass,
        },
    });
    let dir = out_dir(cfg)?;
    if let Some(dir) = dir {
        sc.grid.save_csv(&dir.join("oracle_sc.csv"))?;
    }
    if o.pc_samples > 0 {
        let radius = o.pc_radius.unwrap_or(o.radius);
        let pc_grid = GridFunction2D::sample(&e, &symmetric_log_axis(radius, o.pc_samples)?)?;
        let pc = polyconvex_envelope_diag(&pc_grid, 1e-10)?;
        let pc_cmp = compare_oracle_to_envelope(&pc.grid, &env)?;
        let pc_pass = pc_cmp.max_abs_deviation <= o.pc_bound;
        pass &= pc_pass;
        record["polyconvex"] = json!({
            "radius": radius,
            "samples": o.pc_samples,
            "failed_nodes": pc.boundary_flags.iter().filter(|&&f| f).count(),
            "max_support": pc.max_support,
            "comparison": to_value(&pc_cmp)?,
            "bound": o.pc_bound,
            "pass": pc_pass,
        });
        if let Some(dir) = dir {
            pc.grid.save_csv(&dir.join("oracle_pc.csv"))?;
        }
    }
    record["pass"] = json!(pass);
    if let Some(dir) = dir {
        write_json(dir, "oracle.json", &record)?;
    }
    let code = if pass { EXIT_OK } else { EXIT_ORACLE_DEVIATION };
    Ok(Outcome { record, code })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let (e, env) = envelope_for(cfg)?;
    let f0 = cfg.boundary.f0()?;
    let mesh = make_disc_mesh(cfg.sim.level);
    let mut field = apply_affine_bc(&mesh, &f0)?;
    let report = minimize(&e, &mesh, &mut field, &cfg.sim)?;
    let area = report.mesh_area;
    let kk_q = quartiles(&report.element_kk);
    let det_q = quartiles(&report.element_det);
    let record = json!({
        "energy": e.label(),
        "level": cfg.sim.level,
        "seed": cfg.sim.seed,
        "f0": to_value(&f0)?,
        "nodes": report.nodes,
        "triangles": report.triangles,
        "mesh_area": area,
        "status": to_value(&report.status)?,
        "iterations": report.iterations,
        "start_energy": report.start_energy,
        "final_energy": report.final_energy,
        "homogeneous_bound": area * e.eval_energy(&f0)?,
        "relaxed_bound": area * qw_eval(&e, &env, &f0)?,
        "grad_norm": report.grad_norm,
        "kk_quartiles": kk_q,
        "det_quartiles": det_q,
    });
    if let Some(dir) = out_dir(cfg)? {
        write_json(dir, "simulate.json", &record)?;
        write_json(dir, "report.json", &to_value(&report)?)?;
        export_fields(&mesh, &field, &dir.join("fields.csv"))?;
        write_csv(&dir.join("energies.csv"), &["iteration", "energy"], &report.energies)?;
    }
    Ok(Outcome { record, code: EXIT_OK })
}

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Classify => cmd_classify(cfg),
        Command::Envelope => cmd_envelope(cfg),
        Command::Gap => cmd_gap(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Laminate => cmd_laminate(cfg),
        Command::OracleCheck => cmd_oracle_check(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. The record goes to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = RunConfig::from_cli(&cli).and_then(|cfg| dispatch(cli.command, &cfg));
    match result {
        Ok(outcome) => {
            match serde_json::to_string_pretty(&outcome.record) {
                Ok(text) => println!("{text}"),
                Err(err) => {
                    eprintln!("error: {err}");
                    return EXIT_USAGE;
                }
            }
            outcome.code
        }
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_USAGE
        }
    }
}
