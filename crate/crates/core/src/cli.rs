//! Command-line front end: transforms and verification suites on seeded or
//! file-described instances, with JSON reports and a fixed exit-code contract.

use crate::curve::SpectralCurve;
use crate::error::{Error, Result};
use crate::json::{cpx, parse_cpx_vec, Report};
use crate::linalg::C64;
use crate::periods::{agm_tau, PeriodData};
use crate::poly::Poly;
use crate::ratmat::{random_phase_point, PhasePoint};
use crate::symplectic::{verify_induced_kk, FdConfig, SymplecticContext};
use crate::theta::{Marked, SurfaceKernels};
use crate::transform::{direct, inverse, inverse_at, roundtrip, z0_independence, SpectralData};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "szego", about = "Spectral transform and its verification suites")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Input file(s); when absent a random instance is drawn from --seed.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 4)]
    pub m: usize,
    /// Basepoint override as `re,im`.
    #[arg(long, global = true, value_parser = parse_z0, allow_hyphen_values = true)]
    pub z0: Option<C64>,
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// Relative finite-difference step.
    #[arg(long = "fd-step", global = true, default_value_t = 1e-5)]
    pub fd_step: f64,
    #[arg(long = "quad-target", global = true, default_value_t = 1e-12)]
    pub quad_target: f64,
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long = "no-timestamp", global = true)]
    pub no_timestamp: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Phase point to spectral data.
    Forward,
    /// Spectral data to phase point.
    Inverse,
    /// Run one verification suite.
    Verify { suite: Suite },
    /// Period matrix, action periods and residues.
    Periods,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fay,
    Sheetsum,
    DqSzego,
    SzegoVar,
    Darboux,
    KSymmetry,
    Poisson,
    Roundtrip,
    Z0Indep,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Fay => "fay",
            Suite::Sheetsum => "sheetsum",
            Suite::DqSzego => "dq-szego",
            Suite::SzegoVar => "szego-var",
            Suite::Darboux => "darboux",
            Suite::KSymmetry => "k-symmetry",
            Suite::Poisson => "poisson",
            Suite::Roundtrip => "roundtrip",
            Suite::Z0Indep => "z0-indep",
        }
    }
}

fn parse_z0(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected re,im".into());
    }
    let re = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let im = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(C64::new(re, im))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol", self.tol), ("quad-target", self.quad_target), ("fd-step", self.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("--{name} must be positive")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
        }
        if let Some(out) = &self.out {
            if self.input.iter().any(|p| p == out) {
                return Err(Error::InvalidParameter("--out must differ from every --input".into()));
            }
        }
        self.fd().validate()
    }

    pub fn fd(&self) -> FdConfig {
        FdConfig { h: self.fd_step, ..FdConfig::default() }
    }

    fn instance_label(&self, i: usize) -> Value {
        match self.input.get(i) {
            Some(p) => json!({"input": p.display().to_string()}),
            None => json!({"seed": self.seed, "n": self.n, "m": self.m}),
        }
    }
}

/// One unit of work: an input file or a seeded instance.
#[derive(Clone, Debug)]
pub enum Instance {
    File(PathBuf),
    Seeded { n: usize, m: usize, seed: u64 },
}

impl Instance {
    fn read(&self) -> Result<Value> {
        match self {
            Instance::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
            }
            Instance::Seeded { .. } => Err(Error::InvalidParameter("seeded instance has no file".into())),
        }
    }

    pub fn phase_point(&self, tol: f64) -> Result<PhasePoint> {
        match self {
            Instance::Seeded { n, m, seed } => random_phase_point(*n, *m, *seed),
            Instance::File(_) => {
                let v = self.read()?;
                PhasePoint::from_json(v.get("point").unwrap_or(&v), tol.max(crate::ratmat::DEFAULT_TOL))
            }
        }
    }

    /// Spectral data from a file, or the forward transform of the seeded point.
    pub fn spectral_data(&self, cfg: &RunConfig) -> Result<SpectralData> {
        match self {
            Instance::File(_) => {
                let v = self.read()?;
                if v.get("q").is_some() {
                    SpectralData::from_json(&v)
                } else {
                    Ok(direct(&self.phase_point(cfg.tol)?, cfg.z0, cfg.quad_target)?.data)
                }
            }
            Instance::Seeded { .. } => Ok(direct(&self.phase_point(cfg.tol)?, cfg.z0, cfg.quad_target)?.data),
        }
    }

    /// The curve of a phase point, of spectral data, or `w^2 = P` from `{"hyperelliptic": [coeffs]}`.
    pub fn curve(&self, tol: f64) -> Result<SpectralCurve> {
        if let Instance::File(_) = self {
            let v = self.read()?;
            if let Some(c) = v.get("hyperelliptic") {
                return SpectralCurve::from_hyperelliptic(Poly::new(parse_cpx_vec(c, "hyperelliptic")?));
            }
            if let Some(c) = v.get("curve") {
                return SpectralCurve::from_json(c);
            }
        }
        SpectralCurve::build(&self.phase_point(tol)?.assemble()?)
    }
}

fn instances(cfg: &RunConfig) -> Vec<Instance> {
    if cfg.input.is_empty() {
        vec![Instance::Seeded { n: cfg.n, m: cfg.m, seed: cfg.seed }]
    } else {
        cfg.input.iter().cloned().map(Instance::File).collect()
    }
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn with_meta(mut v: Value, cfg: &RunConfig, command: &str) -> Value {
    let mut meta = json!({
        "command": command,
        "seed": cfg.seed,
        "z0": cfg.z0.map(cpx),
        "tol": cfg.tol,
        "quad_target": cfg.quad_target,
    });
    if !cfg.no_timestamp {
        meta["timestamp"] = json!(timestamp());
    }
    if let Value::Object(map) = &mut v {
        map.insert("meta".into(), meta);
    }
    v
}

pub fn cmd_forward(inst: &Instance, cfg: &RunConfig) -> Result<(Value, bool)> {
    let point = inst.phase_point(cfg.tol)?;
    let out = direct(&point, cfg.z0, cfg.quad_target)?;
    let kernels = SurfaceKernels::from_curve(&out.data.curve, cfg.quad_target)?;
    let coords = crate::transform::extract_coords(&out.data, &kernels, cfg.quad_target)?;
    let mut v = out.data.to_json(Some(&coords));
    v["diagnostics"] = json!({
        "conjugation_residual": out.conjugation_residual,
        "toric_offdiag": out.toric_offdiag,
    });
    Ok((with_meta(v, cfg, "forward"), true))
}

pub fn cmd_inverse(inst: &Instance, cfg: &RunConfig) -> Result<(Value, bool)> {
    let data = inst.spectral_data(cfg)?;
    let point = match cfg.z0 {
        Some(z0) => inverse_at(&data, z0, cfg.quad_target)?,
        None => inverse(&data, cfg.quad_target)?,
    };
    point.validate(1e-6)?;
    let mut v = json!({"point": point.to_json()});
    v["z0"] = cpx(cfg.z0.unwrap_or(data.curve.anchor));
    Ok((with_meta(v, cfg, "inverse"), true))
}

pub fn cmd_periods(inst: &Instance, cfg: &RunConfig) -> Result<(Value, bool)> {
    let curve = inst.curve(cfg.tol)?;
    let curve = match cfg.z0 {
        Some(z0) => curve.with_anchor(z0)?,
        None => curve,
    };
    let pd = PeriodData::compute(&curve, cfg.quad_target)?;
    let (actions, err) = pd.action_periods(cfg.quad_target)?;
    let residues = pd.residues_v()?;
    let mut v = pd.to_report_json(&actions, &residues, err.max(pd.quad_error));
    let sym = pd.symmetry_defect();
    let pos = pd.im_tau_positive();
    v["genus"] = json!(curve.genus);
    v["branch_points"] = json!(curve.branch_points.len());
    v["symmetry_residual"] = json!(sym);
    v["im_tau_positive"] = json!(pos);
    let mut pass = sym < 1e-10 && pos;
    if let Some(t) = agm_tau(&curve) {
        let d = (pd.tau[(0, 0)] - t).norm();
        v["agm_tau"] = cpx(t);
        v["agm_distance"] = json!(d);
        pass &= d < 1e-8;
    }
    v["pass"] = json!(pass);
    Ok((with_meta(v, cfg, "periods"), pass))
}

fn random_marked(k: &SurfaceKernels, rng: &mut ChaCha8Rng) -> Result<Marked> {
    let c = k.curve();
    let scale = c.branch_points.iter().chain(&c.poles).map(|z| z.norm()).fold(1.0, f64::max);
    for _ in 0..1000 {
        let z = C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
        let pole = c.poles.iter().map(|t| (z - t).norm()).fold(f64::INFINITY, f64::min);
        if c.branch_distance(z) > 0.1 && pole > 0.1 {
            return k.mark_at(z, rng.gen_range(1..=2));
        }
    }
    Err(Error::GenerationFailure { attempts: 1000 })
}

fn report(suite: Suite, cfg: &RunConfig, i: usize, residuals: Value, fd_steps: Vec<f64>, pass: bool) -> Report {
    Report { test: suite.name().into(), instance: cfg.instance_label(i), residuals, fd_steps, pass }
}

/// Run one suite on one instance.
pub fn cmd_verify(suite: Suite, inst: &Instance, cfg: &RunConfig, index: usize) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let kernels_and_q = || -> Result<(SurfaceKernels, Vec<C64>)> {
        let data = inst.spectral_data(cfg)?;
        let k = SurfaceKernels::from_curve(&data.curve, cfg.quad_target)?;
        Ok((k, data.q))
    };
    let context = || -> Result<SymplecticContext> {
        let data = inst.spectral_data(cfg)?;
        SymplecticContext::new(data, cfg.fd(), cfg.quad_target)
    };
    match suite {
        Suite::Fay => {
            let (k, q) = kernels_and_q()?;
            let pairs = (0..20).map(|_| Ok((random_marked(&k, &mut rng)?, random_marked(&k, &mut rng)?))).collect::<Result<Vec<_>>>()?;
            let r = k.verify_fay(&q, &pairs)?;
            let pass = r.max_relative_residual < 1e-8;
            Ok(report(suite, cfg, index, json!({"max_relative": r.max_relative_residual, "pairs": r.pairs}), vec![], pass))
        }
        Suite::Sheetsum => {
            let (k, q) = kernels_and_q()?;
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let x = random_marked(&k, &mut rng)?;
                let y = random_marked(&k, &mut rng)?;
                let z = random_marked(&k, &mut rng)?.point.z;
                worst = worst.max(k.sheet_sum_residual(&q, &x, &y, z)?);
            }
            Ok(report(suite, cfg, index, json!({"max_relative": worst, "triples": 20}), vec![], worst < 1e-8))
        }
        Suite::DqSzego => {
            let (k, q) = kernels_and_q()?;
            let mut per = Vec::new();
            for gamma in 0..k.genus() {
                // pairs inside one fundamental domain: the lift path crosses no a-cycle
                let (x, y) = loop {
                    let x = random_marked(&k, &mut rng)?;
                    let y = random_marked(&k, &mut rng)?;
                    if (0..k.genus()).map(|a| k.a_crossing(a, &x, &y)).collect::<Result<Vec<_>>>()?.iter().all(|&n| n == 0) {
                        break (x, y);
                    }
                };
                per.push(k.dq_szego_check(&q, gamma, &x, &y, cfg.fd_step)?);
            }
            let worst = per.iter().copied().fold(0.0, f64::max);
            Ok(report(suite, cfg, index, json!({"per_gamma": per, "max_relative": worst}), vec![cfg.fd_step, cfg.fd_step / 2.0], worst < 1e-6))
        }
        Suite::SzegoVar => {
            let ctx = context()?;
            let r = ctx.szego_variation(ctx.generic_point(1), ctx.generic_point(2), &[0])?;
            let steps = fd_steps(&ctx);
            Ok(report(suite, cfg, index, r.residuals_json(), steps, r.pass()))
        }
        Suite::Darboux => {
            let ctx = context()?;
            let r = ctx.verify_darboux(5, cfg.seed)?;
            let pass = r.contraction_pass() && r.form_pass();
            Ok(report(suite, cfg, index, r.residuals_json(), fd_steps(&ctx), pass))
        }
        Suite::KSymmetry => {
            let ctx = context()?;
            let r = ctx.verify_k_symmetry()?;
            Ok(report(suite, cfg, index, r.residuals_json(), fd_steps(&ctx), r.pass()))
        }
        Suite::Poisson => {
            let p = inst.phase_point(cfg.tol)?;
            let mut res = Vec::new();
            for j in 0..p.m() {
                let r = verify_induced_kk(&p.diagonalizers[j], &p.eigenvalues[j])?;
                let side = |m: &crate::linalg::CMat| -> Value {
                    (0..m.nrows()).map(|r| Value::Array((0..m.ncols()).map(|c| cpx(m[(r, c)])).collect())).collect()
                };
                res.push(json!({
                    "pole": j,
                    "residual": r.residual,
                    "antisymmetry": r.antisymmetry,
                    "chain_rule": side(&r.chain),
                    "kirillov_kostant": side(&r.closed_form),
                }));
            }
            let worst = res.iter().map(|r| r["residual"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
            Ok(report(suite, cfg, index, json!({"poles": res, "max_residual": worst}), vec![], worst < 1e-12))
        }
        Suite::Roundtrip => {
            let p = inst.phase_point(cfg.tol)?;
            let r = roundtrip(&p, cfg.z0, cfg.quad_target, 0.0)?;
            let pass = r.max_error() < 1e-6 && r.toric_offdiag < 1e-8;
            Ok(report(suite, cfg, index, r.to_json(), vec![], pass))
        }
        Suite::Z0Indep => {
            let data = inst.spectral_data(cfg)?;
            let c = &data.curve;
            let z0 = c.anchor;
            let z1 = (0..64)
                .map(|i| z0 + C64::from_polar(0.3, i as f64 * 0.7))
                .find(|z| c.branch_distance(*z) > 0.1 && c.poles.iter().all(|t| (z - t).norm() > 0.1))
                .ok_or(Error::GenerationFailure { attempts: 64 })?;
            let samples: Vec<C64> = (0..10)
                .map(|i| z0 + C64::from_polar(0.5 + 0.1 * i as f64, 0.9 * i as f64))
                .collect();
            let r = z0_independence(&data, z0, z1, &samples, cfg.quad_target)?;
            let res = json!({"conjugation": r.conjugation_residual, "q2": r.q2_residual, "z1": cpx(z1)});
            Ok(report(suite, cfg, index, res, vec![], r.conjugation_residual < 1e-6))
        }
    }
}

fn fd_steps(ctx: &SymplecticContext) -> Vec<f64> {
    let h = ctx.fd.h * ctx.coordinate_scale();
    (0..ctx.fd.levels).map(|i| h / 2f64.powi(i as i32)).collect()
}

/// Run `f` over the instances with up to `jobs` threads, keeping input order.
fn run_all<T, F>(items: &[Instance], jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &Instance) -> T + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let mut out: Vec<Option<T>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        for (c, slots) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            s.spawn(move || {
                for (k, slot) in slots.iter_mut().enumerate() {
                    let i = c * chunk + k;
                    *slot = Some(f(i, &items[i]));
                }
            });
        }
    });
    out.into_iter().map(|x| x.expect("every slot filled")).collect()
}

pub fn diagnostic(e: &Error) -> Value {
    json!({"error": e.variant_name(), "message": e.to_string(), "exit_code": e.exit_code()})
}

fn write_output(cfg: &RunConfig, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))? + "\n";
    match &cfg.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Execute a parsed command line and return the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = &cli.config;
    if let Err(e) = cfg.validate() {
        eprintln!("{}", diagnostic(&e));
        return EXIT_USAGE;
    }
    let items = instances(cfg);
    let results: Vec<Result<(Value, bool)>> = run_all(&items, cfg.jobs, |i, inst| match &cli.command {
        Command::Forward => cmd_forward(inst, cfg),
        Command::Inverse => cmd_inverse(inst, cfg),
        Command::Periods => cmd_periods(inst, cfg),
        Command::Verify { suite } => cmd_verify(*suite, inst, cfg, i).map(|r| {
            let mut v = r.to_json();
            if !cfg.no_timestamp {
                v["timestamp"] = json!(timestamp());
            }
            (v, r.pass)
        }),
    });
    let mut values = Vec::new();
    let mut code = EXIT_PASS;
    for r in results {
        match r {
            Ok((v, pass)) => {
                if !pass {
                    code = code.max(EXIT_FAIL);
                }
                values.push(v);
            }
            Err(e) => {
                eprintln!("{}", diagnostic(&e));
                // errors take precedence over verification failures; the first error wins
                if code == EXIT_PASS || code == EXIT_FAIL {
                    code = e.exit_code();
                }
                values.push(json!({"diagnostic": diagnostic(&e)}));
            }
        }
    }
    let out = if values.len() == 1 { values.pop().expect("one value") } else { Value::Array(values) };
    let is_verify = matches!(cli.command, Command::Verify { .. });
    if code == EXIT_PASS || code == EXIT_FAIL || is_verify {
        if let Err(e) = write_output(cfg, &out) {
            eprintln!("{}", diagnostic(&e));
            return e.exit_code();
        }
    }
    code
}

/// Parse `args` and run; clap usage errors map to exit code 64.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_PASS;
            }
            let d = json!({"error": "Usage", "message": e.to_string(), "exit_code": EXIT_USAGE});
            eprintln!("{d}");
            EXIT_USAGE
        }
    }
}
