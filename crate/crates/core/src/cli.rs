//! Command-line front end: `simulate`, `verify`, `converge` and `stability`,
//! each driven by a TOML config.
//!
//! Every file written starts with a `#` comment line carrying the SHA-256 of
//! the config text and the tolerances in force, followed by a header row.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{diagnose, DiagnosticsReport, ReportOptions, RunHistory};
use crate::dirac_step::SpinorStepConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, mollification_study, run_simulation_with, stability_study, ConvergenceTable, DataSpec,
    StabilityTrace, Window,
};
use crate::grid::{make_grid, Boundary, GridSpec};
use crate::initial_data::{preset, read_csv, InitialData, PresetKind, PresetParams};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "md1d", version, about = "Light-cone lattice solver for the 1+1D Maxwell-Dirac system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for independent runs; overrides the config.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run once, write snapshots and the diagnostics report.
    Simulate(CommonArgs),
    /// Run once and check every margin against its tolerance.
    Verify(CommonArgs),
    /// Mesh-refinement and mollification studies.
    Converge(CommonArgs),
    /// Perturbation runs and the Gronwall envelope.
    Stability(CommonArgs),
}

// ---------------------------------------------------------------------------
// Config

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub charge_drift: f64,
    pub cone: f64,
    /// Pointwise, tail, gauge-sup and equicontinuity margins.
    pub margin: f64,
    /// Checked only when set.
    pub lorentz: Option<f64>,
    pub local_conservation: Option<f64>,
    pub min_order: f64,
    pub delta_scaling_rtol: f64,
    pub envelope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            charge_drift: 1e-12,
            cone: 1e-12,
            margin: 1e-10,
            lorentz: None,
            local_conservation: None,
            min_order: 1.9,
            delta_scaling_rtol: 0.1,
            envelope: 1e-10,
        }
    }
}

impl Tolerances {
    fn describe(&self) -> String {
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:e}"));
        format!(
            "charge_drift={:e} cone={:e} margin={:e} lorentz={} local_conservation={} min_order={} delta_scaling_rtol={} envelope={:e}",
            self.charge_drift,
            self.cone,
            self.margin,
            opt(self.lorentz),
            opt(self.local_conservation),
            self.min_order,
            self.delta_scaling_rtol,
            self.envelope
        )
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_preset")]
    pub preset: PresetKind,
    #[serde(default)]
    pub params: PresetParams,
    /// Replaces the preset when given; relative to the config file.
    #[serde(default)]
    pub initial_csv: Option<PathBuf>,
    #[serde(default)]
    pub mass: f64,
    pub xmin: f64,
    pub xmax: f64,
    pub dx: f64,
    pub horizon: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Snapshot every this many levels; 0 writes the first and last only.
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Tail check radius and starting time (both optional, together).
    #[serde(default)]
    pub tail_radius: Option<f64>,
    #[serde(default)]
    pub tail_time: Option<f64>,
    #[serde(default)]
    pub dx_list: Vec<f64>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub delta_list: Vec<f64>,
    #[serde(default = "default_perturbation")]
    pub perturbation: PresetKind,
    #[serde(default)]
    pub perturbation_params: PresetParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Test hook: multiplies every mass rotation.
    #[serde(default = "one")]
    pub fault_rotation_gain: f64,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_preset() -> PresetKind {
    PresetKind::GaussianPacket
}

fn default_perturbation() -> PresetKind {
    PresetKind::GaussianPacket
}

fn one() -> f64 {
    1.0
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return Err(Error::param("mass", "must be finite and >= 0"));
        }
        if !(self.dx > 0.0) {
            return Err(Error::param("dx", "must be positive"));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::param("horizon", "must be >= 0"));
        }
        if self.tail_radius.is_some() != self.tail_time.is_some() {
            return Err(Error::param("tail_radius", "tail_radius and tail_time go together"));
        }
        if let Some(0) = self.workers {
            return Err(Error::param("workers", "must be >= 1"));
        }
        if !(self.fault_rotation_gain.is_finite()) {
            return Err(Error::param("fault_rotation_gain", "must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        make_grid(self.xmin, self.xmax, self.dx, self.horizon, self.boundary)
    }

    pub fn window(&self) -> Window {
        Window {
            xmin: self.xmin,
            xmax: self.xmax,
            horizon: self.horizon,
            boundary: self.boundary,
        }
    }

    pub fn step_config(&self) -> Result<SpinorStepConfig> {
        Ok(SpinorStepConfig::new(self.mass)?.with_rotation_gain(self.fault_rotation_gain))
    }

    fn initial_data(&self, grid: &GridSpec, base_dir: &Path) -> Result<InitialData> {
        match &self.initial_csv {
            Some(p) => read_csv(&base_dir.join(p), grid),
            None => preset(self.preset, &self.params, grid),
        }
    }

    fn report_options(&self, grid: &GridSpec) -> Result<ReportOptions> {
        let tail = match (self.tail_radius, self.tail_time) {
            (Some(r), Some(t)) => {
                let level = (t / grid.dt).round();
                if !(level >= 0.0) || level as usize > grid.nt || ((level * grid.dt) - t).abs() > 1e-9 * grid.dt.max(t) {
                    return Err(Error::param("tail_time", format!("{t} is not a level in [0, {}]", grid.horizon)));
                }
                Some((r, level as usize))
            }
            _ => None,
        };
        Ok(ReportOptions { tail })
    }
}

/// Config text, its hash and the directory relative paths resolve against.
struct Loaded {
    cfg: SimConfig,
    hash: String,
    dir: PathBuf,
}

fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = SimConfig::parse(&text)?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { cfg, hash, dir })
}

impl Loaded {
    fn comment(&self) -> String {
        format!("config_sha256={} tolerances: {}", self.hash, self.cfg.tolerances.describe())
    }
}

// ---------------------------------------------------------------------------
// Output helpers

fn csv_writer(path: &Path, comment: &str, header: &[&str]) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# {comment}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    Ok(w)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

fn write_snapshot(path: &Path, comment: &str, history: &RunHistory, level: usize) -> Result<()> {
    let grid = &history.grid;
    let s = &history.spinors[level];
    let a = &history.gauges[level];
    let mut w = csv_writer(path, comment, &["x", "re_u", "im_u", "re_v", "im_v", "aplus", "aminus"])?;
    for i in 0..grid.nx {
        w.write_record([
            num(grid.x(i)),
            num(s.u[i].re),
            num(s.u[i].im),
            num(s.v[i].re),
            num(s.v[i].im),
            num(a.aplus[i]),
            num(a.aminus[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn snapshot_levels(nt: usize, stride: usize) -> Vec<usize> {
    let mut levels: Vec<usize> = if stride == 0 { vec![0] } else { (0..=nt).step_by(stride).collect() };
    if levels.last() != Some(&nt) {
        levels.push(nt);
    }
    levels
}

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

pub fn verification_checks(report: &DiagnosticsReport, tol: &Tolerances) -> Vec<Check> {
    let mut checks = vec![
        Check { name: "charge_drift", value: report.max_charge_drift, tolerance: tol.charge_drift },
        Check { name: "cone_monotonicity", value: report.cone_violations, tolerance: tol.cone },
        Check { name: "pointwise_margin", value: report.pointwise_margin, tolerance: tol.margin },
        Check { name: "gauge_sup_margin", value: report.gauge_sup_margin, tolerance: tol.margin },
    ];
    if let Some(t) = report.tail_margin {
        checks.push(Check { name: "tail_margin", value: t, tolerance: tol.margin });
    }
    if let Some(e) = report.equicontinuity_margins.iter().copied().reduce(f64::max) {
        checks.push(Check { name: "equicontinuity_margin", value: e, tolerance: tol.margin });
    }
    if let (Some(v), Some(t)) = (report.lorentz_residual, tol.lorentz) {
        checks.push(Check { name: "lorentz_residual", value: v, tolerance: t });
    }
    if let (Some(v), Some(t)) = (report.local_conservation_residual, tol.local_conservation) {
        checks.push(Check { name: "local_conservation_residual", value: v, tolerance: t });
    }
    checks
}

// ---------------------------------------------------------------------------
// Commands

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn prepare(args: &CommonArgs) -> Result<Loaded> {
    let loaded = load(&args.config)?;
    std::fs::create_dir_all(&args.out)?;
    Ok(loaded)
}

fn simulate_run(loaded: &Loaded) -> Result<(RunHistory, DiagnosticsReport)> {
    let cfg = &loaded.cfg;
    let grid = cfg.grid()?;
    let data = cfg.initial_data(&grid, &loaded.dir)?;
    let opts = cfg.report_options(&grid)?;
    let history = run_simulation_with(&data, &grid, cfg.step_config()?)?;
    let report = diagnose(&history, &opts)?;
    Ok((history, report))
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<i32> {
    let loaded = prepare(args)?;
    let (history, report) = simulate_run(&loaded)?;
    let comment = loaded.comment();
    for level in snapshot_levels(history.grid.nt, loaded.cfg.snapshot_stride) {
        write_snapshot(&args.out.join(format!("snapshot_{level:06}.csv")), &comment, &history, level)?;
    }
    report.write_key_values(&args.out.join("report.txt"), &comment)?;
    report.write_series_csv(&args.out.join("series.csv"), &history.grid, &comment)?;
    println!("max_charge_drift = {:e}", report.max_charge_drift);
    Ok(EXIT_PASS)
}

pub fn cmd_verify(args: &CommonArgs) -> Result<i32> {
    let loaded = prepare(args)?;
    let (history, report) = simulate_run(&loaded)?;
    let comment = loaded.comment();
    report.write_key_values(&args.out.join("report.txt"), &comment)?;
    report.write_series_csv(&args.out.join("series.csv"), &history.grid, &comment)?;
    let checks = verification_checks(&report, &loaded.cfg.tolerances);
    let mut w = csv_writer(&args.out.join("margins.csv"), &comment, &["check", "value", "tolerance", "pass"])?;
    for c in &checks {
        w.write_record([c.name.to_string(), num(c.value), num(c.tolerance), c.passed().to_string()])?;
        println!("{:<28} {:>13e} <= {:<9e} {}", c.name, c.value, c.tolerance, if c.passed() { "pass" } else { "FAIL" });
    }
    w.flush()?;
    Ok(if checks.iter().all(Check::passed) { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn write_table(path: &Path, comment: &str, table: &ConvergenceTable) -> Result<()> {
    let mut w = csv_writer(
        path,
        comment,
        &[table.parameter_name, "distance_uv", "distance_gauge", "order_uv", "order_gauge"],
    )?;
    for r in &table.rows {
        w.write_record([
            num(r.parameter),
            num(r.distance_uv),
            num(r.distance_gauge),
            opt_num(r.order_uv),
            opt_num(r.order_gauge),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Orders meet the threshold, or the chain is exact (all distances zero).
pub fn orders_pass(table: &ConvergenceTable, min_order: f64) -> bool {
    let col = |uv: bool| {
        let exact = table.rows.iter().all(|r| if uv { r.distance_uv } else { r.distance_gauge } == 0.0);
        let order = if uv { table.min_order_uv() } else { table.min_order_gauge() };
        exact || order.is_some_and(|o| o >= min_order)
    };
    col(true) && col(false)
}

pub fn cmd_converge(args: &CommonArgs) -> Result<i32> {
    let loaded = prepare(args)?;
    let cfg = &loaded.cfg;
    if cfg.dx_list.is_empty() && cfg.n_list.is_empty() {
        return Err(Error::param("dx_list", "converge needs dx_list or n_list"));
    }
    let comment = loaded.comment();
    let mut pass = true;
    with_workers(args.workers.or(cfg.workers), || -> Result<()> {
        if !cfg.dx_list.is_empty() {
            if cfg.initial_csv.is_some() {
                return Err(Error::param("initial_csv", "refinement studies resample a preset"));
            }
            let data_spec = DataSpec { kind: cfg.preset, params: cfg.params };
            let table = convergence_study(&data_spec, &cfg.window(), &cfg.dx_list, cfg.mass)?;
            write_table(&args.out.join("convergence.csv"), &comment, &table)?;
            let ok = orders_pass(&table, cfg.tolerances.min_order);
            println!(
                "refinement: min order uv {} gauge {} -> {}",
                opt_num(table.min_order_uv()),
                opt_num(table.min_order_gauge()),
                if ok { "pass" } else { "FAIL" }
            );
            pass &= ok;
        }
        if !cfg.n_list.is_empty() {
            let grid = cfg.grid()?;
            let rough = cfg.initial_data(&grid, &loaded.dir)?;
            let table = mollification_study(&rough, &cfg.n_list, &grid, cfg.mass)?;
            write_table(&args.out.join("mollification.csv"), &comment, &table)?;
            let exact = table.rows.iter().all(|r| r.distance_uv == 0.0);
            let ok = exact || table.strictly_decreasing();
            println!("mollification: strictly decreasing -> {}", if ok { "pass" } else { "FAIL" });
            pass &= ok;
        }
        Ok(())
    })??;
    Ok(if pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

/// `sup I / delta^2` agrees across the positive deltas within `rtol` of the
/// smallest delta's ratio, and `delta = 0` gives `I == 0` exactly.
pub fn stability_pass(deltas: &[f64], traces: &[StabilityTrace], tol: &Tolerances) -> bool {
    let mut reference = None;
    let mut ok = true;
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    for &k in &order {
        let (d, tr) = (deltas[k], &traces[k]);
        if d == 0.0 {
            ok &= tr.functional.iter().all(|&i| i == 0.0);
            continue;
        }
        ok &= tr.holdout_margin <= tol.envelope;
        let ratio = tr.sup() / (d * d);
        match reference {
            None => reference = Some(ratio),
            Some(r) => ok &= ((ratio - r) / r).abs() <= tol.delta_scaling_rtol,
        }
    }
    ok
}

pub fn cmd_stability(args: &CommonArgs) -> Result<i32> {
    let loaded = prepare(args)?;
    let cfg = &loaded.cfg;
    if cfg.delta_list.is_empty() {
        return Err(Error::param("delta_list", "stability needs delta_list"));
    }
    let grid = cfg.grid()?;
    let data = cfg.initial_data(&grid, &loaded.dir)?;
    let direction = preset(cfg.perturbation, &cfg.perturbation_params, &grid)?;
    let traces = with_workers(args.workers.or(cfg.workers), || {
        use rayon::prelude::*;
        cfg.delta_list
            .par_iter()
            .map(|&d| stability_study(&data, d, &direction, &grid, cfg.mass))
            .collect::<Result<Vec<_>>>()
    })??;
    let comment = loaded.comment();
    let mut w = csv_writer(&args.out.join("stability_trace.csv"), &comment, &["delta", "level", "t", "functional", "envelope"])?;
    for (d, tr) in cfg.delta_list.iter().zip(&traces) {
        for (k, (&t, &i)) in tr.times.iter().zip(&tr.functional).enumerate() {
            w.write_record([num(*d), k.to_string(), num(t), num(i), num(tr.envelope(t))])?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(
        &args.out.join("stability.csv"),
        &comment,
        &["delta", "sup_functional", "fitted_c", "fitted_offset", "envelope_margin", "holdout_margin", "gauge_mismatch"],
    )?;
    let mut summary = String::new();
    for (d, tr) in cfg.delta_list.iter().zip(&traces) {
        w.write_record([
            num(*d),
            num(tr.sup()),
            num(tr.fitted_c),
            num(tr.fitted_offset),
            num(tr.envelope_margin),
            num(tr.holdout_margin),
            num(tr.gauge_mismatch),
        ])?;
        let _ = writeln!(summary, "delta {d:e}: sup I {:e}, C {:e}, holdout margin {:e}", tr.sup(), tr.fitted_c, tr.holdout_margin);
    }
    w.flush()?;
    let ok = stability_pass(&cfg.delta_list, &traces, &cfg.tolerances);
    print!("{summary}");
    println!("stability -> {}", if ok { "pass" } else { "FAIL" });
    Ok(if ok { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

/// Parse arguments, dispatch, and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => with_workers(a.workers, || cmd_verify(a)).and_then(|r| r),
        Command::Converge(a) => cmd_converge(a),
        Command::Stability(a) => cmd_stability(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
