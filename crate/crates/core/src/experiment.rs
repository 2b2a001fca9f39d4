//! Configured, reproducible experiment runs with CSV and JSON outputs.
//!
//! A run is fully determined by its [`ExperimentConfig`] minus the worker
//! count and output directory; the config hash covers exactly that part plus
//! the crate version, and every emitted file carries it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{preset, PolymerModel, PolymerSpec, PRESET_NAMES};
use crate::statistics::{
    clock_spacing_statistic, counting_statistics, dos_at_critical, empirical_ids, gap_statistics,
    holder_probe, ids_at_critical, les_ensemble, local_ids, median, minami_probe, psi_deviation,
    uniformity_test, GapStatistics, PointProcessSample, Rescaling,
};
use crate::transfer::{
    critical_report, expansion_coeffs, find_critical_energies, lyapunov, CriticalEnergyReport,
};
use crate::transport::{transport_exponents, Averaging, TransportConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Critical,
    Lyapunov,
    Ids,
    LesPoisson,
    LesClock,
    ClockSpacing,
    Uniformity,
    PsiConvergence,
    Sharpness,
    MinamiProbe,
    HolderProbe,
    Transport,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::Critical,
        ExperimentKind::Lyapunov,
        ExperimentKind::Ids,
        ExperimentKind::LesPoisson,
        ExperimentKind::LesClock,
        ExperimentKind::ClockSpacing,
        ExperimentKind::Uniformity,
        ExperimentKind::PsiConvergence,
        ExperimentKind::Sharpness,
        ExperimentKind::MinamiProbe,
        ExperimentKind::HolderProbe,
        ExperimentKind::Transport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Critical => "critical",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Ids => "ids",
            ExperimentKind::LesPoisson => "les-poisson",
            ExperimentKind::LesClock => "les-clock",
            ExperimentKind::ClockSpacing => "clock-spacing",
            ExperimentKind::Uniformity => "uniformity",
            ExperimentKind::PsiConvergence => "psi-convergence",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::MinamiProbe => "minami-probe",
            ExperimentKind::HolderProbe => "holder-probe",
            ExperimentKind::Transport => "transport",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolymerConfig {
    pub potentials: Vec<f64>,
    pub hoppings: Vec<f64>,
}

/// Either a named preset or two explicit polymers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Preset {
        preset: String,
        v: f64,
        p: f64,
    },
    Explicit {
        plus: PolymerConfig,
        minus: PolymerConfig,
        p: f64,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Preset {
            preset: "dimer".into(),
            v: 0.6,
            p: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<PolymerModel<f64>> {
        match self {
            ModelConfig::Preset { preset: name, v, p } => preset(name, *v, *p),
            ModelConfig::Explicit { plus, minus, p } => PolymerModel::new(
                PolymerSpec::new(plus.potentials.clone(), plus.hoppings.clone())?,
                PolymerSpec::new(minus.potentials.clone(), minus.hoppings.clone())?,
                *p,
            ),
        }
    }

    fn p(&self) -> f64 {
        match self {
            ModelConfig::Preset { p, .. } | ModelConfig::Explicit { p, .. } => *p,
        }
    }
}

/// Projection window of a transport run with its slope bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportWindow {
    pub interval: Option<(f64, f64)>,
    #[serde(default)]
    pub min_slope: Option<f64>,
    #[serde(default)]
    pub max_slope: Option<f64>,
}

/// Numeric parameters; each kind reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Box size in sites.
    pub l: usize,
    /// Box sizes for scaling runs.
    pub ls: Vec<usize>,
    pub realizations: usize,
    /// Reference energy away from the critical set.
    pub e0: f64,
    /// Critical energy to use; the largest one found when absent.
    pub critical_energy: Option<f64>,
    /// Exponent of the sharpness offset `E₀(L) = E_c + L^{−δ}`.
    pub delta: f64,
    pub energies: Vec<f64>,
    pub search_interval: (f64, f64),
    pub grid: usize,
    pub tol: f64,
    pub k_max: usize,
    pub steps: usize,
    pub window_atoms: usize,
    pub samples: usize,
    pub ids_sites: usize,
    pub ids_realizations: usize,
    pub intervals: Vec<(f64, f64)>,
    pub j_max: usize,
    pub xs: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub c2: f64,
    pub scales: Vec<f64>,
    pub q: f64,
    pub times: Vec<f64>,
    pub box_radius: usize,
    pub quadrature_points: usize,
    pub averaging: Averaging,
    pub windows: Vec<TransportWindow>,
    pub ks_max: f64,
    pub p_min: f64,
    pub cov_max: f64,
    pub min_gaps: usize,
    pub mean_window: (f64, f64),
    pub min_fraction_near_one: f64,
    pub ids_tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            l: 2_000,
            ls: vec![5_000, 10_000, 20_000],
            realizations: 200,
            e0: 1.2,
            critical_energy: None,
            delta: 0.6,
            energies: vec![0.5, 0.8],
            search_interval: (-3.0, 3.0),
            grid: 20_001,
            tol: 1e-8,
            k_max: 100,
            steps: 1_000_000,
            window_atoms: 20,
            samples: 500,
            ids_sites: 500,
            ids_realizations: 2_000,
            intervals: vec![(0.0, 1.0), (1.0, 2.0)],
            j_max: 10,
            xs: (0..51).map(|k| -5.0 + 0.2 * k as f64).collect(),
            beta: 0.5,
            gamma: 0.5,
            c2: 1.0,
            scales: vec![0.1, 0.05, 0.025, 0.0125, 0.00625],
            q: 2.0,
            times: (0..8).map(|k| 50.0 * 2f64.powf(k as f64 * 3.0 / 7.0)).collect(),
            box_radius: 2_000,
            quadrature_points: 2_000,
            averaging: Averaging::Cesaro,
            windows: vec![
                TransportWindow {
                    interval: Some((-0.6, 0.6)),
                    min_slope: Some(1.0),
                    max_slope: None,
                },
                TransportWindow {
                    interval: Some((1.0, 1.6)),
                    min_slope: None,
                    max_slope: Some(0.2),
                },
            ],
            ks_max: 0.05,
            p_min: 0.01,
            cov_max: 0.05,
            min_gaps: 5_000,
            mean_window: (0.95, 1.05),
            min_fraction_near_one: 0.5,
            ids_tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
    /// Thread count; does not affect results.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_workers() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            model: ModelConfig::default(),
            seed: 0,
            params: Params::default(),
            workers: default_workers(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    /// SHA-256 over the crate version and every result-determining field.
    pub fn hash(&self) -> String {
        let payload = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "kind": self.kind,
            "model": self.model,
            "seed": self.seed,
            "params": self.params,
        });
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }
}

/// A schema or cross-field problem, located by its field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks the config without running anything.
pub fn validate(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut err = |path: &str, message: String| {
        out.push(Diagnostic {
            path: path.into(),
            message,
        })
    };
    if let ModelConfig::Preset { preset: name, .. } = &config.model {
        if !PRESET_NAMES.contains(&name.as_str()) {
            err(
                "model.preset",
                format!("unknown preset `{name}`; available: {}", PRESET_NAMES.join(", ")),
            );
        }
    }
    let p = config.model.p();
    if !(p > 0.0 && p < 1.0) {
        err("model.p", format!("p = {p} must lie in the open interval (0, 1)"));
    } else if let Err(e) = config.model.build() {
        err("model", e.to_string());
    }
    if config.workers == 0 {
        err("workers", "need at least one worker".into());
    }
    let k = &config.params;
    let positive = |v: usize| v > 0;
    use ExperimentKind::*;
    match config.kind {
        Sharpness if !(k.delta > 0.5) => err("params.delta", "δ must exceed 1/2".into()),
        Lyapunov if k.steps < 1000 => err("params.steps", "need at least 1000 polymer steps".into()),
        Lyapunov if k.realizations < 2 => {
            err("params.realizations", "need at least 2 realizations".into())
        }
        ClockSpacing | PsiConvergence if k.ls.is_empty() => {
            err("params.ls", "need at least one box size".into())
        }
        Transport if k.windows.is_empty() => err("params.windows", "need at least one window".into()),
        Transport if k.times.len() < 2 => err("params.times", "need at least two times".into()),
        _ => {}
    }
    if !positive(k.l) {
        err("params.l", "box size must be positive".into());
    }
    if !positive(k.realizations) {
        err("params.realizations", "need at least one realization".into());
    }
    if k.ls.contains(&0) {
        err("params.ls", "box sizes must be positive".into());
    }
    if !(k.search_interval.0 < k.search_interval.1) {
        err("params.search_interval", "interval must be increasing".into());
    }
    for (i, (a, b)) in k.intervals.iter().enumerate() {
        if !(a < b) {
            err(&format!("params.intervals[{i}]"), "interval must be increasing".into());
        }
    }
    for (i, w) in k.windows.iter().enumerate() {
        if let Some((a, b)) = w.interval {
            if !(a < b) {
                err(&format!("params.windows[{i}].interval"), "interval must be increasing".into());
            }
        }
    }
    if !(k.q > 0.0) {
        err("params.q", "moment order must be positive".into());
    }
    if k.times.iter().any(|t| !(*t > 0.0)) {
        err("params.times", "averaging times must be positive".into());
    }
    out
}

/// One thresholded check of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub pass: bool,
}

fn check(name: &str, value: f64, requirement: String, pass: bool) -> Check {
    Check {
        name: name.into(),
        value,
        requirement,
        pass,
    }
}

/// Bulk data of a run: one record type with a fixed header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub code_version: &'static str,
    pub statistics: Value,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
    /// Kept out of the JSON so equal hashes give equal files.
    #[serde(skip)]
    pub wall_clock: Duration,
    #[serde(skip)]
    pub table: Table,
}

impl RunReport {
    pub fn csv_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.csv", self.kind.name()))
    }

    pub fn json_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.json", self.kind.name()))
    }

    /// Writes `<kind>.csv` and `<kind>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(self.csv_path(dir))?;
        let mut header = vec!["config_hash"];
        header.extend(&self.table.header);
        w.write_record(&header)?;
        for row in &self.table.rows {
            w.write_record(std::iter::once(self.config_hash.as_str()).chain(row.iter().map(String::as_str)))?;
        }
        w.flush()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(self.json_path(dir), text)?;
        Ok(())
    }
}

/// Validates and runs on a pool of `config.workers` threads.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    if let Some(d) = validate(config).into_iter().next() {
        return Err(Error::config(d.path, d.message));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let start = Instant::now();
    let outcome = pool
        .install(|| dispatch(config))
        .map_err(|e| e.context(format!("{} experiment", config.kind.name())))?;
    Ok(RunReport {
        kind: config.kind,
        config: config.clone(),
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION"),
        passed: outcome.checks.iter().all(|c| c.pass),
        statistics: outcome.statistics,
        checks: outcome.checks,
        warnings: outcome.warnings,
        wall_clock: start.elapsed(),
        table: outcome.table,
    })
}

#[derive(Default)]
struct Outcome {
    statistics: Value,
    checks: Vec<Check>,
    warnings: Vec<String>,
    table: Table,
}

fn f(x: f64) -> String {
    x.to_string()
}

fn dispatch(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model.build()?;
    let seed = config.seed;
    let k = &config.params;
    match config.kind {
        ExperimentKind::Critical => run_critical(&model, k),
        ExperimentKind::Lyapunov => run_lyapunov(&model, k, seed),
        ExperimentKind::Ids => run_ids(&model, k, seed),
        ExperimentKind::LesPoisson => run_les_poisson(&model, k, seed),
        ExperimentKind::LesClock => run_les_clock(&model, k, seed),
        ExperimentKind::ClockSpacing => run_clock_spacing(&model, k, seed),
        ExperimentKind::Uniformity => run_uniformity(&model, k, seed),
        ExperimentKind::PsiConvergence => run_psi(&model, k, seed),
        ExperimentKind::Sharpness => run_sharpness(&model, k, seed),
        ExperimentKind::MinamiProbe => run_minami(&model, k, seed),
        ExperimentKind::HolderProbe => run_holder(&model, k, seed),
        ExperimentKind::Transport => run_transport(&model, k, seed),
    }
}

fn irrationality_warning(report: &CriticalEnergyReport<f64>) -> Option<String> {
    (!report.irrationality_violations.is_empty()).then(|| {
        let ks: Vec<usize> = report.irrationality_violations.iter().map(|v| v.0).collect();
        format!(
            "E_c = {}: |⟨e^(ikη)⟩| ≈ 1 for k in {ks:?}; clock statistics may not apply",
            report.energy
        )
    })
}

/// The configured critical energy, or the largest one in the search interval.
fn critical(model: &PolymerModel<f64>, k: &Params) -> Result<CriticalEnergyReport<f64>> {
    match k.critical_energy {
        Some(e) => critical_report(model, e, k.tol, k.k_max),
        None => find_critical_energies(model, k.search_interval, k.grid, k.tol)?
            .pop()
            .ok_or_else(|| Error::invalid("model has no critical energy in the search interval")),
    }
}

/// Critical report, its DOS and any irrationality warning.
fn critical_with_density(
    model: &PolymerModel<f64>,
    k: &Params,
) -> Result<(CriticalEnergyReport<f64>, f64, Vec<String>)> {
    let report = critical(model, k)?;
    let coeffs = expansion_coeffs(model, &report, 0.01)?;
    let density = dos_at_critical(&coeffs, model);
    let warnings = irrationality_warning(&report).into_iter().collect();
    Ok((report, density, warnings))
}

fn run_critical(model: &PolymerModel<f64>, k: &Params) -> Result<Outcome> {
    let reports = find_critical_energies(model, k.search_interval, k.grid, k.tol)?;
    let mut table = Table::new(&[
        "energy",
        "kind_plus",
        "kind_minus",
        "eta_plus",
        "eta_minus",
        "commutator_norm",
        "residual",
        "irrationality_violations",
    ]);
    for r in &reports {
        table.push([
            f(r.energy),
            format!("{:?}", r.kind_plus),
            format!("{:?}", r.kind_minus),
            f(r.eta_plus),
            f(r.eta_minus),
            f(r.commutator_norm),
            f(r.residual),
            r.irrationality_violations.len().to_string(),
        ]);
    }
    let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(Outcome {
        statistics: json!({ "critical_energies": reports }),
        checks: vec![check(
            "diagonalizer_residual",
            worst,
            format!("≤ {}", k.tol),
            worst <= k.tol,
        )],
        warnings: reports.iter().filter_map(irrationality_warning).collect(),
        table,
    })
}

fn run_lyapunov(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let mut table = Table::new(&["energy", "gamma", "stderr"]);
    let mut estimates = Vec::new();
    for &e in &k.energies {
        let est = lyapunov(model, e, k.steps, k.realizations, seed)?;
        table.push([f(e), f(est.gamma), f(est.stderr)]);
        estimates.push(json!({ "energy": e, "gamma": est.gamma, "stderr": est.stderr }));
    }
    Ok(Outcome {
        statistics: json!({ "estimates": estimates }),
        table,
        ..Outcome::default()
    })
}

fn run_ids(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let ids = empirical_ids(model, k.ids_sites, k.ids_realizations, seed)?;
    let (lo, hi) = ids.support();
    let mut table = Table::new(&["energy", "ids"]);
    for i in 0..=200 {
        let e = lo + (hi - lo) * i as f64 / 200.0;
        table.push([f(e), f(ids.evaluate(e))]);
    }
    let reports = find_critical_energies(model, k.search_interval, k.grid, k.tol)?;
    let mut checks = Vec::new();
    let mut at_critical = Vec::new();
    for r in &reports {
        let predicted = ids_at_critical(r, model);
        let measured = ids.evaluate(r.energy);
        checks.push(check(
            &format!("ids_at_{}", r.energy),
            (measured - predicted).abs(),
            format!("≤ {}", k.ids_tolerance),
            (measured - predicted).abs() <= k.ids_tolerance,
        ));
        at_critical.push(json!({ "energy": r.energy, "predicted": predicted, "measured": measured }));
    }
    Ok(Outcome {
        statistics: json!({ "eigenvalues": ids.total_count(), "at_critical": at_critical }),
        checks,
        table,
        ..Outcome::default()
    })
}

fn atoms_table(samples: &[PointProcessSample]) -> Table {
    let mut table = Table::new(&["realization", "index", "atom"]);
    for s in samples {
        for (i, a) in s.atoms.iter().enumerate() {
            table.push([s.realization_index.to_string(), i.to_string(), f(*a)]);
        }
    }
    table
}

fn gap_summary(g: &GapStatistics) -> Value {
    json!({
        "gaps": g.gaps.len(),
        "mean": g.mean,
        "variance": g.variance,
        "ks_vs_exp1": g.ks_vs_exp1,
        "ks_vs_degenerate1": g.ks_vs_degenerate1,
        "fraction_near_one": g.fraction_near_one,
    })
}

fn in_window(x: f64, (a, b): (f64, f64)) -> bool {
    x >= a && x <= b
}

fn run_les_poisson(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let ids = local_ids(model, k.e0, k.l, k.window_atoms, k.ids_realizations, seed)?;
    let samples = les_ensemble(model, k.e0, k.l, Rescaling::Unfolded(&ids), k.window_atoms, k.samples, seed)?;
    let gaps = gap_statistics(&samples)?;
    let mut checks = vec![
        check(
            "pooled_gaps",
            gaps.gaps.len() as f64,
            format!("≥ {}", k.min_gaps),
            gaps.gaps.len() >= k.min_gaps,
        ),
        check("ks_vs_exp1", gaps.ks_vs_exp1, format!("< {}", k.ks_max), gaps.ks_vs_exp1 < k.ks_max),
    ];
    let mut counts = Value::Null;
    if !k.intervals.is_empty() {
        let c = counting_statistics(&samples, &k.intervals)?;
        checks.push(check(
            "count_chi_square_p",
            c.p_values[0],
            format!("> {}", k.p_min),
            c.p_values[0] > k.p_min,
        ));
        if c.intervals.len() > 1 {
            let cov = c.covariance[0][1];
            checks.push(check("count_covariance", cov, format!("|·| ≤ {}", k.cov_max), cov.abs() <= k.cov_max));
        }
        counts = serde_json::to_value(&c)?;
    }
    Ok(Outcome {
        statistics: json!({ "gaps": gap_summary(&gaps), "counting": counts }),
        checks,
        table: atoms_table(&samples),
        ..Outcome::default()
    })
}

fn run_les_clock(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let (report, density, warnings) = critical_with_density(model, k)?;
    let samples = les_ensemble(
        model,
        report.energy,
        k.l,
        Rescaling::Dos { density },
        k.window_atoms,
        k.samples,
        seed,
    )?;
    let gaps = gap_statistics(&samples)?;
    let checks = vec![check(
        "fraction_near_one",
        gaps.fraction_near_one,
        format!("≥ {}", k.min_fraction_near_one),
        gaps.fraction_near_one >= k.min_fraction_near_one,
    )];
    Ok(Outcome {
        statistics: json!({ "critical_energy": report.energy, "density": density, "gaps": gap_summary(&gaps) }),
        checks,
        warnings,
        table: atoms_table(&samples),
    })
}

fn run_clock_spacing(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let (report, density, warnings) = critical_with_density(model, k)?;
    let mut table = Table::new(&["l_sites", "realization", "position", "rescaled_gap"]);
    let mut per_size = Vec::new();
    let mut variances = Vec::new();
    let mut last_mean = f64::NAN;
    for &l in &k.ls {
        let s = clock_spacing_statistic(model, &report, density, l, k.realizations, k.j_max, seed)?;
        for ((g, r), p) in s.rescaled_gaps.iter().zip(&s.realizations).zip(&s.positions) {
            table.push([l.to_string(), r.to_string(), p.to_string(), f(*g)]);
        }
        per_size.push(json!({ "l_sites": l, "mean": s.mean, "variance": s.variance, "fraction_near_one": s.fraction_near_one }));
        variances.push(s.variance);
        last_mean = s.mean;
    }
    let decreasing = variances.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        statistics: json!({ "critical_energy": report.energy, "density": density, "sizes": per_size }),
        checks: vec![
            check(
                "mean_gap_largest_box",
                last_mean,
                format!("in [{}, {}]", k.mean_window.0, k.mean_window.1),
                in_window(last_mean, k.mean_window),
            ),
            check(
                "variance_decreasing",
                f64::from(u8::from(decreasing)),
                "strictly decreasing in L".into(),
                decreasing,
            ),
        ],
        warnings,
        table,
    })
}

fn run_uniformity(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let report = critical(model, k)?;
    let u = uniformity_test(model, &report, k.l, k.realizations, seed)?;
    let mut table = Table::new(&["realization", "phase_over_pi"]);
    for (i, p) in u.phases.iter().enumerate() {
        table.push([i.to_string(), f(*p)]);
    }
    Ok(Outcome {
        statistics: json!({ "critical_energy": report.energy, "ks_vs_uniform": u.ks }),
        checks: vec![check("ks_vs_uniform", u.ks, format!("< {}", k.ks_max), u.ks < k.ks_max)],
        warnings: irrationality_warning(&report).into_iter().collect(),
        table,
    })
}

fn run_psi(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let (report, density, warnings) = critical_with_density(model, k)?;
    let mut table = Table::new(&["l_sites", "realization", "sup_deviation"]);
    let mut medians = Vec::new();
    for &l in &k.ls {
        let d = psi_deviation(model, &report, density, l, &k.xs, k.realizations, seed)?;
        for (r, v) in d.iter().enumerate() {
            table.push([l.to_string(), r.to_string(), f(*v)]);
        }
        medians.push(median(&d));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome {
        statistics: json!({ "critical_energy": report.energy, "ls": k.ls, "median_sup_deviation": medians }),
        checks: vec![check(
            "median_decreasing",
            f64::from(u8::from(decreasing)),
            "strictly decreasing in L".into(),
            decreasing,
        )],
        warnings,
        table,
    })
}

fn run_sharpness(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let (report, density, warnings) = critical_with_density(model, k)?;
    let e0 = report.energy + (k.l as f64).powf(-k.delta);
    let samples = les_ensemble(model, e0, k.l, Rescaling::Dos { density }, k.window_atoms, k.samples, seed)?;
    let gaps = gap_statistics(&samples)?;
    Ok(Outcome {
        statistics: json!({ "critical_energy": report.energy, "e0": e0, "density": density, "gaps": gap_summary(&gaps) }),
        checks: vec![
            check(
                "mean_gap",
                gaps.mean,
                format!("in [{}, {}]", k.mean_window.0, k.mean_window.1),
                in_window(gaps.mean, k.mean_window),
            ),
            check(
                "fraction_near_one",
                gaps.fraction_near_one,
                format!("≥ {}", k.min_fraction_near_one),
                gaps.fraction_near_one >= k.min_fraction_near_one,
            ),
        ],
        warnings,
        table: atoms_table(&samples),
    })
}

fn run_minami(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let m = minami_probe(model, k.l, k.beta, k.gamma, k.c2, k.realizations, k.e0, seed)?;
    let mut table = Table::new(&["box_sites", "lower", "upper", "p_at_least_one", "p_at_least_two", "ratio"]);
    table.push([
        m.box_sites.to_string(),
        f(m.interval.0),
        f(m.interval.1),
        f(m.p_at_least_one),
        f(m.p_at_least_two),
        f(m.ratio),
    ]);
    Ok(Outcome {
        statistics: serde_json::to_value(&m)?,
        table,
        ..Outcome::default()
    })
}

fn run_holder(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let ids = empirical_ids(model, k.ids_sites, k.ids_realizations, seed)?;
    let h = holder_probe(&ids, k.e0, &k.scales)?;
    let mut table = Table::new(&["e0", "rho1", "rho2", "product", "exceeds_two_thirds"]);
    table.push([f(k.e0), f(h.rho1), f(h.rho2), f(h.product), h.exceeds_two_thirds.to_string()]);
    Ok(Outcome {
        statistics: serde_json::to_value(&h)?,
        table,
        ..Outcome::default()
    })
}

fn run_transport(model: &PolymerModel<f64>, k: &Params, seed: u64) -> Result<Outcome> {
    let cfg = TransportConfig {
        q: k.q,
        times: k.times.clone(),
        quadrature_points: k.quadrature_points,
        box_radius: k.box_radius,
        averaging: k.averaging,
    };
    let windows: Vec<Option<(f64, f64)>> = k.windows.iter().map(|w| w.interval).collect();
    let fits = transport_exponents(model, &cfg, &windows, k.realizations, seed)?;
    let mut table = Table::new(&["window_lower", "window_upper", "realization", "time", "moment"]);
    let mut checks = Vec::new();
    let mut summary = Vec::new();
    for (w, fit) in k.windows.iter().zip(&fits) {
        let (lo, hi) = w
            .interval
            .map_or((String::new(), String::new()), |(a, b)| (f(a), f(b)));
        for (r, curve) in fit.curves.iter().enumerate() {
            for (t, m) in curve.times.iter().zip(&curve.moments) {
                table.push([lo.clone(), hi.clone(), r.to_string(), f(*t), f(*m)]);
            }
        }
        let mut label = String::from("slope");
        if let Some((a, b)) = w.interval {
            let _ = write!(label, "_{a}_{b}");
        }
        if let Some(min) = w.min_slope {
            checks.push(check(&label, fit.slope, format!("≥ {min}"), fit.slope >= min));
        }
        if let Some(max) = w.max_slope {
            checks.push(check(&label, fit.slope, format!("≤ {max}"), fit.slope <= max));
        }
        summary.push(json!({
            "window": w.interval,
            "slope": fit.slope,
            "half_width": fit.half_width,
            "per_realization": fit.per_realization,
        }));
    }
    Ok(Outcome {
        statistics: json!({ "q": k.q, "averaging": k.averaging, "fits": summary }),
        checks,
        table,
        ..Outcome::default()
    })
}
