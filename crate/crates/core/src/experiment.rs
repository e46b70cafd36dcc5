//! Config-driven end-to-end runs: parse an experiment description, execute
//! the sample → diagonalize → correlate → reduce → fit pipeline, and
//! persist plot-ready artifacts with full provenance.
//!
//! An experiment directory contains one CSV per requested (observable, β)
//! pair, optional `fit.json` / `bound.json` reports, and a `manifest.json`
//! recording the tool version, a hash of the effective config, the config
//! itself, and every seed used — enough to reproduce all numeric outputs
//! byte-for-byte.
//!
//! [`ExperimentConfig::validate`] covers everything decidable from the
//! config alone and mirrors the run-time guards exactly; failures that
//! depend on computed data (a dissipation time that never crosses the
//! threshold, say) can only surface during [`run_experiment`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    bound_report, default_fit_window, dissipation_time, fit_cf, Dissipation, FitInit, FitResult,
    FitWindow, DISSIPATION_THRESHOLD, MIN_WINDOW_POINTS,
};
use crate::correlators::{
    ensemble_batch_with_progress, evaluate_batch, linear_time_grid, log_time_grid, BatchRequest,
    EnsembleResult, ProbeSites, SeriesKind, TimeSeries,
};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    rydberg_couplings, sample_couplings, CouplingMatrix, RydbergCouplingSpec, TfskParams,
};
use crate::output::{series_file_name, write_ensemble_csv, write_json};
use crate::protocol::{protocol_series, MAX_REGISTER_QUBITS};

/// Largest spin count the interferometric protocol simulates densely
/// (two copies plus the ancilla must fit the register guard).
pub const MAX_PROTOCOL_SPINS: usize = (MAX_REGISTER_QUBITS - 1) / 2;

/// Complete description of one experiment. The on-disk format is TOML;
/// see `configs/` in the repository root for commented examples. Scalar
/// keys come before the `[model]`/`[time_grid]`/… tables, as TOML demands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Inverse temperatures, one output series per entry.
    pub betas: Vec<f64>,
    pub n_realizations: usize,
    /// Realization `k` uses seed `base_seed + k`.
    #[serde(default)]
    pub base_seed: u64,
    pub observables: Vec<Observable>,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub time_grid: TimeGridConfig,
    #[serde(default)]
    pub probes: ProbesConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

/// Coupling model: disorder-sampled all-to-all Gaussian couplings, or a
/// fixed blockade-profile matrix from emitter positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Tfsk {
        n: usize,
        j_scale: f64,
        gamma: f64,
    },
    Rydberg {
        positions: Vec<f64>,
        c6_eff: f64,
        blockade_radius: f64,
        gamma: f64,
    },
}

impl ModelConfig {
    pub fn n(&self) -> usize {
        match self {
            ModelConfig::Tfsk { n, .. } => *n,
            ModelConfig::Rydberg { positions, .. } => positions.len(),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            ModelConfig::Tfsk { gamma, .. } | ModelConfig::Rydberg { gamma, .. } => *gamma,
        }
    }

    /// Couplings for one realization; only the TFSK model consumes the seed.
    fn couplings(&self, seed: u64) -> Result<CouplingMatrix> {
        match self {
            ModelConfig::Tfsk { n, j_scale, .. } => {
                if *n >= 2 {
                    sample_couplings(*n, *j_scale, seed)
                } else {
                    CouplingMatrix::zeros(*n)
                }
            }
            ModelConfig::Rydberg {
                positions,
                c6_eff,
                blockade_radius,
                ..
            } => rydberg_couplings(&RydbergCouplingSpec {
                positions: positions.clone(),
                c6_eff: *c6_eff,
                blockade_radius: *blockade_radius,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "log")]
    Log,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub kind: GridKind,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Prepend `t = 0` (useful with log grids, whose `t_min` must be > 0,
    /// when the dissipation time is wanted from the same run).
    #[serde(default)]
    pub include_zero: bool,
}

impl TimeGridConfig {
    pub fn build(&self) -> Result<Vec<f64>> {
        let mut grid = match self.kind {
            GridKind::Linear => linear_time_grid(self.t_min, self.t_max, self.points)?,
            GridKind::Log => log_time_grid(self.t_min, self.t_max, self.points)?,
        };
        if self.include_zero {
            if self.t_min <= 0.0 {
                return Err(Error::BadTimeGrid);
            }
            grid.insert(0, 0.0);
        }
        Ok(grid)
    }
}

/// Observables requestable from a config. `C2` emits both the raw and the
/// purity-normalized series; `protocol` runs the interferometric circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    R,
    C,
    F,
    F2,
    C2,
    #[serde(rename = "protocol")]
    Protocol,
}

impl Observable {
    fn batch_kinds(self) -> &'static [SeriesKind] {
        match self {
            Observable::R => &[SeriesKind::R],
            Observable::C => &[SeriesKind::C],
            Observable::F => &[SeriesKind::F],
            Observable::F2 => &[SeriesKind::F2],
            Observable::C2 => &[SeriesKind::C2, SeriesKind::C2Normalized],
            Observable::Protocol => &[],
        }
    }
}

/// Probe-site overrides (1-based, site 1 = most significant bit). Unset
/// fields fall back to [`ProbeSites::default_for`].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbesConfig {
    pub w_site: Option<usize>,
    pub v_site: Option<usize>,
    pub r_site: Option<usize>,
}

impl ProbesConfig {
    pub fn resolve(&self, n: usize) -> ProbeSites {
        let d = ProbeSites::default_for(n);
        ProbeSites {
            w_site: self.w_site.unwrap_or(d.w_site),
            v_site: self.v_site.unwrap_or(d.v_site),
            r_site: self.r_site.unwrap_or(d.r_site),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub enabled: bool,
    /// First-crossing threshold for the dissipation time.
    pub dissipation_threshold: f64,
    /// Manual fit windows, one per β in `betas` order; omit to derive them
    /// from the dissipation time and the plateau of each curve.
    pub windows: Option<Vec<FitWindow>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            enabled: false,
            dissipation_threshold: DISSIPATION_THRESHOLD,
            windows: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Every check `run` performs before computing, with field paths;
    /// collects all failures rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        let mut push = |field: &str, message: String| problems.push(format!("{field}: {message}"));

        match &self.model {
            ModelConfig::Tfsk { n, j_scale, gamma } => {
                let params = TfskParams {
                    n: *n,
                    j_scale: *j_scale,
                    gamma: *gamma,
                };
                if let Err(e) = params.validate() {
                    push("model", e.to_string());
                }
            }
            ModelConfig::Rydberg { gamma, .. } => {
                if let Err(e) = self.model.couplings(0) {
                    push("model", e.to_string());
                }
                if !gamma.is_finite() {
                    push("model.gamma", format!("must be finite, got {gamma}"));
                }
                if self.n_realizations > 1 {
                    push(
                        "n_realizations",
                        format!(
                            "blockade-profile couplings are deterministic; \
                             expected 1 realization, got {}",
                            self.n_realizations
                        ),
                    );
                }
            }
        }

        if self.betas.is_empty() {
            push("betas", "at least one inverse temperature".into());
        }
        for (i, &beta) in self.betas.iter().enumerate() {
            if !beta.is_finite() || beta < 0.0 {
                push(&format!("betas[{i}]"), format!("must be ≥ 0, got {beta}"));
            }
            if self.betas[..i].contains(&beta) {
                push(&format!("betas[{i}]"), format!("duplicate value {beta}"));
            }
        }

        let grid = match self.time_grid.build() {
            Ok(grid) => Some(grid),
            Err(e) => {
                push("time_grid", e.to_string());
                None
            }
        };

        if self.n_realizations == 0 {
            push("n_realizations", "at least one realization".into());
        }

        if self.observables.is_empty() {
            push("observables", "at least one observable".into());
        }
        for (i, obs) in self.observables.iter().enumerate() {
            if self.observables[..i].contains(obs) {
                push(&format!("observables[{i}]"), format!("duplicate {obs:?}"));
            }
        }

        let n = self.model.n();
        let sites = self.probes.resolve(n);
        let kinds = self.batch_kinds();
        if !kinds.is_empty() {
            if let Some(grid) = &grid {
                let request = BatchRequest {
                    kinds: &kinds,
                    betas: &self.betas,
                    times: grid,
                    sites,
                };
                if let Err(e) = request.validate(n) {
                    push("observables/probes", e.to_string());
                }
            }
        }
        if self.observables.contains(&Observable::Protocol) {
            if n > MAX_PROTOCOL_SPINS {
                push(
                    "observables",
                    format!(
                        "protocol simulates 2n+1 = {} qubits densely; \
                         needs n ≤ {MAX_PROTOCOL_SPINS}, got n = {n}",
                        2 * n + 1
                    ),
                );
            }
            for (field, site) in [("w_site", sites.w_site), ("v_site", sites.v_site)] {
                if site < 1 || site > n {
                    push(
                        &format!("probes.{field}"),
                        format!("site {site} outside 1..={n}"),
                    );
                }
            }
            if n > 1 && sites.w_site == sites.v_site {
                push(
                    "probes",
                    format!(
                        "protocol probes coincide at site {}; distinct sites required for n > 1",
                        sites.w_site
                    ),
                );
            }
        }

        self.validate_fit(&mut push, grid.as_deref());

        if self.output_dir.as_os_str().is_empty() {
            problems.push("output_dir: must not be empty".into());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("\n")))
        }
    }

    fn validate_fit(&self, push: &mut impl FnMut(&str, String), grid: Option<&[f64]>) {
        let fit = &self.fit;
        if let Some(windows) = &fit.windows {
            if windows.len() != self.betas.len() {
                push(
                    "fit.windows",
                    format!(
                        "{} windows for {} temperatures",
                        windows.len(),
                        self.betas.len()
                    ),
                );
            }
        }
        if !fit.enabled {
            return;
        }
        if !(fit.dissipation_threshold > 0.0 && fit.dissipation_threshold < 1.0) {
            push(
                "fit.dissipation_threshold",
                format!("must lie in (0, 1), got {}", fit.dissipation_threshold),
            );
        }
        if !self.observables.contains(&Observable::C) {
            push(
                "fit",
                "enabled, but observable \"C\" is not requested".into(),
            );
        }
        if self.betas.iter().any(|&b| b == 0.0) {
            push(
                "fit",
                "the bound comparison needs finite temperatures; drop beta = 0 or disable the fit"
                    .into(),
            );
        }
        match (&fit.windows, grid) {
            (Some(windows), Some(grid)) => {
                let (t_min, t_max) = (grid[0], *grid.last().expect("nonempty grid"));
                for (i, w) in windows.iter().enumerate() {
                    let field = format!("fit.windows[{i}]");
                    if !(w.t_lo.is_finite() && w.t_hi.is_finite() && w.t_lo < w.t_hi) {
                        push(&field, format!("[{}, {}] is empty", w.t_lo, w.t_hi));
                        continue;
                    }
                    if w.t_lo < t_min || w.t_hi > t_max {
                        push(
                            &field,
                            format!(
                                "[{}, {}] outside the grid range [{t_min}, {t_max}]",
                                w.t_lo, w.t_hi
                            ),
                        );
                        continue;
                    }
                    let points = grid
                        .iter()
                        .filter(|&&t| t >= w.t_lo && t <= w.t_hi)
                        .count();
                    if points < MIN_WINDOW_POINTS {
                        push(
                            &field,
                            format!("covers {points} grid points; {MIN_WINDOW_POINTS} needed"),
                        );
                    }
                }
            }
            (None, grid) => {
                if !self.observables.contains(&Observable::R) {
                    push(
                        "fit.windows",
                        "omitted, so windows derive from the dissipation time; \
                         add observable \"R\" or give windows explicitly"
                            .into(),
                    );
                } else if let Some(grid) = grid {
                    if grid[0] != 0.0 {
                        push(
                            "time_grid",
                            "the dissipation time anchors at R(0) = 1; \
                             start the grid at t = 0 (include_zero for log grids)"
                                .into(),
                        );
                    }
                }
            }
            (Some(_), None) => {}
        }
    }

    /// Batch-engine kinds, in config order.
    fn batch_kinds(&self) -> Vec<SeriesKind> {
        self.observables
            .iter()
            .flat_map(|o| o.batch_kinds().iter().copied())
            .collect()
    }
}

/// One (β, dissipation-time) row of the fit report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DissipationRow {
    pub beta: f64,
    pub threshold: f64,
    /// First crossing, absent when the curve never reaches the threshold.
    pub t_d: Option<f64>,
    /// Smallest |R| seen when the threshold was never reached.
    pub floor: Option<f64>,
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub dissipation: Vec<DissipationRow>,
    pub fit: FitResult,
}

/// Names of the fixed artifacts a run may produce.
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FIT_FILE: &str = "fit.json";
pub const BOUND_FILE: &str = "bound.json";

/// One output file of a run, relative to the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// Provenance record written alongside the data. `config_toml` is the
/// effective config (after any command-line overrides); re-running it
/// reproduces every CSV byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub wall_seconds: f64,
    pub config_sha256: String,
    pub config_toml: String,
    pub realization_seeds: Vec<u64>,
    pub artifacts: Vec<ArtifactEntry>,
}

/// What [`run_experiment`] hands back for display.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub artifacts: Vec<String>,
    pub wall_seconds: f64,
}

/// Progress callback: `(realizations done, total)`, called from worker
/// threads.
pub type ProgressFn<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Execute a validated config end to end and write all artifacts.
pub fn run_experiment(
    config: &ExperimentConfig,
    progress: Option<ProgressFn<'_>>,
) -> Result<RunSummary> {
    config.validate()?;
    let started = std::time::Instant::now();
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let times = config.time_grid.build()?;
    let n = config.model.n();
    let sites = config.probes.resolve(n);
    let kinds = config.batch_kinds();
    let wants_protocol = config.observables.contains(&Observable::Protocol);

    // Realizations for the batch engine, then for the protocol simulator;
    // the progress denominator covers both phases.
    let batch_units = if kinds.is_empty() {
        0
    } else {
        config.n_realizations
    };
    let protocol_units = if wants_protocol {
        config.n_realizations
    } else {
        0
    };
    let total_units = batch_units + protocol_units;
    let report = |done: usize| {
        if let Some(f) = progress {
            f(done, total_units);
        }
    };
    let batch_progress = |done: usize, _total: usize| report(done);
    let batch_progress: ProgressFn<'_> = &batch_progress;
    let protocol_progress = |done: usize, _total: usize| report(batch_units + done);
    let protocol_progress: ProgressFn<'_> = &protocol_progress;

    let mut ensembles: Vec<EnsembleResult> = Vec::new();
    if !kinds.is_empty() {
        ensembles = compute_batch_ensembles(
            config,
            &kinds,
            &times,
            sites,
            progress.map(|_| batch_progress),
        )?;
    }
    if wants_protocol {
        ensembles.extend(compute_protocol_ensembles(
            config,
            &times,
            sites,
            progress.map(|_| protocol_progress),
        )?);
    }

    // Single-writer phase: all artifacts from this thread, in config order.
    let mut artifacts: Vec<ArtifactEntry> = Vec::new();
    for series in &ensembles {
        let file = series_file_name(series.kind(), series.beta());
        write_ensemble_csv(&dir.join(&file), series)?;
        artifacts.push(ArtifactEntry {
            file,
            kind: series.kind().label().to_string(),
            beta: Some(series.beta()),
        });
    }

    if config.fit.enabled {
        let (fit_report, bound) = run_fit(config, &ensembles)?;
        write_json(&dir.join(FIT_FILE), &fit_report)?;
        artifacts.push(ArtifactEntry {
            file: FIT_FILE.into(),
            kind: "fit_report".into(),
            beta: None,
        });
        write_json(&dir.join(BOUND_FILE), &bound)?;
        artifacts.push(ArtifactEntry {
            file: BOUND_FILE.into(),
            kind: "bound_report".into(),
            beta: None,
        });
    }

    let config_toml = config.to_toml();
    let manifest = Manifest {
        tool: "otoclab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_seconds: started.elapsed().as_secs_f64(),
        config_sha256: hex_sha256(config_toml.as_bytes()),
        config_toml,
        realization_seeds: (0..config.n_realizations as u64)
            .map(|k| config.base_seed.wrapping_add(k))
            .collect(),
        artifacts: artifacts.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;

    let mut files: Vec<String> = artifacts.into_iter().map(|a| a.file).collect();
    files.push(MANIFEST_FILE.into());
    Ok(RunSummary {
        output_dir: dir.clone(),
        artifacts: files,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn compute_batch_ensembles(
    config: &ExperimentConfig,
    kinds: &[SeriesKind],
    times: &[f64],
    sites: ProbeSites,
    progress: Option<ProgressFn<'_>>,
) -> Result<Vec<EnsembleResult>> {
    match &config.model {
        ModelConfig::Tfsk { n, j_scale, gamma } => {
            let params = TfskParams {
                n: *n,
                j_scale: *j_scale,
                gamma: *gamma,
            };
            ensemble_batch_with_progress(
                &params,
                kinds,
                &config.betas,
                times,
                config.n_realizations,
                config.base_seed,
                sites,
                progress,
            )
        }
        ModelConfig::Rydberg { gamma, .. } => {
            let couplings = config.model.couplings(config.base_seed)?;
            let request = BatchRequest {
                kinds,
                betas: &config.betas,
                times,
                sites,
            };
            let series = evaluate_batch(&couplings, *gamma, config.base_seed, &request)?;
            if let Some(f) = progress {
                f(1, 1);
            }
            series
                .into_iter()
                .map(|s| EnsembleResult::from_series(&[s], config.base_seed))
                .collect()
        }
    }
}

/// Disorder-averaged protocol readouts, reduced exactly like
/// `ensemble_batch`: parallel realizations, sequential in-order reduction.
fn compute_protocol_ensembles(
    config: &ExperimentConfig,
    times: &[f64],
    sites: ProbeSites,
    progress: Option<ProgressFn<'_>>,
) -> Result<Vec<EnsembleResult>> {
    let gamma = config.model.gamma();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let total = config.n_realizations;
    let per_realization: Vec<Result<Vec<TimeSeries>>> = (0..config.n_realizations)
        .into_par_iter()
        .map(|k| {
            let seed = config.base_seed.wrapping_add(k as u64);
            let couplings = config.model.couplings(seed)?;
            let out = protocol_series(
                &couplings,
                gamma,
                seed,
                &config.betas,
                times,
                sites.w_site,
                sites.v_site,
            );
            if let Some(f) = progress {
                f(
                    done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1,
                    total,
                );
            }
            out
        })
        .collect();

    let mut collected: Vec<Vec<TimeSeries>> = Vec::with_capacity(total);
    for (k, res) in per_realization.into_iter().enumerate() {
        match res {
            Ok(series) => collected.push(series),
            Err(e) => {
                return Err(Error::Realization {
                    seed: config.base_seed.wrapping_add(k as u64),
                    source: Box::new(e),
                })
            }
        }
    }
    (0..config.betas.len())
        .map(|bi| {
            let slice: Vec<TimeSeries> = collected.iter().map(|v| v[bi].clone()).collect();
            EnsembleResult::from_series(&slice, config.base_seed)
        })
        .collect()
}

/// Fit phase: dissipation times from `R`, windows (configured or derived),
/// the joint fit over the `C` curves, and the bound comparison.
fn run_fit(
    config: &ExperimentConfig,
    ensembles: &[EnsembleResult],
) -> Result<(FitReport, crate::analysis::BoundReport)> {
    let threshold = config.fit.dissipation_threshold;
    let find = |kind: SeriesKind, beta: f64| {
        ensembles
            .iter()
            .find(|e| e.kind() == kind && e.beta() == beta)
    };

    let mut dissipation: Vec<DissipationRow> = Vec::new();
    for &beta in &config.betas {
        let Some(r_curve) = find(SeriesKind::R, beta) else {
            continue;
        };
        let row = match dissipation_time(r_curve, threshold)? {
            Dissipation::Crossed { t_d } => DissipationRow {
                beta,
                threshold,
                t_d: Some(t_d),
                floor: None,
            },
            Dissipation::NotReached { floor } => DissipationRow {
                beta,
                threshold,
                t_d: None,
                floor: Some(floor),
            },
        };
        dissipation.push(row);
    }

    let mut curves: Vec<&EnsembleResult> = Vec::with_capacity(config.betas.len());
    for &beta in &config.betas {
        curves.push(find(SeriesKind::C, beta).ok_or_else(|| {
            Error::BadFitInput(format!("no C curve at beta = {beta} to fit"))
        })?);
    }

    let windows: Vec<FitWindow> = match &config.fit.windows {
        Some(w) => w.clone(),
        None => {
            let mut out = Vec::with_capacity(curves.len());
            for (curve, &beta) in curves.iter().zip(&config.betas) {
                let row = dissipation
                    .iter()
                    .find(|d| d.beta == beta)
                    .expect("validated: R present for derived windows");
                let t_d = row.t_d.ok_or_else(|| {
                    Error::BadFitInput(format!(
                        "R at beta = {beta} never falls below {threshold} \
                         (floor {:.3}); give fit.windows explicitly",
                        row.floor.unwrap_or(f64::NAN)
                    ))
                })?;
                out.push(default_fit_window(curve, t_d)?);
            }
            out
        }
    };

    let fit = fit_cf(&curves, &windows, FitInit::for_system_size(config.model.n()))?;
    let bound = bound_report(&fit)?;
    Ok((FitReport { dissipation, fit }, bound))
}
