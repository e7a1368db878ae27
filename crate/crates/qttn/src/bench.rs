//! Benchmark harness: validated run configurations, JSON-lines records,
//! figure-of-merit reports, and oracle verification.
//!
//! The CLI in `qttn-cli` is a thin shell over this module so every piece of
//! harness behavior (config validation, grid expansion, report arithmetic)
//! is testable in-process.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendId, BackendName};
use crate::error::{QttnError, Result};
use crate::lanczos::LanczosConfig;
use crate::model::{IsingModelSpec, DEFAULT_CRITICAL_FIELD};
use crate::oracle::{ground_energy, DenseProblem, MAX_ORACLE_QUBITS};
use crate::precision::Precision;
use crate::sweep::{
    find_ground_state, PrecisionSchedule, SweepConfig, SweepRecord, TensorKind, TilingPolicy,
};
use crate::topology::LatticeMapping;

/// Version of the JSON config schema; configs carrying any other version
/// are rejected so old grids cannot be silently misread.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Default figure-of-merit floor for energy-above-best reporting.
pub const DEFAULT_EPSILON: f64 = 1e-4;

fn default_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_j() -> f64 {
    1.0
}
fn default_g() -> f64 {
    DEFAULT_CRITICAL_FIELD
}
fn default_backend() -> BackendName {
    BackendName::Optimized
}
fn default_tile_bytes() -> usize {
    128
}
fn default_svd_cutoff() -> f64 {
    1e-9
}
fn default_verify_rtol() -> f64 {
    1e-8
}

/// One benchmark cell: every knob that can change a result. Serialized
/// verbatim into the record so results stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Row label in reports; generated from the knobs when absent.
    #[serde(default)]
    pub label: Option<String>,
    /// Lattice side length; the model has n x n sites.
    pub n: usize,
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    /// Maximum bond dimension.
    pub chi: usize,
    /// Per-sweep precision letters, e.g. "SSSSDD".
    pub pattern: PrecisionSchedule,
    #[serde(default = "default_backend")]
    pub backend: BackendName,
    /// Backend thread count; falls back to `TTN_THREADS`, then 1.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub skip_ergt: bool,
    #[serde(default)]
    pub tiling: bool,
    #[serde(default = "default_tile_bytes")]
    pub tile_bytes: usize,
    /// Use the Z2 block-sparse tensor family instead of dense tensors.
    #[serde(default)]
    pub symmetry: bool,
    #[serde(default)]
    pub mapping: LatticeMapping,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_svd_cutoff")]
    pub svd_cutoff: f64,
    #[serde(default)]
    pub lanczos: LanczosConfig,
    /// Optional path for a state checkpoint written after the run.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Relative tolerance used by `verify`.
    #[serde(default = "default_verify_rtol")]
    pub verify_rtol: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_SCHEMA_VERSION {
            return Err(QttnError::Config(format!(
                "config schema version {} not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.version
            )));
        }
        // constructs check their own arguments; run them all up front so a
        // bad config fails before any work starts
        IsingModelSpec::new(self.n, self.j, self.g)?;
        crate::topology::TTNTopology::new(self.n * self.n)?;
        self.sweep_config()?.validate()?;
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(QttnError::Config("threads must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Thread count after applying the `TTN_THREADS` environment default.
    pub fn resolved_threads(&self) -> usize {
        self.threads
            .or_else(|| std::env::var("TTN_THREADS").ok().and_then(|v| v.parse().ok()))
            .unwrap_or(1)
            .max(1)
    }

    pub fn backend_id(&self) -> BackendId {
        BackendId {
            name: self.backend,
            thread_count: self.resolved_threads(),
        }
    }

    pub fn tensor_kind(&self) -> TensorKind {
        if self.symmetry {
            TensorKind::Z2
        } else {
            TensorKind::Dense
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            schedule: self.pattern.clone(),
            max_bond_dim: self.chi,
            skip_ergt: self.skip_ergt,
            tiling: TilingPolicy {
                enabled: self.tiling,
                tile_bytes: self.tile_bytes,
            },
            lanczos: self.lanczos.clone(),
            svd_cutoff: self.svd_cutoff,
            svd_algorithm: Default::default(),
            seed: self.seed,
        })
    }

    /// Report label: the explicit one, or a deterministic digest of the
    /// result-affecting knobs.
    pub fn effective_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = format!(
            "N{}_chi{}_{}_{}_t{}",
            self.n,
            self.chi,
            self.pattern,
            self.backend,
            self.resolved_threads()
        );
        if self.symmetry {
            s.push_str("_z2");
        }
        if self.skip_ergt {
            s.push_str("_rgskip");
        }
        if self.tiling {
            s.push_str("_tiled");
        }
        if self.mapping != LatticeMapping::Morton {
            s.push('_');
            s.push_str(self.mapping.name());
        }
        s
    }
}

/// A `RunConfig` whose result-affecting fields may be lists; `expand`
/// produces the cartesian product as individual run configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub n: usize,
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    pub chi: Vec<usize>,
    pub pattern: Vec<PrecisionSchedule>,
    #[serde(default = "default_backend_list")]
    pub backend: Vec<BackendName>,
    #[serde(default = "default_threads_list")]
    pub threads: Vec<usize>,
    #[serde(default = "default_bool_list")]
    pub skip_ergt: Vec<bool>,
    #[serde(default = "default_bool_list")]
    pub tiling: Vec<bool>,
    #[serde(default = "default_bool_list")]
    pub symmetry: Vec<bool>,
    #[serde(default = "default_tile_bytes")]
    pub tile_bytes: usize,
    #[serde(default)]
    pub mapping: LatticeMapping,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_svd_cutoff")]
    pub svd_cutoff: f64,
    #[serde(default)]
    pub lanczos: LanczosConfig,
}

fn default_backend_list() -> Vec<BackendName> {
    vec![BackendName::Optimized]
}
fn default_threads_list() -> Vec<usize> {
    vec![1]
}
fn default_bool_list() -> Vec<bool> {
    vec![false]
}

impl GridConfig {
    /// Cartesian product over the list-valued dimensions, in a fixed
    /// nesting order so grids replay identically.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        for (name, empty) in [
            ("chi", self.chi.is_empty()),
            ("pattern", self.pattern.is_empty()),
            ("backend", self.backend.is_empty()),
            ("threads", self.threads.is_empty()),
            ("skip_ergt", self.skip_ergt.is_empty()),
            ("tiling", self.tiling.is_empty()),
            ("symmetry", self.symmetry.is_empty()),
        ] {
            if empty {
                return Err(QttnError::Config(format!("grid dimension '{name}' is empty")));
            }
        }
        let mut cells = Vec::new();
        // threads is capped to the host so oversubscribed grid rows (e.g. a
        // 112-thread table replayed on a laptop) still run
        let host = std::thread::available_parallelism().map_or(1, |v| v.get());
        for &chi in &self.chi {
            for pattern in &self.pattern {
                for &backend in &self.backend {
                    for &threads in &self.threads {
                        for &skip_ergt in &self.skip_ergt {
                            for &tiling in &self.tiling {
                                for &symmetry in &self.symmetry {
                                    let cell = RunConfig {
                                        version: self.version,
                                        label: None,
                                        n: self.n,
                                        j: self.j,
                                        g: self.g,
                                        chi,
                                        pattern: pattern.clone(),
                                        backend,
                                        threads: Some(threads.min(host).max(1)),
                                        skip_ergt,
                                        tiling,
                                        tile_bytes: self.tile_bytes,
                                        symmetry,
                                        mapping: self.mapping,
                                        seed: self.seed,
                                        svd_cutoff: self.svd_cutoff,
                                        lanczos: self.lanczos.clone(),
                                        checkpoint: None,
                                        verify_rtol: default_verify_rtol(),
                                    };
                                    cell.validate()?;
                                    cells.push(cell);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Everything one benchmark run produced: the full config echo, per-sweep
/// telemetry, and the end-of-run summary values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    /// Version of the crate that produced the record.
    pub artifact_version: String,
    pub label: String,
    pub config: RunConfig,
    pub sweeps: Vec<SweepRecord>,
    /// Wall time of the whole run, including state initialization and the
    /// final energy recomputation (a superset of the sweep times).
    pub total_wall_time_s: f64,
    pub final_energy: f64,
    pub peak_memory_estimate_bytes: u64,
}

/// Execute one configuration end to end.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = IsingModelSpec::new(cfg.n, cfg.j, cfg.g)?;
    let sweep_cfg = cfg.sweep_config()?;
    let result = find_ground_state(
        &spec,
        &sweep_cfg,
        cfg.tensor_kind(),
        cfg.mapping,
        cfg.backend_id(),
    )?;
    let total_wall_time_s = start.elapsed().as_secs_f64();
    let (total_elems, largest_elems) = result.state.elem_counts();
    // working-set estimate: the state plus the Krylov basis over the
    // largest center tensor (the dominant transient allocation)
    let bytes_per = max_schedule_bytes(&cfg.pattern) as u64;
    let peak_memory_estimate_bytes =
        (total_elems + largest_elems * (cfg.lanczos.max_iter as u64 + 3)) * bytes_per;
    if let Some(path) = &cfg.checkpoint {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        result.state.write_checkpoint(&mut f, result.final_energy)?;
        f.flush()?;
    }
    Ok(BenchmarkRecord {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        label: cfg.effective_label(),
        config: cfg.clone(),
        sweeps: result.records,
        total_wall_time_s,
        final_energy: result.final_energy,
        peak_memory_estimate_bytes,
    })
}

fn max_schedule_bytes(schedule: &PrecisionSchedule) -> usize {
    schedule
        .sweeps()
        .iter()
        .map(|p: &Precision| p.bytes_per_scalar())
        .max()
        .unwrap_or(8)
}

/// Run many cells with a bounded worker pool. A failing cell does not abort
/// the grid; failures come back as records of their own.
pub fn run_grid(
    cells: &[RunConfig],
    workers: usize,
) -> (Vec<BenchmarkRecord>, Vec<FailureRecord>) {
    let workers = workers.max(1).min(cells.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<std::result::Result<BenchmarkRecord, String>>> =
        (0..cells.len()).map(|_| None).collect();
    let slot_refs: Vec<std::sync::Mutex<&mut Option<_>>> =
        slots.iter_mut().map(std::sync::Mutex::new).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let outcome = run_benchmark(&cells[i]).map_err(|e| e.to_string());
                **slot_refs[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (cell, slot) in cells.iter().zip(slots) {
        match slot.expect("every cell was claimed by a worker") {
            Ok(r) => records.push(r),
            Err(msg) => failures.push(FailureRecord {
                label: cell.effective_label(),
                config: cell.clone(),
                error: msg,
            }),
        }
    }
    (records, failures)
}

/// Append one record as a JSON line.
pub fn append_record(path: &Path, record: &BenchmarkRecord) -> Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record)
        .map_err(|e| QttnError::Format(format!("record serialization: {e}")))?;
    writeln!(f, "{line}")?;
    Ok(())
}

/// Marker line appended when a run fails after its config was accepted, so
/// a crashed grid still documents what was attempted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub label: String,
    pub config: RunConfig,
    pub error: String,
}

/// Append one failure marker as a JSON line.
pub fn append_failure(path: &Path, failure: &FailureRecord) -> Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(failure)
        .map_err(|e| QttnError::Format(format!("failure serialization: {e}")))?;
    writeln!(f, "{line}")?;
    Ok(())
}

/// Read a JSON-lines record file. Blank lines and failure markers are
/// skipped; anything else that does not parse is an error.
pub fn read_records(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| QttnError::Format(format!("record file line {}: {e}", i + 1)))?;
        if value.get("error").is_some() {
            continue;
        }
        out.push(serde_json::from_value(value).map_err(|e| {
            QttnError::Format(format!("record file line {}: {e}", i + 1))
        })?);
    }
    Ok(out)
}

/// One line of the figure-of-merit table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    /// max(E - E_min over the report set, epsilon)
    pub energy_above_best: f64,
    pub total_wall_time_s: f64,
    /// T_baseline / T_row, when a baseline label was named.
    pub speedup: Option<f64>,
}

/// Rendered report: rows plus deterministic text/CSV/plot-data forms.
#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub csv: String,
    pub text: String,
    /// `time energy_above_best chi` tuples for external plotting; the third
    /// column doubles as a marker-size hint.
    pub plot_data: String,
}

/// Figure-of-merit table over a record set: energy above the set minimum
/// (floored at epsilon) and, given a baseline label, the speedup of every
/// row relative to that baseline's wall time.
pub fn make_report(
    records: &[BenchmarkRecord],
    baseline: Option<&str>,
    epsilon: f64,
) -> Result<Report> {
    if records.is_empty() {
        return Err(QttnError::Argument("report needs at least one record".into()));
    }
    if epsilon <= 0.0 {
        return Err(QttnError::Argument("epsilon must be positive".into()));
    }
    let e_min = records
        .iter()
        .map(|r| r.final_energy)
        .fold(f64::INFINITY, f64::min);
    let t_baseline = match baseline {
        Some(label) => Some(
            records
                .iter()
                .find(|r| r.label == label)
                .ok_or_else(|| QttnError::Config(format!("baseline label '{label}' not found")))?
                .total_wall_time_s,
        ),
        None => None,
    };
    let rows: Vec<ReportRow> = records
        .iter()
        .map(|r| ReportRow {
            label: r.label.clone(),
            energy_above_best: (r.final_energy - e_min).max(epsilon),
            total_wall_time_s: r.total_wall_time_s,
            speedup: t_baseline.map(|tb| tb / r.total_wall_time_s),
        })
        .collect();

    let mut csv = String::from("label,energy_above_best,total_wall_time_s,speedup\n");
    for row in &rows {
        let speedup = row.speedup.map_or(String::new(), |s| s.to_string());
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.label, row.energy_above_best, row.total_wall_time_s, speedup
        ));
    }

    let mut plot_data = String::from("# total_wall_time_s energy_above_best chi\n");
    for (row, rec) in rows.iter().zip(records) {
        plot_data.push_str(&format!(
            "{} {} {}\n",
            row.total_wall_time_s, row.energy_above_best, rec.config.chi
        ));
    }

    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut text = format!(
        "{:<width$}  {:>18}  {:>14}  {:>10}\n",
        "label", "energy_above_best", "wall_time_s", "speedup"
    );
    for row in &rows {
        let speedup = row.speedup.map_or("-".to_string(), |s| format!("{s:.3}"));
        text.push_str(&format!(
            "{:<width$}  {:>18.6e}  {:>14.3}  {:>10}\n",
            row.label, row.energy_above_best, row.total_wall_time_s, speedup
        ));
    }

    Ok(Report {
        rows,
        csv,
        text,
        plot_data,
    })
}

/// Outcome of an exact-diagonalization cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub ttn_energy: f64,
    pub exact_energy: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Run the solver and compare the final energy against the statevector
/// oracle (lattices up to 16 sites).
pub fn verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    cfg.validate()?;
    let num_qubits = cfg.n * cfg.n;
    if num_qubits > MAX_ORACLE_QUBITS {
        return Err(QttnError::Argument(format!(
            "verify needs <= {MAX_ORACLE_QUBITS} qubits, got {num_qubits}"
        )));
    }
    let spec = IsingModelSpec::new(cfg.n, cfg.j, cfg.g)?;
    let terms = crate::model::build_hamiltonian(&spec, cfg.mapping);
    let exact_energy = ground_energy(&DenseProblem::new(num_qubits, terms)?)?;
    let record = run_benchmark(cfg)?;
    let relative_error = (record.final_energy - exact_energy).abs() / exact_energy.abs();
    Ok(VerifyOutcome {
        ttn_energy: record.final_energy,
        exact_energy,
        relative_error,
        tolerance: cfg.verify_rtol,
        pass: relative_error <= cfg.verify_rtol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(n: usize, chi: usize, pattern: &str) -> RunConfig {
        serde_json::from_str(&format!(
            r#"{{"n": {n}, "chi": {chi}, "pattern": "{pattern}", "g": 3.0, "seed": 7, "threads": 1, "backend": "reference"}}"#
        ))
        .unwrap()
    }

    fn synthetic(label: &str, energy: f64, time: f64) -> BenchmarkRecord {
        BenchmarkRecord {
            artifact_version: "0.1.0".into(),
            label: label.into(),
            config: minimal(2, 8, "DD"),
            sweeps: Vec::new(),
            total_wall_time_s: time,
            final_energy: energy,
            peak_memory_estimate_bytes: 0,
        }
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg = minimal(2, 8, "DD");
        assert_eq!(cfg.version, CONFIG_SCHEMA_VERSION);
        assert_eq!(cfg.j, 1.0);
        assert!(!cfg.symmetry);
        assert_eq!(cfg.mapping, LatticeMapping::Morton);
        cfg.validate().unwrap();
        let bad: std::result::Result<RunConfig, _> =
            serde_json::from_str(r#"{"n": 2, "chi": 8, "pattern": "DD", "bond_dim": 8}"#);
        assert!(bad.is_err());
        let v: RunConfig =
            serde_json::from_str(r#"{"version": 9, "n": 2, "chi": 8, "pattern": "DD"}"#).unwrap();
        assert!(v.validate().is_err());
    }

    #[test]
    fn label_generation() {
        let mut cfg = minimal(4, 32, "SSSSDD");
        cfg.skip_ergt = true;
        cfg.symmetry = true;
        assert_eq!(cfg.effective_label(), "N4_chi32_SSSSDD_reference_t1_z2_rgskip");
        cfg.label = Some("custom".into());
        assert_eq!(cfg.effective_label(), "custom");
    }

    #[test]
    fn grid_expansion_counts() {
        let grid: GridConfig = serde_json::from_str(
            r#"{"n": 2, "chi": [16, 32, 64], "pattern": ["DD"], "skip_ergt": [false, true]}"#,
        )
        .unwrap();
        let cells = grid.expand().unwrap();
        assert_eq!(cells.len(), 6);
        // fixed nesting order: chi outermost, skip_ergt inner
        assert_eq!(cells[0].chi, 16);
        assert!(!cells[0].skip_ergt);
        assert!(cells[1].skip_ergt);
        let empty: GridConfig =
            serde_json::from_str(r#"{"n": 2, "chi": [], "pattern": ["DD"]}"#).unwrap();
        assert!(empty.expand().is_err());
    }

    #[test]
    fn minimal_run_produces_schedule_length_records() {
        let rec = run_benchmark(&minimal(2, 8, "DD")).unwrap();
        assert_eq!(rec.sweeps.len(), 2);
        assert!(rec.total_wall_time_s >= rec.sweeps.iter().map(|s| s.wall_time_s).sum::<f64>());
        assert!(rec.peak_memory_estimate_bytes > 0);
        assert!(rec.final_energy.is_finite());
    }

    #[test]
    fn run_is_bitwise_deterministic() {
        let a = run_benchmark(&minimal(2, 8, "DD")).unwrap();
        let b = run_benchmark(&minimal(2, 8, "DD")).unwrap();
        assert_eq!(a.final_energy.to_bits(), b.final_energy.to_bits());
    }

    #[test]
    fn records_round_trip_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let rec = run_benchmark(&minimal(2, 8, "DD")).unwrap();
        append_record(&path, &rec).unwrap();
        append_record(&path, &rec).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].label, rec.label);
        assert_eq!(back[1].final_energy, rec.final_energy);
        assert_eq!(back[0].config, rec.config);
    }

    #[test]
    fn checkpoint_written_and_reloadable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.qtck");
        let mut cfg = minimal(2, 8, "DD");
        cfg.checkpoint = Some(path.clone());
        let rec = run_benchmark(&cfg).unwrap();
        let mut f = std::io::BufReader::new(std::fs::File::open(&path).unwrap());
        let (state, energy) =
            crate::sweep::DynState::read_checkpoint(&mut f, cfg.backend_id()).unwrap();
        assert_eq!(energy, rec.final_energy);
        assert_eq!(state.num_sites(), 4);
        let terms = crate::model::build_hamiltonian(
            &IsingModelSpec::new(2, 1.0, 3.0).unwrap(),
            LatticeMapping::Morton,
        );
        assert!((state.expectation(&terms).unwrap() - rec.final_energy).abs() < 1e-12);
    }

    #[test]
    fn report_floor_rule() {
        let records = vec![synthetic("a", -10.0, 2.0), synthetic("b", -9.5, 1.0)];
        let rep = make_report(&records, None, 1e-4).unwrap();
        // the minimum is its own floor; the other row shows its gap
        assert_eq!(rep.rows[0].energy_above_best, 1e-4);
        assert_eq!(rep.rows[1].energy_above_best, 0.5);
        assert!(rep.rows.iter().all(|r| r.speedup.is_none()));
        let equal = vec![synthetic("a", -10.0, 2.0), synthetic("b", -10.0, 1.0)];
        let rep = make_report(&equal, None, 1e-4).unwrap();
        assert!(rep.rows.iter().all(|r| r.energy_above_best == 1e-4));
    }

    #[test]
    fn report_speedup_against_baseline() {
        let records = vec![synthetic("single", -10.0, 34.0), synthetic("parallel", -10.0, 1.0)];
        let rep = make_report(&records, Some("single"), 1e-4).unwrap();
        assert_eq!(rep.rows[0].speedup, Some(1.0));
        assert_eq!(rep.rows[1].speedup, Some(34.0));
        assert!(rep.csv.contains("parallel,0.0001,1,34\n"));
        assert!(make_report(&records, Some("missing"), 1e-4).is_err());
    }

    #[test]
    fn report_csv_is_deterministic_and_exact() {
        let records = vec![synthetic("a", -10.0, 2.0), synthetic("b", -9.5, 0.5)];
        let rep1 = make_report(&records, Some("a"), 1e-4).unwrap();
        let rep2 = make_report(&records, Some("a"), 1e-4).unwrap();
        assert_eq!(rep1.csv, rep2.csv);
        assert_eq!(
            rep1.csv,
            "label,energy_above_best,total_wall_time_s,speedup\n\
             a,0.0001,2,1\n\
             b,0.5,0.5,4\n"
        );
        assert!(rep1.plot_data.starts_with("# total_wall_time_s energy_above_best chi\n"));
    }

    #[test]
    fn verify_pass_and_fail() {
        let cfg = minimal(2, 16, "DDDD");
        let out = verify(&cfg).unwrap();
        assert!(out.pass, "relative error {}", out.relative_error);
        assert!(out.relative_error <= 1e-8);
        // a chi-starved state cannot reach ED at machine precision
        let mut tight = minimal(2, 2, "DD");
        tight.verify_rtol = 1e-13;
        let out = verify(&tight).unwrap();
        assert!(!out.pass);
    }

    #[test]
    fn grid_runner_collects_failures_without_aborting() {
        let good = minimal(2, 8, "DD");
        let mut bad = minimal(2, 8, "DD");
        bad.version = 99;
        let (records, failures) = run_grid(&[good, bad], 2);
        assert_eq!(records.len(), 1);
        assert_eq!(failures.len(), 1);
        assert!(failures[0].error.contains("version"));
    }
}
