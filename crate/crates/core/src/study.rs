//! End-to-end experiment harness: network generation, norm solving, tuning,
//! and aggregate reporting.
//!
//! Every stage persists its output and every later stage runs from those
//! files alone, so a study can be resumed or re-reported at any point.
//! `run_study` chains the file-driven stages, which makes a regenerated
//! report byte-identical to a fresh run by construction.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculi::{Calculus, CalculusParams, EvalOptions};
use crate::io::{self, IoError, NetworkRow, NormRow, RmseRow, RmseTable};
use crate::joint::JointError;
use crate::mce::{mce_update, EvidenceProbe, MceError};
use crate::sampler::{sample_tables, SamplerConfig};
use crate::stats::{correlation_matrix, network_rmse, ols_fit, rm_anova, AnovaOutcome, OlsFit};
use crate::tuner::{probe_grid, tune, ProblemSet, TunerConfig, TunerError, DEFAULT_GRID};

pub const NETWORKS_FILE: &str = "networks.csv";
pub const NORMS_FILE: &str = "norms.csv";
pub const TUNED_PARAMS_FILE: &str = "tuned_params.json";
pub const RMSE_FILE: &str = "per_network_rmse.csv";
pub const REPORT_MD_FILE: &str = "report.md";
pub const REPORT_JSON_FILE: &str = "report.json";

/// A three-parameter method outperforming the independence model beyond this
/// margin counts as an exception in the report.
pub const EXCEPTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("solve: network {id}, probe ({p1}, {p2}): {source}")]
    Solve {
        id: u64,
        p1: f64,
        p2: f64,
        #[source]
        source: MceError,
    },
    #[error("tune: network {id}, {calculus}: {source}")]
    Tune {
        id: u64,
        calculus: Calculus,
        #[source]
        source: TunerError,
    },
    #[error("network {id}: {source}")]
    Network {
        id: u64,
        #[source]
        source: JointError,
    },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

/// Full configuration of a study run.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub seed: u64,
    pub networks: usize,
    pub grid: Vec<f64>,
    pub methods: Vec<Calculus>,
    pub restarts: usize,
    pub mycin_clamp: bool,
    pub out_dir: PathBuf,
}

impl StudyConfig {
    /// Defaults: 109 networks, the standard five-level grid, all four
    /// methods, 4 random restarts, signed MYCIN attenuation.
    pub fn new(seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        StudyConfig {
            seed,
            networks: crate::sampler::DEFAULT_NETWORK_COUNT,
            grid: DEFAULT_GRID.to_vec(),
            methods: Calculus::ALL.to_vec(),
            restarts: 4,
            mycin_clamp: false,
            out_dir: out_dir.into(),
        }
    }
}

/// Run parameters recorded alongside results so every artifact is
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub networks: usize,
    pub grid: Vec<f64>,
    pub methods: Vec<Calculus>,
    pub restarts: usize,
    pub mycin_clamp: bool,
}

/// Tuning outcome of one calculus on one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub calculus: Calculus,
    pub params: CalculusParams,
    pub mse: f64,
    pub rmse: f64,
    pub theoretical_mse: f64,
    pub theoretical_rmse: f64,
    pub starts_agreeing: usize,
}

/// Everything measured on one network. `methods` aligns with the run's
/// method list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkResult {
    pub network_id: u64,
    pub additivity: f64,
    pub methods: Vec<MethodResult>,
}

/// Schema of `tuned_params.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedParamsFile {
    pub meta: RunMetadata,
    pub networks: Vec<NetworkResult>,
}

/// Accuracy summary of one calculus across all networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub calculus: Calculus,
    /// Mean of per-network RMSEs.
    pub average_rmse: f64,
    pub high_rmse: f64,
    pub low_rmse: f64,
    /// RMSE pooled over every (network, probe) pair, the alternative reading
    /// of the aggregate.
    pub pooled_rmse: f64,
    /// Mean per-network RMSE of the untuned theoretical translation.
    pub average_theoretical_rmse: f64,
    /// Least-squares fit of per-network RMSE on the additivity factor;
    /// absent when the run is too small or degenerate to regress.
    pub regression: Option<OlsFit>,
}

/// Aggregate study outcome, the schema of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub meta: RunMetadata,
    pub methods: Vec<MethodSummary>,
    /// Pearson correlations of per-network RMSEs, aligned with the method
    /// list; absent when fewer than three networks or a method's column is
    /// constant.
    pub correlations: Option<Vec<Vec<f64>>>,
    /// Repeated-measures ANOVA across methods with networks as subjects;
    /// absent when fewer than two networks.
    pub anova: Option<AnovaOutcome>,
    /// Networks where some other method beat the independence model by more
    /// than [`EXCEPTION_TOLERANCE`]; absent when independence was not run.
    pub independence_exceptions: Option<usize>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (network, method) tuning task. Mixing instead of offsetting
/// keeps the streams independent of network count and method order.
fn derive_seed(base: u64, network_id: u64, method_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ network_id) ^ method_index)
}

fn canonical_index(calculus: Calculus) -> u64 {
    Calculus::ALL
        .iter()
        .position(|&c| c == calculus)
        .expect("every calculus is in ALL") as u64
}

fn validate_grid(grid: &[f64]) -> Result<(), StudyError> {
    if grid.is_empty() {
        return Err(StudyError::Config("probe grid is empty".into()));
    }
    for &level in grid {
        if !(0.0..=1.0).contains(&level) {
            return Err(StudyError::Config(format!(
                "grid level {level} is outside [0, 1]"
            )));
        }
    }
    Ok(())
}

fn validate_methods(methods: &[Calculus]) -> Result<(), StudyError> {
    if methods.is_empty() {
        return Err(StudyError::Config("no methods selected".into()));
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(StudyError::Config(format!("method {m} listed twice")));
        }
    }
    Ok(())
}

/// Samples `count` networks and writes `networks.csv`.
pub fn stage_generate(seed: u64, count: usize, out: &Path) -> Result<(), StudyError> {
    if count == 0 {
        return Err(StudyError::Config("network count must be at least 1".into()));
    }
    let tables = sample_tables(&SamplerConfig::new(seed, count));
    io::write_networks(out, &tables)?;
    Ok(())
}

/// Solves the norm at every grid probe for every network in `networks_path`
/// and writes `norms.csv`.
pub fn stage_solve(networks_path: &Path, grid: &[f64], out: &Path) -> Result<(), StudyError> {
    validate_grid(grid)?;
    let networks = io::read_networks(networks_path)?;
    let probes = probe_grid(grid);
    let per_network: Vec<Vec<NormRow>> = networks
        .par_iter()
        .map(|row| {
            probes
                .iter()
                .map(|&probe| {
                    let solution = mce_update(&row.table, probe).map_err(|source| {
                        StudyError::Solve {
                            id: row.id,
                            p1: probe.p1,
                            p2: probe.p2,
                            source,
                        }
                    })?;
                    Ok(NormRow {
                        network_id: row.id,
                        p1: probe.p1,
                        p2: probe.p2,
                        posterior_c: solution.posterior_c,
                        iterations: solution.iterations as u64,
                        residual: solution.residual,
                    })
                })
                .collect::<Result<Vec<_>, StudyError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<NormRow> = per_network.into_iter().flatten().collect();
    io::write_norms(out, &rows)?;
    Ok(())
}

/// Splits norm rows into one problem per network, in `networks` order.
/// Rows must be contiguous per network and every network must carry the same
/// probe sequence.
fn group_norms(
    networks: &[NetworkRow],
    norms: &[NormRow],
) -> Result<Vec<ProblemSet>, StudyError> {
    let mut runs: Vec<(u64, Vec<&NormRow>)> = Vec::new();
    for row in norms {
        match runs.last_mut() {
            Some((id, rows)) if *id == row.network_id => rows.push(row),
            _ => runs.push((row.network_id, vec![row])),
        }
    }
    if runs.len() != networks.len()
        || runs.iter().zip(networks).any(|((id, _), n)| *id != n.id)
    {
        return Err(StudyError::Inconsistent(format!(
            "norms cover networks {:?}, networks file has {:?}",
            runs.iter().map(|(id, _)| *id).collect::<Vec<_>>(),
            networks.iter().map(|n| n.id).collect::<Vec<_>>()
        )));
    }
    let reference: Vec<(f64, f64)> = runs[0].1.iter().map(|r| (r.p1, r.p2)).collect();
    let mut problems = Vec::with_capacity(runs.len());
    for (id, rows) in &runs {
        let probes: Vec<(f64, f64)> = rows.iter().map(|r| (r.p1, r.p2)).collect();
        if probes != reference {
            return Err(StudyError::Inconsistent(format!(
                "network {id} was solved on a different probe grid"
            )));
        }
        let probes = rows
            .iter()
            .map(|r| EvidenceProbe::new(r.p1, r.p2))
            .collect();
        let targets = rows.iter().map(|r| r.posterior_c).collect();
        problems.push(ProblemSet::new(probes, targets).map_err(|source| {
            StudyError::Inconsistent(format!("network {id}: {source}"))
        })?);
    }
    Ok(problems)
}

/// Distinct `p1` levels in order of first appearance; recovers the grid that
/// produced a Cartesian probe sequence.
fn levels_from(problems: &ProblemSet) -> Vec<f64> {
    let mut levels: Vec<f64> = Vec::new();
    for probe in problems.probes() {
        if !levels.contains(&probe.p1) {
            levels.push(probe.p1);
        }
    }
    levels
}

fn tune_networks(
    networks: &[NetworkRow],
    problems: &[ProblemSet],
    meta: &RunMetadata,
) -> Result<Vec<NetworkResult>, StudyError> {
    networks
        .par_iter()
        .zip(problems.par_iter())
        .map(|(row, problem)| {
            let additivity = row
                .table
                .additivity_factor()
                .map_err(|source| StudyError::Network { id: row.id, source })?;
            let methods = meta
                .methods
                .iter()
                .map(|&calculus| {
                    let config = TunerConfig {
                        restarts: meta.restarts,
                        seed: derive_seed(meta.seed, row.id, canonical_index(calculus)),
                        options: EvalOptions {
                            mycin_clamp: meta.mycin_clamp,
                        },
                        ..TunerConfig::default()
                    };
                    let tuned =
                        tune(calculus, problem, &row.table, &config).map_err(|source| {
                            StudyError::Tune {
                                id: row.id,
                                calculus,
                                source,
                            }
                        })?;
                    Ok(MethodResult {
                        calculus,
                        params: tuned.params,
                        mse: tuned.mse,
                        rmse: tuned.rmse,
                        theoretical_mse: tuned.theoretical_mse,
                        theoretical_rmse: tuned.theoretical_mse.sqrt(),
                        starts_agreeing: tuned.starts_agreeing,
                    })
                })
                .collect::<Result<Vec<_>, StudyError>>()?;
            Ok(NetworkResult {
                network_id: row.id,
                additivity,
                methods,
            })
        })
        .collect()
}

/// Tunes every method on every network and writes `tuned_params.json`.
#[allow(clippy::too_many_arguments)]
pub fn stage_tune(
    networks_path: &Path,
    norms_path: &Path,
    methods: &[Calculus],
    restarts: usize,
    seed: u64,
    mycin_clamp: bool,
    out: &Path,
) -> Result<(), StudyError> {
    validate_methods(methods)?;
    let networks = io::read_networks(networks_path)?;
    if networks.is_empty() {
        return Err(StudyError::Config("networks file is empty".into()));
    }
    let norms = io::read_norms(norms_path)?;
    let problems = group_norms(&networks, &norms)?;
    let meta = RunMetadata {
        seed,
        networks: networks.len(),
        grid: levels_from(&problems[0]),
        methods: methods.to_vec(),
        restarts,
        mycin_clamp,
    };
    let results = tune_networks(&networks, &problems, &meta)?;
    io::write_json(
        out,
        &TunedParamsFile {
            meta,
            networks: results,
        },
    )?;
    Ok(())
}

fn build_report(meta: RunMetadata, results: &[NetworkResult]) -> StudyReport {
    let n = results.len();
    let additivities: Vec<f64> = results.iter().map(|r| r.additivity).collect();
    let columns: Vec<Vec<f64>> = (0..meta.methods.len())
        .map(|j| results.iter().map(|r| r.methods[j].rmse).collect())
        .collect();

    let methods = meta
        .methods
        .iter()
        .enumerate()
        .map(|(j, &calculus)| {
            let column = &columns[j];
            let mean_mse =
                results.iter().map(|r| r.methods[j].mse).sum::<f64>() / n as f64;
            let average_theoretical_rmse = results
                .iter()
                .map(|r| r.methods[j].theoretical_rmse)
                .sum::<f64>()
                / n as f64;
            MethodSummary {
                calculus,
                average_rmse: column.iter().sum::<f64>() / n as f64,
                high_rmse: column.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                low_rmse: column.iter().cloned().fold(f64::INFINITY, f64::min),
                pooled_rmse: mean_mse.sqrt(),
                average_theoretical_rmse,
                regression: ols_fit(&additivities, column).ok(),
            }
        })
        .collect();

    let correlations = if n >= 3 {
        correlation_matrix(&columns).ok()
    } else {
        None
    };
    let anova = if n >= 2 {
        let matrix: Vec<Vec<f64>> = results
            .iter()
            .map(|r| r.methods.iter().map(|m| m.rmse).collect())
            .collect();
        rm_anova(&matrix).ok()
    } else {
        None
    };
    let independence_exceptions = meta
        .methods
        .iter()
        .position(|&m| m == Calculus::Independence)
        .map(|ind| {
            results
                .iter()
                .filter(|r| {
                    let baseline = r.methods[ind].rmse;
                    r.methods
                        .iter()
                        .any(|m| m.rmse < baseline - EXCEPTION_TOLERANCE)
                })
                .count()
        });

    StudyReport {
        meta,
        methods,
        correlations,
        anova,
        independence_exceptions,
    }
}

fn render_markdown(report: &StudyReport) -> String {
    use std::fmt::Write;
    let mut md = String::new();
    let meta = &report.meta;
    let method_names: Vec<&str> = meta.methods.iter().map(|m| m.name()).collect();

    writeln!(md, "# Tuning study report\n").unwrap();
    writeln!(md, "- seed: {}", meta.seed).unwrap();
    writeln!(md, "- networks: {}", meta.networks).unwrap();
    let grid: Vec<String> = meta.grid.iter().map(|g| g.to_string()).collect();
    writeln!(md, "- probe grid: {}", grid.join(", ")).unwrap();
    writeln!(md, "- methods: {}", method_names.join(", ")).unwrap();
    writeln!(md, "- restarts: {}", meta.restarts).unwrap();
    writeln!(md, "- mycin clamp: {}", meta.mycin_clamp).unwrap();

    writeln!(md, "\n## Root mean squared error by method\n").unwrap();
    writeln!(
        md,
        "| method | average | high | low | pooled | untuned average |"
    )
    .unwrap();
    writeln!(md, "|---|---|---|---|---|---|").unwrap();
    for m in &report.methods {
        writeln!(
            md,
            "| {} | {:.5} | {:.5} | {:.5} | {:.5} | {:.5} |",
            m.calculus, m.average_rmse, m.high_rmse, m.low_rmse, m.pooled_rmse,
            m.average_theoretical_rmse
        )
        .unwrap();
    }

    writeln!(md, "\n## Correlation of per-network RMSE\n").unwrap();
    match &report.correlations {
        Some(matrix) => {
            writeln!(md, "| | {} |", method_names.join(" | ")).unwrap();
            write!(md, "|---|").unwrap();
            for _ in &method_names {
                write!(md, "---|").unwrap();
            }
            writeln!(md).unwrap();
            for (i, name) in method_names.iter().enumerate() {
                write!(md, "| {name} |").unwrap();
                for value in &matrix[i] {
                    write!(md, " {value:.4} |").unwrap();
                }
                writeln!(md).unwrap();
            }
        }
        None => writeln!(md, "Not computed: needs at least three networks with varying error.")
            .unwrap(),
    }

    writeln!(md, "\n## Per-network RMSE versus additivity factor\n").unwrap();
    writeln!(md, "| method | slope | intercept |").unwrap();
    writeln!(md, "|---|---|---|").unwrap();
    for m in &report.methods {
        match &m.regression {
            Some(fit) => writeln!(
                md,
                "| {} | {:.4} | {:.4} |",
                m.calculus, fit.slope, fit.intercept
            )
            .unwrap(),
            None => writeln!(md, "| {} | - | - |", m.calculus).unwrap(),
        }
    }

    writeln!(md, "\n## Repeated-measures analysis of variance\n").unwrap();
    match &report.anova {
        Some(AnovaOutcome::Statistic { f, df1, df2, p }) => {
            writeln!(md, "F({df1}, {df2}) = {f:.2}, p = {p:.3e}").unwrap();
        }
        Some(AnovaOutcome::Infinite { df1, df2 }) => {
            writeln!(
                md,
                "F({df1}, {df2}) diverges: zero within-network error with a nonzero method effect."
            )
            .unwrap();
        }
        Some(AnovaOutcome::NotSignificant { df1, df2 }) => {
            writeln!(md, "F({df1}, {df2}) undefined: no variance anywhere.").unwrap();
        }
        None => writeln!(md, "Not computed: needs at least two networks.").unwrap(),
    }

    if let Some(count) = report.independence_exceptions {
        writeln!(
            md,
            "\nNetworks where another method beat independence by more than {EXCEPTION_TOLERANCE:e}: {count}"
        )
        .unwrap();
    }
    md
}

/// Builds the aggregate report from `networks.csv` and `tuned_params.json`,
/// writing `per_network_rmse.csv`, `report.md`, and `report.json` into
/// `out_dir`.
pub fn stage_report(
    networks_path: &Path,
    tuned_path: &Path,
    out_dir: &Path,
) -> Result<StudyReport, StudyError> {
    fs::create_dir_all(out_dir).map_err(|source| IoError::File {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let networks = io::read_networks(networks_path)?;
    let file: TunedParamsFile = io::read_json(tuned_path)?;
    if file.networks.is_empty() {
        return Err(StudyError::Config("tuned parameter file holds no networks".into()));
    }
    validate_methods(&file.meta.methods)?;

    if networks.len() != file.networks.len()
        || networks
            .iter()
            .zip(&file.networks)
            .any(|(n, r)| n.id != r.network_id)
    {
        return Err(StudyError::Inconsistent(
            "tuned parameters and networks file list different networks".into(),
        ));
    }
    for (network, result) in networks.iter().zip(&file.networks) {
        let sequence: Vec<Calculus> = result.methods.iter().map(|m| m.calculus).collect();
        if sequence != file.meta.methods {
            return Err(StudyError::Inconsistent(format!(
                "network {} holds methods {:?}, run metadata says {:?}",
                result.network_id, sequence, file.meta.methods
            )));
        }
        // Same table bits and the same pure function reproduce the stored
        // additivity exactly; any difference means mixed-up files.
        let recomputed = network
            .table
            .additivity_factor()
            .map_err(|source| StudyError::Network { id: network.id, source })?;
        if recomputed != result.additivity {
            return Err(StudyError::Inconsistent(format!(
                "network {}: stored additivity {} does not match the table's {}",
                network.id, result.additivity, recomputed
            )));
        }
        // An additive table makes the norm surface an exact plane, so a
        // sound pipeline cannot leave the linear model with visible error.
        if result.additivity < 1e-6 {
            for method in &result.methods {
                if method.calculus == Calculus::Linear && method.rmse >= 1e-3 {
                    return Err(StudyError::Inconsistent(format!(
                        "network {}: additivity {} yet linear rmse {}",
                        network.id, result.additivity, method.rmse
                    )));
                }
            }
        }
    }

    let rmse_table = RmseTable {
        methods: file.meta.methods.clone(),
        rows: file
            .networks
            .iter()
            .map(|r| RmseRow {
                network_id: r.network_id,
                additivity: r.additivity,
                values: r.methods.iter().map(|m| m.rmse).collect(),
            })
            .collect(),
    };
    io::write_rmse_table(&out_dir.join(RMSE_FILE), &rmse_table)?;

    let report = build_report(file.meta, &file.networks);
    io::write_json(&out_dir.join(REPORT_JSON_FILE), &report)?;
    io::write_text(&out_dir.join(REPORT_MD_FILE), &render_markdown(&report))?;
    Ok(report)
}

/// Runs the full pipeline into `config.out_dir`, chaining the file-driven
/// stages.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, StudyError> {
    validate_grid(&config.grid)?;
    validate_methods(&config.methods)?;
    fs::create_dir_all(&config.out_dir).map_err(|source| IoError::File {
        path: config.out_dir.clone(),
        source,
    })?;
    let dir = &config.out_dir;
    let networks = dir.join(NETWORKS_FILE);
    let norms = dir.join(NORMS_FILE);
    let tuned = dir.join(TUNED_PARAMS_FILE);

    stage_generate(config.seed, config.networks, &networks)?;
    stage_solve(&networks, &config.grid, &norms)?;
    stage_tune(
        &networks,
        &norms,
        &config.methods,
        config.restarts,
        config.seed,
        config.mycin_clamp,
        &tuned,
    )?;
    stage_report(&networks, &tuned, dir)
}

/// Per-network RMSE recomputed from persisted parameters; used to confirm a
/// report matches its inputs.
pub fn recompute_rmse(
    result: &NetworkResult,
    problems: &ProblemSet,
    mycin_clamp: bool,
) -> Vec<f64> {
    let options = EvalOptions { mycin_clamp };
    result
        .methods
        .iter()
        .map(|m| {
            let residuals: Vec<f64> = problems
                .probes()
                .iter()
                .zip(problems.targets())
                .map(|(&probe, &target)| m.params.eval(probe, options) - target)
                .collect();
            network_rmse(&residuals)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::JointTable;

    fn mini_config(dir: &Path) -> StudyConfig {
        StudyConfig {
            networks: 3,
            restarts: 2,
            ..StudyConfig::new(42, dir)
        }
    }

    #[test]
    fn derived_seeds_differ_across_tasks() {
        let mut seen = std::collections::HashSet::new();
        for network in 0..50u64 {
            for method in 0..4u64 {
                assert!(seen.insert(derive_seed(7, network, method)));
            }
        }
        assert_ne!(derive_seed(7, 1, 2), derive_seed(8, 1, 2));
    }

    #[test]
    fn mini_study_produces_consistent_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = mini_config(dir.path());
        let report = run_study(&config).unwrap();

        for file in [
            NETWORKS_FILE,
            NORMS_FILE,
            TUNED_PARAMS_FILE,
            RMSE_FILE,
            REPORT_MD_FILE,
            REPORT_JSON_FILE,
        ] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }

        assert_eq!(report.meta.networks, 3);
        assert_eq!(report.methods.len(), 4);
        for m in &report.methods {
            assert!(m.low_rmse <= m.average_rmse && m.average_rmse <= m.high_rmse);
            assert!(m.regression.is_some());
        }
        let correlations = report.correlations.as_ref().unwrap();
        assert_eq!(correlations.len(), 4);
        for (i, row) in correlations.iter().enumerate() {
            assert_eq!(row[i], 1.0);
            for (j, value) in row.iter().enumerate() {
                assert_eq!(*value, correlations[j][i]);
            }
        }
        assert!(report.anova.is_some());

        // The persisted RMSE table matches the report's inputs.
        let rmse = io::read_rmse_table(&dir.path().join(RMSE_FILE)).unwrap();
        assert_eq!(rmse.methods, report.meta.methods);
        assert_eq!(rmse.rows.len(), 3);

        // Stored parameters reproduce the stored RMSEs from the stored norms.
        let networks = io::read_networks(&dir.path().join(NETWORKS_FILE)).unwrap();
        let norms = io::read_norms(&dir.path().join(NORMS_FILE)).unwrap();
        let problems = group_norms(&networks, &norms).unwrap();
        let tuned: TunedParamsFile =
            io::read_json(&dir.path().join(TUNED_PARAMS_FILE)).unwrap();
        for (result, problem) in tuned.networks.iter().zip(&problems) {
            let recomputed = recompute_rmse(result, problem, tuned.meta.mycin_clamp);
            for (method, value) in result.methods.iter().zip(recomputed) {
                assert!(
                    (method.rmse - value).abs() < 1e-12,
                    "stored {} vs recomputed {}",
                    method.rmse,
                    value
                );
            }
        }
    }

    #[test]
    fn studies_are_byte_deterministic_and_reports_regenerate() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_study(&mini_config(dir_a.path())).unwrap();
        run_study(&mini_config(dir_b.path())).unwrap();

        for file in [NETWORKS_FILE, NORMS_FILE, TUNED_PARAMS_FILE, RMSE_FILE, REPORT_JSON_FILE] {
            let a = fs::read(dir_a.path().join(file)).unwrap();
            let b = fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }

        // Re-reporting from the persisted stage outputs reproduces the
        // report bytes.
        let before = fs::read(dir_a.path().join(REPORT_JSON_FILE)).unwrap();
        fs::remove_file(dir_a.path().join(REPORT_JSON_FILE)).unwrap();
        stage_report(
            &dir_a.path().join(NETWORKS_FILE),
            &dir_a.path().join(TUNED_PARAMS_FILE),
            dir_a.path(),
        )
        .unwrap();
        let after = fs::read(dir_a.path().join(REPORT_JSON_FILE)).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn uniform_network_is_fit_perfectly_by_every_method() {
        let dir = tempfile::tempdir().unwrap();
        let networks = dir.path().join(NETWORKS_FILE);
        io::write_networks(&networks, &[JointTable::uniform()]).unwrap();
        let norms = dir.path().join(NORMS_FILE);
        stage_solve(&networks, &DEFAULT_GRID, &norms).unwrap();
        let tuned = dir.path().join(TUNED_PARAMS_FILE);
        stage_tune(&networks, &norms, &Calculus::ALL, 2, 9, false, &tuned).unwrap();
        let report = stage_report(&networks, &tuned, dir.path()).unwrap();

        assert_eq!(report.meta.networks, 1);
        for m in &report.methods {
            assert!(m.average_rmse < 1e-6, "{}: {}", m.calculus, m.average_rmse);
        }
        // Single-network runs cannot support the aggregate statistics.
        assert!(report.correlations.is_none());
        assert!(report.anova.is_none());
        assert!(report.methods.iter().all(|m| m.regression.is_none()));
        assert_eq!(report.independence_exceptions, Some(0));
    }

    #[test]
    fn mismatched_stage_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let config = mini_config(dir.path());
        run_study(&config).unwrap();

        // Norms from a different network set.
        let other = tempfile::tempdir().unwrap();
        stage_generate(99, 2, &other.path().join(NETWORKS_FILE)).unwrap();
        let err = stage_tune(
            &other.path().join(NETWORKS_FILE),
            &dir.path().join(NORMS_FILE),
            &Calculus::ALL,
            1,
            0,
            false,
            &other.path().join(TUNED_PARAMS_FILE),
        )
        .unwrap_err();
        assert!(matches!(err, StudyError::Inconsistent(_)), "{err}");

        // Tuned parameters against the wrong networks file.
        let err = stage_report(
            &other.path().join(NETWORKS_FILE),
            &dir.path().join(TUNED_PARAMS_FILE),
            other.path(),
        )
        .unwrap_err();
        assert!(matches!(err, StudyError::Inconsistent(_)), "{err}");
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = mini_config(dir.path());
        config.grid = vec![];
        assert!(matches!(run_study(&config).unwrap_err(), StudyError::Config(_)));

        let mut config = mini_config(dir.path());
        config.grid = vec![0.5, 1.5];
        assert!(matches!(run_study(&config).unwrap_err(), StudyError::Config(_)));

        let mut config = mini_config(dir.path());
        config.methods = vec![Calculus::Linear, Calculus::Linear];
        assert!(matches!(run_study(&config).unwrap_err(), StudyError::Config(_)));

        let mut config = mini_config(dir.path());
        config.methods = vec![];
        assert!(matches!(run_study(&config).unwrap_err(), StudyError::Config(_)));
    }
}
