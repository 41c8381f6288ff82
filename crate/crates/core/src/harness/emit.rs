//! CSV, manifest and plot-script output.
//!
//! Floats are written in shortest round-trip exponent form, so emitting the
//! same records twice gives byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{ExperimentSpec, Method, TrialRecord};
use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "method,N,M,mean_ee,std_ee,trials,infeasible";
/// Written where a mean or std has no samples.
pub const NULL_TOKEN: &str = "NA";

const PLOT_SCRIPT: &str = include_str!("plot_results.py");

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub mean_ee: Option<f64>,
    pub std_ee: Option<f64>,
    /// Trials aggregated into the mean.
    pub trials: usize,
    /// Trials whose outcome for this method was flagged infeasible.
    pub infeasible: usize,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    match xs.len() {
        0 => (None, None),
        1 => (Some(xs[0]), Some(0.0)),
        n => {
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (Some(mean), Some(var.sqrt()))
        }
    }
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(|| NULL_TOKEN.to_string(), |v| format!("{v:e}"))
}

fn scenario<'a>(records: &'a [TrialRecord], n: usize, m: usize) -> impl Iterator<Item = &'a TrialRecord> {
    records
        .iter()
        .filter(move |r| r.num_irs_elements == n && r.num_bs_antennas == m)
}

/// Per-method outcomes of one scenario that enter the averages.
fn included<'a>(
    records: &'a [TrialRecord],
    spec: &ExperimentSpec,
    method: Method,
    n: usize,
    m: usize,
) -> impl Iterator<Item = &'a super::MethodOutcome> {
    let include_infeasible = spec.include_infeasible;
    scenario(records, n, m)
        .filter_map(move |r| r.outcome(method))
        .filter(move |o| include_infeasible || o.feasible)
}

/// One row per (method, N, M) in spec order.
pub fn summarize(records: &[TrialRecord], spec: &ExperimentSpec) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &method in &spec.methods {
        for &n in &spec.n_grid {
            for &m in &spec.m_grid {
                let ee: Vec<f64> = included(records, spec, method, n, m).map(|o| o.energy_efficiency).collect();
                let infeasible = scenario(records, n, m)
                    .filter_map(|r| r.outcome(method))
                    .filter(|o| !o.feasible)
                    .count();
                let (mean_ee, std_ee) = mean_std(&ee);
                rows.push(SummaryRow {
                    method,
                    n,
                    m,
                    mean_ee,
                    std_ee,
                    trials: ee.len(),
                    infeasible,
                });
            }
        }
    }
    rows
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.n,
            r.m,
            num(r.mean_ee),
            num(r.std_ee),
            r.trials,
            r.infeasible
        )
        .expect("writing to a String");
    }
    out
}

fn ici_csv(records: &[TrialRecord], spec: &ExperimentSpec) -> String {
    let mut out = String::from("method,N,M,mean_far_ici,std_far_ici,trials\n");
    for &method in &spec.methods {
        for &n in &spec.n_grid {
            for &m in &spec.m_grid {
                let ici: Vec<f64> = included(records, spec, method, n, m).map(|o| o.far_user_ici).collect();
                let (mean, std) = mean_std(&ici);
                writeln!(out, "{method},{n},{m},{},{},{}", num(mean), num(std), ici.len()).expect("writing to a String");
            }
        }
    }
    out
}

/// Mean EE per iteration over all trials of a scenario. A trial that stopped
/// earlier contributes its final value; `active` counts trials still running.
fn convergence_csv(records: &[TrialRecord], spec: &ExperimentSpec, trace: impl Fn(&TrialRecord) -> Vec<f64>) -> String {
    let mut out = String::from("N,M,iteration,mean_ee,active,trials\n");
    for &n in &spec.n_grid {
        for &m in &spec.m_grid {
            let traces: Vec<Vec<f64>> = scenario(records, n, m).map(&trace).filter(|t| !t.is_empty()).collect();
            let len = traces.iter().map(Vec::len).max().unwrap_or(0);
            for it in 0..len {
                let values: Vec<f64> = traces.iter().map(|t| t[it.min(t.len() - 1)]).collect();
                let active = traces.iter().filter(|t| t.len() > it).count();
                let (mean, _) = mean_std(&values);
                writeln!(out, "{n},{m},{it},{},{active},{}", num(mean), traces.len()).expect("writing to a String");
            }
        }
    }
    out
}

/// Git's object id scheme with SHA-256: hash of `blob <len>\0<content>`.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes summary.csv, ici.csv, both convergence files, plot_results.py and
/// manifest.txt into `spec.out_dir`; returns their paths.
pub fn emit_results(records: &[TrialRecord], spec: &ExperimentSpec, config: &SystemConfig) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::invalid("no trial records to emit"));
    }
    let dir = &spec.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let files = [
        ("summary.csv", summary_csv(&summarize(records, spec))),
        ("ici.csv", ici_csv(records, spec)),
        (
            "convergence_stage1.csv",
            convergence_csv(records, spec, |r| r.stage1_trace.iter().map(|t| t.energy_efficiency).collect()),
        ),
        (
            "convergence_stage2.csv",
            convergence_csv(records, spec, |r| r.stage2_trace.iter().map(|t| t.energy_efficiency).collect()),
        ),
        ("plot_results.py", PLOT_SCRIPT.to_string()),
    ];

    let config_text = config.to_config_text();
    let spec_text = spec.describe();
    let mut manifest = String::new();
    writeln!(manifest, "# config").expect("writing to a String");
    manifest.push_str(&config_text);
    writeln!(manifest, "\n# experiment").expect("writing to a String");
    manifest.push_str(&spec_text);
    writeln!(manifest, "records = {}", records.len()).expect("writing to a String");
    writeln!(manifest, "\n# sha256 (git blob)").expect("writing to a String");
    writeln!(manifest, "inputs {}", git_blob_hash(format!("{config_text}{spec_text}").as_bytes()))
        .expect("writing to a String");

    let mut paths = Vec::with_capacity(files.len() + 1);
    for (name, content) in &files {
        paths.push(write(dir, name, content)?);
        writeln!(manifest, "{name} {}", git_blob_hash(content.as_bytes())).expect("writing to a String");
    }
    paths.push(write(dir, "manifest.txt", &manifest)?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{MethodOutcome, Timings};

    fn record(seed: u64, ee: f64, feasible: bool) -> TrialRecord {
        TrialRecord {
            seed,
            num_irs_elements: 16,
            num_bs_antennas: 8,
            qos_attained: feasible,
            outcomes: vec![MethodOutcome {
                method: Method::Proposed,
                energy_efficiency: ee,
                far_user_ici: 1e-12,
                feasible,
            }],
            stage1_trace: vec![],
            stage2_trace: vec![],
            stage1_iterations: 0,
            stage2_iterations: 0,
            timings: Timings::default(),
        }
    }

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            n_grid: vec![16],
            m_grid: vec![8],
            methods: vec![Method::Proposed],
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn all_infeasible_gives_null_mean() {
        let csv = summary_csv(&summarize(&[record(1, 3.0, false), record(2, 4.0, false)], &spec()));
        assert_eq!(csv, format!("{SUMMARY_HEADER}\nproposed,16,8,NA,NA,0,2\n"));
    }

    #[test]
    fn include_infeasible_aggregates_flagged_trials() {
        let s = ExperimentSpec { include_infeasible: true, ..spec() };
        let rows = summarize(&[record(1, 3.0, false), record(2, 5.0, true)], &s);
        assert_eq!(rows[0].mean_ee, Some(4.0));
        assert_eq!(rows[0].trials, 2);
        assert_eq!(rows[0].infeasible, 1);
        assert!((rows[0].std_ee.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn blob_hash_of_empty_content() {
        // `git hash-object --object-format=sha256 /dev/null`
        assert_eq!(
            git_blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
