//! The full sweep study behind the `experiment` command: sum-rate and
//! fairness against the QoS target and against `alpha`, plus optimizer
//! convergence traces, written as one CSV per figure and a manifest from
//! which the run can be repeated exactly.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{defaults, Layout, PhysicalParams};
use crate::error::{invalid, Result};
use crate::experiment::{
    compare_schemes, run_drop, run_experiment, write_figure_csv, Comparison, ExperimentConfig, ExperimentResult,
    Metric, ScenarioTemplate, Scheme, Sweep, SweepAxis,
};
use crate::network::{ConvergenceTrace, OptimizerConfig};

pub const FIG_SUMRATE_VS_RTH: &str = "fig2_sumrate_vs_rth.csv";
pub const FIG_JAIN_VS_RTH: &str = "fig3_jain_vs_rth.csv";
pub const FIG_SUMRATE_VS_ALPHA: &str = "fig4_sumrate_vs_alpha.csv";
pub const FIG_JAIN_VS_ALPHA: &str = "fig5_jain_vs_alpha.csv";
pub const FIG_CONVERGENCE: &str = "fig6_convergence.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RthSweep {
    /// QoS targets (bit/s), strictly increasing.
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl Default for RthSweep {
    fn default() -> Self {
        RthSweep {
            values: vec![0.5e6, 1e6, 2e6, 3e6, 4e6, 5e6, 6e6],
            alpha: 0.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaSweep {
    pub values: Vec<f64>,
    pub r_th: f64,
}

impl Default for AlphaSweep {
    fn default() -> Self {
        AlphaSweep {
            values: vec![0.5, 0.7, 0.9, 0.95],
            r_th: 1e6,
        }
    }
}

/// Single-drop optimizer traces, one per `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceStudy {
    pub alphas: Vec<f64>,
    pub r_th: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for ConvergenceStudy {
    fn default() -> Self {
        ConvergenceStudy {
            alphas: vec![0.5, 0.7, 0.9, 0.95],
            r_th: 1e6,
            seed: 1,
            scheme: Scheme::ConomaOpt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub schemes: Vec<Scheme>,
    pub drops: usize,
    pub base_seed: u64,
    pub layout: Layout,
    pub params: PhysicalParams,
    /// Where each physical default came from; carried through to the manifest.
    pub provenance: BTreeMap<String, String>,
    pub optimizer: OptimizerConfig,
    /// `null` skips the sweep.
    pub rth_sweep: Option<RthSweep>,
    pub alpha_sweep: Option<AlphaSweep>,
    pub convergence: Option<ConvergenceStudy>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let d = defaults();
        StudyConfig {
            schemes: Scheme::ALL.to_vec(),
            drops: 200,
            base_seed: 1,
            layout: d.layout.clone(),
            params: d.params.clone(),
            provenance: d.provenance.clone(),
            optimizer: OptimizerConfig::default(),
            rth_sweep: Some(RthSweep::default()),
            alpha_sweep: Some(AlphaSweep::default()),
            convergence: Some(ConvergenceStudy::default()),
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: StudyConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "no scheme selected"));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(invalid("schemes", "a scheme is listed twice"));
        }
        for config in self.experiments(Scheme::ConomaFixed) {
            config.validate()?;
        }
        if let Some(c) = &self.convergence {
            if c.alphas.iter().any(|a| !(0.0..1.0).contains(a)) {
                return Err(invalid("convergence.alphas", "each alpha must lie in [0, 1)"));
            }
            if !(c.r_th.is_finite() && c.r_th >= 0.0) {
                return Err(invalid("convergence.r_th", "must be finite and >= 0"));
            }
        }
        self.layout.validate()?;
        self.params.validate()?;
        self.optimizer.validate()
    }

    fn template(&self, alpha: f64, r_th: f64) -> ScenarioTemplate {
        ScenarioTemplate {
            layout: self.layout.clone(),
            params: self.params.clone(),
            alpha,
            r_th,
        }
    }

    /// The per-sweep experiment configurations for `scheme`.
    pub fn experiments(&self, scheme: Scheme) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        if let Some(s) = &self.rth_sweep {
            out.push(ExperimentConfig {
                scheme,
                sweep: Sweep {
                    axis: SweepAxis::RTh,
                    values: s.values.clone(),
                },
                drops: self.drops,
                base_seed: self.base_seed,
                template: self.template(s.alpha, 0.0),
                optimizer: self.optimizer.clone(),
            });
        }
        if let Some(s) = &self.alpha_sweep {
            out.push(ExperimentConfig {
                scheme,
                sweep: Sweep {
                    axis: SweepAxis::Alpha,
                    values: s.values.clone(),
                },
                drops: self.drops,
                base_seed: self.base_seed,
                template: self.template(0.0, s.r_th),
                optimizer: self.optimizer.clone(),
            });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub alpha: f64,
    pub trace: ConvergenceTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub rth: Vec<ExperimentResult>,
    pub alpha: Vec<ExperimentResult>,
    pub rth_comparison: Option<Comparison>,
    pub alpha_comparison: Option<Comparison>,
    pub convergence: Vec<ConvergenceRun>,
}

impl StudyResult {
    pub fn results(&self) -> impl Iterator<Item = &ExperimentResult> {
        self.rth.iter().chain(&self.alpha)
    }

    /// Whether every drop of every scheme missed some cell's QoS target.
    pub fn infeasible_everywhere(&self) -> bool {
        let mut drops = self.results().flat_map(|r| &r.drops).peekable();
        drops.peek().is_some() && drops.all(|d| !d.feasible())
    }

    pub fn dominance_violations(&self) -> usize {
        self.rth_comparison
            .iter()
            .chain(&self.alpha_comparison)
            .map(|c| c.violations.len())
            .sum()
    }

    pub fn network_evaluations(&self) -> usize {
        let drops: usize = self
            .results()
            .flat_map(|r| &r.drops)
            .map(|d| d.network_evaluations)
            .sum();
        let traces: usize = self
            .convergence
            .iter()
            .map(|c| c.trace.golden_evaluations + c.trace.acceptance_evaluations)
            .sum();
        drops + traces
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let mut rth = Vec::new();
    let mut alpha = Vec::new();
    for &scheme in &config.schemes {
        for experiment in config.experiments(scheme) {
            let result = run_experiment(&experiment)?;
            match experiment.sweep.axis {
                SweepAxis::RTh => rth.push(result),
                SweepAxis::Alpha => alpha.push(result),
            }
        }
    }
    let compare = |results: &[ExperimentResult]| -> Result<Option<Comparison>> {
        if results.is_empty() {
            Ok(None)
        } else {
            compare_schemes(results).map(Some)
        }
    };
    let mut convergence = Vec::new();
    if let Some(c) = &config.convergence {
        let optimizer = OptimizerConfig {
            track_history: true,
            ..config.optimizer.clone()
        };
        for &a in &c.alphas {
            let (_, solved) = run_drop(&config.template(a, c.r_th), c.scheme, a, c.r_th, c.seed, &optimizer)?;
            convergence.push(ConvergenceRun {
                alpha: a,
                trace: solved.trace,
            });
        }
    }
    Ok(StudyResult {
        rth_comparison: compare(&rth)?,
        alpha_comparison: compare(&alpha)?,
        rth,
        alpha,
        convergence,
    })
}

/// `alpha,iteration,ap,p_k,sum_rate`; iteration 0 of each trace is the
/// full-power start with empty `ap` and `p_k`.
pub fn write_convergence_csv<W: Write>(out: W, runs: &[ConvergenceRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "iteration", "ap", "p_k", "sum_rate"])?;
    for run in runs {
        let a = run.alpha.to_string();
        w.write_record([a.as_str(), "0", "", "", &run.trace.initial_sum_rate.to_string()])?;
        for r in &run.trace.records {
            w.write_record([
                a.clone(),
                r.iteration.to_string(),
                r.ap.to_string(),
                r.p_k.to_string(),
                r.sum_rate.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Write the figure CSVs that `result` has data for; returns their file names.
pub fn write_study_csvs(dir: &Path, result: &StudyResult) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let figures = [
        (FIG_SUMRATE_VS_RTH, &result.rth, Metric::SumRate),
        (FIG_JAIN_VS_RTH, &result.rth, Metric::Jain),
        (FIG_SUMRATE_VS_ALPHA, &result.alpha, Metric::SumRate),
        (FIG_JAIN_VS_ALPHA, &result.alpha, Metric::Jain),
    ];
    for (name, results, metric) in figures {
        if !results.is_empty() {
            write_figure_csv(create(dir, name)?, results, metric)?;
            written.push(name.to_string());
        }
    }
    if !result.convergence.is_empty() {
        write_convergence_csv(create(dir, FIG_CONVERGENCE)?, &result.convergence)?;
        written.push(FIG_CONVERGENCE.to_string());
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunStats {
    pub wall_clock_seconds: f64,
    pub network_evaluations: usize,
    pub drops_solved: usize,
    pub dominance_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Fully materialised configuration; rerunning it reproduces the CSVs.
    pub config: StudyConfig,
    /// Command-line overrides applied on top of the config file, as `key=value`.
    pub overrides: Vec<String>,
    /// Every drop seed used, `base_seed .. base_seed + drops`.
    pub seeds: Vec<u64>,
    /// Output files relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub threads: Option<usize>,
    /// Not part of the reproducible output.
    pub stats: RunStats,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        manifest.config.validate()?;
        Ok(manifest)
    }
}

pub struct StudyRun {
    pub result: StudyResult,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

/// Run the study, write its CSVs and the manifest into `dir`.
pub fn run_and_record(config: &StudyConfig, overrides: Vec<String>, threads: Option<usize>, dir: &Path) -> Result<StudyRun> {
    let started = Instant::now();
    let result = run_study(config)?;
    let mut outputs = write_study_csvs(dir, &result)?;
    outputs.push(MANIFEST.to_string());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        overrides,
        seeds: (0..config.drops as u64).map(|i| config.base_seed.wrapping_add(i)).collect(),
        outputs,
        threads,
        stats: RunStats {
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            network_evaluations: result.network_evaluations(),
            drops_solved: result.results().map(|r| r.drops.len()).sum(),
            dominance_violations: result.dominance_violations(),
        },
    };
    let manifest_path = dir.join(MANIFEST);
    let mut out = create(dir, MANIFEST)?;
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(StudyRun {
        result,
        manifest,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StudyConfig {
        StudyConfig {
            drops: 2,
            layout: Layout::grid(2, 2),
            rth_sweep: Some(RthSweep {
                values: vec![1e6, 3e6],
                alpha: 0.7,
            }),
            alpha_sweep: Some(AlphaSweep {
                values: vec![0.5, 0.9],
                r_th: 1e6,
            }),
            convergence: Some(ConvergenceStudy {
                alphas: vec![0.9],
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let config = StudyConfig::default();
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(StudyConfig::from_json(&text).unwrap(), config);
        assert_eq!(StudyConfig::from_json("{}").unwrap(), config);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = StudyConfig::from_json(r#"{"drops": 3, "dropz": 4}"#).unwrap_err();
        assert!(err.to_string().contains("dropz"), "{err}");
        let err = StudyConfig::from_json(r#"{"alpha_sweep": {"valuez": [0.5]}}"#).unwrap_err();
        assert!(err.to_string().contains("valuez"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(StudyConfig::from_json(r#"{"drops": 0}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"schemes": []}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"schemes": ["noma-opt", "noma-opt"]}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"schemes": ["noma-best"]}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"alpha_sweep": {"values": [0.9, 0.5]}}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"convergence": {"alphas": [1.0]}}"#).is_err());
    }

    #[test]
    fn null_disables_a_sweep() {
        let config = StudyConfig::from_json(r#"{"rth_sweep": null, "convergence": null}"#).unwrap();
        assert_eq!(config.experiments(Scheme::NomaFixed).len(), 1);
    }

    #[test]
    fn study_writes_every_figure() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_and_record(&tiny(), vec![], None, dir.path()).unwrap();
        for name in [
            FIG_SUMRATE_VS_RTH,
            FIG_JAIN_VS_RTH,
            FIG_SUMRATE_VS_ALPHA,
            FIG_JAIN_VS_ALPHA,
            FIG_CONVERGENCE,
            MANIFEST,
        ] {
            assert!(dir.path().join(name).is_file(), "{name} missing");
            assert!(run.manifest.outputs.iter().any(|o| o == name));
        }
        let fig2 = fs::read_to_string(dir.path().join(FIG_SUMRATE_VS_RTH)).unwrap();
        // header plus 4 schemes x 2 sweep values
        assert_eq!(fig2.lines().count(), 9);
        assert_eq!(run.manifest.seeds, vec![1, 2]);
        assert_eq!(run.result.dominance_violations(), 0);
        let back = RunManifest::read(&run.manifest_path).unwrap();
        assert_eq!(back, run.manifest);
    }

    #[test]
    fn convergence_csv_layout() {
        let mut trace = ConvergenceTrace {
            initial_sum_rate: 5.0,
            ..Default::default()
        };
        trace.records.push(crate::network::TraceRecord {
            iteration: 1,
            ap: 3,
            p_k: 0.25,
            sum_rate: 6.0,
            feasible_cells: 1,
        });
        let mut buf = Vec::new();
        write_convergence_csv(&mut buf, &[ConvergenceRun { alpha: 0.95, trace }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "alpha,iteration,ap,p_k,sum_rate\n0.95,0,,,5\n0.95,1,3,0.25,6\n");
    }
}
