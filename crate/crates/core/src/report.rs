//! Seeded protocol runs and their serialized reports.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::protocol::{run_protocol, AngleIndex, AuditReport, BellClass, ProtocolRun, Transcript};
use crate::qnd::{ensemble_same_probability, same_after_flips};
use crate::states::{bell_vector, PolarizationBell};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub run_id: String,
    pub pairs: usize,
    pub fidelities: [f64; 4],
    pub theta: f64,
    pub alpha: f64,
    pub dephase_p: f64,
    pub homodyne_error: f64,
    pub evil_bob_flip_p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub phi_class: usize,
    pub psi_class: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFrequencies {
    pub phi_class: f64,
    pub psi_class: f64,
}

/// Classes read off the actual pair states, which Alice never sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub phi_class: usize,
    pub psi_class: usize,
    /// Pairs whose inferred class differs from their true class.
    pub misclassified: usize,
    pub discarded: usize,
}

/// Mean fidelities; `None` when the class is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub inferred_phi_to_phi_plus: Option<f64>,
    pub inferred_phi_to_phi_minus: Option<f64>,
    pub inferred_psi_to_psi_plus: Option<f64>,
    pub inferred_psi_to_psi_minus: Option<f64>,
    pub true_phi_to_phi_plus: Option<f64>,
    pub true_phi_to_phi_minus: Option<f64>,
    pub true_psi_to_psi_plus: Option<f64>,
    pub true_psi_to_psi_minus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleFrequency {
    pub angle: String,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub counts: ClassCounts,
    pub frequencies: ClassFrequencies,
    /// Exact probability of equal QND readouts over the source ensemble.
    pub analytic_p_phi_class: f64,
    /// Same, after readout errors and dishonest reports.
    pub analytic_p_phi_reported: f64,
    pub ground_truth: GroundTruth,
    pub fidelity: FidelitySummary,
    /// Frequencies of Alice's secret angles `θ_j`.
    pub angle_frequencies: Vec<AngleFrequency>,
    pub bob1_zero_frequency: f64,
    pub audit: AuditReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub transcript: Transcript,
    pub run: ProtocolRun,
}

fn true_class(state: &StateVector) -> BellClass {
    let a = state.amplitudes();
    let phi_mass = a[0].norm_sqr() + a[3].norm_sqr();
    if phi_mass >= 0.5 {
        BellClass::PhiClass
    } else {
        BellClass::PsiClass
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.sum / self.n as f64).clamp(0.0, 1.0))
    }
}

/// Runs the full protocol for `cfg` and summarizes it.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|e| Error::Protocol(e.to_string()))?;
    let protocol = cfg.protocol();
    let run = run_protocol(&protocol, cfg.seed)?;
    let m = run.components.len();

    let bells: Vec<StateVector> = PolarizationBell::ALL.iter().map(|&k| bell_vector(k)).collect();
    let [phi_p, phi_m, psi_p, psi_m] = [&bells[0], &bells[1], &bells[2], &bells[3]];
    let mut means: [Mean; 8] = Default::default();
    let mut truth = GroundTruth {
        phi_class: 0,
        psi_class: 0,
        misclassified: 0,
        discarded: 0,
    };
    for (pair, &inferred) in run.distillation.pairs.iter().zip(&run.distillation.classes) {
        let state = &pair.pol_state;
        if !state.is_normalized() {
            truth.discarded += 1;
            continue;
        }
        let actual = true_class(state);
        if actual != inferred {
            truth.misclassified += 1;
        }
        let (a, b) = match actual {
            BellClass::PhiClass => {
                truth.phi_class += 1;
                (phi_p, phi_m)
            }
            BellClass::PsiClass => {
                truth.psi_class += 1;
                (psi_p, psi_m)
            }
        };
        let fa = state.overlap(a)?;
        let fb = state.overlap(b)?;
        let offset = if actual == BellClass::PhiClass { 4 } else { 6 };
        means[offset].add(fa);
        means[offset + 1].add(fb);
        // inferred-class means are taken against the Bell states Alice
        // believes she holds
        let (ia, ib) = match inferred {
            BellClass::PhiClass => (phi_p, phi_m),
            BellClass::PsiClass => (psi_p, psi_m),
        };
        let offset = if inferred == BellClass::PhiClass { 0 } else { 2 };
        means[offset].add(state.overlap(ia)?);
        means[offset + 1].add(state.overlap(ib)?);
    }

    let phi = run
        .distillation
        .classes
        .iter()
        .filter(|c| **c == BellClass::PhiClass)
        .count();
    let mut angle_counts = [0usize; AngleIndex::COUNT];
    for r in &run.rounds {
        angle_counts[usize::from(r.theta.k())] += 1;
    }
    let zeros = run.measurements.iter().filter(|x| x.bit == 0).count();

    let p_phi = ensemble_same_probability(&cfg.fidelities, cfg.dephase_p)?;
    let e = cfg.homodyne_error;
    let bob1_flip = e + cfg.evil_bob_flip_p - 2.0 * e * cfg.evil_bob_flip_p;
    let p_reported = same_after_flips(p_phi, bob1_flip, e);

    let report = RunReport {
        config: ConfigEcho {
            run_id: run.transcript.run_id().to_string(),
            pairs: cfg.pairs,
            fidelities: cfg.fidelities.weights(),
            theta: cfg.theta,
            alpha: cfg.alpha,
            dephase_p: cfg.dephase_p,
            homodyne_error: cfg.homodyne_error,
            evil_bob_flip_p: cfg.evil_bob_flip_p,
            seed: cfg.seed,
        },
        counts: ClassCounts {
            phi_class: phi,
            psi_class: m - phi,
        },
        frequencies: ClassFrequencies {
            phi_class: phi as f64 / m as f64,
            psi_class: (m - phi) as f64 / m as f64,
        },
        analytic_p_phi_class: p_phi,
        analytic_p_phi_reported: p_reported,
        ground_truth: truth,
        fidelity: FidelitySummary {
            inferred_phi_to_phi_plus: means[0].get(),
            inferred_phi_to_phi_minus: means[1].get(),
            inferred_psi_to_psi_plus: means[2].get(),
            inferred_psi_to_psi_minus: means[3].get(),
            true_phi_to_phi_plus: means[4].get(),
            true_phi_to_phi_minus: means[5].get(),
            true_psi_to_psi_plus: means[6].get(),
            true_psi_to_psi_minus: means[7].get(),
        },
        angle_frequencies: AngleIndex::all()
            .zip(angle_counts)
            .map(|(a, count)| AngleFrequency {
                angle: a.to_string(),
                count,
                frequency: count as f64 / m as f64,
            })
            .collect(),
        bob1_zero_frequency: zeros as f64 / m as f64,
        audit: run.audit.clone(),
        wall_clock_seconds: None,
    };
    Ok(RunOutput {
        report,
        transcript: run.transcript.clone(),
        run,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Column order of the CSV report.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = [
        "run_id",
        "pairs",
        "f",
        "f1",
        "f2",
        "f3",
        "theta",
        "alpha",
        "dephase_p",
        "homodyne_error",
        "evil_bob_flip_p",
        "seed",
        "phi_class_count",
        "psi_class_count",
        "phi_class_frequency",
        "psi_class_frequency",
        "analytic_p_phi_class",
        "analytic_p_phi_reported",
        "true_phi_class",
        "true_psi_class",
        "misclassified",
        "discarded",
        "inferred_phi_to_phi_plus",
        "inferred_phi_to_phi_minus",
        "inferred_psi_to_psi_plus",
        "inferred_psi_to_psi_minus",
        "true_phi_to_phi_plus",
        "true_phi_to_phi_minus",
        "true_psi_to_psi_plus",
        "true_psi_to_psi_minus",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..AngleIndex::COUNT).map(|k| format!("angle_{k}pi4_count")));
    cols.extend(
        [
            "bob1_zero_frequency",
            "audit_passed",
            "audit_violations",
            "wall_clock_seconds",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols
}

fn csv_row(r: &RunReport) -> Vec<String> {
    let c = &r.config;
    let fd = &r.fidelity;
    let mut row = vec![
        c.run_id.clone(),
        c.pairs.to_string(),
        c.fidelities[0].to_string(),
        c.fidelities[1].to_string(),
        c.fidelities[2].to_string(),
        c.fidelities[3].to_string(),
        c.theta.to_string(),
        c.alpha.to_string(),
        c.dephase_p.to_string(),
        c.homodyne_error.to_string(),
        c.evil_bob_flip_p.to_string(),
        c.seed.to_string(),
        r.counts.phi_class.to_string(),
        r.counts.psi_class.to_string(),
        r.frequencies.phi_class.to_string(),
        r.frequencies.psi_class.to_string(),
        r.analytic_p_phi_class.to_string(),
        r.analytic_p_phi_reported.to_string(),
        r.ground_truth.phi_class.to_string(),
        r.ground_truth.psi_class.to_string(),
        r.ground_truth.misclassified.to_string(),
        r.ground_truth.discarded.to_string(),
        opt(fd.inferred_phi_to_phi_plus),
        opt(fd.inferred_phi_to_phi_minus),
        opt(fd.inferred_psi_to_psi_plus),
        opt(fd.inferred_psi_to_psi_minus),
        opt(fd.true_phi_to_phi_plus),
        opt(fd.true_phi_to_phi_minus),
        opt(fd.true_psi_to_psi_plus),
        opt(fd.true_psi_to_psi_minus),
    ];
    row.extend(r.angle_frequencies.iter().map(|a| a.count.to_string()));
    row.push(r.bob1_zero_frequency.to_string());
    row.push(r.audit.passed.to_string());
    row.push(r.audit.violations.len().to_string());
    row.push(opt(r.wall_clock_seconds));
    row
}

/// Serializes a report. JSON keys follow the struct field order.
pub fn render_report(report: &RunReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => write_csv(csv_header(), [csv_row(report)]),
    }
}

fn write_csv<H, R>(header: H, rows: impl IntoIterator<Item = R>) -> Result<String>
where
    H: IntoIterator,
    H::Item: AsRef<[u8]>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let internal = |e: csv::Error| Error::Internal(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(row).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// Reads a single-row CSV report into `(column, value)` pairs.
pub fn parse_csv_report(text: &str) -> Result<Vec<(String, String)>> {
    let bad = |reason: String| Error::Internal(format!("csv report: {reason}"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let row = r
        .records()
        .next()
        .ok_or_else(|| bad("missing data row".into()))?
        .map_err(|e| bad(e.to_string()))?;
    Ok(header
        .iter()
        .zip(row.iter())
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Renders the report and writes it to `destination`, or returns it for
/// stdout when `destination` is `None`.
pub fn emit_report(report: &RunReport, format: OutputFormat, destination: Option<&Path>) -> Result<String> {
    let text = render_report(report, format)?;
    if let Some(path) = destination {
        write_text(path, &text)?;
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub phi_class_frequency: f64,
    pub z_score: f64,
    pub audit_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ConfigEcho,
    pub seeds: usize,
    pub analytic_p_phi_reported: f64,
    pub sigma: f64,
    pub mean_phi_class_frequency: f64,
    pub max_abs_z: f64,
    pub all_within_4_sigma: bool,
    pub all_audits_passed: bool,
    pub per_seed: Vec<SeedSummary>,
}

/// Runs seeds `cfg.seed .. cfg.seed + n` in parallel.
pub fn run_sweep(cfg: &RunConfig, n: usize) -> Result<SweepReport> {
    if n == 0 {
        return Err(Error::EmptyRun);
    }
    let seeds: Vec<u64> = (0..n as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let reports = seeds
        .par_iter()
        .map(|&seed| {
            let c = RunConfig { seed, ..cfg.clone() };
            execute_run(&c).map(|o| o.report)
        })
        .collect::<Result<Vec<_>>>()?;
    let first = reports.first().ok_or(Error::EmptyRun)?;
    let p = first.analytic_p_phi_reported;
    let sigma = (p * (1.0 - p) / cfg.pairs as f64).sqrt();
    let per_seed: Vec<SeedSummary> = reports
        .iter()
        .map(|r| {
            let diff = r.frequencies.phi_class - p;
            SeedSummary {
                seed: r.config.seed,
                phi_class_frequency: r.frequencies.phi_class,
                z_score: if sigma > 0.0 {
                    diff / sigma
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                },
                audit_passed: r.audit.passed,
            }
        })
        .collect();
    let max_abs_z = per_seed.iter().map(|s| s.z_score.abs()).fold(0.0, f64::max);
    let mut config = first.config.clone();
    config.seed = cfg.seed;
    config.run_id = format!("sweep-{}x{}", cfg.seed, n);
    Ok(SweepReport {
        config,
        seeds: n,
        analytic_p_phi_reported: p,
        sigma,
        mean_phi_class_frequency: per_seed.iter().map(|s| s.phi_class_frequency).sum::<f64>() / n as f64,
        max_abs_z,
        all_within_4_sigma: max_abs_z <= 4.0,
        all_audits_passed: per_seed.iter().all(|s| s.audit_passed),
        per_seed,
    })
}

/// Serializes a sweep. CSV has one row per seed.
pub fn render_sweep(sweep: &SweepReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(sweep).map_err(|e| Error::Internal(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => write_csv(
            [
                "seed",
                "phi_class_frequency",
                "analytic_p_phi_reported",
                "z_score",
                "audit_passed",
            ],
            sweep.per_seed.iter().map(|r| {
                [
                    r.seed.to_string(),
                    r.phi_class_frequency.to_string(),
                    sweep.analytic_p_phi_reported.to_string(),
                    r.z_score.to_string(),
                    r.audit_passed.to_string(),
                ]
            }),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::FidelityVector;

    fn cfg(pairs: usize, fv: FidelityVector, seed: u64) -> RunConfig {
        RunConfig {
            pairs,
            fidelities: fv,
            seed,
            ..RunConfig::default()
        }
    }

    #[test]
    fn noiseless_end_to_end() {
        let out = execute_run(&cfg(100, FidelityVector::noiseless(), 3)).unwrap();
        let r = &out.report;
        assert_eq!(r.counts.phi_class, 100);
        assert!((r.fidelity.inferred_phi_to_phi_plus.unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(r.fidelity.inferred_psi_to_psi_plus, None);
        assert!(r.audit.passed);
        assert!((r.analytic_p_phi_class - 1.0).abs() <= 1e-12);
        assert_eq!(r.angle_frequencies.iter().map(|a| a.count).sum::<usize>(), 100);
    }

    #[test]
    fn evil_bob_flips_every_class() {
        let mut c = cfg(100, FidelityVector::noiseless(), 5);
        c.evil_bob_flip_p = 1.0;
        let r = execute_run(&c).unwrap().report;
        assert_eq!(r.counts.psi_class, 100);
        assert_eq!(r.ground_truth.phi_class, 100);
        assert_eq!(r.ground_truth.misclassified, 100);
        assert!((r.fidelity.true_phi_to_phi_plus.unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(r.analytic_p_phi_reported, 0.0);
        assert!(r.audit.passed);
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let c = cfg(300, FidelityVector::new(0.6, 0.2, 0.1, 0.1).unwrap(), 12);
        let a = execute_run(&c).unwrap().report;
        let b = execute_run(&c).unwrap().report;
        let ja = render_report(&a, OutputFormat::Json).unwrap();
        assert_eq!(ja, render_report(&b, OutputFormat::Json).unwrap());
        let back: RunReport = serde_json::from_str(&ja).unwrap();
        assert_eq!(back, a);
        assert!(!ja.contains("wall_clock_seconds"));
    }

    #[test]
    fn csv_has_fixed_columns_and_round_trips_numbers() {
        let c = cfg(250, FidelityVector::new(0.55, 0.15, 0.2, 0.1).unwrap(), 4);
        let r = execute_run(&c).unwrap().report;
        let text = render_report(&r, OutputFormat::Csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        let fields = parse_csv_report(&text).unwrap();
        let names: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(names, csv_header());
        let get = |k: &str| fields.iter().find(|(n, _)| n == k).unwrap().1.clone();
        assert_eq!(
            get("phi_class_frequency").parse::<f64>().unwrap(),
            r.frequencies.phi_class
        );
        assert_eq!(
            get("analytic_p_phi_class").parse::<f64>().unwrap(),
            r.analytic_p_phi_class
        );
        assert_eq!(get("f2").parse::<f64>().unwrap(), 0.2);
        assert_eq!(
            get("true_phi_to_phi_plus").parse::<f64>().unwrap(),
            r.fidelity.true_phi_to_phi_plus.unwrap()
        );
    }

    #[test]
    fn emit_to_unwritable_path_names_it() {
        let r = execute_run(&cfg(5, FidelityVector::noiseless(), 0)).unwrap().report;
        let e = emit_report(
            &r,
            OutputFormat::Json,
            Some(Path::new("/nonexistent-dir/x/report.json")),
        )
        .unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/x/report.json"));
    }

    #[test]
    fn sweep_is_order_independent() {
        let c = cfg(200, FidelityVector::new(0.7, 0.1, 0.15, 0.05).unwrap(), 100);
        let s = run_sweep(&c, 6).unwrap();
        assert_eq!(
            s.per_seed.iter().map(|x| x.seed).collect::<Vec<_>>(),
            (100..106).collect::<Vec<_>>()
        );
        assert_eq!(s, run_sweep(&c, 6).unwrap());
        assert!(s.all_audits_passed);
    }
}
