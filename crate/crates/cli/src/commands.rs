//! The four subcommands; each writes its artifacts and `report.json`.

use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use starweyl_core::direct::{
    nsbf_endpoint_source, read_weyl_csv, synthesize_weyl_data, write_weyl_csv, DirectOptions, WeylSample,
};
use starweyl_core::graph::{ClosedForm, PotentialSpec};
use starweyl_core::inverse::{extract_spectra, required_samples, run_inverse_pipeline, EdgeRecovery, RecoveredPotential};
use starweyl_core::nsbf::NsbfCoeffSet;
use starweyl_core::ode::reference_spectra;

use crate::config::ExperimentConfig;
use crate::report::{
    write_edge, DirectReport, EdgeReport, ExperimentReport, InverseReport, OutputDir, SampleFailureReport,
    SpectraReport, SpectrumRow, Stopwatch,
};
use crate::UsageError;

pub struct Run {
    /// Every inverse run had all edges fail.
    pub all_failed: bool,
}

fn usage(msg: String) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg))
}

/// Rejects `M_k` and sample counts the endpoint system cannot work with.
fn check_counts(config: &ExperimentConfig, m_k: usize, have: usize) -> Result<()> {
    let edges = config.edges.len();
    if m_k + 2 > edges {
        return Err(usage(format!("M_k = {m_k} exceeds M - 2 = {} for a {edges}-edge graph", edges - 2)));
    }
    let n = config.solver.order;
    let need = required_samples(n, m_k);
    if have < need {
        return Err(usage(format!(
            "insufficient spectral points: m = {have}, but N = {n}, M_k = {m_k} needs \
             m >= ceil((N+1)(M_k+3)/(M_k+1)) = {need}"
        )));
    }
    Ok(())
}

fn m_k_range(config: &ExperimentConfig) -> Vec<usize> {
    match config.sweep_mk {
        Some([a, b]) => (a..=b).collect(),
        None => vec![config.solver.m_k],
    }
}

fn is_free(config: &ExperimentConfig) -> bool {
    config.edges.iter().all(|e| match &e.potential {
        Some(PotentialSpec::Closed(ClosedForm::Zero)) => true,
        Some(PotentialSpec::Samples { samples }) => samples.iter().all(|&v| v == 0.0),
        _ => false,
    })
}

/// Weyl matrix entry of the zero-potential star graph.
fn free_entry(lengths: &[f64], i: usize, j: usize, rho: Complex64) -> Complex64 {
    let sum_cot: Complex64 = lengths.iter().map(|&l| (rho * l).cos() / (rho * l).sin()).sum();
    let c = (1.0 / (rho * lengths[i - 1]).sin()) / sum_cot;
    let sj = (rho * lengths[j - 1]).sin();
    if i == j {
        rho * (c - (rho * lengths[i - 1]).cos()) / sj
    } else {
        rho * c / sj
    }
}

fn closed_form_deviation(lengths: &[f64], samples: &[WeylSample]) -> f64 {
    let m = lengths.len();
    let mut worst = 0.0f64;
    for s in samples {
        for i in 1..=m {
            for j in 1..=m {
                if let Some(v) = s.get(i, j) {
                    let want = free_entry(lengths, i, j, s.rho);
                    worst = worst.max((v - want).norm() / want.norm().max(1e-300));
                }
            }
        }
    }
    worst
}

fn synthesize(config: &ExperimentConfig, out: &mut OutputDir, clock: &mut Stopwatch) -> Result<(Vec<WeylSample>, DirectReport)> {
    let sampling = config.sampling().map_err(|e| usage(e.to_string()))?;
    let graph = config.graph().map_err(|e| usage(format!("{e:#}")))?;
    let max_m_k = m_k_range(config).into_iter().max().unwrap_or(0);
    let mask = config.mask_for(max_m_k);
    clock.lap("build_graph");

    let data = synthesize_weyl_data(&graph, &sampling.plan(), mask, &DirectOptions::default())?;
    clock.lap("direct");
    write_weyl_csv(&data.samples, out.file("weyl.csv")?)?;
    clock.lap("write_weyl");

    let full: Vec<f64> = data
        .samples
        .iter()
        .filter(|s| s.retained() == s.size() * s.size())
        .map(|s| s.asymmetry())
        .collect();
    let report = DirectReport {
        requested: sampling.count(),
        samples: data.samples.len(),
        entries_per_sample: data.samples.first().map_or(0, |s| s.retained()),
        max_condition: data.samples.iter().map(|s| s.condition).fold(0.0, f64::max),
        max_residual: data.samples.iter().map(|s| s.residual).fold(0.0, f64::max),
        max_asymmetry: (!full.is_empty()).then(|| full.iter().copied().fold(0.0, f64::max)),
        failures: data
            .failures
            .iter()
            .map(|f| SampleFailureReport {
                k: f.k,
                rho: [f.rho.re, f.rho.im],
                error: f.error.to_string(),
            })
            .collect(),
        self_check_closed_form: is_free(config).then(|| closed_form_deviation(&config.lengths(), &data.samples)),
    };
    for f in &report.failures {
        eprintln!("warning: sample {} at rho = {:?} dropped: {}", f.k, f.rho, f.error);
    }
    Ok((data.samples, report))
}

fn with_truth(config: &ExperimentConfig, r: &EdgeRecovery) -> Result<RecoveredPotential> {
    Ok(match config.truth(r.edge)? {
        Some(t) => r.potential.clone().with_truth(|x| t.eval(x)),
        None => r.potential.clone(),
    })
}

fn invert(
    config: &ExperimentConfig,
    samples: &[WeylSample],
    m_k: usize,
    prefix: &str,
    out: &mut OutputDir,
) -> Result<InverseReport> {
    let mut solver = config.solver;
    solver.m_k = m_k;
    let outcomes = run_inverse_pipeline(samples, &config.lengths(), &solver.inverse());
    let mut edges = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        match o {
            Ok(r) => {
                let p = with_truth(config, r)?;
                write_edge(out, prefix, r, &p)?;
                edges.push(EdgeReport::new(o, Some(&p)));
            }
            Err(f) => {
                eprintln!("edge {} failed at {:?}: {}", f.edge, f.stage, f.error);
                edges.push(EdgeReport::new(o, None));
            }
        }
    }
    Ok(InverseReport {
        m_k,
        samples: samples.len(),
        edges,
    })
}

/// Runs the inverse problem once, or once per `M_k` of a sweep.
fn invert_all(
    config: &ExperimentConfig,
    samples: &[WeylSample],
    out: &mut OutputDir,
    clock: &mut Stopwatch,
) -> Result<(Option<InverseReport>, Vec<InverseReport>)> {
    let range = m_k_range(config);
    for &m_k in &range {
        check_counts(config, m_k, samples.len())?;
    }
    if config.sweep_mk.is_none() {
        let r = invert(config, samples, range[0], "", out)?;
        clock.lap("inverse");
        print_table(std::slice::from_ref(&r));
        return Ok((Some(r), Vec::new()));
    }
    let mut sweep = Vec::new();
    for m_k in range {
        sweep.push(invert(config, samples, m_k, &format!("mk{m_k}/"), out)?);
        clock.lap(format!("inverse_mk{m_k}"));
    }
    out.csv("sweep.csv", sweep_rows(&sweep))?;
    print_table(&sweep);
    Ok((None, sweep))
}

#[derive(serde::Serialize)]
struct SweepRow {
    #[serde(rename = "M_k")]
    m_k: usize,
    edge: usize,
    status: &'static str,
    sup_abs: Option<f64>,
    sup_rel: Option<f64>,
    l2: Option<f64>,
    argmax: Option<f64>,
}

fn sweep_rows(sweep: &[InverseReport]) -> Vec<SweepRow> {
    sweep
        .iter()
        .flat_map(|r| {
            r.edges.iter().map(move |e| SweepRow {
                m_k: r.m_k,
                edge: e.edge,
                status: e.status,
                sup_abs: e.metrics.map(|m| m.sup_abs),
                sup_rel: e.metrics.map(|m| m.sup_rel),
                l2: e.metrics.map(|m| m.l2),
                argmax: e.metrics.map(|m| m.argmax),
            })
        })
        .collect()
}

fn print_table(runs: &[InverseReport]) {
    println!("{:>4} {:>5} {:>8} {:>12} {:>10} {:>8}", "M_k", "edge", "status", "sup_abs", "sup_rel", "argmax");
    for r in runs {
        for e in &r.edges {
            match e.metrics {
                Some(m) => println!(
                    "{:>4} {:>5} {:>8} {:>12.4e} {:>10.4} {:>8.4}",
                    r.m_k, e.edge, e.status, m.sup_abs, m.sup_rel, m.argmax
                ),
                None => println!("{:>4} {:>5} {:>8} {:>12} {:>10} {:>8}", r.m_k, e.edge, e.status, "-", "-", "-"),
            }
        }
    }
}

fn finish(mut report: ExperimentReport, mut out: OutputDir, mut clock: Stopwatch) -> Result<Run> {
    let runs: Vec<&InverseReport> = report.inverse.iter().chain(&report.sweep).collect();
    let failed = !runs.is_empty() && runs.iter().all(|r| r.succeeded() == 0);
    clock.lap("finish");
    report.files = out.files.clone();
    report.files.push("report.json".into());
    report.timings = std::mem::take(&mut clock.stages);
    out.json("report.json", &report)?;
    eprintln!("{}: {:.2} s, artifacts in {}", report.command, clock.total(), out.root().display());
    Ok(Run { all_failed: failed })
}

pub fn direct(config: &ExperimentConfig, out_dir: &Path) -> Result<Run> {
    let mut clock = Stopwatch::start();
    let mut out = OutputDir::create(out_dir)?;
    let (samples, report) = synthesize(config, &mut out, &mut clock)?;
    eprintln!("direct: {} samples, {} entries each", samples.len(), report.entries_per_sample);
    let report = ExperimentReport {
        direct: Some(report),
        ..ExperimentReport::new("direct", config)
    };
    finish(report, out, clock)
}

pub fn inverse(config: &ExperimentConfig, weyl: &Path, out_dir: &Path) -> Result<Run> {
    let mut clock = Stopwatch::start();
    let file = File::open(weyl).with_context(|| format!("opening {}", weyl.display()))?;
    let samples = read_weyl_csv(file).map_err(|e| usage(format!("{}: {e}", weyl.display())))?;
    if let Some(s) = samples.iter().find(|s| s.size() != config.edges.len()) {
        return Err(usage(format!(
            "{} holds {}x{} matrices but the config lists {} edges",
            weyl.display(),
            s.size(),
            s.size(),
            config.edges.len()
        )));
    }
    clock.lap("read_weyl");
    let mut out = OutputDir::create(out_dir)?;
    let (inverse, sweep) = invert_all(config, &samples, &mut out, &mut clock)?;
    let report = ExperimentReport {
        inverse,
        sweep,
        ..ExperimentReport::new("inverse", config)
    };
    finish(report, out, clock)
}

pub fn roundtrip(config: &ExperimentConfig, out_dir: &Path) -> Result<Run> {
    let mut clock = Stopwatch::start();
    let mut out = OutputDir::create(out_dir)?;
    // fail on bad counts before spending time on the direct problem
    let requested = config.sampling().map_err(|e| usage(e.to_string()))?.count();
    for m_k in m_k_range(config) {
        check_counts(config, m_k, requested)?;
    }
    let (samples, direct) = synthesize(config, &mut out, &mut clock)?;
    let (inverse, sweep) = invert_all(config, &samples, &mut out, &mut clock)?;
    let report = ExperimentReport {
        direct: Some(direct),
        inverse,
        sweep,
        ..ExperimentReport::new("roundtrip", config)
    };
    finish(report, out, clock)
}

/// Eigenvalue table: ODE oracle against zeros of the truncated series.
pub fn spectra(config: &ExperimentConfig, edge: usize, indices: &[usize], rho_max: Option<f64>, out_dir: &Path) -> Result<Run> {
    let mut clock = Stopwatch::start();
    if edge == 0 || edge > config.edges.len() {
        return Err(usage(format!("edge {edge} out of range 1..={}", config.edges.len())));
    }
    let top = *indices.iter().max().ok_or_else(|| usage("no eigenvalue indices given".into()))?;
    if indices.contains(&0) {
        return Err(usage("eigenvalue indices are 1-based".into()));
    }
    let graph = config.graph().map_err(|e| usage(format!("{e:#}")))?;
    let e = graph.edge(edge);
    let len = e.length();
    let rho_max = rho_max.unwrap_or((top as f64 + 4.0) * std::f64::consts::PI / len);
    clock.lap("build_graph");

    let starweyl_core::direct::EndpointSource::Nsbf(sets) = nsbf_endpoint_source(&graph, config.solver.order)? else {
        bail!("endpoint fit returned no coefficient sets");
    };
    let set: &NsbfCoeffSet = &sets[edge - 1];
    let approx = extract_spectra(set, rho_max, config.solver.order)?;
    clock.lap("nsbf_spectra");
    let (mu, nu) = reference_spectra(e, rho_max)?;
    clock.lap("oracle_spectra");

    let mut rows = Vec::new();
    for (kind, oracle, nsbf) in [("dirichlet", &mu, &approx.mu), ("neumann", &nu, &approx.nu)] {
        for &n in indices {
            let (Some(a), Some(b)) = (oracle.get(n - 1), nsbf.get(n - 1)) else {
                return Err(anyhow!(
                    "index {n} beyond the computed range ({} oracle, {} series {kind} roots below rho = {rho_max})",
                    oracle.len(),
                    nsbf.len()
                ));
            };
            let (la, lb) = (a * a, b * b);
            rows.push(SpectrumRow {
                kind,
                n,
                lambda_oracle: la,
                lambda_nsbf: lb,
                abs_err: (la - lb).abs(),
            });
        }
    }
    println!("{:>10} {:>5} {:>20} {:>20} {:>10}", "kind", "n", "lambda (oracle)", "lambda (series)", "abs err");
    for r in &rows {
        println!(
            "{:>10} {:>5} {:>20.9} {:>20.9} {:>10.2e}",
            r.kind, r.n, r.lambda_oracle, r.lambda_nsbf, r.abs_err
        );
    }
    let mut out = OutputDir::create(out_dir)?;
    out.csv(&format!("spectra_table_{edge}.csv"), rows.iter())?;
    let report = ExperimentReport {
        spectra: Some(SpectraReport { edge, rows }),
        ..ExperimentReport::new("spectra", config)
    };
    finish(report, out, clock)
}
