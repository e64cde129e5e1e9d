//! Scenario runs, sweeps and the verbs built on them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clutter_core::basis::{expand_steering, expand_waveform, BasisConfig, ForwardModel};
use clutter_core::container::load_matrix;
use clutter_core::inference::{
    initialize_from_messages, msg_data_to_gamma_at, run_from_state, GaussianBelief, InferenceOptions, RunResult,
};
use clutter_core::metrics::{
    coefficient_error, coverage_3sigma, field_error, median, scaling_probe, ErrorReport, ProbeBase,
};
use clutter_core::rng::{add_complex_noise, rng_from_seed, seed_for, SeedPurpose};
use clutter_core::scene::{
    draw_ar_chain, project_scatterers, render_map, scenario_a_params, ARParams, ClutterCoefficients, MapGrid,
    MeasurementFrame,
};
use clutter_core::Cx;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ScenarioKind};
use crate::output::{cx_pairs, num, OutputDir};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "CLUTTER_WORKERS";

pub const SWEEP_HEADER: [&str; 8] = [
    "n_coeffs",
    "snr_db",
    "seed",
    "coeff_mse",
    "field_mse",
    "coverage",
    "alpha_hat",
    "runtime_s",
];

pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(worker_count()?).build()?)
}

/// Basis, forward model, process parameters and reference map for one
/// basis size.
pub struct Problem {
    pub basis: BasisConfig<f64>,
    pub fm: ForwardModel<f64>,
    pub params: ARParams<f64>,
    pub grid: MapGrid<f64>,
    pub true_map: Array2<Cx<f64>>,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig, n_angle: usize, n_range: usize) -> Result<Self> {
        let basis = cfg.basis_config_sized(n_angle, n_range)?;
        let radar = cfg.radar_config();
        let se = expand_steering(&radar.array, &basis)?;
        let we = expand_waveform(&radar.waveform, &basis)?;
        let fm = ForwardModel::assemble(se, we, 1.0, cfg.inference.pinv_tol)?;
        for w in fm.warnings() {
            eprintln!("warning: {w}");
        }
        let n = basis.n_coeffs();
        let (params, grid, true_map) = match cfg.scenario.kind {
            ScenarioKind::A => {
                let a = cfg.scenario_a().ok_or_else(|| anyhow!("scenario.a block missing"))?;
                let params = scenario_a_params(
                    &basis,
                    a.alpha,
                    a.precision_min,
                    a.precision_max,
                    seed_for(cfg.seeds.root, 0, SeedPurpose::Truth),
                )?;
                let g = 32.max(2 * n_angle.max(n_range));
                let grid = MapGrid::cell_centres(&basis, g, g);
                let mean = ClutterCoefficients {
                    gamma: params.mean.clone(),
                    frame_index: 0,
                };
                let map = render_map(&mean, &basis, &grid)?;
                (params, grid, map)
            }
            ScenarioKind::B => {
                let b = cfg.scenario_b().ok_or_else(|| anyhow!("scenario.b block missing"))?;
                let posts = cfg.scatterers(&basis)?;
                let mean = project_scatterers(&posts, &basis)?.gamma;
                let params = ARParams::new(b.alpha, mean, Array1::from_elem(n, b.precision))?;
                let g = b.truth_grid;
                let fine = cfg.basis_config_sized(g, g)?;
                let grid = MapGrid::cell_centres(&fine, g, g);
                let map = render_map(&project_scatterers(&posts, &fine)?, &fine, &grid)?;
                (params, grid, map)
            }
        };
        Ok(Self {
            basis,
            fm,
            params,
            grid,
            true_map,
        })
    }

    fn truth(&self) -> ClutterCoefficients<f64> {
        ClutterCoefficients {
            gamma: self.params.mean.clone(),
            frame_index: 0,
        }
    }
}

pub fn inference_options(cfg: &ExperimentConfig) -> InferenceOptions<f64> {
    InferenceOptions {
        n_iters: cfg.inference.iterations,
        update_alpha: cfg.inference.update_alpha,
        predecessor: cfg.inference.predecessor,
        ..InferenceOptions::default()
    }
}

/// One inference run of a replicate at one SNR.
pub struct RunOutcome {
    pub snr_db: f64,
    pub noise_precision: f64,
    pub report: ErrorReport,
    /// Median over components of `E[lambda_j] / lambda_j`.
    pub lambda_ratio: f64,
    pub runtime_s: f64,
    pub result: Option<RunResult<f64>>,
}

pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    pub chain: Vec<ClutterCoefficients<f64>>,
    pub runs: Vec<RunOutcome>,
}

/// Draws the replicate's chain and runs inference at each SNR. All SNRs
/// share one noise realisation, scaled to the level.
pub fn run_replicate(
    cfg: &ExperimentConfig,
    pb: &Problem,
    rep: usize,
    snrs: &[f64],
    keep_state: bool,
) -> Result<Replicate> {
    let root = cfg.seeds.root;
    let seed = seed_for(root, rep as u64, SeedPurpose::Chain);
    let chain = draw_ar_chain(&pb.params, cfg.inference.n + 1, seed)?;
    // M^+ y is linear in y: split each frame into clean signal and unit
    // noise once, then rescale the noise part per SNR.
    let mut rng = rng_from_seed(seed_for(root, rep as u64, SeedPurpose::Noise));
    let mut power = 0.0;
    let mut clean_means = Vec::with_capacity(chain.len());
    let mut noise_means = Vec::with_capacity(chain.len());
    for g in &chain {
        let y = pb.fm.apply(g.gamma.view())?;
        power += y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
        clean_means.push(pb.fm.pinv_apply(y.view())?);
        let mut w = Array1::<Cx<f64>>::zeros(y.len());
        add_complex_noise(&mut rng, w.as_slice_mut().expect("contiguous"), 1.0);
        noise_means.push(pb.fm.pinv_apply(w.view())?);
    }
    power /= chain.len() as f64;
    let opts = inference_options(cfg);
    let truth = pb.truth();
    let mut runs = Vec::with_capacity(snrs.len());
    for &snr in snrs {
        let t0 = Instant::now();
        let lw = match cfg.noise.noise_precision {
            Some(p) => p,
            None => {
                if !(power > 0.0) {
                    bail!("replicate {rep}: clutter signal has zero power, cannot set SNR");
                }
                10f64.powf(snr / 10.0) / power
            }
        };
        let precision = pb.fm.data_precision(lw)?;
        let s = lw.sqrt().recip();
        let msgs = clean_means
            .iter()
            .zip(&noise_means)
            .map(|(c, w)| GaussianBelief::new(c + &(w * Cx::new(s, 0.0)), precision.clone()))
            .collect::<clutter_core::Result<Vec<_>>>()?;
        let state = initialize_from_messages(msgs, &opts)?;
        let result = run_from_state(state, &opts).with_context(|| format!("replicate {rep}, SNR {snr} dB"))?;
        let runtime_s = t0.elapsed().as_secs_f64();
        let st = &result.state;
        let report = ErrorReport {
            coeff_mse: coefficient_error(&st.mu_belief, &truth)?,
            field_mse: field_error(&st.mu_belief, pb.true_map.view(), &pb.basis, &pb.grid)?,
            coverage_3sigma: coverage_3sigma(&st.mu_belief, pb.params.mean.view())?,
            alpha_hat: st.alpha,
        };
        let ratios: Vec<f64> = st
            .lambda_mean()
            .iter()
            .zip(pb.params.precision_diag.iter())
            .map(|(e, t)| e / t)
            .collect();
        runs.push(RunOutcome {
            snr_db: snr,
            noise_precision: lw,
            report,
            lambda_ratio: median(&ratios),
            runtime_s,
            result: keep_state.then_some(result),
        });
    }
    Ok(Replicate {
        index: rep,
        seed,
        chain,
        runs,
    })
}

/// Runs replicates `0..count` on the worker pool, in replicate order.
pub fn run_replicates(
    cfg: &ExperimentConfig,
    pb: &Problem,
    count: usize,
    snrs: &[f64],
    keep_state: bool,
) -> Result<Vec<Replicate>> {
    pool()?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, pb, rep, snrs, keep_state))
            .collect()
    })
}

fn snr_list(cfg: &ExperimentConfig) -> Vec<f64> {
    match cfg.scenario.kind {
        ScenarioKind::A => cfg
            .scenario_a()
            .and_then(|a| a.snr_list.clone())
            .unwrap_or_else(|| vec![cfg.noise.snr_db]),
        ScenarioKind::B => cfg.scenario_b().map(|b| b.snr_list.clone()).unwrap_or_default(),
    }
}

fn coeff_sizes(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    match cfg.scenario_b() {
        Some(b) if cfg.scenario.kind == ScenarioKind::B => b.coeff_counts.iter().map(|&k| (k, k)).collect(),
        _ => vec![(cfg.basis.n_angle, cfg.basis.n_range)],
    }
}

fn diagnostics_rows(rep: usize, r: &RunResult<f64>) -> Vec<Vec<String>> {
    r.diagnostics
        .iter()
        .map(|d| {
            vec![
                rep.to_string(),
                d.iteration.to_string(),
                num(d.delta_mu),
                num(d.delta_lambda),
                num(d.alpha),
                d.xi_floor_hits.to_string(),
            ]
        })
        .collect()
}

const DIAG_HEADER: [&str; 6] = [
    "replicate",
    "iteration",
    "delta_mu",
    "delta_lambda",
    "alpha",
    "xi_floor_hits",
];

fn coeff_matrix(rows: &[&Array1<Cx<f64>>]) -> Array2<Cx<f64>> {
    let cols = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

#[derive(Serialize)]
struct ReplicateReport {
    replicate: usize,
    seed: u64,
    snr_db: f64,
    noise_precision: f64,
    lambda_ratio_median: f64,
    #[serde(flatten)]
    report: ErrorReport,
}

#[derive(Serialize)]
struct Summary {
    replicates: usize,
    mean_coverage_3sigma: f64,
    median_alpha_hat: f64,
    median_lambda_ratio: f64,
    mean_coeff_mse: f64,
    mean_field_mse: f64,
}

fn summarise(runs: &[&RunOutcome]) -> Summary {
    let n = runs.len() as f64;
    let alphas: Vec<f64> = runs.iter().map(|r| r.report.alpha_hat).collect();
    let ratios: Vec<f64> = runs.iter().map(|r| r.lambda_ratio).collect();
    Summary {
        replicates: runs.len(),
        mean_coverage_3sigma: runs.iter().map(|r| r.report.coverage_3sigma).sum::<f64>() / n,
        median_alpha_hat: median(&alphas),
        median_lambda_ratio: median(&ratios),
        mean_coeff_mse: runs.iter().map(|r| r.report.coeff_mse).sum::<f64>() / n,
        mean_field_mse: runs.iter().map(|r| r.report.field_mse).sum::<f64>() / n,
    }
}

fn require(cfg: &ExperimentConfig, kind: ScenarioKind, verb: &str) -> Result<()> {
    if cfg.scenario.kind != kind {
        bail!("`{verb}` needs scenario.kind = {kind:?}");
    }
    Ok(())
}

/// Scenario A: truth, replicate-0 posterior, diagnostics of every
/// replicate and per-replicate error reports.
pub fn scenario_a(cfg: &ExperimentConfig) -> Result<PathBuf> {
    require(cfg, ScenarioKind::A, "scenario-a")?;
    let pb = Problem::build(cfg, cfg.basis.n_angle, cfg.basis.n_range)?;
    let snr = [cfg.noise.snr_db];
    let reps = run_replicates(cfg, &pb, cfg.seeds.replicates, &snr, true)?;
    let mut out = OutputDir::create(cfg)?;

    #[derive(Serialize)]
    struct Truth {
        alpha: f64,
        mu: Vec<[f64; 2]>,
        precision: Vec<f64>,
    }
    out.write_json(
        "truth.json",
        &Truth {
            alpha: pb.params.alpha,
            mu: cx_pairs(pb.params.mean.iter()),
            precision: pb.params.precision_diag.to_vec(),
        },
    )?;

    let first = &reps[0];
    let r0 = first.runs[0].result.as_ref().expect("state kept");
    out.write_json("posterior.json", &r0.state.snapshot())?;
    if cfg.output.binary {
        let truth_rows: Vec<_> = first.chain.iter().map(|g| &g.gamma).collect();
        out.write_matrix("truth_gamma.bin", coeff_matrix(&truth_rows).view())?;
        let post_rows: Vec<_> = r0.state.gamma_beliefs.iter().map(|b| &b.mean).collect();
        out.write_matrix("posterior_gamma.bin", coeff_matrix(&post_rows).view())?;
    }

    let mut diag = Vec::new();
    for r in &reps {
        diag.extend(diagnostics_rows(
            r.index,
            r.runs[0].result.as_ref().expect("state kept"),
        ));
    }
    out.write_csv("diagnostics.csv", &DIAG_HEADER, &diag)?;

    let per: Vec<ReplicateReport> = reps
        .iter()
        .map(|r| {
            let o = &r.runs[0];
            ReplicateReport {
                replicate: r.index,
                seed: r.seed,
                snr_db: o.snr_db,
                noise_precision: o.noise_precision,
                lambda_ratio_median: o.lambda_ratio,
                report: o.report,
            }
        })
        .collect();
    let all: Vec<&RunOutcome> = reps.iter().map(|r| &r.runs[0]).collect();
    #[derive(Serialize)]
    struct Report {
        summary: Summary,
        replicates: Vec<ReplicateReport>,
    }
    out.write_json(
        "error_report.json",
        &Report {
            summary: summarise(&all),
            replicates: per,
        },
    )?;
    out.finish()
}

fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<Vec<String>>> {
    let snrs = snr_list(cfg);
    let mut rows = Vec::new();
    for (ka, kr) in coeff_sizes(cfg) {
        let pb = Problem::build(cfg, ka, kr)?;
        let reps = run_replicates(cfg, &pb, cfg.seeds.replicates, &snrs, false)?;
        for (si, &snr) in snrs.iter().enumerate() {
            for r in &reps {
                let o = &r.runs[si];
                rows.push(vec![
                    pb.basis.n_coeffs().to_string(),
                    num(snr),
                    r.seed.to_string(),
                    num(o.report.coeff_mse),
                    num(o.report.field_mse),
                    num(o.report.coverage_3sigma),
                    num(o.report.alpha_hat),
                    if cfg.output.record_timing {
                        num(o.runtime_s)
                    } else {
                        String::new()
                    },
                ]);
            }
        }
    }
    Ok(rows)
}

/// Coefficient-count sweep for scenario B, SNR sweep for scenario A.
pub fn sweep(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let rows = sweep_rows(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.write_csv("sweep.csv", &SWEEP_HEADER, &rows)?;
    out.finish()
}

fn snr_tag(snr: f64) -> String {
    let s = num(snr);
    let s = s.strip_suffix(".0").unwrap_or(&s);
    s.replace('.', "p")
}

/// Scenario B: reference maps, one posterior map per SNR on replicate 0,
/// a per-SNR summary and the coefficient-count sweep.
pub fn scenario_b(cfg: &ExperimentConfig) -> Result<PathBuf> {
    require(cfg, ScenarioKind::B, "scenario-b")?;
    let snrs = snr_list(cfg);
    let pb = Problem::build(cfg, cfg.basis.n_angle, cfg.basis.n_range)?;
    let rep = run_replicate(cfg, &pb, 0, &snrs, true)?;
    let truncated = render_map(&pb.truth(), &pb.basis, &pb.grid)?;
    let mut maps = vec![
        ("truth_map".to_string(), pb.true_map.clone()),
        ("truncated_map".to_string(), truncated),
    ];

    #[derive(Serialize)]
    struct SnrSummary {
        snr_db: f64,
        noise_precision: f64,
        map: String,
        #[serde(flatten)]
        report: ErrorReport,
    }
    let mut per_snr = Vec::new();
    for o in &rep.runs {
        let st = &o.result.as_ref().expect("state kept").state;
        let est = ClutterCoefficients {
            gamma: st.mu_belief.mean.clone(),
            frame_index: 0,
        };
        let name = format!("posterior_map_snr{}", snr_tag(o.snr_db));
        maps.push((name.clone(), render_map(&est, &pb.basis, &pb.grid)?));
        per_snr.push(SnrSummary {
            snr_db: o.snr_db,
            noise_precision: o.noise_precision,
            map: name,
            report: o.report,
        });
    }
    drop(rep);
    let rows = sweep_rows(cfg)?;

    let mut out = OutputDir::create(cfg)?;
    #[derive(Serialize)]
    struct MapJson {
        rows: usize,
        cols: usize,
        values: Vec<Vec<[f64; 2]>>,
    }
    for (name, m) in &maps {
        if cfg.output.binary {
            out.write_matrix(&format!("{name}.bin"), m.view())?;
        } else {
            let values = m.rows().into_iter().map(|r| cx_pairs(r.iter())).collect();
            out.write_json(
                &format!("{name}.json"),
                &MapJson {
                    rows: m.nrows(),
                    cols: m.ncols(),
                    values,
                },
            )?;
        }
    }
    #[derive(Serialize)]
    struct Grid {
        thetas: Vec<f64>,
        ranges: Vec<f64>,
        runs: Vec<SnrSummary>,
    }
    out.write_json(
        "summary.json",
        &Grid {
            thetas: pb.grid.thetas.clone(),
            ranges: pb.grid.ranges.clone(),
            runs: per_snr,
        },
    )?;
    out.write_csv("sweep.csv", &SWEEP_HEADER, &rows)?;
    out.finish()
}

/// Frames of replicate 0 at `noise.snr_db`. The realised noise precision
/// is written into the resolved config so `infer` can reuse it.
pub fn simulate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let pb = Problem::build(cfg, cfg.basis.n_angle, cfg.basis.n_range)?;
    let root = cfg.seeds.root;
    let chain = draw_ar_chain(&pb.params, cfg.inference.n + 1, seed_for(root, 0, SeedPurpose::Chain))?;
    let clean = chain
        .iter()
        .map(|g| pb.fm.apply(g.gamma.view()))
        .collect::<clutter_core::Result<Vec<_>>>()?;
    let lw = match cfg.noise.noise_precision {
        Some(p) => p,
        None => {
            let power = clean
                .iter()
                .map(|y| y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64)
                .sum::<f64>()
                / clean.len() as f64;
            if !(power > 0.0) {
                bail!("clutter signal has zero power, cannot set SNR");
            }
            10f64.powf(cfg.noise.snr_db / 10.0) / power
        }
    };
    let mut rng = rng_from_seed(seed_for(root, 0, SeedPurpose::Noise));
    let frames: Vec<Array1<Cx<f64>>> = clean
        .into_iter()
        .map(|mut y| {
            add_complex_noise(&mut rng, y.as_slice_mut().expect("contiguous"), lw);
            y
        })
        .collect();

    let mut resolved = cfg.clone();
    resolved.noise.noise_precision = Some(lw);
    let mut out = OutputDir::create(&resolved)?;
    out.write_matrix("frames.bin", coeff_matrix(&frames.iter().collect::<Vec<_>>()).view())?;
    out.write_matrix(
        "truth_gamma.bin",
        coeff_matrix(&chain.iter().map(|g| &g.gamma).collect::<Vec<_>>()).view(),
    )?;
    #[derive(Serialize)]
    struct Info {
        n_frames: usize,
        n_samples: usize,
        n_coeffs: usize,
        noise_precision: f64,
        rank: usize,
        singular_value_max: f64,
        singular_value_min: f64,
        warnings: Vec<String>,
    }
    let sv = pb.fm.singular_values();
    out.write_json(
        "simulation.json",
        &Info {
            n_frames: frames.len(),
            n_samples: pb.fm.n_rows(),
            n_coeffs: pb.fm.n_coeffs(),
            noise_precision: lw,
            rank: pb.fm.rank(),
            singular_value_max: sv.first().copied().unwrap_or(0.0),
            singular_value_min: sv.last().copied().unwrap_or(0.0),
            warnings: pb.fm.warnings().to_vec(),
        },
    )?;
    out.finish()
}

/// Runs inference on frames stored as rows of a binary container.
pub fn infer(cfg: &ExperimentConfig, frames_path: &Path) -> Result<PathBuf> {
    let lw = cfg
        .noise
        .noise_precision
        .ok_or_else(|| anyhow!("invalid value for `noise.noise_precision`: required by `infer`"))?;
    let data = load_matrix(frames_path).with_context(|| format!("reading {}", frames_path.display()))?;
    let basis = cfg.basis_config()?;
    let radar = cfg.radar_config();
    let mut fm = ForwardModel::assemble(
        expand_steering(&radar.array, &basis)?,
        expand_waveform(&radar.waveform, &basis)?,
        lw,
        cfg.inference.pinv_tol,
    )?;
    fm.set_noise_precision(lw)?;
    if data.ncols() != fm.n_rows() {
        bail!(
            "frames have {} samples but the configured radar produces {}",
            data.ncols(),
            fm.n_rows()
        );
    }
    if data.nrows() == 0 {
        bail!("frame file holds no frames");
    }
    let msgs = data
        .rows()
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            msg_data_to_gamma_at(
                &MeasurementFrame {
                    y: r.to_owned(),
                    frame_index: n,
                },
                &fm,
                lw,
            )
        })
        .collect::<clutter_core::Result<Vec<_>>>()?;
    let opts = inference_options(cfg);
    let result = run_from_state(initialize_from_messages(msgs, &opts)?, &opts)?;
    let mut out = OutputDir::create(cfg)?;
    out.write_json("posterior.json", &result.state.snapshot())?;
    if cfg.output.binary {
        let rows: Vec<_> = result.state.gamma_beliefs.iter().map(|b| &b.mean).collect();
        out.write_matrix("posterior_gamma.bin", coeff_matrix(&rows).view())?;
    }
    out.write_csv("diagnostics.csv", &DIAG_HEADER, &diagnostics_rows(0, &result))?;
    out.finish()
}

pub const PROBE_HEADER: [&str; 10] = [
    "frame_mult",
    "coeff_mult",
    "n_frames",
    "n_coeffs",
    "assembly_s",
    "init_s",
    "per_iter_s",
    "assembly_ratio",
    "init_ratio",
    "per_iter_ratio",
];

/// Timing probe. Runs on the calling thread only; its output is wall-clock
/// time and so differs between runs.
pub fn probe_scaling(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let p = &cfg.probe;
    let alpha = match cfg.scenario.kind {
        ScenarioKind::A => cfg.scenario_a().map_or(0.1, |a| a.alpha),
        ScenarioKind::B => cfg.scenario_b().map_or(0.9, |b| b.alpha),
    };
    let base = ProbeBase {
        radar: cfg.radar_config(),
        basis: cfg.basis_config_sized(p.n_angle, p.n_range)?,
        n_frames: p.frames,
        snr_db: cfg.noise.snr_db,
        alpha,
        sweeps: p.sweeps,
        seed: cfg.seeds.root,
    };
    let factors: Vec<(usize, usize)> = p.factors.iter().map(|f| (f[0], f[1])).collect();
    let table = scaling_probe(&base, &factors)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.frame_mult.to_string(),
                r.coeff_mult.to_string(),
                r.n_frames.to_string(),
                r.n_coeffs.to_string(),
                num(r.assembly_s),
                num(r.init_s),
                num(r.per_iter_s),
                num(r.assembly_ratio),
                num(r.init_ratio),
                num(r.per_iter_ratio),
            ]
        })
        .collect();
    let mut out = OutputDir::create(cfg)?;
    out.write_csv("scaling.csv", &PROBE_HEADER, &rows)?;
    out.finish()
}
