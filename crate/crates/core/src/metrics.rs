//! Estimation-quality measures and the complexity probe.

use std::time::Instant;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::basis::{assemble_forward_model, expand_steering, expand_waveform, BasisConfig};
use crate::error::{check_len, invalid, Result};
use crate::inference::{initialize_with, Engine, GaussianBelief, InferenceOptions};
use crate::rng::{seed_for, SeedPurpose};
use crate::scalar::{abs2, Real};
use crate::scene::{
    draw_ar_chain, render_map, scenario_a_params, snr_to_noise_precision_batch, synthesize_frame, ClutterCoefficients,
    MapGrid, RadarConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub coeff_mse: f64,
    pub field_mse: f64,
    pub coverage_3sigma: f64,
    pub alpha_hat: f64,
}

/// Mean of `|mu_j - Gamma_j|^2`.
pub fn coefficient_error<T: Real>(estimate: &GaussianBelief<T>, truth: &ClutterCoefficients<T>) -> Result<T> {
    check_len("truth coefficients", estimate.len(), truth.gamma.len())?;
    if estimate.is_empty() {
        return Err(invalid("empty coefficient vectors"));
    }
    let s: T = estimate
        .mean
        .iter()
        .zip(truth.gamma.iter())
        .map(|(&a, &b)| abs2(a - b))
        .sum();
    Ok(s / T::from_usize_lossy(estimate.len()))
}

/// Grid mean of `|C_hat - C_true|^2` with `C_hat` rendered from the
/// estimate's mean.
pub fn field_error<T: Real>(
    estimate: &GaussianBelief<T>,
    true_map: ArrayView2<'_, crate::scalar::Cx<T>>,
    cfg: &BasisConfig<T>,
    grid: &MapGrid<T>,
) -> Result<T> {
    if true_map.dim() != grid.shape() {
        return Err(invalid(format!(
            "true map shape {:?} does not match grid {:?}",
            true_map.dim(),
            grid.shape()
        )));
    }
    let est = ClutterCoefficients {
        gamma: estimate.mean.clone(),
        frame_index: 0,
    };
    let map = render_map(&est, cfg, grid)?;
    let s: T = map.iter().zip(true_map.iter()).map(|(&a, &b)| abs2(a - b)).sum();
    Ok(s / T::from_usize_lossy(map.len()))
}

/// Fraction of components whose real and imaginary errors both lie within
/// three standard deviations `sqrt(1 / (2 precision))`.
pub fn coverage_3sigma<T: Real>(
    mu_belief: &GaussianBelief<T>,
    truth: ArrayView1<'_, crate::scalar::Cx<T>>,
) -> Result<T> {
    check_len("truth vector", mu_belief.len(), truth.len())?;
    if truth.is_empty() {
        return Err(invalid("empty coefficient vectors"));
    }
    let three = T::lit(3.0);
    let inside = (0..truth.len())
        .filter(|&j| {
            let s = (T::one() / (mu_belief.precision_diag[j] + mu_belief.precision_diag[j])).sqrt();
            let d = mu_belief.mean[j] - truth[j];
            d.re.abs() <= three * s && d.im.abs() <= three * s
        })
        .count();
    Ok(T::from_usize_lossy(inside) / T::from_usize_lossy(truth.len()))
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Base problem for [`scaling_probe`]. Frames follow scenario A's
/// generator.
#[derive(Debug, Clone)]
pub struct ProbeBase<T> {
    pub radar: RadarConfig<T>,
    pub basis: BasisConfig<T>,
    /// Frame count `N + 1` of the base case.
    pub n_frames: usize,
    pub snr_db: T,
    pub alpha: T,
    /// Timed sweeps per case; the fastest is reported.
    pub sweeps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub frame_mult: usize,
    pub coeff_mult: usize,
    pub n_frames: usize,
    pub n_coeffs: usize,
    /// Forward-model assembly including the pseudoinverse.
    pub assembly_s: f64,
    /// Assembly plus state initialisation.
    pub init_s: f64,
    /// Fastest wall time of one main-loop sweep.
    pub per_iter_s: f64,
    pub assembly_ratio: f64,
    pub init_ratio: f64,
    pub per_iter_ratio: f64,
}

/// Times assembly, initialisation and main-loop sweeps for each
/// `(frame multiplier, coefficient multiplier)`. The coefficient
/// multiplier scales the angular basis size. Sweeps of all cases are
/// interleaved and the fastest is kept. Ratios are relative to the first
/// factor.
pub fn scaling_probe<T: Real>(base: &ProbeBase<T>, factors: &[(usize, usize)]) -> Result<Vec<ScalingRow>> {
    if factors.is_empty() {
        return Err(invalid("scaling probe needs at least one factor"));
    }
    if base.sweeps < 5 {
        return Err(invalid("scaling probe needs at least five timed sweeps"));
    }
    let mut rows: Vec<ScalingRow> = Vec::with_capacity(factors.len());
    let mut engines = Vec::with_capacity(factors.len());
    for &(fm_mult, cm_mult) in factors {
        if fm_mult == 0 || cm_mult == 0 {
            return Err(invalid("scaling factors must be at least 1"));
        }
        let mut cfg = base.basis.clone();
        cfg.n_angle *= cm_mult;
        let n_frames = base.n_frames * fm_mult;

        let se = expand_steering(&base.radar.array, &cfg)?;
        let we = expand_waveform(&base.radar.waveform, &cfg)?;
        let t0 = Instant::now();
        let mut fm = assemble_forward_model(se, we, T::one())?;
        let assembly_s = t0.elapsed().as_secs_f64();

        let params = scenario_a_params(
            &cfg,
            base.alpha,
            T::lit(0.5),
            T::lit(5.0),
            seed_for(base.seed, 0, SeedPurpose::Truth),
        )?;
        let chain = draw_ar_chain(&params, n_frames, seed_for(base.seed, 0, SeedPurpose::Chain))?;
        let lw = snr_to_noise_precision_batch(base.snr_db, &fm, &chain)?;
        fm.set_noise_precision(lw)?;
        let noise_root = seed_for(base.seed, 0, SeedPurpose::Probe);
        let frames = chain
            .iter()
            .map(|g| synthesize_frame(&fm, g, noise_root.wrapping_add(g.frame_index as u64)))
            .collect::<Result<Vec<_>>>()?;

        let opts = InferenceOptions::default();
        let t1 = Instant::now();
        let state = initialize_with(&frames, &fm, &opts)?;
        let init_s = assembly_s + t1.elapsed().as_secs_f64();
        drop(fm);

        let mut engine = Engine::new(state, opts);
        engine.sweep()?; // warm-up
        engines.push(engine);
        rows.push(ScalingRow {
            frame_mult: fm_mult,
            coeff_mult: cm_mult,
            n_frames,
            n_coeffs: cfg.n_coeffs(),
            assembly_s,
            init_s,
            per_iter_s: f64::INFINITY,
            assembly_ratio: 1.0,
            init_ratio: 1.0,
            per_iter_ratio: 1.0,
        });
    }
    for _ in 0..base.sweeps {
        for (engine, row) in engines.iter_mut().zip(rows.iter_mut()) {
            let t = Instant::now();
            engine.sweep()?;
            row.per_iter_s = row.per_iter_s.min(t.elapsed().as_secs_f64());
        }
    }
    let first = rows[0];
    for r in &mut rows {
        r.assembly_ratio = r.assembly_s / first.assembly_s;
        r.init_ratio = r.init_s / first.init_s;
        r.per_iter_ratio = r.per_iter_s / first.per_iter_s;
    }
    Ok(rows)
}
