//! Ground-truth generation: AR(1) coefficient chains, point-scatterer
//! scenes, noisy measurement frames and a direct-integration reference for
//! the received signal.
//!
//! A map `C` is linked to the stored coefficient vector by
//! `C = sum conj(Gamma_kl) psi_kl`, and the receivers see
//! `y = integral conj(C) A u dx dr` with `x` the basis angle coordinate.

use ndarray::{Array1, Array2, ArrayView2};
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{wave_number, ArrayGeometry, BasisConfig, ChirpWaveform, ForwardModel};
use crate::error::{check_len, invalid, Result};
use crate::rng::{add_complex_noise, complex_normal, rng_from_seed};
use crate::scalar::{abs2, Cx, Real};

pub const ALPHA_MIN: f64 = 1e-3;
pub const ALPHA_MAX: f64 = 1.0 - 1e-3;

#[inline]
pub fn clamp_alpha<T: Real>(alpha: T) -> T {
    alpha.max(T::lit(ALPHA_MIN)).min(T::lit(ALPHA_MAX))
}

/// AR(1) model `Gamma_n = alpha Gamma_{n-1} + V_n` with stationary law
/// `N^C(mean, precision_diag)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARParams<T> {
    pub alpha: T,
    pub mean: Array1<Cx<T>>,
    pub precision_diag: Array1<T>,
}

impl<T: Real> ARParams<T> {
    /// Validates shapes and precisions; `alpha` is clamped into
    /// `[ALPHA_MIN, ALPHA_MAX]`.
    pub fn new(alpha: T, mean: Array1<Cx<T>>, precision_diag: Array1<T>) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid("alpha must be finite"));
        }
        check_len("AR precision", mean.len(), precision_diag.len())?;
        if precision_diag.iter().any(|&p| !(p > T::zero()) || !p.is_finite()) {
            return Err(invalid("AR precisions must be positive and finite"));
        }
        Ok(Self {
            alpha: clamp_alpha(alpha),
            mean,
            precision_diag,
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Process-noise law `(mu (1 - alpha), Lambda / (1 - alpha^2))`.
pub fn stationary_noise_params<T: Real>(p: &ARParams<T>) -> (Array1<Cx<T>>, Array1<T>) {
    stationary_noise_params_raw(p.alpha, &p.mean, &p.precision_diag)
}

/// Same as [`stationary_noise_params`] without the clamp, so `alpha = 0`
/// is allowed.
pub fn stationary_noise_params_raw<T: Real>(
    alpha: T,
    mean: &Array1<Cx<T>>,
    precision: &Array1<T>,
) -> (Array1<Cx<T>>, Array1<T>) {
    let one = T::one();
    let mv = mean.mapv(|m| m * (one - alpha));
    let pv = precision.mapv(|l| l / (one - alpha * alpha));
    (mv, pv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterCoefficients<T> {
    pub gamma: Array1<Cx<T>>,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementFrame<T> {
    pub y: Array1<Cx<T>>,
    pub frame_index: usize,
}

/// Draws `n_frames` coefficient vectors, the first from the stationary law.
pub fn draw_ar_chain<T: Real>(p: &ARParams<T>, n_frames: usize, seed: u64) -> Result<Vec<ClutterCoefficients<T>>> {
    if n_frames == 0 {
        return Err(invalid("a chain needs at least one frame"));
    }
    let mut rng = rng_from_seed(seed);
    let (mv, pv) = stationary_noise_params(p);
    let n = p.len();
    let mut cur = Array1::from_shape_fn(n, |j| complex_normal(&mut rng, p.mean[j], p.precision_diag[j]));
    let mut out = Vec::with_capacity(n_frames);
    out.push(ClutterCoefficients {
        gamma: cur.clone(),
        frame_index: 0,
    });
    for idx in 1..n_frames {
        for j in 0..n {
            let v = complex_normal(&mut rng, mv[j], pv[j]);
            cur[j] = cur[j] * p.alpha + v;
        }
        out.push(ClutterCoefficients {
            gamma: cur.clone(),
            frame_index: idx,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer<T> {
    pub theta: T,
    pub range: T,
    pub amplitude: Cx<T>,
}

/// Orthonormal projection of a sum of point sources:
/// `Gamma_kl = sum_p conj(a_p) psi_kl(theta_p, r_p)`.
pub fn project_scatterers<T: Real>(
    scatterers: &[Scatterer<T>],
    cfg: &BasisConfig<T>,
) -> Result<ClutterCoefficients<T>> {
    cfg.validate()?;
    let mut gamma = Array1::<Cx<T>>::zeros(cfg.n_coeffs());
    for s in scatterers {
        cfg.check_point(s.theta, s.range)?;
        let a = s.amplitude.conj();
        let ang: Vec<Cx<T>> = (0..cfg.n_angle).map(|k| cfg.angular_mode(k, s.theta)).collect();
        let rng: Vec<Cx<T>> = (0..cfg.n_range).map(|l| cfg.range_mode(l, s.range)).collect();
        for (k, &pa) in ang.iter().enumerate() {
            for (l, &pr) in rng.iter().enumerate() {
                gamma[cfg.coeff_index(k, l)] += a * pa * pr;
            }
        }
    }
    Ok(ClutterCoefficients { gamma, frame_index: 0 })
}

/// Noiseless `M Gamma`.
pub fn synthesize_noiseless<T: Real>(fm: &ForwardModel<T>, g: &ClutterCoefficients<T>) -> Result<MeasurementFrame<T>> {
    let y = fm.apply(g.gamma.view())?;
    Ok(MeasurementFrame {
        y,
        frame_index: g.frame_index,
    })
}

/// `y = M Gamma + w` with `w ~ N^C(0, lambda_W I)` drawn from `seed`.
pub fn synthesize_frame<T: Real>(
    fm: &ForwardModel<T>,
    g: &ClutterCoefficients<T>,
    seed: u64,
) -> Result<MeasurementFrame<T>> {
    let mut rng = rng_from_seed(seed);
    synthesize_frame_with(fm, g, &mut rng)
}

/// As [`synthesize_frame`] but drawing from a caller-owned generator, so a
/// whole chain can share one noise stream.
pub fn synthesize_frame_with<T: Real, R: Rng + ?Sized>(
    fm: &ForwardModel<T>,
    g: &ClutterCoefficients<T>,
    rng: &mut R,
) -> Result<MeasurementFrame<T>> {
    let mut f = synthesize_noiseless(fm, g)?;
    add_complex_noise(rng, f.y.as_slice_mut().expect("contiguous"), fm.noise_precision());
    Ok(f)
}

/// Mean per-sample power of `M Gamma` over the full frame.
pub fn signal_power<T: Real>(fm: &ForwardModel<T>, g: &ClutterCoefficients<T>) -> Result<T> {
    let y = fm.apply(g.gamma.view())?;
    Ok(y.iter().map(|&z| abs2(z)).sum::<T>() / T::from_usize_lossy(y.len()))
}

/// `lambda_W` giving the requested per-sample SNR for a reference frame.
pub fn snr_to_noise_precision<T: Real>(
    target_snr_db: T,
    fm: &ForwardModel<T>,
    g_ref: &ClutterCoefficients<T>,
) -> Result<T> {
    snr_to_noise_precision_batch(target_snr_db, fm, std::slice::from_ref(g_ref))
}

/// Like [`snr_to_noise_precision`] with the signal power averaged over
/// several reference frames.
pub fn snr_to_noise_precision_batch<T: Real>(
    target_snr_db: T,
    fm: &ForwardModel<T>,
    refs: &[ClutterCoefficients<T>],
) -> Result<T> {
    if refs.is_empty() {
        return Err(invalid("SNR calibration needs at least one reference frame"));
    }
    let mut power = T::zero();
    for g in refs {
        power += signal_power(fm, g)?;
    }
    power /= T::from_usize_lossy(refs.len());
    if !(power > T::zero()) || !power.is_finite() {
        return Err(invalid("reference signal has zero power"));
    }
    let ratio = T::lit(10.0).powf(target_snr_db / T::lit(10.0));
    Ok(ratio / power)
}

/// Transmit and receive configuration of the radar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig<T> {
    pub array: ArrayGeometry<T>,
    pub waveform: ChirpWaveform<T>,
}

/// Tensor trapezoid grid used by [`synthesize_frame_direct`]: `n_angle`
/// nodes uniform in the basis angle coordinate and `n_range` in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectGrid {
    pub n_angle: usize,
    pub n_range: usize,
}

impl DirectGrid {
    /// Angles and ranges at which the field must be sampled.
    pub fn nodes<T: Real>(&self, cfg: &BasisConfig<T>) -> (Vec<T>, Vec<T>) {
        (cfg.angular_rule(self.n_angle).nodes, cfg.range_rule(self.n_range).nodes)
    }

    pub fn doubled(&self) -> Self {
        Self {
            n_angle: 2 * self.n_angle - 1,
            n_range: 2 * self.n_range - 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectFrame<T> {
    pub frame: MeasurementFrame<T>,
    pub warnings: Vec<String>,
}

/// Samples a coefficient vector's map on a direct-integration grid.
pub fn sample_field<T: Real>(
    g: &ClutterCoefficients<T>,
    cfg: &BasisConfig<T>,
    grid: &DirectGrid,
) -> Result<Array2<Cx<T>>> {
    let (th, r) = grid.nodes(cfg);
    render_points(g, cfg, &th, &r)
}

/// Noiseless receiver samples by direct quadrature of
/// `sum_m integral conj(C) A^(j,m)(theta) u(t - 2r/c) dx dr`, with
/// `field` sampled at `grid.nodes(cfg)`.
pub fn synthesize_frame_direct<T: Real>(
    field: ArrayView2<'_, Cx<T>>,
    radar: &RadarConfig<T>,
    cfg: &BasisConfig<T>,
    grid: &DirectGrid,
) -> Result<DirectFrame<T>> {
    cfg.validate()?;
    if grid.n_angle < 2 || grid.n_range < 2 {
        return Err(invalid("direct grid needs at least two nodes per dimension"));
    }
    if field.dim() != (grid.n_angle, grid.n_range) {
        return Err(invalid(format!(
            "field shape {:?} does not match the {}x{} grid",
            field.dim(),
            grid.n_angle,
            grid.n_range
        )));
    }
    let array = &radar.array;
    let wf = &radar.waveform;
    if array.n_tx() != wf.n_tx {
        return Err(invalid("array and waveform disagree on the transmitter count"));
    }
    let slot = wf.slot_samples(cfg.range_domain)?;
    let n_s = slot * wf.n_tx;

    let mut warnings = Vec::new();
    let field_wave = |n: usize| T::from_usize_lossy(wave_number(n.saturating_sub(1)).unsigned_abs() as usize);
    let cyc_a = array.max_extent() * cfg.angle_extent() + field_wave(cfg.n_angle);
    let cyc_r = wf.range_cycles(cfg.range_extent()) + field_wave(cfg.n_range);
    let four = T::lit(4.0);
    if T::from_usize_lossy(grid.n_angle - 1) < four * cyc_a {
        warnings.push(format!(
            "angular grid of {} nodes under-resolves {} oscillations",
            grid.n_angle, cyc_a
        ));
    }
    if T::from_usize_lossy(grid.n_range - 1) < four * cyc_r {
        warnings.push(format!(
            "range grid of {} nodes under-resolves {} oscillations",
            grid.n_range, cyc_r
        ));
    }

    let arule = cfg.angular_rule(grid.n_angle);
    let rrule = cfg.range_rule(grid.n_range);
    let conj_field = field.mapv(|z| z.conj());

    // p[qa, i] = range integral for one angle node at slot sample i
    let mut p = Array2::<Cx<T>>::zeros((grid.n_angle, slot));
    let mut echo: Vec<(usize, Cx<T>)> = Vec::with_capacity(grid.n_range);
    for i in 0..slot {
        let t = T::from_usize_lossy(i) / wf.sample_rate;
        echo.clear();
        wf.integrate_echo(&rrule, t, |q, v| echo.push((q, v)));
        if echo.is_empty() {
            continue;
        }
        for qa in 0..grid.n_angle {
            let row = conj_field.row(qa);
            let s = echo.iter().fold(Cx::<T>::zero(), |s, &(q, v)| s + row[q] * v);
            p[[qa, i]] = s;
        }
    }

    let mut y = Array1::<Cx<T>>::zeros(array.n_rx() * n_s);
    for m in 0..wf.n_tx {
        for j in 0..array.n_rx() {
            let weights: Vec<Cx<T>> = arule
                .nodes
                .iter()
                .zip(arule.weights.iter())
                .map(|(&th, &w)| array.steering(j, m, th) * w)
                .collect();
            for i in 0..slot {
                let s = weights
                    .iter()
                    .enumerate()
                    .fold(Cx::<T>::zero(), |s, (qa, &a)| s + a * p[[qa, i]]);
                y[j * n_s + m * slot + i] = s;
            }
        }
    }
    Ok(DirectFrame {
        frame: MeasurementFrame { y, frame_index: 0 },
        warnings,
    })
}

/// Evaluation points for rendered maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGrid<T> {
    pub thetas: Vec<T>,
    pub ranges: Vec<T>,
}

impl<T: Real> MapGrid<T> {
    /// Cell centres of an `n_theta x n_range` partition, uniform in the
    /// basis angle coordinate and in range. Grid means over these points
    /// are midpoint-rule averages over the domain.
    pub fn cell_centres(cfg: &BasisConfig<T>, n_theta: usize, n_range: usize) -> Self {
        let half = T::lit(0.5);
        let (x0, x1) = cfg.coord_interval();
        let (r0, r1) = cfg.range_domain;
        let hx = (x1 - x0) / T::from_usize_lossy(n_theta);
        let hr = (r1 - r0) / T::from_usize_lossy(n_range);
        let c = cfg.angular_coordinate;
        Self {
            thetas: (0..n_theta)
                .map(|q| c.from_coord(x0 + hx * (T::from_usize_lossy(q) + half)))
                .collect(),
            ranges: (0..n_range)
                .map(|q| r0 + hr * (T::from_usize_lossy(q) + half))
                .collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.thetas.len(), self.ranges.len())
    }
}

fn render_points<T: Real>(
    g: &ClutterCoefficients<T>,
    cfg: &BasisConfig<T>,
    thetas: &[T],
    ranges: &[T],
) -> Result<Array2<Cx<T>>> {
    check_len("coefficient vector", cfg.n_coeffs(), g.gamma.len())?;
    let at = cfg.angular_table(thetas);
    let rt = cfg.range_table(ranges);
    // h[k, qr] = sum_l conj(Gamma_kl) psi_l(r_qr)
    let h = Array2::from_shape_fn((cfg.n_angle, ranges.len()), |(k, qr)| {
        (0..cfg.n_range).fold(Cx::<T>::zero(), |s, l| {
            s + g.gamma[cfg.coeff_index(k, l)].conj() * rt[[qr, l]]
        })
    });
    Ok(Array2::from_shape_fn((thetas.len(), ranges.len()), |(qa, qr)| {
        (0..cfg.n_angle).fold(Cx::<T>::zero(), |s, k| s + at[[qa, k]] * h[[k, qr]])
    }))
}

/// `C(theta, r) = sum conj(Gamma_kl) psi_kl(theta, r)` on the grid.
pub fn render_map<T: Real>(
    g: &ClutterCoefficients<T>,
    cfg: &BasisConfig<T>,
    grid: &MapGrid<T>,
) -> Result<Array2<Cx<T>>> {
    for &t in &grid.thetas {
        cfg.check_point(t, cfg.range_domain.0)?;
    }
    for &r in &grid.ranges {
        cfg.check_point(cfg.theta_domain.0, r)?;
    }
    render_points(g, cfg, &grid.thetas, &grid.ranges)
}

/// Inverse of [`render_map`] for maps sampled on
/// `MapGrid::cell_centres(cfg, rows, cols)`, by midpoint quadrature.
pub fn project_map<T: Real>(map: ArrayView2<'_, Cx<T>>, cfg: &BasisConfig<T>) -> Result<ClutterCoefficients<T>> {
    cfg.validate()?;
    let (na, nr) = map.dim();
    if na == 0 || nr == 0 {
        return Err(invalid("map must be non-empty"));
    }
    let grid = MapGrid::cell_centres(cfg, na, nr);
    let wa = cfg.angle_extent() / T::from_usize_lossy(na);
    let wr = cfg.range_extent() / T::from_usize_lossy(nr);
    let at = cfg.angular_table(&grid.thetas);
    let rt = cfg.range_table(&grid.ranges);
    let mut gamma = Array1::<Cx<T>>::zeros(cfg.n_coeffs());
    for k in 0..cfg.n_angle {
        for l in 0..cfg.n_range {
            let mut s = Cx::<T>::zero();
            for qa in 0..na {
                let mut row = Cx::<T>::zero();
                for qr in 0..nr {
                    row += map[[qa, qr]] * rt[[qr, l]].conj();
                }
                s += row * at[[qa, k]].conj();
            }
            // gamma_kl = <psi_kl | C>, stored conjugated
            gamma[cfg.coeff_index(k, l)] = (s * (wa * wr)).conj();
        }
    }
    Ok(ClutterCoefficients { gamma, frame_index: 0 })
}

/// Scenario A ground truth: `mu_kl ~ N^C(0, 1 + w_k^2 + w_l^2)` so its
/// magnitude decays with wave number, and log-uniform precisions in
/// `[prec_lo, prec_hi]`.
pub fn scenario_a_params<T: Real>(
    cfg: &BasisConfig<T>,
    alpha: T,
    prec_lo: T,
    prec_hi: T,
    seed: u64,
) -> Result<ARParams<T>> {
    if !(prec_lo > T::zero()) || !(prec_hi >= prec_lo) {
        return Err(invalid("precision range must satisfy 0 < lo <= hi"));
    }
    let mut rng = rng_from_seed(seed);
    let n = cfg.n_coeffs();
    let mut mean = Array1::<Cx<T>>::zeros(n);
    for j in 0..n {
        let (k, l) = cfg.split_index(j);
        let wk = wave_number(k) as f64;
        let wl = wave_number(l) as f64;
        mean[j] = complex_normal(&mut rng, Cx::zero(), T::lit(1.0 + wk * wk + wl * wl));
    }
    let (a, b) = (prec_lo.ln(), prec_hi.ln());
    let precision = Array1::from_shape_fn(n, |_| {
        let u: f64 = rng.random();
        (a + (b - a) * T::lit(u)).exp()
    });
    ARParams::new(alpha, mean, precision)
}

/// Rectangular fence in the ground plane, seen from the array at the
/// origin looking along `+y`. Posts are equally spaced along the
/// perimeter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FenceLayout<T> {
    /// Half width of the rectangle across the boresight, meters.
    pub half_width: T,
    /// Near and far edges along the boresight, meters.
    pub near: T,
    pub far: T,
    pub n_posts: usize,
    pub amplitude: T,
}

impl<T: Real> FenceLayout<T> {
    /// Fence scaled to a range domain ending at `r_max`.
    pub fn for_range(r_max: T, n_posts: usize) -> Self {
        Self {
            half_width: T::lit(0.3) * r_max,
            near: T::lit(0.4) * r_max,
            far: T::lit(0.8) * r_max,
            n_posts,
            amplitude: T::one(),
        }
    }

    pub fn scatterers(&self, cfg: &BasisConfig<T>) -> Result<Vec<Scatterer<T>>> {
        if !(self.half_width > T::zero()) || !(self.far > self.near) || !(self.near > T::zero()) {
            return Err(invalid(
                "fence rectangle must have positive extent in front of the array",
            ));
        }
        if self.n_posts == 0 {
            return Err(invalid("fence needs at least one post"));
        }
        let w = self.half_width + self.half_width;
        let d = self.far - self.near;
        let perimeter = (w + d) * T::lit(2.0);
        let step = perimeter / T::from_usize_lossy(self.n_posts);
        let mut out = Vec::with_capacity(self.n_posts);
        for p in 0..self.n_posts {
            // walk near edge, right side, far edge, left side
            let s = step * (T::from_usize_lossy(p) + T::lit(0.5));
            let (x, y) = if s < w {
                (s - self.half_width, self.near)
            } else if s < w + d {
                (self.half_width, self.near + (s - w))
            } else if s < w + d + w {
                (self.half_width - (s - w - d), self.far)
            } else {
                (-self.half_width, self.far - (s - w - d - w))
            };
            let sc = Scatterer {
                theta: x.atan2(y),
                range: x.hypot(y),
                amplitude: Cx::new(self.amplitude, T::zero()),
            };
            cfg.check_point(sc.theta, sc.range)?;
            out.push(sc);
        }
        Ok(out)
    }
}
