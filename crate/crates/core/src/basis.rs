//! Separable orthonormal basis over (angle, range) and the linear forward
//! model it induces.
//!
//! Each dimension carries a complex-exponential family ordered constant
//! first, then by ascending wave number (`0, +1, -1, +2, -2, ...`). The
//! angular family lives on a coordinate `x(theta)` which is either the angle
//! itself or its sine; orthonormality is with respect to `dx dr`.
//!
//! Coefficient vectors are stored conjugated: entry `k * L + l` of a
//! coefficient vector is `conj(gamma_kl)` where the clutter map is
//! `C = sum gamma_kl psi_kl`. With the steering and waveform coefficients
//! taken as plain projections `<psi|A>` and `<psi|u>`, the received samples
//! are then exactly `M * Gamma` with `M = sum_m alpha_m (x) beta_m`.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::linalg::{self, DEFAULT_PINV_TOL};
use crate::scalar::{abs2, cis, Cx, Real};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Smallest quadrature density used for basis projections.
pub const MIN_QUADRATURE_DENSITY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngularCoordinate {
    /// The basis oscillates uniformly in the angle itself.
    Angle,
    /// The basis oscillates uniformly in `sin(theta)`. A half-wavelength
    /// array's steering phases are then exact modes of the family.
    #[default]
    Sine,
}

impl AngularCoordinate {
    #[inline]
    pub fn to_coord<T: Real>(self, theta: T) -> T {
        match self {
            Self::Angle => theta,
            Self::Sine => theta.sin(),
        }
    }

    #[inline]
    pub fn from_coord<T: Real>(self, x: T) -> T {
        match self {
            Self::Angle => x,
            Self::Sine => x.max(-T::one()).min(T::one()).asin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig<T> {
    /// Number K of angular functions.
    pub n_angle: usize,
    /// Number L of range functions.
    pub n_range: usize,
    /// Angular interval in radians.
    pub theta_domain: (T, T),
    /// Range interval in meters.
    pub range_domain: (T, T),
    #[serde(default)]
    pub angular_coordinate: AngularCoordinate,
}

impl<T: Real> BasisConfig<T> {
    pub fn new(
        n_angle: usize,
        n_range: usize,
        theta_domain: (T, T),
        range_domain: (T, T),
        angular_coordinate: AngularCoordinate,
    ) -> Result<Self> {
        let cfg = Self {
            n_angle,
            n_range,
            theta_domain,
            range_domain,
            angular_coordinate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Front half-plane `[-pi/2, pi/2]` by `[0, r_max]` in the sine coordinate.
    pub fn front(n_angle: usize, n_range: usize, r_max: T) -> Result<Self> {
        let h = T::FRAC_PI_2();
        Self::new(n_angle, n_range, (-h, h), (T::zero(), r_max), AngularCoordinate::Sine)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_angle == 0 || self.n_range == 0 {
            return Err(invalid("basis sizes must be at least 1"));
        }
        let (t0, t1) = self.theta_domain;
        let (r0, r1) = self.range_domain;
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(invalid("angular domain must have positive length"));
        }
        if !(r1 > r0) || !r0.is_finite() || !r1.is_finite() {
            return Err(invalid("range domain must have positive length"));
        }
        if r0 < T::zero() {
            return Err(invalid("range domain must start at a non-negative range"));
        }
        if self.angular_coordinate == AngularCoordinate::Sine {
            let h = T::FRAC_PI_2() * (T::one() + T::lit(1e-12));
            if t0 < -h || t1 > h {
                return Err(invalid("sine coordinate needs the angular domain inside [-pi/2, pi/2]"));
            }
        }
        Ok(())
    }

    /// Total coefficient count `K * L`.
    #[inline]
    pub fn n_coeffs(&self) -> usize {
        self.n_angle * self.n_range
    }

    /// Position of `(k, l)` in a coefficient vector (range index fastest).
    #[inline]
    pub fn coeff_index(&self, k: usize, l: usize) -> usize {
        k * self.n_range + l
    }

    #[inline]
    pub fn split_index(&self, j: usize) -> (usize, usize) {
        (j / self.n_range, j % self.n_range)
    }

    /// Angular interval expressed in the basis coordinate.
    pub fn coord_interval(&self) -> (T, T) {
        let c = self.angular_coordinate;
        (c.to_coord(self.theta_domain.0), c.to_coord(self.theta_domain.1))
    }

    pub fn angle_extent(&self) -> T {
        let (x0, x1) = self.coord_interval();
        x1 - x0
    }

    pub fn range_extent(&self) -> T {
        self.range_domain.1 - self.range_domain.0
    }

    /// Largest absolute wave number used in either dimension.
    pub fn max_wave_number(&self) -> usize {
        wave_number(self.n_angle - 1)
            .unsigned_abs()
            .max(wave_number(self.n_range - 1).unsigned_abs()) as usize
    }

    /// `max(256, 8 x highest wave number)` points per dimension.
    pub fn default_quadrature_density(&self) -> usize {
        MIN_QUADRATURE_DENSITY.max(8 * self.max_wave_number() + 1)
    }

    fn in_domain(&self, theta: T, r: T) -> bool {
        let slack = |a: T, b: T| (b - a) * T::lit(1e-9);
        let (t0, t1) = self.theta_domain;
        let (r0, r1) = self.range_domain;
        let st = slack(t0, t1);
        let sr = slack(r0, r1);
        theta >= t0 - st && theta <= t1 + st && r >= r0 - sr && r <= r1 + sr
    }

    pub fn check_point(&self, theta: T, r: T) -> Result<()> {
        if !self.in_domain(theta, r) {
            return Err(invalid(format!(
                "point (theta={theta}, r={r}) outside the basis domain"
            )));
        }
        Ok(())
    }

    /// `psi'_k(theta)` without domain checks.
    #[inline]
    pub fn angular_mode(&self, k: usize, theta: T) -> Cx<T> {
        let (x0, x1) = self.coord_interval();
        let x = self.angular_coordinate.to_coord(theta);
        fourier_mode(wave_number(k), x - x0, x1 - x0)
    }

    /// `psi'_l(r)` without domain checks.
    #[inline]
    pub fn range_mode(&self, l: usize, r: T) -> Cx<T> {
        let (r0, r1) = self.range_domain;
        fourier_mode(wave_number(l), r - r0, r1 - r0)
    }

    /// Table of `psi'_k` at the given angles, shape `(points, K)`.
    pub fn angular_table(&self, thetas: &[T]) -> Array2<Cx<T>> {
        Array2::from_shape_fn((thetas.len(), self.n_angle), |(q, k)| self.angular_mode(k, thetas[q]))
    }

    /// Table of `psi'_l` at the given ranges, shape `(points, L)`.
    pub fn range_table(&self, ranges: &[T]) -> Array2<Cx<T>> {
        Array2::from_shape_fn((ranges.len(), self.n_range), |(q, l)| self.range_mode(l, ranges[q]))
    }

    /// Trapezoid rule with `n` nodes on the angular coordinate interval.
    /// Returns angles (radians) and weights in the coordinate measure.
    pub fn angular_rule(&self, n: usize) -> QuadratureRule<T> {
        let (x0, x1) = self.coord_interval();
        let mut rule = QuadratureRule::trapezoid(x0, x1, n);
        let c = self.angular_coordinate;
        for x in rule.nodes.iter_mut() {
            *x = c.from_coord(*x);
        }
        rule
    }

    pub fn range_rule(&self, n: usize) -> QuadratureRule<T> {
        QuadratureRule::trapezoid(self.range_domain.0, self.range_domain.1, n)
    }
}

/// Signed wave number of basis index `i`: `0, 1, -1, 2, -2, ...`.
#[inline]
pub fn wave_number(i: usize) -> i64 {
    let w = i.div_ceil(2) as i64;
    if i % 2 == 1 {
        w
    } else {
        -w
    }
}

#[inline]
fn fourier_mode<T: Real>(w: i64, offset: T, extent: T) -> Cx<T> {
    let phase = T::TAU() * T::lit(w as f64) * offset / extent;
    cis(phase) * (T::one() / extent.sqrt())
}

/// `psi^(k,l)(theta, r) = psi'_k(theta) psi'_l(r)`.
pub fn eval_basis<T: Real>(k: usize, l: usize, theta: T, r: T, cfg: &BasisConfig<T>) -> Result<Cx<T>> {
    if k >= cfg.n_angle || l >= cfg.n_range {
        return Err(invalid(format!(
            "basis index ({k}, {l}) outside {}x{}",
            cfg.n_angle, cfg.n_range
        )));
    }
    cfg.check_point(theta, r)?;
    Ok(cfg.angular_mode(k, theta) * cfg.range_mode(l, r))
}

/// Nodes and weights of a 1-D quadrature rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Composite trapezoid with `n >= 2` equally spaced nodes including
    /// both endpoints.
    pub fn trapezoid(a: T, b: T, n: usize) -> Self {
        let n = n.max(2);
        let h = (b - a) / T::from_usize_lossy(n - 1);
        let nodes = (0..n).map(|i| a + h * T::from_usize_lossy(i)).collect();
        let mut weights = vec![h; n];
        weights[0] = h / T::lit(2.0);
        weights[n - 1] = h / T::lit(2.0);
        Self { nodes, weights }
    }

    pub fn spacing(&self) -> T {
        self.nodes[1] - self.nodes[0]
    }

    /// Weights of the piecewise-linear interpolant integrated over the
    /// sub-interval `[lo, hi]`, as `(node index, weight)` pairs.
    pub fn clipped_weights(&self, lo: T, hi: T) -> Vec<(usize, T)> {
        let n = self.nodes.len();
        let a = self.nodes[0];
        let b = self.nodes[n - 1];
        let lo = lo.max(a);
        let hi = hi.min(b);
        if !(hi > lo) {
            return Vec::new();
        }
        let h = self.spacing();
        let first = ((lo - a) / h).floor().to_usize().unwrap_or(0).min(n - 2);
        let last = ((hi - a) / h)
            .ceil()
            .to_usize()
            .unwrap_or(n - 1)
            .min(n - 1)
            .max(first + 1);
        let mut out: Vec<(usize, T)> = Vec::with_capacity(last - first + 1);
        let two_h = h + h;
        for q in first..last {
            let left = self.nodes[q];
            let s = lo.max(left);
            let e = hi.min(self.nodes[q + 1]);
            if !(e > s) {
                continue;
            }
            let es = e - left;
            let ss = s - left;
            let upper = (es * es - ss * ss) / two_h;
            let lower = (e - s) - upper;
            match out.last_mut() {
                Some((idx, w)) if *idx == q => *w += lower,
                _ => out.push((q, lower)),
            }
            out.push((q + 1, upper));
        }
        out
    }
}

/// Largest deviation of the basis Gram matrix from the identity, computed
/// with a trapezoid rule of `grid_density` nodes per dimension.
pub fn check_orthonormality<T: Real>(cfg: &BasisConfig<T>, grid_density: usize) -> T {
    let ar = cfg.angular_rule(grid_density);
    let rr = cfg.range_rule(grid_density);
    let ga = gram_1d(&cfg.angular_table(&ar.nodes), &ar.weights);
    let gr = gram_1d(&cfg.range_table(&rr.nodes), &rr.weights);
    let mut worst = T::zero();
    for k in 0..cfg.n_angle {
        for kp in 0..cfg.n_angle {
            for l in 0..cfg.n_range {
                for lp in 0..cfg.n_range {
                    let want = if k == kp && l == lp { T::one() } else { T::zero() };
                    let dev = (ga[[kp, k]] * gr[[lp, l]] - Cx::new(want, T::zero())).norm();
                    if dev > worst {
                        worst = dev;
                    }
                }
            }
        }
    }
    worst
}

fn gram_1d<T: Real>(table: &Array2<Cx<T>>, weights: &[T]) -> Array2<Cx<T>> {
    let n = table.ncols();
    Array2::from_shape_fn((n, n), |(a, b)| {
        table
            .column(a)
            .iter()
            .zip(table.column(b).iter())
            .zip(weights.iter())
            .fold(Cx::zero(), |s, ((&pa, &pb), &w)| s + pa.conj() * pb * w)
    })
}

/// Linear array element positions along the array axis, in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry<T> {
    pub tx: Vec<T>,
    pub rx: Vec<T>,
}

impl<T: Real> ArrayGeometry<T> {
    /// Half-wavelength receive spacing and `n_rx / 2` wavelength transmit
    /// spacing, forming a filled virtual array. The phase reference sits on
    /// virtual element `(n_tx * n_rx - 1) / 2`.
    pub fn uniform_linear(n_tx: usize, n_rx: usize) -> Self {
        let half = T::lit(0.5);
        let centre = T::from_usize_lossy((n_tx * n_rx).saturating_sub(1) / 2) * half;
        let rx = (0..n_rx).map(|j| half * T::from_usize_lossy(j)).collect();
        let tx = (0..n_tx)
            .map(|m| half * T::from_usize_lossy(n_rx * m) - centre)
            .collect();
        Self { tx, rx }
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    /// Two-way path difference of the `(j, m)` virtual element in wavelengths.
    #[inline]
    pub fn virtual_position(&self, j: usize, m: usize) -> T {
        self.rx[j] + self.tx[m]
    }

    /// Plane-wave steering phase `A^(j,m)(theta)`.
    #[inline]
    pub fn steering(&self, j: usize, m: usize, theta: T) -> Cx<T> {
        cis(T::TAU() * self.virtual_position(j, m) * theta.sin())
    }

    pub(crate) fn max_extent(&self) -> T {
        let mut d = T::zero();
        for j in 0..self.n_rx() {
            for m in 0..self.n_tx() {
                d = d.max(self.virtual_position(j, m).abs());
            }
        }
        d
    }
}

/// Angular coefficients `alpha^(k,j,m) = <psi'_k | A^(j,m)>`, one
/// `N_R x K` matrix per transmitter.
#[derive(Debug, Clone)]
pub struct SteeringExpansion<T> {
    pub per_tx: Vec<Array2<Cx<T>>>,
}

impl<T: Real> SteeringExpansion<T> {
    pub fn n_rx(&self) -> usize {
        self.per_tx.first().map_or(0, |a| a.nrows())
    }

    pub fn n_angle(&self) -> usize {
        self.per_tx.first().map_or(0, |a| a.ncols())
    }

    /// `sum_k alpha^(k,j,m) psi'_k(theta)`.
    pub fn reconstruct(&self, cfg: &BasisConfig<T>, j: usize, m: usize, theta: T) -> Cx<T> {
        let a = &self.per_tx[m];
        (0..a.ncols()).fold(Cx::zero(), |s, k| s + a[[j, k]] * cfg.angular_mode(k, theta))
    }

    /// Relative L2 error of the truncated expansion against the exact
    /// steering phases, pooled over all virtual elements.
    pub fn reconstruction_error(&self, array: &ArrayGeometry<T>, cfg: &BasisConfig<T>, n_eval: usize) -> T {
        let rule = cfg.angular_rule(n_eval);
        let mut num = T::zero();
        let mut den = T::zero();
        for m in 0..array.n_tx() {
            for j in 0..array.n_rx() {
                for (&th, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let exact = array.steering(j, m, th);
                    num += abs2(self.reconstruct(cfg, j, m, th) - exact) * w;
                    den += abs2(exact) * w;
                }
            }
        }
        (num / den).sqrt()
    }
}

pub fn expand_steering<T: Real>(array: &ArrayGeometry<T>, cfg: &BasisConfig<T>) -> Result<SteeringExpansion<T>> {
    cfg.validate()?;
    if array.n_tx() == 0 || array.n_rx() == 0 {
        return Err(invalid(
            "array geometry needs at least one transmit and one receive element",
        ));
    }
    let cycles = (array.max_extent() * cfg.angle_extent()).ceil().to_usize().unwrap_or(0);
    let density = cfg.default_quadrature_density().max(8 * cycles + 1);
    let rule = cfg.angular_rule(density);
    let table = cfg.angular_table(&rule.nodes);
    let per_tx = (0..array.n_tx())
        .map(|m| {
            Array2::from_shape_fn((array.n_rx(), cfg.n_angle), |(j, k)| {
                rule.nodes
                    .iter()
                    .zip(rule.weights.iter())
                    .enumerate()
                    .fold(Cx::zero(), |s, (q, (&th, &w))| {
                        s + table[[q, k]].conj() * array.steering(j, m, th) * w
                    })
            })
        })
        .collect();
    Ok(SteeringExpansion { per_tx })
}

/// Time-division multiplexed linear chirp transmitter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpWaveform<T> {
    /// Chirp duration T_Tx in seconds.
    pub chirp_duration: T,
    /// Swept bandwidth in Hz; zero gives a constant tone.
    pub bandwidth: T,
    pub carrier_freq: T,
    pub sample_rate: T,
    pub prf: T,
    pub n_tx: usize,
    /// Keep the two-way carrier phase `exp(-i w_c tau)` in the range
    /// integrand. When false it is folded into the map's phase.
    pub include_carrier: bool,
    /// Receive window per transmitter; defaults to the chirp plus the
    /// round trip to the far edge of the range domain.
    pub slot_duration: Option<T>,
}

impl<T: Real> ChirpWaveform<T> {
    fn validate(&self) -> Result<()> {
        let pos = [
            ("chirp_duration", self.chirp_duration),
            ("sample_rate", self.sample_rate),
            ("prf", self.prf),
            ("carrier_freq", self.carrier_freq),
        ];
        for (name, v) in pos {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(self.bandwidth >= T::zero()) {
            return Err(invalid("bandwidth must be non-negative"));
        }
        if self.n_tx == 0 {
            return Err(invalid("at least one transmitter is required"));
        }
        if self.sample_rate < self.bandwidth {
            return Err(invalid("sample rate below the chirp bandwidth (complex Nyquist)"));
        }
        Ok(())
    }

    /// Samples per transmitter slot for the given range domain.
    pub fn slot_samples(&self, range_domain: (T, T)) -> Result<usize> {
        self.validate()?;
        let c = T::lit(SPEED_OF_LIGHT);
        let listen = self.chirp_duration + (range_domain.1 + range_domain.1) / c;
        let slot = match self.slot_duration {
            Some(s) if s < listen => {
                return Err(invalid("slot duration shorter than chirp plus round trip"));
            }
            Some(s) => s,
            None => listen,
        };
        let n = (slot * self.sample_rate).ceil().to_usize().unwrap_or(0).max(1);
        let frame = T::from_usize_lossy(n * self.n_tx) / self.sample_rate;
        if frame > T::one() / self.prf {
            return Err(invalid(format!(
                "TDM schedule infeasible: {} slots of {} s exceed the PRI {} s",
                self.n_tx,
                T::from_usize_lossy(n) / self.sample_rate,
                T::one() / self.prf
            )));
        }
        Ok(n)
    }

    /// Baseband chirp without its rectangular window.
    #[inline]
    fn pulse_phase(&self, t: T) -> Cx<T> {
        if self.bandwidth == T::zero() {
            return Cx::new(T::one(), T::zero());
        }
        let rate = self.bandwidth / self.chirp_duration;
        let u = t - self.chirp_duration / T::lit(2.0);
        cis(T::PI() * rate * u * u)
    }

    /// Received integrand `u(t - tau(r)) [exp(-i w_c tau(r))]` at slot
    /// time `t` and range `r`, without the chirp window.
    #[inline]
    fn echo_smooth(&self, t: T, r: T) -> Cx<T> {
        let tau = (r + r) / T::lit(SPEED_OF_LIGHT);
        let p = self.pulse_phase(t - tau);
        if self.include_carrier {
            p * cis(-T::TAU() * self.carrier_freq * tau)
        } else {
            p
        }
    }

    /// Received integrand including the chirp window.
    pub fn echo(&self, t: T, r: T) -> Cx<T> {
        let tau = (r + r) / T::lit(SPEED_OF_LIGHT);
        let s = t - tau;
        if s < T::zero() || s > self.chirp_duration {
            Cx::zero()
        } else {
            self.echo_smooth(t, r)
        }
    }

    /// Range interval over which a sample at slot time `t` sees the chirp.
    fn support(&self, t: T) -> (T, T) {
        let half_c = T::lit(SPEED_OF_LIGHT) / T::lit(2.0);
        ((t - self.chirp_duration) * half_c, t * half_c)
    }

    pub(crate) fn range_cycles(&self, range_extent: T) -> T {
        let c = T::lit(SPEED_OF_LIGHT);
        let mut cyc = self.bandwidth * range_extent / c;
        if self.include_carrier {
            cyc += (self.carrier_freq + self.carrier_freq) * range_extent / c;
        }
        cyc
    }

    /// Integrates `f(node) * echo(t, node)` over the chirp's support with
    /// the clipped trapezoid on `rule`.
    pub(crate) fn integrate_echo<F>(&self, rule: &QuadratureRule<T>, t: T, mut f: F)
    where
        F: FnMut(usize, Cx<T>),
    {
        let (lo, hi) = self.support(t);
        for (q, w) in rule.clipped_weights(lo, hi) {
            f(q, self.echo_smooth(t, rule.nodes[q]) * w);
        }
    }

    /// Quadrature density in range resolving both the basis and the echo.
    pub fn range_density(&self, cfg: &BasisConfig<T>) -> usize {
        let cyc = self.range_cycles(cfg.range_extent()).ceil().to_usize().unwrap_or(0);
        cfg.default_quadrature_density().max(8 * cyc + 1)
    }
}

/// Range coefficients `beta^(l,m)(t_i) = <psi'_l | u^(m)(t_i - tau)>`, one
/// `N_s x L` matrix per transmitter.
#[derive(Debug, Clone)]
pub struct WaveformExpansion<T> {
    pub per_tx: Vec<Array2<Cx<T>>>,
    /// Row range of each transmitter's nonzero samples.
    supports: Vec<Range<usize>>,
}

impl<T: Real> WaveformExpansion<T> {
    /// Wraps explicit matrices; supports are found by scanning for nonzero rows.
    pub fn from_matrices(per_tx: Vec<Array2<Cx<T>>>) -> Self {
        let supports = per_tx
            .iter()
            .map(|b| {
                let nz = |i: &usize| b.row(*i).iter().any(|z| !z.is_zero());
                let first = (0..b.nrows()).find(nz);
                match first {
                    Some(f) => {
                        let last = (0..b.nrows()).rev().find(nz).unwrap_or(f);
                        f..last + 1
                    }
                    None => 0..0,
                }
            })
            .collect();
        Self { per_tx, supports }
    }

    pub fn n_samples(&self) -> usize {
        self.per_tx.first().map_or(0, |b| b.nrows())
    }

    pub fn n_range(&self) -> usize {
        self.per_tx.first().map_or(0, |b| b.ncols())
    }

    pub fn support(&self, m: usize) -> Range<usize> {
        self.supports[m].clone()
    }
}

/// Expands every transmitter's echo on the range basis for all sample
/// instants of one TDM frame. Transmitter `m` owns samples
/// `m * N_slot .. (m + 1) * N_slot`, starting at its own chirp onset.
pub fn expand_waveform<T: Real>(wf: &ChirpWaveform<T>, cfg: &BasisConfig<T>) -> Result<WaveformExpansion<T>> {
    cfg.validate()?;
    let slot = wf.slot_samples(cfg.range_domain)?;
    let rule = cfg.range_rule(wf.range_density(cfg));
    let conj_modes = cfg.range_table(&rule.nodes).mapv(|z| z.conj());
    let l_count = cfg.n_range;
    let mut block = Array2::<Cx<T>>::zeros((slot, l_count));
    for i in 0..slot {
        let t = T::from_usize_lossy(i) / wf.sample_rate;
        let mut row = block.row_mut(i);
        wf.integrate_echo(&rule, t, |q, v| {
            for (l, out) in row.iter_mut().enumerate() {
                *out += conj_modes[[q, l]] * v;
            }
        });
    }
    let n_s = slot * wf.n_tx;
    let mut per_tx = Vec::with_capacity(wf.n_tx);
    let mut supports = Vec::with_capacity(wf.n_tx);
    for m in 0..wf.n_tx {
        let mut b = Array2::<Cx<T>>::zeros((n_s, l_count));
        b.slice_mut(ndarray::s![m * slot..(m + 1) * slot, ..]).assign(&block);
        per_tx.push(b);
        supports.push(m * slot..(m + 1) * slot);
    }
    Ok(WaveformExpansion { per_tx, supports })
}

/// Relative L2 error of `sum_l beta_il psi'_l(r)` against the exact echo,
/// pooled over the listed sample rows of transmitter 0's slot and a range
/// grid of `n_eval` points.
pub fn waveform_reconstruction_error<T: Real>(
    wf: &ChirpWaveform<T>,
    cfg: &BasisConfig<T>,
    expansion: &WaveformExpansion<T>,
    rows: &[usize],
    n_eval: usize,
) -> T {
    let rule = cfg.range_rule(n_eval);
    let modes = cfg.range_table(&rule.nodes);
    let b = &expansion.per_tx[0];
    let mut num = T::zero();
    let mut den = T::zero();
    for &i in rows {
        let t = T::from_usize_lossy(i) / wf.sample_rate;
        for (q, (&r, &w)) in rule.nodes.iter().zip(rule.weights.iter()).enumerate() {
            let exact = wf.echo(t, r);
            let approx = (0..b.ncols()).fold(Cx::<T>::zero(), |s, l| s + b[[i, l]] * modes[[q, l]]);
            num += abs2(approx - exact) * w;
            den += abs2(exact) * w;
        }
    }
    if den > T::zero() {
        (num / den).sqrt()
    } else {
        T::zero()
    }
}

/// Linear map from conjugated coefficient vectors to stacked receiver
/// samples, with its pseudoinverse and the diagonal of the data-message
/// covariance.
#[derive(Debug, Clone)]
pub struct ForwardModel<T: Real> {
    steering: SteeringExpansion<T>,
    waveform: WaveformExpansion<T>,
    m_matrix: Array2<Cx<T>>,
    m_pinv: Array2<Cx<T>>,
    pinv_gram: Array2<Cx<T>>,
    noise_precision: T,
    msg_cov_diag: Array1<T>,
    singular_values: Vec<T>,
    rank: usize,
    warnings: Vec<String>,
}

/// `M = sum_m alpha_m (x) beta_m` with the default pseudoinverse cutoff.
pub fn assemble_forward_model<T: Real>(
    se: SteeringExpansion<T>,
    we: WaveformExpansion<T>,
    noise_precision: T,
) -> Result<ForwardModel<T>> {
    ForwardModel::assemble(se, we, noise_precision, T::lit(DEFAULT_PINV_TOL))
}

impl<T: Real> ForwardModel<T> {
    pub fn assemble(
        se: SteeringExpansion<T>,
        we: WaveformExpansion<T>,
        noise_precision: T,
        pinv_tol: T,
    ) -> Result<Self> {
        let n_tx = se.per_tx.len();
        if n_tx == 0 {
            return Err(invalid("forward model needs at least one transmitter"));
        }
        check_len("waveform transmitter count", n_tx, we.per_tx.len())?;
        let (n_rx, k_count) = se.per_tx[0].dim();
        let (n_s, l_count) = we.per_tx[0].dim();
        for a in &se.per_tx {
            if a.dim() != (n_rx, k_count) {
                return Err(invalid("steering matrices differ in shape"));
            }
        }
        for b in &we.per_tx {
            if b.dim() != (n_s, l_count) {
                return Err(invalid("waveform matrices differ in shape"));
            }
        }
        let rows = n_rx * n_s;
        let cols = k_count * l_count;
        let mut m = Array2::<Cx<T>>::zeros((rows, cols));
        for (mi, (a, b)) in se.per_tx.iter().zip(we.per_tx.iter()).enumerate() {
            let sup = we.support(mi);
            for j in 0..n_rx {
                for k in 0..k_count {
                    let ajk = a[[j, k]];
                    if ajk.is_zero() {
                        continue;
                    }
                    for i in sup.clone() {
                        let mut dst = m.slice_mut(ndarray::s![j * n_s + i, k * l_count..(k + 1) * l_count]);
                        for (d, &bv) in dst.iter_mut().zip(b.row(i).iter()) {
                            *d += ajk * bv;
                        }
                    }
                }
            }
        }
        let pinv = linalg::pseudoinverse_full(m.view(), pinv_tol)?;
        let mut warnings = Vec::new();
        if pinv.rank < cols {
            warnings.push(format!(
                "forward model rank {} below coefficient count {} at relative cutoff {}",
                pinv.rank, cols, pinv_tol
            ));
        }
        let pinv_gram = pinv.gram();
        let msg_cov_diag = message_covariance(pinv.pinv.view(), noise_precision)?;
        if let Some(j) = msg_cov_diag.iter().position(|&v| !(v > T::zero())) {
            return Err(invalid(format!(
                "coefficient {j} is not observed by the forward model (zero pseudoinverse row)"
            )));
        }
        Ok(Self {
            steering: se,
            waveform: we,
            m_matrix: m,
            m_pinv: pinv.pinv,
            pinv_gram,
            noise_precision,
            msg_cov_diag,
            singular_values: pinv.singular_values,
            rank: pinv.rank,
            warnings,
        })
    }

    pub fn m_matrix(&self) -> &Array2<Cx<T>> {
        &self.m_matrix
    }

    pub fn m_pinv(&self) -> &Array2<Cx<T>> {
        &self.m_pinv
    }

    /// `M^+ (M^+)^H`.
    pub fn pinv_gram(&self) -> &Array2<Cx<T>> {
        &self.pinv_gram
    }

    pub fn noise_precision(&self) -> T {
        self.noise_precision
    }

    /// Diagonal of `lambda_W^-1 M^+ (M^+)^H`.
    pub fn msg_cov_diag(&self) -> &Array1<T> {
        &self.msg_cov_diag
    }

    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn steering(&self) -> &SteeringExpansion<T> {
        &self.steering
    }

    pub fn waveform(&self) -> &WaveformExpansion<T> {
        &self.waveform
    }

    pub fn n_rows(&self) -> usize {
        self.m_matrix.nrows()
    }

    pub fn n_coeffs(&self) -> usize {
        self.m_matrix.ncols()
    }

    /// Replaces the noise precision and rescales the covariance diagonal.
    pub fn set_noise_precision(&mut self, noise_precision: T) -> Result<()> {
        if !(noise_precision > T::zero()) || !noise_precision.is_finite() {
            return Err(invalid("noise precision must be positive and finite"));
        }
        let scale = self.noise_precision / noise_precision;
        self.msg_cov_diag.mapv_inplace(|v| v * scale);
        self.noise_precision = noise_precision;
        Ok(())
    }

    /// Data-message precision `1 / diag(lambda_W^-1 M^+ M^+^H)` at the given
    /// noise precision.
    pub fn data_precision(&self, noise_precision: T) -> Result<Array1<T>> {
        if !(noise_precision > T::zero()) || !noise_precision.is_finite() {
            return Err(invalid("noise precision must be positive and finite"));
        }
        let scale = noise_precision / self.noise_precision;
        Ok(self.msg_cov_diag.mapv(|v| scale / v))
    }

    /// `M * gamma`, evaluated through the Kronecker factors.
    pub fn apply(&self, gamma: ArrayView1<'_, Cx<T>>) -> Result<Array1<Cx<T>>> {
        check_len("coefficient vector", self.n_coeffs(), gamma.len())?;
        let n_rx = self.steering.n_rx();
        let k_count = self.steering.n_angle();
        let l_count = self.waveform.n_range();
        let n_s = self.waveform.n_samples();
        let mut y = Array1::<Cx<T>>::zeros(n_rx * n_s);
        let mut q = vec![Cx::<T>::zero(); l_count];
        for (mi, (a, b)) in self.steering.per_tx.iter().zip(self.waveform.per_tx.iter()).enumerate() {
            let sup = self.waveform.support(mi);
            for j in 0..n_rx {
                q.iter_mut().for_each(|z| *z = Cx::zero());
                for k in 0..k_count {
                    let ajk = a[[j, k]];
                    if ajk.is_zero() {
                        continue;
                    }
                    for l in 0..l_count {
                        q[l] += ajk * gamma[k * l_count + l];
                    }
                }
                for i in sup.clone() {
                    let row = b.row(i);
                    let s = row.iter().zip(q.iter()).fold(Cx::zero(), |s, (&bv, &qv)| s + bv * qv);
                    y[j * n_s + i] += s;
                }
            }
        }
        Ok(y)
    }

    /// `M^H * y`, evaluated through the Kronecker factors.
    pub fn apply_adjoint(&self, y: ArrayView1<'_, Cx<T>>) -> Result<Array1<Cx<T>>> {
        check_len("measurement vector", self.n_rows(), y.len())?;
        let n_rx = self.steering.n_rx();
        let k_count = self.steering.n_angle();
        let l_count = self.waveform.n_range();
        let n_s = self.waveform.n_samples();
        let mut out = Array1::<Cx<T>>::zeros(k_count * l_count);
        let mut p = vec![Cx::<T>::zero(); l_count];
        for (mi, (a, b)) in self.steering.per_tx.iter().zip(self.waveform.per_tx.iter()).enumerate() {
            let sup = self.waveform.support(mi);
            for j in 0..n_rx {
                p.iter_mut().for_each(|z| *z = Cx::zero());
                for i in sup.clone() {
                    let yv = y[j * n_s + i];
                    for (pl, &bv) in p.iter_mut().zip(b.row(i).iter()) {
                        *pl += bv.conj() * yv;
                    }
                }
                for k in 0..k_count {
                    let ajk = a[[j, k]].conj();
                    if ajk.is_zero() {
                        continue;
                    }
                    for l in 0..l_count {
                        out[k * l_count + l] += ajk * p[l];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `M^+ y`, computed as `M^+ (M^+)^H M^H y`.
    pub fn pinv_apply(&self, y: ArrayView1<'_, Cx<T>>) -> Result<Array1<Cx<T>>> {
        let mhy = self.apply_adjoint(y)?;
        Ok(linalg::matvec(self.pinv_gram.view(), mhy.view()))
    }
}

/// Diagonal of `lambda_W^-1 M^+ (M^+)^H`, row by row.
pub fn message_covariance<T: Real>(m_pinv: ndarray::ArrayView2<'_, Cx<T>>, noise_precision: T) -> Result<Array1<T>> {
    if !(noise_precision > T::zero()) || !noise_precision.is_finite() {
        return Err(invalid("noise precision must be positive and finite"));
    }
    let inv = T::one() / noise_precision;
    Ok(Array1::from_iter(
        m_pinv
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&z| abs2(z)).sum::<T>() * inv),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cx;

    fn angle_cfg(k: usize, l: usize) -> BasisConfig<f64> {
        BasisConfig::new(k, l, (-0.5, 0.7), (0.0, 50.0), AngularCoordinate::Angle).unwrap()
    }

    #[test]
    fn wave_number_ordering() {
        let w: Vec<i64> = (0..7).map(wave_number).collect();
        assert_eq!(w, vec![0, 1, -1, 2, -2, 3, -3]);
    }

    #[test]
    fn dc_mode_is_normalised_constant() {
        let cfg = angle_cfg(3, 3);
        let want = 1.0 / (1.2f64 * 50.0).sqrt();
        for &(t, r) in &[(-0.5, 0.0), (0.1, 13.0), (0.7, 50.0)] {
            let v = eval_basis(0, 0, t, r, &cfg).unwrap();
            assert!((v.re - want).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn eval_rejects_bad_index_and_point() {
        let cfg = angle_cfg(2, 2);
        assert!(eval_basis(2, 0, 0.0, 1.0, &cfg).is_err());
        assert!(eval_basis(0, 5, 0.0, 1.0, &cfg).is_err());
        assert!(eval_basis(0, 0, 1.0, 1.0, &cfg).is_err());
        assert!(eval_basis(0, 0, 0.0, 51.0, &cfg).is_err());
    }

    #[test]
    fn dc_orthogonal_to_first_angular_mode() {
        let cfg = angle_cfg(2, 1);
        let ar = cfg.angular_rule(512);
        let rr = cfg.range_rule(64);
        let mut ip = Cx::<f64>::zero();
        for (&t, &wt) in ar.nodes.iter().zip(&ar.weights) {
            for (&r, &wr) in rr.nodes.iter().zip(&rr.weights) {
                let a = eval_basis(0, 0, t, r, &cfg).unwrap();
                let b = eval_basis(1, 0, t, r, &cfg).unwrap();
                ip += a.conj() * b * (wt * wr);
            }
        }
        assert!(ip.norm() < 1e-12);
    }

    #[test]
    fn mode_2_3_has_unit_norm_at_ten_times_nyquist() {
        // wave numbers -1 (angle) and 2 (range): 10x Nyquist is >= 40 nodes
        let cfg = angle_cfg(3, 4);
        let ar = cfg.angular_rule(41);
        let rr = cfg.range_rule(41);
        let mut norm = 0.0;
        for (&t, &wt) in ar.nodes.iter().zip(&ar.weights) {
            for (&r, &wr) in rr.nodes.iter().zip(&rr.weights) {
                norm += eval_basis(2, 3, t, r, &cfg).unwrap().norm_sqr() * wt * wr;
            }
        }
        assert!((norm - 1.0).abs() < 1e-12, "{norm}");
    }

    #[test]
    fn orthonormality_check() {
        let one = angle_cfg(1, 1);
        assert!(check_orthonormality(&one, 16) < 1e-14);
        let four = angle_cfg(4, 4);
        assert!(check_orthonormality(&four, 256) < 1e-6);
        assert!(check_orthonormality(&four, 3) > 0.1);
        let sine = BasisConfig::<f64>::front(4, 4, 50.0).unwrap();
        assert!(check_orthonormality(&sine, 256) < 1e-6);
    }

    #[test]
    fn clipped_weights_integrate_linear_functions_exactly() {
        let rule = QuadratureRule::<f64>::trapezoid(0.0, 10.0, 11);
        for &(lo, hi) in &[(0.0, 10.0), (2.3, 7.9), (-1.0, 0.4), (9.5, 12.0), (3.2, 3.7)] {
            let w = rule.clipped_weights(lo, hi);
            let integral: f64 = w.iter().map(|&(q, wq)| wq * (2.0 * rule.nodes[q] + 1.0)).sum();
            let (a, b) = (f64::max(lo, 0.0), f64::min(hi, 10.0));
            let exact = (b * b + b) - (a * a + a);
            assert!((integral - exact).abs() < 1e-12, "[{lo},{hi}] {integral} vs {exact}");
        }
        assert!(rule.clipped_weights(11.0, 12.0).is_empty());
    }

    #[test]
    fn colocated_elements_only_excite_dc() {
        let cfg = angle_cfg(5, 1);
        let array = ArrayGeometry {
            tx: vec![0.0],
            rx: vec![0.0],
        };
        let se = expand_steering(&array, &cfg).unwrap();
        let a = &se.per_tx[0];
        let want = 1.2f64.sqrt(); // <psi_0 | 1> = |Theta| / sqrt(|Theta|)
        assert!((a[[0, 0]].re - want).abs() < 1e-12 && a[[0, 0]].im.abs() < 1e-12);
        for k in 1..5 {
            assert!(a[[0, k]].norm() < 1e-12, "k={k}: {}", a[[0, k]]);
        }
    }

    #[test]
    fn empty_geometry_rejected() {
        let cfg = angle_cfg(2, 2);
        let array = ArrayGeometry::<f64> {
            tx: vec![],
            rx: vec![0.0],
        };
        assert!(expand_steering(&array, &cfg).is_err());
    }

    #[test]
    fn steering_truncation_error_decreases_with_k() {
        let array = ArrayGeometry::<f64>::uniform_linear(4, 4);
        for coord in [AngularCoordinate::Angle, AngularCoordinate::Sine] {
            let mut prev = f64::INFINITY;
            for k in [2, 4, 8, 16, 32] {
                let cfg = BasisConfig::new(k, 1, (-1.2, 1.2), (0.0, 50.0), coord).unwrap();
                let se = expand_steering(&array, &cfg).unwrap();
                let e = se.reconstruction_error(&array, &cfg, 4001);
                assert!(e < prev, "{coord:?} K={k}: {e} !< {prev}");
                prev = e;
            }
        }
    }

    #[test]
    fn half_wavelength_4x4_ula_is_resolved_by_16_modes() {
        let array = ArrayGeometry::<f64>::uniform_linear(4, 4);
        let cfg = BasisConfig::<f64>::front(16, 1, 50.0).unwrap();
        let se = expand_steering(&array, &cfg).unwrap();
        let e = se.reconstruction_error(&array, &cfg, 4001);
        assert!(e < 1e-2, "{e}");
    }

    fn tone(n_tx: usize) -> ChirpWaveform<f64> {
        ChirpWaveform {
            chirp_duration: 2e-6,
            bandwidth: 0.0,
            carrier_freq: 10e9,
            sample_rate: 10e6,
            prf: 1e3,
            n_tx,
            include_carrier: false,
            slot_duration: None,
        }
    }

    #[test]
    fn tone_projects_onto_dc_only() {
        let wf = tone(2);
        let cfg = BasisConfig::<f64>::front(1, 3, 50.0).unwrap();
        let we = expand_waveform(&wf, &cfg).unwrap();
        let slot = wf.slot_samples(cfg.range_domain).unwrap();
        // sample 10 = 1 us: the full 0..50 m domain lies inside the pulse
        let b = &we.per_tx[0];
        let want = 50f64.sqrt();
        assert!((b[[10, 0]].re - want).abs() < 1e-9, "{}", b[[10, 0]]);
        assert!(b[[10, 1]].norm() < 1e-9 && b[[10, 2]].norm() < 1e-9);
        // transmitter 0 is silent in transmitter 1's slot and vice versa
        for i in slot..2 * slot {
            assert!(b.row(i).iter().all(|z| z.norm() == 0.0));
        }
        for i in 0..slot {
            assert!(we.per_tx[1].row(i).iter().all(|z| z.norm() == 0.0));
        }
        assert_eq!(we.support(1), slot..2 * slot);
    }

    #[test]
    fn infeasible_tdm_schedule_rejected() {
        let mut wf = tone(4);
        wf.prf = 1e6; // 1 us PRI cannot hold four 2 us chirps
        let cfg = BasisConfig::<f64>::front(1, 1, 50.0).unwrap();
        let err = expand_waveform(&wf, &cfg).unwrap_err();
        assert!(err.to_string().contains("TDM"), "{err}");
    }

    #[test]
    fn scalar_kronecker_gives_identity() {
        let se = SteeringExpansion {
            per_tx: vec![Array2::from_elem((1, 1), cx::<f64>(1.0, 0.0))],
        };
        let eye = Array2::from_shape_fn((3, 3), |(i, j)| if i == j { cx::<f64>(1.0, 0.0) } else { cx(0.0, 0.0) });
        let we = WaveformExpansion::from_matrices(vec![eye.clone()]);
        let fm = assemble_forward_model(se, we, 1.0).unwrap();
        assert_eq!(fm.m_matrix(), &eye);
        assert!(fm.msg_cov_diag().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    fn small_random_model(seed: u64) -> (SteeringExpansion<f64>, WaveformExpansion<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r: usize, c: usize| {
            Array2::from_shape_fn((r, c), |_| cx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        };
        let se = SteeringExpansion {
            per_tx: vec![draw(2, 2), draw(2, 2)],
        };
        let we = WaveformExpansion::from_matrices(vec![draw(3, 2), draw(3, 2)]);
        (se, we)
    }

    #[test]
    fn kronecker_shape_and_brute_force_entries() {
        let (se, we) = small_random_model(4);
        let fm = assemble_forward_model(se.clone(), we.clone(), 1.0).unwrap();
        assert_eq!(fm.m_matrix().dim(), (6, 4));
        // entry (j, i), (k, l) = sum_m alpha_m[j,k] beta_m[i,l]
        for j in 0..2 {
            for i in 0..3 {
                for k in 0..2 {
                    for l in 0..2 {
                        let want = (0..2).fold(Cx::<f64>::zero(), |s, m| {
                            s + se.per_tx[m][[j, k]] * we.per_tx[m][[i, l]]
                        });
                        let got = fm.m_matrix()[[j * 3 + i, k * 2 + l]];
                        assert!((want - got).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn structured_products_match_dense() {
        let (se, we) = small_random_model(9);
        let fm = assemble_forward_model(se, we, 2.0).unwrap();
        let g = Array1::from_shape_fn(4, |i| cx::<f64>(i as f64 - 1.5, 0.5 * i as f64));
        let y = fm.apply(g.view()).unwrap();
        let dense = linalg::matvec(fm.m_matrix().view(), g.view());
        assert!(linalg::vector_norm((&y - &dense).view()) < 1e-13);
        // single nonzero coefficient picks out its column
        let mut e = Array1::<Cx<f64>>::zeros(4);
        e[2] = cx(3.0, -1.0);
        let ye = fm.apply(e.view()).unwrap();
        for r in 0..6 {
            assert!((ye[r] - fm.m_matrix()[[r, 2]] * cx(3.0, -1.0)).norm() < 1e-14);
        }
        let z = Array1::from_shape_fn(6, |i| cx::<f64>(0.3 * i as f64, 1.0 - i as f64));
        let adj = fm.apply_adjoint(z.view()).unwrap();
        let dense_adj = linalg::matvec(linalg::conj_transpose(fm.m_matrix().view()).view(), z.view());
        assert!(linalg::vector_norm((&adj - &dense_adj).view()) < 1e-13);
        let pz = fm.pinv_apply(z.view()).unwrap();
        let dense_p = linalg::matvec(fm.m_pinv().view(), z.view());
        assert!(linalg::vector_norm((&pz - &dense_p).view()) < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (se, _) = small_random_model(1);
        let we = WaveformExpansion::from_matrices(vec![Array2::<Cx<f64>>::zeros((3, 2))]);
        assert!(assemble_forward_model(se, we, 1.0).is_err());
    }

    #[test]
    fn message_covariance_paths_agree() {
        let eye = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { cx::<f64>(1.0, 0.0) } else { cx(0.0, 0.0) });
        let d = message_covariance(eye.view(), 2.0).unwrap();
        assert!(d.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(message_covariance(eye.view(), 0.0).is_err());
        assert!(message_covariance(eye.view(), -1.0).is_err());

        let (se, we) = small_random_model(2);
        let fm = assemble_forward_model(se, we, 3.0).unwrap();
        let row = message_covariance(fm.m_pinv().view(), 3.0).unwrap();
        let row4 = message_covariance(fm.m_pinv().view(), 12.0).unwrap();
        let full = linalg::matmul(fm.m_pinv().view(), linalg::conj_transpose(fm.m_pinv().view()).view());
        for j in 0..4 {
            assert!((row[j] - full[[j, j]].re / 3.0).abs() < 1e-12);
            assert!((row4[j] - row[j] / 4.0).abs() < 1e-12);
            assert!((fm.pinv_gram()[[j, j]].re / 3.0 - row[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn msg_cov_invariant_under_unit_column_phases() {
        let (se, we) = small_random_model(6);
        let fm = assemble_forward_model(se, we, 1.0).unwrap();
        let mut m2 = fm.m_matrix().clone();
        for (c, mut col) in m2.columns_mut().into_iter().enumerate() {
            let ph = cis(0.7 * c as f64 + 0.1);
            col.mapv_inplace(|z| z * ph);
        }
        let p2 = linalg::pseudoinverse(m2.view(), 1e-10).unwrap();
        let d2 = message_covariance(p2.view(), 1.0).unwrap();
        for (a, b) in d2.iter().zip(fm.msg_cov_diag().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
