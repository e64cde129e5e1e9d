//! Variational message passing over the AR(1) coefficient chain.
//!
//! All beliefs are complex Gaussians with diagonal precision, except the
//! per-component precisions of the process which carry gamma beliefs
//! (shape-rate: density proportional to `lambda^(zeta-1) exp(-xi lambda)`).

use ndarray::{Array1, ArrayView1};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::basis::ForwardModel;
use crate::error::{check_len, invalid, Error, Result};
use crate::scalar::{abs2, Cx, Real};
use crate::scene::{clamp_alpha, MeasurementFrame, ALPHA_MIN};

/// Rates below this are raised to it before inversion.
pub const XI_FLOOR: f64 = 1e-30;
/// Pooled lag-0 autocovariance below this marks a constant sequence.
pub const YW_DEGENERATE: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief<T> {
    pub mean: Array1<Cx<T>>,
    pub precision_diag: Array1<T>,
}

impl<T: Real> GaussianBelief<T> {
    pub fn new(mean: Array1<Cx<T>>, precision_diag: Array1<T>) -> Result<Self> {
        check_len("belief precision", mean.len(), precision_diag.len())?;
        if precision_diag.iter().any(|&p| !(p > T::zero()) || !p.is_finite()) {
            return Err(invalid("belief precisions must be positive and finite"));
        }
        Ok(Self { mean, precision_diag })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Diagonal covariance `1 / precision`.
    pub fn variance(&self) -> Array1<T> {
        self.precision_diag.mapv(|p| T::one() / p)
    }

    fn is_finite(&self) -> bool {
        self.mean.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.precision_diag.iter().all(|&p| p > T::zero() && p.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaBelief<T> {
    pub shape: T,
    pub rate: Array1<T>,
}

impl<T: Real> GammaBelief<T> {
    /// `E[lambda_j] = zeta / xi_j`.
    pub fn mean(&self) -> Array1<T> {
        self.rate.mapv(|r| self.shape / r)
    }
}

/// Precision of the message from the predecessor frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredecessorScaling {
    /// `E[lambda] / (1 - alpha)^2`.
    #[default]
    OneMinusAlpha,
    /// `E[lambda] / (1 - alpha^2)`, the precision of the stationary process
    /// noise, which makes the fixed point agree with exact Bayes.
    StationaryNoise,
}

#[derive(Debug, Clone)]
pub struct PosteriorState<T> {
    pub gamma_beliefs: Vec<GaussianBelief<T>>,
    pub mu_belief: GaussianBelief<T>,
    pub lambda_belief: GammaBelief<T>,
    pub alpha: T,
    pub data_messages: Vec<GaussianBelief<T>>,
    pub predecessor: PredecessorScaling,
    /// Components whose rate was floored in the last precision update.
    pub xi_floor_hits: usize,
    lambda_mean: Array1<T>,
}

impl<T: Real> PosteriorState<T> {
    /// Index of the last frame, `N`.
    pub fn last_frame(&self) -> usize {
        self.gamma_beliefs.len() - 1
    }

    pub fn n_coeffs(&self) -> usize {
        self.mu_belief.len()
    }

    /// `E[lambda]` as used by the messages of the current sweep.
    pub fn lambda_mean(&self) -> &Array1<T> {
        &self.lambda_mean
    }

    pub fn set_lambda(&mut self, belief: GammaBelief<T>) {
        self.lambda_mean = belief.mean();
        self.lambda_belief = belief;
    }

    pub fn snapshot(&self) -> PosteriorSnapshot {
        let cx = |v: &Array1<Cx<T>>| v.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect();
        let re = |v: &Array1<T>| v.iter().map(|x| x.as_f64()).collect();
        PosteriorSnapshot {
            mu_mean: cx(&self.mu_belief.mean),
            mu_variance: re(&self.mu_belief.variance()),
            lambda_mean: re(&self.lambda_mean),
            zeta: self.lambda_belief.shape.as_f64(),
            xi: re(&self.lambda_belief.rate),
            alpha: self.alpha.as_f64(),
            gamma_means: self.gamma_beliefs.iter().map(|b| cx(&b.mean)).collect(),
        }
    }
}

/// Posterior summary in plain numbers; complex entries are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub mu_mean: Vec<[f64; 2]>,
    pub mu_variance: Vec<f64>,
    pub lambda_mean: Vec<f64>,
    pub zeta: f64,
    pub xi: Vec<f64>,
    pub alpha: f64,
    pub gamma_means: Vec<Vec<[f64; 2]>>,
}

/// Data message: mean `M^+ y`, precision `1 / diag(lambda_W^-1 M^+ M^+^H)`.
pub fn msg_data_to_gamma<T: Real>(y: &MeasurementFrame<T>, fm: &ForwardModel<T>) -> Result<GaussianBelief<T>> {
    let mean = fm.pinv_apply(y.y.view())?;
    let precision = fm.msg_cov_diag().mapv(|v| T::one() / v);
    GaussianBelief::new(mean, precision)
}

/// [`msg_data_to_gamma`] at an explicit noise precision, leaving the
/// model's own precision untouched.
pub fn msg_data_to_gamma_at<T: Real>(
    y: &MeasurementFrame<T>,
    fm: &ForwardModel<T>,
    noise_precision: T,
) -> Result<GaussianBelief<T>> {
    let precision = fm.data_precision(noise_precision)?;
    let mean = fm.pinv_apply(y.y.view())?;
    GaussianBelief::new(mean, precision)
}

/// Message from `Gamma_{n-1}`: mean `mu + alpha (prev - mu)`, precision
/// `E[lambda] / (1 - alpha)^2`.
pub fn msg_prev_to_current<T: Real>(
    prev: &GaussianBelief<T>,
    mu: &GaussianBelief<T>,
    lambda_mean: ArrayView1<'_, T>,
    alpha: T,
) -> GaussianBelief<T> {
    msg_prev_to_current_scaled(prev, mu, lambda_mean, alpha, PredecessorScaling::OneMinusAlpha)
}

pub fn msg_prev_to_current_scaled<T: Real>(
    prev: &GaussianBelief<T>,
    mu: &GaussianBelief<T>,
    lambda_mean: ArrayView1<'_, T>,
    alpha: T,
    scaling: PredecessorScaling,
) -> GaussianBelief<T> {
    let a = clamp_alpha(alpha);
    let one = T::one();
    let denom = match scaling {
        PredecessorScaling::OneMinusAlpha => (one - a) * (one - a),
        PredecessorScaling::StationaryNoise => one - a * a,
    };
    let mean = Array1::from_shape_fn(prev.len(), |j| mu.mean[j] + (prev.mean[j] - mu.mean[j]) * a);
    let precision = lambda_mean.mapv(|l| l / denom);
    GaussianBelief {
        mean,
        precision_diag: precision,
    }
}

/// Message from `Gamma_{n+1}`: mean `mu + (next - mu) / alpha`, precision
/// `E[lambda] alpha^2 / (1 - alpha^2)`.
pub fn msg_next_to_current<T: Real>(
    next: &GaussianBelief<T>,
    mu: &GaussianBelief<T>,
    lambda_mean: ArrayView1<'_, T>,
    alpha: T,
) -> GaussianBelief<T> {
    let a = clamp_alpha(alpha);
    let inv = T::one() / a;
    let mean = Array1::from_shape_fn(next.len(), |j| mu.mean[j] + (next.mean[j] - mu.mean[j]) * inv);
    let s = a * a / (T::one() - a * a);
    let precision = lambda_mean.mapv(|l| l * s);
    GaussianBelief {
        mean,
        precision_diag: precision,
    }
}

/// Message from the stationary prior: mean `mu`, precision `E[lambda]`.
pub fn msg_prior_to_gamma<T: Real>(mu: &GaussianBelief<T>, lambda_mean: ArrayView1<'_, T>) -> GaussianBelief<T> {
    GaussianBelief {
        mean: mu.mean.clone(),
        precision_diag: lambda_mean.to_owned(),
    }
}

/// Product of Gaussian messages: precisions add, means are
/// precision-weighted.
pub fn combine_gaussians<T: Real>(messages: &[GaussianBelief<T>]) -> Result<GaussianBelief<T>> {
    let first = messages
        .first()
        .ok_or_else(|| invalid("cannot combine an empty message list"))?;
    let n = first.len();
    for m in messages {
        check_len("message length", n, m.len())?;
    }
    let mut prec = Array1::<T>::zeros(n);
    let mut acc = Array1::<Cx<T>>::zeros(n);
    for m in messages {
        for j in 0..n {
            let p = m.precision_diag[j];
            prec[j] += p;
            acc[j] += m.mean[j] * p;
        }
    }
    let mean = Array1::from_shape_fn(n, |j| acc[j] / prec[j]);
    Ok(GaussianBelief {
        mean,
        precision_diag: prec,
    })
}

/// Messages reaching `q(Gamma_n)` in the order data, predecessor,
/// successor, prior. Boundary frames omit the missing neighbour.
pub fn gamma_messages<T: Real>(n: usize, state: &PosteriorState<T>) -> Result<Vec<GaussianBelief<T>>> {
    let last = state.last_frame();
    if n > last {
        return Err(invalid(format!("frame index {n} beyond last frame {last}")));
    }
    let lm = state.lambda_mean.view();
    let mu = &state.mu_belief;
    let mut msgs = Vec::with_capacity(4);
    msgs.push(state.data_messages[n].clone());
    if n > 0 {
        msgs.push(msg_prev_to_current_scaled(
            &state.gamma_beliefs[n - 1],
            mu,
            lm,
            state.alpha,
            state.predecessor,
        ));
    }
    if n < last {
        msgs.push(msg_next_to_current(&state.gamma_beliefs[n + 1], mu, lm, state.alpha));
    }
    msgs.push(msg_prior_to_gamma(mu, lm));
    Ok(msgs)
}

/// New `q(Gamma_n)` from the current neighbours.
pub fn update_gamma<T: Real>(n: usize, state: &PosteriorState<T>) -> Result<GaussianBelief<T>> {
    combine_gaussians(&gamma_messages(n, state)?)
}

/// Allocation-free form of [`update_gamma`] with the same operation order,
/// so both give bit-identical beliefs.
fn update_gamma_in_place<T: Real>(n: usize, st: &mut PosteriorState<T>) {
    let last = st.last_frame();
    let a = clamp_alpha(st.alpha);
    let one = T::one();
    let prev_denom = match st.predecessor {
        PredecessorScaling::OneMinusAlpha => (one - a) * (one - a),
        PredecessorScaling::StationaryNoise => one - a * a,
    };
    let inv = one / a;
    let next_scale = a * a / (one - a * a);
    let (head, tail) = st.gamma_beliefs.split_at_mut(n);
    let (cur, after) = tail.split_first_mut().expect("frame index in range");
    let prev = if n > 0 { head.last() } else { None };
    let next = if n < last { after.first() } else { None };
    let data = &st.data_messages[n];
    let mu = &st.mu_belief.mean;
    let lm = &st.lambda_mean;
    for j in 0..cur.len() {
        let mut prec = T::zero();
        let mut acc = Cx::<T>::zero();
        let p = data.precision_diag[j];
        prec += p;
        acc += data.mean[j] * p;
        if let Some(b) = prev {
            let p = lm[j] / prev_denom;
            prec += p;
            acc += (mu[j] + (b.mean[j] - mu[j]) * a) * p;
        }
        if let Some(b) = next {
            let p = lm[j] * next_scale;
            prec += p;
            acc += (mu[j] + (b.mean[j] - mu[j]) * inv) * p;
        }
        let p = lm[j];
        prec += p;
        acc += mu[j] * p;
        cur.mean[j] = acc / prec;
        cur.precision_diag[j] = prec;
    }
}

/// `kappa = N + 1 + N (1 - alpha)^2 / (1 - alpha^2)`.
pub fn mu_kappa<T: Real>(n_last: usize, alpha: T) -> T {
    let a = clamp_alpha(alpha);
    let one = T::one();
    let n = T::from_usize_lossy(n_last);
    n + one + n * (one - a) * (one - a) / (one - a * a)
}

/// Closed-form `q(mu)`.
pub fn update_mu<T: Real>(state: &PosteriorState<T>) -> GaussianBelief<T> {
    let a = clamp_alpha(state.alpha);
    let one = T::one();
    let last = state.last_frame();
    let kappa = mu_kappa(last, a);
    let c = (one - a) / (one - a * a);
    let g = &state.gamma_beliefs;
    let n = state.n_coeffs();
    let mut sum = Array1::<Cx<T>>::zeros(n);
    for b in g {
        sum += &b.mean;
    }
    for t in 1..=last {
        for j in 0..n {
            sum[j] += (g[t].mean[j] - g[t - 1].mean[j] * a) * c;
        }
    }
    let inv = one / kappa;
    GaussianBelief {
        mean: sum.mapv(|z| z * inv),
        precision_diag: state.lambda_mean.mapv(|l| l * kappa),
    }
}

/// `V_j = |Gamma_n - mu|^2 + var(Gamma_n) + var(mu)`.
pub fn compute_v<T: Real>(n: usize, state: &PosteriorState<T>) -> Result<Array1<T>> {
    let g = state
        .gamma_beliefs
        .get(n)
        .ok_or_else(|| invalid(format!("frame index {n} out of range")))?;
    let mu = &state.mu_belief;
    Ok(Array1::from_shape_fn(mu.len(), |j| {
        abs2(g.mean[j] - mu.mean[j]) + T::one() / g.precision_diag[j] + T::one() / mu.precision_diag[j]
    }))
}

/// `W_j = [|Gamma_n - alpha Gamma_{n-1} - (1-alpha) mu|^2 + var_n
/// + alpha^2 var_{n-1} + (1-alpha)^2 var_mu] / (1 - alpha^2)` for `n >= 1`.
pub fn compute_w<T: Real>(n: usize, state: &PosteriorState<T>) -> Result<Array1<T>> {
    if n == 0 || n > state.last_frame() {
        return Err(invalid(format!("transition term needs 1 <= n <= N, got {n}")));
    }
    let a = clamp_alpha(state.alpha);
    let one = T::one();
    let b = one - a;
    let cur = &state.gamma_beliefs[n];
    let prev = &state.gamma_beliefs[n - 1];
    let mu = &state.mu_belief;
    let denom = one - a * a;
    Ok(Array1::from_shape_fn(mu.len(), |j| {
        let r = cur.mean[j] - prev.mean[j] * a - mu.mean[j] * b;
        (abs2(r) + one / cur.precision_diag[j] + a * a / prev.precision_diag[j] + b * b / mu.precision_diag[j]) / denom
    }))
}

/// Applies the rate floor: exact zeros or non-finite values are errors,
/// tiny positive rates are raised to [`XI_FLOOR`]. Returns the hit count.
fn floor_rates<T: Real>(xi: &mut Array1<T>) -> Result<usize> {
    let floor = T::lit(XI_FLOOR);
    let mut hits = 0;
    for (j, x) in xi.iter_mut().enumerate() {
        if !(*x > T::zero()) || !x.is_finite() {
            return Err(Error::Degenerate(format!(
                "precision posterior rate for component {j} is {x}; the data carry no spread"
            )));
        }
        if *x < floor {
            *x = floor;
            hits += 1;
        }
    }
    Ok(hits)
}

/// Closed-form `q(Lambda)`: shape `2N + 2`, rates `sum V + sum W`.
/// Returns the belief and the number of floored rates.
pub fn update_lambda<T: Real>(state: &PosteriorState<T>) -> Result<(GammaBelief<T>, usize)> {
    let last = state.last_frame();
    let mut xi = Array1::<T>::zeros(state.n_coeffs());
    for n in 0..=last {
        xi += &compute_v(n, state)?;
    }
    for n in 1..=last {
        xi += &compute_w(n, state)?;
    }
    let hits = floor_rates(&mut xi)?;
    Ok((
        GammaBelief {
            shape: gamma_shape(last),
            rate: xi,
        },
        hits,
    ))
}

/// `zeta = 2N + 2`.
#[inline]
pub fn gamma_shape<T: Real>(n_last: usize) -> T {
    T::from_usize_lossy(2 * n_last + 2)
}

/// Pooled lag-1 over lag-0 autocovariance of the per-component
/// mean-removed sequences, clamped to the AR bounds.
pub fn estimate_alpha_yule_walker<T: Real>(means: &[Array1<Cx<T>>]) -> Result<T> {
    if means.len() < 2 {
        return Err(invalid("Yule-Walker needs at least two frames"));
    }
    let n = means[0].len();
    for m in means {
        check_len("sequence element", n, m.len())?;
    }
    let inv = T::one() / T::from_usize_lossy(means.len());
    let centre = Array1::from_shape_fn(n, |j| means.iter().fold(Cx::<T>::zero(), |s, m| s + m[j]) * inv);
    estimate_alpha_yule_walker_about(means, centre.view())
}

/// As [`estimate_alpha_yule_walker`] with a known centre instead of the
/// sample mean.
pub fn estimate_alpha_yule_walker_about<T: Real>(means: &[Array1<Cx<T>>], centre: ArrayView1<'_, Cx<T>>) -> Result<T> {
    if means.len() < 2 {
        return Err(invalid("Yule-Walker needs at least two frames"));
    }
    let n = centre.len();
    let mut c0 = T::zero();
    let mut c1 = Cx::<T>::zero();
    for (t, m) in means.iter().enumerate() {
        check_len("sequence element", n, m.len())?;
        for j in 0..n {
            let x = m[j] - centre[j];
            c0 += abs2(x);
            if t > 0 {
                c1 += x * (means[t - 1][j] - centre[j]).conj();
            }
        }
    }
    if !(c0 >= T::lit(YW_DEGENERATE)) {
        return Err(Error::Degenerate(
            "constant sequence: pooled lag-0 autocovariance vanishes".into(),
        ));
    }
    Ok(clamp_alpha(c1.re / c0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOptions<T> {
    pub n_iters: usize,
    /// Re-estimate alpha at the end of every sweep.
    pub update_alpha: bool,
    pub predecessor: PredecessorScaling,
    /// Use this alpha instead of the Yule-Walker initial estimate.
    pub fixed_alpha: Option<T>,
    /// Hold `E[lambda]` at these values and skip the precision update.
    pub fixed_lambda: Option<Array1<T>>,
}

impl<T: Real> Default for InferenceOptions<T> {
    fn default() -> Self {
        Self {
            n_iters: 150,
            update_alpha: false,
            predecessor: PredecessorScaling::OneMinusAlpha,
            fixed_alpha: None,
            fixed_lambda: None,
        }
    }
}

/// Initial state from per-frame data messages: `q(Gamma_n)` equal to the
/// data messages, `mu` at their sample mean, rates without the `var(mu)`
/// term and alpha by Yule-Walker on the data means.
pub fn initialize_from_messages<T: Real>(
    data_messages: Vec<GaussianBelief<T>>,
    opts: &InferenceOptions<T>,
) -> Result<PosteriorState<T>> {
    let first = data_messages
        .first()
        .ok_or_else(|| invalid("inference needs at least one frame"))?;
    let n = first.len();
    for m in &data_messages {
        check_len("data message length", n, m.len())?;
    }
    let last = data_messages.len() - 1;
    let inv = T::one() / T::from_usize_lossy(data_messages.len());
    let mu_mean = Array1::from_shape_fn(n, |j| {
        data_messages.iter().fold(Cx::<T>::zero(), |s, m| s + m.mean[j]) * inv
    });
    let zeta: T = gamma_shape(last);
    let lambda_belief = match &opts.fixed_lambda {
        Some(l) => {
            check_len("fixed precision", n, l.len())?;
            GammaBelief {
                shape: zeta,
                rate: l.mapv(|v| zeta / v),
            }
        }
        None => {
            let mut xi = Array1::<T>::zeros(n);
            for m in &data_messages {
                for j in 0..n {
                    xi[j] += abs2(m.mean[j] - mu_mean[j]) + T::one() / m.precision_diag[j];
                }
            }
            floor_rates(&mut xi)?;
            GammaBelief { shape: zeta, rate: xi }
        }
    };
    let alpha = match opts.fixed_alpha {
        Some(a) => clamp_alpha(a),
        None if last >= 1 => {
            let means: Vec<Array1<Cx<T>>> = data_messages.iter().map(|m| m.mean.clone()).collect();
            match estimate_alpha_yule_walker(&means) {
                Ok(a) => a,
                Err(Error::Degenerate(_)) => T::lit(ALPHA_MIN),
                Err(e) => return Err(e),
            }
        }
        None => T::lit(ALPHA_MIN),
    };
    let lambda_mean = lambda_belief.mean();
    let kappa = mu_kappa(last, alpha);
    let mu_belief = GaussianBelief {
        mean: mu_mean,
        precision_diag: lambda_mean.mapv(|l| l * kappa),
    };
    Ok(PosteriorState {
        gamma_beliefs: data_messages.clone(),
        mu_belief,
        lambda_belief,
        alpha,
        data_messages,
        predecessor: opts.predecessor,
        xi_floor_hits: 0,
        lambda_mean,
    })
}

pub fn initialize<T: Real>(frames: &[MeasurementFrame<T>], fm: &ForwardModel<T>) -> Result<PosteriorState<T>> {
    initialize_with(frames, fm, &InferenceOptions::default())
}

pub fn initialize_with<T: Real>(
    frames: &[MeasurementFrame<T>],
    fm: &ForwardModel<T>,
    opts: &InferenceOptions<T>,
) -> Result<PosteriorState<T>> {
    if frames.is_empty() {
        return Err(invalid("inference needs at least one frame"));
    }
    let msgs = frames
        .iter()
        .map(|f| msg_data_to_gamma(f, fm))
        .collect::<Result<Vec<_>>>()?;
    initialize_from_messages(msgs, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub delta_mu: f64,
    pub delta_lambda: f64,
    pub alpha: f64,
    pub xi_floor_hits: usize,
}

/// Runs sweeps on an owned state.
#[derive(Debug, Clone)]
pub struct Engine<T> {
    state: PosteriorState<T>,
    opts: InferenceOptions<T>,
    diagnostics: Vec<IterationDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub state: PosteriorState<T>,
    pub diagnostics: Vec<IterationDiagnostics>,
}

impl<T: Real> Engine<T> {
    pub fn new(state: PosteriorState<T>, opts: InferenceOptions<T>) -> Self {
        Self {
            state,
            opts,
            diagnostics: Vec::new(),
        }
    }

    pub fn state(&self) -> &PosteriorState<T> {
        &self.state
    }

    pub fn diagnostics(&self) -> &[IterationDiagnostics] {
        &self.diagnostics
    }

    /// One sweep: `q(Gamma_0) .. q(Gamma_N)` in order, then `q(mu)`, then
    /// `q(Lambda)`, then optionally alpha.
    pub fn sweep(&mut self) -> Result<IterationDiagnostics> {
        let iteration = self.diagnostics.len() + 1;
        let st = &mut self.state;
        for n in 0..=st.last_frame() {
            update_gamma_in_place(n, st);
            if !st.gamma_beliefs[n].is_finite() {
                return Err(Error::NonFinite {
                    what: format!("q(Gamma_{n})"),
                    iteration,
                });
            }
        }
        let mu = update_mu(st);
        if !mu.is_finite() {
            return Err(Error::NonFinite {
                what: "q(mu)".into(),
                iteration,
            });
        }
        let delta_mu = diff_norm_cx(&mu.mean, &st.mu_belief.mean);
        st.mu_belief = mu;

        let old_lambda = st.lambda_mean.clone();
        if self.opts.fixed_lambda.is_none() {
            let (lb, hits) = update_lambda(st).map_err(|e| match e {
                Error::Degenerate(m) => Error::Degenerate(format!("{m} (iteration {iteration})")),
                other => other,
            })?;
            st.xi_floor_hits = hits;
            st.set_lambda(lb);
            if st.lambda_mean.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFinite {
                    what: "E[lambda]".into(),
                    iteration,
                });
            }
        }
        let delta_lambda = old_lambda
            .iter()
            .zip(st.lambda_mean.iter())
            .map(|(&a, &b)| ((a - b) * (a - b)).as_f64())
            .sum::<f64>()
            .sqrt();

        if self.opts.update_alpha && st.last_frame() >= 1 {
            let means: Vec<Array1<Cx<T>>> = st.gamma_beliefs.iter().map(|b| b.mean.clone()).collect();
            st.alpha = estimate_alpha_yule_walker(&means)?;
        }
        let d = IterationDiagnostics {
            iteration,
            delta_mu,
            delta_lambda,
            alpha: st.alpha.as_f64(),
            xi_floor_hits: st.xi_floor_hits,
        };
        self.diagnostics.push(d);
        Ok(d)
    }

    pub fn run(&mut self, n_iters: usize) -> Result<()> {
        for _ in 0..n_iters {
            self.sweep()?;
        }
        Ok(())
    }

    pub fn finish(self) -> RunResult<T> {
        RunResult {
            state: self.state,
            diagnostics: self.diagnostics,
        }
    }
}

fn diff_norm_cx<T: Real>(a: &Array1<Cx<T>>, b: &Array1<Cx<T>>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| abs2(x - y).as_f64())
        .sum::<f64>()
        .sqrt()
}

/// Initialises from the frames and runs `n_iters` sweeps.
pub fn run<T: Real>(
    frames: &[MeasurementFrame<T>],
    fm: &ForwardModel<T>,
    n_iters: usize,
    update_alpha: bool,
) -> Result<RunResult<T>> {
    let opts = InferenceOptions {
        n_iters,
        update_alpha,
        ..InferenceOptions::default()
    };
    run_with(frames, fm, &opts)
}

pub fn run_with<T: Real>(
    frames: &[MeasurementFrame<T>],
    fm: &ForwardModel<T>,
    opts: &InferenceOptions<T>,
) -> Result<RunResult<T>> {
    let state = initialize_with(frames, fm, opts)?;
    run_from_state(state, opts)
}

pub fn run_from_state<T: Real>(state: PosteriorState<T>, opts: &InferenceOptions<T>) -> Result<RunResult<T>> {
    let mut engine = Engine::new(state, opts.clone());
    engine.run(opts.n_iters)?;
    Ok(engine.finish())
}
