//! Experiment configuration: TOML schema, defaults, validation and the
//! resolved-config hash.

use std::fmt::Write as _;
use std::path::Path;

use clutter_core::basis::{AngularCoordinate, ArrayGeometry, BasisConfig, ChirpWaveform};
use clutter_core::inference::PredecessorScaling;
use clutter_core::scene::{FenceLayout, RadarConfig, Scatterer};
use clutter_core::Cx;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },
}

fn bad(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub radar: RadarSection,
    #[serde(default)]
    pub basis: BasisSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub inference: InferenceSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub seeds: SeedSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub probe: ProbeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    /// Pulse repetition frequency, Hz.
    pub prf: f64,
    pub carrier_freq: f64,
    pub bandwidth: f64,
    /// Chirp duration, seconds.
    pub chirp_duration: f64,
    pub sample_rate: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub r_max: f64,
    /// System amplitude gain; only unit gain is modelled.
    pub gain: f64,
    pub include_carrier: bool,
    /// Receive window per transmitter, seconds. Defaults to the chirp plus
    /// the round trip to `r_max`.
    pub slot_duration: Option<f64>,
    /// Element positions in wavelengths; default is a filled virtual ULA.
    pub tx_positions: Option<Vec<f64>>,
    pub rx_positions: Option<Vec<f64>>,
}

impl Default for RadarSection {
    fn default() -> Self {
        Self {
            prf: 10.0,
            carrier_freq: 10e9,
            bandwidth: 20e6,
            chirp_duration: 16e-6,
            sample_rate: 256e6,
            n_tx: 4,
            n_rx: 4,
            r_max: 50.0,
            gain: 1.0,
            include_carrier: false,
            slot_duration: None,
            tx_positions: None,
            rx_positions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    pub n_angle: usize,
    pub n_range: usize,
    pub angular_coordinate: AngularCoordinate,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            n_angle: 6,
            n_range: 6,
            angular_coordinate: AngularCoordinate::Sine,
            theta_min: -std::f64::consts::FRAC_PI_2,
            theta_max: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub a: Option<ScenarioA>,
    pub b: Option<ScenarioB>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioA {
    pub alpha: f64,
    /// Ground-truth precisions are log-uniform on this interval.
    pub precision_min: f64,
    pub precision_max: f64,
    /// SNR values of the `sweep` verb; defaults to `noise.snr_db`.
    pub snr_list: Option<Vec<f64>>,
}

impl Default for ScenarioA {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            precision_min: 0.5,
            precision_max: 5.0,
            snr_list: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererEntry {
    pub theta: f64,
    pub range: f64,
    /// `[re, im]`.
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioB {
    pub alpha: f64,
    /// Process precision of every coefficient.
    pub precision: f64,
    pub snr_list: Vec<f64>,
    /// Square basis sizes `K = L` of the coefficient-count sweep.
    pub coeff_counts: Vec<usize>,
    /// Resolution of the reference map (modes and grid points per axis).
    pub truth_grid: usize,
    pub fence: FenceSection,
    /// Explicit scatterers; when non-empty they replace the fence.
    pub scatterers: Vec<ScattererEntry>,
}

impl Default for ScenarioB {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            precision: 3.0,
            snr_list: vec![6.0, 0.0, -6.0],
            coeff_counts: vec![2, 4, 6, 8, 10, 12],
            truth_grid: 64,
            fence: FenceSection::default(),
            scatterers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FenceSection {
    pub half_width: f64,
    pub near: f64,
    pub far: f64,
    pub n_posts: usize,
    pub amplitude: f64,
}

impl Default for FenceSection {
    fn default() -> Self {
        let f = FenceLayout::<f64>::for_range(50.0, 24);
        Self {
            half_width: f.half_width,
            near: f.near,
            far: f.far,
            n_posts: f.n_posts,
            amplitude: f.amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSection {
    /// Index of the last frame; `n + 1` frames are simulated.
    pub n: usize,
    pub iterations: usize,
    pub update_alpha: bool,
    pub pinv_tol: f64,
    pub predecessor: PredecessorScaling,
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self {
            n: 99,
            iterations: 150,
            update_alpha: false,
            pinv_tol: 1e-10,
            predecessor: PredecessorScaling::OneMinusAlpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub snr_db: f64,
    /// Explicit receiver noise precision; overrides `snr_db` when set.
    pub noise_precision: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            snr_db: 0.0,
            noise_precision: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    pub root: u64,
    pub replicates: usize,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self {
            root: 1,
            replicates: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Write large complex arrays in the binary container.
    pub binary: bool,
    /// Fill the `runtime_s` column; this makes outputs run-dependent.
    pub record_timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            binary: true,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub n_angle: usize,
    pub n_range: usize,
    /// Frame count of the base case.
    pub frames: usize,
    pub sweeps: usize,
    /// `[frame multiplier, coefficient multiplier]` pairs; the first is the
    /// reference for ratios.
    pub factors: Vec<[usize; 2]>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            n_angle: 8,
            n_range: 8,
            frames: 100,
            sweeps: 15,
            factors: vec![[1, 1], [2, 1], [1, 2]],
        }
    }
}

/// CLI overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub out: Option<String>,
    pub update_alpha: bool,
    pub iters: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.seeds.root = s;
        }
        if let Some(r) = o.replicates {
            self.seeds.replicates = r;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if o.update_alpha {
            self.inference.update_alpha = true;
        }
        if let Some(i) = o.iters {
            self.inference.iterations = i;
        }
        self.validate()
    }

    fn fill_defaults(&mut self) {
        match self.scenario.kind {
            ScenarioKind::A if self.scenario.a.is_none() => self.scenario.a = Some(ScenarioA::default()),
            ScenarioKind::B if self.scenario.b.is_none() => self.scenario.b = Some(ScenarioB::default()),
            _ => {}
        }
        if self.radar.tx_positions.is_none() || self.radar.rx_positions.is_none() {
            let g = ArrayGeometry::<f64>::uniform_linear(self.radar.n_tx, self.radar.n_rx);
            self.radar.tx_positions.get_or_insert(g.tx);
            self.radar.rx_positions.get_or_insert(g.rx);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.radar;
        for (key, v) in [
            ("radar.prf", r.prf),
            ("radar.carrier_freq", r.carrier_freq),
            ("radar.chirp_duration", r.chirp_duration),
            ("radar.sample_rate", r.sample_rate),
            ("radar.r_max", r.r_max),
        ] {
            positive(key, v)?;
        }
        if !(r.bandwidth >= 0.0) || !r.bandwidth.is_finite() {
            return Err(bad("radar.bandwidth", "must be non-negative"));
        }
        if r.gain != 1.0 {
            return Err(bad("radar.gain", "only unit gain (1.0) is modelled"));
        }
        if r.n_tx == 0 || r.n_rx == 0 {
            return Err(bad("radar.n_tx", "need at least one transmitter and one receiver"));
        }
        if r.chirp_duration * r.n_tx as f64 > 1.0 / r.prf {
            return Err(bad(
                "radar.prf",
                format!(
                    "TDM schedule infeasible: n_tx * chirp_duration = {} s exceeds 1/prf = {} s",
                    r.chirp_duration * r.n_tx as f64,
                    1.0 / r.prf
                ),
            ));
        }
        if let Some(p) = &r.tx_positions {
            if p.len() != r.n_tx {
                return Err(bad("radar.tx_positions", "length must equal n_tx"));
            }
        }
        if let Some(p) = &r.rx_positions {
            if p.len() != r.n_rx {
                return Err(bad("radar.rx_positions", "length must equal n_rx"));
            }
        }
        if let Some(s) = r.slot_duration {
            positive("radar.slot_duration", s)?;
        }
        self.waveform()
            .slot_samples((0.0, r.r_max))
            .map_err(|e| bad("radar", e.to_string()))?;

        let b = &self.basis;
        if b.n_angle == 0 || b.n_range == 0 {
            return Err(bad("basis.n_angle", "basis sizes must be at least 1"));
        }
        self.basis_config().map_err(|e| bad("basis", e.to_string()))?;

        match self.scenario.kind {
            ScenarioKind::A => {
                if self.scenario.b.is_some() {
                    return Err(bad("scenario.b", "block given for scenario kind A"));
                }
                if let Some(a) = &self.scenario.a {
                    alpha_ok("scenario.a.alpha", a.alpha)?;
                    positive("scenario.a.precision_min", a.precision_min)?;
                    if !(a.precision_max >= a.precision_min) || !a.precision_max.is_finite() {
                        return Err(bad("scenario.a.precision_max", "must be finite and >= precision_min"));
                    }
                    if let Some(l) = &a.snr_list {
                        finite_list("scenario.a.snr_list", l)?;
                    }
                }
            }
            ScenarioKind::B => {
                if self.scenario.a.is_some() {
                    return Err(bad("scenario.a", "block given for scenario kind B"));
                }
                if let Some(s) = &self.scenario.b {
                    alpha_ok("scenario.b.alpha", s.alpha)?;
                    positive("scenario.b.precision", s.precision)?;
                    finite_list("scenario.b.snr_list", &s.snr_list)?;
                    if s.coeff_counts.is_empty() || s.coeff_counts.contains(&0) {
                        return Err(bad(
                            "scenario.b.coeff_counts",
                            "need a non-empty list of positive sizes",
                        ));
                    }
                    if s.truth_grid < 2 {
                        return Err(bad("scenario.b.truth_grid", "must be at least 2"));
                    }
                    let largest = s
                        .coeff_counts
                        .iter()
                        .copied()
                        .max()
                        .unwrap_or(0)
                        .max(b.n_angle)
                        .max(b.n_range);
                    if s.truth_grid < largest {
                        return Err(bad("scenario.b.truth_grid", "must be at least the largest basis size"));
                    }
                    if s.scatterers.is_empty() {
                        self.fence()
                            .scatterers(&self.basis_config().expect("validated"))
                            .map_err(|e| bad("scenario.b.fence", e.to_string()))?;
                    }
                }
            }
        }

        let inf = &self.inference;
        if !(inf.pinv_tol >= 0.0) || !inf.pinv_tol.is_finite() {
            return Err(bad("inference.pinv_tol", "must be a finite non-negative number"));
        }
        if !self.noise.snr_db.is_finite() {
            return Err(bad("noise.snr_db", "must be finite"));
        }
        if let Some(p) = self.noise.noise_precision {
            positive("noise.noise_precision", p)?;
        }
        if self.seeds.replicates == 0 {
            return Err(bad("seeds.replicates", "must be at least 1"));
        }
        let p = &self.probe;
        if p.n_angle == 0 || p.n_range == 0 || p.frames == 0 {
            return Err(bad("probe", "sizes and frame count must be positive"));
        }
        if p.sweeps < 5 {
            return Err(bad("probe.sweeps", "at least five timed sweeps are needed"));
        }
        if p.factors.is_empty() || p.factors.iter().any(|f| f[0] == 0 || f[1] == 0) {
            return Err(bad("probe.factors", "need a non-empty list of factors >= 1"));
        }
        Ok(())
    }

    pub fn waveform(&self) -> ChirpWaveform<f64> {
        let r = &self.radar;
        ChirpWaveform {
            chirp_duration: r.chirp_duration,
            bandwidth: r.bandwidth,
            carrier_freq: r.carrier_freq,
            sample_rate: r.sample_rate,
            prf: r.prf,
            n_tx: r.n_tx,
            include_carrier: r.include_carrier,
            slot_duration: r.slot_duration,
        }
    }

    pub fn radar_config(&self) -> RadarConfig<f64> {
        let r = &self.radar;
        let default = ArrayGeometry::uniform_linear(r.n_tx, r.n_rx);
        RadarConfig {
            array: ArrayGeometry {
                tx: r.tx_positions.clone().unwrap_or(default.tx),
                rx: r.rx_positions.clone().unwrap_or(default.rx),
            },
            waveform: self.waveform(),
        }
    }

    pub fn basis_config(&self) -> clutter_core::Result<BasisConfig<f64>> {
        self.basis_config_sized(self.basis.n_angle, self.basis.n_range)
    }

    pub fn basis_config_sized(&self, n_angle: usize, n_range: usize) -> clutter_core::Result<BasisConfig<f64>> {
        BasisConfig::new(
            n_angle,
            n_range,
            (self.basis.theta_min, self.basis.theta_max),
            (0.0, self.radar.r_max),
            self.basis.angular_coordinate,
        )
    }

    pub fn scenario_a(&self) -> Option<&ScenarioA> {
        self.scenario.a.as_ref()
    }

    pub fn scenario_b(&self) -> Option<&ScenarioB> {
        self.scenario.b.as_ref()
    }

    pub fn fence(&self) -> FenceLayout<f64> {
        let f = self.scenario.b.as_ref().map(|b| b.fence.clone()).unwrap_or_default();
        FenceLayout {
            half_width: f.half_width,
            near: f.near,
            far: f.far,
            n_posts: f.n_posts,
            amplitude: f.amplitude,
        }
    }

    /// Scenario B scatterers: the explicit list if given, else the fence.
    pub fn scatterers(&self, cfg: &BasisConfig<f64>) -> clutter_core::Result<Vec<Scatterer<f64>>> {
        match self.scenario.b.as_ref() {
            Some(b) if !b.scatterers.is_empty() => Ok(b
                .scatterers
                .iter()
                .map(|s| Scatterer {
                    theta: s.theta,
                    range: s.range,
                    amplitude: Cx::new(s.amplitude[0], s.amplitude[1]),
                })
                .collect()),
            _ => self.fence().scatterers(cfg),
        }
    }

    /// Canonical TOML of the fully resolved config.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hex SHA-256 of [`Self::resolved_toml`] with `output.dir` blanked, so
    /// the same experiment written to two directories hashes alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir.clear();
        let digest = Sha256::digest(c.resolved_toml().as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(bad(key, "must be a positive finite number"));
    }
    Ok(())
}

fn alpha_ok(key: &str, v: f64) -> Result<(), ConfigError> {
    if !(v > 0.0 && v < 1.0) {
        return Err(bad(key, "must lie in the open interval (0, 1)"));
    }
    Ok(())
}

fn finite_list(key: &str, l: &[f64]) -> Result<(), ConfigError> {
    if l.is_empty() || l.iter().any(|v| !v.is_finite()) {
        return Err(bad(key, "need a non-empty list of finite values"));
    }
    Ok(())
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
        path: p.display().to_string(),
        source,
    })?;
    ExperimentConfig::from_toml(&text)
}
