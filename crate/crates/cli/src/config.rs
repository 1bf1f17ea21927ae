//! Experiment configuration. Every section has defaults, so `{}` is a valid
//! config; unknown fields anywhere are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use specrep::{FreeGroup, Limits, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelParams,
    pub limits: Limits,
    pub seed: u64,
    pub spectrum: SpectrumConfig,
    pub kuhn_vershik: KuhnVershikConfig,
    pub fundamental_identity: FundamentalConfig,
    pub drift: DriftConfig,
    pub equidist: EquidistConfig,
    pub affine_average: AffineConfig,
    pub negtype: NegtypeConfig,
    pub counting: CountingConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: ModelParams::new(2),
            limits: Limits::default(),
            seed: 0,
            spectrum: SpectrumConfig::default(),
            kuhn_vershik: KuhnVershikConfig::default(),
            fundamental_identity: FundamentalConfig::default(),
            drift: DriftConfig::default(),
            equidist: EquidistConfig::default(),
            affine_average: AffineConfig::default(),
            negtype: NegtypeConfig::default(),
            counting: CountingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub depths: Vec<usize>,
    pub s_values: Vec<f64>,
    /// Also sweep the logarithmic kernel.
    pub log_kernel: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            depths: vec![6],
            s_values: vec![0.6, 0.75, 0.9, 1.0],
            log_kernel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KuhnVershikConfig {
    /// The ray is the sequence of prefixes of `ray^infinity`.
    pub ray: String,
    pub max_len: usize,
    /// Longest word evaluated through the Galerkin form; longer ones use
    /// the closed form.
    pub galerkin_max_len: usize,
}

impl Default for KuhnVershikConfig {
    fn default() -> Self {
        Self {
            ray: "ab".into(),
            max_len: 12,
            galerkin_max_len: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FundamentalConfig {
    pub pairs: usize,
    pub max_len: usize,
    pub depth: usize,
}

impl Default for FundamentalConfig {
    fn default() -> Self {
        Self {
            pairs: 10,
            max_len: 3,
            depth: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    pub horizon: usize,
    pub samples: usize,
    /// Step distribution as `(word, weight)`; empty means uniform on the
    /// generators and their inverses.
    pub steps: Vec<(String, f64)>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            horizon: 500,
            samples: 1000,
            steps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverConfig {
    pub r: f64,
    pub r_prime: f64,
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self { r: 1.0, r_prime: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquidistConfig {
    pub t_max: usize,
    pub cover: CoverConfig,
    /// `Psi = 1_[first] (x) 1_[second]`.
    pub psi: (String, String),
}

impl Default for EquidistConfig {
    fn default() -> Self {
        Self {
            t_max: 5,
            cover: CoverConfig::default(),
            psi: ("a".into(), "b".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffineConfig {
    pub t_max: usize,
    pub cover: CoverConfig,
    /// `f = 1_[f] - mu_o[f]`.
    pub f: String,
    /// `u = 1_[u.0] - 1_[u.1]`.
    pub u: (String, String),
}

impl Default for AffineConfig {
    fn default() -> Self {
        Self {
            t_max: 5,
            cover: CoverConfig::default(),
            f: "a".into(),
            u: ("a".into(), "b".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NegtypeConfig {
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub points: usize,
    pub max_len: usize,
}

impl Default for NegtypeConfig {
    fn default() -> Self {
        Self {
            ranks: vec![2, 3],
            trials: 5,
            points: 50,
            max_len: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountingConfig {
    pub t_max: usize,
    pub cover_t_max: usize,
    pub r: f64,
    pub cover: CoverConfig,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            t_max: 8,
            cover_t_max: 5,
            r: 1.0,
            cover: CoverConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Config =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// Checks every section and returns the model group with its limits.
    pub fn validate(&self) -> Result<FreeGroup> {
        let group = self.model.validate()?.with_limits(self.limits);
        let s = &self.spectrum;
        if s.depths.contains(&0) {
            bail!("spectrum.depths must be positive");
        }
        if let Some(bad) = s.s_values.iter().find(|v| !(**v > 0.5 && **v <= 1.0)) {
            bail!("spectrum.s_values must lie in (1/2, 1], got {bad}");
        }
        group.parse(&self.kuhn_vershik.ray)?;
        if self.kuhn_vershik.ray.is_empty() || self.kuhn_vershik.max_len == 0 {
            bail!("kuhn_vershik needs a nonempty ray and max_len >= 1");
        }
        let fi = &self.fundamental_identity;
        if fi.pairs == 0 || fi.depth < fi.max_len.max(1) {
            bail!("fundamental_identity needs pairs >= 1 and depth >= max_len");
        }
        if self.drift.horizon == 0 || self.drift.samples == 0 {
            bail!("drift needs positive horizon and samples");
        }
        for (w, _) in &self.drift.steps {
            group.parse(w)?;
        }
        for (t, cover) in [
            (self.equidist.t_max, &self.equidist.cover),
            (self.affine_average.t_max, &self.affine_average.cover),
            (self.counting.cover_t_max, &self.counting.cover),
        ] {
            if t == 0 {
                bail!("t_max must be at least 1");
            }
            self.cover_params(cover).validate()?;
        }
        for w in [&self.equidist.psi.0, &self.equidist.psi.1, &self.affine_average.f, &self.affine_average.u.0, &self.affine_average.u.1] {
            if group.parse(w)?.is_empty() {
                bail!("cylinder words must be nonempty");
            }
        }
        if self.affine_average.u.0 == self.affine_average.u.1 {
            bail!("affine_average.u needs two different cylinders");
        }
        let n = &self.negtype;
        if n.ranks.iter().any(|&k| FreeGroup::new(k).is_err()) || n.points < 2 || n.trials == 0 {
            bail!("negtype needs valid ranks, trials >= 1 and points >= 2");
        }
        if self.counting.t_max == 0 || !(self.counting.r >= 0.0) {
            bail!("counting needs t_max >= 1 and r >= 0");
        }
        Ok(group)
    }

    pub fn cover_params(&self, cover: &CoverConfig) -> specrep::equidist::CoverParams {
        specrep::equidist::CoverParams {
            annulus_width: self.model.annulus_width,
            r: cover.r,
            r_prime: cover.r_prime,
        }
    }

    /// SHA-256 of the canonical JSON form of the effective config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
