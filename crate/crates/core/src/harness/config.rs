use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnpError};
use crate::logistic::DEFAULT_L2;
use crate::select::DEFAULT_K;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Stylist,
    Lp,
    #[serde(alias = "clip")]
    ClipScore,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    #[serde(alias = "masked")]
    MaskedReconstruction,
    PerpEncoder,
    PerpDecoder,
    /// Rank-one projection along a probe fit on raw embeddings.
    Cav,
    None,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Stylist => "stylist",
            Selection::Lp => "lp",
            Selection::ClipScore => "clip_score",
            Selection::None => "none",
        })
    }
}

impl fmt::Display for Removal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Removal::MaskedReconstruction => "masked_reconstruction",
            Removal::PerpEncoder => "perp_encoder",
            Removal::PerpDecoder => "perp_decoder",
            Removal::Cav => "cav",
            Removal::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub embeddings: PathBuf,
    pub labels: PathBuf,
    pub sae_bundle: PathBuf,
    pub queries: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<PathBuf>,
    /// One embedding per task class; when present, class scores for the
    /// worst-group AUC are cosine similarities instead of probe outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_prompts: Option<PathBuf>,
}

impl DataPaths {
    /// The layout written by the synthetic generator, rooted at `dir`.
    pub fn synthetic_layout(dir: &Path) -> Self {
        use super::synth::files;
        Self {
            embeddings: dir.join(files::EMBEDDINGS),
            labels: dir.join(files::LABELS),
            sae_bundle: dir.join(files::SAE),
            queries: dir.join(files::QUERIES),
            prompts: Some(dir.join(files::PROMPTS)),
            class_prompts: None,
        }
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.embeddings);
        join(&mut self.labels);
        join(&mut self.sae_bundle);
        join(&mut self.queries);
        if let Some(p) = self.prompts.as_mut() {
            join(p);
        }
        if let Some(p) = self.class_prompts.as_mut() {
            join(p);
        }
    }
}

fn default_k() -> usize {
    DEFAULT_K
}
fn default_folds() -> usize {
    5
}
fn default_ref_fraction() -> f64 {
    0.5
}
fn default_top_n() -> usize {
    500
}
fn default_l2() -> f64 {
    DEFAULT_L2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub selection: Selection,
    pub removal: Removal,
    #[serde(default)]
    pub interpolation: bool,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_ref_fraction")]
    pub ref_fraction: f64,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    pub seed: u64,
    #[serde(default = "default_l2")]
    pub l2: f64,
    pub paths: DataPaths,
}

impl ExperimentConfig {
    /// A config with default `k`, folds, fractions and `l2`.
    pub fn new(selection: Selection, removal: Removal, interpolation: bool, seed: u64, paths: DataPaths) -> Self {
        Self {
            selection,
            removal,
            interpolation,
            k: DEFAULT_K,
            folds: default_folds(),
            ref_fraction: default_ref_fraction(),
            top_n: default_top_n(),
            seed,
            l2: DEFAULT_L2,
            paths,
        }
    }

    /// Parses a config; relative paths are taken relative to `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| SnpError::Config(e.to_string()))?;
        cfg.paths.resolve(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SnpError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base)
    }

    /// Interpolated masked reconstruction has no meaning; such runs report N/A
    /// instead of failing.
    pub fn is_applicable(&self) -> bool {
        !(self.interpolation && self.removal == Removal::MaskedReconstruction)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SnpError::Config(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.folds == 0 {
            return bad("folds must be at least 1".into());
        }
        if !(self.ref_fraction > 0.0 && self.ref_fraction < 1.0) {
            return bad(format!("ref_fraction must be in (0, 1), got {}", self.ref_fraction));
        }
        if self.top_n == 0 {
            return bad("top_n must be at least 1".into());
        }
        if !(self.l2 > 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be positive, got {}", self.l2));
        }
        if self.selection == Selection::ClipScore && self.paths.prompts.is_none() {
            return bad("clip_score selection requires paths.prompts".into());
        }
        let needs_features = matches!(
            self.removal,
            Removal::MaskedReconstruction | Removal::PerpEncoder | Removal::PerpDecoder
        );
        if needs_features && self.selection == Selection::None {
            return bad(format!("removal {} needs a feature selection", self.removal));
        }
        if self.removal == Removal::Cav && self.selection != Selection::None {
            return bad("cav removal does not use a feature selection; set selection to none".into());
        }
        if self.interpolation && matches!(self.removal, Removal::None | Removal::Cav) {
            return bad(format!("interpolation has no effect with removal {}", self.removal));
        }
        Ok(())
    }
}

fn default_n() -> usize {
    64
}
fn default_m() -> usize {
    32
}
fn default_samples() -> usize {
    2000
}
fn default_attr_features() -> Vec<usize> {
    vec![5, 12, 21, 28]
}
fn default_task_features() -> Vec<usize> {
    vec![1, 8]
}
fn default_attr_shift() -> f64 {
    5.0
}
fn default_noise() -> f64 {
    0.5
}
fn default_task_shift() -> f64 {
    0.5
}
fn default_shared_task_shift() -> f64 {
    1.0
}
fn default_density() -> f64 {
    0.5
}
fn default_scale() -> f64 {
    2.0
}
fn default_queries() -> usize {
    10
}
fn default_query_bias() -> f64 {
    0.5
}

/// Planted-bias generator settings.
///
/// Each sample mixes sparse background features with a composite attribute
/// feature: attribute 1 activates the first half of `planted_attr_features`,
/// attribute 0 the second half, both with strength
/// `attr_shift + shared_task_shift · (2·task - 1)`. The task label also adds
/// `task_shift` along `planted_task_features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(rename = "N", default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_attr_features")]
    pub planted_attr_features: Vec<usize>,
    #[serde(default = "default_task_features")]
    pub planted_task_features: Vec<usize>,
    #[serde(default = "default_attr_shift")]
    pub attr_shift: f64,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_task_shift")]
    pub task_shift: f64,
    #[serde(default = "default_shared_task_shift")]
    pub shared_task_shift: f64,
    #[serde(default = "default_density")]
    pub background_density: f64,
    /// Mean of the exponential background amplitudes.
    #[serde(default = "default_scale")]
    pub background_scale: f64,
    #[serde(default = "default_queries")]
    pub n_queries: usize,
    /// Weight of the attribute direction mixed into each random query.
    #[serde(default = "default_query_bias")]
    pub query_attr_bias: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SyntheticConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SnpError::io(path, e))?;
        let cfg: SyntheticConfig = serde_json::from_str(&text).map_err(|e| SnpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SnpError::Config(msg));
        if self.n == 0 || self.m == 0 || self.samples < 2 {
            return bad("n, m must be positive and N at least 2".into());
        }
        if self.m > self.n {
            return bad(format!(
                "m = {} exceeds n = {}; the dictionary cannot be orthonormal",
                self.m, self.n
            ));
        }
        if self.planted_attr_features.len() < 2 {
            return bad("need at least two planted attribute features".into());
        }
        let mut all: Vec<usize> = self
            .planted_attr_features
            .iter()
            .chain(&self.planted_task_features)
            .copied()
            .collect();
        if let Some(&i) = all.iter().find(|&&i| i >= self.m) {
            return bad(format!("planted feature {i} out of range for m = {}", self.m));
        }
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != total {
            return bad("planted feature lists must be disjoint and free of duplicates".into());
        }
        if self.attr_shift < 0.0 {
            return bad("attr_shift must be nonnegative".into());
        }
        if self.noise_sigma < 0.0 || self.background_scale <= 0.0 {
            return bad("noise_sigma must be nonnegative and background_scale positive".into());
        }
        if !(0.0..=1.0).contains(&self.background_density) {
            return bad("background_density must be in [0, 1]".into());
        }
        if self.n_queries == 0 {
            return bad("n_queries must be at least 1".into());
        }
        Ok(())
    }
}
