//! Experiment configuration.
//!
//! A config file is a TOML document. Every key is optional except
//! `schema_version`; missing keys take the values of the preset selected by
//! `kind` and `profile`. See `configs/` in the repository for annotated
//! examples.

use std::fmt;
use std::path::{Path, PathBuf};

use bpr_core::agents::{GridCohortSpec, GridGroup, RuleKind};
use bpr_core::env::{Destination, GridWorldSpec, SecretarySpec};
use bpr_core::features::FtNormalization;
use bpr_core::irl::{GpirlOptions, MlirlOptions, ProjOptions};
use bpr_core::pattern::{ClassifierKind, ClassifierParams};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Schema { found: i64 },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GridworldCluster,
    GridworldClassify,
    SecretaryAcrossRules,
    SecretaryWithinRule,
    SecretaryCrVsRandom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GridworldCluster => "gridworld-cluster",
            ExperimentKind::GridworldClassify => "gridworld-classify",
            ExperimentKind::SecretaryAcrossRules => "secretary-across-rules",
            ExperimentKind::SecretaryWithinRule => "secretary-within-rule",
            ExperimentKind::SecretaryCrVsRandom => "secretary-cr-vs-random",
        }
    }

    pub fn is_gridworld(self) -> bool {
        matches!(self, ExperimentKind::GridworldCluster | ExperimentKind::GridworldClassify)
    }

    /// Clustering experiments report NMI and clustering accuracy; the others
    /// report cross-validated classifier accuracy.
    pub fn is_clustering(self) -> bool {
        matches!(self, ExperimentKind::GridworldCluster | ExperimentKind::SecretaryWithinRule)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FT")]
    Ft,
    #[serde(rename = "FE")]
    Fe,
    #[serde(rename = "PCA+FE")]
    PcaFe,
    #[serde(rename = "PCA+FT")]
    PcaFt,
    #[serde(rename = "PROJ")]
    Proj,
    #[serde(rename = "MLIRL")]
    Mlirl,
    #[serde(rename = "GPIRL")]
    Gpirl,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ft,
        Method::Fe,
        Method::PcaFe,
        Method::PcaFt,
        Method::Proj,
        Method::Mlirl,
        Method::Gpirl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ft => "FT",
            Method::Fe => "FE",
            Method::PcaFe => "PCA+FE",
            Method::PcaFt => "PCA+FT",
            Method::Proj => "PROJ",
            Method::Mlirl => "MLIRL",
            Method::Gpirl => "GPIRL",
        }
    }

    /// File-name form: `features_<slug>.csv` or `rewards_<slug>.csv`.
    pub fn slug(self) -> &'static str {
        match self {
            Method::Ft => "ft",
            Method::Fe => "fe",
            Method::PcaFe => "pca-fe",
            Method::PcaFt => "pca-ft",
            Method::Proj => "proj",
            Method::Mlirl => "mlirl",
            Method::Gpirl => "gpirl",
        }
    }

    pub fn is_irl(self) -> bool {
        matches!(self, Method::Proj | Method::Mlirl | Method::Gpirl)
    }

    pub fn file_name(self) -> String {
        if self.is_irl() {
            format!("rewards_{}.csv", self.slug())
        } else {
            format!("features_{}.csv", self.slug())
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scale preset: `desk` for quick runs, `paper` for full-size cohorts and
/// replication counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldConfig {
    pub env: GridWorldSpec,
    /// `trajectories_per_agent` is ignored: each agent gets the largest
    /// sweep value and smaller sweep points use prefixes of that set.
    pub cohort: GridCohortSpec,
    pub groups: Vec<GridGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecretaryConfig {
    pub env: SecretarySpec,
    pub agents_per_group: usize,
    pub param_noise_std: f64,
    /// Shared parameter for the across-rule experiment.
    pub across_rules_parameter: f64,
    /// Rules studied by the within-rule experiment, one scenario each.
    pub within_rules: Vec<RuleKind>,
    pub cr_parameters: Vec<f64>,
    pub snccr_parameters: Vec<f64>,
    pub ccr_parameters: Vec<f64>,
    /// Cutoff of the CR group in the CR-versus-random experiment.
    pub cr_vs_random_cutoff: f64,
}

impl SecretaryConfig {
    pub fn parameters(&self, rule: RuleKind) -> &[f64] {
        match rule {
            RuleKind::Cr => &self.cr_parameters,
            RuleKind::Snccr => &self.snccr_parameters,
            RuleKind::Ccr => &self.ccr_parameters,
            RuleKind::Random => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub ft_normalization: FtNormalization,
    pub pca_components_fe: usize,
    pub pca_components_ft: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrlConfig {
    pub gpirl: GpirlOptions,
    pub gp_init_kappa: f64,
    pub gp_init_sigma: f64,
    pub mlirl: MlirlOptions,
    /// `proj.horizon` is filled from the trajectory length for GridWorld
    /// when left unset.
    pub proj: ProjOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecognitionConfig {
    pub kmeans_restarts: usize,
    pub folds: usize,
    pub cv_replications: usize,
    pub classifiers: Vec<ClassifierKind>,
    pub classifier: ClassifierParams,
    /// Dimensions of the scatter projections written for plotting.
    pub projection_components: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub profile: Profile,
    pub seed: u64,
    pub replications: usize,
    /// Number of observed trajectories per agent (|O| for GridWorld, H for
    /// the secretary problem).
    pub sweep: Vec<usize>,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    pub gridworld: GridworldConfig,
    pub secretary: SecretaryConfig,
    pub features: FeatureConfig,
    pub irl: IrlConfig,
    pub recognition: RecognitionConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `kind` at `profile` scale.
    pub fn preset(kind: ExperimentKind, profile: Profile) -> Self {
        let paper = profile == Profile::Paper;
        let (replications, sweep, methods) = match kind {
            ExperimentKind::GridworldCluster | ExperimentKind::GridworldClassify => (
                if paper { 100 } else { 10 },
                if paper { vec![4, 8, 16, 20, 30, 40, 60, 80, 100, 200] } else { vec![4, 16, 40, 100] },
                vec![Method::Fe, Method::Ft, Method::Proj, Method::Gpirl],
            ),
            ExperimentKind::SecretaryAcrossRules => (
                if paper { 100 } else { 10 },
                vec![50],
                vec![Method::Fe, Method::Ft, Method::Gpirl],
            ),
            ExperimentKind::SecretaryWithinRule => (
                if paper { 100 } else { 10 },
                if paper { (0..10).map(|i| 1 + 10 * i).collect() } else { vec![1, 11, 21, 31, 41, 51] },
                vec![Method::Fe, Method::Gpirl],
            ),
            ExperimentKind::SecretaryCrVsRandom => (
                if paper { 100 } else { 10 },
                vec![50],
                vec![Method::Fe, Method::Proj, Method::Gpirl],
            ),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind,
            profile,
            seed: 0,
            replications,
            sweep,
            methods,
            output_dir: PathBuf::from("out"),
            gridworld: GridworldConfig {
                env: GridWorldSpec::default(),
                cohort: GridCohortSpec {
                    agents_per_group: if paper { 200 } else { 50 },
                    ..GridCohortSpec::default()
                },
                groups: vec![
                    GridGroup {
                        destinations: vec![Destination { row: 9, col: 9, reward: 1.0 }],
                        noise_std: 0.1,
                    },
                    GridGroup {
                        destinations: vec![Destination { row: 0, col: 9, reward: 1.0 }],
                        noise_std: 0.1,
                    },
                ],
            },
            secretary: SecretaryConfig {
                env: SecretarySpec::default(),
                agents_per_group: if paper { 100 } else { 50 },
                param_noise_std: 1.0,
                across_rules_parameter: 4.0,
                within_rules: vec![RuleKind::Cr, RuleKind::Snccr, RuleKind::Ccr],
                cr_parameters: vec![3.0, 6.0, 10.0],
                snccr_parameters: vec![2.0, 4.0, 7.0],
                ccr_parameters: vec![1.0, 2.0, 3.0],
                cr_vs_random_cutoff: 8.0,
            },
            features: FeatureConfig {
                ft_normalization: FtNormalization::PerAgent,
                pca_components_fe: 10,
                pca_components_ft: 2,
            },
            irl: IrlConfig {
                gpirl: GpirlOptions::default(),
                gp_init_kappa: 0.5,
                gp_init_sigma: 0.1,
                mlirl: MlirlOptions::default(),
                proj: ProjOptions::default(),
            },
            recognition: RecognitionConfig {
                kmeans_restarts: 10,
                folds: 10,
                cv_replications: 1,
                classifiers: ClassifierKind::ALL.to_vec(),
                classifier: ClassifierParams::default(),
                projection_components: vec![2, 3],
            },
        }
    }

    /// Parse a TOML document, fill unspecified keys from the preset and apply
    /// command-line overrides. The document's `kind` defaults to
    /// `gridworld-cluster`.
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        match user.get("schema_version") {
            None => return Err(ConfigError::Invalid("missing schema_version".into())),
            Some(toml::Value::Integer(v)) if *v == i64::from(SCHEMA_VERSION) => {}
            Some(toml::Value::Integer(v)) => return Err(ConfigError::Schema { found: *v }),
            Some(_) => return Err(ConfigError::Invalid("schema_version must be an integer".into())),
        }
        let kind: ExperimentKind = match user.get("kind") {
            Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?,
            None => ExperimentKind::GridworldCluster,
        };
        let profile = match (overrides.profile, user.get("profile")) {
            (Some(p), _) => p,
            (None, Some(v)) => v.clone().try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?,
            (None, None) => Profile::Desk,
        };
        let preset = Self::preset(kind, profile);
        let mut merged = toml::Table::try_from(&preset).map_err(|e| ConfigError::Parse(e.to_string()))?;
        merge(&mut merged, user);
        merged.insert("profile".into(), toml::Value::try_from(profile).expect("enum serializes"));
        let mut config: ExperimentConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    /// Preset plus overrides, used when no file is given.
    pub fn default_with(overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut config = Self::preset(ExperimentKind::GridworldCluster, overrides.profile.unwrap_or_default());
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.sweep.is_empty() {
            return bad("sweep must be nonempty".into());
        }
        if self.sweep.contains(&0) {
            return bad("sweep values must be positive".into());
        }
        if self.methods.is_empty() {
            return bad("methods must be nonempty".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("methods contain duplicates".into());
        }
        if self.kind.is_gridworld() {
            self.gridworld.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if self.gridworld.groups.len() < 2 {
                return bad("gridworld needs at least two groups".into());
            }
            if self.gridworld.cohort.agents_per_group == 0 || self.gridworld.cohort.trajectory_length == 0 {
                return bad("gridworld cohort sizes must be positive".into());
            }
            let (r, c) = self.gridworld.cohort.start;
            if r >= self.gridworld.env.height || c >= self.gridworld.env.width {
                return bad("gridworld start cell outside the grid".into());
            }
            for g in &self.gridworld.groups {
                if g.destinations.iter().any(|d| d.row >= self.gridworld.env.height || d.col >= self.gridworld.env.width) {
                    return bad("gridworld destination outside the grid".into());
                }
                if !(g.noise_std >= 0.0) {
                    return bad("gridworld noise_std must be nonnegative".into());
                }
            }
        } else {
            self.secretary.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if self.secretary.agents_per_group == 0 {
                return bad("secretary agents_per_group must be positive".into());
            }
            if !(self.secretary.param_noise_std >= 0.0) {
                return bad("secretary param_noise_std must be nonnegative".into());
            }
            if self.kind == ExperimentKind::SecretaryWithinRule {
                if self.secretary.within_rules.is_empty() {
                    return bad("within_rules must be nonempty".into());
                }
                for &rule in &self.secretary.within_rules {
                    if rule == RuleKind::Random {
                        return bad("RANDOM has no parameter to vary within the rule".into());
                    }
                    if self.secretary.parameters(rule).len() < 2 {
                        return bad(format!("{} needs at least two parameter values", rule.name()));
                    }
                }
            }
        }
        let rec = &self.recognition;
        if self.kind.is_clustering() {
            if rec.kmeans_restarts == 0 {
                return bad("kmeans_restarts must be at least 1".into());
            }
        } else {
            if rec.classifiers.is_empty() {
                return bad("classifiers must be nonempty".into());
            }
            if rec.folds < 2 || rec.cv_replications == 0 {
                return bad("cross-validation needs folds ≥ 2 and cv_replications ≥ 1".into());
            }
        }
        if rec.projection_components.iter().any(|&c| c == 0) {
            return bad("projection components must be positive".into());
        }
        if self.features.pca_components_fe == 0 || self.features.pca_components_ft == 0 {
            return bad("PCA component counts must be positive".into());
        }
        if !(self.irl.gp_init_kappa > 0.0) || !(self.irl.gp_init_sigma >= 0.0) {
            return bad("GP init hyperparameters must satisfy kappa > 0, sigma ≥ 0".into());
        }
        Ok(())
    }

    pub fn max_sweep(&self) -> usize {
        *self.sweep.iter().max().expect("validated nonempty")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Deep merge: tables merge key by key, everything else is replaced.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
