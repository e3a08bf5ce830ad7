//! Run configuration: TOML schema, validation, and assembly of the core
//! search structures. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xbarnas::controller::{ControllerConfig, RewardConfig};
use xbarnas::cost::{SynapticArray, TechnologyParams};
use xbarnas::data::{ingest_cifar10, synth_dataset, Dataset};
use xbarnas::device::{DeviceLibrary, DeviceModel};
use xbarnas::search::{PhaseConfig, SearchSetup, TrainSettings};
use xbarnas::space::{rls_space, vls_space, LayerQuantChoices, LayerTemplate, SearchSpace};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// nas | quantnas | ptbnas | rnas | full
    pub mode: String,
    pub seed: u64,
    /// 0 means the default thread count.
    #[serde(default)]
    pub workers: usize,
    pub out_dir: PathBuf,
    pub space: SpaceConfig,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub tech: TechnologyParams,
    #[serde(default)]
    pub array: SynapticArray,
    #[serde(default = "default_devices")]
    pub devices: Vec<DeviceModel>,
    /// Source run for refinement-only mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rnas: Option<RnasConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RnasConfig {
    pub from_run: PathBuf,
    /// Episode id of the candidate to refine; the best noisy accuracy wins
    /// when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<u64>,
}

fn default_devices() -> Vec<DeviceModel> {
    DeviceLibrary::defaults().devices().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// rls | vls | custom
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<LayerChoiceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant: Option<QuantChoiceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerChoiceConfig {
    pub kind: String, // conv | fc
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filter_h: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filter_w: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub num_filters: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pool: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neurons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantChoiceConfig {
    pub wq_int: Vec<u32>,
    pub wq_frac: Vec<u32>,
    pub aq_int: Vec<u32>,
    pub aq_frac: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// synthetic | cifar10
    pub source: String,
    #[serde(default = "default_classes")]
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<[usize; 3]>,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn default_classes() -> usize {
    4
}

fn default_separation() -> f64 {
    3.0
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if !["nas", "quantnas", "ptbnas", "rnas", "full"].contains(&self.mode.as_str()) {
            return Err(CliError::config(format!(
                "unknown mode '{}' (nas | quantnas | ptbnas | rnas | full)",
                self.mode
            )));
        }
        if self.mode == "rnas" && self.rnas.is_none() {
            return Err(CliError::config("mode rnas needs an [rnas] section pointing at a source run".into()));
        }
        if self.dataset.train == 0 || self.dataset.test == 0 {
            return Err(CliError::config("dataset subsets must be >= 1".into()));
        }
        self.devices().map(|_| ())?;
        self.build_space().map(|_| ())?;
        self.setup().map(|s| s.validate()).map_err(CliError::from)?.map_err(CliError::from)
    }

    pub fn devices(&self) -> CliResult<DeviceLibrary> {
        DeviceLibrary::new(self.devices.clone()).map_err(CliError::from)
    }

    pub fn setup(&self) -> CliResult<SearchSetup> {
        Ok(SearchSetup {
            phase: self.phase,
            reward: self.reward,
            controller: self.controller,
            train: self.train,
            tech: self.tech,
            array: self.array,
            master_seed: self.seed,
        })
    }

    pub fn build_space(&self) -> CliResult<SearchSpace> {
        let device_indices: Vec<usize> = (0..self.devices.len()).collect();
        let mut space = match self.space.name.as_str() {
            "rls" => rls_space(),
            "vls" => vls_space(),
            "custom" => self.custom_space()?,
            other => return Err(CliError::config(format!("unknown space '{other}' (rls | vls | custom)"))),
        };
        space.devices = device_indices;
        space.validate().map_err(CliError::from)?;
        Ok(space)
    }

    fn custom_space(&self) -> CliResult<SearchSpace> {
        let input = self
            .space
            .input
            .ok_or_else(|| CliError::config("custom space needs input = [c, h, w]".into()))?;
        let classes = self
            .space
            .classes
            .ok_or_else(|| CliError::config("custom space needs classes".into()))?;
        if self.space.layers.is_empty() {
            return Err(CliError::config("custom space needs at least one [[space.layers]]".into()));
        }
        let mut layers = Vec::new();
        for (i, l) in self.space.layers.iter().enumerate() {
            match l.kind.as_str() {
                "conv" => layers.push(LayerTemplate::Conv {
                    filter_h: or_default(&l.filter_h, vec![3]),
                    filter_w: or_default(&l.filter_w, vec![3]),
                    num_filters: or_default(&l.num_filters, vec![8]),
                    pool: or_default(&l.pool, vec![false]),
                }),
                "fc" => layers.push(LayerTemplate::Fc {
                    neurons: or_default(&l.neurons, vec![16]),
                }),
                other => {
                    return Err(CliError::config(format!(
                        "layer {i}: unknown kind '{other}' (conv | fc)"
                    )))
                }
            }
        }
        let quant = match &self.space.quant {
            Some(q) => LayerQuantChoices {
                wq_int: q.wq_int.clone(),
                wq_frac: q.wq_frac.clone(),
                aq_int: q.aq_int.clone(),
                aq_frac: q.aq_frac.clone(),
            },
            None => LayerQuantChoices::standard(),
        };
        Ok(SearchSpace {
            name: "custom".into(),
            input_shape: (input[0], input[1], input[2]),
            classes,
            quant: vec![quant; layers.len()],
            layers,
            devices: vec![0],
        })
    }

    pub fn build_dataset(&self) -> CliResult<Dataset> {
        let d = &self.dataset;
        match d.source.as_str() {
            "synthetic" => {
                let image = d.image.unwrap_or([1, 8, 8]);
                synth_dataset(
                    d.classes,
                    d.train.max(d.test),
                    (image[0], image[1], image[2]),
                    d.separation,
                    self.seed ^ 0x5eed_da7a,
                )
                .map_err(CliError::from)
            }
            "cifar10" => {
                let path = d
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::config("dataset.source = cifar10 needs dataset.path".into()))?;
                ingest_cifar10(path, d.train, d.test, self.seed ^ 0x5eed_da7a).map_err(CliError::from)
            }
            other => Err(CliError::config(format!(
                "unknown dataset source '{other}' (synthetic | cifar10)"
            ))),
        }
    }
}

fn or_default<T: Clone>(v: &[T], default: Vec<T>) -> Vec<T> {
    if v.is_empty() {
        default
    } else {
        v.to_vec()
    }
}

/// Architecture file for the standalone cost command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchFile {
    pub classes: usize,
    pub input: [usize; 3],
    pub layers: Vec<ArchLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchLayer {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_w: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_filters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neurons: Option<usize>,
    /// Per-layer weight format, e.g. "s1.4".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wq: Option<String>,
    /// Per-layer activation format, e.g. "u1.4".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aq: Option<String>,
}

impl ArchFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}
