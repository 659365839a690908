use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use super::Flags;
use crate::benchmark::{EditOp, FilterRules, PlacementConfig, DEFAULT_MAX_DETECTOR_YAW_ERR};
use crate::conditioning::{PoseMapStyle, Variant};
use crate::crops::{DEFAULT_CROP_FACTOR, DEFAULT_OUT_EDGE};
use crate::metrics::{MetricMode, DEFAULT_MATCH_DISTANCE};

/// Which instances a per-target command visits.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// All instances passing the filter rules.
    #[default]
    Filtered,
    /// An explicit token list, no filtering.
    Tokens(Vec<String>),
}

/// Effective configuration: built-in defaults, overridden by the config file, overridden
/// by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub annotations: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub drivable: Option<PathBuf>,
    pub instructions: Option<PathBuf>,
    pub occluder_masks: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub fid: Option<[PathBuf; 2]>,
    pub out: PathBuf,
    pub variant: Variant,
    pub size: Option<[u32; 2]>,
    pub crop_factor: f64,
    pub cropped: bool,
    pub targets: TargetSpec,
    pub edit: Option<String>,
    pub seed: u64,
    pub threads: usize,
    pub metric_mode: MetricMode,
    pub filter: FilterRules,
    pub detector_yaw_threshold: f64,
    pub match_distance: f64,
    pub min_occluder_pixels: usize,
    pub style: PoseMapStyle,
    pub placement: PlacementConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            annotations: None,
            detections: None,
            drivable: None,
            instructions: None,
            occluder_masks: None,
            images: None,
            fid: None,
            out: PathBuf::from("out"),
            variant: Variant::PoseMap,
            size: None,
            crop_factor: DEFAULT_CROP_FACTOR,
            cropped: false,
            targets: TargetSpec::Filtered,
            edit: None,
            seed: 0,
            threads: 0,
            metric_mode: MetricMode::GroundPlane,
            filter: FilterRules::default(),
            detector_yaw_threshold: DEFAULT_MAX_DETECTOR_YAW_ERR,
            match_distance: DEFAULT_MATCH_DISTANCE,
            min_occluder_pixels: 1,
            style: PoseMapStyle::default(),
            placement: PlacementConfig::default(),
        }
    }
}

fn parse_targets(s: &str) -> anyhow::Result<TargetSpec> {
    if s.ends_with(".json") {
        #[derive(Deserialize)]
        struct Listing {
            instances: Vec<String>,
        }
        let text = std::fs::read_to_string(s).with_context(|| format!("reading instance list {s}"))?;
        let l: Listing = serde_json::from_str(&text).with_context(|| format!("parsing instance list {s}"))?;
        return Ok(TargetSpec::Tokens(l.instances));
    }
    Ok(TargetSpec::Tokens(
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect(),
    ))
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> anyhow::Result<Self> {
        let mut cfg = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &flags.$field {
                    cfg.$field = Some(v.clone());
                }
            };
        }
        set!(annotations);
        set!(detections);
        set!(drivable);
        set!(instructions);
        set!(occluder_masks);
        set!(images);
        set!(edit);
        if let Some(v) = &flags.out {
            cfg.out = v.clone();
        }
        if let Some(v) = flags.variant {
            cfg.variant = v;
        }
        if let Some((w, h)) = flags.size {
            cfg.size = Some([w, h]);
        }
        if let Some(v) = flags.crop_factor {
            cfg.crop_factor = v;
        }
        if flags.cropped {
            cfg.cropped = true;
        }
        if let Some(s) = &flags.instances {
            cfg.targets = parse_targets(s)?;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.threads {
            cfg.threads = v;
        }
        if let Some(v) = flags.metric_mode {
            cfg.metric_mode = v;
        }
        if let Some(v) = &flags.fid {
            cfg.fid = Some([v[0].clone(), v[1].clone()]);
        }
        cfg.placement.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if !(self.crop_factor > 0.0 && self.crop_factor.is_finite()) {
            bail!("crop factor must be positive, got {}", self.crop_factor);
        }
        if let Some([w, h]) = self.size {
            if w == 0 || h == 0 {
                bail!("size must be positive, got {w}x{h}");
            }
        }
        if let Some(e) = &self.edit {
            e.parse::<EditOp>().map_err(anyhow::Error::msg)?;
        }
        for p in [&self.annotations, &self.detections, &self.drivable, &self.instructions]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                bail!("input file {} does not exist", p.display());
            }
        }
        for p in [&self.occluder_masks, &self.images].into_iter().flatten() {
            if !p.is_dir() {
                bail!("input directory {} does not exist", p.display());
            }
        }
        if let Some(pair) = &self.fid {
            for p in pair {
                if !p.is_file() {
                    bail!("feature file {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn edit_op(&self) -> Option<EditOp> {
        self.edit.as_deref().and_then(|e| e.parse().ok())
    }

    /// Square edge of cropped outputs.
    pub fn out_edge(&self) -> u32 {
        self.size.map_or(DEFAULT_OUT_EDGE, |[w, _]| w)
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
        path.as_deref().ok_or_else(|| anyhow::anyhow!("--{flag} is required"))
    }

    /// Configuration echoed next to the outputs. Worker count and output location are
    /// left out so the echo is identical across runs that differ only in those.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("threads");
            obj.remove("out");
        }
        v
    }
}
