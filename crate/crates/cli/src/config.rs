//! Key-value configuration: a plain-text file of `key = value` lines with
//! `#` comments, overridden by command-line flags. Every default matches
//! the library's.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crownseg_core::crowns::{PostprocessParams, SegmentationParams};
use crownseg_core::error::{Error, Result};
use crownseg_core::pipeline::PipelineParams;
use crownseg_core::synth::{DensityMode, SceneSpec};
use crownseg_core::terrain::{CsfParams, HeightMode};
use crownseg_core::treetops::DetectorKind;

#[derive(Debug, Default, Clone)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot open {}: {}", path.display(), e)))?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path, format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.map.insert(key.to_string(), v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{}: invalid number '{}'", key, v))),
        }
    }

    fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{}: invalid integer '{}'", key, v))),
        }
    }

    fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{}: invalid integer '{}'", key, v))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.map.get(key).map(PathBuf::from)
    }

    pub fn detector(&self) -> Result<DetectorKind> {
        let se_radius = self.get_usize("se_radius", 8)?;
        parse_detector(self.get("detector").unwrap_or("thr"), se_radius)
    }

    pub fn params(&self) -> Result<PipelineParams> {
        let defaults = PipelineParams::default();
        let csf_defaults = CsfParams::default();
        let height_mode = match self.get("height.mode") {
            None => HeightMode::Dtm,
            Some(s) => parse_height_mode(s)?,
        };
        let theta = match self.get("seg.theta") {
            None => None,
            Some(v) => Some(
                v.parse()
                    .map_err(|_| Error::Config(format!("seg.theta: invalid number '{}'", v)))?,
            ),
        };
        let params = PipelineParams {
            mu: self.get_f64("mu", defaults.mu)?,
            detector: self.detector()?,
            opening_se_radius: self.get_usize("opening_se_radius", defaults.opening_se_radius)?,
            csf: CsfParams {
                cloth_resolution: self
                    .get_f64("csf.cloth_resolution", csf_defaults.cloth_resolution)?,
                rigidness: self.get_usize("csf.rigidness", csf_defaults.rigidness as usize)? as u8,
                gravity_iterations: self
                    .get_usize("csf.iterations", csf_defaults.gravity_iterations)?,
                class_threshold: self
                    .get_f64("csf.class_threshold", csf_defaults.class_threshold)?,
                time_step: self.get_f64("csf.time_step", csf_defaults.time_step)?,
            },
            height_mode,
            height_window_m: self.get_f64("height.window", defaults.height_window_m)?,
            min_height: self.get_f64("min_height", defaults.min_height)?,
            segmentation: SegmentationParams {
                w_h: self.get_f64("seg.w_h", 0.8)?,
                w_v: self.get_f64("seg.w_v", 1.0)?,
                w_c: self.get_f64("seg.w_c", 0.5)?,
                theta,
            },
            postprocess: PostprocessParams {
                neighborhood_radius_m: self.get_f64("post.neighborhood_radius", 30.0)?,
            },
            gamma: self.get_f64("gamma", defaults.gamma)?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn scene_spec(&self) -> Result<SceneSpec> {
        let d = SceneSpec::default();
        let density = match self.get("scene.density") {
            None => d.density_mode,
            Some(s) => DensityMode::parse(s)
                .ok_or_else(|| Error::Config(format!("scene.density: unknown mode '{}'", s)))?,
        };
        let spec = SceneSpec {
            width: self.get_usize("scene.width", d.width)?,
            height: self.get_usize("scene.height", d.height)?,
            cell_size: self.get_f64("scene.cell_size", d.cell_size)?,
            n_trees: self.get_usize("scene.n_trees", d.n_trees)?,
            density_mode: density,
            height_range: (
                self.get_f64("scene.height_min", d.height_range.0)?,
                self.get_f64("scene.height_max", d.height_range.1)?,
            ),
            terrain_amplitude: self.get_f64("scene.terrain_amplitude", d.terrain_amplitude)?,
            noise_sigma: self.get_f64("scene.noise_sigma", d.noise_sigma)?,
            rng_seed: self.get_u64("scene.seed", d.rng_seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Dumps every effective value in config-file syntax.
    pub fn print_effective(&self) -> Result<()> {
        let p = self.params()?;
        let s = self.scene_spec()?;
        for (key, value) in [
            ("input.dsm", self.get("input.dsm").unwrap_or("").to_string()),
            (
                "input.bands",
                self.get("input.bands").unwrap_or("").to_string(),
            ),
            (
                "input.reference",
                self.get("input.reference").unwrap_or("").to_string(),
            ),
            (
                "output.dir",
                self.get("output.dir").unwrap_or("out").to_string(),
            ),
            ("mu", p.mu.to_string()),
            (
                "detector",
                self.get("detector").unwrap_or("thr").to_string(),
            ),
            ("se_radius", self.get_usize("se_radius", 8)?.to_string()),
            ("opening_se_radius", p.opening_se_radius.to_string()),
            ("csf.cloth_resolution", p.csf.cloth_resolution.to_string()),
            ("csf.rigidness", p.csf.rigidness.to_string()),
            ("csf.iterations", p.csf.gravity_iterations.to_string()),
            ("csf.class_threshold", p.csf.class_threshold.to_string()),
            ("csf.time_step", p.csf.time_step.to_string()),
            ("height.mode", format_height_mode(p.height_mode)),
            ("height.window", p.height_window_m.to_string()),
            ("min_height", p.min_height.to_string()),
            ("seg.w_h", p.segmentation.w_h.to_string()),
            ("seg.w_v", p.segmentation.w_v.to_string()),
            ("seg.w_c", p.segmentation.w_c.to_string()),
            ("seg.theta", p.segmentation.effective_theta().to_string()),
            (
                "post.neighborhood_radius",
                p.postprocess.neighborhood_radius_m.to_string(),
            ),
            ("gamma", p.gamma.to_string()),
            ("scene.width", s.width.to_string()),
            ("scene.height", s.height.to_string()),
            ("scene.cell_size", s.cell_size.to_string()),
            ("scene.n_trees", s.n_trees.to_string()),
            ("scene.density", s.density_mode.name().to_string()),
            ("scene.height_min", s.height_range.0.to_string()),
            ("scene.height_max", s.height_range.1.to_string()),
            ("scene.terrain_amplitude", s.terrain_amplitude.to_string()),
            ("scene.noise_sigma", s.noise_sigma.to_string()),
            ("scene.seed", s.rng_seed.to_string()),
        ] {
            println!("{} = {}", key, value);
        }
        Ok(())
    }
}

pub fn parse_detector(name: &str, se_radius: usize) -> Result<DetectorKind> {
    match name.to_ascii_lowercase().as_str() {
        "thr" | "th" | "tophat" => Ok(DetectorKind::TopHat { se_radius }),
        "sb" | "slopebreak" => Ok(DetectorKind::SlopeBreak),
        s if s.starts_with('f') => {
            let size: usize = s[1..]
                .trim_start_matches('_')
                .parse()
                .map_err(|_| Error::Config(format!("unknown detector '{}'", name)))?;
            Ok(DetectorKind::FixedWindow { size })
        }
        _ => Err(Error::Config(format!("unknown detector '{}'", name))),
    }
}

pub fn parse_height_mode(s: &str) -> Result<HeightMode> {
    let lower = s.to_ascii_lowercase();
    if lower == "dtm" {
        return Ok(HeightMode::Dtm);
    }
    if let Some(v) = lower.strip_prefix("constant:") {
        let h: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("height.mode: invalid height '{}'", v)))?;
        return Ok(HeightMode::Constant(h));
    }
    if let Some(v) = lower.strip_prefix("lowest:") {
        let h: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("height.mode: invalid cap '{}'", v)))?;
        return Ok(HeightMode::LowestPoint(h));
    }
    Err(Error::Config(format!(
        "height.mode: expected dtm, constant:<m>, or lowest:<m>, got '{}'",
        s
    )))
}

fn format_height_mode(mode: HeightMode) -> String {
    match mode {
        HeightMode::Dtm => "dtm".to_string(),
        HeightMode::Constant(h) => format!("constant:{}", h),
        HeightMode::LowestPoint(h) => format!("lowest:{}", h),
    }
}
