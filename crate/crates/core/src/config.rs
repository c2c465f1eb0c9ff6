//! Simulation configuration and its line-oriented file format.
//!
//! A config file holds `key value` pairs, one per line; `#` starts a comment
//! and blank lines are ignored. See the manual for the key list and a sample.

use std::path::{Path, PathBuf};

use crate::coordination::ChoiceWeights;
use crate::error::{Error, Result};
use crate::sensing::SensorConfig;

/// Everything a single experiment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub world_file: PathBuf,
    pub num_robots: usize,
    pub wifi_range: f64,
    pub sensor: SensorConfig,
    pub weights: ChoiceWeights,
    pub min_frontier_size: usize,
    pub robot_radius: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Cells a robot may advance per tick.
    pub motion_budget: usize,
    /// World position of the rank-0 robot; lower ranks spawn in a column
    /// below it. Defaults to the first free cell (row-major).
    pub spawn: Option<(f64, f64)>,
    /// WiFi source position; defaults to the spawn-column centroid.
    pub source: Option<(f64, f64)>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            world_file: PathBuf::new(),
            num_robots: 1,
            wifi_range: 3.0,
            sensor: SensorConfig::default(),
            weights: ChoiceWeights::default(),
            min_frontier_size: 5,
            robot_radius: 0.0,
            max_iterations: 100,
            seed: 0,
            motion_budget: 1,
            spawn: None,
            source: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_robots < 1 {
            return Err(Error::Config("num_robots must be at least 1".into()));
        }
        if !(self.wifi_range > 0.0) {
            return Err(Error::Config("wifi_range must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.motion_budget < 1 {
            return Err(Error::Config("motion_budget must be at least 1".into()));
        }
        if self.robot_radius < 0.0 {
            return Err(Error::Config("robot_radius must be >= 0".into()));
        }
        if self.weights.w_r < 0.0 || self.weights.w_n < 0.0 {
            return Err(Error::Config("choice weights must be >= 0".into()));
        }
        if self.weights.w_r == 0.0 && self.weights.w_n == 0.0 {
            return Err(Error::Config("choice weights must not both be zero".into()));
        }
        self.sensor.validate()
    }

    /// Parse a config file. Relative `world` paths resolve against the config
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with_base(&text, base)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<SimConfig> {
        let mut config = SimConfig::default();
        let mut saw_world = false;

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_no = i + 1;
            let (key, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::Config(format!("line {line_no}: missing value for {line:?}")))?;
            let rest = rest.trim();
            let bad = |what: &str| Error::Config(format!("line {line_no}: invalid {what}: {rest:?}"));

            match key {
                "world" => {
                    let p = Path::new(rest);
                    config.world_file =
                        if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                    saw_world = true;
                }
                "robots" => config.num_robots = rest.parse().map_err(|_| bad("robots"))?,
                "wifi_range" => config.wifi_range = rest.parse().map_err(|_| bad("wifi_range"))?,
                "sensor_beams" => {
                    config.sensor.num_beams = rest.parse().map_err(|_| bad("sensor_beams"))?
                }
                "sensor_fov" => config.sensor.fov = rest.parse().map_err(|_| bad("sensor_fov"))?,
                "sensor_max_range" => {
                    config.sensor.max_range = rest.parse().map_err(|_| bad("sensor_max_range"))?
                }
                "sensor_hit" => {
                    config.sensor.hit_log_odds = rest.parse().map_err(|_| bad("sensor_hit"))?
                }
                "sensor_miss" => {
                    config.sensor.miss_log_odds = rest.parse().map_err(|_| bad("sensor_miss"))?
                }
                "sensor_noise_std" => {
                    config.sensor.noise_std = rest.parse().map_err(|_| bad("sensor_noise_std"))?
                }
                "weight_rank" => config.weights.w_r = rest.parse().map_err(|_| bad("weight_rank"))?,
                "weight_hop" => config.weights.w_n = rest.parse().map_err(|_| bad("weight_hop"))?,
                "min_frontier_size" => {
                    config.min_frontier_size =
                        rest.parse().map_err(|_| bad("min_frontier_size"))?
                }
                "robot_radius" => {
                    config.robot_radius = rest.parse().map_err(|_| bad("robot_radius"))?
                }
                "max_iterations" => {
                    config.max_iterations = rest.parse().map_err(|_| bad("max_iterations"))?
                }
                "seed" => config.seed = rest.parse().map_err(|_| bad("seed"))?,
                "motion_budget" => {
                    config.motion_budget = rest.parse().map_err(|_| bad("motion_budget"))?
                }
                "spawn" => config.spawn = Some(parse_xy(rest).ok_or_else(|| bad("spawn"))?),
                "source" => config.source = Some(parse_xy(rest).ok_or_else(|| bad("source"))?),
                other => {
                    return Err(Error::Config(format!("line {line_no}: unknown key {other:?}")));
                }
            }
        }

        if !saw_world {
            return Err(Error::Config("missing required key `world`".into()));
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_xy(rest: &str) -> Option<(f64, f64)> {
    let mut parts = rest.split_whitespace();
    let x = parts.next()?.parse().ok()?;
    let y = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((x, y))
}
