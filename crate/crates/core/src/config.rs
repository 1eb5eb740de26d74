//! Environment configuration and its flat `key=value` text form.
//!
//! ```
//! use armbench::config::EnvConfig;
//!
//! let cfg = EnvConfig::parse("robot=panda\nobs_size=64\n").unwrap();
//! assert_eq!(cfg.obs_size, 64);
//! assert!(EnvConfig::parse("colour=red").is_err());
//! ```

use crate::geometry::{GeometryError, GridSpec};
use crate::sim::Bounds;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
}

impl ConfigError {
    fn invalid(key: &str, value: impl fmt::Display, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue { key: key.to_string(), value: value.to_string(), reason: reason.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Robot {
    Kuka,
    Panda,
    Ur5,
    Ur5Robotiq,
}

impl Robot {
    /// Widest graspable extent across the jaws, in meters.
    pub fn max_open_width(self) -> f64 {
        match self {
            Robot::Ur5Robotiq => 0.085,
            _ => 0.08,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Robot::Kuka => "kuka",
            Robot::Panda => "panda",
            Robot::Ur5 => "ur5",
            Robot::Ur5Robotiq => "ur5_robotiq",
        }
    }
}

impl FromStr for Robot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kuka" => Ok(Robot::Kuka),
            "panda" => Ok(Robot::Panda),
            "ur5" => Ok(Robot::Ur5),
            "ur5_robotiq" => Ok(Robot::Ur5Robotiq),
            _ => Err("expected one of kuka, panda, ur5, ur5_robotiq".into()),
        }
    }
}

/// How an object is judged to have left the workspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WorkspaceCheck {
    /// Center of mass outside the bounds.
    Point,
    /// Any part of the footprint's axis-aligned box outside the bounds.
    BoundingBox,
}

impl WorkspaceCheck {
    pub fn name(self) -> &'static str {
        match self {
            WorkspaceCheck::Point => "point",
            WorkspaceCheck::BoundingBox => "bounding_box",
        }
    }
}

impl FromStr for WorkspaceCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point" => Ok(WorkspaceCheck::Point),
            "bounding_box" => Ok(WorkspaceCheck::BoundingBox),
            _ => Err("expected point or bounding_box".into()),
        }
    }
}

/// Which of the five action slots `(p, x, y, z, r)` an agent controls.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSequence(String);

impl ActionSequence {
    pub fn has(&self, slot: char) -> bool {
        self.0.contains(slot)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Number of controlled slots.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for ActionSequence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut seen = String::new();
        for c in s.chars() {
            if !"pxyzr".contains(c) {
                return Err(format!("unknown action slot `{c}`"));
            }
            if seen.contains(c) {
                return Err(format!("repeated action slot `{c}`"));
            }
            seen.push(c);
        }
        if !(seen.contains('x') && seen.contains('y')) {
            return Err("x and y are required".into());
        }
        Ok(ActionSequence(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub robot: Robot,
    pub action_sequence: ActionSequence,
    /// `[[x_min, x_max], [y_min, y_max], [z_min, z_max]]` in meters.
    pub workspace: [[f64; 2]; 3],
    /// Per-episode scale range applied to movable object dimensions.
    pub object_scale_range: (f64, f64),
    /// `None` uses the task's default.
    pub max_steps: Option<u32>,
    /// `None` uses the task's default.
    pub num_objects: Option<usize>,
    pub obs_size: usize,
    pub in_hand_size: usize,
    /// Accepted for compatibility; there is no arm motion to skip.
    pub fast_mode: bool,
    pub render: bool,
    pub random_orientation: bool,
    pub half_rotation: bool,
    pub workspace_check: WorkspaceCheck,
    /// Accepted for compatibility; only meaningful for close-loop scenes.
    pub close_loop_tray: bool,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            robot: Robot::Kuka,
            action_sequence: ActionSequence("pxyzr".into()),
            workspace: [[0.25, 0.65], [-0.2, 0.2], [0.0, 1.0]],
            object_scale_range: (1.0, 1.0),
            max_steps: None,
            num_objects: None,
            obs_size: 128,
            in_hand_size: 24,
            fast_mode: true,
            render: false,
            random_orientation: true,
            half_rotation: true,
            workspace_check: WorkspaceCheck::Point,
            close_loop_tray: false,
            seed: 0,
        }
    }
}

/// Keys in canonical order.
pub const KEYS: &[&str] = &[
    "robot",
    "action_sequence",
    "workspace",
    "object_scale_range",
    "max_steps",
    "num_objects",
    "obs_size",
    "in_hand_size",
    "fast_mode",
    "render",
    "random_orientation",
    "half_rotation",
    "workspace_check",
    "close_loop_tray",
    "seed",
];

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "True" | "1" => Ok(true),
        "false" | "False" | "0" => Ok(false),
        _ => Err(ConfigError::invalid(key, v, "expected true or false")),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::invalid(key, v, e.to_string()))
}

fn parse_floats(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let cleaned: String = v.chars().filter(|c| !matches!(c, '[' | ']' | '(' | ')' | ' ')).collect();
    let cleaned = cleaned.strip_prefix("array").unwrap_or(&cleaned);
    cleaned
        .split([',', ';'])
        .filter(|s| !s.is_empty())
        .map(|s| {
            let f: f64 = parse_num(key, s)?;
            if f.is_finite() {
                Ok(f)
            } else {
                Err(ConfigError::invalid(key, v, "values must be finite"))
            }
        })
        .collect()
}

fn parse_optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    if v == "default" || v == "none" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

impl EnvConfig {
    /// Parse a `key=value` document over the defaults. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = EnvConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    /// Set one key from its text value. Does not run cross-field
    /// validation; call [`EnvConfig::validate`] afterwards.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::invalid(key, v, reason);
        match key {
            "robot" => self.robot = v.parse().map_err(bad)?,
            "action_sequence" => self.action_sequence = v.parse().map_err(bad)?,
            "workspace" => {
                let f = parse_floats(key, v)?;
                if f.len() != 6 {
                    return Err(bad(format!("expected 6 numbers, got {}", f.len())));
                }
                self.workspace = [[f[0], f[1]], [f[2], f[3]], [f[4], f[5]]];
            }
            "object_scale_range" => {
                let f = parse_floats(key, v)?;
                self.object_scale_range = match f[..] {
                    [s] => (s, s),
                    [lo, hi] => (lo, hi),
                    _ => return Err(bad("expected a scale or a lo,hi pair".into())),
                };
            }
            "max_steps" => self.max_steps = parse_optional(key, v)?,
            "num_objects" => self.num_objects = parse_optional(key, v)?,
            "obs_size" => self.obs_size = parse_num(key, v)?,
            "in_hand_size" => self.in_hand_size = parse_num(key, v)?,
            "fast_mode" => self.fast_mode = parse_bool(key, v)?,
            "render" => self.render = parse_bool(key, v)?,
            "random_orientation" => self.random_orientation = parse_bool(key, v)?,
            "half_rotation" => self.half_rotation = parse_bool(key, v)?,
            "workspace_check" => self.workspace_check = v.parse().map_err(bad)?,
            "close_loop_tray" => self.close_loop_tray = parse_bool(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let [[x0, x1], [y0, y1], [z0, z1]] = self.workspace;
        let ws = self.get("workspace");
        if !(x0 < x1 && y0 < y1 && z0 < z1) {
            return Err(ConfigError::invalid("workspace", &ws, "each range must be increasing"));
        }
        if z0 != 0.0 {
            return Err(ConfigError::invalid("workspace", &ws, "the table is at z = 0"));
        }
        if ((x1 - x0) - (y1 - y0)).abs() > 1e-9 {
            return Err(ConfigError::invalid("workspace", &ws, "x and y ranges must have equal length"));
        }
        let (lo, hi) = self.object_scale_range;
        if !(0.5..=1.0).contains(&lo) || !(0.5..=1.0).contains(&hi) || lo > hi {
            return Err(ConfigError::invalid(
                "object_scale_range",
                self.get("object_scale_range"),
                "need 0.5 <= lo <= hi <= 1.0",
            ));
        }
        if self.max_steps == Some(0) {
            return Err(ConfigError::invalid("max_steps", 0, "must be positive"));
        }
        if self.num_objects == Some(0) {
            return Err(ConfigError::invalid("num_objects", 0, "must be positive"));
        }
        if !(1..=1024).contains(&self.obs_size) {
            return Err(ConfigError::invalid("obs_size", self.obs_size, "must be in 1..=1024"));
        }
        if !(1..=256).contains(&self.in_hand_size) {
            return Err(ConfigError::invalid("in_hand_size", self.in_hand_size, "must be in 1..=256"));
        }
        Ok(())
    }

    /// Canonical text value for `key`.
    pub fn get(&self, key: &str) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "default".into());
        match key {
            "robot" => self.robot.name().into(),
            "action_sequence" => self.action_sequence.as_str().into(),
            "workspace" => {
                let w = self.workspace;
                format!("[[{},{}],[{},{}],[{},{}]]", w[0][0], w[0][1], w[1][0], w[1][1], w[2][0], w[2][1])
            }
            "object_scale_range" => format!("{},{}", self.object_scale_range.0, self.object_scale_range.1),
            "max_steps" => opt(self.max_steps.map(|v| v.to_string())),
            "num_objects" => opt(self.num_objects.map(|v| v.to_string())),
            "obs_size" => self.obs_size.to_string(),
            "in_hand_size" => self.in_hand_size.to_string(),
            "fast_mode" => self.fast_mode.to_string(),
            "render" => self.render.to_string(),
            "random_orientation" => self.random_orientation.to_string(),
            "half_rotation" => self.half_rotation.to_string(),
            "workspace_check" => self.workspace_check.name().into(),
            "close_loop_tray" => self.close_loop_tray.to_string(),
            "seed" => self.seed.to_string(),
            _ => String::new(),
        }
    }

    /// Every key in canonical order, one `key=value` per line.
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k}={}\n", self.get(k))).collect()
    }

    pub fn bounds(&self) -> Bounds {
        let [[x_min, x_max], [y_min, y_max], [z_min, z_max]] = self.workspace;
        Bounds { x_min, x_max, y_min, y_max, z_min, z_max }
    }

    pub fn grid(&self) -> Result<GridSpec, GeometryError> {
        let [[x0, x1], [y0, y1], _] = self.workspace;
        GridSpec::new(x0, x1, y0, y1, self.obs_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = EnvConfig::default();
        assert_eq!(c.robot, Robot::Kuka);
        assert_eq!(c.action_sequence.as_str(), "pxyzr");
        assert_eq!(c.workspace, [[0.25, 0.65], [-0.2, 0.2], [0.0, 1.0]]);
        assert_eq!((c.obs_size, c.in_hand_size), (128, 24));
        assert!(c.fast_mode && !c.render && c.random_orientation && c.half_rotation);
        assert_eq!(c.workspace_check, WorkspaceCheck::Point);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = EnvConfig::default();
        c.robot = Robot::Ur5Robotiq;
        c.num_objects = Some(12);
        c.object_scale_range = (0.8, 1.0);
        c.workspace_check = WorkspaceCheck::BoundingBox;
        assert_eq!(EnvConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn python_style_workspace() {
        let c = EnvConfig::parse("workspace=array([[0.3, 0.7], [-0.2, 0.2], [0, 1]])").unwrap();
        assert_eq!(c.workspace[0], [0.3, 0.7]);
    }

    #[test]
    fn rejections() {
        assert_eq!(EnvConfig::parse("bogus=1"), Err(ConfigError::UnknownKey("bogus".into())));
        assert!(matches!(EnvConfig::parse("robot=ur10"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(EnvConfig::parse("obs_size=0"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(EnvConfig::parse("workspace=0,1,0,2,0,1"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(EnvConfig::parse("action_sequence=pxx"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(EnvConfig::parse("no equals sign"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(EnvConfig::parse("object_scale_range=0.6,0.4"), Err(ConfigError::InvalidValue { .. })));
    }

    #[test]
    fn robot_widths() {
        assert_eq!(Robot::Kuka.max_open_width(), 0.08);
        assert_eq!(Robot::Ur5Robotiq.max_open_width(), 0.085);
    }
}
