//! Plain-text key=value configuration. Flags override config values, config
//! values override the canonical defaults.

use std::path::{Path, PathBuf};

use mrvox_core::codec::{PayloadMode, Sublayout};
use mrvox_core::grid::{Level, LevelSpecs, DEFAULT_EXTENT, DEFAULT_ORIGIN};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub origin: [f32; 3],
    pub extent: [f64; 3],
    pub frequency_hz: f64,
    pub range_m: f64,
    pub capacity_mbps: Option<f64>,
    pub mode: PayloadMode,
    pub sublayout: Sublayout,
    pub level: Level,
    pub seed: u64,
    pub weights: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            origin: DEFAULT_ORIGIN,
            extent: DEFAULT_EXTENT,
            frequency_hz: 10.0,
            range_m: 70.0,
            capacity_mbps: None,
            mode: PayloadMode::CoordsOnly,
            sublayout: Sublayout::Compat,
            level: Level::High,
            seed: 42,
            weights: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
}

impl Config {
    /// Loads a config file, starting from the defaults. Unknown keys are
    /// rejected.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "origin_x" => cfg.origin[0] = parse_value(key, value)?,
                "origin_y" => cfg.origin[1] = parse_value(key, value)?,
                "origin_z" => cfg.origin[2] = parse_value(key, value)?,
                "extent_x" => cfg.extent[0] = parse_value(key, value)?,
                "extent_y" => cfg.extent[1] = parse_value(key, value)?,
                "extent_z" => cfg.extent[2] = parse_value(key, value)?,
                "frequency_hz" => cfg.frequency_hz = parse_value(key, value)?,
                "range_m" => cfg.range_m = parse_value(key, value)?,
                "capacity_mbps" => cfg.capacity_mbps = Some(parse_value(key, value)?),
                "mode" => cfg.mode = parse_value(key, value)?,
                "sublayout" => cfg.sublayout = parse_value(key, value)?,
                "level" => cfg.level = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "weights" => cfg.weights = Some(PathBuf::from(value)),
                other => {
                    return Err(CliError::Usage(format!(
                        "config line {}: unknown key `{other}`",
                        i + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Loads `path` when given, otherwise the defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// The three nested level specs over the configured volume.
    pub fn level_specs(&self) -> Result<LevelSpecs, CliError> {
        LevelSpecs::new(self.origin, self.extent)
            .map_err(|e| CliError::Usage(format!("configured volume is invalid: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_canonical() {
        let cfg = Config::default();
        assert_eq!(cfg.origin, [-140.0, -40.0, -3.0]);
        assert_eq!(cfg.extent, [280.0, 80.0, 4.0]);
        assert_eq!(cfg.frequency_hz, 10.0);
        assert_eq!(cfg.range_m, 70.0);
        assert_eq!(cfg.capacity_mbps, None);
        assert_eq!(cfg.mode, PayloadMode::CoordsOnly);
        assert_eq!(cfg.sublayout, Sublayout::Compat);
        let specs = cfg.level_specs().unwrap();
        assert_eq!(specs.high.dims, [5600, 1600, 40]);
    }

    #[test]
    fn parses_known_keys_and_rejects_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.cfg");
        std::fs::write(
            &path,
            "# comment\nfrequency_hz = 20\nmode=mean\nsublayout=packed\nlevel=low\ncapacity_mbps=5\n",
        )
        .unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.frequency_hz, 20.0);
        assert_eq!(cfg.mode, PayloadMode::CoordsPlusMeanFeatures);
        assert_eq!(cfg.sublayout, Sublayout::Packed);
        assert_eq!(cfg.level, Level::Low);
        assert_eq!(cfg.capacity_mbps, Some(5.0));

        std::fs::write(&path, "volume=big\n").unwrap();
        let err = Config::load(&path).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)), "{err}");
        std::fs::write(&path, "frequency_hz ten\n").unwrap();
        assert!(matches!(Config::load(&path), Err(CliError::Usage(_))));
    }
}
