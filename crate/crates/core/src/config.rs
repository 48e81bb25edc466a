//! Flat `key = value` configuration shared by every subcommand.

use std::path::Path;

use thiserror::Error;

use crate::eval::{ExperimentConfig, Scheme};
use crate::grid::GridTopology;
use crate::miner::ScoringConfig;
use crate::mobility::RegionPathParams;
use crate::mpps::{MppsConfig, TrafficClass};
use crate::rssi::{RssiConfig, VendorScale};
use crate::security::CipherKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<ConfigError> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config file {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Every key with its default and meaning, in file order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "1", "RNG seed for every stochastic step"),
    ("history_size", "10000", "paths generated as mining history"),
    ("test_paths", "10", "fresh paths scored per experiment"),
    ("min_path_len", "3", "fewest APs in a generated path"),
    ("max_path_len", "6", "most APs in a generated path"),
    ("center_avoidance", "false", "bias path destinations away from the grid centre"),
    ("schemes", "LTDPS,TM,IP", "predictors to evaluate"),
    ("grid_rows", "5", "AP lattice rows"),
    ("grid_cols", "5", "AP lattice columns"),
    ("rssi_max", "100", "vendor RSSI scale maximum (Cisco 100, Symbol 31, Atheros 60)"),
    ("delta_e", "5", "error factor: readings this close are similar"),
    ("delta_t", "1", "sampling interval in ticks"),
    ("region_threshold", "rssi_max/3", "reading that counts an AP as bordering the region"),
    ("lv_mv_bound", "rssi_max/3", "low/medium level boundary"),
    ("mv_hv_bound", "2*rssi_max/3", "medium/high level boundary"),
    ("noise_amplitude", "0", "uniform noise added to synthesized readings"),
    ("corruption_factor", "0.5", "weight of indirect (three-AP) counts"),
    ("reservation_timeout", "5", "ticks before an unused reservation is released"),
    ("backup_ticks", "2", "ticks below delta_e that force a backup handoff"),
    ("traffic_class", "data", "reservation class: data, voice or video"),
    ("cipher", "substitution", "MIC block cipher: substitution or xor"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub history_size: usize,
    pub test_paths: usize,
    pub min_path_len: usize,
    pub max_path_len: usize,
    pub center_avoidance: bool,
    pub schemes: Vec<Scheme>,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub rssi_max: u16,
    pub delta_e: Option<u8>,
    pub delta_t: Option<u32>,
    pub region_threshold: Option<u8>,
    pub lv_mv_bound: Option<u8>,
    pub mv_hv_bound: Option<u8>,
    pub noise_amplitude: Option<u8>,
    pub corruption_factor: f64,
    pub reservation_timeout: u64,
    pub backup_ticks: u32,
    pub traffic_class: TrafficClass,
    pub cipher: CipherKind,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            history_size: 10_000,
            test_paths: 10,
            min_path_len: 3,
            max_path_len: 6,
            center_avoidance: false,
            schemes: Scheme::ALL.to_vec(),
            grid_rows: 5,
            grid_cols: 5,
            rssi_max: 100,
            delta_e: None,
            delta_t: None,
            region_threshold: None,
            lv_mv_bound: None,
            mv_hv_bound: None,
            noise_amplitude: None,
            corruption_factor: 0.5,
            reservation_timeout: 5,
            backup_ticks: 2,
            traffic_class: TrafficClass::Data,
            cipher: CipherKind::Substitution,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

impl Config {
    /// Parses a config file body. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| ConfigError::Line { line: i + 1, source: Box::new(e) })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "history_size" => self.history_size = parse(key, value)?,
            "test_paths" => self.test_paths = parse(key, value)?,
            "min_path_len" => self.min_path_len = parse(key, value)?,
            "max_path_len" => self.max_path_len = parse(key, value)?,
            "center_avoidance" => self.center_avoidance = parse(key, value)?,
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_, _>>()?
            }
            "grid_rows" => self.grid_rows = parse(key, value)?,
            "grid_cols" => self.grid_cols = parse(key, value)?,
            "rssi_max" => self.rssi_max = parse(key, value)?,
            "delta_e" => self.delta_e = Some(parse(key, value)?),
            "delta_t" => self.delta_t = Some(parse(key, value)?),
            "region_threshold" => self.region_threshold = Some(parse(key, value)?),
            "lv_mv_bound" => self.lv_mv_bound = Some(parse(key, value)?),
            "mv_hv_bound" => self.mv_hv_bound = Some(parse(key, value)?),
            "noise_amplitude" => self.noise_amplitude = Some(parse(key, value)?),
            "corruption_factor" => self.corruption_factor = parse(key, value)?,
            "reservation_timeout" => self.reservation_timeout = parse(key, value)?,
            "backup_ticks" => self.backup_ticks = parse(key, value)?,
            "traffic_class" => self.traffic_class = parse(key, value)?,
            "cipher" => self.cipher = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(key.trim(), value.trim())
    }

    pub fn grid(&self) -> Result<GridTopology, ConfigError> {
        GridTopology::new(self.grid_rows, self.grid_cols).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn scale(&self) -> Result<VendorScale, ConfigError> {
        VendorScale::new(self.rssi_max).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Scale-derived defaults with any explicit keys applied on top. The
    /// signal range follows the region threshold.
    pub fn rssi(&self) -> Result<RssiConfig, ConfigError> {
        let scale = self.scale()?;
        let mut rssi = RssiConfig::for_scale(scale);
        if let Some(v) = self.delta_e {
            rssi.delta_e = v;
        }
        if let Some(v) = self.delta_t {
            rssi.delta_t = v;
        }
        if let Some(v) = self.lv_mv_bound {
            rssi.lv_mv_bound = v;
        }
        if let Some(v) = self.mv_hv_bound {
            rssi.mv_hv_bound = v;
        }
        if let Some(v) = self.noise_amplitude {
            rssi.noise_amplitude = v;
        }
        if let Some(v) = self.region_threshold {
            rssi.region_threshold = v;
            rssi.range = RssiConfig::range_for_threshold(scale, v);
        }
        rssi.validate(scale).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(rssi)
    }

    pub fn scoring(&self) -> Result<ScoringConfig, ConfigError> {
        if !(self.corruption_factor.is_finite() && self.corruption_factor >= 0.0) {
            return Err(ConfigError::Invalid("corruption_factor must be a non-negative number".into()));
        }
        Ok(ScoringConfig { corruption_factor: self.corruption_factor })
    }

    pub fn path_params(&self) -> Result<RegionPathParams, ConfigError> {
        let p = RegionPathParams {
            min_len: self.min_path_len,
            max_len: self.max_path_len,
            center_avoidance: self.center_avoidance,
        };
        p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(p)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let cfg = ExperimentConfig {
            seed: self.seed,
            history_size: self.history_size,
            test_paths: self.test_paths,
            path: self.path_params()?,
            schemes: self.schemes.clone(),
            grid: self.grid()?,
            scoring: self.scoring()?,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn mpps(&self) -> Result<MppsConfig, ConfigError> {
        Ok(MppsConfig {
            scale: self.scale()?,
            rssi: self.rssi()?,
            scoring: self.scoring()?,
            reservation_timeout: self.reservation_timeout,
            backup_ticks: self.backup_ticks,
            default_class: self.traffic_class,
        })
    }

    /// Checks every derived configuration at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.experiment()?;
        self.mpps()?;
        Ok(())
    }

    /// Key reference for `--help`.
    pub fn help_text() -> String {
        let mut out = String::from("Config keys (key = value, one per line, # starts a comment):\n");
        for (key, default, doc) in KEYS {
            out.push_str(&format!("  {key:<20} {doc} [default: {default}]\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_key_table() {
        let cfg = Config::default();
        assert_eq!(cfg.experiment().unwrap(), ExperimentConfig::default());
        assert_eq!(cfg.mpps().unwrap(), MppsConfig::default());
        for (key, default, _) in KEYS {
            if !default.contains("rssi_max") {
                let mut c = Config::default();
                c.set(key, default).unwrap();
                assert_eq!(c.experiment().unwrap(), ExperimentConfig::default(), "{key}");
                assert_eq!(c.mpps().unwrap(), MppsConfig::default(), "{key}");
            }
        }
    }

    #[test]
    fn parses_file_body() {
        let cfg = Config::parse("# comment\nseed = 7\n\nschemes = LTDPS, IP  # trailing\nrssi_max=31\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.schemes, vec![Scheme::Ltdps, Scheme::Ip]);
        let rssi = cfg.rssi().unwrap();
        assert_eq!((rssi.lv_mv_bound, rssi.mv_hv_bound), (11, 21));
    }

    #[test]
    fn rejects_unknown_and_bad_lines() {
        assert!(matches!(Config::parse("seed = 1\ncolour = red\n"), Err(ConfigError::Line { line: 2, .. })));
        assert!(matches!(Config::parse("seed\n"), Err(ConfigError::Syntax { line: 1 })));
        assert!(Config::parse("seed = -1\n").is_err());
        let cfg = Config::parse("lv_mv_bound = 80\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn threshold_override_moves_range() {
        let mut cfg = Config::default();
        cfg.apply_override("region_threshold=50").unwrap();
        let rssi = cfg.rssi().unwrap();
        assert_eq!(rssi.region_threshold, 50);
        assert!((rssi.range - 100.0 / 50.5).abs() < 1e-12);
    }

    #[test]
    fn help_lists_every_key() {
        let help = Config::help_text();
        for (key, _, _) in KEYS {
            assert!(help.contains(key));
        }
    }
}
