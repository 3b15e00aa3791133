use std::path::{Path, PathBuf};

use penfit_core::{PenaltyFamily, PenaltySpec, DEFAULT_MCP_GAMMA, DEFAULT_SCAD_GAMMA};

use crate::errors::{CliError, CliResult};
use crate::output::log;

/// Keys accepted in a `--config` TOML file; anything else is a typo and is
/// rejected up front. Keys are the snake_case forms of the long flags.
const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "comparators",
    "data",
    "family",
    "fit",
    "folds",
    "full_scale",
    "gamma",
    "lambda2",
    "lambda_min_ratio",
    "max_active",
    "max_sweeps",
    "methods_out",
    "nlambda",
    "out",
    "penalty",
    "plot_out",
    "reps",
    "rule",
    "scenario",
    "screen_limit",
    "seed",
    "status",
    "threads",
    "unpenalized",
    "y",
];

/// One value source below the command line: a typed read from either an
/// environment variable or the config file.
pub trait Setting: Sized {
    fn from_toml(value: &toml::Value) -> Option<Self>;
    fn from_text(text: &str) -> Option<Self>;
}

impl Setting for String {
    fn from_toml(value: &toml::Value) -> Option<Self> {
        value.as_str().map(|s| s.to_string())
    }
    fn from_text(text: &str) -> Option<Self> {
        Some(text.to_string())
    }
}

impl Setting for PathBuf {
    fn from_toml(value: &toml::Value) -> Option<Self> {
        value.as_str().map(PathBuf::from)
    }
    fn from_text(text: &str) -> Option<Self> {
        Some(PathBuf::from(text))
    }
}

impl Setting for f64 {
    fn from_toml(value: &toml::Value) -> Option<Self> {
        match value {
            toml::Value::Float(v) => Some(*v),
            toml::Value::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }
    fn from_text(text: &str) -> Option<Self> {
        text.parse().ok()
    }
}

impl Setting for usize {
    fn from_toml(value: &toml::Value) -> Option<Self> {
        value.as_integer().and_then(|v| usize::try_from(v).ok())
    }
    fn from_text(text: &str) -> Option<Self> {
        text.parse().ok()
    }
}

impl Setting for u64 {
    fn from_toml(value: &toml::Value) -> Option<Self> {
        value.as_integer().and_then(|v| u64::try_from(v).ok())
    }
    fn from_text(text: &str) -> Option<Self> {
        text.parse().ok()
    }
}

impl Setting for bool {
    fn from_toml(value: &toml::Value) -> Option<Self> {
        value.as_bool()
    }
    fn from_text(text: &str) -> Option<Self> {
        match text {
            "1" | "true" | "yes" => Some(true),
            "0" | "false" | "no" => Some(false),
            _ => None,
        }
    }
}

/// Resolution context: the parsed config file, if any. Lookup order for every
/// option is command-line flag, then `PENFIT_<KEY>` environment variable,
/// then config file, then the built-in default at the call site.
pub struct Ctx {
    file: toml::Table,
}

impl Ctx {
    pub fn load(path: Option<&Path>) -> CliResult<Ctx> {
        let file = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config file {}: {e}", p.display()))
                })?;
                let table: toml::Table = text.parse().map_err(|e| {
                    CliError::usage(format!("config file {}: {e}", p.display()))
                })?;
                for key in table.keys() {
                    if !CONFIG_KEYS.contains(&key.as_str()) {
                        return Err(CliError::usage(format!(
                            "config file {}: unknown key \"{key}\"",
                            p.display()
                        )));
                    }
                }
                table
            }
        };
        Ok(Ctx { file })
    }

    /// Flag > environment > config file; `None` when nothing supplies the key.
    pub fn resolve<T: Setting>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        let var = format!("PENFIT_{}", key.to_uppercase());
        if let Ok(text) = std::env::var(&var) {
            return match T::from_text(&text) {
                Some(v) => Ok(Some(v)),
                None => Err(CliError::usage(format!(
                    "environment variable {var}: cannot interpret \"{text}\""
                ))),
            };
        }
        if let Some(value) = self.file.get(key) {
            return match T::from_toml(value) {
                Some(v) => Ok(Some(v)),
                None => Err(CliError::usage(format!(
                    "config key \"{key}\": unexpected value type"
                ))),
            };
        }
        Ok(None)
    }

    pub fn resolve_or<T: Setting>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.resolve(flag, key)?.unwrap_or(default))
    }

    /// Resolved seed for a randomized subcommand. When nothing supplies one,
    /// a fresh entropy seed is drawn and logged so the run can be repeated.
    pub fn resolve_seed(&self, flag: Option<u64>) -> CliResult<u64> {
        match self.resolve(flag, "seed")? {
            Some(v) => {
                log(format!("seed {v}"));
                Ok(v)
            }
            None => {
                let v: u64 = rand::random();
                log(format!("seed {v} (generated; pass --seed {v} to reproduce)"));
                Ok(v)
            }
        }
    }
}

/// Build a penalty specification (with lambda 0; the path solver supplies
/// lambda) from the resolved penalty name and tuning parameters.
pub fn penalty_spec(
    name: &str,
    gamma: Option<f64>,
    lambda2: Option<f64>,
) -> CliResult<PenaltySpec> {
    let spec = match name {
        "lasso" => PenaltySpec::lasso(0.0),
        "enet" | "elastic-net" => {
            let l2 = lambda2.ok_or_else(|| {
                CliError::usage("--penalty enet requires --lambda2 (the ridge weight)")
            })?;
            PenaltySpec::elastic_net(0.0, l2)
        }
        "mcp" => PenaltySpec::mcp(0.0, gamma.unwrap_or(DEFAULT_MCP_GAMMA)),
        "scad" => PenaltySpec::scad(0.0, gamma.unwrap_or(DEFAULT_SCAD_GAMMA)),
        other => {
            return Err(CliError::usage(format!(
                "unknown penalty \"{other}\"; expected lasso, enet, mcp, or scad"
            )));
        }
    };
    if gamma.is_some() && !matches!(spec.family, PenaltyFamily::Mcp | PenaltyFamily::Scad) {
        return Err(CliError::usage("--gamma only applies to mcp and scad"));
    }
    if lambda2.is_some() && spec.family != PenaltyFamily::ElasticNet {
        return Err(CliError::usage("--lambda2 only applies to enet"));
    }
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(spec)
}
