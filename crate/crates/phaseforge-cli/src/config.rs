//! Flat `key=value` config files and flag/config/default resolution.
//!
//! Every CLI flag mirrors a config key one-to-one (the key is the long flag
//! name). Precedence: explicit flag, then config file, then built-in
//! default. Unknown keys are rejected, and each run echoes the fully
//! resolved configuration it actually used.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use phaseforge::Error;

pub struct Resolver {
    values: BTreeMap<String, String>,
    recognized: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>) -> Result<Resolver, Error> {
        let mut values = BTreeMap::new();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                    detail: format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        lineno + 1
                    ),
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Resolver {
            values,
            recognized: BTreeSet::new(),
            resolved: Vec::new(),
        })
    }

    fn config_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, Error> {
        self.recognized.insert(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| Error::Config {
                detail: format!("config key '{key}': cannot parse '{raw}'"),
            }),
        }
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Flag > config > default.
    pub fn get<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, Error> {
        let from_config = self.config_value::<T>(key)?;
        let value = flag.or(from_config).unwrap_or(default);
        self.record(key, &value);
        Ok(value)
    }

    /// Flag > config; missing is a config error.
    pub fn require<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<T, Error> {
        let from_config = self.config_value::<T>(key)?;
        let value = flag.or(from_config).ok_or_else(|| Error::Config {
            detail: format!("missing required option '--{key}' (or config key '{key}')"),
        })?;
        self.record(key, &value);
        Ok(value)
    }

    /// Flag > config; absent stays absent.
    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, Error> {
        let from_config = self.config_value::<T>(key)?;
        let value = flag.or(from_config);
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    pub fn require_path(
        &mut self,
        key: &str,
        flag: Option<PathBuf>,
    ) -> Result<PathBuf, Error> {
        let from_config = self.config_value::<String>(key)?.map(PathBuf::from);
        let value = flag.or(from_config).ok_or_else(|| Error::Config {
            detail: format!("missing required option '--{key}' (or config key '{key}')"),
        })?;
        self.record(key, value.display());
        Ok(value)
    }

    pub fn get_path(
        &mut self,
        key: &str,
        flag: Option<PathBuf>,
        default: PathBuf,
    ) -> Result<PathBuf, Error> {
        let from_config = self.config_value::<String>(key)?.map(PathBuf::from);
        let value = flag.or(from_config).unwrap_or(default);
        self.record(key, value.display());
        Ok(value)
    }

    pub fn optional_path(
        &mut self,
        key: &str,
        flag: Option<PathBuf>,
    ) -> Result<Option<PathBuf>, Error> {
        let from_config = self.config_value::<String>(key)?.map(PathBuf::from);
        let value = flag.or(from_config);
        if let Some(v) = &value {
            self.record(key, v.display());
        }
        Ok(value)
    }

    /// Boolean switch: `--flag` on the command line, `flag=true` in config.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, Error> {
        let from_config = self.config_value::<bool>(key)?;
        let value = flag || from_config.unwrap_or(false);
        self.record(key, value);
        Ok(value)
    }

    /// Fail on config keys no option ever looked at.
    pub fn finish(self) -> Result<Vec<(String, String)>, Error> {
        for key in self.values.keys() {
            if !self.recognized.contains(key) {
                return Err(Error::Config {
                    detail: format!("unknown config key '{key}'"),
                });
            }
        }
        Ok(self.resolved)
    }
}

/// Echo the fully resolved configuration.
pub fn echo(command: &str, resolved: &[(String, String)]) {
    println!("# phaseforge {command} (resolved configuration)");
    for (k, v) in resolved {
        println!("{k}={v}");
    }
}

/// Refuse to clobber an existing output unless forced. Directories count as
/// existing when they contain anything.
pub fn ensure_writable(path: &Path, force: bool) -> Result<(), Error> {
    let exists = if path.is_dir() {
        std::fs::read_dir(path)
            .map(|mut d| d.next().is_some())
            .unwrap_or(false)
    } else {
        path.exists()
    };
    if exists && !force {
        return Err(Error::Config {
            detail: format!(
                "output {} already exists; pass --force to overwrite",
                path.display()
            ),
        });
    }
    Ok(())
}

/// Parse a comma-separated list.
pub fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, Error> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| Error::Config {
                detail: format!("cannot parse '{s}' in {what} list"),
            })
        })
        .collect()
}

/// Parent directory helper for outputs.
pub fn create_parent(path: &Path) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: PathBuf::from(parent),
                source: e,
            })?;
        }
    }
    Ok(())
}
