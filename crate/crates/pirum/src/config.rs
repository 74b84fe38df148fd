//! `key = value` configuration files and flag/config/default resolution.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    Config,
    Default,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Flag => "flag",
            Source::Config => "config",
            Source::Default => "default",
        }
    }
}

/// Parsed config file. Keys use underscores (`grid_step`); dashes are
/// accepted and normalized.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
    effective: RefCell<Vec<(String, String, Source)>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(Error::Usage(format!("config line {}: empty key", i + 1)));
            }
            if entries.insert(key.clone(), (v.trim().to_string(), i + 1)).is_some() {
                return Err(Error::Usage(format!("config line {}: `{key}` set twice", i + 1)));
            }
        }
        Ok(Config { entries, ..Config::default() })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
        Config::parse(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some((raw, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        raw.parse()
            .map(Some)
            .map_err(|_| Error::Usage(format!("config line {line}: `{raw}` is not a valid value for `{key}`")))
    }

    fn record(&self, key: &str, value: String, source: Source) {
        self.effective.borrow_mut().push((key.to_string(), value, source));
    }

    /// Flag if given, else the config entry, else `default`.
    pub fn resolve<T: FromStr + Display>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let from_config = self.lookup::<T>(key)?;
        let (v, src) = match (flag, from_config) {
            (Some(v), _) => (v, Source::Flag),
            (None, Some(v)) => (v, Source::Config),
            (None, None) => (default, Source::Default),
        };
        self.record(key, v.to_string(), src);
        Ok(v)
    }

    /// Like [`Config::resolve`] without a default.
    pub fn resolve_opt<T: FromStr + Display>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let from_config = self.lookup::<T>(key)?;
        let (v, src) = match (flag, from_config) {
            (Some(v), _) => (Some(v), Source::Flag),
            (None, Some(v)) => (Some(v), Source::Config),
            (None, None) => (None, Source::Default),
        };
        self.record(key, v.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "-".into()), src);
        Ok(v)
    }

    /// A value that must come from a flag or the config.
    pub fn require<T: FromStr + Display>(&self, key: &str, flag: Option<T>) -> Result<T> {
        self.resolve_opt(key, flag)?
            .ok_or_else(|| Error::Usage(format!("`--{}` is required", key.replace('_', "-"))))
    }

    /// Fails on config keys the command never asked for.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            Some((k, (_, line))) => Err(Error::Usage(format!("config line {line}: unknown key `{k}` for this command"))),
            None => Ok(()),
        }
    }

    pub fn echo(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "# effective configuration")?;
        for (k, v, s) in self.effective.borrow().iter() {
            writeln!(w, "#   {k} = {v} ({})", s.name())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_config_default() {
        let c = Config::parse("seed = 7\n# comment\npopulation=30 # trailing\n").unwrap();
        assert_eq!(c.resolve("seed", Some(3u64), 0).unwrap(), 3);
        assert_eq!(c.resolve::<usize>("population", None, 50).unwrap(), 30);
        assert_eq!(c.resolve::<usize>("generations", None, 100).unwrap(), 100);
        c.check_unused().unwrap();
        let mut out = Vec::new();
        c.echo(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("seed = 3 (flag)") && text.contains("population = 30 (config)"), "{text}");
    }

    #[test]
    fn bad_lines_and_unknown_keys() {
        assert!(Config::parse("no equals sign").unwrap_err().is_usage());
        let c = Config::parse("grid-step = 0.1\ntypo = 1").unwrap();
        assert_eq!(c.resolve::<f64>("grid_step", None, 0.01).unwrap(), 0.1);
        assert!(c.check_unused().is_err());
        let c = Config::parse("seed = x").unwrap();
        assert!(c.resolve::<u64>("seed", None, 0).is_err());
    }
}
