use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// A failed run: a stable machine-readable kind plus a message.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            kind: "config",
            message: message.into(),
        }
    }

    /// 2 for problems with the invocation itself, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self.kind {
            "usage" | "config" | "missing_input" => 2,
            _ => 1,
        }
    }

    pub fn report(&self) {
        let body = serde_json::json!({ "error": { "kind": self.kind, "message": self.message } });
        eprintln!("{body}");
    }
}

impl From<subprobe::Error> for Failure {
    fn from(e: subprobe::Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            kind: "io",
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            kind: "json",
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Default)]
pub struct ConfigFile {
    root: Map<String, Value>,
}

fn normalize_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k.replace('-', "_"), normalize_keys(v))).collect()),
        other => other,
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let value = serde_json::to_value(table).map_err(|e| Failure::config(e.to_string()))?;
        match normalize_keys(value) {
            Value::Object(root) => Ok(ConfigFile { root }),
            _ => Err(Failure::config("config root must be a table")),
        }
    }

    pub fn jobs(&self, flag: Option<usize>) -> Result<usize, Failure> {
        if let Some(j) = flag {
            return Ok(j);
        }
        match self.root.get("jobs") {
            None => Ok(0),
            Some(v) => v
                .as_u64()
                .map(|j| j as usize)
                .ok_or_else(|| Failure::config("jobs must be a non-negative integer")),
        }
    }

    /// Overlay the flags that were given onto the config table at `path`.
    /// Keys the subcommand does not know are rejected.
    pub fn resolve<T>(&self, flags: &T, path: &[&str]) -> Result<T, Failure>
    where
        T: Serialize + DeserializeOwned + Default,
    {
        let mut table = Map::new();
        let mut node = Some(&self.root);
        for key in path {
            let key = key.replace('-', "_");
            node = match node.and_then(|n| n.get(&key)) {
                Some(Value::Object(m)) => Some(m),
                Some(_) => return Err(Failure::config(format!("[{}] must be a table", path.join(".")))),
                None => None,
            };
        }
        if let Some(n) = node {
            table = n.clone();
        }
        let known = match serde_json::to_value(T::default())? {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        // nested subcommand tables are not options
        let nested: Vec<String> = table
            .iter()
            .filter(|(k, v)| v.is_object() && !known.contains_key(*k))
            .map(|(k, _)| k.clone())
            .collect();
        for k in nested {
            table.remove(&k);
        }
        if let Some(unknown) = table.keys().find(|k| !known.contains_key(*k)) {
            return Err(Failure::config(format!("unknown key {unknown:?} in [{}]", path.join("."))));
        }
        if let Value::Object(given) = serde_json::to_value(flags)? {
            for (k, v) in given {
                if !v.is_null() {
                    table.insert(k, v);
                }
            }
        }
        serde_json::from_value(Value::Object(table))
            .map_err(|e| Failure::config(format!("[{}]: {e}", path.join("."))))
    }
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, Failure> {
    value
        .clone()
        .ok_or_else(|| Failure::config(format!("missing required option --{flag}")))
}

/// Fail before any work starts if an input is missing.
pub fn existing(path: &Path, flag: &str) -> Result<PathBuf, Failure> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(Failure {
            kind: "missing_input",
            message: format!("--{flag}: {} does not exist", path.display()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    struct Opts {
        seed: Option<u64>,
        out: Option<String>,
        layers: Option<Vec<String>>,
    }

    fn file(text: &str) -> ConfigFile {
        let table: toml::Table = toml::from_str(text).unwrap();
        match normalize_keys(serde_json::to_value(table).unwrap()) {
            Value::Object(root) => ConfigFile { root },
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_file() {
        let f = file("[sweep]\nseed = 3\nout = \"a\"\n");
        let flags = Opts {
            seed: Some(9),
            ..Default::default()
        };
        let r: Opts = f.resolve(&flags, &["sweep"]).unwrap();
        assert_eq!(r.seed, Some(9));
        assert_eq!(r.out.as_deref(), Some("a"));
    }

    #[test]
    fn nested_tables_and_unknown_keys() {
        let f = file("[probe.train]\nseed = 1\n[probe]\n");
        let r: Opts = f.resolve(&Opts::default(), &["probe", "train"]).unwrap();
        assert_eq!(r.seed, Some(1));
        let bad = file("[sweep]\nsede = 1\n");
        assert_eq!(bad.resolve::<Opts>(&Opts::default(), &["sweep"]).unwrap_err().kind, "config");
    }

    #[test]
    fn kebab_keys_accepted() {
        let f = file("jobs = 4\n[extract-check]\nseed = 2\n");
        let r: Opts = f.resolve(&Opts::default(), &["extract-check"]).unwrap();
        assert_eq!(r.seed, Some(2));
        assert_eq!(f.jobs(None).unwrap(), 4);
        assert_eq!(f.jobs(Some(1)).unwrap(), 1);
    }
}
