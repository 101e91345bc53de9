//! Run configuration: a JSON document whose sections mirror the flags.
//!
//! A config file is loaded first, then every flag that was given overwrites
//! the matching key. Sections stay as JSON until a command asks for a typed
//! value, so the resolved document can be echoed verbatim into the report
//! and replayed.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SECTIONS: [&str; 6] = ["kernel", "measure", "domain", "numeric", "output", "params"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    doc: Map<String, Value>,
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let Value::Object(doc) = value else {
            return Err(CliError::validation("config must be a JSON object"));
        };
        for (key, section) in &doc {
            if key == "command" {
                if !section.is_string() {
                    return Err(CliError::validation("config key `command` must be a string"));
                }
                continue;
            }
            if !SECTIONS.contains(&key.as_str()) {
                return Err(CliError::validation(format!("unknown config section `{key}`")));
            }
            if !section.is_object() {
                return Err(CliError::validation(format!("config section `{key}` must be an object")));
            }
        }
        Ok(Self { doc })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{} is not valid JSON: {e}", path.display())))?;
        Self::from_value(value)
    }

    pub fn command(&self) -> Option<&str> {
        self.doc.get("command").and_then(Value::as_str)
    }

    pub fn set_command(&mut self, command: &str) {
        self.doc.insert("command".into(), Value::String(command.into()));
    }

    /// Overwrites `section.key` when `value` is present.
    pub fn set<T: Into<Value>>(&mut self, section: &str, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.doc
                .entry(section)
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("sections are objects")
                .insert(key.into(), v.into());
        }
    }

    pub fn remove_section(&mut self, name: &str) {
        self.doc.remove(name);
    }

    pub fn section(&self, name: &str) -> Option<&Map<String, Value>> {
        self.doc.get(name).and_then(Value::as_object)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.section(name).is_some_and(|s| !s.is_empty())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.section(section).and_then(|s| s.get(key))
    }

    /// Typed view of a whole section.
    pub fn typed_section<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, CliError> {
        match self.doc.get(name) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::validation(format!("invalid `{name}` section: {e}"))),
        }
    }

    /// Typed `section.key`, `None` when absent.
    pub fn value<T: DeserializeOwned>(&self, section: &str, key: &str) -> Result<Option<T>, CliError> {
        match self.get(section, key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::validation(format!("invalid `{section}.{key}`: {e}"))),
        }
    }

    pub fn require<T: DeserializeOwned>(&self, section: &str, key: &str) -> Result<T, CliError> {
        self.value(section, key)?
            .ok_or_else(|| CliError::validation(format!("missing required `{section}.{key}`")))
    }

    pub fn to_value(&self) -> Value {
        Value::Object(self.doc.clone())
    }
}
