use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Name-keyed table of strategy builders.
#[derive(Clone)]
pub struct Registry<B> {
    kind: &'static str,
    entries: BTreeMap<String, B>,
}

impl<B> Registry<B> {
    pub fn new(kind: &'static str) -> Self {
        Registry { kind, entries: BTreeMap::new() }
    }

    /// Adds or replaces the builder registered under `name`.
    pub fn register(&mut self, name: impl Into<String>, builder: B) -> &mut Self {
        self.entries.insert(name.into(), builder);
        self
    }

    pub fn get(&self, name: &str) -> Result<&B> {
        self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            registry: self.kind,
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl<B> std::fmt::Debug for Registry<B> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}
