//! Name-keyed registries for runtime-selectable strategies.

use std::collections::BTreeMap;
use std::fmt;

/// Constructor stored in a registry.
pub type Factory<T> = Box<dyn Fn() -> Box<T> + Send + Sync>;

/// A set of strategy constructors addressed by a stable string name.
///
/// Names are kept in a `BTreeMap` so that [`Registry::names`] lists them in a
/// deterministic order (used in CLI help and error messages).
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Factory<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{name}` (available: {available})")]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register(
        &mut self,
        name: &'static str,
        factory: impl Fn() -> Box<T> + Send + Sync + 'static,
    ) -> &mut Self {
        self.entries.insert(name, Box::new(factory));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<T>, UnknownStrategy> {
        match self.entries.get(name) {
            Some(factory) => Ok(factory()),
            None => Err(UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}
