//! Name-keyed constructors for interchangeable algorithm variants.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Constructor taking shared options `A` and producing a boxed strategy `T`.
pub type Ctor<T, A> = fn(&A) -> Result<Box<T>>;

pub struct Registry<T: ?Sized, A> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Ctor<T, A>>,
}

impl<T: ?Sized, A> Registry<T, A> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Later registrations under the same name replace earlier ones.
    pub fn register(&mut self, name: &'static str, ctor: Ctor<T, A>) -> &mut Self {
        self.entries.insert(name, ctor);
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str, args: &A) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(ctor) => ctor(args),
            None => Err(Error::usage(format!(
                "unknown {} `{name}` (known: {})",
                self.kind,
                self.names().join(", ")
            ))),
        }
    }
}
