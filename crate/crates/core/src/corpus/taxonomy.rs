use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/taxonomy.toml");

/// Index of a class within a [`Taxonomy`] or a graph's label space.
pub type ClassId = usize;

/// Ordered, named set of classes. Class ids are list positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    classes: Vec<String>,
    index: HashMap<String, ClassId>,
    hints: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct TaxonomyFile {
    classes: Vec<String>,
    #[serde(default)]
    hints: BTreeMap<String, Vec<String>>,
}

impl Taxonomy {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.len() < 2 {
            return Err(Error::Config(format!(
                "taxonomy needs at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut index = HashMap::with_capacity(classes.len());
        for (id, name) in classes.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::Config("empty class name in taxonomy".into()));
            }
            if index.insert(name.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self {
            classes,
            index,
            hints: BTreeMap::new(),
        })
    }

    /// Attaches few-shot keyword hints. Every key must be a known class.
    pub fn with_hints(mut self, hints: BTreeMap<String, Vec<String>>) -> Result<Self> {
        if let Some(unknown) = hints.keys().find(|k| !self.index.contains_key(*k)) {
            return Err(Error::Config(format!("hints given for unknown class {unknown:?}")));
        }
        self.hints = hints;
        Ok(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TaxonomyFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("taxonomy: {e}")))?;
        Self::new(file.classes)?.with_hints(file.hints)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// The 16-class taxonomy shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED).expect("bundled taxonomy is valid")
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.classes.get(id).map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn hints(&self) -> &BTreeMap<String, Vec<String>> {
        &self.hints
    }

    /// Stable 64-bit FNV-1a digest of the class list, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for name in &self.classes {
            for byte in name.bytes().chain(std::iter::once(0u8)) {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        format!("{hash:016x}")
    }
}
