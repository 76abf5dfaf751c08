//! Knowledge base loading and validation.
//!
//! A knowledge base is three JSON files: the type hierarchy, the entity
//! records and the alias dictionary. Loading checks referential integrity
//! across all three and closes every entity's type set under ancestors, so
//! a coarse type test never misses an entity that only lists a fine type.

mod alias;
mod hierarchy;
pub mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use alias::{normalize_surface, AliasEntry, AliasTable};
pub use hierarchy::{InvalidTypeId, TypeDecl, TypeHierarchy, TypeId};
use schema::{AliasesFile, EntitiesFile, TypesFile};

pub const TYPES_FILE: &str = "types.json";
pub const ENTITIES_FILE: &str = "entities.json";
pub const ALIASES_FILE: &str = "aliases.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    Type,
    Entity,
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefKind::Type => "type",
            RefKind::Entity => "entity",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },
    #[error("type hierarchy is not acyclic; cycle involves {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("{kind} `{id}` referenced by `{referrer}` does not exist")]
    DanglingRef {
        kind: RefKind,
        id: String,
        referrer: String,
    },
    #[error("unknown type `{0}`")]
    UnknownType(String),
}

impl KbError {
    pub(crate) fn parse(what: impl Into<String>, message: impl Into<String>) -> Self {
        KbError::Parse {
            what: what.into(),
            message: message.into(),
        }
    }
}

/// A knowledge-base entity with its ancestor-closed type set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityRecord {
    pub entity_id: String,
    pub name: String,
    pub types: BTreeSet<TypeId>,
    pub description: String,
}

impl EntityRecord {
    pub fn has_type(&self, t: &TypeId) -> bool {
        self.types.contains(t)
    }
}

/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    hierarchy: TypeHierarchy,
    entities: BTreeMap<String, EntityRecord>,
    aliases: AliasTable,
}

impl KnowledgeBase {
    /// Loads `types.json`, `entities.json` and `aliases.json` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        let dir = dir.as_ref();
        Self::load(
            dir.join(TYPES_FILE),
            dir.join(ENTITIES_FILE),
            dir.join(ALIASES_FILE),
        )
    }

    pub fn load(
        types_file: impl AsRef<Path>,
        entities_file: impl AsRef<Path>,
        aliases_file: impl AsRef<Path>,
    ) -> Result<Self, KbError> {
        let types: TypesFile = read_json(types_file.as_ref())?;
        let entities: EntitiesFile = read_json(entities_file.as_ref())?;
        let aliases: AliasesFile = read_json(aliases_file.as_ref())?;
        Self::from_schema(types, entities, aliases)
    }

    pub fn from_json_strs(types: &str, entities: &str, aliases: &str) -> Result<Self, KbError> {
        let parse = |what: &str, e: serde_json::Error| KbError::parse(what, e.to_string());
        Self::from_schema(
            serde_json::from_str(types).map_err(|e| parse(TYPES_FILE, e))?,
            serde_json::from_str(entities).map_err(|e| parse(ENTITIES_FILE, e))?,
            serde_json::from_str(aliases).map_err(|e| parse(ALIASES_FILE, e))?,
        )
    }

    pub fn from_schema(
        types: TypesFile,
        entities: EntitiesFile,
        aliases: AliasesFile,
    ) -> Result<Self, KbError> {
        let hierarchy = build_hierarchy(types)?;

        let mut records = BTreeMap::new();
        for e in entities.entities {
            if e.types.is_empty() {
                return Err(KbError::parse(
                    ENTITIES_FILE,
                    format!("entity `{}` has no types", e.id),
                ));
            }
            let mut declared = Vec::with_capacity(e.types.len());
            for raw in &e.types {
                let t = TypeId::new(raw.as_str())
                    .map_err(|err| KbError::parse(ENTITIES_FILE, err.to_string()))?;
                if !hierarchy.contains(&t) {
                    return Err(KbError::DanglingRef {
                        kind: RefKind::Type,
                        id: t.to_string(),
                        referrer: e.id.clone(),
                    });
                }
                declared.push(t);
            }
            let types = hierarchy.ancestor_closure(&declared)?;
            let record = EntityRecord {
                entity_id: e.id.clone(),
                name: e.name,
                types,
                description: e.description,
            };
            if records.insert(e.id.clone(), record).is_some() {
                return Err(KbError::parse(
                    ENTITIES_FILE,
                    format!("duplicate entity `{}`", e.id),
                ));
            }
        }

        let mut table = AliasTable::new();
        for entry in aliases.aliases {
            let mut seen = BTreeSet::new();
            for c in &entry.candidates {
                if !records.contains_key(&c.entity) {
                    return Err(KbError::DanglingRef {
                        kind: RefKind::Entity,
                        id: c.entity.clone(),
                        referrer: format!("alias `{}`", entry.surface),
                    });
                }
                if !seen.insert(c.entity.as_str()) {
                    return Err(KbError::parse(
                        ALIASES_FILE,
                        format!(
                            "entity `{}` listed twice for surface `{}`",
                            c.entity, entry.surface
                        ),
                    ));
                }
                table.add(&entry.surface, &c.entity, c.count);
            }
        }

        Ok(KnowledgeBase {
            hierarchy,
            entities: records,
            aliases: table,
        })
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn entity(&self, id: &str) -> Option<&EntityRecord> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn aliases(&self) -> &AliasTable {
        &self.aliases
    }
}

fn build_hierarchy(types: TypesFile) -> Result<TypeHierarchy, KbError> {
    let id =
        |raw: String| TypeId::new(raw).map_err(|err| KbError::parse(TYPES_FILE, err.to_string()));
    let decls = types
        .types
        .into_iter()
        .map(|t| {
            Ok(TypeDecl {
                id: id(t.id)?,
                parents: t.parents.into_iter().map(id).collect::<Result<_, _>>()?,
                definition: t.definition,
            })
        })
        .collect::<Result<Vec<_>, KbError>>()?;
    TypeHierarchy::from_decls(decls)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, KbError> {
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| KbError::parse(path.display().to_string(), e.to_string()))
}
