//! On-disk JSON shapes for the knowledge-base files. Unknown keys are ignored.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypesFile {
    pub types: Vec<TypeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub id: String,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub definition: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitiesFile {
    pub entities: Vec<EntityEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityEntry {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub types: Vec<String>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasesFile {
    pub aliases: Vec<AliasSurface>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasSurface {
    pub surface: String,
    pub candidates: Vec<AliasCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasCount {
    pub entity: String,
    pub count: u64,
}

impl TypeEntry {
    pub fn new(id: &str, parents: &[&str], definition: &str) -> Self {
        TypeEntry {
            id: id.to_string(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            definition: definition.to_string(),
        }
    }
}

impl EntityEntry {
    pub fn new(id: &str, name: &str, types: &[&str], description: &str) -> Self {
        EntityEntry {
            id: id.to_string(),
            name: name.to_string(),
            types: types.iter().map(|t| t.to_string()).collect(),
            description: description.to_string(),
        }
    }
}

impl AliasSurface {
    pub fn new(surface: &str, candidates: &[(&str, u64)]) -> Self {
        AliasSurface {
            surface: surface.to_string(),
            candidates: candidates
                .iter()
                .map(|(e, c)| AliasCount {
                    entity: e.to_string(),
                    count: *c,
                })
                .collect(),
        }
    }
}
