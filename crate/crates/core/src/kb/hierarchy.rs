//! Type identifiers and the type hierarchy DAG.
//!
//! Types are addressed by slash-delimited paths (`/person/athlete`). Every
//! type without declared parents hangs off a single virtual root which is
//! never materialised as a node and never returned from a query.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KbError;

/// A slash-delimited type path such as `/person/athlete`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TypeId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid type path `{path}`: {reason}")]
pub struct InvalidTypeId {
    pub path: String,
    pub reason: &'static str,
}

impl TypeId {
    pub fn new(path: impl Into<String>) -> Result<Self, InvalidTypeId> {
        let path = path.into();
        let invalid = |reason| InvalidTypeId {
            path: path.clone(),
            reason,
        };
        let Some(rest) = path.strip_prefix('/') else {
            return Err(invalid("must begin with `/`"));
        };
        for segment in rest.split('/') {
            if segment.is_empty() {
                return Err(invalid("empty path segment"));
            }
            if segment.chars().any(char::is_whitespace) {
                return Err(invalid("segment contains whitespace"));
            }
        }
        Ok(TypeId(path))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Number of path segments; top-level types have depth 1.
    pub fn depth(&self) -> usize {
        self.0.matches('/').count()
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.0[1..].split('/')
    }

    /// Path with the last segment removed, or `None` for a top-level type.
    pub fn parent_path(&self) -> Option<&str> {
        match self.0.rfind('/') {
            Some(0) | None => None,
            Some(i) => Some(&self.0[..i]),
        }
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for TypeId {
    type Err = InvalidTypeId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TypeId::new(s)
    }
}

impl TryFrom<String> for TypeId {
    type Error = InvalidTypeId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        TypeId::new(value)
    }
}

impl From<TypeId> for String {
    fn from(value: TypeId) -> Self {
        value.0
    }
}

impl AsRef<str> for TypeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One declared type with its direct parents, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub id: TypeId,
    pub parents: Vec<TypeId>,
    pub definition: String,
}

/// The type set organised as a rooted DAG.
///
/// Nodes are kept in declaration order; all set-valued queries return
/// `BTreeSet`s so results are ordered by path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeHierarchy {
    ids: Vec<TypeId>,
    index: HashMap<TypeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    definitions: Vec<String>,
}

#[derive(Clone, Copy)]
enum Direction {
    Up,
    Down,
}

impl TypeHierarchy {
    /// Builds and validates a hierarchy.
    ///
    /// Checks, in order: duplicate ids, dangling parent references, cycles,
    /// and finally that each path agrees with its first-declared parent.
    pub fn from_decls(decls: Vec<TypeDecl>) -> Result<Self, KbError> {
        let mut index = HashMap::with_capacity(decls.len());
        for (i, decl) in decls.iter().enumerate() {
            if index.insert(decl.id.clone(), i).is_some() {
                return Err(KbError::parse(
                    "types",
                    format!("duplicate type `{}`", decl.id),
                ));
            }
        }

        let mut parents = Vec::with_capacity(decls.len());
        for decl in &decls {
            let mut ps: Vec<usize> = Vec::with_capacity(decl.parents.len());
            for p in &decl.parents {
                let Some(&pi) = index.get(p) else {
                    return Err(KbError::DanglingRef {
                        kind: super::RefKind::Type,
                        id: p.to_string(),
                        referrer: decl.id.to_string(),
                    });
                };
                if !ps.contains(&pi) {
                    ps.push(pi);
                }
            }
            parents.push(ps);
        }

        let mut children = vec![Vec::new(); decls.len()];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(child);
            }
        }

        check_acyclic(&decls, &parents, &children)?;

        for (decl, ps) in decls.iter().zip(&parents) {
            let expected = decl.id.parent_path();
            let canonical = ps.first().map(|&p| decls[p].id.as_str());
            if expected != canonical {
                return Err(KbError::parse(
                    "types",
                    format!(
                        "type `{}` must list `{}` as its first parent",
                        decl.id,
                        expected.unwrap_or("no parents (top level)")
                    ),
                ));
            }
        }

        let (ids, definitions) = decls.into_iter().map(|d| (d.id, d.definition)).unzip();
        Ok(TypeHierarchy {
            ids,
            index,
            parents,
            children,
            definitions,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, t: &TypeId) -> bool {
        self.index.contains_key(t)
    }

    /// All types in declaration order.
    pub fn ids(&self) -> &[TypeId] {
        &self.ids
    }

    pub fn all_types(&self) -> BTreeSet<TypeId> {
        self.ids.iter().cloned().collect()
    }

    /// Children of the virtual root.
    pub fn roots(&self) -> impl Iterator<Item = &TypeId> {
        self.ids
            .iter()
            .zip(&self.parents)
            .filter(|(_, ps)| ps.is_empty())
            .map(|(id, _)| id)
    }

    pub fn definition(&self, t: &TypeId) -> Option<&str> {
        self.index.get(t).map(|&i| self.definitions[i].as_str())
    }

    pub fn parents(&self, t: &TypeId) -> Result<Vec<&TypeId>, KbError> {
        let i = self.idx(t)?;
        Ok(self.parents[i].iter().map(|&p| &self.ids[p]).collect())
    }

    pub fn children(&self, t: &TypeId) -> Result<Vec<&TypeId>, KbError> {
        let i = self.idx(t)?;
        Ok(self.children[i].iter().map(|&c| &self.ids[c]).collect())
    }

    /// Every type with a directed path down to `t`, excluding `t` itself.
    pub fn ancestors(&self, t: &TypeId) -> Result<BTreeSet<TypeId>, KbError> {
        let i = self.idx(t)?;
        Ok(self.collect(i, Direction::Up))
    }

    /// Every type reachable from `t`, excluding `t` itself.
    pub fn descendants(&self, t: &TypeId) -> Result<BTreeSet<TypeId>, KbError> {
        let i = self.idx(t)?;
        Ok(self.collect(i, Direction::Down))
    }

    /// True when `ancestor` is a strict ancestor of `descendant`.
    /// Unknown types are never related.
    pub fn is_ancestor(&self, ancestor: &TypeId, descendant: &TypeId) -> bool {
        match (self.index.get(ancestor), self.index.get(descendant)) {
            (Some(&a), Some(&d)) if a != d => self.reach(d, Direction::Up)[a],
            _ => false,
        }
    }

    /// `types` together with all of their ancestors.
    pub fn ancestor_closure<'a, I>(&self, types: I) -> Result<BTreeSet<TypeId>, KbError>
    where
        I: IntoIterator<Item = &'a TypeId>,
    {
        let mut seen = vec![false; self.len()];
        let mut stack = Vec::new();
        for t in types {
            let i = self.idx(t)?;
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
        while let Some(n) = stack.pop() {
            for &p in &self.parents[n] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        Ok(self.ids_where(&seen))
    }

    /// The hierarchy restricted to `t` and its descendants, with induced edges.
    /// `t` becomes the only root of the result.
    pub fn subtree(&self, t: &TypeId) -> Result<TypeHierarchy, KbError> {
        let root = self.idx(t)?;
        let keep = {
            let mut r = self.reach(root, Direction::Down);
            r[root] = true;
            r
        };
        let mut remap = vec![usize::MAX; self.len()];
        let mut ids = Vec::new();
        let mut definitions = Vec::new();
        for (old, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
            remap[old] = ids.len();
            ids.push(self.ids[old].clone());
            definitions.push(self.definitions[old].clone());
        }
        let mut parents = vec![Vec::new(); ids.len()];
        let mut children = vec![Vec::new(); ids.len()];
        for (old, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
            if old == root {
                continue;
            }
            for &p in &self.parents[old] {
                if keep[p] {
                    parents[remap[old]].push(remap[p]);
                }
            }
            for &c in &self.children[old] {
                children[remap[old]].push(remap[c]);
            }
        }
        children[remap[root]] = self.children[root].iter().map(|&c| remap[c]).collect();
        let index = ids
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        Ok(TypeHierarchy {
            ids,
            index,
            parents,
            children,
            definitions,
        })
    }

    /// Declarations equivalent to this hierarchy, in declaration order.
    pub fn to_decls(&self) -> Vec<TypeDecl> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| TypeDecl {
                id: id.clone(),
                parents: self.parents[i]
                    .iter()
                    .map(|&p| self.ids[p].clone())
                    .collect(),
                definition: self.definitions[i].clone(),
            })
            .collect()
    }

    fn idx(&self, t: &TypeId) -> Result<usize, KbError> {
        self.index
            .get(t)
            .copied()
            .ok_or_else(|| KbError::UnknownType(t.to_string()))
    }

    fn reach(&self, start: usize, dir: Direction) -> Vec<bool> {
        let edges = match dir {
            Direction::Up => &self.parents,
            Direction::Down => &self.children,
        };
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for &m in &edges[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen
    }

    fn collect(&self, start: usize, dir: Direction) -> BTreeSet<TypeId> {
        let mut seen = self.reach(start, dir);
        seen[start] = false;
        self.ids_where(&seen)
    }

    fn ids_where(&self, mask: &[bool]) -> BTreeSet<TypeId> {
        mask.iter()
            .zip(&self.ids)
            .filter(|(m, _)| **m)
            .map(|(_, id)| id.clone())
            .collect()
    }
}

// Kahn's algorithm; whatever cannot be ordered sits on or behind a cycle.
fn check_acyclic(
    decls: &[TypeDecl],
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> Result<(), KbError> {
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..decls.len()).filter(|&i| indegree[i] == 0).collect();
    let mut ordered = 0;
    while let Some(n) = queue.pop_front() {
        ordered += 1;
        for &c in &children[n] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if ordered == decls.len() {
        return Ok(());
    }
    let stuck = indegree
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0)
        .map(|(i, _)| decls[i].id.to_string())
        .collect();
    Err(KbError::Cycle(stuck))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> TypeId {
        TypeId::new(s).unwrap()
    }

    fn decl(id: &str, parents: &[&str]) -> TypeDecl {
        TypeDecl {
            id: t(id),
            parents: parents.iter().map(|p| t(p)).collect(),
            definition: String::new(),
        }
    }

    fn people() -> TypeHierarchy {
        TypeHierarchy::from_decls(vec![
            decl("/person", &[]),
            decl("/person/athlete", &["/person"]),
            decl("/person/artist", &["/person"]),
            decl("/organization", &[]),
        ])
        .unwrap()
    }

    #[test]
    fn type_id_validation() {
        assert!(TypeId::new("/person/athlete").is_ok());
        assert!(TypeId::new("person").is_err());
        assert!(TypeId::new("/").is_err());
        assert!(TypeId::new("/a//b").is_err());
        assert!(TypeId::new("/a/b c").is_err());
        assert!(TypeId::new("").is_err());
        assert_eq!(t("/person/athlete").depth(), 2);
        assert_eq!(t("/person/athlete").parent_path(), Some("/person"));
        assert_eq!(t("/person").parent_path(), None);
    }

    #[test]
    fn single_chain_ancestors() {
        let h = people();
        assert_eq!(
            h.ancestors(&t("/person/athlete")).unwrap(),
            [t("/person")].into()
        );
        assert!(h.ancestors(&t("/person")).unwrap().is_empty());
    }

    #[test]
    fn descendants_of_person() {
        let h = people();
        assert_eq!(
            h.descendants(&t("/person")).unwrap(),
            [t("/person/athlete"), t("/person/artist")].into()
        );
        assert!(h.descendants(&t("/person/artist")).unwrap().is_empty());
    }

    #[test]
    fn subtree_of_person() {
        let h = people();
        let sub = h.subtree(&t("/person")).unwrap();
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.roots().collect::<Vec<_>>(), vec![&t("/person")]);
        let leaf = h.subtree(&t("/person/athlete")).unwrap();
        assert_eq!(leaf.len(), 1);
        assert!(leaf.parents(&t("/person/athlete")).unwrap().is_empty());
    }

    #[test]
    fn unknown_type_is_reported() {
        let h = people();
        assert!(matches!(
            h.ancestors(&t("/brand")),
            Err(KbError::UnknownType(_))
        ));
        assert!(matches!(
            h.subtree(&t("/brand")),
            Err(KbError::UnknownType(_))
        ));
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err =
            TypeHierarchy::from_decls(vec![decl("/a", &["/b"]), decl("/b", &["/a"])]).unwrap_err();
        assert!(matches!(err, KbError::Cycle(ref nodes) if nodes.len() == 2));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = TypeHierarchy::from_decls(vec![decl("/a", &["/a"])]).unwrap_err();
        assert!(matches!(err, KbError::Cycle(_)));
    }

    #[test]
    fn path_must_match_first_parent() {
        let err = TypeHierarchy::from_decls(vec![
            decl("/a", &[]),
            decl("/b", &[]),
            decl("/a/c", &["/b", "/a"]),
        ])
        .unwrap_err();
        assert!(matches!(err, KbError::Parse { .. }));
        let err = TypeHierarchy::from_decls(vec![decl("/a/b", &[])]).unwrap_err();
        assert!(matches!(err, KbError::Parse { .. }));
    }

    #[test]
    fn multi_parent_node_reaches_both_parents() {
        let h = TypeHierarchy::from_decls(vec![
            decl("/a", &[]),
            decl("/b", &[]),
            decl("/a/c", &["/a", "/b"]),
        ])
        .unwrap();
        assert_eq!(h.ancestors(&t("/a/c")).unwrap(), [t("/a"), t("/b")].into());
        assert!(h.is_ancestor(&t("/b"), &t("/a/c")));
        assert!(!h.is_ancestor(&t("/a/c"), &t("/b")));
        assert!(!h.is_ancestor(&t("/a"), &t("/a")));
    }

    #[test]
    fn dangling_parent() {
        let err = TypeHierarchy::from_decls(vec![decl("/a/b", &["/a"])]).unwrap_err();
        assert!(matches!(err, KbError::DanglingRef { .. }));
    }

    #[test]
    fn closure_includes_inputs_and_ancestors() {
        let h = people();
        let c = h.ancestor_closure([&t("/person/athlete")]).unwrap();
        assert_eq!(c, [t("/person"), t("/person/athlete")].into());
    }
}
