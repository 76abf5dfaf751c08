//! Fixtures, generators and brute-force oracles shared by integration tests.
//! Nothing here calls into the engine's query code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kcat_core::kb::schema::*;
use kcat_core::kb::{KnowledgeBase, TypeId};
use kcat_core::session::Action;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn t(s: &str) -> TypeId {
    TypeId::new(s).unwrap()
}

/// A generated hierarchy: node `i` has id `ids[i]` and parent indices
/// `parents[i]` (first parent is canonical). Parents always precede children.
#[derive(Debug, Clone)]
pub struct RawDag {
    pub ids: Vec<String>,
    pub parents: Vec<Vec<usize>>,
}

impl RawDag {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn types_file(&self) -> TypesFile {
        TypesFile {
            types: self
                .ids
                .iter()
                .zip(&self.parents)
                .map(|(id, ps)| TypeEntry {
                    id: id.clone(),
                    parents: ps.iter().map(|&p| self.ids[p].clone()).collect(),
                    definition: format!("definition of {id}"),
                })
                .collect(),
        }
    }

    pub fn type_id(&self, i: usize) -> TypeId {
        t(&self.ids[i])
    }

    pub fn index_of(&self, id: &str) -> usize {
        self.ids.iter().position(|x| x == id).unwrap()
    }
}

/// Random DAG with `n` nodes and at most `max_edges` edges.
pub fn random_dag(rng: &mut impl Rng, n: usize, max_edges: usize) -> RawDag {
    let mut ids: Vec<String> = Vec::with_capacity(n);
    let mut parents: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut edges = 0;
    for i in 0..n {
        let mut ps = Vec::new();
        if i > 0 && !rng.gen_bool(0.08) && edges < max_edges {
            let k = if rng.gen_bool(0.3) {
                rng.gen_range(2..=4)
            } else {
                1
            };
            let k = k.min(i).min(max_edges - edges);
            let mut pool: Vec<usize> = (0..i).collect();
            pool.shuffle(rng);
            ps.extend_from_slice(&pool[..k]);
            edges += k;
        }
        let id = match ps.first() {
            Some(&p) => format!("{}/n{i}", ids[p]),
            None => format!("/n{i}"),
        };
        ids.push(id);
        parents.push(ps);
    }
    RawDag { ids, parents }
}

/// `reach[a][b]` is true when `a` is a strict ancestor of `b`, computed
/// with Warshall's algorithm over bit rows.
pub fn closure_oracle(dag: &RawDag) -> Vec<Vec<bool>> {
    let n = dag.len();
    let words = n.div_ceil(64);
    let mut rows = vec![vec![0u64; words]; n];
    for (child, ps) in dag.parents.iter().enumerate() {
        for &p in ps {
            rows[p][child / 64] |= 1 << (child % 64);
        }
    }
    for k in 0..n {
        let row_k = rows[k].clone();
        for row in rows.iter_mut() {
            if row[k / 64] >> (k % 64) & 1 == 1 {
                for (w, rk) in row.iter_mut().zip(&row_k) {
                    *w |= rk;
                }
            }
        }
    }
    rows.iter()
        .map(|r| (0..n).map(|j| r[j / 64] >> (j % 64) & 1 == 1).collect())
        .collect()
}

/// Ancestor-or-self closure of `declared` via a plain parent walk.
pub fn closed_types(dag: &RawDag, declared: &[usize]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = declared.to_vec();
    while let Some(n) = stack.pop() {
        if seen.insert(n) {
            stack.extend(&dag.parents[n]);
        }
    }
    seen
}

/// Entities drawn at random over `dag`, each with 1..=3 declared types.
pub fn random_entities(
    rng: &mut impl Rng,
    dag: &RawDag,
    count: usize,
) -> Vec<(String, Vec<usize>)> {
    (0..count)
        .map(|i| {
            let k = rng.gen_range(1..=3);
            let declared = (0..k).map(|_| rng.gen_range(0..dag.len())).collect();
            (format!("E{i:03}"), declared)
        })
        .collect()
}

pub fn kb_from(
    dag: &RawDag,
    entities: &[(String, Vec<usize>)],
    aliases: Vec<AliasSurface>,
) -> KnowledgeBase {
    KnowledgeBase::from_schema(
        dag.types_file(),
        EntitiesFile {
            entities: entities
                .iter()
                .map(|(id, types)| EntityEntry {
                    id: id.clone(),
                    name: format!("Entity {id}"),
                    types: types.iter().map(|&i| dag.ids[i].clone()).collect(),
                    description: String::new(),
                })
                .collect(),
        },
        AliasesFile { aliases },
    )
    .unwrap()
}

/// The Liverpool / Kobe knowledge base used by the walkthrough tests.
pub fn liverpool_kb() -> KnowledgeBase {
    KnowledgeBase::from_schema(
        TypesFile {
            types: vec![
                TypeEntry::new("/person", &[], "a human being"),
                TypeEntry::new(
                    "/person/athlete",
                    &["/person"],
                    "a person trained to compete in sports",
                ),
                TypeEntry::new(
                    "/person/artist",
                    &["/person"],
                    "a person whose creative work shows sensitivity",
                ),
                TypeEntry::new("/organization", &[], "a group of people who work together"),
                TypeEntry::new(
                    "/organization/club",
                    &["/organization"],
                    "a formal association of people with similar interests",
                ),
                TypeEntry::new("/location", &[], "a point or extent in space"),
                TypeEntry::new(
                    "/location/city",
                    &["/location"],
                    "a large and densely populated urban area",
                ),
            ],
        },
        EntitiesFile {
            entities: vec![
                EntityEntry::new(
                    "Liverpool",
                    "Liverpool",
                    &["/location/city"],
                    "Liverpool is a city in Merseyside, England.",
                ),
                EntityEntry::new(
                    "Liverpool_F.C.",
                    "Liverpool F.C.",
                    &["/organization/club"],
                    "Liverpool Football Club is a professional football club.",
                ),
                EntityEntry::new(
                    "Kobe_Bryant",
                    "Kobe Bean Bryant",
                    &["/person/athlete"],
                    "Kobe Bean Bryant was an American professional basketball player.",
                ),
                EntityEntry::new(
                    "Kobe",
                    "Kobe",
                    &["/location/city"],
                    "Kobe is a city in Hyogo Prefecture, Japan.",
                ),
            ],
        },
        AliasesFile {
            aliases: vec![
                AliasSurface::new("Liverpool", &[("Liverpool", 700), ("Liverpool_F.C.", 300)]),
                AliasSurface::new("Kobe", &[("Kobe_Bryant", 980), ("Kobe", 20)]),
            ],
        },
    )
    .unwrap()
}

/// `(start, end, surface, label)`.
pub type Span = (usize, usize, String, String);

/// Independent parser for the inline txt markup. Returns the plain text and
/// `(start, end, surface, label)` for each span, offsets in chars.
pub fn parse_inline_markup(s: &str) -> Result<(String, Vec<Span>), String> {
    #[derive(PartialEq)]
    enum Mode {
        Text,
        Surface,
        Label,
    }
    let chars: Vec<char> = s.chars().collect();
    let mut plain = String::new();
    let mut plain_len = 0usize;
    let mut spans = Vec::new();
    let mut mode = Mode::Text;
    let (mut start, mut surface, mut label) = (0, String::new(), String::new());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c == '\\' {
            let Some(escaped) = next else {
                return Err("dangling backslash".into());
            };
            match mode {
                Mode::Text => {
                    plain.push(escaped);
                    plain_len += 1;
                }
                Mode::Surface => {
                    surface.push(escaped);
                    plain.push(escaped);
                    plain_len += 1;
                }
                Mode::Label => label.push(escaped),
            }
            i += 2;
            continue;
        }
        match mode {
            Mode::Text if c == '[' && next == Some('@') => {
                mode = Mode::Surface;
                start = plain_len;
                surface.clear();
                i += 2;
            }
            Mode::Text if c == '#' => return Err(format!("unescaped # at {i}")),
            Mode::Text if c == '*' && next == Some(']') => {
                return Err(format!("stray span terminator at {i}"))
            }
            Mode::Text => {
                plain.push(c);
                plain_len += 1;
                i += 1;
            }
            Mode::Surface if c == '#' => {
                mode = Mode::Label;
                label.clear();
                i += 1;
            }
            Mode::Surface if c == '[' && next == Some('@') => {
                return Err(format!("nested span at {i}"))
            }
            Mode::Surface => {
                surface.push(c);
                plain.push(c);
                plain_len += 1;
                i += 1;
            }
            Mode::Label if c == '*' && next == Some(']') => {
                if !label.starts_with('/') {
                    return Err(format!("label `{label}` is not a type path"));
                }
                spans.push((start, plain_len, surface.clone(), label.clone()));
                mode = Mode::Text;
                i += 2;
            }
            Mode::Label if c == '#' || (c == '[' && next == Some('@')) => {
                return Err(format!("unescaped marker in label at {i}"))
            }
            Mode::Label => {
                label.push(c);
                i += 1;
            }
        }
    }
    if mode != Mode::Text {
        return Err("unterminated span".into());
    }
    Ok((plain, spans))
}

/// Exhaustive voting oracle: tallies over every type in the hierarchy and
/// resolves ties by scanning every type for common ancestry.
pub fn vote_oracle(dag: &RawDag, reach: &[Vec<bool>], votes: &[usize]) -> Option<usize> {
    let n = dag.len();
    let mut count = vec![0usize; n];
    for &v in votes {
        count[v] += 1;
    }
    let top = *count.iter().max()?;
    if top == 0 {
        return None;
    }
    let tied: Vec<usize> = (0..n).filter(|&i| count[i] == top).collect();
    if tied.len() == 1 {
        return Some(tied[0]);
    }
    let covers = |a: usize, b: usize| a == b || reach[a][b];
    let common: Vec<usize> = (0..n)
        .filter(|&c| tied.iter().all(|&x| covers(c, x)))
        .collect();
    let lowest: Vec<usize> = common
        .iter()
        .copied()
        .filter(|&c| !common.iter().any(|&d| reach[c][d]))
        .collect();
    let depth = |i: usize| dag.ids[i].matches('/').count();
    lowest.into_iter().max_by(|&a, &b| {
        depth(a)
            .cmp(&depth(b))
            .then_with(|| dag.ids[b].cmp(&dag.ids[a]))
    })
}

pub fn index_map(dag: &RawDag) -> BTreeMap<String, usize> {
    dag.ids
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect()
}

/// A random session action, or `None` meaning "undo or redo".
pub fn random_action(
    rng: &mut impl Rng,
    types: &[TypeId],
    entities: &[&str],
    mentions: &[&str],
) -> Option<Action> {
    let mention_id = mentions.choose(rng).unwrap().to_string();
    Some(match rng.gen_range(0..10) {
        0 | 1 => Action::SelectType {
            mention_id,
            type_id: types.choose(rng).unwrap().clone(),
        },
        2 => Action::AcceptEntity { mention_id },
        3 => Action::ReviseEntity {
            mention_id,
            entity_id: entities.choose(rng).unwrap().to_string(),
        },
        4 | 5 => Action::SetLabel {
            mention_id,
            type_id: types.choose(rng).unwrap().clone(),
        },
        6 => Action::ResetMention { mention_id },
        7 => Action::ResetAll,
        _ => return None,
    })
}
