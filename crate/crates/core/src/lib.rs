//! Knowledge-constrained annotation engine for fine-grained entity typing.
//!
//! Entity linking narrows the thousands of types in a hierarchy down to the
//! few carried by the linked entity. Annotators then type mentions in
//! several steps, using coarse types to weed out wrongly linked candidates,
//! and the results of several annotators are compared and merged.
//!
//! - [`kb`]: type hierarchy, entity records and alias dictionary.
//! - [`linker`]: candidate generation, ranking, type constraints.
//! - [`session`]: per-document annotation state with undo/redo and export.
//! - [`analytics`]: agreement, error taxonomy and vote integration.

pub mod analytics;
pub mod corpus;
pub mod kb;
pub mod linker;
pub mod session;

pub use corpus::{Corpus, CorpusDocument, Mention};
pub use kb::{EntityRecord, KbError, KnowledgeBase, TypeHierarchy, TypeId};
pub use linker::{Candidate, CandidateSet, Linker};
pub use session::{AnnotationSession, SessionConfig, SessionError};
