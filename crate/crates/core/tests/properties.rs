mod common;

use std::collections::BTreeSet;

use common::*;
use kcat_core::analytics::{
    accuracy_matrix, classify_error, error_report, integrate, pairwise_accuracy, AnnotationFile,
    ErrorPattern,
};
use kcat_core::corpus::{Corpus, CorpusDocument, MentionEntry};
use kcat_core::kb::schema::AliasSurface;
use kcat_core::kb::{KnowledgeBase, TypeId};
use kcat_core::linker::{
    constrained_types, export_predictions, filter_by_type, generate_candidates, parse_predictions,
    AliasPriorLinker, Candidate, CandidateSet, Predictions,
};
use kcat_core::session::{
    AnnotationSession, ExportFormat, LogEntry, Phase, SessionConfig, SessionMeta,
};
use kcat_core::Mention;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_candidates(
    rng: &mut impl Rng,
    entities: &[(String, Vec<usize>)],
    k: usize,
) -> CandidateSet {
    let mut pool: Vec<usize> = (0..entities.len()).collect();
    pool.shuffle(rng);
    CandidateSet::from_candidates(
        "m",
        pool[..k.min(pool.len())]
            .iter()
            .map(|&e| Candidate::new(entities[e].0.clone(), rng.gen_range(0.0..=1.0)))
            .collect(),
    )
}

fn walkthrough() -> (KnowledgeBase, Corpus) {
    let text = "Kobe scored. Liverpool beat Liverpool. Zzqx watched.";
    let corpus = Corpus::new(vec![CorpusDocument::new(
        "d1",
        text,
        vec![
            MentionEntry::new("kobe", 0, 4),
            MentionEntry::new("lfc", 13, 22),
            MentionEntry::new("city", 28, 37),
            MentionEntry::new("zz", 39, 43),
        ],
    )
    .unwrap()])
    .unwrap();
    (liverpool_kb(), corpus)
}

fn open_walkthrough(kb: &KnowledgeBase, corpus: &Corpus) -> AnnotationSession {
    AnnotationSession::open(
        kb,
        corpus,
        SessionMeta {
            session_id: "s".into(),
            annotator_id: "a".into(),
            doc_id: "d1".into(),
        },
        &AliasPriorLinker,
        SessionConfig::default(),
    )
    .unwrap()
}

/// Drives a session through random actions, undos and redos.
fn random_walk(kb: &KnowledgeBase, s: &mut AnnotationSession, rng: &mut impl Rng, steps: usize) {
    let types = kb.hierarchy().ids().to_vec();
    let entities: Vec<&str> = kb.entities().map(|e| e.entity_id.as_str()).collect();
    let mentions = ["kobe", "lfc", "city", "zz"];
    for _ in 0..steps {
        match random_action(rng, &types, &entities, &mentions) {
            Some(a) => {
                let _ = s.apply(kb, a);
            }
            None if rng.gen_bool(0.6) => {
                let _ = s.undo();
            }
            None => {
                let _ = s.redo();
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ancestor_descendant_duality(seed: u64, n in 1usize..80) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, n, 160);
        let kb = kb_from(&dag, &[], vec![]);
        let h = kb.hierarchy();
        for t in h.ids() {
            let anc = h.ancestors(t).unwrap();
            let desc = h.descendants(t).unwrap();
            prop_assert!(anc.is_disjoint(&desc));
            prop_assert!(!anc.contains(t) && !desc.contains(t));
            for u in &anc {
                prop_assert!(h.descendants(u).unwrap().contains(t));
            }
            for d in &desc {
                prop_assert!(h.ancestors(d).unwrap().contains(t));
            }
            prop_assert_eq!(h.subtree(t).unwrap().len(), 1 + desc.len());
        }
    }

    #[test]
    fn entity_types_are_ancestor_closed(seed: u64, n in 1usize..60) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, n, 120);
        let entities = random_entities(&mut rng, &dag, 20);
        let kb = kb_from(&dag, &entities, vec![]);
        for e in kb.entities() {
            let closed = kb.hierarchy().ancestor_closure(e.types.iter()).unwrap();
            prop_assert_eq!(&closed, &e.types);
        }
    }

    #[test]
    fn loading_is_deterministic(seed: u64, n in 1usize..40) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, n, 80);
        let entities = random_entities(&mut rng, &dag, 10);
        let aliases = vec![AliasSurface::new(
            "Alias",
            &[(entities[0].0.as_str(), 3), (entities[1].0.as_str(), 1)],
        )];
        let a = kb_from(&dag, &entities, aliases.clone());
        let b = kb_from(&dag, &entities, aliases);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn filtering_shrinks_monotonically(seed: u64, n in 2usize..60, k in 0usize..25) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, n, 120);
        let entities = random_entities(&mut rng, &dag, 30);
        let kb = kb_from(&dag, &entities, vec![]);
        let h = kb.hierarchy();
        let cs = random_candidates(&mut rng, &entities, k);
        let all = constrained_types(&kb, &cs);
        for t in h.ids() {
            let f = filter_by_type(&kb, &cs, t).unwrap();
            prop_assert!(f.entity_ids().all(|e| cs.contains(e)));
            prop_assert!(f.len() <= cs.len());
            if !f.is_empty() {
                prop_assert!(constrained_types(&kb, &f).is_subset(&all));
            }
            for d in h.descendants(t).unwrap() {
                let deeper = filter_by_type(&kb, &cs, &d).unwrap();
                prop_assert!(deeper.entity_ids().all(|e| f.contains(e)));
            }
        }
    }

    #[test]
    fn alias_prior_scores(seed: u64, surfaces in 1usize..8, k_max in 1usize..30) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, 10, 20);
        let entities = random_entities(&mut rng, &dag, 40);
        let aliases: Vec<AliasSurface> = (0..surfaces)
            .map(|s| {
                let k = rng.gen_range(1..=35);
                let mut pool: Vec<&str> = entities.iter().map(|(id, _)| id.as_str()).collect();
                pool.shuffle(&mut rng);
                let counts: Vec<(&str, u64)> =
                    pool[..k].iter().map(|e| (*e, rng.gen_range(0..6))).collect();
                AliasSurface::new(&format!("Surf {s}"), &counts)
            })
            .collect();
        let kb = kb_from(&dag, &entities, aliases);
        for s in 0..surfaces {
            let surface = format!("  surf   {s}.");
            let m = Mention {
                mention_id: "m".into(),
                doc_id: "d".into(),
                start: 0,
                end: surface.chars().count(),
                surface,
                gold_entity: None,
            };
            let cs = generate_candidates(&kb, &m, k_max);
            prop_assert!(cs.len() <= k_max);
            let c = cs.candidates();
            prop_assert!(c.iter().all(|c| c.score > 0.0 && c.score <= 1.0));
            let ordered = c.windows(2).all(|w| {
                w[0].score > w[1].score || (w[0].score == w[1].score && w[0].entity_id < w[1].entity_id)
            });
            prop_assert!(ordered);
            prop_assert!(c.iter().map(|c| c.score).sum::<f64>() <= 1.0 + 1e-9);
            prop_assert_eq!(cs.predicted(), c.first().map(|c| c.entity_id.as_str()));
        }
    }

    #[test]
    fn predictions_round_trip(seed: u64, mentions in 0usize..10) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, 8, 16);
        let entities = random_entities(&mut rng, &dag, 25);
        let kb = kb_from(&dag, &entities, vec![]);
        let predictions: Predictions = (0..mentions)
            .map(|i| {
                let k = rng.gen_range(0..25);
                let mut cs = random_candidates(&mut rng, &entities, k);
                cs.mention_id = format!("d1-m{i}");
                (cs.mention_id.clone(), cs)
            })
            .collect();
        let mut out = Vec::new();
        export_predictions(&predictions, &mut out).unwrap();
        let back = parse_predictions(&kb, std::str::from_utf8(&out).unwrap(), 25).unwrap();
        prop_assert_eq!(back, predictions);
    }

    #[test]
    fn classification_is_antisymmetric(seed: u64, n in 1usize..50) {
        let mut rng = rng(seed);
        let dag = random_dag(&mut rng, n, 100);
        let kb = kb_from(&dag, &[], vec![]);
        let h = kb.hierarchy();
        for _ in 0..50 {
            let g = dag.type_id(rng.gen_range(0..n));
            let p = dag.type_id(rng.gen_range(0..n));
            let forward = classify_error(h, &g, &p).unwrap();
            let backward = classify_error(h, &p, &g).unwrap();
            let mirrored = match forward {
                ErrorPattern::OverSpecific => ErrorPattern::NotSpecific,
                ErrorPattern::NotSpecific => ErrorPattern::OverSpecific,
                other => other,
            };
            prop_assert_eq!(backward, mirrored);
        }
    }

    #[test]
    fn matrix_matches_pairwise(seed: u64, annotators in 2usize..7) {
        let mut rng = rng(seed);
        let dag = twelve_types();
        let files: Vec<AnnotationFile> = (0..annotators)
            .map(|a| {
                let labels: Vec<(String, TypeId)> = (0..15)
                    .filter_map(|m| {
                        let l = dag.type_id(rng.gen_range(0..4));
                        rng.gen_bool(0.5).then(|| (format!("m{m}"), l))
                    })
                    .collect();
                AnnotationFile::with_labels(format!("a{a}"), labels)
            })
            .collect();
        let matrix = accuracy_matrix(&files).unwrap();
        for i in 0..annotators {
            for j in 0..annotators {
                prop_assert_eq!(matrix.get(i, j), pairwise_accuracy(&files[i], &files[j]).ok());
                prop_assert_eq!(matrix.get(i, j), matrix.get(j, i));
            }
            if !files[i].labels.is_empty() {
                prop_assert_eq!(matrix.get(i, i), Some(1.0));
            }
        }
    }

    #[test]
    fn integration_ignores_file_order(seed: u64, annotators in 2usize..6) {
        let mut rng = rng(seed);
        let dag = twelve_types();
        let kb = kb_from(&dag, &[], vec![]);
        let mut files: Vec<AnnotationFile> = (0..annotators)
            .map(|a| {
                let labels: Vec<(String, TypeId)> = (0..20)
                    .map(|m| (format!("m{m}"), dag.type_id(rng.gen_range(0..dag.len()))))
                    .collect();
                AnnotationFile::with_labels(format!("a{a}"), labels)
            })
            .collect();
        let r = integrate(kb.hierarchy(), &files).unwrap();
        prop_assert!(r.labels.keys().all(|m| !r.unresolved.contains(m)));
        files.shuffle(&mut rng);
        prop_assert_eq!(integrate(kb.hierarchy(), &files).unwrap(), r);
    }

    #[test]
    fn identical_files_integrate_to_themselves(seed: u64, annotators in 2usize..6) {
        let mut rng = rng(seed);
        let dag = twelve_types();
        let kb = kb_from(&dag, &[], vec![]);
        let labels: Vec<(String, TypeId)> = (0..20)
            .filter(|_| rng.gen_bool(0.7))
            .map(|m| (format!("m{m}"), dag.type_id(m % dag.len())))
            .collect();
        let files: Vec<AnnotationFile> = (0..annotators)
            .map(|a| AnnotationFile::with_labels(format!("a{a}"), labels.clone()))
            .collect();
        let r = integrate(kb.hierarchy(), &files).unwrap();
        prop_assert!(r.unresolved.is_empty());
        prop_assert_eq!(r.labels, files[0].labels.clone());
        prop_assert!(r.support.values().all(|&s| s == annotators));
    }

    #[test]
    fn error_counts_partition_overlap(seed: u64) {
        let mut rng = rng(seed);
        let dag = twelve_types();
        let kb = kb_from(&dag, &[], vec![]);
        let text: String = "x ".repeat(30);
        let mentions: Vec<MentionEntry> =
            (0..30).map(|m| MentionEntry::new(&format!("m{m}"), 2 * m, 2 * m + 1)).collect();
        let corpus = Corpus::new(vec![CorpusDocument::new("d", text, mentions).unwrap()]).unwrap();
        let mut pick = |id: &str| {
            let labels: Vec<(String, TypeId)> = (0..30)
                .filter_map(|m| {
                    let l = dag.type_id(rng.gen_range(0..dag.len()));
                    rng.gen_bool(0.8).then(|| (format!("m{m}"), l))
                })
                .collect();
            AnnotationFile::with_labels(id, labels)
        };
        let (gold, pred) = (pick("gold"), pick("pred"));
        let overlap = gold.common_mentions(&pred).count();
        match error_report(kb.hierarchy(), &gold, &pred, &corpus) {
            Ok(report) => {
                prop_assert_eq!(report.counts.total(), overlap);
                prop_assert_eq!(report.entries.len(), overlap);
                for p in ErrorPattern::ALL {
                    let n = report.entries.iter().filter(|e| e.pattern == p).count();
                    prop_assert_eq!(report.counts.get(p), n);
                }
            }
            Err(_) => prop_assert_eq!(overlap, 0),
        }
    }

    #[test]
    fn undo_stack_replays_to_current_state(seed: u64, steps in 0usize..40) {
        let (kb, corpus) = walkthrough();
        let mut s = open_walkthrough(&kb, &corpus);
        random_walk(&kb, &mut s, &mut rng(seed), steps);

        let mut replayed = open_walkthrough(&kb, &corpus);
        for c in s.undo_stack() {
            replayed.apply(&kb, c.action.clone()).unwrap();
        }
        prop_assert!(replayed.same_states(&s));

        let log = s.compacted_log(1000);
        let restored = AnnotationSession::replay(&kb, log).unwrap();
        prop_assert_eq!(&restored, &s);
    }

    #[test]
    fn compacted_log_keeps_recent_history(seed: u64, steps in 0usize..40, keep in 0usize..6) {
        let (kb, corpus) = walkthrough();
        let mut s = open_walkthrough(&kb, &corpus);
        random_walk(&kb, &mut s, &mut rng(seed), steps);
        let restored = AnnotationSession::replay(&kb, s.compacted_log(keep)).unwrap();
        prop_assert!(restored.same_states(&s));
        prop_assert_eq!(restored.undo_stack().len(), s.undo_stack().len().min(keep));
        let entries = s.compacted_log(keep);
        prop_assert!(matches!(entries.first(), Some(LogEntry::Open(_))));
    }

    #[test]
    fn chain_deepens_and_candidates_shrink(seed: u64, steps in 0usize..40) {
        let (kb, corpus) = walkthrough();
        let h = kb.hierarchy();
        let mut s = open_walkthrough(&kb, &corpus);
        let mut r = rng(seed);
        let types = h.ids().to_vec();
        for _ in 0..steps {
            let m = ["kobe", "lfc", "city", "zz"].choose(&mut r).unwrap();
            let before = s.state(m).unwrap().clone();
            let t = types.choose(&mut r).unwrap();
            if s.select_type(&kb, m, t).is_ok() {
                let after = s.state(m).unwrap();
                if before.phase != Phase::Labeled {
                    prop_assert!(after.working_candidates.len() <= before.working_candidates.len());
                }
            }
            for st in s.states() {
                for w in st.selected_types.windows(2) {
                    prop_assert!(h.is_ancestor(&w[0], &w[1]));
                }
            }
        }
    }

    #[test]
    fn reset_is_idempotent(seed: u64, steps in 0usize..30) {
        let (kb, corpus) = walkthrough();
        let mut s = open_walkthrough(&kb, &corpus);
        random_walk(&kb, &mut s, &mut rng(seed), steps);
        let fresh = open_walkthrough(&kb, &corpus);
        for m in ["kobe", "lfc", "city", "zz"] {
            let mut once = s.clone();
            let _ = once.reset(&kb, Some(m));
            let mut twice = once.clone();
            let _ = twice.reset(&kb, Some(m));
            prop_assert!(twice.same_states(&once));
            prop_assert_eq!(once.state(m), fresh.state(m));
        }
        let mut all = s.clone();
        let _ = all.reset(&kb, None);
        prop_assert!(all.same_states(&fresh));
    }

    #[test]
    fn exports_are_deterministic(seed: u64, steps in 0usize..30) {
        let (kb, corpus) = walkthrough();
        let doc = corpus.doc("d1").unwrap();
        let mut a = open_walkthrough(&kb, &corpus);
        let mut b = open_walkthrough(&kb, &corpus);
        random_walk(&kb, &mut a, &mut rng(seed), steps);
        random_walk(&kb, &mut b, &mut rng(seed), steps);
        for f in [ExportFormat::Txt, ExportFormat::Json] {
            prop_assert_eq!(a.export(doc, f).unwrap(), b.export(doc, f).unwrap());
        }
    }
}

/// Twelve types in three trees.
fn twelve_types() -> RawDag {
    let ids = [
        "/person",
        "/person/athlete",
        "/person/artist",
        "/person/athlete/player",
        "/org",
        "/org/club",
        "/org/company",
        "/org/club/team",
        "/location",
        "/location/city",
        "/location/country",
        "/location/city/district",
    ];
    let parents = vec![
        vec![],
        vec![0],
        vec![0],
        vec![1],
        vec![],
        vec![4],
        vec![4],
        vec![5, 1],
        vec![],
        vec![8],
        vec![8],
        vec![9],
    ];
    RawDag {
        ids: ids.iter().map(|s| s.to_string()).collect(),
        parents,
    }
}

#[test]
fn truncation_keeps_top_k() {
    let mut rng = rng(25);
    let dag = random_dag(&mut rng, 5, 5);
    let entities = random_entities(&mut rng, &dag, 25);
    let counts: Vec<(&str, u64)> = entities
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id.as_str(), 100 - i as u64))
        .collect();
    let kb = kb_from(&dag, &entities, vec![AliasSurface::new("many", &counts)]);
    let m = Mention {
        mention_id: "m".into(),
        doc_id: "d".into(),
        start: 0,
        end: 4,
        surface: "many".into(),
        gold_entity: None,
    };
    let cs = generate_candidates(&kb, &m, 20);
    assert_eq!(cs.len(), 20);
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let kept: Vec<&str> = cs.entity_ids().collect();
    let expected: Vec<&str> = counts[..20].iter().map(|c| c.0).collect();
    assert_eq!(kept, expected);
    assert!((cs.candidates()[0].score - 100.0 / total as f64).abs() < 1e-12);
    assert!(cs.candidates().iter().map(|c| c.score).sum::<f64>() < 1.0);
    let all = generate_candidates(&kb, &m, 100);
    let set: BTreeSet<&str> = all.entity_ids().collect();
    assert_eq!(set.len(), 25);
    assert!((all.candidates().iter().map(|c| c.score).sum::<f64>() - 1.0).abs() < 1e-9);
}
