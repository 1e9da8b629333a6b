mod common;

use std::collections::BTreeSet;

use common::{brute_force_search, fixtures};
use genflow_core::embedding::{embed_local, Embedder, LocalEmbedder};
use genflow_core::index::{SearchHit, VectorIndex, WorkflowRecord};
use genflow_core::ingest::{ingest_record, preprocess_text, Preprocessor, RawDocument};
use genflow_core::pilot::{rank_results, DefaultCurator, Pilot, PilotConfig, PilotOutcome, PilotQuery};
use genflow_core::EmbeddingVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const DIM: usize = 256;

fn corpus() -> Vec<RawDocument> {
    let mut paths: Vec<_> = std::fs::read_dir(fixtures().join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths.iter().map(|p| RawDocument::parse(&std::fs::read(p).unwrap()).unwrap()).collect()
}

fn corpus_index() -> (Vec<RawDocument>, VectorIndex<f64>) {
    let docs = corpus();
    let index = VectorIndex::new(DIM);
    let pre = Preprocessor::default();
    for d in &docs {
        ingest_record(d, &pre, &LocalEmbedder::new(DIM), &index).unwrap();
    }
    (docs, index)
}

#[test]
fn corpus_has_fifty_documents() {
    let (docs, index) = corpus_index();
    assert_eq!(docs.len(), 50);
    assert_eq!(index.len(), 50);
}

#[test]
fn self_retrieval_top1() {
    let (docs, index) = corpus_index();
    for d in &docs {
        let q: EmbeddingVector = embed_local(&preprocess_text(&d.description), DIM);
        let hits = index.search(&q, 0.0, 1, None);
        assert_eq!(hits[0].record.id, d.id);
        assert!((hits[0].similarity - 1.0).abs() < 1e-6, "{}: {}", d.id, hits[0].similarity);
    }
}

#[test]
fn threshold_monotonicity() {
    let (docs, index) = corpus_index();
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..50 {
        let d = &docs[rng.gen_range(0..docs.len())];
        let words: Vec<&str> = d.description.split_whitespace().collect();
        let take: Vec<&str> = words.iter().filter(|_| rng.gen_bool(0.5)).copied().collect();
        let clean = preprocess_text(&take.join(" "));
        if clean.is_empty() {
            continue;
        }
        let q: EmbeddingVector = embed_local(&clean, DIM);
        let mut prev: Option<BTreeSet<String>> = None;
        for step in 0..10 {
            let tau = step as f64 / 10.0;
            let set: BTreeSet<String> = index.search(&q, tau, usize::MAX, None).into_iter().map(|h| h.record.id).collect();
            if let Some(p) = &prev {
                assert!(set.is_subset(p), "tau {tau}");
            }
            prev = Some(set);
        }
    }
}

#[test]
fn search_equals_brute_force_on_100_queries() {
    let (docs, index) = corpus_index();
    let records: Vec<(String, Vec<f64>)> = index
        .records()
        .into_iter()
        .map(|r| (r.id.clone(), r.embedding.values().to_vec()))
        .collect();
    let vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| preprocess_text(&d.description).tokens().to_vec())
        .collect();
    let mut rng = StdRng::seed_from_u64(100);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.gen_range(1..6);
        let text: Vec<&str> = (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
        let q: EmbeddingVector = embed_local(&preprocess_text(&text.join(" ")), DIM);
        if !q.is_normalized() {
            continue;
        }
        let tau = [0.0, 0.1, 0.2, 0.3, 0.5][rng.gen_range(0..5)];
        let k = rng.gen_range(1..8);
        let got: Vec<(String, f64)> = index
            .search(&q, tau, k, None)
            .into_iter()
            .map(|h| (h.record.id, h.similarity))
            .collect();
        let want = brute_force_search(&records, q.values(), tau, k);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-12);
        }
        checked += 1;
    }
}

fn hit(id: &str, similarity: f64, likes: u64) -> SearchHit<f64> {
    SearchHit {
        record: WorkflowRecord {
            id: id.into(),
            clean_text: String::new(),
            embedding: EmbeddingVector::zero(4),
            likes,
            source: String::new(),
            name: id.into(),
            description: String::new(),
        },
        similarity,
    }
}

#[test]
fn popularity_can_outrank_similarity() {
    let ranked = rank_results(vec![hit("a", 0.9, 0), hit("b", 0.8, 1000)], 0.7);
    assert_eq!(ranked[0].hit.record.id, "b");
    assert!((ranked[0].score - 0.86).abs() < 1e-12);
    assert!((ranked[1].score - 0.63).abs() < 1e-12);
}

#[test]
fn pilot_over_fixture_corpus() {
    let (_, index) = corpus_index();
    let pre = Preprocessor::default();
    let embedder = LocalEmbedder::new(DIM);
    let pilot = Pilot {
        preprocessor: &pre,
        embedder: &embedder as &dyn Embedder<f64>,
        index: &index,
        curator: &DefaultCurator,
        config: PilotConfig::default(),
    };
    match pilot.search(&PilotQuery::new("convert image to image")).unwrap() {
        PilotOutcome::Results(r) => {
            assert_eq!(r[0].workflow_id, "img2img_basic");
            assert!(r.windows(2).all(|p| p[0].score >= p[1].score));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        pilot.search(&PilotQuery::new("quantum chromodynamics lattice")).unwrap(),
        PilotOutcome::Fallback(_)
    ));
}

#[test]
fn persisted_index_round_trips() {
    let (_, index) = corpus_index();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.gfix");
    index.save(&path).unwrap();
    let back = VectorIndex::<f64>::load(&path).unwrap();
    let (a, b) = (back.records(), index.records());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.id, &x.clean_text, x.likes, &x.description), (&y.id, &y.clean_text, y.likes, &y.description));
        // vectors are stored as f32
        for (u, v) in x.embedding.values().iter().zip(y.embedding.values()) {
            assert!((u - v).abs() < 1e-6);
        }
    }
}
