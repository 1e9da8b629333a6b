mod common;

use std::collections::BTreeMap;

use common::fixtures;
use genflow_core::agents::{
    check_supervision, no_revisits, orchestrate, replay, AgentId, ExploreContext, ExploreStatus, FailureReason,
    MessageKind, OrchestrationResult, SimPage, SimSite, TARGET_KEY,
};
use genflow_core::assets::LocalDatabase;
use genflow_core::ingest::{preprocess_text, Preprocessor};
use genflow_core::merge::{BBox, DetectedElement, Source};
use genflow_core::pilot::FallbackSignal;
use genflow_core::workflow::NodeCatalog;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

const QUERY: &str = "swap a face in a portrait photo with ip adapter";

fn goal(q: &str) -> FallbackSignal {
    FallbackSignal {
        query: q.into(),
        clean_query: preprocess_text(q).joined(),
    }
}

fn site(name: &str) -> SimSite {
    SimSite::load(&fixtures().join("sites").join(name)).unwrap()
}

fn explore(site: &SimSite, query: &str, budget: usize) -> OrchestrationResult {
    let catalog = NodeCatalog::builtin();
    let pre = Preprocessor::default();
    orchestrate(&goal(query), site, budget, &ExploreContext::new(&catalog, &pre)).unwrap()
}

fn assert_replays(site: &SimSite, query: &str, budget: usize, result: &OrchestrationResult) {
    let catalog = NodeCatalog::builtin();
    let pre = Preprocessor::default();
    let again = replay(&goal(query), site, budget, &ExploreContext::new(&catalog, &pre), &result.memories).unwrap();
    assert_eq!(&again, result);
}

#[test]
fn five_page_planted_path() {
    let s = site("planted_path.json");
    assert_eq!(s.pages.len(), 5);
    let r = explore(&s, QUERY, 20);
    assert_eq!(r.status, ExploreStatus::Success);
    assert!(r.trace.len() <= 20);
    assert_eq!(r.workflow.as_ref().unwrap().id, "faceswap_ipadapter");
    assert_eq!(r.clicked_pages(), ["tips", "portraits", "faceswap", "detail"]);
    assert!(no_revisits(&r, &s.start));
    check_supervision(&r.messages).unwrap();
    assert_replays(&s, QUERY, 20, &r);
    let names: Vec<&str> = r.captured.iter().map(|d| d.name.as_str()).collect();
    assert_eq!(names, ["comfyui-ipadapter", "ip-adapter_sd15.safetensors"]);
}

#[test]
fn capture_seeds_local_database() {
    let s = site("planted_path.json");
    let tmp = tempfile::tempdir().unwrap();
    let db = LocalDatabase::open(tmp.path()).unwrap();
    let catalog = NodeCatalog::builtin();
    let pre = Preprocessor::default();
    let ctx = ExploreContext::new(&catalog, &pre).with_db(&db);
    let r = orchestrate(&goal(QUERY), &s, 20, &ctx).unwrap();
    assert!(r.succeeded());
    assert_eq!(db.registry.len(), 2);
    for d in &r.captured {
        assert!(db.blobs.contains(&d.checksum));
    }
}

#[test]
fn broken_download_sends_the_web_worker_back() {
    let mut page = SimPage::default();
    page.w_elements.push(element(0, "bad", "face swap portrait ip adapter workflow download"));
    page.w_elements.push(element(1, "next", "face swap"));
    page.downloads.insert("bad".into(), json!("{\"version\": 1, \"nodes\": ["));
    page.links.insert("next".into(), "good".into());
    let mut good = SimPage::default();
    good.w_elements.push(element(0, "dl", "face swap workflow"));
    good.downloads.insert("dl".into(), serde_json::from_str(DOC).unwrap());
    let s = SimSite {
        start: "home".into(),
        pages: BTreeMap::from([("home".to_string(), page), ("good".to_string(), good)]),
        assets: Vec::new(),
    };
    let r = explore(&s, QUERY, 20);
    assert!(r.succeeded());
    assert!(r.messages.iter().any(|m| m.kind == MessageKind::Failure));
    let assigns: Vec<&str> = r
        .messages
        .iter()
        .filter(|m| m.kind == MessageKind::TaskAssign)
        .filter_map(|m| m.payload.get("task").and_then(|t| t.as_str()))
        .collect();
    assert!(assigns.contains(&"resume_web_search"), "{assigns:?}");
    check_supervision(&r.messages).unwrap();
    assert_replays(&s, QUERY, 20, &r);
}

#[test]
fn unmatched_query_is_structured_not_found() {
    let s = site("unmatched.json");
    let r = explore(&s, QUERY, 20);
    assert_eq!(r.status, ExploreStatus::Failure(FailureReason::NotFound));
    assert!(r.workflow.is_none());
    assert_eq!(json!(r.status), json!({"status": "failure", "reason": "not_found"}));
    check_supervision(&r.messages).unwrap();
    assert_replays(&s, QUERY, 20, &r);
}

#[test]
fn small_budget_is_exhausted() {
    let s = site("planted_path.json");
    let r = explore(&s, QUERY, 3);
    assert_eq!(r.status, ExploreStatus::Failure(FailureReason::BudgetExhausted));
    assert!(r.trace.len() <= 3);
    check_supervision(&r.messages).unwrap();
}

#[test]
fn memories_are_per_agent_and_ordered() {
    let r = explore(&site("openart_like.json"), QUERY, 20);
    for m in &r.memories {
        let steps: Vec<u64> = m.entries().iter().map(|e| e.step).collect();
        assert!(steps.windows(2).all(|w| w[0] < w[1]), "{:?}", m.agent());
    }
    let web = r.memory(AgentId::WebSurfer).unwrap();
    let web_trace = r.trace.iter().filter(|t| t.agent == AgentId::WebSurfer).count();
    assert_eq!(web.entries().len(), web_trace);
}

const DOC: &str = r#"{"version":1,"id":"planted","name":"planted","nodes":[{"id":"p","type":"text_prompt","params":{"text":"hi"}}]}"#;

fn element(i: usize, target: &str, caption: &str) -> DetectedElement<f64> {
    let y = 40.0 * i as f64;
    DetectedElement::new(BBox::new(0.0, y, 300.0, y + 30.0).unwrap(), Source::W)
        .with_property(TARGET_KEY, target)
        .with_property("label", caption)
}

/// A site whose only route to the download is a chain of `path_len` pages.
/// Decoy links are sprinkled along it; with `lure` they share one query
/// token, otherwise none.
fn planted_site(rng: &mut StdRng, path_len: usize, decoys: usize, lure: bool) -> SimSite {
    let mut pages: BTreeMap<String, SimPage> = BTreeMap::new();
    let path: Vec<String> = (0..path_len).map(|i| format!("p{i}")).collect();
    let decoy_ids: Vec<String> = (0..decoys).map(|i| format!("d{i}")).collect();
    for id in path.iter().chain(&decoy_ids) {
        pages.insert(id.clone(), SimPage::default());
    }
    for (i, id) in path.iter().enumerate() {
        let mut els: Vec<(String, String, Option<String>)> = Vec::new();
        if i + 1 < path_len {
            els.push(("next".into(), "face swap portrait collection".into(), Some(path[i + 1].clone())));
        } else {
            els.push(("dl".into(), "download face swap portrait workflow".into(), None));
        }
        for (j, d) in decoy_ids.iter().enumerate() {
            if rng.gen_bool(0.4) {
                let caption = if lure { "face cream shop" } else { "garden tools catalog" };
                els.push((format!("x{j}"), caption.into(), Some(d.clone())));
            }
        }
        els.shuffle(rng);
        let page = pages.get_mut(id).unwrap();
        for (k, (target, caption, to)) in els.into_iter().enumerate() {
            page.w_elements.push(element(k, &target, &caption));
            match to {
                Some(to) => {
                    page.links.insert(target, to);
                }
                None => {
                    page.downloads.insert(target, serde_json::from_str(DOC).unwrap());
                }
            }
        }
    }
    for (j, d) in decoy_ids.iter().enumerate() {
        let page = pages.get_mut(d).unwrap();
        let other = &decoy_ids[(j + 1) % decoys];
        let caption = if lure { "portrait frames store" } else { "kitchen recipes" };
        page.w_elements.push(element(0, "more", caption));
        page.links.insert("more".into(), other.clone());
    }
    let s = SimSite {
        start: path[0].clone(),
        pages,
        assets: Vec::new(),
    };
    s.check().unwrap();
    s
}

#[test]
fn random_planted_paths_without_lures_take_the_direct_route() {
    for seed in 0..100u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let path_len = rng.gen_range(1..7);
        let decoys = rng.gen_range(1..5);
        let s = planted_site(&mut rng, path_len, decoys, false);
        // path_len - 1 clicks, then download, parse and capture
        let budget = path_len + 2;
        let r = explore(&s, QUERY, budget);
        assert!(r.succeeded(), "seed {seed}: {:?}", r.status);
        assert_eq!(r.clicked_pages().len(), path_len - 1, "seed {seed}");
        assert!(r.trace.len() <= budget);
        assert!(no_revisits(&r, &s.start));
        check_supervision(&r.messages).unwrap();
        assert_replays(&s, QUERY, budget, &r);
    }
}

#[test]
fn random_planted_paths_with_lures_succeed_within_exhaustive_budget() {
    for seed in 0..100u64 {
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        let path_len = rng.gen_range(1..6);
        let decoys = rng.gen_range(1..5);
        let s = planted_site(&mut rng, path_len, decoys, true);
        let budget = 2 * s.pages.len() + 3;
        let r = explore(&s, QUERY, budget);
        assert!(r.succeeded(), "seed {seed}: {:?}", r.status);
        assert!(r.trace.len() <= budget);
        assert!(no_revisits(&r, &s.start));
        check_supervision(&r.messages).unwrap();
        assert_replays(&s, QUERY, budget, &r);
    }
}
