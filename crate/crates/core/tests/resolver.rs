mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use common::{catalog_assets, fixture_workflow};
use genflow_core::assets::{
    install, AssetDescriptor, AssetKind, Fetcher, FetcherSource, InstallError, InstallOutcome, LocalDatabase, Mode, Registry,
    RemoteDirectory, ResolveEnv, ResolveOutcome, SimulatedFetcher, TimingTable,
};
use genflow_core::assets::timed_resolve_and_install;
use genflow_core::workflow::{execute_with, ExecEnv, NodeCatalog, Workflow};
use proptest::prelude::*;

fn seeded_db(dir: &Path) -> LocalDatabase {
    let db = LocalDatabase::open(dir).unwrap();
    for a in catalog_assets() {
        db.seed_asset(&a.descriptor, &a.bytes().unwrap()).unwrap();
    }
    db
}

fn remote_fetcher(latency: Duration, wf_bytes: &[u8], wf_id: &str) -> SimulatedFetcher {
    let dir = RemoteDirectory::simulated();
    let f = SimulatedFetcher::new(latency);
    for a in catalog_assets() {
        f.publish_asset(&dir, &a.descriptor, a.bytes().unwrap());
    }
    f.publish_workflow(&dir, wf_id, wf_bytes.to_vec());
    f
}

fn resolve(wf: &Workflow, mode: Mode, root: &Path, db: &LocalDatabase, fetcher: &dyn Fetcher, install: bool) -> ResolveOutcome {
    let catalog = NodeCatalog::with_installed_packs(root).unwrap();
    let env = ResolveEnv {
        root,
        catalog: &catalog,
        db,
        fetcher,
        remote: RemoteDirectory::simulated(),
        install,
    };
    timed_resolve_and_install(wf, mode, &env).unwrap()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn fixture_yields_exactly_one_node_and_one_model() {
    let (_, wf) = fixture_workflow("img2img_basic.flow.json");
    let tmp = tempfile::tempdir().unwrap();
    let db = LocalDatabase::open(&tmp.path().join("db")).unwrap();
    let fetcher = SimulatedFetcher::new(Duration::ZERO);
    let out = resolve(&wf, Mode::Local, &tmp.path().join("root"), &db, &fetcher, false);
    assert_eq!(out.before.missing_node_types, set(&["ThinkDiffusionImg2Img"]));
    assert_eq!(out.before.missing_models, set(&["ThinkDiffusionXL.safetensors"]));
}

#[test]
fn local_install_reaches_fixpoint_without_fetching() {
    let (_, wf) = fixture_workflow("img2img_basic.flow.json");
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let db = seeded_db(&tmp.path().join("db"));
    let fetcher = SimulatedFetcher::new(Duration::ZERO);
    let out = resolve(&wf, Mode::Local, &root, &db, &fetcher, true);
    assert!(out.unresolved.is_empty(), "{:?}", out.unresolved);
    assert!(out.after.is_satisfied(), "{:?}", out.after);
    assert_eq!(fetcher.calls(), 0);
    assert!(root.join("models/checkpoints/ThinkDiffusionXL.safetensors").is_file());
    assert!(root.join("custom_nodes/comfyui-thinkdiffusion/nodes.json").is_file());

    // Running again is a no-op and everything reports as present.
    let again = resolve(&wf, Mode::Local, &root, &db, &fetcher, true);
    assert!(again.before.is_satisfied());
    assert!(again.statuses.is_empty());

    // The installed pack makes the workflow runnable.
    std::fs::write(root.join("input.ppm"), std::fs::read(common::fixtures().join("images/input.ppm")).unwrap()).unwrap();
    let catalog = NodeCatalog::with_installed_packs(&root).unwrap();
    let result = execute_with(&wf, &catalog, &ExecEnv::new(&root).with_model_root(&root)).unwrap();
    assert_eq!(result.order.len(), 5);
}

#[test]
fn remote_install_records_into_local_database() {
    let (bytes, wf) = fixture_workflow("img2img_basic.flow.json");
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let db = LocalDatabase::open(&tmp.path().join("db")).unwrap();
    let fetcher = remote_fetcher(Duration::ZERO, &bytes, &wf.id);
    let out = resolve(&wf, Mode::Remote, &root, &db, &fetcher, true);
    assert!(out.workflow_found);
    assert!(out.after.is_satisfied());
    assert!(fetcher.calls() >= 5);
    assert!(db.workflows.get(&wf.id).is_some());
    assert!(db.registry.lookup("ThinkDiffusionXL.safetensors", AssetKind::Model).is_some());

    // A second root served from the now-populated database needs no fetches.
    let calls = fetcher.calls();
    let out2 = resolve(&wf, Mode::Local, &tmp.path().join("root2"), &db, &fetcher, true);
    assert!(out2.after.is_satisfied());
    assert_eq!(fetcher.calls(), calls);
}

#[test]
fn remote_is_slower_than_local_in_20_of_20_trials() {
    let (bytes, wf) = fixture_workflow("img2img_basic.flow.json");
    let bytes = Arc::new(bytes);
    let handles: Vec<_> = (0..20)
        .map(|_| {
            let (bytes, wf) = (Arc::clone(&bytes), wf.clone());
            std::thread::spawn(move || {
                let tmp = tempfile::tempdir().unwrap();
                let local_db = seeded_db(&tmp.path().join("local-db"));
                let idle = SimulatedFetcher::new(Duration::from_millis(200));
                local_db.workflows.put(&wf).unwrap();
                let local = resolve(&wf, Mode::Local, &tmp.path().join("local"), &local_db, &idle, true);
                let remote_db = LocalDatabase::open(&tmp.path().join("remote-db")).unwrap();
                let fetcher = remote_fetcher(Duration::from_millis(200), &bytes, &wf.id);
                let remote = resolve(&wf, Mode::Remote, &tmp.path().join("remote"), &remote_db, &fetcher, true);
                assert!(local.after.is_satisfied() && remote.after.is_satisfied());
                assert_eq!(idle.calls(), 0);
                (local.samples, remote.samples)
            })
        })
        .collect();
    let runs: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (i, (l, r)) in runs.iter().enumerate() {
        let total = |s: &Vec<genflow_core::assets::TimingSample>| s.iter().map(|x| x.duration).sum::<Duration>();
        assert!(total(r) > total(l), "trial {i}: remote {:?} local {:?}", total(r), total(l));
    }
    let local: Vec<_> = runs.iter().map(|r| r.0.clone()).collect();
    let remote: Vec<_> = runs.iter().map(|r| r.1.clone()).collect();
    let table = TimingTable::from_runs(&local, &remote);
    let (l, r) = table.total();
    assert!(r.unwrap() > l.unwrap());
    assert_eq!(table.rows.len(), 4);
}

#[test]
fn checksum_mismatch_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let d = catalog_assets().into_iter().find(|a| a.descriptor.kind == AssetKind::Model).unwrap().descriptor;
    let fetcher = SimulatedFetcher::new(Duration::ZERO);
    fetcher.publish(d.url.clone(), b"tampered".to_vec());
    let result = install(std::slice::from_ref(&d), &FetcherSource(&fetcher), tmp.path(), None);
    assert!(matches!(result.statuses[0].outcome, Err(InstallError::ChecksumMismatch { .. })));
    assert!(!tmp.path().join(&d.save_path).exists());
    let leftovers: Vec<_> = walkdir::WalkDir::new(tmp.path()).into_iter().filter_map(|e| e.ok()).filter(|e| e.file_type().is_file()).collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");

    let good = catalog_assets().into_iter().find(|a| a.descriptor.name == d.name).unwrap();
    fetcher.publish(d.url.clone(), good.bytes().unwrap());
    let ok = install(std::slice::from_ref(&d), &FetcherSource(&fetcher), tmp.path(), None);
    assert!(matches!(ok.statuses[0].outcome, Ok(InstallOutcome::Installed(_))));
}

#[test]
fn registry_survives_reopen() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("registry.jsonl");
    let reg = Registry::open(&path).unwrap();
    for a in catalog_assets() {
        reg.record(a.descriptor).unwrap();
    }
    let back = Registry::open(&path).unwrap();
    assert_eq!(back.len(), 4);
    assert_eq!(
        back.lookup_node_type("IPAdapterApply").map(|d| d.name),
        Some("comfyui-ipadapter".to_string())
    );
}

fn descriptor(kind: AssetKind, save_path: String) -> AssetDescriptor {
    AssetDescriptor {
        name: "x".into(),
        kind,
        url: "sim://x".into(),
        save_path,
        size_bytes: 1,
        checksum: String::new(),
        provides: Vec::new(),
    }
}

proptest! {
    #[test]
    fn accepted_save_paths_stay_under_their_root(parts in proptest::collection::vec("[a-z.]{1,4}|\\.\\.|/", 1..6), model in any::<bool>()) {
        let kind = if model { AssetKind::Model } else { AssetKind::NodePack };
        let raw = format!("{}/{}", kind.root_dir(), parts.join("/"));
        let d = descriptor(kind, raw.clone());
        if let Ok(p) = d.checked_save_path() {
            prop_assert!(p.starts_with(kind.root_dir()));
            prop_assert!(p.components().all(|c| matches!(c, std::path::Component::Normal(_))));
            prop_assert!(!raw.split('/').any(|s| s == ".."));
        }
    }

    #[test]
    fn absolute_and_foreign_paths_are_rejected(tail in "[a-z]{1,6}") {
        for bad in [format!("/{tail}/a"), format!("models/../{tail}"), format!("{tail}/a"), format!("custom_nodes\\{tail}")] {
            prop_assert!(descriptor(AssetKind::Model, bad).checked_save_path().is_err());
        }
    }
}
