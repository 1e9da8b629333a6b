//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the code it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use genflow_core::merge::{BBox, DetectedElement, Source};
use rand::rngs::StdRng;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ---------- element fusion ----------

fn naive_area(c: [f64; 4]) -> f64 {
    (c[2] - c[0]) * (c[3] - c[1])
}

fn naive_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let union = naive_area(a) + naive_area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn naive_merge(w: &DetectedElement<f64>, o: &DetectedElement<f64>) -> DetectedElement<f64> {
    let mut props: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in &w.properties {
        props.insert(k.clone(), v.clone());
    }
    for (k, v) in &o.properties {
        if let Some(old) = w.properties.get(k) {
            props.insert(format!("{k}.w"), old.clone());
        }
        props.insert(k.clone(), v.clone());
    }
    DetectedElement {
        bbox: w.bbox,
        source: Source::Merged,
        properties: props,
    }
}

/// Line-by-line transliteration of the greedy fusion: for each w, scan
/// every o not in U and keep the first strict maximum of IoU.
pub fn naive_combine(w: &[DetectedElement<f64>], o: &[DetectedElement<f64>], tau: f64) -> Vec<DetectedElement<f64>> {
    let mut c = Vec::new();
    let mut u: Vec<usize> = Vec::new();
    for we in w {
        let mut star: Option<usize> = None;
        let mut star_iou = -1.0;
        for (j, oe) in o.iter().enumerate() {
            if u.contains(&j) {
                continue;
            }
            let v = naive_iou(we.bbox.coords(), oe.bbox.coords());
            if v > star_iou {
                star = Some(j);
                star_iou = v;
            }
        }
        match star {
            Some(j) if star_iou >= tau => {
                c.push(naive_merge(we, &o[j]));
                u.push(j);
            }
            _ => c.push(we.clone()),
        }
    }
    for (j, oe) in o.iter().enumerate() {
        if !u.contains(&j) {
            c.push(oe.clone());
        }
    }
    c
}

/// IoU by counting covered unit cells on an integer grid of side `grid`.
pub fn raster_iou(a: [i64; 4], b: [i64; 4], grid: i64) -> f64 {
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..grid {
        for x in 0..grid {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn random_box(rng: &mut StdRng, grid: i64) -> [i64; 4] {
    let x1 = rng.gen_range(0..grid);
    let y1 = rng.gen_range(0..grid);
    let x2 = rng.gen_range(x1..=grid);
    let y2 = rng.gen_range(y1..=grid);
    [x1, y1, x2, y2]
}

pub fn to_bbox(c: [i64; 4]) -> BBox<f64> {
    BBox::new(c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64).unwrap()
}

const KEYS: [&str; 4] = ["role", "label", "function", "target"];

pub fn random_elements(rng: &mut StdRng, source: Source, max: usize, grid: i64) -> Vec<DetectedElement<f64>> {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|i| {
            let mut e = DetectedElement::new(to_bbox(random_box(rng, grid)), source).with_property("id", format!("{source}{i}"));
            for k in KEYS {
                if rng.gen_bool(0.5) {
                    e = e.with_property(k, format!("{source}{i}-{k}"));
                }
            }
            e
        })
        .collect()
}

// ---------- graphs ----------

/// Whether the directed graph on `n` vertices has a cycle, by recursive
/// three-colour depth-first search.
pub fn dfs_has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    fn visit(v: usize, adj: &[Vec<usize>], colour: &mut [u8]) -> bool {
        colour[v] = 1;
        for &w in &adj[v] {
            if colour[w] == 1 || (colour[w] == 0 && visit(w, adj, colour)) {
                return true;
            }
        }
        colour[v] = 2;
        false
    }
    let mut colour = vec![0u8; n];
    (0..n).any(|v| colour[v] == 0 && visit(v, &adj, &mut colour))
}

// ---------- retrieval ----------

/// Quadratic reference search: plain dot products over unit vectors,
/// filter by threshold, order by similarity then id, keep `k`.
pub fn brute_force_search(records: &[(String, Vec<f64>)], query: &[f64], threshold: f64, k: usize) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = records
        .iter()
        .map(|(id, v)| {
            let mut dot = 0.0;
            for i in 0..v.len() {
                dot += v[i] * query[i];
            }
            (id.clone(), dot)
        })
        .filter(|(_, s)| *s >= threshold)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

// ---------- preprocessing ----------

const FUZZ_PIECES: &[&str] = &[
    "the", "A", "Img2Img", "SDXL", "workflow", "!!!", "<b>", "</b>", "<a href='x'>", "http://x.co/a.b", "www.ex.org",
    "bob@example.com", "#tag", "@user", "😀", "é", "ß", "\t", "\n", "  ", "-", "_", "'", "42", "x9", "of", "AND",
    "&amp;", "<", ">", "https://", "@", "#", ".", "ComfyUI", "naïve", "日本",
];

/// Random text from a mix of words, markup, URLs, emails, social tokens,
/// punctuation, whitespace and non-ASCII characters.
pub fn fuzz_text(rng: &mut StdRng) -> String {
    let n = rng.gen_range(0..16);
    let mut s = String::new();
    for _ in 0..n {
        if rng.gen_bool(0.3) {
            let c = rng.gen_range(0x20u32..0x2FF);
            s.push(char::from_u32(c).unwrap_or('?'));
        } else {
            s.push_str(FUZZ_PIECES[rng.gen_range(0..FUZZ_PIECES.len())]);
        }
        if rng.gen_bool(0.6) {
            s.push(' ');
        }
    }
    s
}

pub fn valid_token(t: &str) -> bool {
    !t.is_empty() && t.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
}

// ---------- fixture loading ----------

pub fn catalog_assets() -> Vec<genflow_core::agents::SimAsset> {
    serde_json::from_slice(&std::fs::read(fixtures().join("assets/catalog.json")).unwrap()).unwrap()
}

pub fn fixture_workflow(name: &str) -> (Vec<u8>, genflow_core::workflow::Workflow) {
    let bytes = std::fs::read(fixtures().join("workflows").join(name)).unwrap();
    let wf = genflow_core::workflow::parse_workflow(&bytes).unwrap();
    (bytes, wf)
}
