use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::site::SimPage;
use crate::ingest::{CleanText, Preprocessor};
use crate::merge::{combine_elements, DetectedElement, MergeConfig};

/// Property naming the link or download an element activates.
pub const TARGET_KEY: &str = "target";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum WebAction {
    Click {
        page: String,
        element: usize,
        target: String,
        to: String,
    },
    Download {
        page: String,
        element: usize,
        target: String,
    },
    GiveUp {
        page: String,
    },
}

/// Depth-first browsing state: the path of open pages, every page ever
/// entered, and the downloads already taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebAgentState {
    pub path: Vec<String>,
    pub visited: BTreeSet<String>,
    pub downloaded: BTreeSet<(String, String)>,
}

impl WebAgentState {
    pub fn new(start: &str) -> Self {
        Self {
            path: vec![start.to_string()],
            visited: BTreeSet::from([start.to_string()]),
            downloaded: BTreeSet::new(),
        }
    }

    /// The page currently open; `None` once the agent has given up on the
    /// start page.
    pub fn current(&self) -> Option<&str> {
        self.path.last().map(String::as_str)
    }

    /// Advance the state by an action. Giving up closes the current page
    /// and returns to the one that led to it.
    pub fn apply(&mut self, action: &WebAction) {
        match action {
            WebAction::Click { to, .. } => {
                self.visited.insert(to.clone());
                self.path.push(to.clone());
            }
            WebAction::Download { page, target, .. } => {
                self.downloaded.insert((page.clone(), target.clone()));
            }
            WebAction::GiveUp { .. } => {
                self.path.pop();
            }
        }
    }
}

fn is_target_key(key: &str) -> bool {
    key == TARGET_KEY || key.starts_with("target.")
}

/// Tokens shared between an element's descriptive properties and the query.
pub fn element_overlap(element: &DetectedElement<f64>, query: &HashSet<&str>, preprocessor: &Preprocessor) -> usize {
    let text: Vec<&str> = element
        .properties
        .iter()
        .filter(|(k, _)| !is_target_key(k))
        .map(|(_, v)| v.as_str())
        .collect();
    let clean = preprocessor.clean(&text.join(" "));
    clean.token_set().intersection(query).count()
}

/// Choose the next action on `page`: fuse the page's two detection lists,
/// score each still-actionable element by query-token overlap, and take the
/// best (lowest index on ties). A download is preferred over a link on the
/// same element. Links to pages already entered are not actionable.
pub fn web_agent_step(
    state: &WebAgentState,
    page_id: &str,
    page: &SimPage,
    query: &CleanText,
    merge: &MergeConfig<f64>,
    preprocessor: &Preprocessor,
) -> WebAction {
    let query = query.token_set();
    let elements = combine_elements(&page.w_elements, &page.o_elements, merge.tau());
    let mut best: Option<(usize, WebAction)> = None;
    for (i, el) in elements.iter().enumerate() {
        let Some(target) = el.properties.get(TARGET_KEY) else {
            continue;
        };
        let action = if page.downloads.contains_key(target)
            && !state.downloaded.contains(&(page_id.to_string(), target.clone()))
        {
            WebAction::Download {
                page: page_id.to_string(),
                element: i,
                target: target.clone(),
            }
        } else if let Some(to) = page.links.get(target).filter(|to| !state.visited.contains(*to)) {
            WebAction::Click {
                page: page_id.to_string(),
                element: i,
                target: target.clone(),
                to: to.clone(),
            }
        } else {
            continue;
        };
        let score = element_overlap(el, &query, preprocessor);
        if score > 0 && best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, action));
        }
    }
    best.map(|(_, a)| a).unwrap_or(WebAction::GiveUp {
        page: page_id.to_string(),
    })
}
