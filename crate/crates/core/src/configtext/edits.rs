//! Search/replace edit scripts with a three-tier matching cascade.
//!
//! Per edit: (1) exact contiguous match, (2) whitespace-normalized match,
//! (3) fuzzy match with block-wise Levenshtein distance bounded by
//! `max(2, ceil(0.05 * search_block_chars))`. The chosen match must be unique
//! at its tier; otherwise the edit fails as ambiguous. Edits apply
//! top-to-bottom, so later edits see earlier results.

use super::ConfigSet;
use serde::{Deserialize, Serialize};

/// Fuzzy threshold: fraction of search-block characters allowed to differ.
pub const FUZZY_FRACTION: f64 = 0.05;
/// Fuzzy threshold floor in edit-distance units.
pub const FUZZY_FLOOR: usize = 2;

/// One search/replace operation against a single router file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReplace {
    pub router: String,
    pub search: Vec<String>,
    pub replace: Vec<String>,
}

/// An ordered list of search/replace operations.
pub type EditScript = Vec<SearchReplace>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchFailureReason {
    NotFound,
    Ambiguous,
}

/// Why an edit could not be applied. The rendered text of this failure is
/// the parser feedback returned to the solver.
#[derive(Debug, Clone, thiserror::Error)]
pub struct MatchFailure {
    pub router: String,
    pub reason: MatchFailureReason,
    pub nearest: Option<String>,
}

impl std::fmt::Display for MatchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.reason {
            MatchFailureReason::NotFound => {
                write!(f, "search block not found in file '{}'", self.router)?
            }
            MatchFailureReason::Ambiguous => write!(
                f,
                "search block matches more than one region in file '{}'",
                self.router
            )?,
        }
        if let Some(nearest) = &self.nearest {
            write!(f, "; nearest candidate:\n{nearest}")?;
        }
        Ok(())
    }
}

/// Applies an edit script to a configuration set.
///
/// All-or-nothing: the first failing edit aborts and reports the failure.
/// An empty script is the identity.
pub fn apply_edits(configs: &ConfigSet, script: &EditScript) -> Result<ConfigSet, MatchFailure> {
    let mut out = configs.clone();
    for edit in script {
        let Some(text) = out.get(&edit.router) else {
            return Err(MatchFailure {
                router: edit.router.clone(),
                reason: MatchFailureReason::NotFound,
                nearest: None,
            });
        };
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        let at = locate(&lines, &edit.search, &edit.router)?;
        let mut new_lines = Vec::with_capacity(lines.len());
        new_lines.extend_from_slice(&lines[..at]);
        new_lines.extend(edit.replace.iter().cloned());
        new_lines.extend_from_slice(&lines[at + edit.search.len()..]);
        let mut new_text = new_lines.join("\n");
        new_text.push('\n');
        out.insert(edit.router.clone(), new_text);
    }
    Ok(out)
}

/// Finds the unique start index of the search block in `lines`.
fn locate(lines: &[String], search: &[String], router: &str) -> Result<usize, MatchFailure> {
    assert!(!search.is_empty(), "search block must be non-empty");
    let fail = |reason, nearest| {
        Err(MatchFailure {
            router: router.to_string(),
            reason,
            nearest,
        })
    };
    if search.len() > lines.len() {
        return fail(MatchFailureReason::NotFound, None);
    }
    let windows = lines.len() - search.len() + 1;

    // Tier 1: exact contiguous match.
    let exact: Vec<usize> = (0..windows)
        .filter(|&i| lines[i..i + search.len()] == *search)
        .collect();
    match exact.len() {
        1 => return Ok(exact[0]),
        0 => {}
        _ => return fail(MatchFailureReason::Ambiguous, None),
    }

    // Tier 2: whitespace-normalized match.
    let norm_search: Vec<String> = search.iter().map(|l| normalize_ws(l)).collect();
    let norm_lines: Vec<String> = lines.iter().map(|l| normalize_ws(l)).collect();
    let ws: Vec<usize> = (0..windows)
        .filter(|&i| norm_lines[i..i + search.len()] == norm_search[..])
        .collect();
    match ws.len() {
        1 => return Ok(ws[0]),
        0 => {}
        _ => return fail(MatchFailureReason::Ambiguous, None),
    }

    // Tier 3: block-wise Levenshtein within threshold. Among windows within
    // the threshold, the minimum distance must be attained uniquely.
    let search_text = search.join("\n");
    let threshold = FUZZY_FLOOR.max((FUZZY_FRACTION * search_text.len() as f64).ceil() as usize);
    let mut best: Option<(usize, usize)> = None; // (distance, index)
    let mut best_count = 0usize;
    let mut nearest: Option<(usize, usize)> = None; // any window, for feedback
    for i in 0..windows {
        let window_text = lines[i..i + search.len()].join("\n");
        let d = levenshtein(&search_text, &window_text);
        if nearest.map_or(true, |(nd, _)| d < nd) {
            nearest = Some((d, i));
        }
        if d <= threshold {
            match best {
                Some((bd, _)) if d > bd => {}
                Some((bd, _)) if d == bd => best_count += 1,
                _ => {
                    best = Some((d, i));
                    best_count = 1;
                }
            }
        }
    }
    let snippet = nearest.map(|(_, i)| lines[i..i + search.len()].join("\n"));
    match (best, best_count) {
        (Some((_, i)), 1) => Ok(i),
        (Some(_), _) => fail(MatchFailureReason::Ambiguous, snippet),
        (None, _) => fail(MatchFailureReason::NotFound, snippet),
    }
}

fn normalize_ws(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Plain dynamic-programming Levenshtein distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Wire format: `FILE: <router>` header, then a fenced search/replace block.
pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER_MARKER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

/// Renders an edit script in the wire format solvers must emit.
pub fn render_edit_script(script: &EditScript) -> String {
    let mut out = String::new();
    for edit in script {
        out.push_str(&format!("FILE: {}\n", edit.router));
        out.push_str(SEARCH_MARKER);
        out.push('\n');
        for l in &edit.search {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(DIVIDER_MARKER);
        out.push('\n');
        for l in &edit.replace {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(REPLACE_MARKER);
        out.push('\n');
    }
    out
}

/// Parses the wire format back into an edit script.
///
/// Returns a human-readable description of the first malformed block, suited
/// for feedback to the solver.
pub fn parse_edit_script(text: &str) -> Result<EditScript, String> {
    let mut script = EditScript::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(router) = trimmed.strip_prefix("FILE:") else {
            continue;
        };
        let router = router.trim().to_string();
        if router.is_empty() {
            return Err("FILE header without a router name".to_string());
        }
        // Skip blank lines between the header and the search marker.
        while lines.peek().map_or(false, |l| l.trim().is_empty()) {
            lines.next();
        }
        if lines.next().map(|l| l.trim()) != Some(SEARCH_MARKER) {
            return Err(format!(
                "malformed edit block in FILE {router}: expected '{SEARCH_MARKER}'"
            ));
        }
        let mut search = Vec::new();
        let mut replace = Vec::new();
        let mut in_replace = false;
        let mut closed = false;
        for l in lines.by_ref() {
            match l.trim() {
                DIVIDER_MARKER if !in_replace => in_replace = true,
                REPLACE_MARKER if in_replace => {
                    closed = true;
                    break;
                }
                _ => {
                    if in_replace {
                        replace.push(l.to_string());
                    } else {
                        search.push(l.to_string());
                    }
                }
            }
        }
        if !closed {
            return Err(format!(
                "malformed edit block in FILE {router}: missing '{REPLACE_MARKER}'"
            ));
        }
        if search.is_empty() {
            return Err(format!("empty search block in FILE {router}"));
        }
        script.push(SearchReplace {
            router,
            search,
            replace,
        });
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ConfigSet {
        let mut c = ConfigSet::new();
        c.insert("r1".into(), text.to_string());
        c
    }

    fn edit(search: &[&str], replace: &[&str]) -> EditScript {
        vec![SearchReplace {
            router: "r1".into(),
            search: search.iter().map(|s| s.to_string()).collect(),
            replace: replace.iter().map(|s| s.to_string()).collect(),
        }]
    }

    const BASE: &str = "hostname r1\n!\nrouter bgp 65001\n neighbor 10.0.0.1 remote-as 65002\n!\nend\n";

    #[test]
    fn exact_match_replaces_one_line() {
        let out = apply_edits(
            &config(BASE),
            &edit(
                &[" neighbor 10.0.0.1 remote-as 65002"],
                &[" neighbor 10.0.0.1 remote-as 65001"],
            ),
        )
        .unwrap();
        assert!(out["r1"].contains("remote-as 65001"));
        assert!(!out["r1"].contains("remote-as 65002"));
    }

    #[test]
    fn whitespace_variant_matches_at_tier_two() {
        let out = apply_edits(
            &config(BASE),
            &edit(
                &["neighbor   10.0.0.1   remote-as 65002"],
                &[" neighbor 10.0.0.1 remote-as 65001"],
            ),
        )
        .unwrap();
        assert!(out["r1"].contains("remote-as 65001"));
    }

    #[test]
    fn fuzzy_variant_within_threshold_matches() {
        // Two-character typo ("remote-sa"), beyond whitespace normalization.
        let out = apply_edits(
            &config(BASE),
            &edit(
                &[" neighbor 10.0.0.1 remote-sa 65002"],
                &[" neighbor 10.0.0.1 remote-as 65009"],
            ),
        )
        .unwrap();
        assert!(out["r1"].contains("remote-as 65009"));
    }

    #[test]
    fn far_search_block_is_not_found_with_nearest_snippet() {
        let err = apply_edits(
            &config(BASE),
            &edit(&["interface TenGigabitEthernet0/0/0"], &["x"]),
        )
        .unwrap_err();
        assert!(matches!(err.reason, MatchFailureReason::NotFound));
        assert!(err.nearest.is_some());
    }

    #[test]
    fn duplicate_block_is_ambiguous() {
        let text = "line a\nline b\nline a\n";
        let err = apply_edits(&config(text), &edit(&["line a"], &["line c"])).unwrap_err();
        assert!(matches!(err.reason, MatchFailureReason::Ambiguous));
    }

    #[test]
    fn empty_script_is_identity() {
        let c = config(BASE);
        let out = apply_edits(&c, &EditScript::new()).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn unknown_router_is_not_found() {
        let mut script = edit(&["x"], &["y"]);
        script[0].router = "r9".into();
        let err = apply_edits(&config(BASE), &script).unwrap_err();
        assert_eq!(err.router, "r9");
        assert!(matches!(err.reason, MatchFailureReason::NotFound));
    }

    #[test]
    fn multi_line_replace_and_sequential_edits() {
        let script = vec![
            SearchReplace {
                router: "r1".into(),
                search: vec!["router bgp 65001".into()],
                replace: vec!["router bgp 65001".into(), " bgp log-neighbor-changes".into()],
            },
            SearchReplace {
                router: "r1".into(),
                search: vec![" bgp log-neighbor-changes".into()],
                replace: vec![],
            },
        ];
        let out = apply_edits(&config(BASE), &script).unwrap();
        assert_eq!(out["r1"], BASE);
    }

    #[test]
    fn wire_format_round_trips() {
        let script = vec![SearchReplace {
            router: "r3".into(),
            search: vec![" a".into(), " b".into()],
            replace: vec![" c".into()],
        }];
        let text = render_edit_script(&script);
        assert!(text.starts_with("FILE: r3\n<<<<<<< SEARCH\n"));
        let parsed = parse_edit_script(&text).unwrap();
        assert_eq!(parsed, script);
    }

    #[test]
    fn missing_replace_marker_is_malformed() {
        let text = "FILE: r3\n<<<<<<< SEARCH\nfoo\n=======\nbar\n";
        let err = parse_edit_script(text).unwrap_err();
        assert!(err.contains("malformed edit block in FILE r3"));
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
    }
}
