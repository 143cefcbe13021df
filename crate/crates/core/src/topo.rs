//! Topology ingestion, validation, and tier classification.
//!
//! Two input formats are accepted: Topology-Zoo-style GML documents and a
//! native JSON format `{ name, routers: [..], links: [[router, ifid, router,
//! ifid], ..] }`. GML files carry geographic metadata which is ignored: only
//! node ids/labels and edges matter for the pipeline.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, thiserror::Error)]
pub enum TopoError {
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("self-loop link on router '{0}'")]
    SelfLoop(String),
    #[error("duplicate link between {0} and {1}")]
    DuplicateLink(String, String),
    #[error("interface {0}:{1} appears in more than one link")]
    InterfaceReuse(String, u32),
    #[error("disconnected topology: {0} routers unreachable from '{1}'")]
    Disconnected(usize, String),
    #[error("unknown router '{0}' referenced by a link")]
    UnknownRouter(String),
    #[error("topology has no routers")]
    Empty,
}

/// One end of a link: a router name plus a small interface ordinal.
pub type Endpoint = (String, u32);

/// An undirected link between two (router, interface) endpoints.
///
/// Endpoints are stored sorted so that equal links compare equal regardless of
/// the order they appeared in the source document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
}

impl Link {
    pub fn new(a: Endpoint, b: Endpoint) -> Self {
        if a <= b {
            Link { a, b }
        } else {
            Link { a: b, b: a }
        }
    }

    pub fn routers(&self) -> (&str, &str) {
        (&self.a.0, &self.b.0)
    }

    /// The endpoint on `router`, if the link touches it.
    pub fn end_on(&self, router: &str) -> Option<&Endpoint> {
        if self.a.0 == router {
            Some(&self.a)
        } else if self.b.0 == router {
            Some(&self.b)
        } else {
            None
        }
    }

    /// The endpoint opposite to `router`.
    pub fn other_end(&self, router: &str) -> Option<&Endpoint> {
        if self.a.0 == router {
            Some(&self.b)
        } else if self.b.0 == router {
            Some(&self.a)
        } else {
            None
        }
    }
}

/// An undirected device/interface graph. Immutable after construction and
/// safe to share across concurrent scenario workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub routers: BTreeSet<String>,
    pub links: BTreeSet<Link>,
}

/// Size tier of a topology. Boundaries 50 and 100 belong to `Medium`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Small,
    Medium,
    Large,
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tier::Small => write!(f, "small"),
            Tier::Medium => write!(f, "medium"),
            Tier::Large => write!(f, "large"),
        }
    }
}

/// Classifies a topology by node count: `< 50` small, `50..=100` medium,
/// `> 100` large.
pub fn classify_tier(t: &Topology) -> Tier {
    let n = t.routers.len();
    if n < 50 {
        Tier::Small
    } else if n <= 100 {
        Tier::Medium
    } else {
        Tier::Large
    }
}

/// Loads a topology from document bytes, auto-detecting the format.
///
/// Deterministic: identical bytes produce an identical `Topology`, including
/// interface-id assignment (sorted neighbor order when the source lacks ids).
pub fn load_topology(source: &str) -> Result<Topology, TopoError> {
    let trimmed = source.trim_start();
    if trimmed.starts_with('{') {
        load_native(source)
    } else {
        load_gml(source)
    }
}

#[derive(Deserialize)]
struct NativeDoc {
    name: String,
    routers: Vec<String>,
    links: Vec<(String, u32, String, u32)>,
}

fn load_native(source: &str) -> Result<Topology, TopoError> {
    let doc: NativeDoc =
        serde_json::from_str(source).map_err(|e| TopoError::Parse(e.to_string()))?;
    let routers: BTreeSet<String> = doc.routers.into_iter().collect();
    let mut links = BTreeSet::new();
    for (ra, ia, rb, ib) in doc.links {
        if ra == rb {
            return Err(TopoError::SelfLoop(ra));
        }
        for r in [&ra, &rb] {
            if !routers.contains(r) {
                return Err(TopoError::UnknownRouter(r.clone()));
            }
        }
        let link = Link::new((ra.clone(), ia), (rb.clone(), ib));
        if !links.insert(link) {
            return Err(TopoError::DuplicateLink(ra, rb));
        }
    }
    finish(doc.name, routers, links)
}

/// Minimal GML reader: extracts `node [ id .. label .. ]` and
/// `edge [ source .. target .. ]` entries, ignoring everything else.
fn load_gml(source: &str) -> Result<Topology, TopoError> {
    #[derive(Default)]
    struct Block {
        kind: String,
        id: Option<i64>,
        label: Option<String>,
        source: Option<i64>,
        target: Option<i64>,
    }

    let mut nodes: BTreeMap<i64, String> = BTreeMap::new();
    let mut edges: Vec<(i64, i64)> = Vec::new();
    let mut name = String::from("topology");
    let mut stack: Vec<Block> = Vec::new();
    let mut saw_graph = false;

    let tokens = tokenize_gml(source);
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            "[" => {
                // Opening bracket without a keyword: anonymous block.
                stack.push(Block::default());
                i += 1;
            }
            "]" => {
                let block = stack.pop().ok_or_else(|| {
                    TopoError::Parse("unbalanced ']' in GML document".to_string())
                })?;
                match block.kind.as_str() {
                    "node" => {
                        let id = block
                            .id
                            .ok_or_else(|| TopoError::Parse("node without id".to_string()))?;
                        let label = block.label.unwrap_or_else(|| format!("n{id}"));
                        nodes.insert(id, label);
                    }
                    "edge" => {
                        let s = block
                            .source
                            .ok_or_else(|| TopoError::Parse("edge without source".to_string()))?;
                        let t = block
                            .target
                            .ok_or_else(|| TopoError::Parse("edge without target".to_string()))?;
                        edges.push((s, t));
                    }
                    _ => {}
                }
                i += 1;
            }
            key => {
                let next = tokens.get(i + 1).cloned();
                match next.as_deref() {
                    Some("[") => {
                        if key == "graph" {
                            saw_graph = true;
                        }
                        stack.push(Block {
                            kind: key.to_string(),
                            ..Block::default()
                        });
                        i += 2;
                    }
                    Some(value) => {
                        if let Some(top) = stack.last_mut() {
                            match key {
                                "id" => top.id = value.parse().ok(),
                                "source" => top.source = value.parse().ok(),
                                "target" => top.target = value.parse().ok(),
                                "label" => {
                                    if top.kind == "node" {
                                        top.label = Some(value.trim_matches('"').to_string())
                                    } else if top.kind == "graph" {
                                        name = value.trim_matches('"').to_string();
                                    }
                                }
                                "Network" => {
                                    if top.kind == "graph" {
                                        name = value.trim_matches('"').to_string();
                                    }
                                }
                                _ => {}
                            }
                        }
                        i += 2;
                    }
                    None => {
                        i += 1;
                    }
                }
            }
        }
    }
    if !saw_graph {
        return Err(TopoError::Parse("no 'graph' block found".to_string()));
    }
    if nodes.is_empty() {
        return Err(TopoError::Empty);
    }

    // Sanitize labels into hostnames; de-duplicate with a numeric suffix in
    // deterministic node-id order.
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut by_id: BTreeMap<i64, String> = BTreeMap::new();
    for (id, label) in &nodes {
        let base = sanitize_name(label);
        let mut candidate = base.clone();
        let mut k = 2;
        while !taken.insert(candidate.clone()) {
            candidate = format!("{base}-{k}");
            k += 1;
        }
        by_id.insert(*id, candidate);
    }

    // Collapse parallel edges and drop self-loops? Self-loops are errors per
    // the invariants; parallel edges collapse to one link with a warning.
    let mut pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for (s, t) in &edges {
        let a = by_id
            .get(s)
            .ok_or_else(|| TopoError::Parse(format!("edge references unknown node {s}")))?;
        let b = by_id
            .get(t)
            .ok_or_else(|| TopoError::Parse(format!("edge references unknown node {t}")))?;
        if a == b {
            return Err(TopoError::SelfLoop(a.clone()));
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if !pairs.insert((a.clone(), b.clone())) {
            eprintln!("warning: collapsing parallel edge {a} -- {b}");
        }
    }

    // Assign interface ids deterministically: per router, neighbors in sorted
    // order get interfaces 0, 1, 2, ...
    let routers: BTreeSet<String> = by_id.values().cloned().collect();
    let mut next_if: BTreeMap<&str, u32> = BTreeMap::new();
    let mut links = BTreeSet::new();
    for (a, b) in &pairs {
        let ia = *next_if
            .entry(a)
            .and_modify(|v| *v += 1)
            .or_insert(0);
        let ib = *next_if
            .entry(b)
            .and_modify(|v| *v += 1)
            .or_insert(0);
        links.insert(Link::new((a.clone(), ia), (b.clone(), ib)));
    }
    finish(sanitize_name(&name), routers, links)
}

fn tokenize_gml(source: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '[' || c == ']' {
            chars.next();
            tokens.push(c.to_string());
        } else if c == '"' {
            chars.next();
            let mut s = String::from("\"");
            for d in chars.by_ref() {
                if d == '"' {
                    break;
                }
                s.push(d);
            }
            s.push('"');
            tokens.push(s);
        } else if c == '#' {
            // comment to end of line
            for d in chars.by_ref() {
                if d == '\n' {
                    break;
                }
            }
        } else {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_whitespace() || d == '[' || d == ']' {
                    break;
                }
                s.push(d);
                chars.next();
            }
            tokens.push(s);
        }
    }
    tokens
}

/// Lowercase alphanumeric-plus-hyphen, suitable for hostnames.
pub fn sanitize_name(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if (c == ' ' || c == '-' || c == '_' || c == '.') && !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-').to_string();
    if trimmed.is_empty() {
        "node".to_string()
    } else {
        trimmed
    }
}

fn finish(
    name: String,
    routers: BTreeSet<String>,
    links: BTreeSet<Link>,
) -> Result<Topology, TopoError> {
    let topo = Topology {
        name,
        routers,
        links,
    };
    topo.validate()?;
    Ok(topo)
}

impl Topology {
    /// Checks every structural invariant: no self-loops, no duplicate links,
    /// unique interface endpoints, single connected component.
    pub fn validate(&self) -> Result<(), TopoError> {
        if self.routers.is_empty() {
            return Err(TopoError::Empty);
        }
        let mut seen_if: BTreeSet<&Endpoint> = BTreeSet::new();
        let mut seen_pair: BTreeSet<(&str, &str)> = BTreeSet::new();
        for link in &self.links {
            let (ra, rb) = link.routers();
            if ra == rb {
                return Err(TopoError::SelfLoop(ra.to_string()));
            }
            for r in [ra, rb] {
                if !self.routers.contains(r) {
                    return Err(TopoError::UnknownRouter(r.to_string()));
                }
            }
            if !seen_pair.insert((ra, rb)) {
                return Err(TopoError::DuplicateLink(ra.to_string(), rb.to_string()));
            }
            for ep in [&link.a, &link.b] {
                if !seen_if.insert(ep) {
                    return Err(TopoError::InterfaceReuse(ep.0.clone(), ep.1));
                }
            }
        }
        // Connectivity by BFS from the first router.
        let start = self.routers.iter().next().unwrap();
        let mut visited: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::new();
        visited.insert(start);
        queue.push_back(start.as_str());
        while let Some(r) = queue.pop_front() {
            for link in &self.links {
                if let Some(other) = link.other_end(r) {
                    if visited.insert(&other.0) {
                        queue.push_back(&other.0);
                    }
                }
            }
        }
        if visited.len() != self.routers.len() {
            return Err(TopoError::Disconnected(
                self.routers.len() - visited.len(),
                start.clone(),
            ));
        }
        Ok(())
    }

    /// Degree of a router (number of incident links).
    pub fn degree(&self, router: &str) -> usize {
        self.links
            .iter()
            .filter(|l| l.end_on(router).is_some())
            .count()
    }

    /// Sorted neighbors of a router.
    pub fn neighbors(&self, router: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .links
            .iter()
            .filter_map(|l| l.other_end(router).map(|e| e.0.as_str()))
            .collect();
        out.sort_unstable();
        out
    }

    /// Links incident to a router, in sorted order.
    pub fn links_of(&self, router: &str) -> Vec<&Link> {
        self.links
            .iter()
            .filter(|l| l.end_on(router).is_some())
            .collect()
    }

    /// Deterministic ordinal of a router (its index in sorted name order).
    pub fn ordinal(&self, router: &str) -> usize {
        self.routers.iter().position(|r| r == router).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn native(doc: &str) -> Result<Topology, TopoError> {
        load_topology(doc)
    }

    const TRIANGLE: &str = r#"{
        "name": "tri",
        "routers": ["a", "b", "c"],
        "links": [["a",0,"b",0], ["b",1,"c",0], ["a",1,"c",1]]
    }"#;

    #[test]
    fn triangle_loads() {
        let t = native(TRIANGLE).unwrap();
        assert_eq!(t.routers.len(), 3);
        assert_eq!(t.links.len(), 3);
        assert_eq!(t.degree("a"), 2);
    }

    #[test]
    fn self_loop_rejected() {
        let doc = r#"{"name":"x","routers":["a","b"],"links":[["a",0,"a",1],["a",2,"b",0]]}"#;
        match native(doc) {
            Err(TopoError::SelfLoop(r)) => assert_eq!(r, "a"),
            other => panic!("expected self-loop error, got {other:?}"),
        }
    }

    #[test]
    fn disconnected_rejected() {
        let doc = r#"{"name":"x","routers":["a","b","c","d"],
            "links":[["a",0,"b",0],["c",0,"d",0]]}"#;
        assert!(matches!(native(doc), Err(TopoError::Disconnected(..))));
    }

    #[test]
    fn duplicate_link_rejected() {
        let doc = r#"{"name":"x","routers":["a","b"],
            "links":[["a",0,"b",0],["b",0,"a",0]]}"#;
        assert!(matches!(native(doc), Err(TopoError::DuplicateLink(..))));
    }

    #[test]
    fn interface_reuse_rejected() {
        let doc = r#"{"name":"x","routers":["a","b","c"],
            "links":[["a",0,"b",0],["a",0,"c",0]]}"#;
        assert!(matches!(native(doc), Err(TopoError::InterfaceReuse(..))));
    }

    const GML: &str = r#"
        graph [
          label "Tiny Net"
          node [ id 0 label "Zurich" ]
          node [ id 1 label "Basel Alpha" ]
          node [ id 2 label "Basel Alpha" ]
          edge [ source 0 target 1 ]
          edge [ source 1 target 2 ]
          edge [ source 2 target 0 ]
        ]
    "#;

    #[test]
    fn gml_loads_with_sanitized_deduped_names() {
        let t = load_topology(GML).unwrap();
        assert_eq!(t.name, "tiny-net");
        let names: Vec<&String> = t.routers.iter().collect();
        assert_eq!(names, ["basel-alpha", "basel-alpha-2", "zurich"]);
        assert_eq!(t.links.len(), 3);
    }

    #[test]
    fn gml_parallel_edges_collapse() {
        let doc = r#"graph [
            node [ id 0 label "a" ]
            node [ id 1 label "b" ]
            node [ id 2 label "c" ]
            edge [ source 0 target 1 ]
            edge [ source 1 target 0 ]
            edge [ source 1 target 2 ]
            edge [ source 0 target 2 ]
        ]"#;
        let t = load_topology(doc).unwrap();
        assert_eq!(t.links.len(), 3);
    }

    #[test]
    fn gml_self_loop_rejected() {
        let doc = r#"graph [
            node [ id 0 label "a" ]
            node [ id 1 label "b" ]
            edge [ source 0 target 0 ]
            edge [ source 0 target 1 ]
        ]"#;
        assert!(matches!(load_topology(doc), Err(TopoError::SelfLoop(_))));
    }

    #[test]
    fn loading_is_deterministic() {
        let a = load_topology(GML).unwrap();
        let b = load_topology(GML).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiers_partition_by_node_count() {
        let mk = |n: usize| {
            let routers: BTreeSet<String> = (0..n).map(|i| format!("r{i:03}")).collect();
            let names: Vec<String> = routers.iter().cloned().collect();
            let links = (1..n)
                .map(|i| Link::new((names[i - 1].clone(), 1), (names[i].clone(), 0)))
                .collect();
            Topology {
                name: format!("path{n}"),
                routers,
                links,
            }
        };
        assert_eq!(classify_tier(&mk(49)), Tier::Small);
        assert_eq!(classify_tier(&mk(50)), Tier::Medium);
        assert_eq!(classify_tier(&mk(100)), Tier::Medium);
        assert_eq!(classify_tier(&mk(101)), Tier::Large);
        assert_eq!(classify_tier(&mk(754)), Tier::Large);
    }
}
