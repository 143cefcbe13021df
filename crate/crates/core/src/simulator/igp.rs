//! IGP route computation: OSPF and IS-IS shortest paths over formed
//! adjacencies.
//!
//! Adjacency formation is where configuration faults bite: OSPF requires the
//! same subnet, equal mask, matching areas on both interface ends, and no
//! router-id or loopback collision; IS-IS level-1 additionally requires
//! matching areas while level-2 ignores them. Routers with duplicate ids
//! form no adjacencies at all (their LSAs conflict), which fragments the
//! domain deterministically.

use super::{Proto, RouteEntry, Via};
use crate::configtext::{DeviceModel, IsisLevel};
use crate::net::Prefix;
use crate::topo::Topology;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::net::Ipv4Addr;

const ISIS_METRIC: u32 = 10;

/// Directed weighted adjacency: router -> (neighbor -> cost).
type AdjGraph = BTreeMap<String, BTreeMap<String, u32>>;

/// Dijkstra from `src`; returns distance and ECMP first hops per router.
fn dijkstra(graph: &AdjGraph, src: &str) -> BTreeMap<String, (u32, BTreeSet<String>)> {
    let mut out: BTreeMap<String, (u32, BTreeSet<String>)> = BTreeMap::new();
    out.insert(src.to_string(), (0, BTreeSet::new()));
    let mut heap: BinaryHeap<(std::cmp::Reverse<u32>, String)> = BinaryHeap::new();
    heap.push((std::cmp::Reverse(0), src.to_string()));
    let mut done: BTreeSet<String> = BTreeSet::new();
    while let Some((std::cmp::Reverse(d), u)) = heap.pop() {
        if !done.insert(u.clone()) {
            continue;
        }
        let Some(edges) = graph.get(&u) else { continue };
        for (v, cost) in edges {
            let nd = d + cost;
            // First hop inherited from u, or v itself when u is the source.
            let hops_via_u: BTreeSet<String> = if u == src {
                [v.clone()].into_iter().collect()
            } else {
                out[&u].1.clone()
            };
            match out.get_mut(v) {
                Some((best, hops)) => {
                    if nd < *best {
                        *best = nd;
                        *hops = hops_via_u;
                        heap.push((std::cmp::Reverse(nd), v.clone()));
                    } else if nd == *best {
                        hops.extend(hops_via_u);
                    }
                }
                None => {
                    out.insert(v.clone(), (nd, hops_via_u));
                    heap.push((std::cmp::Reverse(nd), v.clone()));
                }
            }
        }
    }
    out
}

/// Routers whose identity collides with another router's: same router id or
/// same Loopback0 address. Colliding routers form no adjacencies.
fn collision_suppressed<'a, I: Iterator<Item = (&'a String, Ipv4Addr)>>(
    ids: I,
    loopbacks: &BTreeMap<&'a String, Ipv4Addr>,
) -> BTreeSet<String> {
    let mut by_id: BTreeMap<Ipv4Addr, Vec<&String>> = BTreeMap::new();
    for (r, id) in ids {
        by_id.entry(id).or_default().push(r);
    }
    let mut by_lo: BTreeMap<Ipv4Addr, Vec<&String>> = BTreeMap::new();
    for (r, lo) in loopbacks {
        by_lo.entry(*lo).or_default().push(r);
    }
    let mut out = BTreeSet::new();
    for group in by_id.values().chain(by_lo.values()) {
        if group.len() > 1 {
            out.extend(group.iter().map(|r| (*r).to_string()));
        }
    }
    out
}

/// OSPF interface membership: the first matching network statement decides
/// the area.
fn ospf_area(model: &DeviceModel, addr: Ipv4Addr) -> Option<u32> {
    let ospf = model.ospf.as_ref()?;
    ospf.networks.iter().find(|n| n.matches(addr)).map(|n| n.area)
}

pub fn ospf_routes(
    models: &BTreeMap<String, DeviceModel>,
    topo: &Topology,
) -> BTreeMap<String, Vec<RouteEntry>> {
    let ospf_routers: Vec<&String> = models
        .keys()
        .filter(|r| models[*r].ospf.is_some())
        .collect();
    let loopbacks: BTreeMap<&String, Ipv4Addr> = ospf_routers
        .iter()
        .filter_map(|r| models[*r].interface("Loopback0").map(|i| (*r, i.address)))
        .collect();
    let suppressed = collision_suppressed(
        ospf_routers
            .iter()
            .map(|r| (*r, models[*r].ospf.as_ref().unwrap().router_id)),
        &loopbacks,
    );

    // Adjacencies.
    let mut graph: AdjGraph = BTreeMap::new();
    for link in &topo.links {
        let (ra, ia) = (&link.a.0, link.a.1);
        let (rb, ib) = (&link.b.0, link.b.1);
        let (Some(ma), Some(mb)) = (models.get(ra), models.get(rb)) else {
            continue;
        };
        let (Some(fa), Some(fb)) = (
            ma.interface(&format!("Ethernet{ia}")),
            mb.interface(&format!("Ethernet{ib}")),
        ) else {
            continue;
        };
        let (Some(area_a), Some(area_b)) = (ospf_area(ma, fa.address), ospf_area(mb, fb.address))
        else {
            continue;
        };
        let passive_a = ma
            .ospf
            .as_ref()
            .map_or(false, |o| o.passive.contains(&fa.name));
        let passive_b = mb
            .ospf
            .as_ref()
            .map_or(false, |o| o.passive.contains(&fb.name));
        if area_a != area_b
            || fa.subnet() != fb.subnet()
            || passive_a
            || passive_b
            || suppressed.contains(ra)
            || suppressed.contains(rb)
        {
            continue;
        }
        let cost_a = fa.ospf_cost.unwrap_or(1);
        let cost_b = fb.ospf_cost.unwrap_or(1);
        graph.entry(ra.clone()).or_default().insert(rb.clone(), cost_a);
        graph.entry(rb.clone()).or_default().insert(ra.clone(), cost_b);
    }

    // Advertised destinations: every OSPF-enabled interface subnet.
    let mut destinations: BTreeMap<&String, Vec<Prefix>> = BTreeMap::new();
    for r in &ospf_routers {
        let m = &models[*r];
        let mut subnets = Vec::new();
        for iface in &m.interfaces {
            if ospf_area(m, iface.address).is_some() {
                subnets.push(iface.subnet());
            }
        }
        destinations.insert(*r, subnets);
    }

    let mut out: BTreeMap<String, Vec<RouteEntry>> = BTreeMap::new();
    for r in &ospf_routers {
        let spf = dijkstra(&graph, r);
        // prefix -> (metric, hops), merged across owners.
        let mut routes: BTreeMap<Prefix, (u32, BTreeSet<String>)> = BTreeMap::new();
        for (owner, subnets) in &destinations {
            if *owner == *r {
                continue;
            }
            let Some((dist, hops)) = spf.get(*owner) else {
                continue;
            };
            for p in subnets {
                match routes.get_mut(p) {
                    Some((best, best_hops)) => {
                        if dist < best {
                            *best = *dist;
                            *best_hops = hops.clone();
                        } else if dist == best {
                            best_hops.extend(hops.iter().cloned());
                        }
                    }
                    None => {
                        routes.insert(*p, (*dist, hops.clone()));
                    }
                }
            }
        }
        let entries: Vec<RouteEntry> = routes
            .into_iter()
            .map(|(prefix, (metric, hops))| RouteEntry {
                prefix,
                proto: Proto::Ospf,
                igp_metric: metric,
                via: Via::Routers(hops),
            })
            .collect();
        out.entry((*r).clone()).or_default().extend(entries);
    }
    out
}

fn isis_system_id(net: &str) -> Option<String> {
    let parts: Vec<&str> = net.split('.').collect();
    if parts.len() < 4 {
        return None;
    }
    Some(parts[parts.len() - 4..parts.len() - 1].join("."))
}

struct IsisNode<'a> {
    model: &'a DeviceModel,
    area: String,
    level: IsisLevel,
}

impl IsisNode<'_> {
    fn l1(&self) -> bool {
        matches!(self.level, IsisLevel::Level1 | IsisLevel::Level1And2)
    }
    fn l2(&self) -> bool {
        matches!(self.level, IsisLevel::Level2 | IsisLevel::Level1And2)
    }
}

pub fn isis_routes(
    models: &BTreeMap<String, DeviceModel>,
    topo: &Topology,
) -> BTreeMap<String, Vec<RouteEntry>> {
    let mut nodes: BTreeMap<&String, IsisNode> = BTreeMap::new();
    for (r, m) in models {
        if let Some(isis) = &m.isis {
            if !isis.net.is_empty() {
                nodes.insert(
                    r,
                    IsisNode {
                        model: m,
                        area: isis.area(),
                        level: isis.level,
                    },
                );
            }
        }
    }
    if nodes.is_empty() {
        return BTreeMap::new();
    }

    let loopbacks: BTreeMap<&String, Ipv4Addr> = nodes
        .iter()
        .filter_map(|(r, n)| n.model.interface("Loopback0").map(|i| (*r, i.address)))
        .collect();
    // System-id collisions map onto the shared suppression rule by hashing
    // the sysid string into a synthetic address key.
    let mut sys_ids: BTreeMap<Ipv4Addr, Vec<&String>> = BTreeMap::new();
    for (r, n) in &nodes {
        if let Some(sid) = n.model.isis.as_ref().and_then(|i| isis_system_id(&i.net)) {
            let h = crate::util::hash_str(&sid) as u32;
            sys_ids.entry(Ipv4Addr::from(h)).or_default().push(r);
        }
    }
    let mut suppressed = collision_suppressed(std::iter::empty(), &loopbacks);
    for group in sys_ids.values() {
        if group.len() > 1 {
            suppressed.extend(group.iter().map(|r| (*r).to_string()));
        }
    }

    // Level-1 and level-2 adjacency graphs.
    let mut l1: AdjGraph = BTreeMap::new();
    let mut l2: AdjGraph = BTreeMap::new();
    for link in &topo.links {
        let (ra, ia) = (&link.a.0, link.a.1);
        let (rb, ib) = (&link.b.0, link.b.1);
        let (Some(na), Some(nb)) = (nodes.get(ra), nodes.get(rb)) else {
            continue;
        };
        let (Some(fa), Some(fb)) = (
            na.model.interface(&format!("Ethernet{ia}")),
            nb.model.interface(&format!("Ethernet{ib}")),
        ) else {
            continue;
        };
        let enabled = |n: &IsisNode, name: &str, en: bool| {
            en && !n.model.isis.as_ref().unwrap().passive.contains(name)
        };
        if !enabled(na, &fa.name, fa.isis_enabled)
            || !enabled(nb, &fb.name, fb.isis_enabled)
            || fa.subnet() != fb.subnet()
            || suppressed.contains(ra)
            || suppressed.contains(rb)
        {
            continue;
        }
        if na.l1() && nb.l1() && na.area == nb.area {
            l1.entry(ra.clone()).or_default().insert(rb.clone(), ISIS_METRIC);
            l1.entry(rb.clone()).or_default().insert(ra.clone(), ISIS_METRIC);
        }
        if na.l2() && nb.l2() {
            l2.entry(ra.clone()).or_default().insert(rb.clone(), ISIS_METRIC);
            l2.entry(rb.clone()).or_default().insert(ra.clone(), ISIS_METRIC);
        }
    }

    // IS-IS-enabled subnets per router (including passive interfaces).
    let mut subnets_of: BTreeMap<&String, Vec<Prefix>> = BTreeMap::new();
    for (r, n) in &nodes {
        let subnets = n
            .model
            .interfaces
            .iter()
            .filter(|i| i.isis_enabled)
            .map(|i| i.subnet())
            .collect();
        subnets_of.insert(r, subnets);
    }

    let boundaries: Vec<&String> = nodes
        .iter()
        .filter(|(_, n)| n.level == IsisLevel::Level1And2)
        .map(|(r, _)| *r)
        .collect();

    let mut out: BTreeMap<String, Vec<RouteEntry>> = BTreeMap::new();
    // Precompute L1 SPF per router (used both directly and for boundary
    // attachment metrics).
    let l1_spf: BTreeMap<&String, BTreeMap<String, (u32, BTreeSet<String>)>> = nodes
        .keys()
        .map(|r| (*r, dijkstra(&l1, r)))
        .collect();

    for (r, node) in &nodes {
        let mut routes: BTreeMap<Prefix, (u32, BTreeSet<String>)> = BTreeMap::new();
        let spf1 = &l1_spf[r];

        // Level-1 routes within the area.
        for (owner, subnets) in &subnets_of {
            if *owner == *r {
                continue;
            }
            if let Some((d, hops)) = spf1.get(*owner) {
                for p in subnets {
                    merge_route(&mut routes, *p, *d, hops);
                }
            }
        }

        if node.l2() {
            // Level-2 routes: direct to L2-capable owners, or through the
            // best boundary of the owner's area.
            let spf2 = dijkstra(&l2, r);
            for (owner, subnets) in &subnets_of {
                if *owner == *r {
                    continue;
                }
                let owner_node = &nodes[*owner];
                let mut best: Option<(u32, BTreeSet<String>)> = None;
                if owner_node.l2() {
                    if let Some((d, hops)) = spf2.get(*owner) {
                        best = Some((*d, hops.clone()));
                    }
                }
                if !owner_node.l2() {
                    for b in &boundaries {
                        if nodes[*b].area != owner_node.area {
                            continue;
                        }
                        let Some((d_attach, _)) = l1_spf[b].get(*owner) else {
                            continue;
                        };
                        let (d2, hops2) = if *b == *r {
                            (0, BTreeSet::new())
                        } else {
                            match spf2.get(*b) {
                                Some(v) => v.clone(),
                                None => continue,
                            }
                        };
                        let total = d2 + d_attach;
                        match &mut best {
                            Some((bd, bh)) => {
                                if total < *bd {
                                    *bd = total;
                                    *bh = hops2;
                                } else if total == *bd {
                                    bh.extend(hops2);
                                }
                            }
                            None => best = Some((total, hops2)),
                        }
                    }
                }
                if let Some((d, hops)) = best {
                    if hops.is_empty() {
                        // r itself is the boundary; L1 carries the rest.
                        continue;
                    }
                    for p in subnets {
                        // L1 routes take precedence over L2 for a prefix.
                        if !routes.contains_key(p) {
                            merge_route(&mut routes, *p, d, &hops);
                        }
                    }
                }
            }
        } else {
            // Level-1-only: default toward the nearest L1-2 router in the
            // area (anycast over the L1 graph).
            let mut best: Option<(u32, BTreeSet<String>)> = None;
            for b in &boundaries {
                if nodes[*b].area != node.area || *b == *r {
                    continue;
                }
                if let Some((d, hops)) = spf1.get(*b) {
                    match &mut best {
                        Some((bd, bh)) => {
                            if d < bd {
                                *bd = *d;
                                *bh = hops.clone();
                            } else if d == bd {
                                bh.extend(hops.iter().cloned());
                            }
                        }
                        None => best = Some((*d, hops.clone())),
                    }
                }
            }
            if let Some((d, hops)) = best {
                routes
                    .entry(Prefix::from_u32(0, 0))
                    .or_insert((d, hops));
            }
        }

        let entries: Vec<RouteEntry> = routes
            .into_iter()
            .map(|(prefix, (metric, hops))| RouteEntry {
                prefix,
                proto: Proto::Isis,
                igp_metric: metric,
                via: Via::Routers(hops),
            })
            .collect();
        out.entry((*r).clone()).or_default().extend(entries);
    }
    out
}

fn merge_route(
    routes: &mut BTreeMap<Prefix, (u32, BTreeSet<String>)>,
    p: Prefix,
    d: u32,
    hops: &BTreeSet<String>,
) {
    match routes.get_mut(&p) {
        Some((best, best_hops)) => {
            if d < *best {
                *best = d;
                *best_hops = hops.clone();
            } else if d == *best {
                best_hops.extend(hops.iter().cloned());
            }
        }
        None => {
            routes.insert(p, (d, hops.clone()));
        }
    }
}
