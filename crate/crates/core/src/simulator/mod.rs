//! Forwarding-behaviour computation from device models.
//!
//! The pipeline follows fixed steps: connected routes, per-domain IGP SPF
//! (OSPF and IS-IS), static routes, BGP session establishment and route
//! exchange to a fixpoint, BGP-to-OSPF redistribution, longest-prefix-match
//! FIB construction with ECMP, and interface-ACL effects.
//!
//! Everything is deterministic: synchronous BGP sweeps make the fixpoint
//! independent of iteration order, and all ties break on sorted names.

mod bgp;
mod igp;

pub use bgp::SweepOrder;

use crate::configtext::{DeviceModel, StaticNextHop};
use crate::net::Prefix;
use crate::topo::Topology;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("BGP propagation diverged: no fixpoint within {0} iterations")]
    Divergence(usize),
}

/// Forwarding action of one router for one destination prefix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "action", content = "next-hops")]
pub enum Action {
    ForwardTo(BTreeSet<String>),
    Drop,
    AcceptLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AclDir {
    In,
    Out,
}

/// The network-wide forwarding behaviour table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardingTable {
    /// Destination prefixes the table is computed over: all advertised
    /// networks plus all loopbacks.
    pub universe: BTreeSet<Prefix>,
    pub entries: BTreeMap<(String, Prefix), Action>,
    /// Cached ACL verdicts for bound interfaces: (router, ifid, direction,
    /// prefix) -> permitted.
    pub acl_verdicts: BTreeMap<(String, u32, AclDir, Prefix), bool>,
}

impl ForwardingTable {
    pub fn action(&self, router: &str, prefix: &Prefix) -> &Action {
        self.entries
            .get(&(router.to_string(), *prefix))
            .unwrap_or(&Action::Drop)
    }

    /// Prefixes whose entries differ between two tables over the union of
    /// their universes.
    pub fn changed_prefixes(&self, other: &ForwardingTable) -> BTreeSet<Prefix> {
        let mut out = BTreeSet::new();
        let routers: BTreeSet<&String> = self
            .entries
            .keys()
            .map(|(r, _)| r)
            .chain(other.entries.keys().map(|(r, _)| r))
            .collect();
        for p in self.universe.union(&other.universe) {
            for r in &routers {
                if self.action(r, p) != other.action(r, p) {
                    out.insert(*p);
                    break;
                }
            }
        }
        out
    }

    /// Flat row view, sorted, for serialization and table comparisons.
    /// ECMP entries expand to one row per next hop.
    pub fn rows(&self) -> Vec<FibRow> {
        let mut out = Vec::new();
        for ((router, prefix), action) in &self.entries {
            match action {
                Action::ForwardTo(hops) => {
                    for h in hops {
                        out.push(FibRow {
                            router: router.clone(),
                            prefix: *prefix,
                            action: "forward".into(),
                            next_hop: Some(h.clone()),
                        });
                    }
                }
                Action::Drop => out.push(FibRow {
                    router: router.clone(),
                    prefix: *prefix,
                    action: "drop".into(),
                    next_hop: None,
                }),
                Action::AcceptLocal => out.push(FibRow {
                    router: router.clone(),
                    prefix: *prefix,
                    action: "accept".into(),
                    next_hop: None,
                }),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FibRow {
    pub router: String,
    pub prefix: Prefix,
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next_hop: Option<String>,
}

/// Administrative distance per protocol; lower wins at equal prefix length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Proto {
    Connected,
    Static,
    Ebgp,
    Ospf,
    Isis,
    OspfExternal,
    Ibgp,
}

impl Proto {
    pub fn admin_distance(&self) -> u32 {
        match self {
            Proto::Connected => 0,
            Proto::Static => 1,
            Proto::Ebgp => 20,
            Proto::Ospf => 110,
            Proto::Isis => 115,
            Proto::OspfExternal => 110,
            Proto::Ibgp => 200,
        }
    }
}

/// One candidate route in a router's RIB.
#[derive(Debug, Clone)]
pub struct RouteEntry {
    pub prefix: Prefix,
    pub proto: Proto,
    pub igp_metric: u32,
    /// Resolution target: either direct next-hop routers or an address to
    /// resolve recursively (BGP), or a local drop.
    pub via: Via,
}

#[derive(Debug, Clone)]
pub enum Via {
    /// Direct next-hop routers (IGP and connected routes).
    Routers(BTreeSet<String>),
    /// Recursive next-hop address (BGP, static with address).
    Address(Ipv4Addr),
    /// Null interface.
    Blackhole,
    /// The prefix is local to this router.
    Local,
}

/// Everything derived once from the models before FIB construction.
pub(crate) struct SimContext<'a> {
    pub models: &'a BTreeMap<String, DeviceModel>,
    pub topo: &'a Topology,
    /// interface address -> owning routers (normally exactly one).
    pub addr_owners: BTreeMap<Ipv4Addr, BTreeSet<String>>,
    /// Per-router unicast RIB without BGP: connected, static, IGP.
    pub igp_rib: BTreeMap<String, Vec<RouteEntry>>,
    /// Adjacent-router lookup: (router, neighbor) -> (local ifid, remote ifid).
    pub link_ifids: BTreeMap<(String, String), (u32, u32)>,
}

impl<'a> SimContext<'a> {
    fn new(models: &'a BTreeMap<String, DeviceModel>, topo: &'a Topology) -> Self {
        let mut addr_owners: BTreeMap<Ipv4Addr, BTreeSet<String>> = BTreeMap::new();
        for (r, m) in models {
            for iface in &m.interfaces {
                addr_owners
                    .entry(iface.address)
                    .or_default()
                    .insert(r.clone());
            }
        }
        let mut link_ifids = BTreeMap::new();
        for link in &topo.links {
            link_ifids.insert((link.a.0.clone(), link.b.0.clone()), (link.a.1, link.b.1));
            link_ifids.insert((link.b.0.clone(), link.a.0.clone()), (link.b.1, link.a.1));
        }

        let mut ctx = SimContext {
            models,
            topo,
            addr_owners,
            igp_rib: BTreeMap::new(),
            link_ifids,
        };
        ctx.build_igp_rib();
        ctx
    }

    fn build_igp_rib(&mut self) {
        let mut rib: BTreeMap<String, Vec<RouteEntry>> = BTreeMap::new();
        // Connected and static routes.
        for (r, m) in self.models {
            let entries = rib.entry(r.clone()).or_default();
            for iface in &m.interfaces {
                entries.push(RouteEntry {
                    prefix: iface.subnet(),
                    proto: Proto::Connected,
                    igp_metric: 0,
                    via: Via::Local,
                });
            }
            for st in &m.statics {
                entries.push(RouteEntry {
                    prefix: st.prefix,
                    proto: Proto::Static,
                    igp_metric: 0,
                    via: match st.next_hop {
                        StaticNextHop::Null0 => Via::Blackhole,
                        StaticNextHop::Address(a) => Via::Address(a),
                    },
                });
            }
        }
        // IGP routes.
        for (r, routes) in igp::ospf_routes(self.models, self.topo) {
            rib.entry(r).or_default().extend(routes);
        }
        for (r, routes) in igp::isis_routes(self.models, self.topo) {
            rib.entry(r).or_default().extend(routes);
        }
        self.igp_rib = rib;
    }

    /// Longest-prefix-match over the non-BGP RIB.
    pub fn lpm_igp(&self, router: &str, dst: Ipv4Addr) -> Option<&RouteEntry> {
        let entries = self.igp_rib.get(router)?;
        entries
            .iter()
            .filter(|e| e.prefix.contains(dst))
            .max_by_key(|e| {
                (
                    e.prefix.len(),
                    std::cmp::Reverse(e.proto.admin_distance()),
                    std::cmp::Reverse(e.igp_metric),
                )
            })
    }

    /// Resolves an address to (next-hop routers, igp metric): `None` when
    /// unresolvable or blackholed.
    pub fn resolve(&self, router: &str, dst: Ipv4Addr) -> Option<(BTreeSet<String>, u32)> {
        // Local ownership resolves trivially.
        if let Some(owners) = self.addr_owners.get(&dst) {
            if owners.contains(router) {
                return Some((BTreeSet::new(), 0));
            }
        }
        let entry = self.lpm_igp(router, dst)?;
        match &entry.via {
            Via::Routers(hops) => Some((hops.clone(), entry.igp_metric)),
            Via::Local => {
                // Connected subnet: the neighbor owning dst on an incident
                // link is the next hop.
                let owners = self.addr_owners.get(&dst)?;
                if owners.len() != 1 {
                    return None;
                }
                let owner = owners.iter().next().unwrap();
                if self.link_ifids.contains_key(&(router.to_string(), owner.clone())) {
                    Some(([owner.clone()].into_iter().collect(), 0))
                } else {
                    None
                }
            }
            Via::Address(a) => {
                if *a == dst {
                    return None;
                }
                self.resolve(router, *a)
            }
            Via::Blackhole => None,
        }
    }
}

/// Liveness test for BGP transport: can `from` deliver packets to `dst`
/// using connected, static, and IGP routes alone? Every ECMP branch must
/// terminate at the address owner.
pub fn reachable_transport(
    models: &BTreeMap<String, DeviceModel>,
    topo: &Topology,
    from: &str,
    dst: Ipv4Addr,
) -> bool {
    let ctx = SimContext::new(models, topo);
    transport_ok(&ctx, from, dst, &mut BTreeSet::new())
}

pub(crate) fn transport_ok(
    ctx: &SimContext,
    at: &str,
    dst: Ipv4Addr,
    visiting: &mut BTreeSet<String>,
) -> bool {
    if let Some(owners) = ctx.addr_owners.get(&dst) {
        if owners.len() == 1 && owners.contains(at) {
            return true;
        }
        if owners.len() != 1 {
            return false;
        }
    } else {
        return false;
    }
    if !visiting.insert(at.to_string()) {
        return false; // loop
    }
    let ok = match ctx.resolve(at, dst) {
        None => false,
        Some((hops, _)) if hops.is_empty() => false,
        Some((hops, _)) => hops.iter().all(|h| transport_ok(ctx, h, dst, visiting)),
    };
    visiting.remove(at);
    ok
}

/// Computes the forwarding behaviour table with the default sweep order and
/// a universe derived from the models.
pub fn compute_dataplane(
    models: &BTreeMap<String, DeviceModel>,
    topo: &Topology,
) -> Result<ForwardingTable, SimError> {
    compute_dataplane_in(models, topo, None, SweepOrder::Forward)
}

/// Universe of destination prefixes: all BGP network statements plus all
/// Loopback0 host prefixes.
pub fn derive_universe(models: &BTreeMap<String, DeviceModel>) -> BTreeSet<Prefix> {
    let mut universe = BTreeSet::new();
    for m in models.values() {
        if let Some(bgp) = &m.bgp {
            universe.extend(bgp.networks.iter().copied());
        }
        if let Some(lo) = m.interface("Loopback0") {
            universe.insert(lo.subnet());
        }
    }
    universe
}

/// Full pipeline with an optional fixed universe (used to compare broken and
/// fixed states against the golden prefix set) and an explicit sweep order
/// (used to check fixpoint order-independence).
pub fn compute_dataplane_in(
    models: &BTreeMap<String, DeviceModel>,
    topo: &Topology,
    universe: Option<&BTreeSet<Prefix>>,
    order: SweepOrder,
) -> Result<ForwardingTable, SimError> {
    let ctx = SimContext::new(models, topo);
    let universe = universe.cloned().unwrap_or_else(|| derive_universe(models));

    // BGP to fixpoint, then redistribution externals.
    let bgp_state = bgp::run_bgp(&ctx, &universe, order)?;

    let mut entries = BTreeMap::new();
    let mut acl_verdicts = BTreeMap::new();

    for (router, model) in models {
        for prefix in &universe {
            let action = fib_action(&ctx, &bgp_state, router, model, prefix);
            let action = apply_acls(&ctx, router, prefix, action, &mut acl_verdicts);
            entries.insert((router.clone(), *prefix), action);
        }
    }

    Ok(ForwardingTable {
        universe,
        entries,
        acl_verdicts,
    })
}

/// Does `router` locally own `prefix`: an interface subnet equals it, or a
/// Null0 static backs a network statement for it (an originated aggregate
/// counts as delivered at its origination point).
fn owns_prefix(model: &DeviceModel, prefix: &Prefix) -> bool {
    if model.interfaces.iter().any(|i| i.subnet() == *prefix) {
        return true;
    }
    let has_null_static = model
        .statics
        .iter()
        .any(|s| s.prefix == *prefix && s.next_hop == StaticNextHop::Null0);
    let advertised = model
        .bgp
        .as_ref()
        .map_or(false, |b| b.networks.contains(prefix));
    has_null_static && advertised
}

fn fib_action(
    ctx: &SimContext,
    bgp_state: &bgp::BgpState,
    router: &str,
    model: &DeviceModel,
    prefix: &Prefix,
) -> Action {
    if owns_prefix(model, prefix) {
        return Action::AcceptLocal;
    }
    let dst = prefix.first_address();

    // Candidates: non-BGP RIB, BGP best path, OSPF externals. `external`
    // breaks AD ties in favor of intra-domain routes.
    struct Candidate {
        len: u8,
        ad: u32,
        external: bool,
        hops: BTreeSet<String>,
        drop: bool,
    }
    let mut candidates: Vec<Candidate> = Vec::new();

    if let Some(entry) = ctx.lpm_igp(router, dst) {
        let (hops, drop) = match &entry.via {
            Via::Routers(h) => (h.clone(), false),
            Via::Local => {
                // Connected but not owned: deliver toward the owner on the
                // link; with no unique owner the traffic dies here.
                match ctx.addr_owners.get(&dst) {
                    Some(owners) if owners.len() == 1 && !owners.contains(router) => {
                        ((*owners).clone(), false)
                    }
                    _ => (BTreeSet::new(), true),
                }
            }
            Via::Address(a) => match ctx.resolve(router, *a) {
                Some((h, _)) if !h.is_empty() => (h, false),
                _ => (BTreeSet::new(), true),
            },
            Via::Blackhole => (BTreeSet::new(), true),
        };
        candidates.push(Candidate {
            len: entry.prefix.len(),
            ad: entry.proto.admin_distance(),
            external: false,
            hops,
            drop,
        });
    }

    if let Some((path, hops)) = bgp_state.best_resolved(ctx, router, prefix) {
        if path.prefix.contains(dst) {
            candidates.push(Candidate {
                len: path.prefix.len(),
                ad: if path.is_ebgp() {
                    Proto::Ebgp.admin_distance()
                } else {
                    Proto::Ibgp.admin_distance()
                },
                external: false,
                hops,
                drop: false,
            });
        }
    }

    if let Some(hops) = bgp_state.external_route(ctx, router, prefix) {
        candidates.push(Candidate {
            len: prefix.len(),
            ad: Proto::OspfExternal.admin_distance(),
            external: true,
            hops,
            drop: false,
        });
    }

    let Some(best) = candidates
        .into_iter()
        .max_by_key(|c| (c.len, std::cmp::Reverse(c.ad), std::cmp::Reverse(c.external)))
    else {
        return Action::Drop;
    };
    if best.drop || best.hops.is_empty() {
        Action::Drop
    } else {
        Action::ForwardTo(best.hops)
    }
}

/// Prunes next hops whose egress or ingress interface ACL denies the
/// canonical flow (src = this hop's loopback, dst = first address of the
/// prefix). A fully pruned forward action becomes a drop.
fn apply_acls(
    ctx: &SimContext,
    router: &str,
    prefix: &Prefix,
    action: Action,
    verdicts: &mut BTreeMap<(String, u32, AclDir, Prefix), bool>,
) -> Action {
    let Action::ForwardTo(hops) = action else {
        return action;
    };
    let src = ctx
        .models
        .get(router)
        .and_then(|m| m.interface("Loopback0"))
        .map(|i| i.address)
        .unwrap_or(Ipv4Addr::UNSPECIFIED);
    let dst = prefix.first_address();

    let mut kept = BTreeSet::new();
    for hop in hops {
        let Some(&(local_if, remote_if)) =
            ctx.link_ifids.get(&(router.to_string(), hop.clone()))
        else {
            // Hop without a direct link (stale route); keep, the next router
            // decides.
            kept.insert(hop);
            continue;
        };
        let mut permitted = true;
        // Egress out-ACL on this router.
        if let Some(model) = ctx.models.get(router) {
            if let Some(iface) = model.interface(&format!("Ethernet{local_if}")) {
                if let Some(name) = &iface.acl_out {
                    let ok = model.acls.get(name).map_or(false, |a| a.permits(src, dst));
                    verdicts.insert((router.to_string(), local_if, AclDir::Out, *prefix), ok);
                    permitted &= ok;
                }
            }
        }
        // Ingress in-ACL on the next hop.
        if let Some(model) = ctx.models.get(&hop) {
            if let Some(iface) = model.interface(&format!("Ethernet{remote_if}")) {
                if let Some(name) = &iface.acl_in {
                    let ok = model.acls.get(name).map_or(false, |a| a.permits(src, dst));
                    verdicts.insert((hop.clone(), remote_if, AclDir::In, *prefix), ok);
                    permitted &= ok;
                }
            }
        }
        if permitted {
            kept.insert(hop);
        }
    }
    if kept.is_empty() {
        Action::Drop
    } else {
        Action::ForwardTo(kept)
    }
}

#[cfg(test)]
mod tests;
