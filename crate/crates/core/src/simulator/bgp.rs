//! BGP session establishment and synchronous route propagation.
//!
//! A session is up iff both sides declare each other's true ASN, neither is
//! administratively shut, the peering addresses are uniquely owned and
//! transport-reachable via connected/static/IGP routes, and update-source
//! expectations hold. Propagation runs in synchronous sweeps until a
//! fixpoint, so the result is independent of iteration order; all remaining
//! ties break on sorted router names.
//!
//! Best-path selection: locally originated first, then highest local-pref,
//! shortest AS path, eBGP over iBGP, lowest IGP metric to the next hop,
//! lowest origin router id, and finally the lexicographically smallest
//! advertising peer. Route reflection follows RFC 4456: client routes go to
//! everyone, non-client routes go to clients, and updates carrying the
//! receiver's own cluster id or originator id are dropped.

use super::{transport_ok, SimContext, SimError};
use crate::configtext::{DeviceModel, Neighbor, RouteMap};
use crate::net::Prefix;
use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PathSrc {
    Local,
    Ebgp,
    Ibgp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpPath {
    pub prefix: Prefix,
    pub local_pref: u32,
    pub as_path: Vec<u32>,
    pub origin_id: Ipv4Addr,
    /// Unspecified for locally originated paths.
    pub next_hop: Ipv4Addr,
    pub src: PathSrc,
    pub learned_from: String,
    pub originator_id: Option<Ipv4Addr>,
    pub cluster_list: Vec<Ipv4Addr>,
}

impl BgpPath {
    pub fn is_ebgp(&self) -> bool {
        self.src == PathSrc::Ebgp
    }
}

/// One established session; `a_dials` is the address of `b` that `a`'s
/// neighbor statement names (and conversely).
#[derive(Debug, Clone)]
struct SimSession {
    a: String,
    b: String,
    a_dials: Ipv4Addr,
    b_dials: Ipv4Addr,
    ebgp: bool,
    a_cfg: Neighbor,
    b_cfg: Neighbor,
}

impl SimSession {
    fn cfg_of(&self, r: &str) -> &Neighbor {
        if self.a == r {
            &self.a_cfg
        } else {
            &self.b_cfg
        }
    }

    fn peer_of<'a>(&'a self, r: &str) -> &'a str {
        if self.a == r {
            &self.b
        } else {
            &self.a
        }
    }

    /// The session address of `r` itself: what its peer dials.
    fn own_addr(&self, r: &str) -> Ipv4Addr {
        if self.a == r {
            self.b_dials
        } else {
            self.a_dials
        }
    }
}

pub struct BgpState {
    /// Chosen best path per (router, prefix).
    pub best: BTreeMap<(String, Prefix), BgpPath>,
    /// prefix -> ASBRs redistributing it into OSPF as an external.
    externals: BTreeMap<Prefix, BTreeSet<String>>,
}

impl BgpState {
    /// The best path and its resolved next-hop routers; `None` for local
    /// paths (the owner's FIB handles those as connected/accept).
    pub fn best_resolved(
        &self,
        ctx: &SimContext,
        router: &str,
        prefix: &Prefix,
    ) -> Option<(&BgpPath, BTreeSet<String>)> {
        let path = self.best.get(&(router.to_string(), *prefix))?;
        if path.src == PathSrc::Local {
            return None;
        }
        let (hops, _) = ctx.resolve(router, path.next_hop)?;
        if hops.is_empty() {
            return None;
        }
        Some((path, hops))
    }

    /// OSPF-external route toward the nearest redistributing ASBR, for
    /// routers that run OSPF and have no BGP path of their own for the
    /// prefix.
    pub fn external_route(
        &self,
        ctx: &SimContext,
        router: &str,
        prefix: &Prefix,
    ) -> Option<BTreeSet<String>> {
        let asbrs = self.externals.get(prefix)?;
        let model = ctx.models.get(router)?;
        if model.ospf.is_none() {
            return None;
        }
        if self.best.contains_key(&(router.to_string(), *prefix)) {
            // Speakers with a native BGP path ignore externals for it.
            return None;
        }
        let mut best: Option<(u32, BTreeSet<String>)> = None;
        for asbr in asbrs {
            if asbr == router {
                continue;
            }
            let lo = ctx
                .models
                .get(asbr)
                .and_then(|m| m.interface("Loopback0"))
                .map(|i| i.address)?;
            let Some((hops, metric)) = ctx.resolve(router, lo) else {
                continue;
            };
            if hops.is_empty() {
                continue;
            }
            match &mut best {
                Some((bd, bh)) => {
                    if metric < *bd {
                        *bd = metric;
                        *bh = hops;
                    } else if metric == *bd {
                        bh.extend(hops);
                    }
                }
                None => best = Some((metric, hops)),
            }
        }
        best.map(|(_, hops)| hops)
    }
}

fn loopback0(model: &DeviceModel) -> Option<Ipv4Addr> {
    model.interface("Loopback0").map(|i| i.address)
}

/// Establishes sessions from neighbor statements.
fn build_sessions(ctx: &SimContext) -> Vec<SimSession> {
    let speakers: Vec<(&String, &DeviceModel)> = ctx
        .models
        .iter()
        .filter(|(_, m)| m.bgp.is_some())
        .collect();
    let owner_of = |addr: Ipv4Addr| -> Option<&String> {
        let owners = ctx.addr_owners.get(&addr)?;
        if owners.len() == 1 {
            owners.iter().next()
        } else {
            None
        }
    };

    let mut sessions = Vec::new();
    for (i, (a, ma)) in speakers.iter().enumerate() {
        for (b, mb) in speakers.iter().skip(i + 1) {
            let bgp_a = ma.bgp.as_ref().unwrap();
            let bgp_b = mb.bgp.as_ref().unwrap();
            // Lowest-address entry of a pointing at b, and vice versa.
            let a_entry = bgp_a
                .neighbors
                .iter()
                .find(|n| owner_of(n.address) == Some(b));
            let b_entry = bgp_b
                .neighbors
                .iter()
                .find(|n| owner_of(n.address) == Some(a));
            let (Some(a_entry), Some(b_entry)) = (a_entry, b_entry) else {
                continue;
            };
            // Remote-as must match the peer's true (configured) ASN.
            if a_entry.remote_as != bgp_b.asn || b_entry.remote_as != bgp_a.asn {
                continue;
            }
            if a_entry.shutdown || b_entry.shutdown {
                continue;
            }
            // Update-source consistency: a loopback source must be dialed.
            if a_entry.update_source_loopback && Some(b_entry.address) != loopback0(ma) {
                continue;
            }
            if b_entry.update_source_loopback && Some(a_entry.address) != loopback0(mb) {
                continue;
            }
            // Transport reachability both ways.
            if !transport_ok(ctx, a, a_entry.address, &mut BTreeSet::new())
                || !transport_ok(ctx, b, b_entry.address, &mut BTreeSet::new())
            {
                continue;
            }
            sessions.push(SimSession {
                a: (*a).clone(),
                b: (*b).clone(),
                a_dials: a_entry.address,
                b_dials: b_entry.address,
                ebgp: bgp_a.asn != bgp_b.asn,
                a_cfg: a_entry.clone(),
                b_cfg: b_entry.clone(),
            });
        }
    }
    sessions
}

/// Locally originated paths: a network statement is originated only when a
/// connected, static, or IGP route for exactly that prefix exists.
fn local_paths(ctx: &SimContext, router: &str, model: &DeviceModel) -> Vec<BgpPath> {
    let Some(bgp) = &model.bgp else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for p in &bgp.networks {
        let connected = model.interfaces.iter().any(|i| i.subnet() == *p);
        let static_backed = model.statics.iter().any(|s| s.prefix == *p);
        let igp_backed = ctx
            .igp_rib
            .get(router)
            .map_or(false, |rib| rib.iter().any(|e| e.prefix == *p));
        if connected || static_backed || igp_backed {
            out.push(BgpPath {
                prefix: *p,
                local_pref: 100,
                as_path: Vec::new(),
                origin_id: bgp.router_id,
                next_hop: Ipv4Addr::UNSPECIFIED,
                src: PathSrc::Local,
                learned_from: String::new(),
                originator_id: None,
                cluster_list: Vec::new(),
            });
        }
    }
    out
}

/// First-match route-map evaluation for a prefix. Returns the surviving
/// path adjustments `(local_pref, next_hop)` or `None` when denied.
/// A dangling map name behaves as permit-all.
fn eval_route_map(
    model: &DeviceModel,
    name: Option<&String>,
    prefix: &Prefix,
) -> Option<(Option<u32>, Option<Ipv4Addr>)> {
    let Some(name) = name else {
        return Some((None, None));
    };
    let Some(map) = model.route_maps.get(name) else {
        return Some((None, None)); // dangling reference: permit-all
    };
    for clause in &map.clauses {
        let matched = match &clause.match_prefix_list {
            None => true,
            Some(pl_name) => match model.prefix_lists.get(pl_name) {
                None => true, // dangling prefix-list: match everything
                Some(pl) => pl
                    .entries
                    .iter()
                    .find(|e| e.matches(prefix))
                    .map_or(false, |e| e.permit),
            },
        };
        if matched {
            if clause.permit {
                return Some((clause.set_local_pref, clause.set_next_hop));
            }
            return None;
        }
    }
    None // implicit deny
}

fn cluster_id_of(model: &DeviceModel) -> Ipv4Addr {
    let bgp = model.bgp.as_ref().unwrap();
    bgp.cluster_id.unwrap_or(bgp.router_id)
}

/// Is `r` a route reflector: does any of its neighbor statements mark a
/// client?
fn is_reflector(model: &DeviceModel) -> bool {
    model
        .bgp
        .as_ref()
        .map_or(false, |b| b.neighbors.iter().any(|n| n.rr_client))
}

type AdjRibIn = BTreeMap<(String, String, Prefix), BgpPath>;

pub fn run_bgp(
    ctx: &SimContext,
    universe: &BTreeSet<Prefix>,
    order: SweepOrder,
) -> Result<BgpState, SimError> {
    let sessions = build_sessions(ctx);
    let mut speakers: Vec<&String> = ctx
        .models
        .iter()
        .filter(|(_, m)| m.bgp.is_some())
        .map(|(r, _)| r)
        .collect();
    if order == SweepOrder::Reverse {
        speakers.reverse();
    }

    let locals: BTreeMap<&String, Vec<BgpPath>> = speakers
        .iter()
        .map(|r| (*r, local_paths(ctx, r, &ctx.models[*r])))
        .collect();

    let cap = 2 * ctx.models.len().max(1) * universe.len().max(1);
    let mut rib: AdjRibIn = BTreeMap::new();
    for round in 0..=cap {
        let best = select_best(ctx, &speakers, &locals, &rib);
        let next = propagate(ctx, &sessions, &best);
        if next == rib {
            let mut externals: BTreeMap<Prefix, BTreeSet<String>> = BTreeMap::new();
            for ((router, prefix), _path) in &best {
                let redistributes = ctx.models[router]
                    .ospf
                    .as_ref()
                    .map_or(false, |o| o.redistribute_bgp.is_some());
                if redistributes {
                    externals.entry(*prefix).or_default().insert(router.clone());
                }
            }
            return Ok(BgpState { best, externals });
        }
        rib = next;
        if round == cap {
            return Err(SimError::Divergence(cap));
        }
    }
    Err(SimError::Divergence(cap))
}

fn select_best(
    ctx: &SimContext,
    speakers: &[&String],
    locals: &BTreeMap<&String, Vec<BgpPath>>,
    rib: &AdjRibIn,
) -> BTreeMap<(String, Prefix), BgpPath> {
    let mut best: BTreeMap<(String, Prefix), BgpPath> = BTreeMap::new();
    for r in speakers {
        let mut candidates: BTreeMap<Prefix, Vec<(BgpPath, u32)>> = BTreeMap::new();
        for path in &locals[*r] {
            candidates.entry(path.prefix).or_default().push((path.clone(), 0));
        }
        for ((recv, _from, _prefix), path) in rib.range(
            ((*r).clone(), String::new(), Prefix::from_u32(0, 0))
                ..=((*r).clone(), "\u{10FFFF}".to_string(), Prefix::from_u32(u32::MAX, 32)),
        ) {
            debug_assert_eq!(recv, *r);
            // Valid only when the next hop resolves.
            let Some((hops, metric)) = ctx.resolve(r, path.next_hop) else {
                continue;
            };
            if hops.is_empty() {
                continue;
            }
            candidates.entry(path.prefix).or_default().push((path.clone(), metric));
        }
        for (prefix, paths) in candidates {
            let chosen = paths.into_iter().max_by(|(a, ma), (b, mb)| {
                let key = |p: &BgpPath, m: &u32| {
                    (
                        p.src == PathSrc::Local,
                        p.local_pref,
                        std::cmp::Reverse(p.as_path.len()),
                        p.src == PathSrc::Ebgp,
                        std::cmp::Reverse(*m),
                        std::cmp::Reverse(p.origin_id),
                        std::cmp::Reverse(p.learned_from.clone()),
                    )
                };
                key(a, ma).cmp(&key(b, mb))
            });
            if let Some((path, _)) = chosen {
                best.insert(((*r).clone(), prefix), path);
            }
        }
    }
    best
}

fn propagate(
    ctx: &SimContext,
    sessions: &[SimSession],
    best: &BTreeMap<(String, Prefix), BgpPath>,
) -> AdjRibIn {
    let mut next: AdjRibIn = BTreeMap::new();
    for session in sessions {
        for (sender, receiver) in [(&session.a, &session.b), (&session.b, &session.a)] {
            let sender_model = &ctx.models[sender];
            let receiver_model = &ctx.models[receiver];
            let sender_bgp = sender_model.bgp.as_ref().unwrap();
            let receiver_bgp = receiver_model.bgp.as_ref().unwrap();
            let sender_cfg = session.cfg_of(sender);
            let receiver_cfg = session.cfg_of(receiver);
            let reflector = is_reflector(sender_model);

            for ((r, _prefix), path) in best.range(
                (sender.clone(), Prefix::from_u32(0, 0))
                    ..=(sender.clone(), Prefix::from_u32(u32::MAX, 32)),
            ) {
                debug_assert_eq!(r, sender);
                // Never send a route back to the peer it came from.
                if path.learned_from == *receiver {
                    continue;
                }
                let msg = if session.ebgp {
                    // Receiver-side loop check.
                    if path.as_path.contains(&receiver_bgp.asn) {
                        continue;
                    }
                    // Export policy.
                    let Some((_, set_nh)) =
                        eval_route_map(sender_model, sender_cfg.route_map_out.as_ref(), &path.prefix)
                    else {
                        continue;
                    };
                    let mut as_path = vec![sender_bgp.asn];
                    as_path.extend(&path.as_path);
                    let next_hop = set_nh.unwrap_or_else(|| session.own_addr(sender));
                    let msg = BgpPath {
                        prefix: path.prefix,
                        local_pref: 100,
                        as_path,
                        origin_id: path.origin_id,
                        next_hop,
                        src: PathSrc::Ebgp,
                        learned_from: sender.clone(),
                        originator_id: None,
                        cluster_list: Vec::new(),
                    };
                    // Import policy at the receiver.
                    let Some((set_lp, _)) = eval_route_map(
                        receiver_model,
                        receiver_cfg.route_map_in.as_ref(),
                        &path.prefix,
                    ) else {
                        continue;
                    };
                    BgpPath {
                        local_pref: set_lp.unwrap_or(100),
                        ..msg
                    }
                } else {
                    // iBGP advertisement rules.
                    let reflecting = match path.src {
                        PathSrc::Local | PathSrc::Ebgp => false,
                        PathSrc::Ibgp => {
                            if !reflector {
                                continue;
                            }
                            let learned_from_client = sender_bgp
                                .neighbors
                                .iter()
                                .find(|n| {
                                    ctx.addr_owners
                                        .get(&n.address)
                                        .map_or(false, |o| o.contains(&path.learned_from))
                                })
                                .map_or(false, |n| n.rr_client);
                            if !learned_from_client && !sender_cfg.rr_client {
                                // Non-client routes go to clients only.
                                continue;
                            }
                            true
                        }
                    };
                    let next_hop = if path.src == PathSrc::Local {
                        session.own_addr(sender)
                    } else if sender_cfg.next_hop_self {
                        session.own_addr(sender)
                    } else {
                        path.next_hop
                    };
                    let (originator_id, cluster_list) = if reflecting {
                        let orig = path.originator_id.or_else(|| {
                            ctx.models
                                .get(&path.learned_from)
                                .and_then(|m| m.bgp.as_ref())
                                .map(|b| b.router_id)
                        });
                        let mut cl = vec![cluster_id_of(sender_model)];
                        cl.extend(&path.cluster_list);
                        (orig, cl)
                    } else {
                        (path.originator_id, path.cluster_list.clone())
                    };
                    // Receiver-side RFC 4456 checks.
                    if originator_id == Some(receiver_bgp.router_id) {
                        continue;
                    }
                    if cluster_list.contains(&cluster_id_of(receiver_model)) {
                        continue;
                    }
                    BgpPath {
                        prefix: path.prefix,
                        local_pref: path.local_pref,
                        as_path: path.as_path.clone(),
                        origin_id: path.origin_id,
                        next_hop,
                        src: PathSrc::Ibgp,
                        learned_from: sender.clone(),
                        originator_id,
                        cluster_list,
                    }
                };
                next.insert((receiver.clone(), sender.clone(), msg.prefix), msg);
            }
        }
    }
    next
}
