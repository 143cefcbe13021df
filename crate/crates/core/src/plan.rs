//! Logical network plan: AS partition, IGP areas, BGP sessions, addressing,
//! and policies.
//!
//! The plan is the structured design from which configurations are rendered
//! and into which faults are injected. Construction is iterative and
//! context-aware so that every intra-device constraint (objects defined
//! before referenced) and inter-device constraint (shared link subnets,
//! matching remote-as declarations, connected ASes, connected area-0
//! backbone) holds by construction on the golden state.
//!
//! Addressing pools are fixed: /31 link subnets from 10.0.0.0/8, /32
//! loopbacks from 172.20.0.0/16, /24 data subnets from 100.64.0.0/10, /24
//! static-backed prefixes from 198.18.0.0/15. AS numbers start at 65001.

use crate::configtext::{
    isis_net, Acl, AclRule, BgpConfig, DeviceModel, Interface, IsisConfig, IsisLevel, Neighbor,
    OspfConfig, OspfNetwork, PrefixList, PrefixListEntry, RouteMap, RouteMapClause,
    StaticNextHop, StaticRoute,
};
use crate::features::{Feature, FeatureSet};
use crate::net::Prefix;
use crate::topo::{Endpoint, Link, Topology};
use crate::util::{mix_seed, rng_from};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

pub const LINK_POOL: u32 = 0x0A00_0000; // 10.0.0.0/8
pub const LOOPBACK_POOL: u32 = 0xAC14_0000; // 172.20.0.0/16
pub const DATA_POOL: u32 = 0x6440_0000; // 100.64.0.0/10
pub const STATIC_POOL: u32 = 0xC612_0000; // 198.18.0.0/15
pub const FIRST_ASN: u32 = 65001;
/// Local preference applied by inbound eBGP policy on the golden state.
pub const GOLDEN_LOCAL_PREF: u32 = 150;

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("feature infeasible on topology: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IgpKind {
    Ospf,
    Isis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrCluster {
    pub cluster_id: Ipv4Addr,
    pub reflector: String,
    pub clients: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "design")]
pub enum IbgpDesign {
    None,
    FullMesh,
    RouteReflection { clusters: Vec<RrCluster> },
}

/// One autonomous system: members, IGP choice, area layout, iBGP design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsPlan {
    pub asn: u32,
    pub members: BTreeSet<String>,
    pub igp: IgpKind,
    pub multi_area: bool,
    /// OSPF area intent per intra-AS link interface.
    #[serde(with = "vec_map")]
    pub interface_areas: BTreeMap<Endpoint, u32>,
    /// Home area per router (loopback placement); area 0 for the core.
    pub router_areas: BTreeMap<String, u32>,
    /// IS-IS area string per router.
    pub isis_areas: BTreeMap<String, String>,
    /// Routers that run a BGP process. Equals `members` except when the
    /// redistribution feature carves out IGP-only routers.
    pub speakers: BTreeSet<String>,
    pub ibgp: IbgpDesign,
}

impl AsPlan {
    pub fn reflectors(&self) -> Vec<&str> {
        match &self.ibgp {
            IbgpDesign::RouteReflection { clusters } => {
                clusters.iter().map(|c| c.reflector.as_str()).collect()
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionKind {
    Ebgp,
    Ibgp,
    RrClient,
}

/// One endpoint's view of a BGP session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEnd {
    pub router: String,
    /// Address this end speaks from (what the peer dials).
    pub addr: Ipv4Addr,
    /// The remote-as this end declares for its peer.
    pub declared_peer_as: u32,
    pub source_loopback: bool,
    pub next_hop_self: bool,
    pub shutdown: bool,
    pub route_map_in: Option<String>,
    pub route_map_out: Option<String>,
}

/// A BGP session. For `RrClient` sessions, `a` is the reflector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub kind: SessionKind,
    pub a: SessionEnd,
    pub b: SessionEnd,
}

impl Session {
    pub fn involves(&self, router: &str) -> bool {
        self.a.router == router || self.b.router == router
    }

    /// Canonical identity: sorted router-name pair.
    pub fn key(&self) -> (String, String) {
        let (x, y) = (&self.a.router, &self.b.router);
        if x <= y {
            (x.clone(), y.clone())
        } else {
            (y.clone(), x.clone())
        }
    }

    pub fn end(&self, router: &str) -> Option<&SessionEnd> {
        if self.a.router == router {
            Some(&self.a)
        } else if self.b.router == router {
            Some(&self.b)
        } else {
            None
        }
    }

    pub fn end_mut(&mut self, router: &str) -> Option<&mut SessionEnd> {
        if self.a.router == router {
            Some(&mut self.a)
        } else if self.b.router == router {
            Some(&mut self.b)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterPolicies {
    pub route_maps: BTreeMap<String, RouteMap>,
    pub prefix_lists: BTreeMap<String, PrefixList>,
    pub acls: BTreeMap<String, Acl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AclDirection {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclBinding {
    pub router: String,
    pub ifid: u32,
    pub direction: AclDirection,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStatic {
    pub router: String,
    pub prefix: Prefix,
    pub via: StaticNextHop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Redistribution {
    pub router: String,
    pub from: String,
    pub to: String,
}

/// The complete logical design of one network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalPlan {
    pub topology: Topology,
    pub features: FeatureSet,
    pub seed: u64,
    pub ases: Vec<AsPlan>,
    #[serde(with = "vec_map")]
    pub link_subnets: BTreeMap<Link, Prefix>,
    #[serde(with = "vec_map")]
    pub interface_ips: BTreeMap<Endpoint, (Ipv4Addr, u8)>,
    pub loopbacks: BTreeMap<String, Ipv4Addr>,
    pub router_ids: BTreeMap<String, Ipv4Addr>,
    pub data_subnets: BTreeMap<String, Prefix>,
    /// Configured `router bgp <asn>` per speaker (faults may skew it away
    /// from the AS membership).
    pub bgp_asns: BTreeMap<String, u32>,
    pub cluster_ids: BTreeMap<String, Ipv4Addr>,
    /// OSPF network statements per router, frozen at build time so that
    /// address faults leave statements stale, as they would in reality.
    pub ospf_networks: BTreeMap<String, Vec<OspfNetwork>>,
    pub ospf_passive: BTreeMap<String, BTreeSet<String>>,
    /// Explicit per-interface OSPF costs (absent means default 1).
    #[serde(with = "vec_map")]
    pub ospf_costs: BTreeMap<Endpoint, u32>,
    pub isis_nets: BTreeMap<String, String>,
    pub isis_levels: BTreeMap<String, IsisLevel>,
    /// Interfaces running IS-IS, by (router, interface name).
    pub isis_interfaces: BTreeSet<(String, String)>,
    pub isis_passive: BTreeMap<String, BTreeSet<String>>,
    pub sessions: Vec<Session>,
    pub policies: BTreeMap<String, RouterPolicies>,
    pub acl_bindings: Vec<AclBinding>,
    pub statics: Vec<PlanStatic>,
    pub advertisements: BTreeMap<String, BTreeSet<Prefix>>,
    pub redistributions: Vec<Redistribution>,
}

/// Serializes maps with non-string keys as sorted entry lists.
mod vec_map {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize + Ord,
        V: Serialize,
        S: Serializer,
    {
        map.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

impl LogicalPlan {
    pub fn as_of(&self, router: &str) -> Option<&AsPlan> {
        self.ases.iter().find(|a| a.members.contains(router))
    }

    /// Links whose endpoints are in the same AS.
    pub fn intra_as_links(&self) -> Vec<&Link> {
        self.topology
            .links
            .iter()
            .filter(|l| self.same_as(&l.a.0, &l.b.0))
            .collect()
    }

    pub fn inter_as_links(&self) -> Vec<&Link> {
        self.topology
            .links
            .iter()
            .filter(|l| !self.same_as(&l.a.0, &l.b.0))
            .collect()
    }

    pub fn same_as(&self, a: &str, b: &str) -> bool {
        self.as_of(a).map(|x| x.asn) == self.as_of(b).map(|x| x.asn)
    }

    /// Routers with at least one inter-AS link.
    pub fn border_routers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for link in self.inter_as_links() {
            out.insert(link.a.0.clone());
            out.insert(link.b.0.clone());
        }
        out
    }

    pub fn session(&self, a: &str, b: &str) -> Option<&Session> {
        let key = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.sessions.iter().find(|s| s.key() == key)
    }

    pub fn interface_name(ifid: u32) -> String {
        format!("Ethernet{ifid}")
    }
}

/// Splits the topology into connected ASes.
///
/// With eBGP enabled the AS count is drawn uniformly from
/// `2..=max(2, ceil(n / 25))`; otherwise a single AS covers everything.
/// Growth is random multi-source BFS, so every AS induces a connected
/// subgraph. Deterministic under a fixed seed. AS numbers are assigned from
/// 65001 in order of each AS's smallest member name.
pub fn partition_ases(
    t: &Topology,
    features: &FeatureSet,
    seed: u64,
) -> Vec<(u32, BTreeSet<String>)> {
    let routers: Vec<&String> = t.routers.iter().collect();
    if !features.contains(&Feature::Ebgp) || routers.len() < 2 {
        return vec![(FIRST_ASN, t.routers.clone())];
    }
    let mut rng = rng_from(seed);
    let cap = 2.max((routers.len() + 24) / 25);
    let count = rng.gen_range(2..=cap);

    let mut seeds: Vec<&String> = routers.clone();
    seeds.shuffle(&mut rng);
    seeds.truncate(count);

    let mut assignment: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in seeds.iter().enumerate() {
        assignment.insert(s.as_str(), i);
    }
    let mut remaining = routers.len() - count;
    while remaining > 0 {
        // Grow a random AS by one adjacent unassigned router per step.
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut rng);
        let mut grown = false;
        for idx in order {
            let mut candidates: BTreeSet<&str> = BTreeSet::new();
            for (r, a) in &assignment {
                if *a != idx {
                    continue;
                }
                for n in t.neighbors(r) {
                    if !assignment.contains_key(n) {
                        candidates.insert(n);
                    }
                }
            }
            if candidates.is_empty() {
                continue;
            }
            let pick = *candidates
                .iter()
                .nth(rng.gen_range(0..candidates.len()))
                .unwrap();
            assignment.insert(pick, idx);
            remaining -= 1;
            grown = true;
            break;
        }
        assert!(grown, "connected topology must allow growth");
    }

    let mut groups: Vec<BTreeSet<String>> = vec![BTreeSet::new(); count];
    for (r, idx) in assignment {
        groups[idx].insert(r.to_string());
    }
    groups.retain(|g| !g.is_empty());
    groups.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    groups
        .into_iter()
        .enumerate()
        .map(|(i, members)| (FIRST_ASN + i as u32, members))
        .collect()
}

/// Builds a complete logical plan for `features` on `t`.
///
/// `features` must be dependency-closed. Fails when a feature has no viable
/// surface on the topology (for example route reflection with no AS of four
/// or more speakers); the partition is retried internally a few times with
/// derived seeds before giving up.
pub fn build_plan(
    t: &Topology,
    features: &FeatureSet,
    seed: u64,
) -> Result<LogicalPlan, PlanError> {
    let mut last_err = String::new();
    for attempt in 0..8u64 {
        let pseed = mix_seed(seed, &[0x9a11, attempt]);
        let partition = partition_ases(t, features, pseed);
        match build_with_partition(t, features, seed, partition) {
            Ok(plan) => return Ok(plan),
            Err(PlanError::Infeasible(msg)) => last_err = msg,
        }
    }
    Err(PlanError::Infeasible(last_err))
}

fn build_with_partition(
    t: &Topology,
    features: &FeatureSet,
    seed: u64,
    partition: Vec<(u32, BTreeSet<String>)>,
) -> Result<LogicalPlan, PlanError> {
    let has = |f: Feature| features.contains(&f);
    let both_igps = has(Feature::Ospf) && has(Feature::Isis);

    // IGP choice per AS: alternate when both IGPs are requested.
    let igp_of = |idx: usize| -> IgpKind {
        if both_igps {
            if idx % 2 == 0 {
                IgpKind::Ospf
            } else {
                IgpKind::Isis
            }
        } else if has(Feature::Isis) {
            IgpKind::Isis
        } else {
            IgpKind::Ospf
        }
    };

    // Border routers under this partition.
    let mut borders: BTreeSet<&str> = BTreeSet::new();
    for link in &t.links {
        let asn_a = partition.iter().position(|(_, m)| m.contains(&link.a.0));
        let asn_b = partition.iter().position(|(_, m)| m.contains(&link.b.0));
        if asn_a != asn_b {
            borders.insert(&link.a.0);
            borders.insert(&link.b.0);
        }
    }

    // Assemble AS plans: speakers, areas, iBGP design.
    let mut ases = Vec::new();
    let mut isis_area_counter = 0u32;
    for (idx, (asn, members)) in partition.iter().enumerate() {
        let igp = igp_of(idx);
        let mut speakers = if has(Feature::Ebgp) {
            members.clone()
        } else {
            BTreeSet::new()
        };

        // Redistribution carves IGP-only routers out of the BGP mesh.
        if has(Feature::RedistributionBgpOspf) && igp == IgpKind::Ospf {
            let mut non_border: Vec<&String> = members
                .iter()
                .filter(|r| !borders.contains(r.as_str()))
                .collect();
            non_border.sort_by_key(|r| (t.degree(r), r.as_str()));
            let carve = (members.len() / 5).max(1).min(non_border.len());
            for r in non_border.into_iter().take(carve) {
                speakers.remove(r);
            }
        }

        let multi_area = match igp {
            IgpKind::Ospf => has(Feature::OspfMultiArea) && members.len() >= 4,
            IgpKind::Isis => has(Feature::IsisMultiLevel) && members.len() >= 4,
        };

        let intra: Vec<&Link> = t
            .links
            .iter()
            .filter(|l| members.contains(&l.a.0) && members.contains(&l.b.0))
            .collect();

        // Area layout: a connected core (BFS tree around the highest-degree
        // member) becomes the backbone; each remaining connected component
        // becomes one attached area.
        let (core, components) = if multi_area {
            split_core(t, members, &intra)
        } else {
            (members.clone(), Vec::new())
        };

        let area_of = |r: &str| -> u32 {
            if core.contains(r) {
                0
            } else {
                components
                    .iter()
                    .position(|c| c.contains(r))
                    .map(|i| i as u32 + 1)
                    .unwrap_or(0)
            }
        };
        let mut interface_areas = BTreeMap::new();
        let mut router_areas = BTreeMap::new();
        let mut isis_areas = BTreeMap::new();
        for r in members {
            router_areas.insert(r.clone(), area_of(r));
        }
        for link in &intra {
            let (aa, ab) = (area_of(&link.a.0), area_of(&link.b.0));
            // A core-to-component link lives in the component's area; the
            // core side becomes an area border router.
            let area = aa.max(ab);
            interface_areas.insert(link.a.clone(), area);
            interface_areas.insert(link.b.clone(), area);
        }

        if igp == IgpKind::Isis {
            isis_area_counter += 1;
            let base = isis_area_counter;
            isis_area_counter += components.len() as u32;
            for r in members {
                let a = area_of(r);
                let id = if a == 0 { base } else { base + a };
                isis_areas.insert(r.clone(), format!("49.{id:04}"));
            }
        }

        // iBGP design.
        let ibgp = if speakers.is_empty() {
            IbgpDesign::None
        } else if has(Feature::RouteReflection) && speakers.len() >= 4 {
            let mut ranked: Vec<&String> = speakers.iter().collect();
            ranked.sort_by_key(|r| {
                (
                    !borders.contains(r.as_str()),
                    usize::MAX - t.degree(r),
                    r.as_str(),
                )
            });
            let n_reflectors = if speakers.len() >= 8 { 2 } else { 1 };
            let reflectors: Vec<String> = ranked
                .iter()
                .take(n_reflectors)
                .map(|r| (*r).to_string())
                .collect();
            let clients: BTreeSet<String> = speakers
                .iter()
                .filter(|r| !reflectors.contains(r))
                .cloned()
                .collect();
            IbgpDesign::RouteReflection {
                clusters: reflectors
                    .into_iter()
                    .map(|reflector| RrCluster {
                        cluster_id: Ipv4Addr::UNSPECIFIED, // filled after addressing
                        reflector,
                        clients: clients.clone(),
                    })
                    .collect(),
            }
        } else {
            IbgpDesign::FullMesh
        };

        ases.push(AsPlan {
            asn: *asn,
            members: members.clone(),
            igp,
            multi_area,
            interface_areas,
            router_areas,
            isis_areas,
            speakers,
            ibgp,
        });
    }

    // Feasibility gates that depend on the partition.
    if has(Feature::RouteReflection)
        && !ases
            .iter()
            .any(|a| matches!(a.ibgp, IbgpDesign::RouteReflection { .. }))
    {
        return Err(PlanError::Infeasible(
            "route-reflection requested but no AS has >= 4 speakers".into(),
        ));
    }
    if has(Feature::IsisMultiLevel)
        && !ases.iter().any(|a| a.igp == IgpKind::Isis && a.multi_area)
    {
        return Err(PlanError::Infeasible(
            "isis-multi-level requested but no IS-IS AS has >= 4 members".into(),
        ));
    }
    if has(Feature::OspfMultiArea)
        && !ases.iter().any(|a| a.igp == IgpKind::Ospf && a.multi_area)
    {
        return Err(PlanError::Infeasible(
            "ospf-multi-area requested but no OSPF AS has >= 4 members".into(),
        ));
    }
    if has(Feature::RedistributionBgpOspf)
        && !ases
            .iter()
            .any(|a| a.igp == IgpKind::Ospf && a.speakers.len() < a.members.len())
    {
        return Err(PlanError::Infeasible(
            "redistribution requested but no OSPF AS has a non-border member to carve out".into(),
        ));
    }
    if both_igps && ases.len() < 2 {
        return Err(PlanError::Infeasible(
            "both IGPs requested but only one AS exists".into(),
        ));
    }

    // Addressing.
    let mut plan = LogicalPlan {
        topology: t.clone(),
        features: features.clone(),
        seed,
        ases,
        link_subnets: BTreeMap::new(),
        interface_ips: BTreeMap::new(),
        loopbacks: BTreeMap::new(),
        router_ids: BTreeMap::new(),
        data_subnets: BTreeMap::new(),
        bgp_asns: BTreeMap::new(),
        cluster_ids: BTreeMap::new(),
        ospf_networks: BTreeMap::new(),
        ospf_passive: BTreeMap::new(),
        ospf_costs: BTreeMap::new(),
        isis_nets: BTreeMap::new(),
        isis_levels: BTreeMap::new(),
        isis_interfaces: BTreeSet::new(),
        isis_passive: BTreeMap::new(),
        sessions: Vec::new(),
        policies: BTreeMap::new(),
        acl_bindings: Vec::new(),
        statics: Vec::new(),
        advertisements: BTreeMap::new(),
        redistributions: Vec::new(),
    };

    for (i, link) in t.links.iter().enumerate() {
        let subnet = Prefix::from_u32(LINK_POOL + 2 * i as u32, 31);
        plan.link_subnets.insert(link.clone(), subnet);
        let base = u32::from(subnet.network());
        plan.interface_ips
            .insert(link.a.clone(), (Ipv4Addr::from(base), 31));
        plan.interface_ips
            .insert(link.b.clone(), (Ipv4Addr::from(base + 1), 31));
    }
    for (i, r) in t.routers.iter().enumerate() {
        let lo = Ipv4Addr::from(LOOPBACK_POOL + i as u32 + 1);
        plan.loopbacks.insert(r.clone(), lo);
        plan.router_ids.insert(r.clone(), lo);
    }

    // Fill cluster ids now that loopbacks exist.
    let loopbacks = plan.loopbacks.clone();
    for asp in &mut plan.ases {
        if let IbgpDesign::RouteReflection { clusters } = &mut asp.ibgp {
            for c in clusters {
                c.cluster_id = loopbacks[&c.reflector];
                plan.cluster_ids.insert(c.reflector.clone(), c.cluster_id);
            }
        }
    }

    // Data subnets and advertisements for every speaker.
    if has(Feature::Ebgp) {
        for (i, r) in t.routers.iter().enumerate() {
            let is_speaker = plan.as_of(r).map_or(false, |a| a.speakers.contains(r));
            if !is_speaker {
                continue;
            }
            let subnet = Prefix::from_u32(DATA_POOL + ((i as u32 + 1) << 8), 24);
            plan.data_subnets.insert(r.clone(), subnet);
            let adv = plan.advertisements.entry(r.clone()).or_default();
            adv.insert(subnet);
            adv.insert(Prefix::host(plan.loopbacks[r]));
        }
    }

    // Static-backed extra prefixes: one per AS, advertised by a
    // deterministic speaker.
    if has(Feature::StaticRoutes) {
        let mut k = 0u32;
        let ases_snapshot = plan.ases.clone();
        for asp in &ases_snapshot {
            let Some(owner) = asp
                .speakers
                .iter()
                .find(|r| !borders.contains(r.as_str()))
                .or_else(|| asp.speakers.iter().next())
            else {
                continue;
            };
            k += 1;
            let prefix = Prefix::from_u32(STATIC_POOL + (k << 8), 24);
            plan.statics.push(PlanStatic {
                router: owner.clone(),
                prefix,
                via: StaticNextHop::Null0,
            });
            plan.advertisements
                .entry(owner.clone())
                .or_default()
                .insert(prefix);
        }
    }

    // BGP process ASNs.
    for asp in &plan.ases {
        for r in &asp.speakers {
            plan.bgp_asns.insert(r.clone(), asp.asn);
        }
    }

    // Whether external next-hops are resolved by next-hop-self on borders or
    // by passive IGP advertisement of inter-AS link subnets.
    let nhs_mode = has(Feature::NextHopSelf);

    build_igp(&mut plan, nhs_mode);
    build_sessions(&mut plan, features, nhs_mode);
    build_policies(&mut plan, features, &borders);

    // Redistribution.
    if has(Feature::RedistributionBgpOspf) {
        let mut redist = Vec::new();
        for asp in &plan.ases {
            if asp.igp != IgpKind::Ospf || asp.speakers.len() == asp.members.len() {
                continue;
            }
            for r in &asp.members {
                if borders.contains(r.as_str()) && asp.speakers.contains(r) {
                    redist.push(Redistribution {
                        router: r.clone(),
                        from: "bgp".into(),
                        to: "ospf".into(),
                    });
                }
            }
        }
        plan.redistributions = redist;
    }

    plan.validate().map_err(PlanError::Infeasible)?;
    Ok(plan)
}

/// Core = BFS tree around the highest-degree member, half the AS rounded up.
fn split_core(
    t: &Topology,
    members: &BTreeSet<String>,
    intra: &[&Link],
) -> (BTreeSet<String>, Vec<BTreeSet<String>>) {
    let root = members
        .iter()
        .max_by_key(|r| (t.degree(r), std::cmp::Reverse(r.as_str())))
        .unwrap()
        .clone();
    let target = (members.len() + 1) / 2;
    let mut core = BTreeSet::new();
    let mut queue = VecDeque::new();
    core.insert(root.clone());
    queue.push_back(root);
    while let Some(r) = queue.pop_front() {
        if core.len() >= target {
            break;
        }
        for link in intra {
            if link.end_on(&r).is_none() {
                continue;
            }
            let other = &link.other_end(&r).unwrap().0;
            if core.len() < target && core.insert(other.clone()) {
                queue.push_back(other.clone());
            }
        }
    }

    // Connected components of the remainder.
    let rest: BTreeSet<&String> = members.iter().filter(|r| !core.contains(*r)).collect();
    let mut seen: BTreeSet<&String> = BTreeSet::new();
    let mut components = Vec::new();
    for start in &rest {
        if seen.contains(*start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut q = VecDeque::new();
        comp.insert((*start).clone());
        seen.insert(start);
        q.push_back((*start).clone());
        while let Some(r) = q.pop_front() {
            for link in intra {
                if link.end_on(&r).is_none() {
                    continue;
                }
                let other = &link.other_end(&r).unwrap().0;
                if let Some(o) = rest.get(other) {
                    if seen.insert(o) {
                        comp.insert((*o).clone());
                        q.push_back((*o).clone());
                    }
                }
            }
        }
        components.push(comp);
    }
    components.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    (core, components)
}

fn build_igp(plan: &mut LogicalPlan, nhs_mode: bool) {
    let topo = plan.topology.clone();
    let ases = plan.ases.clone();
    for asp in &ases {
        for r in &asp.members {
            match asp.igp {
                IgpKind::Ospf => {
                    let mut networks = vec![OspfNetwork {
                        addr: plan.loopbacks[r],
                        wildcard: Ipv4Addr::UNSPECIFIED,
                        area: asp.router_areas[r],
                    }];
                    for link in topo.links_of(r) {
                        let ep = link.end_on(r).unwrap();
                        if let Some(area) = asp.interface_areas.get(ep) {
                            networks.push(OspfNetwork {
                                addr: plan.interface_ips[ep].0,
                                wildcard: Ipv4Addr::UNSPECIFIED,
                                area: *area,
                            });
                        } else if !nhs_mode && plan.features.contains(&Feature::Ebgp) {
                            // Inter-AS interface advertised passively.
                            networks.push(OspfNetwork {
                                addr: plan.interface_ips[ep].0,
                                wildcard: Ipv4Addr::UNSPECIFIED,
                                area: asp.router_areas[r],
                            });
                            plan.ospf_passive
                                .entry(r.clone())
                                .or_default()
                                .insert(LogicalPlan::interface_name(ep.1));
                        }
                    }
                    networks.sort_by_key(|n| u32::from(n.addr));
                    plan.ospf_networks.insert(r.clone(), networks);
                }
                IgpKind::Isis => {
                    let area = asp.isis_areas[r].clone();
                    plan.isis_nets
                        .insert(r.clone(), isis_net(&area, plan.loopbacks[r]));
                    let level = if !asp.multi_area {
                        IsisLevel::Level1
                    } else if asp.router_areas[r] == 0 {
                        IsisLevel::Level2
                    } else {
                        // Component routers adjacent to the core bridge the
                        // levels.
                        let touches_core = topo.links_of(r).iter().any(|l| {
                            let other = &l.other_end(r).unwrap().0;
                            asp.members.contains(other) && asp.router_areas[other] == 0
                        });
                        if touches_core {
                            IsisLevel::Level1And2
                        } else {
                            IsisLevel::Level1
                        }
                    };
                    plan.isis_levels.insert(r.clone(), level);
                    plan.isis_interfaces
                        .insert((r.clone(), "Loopback0".to_string()));
                    for link in topo.links_of(r) {
                        let ep = link.end_on(r).unwrap();
                        let other = &link.other_end(r).unwrap().0;
                        if asp.members.contains(other) {
                            plan.isis_interfaces
                                .insert((r.clone(), LogicalPlan::interface_name(ep.1)));
                        } else if !nhs_mode && plan.features.contains(&Feature::Ebgp) {
                            plan.isis_interfaces
                                .insert((r.clone(), LogicalPlan::interface_name(ep.1)));
                            plan.isis_passive
                                .entry(r.clone())
                                .or_default()
                                .insert(LogicalPlan::interface_name(ep.1));
                        }
                    }
                }
            }
        }
    }
}

fn build_sessions(plan: &mut LogicalPlan, features: &FeatureSet, nhs_mode: bool) {
    if !features.contains(&Feature::Ebgp) {
        return;
    }
    let borders = plan.border_routers();
    let mut sessions = Vec::new();

    // eBGP: one session per inter-AS link, peering on interface addresses.
    for link in plan.inter_as_links() {
        let (u, v) = (&link.a, &link.b);
        let (asn_u, asn_v) = (plan.as_of(&u.0).unwrap().asn, plan.as_of(&v.0).unwrap().asn);
        sessions.push(Session {
            kind: SessionKind::Ebgp,
            a: SessionEnd {
                router: u.0.clone(),
                addr: plan.interface_ips[u].0,
                declared_peer_as: asn_v,
                source_loopback: false,
                next_hop_self: false,
                shutdown: false,
                route_map_in: None,
                route_map_out: None,
            },
            b: SessionEnd {
                router: v.0.clone(),
                addr: plan.interface_ips[v].0,
                declared_peer_as: asn_u,
                source_loopback: false,
                next_hop_self: false,
                shutdown: false,
                route_map_in: None,
                route_map_out: None,
            },
        });
    }

    // iBGP: full mesh or route reflection, peering on loopbacks.
    let ibgp_end = |plan: &LogicalPlan, r: &str, asn: u32| SessionEnd {
        router: r.to_string(),
        addr: plan.loopbacks[r],
        declared_peer_as: asn,
        source_loopback: true,
        next_hop_self: nhs_mode && borders.contains(r),
        shutdown: false,
        route_map_in: None,
        route_map_out: None,
    };
    for asp in &plan.ases {
        match &asp.ibgp {
            IbgpDesign::None => {}
            IbgpDesign::FullMesh => {
                let speakers: Vec<&String> = asp.speakers.iter().collect();
                for i in 0..speakers.len() {
                    for j in i + 1..speakers.len() {
                        sessions.push(Session {
                            kind: SessionKind::Ibgp,
                            a: ibgp_end(plan, speakers[i], asp.asn),
                            b: ibgp_end(plan, speakers[j], asp.asn),
                        });
                    }
                }
            }
            IbgpDesign::RouteReflection { clusters } => {
                let reflectors: Vec<&String> = clusters.iter().map(|c| &c.reflector).collect();
                for i in 0..reflectors.len() {
                    for j in i + 1..reflectors.len() {
                        sessions.push(Session {
                            kind: SessionKind::Ibgp,
                            a: ibgp_end(plan, reflectors[i], asp.asn),
                            b: ibgp_end(plan, reflectors[j], asp.asn),
                        });
                    }
                }
                for cluster in clusters {
                    for client in &cluster.clients {
                        sessions.push(Session {
                            kind: SessionKind::RrClient,
                            a: ibgp_end(plan, &cluster.reflector, asp.asn),
                            b: ibgp_end(plan, client, asp.asn),
                        });
                    }
                }
            }
        }
    }

    sessions.sort_by_key(|s| (s.key(), s.kind));
    plan.sessions = sessions;
}

fn build_policies(plan: &mut LogicalPlan, features: &FeatureSet, borders: &BTreeSet<&str>) {
    let has = |f: Feature| features.contains(&f);

    // Export prefix lists: one per AS, defined on its border speakers,
    // permitting exactly the AS's advertised data and static prefixes.
    if has(Feature::CommunityFreeExport) {
        for asp in plan.ases.clone() {
            let mut prefixes: Vec<Prefix> = Vec::new();
            for r in &asp.members {
                if let Some(adv) = plan.advertisements.get(r) {
                    for p in adv {
                        if !Prefix::from_u32(LOOPBACK_POOL, 16).covers(p) {
                            prefixes.push(*p);
                        }
                    }
                }
            }
            prefixes.sort();
            let name = format!("PL-EXPORT-{}", asp.asn);
            let list = PrefixList {
                entries: prefixes
                    .iter()
                    .enumerate()
                    .map(|(i, p)| PrefixListEntry {
                        seq: (i as u32 + 1) * 5,
                        permit: true,
                        prefix: *p,
                        ge: None,
                        le: None,
                    })
                    .collect(),
            };
            for r in &asp.members {
                if borders.contains(r.as_str()) && asp.speakers.contains(r) {
                    plan.policies
                        .entry(r.clone())
                        .or_default()
                        .prefix_lists
                        .insert(name.clone(), list.clone());
                }
            }
        }
    }

    // Per-session route maps on eBGP edges.
    let mut session_maps: Vec<(String, String, RouteMap)> = Vec::new();
    for s in &mut plan.sessions {
        if s.kind != SessionKind::Ebgp {
            continue;
        }
        let peer_of_a = s.b.router.clone();
        let peer_of_b = s.a.router.clone();
        for (end, peer) in [(&mut s.a, peer_of_a), (&mut s.b, peer_of_b)] {
            if has(Feature::CommunityFreeExport) {
                end.route_map_out = Some(format!("RM-EXPORT-{peer}"));
            }
            if has(Feature::LocalPrefPolicy) {
                end.route_map_in = Some(format!("RM-IMPORT-{peer}"));
            }
            session_maps.push((end.router.clone(), peer, RouteMap { clauses: vec![] }));
        }
    }
    for (router, peer, _) in session_maps {
        if has(Feature::CommunityFreeExport) {
            let asn = plan.as_of(&router).unwrap().asn;
            plan.policies
                .entry(router.clone())
                .or_default()
                .route_maps
                .insert(
                    format!("RM-EXPORT-{peer}"),
                    RouteMap {
                        clauses: vec![RouteMapClause {
                            seq: 10,
                            permit: true,
                            match_prefix_list: Some(format!("PL-EXPORT-{asn}")),
                            set_local_pref: None,
                            set_next_hop: None,
                        }],
                    },
                );
        }
        if has(Feature::LocalPrefPolicy) {
            plan.policies
                .entry(router.clone())
                .or_default()
                .route_maps
                .insert(
                    format!("RM-IMPORT-{peer}"),
                    RouteMap {
                        clauses: vec![RouteMapClause {
                            seq: 10,
                            permit: true,
                            match_prefix_list: None,
                            set_local_pref: Some(GOLDEN_LOCAL_PREF),
                            set_next_hop: None,
                        }],
                    },
                );
        }
    }

    // Interface ACLs: one deterministic binding per AS and direction.
    for dir in [AclDirection::In, AclDirection::Out] {
        let wanted = match dir {
            AclDirection::In => has(Feature::AclIn),
            AclDirection::Out => has(Feature::AclOut),
        };
        if !wanted {
            continue;
        }
        for asp in plan.ases.clone() {
            let anchor = asp
                .members
                .iter()
                .max_by_key(|r| (plan.topology.degree(r), std::cmp::Reverse(r.as_str())))
                .unwrap()
                .clone();
            let links = plan.topology.links_of(&anchor);
            let intra: Vec<&&Link> = links
                .iter()
                .filter(|l| {
                    let other = &l.other_end(&anchor).unwrap().0;
                    asp.members.contains(other)
                })
                .collect();
            let link = match dir {
                AclDirection::In => intra.first().copied().or(links.first()),
                AclDirection::Out => intra.last().copied().or(links.last()),
            };
            let Some(link) = link else { continue };
            let ep = link.end_on(&anchor).unwrap().clone();
            let name = match dir {
                AclDirection::In => format!("ACL-IN-E{}", ep.1),
                AclDirection::Out => format!("ACL-OUT-E{}", ep.1),
            };
            plan.policies.entry(anchor.clone()).or_default().acls.insert(
                name.clone(),
                Acl {
                    rules: vec![AclRule {
                        permit: true,
                        src: crate::configtext::AclMatch::Any,
                        dst: crate::configtext::AclMatch::Any,
                    }],
                },
            );
            plan.acl_bindings.push(AclBinding {
                router: anchor,
                ifid: ep.1,
                direction: dir,
                name,
            });
        }
    }
}

impl LogicalPlan {
    /// Checks every golden-state invariant. Returns a description of the
    /// first violation; fault-injected plans are expected to violate these.
    pub fn validate(&self) -> Result<(), String> {
        // Unique loopbacks and router ids.
        let mut seen = BTreeSet::new();
        for (r, lo) in &self.loopbacks {
            if !seen.insert(lo) {
                return Err(format!("duplicate loopback {lo} (router {r})"));
            }
        }
        let mut seen = BTreeSet::new();
        for (r, rid) in &self.router_ids {
            if !seen.insert(rid) {
                return Err(format!("duplicate router-id {rid} (router {r})"));
            }
        }
        // Link endpoints share a subnet with equal mask.
        for (link, subnet) in &self.link_subnets {
            let (ip_a, len_a) = self.interface_ips[&link.a];
            let (ip_b, len_b) = self.interface_ips[&link.b];
            if len_a != len_b
                || Prefix::new(ip_a, len_a) != *subnet
                || Prefix::new(ip_b, len_b) != *subnet
            {
                return Err(format!("link {link:?} endpoints disagree on subnet"));
            }
        }
        // No overlapping link subnets.
        let subnets: Vec<&Prefix> = self.link_subnets.values().collect();
        for (i, a) in subnets.iter().enumerate() {
            for b in &subnets[i + 1..] {
                if a.covers(b) || b.covers(a) {
                    return Err(format!("overlapping link subnets {a} and {b}"));
                }
            }
        }
        // ASes induce connected subgraphs; multi-area backbones connected.
        for asp in &self.ases {
            if !is_connected(&self.topology, &asp.members) {
                return Err(format!("AS {} is not connected", asp.asn));
            }
            if asp.igp == IgpKind::Ospf && asp.multi_area {
                let core: BTreeSet<String> = asp
                    .router_areas
                    .iter()
                    .filter(|(_, a)| **a == 0)
                    .map(|(r, _)| r.clone())
                    .collect();
                if core.is_empty() || !is_connected(&self.topology, &core) {
                    return Err(format!("AS {} area 0 is not connected", asp.asn));
                }
            }
        }
        // eBGP sessions declare true remote ASNs.
        for s in &self.sessions {
            if s.kind == SessionKind::Ebgp {
                let true_a = self.as_of(&s.a.router).unwrap().asn;
                let true_b = self.as_of(&s.b.router).unwrap().asn;
                if s.a.declared_peer_as != true_b || s.b.declared_peer_as != true_a {
                    return Err(format!("eBGP session {:?} declares wrong remote-as", s.key()));
                }
            }
        }
        // Network statements are locally backed.
        for (r, advs) in &self.advertisements {
            for p in advs {
                let local_loopback = Prefix::host(self.loopbacks[r]) == *p;
                let local_data = self.data_subnets.get(r) == Some(p);
                let static_backed = self
                    .statics
                    .iter()
                    .any(|st| st.router == *r && st.prefix == *p);
                if !local_loopback && !local_data && !static_backed {
                    return Err(format!("network statement {p} on {r} has no local backing"));
                }
            }
        }
        // Referenced policy objects exist on the same router.
        for s in &self.sessions {
            for end in [&s.a, &s.b] {
                for rm in [&end.route_map_in, &end.route_map_out].into_iter().flatten() {
                    let defined = self
                        .policies
                        .get(&end.router)
                        .map_or(false, |p| p.route_maps.contains_key(rm));
                    if !defined {
                        return Err(format!("route-map {rm} undefined on {}", end.router));
                    }
                }
            }
        }
        for (router, pol) in &self.policies {
            for map in pol.route_maps.values() {
                for clause in &map.clauses {
                    if let Some(pl) = &clause.match_prefix_list {
                        if !pol.prefix_lists.contains_key(pl) {
                            return Err(format!("prefix-list {pl} undefined on {router}"));
                        }
                    }
                }
            }
        }
        for b in &self.acl_bindings {
            let defined = self
                .policies
                .get(&b.router)
                .map_or(false, |p| p.acls.contains_key(&b.name));
            if !defined {
                return Err(format!("ACL {} undefined on {}", b.name, b.router));
            }
        }
        Ok(())
    }

    /// Derives the per-router device view rendered into configuration text.
    pub fn device_models(&self) -> BTreeMap<String, DeviceModel> {
        let mut out = BTreeMap::new();
        for r in &self.topology.routers {
            out.insert(r.clone(), self.device_model(r));
        }
        out
    }

    fn device_model(&self, r: &str) -> DeviceModel {
        let mut m = DeviceModel::new(r);
        let asp = self.as_of(r);

        // Loopback0 and the data interface.
        let mut lo0 = Interface::new("Loopback0", self.loopbacks[r], 32);
        lo0.isis_enabled = self
            .isis_interfaces
            .contains(&(r.to_string(), "Loopback0".to_string()));
        m.interfaces.push(lo0);
        if let Some(data) = self.data_subnets.get(r) {
            let host = Ipv4Addr::from(u32::from(data.network()) + 1);
            m.interfaces.push(Interface::new("Loopback1", host, 24));
        }

        // Physical interfaces in ifid order.
        let mut eps: Vec<Endpoint> = self
            .interface_ips
            .keys()
            .filter(|(router, _)| router == r)
            .cloned()
            .collect();
        eps.sort_by_key(|(_, ifid)| *ifid);
        for ep in eps {
            let (addr, len) = self.interface_ips[&ep];
            let name = LogicalPlan::interface_name(ep.1);
            let mut iface = Interface::new(&name, addr, len);
            iface.ospf_cost = self.ospf_costs.get(&ep).copied();
            iface.isis_enabled = self
                .isis_interfaces
                .contains(&(r.to_string(), name.clone()));
            for b in &self.acl_bindings {
                if b.router == r && b.ifid == ep.1 {
                    match b.direction {
                        AclDirection::In => iface.acl_in = Some(b.name.clone()),
                        AclDirection::Out => iface.acl_out = Some(b.name.clone()),
                    }
                }
            }
            m.interfaces.push(iface);
        }

        // IGP processes.
        if let Some(networks) = self.ospf_networks.get(r) {
            if !networks.is_empty() {
                m.ospf = Some(OspfConfig {
                    process_id: 1,
                    router_id: self.router_ids[r],
                    networks: networks.clone(),
                    passive: self.ospf_passive.get(r).cloned().unwrap_or_default(),
                    redistribute_bgp: self
                        .redistributions
                        .iter()
                        .find(|x| x.router == r)
                        .map(|_| self.bgp_asns[r]),
                });
            }
        }
        if let Some(net) = self.isis_nets.get(r) {
            let tag = asp.map_or_else(|| "core".to_string(), |a| format!("as{}", a.asn));
            m.isis = Some(IsisConfig {
                tag,
                net: net.clone(),
                level: self
                    .isis_levels
                    .get(r)
                    .copied()
                    .unwrap_or(IsisLevel::Level1And2),
                passive: self.isis_passive.get(r).cloned().unwrap_or_default(),
            });
        }

        // BGP process.
        if let Some(asn) = self.bgp_asns.get(r) {
            let mut networks: Vec<Prefix> = self
                .advertisements
                .get(r)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
            networks.sort();
            let mut neighbors = Vec::new();
            for s in &self.sessions {
                let Some(local) = s.end(r) else { continue };
                let remote = if s.a.router == r { &s.b } else { &s.a };
                let mut n = Neighbor::new(remote.addr, local.declared_peer_as);
                n.update_source_loopback = local.source_loopback;
                n.rr_client = s.kind == SessionKind::RrClient && s.a.router == r;
                n.next_hop_self = local.next_hop_self;
                n.shutdown = local.shutdown;
                n.route_map_in = local.route_map_in.clone();
                n.route_map_out = local.route_map_out.clone();
                neighbors.push(n);
            }
            neighbors.sort_by_key(|n| u32::from(n.address));
            m.bgp = Some(BgpConfig {
                asn: *asn,
                router_id: self.router_ids[r],
                cluster_id: self.cluster_ids.get(r).copied(),
                networks,
                neighbors,
            });
        }

        // Policies and statics.
        if let Some(pol) = self.policies.get(r) {
            m.route_maps = pol.route_maps.clone();
            m.prefix_lists = pol.prefix_lists.clone();
            m.acls = pol.acls.clone();
        }
        for st in &self.statics {
            if st.router == r {
                m.statics.push(StaticRoute {
                    prefix: st.prefix,
                    next_hop: st.via,
                });
            }
        }
        m.statics.sort_by_key(|s| s.prefix);
        m
    }
}

fn is_connected(t: &Topology, set: &BTreeSet<String>) -> bool {
    let Some(start) = set.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::new();
    let mut q = VecDeque::new();
    seen.insert(start.clone());
    q.push_back(start.clone());
    while let Some(r) = q.pop_front() {
        for link in t.links_of(&r) {
            let other = &link.other_end(&r).unwrap().0;
            if set.contains(other) && seen.insert(other.clone()) {
                q.push_back(other.clone());
            }
        }
    }
    seen.len() == set.len()
}

#[cfg(test)]
pub mod tests {
    use super::*;
    use crate::features::{parse_features, resolve_dependencies};
    use crate::topo::load_topology;

    pub fn triangle() -> Topology {
        load_topology(
            r#"{"name":"tri","routers":["a","b","c"],
                "links":[["a",0,"b",0],["b",1,"c",0],["a",1,"c",1]]}"#,
        )
        .unwrap()
    }

    pub fn grid8() -> Topology {
        load_topology(
            r#"{"name":"grid8","routers":["r0","r1","r2","r3","r4","r5","r6","r7"],
                "links":[
                  ["r0",0,"r1",0],["r1",1,"r2",0],["r2",1,"r3",0],
                  ["r4",0,"r5",0],["r5",1,"r6",0],["r6",1,"r7",0],
                  ["r0",1,"r4",1],["r1",2,"r5",2],["r2",2,"r6",2],["r3",1,"r7",1]
                ]}"#,
        )
        .unwrap()
    }

    pub fn features(names: &[&str]) -> FeatureSet {
        resolve_dependencies(&parse_features(names.iter().copied()).unwrap())
    }

    #[test]
    fn partition_without_ebgp_is_single_as() {
        let t = load_topology(
            r#"{"name":"path4","routers":["a","b","c","d"],
                "links":[["a",0,"b",0],["b",1,"c",0],["c",1,"d",0]]}"#,
        )
        .unwrap();
        let p = partition_ases(&t, &features(&[]), 3);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].1.len(), 4);
    }

    #[test]
    fn partition_with_ebgp_is_deterministic_and_connected() {
        let t = triangle();
        let f = features(&["ebgp"]);
        let p1 = partition_ases(&t, &f, 7);
        let p2 = partition_ases(&t, &f, 7);
        assert_eq!(p1, p2);
        assert_eq!(p1.len(), 2);
        let total: usize = p1.iter().map(|(_, m)| m.len()).sum();
        assert_eq!(total, 3);
        for (_, members) in &p1 {
            assert!(is_connected(&t, members));
        }
    }

    #[test]
    fn baseline_triangle_plan_satisfies_invariants() {
        let t = triangle();
        let plan = build_plan(&t, &features(&[]), 1).unwrap();
        assert_eq!(plan.ases.len(), 1);
        let subnets: BTreeSet<&Prefix> = plan.link_subnets.values().collect();
        assert_eq!(subnets.len(), 3);
        for s in subnets {
            assert_eq!(s.len(), 31);
        }
        assert_eq!(plan.loopbacks.values().collect::<BTreeSet<_>>().len(), 3);
        assert!(plan.ases[0].interface_areas.values().all(|a| *a == 0));
        plan.validate().unwrap();
    }

    #[test]
    fn plans_are_deterministic() {
        let t = grid8();
        let f = features(&["route-reflection", "community-free-export"]);
        let p1 = build_plan(&t, &f, 3).unwrap();
        let p2 = build_plan(&t, &f, 3).unwrap();
        assert_eq!(
            serde_json::to_string(&p1).unwrap(),
            serde_json::to_string(&p2).unwrap()
        );
    }

    #[test]
    fn route_reflection_creates_clusters_with_clients() {
        let t = grid8();
        let f = features(&["route-reflection"]);
        let plan = build_plan(&t, &f, 3).unwrap();
        let found = plan.ases.iter().any(|a| match &a.ibgp {
            IbgpDesign::RouteReflection { clusters } => {
                clusters.iter().any(|c| c.clients.len() >= 2)
            }
            _ => false,
        });
        assert!(found, "expected an rr-cluster with >= 2 clients");
        plan.validate().unwrap();
    }

    #[test]
    fn route_reflection_infeasible_on_tiny_topology() {
        let t = triangle();
        let f = features(&["route-reflection"]);
        // 3 routers in 2 ASes can never give 4 speakers in one AS.
        assert!(matches!(build_plan(&t, &f, 1), Err(PlanError::Infeasible(_))));
    }

    #[test]
    fn both_igps_are_assigned_across_ases() {
        let t = grid8();
        let f = features(&["ospf", "isis"]);
        let plan = build_plan(&t, &f, 5).unwrap();
        let igps: BTreeSet<IgpKind> = plan.ases.iter().map(|a| a.igp).collect();
        assert_eq!(igps.len(), 2);
        plan.validate().unwrap();
    }

    #[test]
    fn multi_area_backbone_is_connected() {
        let t = grid8();
        let f = features(&["ospf-multi-area"]);
        let plan = build_plan(&t, &f, 2).unwrap();
        plan.validate().unwrap();
        let asp = plan.ases.iter().find(|a| a.multi_area).unwrap();
        assert!(asp.router_areas.values().any(|a| *a != 0));
    }

    #[test]
    fn device_models_reference_only_defined_policies() {
        let t = grid8();
        let f = features(&[
            "community-free-export",
            "local-pref-policy",
            "acl-in",
            "acl-out",
            "static-routes",
        ]);
        let plan = build_plan(&t, &f, 4).unwrap();
        for (r, model) in plan.device_models() {
            assert!(
                model.dangling_references().is_empty(),
                "dangling refs on {r}: {:?}",
                model.dangling_references()
            );
        }
    }

    #[test]
    fn redistribution_carves_igp_only_routers() {
        let t = grid8();
        let f = features(&["redistribution-bgp-ospf"]);
        let plan = build_plan(&t, &f, 9).unwrap();
        let carved = plan.ases.iter().any(|a| a.speakers.len() < a.members.len());
        assert!(carved);
        assert!(!plan.redistributions.is_empty());
        let models = plan.device_models();
        for asp in &plan.ases {
            for r in &asp.members {
                assert_eq!(models[r].bgp.is_some(), asp.speakers.contains(r));
            }
        }
    }

    #[test]
    fn next_hop_self_mode_skips_passive_interfaces() {
        let t = grid8();
        let with_nhs = build_plan(&t, &features(&["next-hop-self"]), 3).unwrap();
        assert!(with_nhs.ospf_passive.is_empty());
        let nhs_set = with_nhs
            .sessions
            .iter()
            .filter(|s| s.kind != SessionKind::Ebgp)
            .any(|s| s.a.next_hop_self || s.b.next_hop_self);
        assert!(nhs_set);

        let without = build_plan(&t, &features(&["ebgp"]), 3).unwrap();
        assert!(!without.ospf_passive.is_empty());
        assert!(without
            .sessions
            .iter()
            .all(|s| !s.a.next_hop_self && !s.b.next_hop_self));
    }
}
