//! Configuration text: rendering, parsing, and edit application.
//!
//! The grammar is a single IOS-style dialect covering exactly the stanzas the
//! plan builder emits (see `docs/grammar.md`). Rendering is deterministic;
//! parsing tolerates unknown lines (collected as warnings) so that proposed
//! fixes using unmodeled vendor syntax degrade gracefully.

mod edits;
mod parse;
mod render;

pub use edits::{apply_edits, parse_edit_script, render_edit_script, EditScript, MatchFailure,
    MatchFailureReason, SearchReplace};
pub use parse::{parse_config, parse_config_set, ParseError, ParseOutcome};
pub use render::{render_config_set, render_model};

use crate::net::Prefix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

/// Network-wide configuration: one text blob per router.
pub type ConfigSet = BTreeMap<String, String>;

/// Structured per-router view of a configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub hostname: String,
    pub interfaces: Vec<Interface>,
    pub ospf: Option<OspfConfig>,
    pub isis: Option<IsisConfig>,
    pub bgp: Option<BgpConfig>,
    pub route_maps: BTreeMap<String, RouteMap>,
    pub prefix_lists: BTreeMap<String, PrefixList>,
    pub acls: BTreeMap<String, Acl>,
    pub statics: Vec<StaticRoute>,
}

impl DeviceModel {
    pub fn new(hostname: impl Into<String>) -> Self {
        DeviceModel {
            hostname: hostname.into(),
            interfaces: Vec::new(),
            ospf: None,
            isis: None,
            bgp: None,
            route_maps: BTreeMap::new(),
            prefix_lists: BTreeMap::new(),
            acls: BTreeMap::new(),
            statics: Vec::new(),
        }
    }

    pub fn interface(&self, name: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.name == name)
    }

    pub fn interface_mut(&mut self, name: &str) -> Option<&mut Interface> {
        self.interfaces.iter_mut().find(|i| i.name == name)
    }

    /// Connected subnet of every interface.
    pub fn connected_subnets(&self) -> Vec<(Prefix, &Interface)> {
        self.interfaces
            .iter()
            .map(|i| (Prefix::new(i.address, i.mask_len), i))
            .collect()
    }

    /// Policy names referenced anywhere but not defined on this device.
    pub fn dangling_references(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        if let Some(bgp) = &self.bgp {
            for n in &bgp.neighbors {
                for rm in [&n.route_map_in, &n.route_map_out].into_iter().flatten() {
                    if !self.route_maps.contains_key(rm) {
                        out.insert(format!("route-map {rm}"));
                    }
                }
            }
        }
        for map in self.route_maps.values() {
            for clause in &map.clauses {
                if let Some(pl) = &clause.match_prefix_list {
                    if !self.prefix_lists.contains_key(pl) {
                        out.insert(format!("prefix-list {pl}"));
                    }
                }
            }
        }
        for iface in &self.interfaces {
            for acl in [&iface.acl_in, &iface.acl_out].into_iter().flatten() {
                if !self.acls.contains_key(acl) {
                    out.insert(format!("access-list {acl}"));
                }
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub name: String,
    pub address: Ipv4Addr,
    pub mask_len: u8,
    /// Explicit OSPF cost; `None` renders nothing and means the default (1).
    pub ospf_cost: Option<u32>,
    /// Interface participates in IS-IS (`ip router isis <tag>`).
    pub isis_enabled: bool,
    pub acl_in: Option<String>,
    pub acl_out: Option<String>,
}

impl Interface {
    pub fn new(name: impl Into<String>, address: Ipv4Addr, mask_len: u8) -> Self {
        Interface {
            name: name.into(),
            address,
            mask_len,
            ospf_cost: None,
            isis_enabled: false,
            acl_in: None,
            acl_out: None,
        }
    }

    pub fn subnet(&self) -> Prefix {
        Prefix::new(self.address, self.mask_len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OspfConfig {
    pub process_id: u32,
    pub router_id: Ipv4Addr,
    pub networks: Vec<OspfNetwork>,
    pub passive: BTreeSet<String>,
    /// Redistribute BGP routes as externals: the BGP ASN.
    pub redistribute_bgp: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OspfNetwork {
    pub addr: Ipv4Addr,
    pub wildcard: Ipv4Addr,
    pub area: u32,
}

impl OspfNetwork {
    /// IOS match rule: an interface address matches when the bits outside
    /// the wildcard agree.
    pub fn matches(&self, addr: Ipv4Addr) -> bool {
        (u32::from(addr) ^ u32::from(self.addr)) & !u32::from(self.wildcard) == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsisLevel {
    Level1,
    Level2,
    Level1And2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsisConfig {
    pub tag: String,
    /// Full NET, e.g. `49.0001.1720.2000.0003.00`.
    pub net: String,
    pub level: IsisLevel,
    pub passive: BTreeSet<String>,
}

impl IsisConfig {
    /// Area part of the NET (everything before the 6-byte system id and the
    /// selector byte).
    pub fn area(&self) -> String {
        let parts: Vec<&str> = self.net.split('.').collect();
        if parts.len() > 4 {
            parts[..parts.len() - 4].join(".")
        } else {
            self.net.clone()
        }
    }
}

/// Builds an IS-IS NET from an area string and a router id.
pub fn isis_net(area: &str, router_id: Ipv4Addr) -> String {
    let o = router_id.octets();
    let digits = format!("{:03}{:03}{:03}{:03}", o[0], o[1], o[2], o[3]);
    format!(
        "{area}.{}.{}.{}.00",
        &digits[0..4],
        &digits[4..8],
        &digits[8..12]
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgpConfig {
    pub asn: u32,
    pub router_id: Ipv4Addr,
    pub cluster_id: Option<Ipv4Addr>,
    pub networks: Vec<Prefix>,
    pub neighbors: Vec<Neighbor>,
}

impl BgpConfig {
    pub fn neighbor(&self, addr: Ipv4Addr) -> Option<&Neighbor> {
        self.neighbors.iter().find(|n| n.address == addr)
    }

    pub fn neighbor_mut(&mut self, addr: Ipv4Addr) -> Option<&mut Neighbor> {
        self.neighbors.iter_mut().find(|n| n.address == addr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighbor {
    pub address: Ipv4Addr,
    pub remote_as: u32,
    pub update_source_loopback: bool,
    pub rr_client: bool,
    pub next_hop_self: bool,
    pub shutdown: bool,
    pub route_map_in: Option<String>,
    pub route_map_out: Option<String>,
}

impl Neighbor {
    pub fn new(address: Ipv4Addr, remote_as: u32) -> Self {
        Neighbor {
            address,
            remote_as,
            update_source_loopback: false,
            rr_client: false,
            next_hop_self: false,
            shutdown: false,
            route_map_in: None,
            route_map_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteMap {
    pub clauses: Vec<RouteMapClause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteMapClause {
    pub seq: u32,
    pub permit: bool,
    pub match_prefix_list: Option<String>,
    pub set_local_pref: Option<u32>,
    pub set_next_hop: Option<Ipv4Addr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixList {
    pub entries: Vec<PrefixListEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixListEntry {
    pub seq: u32,
    pub permit: bool,
    pub prefix: Prefix,
    pub ge: Option<u8>,
    pub le: Option<u8>,
}

impl PrefixListEntry {
    pub fn matches(&self, p: &Prefix) -> bool {
        if !self.prefix.contains(p.network()) {
            return false;
        }
        match (self.ge, self.le) {
            (None, None) => p.len() == self.prefix.len(),
            (ge, le) => {
                let lower = ge.unwrap_or_else(|| self.prefix.len());
                let upper = le.unwrap_or(32);
                p.len() >= lower && p.len() <= upper && p.len() >= self.prefix.len()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acl {
    pub rules: Vec<AclRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclRule {
    pub permit: bool,
    pub src: AclMatch,
    pub dst: AclMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AclMatch {
    Any,
    Host(Ipv4Addr),
    Net(Prefix),
}

impl AclMatch {
    pub fn matches(&self, addr: Ipv4Addr) -> bool {
        match self {
            AclMatch::Any => true,
            AclMatch::Host(h) => *h == addr,
            AclMatch::Net(p) => p.contains(addr),
        }
    }
}

impl Acl {
    /// First-match verdict with implicit deny at the end.
    pub fn permits(&self, src: Ipv4Addr, dst: Ipv4Addr) -> bool {
        for rule in &self.rules {
            if rule.src.matches(src) && rule.dst.matches(dst) {
                return rule.permit;
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticRoute {
    pub prefix: Prefix,
    pub next_hop: StaticNextHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StaticNextHop {
    Address(Ipv4Addr),
    Null0,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isis_net_formats_router_id() {
        let net = isis_net("49.0001", Ipv4Addr::new(172, 20, 0, 3));
        assert_eq!(net, "49.0001.1720.2000.0003.00");
        let cfg = IsisConfig {
            tag: "core".into(),
            net,
            level: IsisLevel::Level1,
            passive: BTreeSet::new(),
        };
        assert_eq!(cfg.area(), "49.0001");
    }

    #[test]
    fn ospf_network_match_rule() {
        let n = OspfNetwork {
            addr: Ipv4Addr::new(10, 0, 0, 4),
            wildcard: Ipv4Addr::new(0, 0, 0, 0),
            area: 2,
        };
        assert!(n.matches(Ipv4Addr::new(10, 0, 0, 4)));
        assert!(!n.matches(Ipv4Addr::new(10, 0, 0, 5)));
        let subnet = OspfNetwork {
            addr: Ipv4Addr::new(10, 0, 0, 4),
            wildcard: Ipv4Addr::new(0, 0, 0, 1),
            area: 2,
        };
        assert!(subnet.matches(Ipv4Addr::new(10, 0, 0, 5)));
    }

    #[test]
    fn prefix_list_entry_semantics() {
        let exact = PrefixListEntry {
            seq: 5,
            permit: true,
            prefix: "100.64.2.0/24".parse().unwrap(),
            ge: None,
            le: None,
        };
        assert!(exact.matches(&"100.64.2.0/24".parse().unwrap()));
        assert!(!exact.matches(&"100.64.2.0/25".parse().unwrap()));
        let ranged = PrefixListEntry {
            seq: 10,
            permit: true,
            prefix: "100.64.0.0/10".parse().unwrap(),
            ge: Some(24),
            le: Some(24),
        };
        assert!(ranged.matches(&"100.64.2.0/24".parse().unwrap()));
        assert!(!ranged.matches(&"100.64.0.0/10".parse().unwrap()));
    }

    #[test]
    fn acl_first_match_implicit_deny() {
        let acl = Acl {
            rules: vec![
                AclRule {
                    permit: false,
                    src: AclMatch::Host(Ipv4Addr::new(172, 20, 0, 1)),
                    dst: AclMatch::Any,
                },
                AclRule {
                    permit: true,
                    src: AclMatch::Any,
                    dst: AclMatch::Any,
                },
            ],
        };
        assert!(!acl.permits(Ipv4Addr::new(172, 20, 0, 1), Ipv4Addr::new(1, 1, 1, 1)));
        assert!(acl.permits(Ipv4Addr::new(172, 20, 0, 2), Ipv4Addr::new(1, 1, 1, 1)));
        let empty = Acl { rules: vec![] };
        assert!(!empty.permits(Ipv4Addr::new(1, 1, 1, 1), Ipv4Addr::new(2, 2, 2, 2)));
    }

    #[test]
    fn dangling_reference_detection() {
        let mut m = DeviceModel::new("r1");
        m.bgp = Some(BgpConfig {
            asn: 65001,
            router_id: Ipv4Addr::new(172, 20, 0, 1),
            cluster_id: None,
            networks: vec![],
            neighbors: vec![{
                let mut n = Neighbor::new(Ipv4Addr::new(10, 0, 0, 1), 65002);
                n.route_map_out = Some("RM-MISSING".into());
                n
            }],
        });
        assert_eq!(m.dangling_references(), vec!["route-map RM-MISSING"]);
    }
}
