//! Parsing configuration text back into device models.
//!
//! Recognized lines populate the model; unrecognized lines are collected as
//! warnings and ignored by simulation. References to undefined policy objects
//! are recorded as dangling (simulation treats a dangling route-map as
//! permit-all).

use super::{
    Acl, AclMatch, AclRule, BgpConfig, ConfigSet, DeviceModel, Interface, IsisConfig, IsisLevel,
    Neighbor, OspfConfig, OspfNetwork, PrefixList, PrefixListEntry, RouteMap, RouteMapClause,
    StaticNextHop, StaticRoute,
};
use crate::net::{mask_to_len, Prefix};
use std::collections::BTreeMap;
use std::net::Ipv4Addr;

#[derive(Debug, Clone, thiserror::Error)]
#[error("parse error in '{router}' line {line}: {message}")]
pub struct ParseError {
    pub router: String,
    pub line: usize,
    pub message: String,
}

/// A parsed device model plus anything the parser had to tolerate.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub model: DeviceModel,
    pub warnings: Vec<String>,
    pub dangling: Vec<String>,
}

enum Ctx {
    None,
    Interface(usize),
    Ospf,
    Isis,
    Bgp,
    RouteMap(String, u32),
    Acl(String),
}

/// Parses one router's configuration text.
pub fn parse_config(router: &str, text: &str) -> Result<ParseOutcome, ParseError> {
    let mut model = DeviceModel::new(router);
    let mut warnings = Vec::new();
    let mut ctx = Ctx::None;

    let err = |line: usize, message: String| ParseError {
        router: router.to_string(),
        line,
        message,
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        if raw.trim().is_empty() || raw.trim() == "!" {
            continue;
        }
        let indented = raw.starts_with(' ');
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }

        if !indented {
            ctx = Ctx::None;
            match tokens.as_slice() {
                ["hostname", name] => model.hostname = (*name).to_string(),
                ["interface", name] => {
                    model
                        .interfaces
                        .push(Interface::new(*name, Ipv4Addr::UNSPECIFIED, 32));
                    ctx = Ctx::Interface(model.interfaces.len() - 1);
                }
                ["router", "ospf", pid] => {
                    let process_id = pid
                        .parse()
                        .map_err(|_| err(lineno, format!("bad ospf process id '{pid}'")))?;
                    model.ospf = Some(OspfConfig {
                        process_id,
                        router_id: Ipv4Addr::UNSPECIFIED,
                        networks: Vec::new(),
                        passive: Default::default(),
                        redistribute_bgp: None,
                    });
                    ctx = Ctx::Ospf;
                }
                ["router", "isis", tag] => {
                    model.isis = Some(IsisConfig {
                        tag: (*tag).to_string(),
                        net: String::new(),
                        level: IsisLevel::Level1And2,
                        passive: Default::default(),
                    });
                    ctx = Ctx::Isis;
                }
                ["router", "bgp", asn] => {
                    let asn = asn
                        .parse()
                        .map_err(|_| err(lineno, format!("bad bgp asn '{asn}'")))?;
                    model.bgp = Some(BgpConfig {
                        asn,
                        router_id: Ipv4Addr::UNSPECIFIED,
                        cluster_id: None,
                        networks: Vec::new(),
                        neighbors: Vec::new(),
                    });
                    ctx = Ctx::Bgp;
                }
                ["ip", "prefix-list", name, "seq", seq, action, rest @ ..] => {
                    let entry = parse_prefix_list_entry(seq, action, rest)
                        .map_err(|m| err(lineno, m))?;
                    model
                        .prefix_lists
                        .entry((*name).to_string())
                        .or_insert_with(|| PrefixList { entries: vec![] })
                        .entries
                        .push(entry);
                }
                ["route-map", name, action, seq] => {
                    let permit = match *action {
                        "permit" => true,
                        "deny" => false,
                        _ => {
                            warnings.push(format!("line {lineno}: unknown route-map action"));
                            continue;
                        }
                    };
                    let seq: u32 = seq
                        .parse()
                        .map_err(|_| err(lineno, format!("bad route-map seq '{seq}'")))?;
                    model
                        .route_maps
                        .entry((*name).to_string())
                        .or_insert_with(|| RouteMap { clauses: vec![] })
                        .clauses
                        .push(RouteMapClause {
                            seq,
                            permit,
                            match_prefix_list: None,
                            set_local_pref: None,
                            set_next_hop: None,
                        });
                    ctx = Ctx::RouteMap((*name).to_string(), seq);
                }
                ["ip", "route", addr, mask, via] => {
                    let prefix = parse_net_mask(addr, mask).map_err(|m| err(lineno, m))?;
                    let next_hop = if via.eq_ignore_ascii_case("null0") {
                        StaticNextHop::Null0
                    } else {
                        StaticNextHop::Address(
                            via.parse()
                                .map_err(|_| err(lineno, format!("bad next-hop '{via}'")))?,
                        )
                    };
                    model.statics.push(StaticRoute { prefix, next_hop });
                }
                ["ip", "access-list", "extended", name] => {
                    model
                        .acls
                        .entry((*name).to_string())
                        .or_insert_with(|| Acl { rules: vec![] });
                    ctx = Ctx::Acl((*name).to_string());
                }
                ["end"] => {}
                _ => warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim())),
            }
            continue;
        }

        // Indented continuation lines.
        match &ctx {
            Ctx::None => {
                return Err(err(
                    lineno,
                    format!("continuation line outside a stanza: '{}'", raw.trim()),
                ));
            }
            Ctx::Interface(i) => {
                let iface = &mut model.interfaces[*i];
                match tokens.as_slice() {
                    ["ip", "address", addr, mask] => {
                        iface.address = addr
                            .parse()
                            .map_err(|_| err(lineno, format!("bad address '{addr}'")))?;
                        iface.mask_len = mask
                            .parse()
                            .ok()
                            .and_then(mask_to_len)
                            .ok_or_else(|| err(lineno, format!("bad netmask '{mask}'")))?;
                    }
                    ["ip", "ospf", "cost", cost] => {
                        iface.ospf_cost = Some(
                            cost.parse()
                                .map_err(|_| err(lineno, format!("bad cost '{cost}'")))?,
                        );
                    }
                    ["ip", "router", "isis", _tag] => iface.isis_enabled = true,
                    ["ip", "access-group", name, "in"] => {
                        iface.acl_in = Some((*name).to_string())
                    }
                    ["ip", "access-group", name, "out"] => {
                        iface.acl_out = Some((*name).to_string())
                    }
                    _ => warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim())),
                }
            }
            Ctx::Ospf => {
                let ospf = model.ospf.as_mut().unwrap();
                match tokens.as_slice() {
                    ["router-id", rid] => {
                        ospf.router_id = rid
                            .parse()
                            .map_err(|_| err(lineno, format!("bad router-id '{rid}'")))?;
                    }
                    ["redistribute", "bgp", asn, "metric", "20", "subnets"] => {
                        ospf.redistribute_bgp = Some(
                            asn.parse()
                                .map_err(|_| err(lineno, format!("bad asn '{asn}'")))?,
                        );
                    }
                    ["passive-interface", name] => {
                        ospf.passive.insert((*name).to_string());
                    }
                    ["network", addr, wildcard, "area", area] => {
                        ospf.networks.push(OspfNetwork {
                            addr: addr
                                .parse()
                                .map_err(|_| err(lineno, format!("bad address '{addr}'")))?,
                            wildcard: wildcard
                                .parse()
                                .map_err(|_| err(lineno, format!("bad wildcard '{wildcard}'")))?,
                            area: area
                                .parse()
                                .map_err(|_| err(lineno, format!("bad area '{area}'")))?,
                        });
                    }
                    _ => warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim())),
                }
            }
            Ctx::Isis => {
                let isis = model.isis.as_mut().unwrap();
                match tokens.as_slice() {
                    ["net", net] => isis.net = (*net).to_string(),
                    ["is-type", "level-1"] => isis.level = IsisLevel::Level1,
                    ["is-type", "level-2-only"] => isis.level = IsisLevel::Level2,
                    ["passive-interface", name] => {
                        isis.passive.insert((*name).to_string());
                    }
                    _ => warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim())),
                }
            }
            Ctx::Bgp => {
                let bgp = model.bgp.as_mut().unwrap();
                match tokens.as_slice() {
                    ["bgp", "router-id", rid] => {
                        bgp.router_id = rid
                            .parse()
                            .map_err(|_| err(lineno, format!("bad router-id '{rid}'")))?;
                    }
                    ["bgp", "cluster-id", cid] => {
                        bgp.cluster_id = Some(
                            cid.parse()
                                .map_err(|_| err(lineno, format!("bad cluster-id '{cid}'")))?,
                        );
                    }
                    ["network", addr, "mask", mask] => {
                        bgp.networks
                            .push(parse_net_mask(addr, mask).map_err(|m| err(lineno, m))?);
                    }
                    ["neighbor", addr, rest @ ..] => {
                        let address: Ipv4Addr = addr
                            .parse()
                            .map_err(|_| err(lineno, format!("bad neighbor '{addr}'")))?;
                        match rest {
                            ["remote-as", ras] => {
                                let remote_as = ras
                                    .parse()
                                    .map_err(|_| err(lineno, format!("bad remote-as '{ras}'")))?;
                                bgp.neighbors.push(Neighbor::new(address, remote_as));
                            }
                            other => {
                                let Some(nbr) = bgp.neighbor_mut(address) else {
                                    warnings.push(format!(
                                        "line {lineno}: neighbor {address} option before remote-as"
                                    ));
                                    continue;
                                };
                                match other {
                                    ["update-source", "Loopback0"] => {
                                        nbr.update_source_loopback = true
                                    }
                                    ["route-reflector-client"] => nbr.rr_client = true,
                                    ["next-hop-self"] => nbr.next_hop_self = true,
                                    ["shutdown"] => nbr.shutdown = true,
                                    ["route-map", name, "in"] => {
                                        nbr.route_map_in = Some((*name).to_string())
                                    }
                                    ["route-map", name, "out"] => {
                                        nbr.route_map_out = Some((*name).to_string())
                                    }
                                    _ => warnings.push(format!(
                                        "line {lineno}: unrecognized '{}'",
                                        raw.trim()
                                    )),
                                }
                            }
                        }
                    }
                    _ => warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim())),
                }
            }
            Ctx::RouteMap(name, seq) => {
                let clause = model
                    .route_maps
                    .get_mut(name)
                    .and_then(|m| m.clauses.iter_mut().find(|c| c.seq == *seq))
                    .expect("route-map clause context");
                match tokens.as_slice() {
                    ["match", "ip", "address", "prefix-list", pl] => {
                        clause.match_prefix_list = Some((*pl).to_string());
                    }
                    ["set", "local-preference", lp] => {
                        clause.set_local_pref = Some(
                            lp.parse()
                                .map_err(|_| err(lineno, format!("bad local-pref '{lp}'")))?,
                        );
                    }
                    ["set", "ip", "next-hop", nh] => {
                        clause.set_next_hop = Some(
                            nh.parse()
                                .map_err(|_| err(lineno, format!("bad next-hop '{nh}'")))?,
                        );
                    }
                    _ => warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim())),
                }
            }
            Ctx::Acl(name) => {
                let action = match tokens[0] {
                    "permit" => true,
                    "deny" => false,
                    _ => {
                        warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim()));
                        continue;
                    }
                };
                if tokens.get(1) != Some(&"ip") {
                    warnings.push(format!("line {lineno}: unrecognized '{}'", raw.trim()));
                    continue;
                }
                let (src, consumed) =
                    parse_acl_match(&tokens[2..]).map_err(|m| err(lineno, m))?;
                let (dst, _) =
                    parse_acl_match(&tokens[2 + consumed..]).map_err(|m| err(lineno, m))?;
                model
                    .acls
                    .get_mut(name)
                    .expect("acl context")
                    .rules
                    .push(AclRule {
                        permit: action,
                        src,
                        dst,
                    });
            }
        }
    }

    let dangling = model.dangling_references();
    Ok(ParseOutcome {
        model,
        warnings,
        dangling,
    })
}

fn parse_prefix_list_entry(
    seq: &str,
    action: &str,
    rest: &[&str],
) -> Result<PrefixListEntry, String> {
    let permit = match action {
        "permit" => true,
        "deny" => false,
        _ => return Err(format!("unknown prefix-list action '{action}'")),
    };
    let seq: u32 = seq.parse().map_err(|_| format!("bad seq '{seq}'"))?;
    let prefix: Prefix = rest
        .first()
        .ok_or("missing prefix")?
        .parse()
        .map_err(|_| "bad prefix".to_string())?;
    let mut ge = None;
    let mut le = None;
    let mut i = 1;
    while i < rest.len() {
        match rest[i] {
            "ge" => {
                ge = Some(
                    rest.get(i + 1)
                        .ok_or("ge without value")?
                        .parse()
                        .map_err(|_| "bad ge".to_string())?,
                );
                i += 2;
            }
            "le" => {
                le = Some(
                    rest.get(i + 1)
                        .ok_or("le without value")?
                        .parse()
                        .map_err(|_| "bad le".to_string())?,
                );
                i += 2;
            }
            other => return Err(format!("unexpected token '{other}'")),
        }
    }
    Ok(PrefixListEntry {
        seq,
        permit,
        prefix,
        ge,
        le,
    })
}

fn parse_acl_match(tokens: &[&str]) -> Result<(AclMatch, usize), String> {
    match tokens {
        ["any", ..] => Ok((AclMatch::Any, 1)),
        ["host", addr, ..] => Ok((
            AclMatch::Host(addr.parse().map_err(|_| format!("bad host '{addr}'"))?),
            2,
        )),
        [addr, wildcard, ..] => {
            let addr: Ipv4Addr = addr.parse().map_err(|_| format!("bad address '{addr}'"))?;
            let wildcard: Ipv4Addr = wildcard
                .parse()
                .map_err(|_| format!("bad wildcard '{wildcard}'"))?;
            let len = mask_to_len(Ipv4Addr::from(!u32::from(wildcard)))
                .ok_or_else(|| format!("non-contiguous wildcard '{wildcard}'"))?;
            Ok((AclMatch::Net(Prefix::new(addr, len)), 2))
        }
        _ => Err("truncated ACL rule".to_string()),
    }
}

fn parse_net_mask(addr: &str, mask: &str) -> Result<Prefix, String> {
    let addr: Ipv4Addr = addr.parse().map_err(|_| format!("bad address '{addr}'"))?;
    let mask: Ipv4Addr = mask.parse().map_err(|_| format!("bad mask '{mask}'"))?;
    let len = mask_to_len(mask).ok_or_else(|| format!("bad netmask '{mask}'"))?;
    Ok(Prefix::new(addr, len))
}

/// Parses every router file in a configuration set.
pub fn parse_config_set(
    configs: &ConfigSet,
) -> BTreeMap<String, Result<ParseOutcome, ParseError>> {
    configs
        .iter()
        .map(|(router, text)| (router.clone(), parse_config(router, text)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::render::render_model;
    use super::super::*;
    use super::*;

    fn sample_model() -> DeviceModel {
        let mut m = DeviceModel::new("r1");
        m.interfaces.push(Interface::new(
            "Loopback0",
            Ipv4Addr::new(172, 20, 0, 1),
            32,
        ));
        let mut e0 = Interface::new("Ethernet0", Ipv4Addr::new(10, 0, 0, 0), 31);
        e0.ospf_cost = Some(65535);
        e0.acl_in = Some("ACL-IN-E0".into());
        m.interfaces.push(e0);
        m.ospf = Some(OspfConfig {
            process_id: 1,
            router_id: Ipv4Addr::new(172, 20, 0, 1),
            networks: vec![OspfNetwork {
                addr: Ipv4Addr::new(10, 0, 0, 0),
                wildcard: Ipv4Addr::new(0, 0, 0, 0),
                area: 0,
            }],
            passive: ["Ethernet1".to_string()].into_iter().collect(),
            redistribute_bgp: Some(65001),
        });
        m.bgp = Some(BgpConfig {
            asn: 65001,
            router_id: Ipv4Addr::new(172, 20, 0, 1),
            cluster_id: Some(Ipv4Addr::new(172, 20, 0, 1)),
            networks: vec!["100.64.0.0/24".parse().unwrap()],
            neighbors: vec![{
                let mut n = Neighbor::new(Ipv4Addr::new(172, 20, 0, 2), 65001);
                n.update_source_loopback = true;
                n.rr_client = true;
                n.next_hop_self = true;
                n.route_map_in = Some("RM-IN".into());
                n
            }],
        });
        m.route_maps.insert(
            "RM-IN".into(),
            RouteMap {
                clauses: vec![RouteMapClause {
                    seq: 10,
                    permit: true,
                    match_prefix_list: Some("PL-X".into()),
                    set_local_pref: Some(150),
                    set_next_hop: None,
                }],
            },
        );
        m.prefix_lists.insert(
            "PL-X".into(),
            PrefixList {
                entries: vec![PrefixListEntry {
                    seq: 5,
                    permit: true,
                    prefix: "100.64.0.0/24".parse().unwrap(),
                    ge: None,
                    le: None,
                }],
            },
        );
        m.acls.insert(
            "ACL-IN-E0".into(),
            Acl {
                rules: vec![AclRule {
                    permit: true,
                    src: AclMatch::Any,
                    dst: AclMatch::Any,
                }],
            },
        );
        m.statics.push(StaticRoute {
            prefix: "198.18.0.0/24".parse().unwrap(),
            next_hop: StaticNextHop::Null0,
        });
        m
    }

    #[test]
    fn round_trip_preserves_model() {
        let m = sample_model();
        let text = render_model(&m);
        let parsed = parse_config("r1", &text).unwrap();
        assert_eq!(parsed.model, m);
        assert!(parsed.warnings.is_empty());
        assert!(parsed.dangling.is_empty());
    }

    #[test]
    fn unknown_line_is_tolerated_with_warning() {
        let m = sample_model();
        let mut text = render_model(&m);
        text.push_str("banner motd hello\n");
        let parsed = parse_config("r1", &text).unwrap();
        assert_eq!(parsed.model, m);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn dangling_route_map_recorded() {
        let mut m = sample_model();
        m.route_maps.clear();
        let text = render_model(&m);
        let parsed = parse_config("r1", &text).unwrap();
        assert!(parsed
            .dangling
            .iter()
            .any(|d| d.contains("route-map RM-IN")));
    }

    #[test]
    fn orphan_continuation_line_is_an_error() {
        let text = " ip address 10.0.0.1 255.255.255.0\nhostname r1\n";
        let e = parse_config("r1", text).unwrap_err();
        assert_eq!(e.line, 1);
    }
}
