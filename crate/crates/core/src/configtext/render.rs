//! Deterministic rendering of device models to IOS-style text.
//!
//! Stanza order is fixed: hostname, interfaces, OSPF process, IS-IS process,
//! BGP process, prefix-lists, route-maps, static routes, access-lists.
//! The renderer emits model vectors in their stored order, so a minimal model
//! perturbation yields a minimal textual perturbation.

use super::{AclMatch, ConfigSet, DeviceModel, StaticNextHop};
use std::collections::BTreeMap;
use std::fmt::Write;

/// Renders one device model to configuration text.
pub fn render_model(model: &DeviceModel) -> String {
    let mut out = String::new();
    let w = &mut out;

    line(w, 0, &format!("hostname {}", model.hostname));
    bang(w);

    for iface in &model.interfaces {
        line(w, 0, &format!("interface {}", iface.name));
        line(
            w,
            1,
            &format!(
                "ip address {} {}",
                iface.address,
                iface.subnet().netmask()
            ),
        );
        if let Some(cost) = iface.ospf_cost {
            line(w, 1, &format!("ip ospf cost {cost}"));
        }
        if iface.isis_enabled {
            if let Some(isis) = &model.isis {
                line(w, 1, &format!("ip router isis {}", isis.tag));
            }
        }
        if let Some(acl) = &iface.acl_in {
            line(w, 1, &format!("ip access-group {acl} in"));
        }
        if let Some(acl) = &iface.acl_out {
            line(w, 1, &format!("ip access-group {acl} out"));
        }
        bang(w);
    }

    if let Some(ospf) = &model.ospf {
        line(w, 0, &format!("router ospf {}", ospf.process_id));
        line(w, 1, &format!("router-id {}", ospf.router_id));
        if let Some(asn) = ospf.redistribute_bgp {
            line(w, 1, &format!("redistribute bgp {asn} metric 20 subnets"));
        }
        for p in &ospf.passive {
            line(w, 1, &format!("passive-interface {p}"));
        }
        for n in &ospf.networks {
            line(
                w,
                1,
                &format!("network {} {} area {}", n.addr, n.wildcard, n.area),
            );
        }
        bang(w);
    }

    if let Some(isis) = &model.isis {
        line(w, 0, &format!("router isis {}", isis.tag));
        line(w, 1, &format!("net {}", isis.net));
        match isis.level {
            super::IsisLevel::Level1 => line(w, 1, "is-type level-1"),
            super::IsisLevel::Level2 => line(w, 1, "is-type level-2-only"),
            super::IsisLevel::Level1And2 => {}
        }
        for p in &isis.passive {
            line(w, 1, &format!("passive-interface {p}"));
        }
        bang(w);
    }

    if let Some(bgp) = &model.bgp {
        line(w, 0, &format!("router bgp {}", bgp.asn));
        line(w, 1, &format!("bgp router-id {}", bgp.router_id));
        if let Some(cid) = bgp.cluster_id {
            line(w, 1, &format!("bgp cluster-id {cid}"));
        }
        for n in &bgp.networks {
            line(w, 1, &format!("network {} mask {}", n.network(), n.netmask()));
        }
        for nbr in &bgp.neighbors {
            let a = nbr.address;
            line(w, 1, &format!("neighbor {a} remote-as {}", nbr.remote_as));
            if nbr.update_source_loopback {
                line(w, 1, &format!("neighbor {a} update-source Loopback0"));
            }
            if nbr.rr_client {
                line(w, 1, &format!("neighbor {a} route-reflector-client"));
            }
            if nbr.next_hop_self {
                line(w, 1, &format!("neighbor {a} next-hop-self"));
            }
            if let Some(rm) = &nbr.route_map_in {
                line(w, 1, &format!("neighbor {a} route-map {rm} in"));
            }
            if let Some(rm) = &nbr.route_map_out {
                line(w, 1, &format!("neighbor {a} route-map {rm} out"));
            }
            if nbr.shutdown {
                line(w, 1, &format!("neighbor {a} shutdown"));
            }
        }
        bang(w);
    }

    for (name, pl) in &model.prefix_lists {
        for e in &pl.entries {
            let action = if e.permit { "permit" } else { "deny" };
            let mut s = format!("ip prefix-list {name} seq {} {action} {}", e.seq, e.prefix);
            if let Some(ge) = e.ge {
                write!(s, " ge {ge}").unwrap();
            }
            if let Some(le) = e.le {
                write!(s, " le {le}").unwrap();
            }
            line(w, 0, &s);
        }
        bang(w);
    }

    for (name, map) in &model.route_maps {
        for clause in &map.clauses {
            let action = if clause.permit { "permit" } else { "deny" };
            line(w, 0, &format!("route-map {name} {action} {}", clause.seq));
            if let Some(pl) = &clause.match_prefix_list {
                line(w, 1, &format!("match ip address prefix-list {pl}"));
            }
            if let Some(lp) = clause.set_local_pref {
                line(w, 1, &format!("set local-preference {lp}"));
            }
            if let Some(nh) = clause.set_next_hop {
                line(w, 1, &format!("set ip next-hop {nh}"));
            }
        }
        bang(w);
    }

    for st in &model.statics {
        let via = match st.next_hop {
            StaticNextHop::Address(a) => a.to_string(),
            StaticNextHop::Null0 => "Null0".to_string(),
        };
        line(
            w,
            0,
            &format!("ip route {} {} {via}", st.prefix.network(), st.prefix.netmask()),
        );
    }
    if !model.statics.is_empty() {
        bang(w);
    }

    for (name, acl) in &model.acls {
        line(w, 0, &format!("ip access-list extended {name}"));
        for rule in &acl.rules {
            let action = if rule.permit { "permit" } else { "deny" };
            line(
                w,
                1,
                &format!("{action} ip {} {}", acl_match(&rule.src), acl_match(&rule.dst)),
            );
        }
        bang(w);
    }

    line(w, 0, "end");
    out
}

fn acl_match(m: &AclMatch) -> String {
    match m {
        AclMatch::Any => "any".to_string(),
        AclMatch::Host(h) => format!("host {h}"),
        AclMatch::Net(p) => format!("{} {}", p.network(), p.wildcard()),
    }
}

fn line(out: &mut String, indent: usize, text: &str) {
    for _ in 0..indent {
        out.push(' ');
    }
    out.push_str(text);
    out.push('\n');
}

fn bang(out: &mut String) {
    out.push_str("!\n");
}

/// Renders a whole set of device models.
pub fn render_config_set(models: &BTreeMap<String, DeviceModel>) -> ConfigSet {
    models
        .iter()
        .map(|(name, m)| (name.clone(), render_model(m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use std::net::Ipv4Addr;

    #[test]
    fn minimal_model_renders_single_loopback_stanza() {
        let mut m = DeviceModel::new("r1");
        m.interfaces.push(Interface::new(
            "Loopback0",
            Ipv4Addr::new(172, 20, 0, 1),
            32,
        ));
        let text = render_model(&m);
        let loopbacks: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("interface Loopback0"))
            .collect();
        assert_eq!(loopbacks.len(), 1);
        assert!(text.contains(" ip address 172.20.0.1 255.255.255.255"));
        assert!(text.starts_with("hostname r1\n"));
        assert!(text.ends_with("end\n"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut m = DeviceModel::new("r2");
        m.interfaces
            .push(Interface::new("Ethernet0", Ipv4Addr::new(10, 0, 0, 0), 31));
        m.statics.push(StaticRoute {
            prefix: "198.18.0.0/24".parse().unwrap(),
            next_hop: StaticNextHop::Null0,
        });
        assert_eq!(render_model(&m), render_model(&m));
        assert!(render_model(&m).contains("ip route 198.18.0.0 255.255.255.0 Null0"));
    }
}
