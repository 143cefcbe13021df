use super::*;
use crate::configtext::{
    Acl, AclMatch, AclRule, BgpConfig, Interface, Neighbor, OspfConfig, OspfNetwork,
};
use crate::plan::tests::{features, grid8, triangle};
use crate::plan::build_plan;
use crate::topo::load_topology;
use std::net::Ipv4Addr;

fn ospf_router(
    name: &str,
    loopback: Ipv4Addr,
    ifaces: &[(&str, Ipv4Addr, u8)],
) -> DeviceModel {
    let mut m = DeviceModel::new(name);
    m.interfaces.push(Interface::new("Loopback0", loopback, 32));
    let mut networks = vec![OspfNetwork {
        addr: loopback,
        wildcard: Ipv4Addr::UNSPECIFIED,
        area: 0,
    }];
    for (ifname, addr, len) in ifaces {
        m.interfaces.push(Interface::new(*ifname, *addr, *len));
        networks.push(OspfNetwork {
            addr: *addr,
            wildcard: Ipv4Addr::UNSPECIFIED,
            area: 0,
        });
    }
    m.ospf = Some(OspfConfig {
        process_id: 1,
        router_id: loopback,
        networks,
        passive: Default::default(),
        redistribute_bgp: None,
    });
    m
}

fn ip(s: &str) -> Ipv4Addr {
    s.parse().unwrap()
}

fn p(s: &str) -> Prefix {
    s.parse().unwrap()
}

/// The worked four-router example: r1 load-balances toward r2 and r3, r3's
/// egress ACL drops the flow, r4 owns the prefix.
fn diamond_models() -> (BTreeMap<String, DeviceModel>, Topology) {
    let topo = load_topology(
        r#"{"name":"diamond","routers":["r1","r2","r3","r4"],
            "links":[["r1",0,"r2",0],["r1",1,"r3",0],["r2",1,"r4",0],["r3",1,"r4",1]]}"#,
    )
    .unwrap();
    let mut models = BTreeMap::new();
    models.insert(
        "r1".into(),
        ospf_router(
            "r1",
            ip("172.20.0.1"),
            &[
                ("Ethernet0", ip("10.0.0.0"), 31),
                ("Ethernet1", ip("10.0.0.2"), 31),
            ],
        ),
    );
    models.insert(
        "r2".into(),
        ospf_router(
            "r2",
            ip("172.20.0.2"),
            &[
                ("Ethernet0", ip("10.0.0.1"), 31),
                ("Ethernet1", ip("10.0.0.4"), 31),
            ],
        ),
    );
    let mut r3 = ospf_router(
        "r3",
        ip("172.20.0.3"),
        &[
            ("Ethernet0", ip("10.0.0.3"), 31),
            ("Ethernet1", ip("10.0.0.6"), 31),
        ],
    );
    // Egress ACL on the interface toward r4 drops traffic to the prefix.
    r3.interface_mut("Ethernet1").unwrap().acl_out = Some("ACL-OUT".into());
    r3.acls.insert(
        "ACL-OUT".into(),
        Acl {
            rules: vec![
                AclRule {
                    permit: false,
                    src: AclMatch::Any,
                    dst: AclMatch::Net(p("10.1.0.0/24")),
                },
                AclRule {
                    permit: true,
                    src: AclMatch::Any,
                    dst: AclMatch::Any,
                },
            ],
        },
    );
    models.insert("r3".into(), r3);
    let mut r4 = ospf_router(
        "r4",
        ip("172.20.0.4"),
        &[
            ("Ethernet0", ip("10.0.0.5"), 31),
            ("Ethernet1", ip("10.0.0.7"), 31),
        ],
    );
    r4.interfaces.push(Interface::new("Loopback1", ip("10.1.0.1"), 24));
    r4.ospf.as_mut().unwrap().networks.push(OspfNetwork {
        addr: ip("10.1.0.1"),
        wildcard: Ipv4Addr::UNSPECIFIED,
        area: 0,
    });
    models.insert("r4".into(), r4);
    (models, topo)
}

#[test]
fn diamond_matches_expected_five_rows() {
    let (models, topo) = diamond_models();
    let universe: BTreeSet<Prefix> = [p("10.1.0.0/24")].into_iter().collect();
    let table =
        compute_dataplane_in(&models, &topo, Some(&universe), SweepOrder::Forward).unwrap();
    let rows: Vec<String> = table
        .rows()
        .iter()
        .filter(|r| r.prefix == p("10.1.0.0/24"))
        .map(|r| match &r.next_hop {
            Some(h) => format!("{} {} Fwd {}", r.router, r.prefix, h),
            None => format!("{} {} {}", r.router, r.prefix, r.action),
        })
        .collect();
    assert_eq!(
        rows,
        vec![
            "r1 10.1.0.0/24 Fwd r2",
            "r1 10.1.0.0/24 Fwd r3",
            "r2 10.1.0.0/24 Fwd r4",
            "r3 10.1.0.0/24 drop",
            "r4 10.1.0.0/24 accept",
        ]
    );
    // The ACL verdict cache records the deny.
    assert_eq!(
        table.acl_verdicts.get(&("r3".into(), 1, AclDir::Out, p("10.1.0.0/24"))),
        Some(&false)
    );
}

#[test]
fn triangle_prefers_direct_path() {
    let topo = triangle();
    let plan = build_plan(&topo, &features(&[]), 1).unwrap();
    let models = plan.device_models();
    let table = compute_dataplane(&models, &topo).unwrap();
    // a reaches c's loopback directly (cost 1 beats 2 via b).
    let c_loopback = Prefix::host(plan.loopbacks["c"]);
    match table.action("a", &c_loopback) {
        Action::ForwardTo(hops) => {
            assert_eq!(hops.iter().collect::<Vec<_>>(), ["c"]);
        }
        other => panic!("expected forward, got {other:?}"),
    }
}

#[test]
fn transport_reachability_follows_igp() {
    let topo = load_topology(
        r#"{"name":"path3","routers":["a","b","c"],
            "links":[["a",0,"b",0],["b",1,"c",0]]}"#,
    )
    .unwrap();
    let plan = build_plan(&topo, &features(&[]), 1).unwrap();
    let mut models = plan.device_models();
    let c_loopback = plan.loopbacks["c"];
    assert!(reachable_transport(&models, &topo, "a", c_loopback));
    // Direct connected address.
    let b_if = models["b"].interface("Ethernet0").unwrap().address;
    assert!(reachable_transport(&models, &topo, "a", b_if));
    // Breaking OSPF on the middle router severs loopback transport.
    models.get_mut("b").unwrap().ospf.as_mut().unwrap().networks.clear();
    assert!(!reachable_transport(&models, &topo, "a", c_loopback));
}

#[test]
fn ebgp_remote_as_mismatch_blocks_route_exchange() {
    let topo = load_topology(
        r#"{"name":"pair","routers":["a","b"],"links":[["a",0,"b",0]]}"#,
    )
    .unwrap();
    let mk = |name: &str, lo: &str, ifaddr: &str, asn: u32, peer: &str, peer_as: u32| {
        let mut m = DeviceModel::new(name);
        m.interfaces.push(Interface::new("Loopback0", ip(lo), 32));
        m.interfaces.push(Interface::new("Ethernet0", ip(ifaddr), 31));
        m.interfaces.push(Interface::new(
            "Loopback1",
            if asn == 65001 { ip("100.64.1.1") } else { ip("100.64.2.1") },
            24,
        ));
        m.bgp = Some(BgpConfig {
            asn,
            router_id: ip(lo),
            cluster_id: None,
            networks: vec![if asn == 65001 {
                p("100.64.1.0/24")
            } else {
                p("100.64.2.0/24")
            }],
            neighbors: vec![Neighbor::new(ip(peer), peer_as)],
        });
        m
    };
    let good: BTreeMap<String, DeviceModel> = [
        ("a".to_string(), mk("a", "172.20.0.1", "10.0.0.0", 65001, "10.0.0.1", 65002)),
        ("b".to_string(), mk("b", "172.20.0.2", "10.0.0.1", 65002, "10.0.0.0", 65001)),
    ]
    .into_iter()
    .collect();
    let table = compute_dataplane(&good, &topo).unwrap();
    assert_eq!(
        table.action("a", &p("100.64.2.0/24")),
        &Action::ForwardTo(["b".to_string()].into_iter().collect())
    );

    // Same network, wrong remote-as on one side: session down, no routes.
    let mut bad = good.clone();
    bad.get_mut("a").unwrap().bgp.as_mut().unwrap().neighbors[0].remote_as = 64999;
    let table = compute_dataplane(&bad, &topo).unwrap();
    assert_eq!(table.action("a", &p("100.64.2.0/24")), &Action::Drop);
    assert_eq!(table.action("b", &p("100.64.1.0/24")), &Action::Drop);
}

#[test]
fn fixpoint_is_order_independent() {
    let topo = grid8();
    for feats in [
        features(&["route-reflection", "next-hop-self"]),
        features(&["community-free-export", "local-pref-policy"]),
        features(&["isis", "static-routes"]),
    ] {
        let plan = build_plan(&topo, &feats, 11).unwrap();
        let models = plan.device_models();
        let fwd = compute_dataplane_in(&models, &topo, None, SweepOrder::Forward).unwrap();
        let rev = compute_dataplane_in(&models, &topo, None, SweepOrder::Reverse).unwrap();
        assert_eq!(fwd, rev);
    }
}

/// Golden soundness: on a policy-free or permit-all golden network, every
/// universe prefix is accepted at its owner and reachable from every other
/// router (no drops).
#[test]
fn golden_networks_have_full_reachability() {
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("baseline", vec![]),
        ("ebgp", vec!["ebgp"]),
        ("rr+nhs", vec!["route-reflection", "next-hop-self"]),
        ("isis", vec!["isis"]),
        ("isis-multi", vec!["isis-multi-level"]),
        ("ospf-multi", vec!["ospf-multi-area"]),
        ("statics", vec!["static-routes"]),
        ("redist", vec!["redistribution-bgp-ospf"]),
        ("acl", vec!["acl-in", "acl-out"]),
        ("lp", vec!["local-pref-policy"]),
        ("both-igps", vec!["ospf", "isis", "route-reflection"]),
    ];
    let topo = grid8();
    for (tag, names) in cases {
        for seed in [1u64, 2, 3] {
            let plan = build_plan(&topo, &features(&names), seed).unwrap();
            let models = plan.device_models();
            let table = compute_dataplane(&models, &topo).unwrap();
            for ((router, prefix), action) in &table.entries {
                // A non-speaker's loopback is never advertised into BGP, so
                // it stays invisible outside its own AS by design.
                let igp_only_elsewhere = plan.loopbacks.iter().any(|(owner, lo)| {
                    Prefix::host(*lo) == *prefix
                        && !plan.same_as(router, owner)
                        && !plan
                            .as_of(owner)
                            .map_or(false, |a| a.speakers.contains(owner))
                });
                if igp_only_elsewhere {
                    continue;
                }
                assert_ne!(
                    action,
                    &Action::Drop,
                    "[{tag} seed {seed}] {router} drops {prefix}"
                );
            }
        }
    }
}

/// With export policy, loopbacks stay inside their AS while data prefixes
/// cross: isolation by intent, not by accident.
#[test]
fn export_policy_isolates_loopbacks_across_ases() {
    let topo = grid8();
    let plan = build_plan(&topo, &features(&["community-free-export"]), 2).unwrap();
    let models = plan.device_models();
    let table = compute_dataplane(&models, &topo).unwrap();
    let mut saw_cross_as_loopback_drop = false;
    for ((router, prefix), action) in &table.entries {
        let is_loopback = plan
            .loopbacks
            .iter()
            .any(|(_, lo)| Prefix::host(*lo) == *prefix);
        let owner = plan
            .loopbacks
            .iter()
            .find(|(_, lo)| Prefix::host(**lo) == *prefix)
            .map(|(r, _)| r.clone());
        if let (true, Some(owner)) = (is_loopback, owner) {
            if !plan.same_as(router, &owner) {
                assert_eq!(action, &Action::Drop, "{router} should not reach {prefix}");
                saw_cross_as_loopback_drop = true;
            } else {
                assert_ne!(action, &Action::Drop, "{router} must reach {prefix} in-AS");
            }
        } else {
            // Data and static prefixes flow everywhere.
            assert_ne!(action, &Action::Drop, "{router} drops {prefix}");
        }
    }
    assert!(saw_cross_as_loopback_drop);
}

#[test]
fn extreme_cost_diverts_traffic() {
    let topo = triangle();
    let plan = build_plan(&topo, &features(&[]), 1).unwrap();
    let mut models = plan.device_models();
    let c_loopback = Prefix::host(plan.loopbacks["c"]);
    // Find a's interface on the a-c link and make it prohibitively
    // expensive; traffic re-routes through b.
    let ac = topo
        .links
        .iter()
        .find(|l| l.end_on("a").is_some() && l.end_on("c").is_some())
        .unwrap();
    let ifname = format!("Ethernet{}", ac.end_on("a").unwrap().1);
    models
        .get_mut("a")
        .unwrap()
        .interface_mut(&ifname)
        .unwrap()
        .ospf_cost = Some(65535);
    let table = compute_dataplane(&models, &topo).unwrap();
    match table.action("a", &c_loopback) {
        Action::ForwardTo(hops) => assert_eq!(hops.iter().collect::<Vec<_>>(), ["b"]),
        other => panic!("expected forward via b, got {other:?}"),
    }
}

#[test]
fn duplicate_router_id_suppresses_adjacencies() {
    let topo = triangle();
    let plan = build_plan(&topo, &features(&[]), 1).unwrap();
    let mut models = plan.device_models();
    let rid_a = models["a"].ospf.as_ref().unwrap().router_id;
    models.get_mut("b").unwrap().ospf.as_mut().unwrap().router_id = rid_a;
    let table = compute_dataplane(&models, &topo).unwrap();
    // Both colliding routers lose all adjacencies: c cannot reach either
    // loopback, and a/b cannot reach c's.
    let lo = |r: &str| Prefix::host(plan.loopbacks[r]);
    assert_eq!(table.action("c", &lo("a")), &Action::Drop);
    assert_eq!(table.action("c", &lo("b")), &Action::Drop);
    assert_eq!(table.action("a", &lo("c")), &Action::Drop);
}
