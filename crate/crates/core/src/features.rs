//! Configuration feature flags and their prerequisite closure.
//!
//! Features define the attack surface a plan must expose. Each fault kind
//! names the features it requires; `resolve_dependencies` closes a requested
//! set under the prerequisite relation so that, for example, requesting route
//! reflection pulls in iBGP, eBGP, an IGP, and network statements.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
#[error("unknown feature flag '{0}'")]
pub struct UnknownFeature(pub String);

/// A configuration feature the plan builder can enable.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Feature {
    Ebgp,
    Ibgp,
    RouteReflection,
    Ospf,
    OspfMultiArea,
    Isis,
    IsisMultiLevel,
    StaticRoutes,
    RedistributionBgpOspf,
    AclIn,
    AclOut,
    RouteMaps,
    PrefixLists,
    LocalPrefPolicy,
    CommunityFreeExport,
    NextHopSelf,
    NetworkStatements,
}

pub const ALL_FEATURES: [Feature; 17] = [
    Feature::Ebgp,
    Feature::Ibgp,
    Feature::RouteReflection,
    Feature::Ospf,
    Feature::OspfMultiArea,
    Feature::Isis,
    Feature::IsisMultiLevel,
    Feature::StaticRoutes,
    Feature::RedistributionBgpOspf,
    Feature::AclIn,
    Feature::AclOut,
    Feature::RouteMaps,
    Feature::PrefixLists,
    Feature::LocalPrefPolicy,
    Feature::CommunityFreeExport,
    Feature::NextHopSelf,
    Feature::NetworkStatements,
];

impl Feature {
    pub fn as_str(&self) -> &'static str {
        match self {
            Feature::Ebgp => "ebgp",
            Feature::Ibgp => "ibgp",
            Feature::RouteReflection => "route-reflection",
            Feature::Ospf => "ospf",
            Feature::OspfMultiArea => "ospf-multi-area",
            Feature::Isis => "isis",
            Feature::IsisMultiLevel => "isis-multi-level",
            Feature::StaticRoutes => "static-routes",
            Feature::RedistributionBgpOspf => "redistribution-bgp-ospf",
            Feature::AclIn => "acl-in",
            Feature::AclOut => "acl-out",
            Feature::RouteMaps => "route-maps",
            Feature::PrefixLists => "prefix-lists",
            Feature::LocalPrefPolicy => "local-pref-policy",
            Feature::CommunityFreeExport => "community-free-export",
            Feature::NextHopSelf => "next-hop-self",
            Feature::NetworkStatements => "network-statements",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_FEATURES
            .iter()
            .find(|f| f.as_str() == s)
            .copied()
            .ok_or_else(|| UnknownFeature(s.to_string()))
    }
}

/// Direct prerequisites of each feature. Baseline connectivity (an IGP plus
/// network statements) and the "two IGPs need two ASes" rule are handled in
/// [`resolve_dependencies`] on top of this table.
pub const DEPENDENCIES: &[(Feature, &[Feature])] = &[
    (Feature::Ebgp, &[Feature::Ibgp, Feature::NetworkStatements]),
    (Feature::Ibgp, &[Feature::Ebgp]),
    (Feature::RouteReflection, &[Feature::Ibgp]),
    (Feature::OspfMultiArea, &[Feature::Ospf]),
    (Feature::IsisMultiLevel, &[Feature::Isis]),
    (Feature::StaticRoutes, &[Feature::Ebgp]),
    (
        Feature::RedistributionBgpOspf,
        &[Feature::Ebgp, Feature::Ospf],
    ),
    (Feature::RouteMaps, &[Feature::Ebgp]),
    (Feature::PrefixLists, &[Feature::RouteMaps]),
    (Feature::LocalPrefPolicy, &[Feature::RouteMaps]),
    (
        Feature::CommunityFreeExport,
        &[Feature::RouteMaps, Feature::PrefixLists],
    ),
    (Feature::NextHopSelf, &[Feature::Ibgp]),
];

/// An unordered set of feature flags.
pub type FeatureSet = BTreeSet<Feature>;

/// Parses a list of feature names into a set.
pub fn parse_features<'a, I: IntoIterator<Item = &'a str>>(
    names: I,
) -> Result<FeatureSet, UnknownFeature> {
    names.into_iter().map(Feature::from_str).collect()
}

/// Returns the minimal dependency-closed superset of `requested`.
///
/// Closure rules, applied to fixpoint:
/// - the direct prerequisites in [`DEPENDENCIES`];
/// - network statements are always on (baseline prefix origination);
/// - if no IGP is present after closure, OSPF is added (baseline
///   connectivity);
/// - if both OSPF and IS-IS are present, eBGP is added, since covering both
///   IGPs requires at least two ASes.
pub fn resolve_dependencies(requested: &FeatureSet) -> FeatureSet {
    let mut set = requested.clone();
    set.insert(Feature::NetworkStatements);
    loop {
        let before = set.len();
        for (feature, deps) in DEPENDENCIES {
            if set.contains(feature) {
                set.extend(deps.iter().copied());
            }
        }
        if set.contains(&Feature::Ospf) && set.contains(&Feature::Isis) {
            set.insert(Feature::Ebgp);
        }
        if set.len() == before {
            break;
        }
    }
    if !set.contains(&Feature::Ospf) && !set.contains(&Feature::Isis) {
        set.insert(Feature::Ospf);
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> FeatureSet {
        parse_features(names.iter().copied()).unwrap()
    }

    /// Oracle: iterate the public dependency table to fixpoint, then apply
    /// the baseline rules, independently of the implementation's loop shape.
    fn closure_oracle(requested: &FeatureSet) -> FeatureSet {
        let mut out = requested.clone();
        out.insert(Feature::NetworkStatements);
        let mut changed = true;
        while changed {
            changed = false;
            let snapshot: Vec<Feature> = out.iter().copied().collect();
            for f in snapshot {
                for (feature, deps) in DEPENDENCIES {
                    if *feature == f {
                        for d in *deps {
                            changed |= out.insert(*d);
                        }
                    }
                }
            }
            if out.contains(&Feature::Ospf) && out.contains(&Feature::Isis) {
                changed |= out.insert(Feature::Ebgp);
            }
        }
        if !out.contains(&Feature::Ospf) && !out.contains(&Feature::Isis) {
            out.insert(Feature::Ospf);
        }
        out
    }

    #[test]
    fn route_reflection_closure() {
        let closed = resolve_dependencies(&set(&["route-reflection"]));
        assert_eq!(
            closed,
            set(&[
                "route-reflection",
                "ibgp",
                "ospf",
                "ebgp",
                "network-statements"
            ])
        );
        assert_eq!(closed, closure_oracle(&set(&["route-reflection"])));
    }

    #[test]
    fn empty_set_gets_baseline() {
        let closed = resolve_dependencies(&FeatureSet::new());
        assert_eq!(closed, set(&["ospf", "network-statements"]));
    }

    #[test]
    fn acl_in_closure() {
        let closed = resolve_dependencies(&set(&["acl-in"]));
        assert_eq!(closed, set(&["acl-in", "ospf", "network-statements"]));
        assert_eq!(closed, closure_oracle(&set(&["acl-in"])));
    }

    #[test]
    fn isis_does_not_pull_in_ospf() {
        let closed = resolve_dependencies(&set(&["isis"]));
        assert_eq!(closed, set(&["isis", "network-statements"]));
    }

    #[test]
    fn both_igps_force_ebgp() {
        let closed = resolve_dependencies(&set(&["ospf", "isis"]));
        assert!(closed.contains(&Feature::Ebgp));
        assert!(closed.contains(&Feature::Ibgp));
    }

    #[test]
    fn closure_is_idempotent_and_matches_oracle_for_singletons() {
        for f in ALL_FEATURES {
            let single: FeatureSet = [f].into_iter().collect();
            let once = resolve_dependencies(&single);
            let twice = resolve_dependencies(&once);
            assert_eq!(once, twice, "not idempotent for {f}");
            assert_eq!(once, closure_oracle(&single), "oracle mismatch for {f}");
        }
    }

    #[test]
    fn unknown_feature_is_an_error() {
        assert!(parse_features(["nonsense"]).is_err());
    }
}
