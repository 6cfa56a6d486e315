use std::time::Instant;

use deptex_core::demo;
use deptex_core::graph::{AssetNode, CompNode, Edge, EdgeKind, NodeId, OrgGraph, OrgNode, Scope, SignalNode, UnitNode};
use deptex_core::reachability::{depscore, EpdParams, RuleBasedVerifier};
use deptex_core::risk::{contrib, leaderboard_csv, AggMode, ContribInputs, EpdIndex, RiskError, RiskView};
use proptest::prelude::*;

fn neutral() -> ContribInputs {
    ContribInputs {
        sev: 10.0,
        conf: 1.0,
        direct: true,
        scope: Scope::Runtime,
        exposure: 1.0,
        critical: false,
        ownership_gap: false,
        tier_importance: 1.0,
        epd: None,
    }
}

#[test]
fn contrib_examples() {
    assert_eq!(contrib(&neutral()).unwrap(), 1.0);
    let zero = ContribInputs {
        sev: 0.0,
        critical: true,
        ownership_gap: true,
        tier_importance: 7.0,
        ..neutral()
    };
    assert_eq!(contrib(&zero).unwrap(), 0.0);

    let epd = 0.1 * 0.85f64.powi(6);
    let gateway = ContribInputs {
        sev: 9.8,
        epd: Some(epd),
        tier_importance: 3.0,
        critical: true,
        ..neutral()
    };
    let got = contrib(&gateway).unwrap();
    assert!((got - 0.98 * 3.0 * epd * 1.25).abs() < 1e-12);
    assert!((got - 0.1386).abs() < 5e-5, "{got}");

    let bad = ContribInputs { conf: 1.5, ..neutral() };
    assert!(matches!(contrib(&bad), Err(RiskError::RangeViolation(_))));
    let bad = ContribInputs {
        tier_importance: 0.0,
        ..neutral()
    };
    assert!(matches!(contrib(&bad), Err(RiskError::RangeViolation(_))));
}

fn arb_inputs() -> impl Strategy<Value = ContribInputs> {
    (
        0.0f64..=10.0,
        0.0f64..=1.0,
        any::<bool>(),
        prop::sample::select(vec![Scope::Runtime, Scope::Dev, Scope::Test]),
        0.0f64..=1.0,
        any::<bool>(),
        any::<bool>(),
        0.01f64..10.0,
        prop::option::of(0.0f64..=1.0),
    )
        .prop_map(
            |(sev, conf, direct, scope, exposure, critical, ownership_gap, tier_importance, epd)| ContribInputs {
                sev,
                conf,
                direct,
                scope,
                exposure,
                critical,
                ownership_gap,
                tier_importance,
                epd,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn contrib_is_monotone_under_single_perturbations(base in arb_inputs(), u in 0.0f64..=1.0) {
        let c0 = contrib(&base).unwrap();
        prop_assert!(c0 >= 0.0);
        let up = |x: f64, hi: f64| x + (hi - x) * u;
        let raised = [
            ContribInputs { sev: up(base.sev, 10.0), ..base },
            ContribInputs { conf: up(base.conf, 1.0), ..base },
            ContribInputs { exposure: up(base.exposure, 1.0), ..base },
            ContribInputs { epd: base.epd.map(|e| up(e, 1.0)), ..base },
            ContribInputs { tier_importance: base.tier_importance * (1.0 + u), ..base },
            ContribInputs { critical: true, ..base },
            ContribInputs { ownership_gap: true, ..base },
            ContribInputs { direct: true, ..base },
            ContribInputs { scope: Scope::Runtime, ..base },
        ];
        for r in &raised {
            prop_assert!(contrib(r).unwrap() >= c0, "{:?} lowered contrib below {}", r, c0);
        }
        let transitive = ContribInputs { direct: false, ..base };
        prop_assert!(contrib(&transitive).unwrap() <= c0);
    }
}

struct Fixture {
    g: OrgGraph,
    org: NodeId,
}

impl Fixture {
    fn new() -> Self {
        let mut g = OrgGraph::new();
        let org = g.add_node(OrgNode::new("org-1", "Org").into()).unwrap();
        Fixture { g, org }
    }

    fn unit(&mut self, id: &str) -> NodeId {
        let u = self.g.add_node(UnitNode::new(id, id).into()).unwrap();
        self.g
            .add_edge(Edge::new(self.org.clone(), u.clone(), EdgeKind::Contains))
            .unwrap();
        u
    }

    fn asset(&mut self, unit: &NodeId, id: &str, exposure: f64) -> NodeId {
        let a = self
            .g
            .add_node(AssetNode::new(id, id).with_exposure(exposure).into())
            .unwrap();
        self.g
            .add_edge(Edge::new(unit.clone(), a.clone(), EdgeKind::Owns))
            .unwrap();
        a
    }

    /// A signal of `severity` affecting a fresh component used directly by
    /// every asset in `assets`.
    fn signal(&mut self, id: &str, severity: f64, assets: &[&NodeId]) -> NodeId {
        let comp = self
            .g
            .add_node(CompNode::from_purl(&format!("pkg:npm/{id}@1.0.0")).into())
            .unwrap();
        for a in assets {
            self.g
                .add_edge(Edge::depends_on((*a).clone(), comp.clone(), true, Scope::Runtime, 1))
                .unwrap();
        }
        let s = self
            .g
            .add_node(SignalNode::new(id, &format!("EXT-{id}"), severity).into())
            .unwrap();
        self.g.add_edge(Edge::new(s.clone(), comp, EdgeKind::Affects)).unwrap();
        s
    }
}

#[test]
fn unit_and_org_examples() {
    let mut f = Fixture::new();
    let u1 = f.unit("unit-1");
    let u2 = f.unit("unit-2");
    let a = f.asset(&u1, "asset-a", 0.2);
    let b = f.asset(&u1, "asset-b", 0.5);
    f.asset(&u2, "asset-c", 1.0);
    let s = f.signal("signal-1", 10.0, &[&a, &b]);
    let v = RiskView::new(&f.g);

    assert_eq!(v.unit_risk(&s, &u2, AggMode::Sum).unwrap(), 0.0);
    assert_eq!(v.unit_risk(&s, &u1, AggMode::Max).unwrap(), 0.5);
    assert!((v.unit_risk(&s, &u1, AggMode::Sum).unwrap() - 0.7).abs() < 1e-12);
    // unit means are 0.35 and 0.0
    assert!((v.org_risk(&s, AggMode::Mean).unwrap() - 0.175).abs() < 1e-12);
    assert!(v.unit_risk(&s, &NodeId::from("unit-missing"), AggMode::Sum).is_err());

    let mut single = Fixture::new();
    let u = single.unit("unit-only");
    let x = single.asset(&u, "asset-x", 0.4);
    let s = single.signal("signal-x", 10.0, &[&x]);
    let v = RiskView::new(&single.g);
    for mode in [AggMode::Sum, AggMode::Max, AggMode::Mean] {
        assert_eq!(v.org_risk(&s, mode).unwrap(), v.unit_risk(&s, &u, mode).unwrap());
    }

    let mut two = Fixture::new();
    let busy = two.unit("unit-busy");
    two.unit("unit-idle");
    let y = two.asset(&busy, "asset-y", 0.4);
    let s = two.signal("signal-y", 10.0, &[&y]);
    let mean = RiskView::new(&two.g).org_risk(&s, AggMode::Mean).unwrap();
    assert!((mean - 0.2).abs() < 1e-12, "{mean}");
}

#[test]
fn leaderboard_examples() {
    let mut f = Fixture::new();
    let u = f.unit("unit-1");
    let hot = f.asset(&u, "asset-hot", 0.9);
    let cold = f.asset(&u, "asset-cold", 0.1);
    f.signal("signal-low", 10.0, &[&cold]);
    f.signal("signal-high", 10.0, &[&hot]);
    let rows = RiskView::new(&f.g).leaderboard(&f.org, AggMode::Sum).unwrap();
    let order: Vec<&str> = rows.iter().map(|r| r.signal.as_str()).collect();
    assert_eq!(order, ["signal-high", "signal-low"]);

    let mut f = Fixture::new();
    let u = f.unit("unit-1");
    let a = f.asset(&u, "asset-a", 1.0);
    let s = f.signal("signal-sanitized", 9.0, &[&a]);
    let v = RiskView::new(&f.g).with_epd(EpdIndex::from([((s.clone(), a.clone()), 0.0)]));
    let rows = v.leaderboard(&f.org, AggMode::Sum).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].org_risk, 0.0);
    let csv = leaderboard_csv(&rows);
    assert!(csv.starts_with("external_id,org_risk,asset_count,unit_count,gap_count\n"));
    assert!(csv.contains("EXT-signal-sanitized,0,1,1,0"));
}

#[test]
fn exact_tie_breaks_on_asset_count() {
    let mut f = Fixture::new();
    let u = f.unit("unit-1");
    let a: Vec<NodeId> = (0..3).map(|i| f.asset(&u, &format!("asset-{i}"), 0.5)).collect();
    f.signal("signal-a", 10.0, &[&a[0]]);
    let wide = f.signal("signal-b", 10.0, &[&a[0], &a[1], &a[2]]);
    let rows = RiskView::new(&f.g).leaderboard(&f.org, AggMode::Max).unwrap();
    assert_eq!(rows[0].org_risk, rows[1].org_risk);
    assert_eq!(rows[0].signal, wide);
    assert_eq!((rows[0].asset_count, rows[1].asset_count), (3, 1));
}

#[test]
fn tier_override_is_hypothetical() {
    let r = demo::routing();
    let v = RiskView::new(&r.graph);
    let before = v.asset_contrib(&r.signal, &r.dashboard).unwrap();
    let promoted = RiskView::new(&r.graph)
        .with_tier_override(r.dashboard.clone(), "tier-1")
        .unwrap();
    let after = promoted.asset_contrib(&r.signal, &r.dashboard).unwrap();
    assert!((after / before - 3.0 / 0.5).abs() < 1e-9);
    assert_eq!(r.graph.asset(&r.dashboard).unwrap().tier, "tier-3");
    assert!(RiskView::new(&r.graph)
        .with_tier_override(r.dashboard.clone(), "tier-9")
        .is_err());
}

#[test]
fn triage_scenario_downgrades_batch_assets() {
    let started = Instant::now();
    let t = demo::triage();
    let signal = t.graph.signal(&t.signal).unwrap().clone();
    let params = EpdParams::default();
    let mut epd = EpdIndex::new();
    for slice in &t.slices {
        let r = depscore(&signal, slice, &params, &RuleBasedVerifier).unwrap();
        let public = t.public_assets.contains(&slice.asset_ref);
        assert_eq!(r.depscore, if public { 98 } else { 4 }, "{}", slice.asset_ref);
        assert!(r.depscore <= 5 || public);
        epd.insert((t.signal.clone(), slice.asset_ref.clone()), r.epd);
    }
    let v = RiskView::new(&t.graph).with_epd(epd);
    let ranking = v.asset_ranking(&t.signal).unwrap();
    assert_eq!(ranking.len(), 10);
    let top: Vec<&NodeId> = ranking[..2].iter().map(|(a, _)| a).collect();
    for a in &t.public_assets {
        assert!(top.contains(&a));
    }
    assert!(ranking[1].1 > 10.0 * ranking[2].1);
    let units = v.unit_leaderboard(&t.signal, AggMode::Sum).unwrap();
    assert_eq!(units[0].0, t.storefront);
    assert!(started.elapsed().as_secs_f64() < 5.0);
}
