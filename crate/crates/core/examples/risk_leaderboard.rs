//! Aggregates per-asset risk into unit and org scores, prints the signal
//! leaderboard and previews a tier change without applying it.

use deptex_core::demo;
use deptex_core::reachability::{depscore, EpdParams, RuleBasedVerifier};
use deptex_core::risk::{leaderboard_csv, leaderboard_json, AggMode, EpdIndex, RiskView};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::triage();
    let g = &scenario.graph;
    let signal = g.signal(&scenario.signal)?;

    let mut epd = EpdIndex::new();
    for slice in &scenario.slices {
        let r = depscore(signal, slice, &EpdParams::default(), &RuleBasedVerifier)?;
        epd.insert((scenario.signal.clone(), slice.asset_ref.clone()), r.epd);
    }

    let without = RiskView::new(g);
    let with = RiskView::new(g).with_epd(epd);
    println!("unit ranking, static exposure vs. reachability:");
    let before = without.unit_leaderboard(&scenario.signal, AggMode::Sum)?;
    let after = with.unit_leaderboard(&scenario.signal, AggMode::Sum)?;
    for ((u1, r1), (u2, r2)) in before.iter().zip(&after) {
        println!("  {:<16} {:>7.3}    {:<16} {:>7.3}", u1.as_str(), r1, u2.as_str(), r2);
    }

    let rows = with.leaderboard(&scenario.org, AggMode::Sum)?;
    println!("\n{}", leaderboard_json(&rows));
    print!("{}", leaderboard_csv(&rows));

    let preview = with
        .clone()
        .with_tier_override(scenario.public_assets[0].clone(), "default")?
        .leaderboard(&scenario.org, AggMode::Max)?;
    println!(
        "\nmax aggregation with an override: org_risk {:.4}",
        preview[0].org_risk
    );
    Ok(())
}
