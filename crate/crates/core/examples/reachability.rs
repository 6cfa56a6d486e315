//! Scores how directly each asset's code reaches a vulnerable function and
//! turns that into a 0..100 depscore.

use deptex_core::demo;
use deptex_core::reachability::{compute_epd, depscore, EpdParams, RuleBasedVerifier, VerifierVerdict};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = demo::triage();
    let signal = scenario.graph.signal(&scenario.signal)?;
    let params = EpdParams::default();

    println!(
        "{:<18} {:>3} {:>7} {:>9} {:>9}",
        "asset", "d", "w_entry", "epd", "depscore"
    );
    for slice in &scenario.slices {
        let r = depscore(signal, slice, &params, &RuleBasedVerifier)?;
        println!(
            "{:<18} {:>3} {:>7.2} {:>9.6} {:>9}",
            slice.asset_ref.as_str(),
            r.d,
            r.w_entry,
            r.epd,
            r.depscore
        );
    }

    // decay for a fixed entry weight under different alphas
    let verdict = VerifierVerdict {
        w_entry: 1.0,
        is_sanitized: false,
        rationale: String::new(),
    };
    for alpha in [0.5, 0.85, 0.99] {
        let p = EpdParams::with_alpha(alpha)?;
        let row: Vec<String> = (0..=6)
            .map(|d| format!("{:.3}", compute_epd(d, &verdict, &p)))
            .collect();
        println!("alpha {alpha:<4}: {}", row.join(" "));
    }
    Ok(())
}
