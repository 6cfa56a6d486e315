//! CVSS v3.x base score from a vector string.

use std::collections::BTreeMap;

pub fn base_score(vector: &str) -> Result<f64, String> {
    let mut parts = vector.trim().split('/');
    match parts.next() {
        Some("CVSS:3.0") | Some("CVSS:3.1") => {}
        other => return Err(format!("unsupported CVSS prefix {other:?}")),
    }
    let metrics: BTreeMap<&str, &str> = parts
        .map(|p| p.split_once(':').ok_or_else(|| format!("bad metric `{p}`")))
        .collect::<Result<_, _>>()?;
    let get = |k: &str| metrics.get(k).copied().ok_or_else(|| format!("missing metric {k}"));

    let changed = match get("S")? {
        "U" => false,
        "C" => true,
        s => return Err(format!("bad S:{s}")),
    };
    let av = match get("AV")? {
        "N" => 0.85,
        "A" => 0.62,
        "L" => 0.55,
        "P" => 0.2,
        s => return Err(format!("bad AV:{s}")),
    };
    let ac = match get("AC")? {
        "L" => 0.77,
        "H" => 0.44,
        s => return Err(format!("bad AC:{s}")),
    };
    let pr = match (get("PR")?, changed) {
        ("N", _) => 0.85,
        ("L", false) => 0.62,
        ("L", true) => 0.68,
        ("H", false) => 0.27,
        ("H", true) => 0.5,
        (s, _) => return Err(format!("bad PR:{s}")),
    };
    let ui = match get("UI")? {
        "N" => 0.85,
        "R" => 0.62,
        s => return Err(format!("bad UI:{s}")),
    };
    let cia = |k: &str| -> Result<f64, String> {
        match get(k)? {
            "H" => Ok(0.56),
            "L" => Ok(0.22),
            "N" => Ok(0.0),
            s => Err(format!("bad {k}:{s}")),
        }
    };
    let (c, i, a) = (cia("C")?, cia("I")?, cia("A")?);

    let iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);
    let impact = if changed {
        7.52 * (iss - 0.029) - 3.25 * (iss - 0.02).powi(15)
    } else {
        6.42 * iss
    };
    let exploitability = 8.22 * av * ac * pr * ui;
    if impact <= 0.0 {
        return Ok(0.0);
    }
    let raw = if changed {
        (1.08 * (impact + exploitability)).min(10.0)
    } else {
        (impact + exploitability).min(10.0)
    };
    Ok(round_up(raw))
}

/// Smallest one-decimal number >= `x`, robust to float noise.
fn round_up(x: f64) -> f64 {
    let scaled = (x * 100_000.0).round() as i64;
    if scaled % 10_000 == 0 {
        scaled as f64 / 100_000.0
    } else {
        ((scaled / 10_000) + 1) as f64 / 10.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference scores from the FIRST CVSS v3.1 calculator.
    #[test]
    fn known_vectors() {
        assert_eq!(base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H").unwrap(), 9.8);
        assert_eq!(
            base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H").unwrap(),
            10.0
        );
        assert_eq!(base_score("CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N").unwrap(), 6.1);
        assert_eq!(base_score("CVSS:3.1/AV:L/AC:L/PR:L/UI:N/S:U/C:H/I:N/A:N").unwrap(), 5.5);
        assert_eq!(base_score("CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:N").unwrap(), 0.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(base_score("CVSS:2.0/AV:N").is_err());
        assert!(base_score("CVSS:3.1/AV:X/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H").is_err());
    }
}
