//! OSV-subset vulnerability feed reader.
//!
//! Reads `id`, `summary`, `severity[].score`, `affected[].package.purl` and
//! `affected[].ranges[].events[]`. A score may be numeric or a CVSS v3
//! vector, in which case the base score is computed from the vector.
//! Confidence is read from `database_specific.confidence` and defaults to
//! 1.0. The feed may be a single entry, an array, or `{"vulns": [...]}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::version::VersionRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectedPurl {
    pub purl: String,
    pub version_range: VersionRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnFeedEntry {
    pub external_id: String,
    pub severity_cvss: f64,
    #[serde(default = "one")]
    pub confidence: f64,
    #[serde(default)]
    pub description: String,
    pub affected_purls: Vec<AffectedPurl>,
}

fn one() -> f64 {
    1.0
}

impl VulnFeedEntry {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.affected_purls.is_empty() {
            return Err(IngestError::MalformedRange(format!(
                "{}: no affected packages",
                self.external_id
            )));
        }
        if !(0.0..=10.0).contains(&self.severity_cvss) {
            return Err(IngestError::InvariantViolation(format!(
                "{}: severity {} outside [0, 10]",
                self.external_id, self.severity_cvss
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(IngestError::InvariantViolation(format!(
                "{}: confidence {} outside [0, 1]",
                self.external_id, self.confidence
            )));
        }
        for a in &self.affected_purls {
            if a.purl.is_empty() {
                return Err(IngestError::MalformedRange(format!("{}: empty purl", self.external_id)));
            }
            a.version_range
                .validate()
                .map_err(|e| IngestError::MalformedRange(format!("{}: {}", self.external_id, e.0)))?;
        }
        Ok(())
    }
}

pub fn parse_vuln_feed(bytes: &[u8]) -> Result<Vec<VulnFeedEntry>, IngestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    let items: Vec<&Value> = match &root {
        Value::Array(items) => items.iter().collect(),
        Value::Object(map) => match map.get("vulns") {
            Some(Value::Array(items)) => items.iter().collect(),
            _ => vec![&root],
        },
        _ => {
            return Err(IngestError::MalformedDocument(
                "feed must be an object or an array".into(),
            ))
        }
    };
    items.into_iter().enumerate().map(|(i, v)| parse_entry(i, v)).collect()
}

fn parse_entry(i: usize, item: &Value) -> Result<VulnFeedEntry, IngestError> {
    let external_id = item
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::MissingField(format!("[{i}].id")))?
        .to_string();

    let severity_cvss = item
        .get("severity")
        .and_then(Value::as_array)
        .map(|scores| {
            scores
                .iter()
                .filter_map(|s| s.get("score"))
                .map(|s| parse_score(&external_id, s))
                .collect::<Result<Vec<f64>, _>>()
        })
        .transpose()?
        .and_then(|scores| scores.into_iter().reduce(f64::max))
        .ok_or_else(|| IngestError::MissingField(format!("[{i}].severity[].score")))?;

    let confidence = item
        .get("database_specific")
        .and_then(|d| d.get("confidence"))
        .and_then(Value::as_f64)
        .unwrap_or(1.0);

    let description = item
        .get("summary")
        .or_else(|| item.get("details"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();

    let mut affected_purls = Vec::new();
    for (j, aff) in item
        .get("affected")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .enumerate()
    {
        let purl = aff
            .get("package")
            .and_then(|p| p.get("purl"))
            .and_then(Value::as_str)
            .ok_or_else(|| IngestError::MissingField(format!("[{i}].affected[{j}].package.purl")))?;
        let ranges = aff.get("ranges").and_then(Value::as_array);
        let mut parsed = Vec::new();
        for range in ranges.map(Vec::as_slice).unwrap_or_default() {
            let events = range
                .get("events")
                .and_then(Value::as_array)
                .ok_or_else(|| IngestError::MalformedRange(format!("{external_id}: range without events")))?;
            parsed.extend(ranges_from_events(&external_id, events)?);
        }
        if parsed.is_empty() {
            log::warn!("{external_id}: {purl} lists no ranges; treating every version as affected");
            parsed.push(VersionRange::default());
        }
        for version_range in parsed {
            affected_purls.push(AffectedPurl {
                purl: purl.to_string(),
                version_range,
            });
        }
    }

    let entry = VulnFeedEntry {
        external_id,
        severity_cvss,
        confidence,
        description,
        affected_purls,
    };
    entry.validate()?;
    Ok(entry)
}

fn parse_score(id: &str, score: &Value) -> Result<f64, IngestError> {
    if let Some(n) = score.as_f64() {
        return Ok(n);
    }
    let text = score
        .as_str()
        .ok_or_else(|| IngestError::MalformedDocument(format!("{id}: score must be a number or string")))?;
    if let Ok(n) = text.trim().parse::<f64>() {
        return Ok(n);
    }
    super::cvss::base_score(text)
        .map_err(|e| IngestError::MalformedDocument(format!("{id}: bad CVSS vector `{text}`: {e}")))
}

/// Folds an OSV event list into half-open intervals.
fn ranges_from_events(id: &str, events: &[Value]) -> Result<Vec<VersionRange>, IngestError> {
    let mut out = Vec::new();
    let mut open: Option<Option<String>> = None;
    for ev in events {
        if let Some(v) = ev.get("introduced").and_then(Value::as_str) {
            if let Some(prev) = open.take() {
                out.push(VersionRange {
                    introduced: prev,
                    fixed: None,
                });
            }
            open = Some(if v == "0" { None } else { Some(v.to_string()) });
        } else if let Some(v) = ev.get("fixed").and_then(Value::as_str) {
            let introduced = open.take().unwrap_or(None);
            out.push(VersionRange {
                introduced,
                fixed: Some(v.to_string()),
            });
        } else if ev.get("last_affected").is_some() || ev.get("limit").is_some() {
            return Err(IngestError::MalformedRange(format!(
                "{id}: only introduced/fixed events are supported"
            )));
        }
    }
    if let Some(introduced) = open {
        out.push(VersionRange {
            introduced,
            fixed: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_and_vector_scores() {
        let src = r#"[
          {"id": "OSV-1", "severity": [{"type": "CVSS_V3", "score": "9.8"}],
           "affected": [{"package": {"purl": "pkg:npm/a"}, "ranges": [{"type": "SEMVER", "events": [{"introduced": "0"}, {"fixed": "2.0.0"}]}]}]},
          {"id": "OSV-2", "severity": [{"type": "CVSS_V3", "score": "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"}],
           "affected": [{"package": {"purl": "pkg:npm/b"}, "ranges": [{"type": "SEMVER", "events": [{"introduced": "1.0.0"}]}]}]}
        ]"#;
        let entries = parse_vuln_feed(src.as_bytes()).unwrap();
        assert_eq!(entries[0].severity_cvss, 9.8);
        assert_eq!(entries[0].confidence, 1.0);
        assert_eq!(
            entries[0].affected_purls[0].version_range.fixed.as_deref(),
            Some("2.0.0")
        );
        assert_eq!(entries[0].affected_purls[0].version_range.introduced, None);
        assert_eq!(entries[1].severity_cvss, 9.8);
        assert_eq!(
            entries[1].affected_purls[0].version_range.introduced.as_deref(),
            Some("1.0.0")
        );
    }

    #[test]
    fn empty_affected_is_malformed_range() {
        let src = r#"{"id": "X", "severity": [{"score": 5.0}], "affected": []}"#;
        assert!(matches!(
            parse_vuln_feed(src.as_bytes()),
            Err(IngestError::MalformedRange(_))
        ));
    }

    #[test]
    fn multiple_event_pairs() {
        let events: Vec<Value> = serde_json::from_str(
            r#"[{"introduced": "1.0.0"}, {"fixed": "1.2.0"}, {"introduced": "2.0.0"}, {"fixed": "2.0.5"}]"#,
        )
        .unwrap();
        let ranges = ranges_from_events("X", &events).unwrap();
        assert_eq!(ranges.len(), 2);
        assert!(ranges[1].contains("2.0.3"));
        assert!(!ranges[0].contains("1.5.0"));
    }
}
