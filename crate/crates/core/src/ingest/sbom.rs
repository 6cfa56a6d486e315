//! CycloneDX-subset SBOM reader/writer.
//!
//! Only `components[].{purl,name,version,licenses[].license.id}` are read,
//! plus the `properties` extension entries `deptex:direct`, `deptex:scope`
//! and `deptex:depth`. The owning asset is taken from
//! `metadata.component.bom-ref` (or `.name`). Other fields are ignored.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::IngestError;
use crate::graph::Scope;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbomComponent {
    pub purl: String,
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub licenses: Vec<String>,
    pub direct: bool,
    pub scope: Scope,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SbomDocument {
    #[serde(default)]
    pub asset_ref: String,
    #[serde(default)]
    pub components: Vec<SbomComponent>,
}

impl SbomDocument {
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut seen = BTreeSet::new();
        for (i, c) in self.components.iter().enumerate() {
            if c.purl.is_empty() {
                return Err(IngestError::MissingField(format!("components[{i}].purl")));
            }
            if !seen.insert(c.purl.as_str()) {
                return Err(IngestError::InvariantViolation(format!("duplicate purl {}", c.purl)));
            }
            if c.depth == 0 {
                return Err(IngestError::InvariantViolation(format!(
                    "{}: depth must be >= 1",
                    c.purl
                )));
            }
            if (c.depth == 1) != c.direct {
                return Err(IngestError::InvariantViolation(format!(
                    "{}: direct={} with depth={} (depth is 1 exactly for direct dependencies)",
                    c.purl, c.direct, c.depth
                )));
            }
        }
        Ok(())
    }

    /// Renders the document in the same CycloneDX-subset layout
    /// [`parse_sbom`] reads.
    pub fn to_cyclonedx(&self) -> Value {
        let components: Vec<Value> = self
            .components
            .iter()
            .map(|c| {
                json!({
                    "type": "library",
                    "purl": c.purl,
                    "name": c.name,
                    "version": c.version,
                    "licenses": c.licenses.iter().map(|l| json!({"license": {"id": l}})).collect::<Vec<_>>(),
                    "properties": [
                        {"name": "deptex:direct", "value": c.direct.to_string()},
                        {"name": "deptex:scope", "value": c.scope.as_str()},
                        {"name": "deptex:depth", "value": c.depth.to_string()},
                    ],
                })
            })
            .collect();
        json!({
            "bomFormat": "CycloneDX",
            "specVersion": "1.5",
            "metadata": {"component": {"bom-ref": self.asset_ref, "name": self.asset_ref}},
            "components": components,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_cyclonedx()).expect("json values always serialize")
    }
}

pub fn parse_sbom(bytes: &[u8]) -> Result<SbomDocument, IngestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    let root = root
        .as_object()
        .ok_or_else(|| IngestError::MalformedDocument("top level must be an object".into()))?;

    match root.get("bomFormat") {
        None => {}
        Some(Value::String(f)) if f == "CycloneDX" => {}
        Some(other) => {
            return Err(IngestError::MalformedDocument(format!(
                "bomFormat must be \"CycloneDX\", got {other}"
            )))
        }
    }

    let asset_ref = root
        .get("metadata")
        .and_then(|m| m.get("component"))
        .and_then(|c| c.get("bom-ref").or_else(|| c.get("name")))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();

    let components = match root.get("components") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| parse_component(i, item))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(IngestError::MalformedDocument("`components` must be an array".into())),
    };

    let doc = SbomDocument { asset_ref, components };
    doc.validate()?;
    Ok(doc)
}

fn parse_component(i: usize, item: &Value) -> Result<SbomComponent, IngestError> {
    let field = |name: &str| -> Result<String, IngestError> {
        item.get(name)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| IngestError::MissingField(format!("components[{i}].{name}")))
    };
    let purl = field("purl")?;
    let name = field("name")?;
    let version = field("version")?;

    let licenses = item
        .get("licenses")
        .and_then(Value::as_array)
        .map(|ls| {
            ls.iter()
                .filter_map(|l| {
                    let lic = l.get("license")?;
                    lic.get("id").or_else(|| lic.get("name"))?.as_str().map(str::to_owned)
                })
                .collect()
        })
        .unwrap_or_default();

    let prop = |key: &str| -> Option<String> {
        item.get("properties")?
            .as_array()?
            .iter()
            .find(|p| p.get("name").and_then(Value::as_str) == Some(key))?
            .get("value")
            .and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Bool(b) => Some(b.to_string()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
    };
    let bad = |key: &str, v: &str| IngestError::InvariantViolation(format!("components[{i}]: bad {key} value `{v}`"));

    let direct = match prop("deptex:direct") {
        None => None,
        Some(v) => Some(v.parse::<bool>().map_err(|_| bad("deptex:direct", &v))?),
    };
    let depth = match prop("deptex:depth") {
        None => None,
        Some(v) => Some(v.parse::<u32>().map_err(|_| bad("deptex:depth", &v))?),
    };
    let scope = match prop("deptex:scope") {
        None => Scope::Runtime,
        Some(v) => Scope::parse(&v).ok_or_else(|| bad("deptex:scope", &v))?,
    };
    let (direct, depth) = match (direct, depth) {
        (Some(d), Some(n)) => (d, n),
        (Some(true), None) => (true, 1),
        (Some(false), None) => (false, 2),
        (None, Some(n)) => (n == 1, n),
        (None, None) => (true, 1),
    };

    Ok(SbomComponent {
        purl,
        name,
        version,
        licenses,
        direct,
        scope,
        depth,
    })
}
