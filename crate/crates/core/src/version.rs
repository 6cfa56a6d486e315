//! Version ordering and affected-range matching.
//!
//! Versions are compared as semantic versions (numeric core, then
//! pre-release). Partial versions such as `1.2` are padded with zeros.
//! Anything that still fails to parse falls back to plain string ordering.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// A parsed version, or the raw string when it is not semver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Version {
    Semver(semver::Version),
    Opaque(String),
}

impl Version {
    pub fn parse(raw: &str) -> Version {
        let trimmed = raw.trim().trim_start_matches(['v', 'V']);
        if let Ok(v) = semver::Version::parse(trimmed) {
            return Version::Semver(v);
        }
        if let Some(padded) = pad_partial(trimmed) {
            if let Ok(v) = semver::Version::parse(&padded) {
                return Version::Semver(v);
            }
        }
        log::warn!("version `{raw}` is not semver; comparing lexicographically");
        Version::Opaque(raw.to_string())
    }
}

fn pad_partial(v: &str) -> Option<String> {
    let split = v.find(['-', '+']).unwrap_or(v.len());
    let (core, rest) = v.split_at(split);
    let parts: Vec<&str> = core.split('.').collect();
    if parts.is_empty()
        || parts.len() > 3
        || parts
            .iter()
            .any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    let mut nums: Vec<String> = parts
        .iter()
        .map(|p| p.trim_start_matches('0').to_string())
        .map(|p| if p.is_empty() { "0".into() } else { p })
        .collect();
    while nums.len() < 3 {
        nums.push("0".into());
    }
    Some(format!("{}{}", nums.join("."), rest))
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Version::Semver(a), Version::Semver(b)) => a.cmp_precedence(b).then_with(|| a.build.cmp(&b.build)),
            (Version::Semver(a), Version::Opaque(b)) => a.to_string().as_str().cmp(b.as_str()),
            (Version::Opaque(a), Version::Semver(b)) => a.as_str().cmp(b.to_string().as_str()),
            (Version::Opaque(a), Version::Opaque(b)) => a.cmp(b),
        }
    }
}

pub fn compare(a: &str, b: &str) -> Ordering {
    Version::parse(a).cmp(&Version::parse(b))
}

/// Half-open affected interval `[introduced, fixed)`. A missing bound is
/// unbounded on that side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct VersionRange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub introduced: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed range: {0}")]
pub struct MalformedRange(pub String);

impl VersionRange {
    pub fn new(introduced: Option<&str>, fixed: Option<&str>) -> Result<Self, MalformedRange> {
        let range = VersionRange {
            introduced: introduced.map(str::to_owned),
            fixed: fixed.map(str::to_owned),
        };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<(), MalformedRange> {
        if let (Some(i), Some(f)) = (&self.introduced, &self.fixed) {
            if compare(i, f) != Ordering::Less {
                return Err(MalformedRange(format!("introduced {i} must precede fixed {f}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, version: &str) -> bool {
        let v = Version::parse(version);
        let lower_ok = match &self.introduced {
            None => true,
            Some(i) if i == "0" => true,
            Some(i) => v >= Version::parse(i),
        };
        let upper_ok = match &self.fixed {
            None => true,
            Some(f) => v < Version::parse(f),
        };
        lower_ok && upper_ok
    }
}
