//! Minimal package-url splitting.
//!
//! Only what identity and version matching need: the versionless package
//! key and the version. Qualifiers and subpaths are dropped.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Purl {
    /// `pkg:type/namespace/name` with no version, qualifiers or subpath.
    pub package: String,
    pub name: String,
    pub version: Option<String>,
}

impl Purl {
    pub fn parse(purl: &str) -> Purl {
        let base = purl.split(['?', '#']).next().unwrap_or(purl);
        let last_slash = base.rfind('/').map(|i| i + 1).unwrap_or(0);
        let (package, version) = match base[last_slash..].rfind('@') {
            Some(at) => {
                let at = last_slash + at;
                (&base[..at], Some(percent_decode(&base[at + 1..])))
            }
            None => (base, None),
        };
        let name = package[package.rfind('/').map(|i| i + 1).unwrap_or(0)..]
            .trim_start_matches("pkg:")
            .to_string();
        Purl {
            package: package.to_string(),
            name: percent_decode(&name),
            version: version.filter(|v| !v.is_empty()),
        }
    }

    /// The versionless package key of `purl`.
    pub fn package_key(purl: &str) -> String {
        Purl::parse(purl).package
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Some(Ok(b)) = s.get(i + 1..i + 3).map(|h| u8::from_str_radix(h, 16)) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).unwrap_or_else(|_| s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_version() {
        let p = Purl::parse("pkg:npm/lodash@4.17.21");
        assert_eq!(p.package, "pkg:npm/lodash");
        assert_eq!(p.name, "lodash");
        assert_eq!(p.version.as_deref(), Some("4.17.21"));
    }

    #[test]
    fn scoped_namespace_and_qualifiers() {
        let p = Purl::parse("pkg:npm/%40babel/core@7.22.0?arch=x86#sub");
        assert_eq!(p.package, "pkg:npm/%40babel/core");
        assert_eq!(p.name, "core");
        assert_eq!(p.version.as_deref(), Some("7.22.0"));
    }

    #[test]
    fn no_version() {
        let p = Purl::parse("pkg:cargo/serde");
        assert_eq!(p.package, "pkg:cargo/serde");
        assert_eq!(p.version, None);
        assert_eq!(p.name, "serde");
    }
}
