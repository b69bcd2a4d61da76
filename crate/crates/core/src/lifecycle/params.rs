use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::descriptors::{MemberIndex, ParamType, PrimitiveSpec};
use crate::transport::Endpoint;
use crate::yaml::{self, MapReader, SchemaError};

/// Parameter names whose values never appear in logs or records.
pub const SECRET_PARAMS: &[&str] = &["seed"];
pub const REDACTED: &str = "<redacted>";

/// Per-member primitive parameter overrides supplied at ns-create time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstantiationParams {
    pub vnf: BTreeMap<MemberIndex, BTreeMap<String, String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParamsError {
    #[error(transparent)]
    Syntax(#[from] yaml::SyntaxError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl InstantiationParams {
    /// Reads a `--config` file:
    ///
    /// ```yaml
    /// vnf:
    ///   - member-vnf-index: 1
    ///     params: {tunnel-address: 10.100.0.1}
    /// ```
    pub fn from_yaml(text: &str) -> Result<Self, ParamsError> {
        let root = yaml::parse(text)?;
        let mut r = MapReader::new(&root, "")?;
        let mut out = InstantiationParams::default();
        for (path, item) in r.opt_seq("vnf")? {
            let mut m = MapReader::new(item, &path)?;
            let idx: MemberIndex = m.req_parse("member-vnf-index", "member index")?;
            let mut params = BTreeMap::new();
            if let Some(p) = m.take("params") {
                let ppath = yaml::child_path(&path, "params");
                let mut pr = MapReader::new(p, &ppath)?;
                for (k, v) in pr.drain() {
                    params.insert(
                        k.to_string(),
                        yaml::as_str(v, &yaml::child_path(&ppath, k))?.to_string(),
                    );
                }
            }
            m.finish()?;
            if out.vnf.insert(idx, params).is_some() {
                return Err(SchemaError::new(
                    yaml::child_path(&path, "member-vnf-index"),
                    format!("duplicate member-vnf-index {idx}"),
                )
                .into());
            }
        }
        r.finish()?;
        Ok(out)
    }

    pub fn member(&self, idx: MemberIndex) -> Option<&BTreeMap<String, String>> {
        self.vnf.get(&idx)
    }

    /// Copy with secret values replaced.
    pub fn redacted(&self) -> Self {
        InstantiationParams {
            vnf: self.vnf.iter().map(|(k, v)| (*k, redact(v))).collect(),
        }
    }
}

impl fmt::Display for InstantiationParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.vnf.is_empty() {
            return f.write_str("{}");
        }
        let mut first = true;
        for (idx, params) in &self.vnf {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "member={idx}")?;
            for (k, v) in params {
                write!(f, " {k}={v}")?;
            }
        }
        Ok(())
    }
}

pub fn redact(params: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    params
        .iter()
        .map(|(k, v)| {
            let v = if SECRET_PARAMS.contains(&k.as_str()) {
                REDACTED.to_string()
            } else {
                v.clone()
            };
            (k.clone(), v)
        })
        .collect()
}

/// A type-checked primitive argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamValue {
    Str(String),
    Int(i64),
    Ip(Ipv4Addr),
    Cidrs(Vec<Ipv4Net>),
    Endpoint(Endpoint),
}

impl ParamValue {
    pub fn parse(kind: ParamType, raw: &str) -> Result<Self, String> {
        let raw = raw.trim();
        match kind {
            ParamType::String => Ok(ParamValue::Str(raw.to_string())),
            ParamType::Int => raw
                .parse()
                .map(ParamValue::Int)
                .map_err(|_| format!("expected an integer, found `{raw}`")),
            ParamType::IpAddr => raw
                .parse()
                .map(ParamValue::Ip)
                .map_err(|_| format!("expected an IPv4 address, found `{raw}`")),
            ParamType::Cidr => {
                let nets = raw
                    .split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<Ipv4Net>()
                            .or_else(|_| s.parse::<Ipv4Addr>().map(Ipv4Net::from))
                            .map_err(|_| format!("expected IPv4 prefixes, found `{s}`"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ParamValue::Cidrs(nets))
            }
            ParamType::Endpoint => raw
                .parse()
                .map(ParamValue::Endpoint)
                .map_err(|e: crate::transport::EndpointError| e.to_string()),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// Values substituted into `<...>` placeholders of parameter defaults.
#[derive(Debug, Clone)]
pub struct Placeholders {
    pub member_index: MemberIndex,
    pub mgmt_ip: Option<Ipv4Addr>,
    pub ns_id: String,
}

impl Placeholders {
    fn apply(&self, s: &str) -> String {
        let mgmt = self.mgmt_ip.map(|a| a.to_string()).unwrap_or_default();
        s.replace("<member-index>", &self.member_index.to_string())
            .replace("<mgmt-ip>", &mgmt)
            .replace("<ns-id>", &self.ns_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parameter `{name}` of `{primitive}`: {message}")]
pub struct BadParam {
    pub primitive: String,
    pub name: String,
    pub message: String,
}

/// Checks `given` against the primitive's declared signature and fills in
/// defaults. Undeclared names are rejected unless `ignore_undeclared`.
pub fn resolve(
    spec: &PrimitiveSpec,
    given: &BTreeMap<String, String>,
    ph: &Placeholders,
    ignore_undeclared: bool,
) -> Result<BTreeMap<String, ParamValue>, BadParam> {
    let bad = |name: &str, message: String| BadParam {
        primitive: spec.name.clone(),
        name: name.to_string(),
        message,
    };
    if !ignore_undeclared {
        if let Some(k) = given.keys().find(|k| spec.param(k).is_none()) {
            return Err(bad(k, "not declared by the primitive".into()));
        }
    }
    let mut out = BTreeMap::new();
    for p in &spec.params {
        let raw = match (given.get(&p.name), &p.default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => ph.apply(d),
            (None, None) if p.optional => continue,
            (None, None) => return Err(bad(&p.name, "missing required parameter".into())),
        };
        let v = ParamValue::parse(p.kind, &raw).map_err(|m| bad(&p.name, m))?;
        out.insert(p.name.clone(), v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::parse_vnfd;
    use crate::fixtures;

    fn ph() -> Placeholders {
        Placeholders {
            member_index: 2,
            mgmt_ip: Some([192, 168, 100, 2].into()),
            ns_id: "ns-1".into(),
        }
    }

    #[test]
    fn config_fixture_parses_and_redacts() {
        let p = InstantiationParams::from_yaml(fixtures::WG_PAIR_CONFIG).unwrap();
        assert_eq!(p.member(1).unwrap()["tunnel-address"], "10.100.0.1");
        let shown = p.redacted().to_string();
        assert!(!shown.contains("west-demo-seed"), "{shown}");
        assert!(shown.contains("seed=<redacted>"));
        assert!(InstantiationParams::from_yaml("vnf: [{member-vnf-index: x}]").is_err());
        assert!(InstantiationParams::from_yaml("extra: 1").is_err());
    }

    #[test]
    fn defaults_substitute_placeholders() {
        let v = parse_vnfd(fixtures::WG_GATEWAY_VNFD).unwrap();
        let start = v.initial_primitive("start-wg").unwrap();
        let r = resolve(start, &BTreeMap::new(), &ph(), false).unwrap();
        assert_eq!(r["tunnel-address"], ParamValue::Ip([10, 100, 0, 2].into()));
        assert_eq!(r["listen-port"], ParamValue::Int(51820));
    }

    #[test]
    fn add_peer_type_checks() {
        let v = parse_vnfd(fixtures::WG_GATEWAY_VNFD).unwrap();
        let add = v.day2_primitive("add-peer").unwrap();
        let mut given: BTreeMap<String, String> = [
            ("public-key", "k"),
            ("allowed-ips", "10.100.0.1/32, 10.10.1.0/24"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let r = resolve(add, &given, &ph(), false).unwrap();
        assert_eq!(
            r["allowed-ips"],
            ParamValue::Cidrs(vec![
                "10.100.0.1/32".parse().unwrap(),
                "10.10.1.0/24".parse().unwrap()
            ])
        );
        assert!(!r.contains_key("endpoint"));
        given.insert("endpoint".into(), "192.168.100.1".into());
        assert_eq!(
            resolve(add, &given, &ph(), false).unwrap_err().name,
            "endpoint"
        );
        given.insert("endpoint".into(), "192.168.100.1:51820".into());
        given.insert("bogus".into(), "1".into());
        assert_eq!(
            resolve(add, &given, &ph(), false).unwrap_err().name,
            "bogus"
        );
        given.remove("bogus");
        given.remove("public-key");
        let e = resolve(add, &given, &ph(), false).unwrap_err();
        assert_eq!(
            (e.name.as_str(), e.message.as_str()),
            ("public-key", "missing required parameter")
        );
    }
}
