use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clock::SimDuration;
use crate::yaml::{self, as_str, MapReader, Node, SchemaError};

use super::VimError;

/// Durations charged to the simulated clock for boot, cloud-init package
/// installs, and configuration primitives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub base_boot: SimDuration,
    pub package_install: BTreeMap<String, SimDuration>,
    /// Primitives missing from this map take zero time.
    pub primitive_exec: BTreeMap<String, SimDuration>,
    pub preinstalled_packages: BTreeSet<String>,
}

impl Default for TimingProfile {
    /// OPD 159 s = 57 s boot + 102 s wireguard install. The 47 s of
    /// initial configuration is split 20/20/7 across generate-keys,
    /// start-wg and enable-forwarding; only the total is measured.
    fn default() -> Self {
        let secs = SimDuration::from_secs;
        TimingProfile {
            base_boot: secs(57),
            package_install: [("wireguard".to_string(), secs(102))].into(),
            primitive_exec: [
                ("generate-keys", 20),
                ("start-wg", 20),
                ("enable-forwarding", 7),
                ("add-peer", 60),
                ("del-peer", 51),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), secs(v)))
            .collect(),
            preinstalled_packages: BTreeSet::new(),
        }
    }
}

impl TimingProfile {
    /// Default profile with an image that already ships wireguard.
    pub fn preinstalled() -> Self {
        let mut p = Self::default();
        p.preinstalled_packages.insert("wireguard".into());
        p
    }

    /// Every duration zero; packages still need an entry to be installable.
    pub fn zeroed() -> Self {
        let mut p = Self {
            base_boot: SimDuration::ZERO,
            ..Self::default()
        };
        p.package_install
            .values_mut()
            .for_each(|d| *d = SimDuration::ZERO);
        p.primitive_exec
            .values_mut()
            .for_each(|d| *d = SimDuration::ZERO);
        p
    }

    pub fn primitive_duration(&self, name: &str) -> SimDuration {
        self.primitive_exec.get(name).copied().unwrap_or_default()
    }

    /// Boot time of a VDU: base boot plus every package not already in the
    /// image.
    pub fn boot_duration<S: AsRef<str>>(&self, packages: &[S]) -> Result<SimDuration, VimError> {
        let mut total = self.base_boot;
        for p in packages {
            let p = p.as_ref();
            if self.preinstalled_packages.contains(p) {
                continue;
            }
            let d = self
                .package_install
                .get(p)
                .ok_or_else(|| VimError::UnknownPackage(p.to_string()))?;
            total = total + *d;
        }
        Ok(total)
    }

    /// Reads `profile.yaml`: `base-boot-s`, `package-install-s`,
    /// `primitive-exec-s`, `preinstalled-packages`. Omitted keys keep their
    /// default values.
    pub fn from_yaml(text: &str) -> Result<Self, ProfileError> {
        let root = yaml::parse(text)?;
        let mut r = MapReader::new(&root, "")?;
        let mut p = TimingProfile::default();
        if let Some(n) = r.take("base-boot-s") {
            p.base_boot = secs(n, "/base-boot-s")?;
        }
        if let Some(n) = r.take("package-install-s") {
            p.package_install = secs_map(n, "/package-install-s")?;
        }
        if let Some(n) = r.take("primitive-exec-s") {
            p.primitive_exec = secs_map(n, "/primitive-exec-s")?;
        }
        if let Some(n) = r.take("preinstalled-packages") {
            p.preinstalled_packages = yaml::seq_items(n, "/preinstalled-packages")?
                .into_iter()
                .map(|(path, n)| as_str(n, &path).map(str::to_string))
                .collect::<Result<_, _>>()?;
        }
        r.finish()?;
        Ok(p)
    }

    pub fn to_yaml(&self) -> String {
        let s = |d: &SimDuration| Node::scalar(d.to_string());
        let map = |m: &BTreeMap<String, SimDuration>| Node::Map {
            entries: m.iter().map(|(k, v)| (k.clone(), s(v))).collect(),
            pos: Default::default(),
        };
        yaml::emit(&Node::map(vec![
            ("base-boot-s", s(&self.base_boot)),
            ("package-install-s", map(&self.package_install)),
            ("primitive-exec-s", map(&self.primitive_exec)),
            (
                "preinstalled-packages",
                Node::seq(
                    self.preinstalled_packages
                        .iter()
                        .map(Node::scalar)
                        .collect(),
                ),
            ),
        ]))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Syntax(#[from] yaml::SyntaxError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

fn secs(n: &Node, path: &str) -> Result<SimDuration, SchemaError> {
    let s = as_str(n, path)?;
    s.parse::<f64>()
        .ok()
        .and_then(SimDuration::from_secs_f64)
        .ok_or_else(|| {
            SchemaError::new(path, format!("expected non-negative seconds, found `{s}`"))
        })
}

fn secs_map(n: &Node, path: &str) -> Result<BTreeMap<String, SimDuration>, SchemaError> {
    let mut r = MapReader::new(n, path)?;
    let mut out = BTreeMap::new();
    for (k, v) in r.drain() {
        out.insert(k.to_string(), secs(v, &yaml::child_path(path, k))?);
    }
    Ok(out)
}
