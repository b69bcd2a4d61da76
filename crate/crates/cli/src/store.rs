use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use slicevpn_core::lifecycle::{actors_from_yaml, Actor, Orchestrator};

const STATE_FILE: &str = "state.json";
const LOCK_FILE: &str = "lock";
const ACTORS_FILE: &str = "actors.yaml";

/// The on-disk state directory, held under an exclusive lock for the
/// lifetime of one invocation.
pub struct Store {
    dir: PathBuf,
    _lock: Lock,
}

struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create state store {}", dir.display()))?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => bail!(
                "state store {} is locked by another invocation (remove {} if stale)",
                dir.display(),
                lock.display()
            ),
            Err(e) => return Err(e).with_context(|| format!("cannot lock {}", lock.display())),
        }
        Ok(Store {
            dir: dir.to_path_buf(),
            _lock: Lock(lock),
        })
    }

    pub fn load(&self) -> Result<Orchestrator> {
        let path = self.dir.join(STATE_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .with_context(|| format!("corrupt state file {}", path.display())),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(Orchestrator::new()),
            Err(e) => Err(e).with_context(|| format!("cannot read {}", path.display())),
        }
    }

    /// Writes to a temporary file and renames it over the old state.
    pub fn save(&self, o: &Orchestrator) -> Result<()> {
        let path = self.dir.join(STATE_FILE);
        let tmp = self.dir.join(format!("{STATE_FILE}.tmp"));
        let mut f =
            File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?;
        serde_json::to_writer_pretty(&mut f, o)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
        fs::rename(&tmp, &path).with_context(|| format!("cannot replace {}", path.display()))?;
        Ok(())
    }

    /// `admin` is always an administrator; other names come from
    /// `actors.yaml` in the store, and unknown names are tenants with no
    /// grants.
    pub fn actor(&self, name: &str) -> Result<Actor> {
        let path = self.dir.join(ACTORS_FILE);
        let actors = match fs::read_to_string(&path) {
            Ok(text) => actors_from_yaml(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?,
            Err(e) if e.kind() == ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e).with_context(|| format!("cannot read {}", path.display())),
        };
        if let Some(a) = actors.into_iter().find(|a| a.name == name) {
            return Ok(a);
        }
        Ok(if name == "admin" {
            Actor::admin(name)
        } else {
            Actor::tenant(name, Vec::<String>::new())
        })
    }
}
