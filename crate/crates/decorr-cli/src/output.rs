//! Output-directory handling: creation, single-owner lockfile, and
//! deterministic file writing (no timestamps, shortest-roundtrip floats).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct ExperimentDir {
    pub path: PathBuf,
    lock: PathBuf,
}

impl ExperimentDir {
    /// Create (if needed) and lock the directory. One directory is owned by
    /// one process at a time.
    pub fn acquire(path: &Path) -> anyhow::Result<ExperimentDir> {
        fs::create_dir_all(path)?;
        let lock = path.join(".decorr.lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                anyhow::bail!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    path.display(),
                    lock.display()
                );
            }
            Err(e) => return Err(e.into()),
        }
        Ok(ExperimentDir {
            path: path.to_path_buf(),
            lock,
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn write_bytes(&self, name: &str, contents: &[u8]) -> anyhow::Result<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

impl Drop for ExperimentDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
