//! Atomic file emission: write into a temporary file in the target directory,
//! then rename over the destination.

use std::io::{BufWriter, Write};
use std::path::PathBuf;

use precond_spectrum::Result;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Runs `fill` against a buffered temporary file and moves it to `name`.
    pub fn write_atomic(
        &self,
        name: &str,
        fill: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<PathBuf> {
        let dest = self.path(name);
        let tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w)?;
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&dest).map_err(|e| e.error)?;
        log::info!("wrote {}", dest.display());
        Ok(dest)
    }

    #[cfg(test)]
    pub fn root(&self) -> &std::path::Path {
        &self.root
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_existing_file_and_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path().join("nested")).unwrap();
        std::fs::write(out.path("a.txt"), "old").unwrap();
        out.write_atomic("a.txt", |w| Ok(w.write_all(b"new")?)).unwrap();
        assert_eq!(std::fs::read_to_string(out.path("a.txt")).unwrap(), "new");
        assert_eq!(std::fs::read_dir(out.root()).unwrap().count(), 1);
    }

    #[test]
    fn failed_fill_keeps_previous_contents() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        std::fs::write(out.path("a.txt"), "old").unwrap();
        let r = out.write_atomic("a.txt", |w| {
            w.write_all(b"partial")?;
            Err(precond_spectrum::Error::InvalidArgument("stop".into()))
        });
        assert!(r.is_err());
        assert_eq!(std::fs::read_to_string(out.path("a.txt")).unwrap(), "old");
        assert_eq!(std::fs::read_dir(out.root()).unwrap().count(), 1);
    }
}
