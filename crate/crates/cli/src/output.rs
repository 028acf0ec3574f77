//! All-or-nothing output: files are written into a hidden staging directory
//! next to their destination and only moved into place once every one of
//! them has been written.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::TempDir;

pub struct Staging {
    dir: TempDir,
    out: PathBuf,
    files: Vec<String>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out)
            .with_context(|| format!("cannot create output directory {}", out.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".gabp-staging-")
            .tempdir_in(out)
            .with_context(|| format!("cannot write to output directory {}", out.display()))?;
        Ok(Self {
            dir,
            out: out.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes one staged file through `fill`.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.dir.path().join(name);
        let file = fs::File::create(&path).with_context(|| format!("cannot create {name}"))?;
        let mut buf = BufWriter::new(file);
        fill(&mut buf).with_context(|| format!("while writing {name}"))?;
        buf.flush()
            .with_context(|| format!("cannot write {name}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Moves every staged file into the output directory. If any move fails
    /// the files already moved are removed again.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut moved = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let dest = self.out.join(name);
            if let Err(e) = fs::rename(self.dir.path().join(name), &dest) {
                for done in &moved {
                    let _ = fs::remove_file(done);
                }
                return Err(e)
                    .with_context(|| format!("cannot move {} into place", dest.display()));
            }
            moved.push(dest);
        }
        Ok(moved)
    }
}
