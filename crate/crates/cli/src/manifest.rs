use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wwm_core::{BuildConfig, BuildCounters, RecordFormat, SegMode};

/// Everything needed to rerun a build, plus what the run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub input: PathBuf,
    pub vocab: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub output: PathBuf,
    pub sidecar: Option<PathBuf>,
    pub format: RecordFormat,
    pub seg_mode: SegMode,
    pub lowercase: bool,
    pub config: BuildConfig,
    pub vocab_fingerprint: String,
    pub counters: BuildCounters,
}

impl RunManifest {
    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Path of the manifest written next to `output`.
    pub fn path_for(output: &Path) -> PathBuf {
        with_suffix(output, ".manifest.json")
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut out = AtomicFile::create(path)?;
        serde_json::to_writer_pretty(&mut out, self).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
        out.commit()
    }
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// A file written under a temporary name and renamed into place on
/// `commit`, so readers never observe a partial output.
pub struct AtomicFile {
    tmp: PathBuf,
    dest: PathBuf,
    inner: Option<BufWriter<File>>,
}

impl AtomicFile {
    pub fn create(dest: &Path) -> io::Result<Self> {
        let tmp = with_suffix(dest, ".tmp");
        let file = File::create(&tmp)?;
        Ok(AtomicFile {
            tmp,
            dest: dest.to_owned(),
            inner: Some(BufWriter::new(file)),
        })
    }

    pub fn commit(mut self) -> io::Result<()> {
        let writer = self.inner.take().expect("uncommitted file");
        let file = writer.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&self.tmp, &self.dest)
    }
}

impl Write for AtomicFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.inner.as_mut().expect("uncommitted file").write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.as_mut().expect("uncommitted file").flush()
    }
}

impl Drop for AtomicFile {
    fn drop(&mut self) {
        if self.inner.is_some() {
            let _ = fs::remove_file(&self.tmp);
        }
    }
}
