//! The `SPDT` binary trial archive.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "SPDT" | version u32 = 1 | kind u8 | n_trials u32 | n_classes u32
//!   | kind 0: channels u32, samples u32  /  kind 1: dim u32
//!   | labels: n_trials × u32
//!   | payload: f64, row-major within a trial, trials in order
//!   | CRC32 (IEEE) of every preceding byte
//! ```
//!
//! Dataset, subject and session identifiers are not stored in the file. They
//! come from the file name (`sub-<subject>_ses-<session>.spdt`) and from the
//! caller.

use std::path::Path;

use meanfield::Spd64;
use ndarray::Array2;

use crate::error::CliError;

pub const MAGIC: &[u8; 4] = b"SPDT";
pub const VERSION: u32 = 1;
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    TimeSeries,
    Covariance,
}

impl ArchiveKind {
    fn code(self) -> u8 {
        match self {
            ArchiveKind::TimeSeries => 0,
            ArchiveKind::Covariance => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArchiveMeta {
    pub dataset: String,
    pub subject: String,
    pub session: String,
}

impl ArchiveMeta {
    /// Subject and session parsed from a `sub-<s>_ses-<t>` file stem; any
    /// other stem becomes the subject with session `"0"`.
    pub fn from_path(path: &Path, dataset: &str) -> Self {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("unknown");
        let (subject, session) = match stem.strip_prefix("sub-").and_then(|r| r.split_once("_ses-")) {
            Some((s, t)) => (s.to_string(), t.to_string()),
            None => (stem.to_string(), "0".to_string()),
        };
        Self {
            dataset: dataset.to_string(),
            subject,
            session,
        }
    }
}

/// Trials of one recording session. Covariance trials are kept as raw
/// matrices so a read followed by a write reproduces the file exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialArchive {
    pub kind: ArchiveKind,
    pub n_classes: u32,
    pub labels: Vec<u32>,
    pub trials: Vec<Array2<f64>>,
    pub meta: ArchiveMeta,
}

fn corrupt(offset: usize, reason: impl Into<String>) -> CliError {
    CliError::CorruptArchive {
        offset: offset as u64,
        reason: reason.into(),
    }
}

impl TrialArchive {
    pub fn new(kind: ArchiveKind, n_classes: u32, labels: Vec<u32>, trials: Vec<Array2<f64>>) -> Result<Self, CliError> {
        let a = Self {
            kind,
            n_classes,
            labels,
            trials,
            meta: ArchiveMeta::default(),
        };
        a.validate()?;
        Ok(a)
    }

    pub fn covariance(n_classes: u32, labels: Vec<u32>, covs: &[Spd64]) -> Result<Self, CliError> {
        Self::new(
            ArchiveKind::Covariance,
            n_classes,
            labels,
            covs.iter().map(|c| c.matrix().clone()).collect(),
        )
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    /// `(rows, cols)` of every trial.
    pub fn trial_shape(&self) -> (usize, usize) {
        self.trials[0].dim()
    }

    fn header_len(&self) -> usize {
        match self.kind {
            ArchiveKind::TimeSeries => 25,
            ArchiveKind::Covariance => 21,
        }
    }

    /// Checks the in-memory archive against the same rules `from_bytes`
    /// enforces, reporting the offset the offending value would have on disk.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials.is_empty() {
            return Err(corrupt(9, "archive has no trials"));
        }
        if self.labels.len() != self.trials.len() {
            return Err(CliError::InvalidInput(format!(
                "{} labels for {} trials",
                self.labels.len(),
                self.trials.len()
            )));
        }
        if self.n_classes == 0 {
            return Err(corrupt(13, "n_classes is 0"));
        }
        let (rows, cols) = self.trial_shape();
        if rows == 0 || cols == 0 {
            return Err(corrupt(17, "zero trial dimension"));
        }
        if self.kind == ArchiveKind::Covariance && rows != cols {
            return Err(CliError::InvalidInput("covariance trials must be square".into()));
        }
        let labels_at = self.header_len();
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= self.n_classes {
                return Err(corrupt(labels_at + 4 * i, format!("label {l} of trial {i} is not below n_classes = {}", self.n_classes)));
            }
        }
        let payload_at = labels_at + 4 * self.labels.len();
        let per_trial = rows * cols;
        for (t, m) in self.trials.iter().enumerate() {
            let base = payload_at + 8 * per_trial * t;
            if m.dim() != (rows, cols) {
                return Err(CliError::InvalidInput(format!("trial {t} has shape {:?}, expected {:?}", m.dim(), (rows, cols))));
            }
            for (k, v) in m.iter().enumerate() {
                if !v.is_finite() {
                    return Err(corrupt(base + 8 * k, format!("non-finite value in trial {t}")));
                }
            }
            if self.kind == ArchiveKind::Covariance {
                let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for i in 0..rows {
                    for j in (i + 1)..rows {
                        if (m[[i, j]] - m[[j, i]]).abs() > SYMMETRY_TOLERANCE * scale {
                            return Err(corrupt(base + 8 * (i * rows + j), format!("trial {t} is not symmetric at ({i},{j})")));
                        }
                    }
                }
                if let Err(e) = Spd64::new(m.clone()) {
                    return Err(corrupt(base, format!("trial {t}: {e}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        self.validate()?;
        let (rows, cols) = self.trial_shape();
        let to_u32 = |x: usize, what: &str| {
            u32::try_from(x).map_err(|_| CliError::InvalidInput(format!("{what} = {x} does not fit in u32")))
        };
        let mut out = Vec::with_capacity(self.header_len() + 4 * self.n_trials() + 8 * rows * cols * self.n_trials() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&to_u32(self.n_trials(), "n_trials")?.to_le_bytes());
        out.extend_from_slice(&self.n_classes.to_le_bytes());
        match self.kind {
            ArchiveKind::TimeSeries => {
                out.extend_from_slice(&to_u32(rows, "channels")?.to_le_bytes());
                out.extend_from_slice(&to_u32(cols, "samples")?.to_le_bytes());
            }
            ArchiveKind::Covariance => out.extend_from_slice(&to_u32(rows, "dim")?.to_le_bytes()),
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for m in &self.trials {
            // iterate in logical order whatever the memory layout
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], meta: ArchiveMeta) -> Result<Self, CliError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4).map_err(|_| CliError::UnsupportedFormat("file is shorter than the magic number".into()))?;
        if magic != MAGIC {
            return Err(CliError::UnsupportedFormat(format!("bad magic {magic:?}, expected \"SPDT\"")));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::UnsupportedFormat(format!("archive version {version}, only {VERSION} is supported")));
        }
        let kind = match r.u8()? {
            0 => ArchiveKind::TimeSeries,
            1 => ArchiveKind::Covariance,
            k => return Err(corrupt(8, format!("unknown trial kind {k}"))),
        };
        let n_trials = r.u32()? as usize;
        if n_trials == 0 {
            return Err(corrupt(9, "archive has no trials"));
        }
        let n_classes = r.u32()?;
        if n_classes == 0 {
            return Err(corrupt(13, "n_classes is 0"));
        }
        let (rows, cols) = match kind {
            ArchiveKind::TimeSeries => (r.u32()? as usize, r.u32()? as usize),
            ArchiveKind::Covariance => {
                let d = r.u32()? as usize;
                (d, d)
            }
        };
        if rows == 0 || cols == 0 {
            return Err(corrupt(17, "zero trial dimension"));
        }
        let payload_len = rows
            .checked_mul(cols)
            .and_then(|x| x.checked_mul(n_trials))
            .and_then(|x| x.checked_mul(8))
            .ok_or_else(|| corrupt(9, "declared sizes overflow"))?;
        let expected = r.pos + 4 * n_trials + payload_len + 4;
        if bytes.len() != expected {
            return Err(corrupt(
                bytes.len().min(expected),
                format!("file is {} bytes, the header implies {expected}", bytes.len()),
            ));
        }
        let body = &bytes[..expected - 4];
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(corrupt(expected - 4, "CRC32 mismatch"));
        }
        let labels = (0..n_trials).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let mut trials = Vec::with_capacity(n_trials);
        for _ in 0..n_trials {
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                values.push(r.f64()?);
            }
            trials.push(Array2::from_shape_vec((rows, cols), values).expect("shape matches length"));
        }
        let archive = Self {
            kind,
            n_classes,
            labels,
            trials,
            meta,
        };
        archive.validate()?;
        Ok(archive)
    }

    /// Covariance trials as SPD matrices, or `None` for time-series archives.
    pub fn covariances(&self) -> Option<Vec<Spd64>> {
        match self.kind {
            ArchiveKind::Covariance => Some(
                self.trials
                    .iter()
                    .map(|m| Spd64::new(m.clone()).expect("validated on construction"))
                    .collect(),
            ),
            ArchiveKind::TimeSeries => None,
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(corrupt(self.pos, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_archive(path: &Path, dataset: &str) -> Result<TrialArchive, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    TrialArchive::from_bytes(&bytes, ArchiveMeta::from_path(path, dataset))
}

pub fn write_archive(archive: &TrialArchive, path: &Path) -> Result<(), CliError> {
    let bytes = archive.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
