use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bytes::{read_file, write_file, Reader};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Pathological,
    Unlabeled,
}

impl Label {
    /// Class index used by the classifiers: 0 normal, 1 pathological.
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Normal => Some(0),
            Label::Pathological => Some(1),
            Label::Unlabeled => None,
        }
    }

    pub fn from_class(c: usize) -> Self {
        if c == 0 {
            Label::Normal
        } else {
            Label::Pathological
        }
    }

    fn byte(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Pathological => 1,
            Label::Unlabeled => 255,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Pathological),
            255 => Ok(Label::Unlabeled),
            other => Err(Error::Corruption(format!("unknown label byte {other}"))),
        }
    }
}

/// One multichannel session. Samples are µV, stored electrode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub electrode_labels: Vec<String>,
    pub sample_rate_hz: f64,
    samples: Vec<f32>,
    n_samples: usize,
    pub label: Label,
    pub report_text: Option<String>,
    pub subject_id: String,
}

impl Recording {
    pub fn new(
        electrode_labels: Vec<String>,
        sample_rate_hz: f64,
        samples: Vec<f32>,
        label: Label,
        report_text: Option<String>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::Data(format!("invalid sample rate {sample_rate_hz}")));
        }
        let e = electrode_labels.len();
        if e == 0 {
            return Err(Error::Data("recording has no electrodes".into()));
        }
        if !samples.len().is_multiple_of(e) {
            return Err(Error::dim(format!("{} samples do not split into {e} rows", samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("recording"));
        }
        Ok(Self {
            n_samples: samples.len() / e,
            electrode_labels,
            sample_rate_hz,
            samples,
            label,
            report_text,
            subject_id: subject_id.into(),
        })
    }

    /// Builds a recording from per-electrode rows of equal length.
    pub fn from_rows(
        electrode_labels: Vec<String>,
        sample_rate_hz: f64,
        rows: &[Vec<f32>],
        label: Label,
        report_text: Option<String>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if rows.len() != electrode_labels.len() {
            return Err(Error::dim(format!("{} rows for {} electrodes", rows.len(), electrode_labels.len())));
        }
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::dim("rows differ in length"));
        }
        Self::new(electrode_labels, sample_rate_hz, rows.concat(), label, report_text, subject_id)
    }

    pub fn n_electrodes(&self) -> usize {
        self.electrode_labels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn channel(&self, e: usize) -> &[f32] {
        &self.samples[e * self.n_samples..(e + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.samples.chunks_exact(self.n_samples.max(1))
    }

    pub fn electrode_index(&self, label: &str) -> Option<usize> {
        self.electrode_labels.iter().position(|l| l.eq_ignore_ascii_case(label))
    }

    /// Copy restricted to samples `[start, end)` of every electrode.
    pub fn slice_time(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_samples {
            return Err(Error::TooShort(format!("cannot slice [{start}, {end}) from {} samples", self.n_samples)));
        }
        let rows: Vec<Vec<f32>> = self.rows().map(|r| r[start..end].to_vec()).collect();
        Self::from_rows(
            self.electrode_labels.clone(),
            self.sample_rate_hz,
            &rows,
            self.label,
            self.report_text.clone(),
            self.subject_id.clone(),
        )
    }
}

const MAGIC: &[u8; 8] = b"EEGREC01";
const VERSION: u32 = 1;

pub fn encode_recording(rec: &Recording) -> Vec<u8> {
    let report = rec.report_text.as_deref().unwrap_or("");
    let mut out = Vec::with_capacity(64 + rec.samples.len() * 4 + report.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(rec.n_electrodes() as u32).to_le_bytes());
    out.extend_from_slice(&(rec.n_samples as u64).to_le_bytes());
    out.extend_from_slice(&rec.sample_rate_hz.to_le_bytes());
    for l in &rec.electrode_labels {
        out.extend_from_slice(l.as_bytes());
        out.push(0);
    }
    out.push(rec.label.byte());
    out.extend_from_slice(&(report.len() as u32).to_le_bytes());
    out.extend_from_slice(report.as_bytes());
    for v in &rec.samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// The container carries no subject field; `subject_id` is supplied by the
/// caller (file stem for [`load_recording`]). An empty report decodes as
/// `None`.
pub fn decode_recording(bytes: &[u8], subject_id: &str) -> Result<Recording> {
    let mut r = Reader::new(bytes);
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format("bad magic, not an EEGREC01 container".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let e = r.u32()? as usize;
    let t = r.usize()?;
    let rate = r.f64()?;
    let labels = (0..e).map(|_| r.cstr()).collect::<Result<Vec<_>>>()?;
    let label = Label::from_byte(r.u8()?)?;
    let n = r.u32()? as usize;
    let report = r.utf8(n)?;
    let total = e.checked_mul(t).ok_or_else(|| Error::Corruption("sample count overflows".into()))?;
    let samples = r.f32_vec(total)?;
    if !r.is_at_end() {
        return Err(Error::Corruption("trailing bytes after samples".into()));
    }
    let report = (!report.is_empty()).then_some(report);
    Recording::new(labels, rate, samples, label, report, subject_id).map_err(|err| match err {
        Error::Io { .. } | Error::Corruption(_) => err,
        other => Error::Corruption(other.to_string()),
    })
}

pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    write_file(path, &encode_recording(rec))
}

pub fn load_recording(path: &Path) -> Result<Recording> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    decode_recording(&read_file(path)?, stem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Eval,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Eval => "eval",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Dataset membership: one `path<TAB>split` line per recording. Relative
/// paths are resolved against the manifest's directory on read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(PathBuf, Split)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(p, s)| format!("{}\t{s}\n", p.display())).collect()
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (path, split) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected `path split`".into() })?;
            let split = split.parse().map_err(|msg| Error::Parse { line: i + 1, msg })?;
            entries.push((base.join(path.trim()), split));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_text().as_bytes())
    }

    pub fn paths(&self, split: Split) -> impl Iterator<Item = &Path> {
        self.entries.iter().filter(move |(_, s)| *s == split).map(|(p, _)| p.as_path())
    }
}
