//! Readers and writers for MOTChallenge text files, the binary embedding
//! sidecar, `seqinfo.ini`, and the flat tracker configuration.
//!
//! Layouts:
//!
//! * detections: `frame,-1,left,top,width,height,conf,-1,-1,-1`
//! * ground truth: `frame,id,left,top,width,height,flag,class,visibility`
//! * results: `frame,id,left,top,width,height,1,-1,-1,-1`, boxes printed
//!   with two decimals; the confidence column is always `1`.
//! * embedding sidecar: magic `MOTEMB01`, little-endian `u32` dimension,
//!   `u32` record count, then per record `u32 frame`, `u32 det_index` and
//!   `dimension` little-endian `f32` values. `det_index` is the 0-based row
//!   position of the detection within its frame in the detection file.
//!
//! Frames are 1-based everywhere. Text files may use LF or CRLF; blank
//! lines are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::association::GateConfig;
use crate::error::{Error, Result};
use crate::kalman::NoiseProfile;
use crate::model::{BoundingBox, Detection, Embedding};
use crate::tracker::{FrameOutput, TrackRecord, TrackerConfig};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"MOTEMB01";

/// Sidecar vectors further than this from unit norm are rejected.
pub const EMBEDDING_NORM_TOLERANCE: f64 = 1e-3;

/// A row dropped at load time because its box had no area.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: usize,
    pub frame: u32,
    /// Row position within its frame, as used by sidecar keys.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub frames: BTreeMap<u32, Vec<Detection>>,
    pub rejected: Vec<RejectedRow>,
}

impl DetectionSet {
    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.frames.keys().next_back().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtRecord {
    pub frame: u32,
    pub id: u64,
    pub bbox: BoundingBox,
    /// The "consider" flag column; zero marks rows excluded from scoring.
    pub flag: i64,
    pub class: i64,
    pub visibility: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    /// Records per frame, sorted by id.
    pub frames: BTreeMap<u32, Vec<GtRecord>>,
    pub rejected: Vec<RejectedRow>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.frames.keys().next_back().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub frame: u32,
    pub det_index: u32,
    pub vector: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSidecar {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeqInfo {
    pub name: Option<String>,
    pub frame_rate: Option<f64>,
    pub frame_count: Option<u32>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

/// Everything needed to track (and optionally score) one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBundle {
    pub name: String,
    pub frame_count: u32,
    pub detections: BTreeMap<u32, Vec<Detection>>,
    pub ground_truth: Option<GroundTruth>,
    pub info: SeqInfo,
}

impl SequenceBundle {
    pub fn from_detections(name: impl Into<String>, detections: DetectionSet) -> Self {
        let frame_count = detections.last_frame().unwrap_or(0);
        Self {
            name: name.into(),
            frame_count,
            detections: detections.frames,
            ground_truth: None,
            info: SeqInfo::default(),
        }
    }

    /// Loads detections plus the optional sidecar, ground truth and
    /// `seqinfo.ini`. The frame count is taken from `seqinfo.ini` when given,
    /// otherwise from the last frame seen in any input.
    pub fn load(
        detections: &Path,
        embeddings: Option<&Path>,
        ground_truth: Option<&Path>,
        seqinfo: Option<&Path>,
    ) -> Result<Self> {
        let mut dets = read_detections(detections)?;
        if let Some(path) = embeddings {
            attach_embeddings(&mut dets, &read_embeddings(path)?)?;
        }
        let gt = ground_truth.map(read_ground_truth).transpose()?;
        let info = seqinfo.map(read_seqinfo).transpose()?.unwrap_or_default();

        let seen = dets
            .last_frame()
            .into_iter()
            .chain(gt.as_ref().and_then(GroundTruth::last_frame))
            .max()
            .unwrap_or(0);
        let frame_count = match info.frame_count {
            Some(n) if n < seen => {
                return Err(Error::InputFormat(format!(
                    "seqinfo declares {n} frames but inputs reach frame {seen}"
                )))
            }
            Some(n) => n,
            None => seen,
        };
        let name = info.name.clone().unwrap_or_else(|| {
            detections
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sequence".into())
        });
        Ok(Self {
            name,
            frame_count,
            detections: dets.frames,
            ground_truth: gt,
            info,
        })
    }

    pub fn detections_in(&self, frame: u32) -> &[Detection] {
        self.detections.get(&frame).map_or(&[], Vec::as_slice)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with 1-based line numbers; handles CRLF.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    fields: Vec<&'a str>,
}

impl<'a> Row<'a> {
    fn new(path: &'a Path, line: usize, text: &'a str, min_fields: usize) -> Result<Self> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        let row = Self { path, line, fields };
        if row.fields.len() < min_fields {
            return Err(row.error(format!(
                "expected at least {min_fields} comma-separated fields, found {}",
                row.fields.len()
            )));
        }
        Ok(row)
    }

    fn error(&self, message: String) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message,
        }
    }

    fn real(&self, i: usize, name: &str) -> Result<f64> {
        let v: f64 = self.fields[i]
            .parse()
            .map_err(|_| self.error(format!("{name} `{}` is not a number", self.fields[i])))?;
        if !v.is_finite() {
            return Err(self.error(format!("{name} `{}` is not finite", self.fields[i])));
        }
        Ok(v)
    }

    fn real_or(&self, i: usize, name: &str, default: f64) -> Result<f64> {
        if i < self.fields.len() {
            self.real(i, name)
        } else {
            Ok(default)
        }
    }

    /// Integer field; integral reals such as `3.0` are accepted too.
    fn int(&self, i: usize, name: &str) -> Result<i64> {
        let s = self.fields[i];
        if let Ok(v) = s.parse::<i64>() {
            return Ok(v);
        }
        match s.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
            _ => Err(self.error(format!("{name} `{s}` is not an integer"))),
        }
    }

    fn int_or(&self, i: usize, name: &str, default: i64) -> Result<i64> {
        if i < self.fields.len() {
            self.int(i, name)
        } else {
            Ok(default)
        }
    }

    fn frame(&self) -> Result<u32> {
        let f = self.int(0, "frame")?;
        u32::try_from(f)
            .ok()
            .filter(|&f| f >= 1)
            .ok_or_else(|| self.error(format!("frame {f} is not a positive 1-based index")))
    }

    fn id(&self) -> Result<u64> {
        let id = self.int(1, "id")?;
        u64::try_from(id).map_err(|_| self.error(format!("id {id} is negative")))
    }

    fn bbox(&self) -> Result<std::result::Result<BoundingBox, String>> {
        let l = self.real(2, "bb_left")?;
        let t = self.real(3, "bb_top")?;
        let w = self.real(4, "bb_width")?;
        let h = self.real(5, "bb_height")?;
        Ok(BoundingBox::new(l, t, w, h).map_err(|_| format!("non-positive box extent {w}x{h}")))
    }
}

pub fn read_detections(path: &Path) -> Result<DetectionSet> {
    parse_detections(&read_text(path)?, path)
}

/// Parses detection text; `path` is only used in error messages.
pub fn parse_detections(text: &str, path: &Path) -> Result<DetectionSet> {
    let mut set = DetectionSet::default();
    let mut next_index: HashMap<u32, usize> = HashMap::new();
    for (line, content) in data_lines(text) {
        let row = Row::new(path, line, content, 7)?;
        let frame = row.frame()?;
        let bbox = row.bbox()?;
        let confidence = row.real(6, "conf")?;
        let slot = next_index.entry(frame).or_insert(0);
        let index = *slot;
        *slot += 1;
        match bbox {
            Ok(bbox) => set
                .frames
                .entry(frame)
                .or_default()
                .push(Detection::new(frame, bbox, confidence).with_source_index(index)),
            Err(reason) => set.rejected.push(RejectedRow {
                line,
                frame,
                index,
                reason,
            }),
        }
    }
    Ok(set)
}

/// Writes detections in MOTChallenge `det.txt` layout, frames ascending and
/// each frame in `source_index` order.
pub fn write_detections(path: &Path, detections: &DetectionSet) -> Result<()> {
    let mut out = String::new();
    for dets in detections.frames.values() {
        let mut dets: Vec<&Detection> = dets.iter().collect();
        dets.sort_by_key(|d| d.source_index);
        for d in dets {
            let b = &d.bbox;
            writeln!(
                out,
                "{},-1,{},{},{},{},{},-1,-1,-1",
                d.frame,
                b.left(),
                b.top(),
                b.width(),
                b.height(),
                d.confidence
            )
            .expect("writing to a String cannot fail");
        }
    }
    write_text(path, &out)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    parse_ground_truth(&read_text(path)?, path)
}

/// Parses ground-truth text. Records may appear in any order; the result is
/// sorted by frame and id. Missing `flag`/`class`/`visibility` columns
/// default to `1`.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<GroundTruth> {
    let mut gt = GroundTruth::default();
    let mut seen = HashSet::new();
    let mut next_index: HashMap<u32, usize> = HashMap::new();
    for (line, content) in data_lines(text) {
        let row = Row::new(path, line, content, 6)?;
        let frame = row.frame()?;
        let id = row.id()?;
        let bbox = row.bbox()?;
        let flag = row.int_or(6, "flag", 1)?;
        let class = row.int_or(7, "class", 1)?;
        let visibility = row.real_or(8, "visibility", 1.0)?;
        if !seen.insert((frame, id)) {
            return Err(Error::InputFormat(format!(
                "{}:{line}: duplicate ground-truth id {id} in frame {frame}",
                path.display()
            )));
        }
        let slot = next_index.entry(frame).or_insert(0);
        let index = *slot;
        *slot += 1;
        match bbox {
            Ok(bbox) => gt.frames.entry(frame).or_default().push(GtRecord {
                frame,
                id,
                bbox,
                flag,
                class,
                visibility,
            }),
            Err(reason) => gt.rejected.push(RejectedRow {
                line,
                frame,
                index,
                reason,
            }),
        }
    }
    for records in gt.frames.values_mut() {
        records.sort_by_key(|r| r.id);
    }
    Ok(gt)
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    let mut out = String::new();
    for r in gt.frames.values().flatten() {
        let b = &r.bbox;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.frame,
            r.id,
            b.left(),
            b.top(),
            b.width(),
            b.height(),
            r.flag,
            r.class,
            r.visibility
        )
        .expect("writing to a String cannot fail");
    }
    write_text(path, &out)
}

/// Formats tracker output in the results layout.
pub fn format_results(outputs: &[FrameOutput]) -> String {
    let mut out = String::new();
    for o in outputs {
        for r in &o.records {
            let b = &r.bbox;
            writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,-1,-1,-1",
                o.frame,
                r.id,
                b.left(),
                b.top(),
                b.width(),
                b.height()
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

pub fn write_results(path: &Path, outputs: &[FrameOutput]) -> Result<()> {
    write_text(path, &format_results(outputs))
}

pub fn read_results(path: &Path) -> Result<Vec<FrameOutput>> {
    parse_results(&read_text(path)?, path)
}

/// Parses a results file (any file whose first six columns are
/// `frame,id,left,top,width,height`, including ground truth). Only frames
/// with at least one record are returned, ascending, records ordered by id.
pub fn parse_results(text: &str, path: &Path) -> Result<Vec<FrameOutput>> {
    let mut frames: BTreeMap<u32, Vec<TrackRecord>> = BTreeMap::new();
    for (line, content) in data_lines(text) {
        let row = Row::new(path, line, content, 6)?;
        let frame = row.frame()?;
        let id = row.id()?;
        let bbox = row.bbox()?.map_err(|reason| row.error(reason))?;
        frames
            .entry(frame)
            .or_default()
            .push(TrackRecord { id, bbox });
    }
    frames
        .into_iter()
        .map(|(frame, mut records)| {
            records.sort_by_key(|r| r.id);
            if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
                return Err(Error::InputFormat(format!(
                    "{}: duplicate id {} in frame {frame}",
                    path.display(),
                    w[0].id
                )));
            }
            Ok(FrameOutput { frame, records })
        })
        .collect()
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSidecar> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes, path)
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Decodes a sidecar. Vectors within [`EMBEDDING_NORM_TOLERANCE`] of unit
/// norm are renormalized; anything further off is a data error.
pub fn parse_embeddings(bytes: &[u8], path: &Path) -> Result<EmbeddingSidecar> {
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 16 {
        return Err(format_err(format!(
            "file is {} bytes, shorter than the 16-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != EMBEDDING_MAGIC {
        return Err(format_err("missing MOTEMB01 magic".into()));
    }
    let dim = le_u32(bytes, 8) as usize;
    let count = le_u32(bytes, 12) as usize;
    if dim == 0 {
        return Err(format_err("embedding dimension is zero".into()));
    }
    let record_len = 8 + 4 * dim;
    let expected = record_len
        .checked_mul(count)
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| format_err("record count overflows".into()))?;
    if bytes.len() < expected {
        return Err(format_err(format!(
            "truncated: header announces {count} records ({expected} bytes) but file has {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(format_err(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - expected
        )));
    }

    let data_err = |record: usize, message: String| Error::Data {
        path: path.to_path_buf(),
        record,
        message,
    };
    let mut keys = HashSet::with_capacity(count);
    let mut records = Vec::with_capacity(count);
    let mut values = vec![0f32; dim];
    for i in 0..count {
        let at = 16 + i * record_len;
        let frame = le_u32(bytes, at);
        let det_index = le_u32(bytes, at + 4);
        for (k, v) in values.iter_mut().enumerate() {
            *v = f32::from_le_bytes(
                bytes[at + 8 + 4 * k..at + 12 + 4 * k]
                    .try_into()
                    .expect("4-byte slice"),
            );
        }
        if !keys.insert((frame, det_index)) {
            return Err(data_err(
                i,
                format!("duplicate key (frame {frame}, det_index {det_index})"),
            ));
        }
        let norm = values
            .iter()
            .map(|&x| f64::from(x) * f64::from(x))
            .sum::<f64>()
            .sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > EMBEDDING_NORM_TOLERANCE {
            return Err(data_err(i, format!("vector norm {norm} is not unit")));
        }
        let vector = Embedding::normalize(&values).map_err(|e| data_err(i, e.to_string()))?;
        records.push(EmbeddingRecord {
            frame,
            det_index,
            vector,
        });
    }
    Ok(EmbeddingSidecar { dim, records })
}

pub fn encode_embeddings(sidecar: &EmbeddingSidecar) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + sidecar.records.len() * (8 + 4 * sidecar.dim));
    out.extend_from_slice(EMBEDDING_MAGIC);
    let dim = u32::try_from(sidecar.dim)
        .map_err(|_| Error::InputFormat(format!("dimension {} too large", sidecar.dim)))?;
    let count = u32::try_from(sidecar.records.len())
        .map_err(|_| Error::InputFormat("too many embedding records".into()))?;
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for r in &sidecar.records {
        if r.vector.dim() != sidecar.dim {
            return Err(Error::InputFormat(format!(
                "record (frame {}, det_index {}) has dimension {}, expected {}",
                r.frame,
                r.det_index,
                r.vector.dim(),
                sidecar.dim
            )));
        }
        out.extend_from_slice(&r.frame.to_le_bytes());
        out.extend_from_slice(&r.det_index.to_le_bytes());
        for &x in r.vector.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, sidecar: &EmbeddingSidecar) -> Result<()> {
    let bytes = encode_embeddings(sidecar)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Attaches each sidecar vector to the detection with the same
/// `(frame, det_index)`. Records addressing a rejected row are skipped;
/// records addressing nothing are an error.
pub fn attach_embeddings(detections: &mut DetectionSet, sidecar: &EmbeddingSidecar) -> Result<()> {
    let rejected: HashSet<(u32, usize)> = detections
        .rejected
        .iter()
        .map(|r| (r.frame, r.index))
        .collect();
    for (i, r) in sidecar.records.iter().enumerate() {
        let key = (r.frame, r.det_index as usize);
        let target = detections
            .frames
            .get_mut(&r.frame)
            .and_then(|dets| dets.iter_mut().find(|d| d.source_index == key.1));
        match target {
            Some(d) => d.embedding = Some(r.vector.clone()),
            None if rejected.contains(&key) => {}
            None => {
                return Err(Error::InputFormat(format!(
                    "embedding record {i} (frame {}, det_index {}) has no matching detection",
                    r.frame, r.det_index
                )))
            }
        }
    }
    Ok(())
}

pub fn read_seqinfo(path: &Path) -> Result<SeqInfo> {
    parse_seqinfo(&read_text(path)?, path)
}

/// Reads the `name`, `frameRate`, `seqLength`, `imWidth` and `imHeight`
/// keys; everything else is ignored.
pub fn parse_seqinfo(text: &str, path: &Path) -> Result<SeqInfo> {
    let mut info = SeqInfo::default();
    for (line, content) in data_lines(text) {
        if content.starts_with('[') || content.starts_with(';') || content.starts_with('#') {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
        let bad = |what: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{what} `{value}` is not valid"),
        };
        match key.as_str() {
            "name" => info.name = Some(value.to_string()),
            "framerate" => info.frame_rate = Some(value.parse().map_err(|_| bad("frameRate"))?),
            "seqlength" => info.frame_count = Some(value.parse().map_err(|_| bad("seqLength"))?),
            "imwidth" => info.width = Some(value.parse().map_err(|_| bad("imWidth"))?),
            "imheight" => info.height = Some(value.parse().map_err(|_| bad("imHeight"))?),
            _ => {}
        }
    }
    Ok(info)
}

/// Tracker settings plus the evaluation overlap threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub tracker: TrackerConfig,
    pub iou_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            iou_threshold: 0.5,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "n_init",
    "max_age",
    "min_confidence",
    "min_box_height",
    "max_cosine_distance",
    "gating_chi2_threshold",
    "max_iou_distance",
    "gallery_budget",
    "std_weight_position",
    "std_weight_velocity",
    "iou_threshold",
];

impl Config {
    /// Renders every key in `key = value` form; parsing the result yields
    /// an identical config.
    pub fn to_text(&self) -> String {
        let t = &self.tracker;
        let g: &GateConfig = &t.gate;
        let n: &NoiseProfile = &t.noise;
        let values = [
            t.n_init.to_string(),
            t.max_age.to_string(),
            format!("{:?}", t.min_confidence),
            format!("{:?}", t.min_box_height),
            format!("{:?}", g.max_cosine_distance),
            format!("{:?}", g.gating_chi2_threshold),
            format!("{:?}", g.max_iou_distance),
            g.gallery_budget.to_string(),
            format!("{:?}", n.std_weight_position),
            format!("{:?}", n.std_weight_velocity),
            format!("{:?}", self.iou_threshold),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

pub fn read_config(path: &Path) -> Result<Config> {
    parse_config(&read_text(path)?)
}

pub fn write_config(path: &Path, config: &Config) -> Result<()> {
    write_text(path, &config.to_text())
}

/// Parses flat `key = value` lines. `#` starts a comment; every key is
/// optional and unknown or repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut config = Config::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config {
            key: key.to_string(),
            line,
            message,
        };
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(content, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) {
            return Err(err(key, "unknown key".into()));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(key, "key given more than once".into()));
        }

        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(key, format!("`{value}` is not a finite number")))
        };
        let integer = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| err(key, format!("`{value}` is not a non-negative integer")))
        };
        let range = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(err(key, format!("`{value}` out of range: {what}")))
            }
        };

        let t = &mut config.tracker;
        match key {
            "n_init" => {
                let v = integer()?;
                range((1..=u64::from(u32::MAX)).contains(&v), "must be >= 1")?;
                t.n_init = v as u32;
            }
            "max_age" => {
                let v = integer()?;
                range((1..=u64::from(u32::MAX)).contains(&v), "must be >= 1")?;
                t.max_age = v as u32;
            }
            "min_confidence" => t.min_confidence = real()?,
            "min_box_height" => {
                let v = real()?;
                range(v >= 0.0, "must be >= 0")?;
                t.min_box_height = v;
            }
            "max_cosine_distance" => {
                let v = real()?;
                range(v > 0.0 && v <= 2.0, "must lie in (0, 2]")?;
                t.gate.max_cosine_distance = v;
            }
            "gating_chi2_threshold" => {
                let v = real()?;
                range(v > 0.0, "must be > 0")?;
                t.gate.gating_chi2_threshold = v;
            }
            "max_iou_distance" => {
                let v = real()?;
                range(v > 0.0 && v <= 1.0, "must lie in (0, 1]")?;
                t.gate.max_iou_distance = v;
            }
            "gallery_budget" => {
                let v = integer()?;
                range(v >= 1, "must be >= 1")?;
                t.gate.gallery_budget = usize::try_from(v).unwrap_or(usize::MAX);
            }
            "std_weight_position" => {
                let v = real()?;
                range(v > 0.0, "must be > 0")?;
                t.noise.std_weight_position = v;
            }
            "std_weight_velocity" => {
                let v = real()?;
                range(v > 0.0, "must be > 0")?;
                t.noise.std_weight_velocity = v;
            }
            "iou_threshold" => {
                let v = real()?;
                range(v > 0.0 && v <= 1.0, "must lie in (0, 1]")?;
                config.iou_threshold = v;
            }
            _ => unreachable!("key list checked above"),
        }
    }
    Ok(config)
}

/// Default results path when none is given: `<stem>_results.txt` next to
/// the detections file.
pub fn default_results_path(detections: &Path) -> PathBuf {
    let stem = detections
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    detections.with_file_name(format!("{stem}_results.txt"))
}
