//! Track lifecycle and the per-frame tracking loop.

use crate::association::{associate, FeatureGallery, GateConfig};
use crate::error::{Error, Result};
use crate::kalman::{KalmanFilter, NoiseProfile, TrackState};
use crate::model::{state_to_box, BoundingBox, Detection, Embedding};
use crate::motio::SequenceBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub status: TrackStatus,
    /// Number of measurement updates, including the initiating detection.
    pub hits: u32,
    /// Frames since initiation, starting at 1.
    pub age: u32,
    pub time_since_update: u32,
    pub gallery: FeatureGallery,
}

impl Track {
    pub fn new(
        id: u64,
        state: TrackState,
        gallery_budget: usize,
        feature: Option<Embedding>,
    ) -> Self {
        let mut gallery = FeatureGallery::new(gallery_budget);
        if let Some(f) = feature {
            gallery.push(f);
        }
        Self {
            id,
            state,
            status: TrackStatus::Tentative,
            hits: 1,
            age: 1,
            time_since_update: 0,
            gallery,
        }
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        state_to_box(&self.state.mean)
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    pub fn is_deleted(&self) -> bool {
        self.status == TrackStatus::Deleted
    }

    fn predict(&mut self, kf: &KalmanFilter) {
        self.state = kf.predict(&self.state);
        self.age += 1;
        self.time_since_update += 1;
    }

    fn update(&mut self, kf: &KalmanFilter, detection: &Detection, n_init: u32) -> Result<()> {
        self.state = kf.update(&self.state, &detection.bbox.to_measurement())?;
        if let Some(e) = &detection.embedding {
            self.gallery.push(e.clone());
        }
        self.hits += 1;
        self.time_since_update = 0;
        if self.status == TrackStatus::Tentative && self.hits >= n_init {
            self.status = TrackStatus::Confirmed;
        }
        Ok(())
    }

    fn mark_missed(&mut self, max_age: u32) {
        if self.status == TrackStatus::Tentative || self.time_since_update > max_age {
            self.status = TrackStatus::Deleted;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Consecutive matches needed before a track is confirmed.
    pub n_init: u32,
    /// Frames a confirmed track may coast unmatched before deletion. Also
    /// the depth of the matching cascade.
    pub max_age: u32,
    pub min_confidence: f64,
    pub min_box_height: f64,
    pub gate: GateConfig,
    pub noise: NoiseProfile,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_init: 3,
            max_age: 30,
            min_confidence: 0.3,
            min_box_height: 0.0,
            gate: GateConfig::default(),
            noise: NoiseProfile::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub id: u64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame: u32,
    /// Confirmed tracks updated in this frame, ordered by id.
    pub records: Vec<TrackRecord>,
}

/// Tracking state for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    kf: KalmanFilter,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: u32,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            kf: KalmanFilter::new(config.noise),
            tracks: Vec::new(),
            next_id: 1,
            last_frame: 0,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live (not yet deleted) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Total number of identities allocated so far.
    pub fn ids_allocated(&self) -> u64 {
        self.next_id - 1
    }

    /// Processes one frame. `frame` must exceed every previously processed
    /// frame; skipped frame numbers are not replayed.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<FrameOutput> {
        if frame <= self.last_frame || frame == 0 {
            return Err(Error::Sequencing {
                previous: self.last_frame,
                got: frame,
            });
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::Sequencing {
                previous: frame,
                got: d.frame,
            });
        }
        self.last_frame = frame;

        let detections: Vec<Detection> = detections
            .iter()
            .filter(|d| {
                d.confidence >= self.config.min_confidence
                    && d.bbox.height() >= self.config.min_box_height
            })
            .cloned()
            .collect();

        for track in &mut self.tracks {
            track.predict(&self.kf);
        }

        let assignment = associate(
            &self.kf,
            &self.tracks,
            &detections,
            &self.config.gate,
            self.config.max_age,
        )?;

        for &(t, d) in &assignment.matches {
            self.tracks[t].update(&self.kf, &detections[d], self.config.n_init)?;
        }
        for &t in &assignment.unmatched_rows {
            self.tracks[t].mark_missed(self.config.max_age);
        }
        for &d in &assignment.unmatched_cols {
            self.initiate(&detections[d]);
        }
        self.tracks.retain(|t| !t.is_deleted());

        let mut records = Vec::new();
        for t in &self.tracks {
            if t.is_confirmed() && t.time_since_update == 0 {
                records.push(TrackRecord {
                    id: t.id,
                    bbox: t.bbox()?,
                });
            }
        }
        records.sort_by_key(|r| r.id);
        Ok(FrameOutput { frame, records })
    }

    fn initiate(&mut self, detection: &Detection) {
        let state = self.kf.initiate(&detection.bbox.to_measurement());
        let mut track = Track::new(
            self.next_id,
            state,
            self.config.gate.gallery_budget,
            detection.embedding.clone(),
        );
        if track.hits >= self.config.n_init {
            track.status = TrackStatus::Confirmed;
        }
        self.next_id += 1;
        self.tracks.push(track);
    }
}

/// Runs a fresh tracker over frames `1..=frame_count` of the bundle. Frames
/// without detections still advance prediction and aging.
pub fn run_sequence(source: &SequenceBundle, config: &TrackerConfig) -> Result<Vec<FrameOutput>> {
    let mut tracker = Tracker::new(*config);
    (1..=source.frame_count)
        .map(|frame| tracker.step(frame, source.detections_in(frame)))
        .collect()
}
