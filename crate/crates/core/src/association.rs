//! Gated cost matrices and the two-stage association: an appearance
//! matching cascade that serves recently seen tracks first, followed by IoU
//! matching on whatever is left.

use std::collections::VecDeque;

use crate::assignment::{min_cost_matching, Assignment, CostMatrix, INFEASIBLE};
use crate::error::{Error, Result};
use crate::kalman::{KalmanFilter, TrackState};
use crate::model::{iou, state_to_box, Detection, Embedding, Measurement};
use crate::tracker::{Track, TrackStatus};

/// 0.95 quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_95_4DOF: f64 = 9.4877;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    pub max_cosine_distance: f64,
    pub gating_chi2_threshold: f64,
    pub max_iou_distance: f64,
    pub gallery_budget: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            max_cosine_distance: 0.2,
            gating_chi2_threshold: CHI2_95_4DOF,
            max_iou_distance: 0.7,
            gallery_budget: 100,
        }
    }
}

/// Bounded history of a track's appearance embeddings; the oldest entry is
/// evicted once the budget is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGallery {
    budget: usize,
    features: VecDeque<Embedding>,
}

impl FeatureGallery {
    pub fn new(budget: usize) -> Self {
        Self {
            budget: budget.max(1),
            features: VecDeque::new(),
        }
    }

    pub fn push(&mut self, embedding: Embedding) {
        if self.features.len() == self.budget {
            self.features.pop_front();
        }
        self.features.push_back(embedding);
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn iter(&self) -> impl Iterator<Item = &Embedding> {
        self.features.iter()
    }

    /// Smallest cosine distance `1 - g·e` over the stored vectors, or `None`
    /// for an empty gallery.
    pub fn distance(&self, embedding: &Embedding) -> Option<f64> {
        self.features
            .iter()
            .map(|g| 1.0 - g.dot(embedding))
            .reduce(f64::min)
    }
}

/// One cost-matrix row: the appearance distance from `gallery` to each
/// detection. An empty gallery yields an all-infeasible row.
pub fn cosine_cost(gallery: &FeatureGallery, detections: &[Detection]) -> Result<Vec<f64>> {
    cosine_row(gallery, &detections.iter().collect::<Vec<_>>())
}

fn cosine_row(gallery: &FeatureGallery, detections: &[&Detection]) -> Result<Vec<f64>> {
    detections
        .iter()
        .map(|d| {
            let e = d.embedding.as_ref().ok_or(Error::MissingFeature {
                index: d.source_index,
            })?;
            Ok(gallery.distance(e).unwrap_or(INFEASIBLE))
        })
        .collect()
}

/// Marks entries whose squared Mahalanobis distance exceeds `chi2_threshold`
/// as infeasible. Feasible entries keep their value.
pub fn gate_cost_matrix(
    kf: &KalmanFilter,
    costs: CostMatrix,
    tracks: &[TrackState],
    detections: &[Detection],
    chi2_threshold: f64,
) -> Result<CostMatrix> {
    gate_rows(
        kf,
        costs,
        &tracks.iter().collect::<Vec<_>>(),
        &detections.iter().collect::<Vec<_>>(),
        chi2_threshold,
    )
}

fn gate_rows(
    kf: &KalmanFilter,
    mut costs: CostMatrix,
    tracks: &[&TrackState],
    detections: &[&Detection],
    chi2_threshold: f64,
) -> Result<CostMatrix> {
    if costs.rows() != tracks.len() || costs.cols() != detections.len() {
        return Err(Error::InputFormat(format!(
            "cost matrix is {}x{} but got {} tracks and {} detections",
            costs.rows(),
            costs.cols(),
            tracks.len(),
            detections.len()
        )));
    }
    if detections.is_empty() {
        return Ok(costs);
    }
    let measurements: Vec<Measurement> =
        detections.iter().map(|d| d.bbox.to_measurement()).collect();
    for (row, state) in tracks.iter().enumerate() {
        let distances = kf.gating_distance(state, &measurements)?;
        for (col, d) in distances.into_iter().enumerate() {
            if d > chi2_threshold {
                costs.set_infeasible(row, col);
            }
        }
    }
    Ok(costs)
}

/// `1 - IoU` between each track's current box and each detection. Tracks
/// whose state no longer maps to a valid box get infeasible rows.
pub fn iou_cost(tracks: &[Track], detections: &[Detection]) -> CostMatrix {
    iou_rows(
        &tracks.iter().collect::<Vec<_>>(),
        &detections.iter().collect::<Vec<_>>(),
    )
}

fn iou_rows(tracks: &[&Track], detections: &[&Detection]) -> CostMatrix {
    let boxes: Vec<_> = tracks
        .iter()
        .map(|t| state_to_box(&t.state.mean).ok())
        .collect();
    CostMatrix::from_fn(tracks.len(), detections.len(), |r, c| match &boxes[r] {
        Some(b) => 1.0 - iou(b, &detections[c].bbox),
        None => INFEASIBLE,
    })
}

/// Matched `(track, detection)` pairs and the detection indices left over.
type Split = (Vec<(usize, usize)>, Vec<usize>);

/// Matches pairs within the given index subsets and maps the result back to
/// global indices. Returns matches and the detection indices left over.
fn match_subset(
    costs: &CostMatrix,
    max_cost: f64,
    track_indices: &[usize],
    detection_indices: &[usize],
) -> Split {
    let local = min_cost_matching(costs, max_cost);
    let matches = local
        .matches
        .iter()
        .map(|&(r, c)| (track_indices[r], detection_indices[c]))
        .collect();
    let left = local
        .unmatched_cols
        .iter()
        .map(|&c| detection_indices[c])
        .collect();
    (matches, left)
}

fn cascade(
    kf: &KalmanFilter,
    tracks: &[Track],
    detections: &[Detection],
    gate: &GateConfig,
    cascade_depth: u32,
    mut unmatched_detections: Vec<usize>,
) -> Result<Split> {
    let mut matches = Vec::new();
    for level in 1..=cascade_depth {
        if unmatched_detections.is_empty() {
            break;
        }
        let level_tracks: Vec<usize> = tracks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.status == TrackStatus::Confirmed && t.time_since_update == level)
            .map(|(i, _)| i)
            .collect();
        if level_tracks.is_empty() {
            continue;
        }
        let dets: Vec<&Detection> = unmatched_detections
            .iter()
            .map(|&j| &detections[j])
            .collect();
        let mut costs = CostMatrix::zeros(level_tracks.len(), dets.len());
        for (r, &ti) in level_tracks.iter().enumerate() {
            for (c, v) in cosine_row(&tracks[ti].gallery, &dets)?
                .into_iter()
                .enumerate()
            {
                costs.set(r, c, v);
            }
        }
        let states: Vec<&TrackState> = level_tracks.iter().map(|&i| &tracks[i].state).collect();
        let costs = gate_rows(kf, costs, &states, &dets, gate.gating_chi2_threshold)?;
        let (found, left) = match_subset(
            &costs,
            gate.max_cosine_distance,
            &level_tracks,
            &unmatched_detections,
        );
        matches.extend(found);
        unmatched_detections = left;
    }
    Ok((matches, unmatched_detections))
}

fn finish(tracks: usize, detections: usize, mut matches: Vec<(usize, usize)>) -> Assignment {
    matches.sort_unstable();
    let mut track_used = vec![false; tracks];
    let mut det_used = vec![false; detections];
    for &(t, d) in &matches {
        track_used[t] = true;
        det_used[d] = true;
    }
    Assignment {
        matches,
        unmatched_rows: (0..tracks).filter(|&t| !track_used[t]).collect(),
        unmatched_cols: (0..detections).filter(|&d| !det_used[d]).collect(),
    }
}

/// Appearance matching cascade over confirmed tracks.
///
/// Level `k` (for `k = 1..=cascade_depth`) matches the confirmed tracks last
/// updated exactly `k` frames ago against the detections still unmatched,
/// so recently seen tracks always get first pick. Costs are cosine
/// distances under the chi-square motion gate, capped at
/// `max_cosine_distance`. Only detections carrying an embedding take part.
pub fn matching_cascade(
    kf: &KalmanFilter,
    tracks: &[Track],
    detections: &[Detection],
    gate: &GateConfig,
    cascade_depth: u32,
) -> Result<Assignment> {
    let with_features: Vec<usize> = detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.embedding.is_some())
        .map(|(j, _)| j)
        .collect();
    let (matches, _) = cascade(kf, tracks, detections, gate, cascade_depth, with_features)?;
    Ok(finish(tracks.len(), detections.len(), matches))
}

/// Full association for one frame; tracks must already be predicted.
///
/// Stage one is [`matching_cascade`]. Stage two runs IoU matching, capped at
/// `max_iou_distance`, between the remaining detections and the tentative
/// tracks plus the confirmed tracks that were seen last frame but missed by
/// the cascade. When no detection carries an embedding the cascade is
/// skipped and every track enters the IoU stage.
pub fn associate(
    kf: &KalmanFilter,
    tracks: &[Track],
    detections: &[Detection],
    gate: &GateConfig,
    cascade_depth: u32,
) -> Result<Assignment> {
    let appearance = detections.iter().any(|d| d.embedding.is_some());

    let (mut matches, iou_tracks, remaining) = if appearance {
        let with_features: Vec<usize> = detections
            .iter()
            .enumerate()
            .filter(|(_, d)| d.embedding.is_some())
            .map(|(j, _)| j)
            .collect();
        let (matches, left) = cascade(kf, tracks, detections, gate, cascade_depth, with_features)?;
        let mut matched_track = vec![false; tracks.len()];
        for &(t, _) in &matches {
            matched_track[t] = true;
        }
        let candidates: Vec<usize> = tracks
            .iter()
            .enumerate()
            .filter(|&(i, t)| match t.status {
                TrackStatus::Confirmed => !matched_track[i] && t.time_since_update == 1,
                _ => true,
            })
            .map(|(i, _)| i)
            .collect();
        let mut remaining = left;
        remaining.extend(
            detections
                .iter()
                .enumerate()
                .filter(|(_, d)| d.embedding.is_none())
                .map(|(j, _)| j),
        );
        remaining.sort_unstable();
        (matches, candidates, remaining)
    } else {
        (
            Vec::new(),
            (0..tracks.len()).collect(),
            (0..detections.len()).collect(),
        )
    };

    if !iou_tracks.is_empty() && !remaining.is_empty() {
        let ts: Vec<&Track> = iou_tracks.iter().map(|&i| &tracks[i]).collect();
        let ds: Vec<&Detection> = remaining.iter().map(|&j| &detections[j]).collect();
        let costs = iou_rows(&ts, &ds);
        let (found, _) = match_subset(&costs, gate.max_iou_distance, &iou_tracks, &remaining);
        matches.extend(found);
    }
    Ok(finish(tracks.len(), detections.len(), matches))
}
