//! CLEAR-MOT and identity metrics in the MOTChallenge convention.
//!
//! Per frame, ground-truth objects first keep the hypothesis they were
//! matched to most recently (if that pairing still overlaps enough), then
//! the rest are matched by minimum `1 - IoU`. A switch is counted whenever a
//! ground-truth object is matched to a hypothesis id other than its previous
//! one, however many frames ago that was.
//!
//! Ground-truth rows are scored only if their flag is non-zero and their
//! class is pedestrian (`1`, or `-1` for files without classes). Hypotheses
//! that overlap a distractor (classes 2, 7, 8 and 12) are removed before
//! scoring instead of being counted as false positives.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::assignment::{solve, CostMatrix, INFEASIBLE};
use crate::error::{Error, Result};
use crate::model::{iou, BoundingBox};
use crate::motio::{GroundTruth, GtRecord};
use crate::tracker::FrameOutput;

pub const DISTRACTOR_CLASSES: [i64; 4] = [2, 7, 8, 12];

pub type LabeledBox = (u64, BoundingBox);

/// Is this ground-truth row part of the scored set?
pub fn is_evaluated(record: &GtRecord) -> bool {
    record.flag != 0 && (record.class == 1 || record.class == -1)
}

pub fn is_distractor(record: &GtRecord) -> bool {
    DISTRACTOR_CLASSES.contains(&record.class)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatch {
    pub gt_id: u64,
    pub hyp_id: u64,
    pub iou: f64,
    /// The gt object was last matched to a different hypothesis.
    pub switched: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameEvaluation {
    pub frame: u32,
    pub matches: Vec<FrameMatch>,
    /// Unmatched gt ids.
    pub misses: Vec<u64>,
    /// Unmatched hypothesis ids.
    pub false_positives: Vec<u64>,
}

impl FrameEvaluation {
    pub fn fp(&self) -> usize {
        self.false_positives.len()
    }

    pub fn fn_count(&self) -> usize {
        self.misses.len()
    }

    pub fn id_switches(&self) -> usize {
        self.matches.iter().filter(|m| m.switched).count()
    }

    pub fn num_gt(&self) -> usize {
        self.matches.len() + self.misses.len()
    }
}

/// The hypothesis each gt object was most recently matched to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Correspondence {
    last: HashMap<u64, u64>,
}

impl Correspondence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_match(&self, gt_id: u64) -> Option<u64> {
        self.last.get(&gt_id).copied()
    }
}

fn check_unique(objects: &[LabeledBox], what: &str, frame: u32) -> Result<()> {
    let mut seen = HashSet::with_capacity(objects.len());
    for (id, _) in objects {
        if !seen.insert(*id) {
            return Err(Error::InputFormat(format!(
                "duplicate {what} id {id} in frame {frame}"
            )));
        }
    }
    Ok(())
}

/// Matches one frame and advances `state`.
pub fn match_frame(
    frame: u32,
    gt: &[LabeledBox],
    hyp: &[LabeledBox],
    state: &mut Correspondence,
    iou_threshold: f64,
) -> Result<FrameEvaluation> {
    check_unique(gt, "ground-truth", frame)?;
    check_unique(hyp, "hypothesis", frame)?;

    let overlap: Vec<Vec<f64>> = gt
        .iter()
        .map(|(_, g)| hyp.iter().map(|(_, h)| iou(g, h)).collect())
        .collect();
    let hyp_pos: HashMap<u64, usize> = hyp
        .iter()
        .enumerate()
        .map(|(j, (id, _))| (*id, j))
        .collect();

    let mut gt_match: Vec<Option<usize>> = vec![None; gt.len()];
    let mut hyp_taken = vec![false; hyp.len()];

    for (i, (gid, _)) in gt.iter().enumerate() {
        let Some(&j) = state.last.get(gid).and_then(|h| hyp_pos.get(h)) else {
            continue;
        };
        if !hyp_taken[j] && overlap[i][j] >= iou_threshold {
            gt_match[i] = Some(j);
            hyp_taken[j] = true;
        }
    }

    let free_gt: Vec<usize> = (0..gt.len()).filter(|&i| gt_match[i].is_none()).collect();
    let free_hyp: Vec<usize> = (0..hyp.len()).filter(|&j| !hyp_taken[j]).collect();
    let costs = CostMatrix::from_fn(free_gt.len(), free_hyp.len(), |r, c| {
        let o = overlap[free_gt[r]][free_hyp[c]];
        if o >= iou_threshold {
            1.0 - o
        } else {
            INFEASIBLE
        }
    });
    for (r, c) in solve(&costs).matches {
        gt_match[free_gt[r]] = Some(free_hyp[c]);
        hyp_taken[free_hyp[c]] = true;
    }

    let mut eval = FrameEvaluation {
        frame,
        ..FrameEvaluation::default()
    };
    for (i, (gid, _)) in gt.iter().enumerate() {
        match gt_match[i] {
            Some(j) => {
                let hid = hyp[j].0;
                let switched = state.last.get(gid).is_some_and(|&prev| prev != hid);
                state.last.insert(*gid, hid);
                eval.matches.push(FrameMatch {
                    gt_id: *gid,
                    hyp_id: hid,
                    iou: overlap[i][j],
                    switched,
                });
            }
            None => eval.misses.push(*gid),
        }
    }
    eval.false_positives = (0..hyp.len())
        .filter(|&j| !hyp_taken[j])
        .map(|j| hyp[j].0)
        .collect();
    Ok(eval)
}

/// Count-based summary. Ratios are derived on demand, so summaries of
/// several sequences combine by plain addition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsSummary {
    pub num_gt: u64,
    pub num_hyp: u64,
    pub num_matches: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub iou_sum: f64,
    pub trajectories: u64,
    pub mostly_tracked: u64,
    pub mostly_lost: u64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl MetricsSummary {
    pub fn mota(&self) -> f64 {
        if self.num_gt == 0 {
            return 0.0;
        }
        1.0 - (self.false_negatives + self.false_positives + self.id_switches) as f64
            / self.num_gt as f64
    }

    /// Mean IoU of matched pairs; 0 when nothing matched.
    pub fn motp(&self) -> f64 {
        if self.num_matches == 0 {
            0.0
        } else {
            self.iou_sum / self.num_matches as f64
        }
    }

    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            0.0
        } else {
            (2 * self.idtp) as f64 / denom as f64
        }
    }

    pub fn mt_ratio(&self) -> f64 {
        ratio(self.mostly_tracked, self.trajectories)
    }

    pub fn ml_ratio(&self) -> f64 {
        ratio(self.mostly_lost, self.trajectories)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl AddAssign for MetricsSummary {
    fn add_assign(&mut self, o: Self) {
        self.num_gt += o.num_gt;
        self.num_hyp += o.num_hyp;
        self.num_matches += o.num_matches;
        self.false_positives += o.false_positives;
        self.false_negatives += o.false_negatives;
        self.id_switches += o.id_switches;
        self.iou_sum += o.iou_sum;
        self.trajectories += o.trajectories;
        self.mostly_tracked += o.mostly_tracked;
        self.mostly_lost += o.mostly_lost;
        self.idtp += o.idtp;
        self.idfp += o.idfp;
        self.idfn += o.idfn;
    }
}

/// Sums per-frame CLEAR counts and classifies every gt trajectory as mostly
/// tracked (matched in at least 80% of its frames) or mostly lost (at most
/// 20%). Identity counts are left at zero; see [`idf1`].
pub fn accumulate(frames: &[FrameEvaluation]) -> Result<MetricsSummary> {
    let mut s = MetricsSummary::default();
    // gt id -> (frames present, frames matched)
    let mut coverage: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for f in frames {
        s.num_gt += f.num_gt() as u64;
        s.num_hyp += (f.matches.len() + f.fp()) as u64;
        s.num_matches += f.matches.len() as u64;
        s.false_positives += f.fp() as u64;
        s.false_negatives += f.fn_count() as u64;
        s.id_switches += f.id_switches() as u64;
        for m in &f.matches {
            s.iou_sum += m.iou;
            let c = coverage.entry(m.gt_id).or_default();
            c.0 += 1;
            c.1 += 1;
        }
        for g in &f.misses {
            coverage.entry(*g).or_default().0 += 1;
        }
    }
    if s.num_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    s.trajectories = coverage.len() as u64;
    for &(total, matched) in coverage.values() {
        if 5 * matched >= 4 * total {
            s.mostly_tracked += 1;
        }
        if 5 * matched <= total {
            s.mostly_lost += 1;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityScore {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl IdentityScore {
    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            0.0
        } else {
            (2 * self.idtp) as f64 / denom as f64
        }
    }
}

/// Gt and hypothesis objects of one frame, already filtered for scoring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameObjects {
    pub frame: u32,
    pub gt: Vec<LabeledBox>,
    pub hyp: Vec<LabeledBox>,
}

/// Identity-level scores under the best one-to-one mapping between gt and
/// hypothesis trajectories.
///
/// A pair earns one identity true positive per frame in which both are
/// present with IoU at least `iou_threshold`. Every gt and hypothesis id also
/// gets a private dummy partner, so leaving an id unmapped costs exactly its
/// detection count.
pub fn idf1(frames: &[FrameObjects], iou_threshold: f64) -> Result<IdentityScore> {
    let mut gt_count: BTreeMap<u64, u64> = BTreeMap::new();
    let mut hyp_count: BTreeMap<u64, u64> = BTreeMap::new();
    let mut overlap_count: HashMap<(u64, u64), u64> = HashMap::new();
    for f in frames {
        check_unique(&f.gt, "ground-truth", f.frame)?;
        check_unique(&f.hyp, "hypothesis", f.frame)?;
        for (g, gb) in &f.gt {
            *gt_count.entry(*g).or_default() += 1;
            for (h, hb) in &f.hyp {
                if iou(gb, hb) >= iou_threshold {
                    *overlap_count.entry((*g, *h)).or_default() += 1;
                }
            }
        }
        for (h, _) in &f.hyp {
            *hyp_count.entry(*h).or_default() += 1;
        }
    }

    let gts: Vec<(u64, u64)> = gt_count.into_iter().collect();
    let hyps: Vec<(u64, u64)> = hyp_count.into_iter().collect();
    let (ng, nh) = (gts.len(), hyps.len());
    let costs = CostMatrix::from_fn(ng + nh, nh + ng, |r, c| match (r < ng, c < nh) {
        (true, true) => {
            let (g, gn) = gts[r];
            let (h, hn) = hyps[c];
            let m = overlap_count.get(&(g, h)).copied().unwrap_or(0);
            ((gn - m) + (hn - m)) as f64
        }
        (true, false) if c - nh == r => gts[r].1 as f64,
        (false, true) if r - ng == c => hyps[c].1 as f64,
        (false, false) => 0.0,
        _ => INFEASIBLE,
    });

    let mut idtp = 0;
    for (r, c) in solve(&costs).matches {
        if r < ng && c < nh {
            idtp += overlap_count
                .get(&(gts[r].0, hyps[c].0))
                .copied()
                .unwrap_or(0);
        }
    }
    let total_gt: u64 = gts.iter().map(|g| g.1).sum();
    let total_hyp: u64 = hyps.iter().map(|h| h.1).sum();
    Ok(IdentityScore {
        idtp,
        idfp: total_hyp - idtp,
        idfn: total_gt - idtp,
    })
}

fn suppress_distractors(
    records: &[GtRecord],
    hyp: Vec<LabeledBox>,
    iou_threshold: f64,
) -> Vec<LabeledBox> {
    if !records.iter().any(is_distractor) || hyp.is_empty() {
        return hyp;
    }
    let costs = CostMatrix::from_fn(records.len(), hyp.len(), |r, c| {
        let o = iou(&records[r].bbox, &hyp[c].1);
        if o >= iou_threshold {
            1.0 - o
        } else {
            INFEASIBLE
        }
    });
    let drop: HashSet<usize> = solve(&costs)
        .matches
        .into_iter()
        .filter(|&(r, _)| is_distractor(&records[r]))
        .map(|(_, c)| c)
        .collect();
    hyp.into_iter()
        .enumerate()
        .filter(|(j, _)| !drop.contains(j))
        .map(|(_, h)| h)
        .collect()
}

/// Aligns gt and hypotheses frame by frame over every frame that has
/// either, applying the scoring filter and distractor suppression.
pub fn prepare_frames(
    gt: &GroundTruth,
    hyp: &[FrameOutput],
    iou_threshold: f64,
) -> Result<Vec<FrameObjects>> {
    let mut hyp_by_frame: BTreeMap<u32, Vec<LabeledBox>> = BTreeMap::new();
    for out in hyp {
        let slot = hyp_by_frame.entry(out.frame).or_default();
        if !slot.is_empty() {
            return Err(Error::InputFormat(format!(
                "frame {} appears twice in results",
                out.frame
            )));
        }
        slot.extend(out.records.iter().map(|r| (r.id, r.bbox)));
    }
    let frames: BTreeSet<u32> = gt
        .frames
        .keys()
        .chain(hyp_by_frame.keys())
        .copied()
        .collect();

    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let records = gt.frames.get(&frame).map_or(&[][..], Vec::as_slice);
        let hyp = hyp_by_frame.remove(&frame).unwrap_or_default();
        let hyp = suppress_distractors(records, hyp, iou_threshold);
        let gt = records
            .iter()
            .filter(|r| is_evaluated(r))
            .map(|r| (r.id, r.bbox))
            .collect();
        out.push(FrameObjects { frame, gt, hyp });
    }
    Ok(out)
}

/// Full evaluation of one sequence.
pub fn evaluate_sequence(
    gt: &GroundTruth,
    hyp: &[FrameOutput],
    iou_threshold: f64,
) -> Result<MetricsSummary> {
    let frames = prepare_frames(gt, hyp, iou_threshold)?;
    let mut state = Correspondence::new();
    let evals = frames
        .iter()
        .map(|f| match_frame(f.frame, &f.gt, &f.hyp, &mut state, iou_threshold))
        .collect::<Result<Vec<_>>>()?;
    let mut summary = accumulate(&evals)?;
    let id = idf1(&frames, iou_threshold)?;
    summary.idtp = id.idtp;
    summary.idfp = id.idfp;
    summary.idfn = id.idfn;
    Ok(summary)
}

pub const REPORT_COLUMNS: [&str; 8] = ["MOTA", "MOTP", "IDF1", "IDs", "ML", "MT", "FP", "FN"];

/// One table row as printed: MOTA, MOTP, IDF1, ML and MT on a 0-100 scale,
/// counts as integers.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub values: [f64; 8],
}

fn is_count(column: usize) -> bool {
    matches!(column, 3 | 6 | 7)
}

fn is_percent(column: usize) -> bool {
    matches!(column, 4 | 5)
}

fn higher_is_better(column: usize) -> bool {
    matches!(column, 0 | 1 | 2 | 5)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl MetricRow {
    pub fn from_summary(model: impl Into<String>, s: &MetricsSummary) -> Self {
        Self {
            model: model.into(),
            values: [
                round2(100.0 * s.mota()),
                round2(100.0 * s.motp()),
                round2(100.0 * s.idf1()),
                s.id_switches as f64,
                round2(100.0 * s.ml_ratio()),
                round2(100.0 * s.mt_ratio()),
                s.false_positives as f64,
                s.false_negatives as f64,
            ],
        }
    }

    fn cell(&self, column: usize) -> String {
        let v = self.values[column];
        if is_count(column) {
            format!("{v:.0}")
        } else {
            format!("{v:.2}")
        }
    }

    fn display_cell(&self, column: usize) -> String {
        let mut s = self.cell(column);
        if is_percent(column) {
            s.push('%');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let cells: Vec<String> = (0..8).map(|c| self.cell(c)).collect();
        format!("{},{}", self.model, cells.join(","))
    }
}

pub fn csv_header() -> String {
    format!("Model,{}", REPORT_COLUMNS.join(","))
}

pub fn format_csv(rows: &[MetricRow]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Parses CSV text produced by [`format_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(h) if h.split(',').map(str::trim).eq(csv_header().split(',')) => {}
        Some(h) => return Err(Error::InputFormat(format!("unexpected CSV header `{h}`"))),
        None => return Err(Error::InputFormat("CSV has no header".into())),
    }
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 9 {
                return Err(Error::InputFormat(format!(
                    "CSV row `{line}` has {} fields, expected 9",
                    fields.len()
                )));
            }
            let mut values = [0.0; 8];
            for (v, f) in values.iter_mut().zip(&fields[1..]) {
                *v = f
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::InputFormat(format!("bad value `{f}` in `{line}`")))?;
            }
            Ok(MetricRow {
                model: fields[0].to_string(),
                values,
            })
        })
        .collect()
}

/// Aligned table with one row per model.
pub fn format_table(rows: &[MetricRow]) -> String {
    let name_width = rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<name_width$}", "Sequence");
    for c in REPORT_COLUMNS {
        let _ = write!(out, " {c:>8}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<name_width$}", r.model);
        for c in 0..8 {
            let _ = write!(out, " {:>8}", r.display_cell(c));
        }
        out.push('\n');
    }
    out
}

/// Comparison table with metrics as rows and models as columns. The best
/// value of each metric is suffixed with `*`; ties are all marked.
pub fn format_comparison(rows: &[MetricRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.model.len())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut out = format!("{:<6}", "Metric");
    for r in rows {
        let _ = write!(out, " {:>width$}", r.model);
    }
    out.push('\n');
    for (c, name) in REPORT_COLUMNS.iter().enumerate() {
        let cells: Vec<String> = rows.iter().map(|r| r.cell(c)).collect();
        // compare as printed so that equal-looking values tie
        let printed: Vec<f64> = cells
            .iter()
            .map(|s| s.parse().unwrap_or(f64::NAN))
            .collect();
        let best = if higher_is_better(c) {
            printed.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            printed.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let _ = write!(out, "{name:<6}");
        for (r, v) in rows.iter().zip(&printed) {
            let mut cell = r.display_cell(c);
            if *v == best {
                cell.push('*');
            }
            let _ = write!(out, " {cell:>width$}");
        }
        out.push('\n');
    }
    out
}
