//! Oracles and builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use mottrack::model::{BoundingBox, Detection, Embedding};
use mottrack::motio::{GroundTruth, GtRecord, SequenceBundle};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

/// Runs the CLI in-process. Returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = mottrack::cli::run(
        std::iter::once("mottrack").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Minimum total cost over every way of pairing `min(rows, cols)` rows and
/// columns one-to-one, by exhaustive enumeration.
pub fn brute_force_min_cost(costs: &[Vec<f64>]) -> f64 {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    fn go(costs: &[Vec<f64>], r: usize, used: &mut [bool], need: usize, acc: f64) -> f64 {
        if need == 0 {
            return acc;
        }
        if costs.len() - r < need {
            return f64::INFINITY;
        }
        // skip this row (only possible when rows > cols)
        let mut best = go(costs, r + 1, used, need, acc);
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.min(go(costs, r + 1, used, need - 1, acc + costs[r][c]));
                used[c] = false;
            }
        }
        best
    }
    go(costs, 0, &mut vec![false; cols], rows.min(cols), 0.0)
}

/// Chi-square CDF with 4 degrees of freedom.
pub fn chi2_4_cdf(x: f64) -> f64 {
    1.0 - (-x / 2.0).exp() * (1.0 + x / 2.0)
}

/// Inverse of [`chi2_4_cdf`] by bisection.
pub fn chi2_4_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_4_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scalar position/velocity filter for a single box coordinate.
#[derive(Debug, Clone, Copy)]
struct AxisFilter {
    x: f64,
    dx: f64,
    p00: f64,
    p01: f64,
    p11: f64,
}

/// The box filter written as four uncoupled 2-state filters, one per
/// measured coordinate `(u, v, aspect, h)`. The 8-state filter's covariance
/// stays block diagonal, so the two must agree up to rounding.
#[derive(Debug, Clone, Copy)]
pub struct AxisOracle {
    axes: [AxisFilter; 4],
    wp: f64,
    wv: f64,
}

impl AxisOracle {
    pub fn new(z: [f64; 4], wp: f64, wv: f64) -> Self {
        let h = z[3];
        let pos = [2.0 * wp * h, 2.0 * wp * h, 1e-2, 2.0 * wp * h];
        let vel = [10.0 * wv * h, 10.0 * wv * h, 1e-5, 10.0 * wv * h];
        let axes = std::array::from_fn(|i| AxisFilter {
            x: z[i],
            dx: 0.0,
            p00: pos[i] * pos[i],
            p01: 0.0,
            p11: vel[i] * vel[i],
        });
        Self { axes, wp, wv }
    }

    pub fn predict(&mut self) {
        let h = self.axes[3].x;
        let q0 = [self.wp * h, self.wp * h, 1e-2, self.wp * h];
        let q1 = [self.wv * h, self.wv * h, 1e-5, self.wv * h];
        for (i, a) in self.axes.iter_mut().enumerate() {
            a.x += a.dx;
            a.p00 += 2.0 * a.p01 + a.p11 + q0[i] * q0[i];
            a.p01 += a.p11;
            a.p11 += q1[i] * q1[i];
        }
    }

    pub fn update(&mut self, z: [f64; 4]) {
        let h = self.axes[3].x;
        let r = [self.wp * h, self.wp * h, 1e-1, self.wp * h];
        for (i, a) in self.axes.iter_mut().enumerate() {
            let s = a.p00 + r[i] * r[i];
            let (k0, k1) = (a.p00 / s, a.p01 / s);
            let innovation = z[i] - a.x;
            a.x += k0 * innovation;
            a.dx += k1 * innovation;
            let (p00, p01, p11) = (a.p00, a.p01, a.p11);
            a.p00 = p00 - k0 * k0 * s;
            a.p01 = p01 - k0 * k1 * s;
            a.p11 = p11 - k1 * k1 * s;
        }
    }

    /// `(left, top, width, height)` of the current estimate.
    pub fn ltwh(&self) -> [f64; 4] {
        let (u, v, a, h) = (
            self.axes[0].x,
            self.axes[1].x,
            self.axes[2].x,
            self.axes[3].x,
        );
        let w = a * h;
        [u - w / 2.0, v - h / 2.0, w, h]
    }
}

pub fn measurement(b: &BoundingBox) -> [f64; 4] {
    let (u, v) = b.center();
    [u, v, b.width() / b.height(), b.height()]
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn bbox(l: f64, t: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::new(l, t, w, h).unwrap()
}

fn unit_embedding(seed: usize, frame: u32) -> Embedding {
    // one dominant axis per target plus a small frame-dependent wobble
    let mut v = [0.0f32; 8];
    v[seed] = 1.0;
    v[(seed + 3) % 8] = 0.05 * ((frame as f32) * 0.7).sin();
    v[(seed + 5) % 8] = 0.05 * ((frame as f32) * 1.3).cos();
    Embedding::normalize(&v).unwrap()
}

/// Two 40x100 targets walk toward each other at 3 px/frame, coincide at
/// frame 21 and walk back the way they came. Returns the detections (with
/// embeddings when `appearance` is set) and the matching ground truth.
pub fn bounce_sequence(appearance: bool) -> (SequenceBundle, GroundTruth) {
    const FRAMES: u32 = 40;
    let offset = |f: u32| 3.0 * (20.0 - (f as f64 - 21.0).abs());
    let mut detections = BTreeMap::new();
    let mut gt = GroundTruth::default();
    for f in 1..=FRAMES {
        let boxes = [
            bbox(100.0 + offset(f), 200.0, 40.0, 100.0),
            bbox(220.0 - offset(f), 200.0, 40.0, 100.0),
        ];
        let mut dets = Vec::new();
        let mut recs = Vec::new();
        for (k, b) in boxes.iter().enumerate() {
            let mut d = Detection::new(f, *b, 0.9).with_source_index(k);
            if appearance {
                d = d.with_embedding(unit_embedding(k, f));
            }
            dets.push(d);
            recs.push(GtRecord {
                frame: f,
                id: k as u64 + 1,
                bbox: *b,
                flag: 1,
                class: 1,
                visibility: 1.0,
            });
        }
        detections.insert(f, dets);
        gt.frames.insert(f, recs);
    }
    let bundle = SequenceBundle {
        name: "bounce".into(),
        frame_count: FRAMES,
        detections,
        ground_truth: None,
        info: Default::default(),
    };
    (bundle, gt)
}
