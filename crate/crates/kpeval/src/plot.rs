//! Per-keypoint error-circle figure.
//!
//! Each evaluated keypoint gets one circle per method, centred on a
//! reference skeleton position; the radius is the method's mean
//! torso-relative error scaled by the reference torso length, so radii are
//! directly comparable across keypoints and methods.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::pose::derive_virtual_points;
use crate::report::MetricReport;
use crate::skeleton::{KeypointId, CANONICAL_COUNT};

/// Fixed method color palette, assigned in method order.
pub const METHOD_COLORS: [&str; 8] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
];

/// A supine infant layout in figure coordinates, head at the top.
pub const DEFAULT_REFERENCE_POSE: [(f64, f64); CANONICAL_COUNT] = [
    (200.0, 80.0),  // nose
    (185.0, 65.0),  // left_eye
    (215.0, 65.0),  // right_eye
    (170.0, 78.0),  // left_ear
    (230.0, 78.0),  // right_ear
    (150.0, 140.0), // left_shoulder
    (250.0, 140.0), // right_shoulder
    (120.0, 220.0), // left_elbow
    (280.0, 220.0), // right_elbow
    (105.0, 300.0), // left_wrist
    (295.0, 300.0), // right_wrist
    (165.0, 330.0), // left_hip
    (235.0, 330.0), // right_hip
    (150.0, 420.0), // left_knee
    (250.0, 420.0), // right_knee
    (140.0, 500.0), // left_ankle
    (260.0, 500.0), // right_ankle
];

/// Skeleton bones drawn as guide lines under the circles.
const BONES: [(KeypointId, KeypointId); 12] = [
    (KeypointId::LShoulder, KeypointId::RShoulder),
    (KeypointId::LShoulder, KeypointId::LElbow),
    (KeypointId::LElbow, KeypointId::LWrist),
    (KeypointId::RShoulder, KeypointId::RElbow),
    (KeypointId::RElbow, KeypointId::RWrist),
    (KeypointId::LShoulder, KeypointId::LHip),
    (KeypointId::RShoulder, KeypointId::RHip),
    (KeypointId::LHip, KeypointId::RHip),
    (KeypointId::LHip, KeypointId::LKnee),
    (KeypointId::LKnee, KeypointId::LAnkle),
    (KeypointId::RHip, KeypointId::RKnee),
    (KeypointId::RKnee, KeypointId::RAnkle),
];

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("reference pose file {path}: {message}")]
    Reference { path: String, message: String },
    #[error("reference pose torso has zero length")]
    DegenerateReference,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One method's circle radii, in figure units.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCircles {
    pub method: String,
    pub color: String,
    pub radii: [Option<f64>; CANONICAL_COUNT],
}

/// Everything needed to draw the figure.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePlotSpec {
    pub reference: [(f64, f64); CANONICAL_COUNT],
    /// Torso length of the reference pose, in figure units.
    pub torso_units: f64,
    pub methods: Vec<MethodCircles>,
}

fn torso_of(reference: &[(f64, f64); CANONICAL_COUNT]) -> Result<f64, PlotError> {
    let mut slots = crate::pose::empty_slots();
    for (i, &(x, y)) in reference.iter().enumerate() {
        slots[i] = Some(crate::pose::Keypoint2D::new(x, y));
    }
    let v = derive_virtual_points(&slots);
    match (v.neck, v.midhip) {
        (Some(neck), Some(midhip)) => {
            let t = neck.distance(&midhip);
            if t > 0.0 {
                Ok(t)
            } else {
                Err(PlotError::DegenerateReference)
            }
        }
        _ => Err(PlotError::DegenerateReference),
    }
}

impl CirclePlotSpec {
    /// Build a spec from per-method reports: radius = mean error fraction
    /// times the reference torso length.
    pub fn from_reports(
        reports: &[&MetricReport],
        reference: [(f64, f64); CANONICAL_COUNT],
    ) -> Result<Self, PlotError> {
        let torso_units = torso_of(&reference)?;
        let mut methods = Vec::new();
        let mut sorted: Vec<&&MetricReport> = reports.iter().collect();
        sorted.sort_by(|a, b| a.method.cmp(&b.method));
        for (i, report) in sorted.iter().enumerate() {
            let mut radii = [None; CANONICAL_COUNT];
            for ks in &report.nmh_per_keypoint {
                let idx = ks.keypoint.canonical_index().expect("real keypoint");
                radii[idx] = Some(ks.mean / 100.0 * torso_units);
            }
            methods.push(MethodCircles {
                method: report.method.clone(),
                color: METHOD_COLORS[i % METHOD_COLORS.len()].to_string(),
                radii,
            });
        }
        Ok(CirclePlotSpec {
            reference,
            torso_units,
            methods,
        })
    }

    /// Load a reference pose from a `keypoint_name = x,y` text file. All 17
    /// real keypoints must be specified.
    pub fn load_reference(path: &Path) -> Result<[(f64, f64); CANONICAL_COUNT], PlotError> {
        let text = std::fs::read_to_string(path).map_err(|source| PlotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut out = [None; CANONICAL_COUNT];
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let rerr = |message: String| PlotError::Reference {
                path: path.display().to_string(),
                message,
            };
            let (name, coords) = line
                .split_once('=')
                .ok_or_else(|| rerr("expected `keypoint_name = x,y`".into()))?;
            let id = KeypointId::from_name(name.trim())
                .ok_or_else(|| rerr(format!("unknown keypoint `{}`", name.trim())))?;
            let idx = id
                .canonical_index()
                .ok_or_else(|| rerr(format!("virtual keypoint `{id}` not allowed")))?;
            let (x, y) = coords
                .split_once(',')
                .ok_or_else(|| rerr("expected two comma-separated coordinates".into()))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| rerr(format!("bad coordinate `{}`: {}", s.trim(), e)))
            };
            out[idx] = Some((parse(x)?, parse(y)?));
        }
        let mut reference = [(0.0, 0.0); CANONICAL_COUNT];
        for (i, slot) in out.iter().enumerate() {
            reference[i] = slot.ok_or_else(|| PlotError::Reference {
                path: path.display().to_string(),
                message: format!(
                    "missing keypoint `{}`",
                    KeypointId::from_canonical_index(i).unwrap()
                ),
            })?;
        }
        Ok(reference)
    }
}

/// Write the figure as a standalone SVG 1.1 document.
pub fn emit_circle_plot(spec: &CirclePlotSpec, path: &Path) -> Result<(), PlotError> {
    let mut svg = String::new();
    let legend_height = 26.0 * spec.methods.len() as f64 + 20.0;
    let (width, height) = (400.0, 560.0_f64.max(40.0 + legend_height));
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg version=\"1.1\" xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\">",
        width + 160.0,
        height
    );
    svg.push_str("  <rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    svg.push_str("  <g stroke=\"#cccccc\" stroke-width=\"2\">\n");
    for (a, b) in BONES {
        let (ax, ay) = spec.reference[a.canonical_index().unwrap()];
        let (bx, by) = spec.reference[b.canonical_index().unwrap()];
        let _ = writeln!(
            svg,
            "    <line x1=\"{ax}\" y1=\"{ay}\" x2=\"{bx}\" y2=\"{by}\"/>"
        );
    }
    svg.push_str("  </g>\n");

    // Reference keypoint positions (the circle centres).
    svg.push_str("  <g fill=\"#333333\">\n");
    for &(x, y) in &spec.reference {
        let _ = writeln!(svg, "    <circle cx=\"{x}\" cy=\"{y}\" r=\"2\"/>");
    }
    svg.push_str("  </g>\n");

    for method in &spec.methods {
        let _ = writeln!(
            svg,
            "  <g stroke=\"{}\" fill=\"none\" stroke-width=\"1.5\" data-method=\"{}\">",
            method.color, method.method
        );
        for (i, radius) in method.radii.iter().enumerate() {
            if let Some(r) = radius {
                let (x, y) = spec.reference[i];
                let name = KeypointId::from_canonical_index(i).unwrap().name();
                let _ = writeln!(
                    svg,
                    "    <circle cx=\"{x}\" cy=\"{y}\" r=\"{r}\" data-keypoint=\"{name}\"/>"
                );
            }
        }
        svg.push_str("  </g>\n");
    }

    // Legend.
    let lx = width + 20.0;
    let _ = writeln!(svg, "  <g font-family=\"sans-serif\" font-size=\"14\">");
    for (i, method) in spec.methods.iter().enumerate() {
        let ly = 40.0 + 26.0 * i as f64;
        let _ = writeln!(
            svg,
            "    <rect x=\"{lx}\" y=\"{}\" width=\"16\" height=\"16\" fill=\"{}\"/>",
            ly - 12.0,
            method.color
        );
        let _ = writeln!(
            svg,
            "    <text x=\"{}\" y=\"{ly}\">{}</text>",
            lx + 22.0,
            method.method
        );
    }
    svg.push_str("  </g>\n</svg>\n");

    std::fs::write(path, svg).map_err(|source| PlotError::Io {
        path: path.display().to_string(),
        source,
    })
}
