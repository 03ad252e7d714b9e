//! Static SVG views of ego frames.

use std::fmt::Write;

use crate::map_model::{FeatureClass, MapFrame};
use crate::scalar::Scalar;

/// One overlay drawn on a frame.
pub struct Layer<'a, T> {
    pub label: &'a str,
    pub frame: &'a MapFrame<T>,
    pub dashed: bool,
    pub opacity: f64,
}

fn class_color(c: FeatureClass) -> &'static str {
    match c {
        FeatureClass::LaneCenter => "#1f77b4",
        FeatureClass::LaneDivider => "#ff7f0e",
        FeatureClass::RoadBoundary => "#2ca02c",
        FeatureClass::Driveway => "#9467bd",
        FeatureClass::NoObject => "#7f7f7f",
    }
}

/// Renders layers over the field of view of the first layer, x to the
/// right and y up.
pub fn render_svg<T: Scalar>(layers: &[Layer<'_, T>]) -> String {
    let half = layers.first().map_or(45.0, |l| l.frame.half_side().as_f64());
    let side = 2.0 * half;
    let pad = 0.05 * side;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}" width="720" height="720">"#,
        -half - pad,
        -half - pad,
        side + 2.0 * pad,
        side + 2.0 * pad
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.3}" y="{:.3}" width="{side:.3}" height="{side:.3}" fill="#fafafa" stroke="#000" stroke-width="{:.3}"/>"##,
        -half,
        -half,
        side / 400.0
    );
    let _ = writeln!(s, r#"<g transform="scale(1,-1)">"#);
    let _ = writeln!(s, r##"<path d="M 2 0 L -1 1 L -1 -1 Z" fill="#d62728"/>"##);
    let width = side / 300.0;
    for layer in layers {
        let _ = writeln!(s, r#"<g id="{}" opacity="{}">"#, layer.label, layer.opacity);
        for f in &layer.frame.features {
            let mut d = String::new();
            for (k, p) in f.points.iter().enumerate() {
                let _ = write!(d, "{}{:.3} {:.3} ", if k == 0 { "M " } else { "L " }, p.x.as_f64(), p.y.as_f64());
            }
            if f.is_closed() {
                d.push('Z');
            }
            let dash = if layer.dashed {
                format!(r#" stroke-dasharray="{:.3} {:.3}""#, 4.0 * width, 3.0 * width)
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="{width:.3}"{dash}/>"#,
                d.trim_end(),
                class_color(f.feature_class)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</g>");
    for (k, layer) in layers.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="{:.3}" font-family="monospace">{}</text>"#,
            -half + k as f64 * side / 4.0,
            -half - pad * 0.3,
            pad * 0.5,
            layer.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// File-name-safe form of a frame id.
pub fn file_stem(frame_id: &str) -> String {
    frame_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
