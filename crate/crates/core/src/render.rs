//! Top-down SVG rendering of a scene.
//!
//! The image looks down on the surface with its front edge (+x) at the
//! bottom and its left side (+y) on the left. Output is byte-stable for a
//! given scene.

use std::fmt::Write;

use crate::catalog::Catalog;
use crate::geometry::Point2;
use crate::scene::SceneState;

/// Pixels per meter.
pub const SCALE: f64 = 500.0;

const FILLS: [&str; 8] = [
    "#8fb3d9", "#e6a57e", "#9fd18b", "#d98fb3", "#c9b77a", "#8fd1c9", "#b39fd9", "#d9d28f",
];

struct Frame {
    max_y: f64,
    min_x: f64,
}

impl Frame {
    fn map(&self, p: &Point2) -> (f64, f64) {
        ((self.max_y - p.y) * SCALE, (p.x - self.min_x) * SCALE)
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(scene: &SceneState, catalog: &Catalog) -> String {
    let b = scene.bounds;
    let frame = Frame {
        max_y: b.max_y,
        min_x: b.min_x,
    };
    let (w, h) = (num(b.width() * SCALE), num(b.depth() * SCALE));
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(out, r##"  <rect class="bounds" x="0.00" y="0.00" width="{w}" height="{h}" fill="#f4f1ea" stroke="#333333" stroke-width="2"/>"##).unwrap();
    for (n, (o, a)) in scene.with_assets(catalog).enumerate() {
        let fp = o.footprint(a);
        let points: Vec<String> = fp
            .vertices()
            .iter()
            .map(|p| {
                let (x, y) = frame.map(p);
                format!("{},{}", num(x), num(y))
            })
            .collect();
        let fill = FILLS[n % FILLS.len()];
        writeln!(out, r##"  <polygon class="object" points="{}" fill="{fill}" fill-opacity="0.8" stroke="#222222" stroke-width="1"/>"##, points.join(" ")).unwrap();

        // Front arrow from the pose origin, half the smaller footprint extent long.
        let (lo, hi) = fp.aabb();
        let len = 0.25 * (hi.x - lo.x).min(hi.y - lo.y);
        let c = o.pose.xy();
        let tip = Point2::new(c.x + len * o.pose.yaw.cos(), c.y + len * o.pose.yaw.sin());
        let ((x0, y0), (x1, y1)) = (frame.map(&c), frame.map(&tip));
        writeln!(
            out,
            r##"  <line class="front" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#b00000" stroke-width="2"/>"##,
            num(x0),
            num(y0),
            num(x1),
            num(y1)
        )
        .unwrap();
        writeln!(
            out,
            r##"  <text class="label" x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" fill="#000000">{}</text>"##,
            num(x0),
            num(y0 - 4.0),
            escape(&o.id)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
