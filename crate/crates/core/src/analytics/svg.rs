//! SVG map of the area with tourists colored by threat.

use crate::context::Situational;
use crate::geo::GeoPoint;
use crate::reasoning::ThreatVerdict;
use crate::repository::Snapshot;
use crate::world::AreaConfig;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapAnimal {
    pub point: GeoPoint,
    pub dangerous: bool,
}

struct View {
    area_min: GeoPoint,
    scale: f64,
    height: f64,
}

impl View {
    fn new(area: &AreaConfig) -> Self {
        let b = area.bounds;
        let scale = (WIDTH - 2.0 * MARGIN) / b.width().max(1.0);
        Self {
            area_min: b.min,
            scale,
            height: b.height() * scale + 2.0 * MARGIN,
        }
    }

    fn xy(&self, p: GeoPoint) -> (f64, f64) {
        (
            MARGIN + (p.x - self.area_min.x) * self.scale,
            self.height - MARGIN - (p.y - self.area_min.y) * self.scale,
        )
    }
}

fn polygon(cx: f64, cy: f64, r: f64, sides: usize, rotation: f64) -> String {
    (0..sides)
        .map(|k| {
            let a = rotation + std::f64::consts::TAU * k as f64 / sides as f64;
            format!("{:.1},{:.1}", cx + r * a.cos(), cy - r * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn marker(out: &mut String, s: Situational, x: f64, y: f64) {
    let r = 7.0;
    let style = "fill=\"none\" stroke=\"violet\" stroke-width=\"2\"";
    let _ = match s.shape() {
        "circle" => writeln!(
            out,
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{r}\" {style}/>"
        ),
        "square" => writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{}\" height=\"{}\" {style}/>",
            x - r,
            y - r,
            2.0 * r,
            2.0 * r
        ),
        "triangle" => writeln!(
            out,
            "<polygon points=\"{}\" {style}/>",
            polygon(x, y, r, 3, FRAC_PI_2)
        ),
        _ => writeln!(
            out,
            "<polygon points=\"{}\" {style}/>",
            polygon(x, y, r, 5, FRAC_PI_2)
        ),
    };
}

/// Trails, stations, animals and one dot per tourist row. Dot color follows
/// the weather level; situational threats add a violet outline shape.
pub fn render_svg(
    area: &AreaConfig,
    snapshot: &Snapshot,
    verdicts: &[ThreatVerdict],
    animals: &[MapAnimal],
) -> String {
    let view = View::new(area);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{:.0}\" viewBox=\"0 0 {WIDTH} {:.0}\">",
        view.height, view.height
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for trail in &area.trails {
        let pts: Vec<String> = trail
            .polyline
            .points()
            .iter()
            .map(|p| {
                let (x, y) = view.xy(*p);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#8a7f72\" stroke-width=\"2\"><title>{}</title></polyline>",
            pts.join(" "),
            trail.label
        );
    }
    for ws in &area.weather_stations {
        let (x, y) = view.xy(ws.location);
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"8\" height=\"8\" fill=\"steelblue\"><title>{}</title></rect>",
            x - 4.0,
            y - 4.0,
            ws.label
        );
    }
    for bts in &area.bts_stations {
        let (x, y) = view.xy(bts.location);
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"gray\"><title>{}</title></polygon>",
            polygon(x, y, 6.0, 3, FRAC_PI_2),
            bts.label
        );
    }
    for a in animals {
        let (x, y) = view.xy(a.point);
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{}\"/>",
            polygon(x, y, 5.0, 4, FRAC_PI_4),
            if a.dangerous { "saddlebrown" } else { "tan" }
        );
    }
    for v in verdicts {
        let Some(row) = snapshot.rows.get(&v.tourist) else {
            continue;
        };
        let (x, y) = view.xy(row.fix.point);
        let _ = writeln!(
            out,
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"4\" fill=\"{}\" stroke=\"#333\" stroke-width=\"0.5\"><title>{} {}</title></circle>",
            v.weather.color(),
            v.tourist,
            v.weather
        );
        for s in v.situational.iter() {
            marker(&mut out, s, x, y);
        }
    }
    out.push_str("</svg>\n");
    out
}
