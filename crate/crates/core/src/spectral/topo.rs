use std::fmt::Write;

/// Per-electrode values of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoMap {
    pub band: String,
    pub electrodes: Vec<String>,
    pub values: Vec<f64>,
}

impl TopoMap {
    pub fn value(&self, electrode: &str) -> Option<f64> {
        self.electrodes.iter().position(|e| e.eq_ignore_ascii_case(electrode)).map(|i| self.values[i])
    }
}

/// 2D scalp positions (x right, y towards the nose) on a unit-radius head,
/// with the 10-20 outer ring at radius 0.8.
const POSITIONS: [(&str, f64, f64); 21] = [
    ("Fp1", -0.247, 0.761),
    ("Fp2", 0.247, 0.761),
    ("F7", -0.647, 0.470),
    ("F3", -0.320, 0.400),
    ("Fz", 0.0, 0.400),
    ("F4", 0.320, 0.400),
    ("F8", 0.647, 0.470),
    ("T3", -0.800, 0.0),
    ("C3", -0.400, 0.0),
    ("Cz", 0.0, 0.0),
    ("C4", 0.400, 0.0),
    ("T4", 0.800, 0.0),
    ("T5", -0.647, -0.470),
    ("P3", -0.320, -0.400),
    ("Pz", 0.0, -0.400),
    ("P4", 0.320, -0.400),
    ("T6", 0.647, -0.470),
    ("O1", -0.247, -0.761),
    ("O2", 0.247, -0.761),
    ("A1", -0.960, -0.080),
    ("A2", 0.960, -0.080),
];

pub fn electrode_position(name: &str) -> Option<(f64, f64)> {
    POSITIONS.iter().find(|(n, _, _)| n.eq_ignore_ascii_case(name)).map(|&(_, x, y)| (x, y))
}

const COLD: (f64, f64, f64) = (33.0, 102.0, 172.0);
const MID: (f64, f64, f64) = (247.0, 247.0, 247.0);
const HOT: (f64, f64, f64) = (178.0, 24.0, 43.0);

/// Diverging colour for `t` in `[-1, 1]`, white at 0.
pub fn diverging_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(-1.0, 1.0) } else { 0.0 };
    let (end, a) = if t < 0.0 { (COLD, -t) } else { (HOT, t) };
    let mix = |m: f64, e: f64| (m + (e - m) * a).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(MID.0, end.0), mix(MID.1, end.1), mix(MID.2, end.2))
}

/// Inverse-distance-weighted (power 2) value at `(x, y)`.
fn idw(points: &[(f64, f64, f64)], x: f64, y: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(px, py, v) in points {
        let d2 = (px - x).powi(2) + (py - y).powi(2);
        if d2 < 1e-12 {
            return v;
        }
        num += v / d2;
        den += 1.0 / d2;
    }
    num / den
}

const GRID: usize = 40;
const CX: f64 = 130.0;
const CY: f64 = 140.0;
const R: f64 = 100.0;

/// Interpolated values at the grid cells inside the head, row-major from the
/// top left, and the colour-scale half-range.
pub(crate) fn field(map: &TopoMap) -> (Vec<f64>, f64) {
    let points = known_points(map);
    let vmax = points.iter().fold(0.0f64, |m, p| m.max(p.2.abs()));
    let mut cells = Vec::new();
    if points.is_empty() {
        return (cells, vmax);
    }
    for (x, y) in grid_centres() {
        cells.push(idw(&points, x, y));
    }
    (cells, vmax)
}

fn known_points(map: &TopoMap) -> Vec<(f64, f64, f64)> {
    map.electrodes
        .iter()
        .zip(&map.values)
        .filter(|(_, v)| v.is_finite())
        .filter_map(|(e, &v)| electrode_position(e).map(|(x, y)| (x, y, v)))
        .collect()
}

fn grid_centres() -> impl Iterator<Item = (f64, f64)> {
    (0..GRID).flat_map(|gy| {
        (0..GRID).filter_map(move |gx| {
            let x = -1.0 + (gx as f64 + 0.5) * 2.0 / GRID as f64;
            let y = 1.0 - (gy as f64 + 0.5) * 2.0 / GRID as f64;
            (x * x + y * y <= 1.0).then_some((x, y))
        })
    })
}

/// Scalp map with interpolated colour field, electrode markers, title and a
/// colour bar symmetric about zero. Electrodes without a known position or
/// with a non-finite value are left out of the interpolation.
pub fn render_topomap(map: &TopoMap) -> String {
    let (cells, vmax) = field(map);
    let scale = |v: f64| if vmax > 0.0 { v / vmax } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="260" height="320" viewBox="0 0 260 320">"#);
    let _ = writeln!(s, r#"<rect width="260" height="320" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="130" y="22" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        map.band
    );
    let cell = 2.0 * R / GRID as f64;
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for ((x, y), &v) in grid_centres().zip(&cells) {
        let color = diverging_color(scale(v));
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="{color}"/>"#,
            CX + (x - 1.0 / GRID as f64) * R,
            CY - (y + 1.0 / GRID as f64) * R,
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<circle cx="{CX}" cy="{CY}" r="{R}" fill="none" stroke="black" stroke-width="2"/>"#);
    let _ = writeln!(
        s,
        r#"<polyline points="{:.1},{:.1} {CX},{:.1} {:.1},{:.1}" fill="none" stroke="black" stroke-width="2"/>"#,
        CX - 10.0,
        CY - R + 1.0,
        CY - R - 12.0,
        CX + 10.0,
        CY - R + 1.0,
    );
    for (e, _) in map.electrodes.iter().zip(&map.values) {
        let Some((x, y)) = electrode_position(e) else { continue };
        let (px, py) = (CX + x * R, CY - y * R);
        let _ = writeln!(s, r#"<circle cx="{px:.1}" cy="{py:.1}" r="2.5" fill="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" font-family="sans-serif" font-size="8" text-anchor="middle">{e}</text>"#,
            py - 4.0
        );
    }
    let steps = 11;
    for i in 0..steps {
        let t = -1.0 + 2.0 * i as f64 / (steps - 1) as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="265" width="18" height="12" fill="{}"/>"#,
            31.0 + i as f64 * 18.0,
            diverging_color(t)
        );
    }
    for (x, v) in [(31.0, -vmax), (130.0, 0.0), (229.0, vmax)] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="292" font-family="sans-serif" font-size="9" text-anchor="middle">{v:.3}</text>"#
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `electrode<TAB>band<TAB>value` lines for every map.
pub fn topomaps_to_tsv(maps: &[TopoMap]) -> String {
    let mut s = String::from("electrode\tband\tvalue\n");
    for m in maps {
        for (e, v) in m.electrodes.iter().zip(&m.values) {
            let _ = writeln!(s, "{e}\t{}\t{v:.6}", m.band);
        }
    }
    s
}
