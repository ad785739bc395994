//! Figure data bundles and their SVG renderings.
//!
//! Every bundle is a plain data document; SVGs are rendered from that
//! document alone so a saved `figures/*.json` regenerates its picture.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vat_core::metrics::{amplification_report, identify_hubs, AmplificationReport, LabeledProfile};
use vat_core::stats::Welford;
use vat_core::{TaxReport, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Heatmap,
    Radar,
    Chord,
    Circumplex,
    Pareto,
    Amplification,
}

impl FigureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Heatmap => "heatmap",
            Self::Radar => "radar",
            Self::Chord => "chord",
            Self::Circumplex => "circumplex",
            Self::Pareto => "pareto",
            Self::Amplification => "amplification",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureBundle {
    pub kind: FigureKind,
    pub name: String,
    pub data: Value,
    #[serde(skip)]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapData {
    pub label: String,
    pub values: Vec<String>,
    /// Full R with a zero diagonal; the diagonal is not drawn.
    pub matrix: Vec<Vec<f64>>,
    /// Colour scale runs over [-bound, bound].
    pub scale_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarData {
    pub label: String,
    pub values: Vec<String>,
    pub vat: Vec<f64>,
    pub nvat: f64,
    /// VAT(v) / nVAT; absent when nVAT is zero.
    pub normalized: Option<Vec<f64>>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordEdge {
    pub u: String,
    pub w: String,
    pub r: f64,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordData {
    pub label: String,
    pub values: Vec<String>,
    pub k: usize,
    pub edges: Vec<ChordEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircumplexPoint {
    pub value: String,
    pub angle_deg: f64,
    /// VAT(v) per report, in `labels` order.
    pub vat: Vec<f64>,
    pub mean_vat: f64,
    /// Standard deviation of VAT(v) across reports; only with two or more.
    pub stability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircumplexData {
    pub labels: Vec<String>,
    pub points: Vec<CircumplexPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub gain: f64,
    pub nvat: f64,
    /// Another point has gain >= and nVAT <=, with one strict.
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoData {
    pub points: Vec<ParetoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationData {
    pub quantile: f64,
    pub persistence: f64,
    pub labels: Vec<String>,
    pub hubs: Vec<String>,
    pub report: Option<AmplificationReport>,
    /// Why no comparison could be made.
    pub degenerate: Option<String>,
}

pub fn report_label(r: &TaxReport, index: usize) -> String {
    r.label.clone().unwrap_or_else(|| format!("r{index}"))
}

pub fn heatmap(r: &TaxReport, label: &str) -> HeatmapData {
    let mut max = 0.0f64;
    for (i, row) in r.coupling.entries.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if i != j {
                max = max.max(x.abs());
            }
        }
    }
    HeatmapData {
        label: label.into(),
        values: r.coupling.values.clone(),
        matrix: r.coupling.entries.clone(),
        scale_bound: max.max(0.2),
    }
}

pub fn radar(r: &TaxReport, label: &str) -> RadarData {
    let degenerate = r.nvat == 0.0;
    RadarData {
        label: label.into(),
        values: r.coupling.values.clone(),
        vat: r.vat_profile.clone(),
        nvat: r.nvat,
        normalized: (!degenerate).then(|| r.vat_profile.iter().map(|v| v / r.nvat).collect()),
        degenerate,
    }
}

/// Up to `k` strongest non-zero couplings, by |R| then by position.
pub fn chord(r: &TaxReport, label: &str, k: usize) -> ChordData {
    let m = &r.coupling.entries;
    let mut edges: Vec<(usize, usize, f64)> = (0..m.len())
        .flat_map(|i| (i + 1..m.len()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, m[i][j]))
        .filter(|e| e.2 != 0.0)
        .collect();
    edges.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then((a.0, a.1).cmp(&(b.0, b.1))));
    edges.truncate(k);
    ChordData {
        label: label.into(),
        values: r.coupling.values.clone(),
        k,
        edges: edges
            .into_iter()
            .map(|(i, j, x)| ChordEdge {
                u: r.coupling.values[i].clone(),
                w: r.coupling.values[j].clone(),
                r: x,
                sign: if x > 0.0 { 1 } else { -1 },
            })
            .collect(),
    }
}

/// VAT per value in circumplex order. Values absent from the reports are
/// skipped.
pub fn circumplex(reports: &[(String, &TaxReport)], taxonomy: &Taxonomy) -> CircumplexData {
    let mut points = Vec::new();
    for id in taxonomy.circumplex_order() {
        let Ok(v) = taxonomy.value(&id) else { continue };
        let vat: Option<Vec<f64>> = reports.iter().map(|(_, r)| r.vat_of(id.as_str())).collect();
        let Some(vat) = vat else { continue };
        let w: Welford = vat.iter().copied().collect();
        points.push(CircumplexPoint {
            value: id.0.clone(),
            angle_deg: v.circumplex_angle,
            mean_vat: w.mean(),
            stability: (vat.len() >= 2).then(|| w.std()),
            vat,
        });
    }
    CircumplexData {
        labels: reports.iter().map(|(l, _)| l.clone()).collect(),
        points,
    }
}

pub fn pareto(points: &[(String, f64, f64)]) -> ParetoData {
    let dominated = |i: usize| {
        let (_, g, n) = points[i];
        points
            .iter()
            .enumerate()
            .any(|(j, &(_, g2, n2))| j != i && g2 >= g && n2 <= n && (g2 > g || n2 < n))
    };
    ParetoData {
        points: (0..points.len())
            .map(|i| ParetoPoint {
                label: points[i].0.clone(),
                gain: points[i].1,
                nvat: points[i].2,
                dominated: dominated(i),
            })
            .collect(),
    }
}

pub fn amplification(profiles: &[LabeledProfile], quantile: f64, persistence: f64) -> AmplificationData {
    let mut out = AmplificationData {
        quantile,
        persistence,
        labels: profiles.iter().map(|p| p.label.clone()).collect(),
        hubs: Vec::new(),
        report: None,
        degenerate: None,
    };
    match identify_hubs(profiles, quantile, persistence) {
        Ok(hubs) => {
            out.hubs = hubs;
            match amplification_report(profiles, &out.hubs) {
                Ok(r) => out.report = Some(r),
                Err(e) => out.degenerate = Some(e.to_string()),
            }
        }
        Err(e) => out.degenerate = Some(e.to_string()),
    }
    out
}

pub fn bundle<T: Serialize>(kind: FigureKind, name: String, data: &T, svg: bool) -> FigureBundle {
    let data = serde_json::to_value(data).expect("serializable figure data");
    let svg = if svg { render_svg(kind, &data) } else { None };
    FigureBundle { kind, name, data, svg }
}

/// SVG for the kinds that have a rendering; `None` otherwise or when the data
/// does not match the kind.
pub fn render_svg(kind: FigureKind, data: &Value) -> Option<String> {
    fn parse<T: serde::de::DeserializeOwned>(d: &Value) -> Option<T> {
        serde_json::from_value(d.clone()).ok()
    }
    match kind {
        FigureKind::Heatmap => parse(data).map(|d| svg_heatmap(&d)),
        FigureKind::Radar => parse(data).map(|d| svg_radar(&d)),
        FigureKind::Chord => parse(data).map(|d| svg_chord(&d)),
        FigureKind::Circumplex => parse(data).map(|d| svg_circumplex(&d)),
        FigureKind::Pareto | FigureKind::Amplification => None,
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(w: f64, h: f64) -> String {
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n")
}

/// Blue for negative, white at zero, red for positive.
fn diverging(x: f64, bound: f64) -> String {
    let t = (x / bound).clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        format!("rgb(255,{fade},{fade})")
    } else {
        format!("rgb({fade},{fade},255)")
    }
}

fn svg_heatmap(d: &HeatmapData) -> String {
    let n = d.values.len() as f64;
    let (cell, margin) = (36.0, 120.0);
    let size = margin + cell * n + 20.0;
    let mut s = open(size, size + 20.0);
    let _ = writeln!(s, "<text x=\"10\" y=\"16\" font-size=\"13\">{}</text>", esc(&d.label));
    for (i, row) in d.matrix.iter().enumerate() {
        let y = margin + cell * i as f64;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            margin - 6.0,
            y + cell / 2.0 + 4.0,
            esc(&d.values[i])
        );
        for (j, &x) in row.iter().enumerate() {
            let fill = if i == j { "rgb(220,220,220)".to_owned() } else { diverging(x, d.scale_bound) };
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{fill}\" stroke=\"white\"><title>{} / {}: {x:.4}</title></rect>",
                margin + cell * j as f64,
                esc(&d.values[i]),
                esc(&d.values[j])
            );
        }
    }
    for (j, v) in d.values.iter().enumerate() {
        let x = margin + cell * j as f64 + cell / 2.0;
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" transform=\"rotate(-60 {x:.2} {:.2})\">{}</text>",
            margin - 6.0,
            margin - 6.0,
            esc(v)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"10\" y=\"{:.2}\">scale: [-{b:.3}, {b:.3}]</text>",
        size + 10.0,
        b = d.scale_bound
    );
    s.push_str("</svg>\n");
    s
}

fn polar(cx: f64, cy: f64, r: f64, turn: f64) -> (f64, f64) {
    // turn in [0, 1), starting at twelve o'clock, clockwise
    let a = std::f64::consts::TAU * turn - std::f64::consts::FRAC_PI_2;
    (cx + r * a.cos(), cy + r * a.sin())
}

fn svg_radar(d: &RadarData) -> String {
    let (cx, cy, radius) = (260.0, 260.0, 180.0);
    let mut s = open(520.0, 540.0);
    let _ = writeln!(s, "<text x=\"10\" y=\"16\" font-size=\"13\">{} (nVAT = {:.4})</text>", esc(&d.label), d.nvat);
    let n = d.values.len();
    for ring in 1..=4 {
        let _ = writeln!(
            s,
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{:.2}\" fill=\"none\" stroke=\"rgb(220,220,220)\"/>",
            radius * ring as f64 / 4.0
        );
    }
    for (i, v) in d.values.iter().enumerate() {
        let (x, y) = polar(cx, cy, radius, i as f64 / n as f64);
        let (lx, ly) = polar(cx, cy, radius + 22.0, i as f64 / n as f64);
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{cy}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"rgb(200,200,200)\"/>");
        let _ = writeln!(s, "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\">{}</text>", esc(v));
    }
    match &d.normalized {
        Some(norm) if !d.degenerate => {
            let max = norm.iter().copied().fold(0.0f64, f64::max);
            let scale = if max > 0.0 { radius / max } else { 0.0 };
            let pts: Vec<String> = norm
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let (px, py) = polar(cx, cy, x * scale, i as f64 / n as f64);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                "<polygon points=\"{}\" fill=\"rgba(200,60,60,0.25)\" stroke=\"rgb(200,60,60)\" stroke-width=\"2\"/>",
                pts.join(" ")
            );
            let _ = writeln!(s, "<text x=\"10\" y=\"530\">outer ring: VAT/nVAT = {max:.3}</text>");
        }
        _ => {
            let _ = writeln!(
                s,
                "<text x=\"{cx}\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"14\">nVAT = 0: profile undefined</text>"
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn svg_chord(d: &ChordData) -> String {
    let (cx, cy, radius) = (260.0, 260.0, 190.0);
    let mut s = open(520.0, 520.0);
    let _ = writeln!(s, "<text x=\"10\" y=\"16\" font-size=\"13\">{} (top {} by |R|)</text>", esc(&d.label), d.k);
    let n = d.values.len();
    let pos = |v: &str| {
        let i = d.values.iter().position(|x| x == v).unwrap_or(0);
        polar(cx, cy, radius, i as f64 / n as f64)
    };
    for e in &d.edges {
        let ((x1, y1), (x2, y2)) = (pos(&e.u), pos(&e.w));
        let colour = if e.sign > 0 { "rgb(200,60,60)" } else { "rgb(60,90,200)" };
        let _ = writeln!(
            s,
            "<path d=\"M {x1:.2} {y1:.2} Q {cx} {cy} {x2:.2} {y2:.2}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"{:.2}\" stroke-opacity=\"0.7\"><title>{} - {}: {:.4}</title></path>",
            1.0 + 6.0 * e.r.abs(),
            esc(&e.u),
            esc(&e.w),
            e.r
        );
    }
    for (i, v) in d.values.iter().enumerate() {
        let (x, y) = polar(cx, cy, radius, i as f64 / n as f64);
        let (lx, ly) = polar(cx, cy, radius + 20.0, i as f64 / n as f64);
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"rgb(60,60,60)\"/>");
        let _ = writeln!(s, "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\">{}</text>", esc(v));
    }
    s.push_str("</svg>\n");
    s
}

fn svg_circumplex(d: &CircumplexData) -> String {
    let (cx, cy, radius) = (260.0, 260.0, 190.0);
    let mut s = open(520.0, 520.0);
    let _ = writeln!(s, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{radius}\" fill=\"none\" stroke=\"rgb(200,200,200)\"/>");
    let max = d.points.iter().map(|p| p.mean_vat).fold(0.0f64, f64::max);
    for p in &d.points {
        let turn = p.angle_deg / 360.0;
        let r = if max > 0.0 { radius * p.mean_vat / max } else { 0.0 };
        let (x, y) = polar(cx, cy, r, turn);
        let (lx, ly) = polar(cx, cy, radius + 20.0, turn);
        // less stable values are drawn fainter
        let opacity = match p.stability {
            Some(sd) if p.mean_vat > 0.0 => 1.0 - 0.7 * (sd / p.mean_vat).min(1.0),
            _ => 1.0,
        };
        let _ = writeln!(s, "<line x1=\"{cx}\" y1=\"{cy}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"rgb(210,210,210)\"/>");
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"7\" fill=\"rgb(200,60,60)\" fill-opacity=\"{opacity:.3}\"><title>{}: {:.4}</title></circle>",
            esc(&p.value),
            p.mean_vat
        );
        let _ = writeln!(s, "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\">{}</text>", esc(&p.value));
    }
    s.push_str("</svg>\n");
    s
}
