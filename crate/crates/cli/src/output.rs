//! CSV tables and minimal SVG line plots.

use std::fmt::Write as _;

/// One CSV dataset. Cells are already formatted.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Locale-independent shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Plot layout for a table: x column, y columns, optional grouping column.
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x: usize,
    pub ys: Vec<usize>,
    pub group: Option<usize>,
    pub log_x: bool,
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Line plot of the chosen columns. Rows whose cells do not parse are skipped.
pub fn svg(table: &Table, spec: &PlotSpec) -> String {
    let parse = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    let mut groups: Vec<String> = Vec::new();
    for row in &table.rows {
        let g = spec.group.map(|c| row[c].clone()).unwrap_or_default();
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let fx = |x: f64| if spec.log_x { x.log10() } else { x };
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for g in &groups {
        for &y in &spec.ys {
            let pts: Vec<(f64, f64)> = table
                .rows
                .iter()
                .filter(|r| spec.group.map(|c| &r[c] == g).unwrap_or(true))
                .filter_map(|r| Some((parse(&r[spec.x])?, parse(&r[y])?)))
                .filter(|(x, _)| !spec.log_x || *x > 0.0)
                .map(|(x, y)| (fx(x), y))
                .collect();
            let label = if g.is_empty() { table.header[y].clone() } else { format!("{} ({g})", table.header[y]) };
            series.push((label, pts));
        }
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let (l, r, t, b) = MARGIN;
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (W - l - r);
    let py = |y: f64| H - b - (y - y0) / (y1 - y0) * (H - t - b);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - l - r, H - t - b);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(spec.title));
    for k in 0..=4 {
        let fxk = x0 + (x1 - x0) * k as f64 / 4.0;
        let fyk = y0 + (y1 - y0) * k as f64 / 4.0;
        let xl = if spec.log_x { 10f64.powf(fxk) } else { fxk };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(fxk), H - b + 16.0, tick(xl));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, py(fyk) + 4.0, tick(fyk));
    }
    let xlabel = if spec.log_x { format!("{} (log)", table.header[spec.x]) } else { table.header[spec.x].clone() };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(&xlabel));
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = t + 16.0 + 16.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, W - r - 150.0, W - r - 130.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - r - 125.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
