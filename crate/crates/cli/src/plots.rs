//! Hand-written SVG figures. Every plot uses the same fixed canvas and
//! coordinates rounded to two decimals, so identical analyses give
//! byte-identical files.

use std::fmt::Write;

use plotwise::design::TermClass;
use plotwise::diagnostics::p_clause;
use plotwise::mixed::BlupTable;
use plotwise::stability::StabilityResult;
use plotwise::{Analysis, ComparisonSet};

use crate::tables::num;

const W: f64 = 640.0;
const H: f64 = 460.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 56.0;
const BOTTOM: f64 = 130.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub(crate) struct Plot {
    pub file: String,
    pub svg: String,
}

#[derive(Default)]
pub(crate) struct PlotSet {
    pub plots: Vec<Plot>,
    pub notes: Vec<String>,
}

pub(crate) fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// File-name fragment: letters and digits kept, everything else collapsed to `_`.
pub(crate) fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn c(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

struct Canvas {
    s: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<title>{}</title>", esc(title));
        let _ = writeln!(s, r##"<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>"##);
        let mut cv = Canvas { s };
        cv.text(W / 2.0, 28.0, "middle", 15.0, "title", title);
        cv
    }

    fn raw(&mut self, line: String) {
        self.s.push_str(&line);
        self.s.push('\n');
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, class: &str, content: &str) {
        self.raw(format!(
            r#"<text class="{class}" x="{}" y="{}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            c(x),
            c(y),
            esc(content)
        ));
    }

    fn rotated_text(&mut self, x: f64, y: f64, angle: f64, anchor: &str, class: &str, content: &str) {
        self.raw(format!(
            r#"<text class="{class}" x="{x}" y="{y}" text-anchor="{anchor}" transform="rotate({angle} {x} {y})">{}</text>"#,
            esc(content),
            x = c(x),
            y = c(y),
            angle = c(angle),
        ));
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        self.raw(format!(
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"{dash}/>"#,
            c(x1),
            c(y1),
            c(x2),
            c(y2),
            c(width)
        ));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        self.raw(format!(
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="{stroke}"/>"#,
            c(x),
            c(y),
            c(w.max(0.0)),
            c(h.max(0.0))
        ));
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, stroke: &str) {
        self.raw(format!(
            r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}" stroke="{stroke}"/>"#,
            c(x),
            c(y),
            c(r)
        ));
    }

    fn finish(mut self, caption: &[String]) -> String {
        let lines: Vec<String> = caption.iter().flat_map(|c| wrap(c, 96)).collect();
        let first = H - 16.0 - 14.0 * (lines.len() as f64 - 1.0);
        for (i, line) in lines.iter().enumerate() {
            self.text(W / 2.0, first + 14.0 * i as f64, "middle", 11.0, "caption", line);
        }
        self.s.push_str("</svg>\n");
        self.s
    }
}

/// Greedy word wrap to at most `width` characters per line.
fn wrap(text: &str, width: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        if !cur.is_empty() && cur.chars().count() + 1 + word.chars().count() > width {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    r0: f64,
    r1: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }
}

/// Round axis limits and the ticks between them.
fn nice_axis(lo: f64, hi: f64) -> (f64, f64, Vec<f64>, usize) {
    let (mut lo, mut hi) = (lo, hi);
    if !(hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        let pad = (lo.abs() * 0.1).max(1.0);
        lo -= pad;
        hi += pad;
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm <= 1.0 {
            1.0
        } else if norm <= 2.0 {
            2.0
        } else if norm <= 5.0 {
            5.0
        } else {
            10.0
        };
    let a = (lo / step).floor() * step;
    let b = (hi / step).ceil() * step;
    let n = ((b - a) / step).round() as usize;
    let ticks = (0..=n).map(|i| a + step * i as f64).collect();
    let decimals = (-(step.log10().floor())).clamp(0.0, 3.0) as usize;
    (a, b, ticks, decimals)
}

fn y_axis(cv: &mut Canvas, lo: f64, hi: f64, label: &str) -> Scale {
    let (a, b, ticks, dec) = nice_axis(lo, hi);
    let sc = Scale {
        d0: a,
        d1: b,
        r0: H - BOTTOM,
        r1: TOP,
    };
    cv.line(LEFT, TOP, LEFT, H - BOTTOM, "#000000", 1.0, false);
    for t in ticks {
        let y = sc.map(t);
        cv.line(LEFT - 5.0, y, LEFT, y, "#000000", 1.0, false);
        cv.line(LEFT, y, W - RIGHT, y, "#e5e5e5", 0.5, false);
        cv.text(LEFT - 8.0, y + 4.0, "end", 11.0, "tick", &format!("{t:.dec$}"));
    }
    cv.rotated_text(18.0, (TOP + H - BOTTOM) / 2.0, -90.0, "middle", "axis-label", label);
    cv.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "#000000", 1.0, false);
    sc
}

fn x_labels(cv: &mut Canvas, labels: &[String], xs: &[f64]) {
    let rotate = labels.len() > 6 || labels.iter().any(|l| l.chars().count() > 10);
    for (l, &x) in labels.iter().zip(xs) {
        if rotate {
            cv.rotated_text(x, H - BOTTOM + 16.0, -35.0, "end", "level", l);
        } else {
            cv.text(x, H - BOTTOM + 18.0, "middle", 12.0, "level", l);
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Raw observations behind each level of a comparison family.
fn observations(a: &Analysis, set: &ComparisonSet) -> Vec<Vec<f64>> {
    let m = &a.model;
    let mut out = vec![Vec::new(); set.labels.len()];
    let Some(fidx) = set.factors.iter().map(|f| m.factor_index(f)).collect::<Option<Vec<_>>>() else {
        return out;
    };
    let ctx: Option<Vec<(usize, usize)>> = set
        .context
        .iter()
        .map(|(f, l)| {
            let i = m.factor_index(f)?;
            Some((i, m.factors[i].1.iter().position(|x| x == l)?))
        })
        .collect();
    let Some(ctx) = ctx else { return out };
    for row in 0..m.n() {
        let lv = &m.row_levels[row];
        if ctx.iter().any(|&(i, l)| lv[i] != l) {
            continue;
        }
        let label = fidx.iter().map(|&i| m.factors[i].1[lv[i]].as_str()).collect::<Vec<_>>().join(":");
        if let Some(k) = set.index_of(&label) {
            out[k].push(m.observed[row]);
        }
    }
    out
}

fn boxplot(a: &Analysis, set: &ComparisonSet) -> String {
    let response = &a.design.spec.response;
    let title = if set.context.is_empty() {
        format!("{response} by {}", set.factors.join(" × "))
    } else {
        let ctx: Vec<String> = set.context.iter().map(|(f, l)| format!("{f}={l}")).collect();
        format!("{response} by {} ({})", set.factors.join(" × "), ctx.join(", "))
    };
    let mut cv = Canvas::new(&title);
    let obs = observations(a, set);
    let all = obs.iter().flatten().chain(&set.means).copied();
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let span = (hi - lo).max(1e-9);
    let sc = y_axis(&mut cv, lo - 0.05 * span, hi + 0.22 * span, response);

    let k = set.labels.len();
    let slot = (W - LEFT - RIGHT) / k as f64;
    let bw = (slot * 0.5).min(56.0);
    let xs: Vec<f64> = (0..k).map(|i| LEFT + slot * (i as f64 + 0.5)).collect();
    for i in 0..k {
        let x = xs[i];
        let mut v = obs[i].clone();
        v.sort_by(f64::total_cmp);
        let mut top = set.means[i];
        if !v.is_empty() {
            let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
            let iqr = q3 - q1;
            let wlo = v.iter().copied().find(|&y| y >= q1 - 1.5 * iqr).unwrap_or(q1);
            let whi = v.iter().rev().copied().find(|&y| y <= q3 + 1.5 * iqr).unwrap_or(q3);
            cv.line(x, sc.map(whi), x, sc.map(q3), "#333333", 1.0, false);
            cv.line(x, sc.map(q1), x, sc.map(wlo), "#333333", 1.0, false);
            cv.line(x - bw / 4.0, sc.map(whi), x + bw / 4.0, sc.map(whi), "#333333", 1.0, false);
            cv.line(x - bw / 4.0, sc.map(wlo), x + bw / 4.0, sc.map(wlo), "#333333", 1.0, false);
            cv.rect(x - bw / 2.0, sc.map(q3), bw, sc.map(q1) - sc.map(q3), "#cfe0f3", "#333333");
            cv.line(x - bw / 2.0, sc.map(med), x + bw / 2.0, sc.map(med), "#000000", 2.0, false);
            for &y in v.iter().filter(|&&y| y < wlo || y > whi) {
                cv.circle(x, sc.map(y), 2.5, "none", "#333333");
            }
            top = top.max(v[v.len() - 1]);
        }
        cv.circle(x, sc.map(set.means[i]), 3.0, "#ffffff", "#d62728");
        cv.text(x, sc.map(top) - 20.0, "middle", 9.0, "value", &num(set.means[i]));
        cv.text(x, sc.map(top) - 7.0, "middle", 13.0, "letter", &set.letters[i]);
    }
    x_labels(&mut cv, &set.labels, &xs);
    let mut caption = vec![format!(
        "Letters denote Tukey HSD groupings (alpha = {}); levels sharing a letter do not differ.",
        num(a.alpha())
    )];
    if set.conservative {
        caption.push(format!("Error term {} combines strata; the comparison is approximate and conservative.", set.stratum));
    }
    cv.finish(&caption)
}

fn interaction_plot(a: &Analysis, fa: &str, fb: &str) -> Option<String> {
    let names = [fa.to_string(), fb.to_string()];
    let means = a.model.marginal_means(&names).ok()?;
    let la = a.design.levels(fa)?.to_vec();
    let lb = a.design.levels(fb)?.to_vec();
    let response = &a.design.spec.response;
    let mut cv = Canvas::new(&format!("Interaction of {fa} and {fb}"));
    let (lo, hi) = means.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = (hi - lo).max(1e-9);
    let sc = y_axis(&mut cv, lo - 0.05 * span, hi + 0.1 * span, &format!("Mean {response}"));
    let legend_w = 150.0;
    let slot = (W - LEFT - RIGHT - legend_w) / la.len() as f64;
    let xs: Vec<f64> = (0..la.len()).map(|i| LEFT + slot * (i as f64 + 0.5)).collect();
    for (j, b) in lb.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let pts: Vec<(f64, f64)> = (0..la.len()).map(|i| (xs[i], sc.map(means[i * lb.len() + j]))).collect();
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", c(*x), c(*y))).collect();
        cv.raw(format!(
            r#"<polyline class="profile" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        ));
        for (i, (x, y)) in pts.iter().enumerate() {
            cv.circle(*x, *y, 3.5, color, color);
            cv.text(*x + 6.0, *y - 6.0, "start", 9.0, "value", &num(means[i * lb.len() + j]));
        }
        let ly = TOP + 10.0 + 18.0 * j as f64;
        let lx = W - RIGHT - legend_w + 10.0;
        cv.line(lx, ly, lx + 20.0, ly, color, 2.0, false);
        cv.text(lx + 26.0, ly + 4.0, "start", 10.0, "legend", &format!("{fb}={b}"));
    }
    x_labels(&mut cv, &la, &xs);
    cv.text((LEFT + W - RIGHT - legend_w) / 2.0, H - BOTTOM + 44.0, "middle", 12.0, "axis-label", fa);
    let label = format!("{fa}:{fb}");
    let p = a.anova.row(&label).and_then(|r| r.p);
    let caption = match p {
        Some(p) if p > a.alpha() => format!(
            "Nearly parallel response profiles: the {fa} × {fb} interaction is not significant ({}).",
            p_clause(p)
        ),
        Some(p) => format!(
            "Non-parallel response profiles: the {fa} × {fb} interaction is significant ({}).",
            p_clause(p)
        ),
        None => format!("Response profiles of {fa} across {fb}; the interaction was not tested."),
    };
    Some(cv.finish(&[caption]))
}

fn variance_plot(a: &Analysis) -> Option<String> {
    let vc = a.variance_components.as_ref()?;
    let props = vc.proportions();
    let mut cv = Canvas::new("Proportion of total variance attributable to each component");
    let n = vc.components.len();
    let left = 170.0;
    let right = W - RIGHT - 70.0;
    let slot = (H - TOP - BOTTOM) / n as f64;
    let bh = (slot * 0.6).min(36.0);
    cv.line(left, TOP, left, H - BOTTOM, "#000000", 1.0, false);
    for t in 0..=4 {
        let x = left + (right - left) * t as f64 / 4.0;
        cv.line(x, H - BOTTOM, x, H - BOTTOM + 5.0, "#000000", 1.0, false);
        cv.text(x, H - BOTTOM + 18.0, "middle", 11.0, "tick", &format!("{}%", 25 * t));
    }
    cv.line(left, H - BOTTOM, right, H - BOTTOM, "#000000", 1.0, false);
    for (i, (comp, p)) in vc.components.iter().zip(&props).enumerate() {
        let y = TOP + slot * (i as f64 + 0.5);
        cv.text(left - 8.0, y + 4.0, "end", 12.0, "level", &comp.term);
        cv.rect(left, y - bh / 2.0, (right - left) * p, bh, PALETTE[i % PALETTE.len()], "none");
        cv.text(left + (right - left) * p + 6.0, y + 4.0, "start", 11.0, "value", &format!("{:.1}%", 100.0 * p));
    }
    let clamped = if vc.clamped.is_empty() {
        String::new()
    } else {
        format!(" Negative estimates set to zero: {}.", vc.clamped.join(", "))
    };
    Some(cv.finish(&[format!("Variance components by expected mean squares.{clamped}")]))
}

fn blup_plot(t: &BlupTable) -> String {
    let mut cv = Canvas::new(&format!("Best linear unbiased predictions for {}", t.target));
    let effects: Vec<f64> = t.entries.iter().map(|e| e.effect).collect();
    let lo = effects.iter().copied().fold(0.0, f64::min);
    let hi = effects.iter().copied().fold(0.0, f64::max);
    let span = (hi - lo).max(1e-9);
    let sc = y_axis(&mut cv, lo - 0.08 * span, hi + 0.12 * span, "Predicted effect");
    let k = t.entries.len();
    let slot = (W - LEFT - RIGHT) / k as f64;
    let bw = (slot * 0.6).min(60.0);
    let zero = sc.map(0.0);
    cv.line(LEFT, zero, W - RIGHT, zero, "#000000", 1.0, true);
    let mut xs = Vec::new();
    for (i, e) in t.entries.iter().enumerate() {
        let x = LEFT + slot * (i as f64 + 0.5);
        xs.push(x);
        let y = sc.map(e.effect);
        let color = if e.effect >= 0.0 { "#2ca02c" } else { "#d62728" };
        cv.rect(x - bw / 2.0, y.min(zero), bw, (y - zero).abs(), color, "none");
        let ty = if e.effect >= 0.0 { y - 5.0 } else { y + 13.0 };
        cv.text(x, ty, "middle", 10.0, "value", &num(e.predicted_mean));
    }
    let labels: Vec<String> = t.entries.iter().map(|e| e.level.clone()).collect();
    x_labels(&mut cv, &labels, &xs);
    cv.finish(&[format!(
        "Bars show shrunken deviations from the grand mean {}; labels give predicted means (shrinkage factor {}).",
        num(t.grand_mean),
        num(t.shrinkage)
    )])
}

fn gge_plot(s: &StabilityResult) -> String {
    let g = &s.gge;
    let mut cv = Canvas::new("GGE biplot of genotype and environment scores");
    let mut extent: f64 = 0.0;
    for v in g.genotype_coords.data.iter().chain(&g.environment_coords.data) {
        extent = extent.max(v.abs());
    }
    let extent = if extent > 0.0 { extent * 1.2 } else { 1.0 };
    let size = (H - TOP - BOTTOM).min(W - LEFT - RIGHT);
    let x0 = (W - size) / 2.0;
    let y0 = TOP;
    let sx = Scale { d0: -extent, d1: extent, r0: x0, r1: x0 + size };
    let sy = Scale { d0: -extent, d1: extent, r0: y0 + size, r1: y0 };
    cv.rect(x0, y0, size, size, "none", "#999999");
    cv.line(x0, sy.map(0.0), x0 + size, sy.map(0.0), "#999999", 1.0, true);
    cv.line(sx.map(0.0), y0, sx.map(0.0), y0 + size, "#999999", 1.0, true);
    for (j, e) in s.matrix.environments.iter().enumerate() {
        let (x, y) = (sx.map(g.environment_coords.get(j, 0)), sy.map(g.environment_coords.get(j, 1)));
        cv.line(sx.map(0.0), sy.map(0.0), x, y, "#d62728", 1.5, false);
        let (dx, dy) = (x - sx.map(0.0), y - sy.map(0.0));
        let len = (dx * dx + dy * dy).sqrt().max(1e-9);
        cv.text(x + 10.0 * dx / len, y + 10.0 * dy / len + 4.0, "middle", 11.0, "environment", e);
    }
    for (i, name) in s.matrix.genotypes.iter().enumerate() {
        let (x, y) = (sx.map(g.genotype_coords.get(i, 0)), sy.map(g.genotype_coords.get(i, 1)));
        cv.circle(x, y, 4.0, "#1f77b4", "#1f77b4");
        cv.text(x + 7.0, y + 4.0, "start", 11.0, "genotype", name);
    }
    let (p1, p2) = (100.0 * g.variance_explained[0], 100.0 * g.variance_explained[1]);
    cv.text(W / 2.0, y0 + size + 22.0, "middle", 12.0, "axis-label", &format!("PC1 ({p1:.1}%)"));
    cv.rotated_text(x0 - 14.0, y0 + size / 2.0, -90.0, "middle", "axis-label", &format!("PC2 ({p2:.1}%)"));
    cv.finish(&[format!(
        "Genotypes (points) and environments (vectors); the two axes explain {:.1}% of genotype plus interaction variation.",
        p1 + p2
    )])
}

/// Every applicable figure of one analysis, with a note for each family skipped.
pub(crate) fn emit_plots(a: &Analysis) -> PlotSet {
    let mut out = PlotSet::default();
    if a.comparisons.is_empty() {
        out.notes.push(format!(
            "comparison plots skipped: no treatment effect is significant at alpha = {}",
            num(a.alpha())
        ));
    }
    for (i, set) in a.comparisons.iter().enumerate() {
        out.plots.push(Plot {
            file: format!("boxplot_{:02}_{}.svg", i + 1, slug(&set.name())),
            svg: boxplot(a, set),
        });
    }

    let pairs: Vec<(String, String)> = a
        .design
        .effects
        .effects
        .iter()
        .filter(|e| e.class == TermClass::Treatment && e.order() == 2)
        .map(|e| (e.factors[0].clone(), e.factors[1].clone()))
        .collect();
    if pairs.is_empty() {
        out.notes.push("interaction plot skipped: the design has no two-factor treatment effect".into());
    }
    for (fa, fb) in pairs {
        match interaction_plot(a, &fa, &fb) {
            Some(svg) => out.plots.push(Plot {
                file: format!("interaction_{}_{}.svg", slug(&fa), slug(&fb)),
                svg,
            }),
            None => out.notes.push(format!("interaction plot of {fa} and {fb} skipped: cell means unavailable")),
        }
    }

    match variance_plot(a) {
        Some(svg) => out.plots.push(Plot {
            file: "variance_components.svg".into(),
            svg,
        }),
        None => out.notes.push("variance component plot skipped: the design has no random terms".into()),
    }

    let tables = crate::tables::blup_tables(a);
    if tables.is_empty() {
        out.notes.push("BLUP plot skipped: no BLUPs for this design".into());
    }
    for t in tables {
        out.plots.push(Plot {
            file: format!("blup_{}.svg", slug(&t.target)),
            svg: blup_plot(t),
        });
    }

    match &a.stability {
        Some(s) => out.plots.push(Plot {
            file: "gge_biplot.svg".into(),
            svg: gge_plot(s),
        }),
        None => out.notes.push("GGE biplot skipped: not a multi-environment trial or stability analysis unavailable".into()),
    }
    out
}
