//! Minimal SVG renderings of a statistic ensemble against `N(0, σ²)`.

use std::fmt::Write;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        PAD + (v - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD - (v - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="13">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    s
}

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
        pts.join(" ")
    )
}

/// Density histogram with the normal density overlaid. Returns `None` for an
/// empty sample or non-positive `σ²`.
pub fn histogram_svg(sample: &[f64], sigma_sq: f64, bins: usize) -> Option<String> {
    if sample.is_empty() || sigma_sq <= 0.0 || bins == 0 {
        return None;
    }
    let normal = Normal::new(0.0, sigma_sq.sqrt()).ok()?;
    let sd = sigma_sq.sqrt();
    let lo = sample.iter().copied().fold(-4.0 * sd, f64::min);
    let hi = sample.iter().copied().fold(4.0 * sd, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in sample {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let dens: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / (sample.len() as f64 * width))
        .collect();
    let peak = dens.iter().copied().fold(normal.pdf(0.0), f64::max) * 1.05;
    let f = Frame {
        x0: lo,
        x1: hi,
        y0: 0.0,
        y1: peak,
    };
    let mut s = open(&format!("normalized statistic vs N(0, {sigma_sq:.4})"));
    for (i, &d) in dens.iter().enumerate() {
        let a = lo + i as f64 * width;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ab" stroke="#567"/>"##,
            f.x(a),
            f.y(d),
            f.x(a + width) - f.x(a),
            f.y(0.0) - f.y(d)
        );
    }
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|j| {
            let x = lo + (hi - lo) * j as f64 / 200.0;
            (f.x(x), f.y(normal.pdf(x)))
        })
        .collect();
    s.push_str(&polyline(&curve, "crimson"));
    s.push_str("</svg>\n");
    Some(s)
}

/// Sample quantiles against `N(0, σ²)` quantiles at `(i - 1/2)/m`.
pub fn qq_svg(sample: &[f64], sigma_sq: f64) -> Option<String> {
    if sample.is_empty() || sigma_sq <= 0.0 {
        return None;
    }
    let normal = Normal::new(0.0, sigma_sq.sqrt()).ok()?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let pairs: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &y)| (normal.inverse_cdf((i as f64 + 0.5) / m), y))
        .collect();
    let lo = pairs
        .iter()
        .map(|p| p.0.min(p.1))
        .fold(f64::INFINITY, f64::min);
    let hi = pairs
        .iter()
        .map(|p| p.0.max(p.1))
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    };
    let f = Frame {
        x0: lo,
        x1: hi,
        y0: lo,
        y1: hi,
    };
    let mut s = open("QQ plot against N(0, sigma^2)");
    s.push_str(&polyline(
        &[(f.x(lo), f.y(lo)), (f.x(hi), f.y(hi))],
        "crimson",
    ));
    for (x, y) in pairs {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#345"/>"##,
            f.x(x),
            f.y(y)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}
