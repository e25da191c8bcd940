//! Region diagram: lambda across, |zeta| up.
//!
//! Blue cells have an invariant state, red cells have none, blank cells are
//! undecided. Cells decided by the constant-coupling strip or the pure-state
//! boundary are hatched.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::export::VerdictRecord;

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;

/// Cell edges halfway between sorted distinct values, clamped to `[0, 1]`.
fn edges(values: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(values.len() + 1);
    e.push(0.0f64.min(values[0]));
    for w in values.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    e.push(1.0f64.max(*values.last().unwrap()));
    e
}

fn key(v: f64) -> i64 {
    (v * 1e12).round() as i64
}

pub fn render(records: &[VerdictRecord]) -> String {
    // Angles are merged: a cell keeps a verdict only if every angle agrees.
    let mut cells: BTreeMap<(i64, i64), (f64, f64, &str, bool)> = BTreeMap::new();
    for r in records {
        let rad = r.zeta().norm();
        let hatched = matches!(r.criterion.as_deref(), Some("toy-nonexistence") | Some("pure-boundary"));
        cells
            .entry((key(r.lambda), key(rad)))
            .and_modify(|c| {
                if c.2 != r.verdict {
                    c.2 = "unknown";
                }
                c.3 &= hatched;
            })
            .or_insert((r.lambda, rad, r.verdict.as_str(), hatched));
    }
    let mut lambdas: Vec<f64> = cells.values().map(|c| c.0).collect();
    let mut radii: Vec<f64> = cells.values().map(|c| c.1).collect();
    for v in [&mut lambdas, &mut radii] {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| key(*a) == key(*b));
    }

    let mut s = String::new();
    let (tw, th) = (W + 2.0 * PAD, H + 2.0 * PAD);
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{tw}" height="{th}" viewBox="0 0 {tw} {th}">"#).unwrap();
    s.push_str(concat!(
        r#"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"#,
        r#"<line x1="0" y1="0" x2="0" y2="6" stroke="black" stroke-width="1"/></pattern></defs>"#,
        "\n"
    ));
    writeln!(s, r#"<rect x="0" y="0" width="{tw}" height="{th}" fill="white"/>"#).unwrap();
    if !lambdas.is_empty() {
        let ex = edges(&lambdas);
        let ey = edges(&radii);
        let px = |l: f64| PAD + W * l;
        let py = |r: f64| PAD + H * (1.0 - r);
        for &(l, r, verdict, hatched) in cells.values() {
            let i = lambdas.iter().position(|v| key(*v) == key(l)).unwrap();
            let j = radii.iter().position(|v| key(*v) == key(r)).unwrap();
            let (x0, x1, y0, y1) = (px(ex[i]), px(ex[i + 1]), py(ey[j + 1]), py(ey[j]));
            let fill = match verdict {
                "exists" => "#3b6fd8",
                "not_exists" => "#d83b3b",
                _ => continue,
            };
            let (w, h) = (x1 - x0, y1 - y0);
            writeln!(s, r#"<rect x="{x0:.3}" y="{y0:.3}" width="{w:.3}" height="{h:.3}" fill="{fill}"/>"#).unwrap();
            if hatched {
                writeln!(s, r#"<rect x="{x0:.3}" y="{y0:.3}" width="{w:.3}" height="{h:.3}" fill="url(#hatch)" opacity="0.35"/>"#)
                    .unwrap();
            }
        }
    }
    writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{W}" height="{H}" fill="none" stroke="black"/>"#).unwrap();
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let x = PAD + W * v;
        let y = PAD + H * (1.0 - v);
        writeln!(s, r#"<text x="{x}" y="{}" font-size="12" text-anchor="middle">{v}</text>"#, PAD + H + 18.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{v}</text>"#, PAD - 6.0, y + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">lambda</text>"#, PAD + W / 2.0, th - 14.0).unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {})">|zeta|</text>"#,
        PAD + H / 2.0,
        PAD + H / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
