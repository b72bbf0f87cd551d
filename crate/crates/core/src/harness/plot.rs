//! Hand-rolled SVG output: heatmaps for sweeps, line plots for attacks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::rows::{read_rows, summarize, SummaryRow};
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 70.0;

// five-stop dark-blue to yellow ramp
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, W / 2.0);
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v.fract() == 0.0 && v.abs() < 1e6 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// `values[(x, y)]`; missing cells are left blank.
fn heatmap(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64], values: &BTreeMap<(usize, usize), f64>) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = values
        .values()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (W - 2.0 * MARGIN) / xs.len() as f64;
    let ch = (H - 2.0 * MARGIN) / ys.len() as f64;
    for (&(i, j), &v) in values {
        let x = MARGIN + i as f64 * cw;
        // first y value at the bottom
        let y = H - MARGIN - (j + 1) as f64 * ch;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}" stroke="white"/>"#,
            color((v - lo) / span)
        );
        let ink = if (v - lo) / span > 0.6 { "black" } else { "white" };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{ink}" font-size="10">{v:.3}</text>"#,
            x + cw / 2.0,
            y + ch / 2.0 + 4.0
        );
    }
    for (i, v) in xs.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN + (i as f64 + 0.5) * cw,
            H - MARGIN + 18.0,
            fmt_num(*v)
        );
    }
    for (j, v) in ys.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN - 8.0,
            H - MARGIN - (j as f64 + 0.5) * ch + 4.0,
            fmt_num(*v)
        );
    }
    axis_labels(&mut out, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

fn axis_labels(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let (x0, x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = all.iter().fold((0.0f64, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let xs = if x1 > x0 { x1 - x0 } else { 1.0 };
    let ys = if y1 > y0 { y1 - y0 } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / xs * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / ys * (H - 2.0 * MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for t in 0..=4 {
        let fx = x0 + xs * t as f64 / 4.0;
        let fy = y0 + ys * t as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{fx:.2}</text>"#, px(fx), H - MARGIN + 18.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{fy:.3}</text>"#, MARGIN - 6.0, py(fy) + 4.0);
    }
    const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (i, s) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{c}"/>"#);
        }
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{c}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            W - MARGIN - 150.0,
            W - MARGIN - 130.0,
            W - MARGIN - 124.0,
            ly + 4.0,
            s.label
        );
    }
    axis_labels(&mut out, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

fn distinct(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn index_of(xs: &[f64], v: f64) -> usize {
    xs.iter().position(|&x| x == v).unwrap_or(0)
}

fn sweep_heatmaps(summary: &[SummaryRow], by_snr: bool) -> Vec<(String, String)> {
    let mut groups: BTreeMap<(usize, usize), Vec<&SummaryRow>> = BTreeMap::new();
    for r in summary {
        groups.entry((r.n, r.mu)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((n, mu), rows) in groups {
        let xs = distinct(rows.iter().map(|r| if by_snr { r.snr_db } else { r.s as f64 }));
        let ys = distinct(rows.iter().map(|r| r.k as f64));
        let mut cells = BTreeMap::new();
        for r in &rows {
            if let Some(m) = r.mean_rmse {
                let x = if by_snr { r.snr_db } else { r.s as f64 };
                cells.insert((index_of(&xs, x), index_of(&ys, r.k as f64)), m);
            }
        }
        let xl = if by_snr { "SNR (dB)" } else { "channel sparsity s" };
        let title = format!("mean normalized RMSE, n={n}, mu={mu}");
        out.push((format!("n{n}_mu{mu}"), heatmap(&title, xl, "signal sparsity k", &xs, &ys, &cells)));
    }
    out
}

/// Writes SVG plots next to `csv_path` and returns their paths. Output is a
/// pure function of the CSV contents.
pub fn emit_plots(csv_path: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_rows(csv_path)?;
    let experiment = rows[0].experiment.clone();
    if rows.iter().any(|r| r.experiment != experiment) {
        return Err(Error::param("CSV mixes experiments"));
    }
    let summary = summarize(&rows);
    let mut plots: Vec<(String, String)> = Vec::new();
    match experiment.as_str() {
        "sparsity_sweep" => plots = sweep_heatmaps(&summary, false),
        "noise_sweep" => plots = sweep_heatmaps(&summary, true),
        "gamma_attack" => {
            let pts = |f: &dyn Fn(&SummaryRow) -> Option<f64>| -> Vec<(f64, f64)> {
                summary.iter().filter_map(|r| Some((r.gamma?, f(r)?))).collect()
            };
            plots.push((
                "success".into(),
                line_plot(
                    "attack success probability",
                    "gamma",
                    "success rate",
                    &[Series {
                        label: "success".into(),
                        points: pts(&|r| Some(r.success_rate)),
                    }],
                ),
            ));
            plots.push((
                "rmse".into(),
                line_plot(
                    "Eve's normalized RMSE",
                    "gamma",
                    "RMSE",
                    &[
                        Series {
                            label: "to Alice".into(),
                            points: pts(&|r| r.mean_rmse),
                        },
                        Series {
                            label: "to Bob".into(),
                            points: pts(&|r| r.mean_rmse_bob),
                        },
                    ],
                ),
            ));
        }
        "channel_noise_attack" => {
            let mut by_mode: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in &summary {
                if let (Some(d), Some(m)) = (r.deviation_snr_db, r.mean_mse) {
                    by_mode.entry(r.mode.clone().unwrap_or_default()).or_default().push((d, m));
                }
            }
            let series: Vec<Series> = by_mode
                .into_iter()
                .map(|(label, points)| Series { label, points })
                .collect();
            plots.push(("mse".into(), line_plot("Eve's MSE to Alice", "deviation SNR (dB)", "MSE", &series)));
        }
        "protocol_demo" => {
            let points = rows.iter().filter_map(|r| Some((r.trial as f64, r.rmse?))).collect();
            plots.push((
                "rmse".into(),
                line_plot("mean per-round RMSE", "trial", "RMSE", &[Series { label: "rmse".into(), points }]),
            ));
        }
        other => return Err(Error::param(format!("no plots for experiment '{other}'"))),
    }
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    let mut paths = Vec::new();
    for (suffix, svg) in plots {
        let path = dir.join(format!("{stem}_{suffix}.svg"));
        std::fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, Experiment, ExperimentConfig, Grids};

    #[test]
    fn color_ramp_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn sweep_plots_are_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: Experiment::SparsitySweep,
            grids: Grids {
                dims: Some(vec![(32, 24), (40, 32)]),
                k: Some(vec![1, 2]),
                s: Some(vec![1, 2]),
                ..Grids::default()
            },
            trials: 2,
            seed: 3,
            output_dir: dir.path().to_path_buf(),
        };
        let out = run_experiment(&cfg).unwrap();
        let first = emit_plots(&out.files[0]).unwrap();
        assert_eq!(first.len(), 2);
        let bytes: Vec<Vec<u8>> = first.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let second = emit_plots(&out.files[0]).unwrap();
        for (p, b) in second.iter().zip(&bytes) {
            assert_eq!(&std::fs::read(p).unwrap(), b);
        }
        assert!(String::from_utf8(bytes[0].clone()).unwrap().starts_with("<svg"));
    }

    #[test]
    fn empty_csv_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "").unwrap();
        assert!(emit_plots(&path).is_err());
    }
}
