//! Tiny log-log SVG plots for the convergence tables.

use std::fmt::Write as _;

pub fn loglog_plot(series: &[(&str, &[(f64, f64)])], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const M: f64 = 56.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (_, pts) in series {
        for &(x, y) in *pts {
            if x > 0.0 && y > 0.0 {
                xs.push(x.ln());
                ys.push(y.ln());
            }
        }
    }
    let (x0, x1) = min_max(&xs);
    let (y0, y1) = min_max(&ys);
    let sx = |x: f64| M + (x.ln() - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y.ln() - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * M);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">{title}</text>",
        M
    );
    let _ = writeln!(
        out,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        out,
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let mut path = String::new();
        for (j, &(x, y)) in pts.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).enumerate() {
            let _ = write!(
                path,
                "{}{:.2},{:.2} ",
                if j == 0 { "M" } else { "L" },
                sx(x),
                sy(y)
            );
        }
        let _ = writeln!(
            out,
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            W - M - 150.0,
            M + 16.0 * i as f64
        );
        for &(x, y) in pts.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0) {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                sx(x),
                sy(y)
            );
        }
    }
    let _ = writeln!(out, "</svg>");
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
