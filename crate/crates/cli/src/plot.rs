//! Self-contained SVG plots: phase portrait, level-function trace, the
//! estimate mismatch on a log scale, and both Lyapunov traces. Purely
//! informational; never touches exit codes.

use std::fmt::Write as _;

use regsim_core::diagnostics;
use regsim_core::integrate::Trajectory;
use regsim_core::model::Models;
use regsim_core::num;

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 48.0;

struct Panel {
    title: String,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

fn finite_bounds(series: &[(String, Vec<(f64, f64)>)]) -> (f64, f64, f64, f64) {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in series {
        for (x, y) in pts {
            if x.is_finite() && y.is_finite() {
                x_min = x_min.min(*x);
                x_max = x_max.max(*x);
                y_min = y_min.min(*y);
                y_max = y_max.max(*y);
            }
        }
    }
    if !x_min.is_finite() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        let pad = |lo: f64, hi: f64| {
            let span = (hi - lo).max(1e-12);
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        (x_min, x_max, y_min, y_max)
    }
}

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn render_panel(svg: &mut String, panel: &Panel, x0: f64, y0: f64) {
    let (x_min, x_max, y_min, y_max) = finite_bounds(&panel.series);
    let sx = |x: f64| x0 + MARGIN + (x - x_min) / (x_max - x_min) * (PANEL_W - 2.0 * MARGIN);
    let sy = |y: f64| y0 + PANEL_H - MARGIN - (y - y_min) / (y_max - y_min) * (PANEL_H - 2.0 * MARGIN);

    let _ = write!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
        x0 + MARGIN,
        y0 + MARGIN,
        PANEL_W - 2.0 * MARGIN,
        PANEL_H - 2.0 * MARGIN
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 + MARGIN - 10.0,
        panel.title
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="start">{:.3e}</text>"#,
        x0 + 4.0,
        y0 + PANEL_H - MARGIN,
        y_min
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="start">{:.3e}</text>"#,
        x0 + 4.0,
        y0 + MARGIN + 4.0,
        y_max
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{:.1}</text>"#,
        x0 + MARGIN,
        y0 + PANEL_H - MARGIN + 14.0,
        x_min
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{:.1}</text>"#,
        x0 + PANEL_W - MARGIN,
        y0 + PANEL_H - MARGIN + 14.0,
        x_max
    );

    for (k, (label, pts)) in panel.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        // Subsample long series; the plot has fewer pixels than samples.
        let stride = (pts.len() / 2000).max(1);
        for (i, (x, y)) in pts.iter().step_by(stride).enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), sy(*y));
        }
        let _ = write!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            path.trim_end()
        );
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{color}">{label}</text>"#,
            x0 + MARGIN + 6.0,
            y0 + MARGIN + 14.0 + 12.0 * k as f64,
        );
    }
}

pub fn render(models: &Models, traj: &Trajectory, scenario: &str) -> String {
    let phase = if models.plant.n >= 2 {
        (
            "phase portrait (x1, x2)".to_string(),
            traj.states.iter().map(|s| (s.x[0], s.x[1])).collect::<Vec<_>>(),
        )
    } else {
        (
            "state x1 over time".to_string(),
            traj.states.iter().map(|s| (s.t, s.x[0])).collect::<Vec<_>>(),
        )
    };
    let psi_series: Vec<(f64, f64)> =
        traj.times.iter().zip(&traj.derived).map(|(t, d)| (*t, d.psi)).collect();
    let mismatch: Vec<(f64, f64)> = traj
        .states
        .iter()
        .zip(&traj.derived)
        .map(|(s, d)| {
            let v = num::norm(&num::sub(&s.theta, &d.theta_hat)).max(1e-16);
            (s.t, num::ln(v) / core::f64::consts::LN_10)
        })
        .collect();
    let v_theta = diagnostics::v_theta_trace(traj, models).unwrap_or_default();
    let v_xi = diagnostics::v_xi_trace(traj, models).unwrap_or_default();

    let panels = [
        Panel { title: phase.0, series: vec![("x".to_string(), phase.1)] },
        Panel {
            title: "level function psi(x(t))".to_string(),
            series: vec![("psi".to_string(), psi_series)],
        },
        Panel {
            title: "log10 |theta - theta_hat|".to_string(),
            series: vec![("mismatch".to_string(), mismatch)],
        },
        Panel {
            title: "Lyapunov traces".to_string(),
            series: vec![("V_theta".to_string(), v_theta), ("V_xi".to_string(), v_xi)],
        },
    ];

    let width = PANEL_W * 2.0;
    let height = PANEL_H * 2.0 + 24.0;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="100%" height="100%" fill="white"/><text x="{:.1}" y="17" font-size="15" text-anchor="middle">{scenario}</text>"#,
        width / 2.0
    );
    for (i, panel) in panels.iter().enumerate() {
        let x0 = (i % 2) as f64 * PANEL_W;
        let y0 = 24.0 + (i / 2) as f64 * PANEL_H;
        render_panel(&mut svg, panel, x0, y0);
    }
    svg.push_str("</svg>\n");
    svg
}
