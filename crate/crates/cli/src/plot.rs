//! Emission of a self-contained plot script.
//!
//! The script embeds the curve data as literals and needs only Python with
//! matplotlib to render; the tool itself is not required.

use eprb_core::harness::{Engine, RunReport};

fn float_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", items.join(", "))
}

/// Python source that draws the rate curves (reference plus every model
/// series) and the residuals against the stated sin^2/2 law, saving
/// `curves.png` next to wherever the script lives.
pub fn plot_script(report: &RunReport) -> String {
    let grid: Vec<f64> = {
        let mut phis: Vec<f64> = report
            .curves
            .iter()
            .filter(|p| p.engine == Engine::Qm)
            .map(|p| p.phi_rad)
            .collect();
        if phis.is_empty() {
            phis = report.curves.iter().map(|p| p.phi_rad).collect();
            phis.dedup();
        }
        phis
    };
    let phi_deg: Vec<f64> = grid.iter().map(|r| r * 180.0 / std::f64::consts::PI).collect();

    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    let mut residual_series: Vec<(String, Vec<f64>)> = Vec::new();

    let mut keys: Vec<(Engine, Option<eprb_core::Interpretation>)> = Vec::new();
    for p in &report.curves {
        if !keys.contains(&(p.engine, p.mode)) {
            keys.push((p.engine, p.mode));
        }
    }
    for (engine, mode) in keys {
        let label = match (engine, mode) {
            (Engine::Qm, _) => "quantum joint probability sin^2(phi)/2".to_string(),
            (engine, Some(mode)) => format!("{engine} {mode}"),
            (engine, None) => engine.to_string(),
        };
        let values: Vec<f64> = report
            .curves
            .iter()
            .filter(|p| p.engine == engine && p.mode == mode)
            .map(|p| p.value)
            .collect();
        if values.len() != grid.len() {
            continue;
        }
        if engine != Engine::Qm {
            let residuals: Vec<f64> = report
                .residuals
                .entries
                .iter()
                .filter(|e| e.engine == engine && e.mode == mode)
                .map(|e| e.claim_residual)
                .collect();
            residual_series.push((label.clone(), residuals));
        }
        series.push((label, values));
    }

    let mut py = String::new();
    py.push_str("#!/usr/bin/env python3\n");
    py.push_str("\"\"\"Render the run curves; data embedded, no tool required.\"\"\"\n");
    py.push_str("from pathlib import Path\n\n");
    py.push_str("import matplotlib\n");
    py.push_str("matplotlib.use(\"Agg\")\n");
    py.push_str("import matplotlib.pyplot as plt\n\n");
    py.push_str(&format!("phi_deg = {}\n\n", float_list(&phi_deg)));

    py.push_str("series = {\n");
    for (label, values) in &series {
        py.push_str(&format!("    {label:?}: {},\n", float_list(values)));
    }
    py.push_str("}\n\n");

    py.push_str("residuals = {\n");
    for (label, values) in &residual_series {
        py.push_str(&format!("    {label:?}: {},\n", float_list(values)));
    }
    py.push_str("}\n\n");

    py.push_str(
        r#"fig, (ax_rates, ax_resid) = plt.subplots(2, 1, sharex=True, figsize=(9, 8))
for label, values in series.items():
    style = "k--" if label.startswith("quantum") else "-"
    ax_rates.plot(phi_deg, values, style, label=label)
ax_rates.set_ylabel("normalized coincidence rate")
ax_rates.legend(fontsize=8)
ax_rates.grid(alpha=0.3)

for label, values in residuals.items():
    ax_resid.plot(phi_deg, values, label=label)
ax_resid.axhline(0.0, color="k", linewidth=0.8)
ax_resid.set_xlabel("relative analyzer angle (degrees)")
ax_resid.set_ylabel("residual vs sin^2(phi)/2")
ax_resid.legend(fontsize=8)
ax_resid.grid(alpha=0.3)

out = Path(__file__).with_name("curves.png")
fig.tight_layout()
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#,
    );
    py
}
