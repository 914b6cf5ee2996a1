//! Data bundles for re-plotting each figure.
//!
//! A bundle is a set of data files plus a manifest describing axes, labels,
//! legends and reference lines. Rendering is left to any external plotter.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{InitialState, ModelParams, SpectralWidth};
use crate::output::{trajectory_table, Format, Table};
use crate::propagator;
use crate::sweep::{self, Quantity, SweepSpec};

pub const FIGURE_NAMES: [&str; 11] = [
    "fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b", "fig7a", "fig7b",
];

/// Reference optimum of the stored energy for the memoryless reservoir at
/// `gamma = 0.1 Omega`.
pub const MEMORYLESS_STORED_ENERGY_REFERENCE: f64 = 0.925;
/// Reference optimum of the ergotropy for the same setting.
pub const MEMORYLESS_ERGOTROPY_REFERENCE: f64 = 0.851;

const HEATMAP_RANGE: (f64, f64) = (0.1, 10.0);
const CURVE_HORIZON: f64 = 25.0;

#[derive(Debug, Clone, Copy)]
pub struct FigureOptions {
    pub format: Format,
    /// Points per heatmap axis (default 21).
    pub grid_points: usize,
    /// Points per time curve (default 1001).
    pub curve_points: usize,
    /// Points along the ratio axis of fig7 (default 31).
    pub scan_points: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            grid_points: 21,
            curve_points: 1001,
            scan_points: 31,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisInfo {
    pub column: String,
    pub label: String,
    pub scale: String,
    pub range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub file: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_over_omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_over_omega: Option<SpectralWidth>,
    /// Columns to plot against `x`, when the file holds several curves.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: String,
    pub value: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureManifest {
    pub figure: String,
    pub title: String,
    pub version: String,
    pub kind: String,
    pub x: AxisInfo,
    pub y: AxisInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<AxisInfo>,
    pub datasets: Vec<DatasetInfo>,
    pub annotations: Vec<Annotation>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FigureBundle {
    pub manifest: FigureManifest,
    /// `(file name, contents)` pairs.
    pub files: Vec<(String, String)>,
}

impl FigureBundle {
    /// Writes the data files and `<figure>_manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents)?;
            written.push(path);
        }
        let path = dir.join(format!("{}_manifest.json", self.manifest.figure));
        fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        written.push(path);
        Ok(written)
    }
}

fn axis(column: &str, label: &str, scale: &str, range: (f64, f64)) -> AxisInfo {
    AxisInfo {
        column: column.into(),
        label: label.into(),
        scale: scale.into(),
        range,
    }
}

fn ratio_tag(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

fn width_tag(w: SpectralWidth) -> String {
    match w {
        SpectralWidth::Finite(x) => ratio_tag(x),
        SpectralWidth::Infinite => "inf".into(),
    }
}

fn width_text(w: SpectralWidth) -> String {
    match w {
        SpectralWidth::Finite(x) => format!("lambda = {x} Omega"),
        SpectralWidth::Infinite => "lambda -> inf".into(),
    }
}

/// Builds the data bundle of one figure.
pub fn build_figure(name: &str, opts: &FigureOptions) -> Result<FigureBundle> {
    match name {
        "fig2" => heatmap(name, Quantity::Nonmarkovianity, opts),
        "fig4a" => heatmap(name, Quantity::StoredEnergyMax, opts),
        "fig4b" => heatmap(name, Quantity::ErgotropyMax, opts),
        "fig3a" | "fig3b" => curves(
            name,
            &[0.1, 0.5, 1.0, 2.0].map(|g| (g, SpectralWidth::Finite(0.1))),
            opts,
        ),
        "fig5a" | "fig5b" => curves(
            name,
            &[0.1, 0.5, 1.0, 2.0, 3.0].map(|g| (g, SpectralWidth::Infinite)),
            opts,
        ),
        "fig6a" | "fig6b" => curves(
            name,
            &[(0.1, SpectralWidth::Finite(0.1)), (0.1, SpectralWidth::Infinite)],
            opts,
        ),
        "fig7a" => fig7a(opts),
        "fig7b" => fig7b(opts),
        other => Err(Error::InvalidParameter(format!(
            "unknown figure {other:?}; valid names: {}",
            FIGURE_NAMES.join(", ")
        ))),
    }
}

fn heatmap(name: &str, quantity: Quantity, opts: &FigureOptions) -> Result<FigureBundle> {
    let (lo, hi) = HEATMAP_RANGE;
    let axis_values = sweep::spaced(lo, hi, opts.grid_points, true);
    let spec = SweepSpec::new(
        axis_values.clone(),
        axis_values.iter().map(|&x| SpectralWidth::Finite(x)).collect(),
        quantity,
    );
    let result = sweep::run_sweep(&spec)?;
    let z_max = result.values.iter().flatten().cloned().fold(0.0, f64::max);
    let file = format!("{name}_grid.{}", opts.format.extension());
    let contents = match opts.format {
        Format::Csv => result.to_csv(),
        Format::Json => result.to_json()?,
    };
    let (title, z_label) = match quantity {
        Quantity::Nonmarkovianity => ("Non-Markovianity N", "N"),
        Quantity::StoredEnergyMax => ("Maximum stored energy", "Delta E_B^max / omega0"),
        _ => ("Maximum ergotropy", "W_max / omega0"),
    };
    let mut notes = vec![format!(
        "axes log-spaced over [{lo}, {hi}] with {} points each",
        opts.grid_points
    )];
    if quantity == Quantity::Nonmarkovianity {
        notes.push(format!(
            "trace-distance increases integrated up to Omega*t = {}; cells whose distance has not decayed are flagged truncated",
            spec.tmax
        ));
    } else {
        notes.push(format!("optimized over Omega*tau in [0, {}]", spec.tmax));
    }
    Ok(FigureBundle {
        manifest: FigureManifest {
            figure: name.into(),
            title: title.into(),
            version: crate::VERSION.into(),
            kind: "heatmap".into(),
            x: axis("lambda_over_omega", "lambda / Omega", "log", HEATMAP_RANGE),
            y: axis("gamma_over_omega", "gamma / Omega", "log", HEATMAP_RANGE),
            z: Some(axis(quantity.as_str(), z_label, "linear", (0.0, z_max))),
            datasets: vec![DatasetInfo {
                file: file.clone(),
                label: title.into(),
                gamma_over_omega: None,
                lambda_over_omega: None,
                y_columns: Vec::new(),
            }],
            annotations: Vec::new(),
            notes,
        },
        files: vec![(file, contents)],
    })
}

fn curves(name: &str, cases: &[(f64, SpectralWidth)], opts: &FigureOptions) -> Result<FigureBundle> {
    let energy = name.ends_with('a');
    let (column, label, title) = if energy {
        ("stored_energy", "Delta E_B / omega0", "Stored energy during charging")
    } else {
        ("ergotropy", "W / omega0", "Ergotropy during charging")
    };
    let mut files = Vec::new();
    let mut datasets = Vec::new();
    for &(gamma, width) in cases {
        let params = ModelParams::from_ratios(gamma, width)?;
        let traj = propagator::trajectory(&params, &InitialState::empty_battery(), CURVE_HORIZON, opts.curve_points)?;
        let file = format!(
            "{name}_gamma{}_lambda{}.{}",
            ratio_tag(gamma),
            width_tag(width),
            opts.format.extension()
        );
        files.push((file.clone(), trajectory_table(&traj).encode(opts.format)?));
        datasets.push(DatasetInfo {
            file,
            label: format!("gamma = {gamma} Omega, {}", width_text(width)),
            gamma_over_omega: Some(gamma),
            lambda_over_omega: Some(width),
            y_columns: vec![column.into()],
        });
    }
    Ok(FigureBundle {
        manifest: FigureManifest {
            figure: name.into(),
            title: title.into(),
            version: crate::VERSION.into(),
            kind: "curves".into(),
            x: axis("Omega_tau", "Omega tau", "linear", (0.0, CURVE_HORIZON)),
            y: axis(column, label, "linear", (0.0, 1.0)),
            z: None,
            datasets,
            annotations: Vec::new(),
            notes: Vec::new(),
        },
        files,
    })
}

fn maxima_row(gamma: f64, width: SpectralWidth) -> Result<(f64, f64)> {
    let r = metrics::charging_maxima(&ModelParams::from_ratios(gamma, width)?)?;
    Ok((r.delta_e_max, r.w_max))
}

fn fig7a(opts: &FigureOptions) -> Result<FigureBundle> {
    let gamma = 0.1;
    let range = (0.1, 100.0);
    let mut table = Table::new(&["lambda_over_omega", "delta_e_max", "w_max"])
        .meta("tool", format!("cavity-battery {}", crate::VERSION))
        .meta("gamma/Omega", gamma);
    for l in sweep::spaced(range.0, range.1, opts.scan_points, true) {
        let (e, w) = maxima_row(gamma, SpectralWidth::Finite(l))?;
        table.push(vec![l, e, w]);
    }
    let (e_inf, w_inf) = maxima_row(gamma, SpectralWidth::Infinite)?;
    let mut flat = Table::new(&["delta_e_max", "w_max"])
        .meta("tool", format!("cavity-battery {}", crate::VERSION))
        .meta("gamma/Omega", gamma)
        .meta("lambda/Omega", "inf");
    flat.push(vec![e_inf, w_inf]);

    let ext = opts.format.extension();
    let with_file = format!("fig7a_with_memory.{ext}");
    let flat_file = format!("fig7a_memoryless.{ext}");
    Ok(FigureBundle {
        manifest: FigureManifest {
            figure: "fig7a".into(),
            title: "Optimal charging versus reservoir width (gamma = 0.1 Omega)".into(),
            version: crate::VERSION.into(),
            kind: "curves".into(),
            x: axis("lambda_over_omega", "lambda / Omega", "log", range),
            y: axis("delta_e_max", "optimum / omega0", "linear", (0.0, 1.0)),
            z: None,
            datasets: vec![
                DatasetInfo {
                    file: with_file.clone(),
                    label: "with memory".into(),
                    gamma_over_omega: Some(gamma),
                    lambda_over_omega: None,
                    y_columns: vec!["delta_e_max".into(), "w_max".into()],
                },
                DatasetInfo {
                    file: flat_file.clone(),
                    label: "memoryless (computed)".into(),
                    gamma_over_omega: Some(gamma),
                    lambda_over_omega: Some(SpectralWidth::Infinite),
                    y_columns: vec!["delta_e_max".into(), "w_max".into()],
                },
            ],
            annotations: vec![
                Annotation {
                    kind: "hline".into(),
                    value: MEMORYLESS_STORED_ENERGY_REFERENCE,
                    label: "memoryless Delta E_B^max".into(),
                },
                Annotation {
                    kind: "hline".into(),
                    value: MEMORYLESS_ERGOTROPY_REFERENCE,
                    label: "memoryless W_max".into(),
                },
            ],
            notes: vec![format!(
                "{} log-spaced lambda/Omega points; optimized over Omega*tau in [0, {}]",
                opts.scan_points,
                metrics::DEFAULT_MAXIMA_HORIZON
            )],
        },
        files: vec![
            (with_file, table.encode(opts.format)?),
            (flat_file, flat.encode(opts.format)?),
        ],
    })
}

fn fig7b(opts: &FigureOptions) -> Result<FigureBundle> {
    let width = SpectralWidth::Finite(0.1);
    let range = (0.1, 3.9);
    let mut table = Table::new(&[
        "gamma_over_omega",
        "delta_e_max_memory",
        "w_max_memory",
        "delta_e_max_memoryless",
        "w_max_memoryless",
    ])
    .meta("tool", format!("cavity-battery {}", crate::VERSION))
    .meta("lambda/Omega (with memory)", 0.1);
    for g in sweep::spaced(range.0, range.1, opts.scan_points, false) {
        let (e, w) = maxima_row(g, width)?;
        let (ei, wi) = maxima_row(g, SpectralWidth::Infinite)?;
        table.push(vec![g, e, w, ei, wi]);
    }
    let file = format!("fig7b.{}", opts.format.extension());
    Ok(FigureBundle {
        manifest: FigureManifest {
            figure: "fig7b".into(),
            title: "Optimal charging versus reservoir coupling, with and without memory".into(),
            version: crate::VERSION.into(),
            kind: "curves".into(),
            x: axis("gamma_over_omega", "gamma / Omega", "linear", range),
            y: axis("delta_e_max_memory", "optimum / omega0", "linear", (0.0, 1.0)),
            z: None,
            datasets: vec![DatasetInfo {
                file: file.clone(),
                label: "lambda = 0.1 Omega versus lambda -> inf".into(),
                gamma_over_omega: None,
                lambda_over_omega: None,
                y_columns: vec![
                    "delta_e_max_memory".into(),
                    "w_max_memory".into(),
                    "delta_e_max_memoryless".into(),
                    "w_max_memoryless".into(),
                ],
            }],
            annotations: Vec::new(),
            notes: vec![format!("gamma/Omega over the non-Markovian memoryless range [{}, {}]", range.0, range.1)],
        },
        files: vec![(file, table.encode(opts.format)?)],
    })
}
