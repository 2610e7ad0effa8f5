//! Runs a validated config end to end and writes its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{linear_size, ExperimentConfig, GridSpec, Probe, WindowSpec};
use crate::error::{Error, Result};
use crate::fluctent::{correlation_matrix, correlator_profile, particle_variance, vn_entropy};
use crate::models::{build_mesh, Occupation};
use crate::plot;
use crate::response::{absorption_rate, im_chi_from_noise, DriveSpectrum};
use crate::scaling::{
    collapse_residual, crossover_length, fit_area_volume, fit_scaling_among, linear_regression,
    ScalingLaw, SizeSeries, COLLAPSE_MASK_FRACTION,
};
use crate::spectrum::{uniform_grid, SpectrumSeries};
use crate::structfact::{band_span, sbar, sbar_naive, select_window, BoxKernel};

/// Which implementation of the structure factor to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComputePath {
    #[default]
    Fast,
    /// The literal site-sum reference; small lattices only.
    Naive,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub path: ComputePath,
    pub plots: bool,
    /// Overrides the config's output directory.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    pub dims: Vec<usize>,
    pub linear_size: usize,
    pub spectrum_csv: PathBuf,
    pub spectrum_json: PathBuf,
    pub variance: f64,
    pub entropy: f64,
    pub transition_weight: f64,
    pub response_csv: Option<PathBuf>,
    pub absorption_json: Option<PathBuf>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub delta_omega: Option<f64>,
    pub sizes: Vec<SizeRecord>,
    pub fluct_csv: Option<PathBuf>,
    pub decay_csv: Option<PathBuf>,
    pub scaling_report: Option<PathBuf>,
    pub crossover_report: Option<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub complete: bool,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(RUN_RECORD))?)?)
    }
}

pub const RUN_RECORD: &str = "run_record.json";
pub const SCALING_REPORT: &str = "scaling_report.json";
pub const CROSSOVER_REPORT: &str = "crossover.json";

/// One entry of `scaling_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub label: String,
    pub dimension: usize,
    pub chosen_law: ScalingLaw,
    pub prefactor: f64,
    pub residuals_per_law: BTreeMap<ScalingLaw, f64>,
    /// Collapse of the whole spectrum under the chosen law; `S̄` only.
    pub collapse_residual: Option<f64>,
    pub collapse_per_law: Option<BTreeMap<ScalingLaw, f64>>,
    pub collapse_mask_fraction: Option<f64>,
    pub probe_omega0: Option<f64>,
    pub sizes: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverEntry {
    pub temperature: f64,
    pub area: f64,
    pub volume: f64,
    /// `None` stands for an infinite crossover length.
    pub crossover_length: Option<f64>,
    pub sizes: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport {
    pub omega0: f64,
    pub dimension: usize,
    pub entries: Vec<CrossoverEntry>,
    /// Slope of `ln b(T)` against `1/T` over temperatures with `b > 0`.
    pub log_volume_slope: Option<f64>,
}

#[derive(Serialize)]
struct AbsorptionRecord<'a> {
    drive: &'a DriveSpectrum,
    absorption_rate: f64,
}

fn dims_tag(dims: &[usize]) -> String {
    dims.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

/// Energy spacing `Δω` used for every size.
pub fn resolve_window(config: &ExperimentConfig) -> Result<f64> {
    match &config.window {
        WindowSpec::Explicit { delta_omega } => Ok(*delta_omega),
        WindowSpec::Auto { reference_dims, step_axis } => {
            let mesh = build_mesh(reference_dims)?;
            select_window(&config.model, &mesh, *step_axis)
        }
    }
}

/// The `ω₀` grid shared by all sizes, so that spectra can be collapsed.
pub fn resolve_grid(config: &ExperimentConfig, delta_omega: f64) -> Result<Vec<f64>> {
    match config.grid {
        GridSpec::Uniform { start, stop, step } => uniform_grid(start, stop, step),
        GridSpec::Auto => {
            let mut span: f64 = 0.0;
            for dims in &config.sizes {
                let (lo, hi) = band_span(&config.model, &build_mesh(dims)?)?;
                span = span.max(hi - lo);
            }
            let h = delta_omega / 4.0;
            let reach = span + 2.0 * delta_omega;
            // grid points sit on integer multiples of h, so 0 is always sampled
            let top = (reach / h - 1e-9).ceil();
            let bottom = if config.temperature > 0.0 { -top } else { -8.0 };
            Ok((bottom as i64..=top as i64).map(|i| i as f64 * h).collect())
        }
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn spectrum_for(
    config: &ExperimentConfig,
    path: ComputePath,
    dims: &[usize],
    occ: Occupation,
    kernel: BoxKernel,
    grid: &[f64],
) -> Result<SpectrumSeries> {
    let mesh = build_mesh(dims)?;
    let region = config.region.resolve(dims)?;
    match path {
        ComputePath::Fast => sbar(&config.model, &mesh, &region, occ, kernel, grid),
        ComputePath::Naive => sbar_naive(&config.model, &mesh, &region, occ, kernel, grid),
    }
}

/// Runs every stage of an experiment and writes `run_record.json`.
///
/// A failure part way through still leaves a record, flagged incomplete,
/// listing whatever was written before the error.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunRecord> {
    let out = options.out_dir.clone().unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    let start = Instant::now();
    let mut record = RunRecord {
        name: config.name.clone(),
        config_hash: config.hash.clone(),
        output_dir: out.clone(),
        delta_omega: None,
        sizes: Vec::new(),
        fluct_csv: None,
        decay_csv: None,
        scaling_report: None,
        crossover_report: None,
        plots: Vec::new(),
        complete: false,
        error: None,
        wall_time_s: 0.0,
    };
    let result = run_stages(config, options, &out, &mut record);
    record.wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            record.complete = true;
            write_json(&out.join(RUN_RECORD), &record)?;
            Ok(record)
        }
        Err(e) => {
            record.error = Some(e.to_string());
            // best effort: the original error matters more than this one
            let _ = write_json(&out.join(RUN_RECORD), &record);
            Err(e)
        }
    }
}

fn run_stages(
    config: &ExperimentConfig,
    options: &RunOptions,
    out: &Path,
    record: &mut RunRecord,
) -> Result<()> {
    let occ = config.occupation();
    let delta_omega = resolve_window(config)?;
    record.delta_omega = Some(delta_omega);
    let kernel = BoxKernel::new(delta_omega)?;
    let grid = resolve_grid(config, delta_omega)?;

    let mut spectra = Vec::new();
    let mut fluct_rows = Vec::new();
    for dims in &config.sizes {
        let t0 = Instant::now();
        let tag = dims_tag(dims);
        let mut spectrum = spectrum_for(config, options.path, dims, occ, kernel, &grid)?;
        let mesh = build_mesh(dims)?;
        let region = config.region.resolve(dims)?;
        let corr = correlation_matrix(&config.model, &mesh, &region, occ)?;
        let variance = particle_variance(&corr);
        let entropy = vn_entropy(&corr);
        let l = linear_size(&region);

        let (response_csv, absorption_json) = match &config.drive {
            Some(drive) => {
                let chi = im_chi_from_noise(&spectrum, occ)?.with_kramers_kronig()?;
                let rpath = out.join(format!("response_{tag}.csv"));
                chi.write_csv(std::fs::File::create(&rpath)?)?;
                let rate = absorption_rate(&spectrum, drive)?;
                let apath = out.join(format!("absorption_{tag}.json"));
                write_json(&apath, &AbsorptionRecord { drive, absorption_rate: rate })?;
                (Some(rpath), Some(apath))
            }
            None => (None, None),
        };
        spectrum.metadata.wall_time_s = t0.elapsed().as_secs_f64();
        let (csv_path, json_path) = spectrum.save(out, &format!("sbar_{tag}"))?;
        record.sizes.push(SizeRecord {
            dims: dims.clone(),
            linear_size: l,
            spectrum_csv: csv_path,
            spectrum_json: json_path,
            variance,
            entropy,
            transition_weight: spectrum.metadata.transition_weight.unwrap_or(0.0),
            response_csv,
            absorption_json,
            wall_time_s: t0.elapsed().as_secs_f64(),
        });
        fluct_rows.push(vec![l as f64, variance, entropy]);
        spectra.push((l as f64, spectrum));
    }
    let fluct = out.join("fluct.csv");
    write_rows(&fluct, &["size", "variance", "entropy"], &fluct_rows)?;
    record.fluct_csv = Some(fluct);

    let largest = config.sizes.last().expect("validated nonempty");
    let max_distance = config.analysis.decay_max_distance.unwrap_or(largest[0] / 2);
    if max_distance >= 1 && max_distance < largest[0] {
        let distances: Vec<usize> = (1..=max_distance).collect();
        let profile = correlator_profile(&config.model, &build_mesh(largest)?, occ, &distances)?;
        let decay = out.join("decay.csv");
        let rows: Vec<Vec<f64>> = profile.iter().map(|&(r, c)| vec![r, c]).collect();
        write_rows(&decay, &["distance", "correlator"], &rows)?;
        record.decay_csv = Some(decay);
    }

    let dimension = config.scaling_dimension();
    if spectra.len() >= 3 {
        let reports = scaling_reports(config, &spectra, &record.sizes, dimension)?;
        let path = out.join(SCALING_REPORT);
        write_json(&path, &reports)?;
        record.scaling_report = Some(path);
        if options.plots {
            let law = reports[0].chosen_law;
            record.plots = plot::write_spectrum_plots(out, &config.name, &spectra, law, dimension)?;
        }
    } else if options.plots {
        record.plots = plot::write_spectrum_plots(out, &config.name, &spectra, ScalingLaw::Area, dimension)?;
    }

    if let Some(plan) = &config.analysis.crossover {
        let report = crossover(config, options.path, kernel, plan.omega0, &plan.temperatures, dimension)?;
        let path = out.join(CROSSOVER_REPORT);
        write_json(&path, &report)?;
        record.crossover_report = Some(path);
    }
    Ok(())
}

/// Index of the `ω₀` grid point at which size series of `S̄` are taken.
pub fn probe_index(probe: Probe, reference: &SpectrumSeries) -> usize {
    match probe {
        Probe::Value(w) => crate::spectrum::nearest_index(&reference.omega0, w),
        Probe::Named(_) => {
            let mut best = 0;
            for (i, &v) in reference.values.iter().enumerate() {
                if v > reference.values[best] {
                    best = i;
                }
            }
            best
        }
    }
}

fn scaling_reports(
    config: &ExperimentConfig,
    spectra: &[(f64, SpectrumSeries)],
    sizes: &[SizeRecord],
    dimension: usize,
) -> Result<Vec<ScalingReport>> {
    let laws = &config.analysis.laws;
    let lengths: Vec<f64> = spectra.iter().map(|(l, _)| *l).collect();
    let idx = probe_index(config.analysis.probe_omega0, &spectra[0].1);
    let probe = spectra[0].1.omega0[idx];

    let mut reports = Vec::new();
    let mut push = |label: &str, values: Vec<f64>, collapse: Option<BTreeMap<ScalingLaw, f64>>, probe: Option<f64>| -> Result<()> {
        let series = SizeSeries::new(label, dimension, lengths.iter().copied().zip(values.iter().copied()).collect())?;
        let fit = fit_scaling_among(&series, laws)?;
        reports.push(ScalingReport {
            label: label.to_string(),
            dimension,
            chosen_law: fit.law,
            prefactor: fit.prefactor,
            residuals_per_law: fit.per_law_residuals,
            collapse_residual: collapse.as_ref().map(|c| c[&fit.law]),
            collapse_mask_fraction: collapse.as_ref().map(|_| COLLAPSE_MASK_FRACTION),
            collapse_per_law: collapse,
            probe_omega0: probe,
            sizes: lengths.clone(),
            values,
        });
        Ok(())
    };

    let collapse = if config.analysis.collapse {
        let curves: Vec<(f64, &SpectrumSeries)> = spectra.iter().map(|(l, s)| (*l, s)).collect();
        let mut per_law = BTreeMap::new();
        for &law in laws {
            per_law.insert(law, collapse_residual(&curves, law, dimension)?);
        }
        Some(per_law)
    } else {
        None
    };
    push("sbar", spectra.iter().map(|(_, s)| s.values[idx]).collect(), collapse, Some(probe))?;
    push("variance", sizes.iter().map(|s| s.variance).collect(), None, None)?;
    push("entropy", sizes.iter().map(|s| s.entropy).collect(), None, None)?;
    if config.drive.is_some() {
        let rates = sizes
            .iter()
            .map(|s| {
                let path = s.absorption_json.as_ref().expect("drive runs write absorption");
                let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                v["absorption_rate"]
                    .as_f64()
                    .ok_or_else(|| Error::Parse("absorption_rate missing".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        if rates.iter().all(|r| *r > 0.0) {
            push("absorption", rates, None, None)?;
        }
    }
    Ok(reports)
}

/// Two-parameter area/volume fits of `S̄(ω₀)` at each temperature.
pub fn crossover(
    config: &ExperimentConfig,
    path: ComputePath,
    kernel: BoxKernel,
    omega0: f64,
    temperatures: &[f64],
    dimension: usize,
) -> Result<CrossoverReport> {
    let mut entries = Vec::new();
    for &t in temperatures {
        let occ = Occupation::from_temperature(t);
        let mut points = Vec::new();
        for dims in &config.sizes {
            let s = spectrum_for(config, path, dims, occ, kernel, &[omega0])?;
            let l = linear_size(&config.region.resolve(dims)?);
            points.push((l as f64, s.values[0]));
        }
        let series = SizeSeries::new(format!("sbar_T{t}"), dimension, points.clone())?;
        let fit = fit_area_volume(&series)?;
        let lc = match crossover_length(fit.area, fit.volume) {
            Ok(x) if x.is_finite() => Some(x),
            _ => None,
        };
        entries.push(CrossoverEntry {
            temperature: t,
            area: fit.area,
            volume: fit.volume,
            crossover_length: lc,
            sizes: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        });
    }
    let usable: Vec<&CrossoverEntry> = entries.iter().filter(|e| e.volume > 0.0).collect();
    let log_volume_slope = if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|e| 1.0 / e.temperature).collect();
        let y: Vec<f64> = usable.iter().map(|e| e.volume.ln()).collect();
        Some(linear_regression(&x, &y)?.0)
    } else {
        None
    };
    Ok(CrossoverReport {
        omega0,
        dimension,
        entries,
        log_volume_slope,
    })
}

/// Largest absolute difference between the fast and reference spectra for every size.
pub fn oracle_deviation(config: &ExperimentConfig) -> Result<Vec<(Vec<usize>, f64)>> {
    let delta_omega = resolve_window(config)?;
    let kernel = BoxKernel::new(delta_omega)?;
    let grid = resolve_grid(config, delta_omega)?;
    let occ = config.occupation();
    config
        .sizes
        .iter()
        .map(|dims| {
            let fast = spectrum_for(config, ComputePath::Fast, dims, occ, kernel, &grid)?;
            let naive = spectrum_for(config, ComputePath::Naive, dims, occ, kernel, &grid)?;
            let dev = fast
                .values
                .iter()
                .zip(&naive.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok((dims.clone(), dev))
        })
        .collect()
}
