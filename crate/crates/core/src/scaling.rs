//! Subsystem-size scaling of fluctuation and response data.
//!
//! Three candidate laws for a `D`-dimensional subsystem of linear size `L`:
//! area `L^{D-1}`, volume `L^D` and critical `L^{D-1} ln L`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumSeries;

/// Collapse residuals ignore frequency bins whose mean rescaled value is
/// below this fraction of the peak.
pub const COLLAPSE_MASK_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingLaw {
    Area,
    Volume,
    Critical,
}

impl ScalingLaw {
    pub const ALL: [ScalingLaw; 3] = [ScalingLaw::Area, ScalingLaw::Volume, ScalingLaw::Critical];

    /// `F(L)` in `dimension` spatial dimensions.
    pub fn eval(self, size: f64, dimension: usize) -> f64 {
        let d = dimension as i32;
        match self {
            Self::Area => size.powi(d - 1),
            Self::Volume => size.powi(d),
            Self::Critical => size.powi(d - 1) * size.ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Area => "area",
            Self::Volume => "volume",
            Self::Critical => "critical",
        }
    }
}

impl std::fmt::Display for ScalingLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScalingLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "area" => Ok(Self::Area),
            "volume" => Ok(Self::Volume),
            "critical" => Ok(Self::Critical),
            other => Err(Error::InvalidArgument(format!("unknown scaling law `{other}`"))),
        }
    }
}

/// A quantity measured at several subsystem sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSeries {
    pub label: String,
    pub dimension: usize,
    /// `(L, value)` with `L` strictly increasing.
    pub entries: Vec<(f64, f64)>,
}

impl SizeSeries {
    pub fn new(label: impl Into<String>, dimension: usize, entries: Vec<(f64, f64)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
        }
        Ok(Self {
            label: label.into(),
            dimension,
            entries,
        })
    }

    pub fn sizes(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub law: ScalingLaw,
    pub prefactor: f64,
    /// RMS of `value / (c F(L)) - 1` for the chosen law.
    pub residual: f64,
    pub per_law_residuals: BTreeMap<ScalingLaw, f64>,
}

/// Least-squares `value = c F(L)` for one law; returns `(c, residual)`.
pub fn fit_law(series: &SizeSeries, law: ScalingLaw) -> Result<(f64, f64)> {
    let f: Vec<f64> = series
        .entries
        .iter()
        .map(|&(l, _)| law.eval(l, series.dimension))
        .collect();
    if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Fit(format!(
            "{law} law is not positive at every size of `{}`",
            series.label
        )));
    }
    let num: f64 = f.iter().zip(&series.entries).map(|(fi, e)| fi * e.1).sum();
    let den: f64 = f.iter().map(|fi| fi * fi).sum();
    let c = num / den;
    let rms = (f
        .iter()
        .zip(&series.entries)
        .map(|(fi, e)| (e.1 / (c * fi) - 1.0).powi(2))
        .sum::<f64>()
        / f.len() as f64)
        .sqrt();
    Ok((c, rms))
}

/// Picks the candidate law with the smallest relative residual.
pub fn fit_scaling(series: &SizeSeries) -> Result<ScalingFit> {
    fit_scaling_among(series, &ScalingLaw::ALL)
}

/// [`fit_scaling`] restricted to a subset of laws.
pub fn fit_scaling_among(series: &SizeSeries, laws: &[ScalingLaw]) -> Result<ScalingFit> {
    if series.entries.len() < 3 {
        return Err(Error::Fit(format!(
            "`{}` has {} sizes, need at least 3",
            series.label,
            series.entries.len()
        )));
    }
    if let Some(&(l, v)) = series.entries.iter().find(|e| !(e.1 > 0.0 && e.1.is_finite())) {
        return Err(Error::Fit(format!(
            "`{}` has nonpositive value {v} at size {l}",
            series.label
        )));
    }
    if laws.is_empty() {
        return Err(Error::Fit("no candidate laws".into()));
    }
    let mut per_law = BTreeMap::new();
    let mut best: Option<(ScalingLaw, f64, f64)> = None;
    for &law in laws {
        let (c, r) = fit_law(series, law)?;
        per_law.insert(law, r);
        if best.is_none_or(|(_, _, br)| r < br) {
            best = Some((law, c, r));
        }
    }
    let (law, prefactor, residual) = best.expect("at least one law");
    Ok(ScalingFit {
        law,
        prefactor,
        residual,
        per_law_residuals: per_law,
    })
}

/// Largest relative spread across sizes of `S̄(ω₀) / F(L)`.
///
/// `curves` pairs each subsystem size `L` with its spectrum; all spectra must
/// share one grid. Bins whose mean rescaled value is below
/// [`COLLAPSE_MASK_FRACTION`] of the peak mean are ignored.
pub fn collapse_residual(
    curves: &[(f64, &SpectrumSeries)],
    law: ScalingLaw,
    dimension: usize,
) -> Result<f64> {
    let Some(&(_, first)) = curves.first() else {
        return Err(Error::InvalidArgument("no curves to collapse".into()));
    };
    for (l, c) in curves {
        if c.omega0.len() != first.omega0.len()
            || c.omega0.iter().zip(&first.omega0).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs()))
        {
            return Err(Error::InvalidGrid(format!("curve at size {l} is on a different grid")));
        }
    }
    let scaled: Vec<Vec<f64>> = curves
        .iter()
        .map(|&(l, c)| {
            let f = law.eval(l, dimension);
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Fit(format!("{law} law is not positive at size {l}")));
            }
            Ok(c.values.iter().map(|v| v / f).collect())
        })
        .collect::<Result<_>>()?;
    let bins = first.omega0.len();
    let mean: Vec<f64> = (0..bins)
        .map(|i| scaled.iter().map(|s| s[i]).sum::<f64>() / scaled.len() as f64)
        .collect();
    let peak = mean.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for i in 0..bins {
        if mean[i] <= COLLAPSE_MASK_FRACTION * peak {
            continue;
        }
        let hi = scaled.iter().map(|s| s[i]).fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
        worst = worst.max((hi - lo) / mean[i]);
    }
    Ok(worst)
}

/// Coefficients of `value = a L^{D-1} + b L^D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaVolumeFit {
    pub area: f64,
    pub volume: f64,
}

/// Two-parameter least squares for the finite-temperature crossover.
pub fn fit_area_volume(series: &SizeSeries) -> Result<AreaVolumeFit> {
    if series.entries.len() < 2 {
        return Err(Error::Fit("need at least 2 sizes".into()));
    }
    let d = series.dimension;
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(l, v) in &series.entries {
        let f1 = ScalingLaw::Area.eval(l, d);
        let f2 = ScalingLaw::Volume.eval(l, d);
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        y1 += f1 * v;
        y2 += f2 * v;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-14 * s11 * s22 {
        return Err(Error::Fit("sizes do not separate area and volume terms".into()));
    }
    Ok(AreaVolumeFit {
        area: (s22 * y1 - s12 * y2) / det,
        volume: (s11 * y2 - s12 * y1) / det,
    })
}

/// `L_c(T) = a(T) / b(T)`; infinite when the volume coefficient vanishes.
pub fn crossover_length(area: f64, volume: f64) -> Result<f64> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "area coefficient must be positive, got {area}"
        )));
    }
    if volume <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(area / volume)
}

/// Slope and intercept of `y` against `x` by ordinary least squares.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("regression needs at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("regressor is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
