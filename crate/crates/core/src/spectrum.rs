//! Sampled spectra and their on-disk form (CSV plus JSON sidecar).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::RegionSummary;

/// Provenance of a computed spectrum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub dims: Vec<usize>,
    pub region: Option<RegionSummary>,
    pub delta_omega: f64,
    pub temperature: f64,
    pub wall_time_s: f64,
    /// Exact sum of all transition weights entering the spectrum.
    pub transition_weight: Option<f64>,
    /// Smallest and largest transition energy with nonzero weight.
    pub transition_range: Option<(f64, f64)>,
}

/// Smoothed spectral weight `S̄(ω₀)` sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub omega0: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: SpectrumMetadata,
}

impl SpectrumSeries {
    pub fn new(omega0: Vec<f64>, values: Vec<f64>, metadata: SpectrumMetadata) -> Result<Self> {
        check_grid(&omega0)?;
        if values.len() != omega0.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                omega0.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!("spectral value {v} is not a finite nonnegative number")));
        }
        Ok(Self {
            omega0,
            values,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.omega0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega0.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Grid point of the maximum value (first one on ties).
    pub fn argmax(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (&w, &v) in self.omega0.iter().zip(&self.values) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((w, v));
            }
        }
        best.map(|(w, _)| w)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, omega: f64) -> f64 {
        interpolate(&self.omega0, &self.values, omega)
    }

    /// Value at the grid point nearest to `omega`.
    pub fn nearest(&self, omega: f64) -> (f64, f64) {
        let i = nearest_index(&self.omega0, omega);
        (self.omega0[i], self.values[i])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega0", "sbar"])?;
        for (x, y) in self.omega0.iter().zip(&self.values) {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the `omega0,sbar` CSV form. Metadata is left at its default.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "omega0" || &headers[1] != "sbar" {
            return Err(Error::Parse(format!(
                "expected header `omega0,sbar`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut omega0 = Vec::new();
        let mut values = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Parse(format!("row {}: expected 2 fields", line + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: `{s}`: {e}", line + 1)))
            };
            omega0.push(parse(&record[0])?);
            values.push(parse(&record[1])?);
        }
        Self::new(omega0, values, SpectrumMetadata::default())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }

    /// Writes `<stem>.csv` and the `<stem>.json` metadata sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        std::fs::write(&json_path, serde_json::to_string_pretty(&self.metadata)?)?;
        Ok((csv_path, json_path))
    }

    /// Loads a spectrum written by [`SpectrumSeries::save`].
    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let mut series = Self::read_csv(std::fs::File::open(dir.join(format!("{stem}.csv")))?)?;
        let sidecar = dir.join(format!("{stem}.json"));
        if sidecar.exists() {
            series.metadata = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
        }
        Ok(series)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid point".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn nearest_index(grid: &[f64], x: f64) -> usize {
    let i = grid.partition_point(|&g| g < x);
    if i == 0 {
        0
    } else if i == grid.len() {
        grid.len() - 1
    } else if (grid[i] - x).abs() < (x - grid[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}

pub(crate) fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if grid.is_empty() || x < grid[0] || x > grid[grid.len() - 1] {
        return 0.0;
    }
    let i = grid.partition_point(|&g| g <= x);
    if i == grid.len() {
        return values[grid.len() - 1];
    }
    let (x0, x1) = (grid[i - 1], grid[i]);
    let t = (x - x0) / (x1 - x0);
    values[i - 1] * (1.0 - t) + values[i] * t
}

/// `start, start + step, …` up to the first point `≥ stop`.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop <= start {
        return Err(Error::InvalidGrid(format!(
            "need start < stop and step > 0, got [{start}, {stop}] step {step}"
        )));
    }
    let n = ((stop - start) / step - 1e-9).ceil() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Default sampling: spacing `Δω/4` over `[-2Δω, max_transition + 2Δω]`.
pub fn auto_grid(delta_omega: f64, max_transition: f64) -> Result<Vec<f64>> {
    uniform_grid(
        -2.0 * delta_omega,
        max_transition + 2.0 * delta_omega,
        delta_omega / 4.0,
    )
}

/// Trapezoidal integral of sampled data.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_grid_covers_stop() {
        let g = uniform_grid(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let g = uniform_grid(0.0, 1.1, 0.5).unwrap();
        assert_eq!(g.len(), 4);
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
        assert!(uniform_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn auto_grid_resolution() {
        let g = auto_grid(0.4, 3.0).unwrap();
        assert!((g[0] + 0.8).abs() < 1e-15);
        assert!(*g.last().unwrap() >= 3.8 - 1e-12);
        assert!((g[1] - g[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_series() {
        let md = SpectrumMetadata::default();
        assert!(SpectrumSeries::new(vec![0.0, 0.0], vec![1.0, 1.0], md.clone()).is_err());
        assert!(SpectrumSeries::new(vec![0.0, 1.0], vec![1.0, -1.0], md.clone()).is_err());
        assert!(SpectrumSeries::new(vec![0.0, 1.0], vec![1.0], md).is_err());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(SpectrumSeries::parse_csv("omega0,sbar\n0,1\n1,nope\n").is_err());
        assert!(SpectrumSeries::parse_csv("w,s\n0,1\n").is_err());
        assert!(SpectrumSeries::parse_csv("").is_err());
        assert!(SpectrumSeries::parse_csv("omega0,sbar\n1,1\n0,1\n").is_err());
    }

    #[test]
    fn interpolation_and_nearest() {
        let s = SpectrumSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0], Default::default())
            .unwrap();
        assert_eq!(s.value_at(0.5), 1.0);
        assert_eq!(s.value_at(-0.1), 0.0);
        assert_eq!(s.value_at(2.0), 0.0);
        assert_eq!(s.nearest(1.2), (1.0, 2.0));
        assert_eq!(s.argmax(), Some(1.0));
        assert_eq!(trapezoid(&s.omega0, &s.values), 2.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip(values in proptest::collection::vec(0.0f64..1e3, 1..40), step in 1e-3f64..2.0) {
            let grid: Vec<f64> = (0..values.len()).map(|i| -1.0 + i as f64 * step).collect();
            let s = SpectrumSeries::new(grid, values, SpectrumMetadata::default()).unwrap();
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            let back = SpectrumSeries::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.omega0, s.omega0);
            prop_assert_eq!(back.values, s.values);
        }
    }
}
