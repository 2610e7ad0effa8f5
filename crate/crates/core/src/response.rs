//! Linear response of the subsystem particle number derived from its noise.
//!
//! Spectra are used in the units they are computed in: the sampled smoothed
//! weight plays the role of `S(ω)` throughout, so `Im χ = S/2` at zero
//! temperature and the absorption rate is `∫ dω/(4π) ω |f(ω)|² S(ω)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Occupation;
use crate::spectrum::{check_grid, interpolate, trapezoid, SpectrumMetadata, SpectrumSeries};

/// Gaussian pulses are truncated this many widths away from their centre.
pub const PULSE_CUTOFF_WIDTHS: f64 = 8.0;

/// Spectral content of a real drive `f(t)` coupling as `-f(t) N_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveSpectrum {
    /// `|f(ω)|²` on a grid; carries no phase.
    Sampled { grid: Vec<f64>, power: Vec<f64> },
    /// Cosine carrier under a Gaussian envelope. Real and even in `ω`,
    /// normalised so that `|f(ω)|² → π f₀² [δ(ω-Ω) + δ(ω+Ω)]` as the width shrinks.
    GaussianPulse {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `f(t) = f₀ cos(Ω t)`.
    Monochromatic { amplitude: f64, frequency: f64 },
}

impl DriveSpectrum {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Sampled { grid, power } => {
                check_grid(grid)?;
                if grid.len() != power.len() {
                    return Err(Error::Drive("power and grid lengths differ".into()));
                }
                if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::Drive("|f(ω)|² must be nonnegative".into()));
                }
                Ok(())
            }
            Self::GaussianPulse { amplitude, center, width } => {
                if !(amplitude.is_finite() && center.is_finite() && *width > 0.0 && width.is_finite()) {
                    return Err(Error::Drive(format!(
                        "gaussian pulse needs finite amplitude/center and positive width, got {amplitude}/{center}/{width}"
                    )));
                }
                Ok(())
            }
            Self::Monochromatic { amplitude, frequency } => {
                if !(amplitude.is_finite() && frequency.is_finite()) {
                    return Err(Error::Drive("monochromatic drive needs finite parameters".into()));
                }
                Ok(())
            }
        }
    }

    /// Complex amplitude `f(ω)`; `None` for phaseless or line spectra.
    pub fn amplitude_at(&self, omega: f64) -> Option<Complex64> {
        match *self {
            Self::GaussianPulse { amplitude, center, width } => {
                let lobe = |x: f64| {
                    if (x / width).abs() > PULSE_CUTOFF_WIDTHS {
                        0.0
                    } else {
                        (-(x * x) / (4.0 * width * width)).exp()
                    }
                };
                let scale = amplitude * ((PI / 2.0).sqrt() / width).sqrt();
                Some(Complex64::new(scale * (lobe(omega - center) + lobe(omega + center)), 0.0))
            }
            _ => None,
        }
    }

    /// `|f(ω)|²` for continuous spectra.
    pub fn power_at(&self, omega: f64) -> Option<f64> {
        match self {
            Self::Sampled { grid, power } => {
                // |f(-ω)|² = |f(ω)|² for a real drive
                Some(interpolate(grid, power, omega.abs()).max(interpolate(grid, power, omega)))
            }
            Self::GaussianPulse { .. } => self.amplitude_at(omega).map(|f| f.norm_sqr()),
            Self::Monochromatic { .. } => None,
        }
    }

    /// Positive-frequency interval outside which the drive vanishes.
    fn positive_support(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Sampled { ref grid, ref power } => {
                let nz: Vec<f64> = grid
                    .iter()
                    .zip(power)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(g, _)| g.abs())
                    .collect();
                if nz.is_empty() {
                    None
                } else {
                    Some((
                        nz.iter().copied().fold(f64::INFINITY, f64::min),
                        nz.iter().copied().fold(0.0, f64::max),
                    ))
                }
            }
            Self::GaussianPulse { center, width, .. } => {
                let c = center.abs();
                Some(((c - PULSE_CUTOFF_WIDTHS * width).max(0.0), c + PULSE_CUTOFF_WIDTHS * width))
            }
            Self::Monochromatic { frequency, .. } => Some((frequency.abs(), frequency.abs())),
        }
    }
}

/// Dissipative and reactive parts of `χ_{N_A}(ω)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSeries {
    pub grid: Vec<f64>,
    pub im_chi: Vec<f64>,
    /// Filled by [`ResponseSeries::with_kramers_kronig`]; zero until then.
    pub re_chi: Vec<f64>,
    pub metadata: SpectrumMetadata,
}

impl ResponseSeries {
    pub fn with_kramers_kronig(mut self) -> Result<Self> {
        self.re_chi = re_chi_kk(&self.grid, &self.im_chi)?;
        Ok(self)
    }

    pub fn chi_at(&self, omega: f64) -> Complex64 {
        Complex64::new(
            interpolate(&self.grid, &self.re_chi, omega),
            interpolate(&self.grid, &self.im_chi, omega),
        )
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "im_chi", "re_chi"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                self.grid[i].to_string(),
                self.im_chi[i].to_string(),
                self.re_chi[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform spacing of `grid`, or an error when it is not uniform to `1e-9` relative.
fn uniform_step(grid: &[f64]) -> Result<f64> {
    check_grid(grid)?;
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("need at least 3 points".into()));
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::InvalidGrid("grid is not uniform".into()));
    }
    Ok(h)
}

/// `Im χ` from the noise via the fluctuation-dissipation relation.
///
/// The result lives on the grid `{-W, …, 0, …, W}` with the spacing of the
/// input, `W` the largest `|ω₀|` sampled. Values of `S` off the input grid
/// are zero. At finite temperature `ω = 0` takes its odd-symmetric limit `0`.
pub fn im_chi_from_noise(series: &SpectrumSeries, occ: Occupation) -> Result<ResponseSeries> {
    let h = uniform_step(&series.omega0)?;
    let reach = series.omega0[0].abs().max(series.omega0[series.len() - 1].abs());
    let half = (reach / h - 1e-9).ceil() as i64;
    let grid: Vec<f64> = (-half..=half).map(|i| i as f64 * h).collect();
    let sample = |w: f64| {
        // exact node values where the symmetric grid meets the input grid
        let (g, v) = series.nearest(w);
        if (g - w).abs() <= 1e-9 * h {
            v
        } else {
            series.value_at(w)
        }
    };
    let im_chi = grid
        .iter()
        .map(|&w| match occ {
            Occupation::ZeroTemperature => 0.5 * (sample(w) - sample(-w)),
            Occupation::Thermal { beta } => {
                if w.abs() < 1e-12 {
                    0.0
                } else {
                    // 1 + n_B(ω) = 1 / (1 - e^{-βω}), negative for ω < 0
                    let one_plus_nb = -1.0 / (-(beta * w)).exp_m1();
                    sample(w) / (2.0 * one_plus_nb)
                }
            }
        })
        .collect::<Vec<f64>>();
    let re_chi = vec![0.0; grid.len()];
    Ok(ResponseSeries {
        grid,
        im_chi,
        re_chi,
        metadata: series.metadata.clone(),
    })
}

/// Principal-value Kramers-Kronig transform
/// `Re χ(ω) = P∫ dω'/π Im χ(ω') / (ω' - ω)` on a uniform grid symmetric about 0.
///
/// Away from the pole the integrand is integrated with the trapezoidal rule;
/// the two cells adjacent to the pole are replaced by the symmetric
/// three-point value `Im χ(ω+h) - Im χ(ω-h)`, which is exact when `Im χ` is
/// linear across them.
pub fn re_chi_kk(grid: &[f64], im: &[f64]) -> Result<Vec<f64>> {
    if grid.len() != im.len() {
        return Err(Error::InvalidGrid("Im χ and grid lengths differ".into()));
    }
    let h = uniform_step(grid)?;
    let n = grid.len();
    if (grid[0] + grid[n - 1]).abs() > 1e-9 * h {
        return Err(Error::InvalidGrid("grid must be symmetric about zero".into()));
    }
    Ok(kk_sum(im, 1.0))
}

/// The inverse relation `Im χ(ω) = -P∫ dω'/π Re χ(ω') / (ω' - ω)`.
pub fn im_chi_kk(grid: &[f64], re: &[f64]) -> Result<Vec<f64>> {
    let out = re_chi_kk(grid, re)?;
    Ok(out.into_iter().map(|v| -v).collect())
}

fn kk_sum(f: &[f64], sign: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, &fj) in f.iter().enumerate() {
                if j == i || fj == 0.0 {
                    continue;
                }
                let d = j as i64 - i as i64;
                // trapezoid: half weight at the domain ends and next to the pole
                let edge = j == 0 || j == n - 1 || d.abs() == 1;
                let wgt = if edge { 0.5 } else { 1.0 };
                acc += wgt * fj / d as f64;
            }
            // singular cell [ω-h, ω+h]
            let up = if i + 1 < n { f[i + 1] } else { 0.0 };
            let down = if i > 0 { f[i - 1] } else { 0.0 };
            let local = up - down;
            // ∫ h·f/(h d) = Σ f/d; the 1/π of the transform
            sign * (acc + local) / PI
        })
        .collect()
}

/// Time-averaged absorption rate under `drive`, zero-temperature form.
pub fn absorption_rate(series: &SpectrumSeries, drive: &DriveSpectrum) -> Result<f64> {
    drive.validate()?;
    let first = series.omega0[0];
    let last = series.omega0[series.len() - 1];
    if let Some((lo, hi)) = drive.positive_support() {
        if lo < first || hi > last {
            return Err(Error::Drive(format!(
                "drive support [{lo}, {hi}] exceeds the spectrum grid [{first}, {last}]"
            )));
        }
    }
    match *drive {
        DriveSpectrum::Monochromatic { amplitude, frequency } => {
            let w = frequency.abs();
            Ok(0.25 * amplitude * amplitude * w * series.value_at(w))
        }
        _ => {
            let integrand: Vec<f64> = series
                .omega0
                .iter()
                .zip(&series.values)
                .map(|(&w, &s)| w * drive.power_at(w).unwrap_or(0.0) * s / (4.0 * PI))
                .collect();
            Ok(trapezoid(&series.omega0, &integrand))
        }
    }
}

/// `⟨δN_A(ω)⟩ = χ(ω) f(ω)`.
///
/// Pulses give the response on the grid of `chi`. A monochromatic drive
/// gives a single line at `Ω` with complex amplitude `χ(Ω) f₀`.
pub fn particle_response(chi: &ResponseSeries, drive: &DriveSpectrum) -> Result<Vec<(f64, Complex64)>> {
    drive.validate()?;
    match *drive {
        DriveSpectrum::Sampled { .. } => Err(Error::Drive(
            "sampled |f(ω)|² carries no phase; use an analytic drive".into(),
        )),
        DriveSpectrum::Monochromatic { amplitude, frequency } => {
            Ok(vec![(frequency, chi.chi_at(frequency) * amplitude)])
        }
        DriveSpectrum::GaussianPulse { .. } => Ok(chi
            .grid
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let c = Complex64::new(chi.re_chi[i], chi.im_chi[i]);
                (w, c * drive.amplitude_at(w).expect("pulse has a phase"))
            })
            .collect()),
    }
}
