//! Equal-time correlations of a Gaussian fermion state restricted to a region:
//! particle-number variance, entanglement entropy and density correlators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BandTable, BlochModel, MomentumMesh, Occupation};
use crate::region::Region;

/// Eigenvalues of `C` are clipped into `[ε, 1-ε]` before taking logarithms.
pub const ENTROPY_CLIP: f64 = 1e-12;

/// Correlator fits ignore separations below this many lattice spacings.
pub const MIN_FIT_DISTANCE: f64 = 3.0;

/// `C_{(i,σ),(j,σ')} = ⟨c†_{iσ} c_{jσ'}⟩` for sites `i, j` of a region.
///
/// Rows and columns are ordered site-major: index `s * orbitals + σ`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub region: Region,
    pub orbitals: usize,
    pub entries: DMatrix<Complex64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Expected particle number in the region.
    pub fn particle_number(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Momentum-space occupations folded into real-space hoppings `⟨c†_{r σ} c_{0 σ'}⟩`.
struct RealSpaceCorrelator {
    mesh: MomentumMesh,
    orbitals: usize,
    /// `Σ_m n_{k,m} [P_{k,m}]_{σ'σ}` at every momentum, flattened `σ * orbitals + σ'`.
    weighted: Vec<Complex64>,
}

impl RealSpaceCorrelator {
    fn new(model: &BlochModel, mesh: &MomentumMesh, occ: Occupation) -> Result<Self> {
        let table = BandTable::new(model, mesh)?;
        let no = table.orbitals;
        let mut weighted = vec![Complex64::new(0.0, 0.0); mesh.len() * no * no];
        for k in 0..mesh.len() {
            for m in 0..table.bands {
                let n = occ.fill(table.energy(k, m));
                if n == 0.0 {
                    continue;
                }
                let v = table.vector(k, m);
                for s in 0..no {
                    for sp in 0..no {
                        // [P]_{σ'σ} = ⟨σ'|ω⟩⟨ω|σ⟩
                        weighted[(k * no + s) * no + sp] += v[sp] * v[s].conj() * n;
                    }
                }
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            orbitals: no,
            weighted,
        })
    }

    /// Orbital block `⟨c†_{iσ} c_{jσ'}⟩` for the signed displacement `r_i - r_j`.
    fn block(&self, displacement: &[i64]) -> Vec<Complex64> {
        let no = self.orbitals;
        let mut out = vec![Complex64::new(0.0, 0.0); no * no];
        for (ki, k) in self.mesh.iter().enumerate() {
            let arg: f64 = k
                .iter()
                .zip(displacement)
                .map(|(&ka, &d)| ka * d as f64)
                .sum();
            let phase = Complex64::from_polar(1.0, arg);
            for (o, w) in out.iter_mut().zip(&self.weighted[ki * no * no..(ki + 1) * no * no]) {
                *o += phase * w;
            }
        }
        let inv = 1.0 / self.mesh.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        out
    }
}

fn displacement(a: &[usize], b: &[usize]) -> Vec<i64> {
    a.iter().zip(b).map(|(&x, &y)| x as i64 - y as i64).collect()
}

/// Builds the region's correlation matrix from the band occupations.
pub fn correlation_matrix(
    model: &BlochModel,
    mesh: &MomentumMesh,
    region: &Region,
    occ: Occupation,
) -> Result<CorrelationMatrix> {
    if region.lattice() != mesh.dims() {
        return Err(Error::RegionMismatch(format!(
            "region lives on a {:?} lattice, mesh is {:?}",
            region.lattice(),
            mesh.dims()
        )));
    }
    let corr = RealSpaceCorrelator::new(model, mesh, occ)?;
    let no = corr.orbitals;
    let sites = region.sites();

    let mut shifts: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for a in sites {
        for b in sites {
            let next = shifts.len();
            shifts.entry(displacement(a, b)).or_insert(next);
        }
    }
    let mut keyed: Vec<(&Vec<i64>, usize)> = shifts.iter().map(|(k, &v)| (k, v)).collect();
    keyed.sort_by_key(|&(_, slot)| slot);
    let blocks: Vec<Vec<Complex64>> = keyed.par_iter().map(|(d, _)| corr.block(d)).collect();

    let dim = sites.len() * no;
    let mut entries = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (i, a) in sites.iter().enumerate() {
        for (j, b) in sites.iter().enumerate() {
            let block = &blocks[shifts[&displacement(a, b)]];
            for s in 0..no {
                for sp in 0..no {
                    entries[(i * no + s, j * no + sp)] = block[s * no + sp];
                }
            }
        }
    }
    // Restore exact Hermiticity lost to roundoff.
    let entries = (&entries + entries.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(CorrelationMatrix {
        region: region.clone(),
        orbitals: no,
        entries,
    })
}

/// `δ²N_A = Tr[C(1 - C)]`.
pub fn particle_variance(c: &CorrelationMatrix) -> f64 {
    let trace = c.entries.trace().re;
    let sq: f64 = c.entries.iter().map(|z| z.norm_sqr()).sum();
    (trace - sq).max(0.0)
}

/// Von Neumann entropy (natural log) of the reduced state described by `C`.
pub fn vn_entropy(c: &CorrelationMatrix) -> f64 {
    c.eigenvalues()
        .into_iter()
        .map(|nu| {
            let nu = nu.clamp(ENTROPY_CLIP, 1.0 - ENTROPY_CLIP);
            -(nu * nu.ln() + (1.0 - nu) * (1.0 - nu).ln())
        })
        .sum::<f64>()
        .max(0.0)
}

/// Connected density correlator `⟨n_i n_j⟩_c = -Σ_{σσ'} |C_{(i,σ),(j,σ')}|²`.
pub fn connected_correlator(
    model: &BlochModel,
    mesh: &MomentumMesh,
    occ: Occupation,
    i: &[usize],
    j: &[usize],
) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidArgument(
            "connected correlator needs two distinct sites".into(),
        ));
    }
    // validates both sites against the lattice
    Region::from_sites(mesh.dims(), vec![i.to_vec(), j.to_vec()])?;
    let corr = RealSpaceCorrelator::new(model, mesh, occ)?;
    let block = corr.block(&displacement(i, j));
    Ok(-block.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Correlators between the origin and sites `d ê_0` for each `d` in `distances`.
pub fn correlator_profile(
    model: &BlochModel,
    mesh: &MomentumMesh,
    occ: Occupation,
    distances: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let origin = vec![0usize; mesh.dimension()];
    let corr = RealSpaceCorrelator::new(model, mesh, occ)?;
    distances
        .iter()
        .map(|&d| {
            let mut site = origin.clone();
            site[0] = d;
            if d == 0 {
                return Err(Error::InvalidArgument("distance 0 is not a pair of distinct sites".into()));
            }
            Region::from_sites(mesh.dims(), vec![origin.clone(), site.clone()])?;
            let block = corr.block(&displacement(&origin, &site));
            Ok((d as f64, -block.iter().map(|z| z.norm_sqr()).sum::<f64>()))
        })
        .collect()
}

/// Exponential fit `|⟨n n⟩_c| ∝ e^{-r/ξ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    pub xi: f64,
    pub slope: f64,
    /// RMS deviation of `ln|c|` from the fitted line.
    pub residual: f64,
    /// RMS deviation of `ln|c|` from the best power law in `r`, for comparison.
    pub power_law_residual: f64,
    pub samples: usize,
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Least-squares correlation length from `(distance, correlator)` samples.
///
/// Samples closer than [`MIN_FIT_DISTANCE`] are dropped. The fit is rejected
/// when the data do not decay, or when a power law in the distance describes
/// them better than an exponential.
pub fn fit_correlation_length(samples: &[(f64, f64)]) -> Result<CorrelationFit> {
    let used: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(r, _)| r >= MIN_FIT_DISTANCE)
        .collect();
    if used.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 samples at distance >= {MIN_FIT_DISTANCE}, got {}",
            used.len()
        )));
    }
    if let Some(&(r, c)) = used.iter().find(|(_, c)| !(c.abs() > 0.0) || !c.is_finite()) {
        return Err(Error::Fit(format!("correlator {c} at distance {r} is not strictly nonzero")));
    }
    let r: Vec<f64> = used.iter().map(|s| s.0).collect();
    let y: Vec<f64> = used.iter().map(|s| s.1.abs().ln()).collect();
    let (slope, _, residual) = line_fit(&r, &y);
    let log_r: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let (_, _, power_law_residual) = line_fit(&log_r, &y);
    if slope >= 0.0 {
        return Err(Error::NotGapped(format!("ln|c| grows with distance (slope {slope})")));
    }
    if power_law_residual < residual {
        return Err(Error::NotGapped(format!(
            "power-law residual {power_law_residual:.3e} beats exponential residual {residual:.3e}"
        )));
    }
    Ok(CorrelationFit {
        xi: -1.0 / slope,
        slope,
        residual,
        power_law_residual,
        samples: used.len(),
    })
}
