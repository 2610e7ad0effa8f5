//! Bloch Hamiltonians on periodic lattices.
//!
//! Units: energies in units of the hopping, lattice constant 1, ħ = k_B = 1.
//! The chemical potential is part of the dispersion, so occupations are
//! evaluated on raw band energies.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energies closer to zero than this count as sitting exactly on the Fermi level.
pub const FERMI_TIE_TOLERANCE: f64 = 1e-12;

/// Discrete crystal momenta of an `N_1 × … × N_D` periodic lattice.
///
/// Component `a` of point `(j_1, …, j_D)` is `-π + 2π j_a / N_a`, `j_a = 1..=N_a`.
/// Points are stored flat in row-major `(j_1, …, j_D)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumMesh {
    dims: Vec<usize>,
    points: Vec<f64>,
}

impl MomentumMesh {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidMesh("mesh needs at least one axis".into()));
        }
        if let Some((axis, &n)) = dims.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(Error::InvalidMesh(format!(
                "axis {axis} has {n} sites, need at least 2"
            )));
        }
        let dim = dims.len();
        let len: usize = dims.iter().product();
        let mut points = Vec::with_capacity(len * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..len {
            for (a, &i) in idx.iter().enumerate() {
                points.push(-PI + 2.0 * PI * (i + 1) as f64 / dims[a] as f64);
            }
            increment(&mut idx, dims);
        }
        Ok(Self {
            dims: dims.to_vec(),
            points,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    /// Number of momenta, equal to the number of lattice sites.
    pub fn len(&self) -> usize {
        self.points.len() / self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dims.len();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dims.len())
    }

    /// Zero-based per-axis indices of point `i`.
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            out[a] = i % self.dims[a];
            i /= self.dims[a];
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + (i % n))
    }

    /// Index of `k_i + steps · (2π/N_axis) ê_axis`, wrapped periodically.
    pub fn shifted(&self, i: usize, axis: usize, steps: usize) -> usize {
        let mut idx = self.multi_index(i);
        idx[axis] = (idx[axis] + steps) % self.dims[axis];
        self.flat_index(&idx)
    }

    /// Index of the momentum transfer `k_i - k_j` reduced into `[0, 2π)` per axis,
    /// i.e. the point `2π m_a / N_a` with `m_a = (i_a - j_a) mod N_a`.
    pub fn difference_index(&self, i: usize, j: usize) -> usize {
        let a = self.multi_index(i);
        let b = self.multi_index(j);
        let diff: Vec<usize> = a
            .iter()
            .zip(&b)
            .zip(&self.dims)
            .map(|((&x, &y), &n)| (x + n - y) % n)
            .collect();
        self.flat_index(&diff)
    }

    /// Index of `-k_i` modulo 2π.
    pub fn negated(&self, i: usize) -> usize {
        // -k_j = -π + 2π (N - j)/N, and j = N maps onto j = N itself.
        let idx: Vec<usize> = self
            .multi_index(i)
            .iter()
            .zip(&self.dims)
            .map(|(&x, &n)| (2 * n - 2 - x) % n)
            .collect();
        self.flat_index(&idx)
    }
}

pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for a in (0..dims.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return;
        }
        idx[a] = 0;
    }
}

/// Builds the momentum mesh for a periodic lattice with `dims` sites per axis.
pub fn build_mesh(dims: &[usize]) -> Result<MomentumMesh> {
    MomentumMesh::new(dims)
}

/// The lattice models supported by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "lowercase")]
pub enum ModelKind {
    /// Two-band Chern insulator, `d(k) = (sin kx, sin ky, m - cos kx - cos ky)`.
    Qwz { m: f64 },
    /// `ω_k = -t1 cos kx - t2 cos ky + μ`.
    Metal2d { t1: f64, t2: f64, mu: f64 },
    /// `ω_k = -t cos k + μ`.
    Metal1d { t: f64, mu: f64 },
}

/// A translation-invariant Bloch Hamiltonian with analytic bands and eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochModel {
    kind: ModelKind,
}

impl BlochModel {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Qwz { .. } => "qwz",
            ModelKind::Metal2d { .. } => "metal2d",
            ModelKind::Metal1d { .. } => "metal1d",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match self.kind {
            ModelKind::Qwz { m } => vec![("m", m)],
            ModelKind::Metal2d { t1, t2, mu } => vec![("t1", t1), ("t2", t2), ("mu", mu)],
            ModelKind::Metal1d { t, mu } => vec![("t", t), ("mu", mu)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ModelKind::Qwz { .. } | ModelKind::Metal2d { .. } => 2,
            ModelKind::Metal1d { .. } => 1,
        }
    }

    pub fn orbitals(&self) -> usize {
        match self.kind {
            ModelKind::Qwz { .. } => 2,
            _ => 1,
        }
    }

    /// The `d`-vector of a two-band model `H_k = d(k)·σ`; `None` for one-band models.
    pub fn d_vector(&self, k: &[f64]) -> Option<[f64; 3]> {
        match self.kind {
            ModelKind::Qwz { m } => Some([
                k[0].sin(),
                k[1].sin(),
                m - k[0].cos() - k[1].cos(),
            ]),
            _ => None,
        }
    }

    /// Band energy `ω_{k,band}`; bands are sorted ascending.
    pub fn energy(&self, k: &[f64], band: usize) -> Result<f64> {
        self.check_band(band)?;
        Ok(match self.kind {
            ModelKind::Qwz { .. } => {
                let d = self.d_vector(k).expect("two-band model");
                let norm = norm3(&d);
                if band == 0 {
                    -norm
                } else {
                    norm
                }
            }
            ModelKind::Metal2d { t1, t2, mu } => -t1 * k[0].cos() - t2 * k[1].cos() + mu,
            ModelKind::Metal1d { t, mu } => -t * k[0].cos() + mu,
        })
    }

    /// The Bloch matrix `H_k` in the orbital basis.
    pub fn bloch_matrix(&self, k: &[f64]) -> DMatrix<Complex64> {
        match self.d_vector(k) {
            Some(d) => pauli_combination(0.0, &d),
            None => DMatrix::from_element(
                1,
                1,
                Complex64::new(self.energy(k, 0).expect("band 0 exists"), 0.0),
            ),
        }
    }

    /// Normalized eigenvector `|ω_{k,band}⟩`. The phase is an arbitrary gauge choice.
    pub fn eigenvector(&self, k: &[f64], band: usize) -> Result<DVector<Complex64>> {
        self.check_band(band)?;
        let Some(d) = self.d_vector(k) else {
            return Ok(DVector::from_element(1, Complex64::new(1.0, 0.0)));
        };
        let [x, y, z] = unit_d(&d);
        // Spherical angles of d̂: the upper band points along d̂, the lower against it.
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let phase = Complex64::from_polar(1.0, phi);
        let v = if band == 1 {
            [Complex64::new(c, 0.0), phase * s]
        } else {
            [-phase.conj() * s, Complex64::new(c, 0.0)]
        };
        Ok(DVector::from_column_slice(&v))
    }

    /// Band projector `P_{k,band} = |ω⟩⟨ω|`.
    pub fn projector(&self, k: &[f64], band: usize) -> Result<DMatrix<Complex64>> {
        self.check_band(band)?;
        match self.d_vector(k) {
            Some(d) => {
                let sign = if band == 1 { 1.0 } else { -1.0 };
                let u = unit_d(&d);
                let scaled = [sign * u[0], sign * u[1], sign * u[2]];
                Ok(pauli_combination(1.0, &scaled) * Complex64::new(0.5, 0.0))
            }
            None => Ok(DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))),
        }
    }

    fn check_band(&self, band: usize) -> Result<()> {
        if band >= self.orbitals() {
            return Err(Error::InvalidBand {
                band,
                orbitals: self.orbitals(),
            });
        }
        Ok(())
    }
}

/// Qi-Wu-Zhang two-band model.
pub fn qwz_model(m: f64) -> BlochModel {
    BlochModel::new(ModelKind::Qwz { m })
}

/// Square-lattice single-band metal.
pub fn metal_model_2d(t1: f64, t2: f64, mu: f64) -> BlochModel {
    BlochModel::new(ModelKind::Metal2d { t1, t2, mu })
}

/// Nearest-neighbour chain.
pub fn metal_model_1d(t: f64, mu: f64) -> BlochModel {
    BlochModel::new(ModelKind::Metal1d { t, mu })
}

/// `Tr[P_{k,m} P_{k',m'}] = |⟨ω_{k,m}|ω_{k',m'}⟩|²`.
pub fn projector_overlap(
    model: &BlochModel,
    k: &[f64],
    band: usize,
    k_other: &[f64],
    band_other: usize,
) -> Result<f64> {
    let a = model.eigenvector(k, band)?;
    let b = model.eigenvector(k_other, band_other)?;
    Ok(a.dotc(&b).norm_sqr().clamp(0.0, 1.0))
}

fn norm3(d: &[f64; 3]) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// `d̂`, with `ẑ` substituted where `d` vanishes (gap closing points).
fn unit_d(d: &[f64; 3]) -> [f64; 3] {
    let n = norm3(d);
    if n < f64::EPSILON {
        [0.0, 0.0, 1.0]
    } else {
        [d[0] / n, d[1] / n, d[2] / n]
    }
}

/// `a·𝟙 + d·σ` as a 2×2 matrix.
fn pauli_combination(a: f64, d: &[f64; 3]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(a + d[2], 0.0),
            Complex64::new(d[0], -d[1]),
            Complex64::new(d[0], d[1]),
            Complex64::new(a - d[2], 0.0),
        ],
    )
}

/// Fermi-Dirac occupation of a band energy measured from the Fermi level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Occupation {
    ZeroTemperature,
    Thermal { beta: f64 },
}

impl Occupation {
    pub fn from_temperature(t: f64) -> Self {
        if t <= 0.0 {
            Self::ZeroTemperature
        } else {
            Self::Thermal { beta: 1.0 / t }
        }
    }

    pub fn temperature(&self) -> f64 {
        match *self {
            Self::ZeroTemperature => 0.0,
            Self::Thermal { beta } => 1.0 / beta,
        }
    }

    pub fn fill(&self, omega: f64) -> f64 {
        match *self {
            Self::ZeroTemperature => {
                if omega.abs() < FERMI_TIE_TOLERANCE {
                    0.5
                } else if omega < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Thermal { beta } => {
                let x = beta * omega;
                if x > 0.0 {
                    let e = (-x).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
        }
    }

    pub fn is_zero_temperature(&self) -> bool {
        matches!(self, Self::ZeroTemperature)
    }
}

/// Band energies and eigenvectors tabulated on a mesh.
#[derive(Debug, Clone)]
pub struct BandTable {
    pub bands: usize,
    pub orbitals: usize,
    /// `energies[k * bands + m]`.
    pub energies: Vec<f64>,
    /// `vectors[(k * bands + m) * orbitals + σ]`.
    pub vectors: Vec<Complex64>,
}

impl BandTable {
    pub fn new(model: &BlochModel, mesh: &MomentumMesh) -> Result<Self> {
        if model.dimension() != mesh.dimension() {
            return Err(Error::InvalidMesh(format!(
                "{}-dimensional mesh for a {}-dimensional model",
                mesh.dimension(),
                model.dimension()
            )));
        }
        let bands = model.orbitals();
        let mut energies = Vec::with_capacity(mesh.len() * bands);
        let mut vectors = Vec::with_capacity(mesh.len() * bands * bands);
        for k in mesh.iter() {
            for m in 0..bands {
                energies.push(model.energy(k, m)?);
                vectors.extend(model.eigenvector(k, m)?.iter().copied());
            }
        }
        Ok(Self {
            bands,
            orbitals: bands,
            energies,
            vectors,
        })
    }

    pub fn energy(&self, k: usize, m: usize) -> f64 {
        self.energies[k * self.bands + m]
    }

    pub fn vector(&self, k: usize, m: usize) -> &[Complex64] {
        let start = (k * self.bands + m) * self.orbitals;
        &self.vectors[start..start + self.orbitals]
    }

    /// `|⟨ω_{k,m}|ω_{k',m'}⟩|²`.
    pub fn overlap(&self, k: usize, m: usize, kp: usize, mp: usize) -> f64 {
        let s: Complex64 = self
            .vector(k, m)
            .iter()
            .zip(self.vector(kp, mp))
            .map(|(a, b)| a.conj() * b)
            .sum();
        s.norm_sqr()
    }

    pub fn min_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
