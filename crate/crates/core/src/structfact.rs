//! Coarse-grained dynamical structure factor of a subsystem.
//!
//! For a free-fermion state with band occupations `n_{k,m}` the smoothed
//! particle-number noise of a region `A` is
//!
//! ```text
//! S̄(ω₀) = 1/V² Σ_{k,m} Σ_{k',m'} G_A(k-k') Tr[P_{k,m} P_{k',m'}]
//!                 n_{k,m} (1 - n_{k',m'}) K(ω₀ + ω_{k,m} - ω_{k',m'})
//! ```
//!
//! with `G_A(q) = |Σ_{j∈A} e^{iq·j}|²`, `V` the number of lattice sites and
//! `K` a unit box of half-width `Δω`. [`sbar`] evaluates this with the site
//! sums factored into `G_A`; [`sbar_naive`] keeps the literal quadruple sum and
//! exists as a cross-check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BandTable, BlochModel, MomentumMesh, Occupation};
use crate::region::Region;
use crate::spectrum::{check_grid, trapezoid, SpectrumMetadata, SpectrumSeries};

/// Unit-area box `K(ω) = Θ(Δω - |ω|) / (2Δω)`.
///
/// The step takes its half-maximum value exactly on the edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxKernel {
    half_width: f64,
}

impl BoxKernel {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { half_width })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let a = omega.abs();
        if a < self.half_width {
            0.5 / self.half_width
        } else if a == self.half_width {
            0.25 / self.half_width
        } else {
            0.0
        }
    }

    /// `K(ω₀ + ω_from - ω_to)`, evaluated in one fixed operation order so that
    /// every code path agrees bit for bit on the box edges.
    #[inline]
    pub fn at_transition(&self, omega0: f64, from: f64, to: f64) -> f64 {
        self.eval(omega0 + from - to)
    }
}

/// `G_A(q)` on the momentum-transfer mesh, indexed like the mesh itself with
/// point `m` standing for `q_a = 2π m_a / N_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomFactor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl GeomFactor {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `G_A` at transfer index `m` (per-axis, reduced mod `N_a`).
    pub fn at(&self, m: &[usize]) -> f64 {
        let i = m
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&x, &n)| acc * n + x % n);
        self.values[i]
    }
}

/// Computes `G_A(q)` for every momentum transfer of `mesh`.
///
/// Boxes use the product of Dirichlet kernels; other regions use the direct
/// Fourier sum of the indicator.
pub fn geometric_factor(region: &Region, mesh: &MomentumMesh) -> Result<GeomFactor> {
    check_region(region, mesh)?;
    let dims = mesh.dims().to_vec();
    let values = match region.rect_hint() {
        Some(lengths) => (0..mesh.len())
            .map(|i| {
                mesh.multi_index(i)
                    .iter()
                    .zip(lengths)
                    .zip(&dims)
                    .map(|((&m, &l), &n)| dirichlet_sq(m, l, n))
                    .product()
            })
            .collect(),
        None => indicator_power(region, &dims),
    };
    Ok(GeomFactor { dims, values })
}

/// `sin²(q l/2) / sin²(q/2)` at `q = 2π m/N`, with the `q = 0` limit `l²`.
fn dirichlet_sq(m: usize, l: usize, n: usize) -> f64 {
    if m % n == 0 {
        return (l * l) as f64;
    }
    // Reduce m·l mod n before converting so the numerator's zeros are exact.
    let num = (PI * ((m * l) % n) as f64 / n as f64).sin();
    let den = (PI * m as f64 / n as f64).sin();
    (num * num) / (den * den)
}

fn indicator_power(region: &Region, dims: &[usize]) -> Vec<f64> {
    let volume: usize = dims.iter().product();
    let mut idx = vec![0usize; dims.len()];
    let mut out = Vec::with_capacity(volume);
    for _ in 0..volume {
        let mut sum = Complex64::new(0.0, 0.0);
        for site in region.sites() {
            let turns: f64 = idx
                .iter()
                .zip(site)
                .zip(dims)
                .map(|((&m, &x), &n)| ((m * x) % n) as f64 / n as f64)
                .sum();
            sum += Complex64::from_polar(1.0, 2.0 * PI * turns);
        }
        out.push(sum.norm_sqr());
        crate::models::increment(&mut idx, dims);
    }
    out
}

fn check_region(region: &Region, mesh: &MomentumMesh) -> Result<()> {
    if region.lattice() != mesh.dims() {
        return Err(Error::RegionMismatch(format!(
            "region lives on a {:?} lattice, mesh is {:?}",
            region.lattice(),
            mesh.dims()
        )));
    }
    Ok(())
}

/// Window half-width `Δω = 2 δω`, with `δω` the largest change of any band
/// energy under a single mesh step along `step_axis`.
pub fn select_window(model: &BlochModel, mesh_ref: &MomentumMesh, step_axis: usize) -> Result<f64> {
    if step_axis >= mesh_ref.dimension() {
        return Err(Error::InvalidArgument(format!(
            "step axis {step_axis} out of range for a {}-dimensional mesh",
            mesh_ref.dimension()
        )));
    }
    let table = BandTable::new(model, mesh_ref)?;
    let mut delta: f64 = 0.0;
    for k in 0..mesh_ref.len() {
        let next = mesh_ref.shifted(k, step_axis, 1);
        for m in 0..table.bands {
            delta = delta.max((table.energy(next, m) - table.energy(k, m)).abs());
        }
    }
    if delta <= 0.0 {
        return Err(Error::FlatBand);
    }
    Ok(2.0 * delta)
}

/// Lowest and highest band energy on a mesh.
pub fn band_span(model: &BlochModel, mesh: &MomentumMesh) -> Result<(f64, f64)> {
    let table = BandTable::new(model, mesh)?;
    Ok((table.min_energy(), table.max_energy()))
}

/// Per-axis transfer index lookup without allocation in the pair loop.
struct TransferIndex {
    dims: Vec<usize>,
    coords: Vec<usize>,
}

impl TransferIndex {
    fn new(mesh: &MomentumMesh) -> Self {
        let coords = (0..mesh.len()).flat_map(|i| mesh.multi_index(i)).collect();
        Self {
            dims: mesh.dims().to_vec(),
            coords,
        }
    }

    #[inline]
    fn between(&self, k: usize, kp: usize) -> usize {
        let d = self.dims.len();
        let (a, b) = (&self.coords[k * d..(k + 1) * d], &self.coords[kp * d..(kp + 1) * d]);
        let mut flat = 0;
        for axis in 0..d {
            let n = self.dims[axis];
            flat = flat * n + (a[axis] + n - b[axis]) % n;
        }
        flat
    }
}

#[derive(Default)]
struct RowSums {
    values: Vec<f64>,
    weight: f64,
    range: Option<(f64, f64)>,
}

fn merge_range(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> Option<(f64, f64)> {
    match (a, b) {
        (Some((l0, h0)), Some((l1, h1))) => Some((l0.min(l1), h0.max(h1))),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Coarse-grained structure factor of `region` on the grid `omega0_grid`.
///
/// The pair sum runs in parallel over the initial momentum; partial sums are
/// reduced in momentum order, so the result does not depend on thread count.
pub fn sbar(
    model: &BlochModel,
    mesh: &MomentumMesh,
    region: &Region,
    occ: Occupation,
    kernel: BoxKernel,
    omega0_grid: &[f64],
) -> Result<SpectrumSeries> {
    let start = std::time::Instant::now();
    check_grid(omega0_grid)?;
    let table = BandTable::new(model, mesh)?;
    let geom = geometric_factor(region, mesh)?;
    let transfer = TransferIndex::new(mesh);
    let nk = mesh.len();
    let nb = table.bands;
    let volume_sq = (nk as f64) * (nk as f64);
    let fill: Vec<f64> = table.energies.iter().map(|&e| occ.fill(e)).collect();
    let hw = kernel.half_width();
    let slack = 1e-9 * (1.0 + hw);

    let rows: Vec<RowSums> = (0..nk)
        .into_par_iter()
        .map(|k| {
            let mut row = RowSums {
                values: vec![0.0; omega0_grid.len()],
                ..Default::default()
            };
            for m in 0..nb {
                let n = fill[k * nb + m];
                if n == 0.0 {
                    continue;
                }
                let from = table.energy(k, m);
                for kp in 0..nk {
                    let g = geom.values[transfer.between(k, kp)];
                    if g == 0.0 {
                        continue;
                    }
                    for mp in 0..nb {
                        let hole = 1.0 - fill[kp * nb + mp];
                        if hole == 0.0 {
                            continue;
                        }
                        let w = g * table.overlap(k, m, kp, mp) * n * hole / volume_sq;
                        if w == 0.0 {
                            continue;
                        }
                        let to = table.energy(kp, mp);
                        row.weight += w;
                        row.range = merge_range(row.range, Some((to - from, to - from)));
                        // Grid points with |ω₀ + from - to| ≤ Δω, widened by a hair and
                        // then decided by the kernel itself.
                        let centre = to - from;
                        let lo = omega0_grid.partition_point(|&x| x < centre - hw - slack);
                        let hi = omega0_grid.partition_point(|&x| x <= centre + hw + slack);
                        for i in lo..hi {
                            row.values[i] += w * kernel.at_transition(omega0_grid[i], from, to);
                        }
                    }
                }
            }
            row
        })
        .collect();

    let mut values = vec![0.0; omega0_grid.len()];
    let mut weight = 0.0;
    let mut range = None;
    for row in rows {
        for (v, r) in values.iter_mut().zip(&row.values) {
            *v += r;
        }
        weight += row.weight;
        range = merge_range(range, row.range);
    }
    let metadata = metadata(model, mesh, region, occ, kernel, weight, range, start);
    SpectrumSeries::new(omega0_grid.to_vec(), values, metadata)
}

/// Literal quadruple sum over sites `j, j' ∈ A` and band states `(k,m), (k',m')`,
/// using full projector matrices. Intended for small lattices only.
pub fn sbar_naive(
    model: &BlochModel,
    mesh: &MomentumMesh,
    region: &Region,
    occ: Occupation,
    kernel: BoxKernel,
    omega0_grid: &[f64],
) -> Result<SpectrumSeries> {
    let start = std::time::Instant::now();
    check_grid(omega0_grid)?;
    check_region(region, mesh)?;
    let nb = model.orbitals();
    let nk = mesh.len();
    let volume_sq = (nk as f64) * (nk as f64);
    let sites: Vec<Vec<f64>> = region
        .sites()
        .iter()
        .map(|s| s.iter().map(|&x| x as f64).collect())
        .collect();

    let mut states = Vec::with_capacity(nk * nb);
    for k in mesh.iter() {
        for m in 0..nb {
            let e = model.energy(k, m)?;
            states.push((k.to_vec(), e, occ.fill(e), model.projector(k, m)?));
        }
    }

    let mut values = vec![0.0; omega0_grid.len()];
    let mut weight = 0.0;
    let mut range = None;
    for (k, e, n, p) in &states {
        for (kp, ep, np, pp) in &states {
            let mut phase = Complex64::new(0.0, 0.0);
            for j in &sites {
                for jp in &sites {
                    let arg: f64 = (0..k.len()).map(|a| (k[a] - kp[a]) * (j[a] - jp[a])).sum();
                    phase += Complex64::from_polar(1.0, arg);
                }
            }
            let trace = (p * pp).trace().re;
            let w = phase.re * trace * n * (1.0 - np) / volume_sq;
            if w != 0.0 {
                weight += w;
                range = merge_range(range, Some((ep - e, ep - e)));
            }
            for (v, &w0) in values.iter_mut().zip(omega0_grid) {
                *v += w * kernel.at_transition(w0, *e, *ep);
            }
        }
    }
    // Roundoff in the phase sum can leave -1e-17 where the exact value is 0.
    for v in &mut values {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let metadata = metadata(model, mesh, region, occ, kernel, weight, range, start);
    SpectrumSeries::new(omega0_grid.to_vec(), values, metadata)
}

#[allow(clippy::too_many_arguments)]
fn metadata(
    model: &BlochModel,
    mesh: &MomentumMesh,
    region: &Region,
    occ: Occupation,
    kernel: BoxKernel,
    weight: f64,
    range: Option<(f64, f64)>,
    start: std::time::Instant,
) -> SpectrumMetadata {
    SpectrumMetadata {
        model: model.name().to_string(),
        params: model.params(),
        dims: mesh.dims().to_vec(),
        region: Some(region.describe()),
        delta_omega: kernel.half_width(),
        temperature: occ.temperature(),
        wall_time_s: start.elapsed().as_secs_f64(),
        transition_weight: Some(weight),
        transition_range: range,
    }
}

/// Static variance recovered from a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticVariance {
    /// Sum of all transition weights; exact by construction.
    pub exact: f64,
    /// `∫ dω₀ S̄(ω₀)` by trapezoidal quadrature over the sampled grid.
    pub quadrature: f64,
    /// False when the grid does not cover the full transition support.
    pub quadrature_reliable: bool,
}

/// Integrates the spectrum back to the equal-time variance of `N_A`.
pub fn static_variance_from_sbar(series: &SpectrumSeries) -> Result<StaticVariance> {
    let exact = series.metadata.transition_weight.ok_or_else(|| {
        Error::InvalidArgument("spectrum carries no transition weights".into())
    })?;
    let quadrature = trapezoid(&series.omega0, &series.values);
    let hw = series.metadata.delta_omega;
    let reliable = match series.metadata.transition_range {
        None => true,
        Some((lo, hi)) => {
            let first = series.omega0[0];
            let last = series.omega0[series.len() - 1];
            first <= lo - hw
                && last >= hi + hw
                && series.values[0] == 0.0
                && series.values[series.len() - 1] == 0.0
        }
    };
    Ok(StaticVariance {
        exact,
        quadrature,
        quadrature_reliable: reliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_mesh, metal_model_1d, metal_model_2d, qwz_model};
    use crate::spectrum::uniform_grid;
    use approx::assert_abs_diff_eq;

    /// `|Σ_j Σ_j' e^{iq·(j-j')}|` by brute force, for the oracle comparison.
    fn double_sum(region: &Region, q: &[f64]) -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for j in region.sites() {
            for jp in region.sites() {
                let arg: f64 = (0..q.len())
                    .map(|a| q[a] * (j[a] as f64 - jp[a] as f64))
                    .sum();
                s += Complex64::from_polar(1.0, arg);
            }
        }
        s.re
    }

    #[test]
    fn kernel_shape() {
        let k = BoxKernel::new(0.5).unwrap();
        assert_eq!(k.eval(0.0), 1.0);
        assert_eq!(k.eval(0.49), 1.0);
        assert_eq!(k.eval(0.5), 0.5);
        assert_eq!(k.eval(-0.51), 0.0);
        assert!(BoxKernel::new(0.0).is_err());
        // unit area
        let grid = uniform_grid(-1.0, 1.0, 1e-4).unwrap();
        let vals: Vec<f64> = grid.iter().map(|&w| k.eval(w)).collect();
        assert_abs_diff_eq!(trapezoid(&grid, &vals), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn geom_factor_at_zero_is_area_squared() {
        let mesh = build_mesh(&[6, 4]).unwrap();
        let r = Region::from_sites(&[6, 4], vec![vec![0, 0], vec![3, 2], vec![5, 1]]).unwrap();
        let g = geometric_factor(&r, &mesh).unwrap();
        assert_abs_diff_eq!(g.at(&[0, 0]), 9.0, epsilon = 1e-12);
        for i in 0..mesh.len() {
            let m = mesh.multi_index(i);
            let minus: Vec<usize> = m.iter().zip(mesh.dims()).map(|(&x, &n)| (n - x) % n).collect();
            assert_abs_diff_eq!(g.at(&m), g.at(&minus), epsilon = 1e-12);
            assert!(g.at(&m) <= 9.0 + 1e-12 && g.at(&m) >= 0.0);
        }
    }

    #[test]
    fn two_site_segment_cancels_at_pi() {
        let mesh = build_mesh(&[8]).unwrap();
        let r = Region::rect(&[8], &[2]).unwrap();
        let g = geometric_factor(&r, &mesh).unwrap();
        assert_abs_diff_eq!(g.at(&[4]), 0.0, epsilon = 1e-15);
        let general = Region::from_sites(&[8], vec![vec![0], vec![1]]).unwrap();
        assert_abs_diff_eq!(geometric_factor(&general, &mesh).unwrap().at(&[4]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rect_closed_form_matches_double_sum() {
        let mesh = build_mesh(&[4, 4]).unwrap();
        let r = Region::rect(&[4, 4], &[2, 2]).unwrap();
        let g = geometric_factor(&r, &mesh).unwrap();
        for i in 0..mesh.len() {
            let m = mesh.multi_index(i);
            let q: Vec<f64> = m.iter().map(|&x| 2.0 * PI * x as f64 / 4.0).collect();
            assert_abs_diff_eq!(g.at(&m), double_sum(&r, &q), epsilon = 1e-12);
        }
    }

    #[test]
    fn general_region_matches_double_sum() {
        let mesh = build_mesh(&[5, 6]).unwrap();
        let r = Region::from_sites(&[5, 6], vec![vec![0, 0], vec![1, 0], vec![4, 5], vec![2, 3]])
            .unwrap();
        let g = geometric_factor(&r, &mesh).unwrap();
        for i in 0..mesh.len() {
            let m = mesh.multi_index(i);
            let q = [2.0 * PI * m[0] as f64 / 5.0, 2.0 * PI * m[1] as f64 / 6.0];
            assert_abs_diff_eq!(g.at(&m), double_sum(&r, &q), epsilon = 1e-12);
        }
    }

    #[test]
    fn window_for_chain_matches_closed_form() {
        let model = metal_model_1d(1.0, 0.5);
        let mesh = build_mesh(&[40]).unwrap();
        let dw = select_window(&model, &mesh, 0).unwrap();
        // brute-force scan of the forward difference
        let step = 2.0 * PI / 40.0;
        let scan = (1..=40)
            .map(|j| {
                let k = -PI + step * j as f64;
                ((k + step).cos() - k.cos()).abs()
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(dw, 2.0 * scan, epsilon = 1e-12);
        // the steepest mesh step straddles k = π/2 symmetrically
        assert_abs_diff_eq!(dw, 2.0 * (2.0 * PI / 40.0).sin(), epsilon = 1e-12);
    }

    #[test]
    fn flat_band_window_is_an_error() {
        let model = metal_model_2d(1.0, 0.0, 0.0);
        let mesh = build_mesh(&[6, 6]).unwrap();
        assert!(matches!(select_window(&model, &mesh, 1), Err(Error::FlatBand)));
        assert!(select_window(&model, &mesh, 0).is_ok());
        assert!(select_window(&model, &mesh, 2).is_err());
    }

    #[test]
    fn empty_region_gives_zero() {
        let model = qwz_model(1.0);
        let mesh = build_mesh(&[4, 4]).unwrap();
        let r = Region::rect(&[4, 4], &[0, 0]).unwrap();
        let grid = uniform_grid(-1.0, 7.0, 0.25).unwrap();
        let k = BoxKernel::new(0.5).unwrap();
        for s in [
            sbar(&model, &mesh, &r, Occupation::ZeroTemperature, k, &grid).unwrap(),
            sbar_naive(&model, &mesh, &r, Occupation::ZeroTemperature, k, &grid).unwrap(),
        ] {
            assert!(s.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn region_mesh_mismatch() {
        let model = metal_model_1d(1.0, 0.0);
        let mesh = build_mesh(&[8]).unwrap();
        let r = Region::rect(&[10], &[4]).unwrap();
        let k = BoxKernel::new(0.3).unwrap();
        assert!(matches!(
            sbar(&model, &mesh, &r, Occupation::ZeroTemperature, k, &[0.0, 1.0]),
            Err(Error::RegionMismatch(_))
        ));
    }

    #[test]
    fn single_site_translation_invariance() {
        let model = metal_model_1d(1.0, 0.3);
        let mesh = build_mesh(&[8]).unwrap();
        let grid = uniform_grid(-1.0, 3.0, 0.1).unwrap();
        let k = BoxKernel::new(0.3).unwrap();
        let a = Region::from_sites(&[8], vec![vec![0]]).unwrap();
        let b = Region::from_sites(&[8], vec![vec![5]]).unwrap();
        let sa = sbar_naive(&model, &mesh, &a, Occupation::ZeroTemperature, k, &grid).unwrap();
        let sb = sbar_naive(&model, &mesh, &b, Occupation::ZeroTemperature, k, &grid).unwrap();
        for (x, y) in sa.values.iter().zip(&sb.values) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn whole_lattice_has_no_fluctuations() {
        let model = qwz_model(1.0);
        let mesh = build_mesh(&[4, 6]).unwrap();
        let r = Region::rect(&[4, 6], &[4, 6]).unwrap();
        let grid = uniform_grid(-2.0, 8.0, 0.25).unwrap();
        let s = sbar(&model, &mesh, &r, Occupation::ZeroTemperature, BoxKernel::new(0.5).unwrap(), &grid)
            .unwrap();
        let v = static_variance_from_sbar(&s).unwrap();
        assert_abs_diff_eq!(v.exact, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_flagged_when_grid_too_short() {
        let model = metal_model_1d(1.0, 0.5);
        let mesh = build_mesh(&[16]).unwrap();
        let r = Region::rect(&[16], &[8]).unwrap();
        let k = BoxKernel::new(0.3).unwrap();
        let short = uniform_grid(0.0, 1.0, 0.05).unwrap();
        let s = sbar(&model, &mesh, &r, Occupation::ZeroTemperature, k, &short).unwrap();
        assert!(!static_variance_from_sbar(&s).unwrap().quadrature_reliable);
        let full = uniform_grid(-0.6, 2.6, 0.05).unwrap();
        let s = sbar(&model, &mesh, &r, Occupation::ZeroTemperature, k, &full).unwrap();
        let v = static_variance_from_sbar(&s).unwrap();
        assert!(v.quadrature_reliable);
        assert!((v.quadrature - v.exact).abs() < 0.05 * v.exact);
    }
}
