#![allow(dead_code)]

use fermiscale::models::{metal_model_1d, metal_model_2d, qwz_model};
use fermiscale::spectrum::uniform_grid;
use fermiscale::structfact::{band_span, select_window, BoxKernel};
use fermiscale::{build_mesh, BlochModel, MomentumMesh, Region};

pub fn qwz() -> BlochModel {
    qwz_model(1.0)
}

pub fn metal2d() -> BlochModel {
    metal_model_2d(1.0, 1.0, 0.5)
}

pub fn metal1d() -> BlochModel {
    metal_model_1d(1.0, 0.5)
}

/// Kernel measured on the mesh itself and a grid covering transitions of either sign.
pub fn kernel_and_grid(model: &BlochModel, mesh: &MomentumMesh) -> (BoxKernel, Vec<f64>) {
    let axis = mesh.dimension() - 1;
    let dw = select_window(model, mesh, axis).unwrap();
    let (lo, hi) = band_span(model, mesh).unwrap();
    let reach = hi - lo + 2.0 * dw;
    (BoxKernel::new(dw).unwrap(), uniform_grid(-reach, reach, dw / 4.0).unwrap())
}

/// Standard small scenarios: (label, model, lattice, region extents).
pub fn small_cases() -> Vec<(&'static str, BlochModel, Vec<usize>, Vec<usize>)> {
    vec![
        ("metal1d N=8 l=4", metal1d(), vec![8], vec![4]),
        ("qwz 4x4 2x2", qwz(), vec![4, 4], vec![2, 2]),
        ("metal2d 4x4 2x2", metal2d(), vec![4, 4], vec![2, 2]),
    ]
}

pub fn mesh_and_region(dims: &[usize], extents: &[usize]) -> (MomentumMesh, Region) {
    (build_mesh(dims).unwrap(), Region::rect(dims, extents).unwrap())
}
