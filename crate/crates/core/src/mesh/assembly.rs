use super::{cross, dot, norm, sub, SparseSymmetric, TriangleMesh};
use crate::error::{Error, Result};

/// Cotangent stiffness matrix: `S_ij = -(cot α_ij + cot β_ij)/2` for each
/// edge, diagonal set so every row sums to zero.
pub fn assemble_cotangent_stiffness(mesh: &TriangleMesh) -> Result<SparseSymmetric> {
    let v = mesh.vertices();
    let n = mesh.num_vertices();
    let mut triplets = Vec::with_capacity(6 * mesh.num_faces());
    for (fi, f) in mesh.faces().iter().enumerate() {
        for corner in 0..3 {
            let k = f[corner];
            let i = f[(corner + 1) % 3];
            let j = f[(corner + 2) % 3];
            let a = sub(&v[i], &v[k]);
            let b = sub(&v[j], &v[k]);
            let cot = dot(&a, &b) / norm(&cross(&a, &b));
            if !cot.is_finite() {
                return Err(Error::Numerical(format!("cotangent weight overflow in face {fi}")));
            }
            triplets.push((i, j, -0.5 * cot));
            triplets.push((j, i, -0.5 * cot));
        }
    }
    let off = SparseSymmetric::from_triplets(n, triplets)?;
    let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(off.nnz() + n);
    for i in 0..n {
        let row_off: f64 = off.row(i).map(|(_, w)| w).sum();
        full.extend(off.row(i).map(|(j, w)| (i, j, w)));
        full.push((i, i, -row_off));
    }
    SparseSymmetric::from_triplets(n, full)
}

/// Lumped mass: each vertex receives a third of the area of every incident face.
pub fn assemble_lumped_mass(mesh: &TriangleMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(fi) / 3.0;
        for &i in f {
            m[i] += a;
        }
    }
    m
}
