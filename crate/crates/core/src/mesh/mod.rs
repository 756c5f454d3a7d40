//! Triangle meshes and their Laplace–Beltrami spectra.
//!
//! The operator is discretized with piecewise-linear finite elements: the
//! cotangent stiffness matrix `S` and a lumped (diagonal) mass matrix `M`.
//! The smallest eigenpairs of `S f = λ M f` are found with a block Lanczos
//! iteration on the shift-inverted operator, and the result plugs into the
//! kernels like any analytic [`EigenSystem`](crate::spectral::EigenSystem).

use std::collections::HashMap;

use crate::error::{Error, Result};

mod assembly;
mod cache;
mod cholesky;
mod io;
mod lanczos;
pub mod shapes;
mod sparse;
mod spectrum;

pub use assembly::{assemble_cotangent_stiffness, assemble_lumped_mass};
pub use cache::{cache_read, cache_write, decode_cache, encode_cache, CACHE_MAGIC, CACHE_VERSION};
pub use cholesky::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use io::{load_mesh, load_mesh_with_options, parse_obj, parse_off, write_off, write_ply_scalars, MeshFormat};
pub use lanczos::{solve_smallest_eigenpairs, SolveReport, DEFAULT_TOLERANCE};
pub use sparse::SparseSymmetric;
pub use spectrum::{compute_mesh_eigensystem, mesh_eigen_to_eigensystem, MeshEigenSystem, MeshSpectrum};

/// Relative area below which a face counts as degenerate, in units of the
/// squared bounding-box diagonal.
const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default)]
pub struct MeshOptions {
    /// Keep only the largest connected component instead of rejecting
    /// disconnected meshes.
    pub keep_largest_component: bool,
}

/// A validated surface mesh: in-range indices, no degenerate faces, every
/// edge shared by at most two faces, one connected component.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    boundary_edges: usize,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_options(vertices, faces, &MeshOptions::default())
    }

    pub fn with_options(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>, opts: &MeshOptions) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::MeshValidation("mesh has no vertices or no faces".into()));
        }
        if let Some(v) = vertices.iter().find(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::MeshValidation(format!("non-finite vertex {v:?}")));
        }
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&i) = f.iter().find(|&&i| i >= nv) {
                return Err(Error::MeshValidation(format!(
                    "face {fi} references vertex {i}, but the mesh has {nv} vertices"
                )));
            }
        }

        let diag2 = bbox_diagonal_sq(&vertices);
        for (fi, f) in faces.iter().enumerate() {
            let area = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || area <= DEGENERATE_AREA * diag2 {
                return Err(Error::MeshValidation(format!("face {fi} is degenerate (area {area:e})")));
            }
        }

        let mut edge_faces: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &faces {
            for (a, b) in face_edges(f) {
                *edge_faces.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some(((a, b), n)) = edge_faces.iter().find(|(_, &n)| n > 2) {
            return Err(Error::MeshValidation(format!("non-manifold edge ({a}, {b}) shared by {n} faces")));
        }

        let labels = components(nv, &faces);
        let count = labels.iter().max().map_or(0, |m| m + 1);
        if count > 1 {
            if !opts.keep_largest_component {
                return Err(Error::MeshValidation(format!(
                    "mesh has {count} connected components (isolated vertices count as components)"
                )));
            }
            let (vertices, faces) = largest_component(&vertices, &faces, &labels, count);
            return Self::with_options(vertices, faces, &MeshOptions::default());
        }

        let boundary_edges = edge_faces.values().filter(|&&n| n == 1).count();
        if boundary_edges > 0 {
            log::warn!("mesh has {boundary_edges} boundary edges; treated with natural (Neumann) conditions");
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            boundary_edges,
        })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edges
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges == 0
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }
}

fn face_edges(f: &[usize; 3]) -> [(usize, usize); 3] {
    [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
}

pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

fn bbox_diagonal_sq(vertices: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let d = sub(&hi, &lo);
    dot(&d, &d)
}

/// Connected-component label per vertex; isolated vertices get their own.
fn components(nv: usize, faces: &[[usize; 3]]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for f in faces {
        for (a, b) in face_edges(f) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut label = vec![usize::MAX; nv];
    let mut next = 0;
    let mut out = vec![0; nv];
    for i in 0..nv {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    out
}

fn largest_component(
    vertices: &[[f64; 3]],
    faces: &[[usize; 3]],
    labels: &[usize],
    count: usize,
) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let mut sizes = vec![0usize; count];
    for &l in labels {
        sizes[l] += 1;
    }
    // ties go to the lowest label
    let keep = (0..count).fold(0, |best, l| if sizes[l] > sizes[best] { l } else { best });
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut kept_vertices = Vec::with_capacity(sizes[keep]);
    for (i, v) in vertices.iter().enumerate() {
        if labels[i] == keep {
            remap[i] = kept_vertices.len();
            kept_vertices.push(*v);
        }
    }
    let kept_faces = faces
        .iter()
        .filter(|f| labels[f[0]] == keep)
        .map(|f| f.map(|i| remap[i]))
        .collect();
    (kept_vertices, kept_faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
        (
            vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
    }

    #[test]
    fn regular_tetrahedron_is_valid_and_closed() {
        let (v, f) = tetra();
        let m = TriangleMesh::new(v, f).unwrap();
        assert!(m.is_closed());
        let a0 = m.face_area(0);
        assert!((0..4).all(|f| (m.face_area(f) - a0).abs() < 1e-14));
    }

    #[test]
    fn rejects_out_of_range_and_degenerate() {
        let (v, mut f) = tetra();
        f[0] = [0, 1, 7];
        assert!(matches!(TriangleMesh::new(v.clone(), f), Err(Error::MeshValidation(_))));
        let mut v2 = v.clone();
        v2.push([0.0, 0.0, 0.0]);
        v2.push([1e-9, 0.0, 0.0]);
        v2.push([2e-9, 0.0, 0.0]);
        let (_, f) = tetra();
        let mut f2 = f.clone();
        f2.push([4, 5, 6]);
        let err = TriangleMesh::new(v2, f2).unwrap_err();
        assert!(err.to_string().contains("degenerate"));
        let (v, mut f) = tetra();
        f[0] = [0, 0, 2];
        assert!(TriangleMesh::new(v, f).is_err());
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        let f = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let err = TriangleMesh::new(v, f).unwrap_err();
        assert!(err.to_string().contains("non-manifold"));
    }

    #[test]
    fn disconnected_rejected_or_trimmed() {
        let (mut v, mut f) = tetra();
        let off = v.len();
        v.extend([[5.0, 0.0, 0.0], [6.0, 0.0, 0.0], [5.0, 1.0, 0.0]]);
        f.push([off, off + 1, off + 2]);
        assert!(TriangleMesh::new(v.clone(), f.clone()).is_err());
        let m = TriangleMesh::with_options(v, f, &MeshOptions { keep_largest_component: true }).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_faces(), 4);

        // an unreferenced vertex is its own component
        let (mut v, f) = tetra();
        v.push([9.0, 9.0, 9.0]);
        assert!(TriangleMesh::new(v, f).is_err());
    }

    #[test]
    fn boundary_edges_are_counted() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.boundary_edge_count(), 3);
        assert!(!m.is_closed());
    }
}
