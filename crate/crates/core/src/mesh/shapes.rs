//! Procedural meshes for tests, benchmarks and demos.

use std::collections::HashMap;

use super::TriangleMesh;

/// Unit icosphere: a regular icosahedron with `subdivisions` rounds of
/// midpoint refinement, vertices projected to the sphere.
/// Has `10·4^s + 2` vertices.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let project = |p: [f64; 3]| {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    };
    v.iter_mut().for_each(|p| *p = project(*p));
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * f.len());
        for tri in &f {
            let mut m = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                m[e] = *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (pa, pb) = (v[a], v[b]);
                    v.push(project([pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]]));
                    v.len() - 1
                });
            }
            next.push([tri[0], m[0], m[2]]);
            next.push([tri[1], m[1], m[0]]);
            next.push([tri[2], m[2], m[1]]);
            next.push(m);
        }
        f = next;
    }
    TriangleMesh::new(v, f).expect("icosphere is a valid mesh")
}

/// Ring torus with tube radius `minor` around a circle of radius `major`,
/// sampled on a `segments_major × segments_minor` grid.
pub fn torus(segments_major: usize, segments_minor: usize, major: f64, minor: f64) -> TriangleMesh {
    assert!(segments_major >= 3 && segments_minor >= 3 && major > minor && minor > 0.0);
    let tau = std::f64::consts::TAU;
    let mut v = Vec::with_capacity(segments_major * segments_minor);
    for i in 0..segments_major {
        let u = tau * i as f64 / segments_major as f64;
        for j in 0..segments_minor {
            let w = tau * j as f64 / segments_minor as f64;
            let r = major + minor * w.cos();
            v.push([r * u.cos(), r * u.sin(), minor * w.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % segments_major) * segments_minor + (j % segments_minor);
    let mut f = Vec::with_capacity(2 * segments_major * segments_minor);
    for i in 0..segments_major {
        for j in 0..segments_minor {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(v, f).expect("torus grid is a valid mesh")
}

/// Flat unit square split into `cells × cells` squares, two triangles each.
/// Has `(cells + 1)²` vertices and an open boundary.
pub fn unit_square_grid(cells: usize) -> TriangleMesh {
    assert!(cells >= 1);
    let n = cells + 1;
    let h = 1.0 / cells as f64;
    let v = (0..n * n).map(|k| [(k % n) as f64 * h, (k / n) as f64 * h, 0.0]).collect();
    let mut f = Vec::with_capacity(2 * cells * cells);
    for r in 0..cells {
        for c in 0..cells {
            let a = r * n + c;
            f.push([a, a + 1, a + n + 1]);
            f.push([a, a + n + 1, a + n]);
        }
    }
    TriangleMesh::new(v, f).expect("grid is a valid mesh")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_closure() {
        for s in 0..4 {
            let m = icosphere(s);
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.num_faces(), 20 * 4usize.pow(s));
            assert!(m.is_closed());
        }
        let t = torus(24, 12, 1.0, 0.35);
        assert_eq!(t.num_vertices(), 288);
        assert!(t.is_closed());
        let g = unit_square_grid(3);
        assert_eq!(g.num_vertices(), 16);
        assert!((g.total_area() - 1.0).abs() < 1e-14);
        assert_eq!(g.boundary_edge_count(), 12);
    }

    #[test]
    fn icosphere_area_approaches_four_pi() {
        let a = icosphere(4).total_area();
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!((a - four_pi).abs() / four_pi < 0.01);
        assert!(a < four_pi);
    }
}
