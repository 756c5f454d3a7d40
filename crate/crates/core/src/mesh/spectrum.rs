use nalgebra::DMatrix;

use super::lanczos::relative_residual;
use super::{
    assemble_cotangent_stiffness, assemble_lumped_mass, solve_smallest_eigenpairs, SolveReport, SparseSymmetric, TriangleMesh,
};
use crate::error::{Error, Result};
use crate::point::ManifoldPoint;
use crate::spectral::{check_member, EigenLevel, EigenSystem, ManifoldKind};

/// Discrete eigenpairs of a mesh: `eigenvectors` is `K × N`, column `j`
/// holds the per-vertex values of `f_j`, mass-orthonormal under `diag(mass)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshEigenSystem {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    mass: Vec<f64>,
    dim: u32,
    volume: f64,
}

impl MeshEigenSystem {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, mass: Vec<f64>, dim: u32, volume: f64) -> Result<Self> {
        let (k, n) = eigenvectors.shape();
        if eigenvalues.len() != n || mass.len() != k {
            return Err(Error::InvalidArgument(format!(
                "inconsistent eigensystem shapes: {} eigenvalues, {k}×{n} eigenvectors, {} mass entries",
                eigenvalues.len(),
                mass.len()
            )));
        }
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("empty eigensystem".into()));
        }
        if !(volume > 0.0) {
            return Err(Error::InvalidArgument(format!("volume must be positive, got {volume}")));
        }
        Ok(MeshEigenSystem {
            eigenvalues,
            eigenvectors,
            mass,
            dim,
            volume,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn manifold_dim(&self) -> u32 {
        self.dim
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn num_vertices(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn num_eigenpairs(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Keeps the first `n` eigenpairs.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.num_eigenpairs() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n} of {} eigenpairs",
                self.num_eigenpairs()
            )));
        }
        Self::new(
            self.eigenvalues[..n].to_vec(),
            self.eigenvectors.columns(0, n).into_owned(),
            self.mass.clone(),
            self.dim,
            self.volume,
        )
    }

    /// Relative residual of each pair against the stiffness matrix `s`, as
    /// reported by the solver.
    pub fn residuals(&self, s: &SparseSymmetric) -> Result<Vec<f64>> {
        if s.dim() != self.num_vertices() {
            return Err(Error::InvalidArgument(format!(
                "stiffness has order {}, eigensystem has {} vertices",
                s.dim(),
                self.num_vertices()
            )));
        }
        let s_norm = s.norm_inf();
        Ok((0..self.num_eigenpairs())
            .map(|j| {
                let f: Vec<f64> = self.eigenvectors.column(j).iter().copied().collect();
                relative_residual(s, s_norm, &self.mass, &f, self.eigenvalues[j])
            })
            .collect())
    }

    /// Largest deviation of `Fᵀ M F` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let f = &self.eigenvectors;
        let mut mf = f.clone();
        for (i, m) in self.mass.iter().enumerate() {
            mf.row_mut(i).scale_mut(*m);
        }
        let g = f.tr_mul(&mf);
        let n = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - want).abs());
            }
        }
        worst
    }
}

/// Assembles, solves and returns the `n` smallest eigenpairs of a mesh.
pub fn compute_mesh_eigensystem(mesh: &TriangleMesh, n: usize, tol: f64) -> Result<(MeshEigenSystem, SolveReport)> {
    let s = assemble_cotangent_stiffness(mesh)?;
    let mass = assemble_lumped_mass(mesh);
    solve_smallest_eigenpairs(&s, &mass, n, tol)
}

/// A mesh spectrum seen as an [`EigenSystem`]; every eigenpair is its own
/// level with multiplicity one.
#[derive(Clone, Debug)]
pub struct MeshSpectrum {
    system: MeshEigenSystem,
    faces: Vec<[usize; 3]>,
    levels: Vec<EigenLevel>,
    vertex_face: Vec<(usize, usize)>,
}

pub fn mesh_eigen_to_eigensystem(mes: MeshEigenSystem, mesh: &TriangleMesh) -> Result<MeshSpectrum> {
    if mes.num_vertices() != mesh.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "eigensystem has {} vertices, mesh has {}",
            mes.num_vertices(),
            mesh.num_vertices()
        )));
    }
    let levels = mes
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(index, &l)| EigenLevel {
            index,
            eigenvalue: l.max(0.0),
            multiplicity: 1,
        })
        .collect();
    let mut vertex_face = vec![(usize::MAX, 0); mesh.num_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for (corner, &v) in f.iter().enumerate() {
            if vertex_face[v].0 == usize::MAX {
                vertex_face[v] = (fi, corner);
            }
        }
    }
    Ok(MeshSpectrum {
        system: mes,
        faces: mesh.faces().to_vec(),
        levels,
        vertex_face,
    })
}

impl MeshSpectrum {
    pub fn system(&self) -> &MeshEigenSystem {
        &self.system
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_face.len()
    }

    /// The point located at vertex `i`.
    pub fn vertex_point(&self, i: usize) -> Result<ManifoldPoint> {
        let &(face, corner) = self
            .vertex_face
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("vertex {i} out of range ({} vertices)", self.num_vertices())))?;
        let mut bary = [0.0; 3];
        bary[corner] = 1.0;
        Ok(ManifoldPoint::Mesh { face, bary })
    }

    fn locate(&self, x: &ManifoldPoint) -> Result<([usize; 3], [f64; 3])> {
        self.check_point(x)?;
        match x {
            ManifoldPoint::Mesh { face, bary } => Ok((self.faces[*face], *bary)),
            _ => unreachable!("checked above"),
        }
    }

    fn interpolate(&self, level: usize, verts: &[usize; 3], bary: &[f64; 3]) -> f64 {
        let f = &self.system.eigenvectors;
        (0..3).map(|c| bary[c] * f[(verts[c], level)]).sum()
    }
}

impl EigenSystem for MeshSpectrum {
    fn kind(&self) -> ManifoldKind {
        ManifoldKind::Mesh {
            num_faces: self.faces.len(),
            num_vertices: self.vertex_face.len(),
        }
    }

    fn dim(&self) -> usize {
        self.system.dim as usize
    }

    fn volume(&self) -> f64 {
        self.system.volume
    }

    fn levels(&self) -> &[EigenLevel] {
        &self.levels
    }

    fn phi(&self, level: usize, member: usize, x: &ManifoldPoint) -> Result<f64> {
        let lv = self.level(level)?;
        check_member(lv, member)?;
        let (v, b) = self.locate(x)?;
        Ok(self.interpolate(level, &v, &b))
    }

    fn level_members(&self, level: usize, x: &ManifoldPoint, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        out.push(self.phi(level, 0, x)?);
        Ok(())
    }

    fn pair_sum(&self, level: usize, x: &ManifoldPoint, x2: &ManifoldPoint) -> Result<f64> {
        Ok(self.phi(level, 0, x)? * self.phi(level, 0, x2)?)
    }

    fn pair_sums(&self, x: &ManifoldPoint, x2: &ManifoldPoint, out: &mut [f64]) -> Result<()> {
        if out.len() > self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "asked for {} levels, only {} available",
                out.len(),
                self.levels.len()
            )));
        }
        let (v1, b1) = self.locate(x)?;
        let (v2, b2) = self.locate(x2)?;
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.interpolate(n, &v1, &b1) * self.interpolate(n, &v2, &b2);
        }
        Ok(())
    }
}
