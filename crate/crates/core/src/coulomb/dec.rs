use nalgebra::{DMatrix, DVector, Vector3};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::MatrixCochain;
use crate::error::{GaugeError, Result};
use crate::geometry::SimplicialComplex;
use crate::ucalc::{self, CMat, C64};

/// Incidence operators, diagonal Hodge stars and comass evaluators of a mesh.
///
/// Edge lengths and face areas are those of the flat (polyhedral) triangles;
/// star0 is the barycentric dual area and star1 the cotangent weight.
#[derive(Debug, Clone)]
pub struct DecOperators {
    mesh: SimplicialComplex,
    lengths: Vec<f64>,
    areas: Vec<f64>,
    star0: Vec<f64>,
    star1: Vec<f64>,
}

fn xyz(p: &crate::geometry::Point) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

impl DecOperators {
    pub fn new(mesh: &SimplicialComplex) -> Result<Self> {
        let ne = mesh.edges().len();
        let nv = mesh.vertices().len();
        let lengths: Vec<f64> = (0..ne).map(|e| xyz(&mesh.edge_vector(e)).norm()).collect();
        let mut areas = Vec::with_capacity(mesh.faces().len());
        let mut star0 = vec![0.0; nv];
        let mut star1 = vec![0.0; ne];
        for (f, (verts, fe)) in mesh.faces().iter().zip(mesh.face_edges()).enumerate() {
            let p = mesh.face_positions(f).map(|q| xyz(&q));
            let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            if !(area > 1e-300) {
                return Err(GaugeError::InvalidComplex(format!("degenerate face {f}")));
            }
            areas.push(area);
            for k in 0..3 {
                star0[verts[k]] += area / 3.0;
                // the corner k faces edge (k+1) -> (k+2)
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                let cot = u.dot(&v) / u.cross(&v).norm();
                star1[fe[(k + 1) % 3].0] += 0.5 * cot;
            }
        }
        Ok(DecOperators { mesh: mesh.clone(), lengths, areas, star0, star1 })
    }

    pub fn mesh(&self) -> &SimplicialComplex {
        &self.mesh
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn star0(&self) -> &[f64] {
        &self.star0
    }

    pub fn star1(&self) -> &[f64] {
        &self.star1
    }

    pub fn total_area(&self) -> f64 {
        crate::util::pairwise_sum(&self.areas)
    }

    pub fn d0(&self, u: &MatrixCochain) -> Result<MatrixCochain> {
        u.expect_degree(0)?;
        let values = self.mesh.edges().iter().map(|e| &u.values()[e[1]] - &u.values()[e[0]]).collect();
        Ok(MatrixCochain::from_values(1, u.rank(), values))
    }

    pub fn d1(&self, a: &MatrixCochain) -> Result<MatrixCochain> {
        a.expect_degree(1)?;
        let values = self
            .mesh
            .face_edges()
            .iter()
            .map(|fe| {
                let mut s = ucalc::zeros(a.rank());
                for &(e, sign) in fe {
                    s += &a.values()[e] * C64::new(sign, 0.0);
                }
                s
            })
            .collect();
        Ok(MatrixCochain::from_values(2, a.rank(), values))
    }

    /// d* on 1-cochains, as vertex densities: star0^{-1} d0^T star1.
    pub fn codifferential(&self, a: &MatrixCochain) -> Result<MatrixCochain> {
        a.expect_degree(1)?;
        let mut out = vec![ucalc::zeros(a.rank()); self.star0.len()];
        for (e, [p, q]) in self.mesh.edges().iter().enumerate() {
            let w = &a.values()[e] * C64::new(self.star1[e], 0.0);
            out[*q] += &w;
            out[*p] -= &w;
        }
        for (v, o) in out.iter_mut().enumerate() {
            *o *= C64::new(1.0 / self.star0[v], 0.0);
        }
        Ok(MatrixCochain::from_values(0, a.rank(), out))
    }

    /// Largest vertex value of |d* a|.
    pub fn coclosed_residual(&self, a: &MatrixCochain) -> Result<f64> {
        Ok(self.codifferential(a)?.values().iter().map(ucalc::op_norm).fold(0.0, f64::max))
    }

    /// max_e |A_e| / length(e)
    pub fn comass1(&self, a: &MatrixCochain) -> f64 {
        a.values().iter().zip(&self.lengths).map(|(v, l)| ucalc::op_norm(v) / l).fold(0.0, f64::max)
    }

    /// max_f |F_f| / area(f)
    pub fn comass2(&self, f: &MatrixCochain) -> f64 {
        f.values().iter().zip(&self.areas).map(|(v, a)| ucalc::op_norm(v) / a).fold(0.0, f64::max)
    }

    /// Oriented values of a 1-cochain on the three boundary edges of a face.
    fn boundary_values(&self, a: &MatrixCochain, f: usize) -> [CMat; 3] {
        let fe = &self.mesh.face_edges()[f];
        [0, 1, 2].map(|k| &a.values()[fe[k].0] * C64::new(fe[k].1, 0.0))
    }

    /// Antisymmetrized cup product, averaged over the cyclic orderings of each face.
    pub fn wedge(&self, a: &MatrixCochain, b: &MatrixCochain) -> Result<MatrixCochain> {
        a.expect_degree(1)?;
        b.expect_degree(1)?;
        let values = (0..self.areas.len())
            .map(|f| {
                let x = self.boundary_values(a, f);
                let y = self.boundary_values(b, f);
                let mut s = ucalc::zeros(a.rank());
                for k in 0..3 {
                    let k1 = (k + 1) % 3;
                    s += &x[k] * &y[k1] - &x[k1] * &y[k];
                }
                s * C64::new(1.0 / 6.0, 0.0)
            })
            .collect();
        Ok(MatrixCochain::from_values(2, a.rank(), values))
    }

    /// dA + A^A with the cup-product wedge.
    pub fn curvature_cup(&self, a: &MatrixCochain) -> Result<MatrixCochain> {
        self.d1(a)?.add(&self.wedge(a, a)?)
    }

    /// -log of the transport around each face, based at the face's first vertex.
    pub fn curvature_plaquette(&self, a: &MatrixCochain) -> Result<MatrixCochain> {
        a.expect_degree(1)?;
        let values = (0..self.areas.len())
            .map(|f| {
                let x = self.boundary_values(a, f);
                let u = ucalc::expm(&-&x[2]) * ucalc::expm(&-&x[1]) * ucalc::expm(&-&x[0]);
                ucalc::logm_unitary(&u).map(|l| -l)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MatrixCochain::from_values(2, a.rank(), values))
    }

    /// Stiffness matrix d0^T star1 d0 of the 0-form Laplacian.
    pub fn laplacian0(&self) -> CscMatrix<f64> {
        let n = self.star0.len();
        let mut coo = CooMatrix::new(n, n);
        for (e, [p, q]) in self.mesh.edges().iter().enumerate() {
            let w = self.star1[e];
            coo.push(*p, *p, w);
            coo.push(*q, *q, w);
            coo.push(*p, *q, -w);
            coo.push(*q, *p, -w);
        }
        CscMatrix::from(&coo)
    }

    /// d1 star1^{-1} d1^T, the Laplacian on face potentials.
    pub fn face_laplacian(&self) -> Result<CscMatrix<f64>> {
        let n = self.areas.len();
        let mut inv = vec![0.0; self.star1.len()];
        for (e, w) in self.star1.iter().enumerate() {
            if *w <= 1e-12 {
                return Err(GaugeError::InvalidComplex(format!("non-positive cotangent weight on edge {e}")));
            }
            inv[e] = 1.0 / w;
        }
        // each edge joins the two faces it bounds
        let mut sides: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.star1.len()];
        for (f, fe) in self.mesh.face_edges().iter().enumerate() {
            for &(e, s) in fe {
                sides[e].push((f, s));
            }
        }
        let mut coo = CooMatrix::new(n, n);
        for (e, s) in sides.iter().enumerate() {
            for &(f, a) in s {
                for &(g, b) in s {
                    coo.push(f, g, a * b * inv[e]);
                }
            }
        }
        Ok(CscMatrix::from(&coo))
    }

    /// Vertex Poisson solver with the star0-weighted mean-zero normalization.
    pub fn vertex_solver(&self) -> Result<PinnedSolver> {
        PinnedSolver::new(&self.laplacian0(), self.star0.clone())
    }

    /// Lowest `k` eigenvalues of the generalized problem L u = mu star0 u (dense; small meshes).
    pub fn laplacian_spectrum(&self, k: usize) -> Vec<f64> {
        let n = self.star0.len();
        let l = self.laplacian0();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in l.triplet_iter() {
            dense[(i, j)] += v / (self.star0[i] * self.star0[j]).sqrt();
        }
        let mut ev: Vec<f64> = nalgebra::linalg::SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev.truncate(k);
        ev
    }

    /// Real and imaginary parts of every matrix entry of a cochain as columns.
    pub(crate) fn split_columns(c: &MatrixCochain) -> DMatrix<f64> {
        let m = c.rank();
        let mut out = DMatrix::zeros(c.len(), 2 * m * m);
        for (i, v) in c.values().iter().enumerate() {
            for r in 0..m {
                for s in 0..m {
                    out[(i, 2 * (r * m + s))] = v[(r, s)].re;
                    out[(i, 2 * (r * m + s) + 1)] = v[(r, s)].im;
                }
            }
        }
        out
    }

    pub(crate) fn join_columns(cols: &DMatrix<f64>, degree: usize, m: usize) -> MatrixCochain {
        let values = (0..cols.nrows())
            .map(|i| {
                let mut v = ucalc::zeros(m);
                for r in 0..m {
                    for s in 0..m {
                        v[(r, s)] = C64::new(cols[(i, 2 * (r * m + s))], cols[(i, 2 * (r * m + s) + 1)]);
                    }
                }
                ucalc::anti_hermitian_part(&v)
            })
            .collect();
        MatrixCochain::from_values(degree, m, values)
    }
}

/// Cholesky solver for a connected graph Laplacian, made definite by pinning the
/// first unknown; solutions are returned with zero weighted mean.
#[derive(Debug, Clone)]
pub struct PinnedSolver {
    chol: CscCholesky<f64>,
    weights: Vec<f64>,
}

impl PinnedSolver {
    pub fn new(l: &CscMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = l.nrows();
        if n < 2 || weights.len() != n {
            return Err(GaugeError::InvalidComplex("Laplacian too small".into()));
        }
        let mut coo = CooMatrix::new(n - 1, n - 1);
        for (i, j, v) in l.triplet_iter() {
            if i > 0 && j > 0 {
                coo.push(i - 1, j - 1, *v);
            }
        }
        let chol = CscCholesky::factor(&CscMatrix::from(&coo)).map_err(|e| GaugeError::SolverFailure(format!("{e:?}")))?;
        Ok(PinnedSolver { chol, weights })
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    /// Solves L x = b for every column of b (columns must sum to zero).
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.weights.len();
        let rhs = b.rows(1, n - 1).into_owned();
        let y = self.chol.solve(&rhs);
        let mut x = DMatrix::zeros(n, b.ncols());
        x.rows_mut(1, n - 1).copy_from(&y);
        let wsum: f64 = self.weights.iter().sum();
        for c in 0..b.ncols() {
            let mean = x.column(c).iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() / wsum;
            for r in 0..n {
                x[(r, c)] -= mean;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GaugeError::SolverFailure("non-finite solution".into()));
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.solve(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(x.column(0).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Manifold;
    use rand::{Rng, SeedableRng};

    fn ops(level: usize) -> DecOperators {
        DecOperators::new(&SimplicialComplex::build(&Manifold::unit_sphere(), level).unwrap()).unwrap()
    }

    fn random(degree: usize, m: usize, n: usize, seed: u64) -> MatrixCochain {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        MatrixCochain::new(degree, m, (0..n).map(|_| ucalc::random_anti_hermitian(&mut rng, m)).collect()).unwrap()
    }

    #[test]
    fn dd_is_exactly_zero() {
        let d = ops(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // integer values keep the check exact
        let u = MatrixCochain::new(
            0,
            1,
            (0..d.star0().len()).map(|_| ucalc::scalar(C64::new(0.0, rng.gen_range(-50..50) as f64))).collect(),
        )
        .unwrap();
        let dd = d.d1(&d.d0(&u).unwrap()).unwrap();
        assert!(dd.values().iter().all(|v| v[(0, 0)] == C64::new(0.0, 0.0)));
        let r = random(0, 2, d.star0().len(), 4);
        assert!(d.d1(&d.d0(&r).unwrap()).unwrap().values().iter().all(|v| ucalc::max_abs(v) < 1e-14));
    }

    #[test]
    fn constants_are_closed() {
        let d = ops(2);
        let u = MatrixCochain::from_values(0, 1, vec![ucalc::scalar(C64::new(0.0, 2.5)); d.star0().len()]);
        assert!(d.d0(&u).unwrap().values().iter().all(|v| ucalc::max_abs(v) == 0.0));
    }

    #[test]
    fn first_eigenvalue_of_unit_sphere() {
        let ev = ops(3).laplacian_spectrum(5);
        assert!(ev[0].abs() < 1e-9);
        for mu in &ev[1..4] {
            assert!((mu - 2.0).abs() < 0.1, "{ev:?}");
        }
    }

    #[test]
    fn cup_wedge_matches_constant_forms() {
        // constant form A = X dx + Y dy on a flat patch: A^A = [X, Y] dx^dy
        let m = Manifold::torus(1.0, 1.0).unwrap();
        let d = DecOperators::new(&SimplicialComplex::build(&m, 1).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x = ucalc::random_anti_hermitian(&mut rng, 2);
        let y = ucalc::random_anti_hermitian(&mut rng, 2);
        let values = (0..d.mesh().edges().len())
            .map(|e| {
                let v = d.mesh().edge_vector(e);
                &x * C64::new(v[0], 0.0) + &y * C64::new(v[1], 0.0)
            })
            .collect();
        let a = MatrixCochain::new(1, 2, values).unwrap();
        let w = d.wedge(&a, &a).unwrap();
        let want = &x * &y - &y * &x;
        for (f, v) in w.values().iter().enumerate() {
            let pos = d.mesh().face_positions(f);
            let orient = ((pos[1] - pos[0]).xyz()).cross(&(pos[2] - pos[0]).xyz())[2].signum();
            let got = v * C64::new(orient / d.face_areas()[f], 0.0);
            assert!(ucalc::max_abs(&(got - &want)) < 1e-12);
        }
    }

    #[test]
    fn plaquette_agrees_with_cup_to_leading_order() {
        let d = ops(2);
        let a = random(1, 2, d.mesh().edges().len(), 5);
        let gap = |s: f64| {
            let x = a.scaled(s);
            let p = d.curvature_plaquette(&x).unwrap();
            let c = d.curvature_cup(&x).unwrap();
            p.distance(&c) / c.values().iter().map(ucalc::op_norm).fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(1e-2), gap(5e-3));
        assert!(g1 < 0.05);
        assert!(g1 / g2 > 1.8, "{g1} {g2}");
    }

    #[test]
    fn pinned_solver_inverts_the_laplacian() {
        let d = ops(2);
        let s = d.vertex_solver().unwrap();
        let l = d.laplacian0();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut b = DVector::from_fn(s.size(), |_, _| rng.gen_range(-1.0..1.0));
        let mean = b.mean();
        b.add_scalar_mut(-mean);
        let x = s.solve_vec(&b).unwrap();
        let lx = &l * &DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        assert!((lx.column(0) - &b).amax() < 1e-10);
    }
}
