use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::make_monopole;
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, Point, SimplicialComplex};

// 8-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536,
    -0.796_666_477_413_627,
    -0.525_532_409_916_329,
    -0.183_434_642_495_650,
    0.183_434_642_495_650,
    0.525_532_409_916_329,
    0.796_666_477_413_627,
    0.960_289_856_497_536,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376,
    0.222_381_034_453_374,
    0.313_706_645_877_887,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887,
    0.222_381_034_453_374,
    0.101_228_536_290_376,
];

/// Integral of a 1-form f(x, x') along the great-circle arc p -> q.
fn arc_integral(p: &Vector3<f64>, q: &Vector3<f64>, f: impl Fn(&Vector3<f64>, &Vector3<f64>) -> f64) -> f64 {
    let omega = p.dot(q).clamp(-1.0, 1.0).acos();
    if omega < 1e-15 {
        return 0.0;
    }
    let s = omega.sin();
    let panels = 4;
    let mut acc = 0.0;
    for k in 0..panels {
        for (x, w) in GL_X.iter().zip(GL_W) {
            let t = (k as f64 + 0.5 * (x + 1.0)) / panels as f64;
            let a = ((1.0 - t) * omega).sin() / s;
            let b = (t * omega).sin() / s;
            let da = -omega * ((1.0 - t) * omega).cos() / s;
            let db = omega * (t * omega).cos() / s;
            acc += 0.5 * w / panels as f64 * f(&(p * a + q * b), &(p * da + q * db));
        }
    }
    acc
}

/// Principal representative in (-pi, pi].
fn wrap(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Spherical triangle area (Van Oosterom-Strackee).
fn spherical_area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// U(1) lattice connection on a rotated icosphere: the link angle theta_e
/// stands for the edge integral A_e = -i theta_e, the face flux is
/// F_f = (d theta)_f + 2 pi n_f with integer n_f, and c1 = sum_f n_f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeMonopole {
    pub level: usize,
    pub vertices: Vec<[f64; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub face_edges: Vec<[(usize, f64); 3]>,
    /// Spherical face areas; they sum to 4 pi.
    pub areas: Vec<f64>,
    pub links: Vec<f64>,
    pub windings: Vec<i64>,
}

impl LatticeMonopole {
    /// Link angles of monopole(k), integrated along great-circle edges.
    pub fn from_monopole(k: i64, level: usize) -> Result<Self> {
        let mesh = SimplicialComplex::build(&Manifold::unit_sphere(), level)?;
        // tilt the mesh so that no vertex sits on a pole of the monopole charts
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(1.0, 2.0, 3.0)), 0.7);
        let vertices: Vec<Vector3<f64>> = mesh.vertices().iter().map(|v| rot * v.xyz().normalize()).collect();
        let b = make_monopole(k);
        let form = |chart: usize, x: &Vector3<f64>, v: &Vector3<f64>| {
            b.form(chart, &Point::new(x[0], x[1], x[2], 0.0), &Point::new(v[0], v[1], v[2], 0.0))[(0, 0)].im
        };
        let links = mesh
            .edges()
            .iter()
            .map(|[p, q]| {
                let (a, c) = (&vertices[*p], &vertices[*q]);
                if a[2] + c[2] >= 0.0 {
                    -arc_integral(a, c, |x, v| form(0, x, v))
                } else {
                    // south chart plus the transition k dphi; only defined mod 2 pi
                    let dphi = c[1].atan2(c[0]) - a[1].atan2(a[0]);
                    -arc_integral(a, c, |x, v| form(1, x, v)) + k as f64 * dphi
                }
            })
            .collect();
        let areas = mesh
            .faces()
            .iter()
            .map(|f| spherical_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
            .collect();
        let mut lat = LatticeMonopole {
            level,
            vertices: vertices.iter().map(|v| [v[0], v[1], v[2]]).collect(),
            edges: mesh.edges().to_vec(),
            face_edges: mesh.face_edges().to_vec(),
            areas,
            links,
            windings: Vec::new(),
        };
        lat.rewind();
        Ok(lat)
    }

    fn circulation(&self, f: usize) -> f64 {
        self.face_edges[f].iter().map(|(e, s)| s * self.links[*e]).sum()
    }

    /// Chooses n_f so that every flux lies in (-pi, pi].
    fn rewind(&mut self) {
        self.windings = (0..self.areas.len())
            .map(|f| {
                let c = self.circulation(f);
                ((wrap(c) - c) / (2.0 * PI)).round() as i64
            })
            .collect();
    }

    pub fn fluxes(&self) -> Vec<f64> {
        (0..self.areas.len()).map(|f| self.circulation(f) + 2.0 * PI * self.windings[f] as f64).collect()
    }

    /// max_f |F_f| / area_f
    pub fn comass(&self) -> f64 {
        self.fluxes().iter().zip(&self.areas).map(|(f, a)| f.abs() / a).fold(0.0, f64::max)
    }

    pub fn c1(&self) -> i64 {
        self.windings.iter().sum()
    }

    /// Adds the edge integrals of a random polynomial 1-form of the given size and a
    /// random gauge change; the Chern number must survive the rewinding.
    pub fn warp(&mut self, seed: u64, amplitude: f64) -> Result<()> {
        let before = self.c1();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // omega = sum_j p_j(x) dx_j with p_j of degree <= 2
        let coef: Vec<[f64; 10]> = (0..3).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let poly = |c: &[f64; 10], x: &Vector3<f64>| {
            c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2] + c[4] * x[0] * x[0] + c[5] * x[1] * x[1]
                + c[6] * x[2] * x[2] + c[7] * x[0] * x[1] + c[8] * x[1] * x[2] + c[9] * x[0] * x[2]
        };
        let chi: Vec<f64> = self.vertices.iter().map(|_| rng.gen_range(-PI..PI)).collect();
        let verts: Vec<Vector3<f64>> = self.vertices.iter().map(|v| Vector3::from(*v)).collect();
        for (e, [p, q]) in self.edges.iter().enumerate() {
            let w = arc_integral(&verts[*p], &verts[*q], |x, v| (0..3).map(|j| poly(&coef[j], x) * v[j]).sum());
            self.links[e] += amplitude * w + chi[*q] - chi[*p];
        }
        self.rewind();
        if self.c1() != before {
            return Err(GaugeError::PreconditionViolated(format!(
                "warp of size {amplitude} changed c1 from {before} to {}",
                self.c1()
            )));
        }
        Ok(())
    }

    /// E = sum_f F_f^2 / area_f and its gradient in the link angles.
    fn energy(&self) -> (f64, Vec<f64>) {
        let flux = self.fluxes();
        let mut grad = vec![0.0; self.links.len()];
        let mut e = 0.0;
        for (f, fe) in self.face_edges.iter().enumerate() {
            let rho = flux[f] / self.areas[f];
            e += flux[f] * rho;
            for (edge, s) in fe {
                grad[*edge] += 2.0 * s * rho;
            }
        }
        (e, grad)
    }

    /// Hessian of E applied to a link direction.
    fn hessian_apply(&self, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; d.len()];
        for (f, fe) in self.face_edges.iter().enumerate() {
            let c: f64 = fe.iter().map(|(e, s)| s * d[*e]).sum::<f64>() / self.areas[f];
            for (e, s) in fe {
                out[*e] += 2.0 * s * c;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub start_comass: f64,
    pub comass: f64,
    pub c1: i64,
    pub iterations: usize,
    pub start_energy: f64,
    pub energy: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nonlinear conjugate gradients (Polak-Ribiere+, exact line search) on the
/// flux energy at fixed windings. Its minimizer has constant flux density,
/// which also minimizes the comass at fixed c1.
pub fn minimize_lattice_comass(lat: &mut LatticeMonopole, max_iterations: usize, tolerance: f64) -> Result<MinimizeOutcome> {
    if lat.c1() == 0 {
        return Err(GaugeError::PreconditionViolated("minimization needs c1 != 0".into()));
    }
    let start_comass = lat.comass();
    let (start_energy, mut g) = lat.energy();
    let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut iterations = 0;
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    while norm(&g) > tolerance {
        if iterations == max_iterations {
            return Err(GaugeError::OptimizerStalled { best: lat.comass() });
        }
        let hd = lat.hessian_apply(&d);
        let curv = dot(&d, &hd);
        if !(curv > 0.0) {
            return Err(GaugeError::OptimizerStalled { best: lat.comass() });
        }
        let alpha = -dot(&g, &d) / curv;
        for (l, di) in lat.links.iter_mut().zip(&d) {
            *l += alpha * di;
        }
        let (_, g_new) = lat.energy();
        let diff: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let beta = (dot(&g_new, &diff) / dot(&g, &g)).max(0.0);
        for (di, gi) in d.iter_mut().zip(&g_new) {
            *di = -gi + beta * *di;
        }
        g = g_new;
        iterations += 1;
    }
    let (energy, _) = lat.energy();
    Ok(MinimizeOutcome { start_comass, comass: lat.comass(), c1: lat.c1(), iterations, start_energy, energy })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monopole_links_have_the_right_flux() {
        for k in [1i64, -2] {
            let lat = LatticeMonopole::from_monopole(k, 2).unwrap();
            assert_eq!(lat.c1(), k);
            assert!((lat.areas.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
            // constant density k/2 up to quadrature error
            for (f, a) in lat.fluxes().iter().zip(&lat.areas) {
                assert!((f / a - 0.5 * k as f64).abs() < 1e-6, "{}", f / a);
            }
        }
    }

    #[test]
    fn warped_start_relaxes_to_half_k() {
        let mut lat = LatticeMonopole::from_monopole(1, 2).unwrap();
        lat.warp(3, 0.3).unwrap();
        assert!(lat.comass() > 0.6);
        let out = minimize_lattice_comass(&mut lat, 5000, 1e-10).unwrap();
        assert_eq!(out.c1, 1);
        assert!((out.comass - 0.5).abs() < 1e-8, "{out:?}");
        let again = minimize_lattice_comass(&mut lat, 5000, 1e-10).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn zero_degree_is_rejected() {
        let mut lat = LatticeMonopole::from_monopole(0, 1).unwrap();
        assert!(matches!(minimize_lattice_comass(&mut lat, 10, 1e-10), Err(GaugeError::PreconditionViolated(_))));
    }
}
