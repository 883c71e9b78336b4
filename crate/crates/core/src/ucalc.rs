//! Calculus on unitary and anti-Hermitian matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GaugeError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;

pub const I: C64 = Complex64 { re: 0.0, im: 1.0 };

/// Radius of the logarithm domain, `2 sin(1/4)`.
pub fn log_domain_radius() -> f64 {
    2.0 * (0.25f64).sin()
}

pub fn identity(m: usize) -> CMat {
    CMat::identity(m, m)
}

pub fn zeros(m: usize) -> CMat {
    CMat::zeros(m, m)
}

pub fn scalar(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 && c == 1 {
        return m[(0, 0)].norm();
    }
    if r == 2 && c == 2 {
        // largest eigenvalue of the Hermitian 2x2 matrix M^*M
        let a = m[(0, 0)].norm_sqr() + m[(1, 0)].norm_sqr();
        let d = m[(0, 1)].norm_sqr() + m[(1, 1)].norm_sqr();
        let b = m[(0, 0)].conj() * m[(0, 1)] + m[(1, 0)].conj() * m[(1, 1)];
        let half = 0.5 * (a - d);
        let lam = 0.5 * (a + d) + (half * half + b.norm_sqr()).sqrt();
        return lam.max(0.0).sqrt();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Frobenius-free max-abs entry, used for cheap drift checks.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn anti_hermitian_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn unitarity_drift(u: &CMat) -> f64 {
    let m = u.nrows();
    op_norm(&(u.adjoint() * u - identity(m)))
}

/// Matrix exponential by scaling and squaring with a degree-6 diagonal Pade approximant.
pub fn expm(a: &CMat) -> CMat {
    let m = a.nrows();
    if m == 1 {
        return scalar(a[(0, 0)].exp());
    }
    let norm1 = (0..m)
        .map(|j| (0..m).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0i32;
    if norm1 > 0.5 {
        s = (norm1 / 0.5).log2().ceil() as i32;
    }
    let scaled = a * C64::new(0.5f64.powi(s), 0.0);
    // c_k = (2q-k)! q! / ((2q)! k! (q-k)!), q = 6
    const C: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let id = identity(m);
    let mut n = id.clone();
    let mut d = id.clone();
    let mut pow = id;
    for (k, c) in C.iter().enumerate().skip(1) {
        pow = &pow * &scaled;
        let term = &pow * C64::new(*c, 0.0);
        n += &term;
        if k % 2 == 0 {
            d += &term;
        } else {
            d -= &term;
        }
    }
    let mut x = d.lu().solve(&n).expect("Pade denominator is invertible for small norms");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// Polar projection onto the unitary group.
pub fn reunitarize(u: &CMat) -> CMat {
    let m = u.nrows();
    if m == 1 {
        let z = u[(0, 0)];
        return scalar(z / z.norm());
    }
    let h = u.adjoint() * u;
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let mut inv_sqrt = CMat::zeros(m, m);
    for k in 0..m {
        let v = eig.eigenvectors.column(k);
        let w = 1.0 / eig.eigenvalues[k].sqrt();
        inv_sqrt += v * v.adjoint() * C64::new(w, 0.0);
    }
    u * inv_sqrt
}

/// Keeps a product of unitaries on the group when rounding drift exceeds 1e-12.
pub fn keep_unitary(u: CMat) -> CMat {
    if unitarity_drift(&u) > 1e-12 {
        reunitarize(&u)
    } else {
        u
    }
}

/// Principal logarithm of a unitary close to the identity, via the Hermitian
/// eigendecomposition of (U - U^*)/(2i).
pub fn logm_unitary(u: &CMat) -> Result<CMat> {
    let m = u.nrows();
    let dist = op_norm(&(u - identity(m)));
    if dist >= log_domain_radius() {
        return Err(GaugeError::OutsideLogDomain(dist));
    }
    if m == 1 {
        let z = u[(0, 0)];
        return Ok(scalar(I * z.arg()));
    }
    let h = (u - u.adjoint()) * C64::new(0.0, -0.5);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let mut out = CMat::zeros(m, m);
    for k in 0..m {
        let v = eig.eigenvectors.column(k);
        let theta = eig.eigenvalues[k].clamp(-1.0, 1.0).asin();
        out += v * v.adjoint() * (I * theta);
    }
    Ok(anti_hermitian_part(&out))
}

/// Differential of exp at `a` applied to `e`, read off the block exponential
/// of [[a, e], [0, a]].
pub fn dexp(a: &CMat, e: &CMat) -> CMat {
    let m = a.nrows();
    if m == 1 {
        let z = a[(0, 0)];
        return scalar(z.exp() * e[(0, 0)]);
    }
    let mut big = CMat::zeros(2 * m, 2 * m);
    big.view_mut((0, 0), (m, m)).copy_from(a);
    big.view_mut((m, m), (m, m)).copy_from(a);
    big.view_mut((0, m), (m, m)).copy_from(e);
    let ex = expm(&big);
    ex.view((0, m), (m, m)).into_owned()
}

/// Solves dexp_a(x) = y for x by assembling the m^2 x m^2 linear map.
pub fn dexp_inverse(a: &CMat, y: &CMat) -> Result<CMat> {
    let m = a.nrows();
    if m == 1 {
        let z = a[(0, 0)];
        return Ok(scalar(y[(0, 0)] / z.exp()));
    }
    let n = m * m;
    let mut lin = CMat::zeros(n, n);
    for j in 0..n {
        let mut e = CMat::zeros(m, m);
        e[(j % m, j / m)] = C64::new(1.0, 0.0);
        let col = dexp(a, &e);
        for i in 0..n {
            lin[(i, j)] = col[(i % m, i / m)];
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n, (0..n).map(|i| y[(i % m, i / m)]));
    let sol = lin
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GaugeError::SolverFailure("singular dexp".into()))?;
    Ok(CMat::from_fn(m, m, |r, c| sol[r + c * m]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntiHermitian(CMat);

impl AntiHermitian {
    /// Symmetrizes the input; drift larger than 1e-8 (relative) is rejected.
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(GaugeError::NotAntiHermitian(f64::INFINITY));
        }
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let drift = op_norm(&herm);
        if drift > 1e-8 * op_norm(&m).max(1.0) {
            return Err(GaugeError::NotAntiHermitian(drift));
        }
        Ok(AntiHermitian(anti_hermitian_part(&m)))
    }

    pub fn zero(m: usize) -> Self {
        AntiHermitian(zeros(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMat);

impl Unitary {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(GaugeError::NotUnitary(f64::INFINITY));
        }
        let drift = unitarity_drift(&m);
        if drift > 1e-10 {
            return Err(GaugeError::NotUnitary(drift));
        }
        Ok(Unitary(keep_unitary(m)))
    }

    pub fn identity(m: usize) -> Self {
        Unitary(identity(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn inverse(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    pub fn compose(&self, other: &Unitary) -> Unitary {
        Unitary(keep_unitary(&self.0 * &other.0))
    }

    pub fn distance_to_identity(&self) -> f64 {
        op_norm(&(&self.0 - identity(self.dim())))
    }
}

pub fn u_exp(a: &AntiHermitian) -> Unitary {
    Unitary(keep_unitary(expm(a.matrix())))
}

pub fn u_log(u: &Unitary) -> Result<AntiHermitian> {
    logm_unitary(u.matrix()).map(AntiHermitian)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DexpReport {
    pub norm_a: f64,
    /// |d exp_A(E) e^{-A} - E| / |E|, measured by central differences
    pub deviation: f64,
    pub deviation_bound: f64,
    /// |E| / |d exp_A(E)|, a lower estimate of the inverse norm
    pub inverse_ratio: f64,
    pub inverse_bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Measures the differential of exp at `a` along `dir` and compares with
/// e^{|A|} - 1 and 1/(2 - e^{|A|}).
pub fn dexp_bounds_check(a: &AntiHermitian, dir: &AntiHermitian) -> Result<DexpReport> {
    let na = a.norm();
    if na >= 0.5 {
        return Err(GaugeError::PreconditionViolated(format!(
            "|A| = {na} must be below 1/2"
        )));
    }
    let h = 1e-5;
    let e = dir.matrix();
    let ne = op_norm(e);
    if ne == 0.0 {
        return Err(GaugeError::PreconditionViolated("zero direction".into()));
    }
    let plus = expm(&(a.matrix() + e * C64::new(h, 0.0)));
    let minus = expm(&(a.matrix() - e * C64::new(h, 0.0)));
    let d = (plus - minus) * C64::new(0.5 / h, 0.0);
    // left-trivialized differential so that dexp_0 = Id
    let ea_inv = expm(&(-a.matrix()));
    let dl = &d * ea_inv;
    let deviation = op_norm(&(&dl - e)) / ne;
    let inverse_ratio = ne / op_norm(&dl);
    let deviation_bound = na.exp() - 1.0;
    let inverse_bound = 1.0 / (2.0 - na.exp());
    let slack = 1e-4;
    let holds = deviation <= deviation_bound + slack && inverse_ratio <= inverse_bound + slack;
    Ok(DexpReport {
        norm_a: na,
        deviation,
        deviation_bound,
        inverse_ratio,
        inverse_bound,
        slack,
        holds,
    })
}

/// Random anti-Hermitian matrix with entries of order one.
pub fn random_anti_hermitian<R: rand::Rng + ?Sized>(rng: &mut R, m: usize) -> CMat {
    let g = CMat::from_fn(m, m, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    anti_hermitian_part(&g)
}

pub fn traceless(a: &CMat) -> CMat {
    let m = a.nrows();
    let tr = a.trace() / C64::new(m as f64, 0.0);
    a - identity(m) * tr
}

/// Haar-ish random unitary via QR of a complex Gaussian-like matrix.
pub fn random_unitary<R: rand::Rng + ?Sized>(rng: &mut R, m: usize) -> CMat {
    let a = random_anti_hermitian(rng, m) * C64::new(3.0, 0.0);
    keep_unitary(expm(&a))
}

/// max over unit c of |sum c_k M_k|_op.
pub fn max_op_norm_on_sphere(mats: &[CMat]) -> f64 {
    match mats.len() {
        0 => 0.0,
        1 => op_norm(&mats[0]),
        k => {
            if mats[0].nrows() == 1 {
                // |sum c_k z_k|^2 = c^T G c with G_kl = Re(z_k conj z_l)
                let z: Vec<C64> = mats.iter().map(|m| m[(0, 0)]).collect();
                let g = nalgebra::DMatrix::<f64>::from_fn(k, k, |i, j| (z[i] * z[j].conj()).re);
                let eig = nalgebra::linalg::SymmetricEigen::new(g);
                return eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt();
            }
            let f = |c: &[f64]| -> f64 {
                let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut acc = CMat::zeros(mats[0].nrows(), mats[0].ncols());
                for (ck, mk) in c.iter().zip(mats) {
                    acc += mk * C64::new(*ck / norm, 0.0);
                }
                op_norm(&acc)
            };
            if k == 2 {
                max_on_circle(|t| f(&[t.cos(), t.sin()]))
            } else {
                max_on_sphere_nd(&f, k)
            }
        }
    }
}

fn max_on_circle(f: impl Fn(f64) -> f64) -> f64 {
    let n = 48;
    let step = std::f64::consts::PI / n as f64;
    let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * step)).collect();
    let (imax, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let t0 = imax as f64 * step;
    golden_max(&f, t0 - step, t0 + step, 1e-10).max(vals[imax])
}

pub(crate) fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

fn max_on_sphere_nd(f: &impl Fn(&[f64]) -> f64, k: usize) -> f64 {
    // deterministic quasi-random start set followed by a shrinking pattern search
    let n = 64 * k;
    let mut best = vec![0.0; k];
    best[0] = 1.0;
    let mut best_val = f(&best);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    for i in 0..n {
        let mut c = vec![0.0; k];
        for (d, cd) in c.iter_mut().enumerate() {
            let u = ((i as f64 + 0.5) * golden * (d as f64 + 1.0).sqrt()).fract();
            *cd = 2.0 * u - 1.0;
        }
        if c.iter().all(|x| x.abs() < 1e-12) {
            continue;
        }
        let v = f(&c);
        if v > best_val {
            best_val = v;
            best = c;
        }
    }
    let norm = best.iter().map(|x| x * x).sum::<f64>().sqrt();
    best.iter_mut().for_each(|x| *x /= norm);
    let mut step = 0.2;
    while step > 1e-9 {
        let mut improved = false;
        for d in 0..k {
            for sgn in [1.0, -1.0] {
                let mut c = best.clone();
                c[d] += sgn * step;
                let v = f(&c);
                if v > best_val {
                    best_val = v;
                    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                    best = c.iter().map(|x| x / norm).collect();
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best_val
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm(&zeros(3)), 0.0);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![I * 0.5, -I * 0.5]));
        assert!((op_norm(&d) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn op_norm_matches_sampling_oracle() {
        let mut r = rng(1);
        for _ in 0..5 {
            let m = CMat::from_fn(3, 3, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
            let mut best: f64 = 0.0;
            // coarse random sampling followed by power iteration from the best sample
            for _ in 0..4000 {
                let v = nalgebra::DVector::from_fn(3, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)));
                let v = &v / C64::new(v.norm(), 0.0);
                best = best.max((&m * &v).norm());
            }
            let mut v = nalgebra::DVector::from_element(3, C64::new(1.0, 0.3));
            for _ in 0..500 {
                let w = m.adjoint() * (&m * &v);
                v = &w / C64::new(w.norm(), 0.0);
            }
            best = best.max((&m * &v).norm());
            assert!((best - op_norm(&m)).abs() < 1e-6, "{best} vs {}", op_norm(&m));
        }
    }

    #[test]
    fn two_by_two_closed_form_agrees_with_svd() {
        let mut r = rng(2);
        for _ in 0..100 {
            let m = CMat::from_fn(2, 2, |_, _| C64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)));
            let svd = m.clone().svd(false, false).singular_values.max();
            assert!((op_norm(&m) - svd).abs() <= 1e-12 * svd.max(1.0));
        }
    }

    #[test]
    fn exp_examples() {
        let z = u_exp(&AntiHermitian::zero(2));
        assert!(op_norm(&(z.matrix() - identity(2))) < 1e-15);
        let a = AntiHermitian::new(scalar(I * std::f64::consts::PI)).unwrap();
        assert!((u_exp(&a).matrix()[(0, 0)] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn exp_matches_eigen_route() {
        let mut r = rng(3);
        for _ in 0..50 {
            let a = random_anti_hermitian(&mut r, 3) * C64::new(2.0, 0.0);
            // exp(A) = V exp(i D) V^* with iA Hermitian
            let h = &a * C64::new(0.0, -1.0);
            let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
            let eig = nalgebra::linalg::SymmetricEigen::new(h);
            let mut want = zeros(3);
            for k in 0..3 {
                let v = eig.eigenvectors.column(k);
                want += v * v.adjoint() * (I * eig.eigenvalues[k]).exp();
            }
            assert!(op_norm(&(expm(&a) - want)) < 1e-12);
        }
    }

    #[test]
    fn log_examples() {
        let l = u_log(&Unitary::identity(2)).unwrap();
        assert!(l.norm() < 1e-15);
        let u = Unitary::new(scalar((I * 0.3).exp())).unwrap();
        assert!((u_log(&u).unwrap().matrix()[(0, 0)] - I * 0.3).norm() < 1e-14);
        let far = Unitary::new(scalar((I * 0.6).exp())).unwrap();
        assert!(matches!(u_log(&far), Err(GaugeError::OutsideLogDomain(_))));
    }

    #[test]
    fn anti_hermitian_rejects_drift() {
        let m = scalar(C64::new(1e-3, 1.0));
        assert!(matches!(AntiHermitian::new(m), Err(GaugeError::NotAntiHermitian(_))));
        let ok = scalar(C64::new(1e-12, 1.0));
        assert_eq!(AntiHermitian::new(ok).unwrap().matrix()[(0, 0)].re, 0.0);
    }

    #[test]
    fn dexp_examples() {
        let e = AntiHermitian::new(random_anti_hermitian(&mut rng(4), 2)).unwrap();
        let rep = dexp_bounds_check(&AntiHermitian::zero(2), &e).unwrap();
        assert!(rep.deviation < 1e-9);
        let mut r = rng(5);
        let a = random_anti_hermitian(&mut r, 2);
        let a = &a * C64::new(0.4 / op_norm(&a), 0.0);
        let rep = dexp_bounds_check(&AntiHermitian::new(a).unwrap(), &e).unwrap();
        assert!((rep.deviation_bound - 0.491_824_697_641_270_3).abs() < 1e-12);
        assert!((rep.inverse_bound - 1.967_824_873).abs() < 1e-8);
        assert!(rep.holds);
        let big = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![I * 0.5, -I * 0.1]));
        let big = AntiHermitian::new(big).unwrap();
        assert!(matches!(dexp_bounds_check(&big, &e), Err(GaugeError::PreconditionViolated(_))));
    }

    #[test]
    fn dexp_block_formula_matches_finite_differences() {
        let mut r = rng(6);
        let a = random_anti_hermitian(&mut r, 2);
        let e = random_anti_hermitian(&mut r, 2);
        let h = 1e-6;
        let fd = (expm(&(&a + &e * C64::new(h, 0.0))) - expm(&(&a - &e * C64::new(h, 0.0))))
            * C64::new(0.5 / h, 0.0);
        assert!(op_norm(&(fd - dexp(&a, &e))) < 1e-8);
        let x = dexp_inverse(&a, &dexp(&a, &e)).unwrap();
        assert!(op_norm(&(x - e)) < 1e-12);
    }

    #[test]
    fn reunitarize_restores_group() {
        let mut r = rng(7);
        let u = random_unitary(&mut r, 3);
        let noisy = &u + CMat::from_element(3, 3, C64::new(1e-9, 0.0));
        let p = reunitarize(&noisy);
        assert!(unitarity_drift(&p) < 1e-14);
        assert!(op_norm(&(p - u)) < 1e-8);
    }

    #[test]
    fn sphere_max_for_pauli_like_family() {
        // i sigma_x, i sigma_y, i sigma_z: every unit combination has norm 1
        let sx = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), I, I, C64::new(0.0, 0.0)]);
        let sy = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0)]);
        let sz = CMat::from_row_slice(2, 2, &[I, C64::new(0.0, 0.0), C64::new(0.0, 0.0), -I]);
        let v = max_op_norm_on_sphere(&[sx.clone(), sy.clone() * C64::new(2.0, 0.0), sz]);
        assert!((v - 2.0).abs() < 1e-8);
        let v2 = max_op_norm_on_sphere(&[sx, sy]);
        assert!((v2 - 1.0).abs() < 1e-9);
    }
}
