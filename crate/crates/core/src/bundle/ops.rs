use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BundleAtlas, ConnectionModel, Recipe};
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::ucalc::{self, CMat, C64};
use crate::util::{smooth_step, smooth_step_derivative};

// ---------------------------------------------------------------- perturbation

#[derive(Debug, Clone)]
struct Mode {
    xi: Vector4<f64>,
    phase: f64,
    /// coefficient matrix per ambient axis
    coeffs: [CMat; 4],
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    center: Vector3<f64>,
    full: f64,
    zero: f64,
}

impl Bump {
    fn angle(&self, x: &Point) -> f64 {
        let u = x.xyz();
        u.cross(&self.center).norm().atan2(u.dot(&self.center))
    }

    fn value(&self, x: &Point) -> f64 {
        if x.xyz().norm() == 0.0 {
            return 0.0;
        }
        smooth_step((self.zero - self.angle(x)) / (self.zero - self.full))
    }

    /// Ambient directional derivative of the bump.
    fn derivative(&self, x: &Point, v: &Tangent) -> f64 {
        let theta = self.angle(x);
        let s = smooth_step_derivative((self.zero - theta) / (self.zero - self.full));
        if s == 0.0 {
            return 0.0;
        }
        let p = x.xyz();
        let n = p.norm();
        let u = p / n;
        let vt = v.xyz() - u * u.dot(&v.xyz());
        let dtheta = -self.center.dot(&vt) / (n * theta.sin());
        -s * dtheta / (self.zero - self.full)
    }
}

#[derive(Debug)]
pub(crate) struct PerturbedModel {
    inner: BundleAtlas,
    modes: Vec<Mode>,
    scale: f64,
    bump: Option<Bump>,
}

impl PerturbedModel {
    fn raw(&self, x: &Point, v: &Tangent) -> CMat {
        let m = self.inner.rank();
        let mut acc = ucalc::zeros(m);
        for mode in &self.modes {
            let s = (mode.xi.dot(x) + mode.phase).sin();
            for a in 0..4 {
                if v[a] != 0.0 {
                    acc += &mode.coeffs[a] * C64::new(s * v[a], 0.0);
                }
            }
        }
        acc
    }

    /// The added form in chart 0 coordinates, conjugated into `chart`.
    fn omega(&self, chart: usize, x: &Point, v: &Tangent) -> CMat {
        let mut w = self.raw(x, v) * C64::new(self.scale, 0.0);
        if let Some(b) = &self.bump {
            let f = b.value(x);
            if f == 0.0 {
                return ucalc::zeros(self.inner.rank());
            }
            w *= C64::new(f, 0.0);
            if chart != 0 {
                w = self.inner.transition(chart, 0, x) * w * self.inner.transition(0, chart, x);
            }
        }
        w
    }

    fn d_omega(&self, x: &Point, v: &Tangent, w: &Tangent) -> CMat {
        let m = self.inner.rank();
        let mut acc = ucalc::zeros(m);
        for mode in &self.modes {
            let c = (mode.xi.dot(x) + mode.phase).cos();
            let (xv, xw) = (mode.xi.dot(v), mode.xi.dot(w));
            for a in 0..4 {
                let k = c * (xv * w[a] - xw * v[a]);
                if k != 0.0 {
                    acc += &mode.coeffs[a] * C64::new(k, 0.0);
                }
            }
        }
        acc * C64::new(self.scale, 0.0)
    }
}

impl ConnectionModel for PerturbedModel {
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn form(&self, chart: usize, x: &Point, v: &Tangent) -> CMat {
        self.inner.form(chart, x, v) + self.omega(chart, x, v)
    }

    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        self.inner.transition(i, j, x)
    }

    fn curvature(&self, chart: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let comm = |a: &CMat, b: &CMat| a * b - b * a;
        let (c, b, db) = match &self.bump {
            None => (chart, 1.0, (0.0, 0.0)),
            Some(bump) => {
                let b = bump.value(x);
                if b == 0.0 {
                    return self.inner.model().curvature(chart, x, v, w);
                }
                (0, b, (bump.derivative(x, v), bump.derivative(x, w)))
            }
        };
        let r = self.inner.model().curvature(c, x, v, w)?;
        let (av, aw) = (self.inner.form(c, x, v), self.inner.form(c, x, w));
        let (ov, ow) = (self.omega(c, x, v), self.omega(c, x, w));
        let t = C64::new(self.scale, 0.0);
        let d_omega = self.d_omega(x, v, w) * C64::new(b, 0.0)
            + (self.raw(x, w) * C64::new(db.0, 0.0) - self.raw(x, v) * C64::new(db.1, 0.0)) * t;
        let r0 = r + d_omega + comm(&av, &ow) + comm(&ov, &aw) + comm(&ov, &ow);
        if c == chart {
            Some(r0)
        } else {
            Some(self.inner.transition(chart, 0, x) * r0 * self.inner.transition(0, chart, x))
        }
    }

    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        self.inner.deck(x, shift)
    }
}

fn active_axes(m: &Manifold) -> Vec<usize> {
    match m {
        Manifold::Circle { .. } => vec![0],
        Manifold::EuclideanBall { dimension, .. } => (0..*dimension).collect(),
        Manifold::RoundSphere2 { .. } => vec![0, 1, 2],
        Manifold::FlatTorus2 { .. } => vec![0, 1],
        Manifold::ProductWithCircle { base, .. } => {
            let mut a = active_axes(base);
            a.push(3);
            a
        }
    }
}

fn random_frequency(m: &Manifold, rng: &mut ChaCha8Rng) -> Vector4<f64> {
    let random_dir = |rng: &mut ChaCha8Rng, d: usize| loop {
        let mut v = Vector4::zeros();
        for k in 0..d {
            v[k] = rng.gen_range(-1.0..1.0);
        }
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            break v / n;
        }
    };
    match m {
        Manifold::RoundSphere2 { radius } => random_dir(rng, 3) * (rng.gen_range(0.5..2.0) / radius),
        Manifold::EuclideanBall { dimension, radius } => {
            random_dir(rng, *dimension) * (rng.gen_range(0.5..2.0) / radius.max(1.0))
        }
        Manifold::FlatTorus2 { periods } => loop {
            let n1 = rng.gen_range(-2i32..=2);
            let n2 = rng.gen_range(-2i32..=2);
            if n1 != 0 || n2 != 0 {
                break Vector4::new(2.0 * PI * n1 as f64 / periods[0], 2.0 * PI * n2 as f64 / periods[1], 0.0, 0.0);
            }
        },
        Manifold::Circle { length } => Vector4::new(2.0 * PI * rng.gen_range(1..=2) as f64 / length, 0.0, 0.0, 0.0),
        Manifold::ProductWithCircle { base, length } => {
            let mut xi = random_frequency(base, rng);
            xi[3] = 2.0 * PI * rng.gen_range(-1i32..=1) as f64 / length;
            xi
        }
    }
}

fn scaling_resolution(m: &Manifold) -> usize {
    match m {
        Manifold::RoundSphere2 { .. } => 3,
        Manifold::FlatTorus2 { .. } => 4,
        Manifold::Circle { .. } => 32,
        Manifold::EuclideanBall { .. } => 3,
        Manifold::ProductWithCircle { .. } => 2,
    }
}

fn has_nontrivial_transitions(b: &BundleAtlas) -> bool {
    if b.charts().len() < 2 {
        return false;
    }
    let id = ucalc::identity(b.rank());
    b.base().sample_frames(2).iter().any(|s| {
        let x = &s.point;
        b.base().chart_depth(&b.charts()[0], x) > 0.0
            && b.base().chart_depth(&b.charts()[1], x) > 0.0
            && ucalc::op_norm(&(b.transition(0, 1, x) - &id)) > 1e-12
    })
}

/// Sampled comass of R_{A + omega} - R_A.
fn added_comass(model: &PerturbedModel, base: &Manifold, res: usize) -> Result<f64> {
    let perturbed = BundleAtlas::new(base.clone(), Arc::new(model.clone_with_scale(model.scale)), None);
    let mut best: f64 = 0.0;
    for s in base.sample_frames(res) {
        let x = &s.point;
        let c = perturbed.chart_for(x)?;
        let d = |i: usize, j: usize| -> Result<CMat> {
            let r1 = perturbed.curvature_in(c, x, &s.frame[i], &s.frame[j])?.matrix;
            let r0 = model.inner.curvature_in(c, x, &s.frame[i], &s.frame[j])?.matrix;
            Ok(r1 - r0)
        };
        let v = match s.frame.len() {
            1 => 0.0,
            2 => ucalc::op_norm(&d(0, 1)?),
            _ => ucalc::max_op_norm_on_sphere(&[d(1, 2)?, d(2, 0)?, d(0, 1)?]),
        };
        best = best.max(v);
    }
    Ok(best)
}

impl PerturbedModel {
    fn clone_with_scale(&self, scale: f64) -> PerturbedModel {
        PerturbedModel { inner: self.inner.clone(), modes: self.modes.clone(), scale, bump: self.bump }
    }
}

/// Adds a smooth band-limited random anti-Hermitian 1-form whose added
/// curvature comass is (sampled) at most `amplitude`.  Deterministic in `seed`.
pub fn perturb(b: &BundleAtlas, seed: u64, amplitude: f64) -> Result<BundleAtlas> {
    if !(amplitude >= 0.0) {
        return Err(GaugeError::PreconditionViolated("amplitude must be nonnegative".into()));
    }
    if amplitude == 0.0 {
        return Ok(b.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = b.rank();
    let axes = active_axes(b.base());
    let modes: Vec<Mode> = (0..6)
        .map(|_| {
            let xi = random_frequency(b.base(), &mut rng);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let coeffs = std::array::from_fn(|a| {
                if axes.contains(&a) {
                    let h = ucalc::random_anti_hermitian(&mut rng, m);
                    if m > 1 {
                        ucalc::traceless(&h)
                    } else {
                        h
                    }
                } else {
                    ucalc::zeros(m)
                }
            });
            Mode { xi, phase, coeffs }
        })
        .collect();
    let bump = if m > 1 && has_nontrivial_transitions(b) {
        let c = b.charts()[0].center.xyz().normalize();
        let r = b.charts()[0].radius / b.base().sphere_radius().unwrap_or(1.0);
        Some(Bump { center: c, full: 0.5 * r, zero: r - 0.15 })
    } else {
        None
    };
    let mut model = PerturbedModel { inner: b.clone(), modes, scale: 1.0, bump };
    let res = scaling_resolution(b.base());
    let target = 0.9 * amplitude;
    let m1 = added_comass(&model, b.base(), res)?;
    if m1 == 0.0 {
        return Ok(b.clone());
    }
    let mut t = target / m1;
    for _ in 0..6 {
        model.scale = t;
        let mt = added_comass(&model, b.base(), res)?;
        if mt == 0.0 || (mt - target).abs() < 1e-3 * target {
            break;
        }
        t *= target / mt;
    }
    model.scale = t;
    while added_comass(&model, b.base(), res)? > 0.95 * amplitude {
        model.scale *= 0.95;
    }
    let recipe = b.recipe().map(|r| Recipe::Perturb { inner: Box::new(r.clone()), seed, amplitude });
    Ok(BundleAtlas::new(b.base().clone(), Arc::new(model), recipe))
}

// ------------------------------------------------------------------ direct sum

fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = ucalc::zeros(m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

#[derive(Debug)]
struct DirectSumModel {
    a: BundleAtlas,
    b: BundleAtlas,
}

impl ConnectionModel for DirectSumModel {
    fn rank(&self) -> usize {
        self.a.rank() + self.b.rank()
    }
    fn form(&self, c: usize, x: &Point, v: &Tangent) -> CMat {
        block_diag(&self.a.form(c, x, v), &self.b.form(c, x, v))
    }
    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        block_diag(&self.a.transition(i, j, x), &self.b.transition(i, j, x))
    }
    fn curvature(&self, c: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let ra = self.a.model().curvature(c, x, v, w)?;
        let rb = self.b.model().curvature(c, x, v, w)?;
        Some(block_diag(&ra, &rb))
    }
    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        block_diag(&self.a.deck(x, shift), &self.b.deck(x, shift))
    }
}

pub fn direct_sum(a: &BundleAtlas, b: &BundleAtlas) -> Result<BundleAtlas> {
    if a.base() != b.base() {
        return Err(GaugeError::BaseMismatch);
    }
    let recipe = match (a.recipe(), b.recipe()) {
        (Some(x), Some(y)) => Some(Recipe::DirectSum { a: Box::new(x.clone()), b: Box::new(y.clone()) }),
        _ => None,
    };
    Ok(BundleAtlas::new(
        a.base().clone(),
        Arc::new(DirectSumModel { a: a.clone(), b: b.clone() }),
        recipe,
    ))
}

// -------------------------------------------------------------------- pullback

/// Built-in smooth maps between model manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum SmoothMap {
    Identity,
    /// M x S1 -> M
    ProjectToBase,
    /// M x S1 -> S1
    ProjectToCircle,
    /// M -> M x S1, p -> (p, t)
    IncludeSlice { t: f64 },
    /// S1 -> M x S1, t -> (point, t)
    IncludeFiber { point: [f64; 3] },
    /// S2 -> S2 collapsing the cap of angular radius `inner` around `center` to the
    /// center, followed by a C^1 ramp of width `ramp` into a linear radial profile.
    RadialCollapse { center: [f64; 3], inner: f64, ramp: f64 },
    /// Lifted torus or circle with periods d*L -> periods L, identity in lifted coordinates.
    Cover { degree: usize },
}

impl SmoothMap {
    /// Target manifold for the given source, or UnsupportedMap.
    pub fn target(&self, source: &Manifold) -> Result<Manifold> {
        let bad = || GaugeError::UnsupportedMap(format!("{self:?} on {}", source.name()));
        match (self, source) {
            (SmoothMap::Identity, m) => Ok(m.clone()),
            (SmoothMap::ProjectToBase, Manifold::ProductWithCircle { base, .. }) => Ok((**base).clone()),
            (SmoothMap::ProjectToCircle, Manifold::ProductWithCircle { length, .. }) => Manifold::circle(*length),
            (SmoothMap::RadialCollapse { inner, ramp, .. }, Manifold::RoundSphere2 { .. }) => {
                if *inner < 0.0 || *ramp <= 0.0 || inner + ramp >= PI {
                    return Err(bad());
                }
                Ok(source.clone())
            }
            (SmoothMap::Cover { degree }, Manifold::Circle { length }) if *degree >= 1 => {
                Manifold::circle(length / *degree as f64)
            }
            (SmoothMap::Cover { degree }, Manifold::FlatTorus2 { periods }) if *degree >= 1 => {
                Manifold::torus(periods[0] / *degree as f64, periods[1] / *degree as f64)
            }
            _ => Err(bad()),
        }
    }

    /// Target for maps whose target is not determined by the source alone.
    pub fn target_with(&self, source: &Manifold, target: &Manifold) -> Result<Manifold> {
        match (self, source, target) {
            (SmoothMap::IncludeSlice { .. }, s, Manifold::ProductWithCircle { base, .. }) if **base == *s => {
                Ok(target.clone())
            }
            (SmoothMap::IncludeFiber { .. }, Manifold::Circle { length }, Manifold::ProductWithCircle { length: l, .. })
                if (length - l).abs() < 1e-12 =>
            {
                Ok(target.clone())
            }
            (SmoothMap::IncludeSlice { .. } | SmoothMap::IncludeFiber { .. }, _, _) => Err(GaugeError::UnsupportedMap(
                format!("{self:?} from {} into {}", source.name(), target.name()),
            )),
            _ => {
                let t = self.target(source)?;
                if t != *target {
                    return Err(GaugeError::BaseMismatch);
                }
                Ok(t)
            }
        }
    }

    fn collapse_profile(inner: f64, ramp: f64) -> (f64, impl Fn(f64) -> (f64, f64)) {
        // rho(theta) = 0 up to `inner`, quadratic on the ramp, then linear with rho(pi) = pi
        let c = PI / (PI - inner - 0.5 * ramp);
        let f = move |th: f64| {
            if th <= inner {
                (0.0, 0.0)
            } else if th < inner + ramp {
                let u = th - inner;
                (0.5 * c * u * u / ramp, c * u / ramp)
            } else {
                (c * (th - inner - 0.5 * ramp), c)
            }
        };
        (c, f)
    }

    /// Radial profile (rho, rho') of the collapse, as a function of the angle from the center.
    pub fn collapse_rho(inner: f64, ramp: f64, theta: f64) -> (f64, f64) {
        Self::collapse_profile(inner, ramp).1(theta)
    }

    pub fn apply(&self, source: &Manifold, x: &Point) -> Point {
        match self {
            SmoothMap::Identity | SmoothMap::Cover { .. } => *x,
            SmoothMap::ProjectToBase => Vector4::new(x[0], x[1], x[2], 0.0),
            SmoothMap::ProjectToCircle => Vector4::new(x[3], 0.0, 0.0, 0.0),
            SmoothMap::IncludeSlice { t } => Vector4::new(x[0], x[1], x[2], *t),
            SmoothMap::IncludeFiber { point } => Vector4::new(point[0], point[1], point[2], x[0]),
            SmoothMap::RadialCollapse { center, inner, ramp } => {
                let r = source.sphere_radius().unwrap_or(1.0);
                let c = Vector3::new(center[0], center[1], center[2]).normalize();
                let u = x.xyz().normalize();
                let theta = u.cross(&c).norm().atan2(u.dot(&c));
                let (rho, _) = Self::collapse_rho(*inner, *ramp, theta);
                if rho == 0.0 {
                    let p = c * r;
                    return Vector4::new(p[0], p[1], p[2], 0.0);
                }
                let perp = u - c * u.dot(&c);
                let pn = perp.norm();
                let p = if pn < 1e-14 { -c * r } else { (c * rho.cos() + perp / pn * rho.sin()) * r };
                Vector4::new(p[0], p[1], p[2], 0.0)
            }
        }
    }

    pub fn push(&self, _source: &Manifold, x: &Point, v: &Tangent) -> Tangent {
        match self {
            SmoothMap::Identity | SmoothMap::Cover { .. } => *v,
            SmoothMap::ProjectToBase => Vector4::new(v[0], v[1], v[2], 0.0),
            SmoothMap::ProjectToCircle => Vector4::new(v[3], 0.0, 0.0, 0.0),
            SmoothMap::IncludeSlice { .. } => Vector4::new(v[0], v[1], v[2], 0.0),
            SmoothMap::IncludeFiber { .. } => Vector4::new(0.0, 0.0, 0.0, v[0]),
            SmoothMap::RadialCollapse { center, inner, ramp } => {
                let c = Vector3::new(center[0], center[1], center[2]).normalize();
                let u = x.xyz().normalize();
                let vt = v.xyz() - u * u.dot(&v.xyz());
                let theta = u.cross(&c).norm().atan2(u.dot(&c));
                let (rho, drho) = Self::collapse_rho(*inner, *ramp, theta);
                if rho == 0.0 {
                    return Vector4::zeros();
                }
                let perp = u - c * u.dot(&c);
                let pn = perp.norm();
                if pn < 1e-12 {
                    let w = vt * drho;
                    return Vector4::new(w[0], w[1], w[2], 0.0);
                }
                let uhat = perp / pn;
                let e_theta = uhat * theta.cos() - c * theta.sin();
                let e_rho = uhat * rho.cos() - c * rho.sin();
                let radial = vt.dot(&e_theta);
                let side = vt - e_theta * radial;
                let w = e_rho * (drho * radial) + side * (rho.sin() / theta.sin());
                Vector4::new(w[0], w[1], w[2], 0.0)
            }
        }
    }

    /// Chart of the target used for each source chart.
    fn chart_map(&self, source: &Manifold, target: &Manifold) -> Vec<usize> {
        let ns = source.charts().len();
        let nt = target.charts().len();
        match self {
            SmoothMap::IncludeFiber { point } => {
                vec![target.best_chart(&Vector4::new(point[0], point[1], point[2], 0.0)); ns]
            }
            _ if nt == 1 => vec![0; ns],
            _ => (0..ns).collect(),
        }
    }

    /// Lattice shift on the target induced by a source shift.
    fn shift(&self, shift: [i64; 2]) -> [i64; 2] {
        match self {
            SmoothMap::Cover { degree } => [shift[0] * *degree as i64, shift[1] * *degree as i64],
            _ => shift,
        }
    }
}

#[derive(Debug)]
pub(crate) struct PullbackModel {
    inner: BundleAtlas,
    map: SmoothMap,
    source: Manifold,
    charts: Vec<usize>,
}

impl ConnectionModel for PullbackModel {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn form(&self, c: usize, x: &Point, v: &Tangent) -> CMat {
        let y = self.map.apply(&self.source, x);
        let w = self.map.push(&self.source, x, v);
        self.inner.form(self.charts[c], &y, &w)
    }
    fn transition(&self, i: usize, j: usize, x: &Point) -> CMat {
        self.inner.transition(self.charts[i], self.charts[j], &self.map.apply(&self.source, x))
    }
    fn curvature(&self, c: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let y = self.map.apply(&self.source, x);
        let pv = self.map.push(&self.source, x, v);
        let pw = self.map.push(&self.source, x, w);
        self.inner.curvature_in(self.charts[c], &y, &pv, &pw).ok().map(|r| r.matrix)
    }
    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        self.inner.deck(&self.map.apply(&self.source, x), self.map.shift(shift))
    }
}

/// Pullback along a built-in map.  `source` is the domain of the map; for
/// inclusions the target is the bundle's base.
pub fn pullback(b: &BundleAtlas, map: SmoothMap, source: &Manifold) -> Result<BundleAtlas> {
    source.validate()?;
    map.target_with(source, b.base())?;
    if let (SmoothMap::RadialCollapse { inner, ramp, .. }, Some(_)) = (&map, source.sphere_radius()) {
        // chart images must stay clear of the opposite pole of each cap
        let lim = source.charts()[0].radius / source.sphere_radius().unwrap_or(1.0);
        let (rho, _) = SmoothMap::collapse_rho(*inner, *ramp, PI - lim);
        if rho < 0.1 {
            return Err(GaugeError::UnsupportedMap("collapse too strong for the two-cap atlas".into()));
        }
    }
    let charts = map.chart_map(source, b.base());
    let recipe = b.recipe().map(|r| Recipe::Pullback {
        inner: Box::new(r.clone()),
        map: map.clone(),
        source: source.clone(),
    });
    Ok(BundleAtlas::new(
        source.clone(),
        Arc::new(PullbackModel { inner: b.clone(), map, source: source.clone(), charts }),
        recipe,
    ))
}

// ----------------------------------------------------------------- push-forward

#[derive(Debug)]
pub(crate) struct PushforwardModel {
    inner: BundleAtlas,
    degree: usize,
    /// periods of the base (downstairs)
    periods: Vec<f64>,
}

impl PushforwardModel {
    fn sheets(&self) -> Vec<[usize; 2]> {
        let d = self.degree;
        if self.periods.len() == 1 {
            (0..d).map(|s| [s, 0]).collect()
        } else {
            (0..d).flat_map(|a| (0..d).map(move |b| [a, b])).collect()
        }
    }

    fn offset(&self, s: [usize; 2]) -> Point {
        let mut o = Vector4::zeros();
        for (k, l) in self.periods.iter().enumerate() {
            o[k] = s[k] as f64 * l;
        }
        o
    }

    fn sheet_index(&self, s: [usize; 2]) -> usize {
        if self.periods.len() == 1 {
            s[0]
        } else {
            s[0] * self.degree + s[1]
        }
    }

    fn blocks(&self, mut f: impl FnMut(&Point) -> CMat) -> CMat {
        let m = self.inner.rank();
        let sheets = self.sheets();
        let mut out = ucalc::zeros(m * sheets.len());
        for s in sheets {
            let k = self.sheet_index(s);
            out.view_mut((k * m, k * m), (m, m)).copy_from(&f(&self.offset(s)));
        }
        out
    }
}

impl ConnectionModel for PushforwardModel {
    fn rank(&self) -> usize {
        self.inner.rank() * self.sheets().len()
    }
    fn form(&self, _: usize, x: &Point, v: &Tangent) -> CMat {
        self.blocks(|o| self.inner.form(0, &(x + o), v))
    }
    fn curvature(&self, _: usize, x: &Point, v: &Tangent, w: &Tangent) -> Option<CMat> {
        let mut ok = true;
        let out = self.blocks(|o| match self.inner.model().curvature(0, &(x + o), v, w) {
            Some(r) => r,
            None => {
                ok = false;
                ucalc::zeros(self.inner.rank())
            }
        });
        ok.then_some(out)
    }
    fn deck(&self, x: &Point, shift: [i64; 2]) -> CMat {
        let m = self.inner.rank();
        let d = self.degree as i64;
        let mut out = ucalc::zeros(self.rank());
        for s in self.sheets() {
            let mut target = [0usize; 2];
            let mut q = [0i64; 2];
            for k in 0..self.periods.len() {
                let t = s[k] as i64 + shift[k];
                target[k] = t.rem_euclid(d) as usize;
                q[k] = t.div_euclid(d);
            }
            let block = self.inner.deck(&(x + self.offset(target)), q);
            let (r, c) = (self.sheet_index(target), self.sheet_index(s));
            out.view_mut((r * m, c * m), (m, m)).copy_from(&block);
        }
        out
    }
}

/// Push-forward along the degree-d self-cover of a circle (d sheets) or torus (d^2 sheets);
/// `b` lives on the cover, whose periods are d times those of the base.
pub fn pushforward_cover(b: &BundleAtlas, degree: usize) -> Result<BundleAtlas> {
    if degree == 0 {
        return Err(GaugeError::UnsupportedCover("degree must be positive".into()));
    }
    let base = SmoothMap::Cover { degree }
        .target(b.base())
        .map_err(|_| GaugeError::UnsupportedCover(format!("no self-cover of {}", b.base().name())))?;
    let periods: Vec<f64> = base.periods().iter().map(|p| p.1).collect();
    let recipe = b.recipe().map(|r| Recipe::Pushforward { inner: Box::new(r.clone()), degree });
    Ok(BundleAtlas::new(base, Arc::new(PushforwardModel { inner: b.clone(), degree, periods }), recipe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{chern_number_c1, comass_norm, families, ComassMode};

    #[test]
    fn perturb_is_deterministic_and_bounded() {
        let b = families::trivial(Manifold::unit_sphere(), 2);
        let p1 = perturb(&b, 7, 0.05).unwrap();
        let p2 = perturb(&b, 7, 0.05).unwrap();
        let x = Vector4::new(0.3, -0.2, 0.9, 0.0).normalize();
        let v = Vector4::new(0.1, 0.4, 0.0, 0.0);
        assert_eq!(p1.form(0, &x, &v), p2.form(0, &x, &v));
        let c = comass_norm(&p1, ComassMode::Full, 4).unwrap();
        assert!(c.value <= 0.05 + 1e-6 && c.value > 0.03, "{}", c.value);
        assert!(chern_number_c1(&p1, 3).unwrap().abs() < 1e-6);
    }

    #[test]
    fn amplitude_zero_is_identity() {
        let b = families::make_monopole(1);
        let p = perturb(&b, 1, 0.0).unwrap();
        let x = Vector4::new(0.0, 0.6, 0.8, 0.0);
        let v = Vector4::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(p.form(0, &x, &v), b.form(0, &x, &v));
    }

    #[test]
    fn perturbed_analytic_curvature_matches_fd() {
        let b = perturb(&families::trivial(Manifold::unit_sphere(), 2), 3, 0.3).unwrap();
        for s in Manifold::unit_sphere().sample_frames(2) {
            let an = b.curvature_in(0, &s.point, &s.frame[0], &s.frame[1]).unwrap().matrix;
            let fd = b.curvature_fd(0, &s.point, &s.frame[0], &s.frame[1]);
            assert!(ucalc::op_norm(&(an - fd)) < 1e-8);
        }
    }

    #[test]
    fn bumped_curvature_matches_fd() {
        let s = direct_sum(&families::make_monopole(1), &families::make_monopole(-1)).unwrap();
        let p = perturb(&s, 11, 0.2).unwrap();
        for f in Manifold::unit_sphere().sample_frames(3) {
            for c in 0..2 {
                if p.base().chart_depth(&p.charts()[c], &f.point) < 0.05 {
                    continue;
                }
                let an = p.curvature_in(c, &f.point, &f.frame[0], &f.frame[1]).unwrap().matrix;
                let fd = p.curvature_fd(c, &f.point, &f.frame[0], &f.frame[1]);
                let d = ucalc::op_norm(&(an - fd));
                assert!(d < 1e-5, "{d}");
            }
        }
    }

    #[test]
    fn bumped_perturbation_keeps_atlas_invariants() {
        let s = direct_sum(&families::make_monopole(1), &families::make_monopole(-1)).unwrap();
        let p = perturb(&s, 11, 0.05).unwrap();
        let (cocycle, compat) = p.check_invariants(2);
        assert!(cocycle < 1e-8 && compat < 1e-6, "{cocycle} {compat}");
        assert!(chern_number_c1(&p, 3).unwrap().abs() < 1e-4);
    }

    #[test]
    fn direct_sum_rules() {
        let a = families::make_monopole(1);
        let b = families::make_monopole(-2);
        let s = direct_sum(&a, &b).unwrap();
        assert_eq!(s.rank(), 2);
        let c = comass_norm(&s, ComassMode::Full, 2).unwrap().value;
        assert!((c - 1.0).abs() < 1e-12);
        assert!((chern_number_c1(&s, 3).unwrap() + 1.0).abs() < 1e-6);
        let t = families::trivial(Manifold::torus(1.0, 1.0).unwrap(), 1);
        assert_eq!(direct_sum(&a, &t).unwrap_err(), GaugeError::BaseMismatch);
    }

    #[test]
    fn pullback_to_product_has_no_mixed_terms() {
        let a = families::make_monopole(1);
        let prod = Manifold::product(Manifold::unit_sphere(), 1.0).unwrap();
        let p = pullback(&a, SmoothMap::ProjectToBase, &prod).unwrap();
        let t = comass_norm(&p, ComassMode::TangentOnly, 2).unwrap().value;
        let f = comass_norm(&p, ComassMode::Full, 2).unwrap().value;
        assert!((t - 0.5).abs() < 1e-12 && (f - 0.5).abs() < 1e-12);
        assert!(pullback(&a, SmoothMap::ProjectToCircle, &prod).is_err());
    }

    #[test]
    fn collapse_push_matches_finite_differences() {
        let s = Manifold::unit_sphere();
        let map = SmoothMap::RadialCollapse { center: [0.0, 0.0, 1.0], inner: 0.6, ramp: 0.2 };
        for f in s.sample_frames(2) {
            for v in &f.frame {
                let h = 1e-6;
                let fd = (map.apply(&s, &s.project(&(f.point + v * h))) - map.apply(&s, &s.project(&(f.point - v * h))))
                    / (2.0 * h);
                assert!((fd - map.push(&s, &f.point, v)).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn circle_double_cover_holonomy_matrix() {
        // deck of the pushed-forward trivial bundle is the sheet swap
        let up = families::flat_circle(2.0, PI).unwrap();
        let down = pushforward_cover(&up, 2).unwrap();
        assert_eq!(down.rank(), 2);
        let d = down.deck(&Vector4::zeros(), [1, 0]);
        assert!((d[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((d[(0, 1)] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn torus_pushforward_keeps_comass_and_c1() {
        for d in 1..=3usize {
            let up = families::torus_flux([d as f64, d as f64], 1).unwrap();
            let down = pushforward_cover(&up, d).unwrap();
            assert_eq!(down.rank(), d * d);
            let cu = comass_norm(&up, ComassMode::Full, 1).unwrap().value;
            let cd = comass_norm(&down, ComassMode::Full, 1).unwrap().value;
            assert!((cu - cd).abs() < 1e-12);
            assert!((cd - 2.0 * PI / (d * d) as f64).abs() < 1e-12);
            assert!((chern_number_c1(&down, 1).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
