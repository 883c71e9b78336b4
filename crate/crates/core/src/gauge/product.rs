use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::sphere::{sphere_trivialize_with, SphereGlue, SPHERE_THRESHOLD};
use super::{Certificate, Check, GaugeDomain, GaugeField, GaugeTrivialization};
use crate::bundle::{comass_norm, pullback, BundleAtlas, ComassMode, ComassReport, SmoothMap};
use crate::error::{GaugeError, Result};
use crate::geometry::{Manifold, Point, Tangent};
use crate::ucalc::CMat;

const SQRT3: f64 = 1.732_050_807_568_877_2;
pub const DEFAULT_SLICES: usize = 6;
const CACHE_LIMIT: usize = 512;

/// Fibrewise two-chart gauge on S^2 x S^1: the slice {t} gets the glued sphere gauge of
/// the restricted bundle, so all transports are constant in the circle factor.
#[derive(Debug)]
pub struct ProductGauge {
    atlas: BundleAtlas,
    sphere: Manifold,
    eps: f64,
    cache: Mutex<HashMap<u64, Arc<SphereGlue>>>,
}

impl ProductGauge {
    fn new(atlas: &BundleAtlas, eps: f64) -> Result<Self> {
        let sphere = atlas.base().base().clone();
        Ok(ProductGauge { atlas: atlas.clone(), sphere, eps, cache: Mutex::new(HashMap::new()) })
    }

    fn slice_bundle(&self, t: f64) -> Result<BundleAtlas> {
        pullback(&self.atlas, SmoothMap::IncludeSlice { t }, &self.sphere)
    }

    fn slice(&self, t: f64) -> Result<Arc<SphereGlue>> {
        let key = t.to_bits();
        if let Some(g) = self.cache.lock().expect("gauge cache").get(&key) {
            return Ok(g.clone());
        }
        let g = Arc::new(SphereGlue::new(&self.slice_bundle(t)?, self.eps)?);
        let mut cache = self.cache.lock().expect("gauge cache");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, g.clone());
        Ok(g)
    }
}

fn base_point(x: &Point) -> Point {
    Point::new(x[0], x[1], x[2], 0.0)
}

impl GaugeField for ProductGauge {
    fn rank(&self) -> usize {
        self.atlas.rank()
    }

    fn chart_count(&self) -> usize {
        2
    }

    fn value(&self, chart: usize, x: &Point) -> CMat {
        let glue = self.slice(x[3]).expect("slice gauge was validated at construction");
        glue.value(chart, &base_point(x))
    }

    /// Only base directions have a closed form.
    fn gauged_form(&self, x: &Point, v: &Tangent) -> Option<CMat> {
        if v[3] != 0.0 {
            return None;
        }
        self.slice(x[3]).ok()?.gauged_form(&base_point(x), &base_point(v))
    }
}

/// Result of the fibrewise trivialization of a bundle over S^2 x S^1.
#[derive(Debug, Clone)]
pub struct ProductTrivialization {
    /// Global gauge; its form comass is the tangent-only comass of the difference
    /// between the gauged connection and the reference connection.
    pub gauge: GaugeTrivialization,
    /// The connection restricted to {x1} x S^1 and pulled back along the projection.
    pub reference: BundleAtlas,
    pub base_point: Point,
    pub slices: Vec<f64>,
    /// Tangent-only curvature comass of the input.
    pub curvature_norm: f64,
}

impl ProductTrivialization {
    pub fn difference_comass(&self) -> f64 {
        self.gauge.form_comass.value
    }
}

/// Fibrewise trivialization of a bundle over S^2 x S^1 with default slice count.
pub fn product_trivialize(b: &BundleAtlas, eps: f64) -> Result<ProductTrivialization> {
    product_trivialize_with(b, eps, DEFAULT_SLICES)
}

pub fn product_trivialize_with(b: &BundleAtlas, eps: f64, slices: usize) -> Result<ProductTrivialization> {
    let length = match b.base() {
        Manifold::ProductWithCircle { base, length } if base.sphere_radius() == Some(1.0) => *length,
        other => return Err(GaugeError::UnsupportedGeometry(format!("fibrewise gluing on {}", other.name()))),
    };
    let tangent = comass_norm(b, ComassMode::TangentOnly, 2)?.value;
    if tangent >= SPHERE_THRESHOLD {
        return Err(GaugeError::CurvatureTooLarge(tangent));
    }
    let field = ProductGauge::new(b, eps)?;
    let ts: Vec<f64> = (0..slices.max(1)).map(|k| length * k as f64 / slices.max(1) as f64).collect();
    let per_slice: Vec<Result<(f64, GaugeTrivialization)>> = ts
        .par_iter()
        .map(|&t| {
            let s = field.slice_bundle(t)?;
            let r = comass_norm(&s, ComassMode::Full, 2)?.value.max(tangent);
            Ok((r, sphere_trivialize_with(&s, eps, r)?))
        })
        .collect();
    let per_slice = per_slice.into_iter().collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    let mut curvature = tangent;
    let mut checks: Vec<Check> = Vec::new();
    for ((r, g), &t) in per_slice.iter().zip(&ts) {
        curvature = curvature.max(*r);
        let rep = &g.form_comass;
        let p = Point::new(rep.argmax[0], rep.argmax[1], rep.argmax[2], t);
        samples.push((p, rep.value, false));
        samples.push((p, rep.coarse_value, true));
        for c in &g.certificate.as_ref().expect("sphere gluing is certified").checks {
            // keep the worst slice for each check
            match checks.iter_mut().find(|k| k.name == c.name) {
                Some(k) if c.value - c.limit > k.value - k.limit => *k = c.clone(),
                Some(_) => {}
                None => checks.push(c.clone()),
            }
        }
    }
    let mut report = ComassReport::from_samples(&samples);
    report.samples = per_slice.iter().map(|(_, g)| g.form_comass.samples).sum();
    let mut cert = Certificate::new("product_circle", 21.0 * SQRT3, curvature, report.value, 1e-9);
    cert.checks = checks;

    let x1 = Point::new(0.0, 0.0, 1.0, 0.0);
    let circle = Manifold::circle(length)?;
    let fibre = pullback(b, SmoothMap::IncludeFiber { point: [0.0, 0.0, 1.0] }, &circle)?;
    let reference = pullback(&fibre, SmoothMap::ProjectToCircle, b.base())?;
    Ok(ProductTrivialization {
        gauge: GaugeTrivialization {
            field: Arc::new(field),
            domain: GaugeDomain::Global,
            form_comass: report,
            certificate: Some(cert),
        },
        reference,
        base_point: x1,
        slices: ts,
        curvature_norm: curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{direct_sum, flat_circle, perturb, trivial};
    use crate::gauge::{apply_gauge, sphere_two_chart_trivialize};
    use crate::geometry::PathCurve;
    use crate::transport::{parallel_transport, TransportConfig};
    use crate::ucalc;

    fn product() -> Manifold {
        Manifold::product(Manifold::unit_sphere(), 2.0).unwrap()
    }

    fn fibre_loop(m: &Manifold) -> PathCurve {
        PathCurve::parametric(m.clone(), |t| Point::new(0.0, 0.0, 1.0, t), 0.0, 2.0)
    }

    #[test]
    fn flat_circle_pullback_keeps_holonomy() {
        let m = product();
        let b = pullback(&flat_circle(2.0, 0.7).unwrap(), SmoothMap::ProjectToCircle, &m).unwrap();
        let p = product_trivialize_with(&b, 0.05, 3).unwrap();
        assert!(p.difference_comass() < 1e-12);
        let cfg = TransportConfig::default();
        let gauged = apply_gauge(&b, &p.gauge).unwrap();
        let h0 = parallel_transport(&b, &fibre_loop(&m), &cfg).unwrap().matrix.into_matrix();
        let h1 = parallel_transport(&gauged, &fibre_loop(&m), &cfg).unwrap().matrix.into_matrix();
        let h2 = parallel_transport(&p.reference, &fibre_loop(&m), &cfg).unwrap().matrix.into_matrix();
        assert!((h0[(0, 0)].arg().abs() - 0.7).abs() < 1e-8);
        assert!(ucalc::op_norm(&(&h0 - &h1)) < 1e-8);
        assert!(ucalc::op_norm(&(&h0 - &h2)) < 1e-8);
    }

    #[test]
    fn sphere_pullback_reduces_to_sphere_case() {
        let s = perturb(&trivial(Manifold::unit_sphere(), 2), 3, 0.04).unwrap();
        let b = pullback(&s, SmoothMap::ProjectToBase, &product()).unwrap();
        let p = product_trivialize_with(&b, 0.05, 3).unwrap();
        let g = sphere_two_chart_trivialize(&s, 0.05).unwrap();
        assert!((p.difference_comass() - g.form_comass.value).abs() < 1e-10);
        let y = Point::new(0.6, 0.0, 0.8, 0.0);
        let v0 = p.gauge.field.value(1, &y);
        let v1 = p.gauge.field.value(1, &Point::new(0.6, 0.0, 0.8, 1.3));
        assert!(ucalc::op_norm(&(v0 - v1)) < 1e-12);
    }

    #[test]
    fn mixed_perturbation_certificate() {
        let m = product();
        let flat = pullback(&flat_circle(2.0, 0.4).unwrap(), SmoothMap::ProjectToCircle, &m).unwrap();
        let b = perturb(&direct_sum(&flat, &trivial(m.clone(), 1)).unwrap(), 11, 0.03).unwrap();
        let p = product_trivialize_with(&b, 0.05, 4).unwrap();
        let c = p.gauge.certificate.as_ref().unwrap();
        assert!(c.holds && c.all_checks_hold(), "{c:#?}");
        assert!(p.gauge.overlap_mismatch(&b, 1) < 1e-6);
    }

    #[test]
    fn rejects_other_bases() {
        let b = trivial(Manifold::unit_sphere(), 1);
        assert!(matches!(product_trivialize(&b, 0.05), Err(GaugeError::UnsupportedGeometry(_))));
    }
}
