use serde::{Deserialize, Serialize};

use super::{direct_sum, families, perturb, pullback, pushforward_cover, BundleAtlas, SmoothMap};
use crate::error::{GaugeError, Result};
use crate::geometry::Manifold;

pub const BUNDLE_SCHEMA: &str = "gaugelab.bundle/v1";

/// Constructive description of a bundle; rebuilding it reproduces the atlas exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Recipe {
    Trivial { base: Manifold, rank: usize },
    Monopole { k: i64, radius: f64 },
    ConstantField { radius: f64, field: f64 },
    TorusFlux { periods: [f64; 2], degree: i64 },
    FlatCircle { length: f64, theta: f64 },
    Perturb { inner: Box<Recipe>, seed: u64, amplitude: f64 },
    DirectSum { a: Box<Recipe>, b: Box<Recipe> },
    Pullback { inner: Box<Recipe>, map: SmoothMap, source: Manifold },
    Pushforward { inner: Box<Recipe>, degree: usize },
}

impl Recipe {
    pub fn build(&self) -> Result<BundleAtlas> {
        match self {
            Recipe::Trivial { base, rank } => {
                base.validate()?;
                if *rank == 0 {
                    return Err(GaugeError::Document("rank must be positive".into()));
                }
                Ok(families::trivial(base.clone(), *rank))
            }
            Recipe::Monopole { k, radius } => {
                Manifold::sphere(*radius)?;
                Ok(families::make_monopole_on(*k, *radius))
            }
            Recipe::ConstantField { radius, field } => families::constant_field(*radius, *field),
            Recipe::TorusFlux { periods, degree } => families::torus_flux(*periods, *degree),
            Recipe::FlatCircle { length, theta } => families::flat_circle(*length, *theta),
            Recipe::Perturb { inner, seed, amplitude } => perturb(&inner.build()?, *seed, *amplitude),
            Recipe::DirectSum { a, b } => direct_sum(&a.build()?, &b.build()?),
            Recipe::Pullback { inner, map, source } => pullback(&inner.build()?, map.clone(), source),
            Recipe::Pushforward { inner, degree } => pushforward_cover(&inner.build()?, *degree),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleDocument {
    pub schema: String,
    pub rank: usize,
    pub base: Manifold,
    pub recipe: Recipe,
}

impl BundleDocument {
    pub fn from_atlas(b: &BundleAtlas) -> Result<Self> {
        let recipe = b
            .recipe()
            .cloned()
            .ok_or_else(|| GaugeError::NotSerializable("atlas has no constructive description".into()))?;
        Ok(BundleDocument { schema: BUNDLE_SCHEMA.into(), rank: b.rank(), base: b.base().clone(), recipe })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| GaugeError::Document(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BundleDocument = serde_json::from_str(text).map_err(|e| GaugeError::Document(e.to_string()))?;
        if doc.schema != BUNDLE_SCHEMA {
            return Err(GaugeError::Document(format!("unknown schema {:?}", doc.schema)));
        }
        Ok(doc)
    }

    /// Rebuilds the atlas and checks it agrees with the recorded header.
    pub fn build(&self) -> Result<BundleAtlas> {
        let b = self.recipe.build()?;
        if b.rank() != self.rank || *b.base() != self.base {
            return Err(GaugeError::Document("header does not match recipe".into()));
        }
        Ok(b)
    }
}

pub fn save_bundle(b: &BundleAtlas) -> Result<String> {
    BundleDocument::from_atlas(b)?.to_json()
}

pub fn load_bundle(text: &str) -> Result<BundleAtlas> {
    BundleDocument::from_json(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ucalc;
    use nalgebra::Vector4;

    #[test]
    fn round_trip_reproduces_forms() {
        let a = perturb(&families::make_monopole(2), 5, 0.1).unwrap();
        let b = direct_sum(&a, &families::make_monopole(-1)).unwrap();
        let text = save_bundle(&b).unwrap();
        assert!(text.contains(BUNDLE_SCHEMA));
        let back = load_bundle(&text).unwrap();
        let x = Vector4::new(0.2, 0.5, 0.7, 0.0).normalize();
        let v = Vector4::new(0.3, -0.1, 0.0, 0.0);
        for c in 0..2 {
            assert!(ucalc::max_abs(&(back.form(c, &x, &v) - b.form(c, &x, &v))) == 0.0);
        }
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = save_bundle(&families::make_monopole(1)).unwrap().replace("v1", "v9");
        assert!(matches!(load_bundle(&text), Err(GaugeError::Document(_))));
    }
}
