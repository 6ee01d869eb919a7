//! Distances between affordance maps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::affordance::AffordanceMap;
use crate::error::{Error, Result};

fn check(a: &AffordanceMap, b: &AffordanceMap) -> Result<()> {
    if a.same_geometry(b) && a.grid.len() == b.grid.len() {
        Ok(())
    } else {
        Err(Error::GeometryMismatch(format!(
            "`{}` is {}×{} at {} m, `{}` is {}×{} at {} m",
            a.category, a.cells, a.cells, a.resolution, b.category, b.cells, b.cells, b.resolution
        )))
    }
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(a: &AffordanceMap, b: &AffordanceMap) -> Result<f64> {
    check(a, b)?;
    let s: f64 = a.grid.iter().zip(&b.grid).map(|(p, q)| (p - q).abs()).sum();
    Ok((0.5 * s).min(1.0))
}

/// `(1/√2) √(Σ (√p_i − √q_i)²)`.
pub fn hellinger(a: &AffordanceMap, b: &AffordanceMap) -> Result<f64> {
    check(a, b)?;
    let s: f64 = a
        .grid
        .iter()
        .zip(&b.grid)
        .map(|(p, q)| (p.sqrt() - q.sqrt()).powi(2))
        .sum();
    Ok((s.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapComparison {
    pub tv: f64,
    pub hellinger: f64,
}

/// Distances for every category present in both tables.
pub fn compare_maps(
    reference: &BTreeMap<String, AffordanceMap>,
    other: &BTreeMap<String, AffordanceMap>,
) -> Result<BTreeMap<String, MapComparison>> {
    let mut out = BTreeMap::new();
    for (cat, a) in reference {
        if let Some(b) = other.get(cat) {
            out.insert(
                cat.clone(),
                MapComparison {
                    tv: tv_distance(a, b)?,
                    hellinger: hellinger(a, b)?,
                },
            );
        }
    }
    Ok(out)
}
