//! Concentration modulus `M_f(s) = sup_{|A| ≤ s} (∫_A |f|²)^{1/2}` of a
//! piecewise-constant field.

use crate::discretization::Mesh;
use crate::error::{Error, Result};

/// `M_f(s)` for `f` constant on pieces of the given areas. Pieces are taken
/// in decreasing order of `|f|` until the area budget runs out, the last one
/// fractionally.
pub fn mf_concentration(areas: &[f64], values: &[f64], s: f64) -> Result<f64> {
    if areas.len() != values.len() {
        return Err(Error::SizeMismatch {
            expected: areas.len(),
            found: values.len(),
        });
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("measure budget s = {s} must be nonnegative")));
    }
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&i, &j| values[j].abs().total_cmp(&values[i].abs()).then(i.cmp(&j)));
    let mut budget = s;
    let mut mass = 0.0;
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let take = areas[i].min(budget);
        mass += take * values[i] * values[i];
        budget -= take;
    }
    Ok(mass.sqrt())
}

/// `M_f(s)` for `f` sampled at element centroids of a mesh.
pub fn mf_on_mesh(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64, s: f64) -> Result<f64> {
    let values: Vec<f64> = (0..mesh.element_count()).map(|e| f(mesh.centroid(e))).collect();
    mf_concentration(&mesh.areas, &values, s)
}
