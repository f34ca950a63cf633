//! Euclidean projections onto trace-capped PSD sets.

use crate::linalg::{eigh, from_eig, CMat};

/// Projects `values` onto {x ≥ 0, Σx ≤ budget}.
pub fn project_capped_simplex(values: &[f64], budget: f64) -> Vec<f64> {
    let budget = budget.max(0.0);
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Sum constraint is active: shift by the unique θ with Σ max(v − θ, 0) = budget.
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - budget) / (i + 1) as f64;
        if i + 1 == sorted.len() || sorted[i + 1] <= t {
            theta = t;
            break;
        }
    }
    values.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Frobenius-nearest point of {W ⪰ 0, tr W ≤ budget}.
pub fn project_psd_trace(x: &CMat, budget: f64) -> CMat {
    project_psd_group(std::slice::from_ref(x), budget)
        .pop()
        .expect("one matrix in, one out")
}

/// Jointly projects several Hermitian matrices onto
/// {Wᵢ ⪰ 0, Σᵢ tr Wᵢ ≤ budget}.
pub fn project_psd_group(xs: &[CMat], budget: f64) -> Vec<CMat> {
    let decomps: Vec<(Vec<f64>, CMat)> = xs.iter().map(eigh).collect();
    let all: Vec<f64> = decomps.iter().flat_map(|(v, _)| v.iter().copied()).collect();
    let projected = project_capped_simplex(&all, budget);
    let mut offset = 0;
    decomps
        .iter()
        .map(|(vals, vecs)| {
            let part = &projected[offset..offset + vals.len()];
            offset += vals.len();
            from_eig(part, vecs)
        })
        .collect()
}
