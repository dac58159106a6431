use crate::model::{MeanField, SUM_TOL};

/// Euclidean projection onto the probability simplex (sort-and-threshold).
/// Vectors that already are valid distributions come back unchanged.
pub fn project_to_simplex(v: &[f64]) -> MeanField {
    assert!(!v.is_empty(), "cannot project an empty vector");
    assert!(v.iter().all(|x| x.is_finite()), "cannot project non-finite entries");
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= SUM_TOL {
        return MeanField::from_update(v.to_vec());
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    let out: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    MeanField::from_update(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(project_to_simplex(&[0.6, 0.6]).probs(), &[0.5, 0.5]);
        assert_eq!(project_to_simplex(&[1.2, -0.2]).probs(), &[1.0, 0.0]);
        let z = [0.1, 0.2, 0.7];
        assert_eq!(project_to_simplex(&z).probs(), &z);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_optimal(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_to_simplex(&v);
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let again = project_to_simplex(p.probs());
            for (a, b) in p.probs().iter().zip(again.probs()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
            // KKT: positive coordinates share the same shift v_i - p_i.
            let shifts: Vec<f64> = v.iter().zip(p.probs()).filter(|(_, &pi)| pi > 0.0).map(|(vi, pi)| vi - pi).collect();
            for s in &shifts {
                prop_assert!((s - shifts[0]).abs() < 1e-12);
            }
            for (vi, pi) in v.iter().zip(p.probs()) {
                if *pi == 0.0 {
                    prop_assert!(*vi <= shifts[0] + 1e-12);
                }
            }
        }
    }
}
