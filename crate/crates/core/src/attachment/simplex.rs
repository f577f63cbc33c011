/// Euclidean projection onto the probability simplex `{α ≥ 0, Σα = 1}`.
///
/// Sort-and-threshold: sort descending, find the largest `ρ` with
/// `u_ρ − (Σ_{j≤ρ} u_j − 1)/ρ > 0`, then clip `v − τ` at zero. Equal values
/// are ordered by index so the result is deterministic.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(
        !v.is_empty(),
        "simplex projection needs at least one coordinate"
    );
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));

    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        cumulative += v[i];
        let candidate = (cumulative - 1.0) / (rank + 1) as f64;
        if v[i] - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// True when `v` is nonnegative and sums to one within `tol`.
pub fn is_on_simplex(v: &[f64], tol: f64) -> bool {
    v.iter().all(|&x| x >= -tol) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_on_simplex_is_fixed() {
        let v = [0.2, 0.3, 0.5];
        let p = project_simplex(&v);
        for (a, b) in p.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_coordinate_saturates() {
        assert_eq!(project_simplex(&[10.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn uniform_shift() {
        let p = project_simplex(&[5.0, 5.0, 5.0, 5.0]);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_coordinate() {
        assert_eq!(project_simplex(&[-3.0]), vec![1.0]);
    }

    #[test]
    fn negative_inputs() {
        let p = project_simplex(&[-1.0, -2.0, -1.0]);
        assert!(is_on_simplex(&p, 1e-12));
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1] == 0.0 && (p[2] - 0.5).abs() < 1e-12);
    }
}
