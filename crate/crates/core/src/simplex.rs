//! Euclidean geometry on the probability simplex.

/// Projects `y` onto `{x : x_j >= 0, sum x = mass}` by sort-and-threshold.
pub fn project_onto_scaled_simplex(y: &[f64], mass: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - mass) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Projects onto the unit simplex.
pub fn project_onto_simplex(y: &[f64]) -> Vec<f64> {
    project_onto_scaled_simplex(y, 1.0)
}

/// Projects onto the shell `{x : x_j >= floor, sum x = 1}`.
///
/// Requires `n * floor < 1`.
pub fn project_onto_shell(y: &[f64], floor: f64) -> Vec<f64> {
    if floor <= 0.0 {
        return project_onto_simplex(y);
    }
    let n = y.len() as f64;
    let shifted: Vec<f64> = y.iter().map(|v| v - floor).collect();
    project_onto_scaled_simplex(&shifted, 1.0 - n * floor)
        .into_iter()
        .map(|v| v + floor)
        .collect()
}

/// Subtracts the mean so the entries sum to zero.
pub fn center(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_overshoot_projects_to_uniform() {
        let p = project_onto_simplex(&[0.6, 0.6]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn points_on_simplex_are_fixed() {
        let y = [0.2, 0.3, 0.5];
        let p = project_onto_simplex(&y);
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shell_projection_respects_floor() {
        let p = project_onto_shell(&[2.0, -1.0, -1.0], 0.01);
        assert!((p[1] - 0.01).abs() < 1e-15);
        assert!((p[2] - 0.01).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
