use crate::error::{Result, SnpError};

/// 1-Wasserstein distance between two empirical distributions on the real line.
///
/// Computed as `∫₀¹ |F_a⁻¹(t) - F_b⁻¹(t)| dt`. Both quantile functions are step
/// functions with breakpoints at multiples of `1/|a|` and `1/|b|`; sweeping the
/// merged breakpoints gives the integral exactly. Breakpoints are tracked in
/// integer units of `1/(|a|·|b|)` so no rounding enters the interval lengths.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(SnpError::EmptyInput(
            "wasserstein_1d needs two nonempty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SnpError::Validation("non-finite sample value".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(sorted_wasserstein(&a, &b))
}

/// Same as [`wasserstein_1d`] for inputs already sorted ascending.
pub(crate) fn sorted_wasserstein(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let mut acc = 0.0f64;
    while i < a.len() && j < b.len() {
        let next_a = (i as u128 + 1) * nb;
        let next_b = (j as u128 + 1) * na;
        let next = next_a.min(next_b);
        acc += (a[i] - b[j]).abs() * (next - pos) as f64;
        pos = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    acc / (na * nb) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let a = [3.0, -1.0, 2.0, 2.0];
        let mut b = a;
        b.reverse();
        assert_eq!(wasserstein_1d(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn hand_cases() {
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(wasserstein_1d(&[0.0], &[0.0, 10.0]).unwrap(), 5.0);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            wasserstein_1d(&[], &[1.0]),
            Err(SnpError::EmptyInput(_))
        ));
    }

    #[test]
    fn symmetric_and_shift() {
        let a = [0.1, 0.7, 0.3];
        let b = [1.0, -2.0];
        let d = wasserstein_1d(&a, &b).unwrap();
        assert_eq!(d, wasserstein_1d(&b, &a).unwrap());
        let shifted: Vec<f64> = a.iter().map(|x| x + 4.0).collect();
        assert!((wasserstein_1d(&a, &shifted).unwrap() - 4.0).abs() < 1e-12);
    }
}
