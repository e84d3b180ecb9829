use super::Tensor;
use crate::error::{Error, Result};

/// Relative error measure shared by every gradient check:
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

/// Compares `analytic` against central finite differences of `value`
/// around `params`, returning the worst relative error over coordinates.
pub fn grad_check<F>(value: F, analytic: &Tensor, params: &Tensor, epsilon: f64) -> Result<f64>
where
    F: FnMut(&Tensor) -> f64,
{
    let coords: Vec<usize> = (0..params.len()).collect();
    grad_check_coords(value, analytic, params, epsilon, &coords)
}

/// [`grad_check`] restricted to the listed coordinates.
pub fn grad_check_coords<F>(
    mut value: F,
    analytic: &Tensor,
    params: &Tensor,
    epsilon: f64,
    coords: &[usize],
) -> Result<f64>
where
    F: FnMut(&Tensor) -> f64,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Argument(format!("epsilon {epsilon} outside (0, 1e-2]")));
    }
    params.check_same_shape(analytic, "grad_check")?;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + epsilon;
        let plus = value(&probe);
        probe.data_mut()[i] = orig - epsilon;
        let minus = value(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite value probing coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn half_squared_norm() {
        let x = Rng::new(4).gaussian(&[6]);
        let err = grad_check(|p| 0.5 * p.norm().powi(2), &x, &x, 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function() {
        let x = Rng::new(5).gaussian(&[3]);
        let err = grad_check(|_| 4.0, &Tensor::zeros(&[3]), &x, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let wrong = Tensor::new(&[2], vec![1.0, 0.0]).unwrap();
        let err = grad_check(|p| 0.5 * p.norm().powi(2), &wrong, &x, 1e-5).unwrap();
        assert!(err > 0.5);
    }

    #[test]
    fn non_finite_probe_errors() {
        let x = Tensor::new(&[1], vec![0.0]).unwrap();
        let res = grad_check(|p| 1.0 / p.data()[0].abs().min(1e-300) * f64::INFINITY, &x, &x, 1e-5);
        assert!(matches!(res, Err(Error::Evaluation(_))));
    }

    #[test]
    fn epsilon_range() {
        let x = Tensor::zeros(&[1]);
        assert!(grad_check(|_| 0.0, &x, &x, 0.0).is_err());
        assert!(grad_check(|_| 0.0, &x, &x, 0.1).is_err());
    }
}
