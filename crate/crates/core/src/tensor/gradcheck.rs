//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Gradients, ParamStore};

/// Outcome of [`grad_check`], with the worst-offending entry.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub max_abs_error: f64,
    /// `(analytic, numeric)` per checked entry, parameters in store order.
    pub entries: Vec<(f64, f64)>,
}

impl GradCheckReport {
    /// Largest relative error among entries with `|analytic| + |numeric|`
    /// of at least `floor`.
    pub fn max_rel_error_above(&self, floor: f64) -> f64 {
        self.entries
            .iter()
            .filter(|(a, n)| a.abs() + n.abs() >= floor)
            .map(|&(a, n)| relative_error(a, n))
            .fold(0.0, f64::max)
    }
}

/// `|a - n| / max(1e-12, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

/// Compares the analytic gradient returned by `f` against central
/// differences with step `h`, over every entry of every parameter.
///
/// `f` must return the objective value and its gradient at the given store.
pub fn grad_check<T, F>(f: F, params: &ParamStore<T>, h: T) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&ParamStore<T>) -> Result<(T, Gradients<T>)>,
{
    if h <= T::zero() {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let (f0, analytic) = f(params)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite("objective at the base point".into()));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        max_abs_error: 0.0,
        entries: Vec::with_capacity(params.num_values()),
    };
    let mut probe = params.clone();
    let two_h = h + h;
    for p in 0..params.len() {
        let grad = analytic.entry(p).to_dense();
        for i in 0..params.by_index(p).len() {
            let orig = params.by_index(p).data()[i];
            probe.by_index_mut(p).data_mut()[i] = orig + h;
            let (plus, _) = f(&probe)?;
            probe.by_index_mut(p).data_mut()[i] = orig - h;
            let (minus, _) = f(&probe)?;
            probe.by_index_mut(p).data_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("objective near {}[{i}]", params.name(p))));
            }
            let numeric = ((plus - minus) / two_h).to_f64_lossy();
            let a = grad.data()[i].to_f64_lossy();
            let err = relative_error(a, numeric);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            report.entries.push((a, numeric));
            if err > report.max_rel_error || report.worst_param.is_none() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst_param = Some(params.name(p).to_string());
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};

    fn quad(p: &ParamStore<f64>) -> Result<(f64, Gradients<f64>)> {
        let mut tape = Tape::new(p);
        let th = tape.param("theta")?;
        let sq = tape.mul(th, th)?;
        let s = tape.sum(sq);
        let v = tape.scalar(s);
        Ok((v, tape.backward(s)?))
    }

    #[test]
    fn quadratic_is_exact() {
        let mut p = ParamStore::new();
        p.insert("theta", Tensor::vector(vec![0.5, -3.0, 1.2, -0.05]));
        let r = grad_check(quad, &p, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-8, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn constant_objective_has_zero_error() {
        let mut p = ParamStore::new();
        p.insert("theta", Tensor::vector(vec![1.0, 2.0]));
        let r = grad_check(|p| Ok((7.0, Gradients::zeros_like(p))), &p, 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-8);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut p = ParamStore::new();
        p.insert("theta", Tensor::vector(vec![1.0]));
        let r = grad_check(
            |p| {
                let (v, mut g) = quad(p)?;
                g.scale(2.0);
                Ok((v, g))
            },
            &p,
            1e-5,
        )
        .unwrap();
        assert!((r.max_rel_error - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_step_and_non_finite() {
        let mut p = ParamStore::new();
        p.insert("theta", Tensor::vector(vec![1.0]));
        assert!(grad_check(quad, &p, 0.0).is_err());
        assert!(matches!(
            grad_check(|p| Ok((f64::NAN, Gradients::zeros_like(p))), &p, 1e-5),
            Err(Error::NonFinite(_))
        ));
    }
}
