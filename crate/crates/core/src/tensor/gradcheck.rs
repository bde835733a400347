//! Central-difference gradient checking against the tape.

use super::params::GradMap;
use super::{Bound, ParamStore, Tape, TensorError, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
    /// `(parameter, index, analytic, numeric)` for every checked coordinate.
    pub entries: Vec<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    /// Worst relative error among coordinates where either gradient
    /// estimate exceeds `floor` in magnitude.
    pub fn max_rel_error_above(&self, floor: f64) -> f64 {
        self.entries
            .iter()
            .filter(|(_, _, a, n)| a.abs() > floor || n.abs() > floor)
            .map(|(_, _, a, n)| relative_error(*a, *n))
            .fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Runs `forward` on a fresh tape and returns the loss with its gradients.
pub fn evaluate<F>(store: &ParamStore, forward: F) -> Result<(f64, GradMap), TensorError>
where
    F: for<'t> Fn(&'t Tape, &Bound<'t>) -> Result<Var<'t>, TensorError>,
{
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let loss = forward(&tape, &bound)?;
    let value = loss.value().item();
    let grads = tape.backward(loss)?;
    Ok((value, bound.gradients(&grads)))
}

/// Compares the analytic gradients reported by `f` with central differences
/// `(f(θ+h) − f(θ−h)) / 2h`.
///
/// `max_per_param` limits the check to that many evenly spaced coordinates
/// of each parameter; `None` checks every coordinate.
pub fn gradient_check<F, E>(
    store: &ParamStore,
    h: f64,
    max_per_param: Option<usize>,
    f: F,
) -> Result<GradCheckReport, E>
where
    F: Fn(&ParamStore) -> Result<(f64, GradMap), E>,
    E: From<TensorError>,
{
    let (value, analytic) = f(store)?;
    let (again, _) = f(store)?;
    if value.to_bits() != again.to_bits() {
        return Err(TensorError::NondeterministicFunction {
            first: value,
            second: again,
        }
        .into());
    }
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
        entries: Vec::new(),
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let grad = analytic
            .get(&name)
            .ok_or_else(|| TensorError::MissingGradient(name.clone()))?;
        let len = store.get(&name).map_or(0, |t| t.len());
        let count = max_per_param.map_or(len, |k| k.min(len));
        for k in 0..count {
            let idx = if count == len { k } else { k * len / count };
            let orig = store.get(&name).expect("listed").data()[idx];
            probe.get_mut(&name).expect("listed").data_mut()[idx] = orig + h;
            let (plus, _) = f(&probe)?;
            probe.get_mut(&name).expect("listed").data_mut()[idx] = orig - h;
            let (minus, _) = f(&probe)?;
            probe.get_mut(&name).expect("listed").data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(grad.data()[idx], numeric);
            report.coordinates += 1;
            report.entries.push((name.clone(), idx, grad.data()[idx], numeric));
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn linear_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_vec(2, 1, vec![0.7, -1.3]).unwrap()).unwrap();
        s
    }

    fn linear(store: &ParamStore) -> Result<(f64, GradMap), TensorError> {
        evaluate(store, |tape, p| {
            let x = tape.constant(Tensor::from_rows(&[vec![2.0, -3.0]]).unwrap());
            x.matmul(p.get("w")?)?.sum()
        })
    }

    #[test]
    fn linear_function_is_exact() {
        let r = gradient_check(&linear_store(), 1e-5, None, linear).unwrap();
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
        assert_eq!(r.coordinates, 2);
    }

    #[test]
    fn doubled_backward_is_flagged_at_one_half() {
        let wrong = |s: &ParamStore| {
            let (v, mut g) = linear(s)?;
            g.values_mut().for_each(|t| t.scale_assign(2.0));
            Ok::<_, TensorError>((v, g))
        };
        let r = gradient_check(&linear_store(), 1e-5, None, wrong).unwrap();
        assert!((r.max_rel_error - 0.5).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn nondeterminism_detected() {
        let calls = std::cell::Cell::new(0u32);
        let noisy = |s: &ParamStore| {
            calls.set(calls.get() + 1);
            let (v, g) = linear(s)?;
            Ok((v + calls.get() as f64, g))
        };
        assert!(matches!(
            gradient_check(&linear_store(), 1e-5, None, noisy),
            Err(TensorError::NondeterministicFunction { .. })
        ));
    }
}
