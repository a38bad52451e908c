use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::matrix::Matrix;
use crate::numkit::tape::{Tape, Var};
use crate::scalar::Scalar;

/// Compares tape gradients of a scalar function against central differences.
///
/// `f` receives a fresh tape and the registered parameter handles and must
/// return a 1×1 loss. Returns the max over coordinates of
/// `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check<T, F>(f: F, params: &[Matrix<T>], eps: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    grad_check_sampled(f, params, eps, None, 0)
}

/// As [`grad_check`], but probes at most `max_coords` entries per parameter
/// matrix, chosen by `seed`. Every matrix is still probed at least once.
pub fn grad_check_sampled<T, F>(f: F, params: &[Matrix<T>], eps: T, max_coords: Option<usize>, seed: u64) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    if !(eps > T::zero() && eps <= T::lit(1e-2)) {
        return Err(Error::Config(format!("grad_check eps {eps} outside (0, 1e-2]")));
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Matrix<T>> = vars.iter().map(|&v| grads.wrt(&tape, v)).collect();
    drop(tape);

    let eval = |values: &[Matrix<T>]| -> Result<T> {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|p| t.param(p.clone())).collect();
        let l = f(&mut t, &vs)?;
        let v = t.value(l)[(0, 0)];
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite loss at perturbed point".into()));
        }
        Ok(v)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work: Vec<Matrix<T>> = params.to_vec();
    let mut worst = T::zero();
    let two = T::lit(2.0);
    for (pi, grad) in analytic.iter().enumerate() {
        let n = work[pi].len();
        let coords: Vec<usize> = match max_coords {
            Some(k) if k < n => sample(&mut rng, n, k.max(1)).into_vec(),
            _ => (0..n).collect(),
        };
        for idx in coords {
            let orig = work[pi].data()[idx];
            work[pi].data_mut()[idx] = orig + eps;
            let plus = eval(&work)?;
            work[pi].data_mut()[idx] = orig - eps;
            let minus = eval(&work)?;
            work[pi].data_mut()[idx] = orig;
            let numeric = (plus - minus) / (two * eps);
            let a = grad.data()[idx];
            let err = (a - numeric).abs() / T::one().max(a.abs());
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}
