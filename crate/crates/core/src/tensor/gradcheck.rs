use super::{Element, Tape, Tensor, Var};
use crate::error::Result;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest per-coordinate relative deviation.
    pub max_rel_dev: f64,
    /// Coordinate at which `max_rel_dev` occurs.
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Coordinates whose one-sided slopes disagree in a way that does not
    /// shrink with the step: the function has a kink there.
    pub kinks: Vec<usize>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_dev <= self.tol && self.kinks.is_empty()
    }
}

/// Relative deviation with a tiny denominator floor so exact zeros on both
/// sides compare equal.
pub fn relative_deviation(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs()).max(1e-6);
    (a - n).abs() / denom
}

fn eval<T, F>(f: &F, x: &Tensor<T>) -> Result<f64>
where
    T: Element,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.leaf(x);
    let out = f(&mut tape, v)?;
    Ok(tape.scalar(out).to_f64().unwrap_or(f64::NAN))
}

/// Checks the gradient of the scalar function `f` at `point` against
/// `(f(x+h) - f(x-h)) / 2h`, coordinate by coordinate.
pub fn grad_check<T, F>(f: F, point: &Tensor<T>, h: f64, tol: f64) -> Result<GradCheckReport>
where
    T: Element,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let x = point.clone().requires_grad(true);
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    let out = f(&mut tape, v)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<f64> = grads
        .get(v)
        .expect("point is a trainable leaf")
        .iter()
        .map(|g| g.to_f64().unwrap_or(f64::NAN))
        .collect();

    let f0 = eval(&f, &x)?;
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut kinks = Vec::new();
    let (mut max_rel_dev, mut worst_index) = (0.0f64, 0);
    for i in 0..x.numel() {
        let at = |delta: f64| -> Result<f64> {
            let mut p = x.clone();
            let base = p.data()[i].to_f64().unwrap();
            p.data_mut()[i] = T::from_f64_lossy(base + delta);
            eval(&f, &p)
        };
        let (fp, fm) = (at(h)?, at(-h)?);
        let num = (fp - fm) / (2.0 * h);
        numeric.push(num);

        let wide = ((fp - f0) / h - (f0 - fm) / h).abs();
        let small_h = h / 10.0;
        let (sp, sm) = (at(small_h)?, at(-small_h)?);
        let narrow = ((sp - f0) / small_h - (f0 - sm) / small_h).abs();
        if narrow > 1e-3 * analytic[i].abs().max(1.0) && narrow > 0.5 * wide {
            kinks.push(i);
        }

        let dev = relative_deviation(analytic[i], num);
        if dev > max_rel_dev || dev.is_nan() {
            max_rel_dev = if dev.is_nan() { f64::INFINITY } else { dev };
            worst_index = i;
        }
    }
    Ok(GradCheckReport {
        max_rel_dev,
        worst_index,
        analytic,
        numeric,
        kinks,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_has_exact_unit_gradient() {
        let p = Tensor::<f64>::from_vec(vec![0.3, -1.2, 4.0]);
        let r = grad_check(|t, x| Ok(t.sum(x)), &p, 1e-3, 1e-4).unwrap();
        assert!(r.passed());
        assert!(r.max_rel_dev < 1e-9, "{}", r.max_rel_dev);
        assert!(r.analytic.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn abs_at_zero_is_flagged() {
        let p = Tensor::<f64>::from_vec(vec![0.0]);
        let r = grad_check(
            |t, x| {
                let a = t.abs(x);
                Ok(t.sum(a))
            },
            &p,
            1e-3,
            1e-4,
        )
        .unwrap();
        assert_eq!(r.kinks, vec![0]);
        assert!(!r.passed());
    }

    #[test]
    fn abs_away_from_zero_passes() {
        let p = Tensor::<f64>::from_vec(vec![0.5, -0.7]);
        let r = grad_check(
            |t, x| {
                let a = t.abs(x);
                Ok(t.sum(a))
            },
            &p,
            1e-3,
            1e-4,
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn smooth_high_curvature_not_flagged() {
        let p = Tensor::<f64>::from_vec(vec![0.2, 1.5]);
        let r = grad_check(
            |t, x| {
                let e = t.exp(x);
                let e2 = t.mul(e, e)?;
                Ok(t.sum(e2))
            },
            &p,
            1e-3,
            1e-4,
        )
        .unwrap();
        assert!(r.kinks.is_empty(), "{r:?}");
        assert!(r.passed(), "{r:?}");
    }
}
