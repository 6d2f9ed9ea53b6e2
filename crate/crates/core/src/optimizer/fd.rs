//! Central finite differences with steps that respect the evaluation domain.

use nalgebra::{DMatrix, DVector};

/// Maximum number of step halvings when a stencil point leaves the domain.
const MAX_HALVINGS: usize = 60;

/// Central-difference gradient with per-coordinate steps `steps`.
///
/// `f` returns `None` outside its domain; a step whose stencil leaves the
/// domain is halved until both points evaluate. Returns `None` if that never
/// happens for some coordinate.
pub fn central_gradient<F>(f: &F, x: &DVector<f64>, steps: &[f64]) -> Option<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Option<f64>,
{
    let n = x.len();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let mut h = steps[i];
        let mut done = false;
        for _ in 0..MAX_HALVINGS {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            if let (Some(fp), Some(fm)) = (f(&xp), f(&xm)) {
                g[i] = (fp - fm) / (xp[i] - xm[i]);
                done = true;
                break;
            }
            h *= 0.5;
        }
        if !done {
            return None;
        }
    }
    Some(g)
}

/// Central-difference gradient and Hessian sharing one set of steps.
///
/// Steps are shrunk (jointly, per coordinate) until every stencil point of
/// the four-point mixed formula lies in the domain.
pub fn central_gradient_hessian<F>(
    f: &F,
    x: &DVector<f64>,
    steps: &[f64],
) -> Option<(DVector<f64>, DMatrix<f64>)>
where
    F: Fn(&DVector<f64>) -> Option<f64>,
{
    let n = x.len();
    let f0 = f(x)?;
    let mut h: Vec<f64> = steps.to_vec();

    // Shrink each coordinate's step until x ± h_i evaluates.
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for i in 0..n {
        let mut ok = false;
        for _ in 0..MAX_HALVINGS {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h[i];
            xm[i] -= h[i];
            if let (Some(fp), Some(fm)) = (f(&xp), f(&xm)) {
                plus[i] = fp;
                minus[i] = fm;
                ok = true;
                break;
            }
            h[i] *= 0.5;
        }
        if !ok {
            return None;
        }
    }

    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        grad[i] = (plus[i] - minus[i]) / (2.0 * h[i]);
        hess[(i, i)] = (plus[i] - 2.0 * f0 + minus[i]) / (h[i] * h[i]);
    }

    for i in 0..n {
        for j in (i + 1)..n {
            let mut hi = h[i];
            let mut hj = h[j];
            let mut value = None;
            for _ in 0..MAX_HALVINGS {
                let at = |si: f64, sj: f64| {
                    let mut p = x.clone();
                    p[i] += si * hi;
                    p[j] += sj * hj;
                    f(&p)
                };
                if let (Some(pp), Some(pm), Some(mp), Some(mm)) =
                    (at(1.0, 1.0), at(1.0, -1.0), at(-1.0, 1.0), at(-1.0, -1.0))
                {
                    value = Some((pp - pm - mp + mm) / (4.0 * hi * hj));
                    break;
                }
                hi *= 0.5;
                hj *= 0.5;
            }
            let v = value?;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Some((grad, hess))
}

/// Relative steps `rel · max(|x_i|, 1)`.
pub fn relative_steps(x: &DVector<f64>, rel: f64) -> Vec<f64> {
    x.iter().map(|v| rel * v.abs().max(1.0)).collect()
}
