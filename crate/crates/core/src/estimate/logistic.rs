//! Weighted logistic regression by iteratively reweighted least squares.
//!
//! Responses may be fractional in [0, 1]; the same Newton iterations then
//! maximize the Bernoulli quasi-likelihood.

use serde::Serialize;

use super::linalg::{dot, Cholesky, Matrix};
use crate::error::{Error, Result};
use crate::scalar::{expit, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions<T> {
    /// Euclidean norm of the score at which the fit counts as converged.
    pub tolerance: T,
    pub max_iter: usize,
    /// Coefficients are clamped to [-cap, cap]; hitting the cap flags separation.
    pub coefficient_cap: T,
}

impl<T: Scalar> Default for LogisticOptions<T> {
    fn default() -> Self {
        LogisticOptions { tolerance: T::fit_tolerance(), max_iter: 100, coefficient_cap: T::lit(30.0) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogisticFit<T> {
    pub coefficients: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: T,
    pub gradient_norm: T,
    /// Coefficients reached the cap: (quasi-)complete separation.
    pub separation: bool,
    /// Inverse observed information at the solution, row-major, when invertible.
    #[serde(skip)]
    pub covariance: Option<Matrix<T>>,
}

impl<T: Scalar> LogisticFit<T> {
    pub fn predict(&self, x: &[T]) -> T {
        expit(dot(x, &self.coefficients))
    }

    pub fn linear_predictor(&self, x: &[T]) -> T {
        dot(x, &self.coefficients)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Problem<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [T],
    w: Vec<T>,
    offset: Option<&'a [T]>,
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn eta(&self, beta: &[T], i: usize) -> T {
        let e = dot(self.x.row(i), beta);
        match self.offset {
            Some(o) => e + o[i],
            None => e,
        }
    }

    fn log_likelihood(&self, beta: &[T]) -> T {
        let mut ll = T::zero();
        for i in 0..self.x.rows() {
            if self.w[i] == T::zero() {
                continue;
            }
            let e = self.eta(beta, i);
            ll = ll + self.w[i] * (self.y[i] * e - softplus(e));
        }
        ll
    }

    /// Score vector and information matrix at beta.
    fn derivatives(&self, beta: &[T]) -> (Vec<T>, Matrix<T>) {
        let p = self.x.cols();
        let mut g = vec![T::zero(); p];
        let mut h = Matrix::zeros(p, p);
        for i in 0..self.x.rows() {
            let wi = self.w[i];
            if wi == T::zero() {
                continue;
            }
            let mu = expit(self.eta(beta, i));
            let r = wi * (self.y[i] - mu);
            let v = wi * mu * (T::one() - mu);
            let row = self.x.row(i);
            for a in 0..p {
                g[a] = g[a] + row[a] * r;
                let va = v * row[a];
                for b in 0..=a {
                    h.set(a, b, h.get(a, b) + va * row[b]);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h.set(b, a, h.get(a, b));
            }
        }
        (g, h)
    }
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

fn pivot_tolerance<T: Scalar>() -> T {
    T::epsilon() * T::lit(1e4)
}

/// Fit `P(y = 1 | x) = expit(x'beta)`. `weights` default to 1.
pub fn fit_logistic<T: Scalar>(
    design: &Matrix<T>,
    response: &[T],
    weights: Option<&[T]>,
    opts: &LogisticOptions<T>,
) -> Result<LogisticFit<T>> {
    fit_logistic_offset(design, response, weights, None, opts)
}

/// As [`fit_logistic`] with a fixed per-row offset added to the linear predictor.
pub fn fit_logistic_offset<T: Scalar>(
    design: &Matrix<T>,
    response: &[T],
    weights: Option<&[T]>,
    offset: Option<&[T]>,
    opts: &LogisticOptions<T>,
) -> Result<LogisticFit<T>> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::Dimension(format!("{} responses for {n} design rows", response.len())));
    }
    if weights.is_some_and(|w| w.len() != n) || offset.is_some_and(|o| o.len() != n) {
        return Err(Error::Dimension("weights/offset length differs from design rows".into()));
    }
    if p == 0 {
        return Err(Error::Dimension("design has no columns".into()));
    }
    if design.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("design contains non-finite cells".into()));
    }
    if response.iter().any(|&y| !(y >= T::zero() && y <= T::one())) {
        return Err(Error::Domain("responses must lie in [0, 1]".into()));
    }
    if offset.is_some_and(|o| o.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("offset contains non-finite values".into()));
    }
    let w = match weights {
        Some(w) => {
            if w.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
                return Err(Error::Domain("weights must be finite and nonnegative".into()));
            }
            w.to_vec()
        }
        None => vec![T::one(); n],
    };
    let prob = Problem { x: design, y: response, w, offset };

    // Rank check on the weighted Gram matrix.
    let mut gram = Matrix::<T>::zeros(p, p);
    for i in 0..n {
        let wi = prob.w[i];
        if wi == T::zero() {
            continue;
        }
        let row = design.row(i);
        for a in 0..p {
            for b in 0..=a {
                gram.set(a, b, gram.get(a, b) + wi * row[a] * row[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram.set(b, a, gram.get(a, b));
        }
    }
    Cholesky::new(&gram, pivot_tolerance::<T>()).map_err(|e| Error::Singular(format!("rank-deficient design: {e}")))?;

    let cap = opts.coefficient_cap;
    let mut beta = vec![T::zero(); p];
    let mut ll = prob.log_likelihood(&beta);
    let mut separation = false;
    let mut iterations = 0;
    let (mut grad, mut info) = prob.derivatives(&beta);

    while norm(&grad) > opts.tolerance && iterations < opts.max_iter {
        iterations += 1;
        let chol = match Cholesky::new(&info, pivot_tolerance::<T>()) {
            Ok(c) => c,
            Err(_) => {
                // Information collapsed: fitted probabilities at the boundary.
                separation = true;
                break;
            }
        };
        let step = chol.solve(&grad);
        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<T> = beta
                .iter()
                .zip(&step)
                .map(|(&b, &s)| (b + scale * s).max(-cap).min(cap))
                .collect();
            let ll_new = prob.log_likelihood(&cand);
            let slack = T::epsilon() * T::lit(16.0) * ll.abs().max(T::one());
            if ll_new >= ll - slack {
                if cand.iter().any(|b| b.abs() >= cap) {
                    separation = true;
                }
                let moved = cand.iter().zip(&beta).any(|(a, b)| a != b);
                beta = cand;
                ll = ll_new;
                accepted = moved;
                break;
            }
            scale = scale / T::lit(2.0);
        }
        let (g, h) = prob.derivatives(&beta);
        grad = g;
        info = h;
        if !accepted {
            break;
        }
    }

    let gradient_norm = norm(&grad);
    let converged = gradient_norm <= opts.tolerance;
    let covariance = Cholesky::new(&info, pivot_tolerance::<T>()).ok().map(|c| c.inverse());
    Ok(LogisticFit { coefficients: beta, converged, iterations, log_likelihood: ll, gradient_norm, separation, covariance })
}
