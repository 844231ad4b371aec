use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Error, Result};

const RANK_TOL: f64 = 1e-10;
const MAX_FW_ITERS: usize = 100_000;

/// An approximate G-optimal design.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// One weight per input feature.
    pub weights: Vec<f64>,
    /// `max_a ||a||^2_{V(pi)^-1}` in the spanned subspace.
    pub g: f64,
    /// Dimension of the span of the features.
    pub dim: usize,
}

impl Design {
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }
}

/// Coordinates of `features` in an orthonormal basis of their span.
fn project(features: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(contract("features have different lengths"));
    }
    let x = DMatrix::from_columns(features);
    let svd = x.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("svd failed".into()))?;
    let top = svd.singular_values.max();
    let basis: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * top.max(1.0))
        .collect();
    if basis.is_empty() {
        return Err(contract("features are all zero"));
    }
    let ub = DMatrix::from_columns(&basis.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    Ok(features.iter().map(|f| ub.tr_mul(f)).collect())
}

fn gram(xs: &[DVector<f64>], w: &[f64]) -> DMatrix<f64> {
    let d = xs[0].len();
    let mut v = DMatrix::zeros(d, d);
    for (x, &p) in xs.iter().zip(w) {
        if p > 0.0 {
            v.ger(p, x, x, 1.0);
        }
    }
    v
}

/// `||x||^2_{V^-1}` for every `x`.
fn leverages(xs: &[DVector<f64>], w: &[f64]) -> Result<Vec<f64>> {
    let chol = gram(xs, w)
        .cholesky()
        .ok_or_else(|| Error::Numerical("design matrix is singular".into()))?;
    Ok(xs
        .iter()
        .map(|x| {
            let y = chol.solve(x);
            x.dot(&y)
        })
        .collect())
}

/// Frank-Wolfe on `log det V(pi)` from the uniform design, stopped once
/// `g(pi) <= d (1 + eps)`, then pruned to at most `d (d + 1) / 2` atoms.
pub fn g_optimal_design(features: &[DVector<f64>], eps: f64) -> Result<Design> {
    if features.is_empty() {
        return Err(contract("g-optimal design needs at least one arm"));
    }
    if !(eps > 0.0) {
        return Err(contract("design tolerance must be positive"));
    }
    let xs = project(features)?;
    let d = xs[0].len();
    let n = xs.len();
    let df = d as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut lev = leverages(&xs, &w)?;
    let mut iters = 0;
    loop {
        let (i, g) = crate::msdm::oracle::argmax_lowest(&lev);
        if g <= df * (1.0 + eps) || iters >= MAX_FW_ITERS {
            break;
        }
        // exact line search for log det along e_i
        let step = (g / df - 1.0) / (g - 1.0);
        for x in w.iter_mut() {
            *x *= 1.0 - step;
        }
        w[i] += step;
        lev = leverages(&xs, &w)?;
        iters += 1;
    }
    prune(&xs, &mut w)?;
    let lev = leverages(&xs, &w)?;
    let g = lev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Design { weights: w, g, dim: d })
}

/// Carathéodory pruning that keeps `V(pi)` up to a scale factor >= 1, so `g`
/// never grows.
fn prune(xs: &[DVector<f64>], w: &mut [f64]) -> Result<()> {
    let d = xs[0].len();
    let cap = d * (d + 1) / 2;
    loop {
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        if support.len() <= cap {
            return Ok(());
        }
        let m = support.len();
        // rows: upper triangle of x x^T; padded to square so the SVD exposes the null space
        let mut a = DMatrix::zeros(m.max(cap), m);
        for (c, &i) in support.iter().enumerate() {
            let x = &xs[i];
            let mut r = 0;
            for p in 0..d {
                for q in p..d {
                    a[(r, c)] = x[p] * x[q];
                    r += 1;
                }
            }
        }
        let svd = a.svd(false, true);
        let vt = svd.v_t.ok_or_else(|| Error::Numerical("svd failed".into()))?;
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
        let mut c: Vec<f64> = vt.row(k).iter().copied().collect();
        if c.iter().sum::<f64>() < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        if c.iter().all(|&x| x <= 0.0) {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        // largest step keeping weights non-negative
        let mut t = f64::INFINITY;
        let mut hit = 0;
        for (pos, &ci) in c.iter().enumerate() {
            if ci > 0.0 {
                let r = w[support[pos]] / ci;
                if r < t {
                    t = r;
                    hit = pos;
                }
            }
        }
        for (pos, &ci) in c.iter().enumerate() {
            let i = support[pos];
            w[i] = (w[i] - t * ci).max(0.0);
        }
        w[support[hit]] = 0.0;
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            return Err(Error::Numerical("design pruning lost all mass".into()));
        }
        w.iter_mut().for_each(|x| *x /= s);
    }
}

/// `g(pi)` for given weights, in the span of the features.
pub fn g_value(features: &[DVector<f64>], weights: &[f64]) -> Result<f64> {
    let xs = project(features)?;
    let lev = leverages(&xs, weights)?;
    Ok(lev.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}
