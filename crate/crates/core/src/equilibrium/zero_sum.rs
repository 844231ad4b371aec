use crate::equilibrium::Matrix;
use crate::error::{contract, Error, Result};

const PIVOT_EPS: f64 = 1e-12;

/// Equilibrium of a zero-sum matrix game; the row player maximizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSumSolution {
    pub value: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    /// `max_a (M col)_a - min_b (row^T M)_b`.
    pub gap: f64,
}

/// Duality gap of a strategy pair.
pub fn duality_gap(m: &Matrix, row: &[f64], col: &[f64]) -> f64 {
    let best_row = m.times_col(col).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let best_col = m.times_row(row).into_iter().fold(f64::INFINITY, f64::min);
    best_row - best_col
}

/// Solves the game exactly with a simplex LP, then certifies the duality gap.
///
/// The column player's program `max 1^T w  s.t.  M' w <= 1, w >= 0` on the
/// shifted, strictly positive matrix `M'` is solved from the slack basis; the
/// row strategy is read off the optimal duals.
pub fn solve_zero_sum(m: &Matrix, tol: f64) -> Result<ZeroSumSolution> {
    if tol <= 0.0 || tol.is_nan() {
        return Err(contract("tolerance must be positive"));
    }
    let (na, nb) = (m.rows(), m.cols());
    let lo = m.min();
    if m.max() - lo == 0.0 {
        let row = vec![1.0 / na as f64; na];
        let col = vec![1.0 / nb as f64; nb];
        return Ok(ZeroSumSolution {
            value: lo,
            row,
            col,
            gap: 0.0,
        });
    }
    let shift = 1.0 - lo;
    let width = nb + na + 1;
    let mut t = vec![0.0; (na + 1) * width];
    for a in 0..na {
        let r = &mut t[a * width..(a + 1) * width];
        for b in 0..nb {
            r[b] = m.get(a, b) + shift;
        }
        r[nb + a] = 1.0;
        r[width - 1] = 1.0;
    }
    let obj = na * width;
    for b in 0..nb {
        t[obj + b] = -1.0;
    }
    let mut basis: Vec<usize> = (nb..nb + na).collect();

    // Bland's rule: lowest entering index, ties in the ratio test by lowest basis index.
    let max_pivots = 50 * (na + nb + 1) * (na + nb + 1);
    let mut pivots = 0;
    while let Some(enter) = (0..width - 1).find(|&c| t[obj + c] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for a in 0..na {
            let coef = t[a * width + enter];
            if coef > PIVOT_EPS {
                let ratio = t[a * width + width - 1] / coef;
                leave = match leave {
                    None => Some((a, ratio)),
                    Some((r, best)) => {
                        if ratio < best - PIVOT_EPS
                            || (ratio <= best + PIVOT_EPS && basis[a] < basis[r])
                        {
                            Some((a, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((p, _)) = leave else {
            return Err(Error::Numerical("zero-sum LP reported unbounded".into()));
        };
        pivot(&mut t, width, p, enter);
        basis[p] = enter;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numerical("simplex pivot limit reached".into()));
        }
    }

    let total = t[obj + width - 1];
    let mut col = vec![0.0; nb];
    for (a, &var) in basis.iter().enumerate() {
        if var < nb {
            col[var] = t[a * width + width - 1].max(0.0);
        }
    }
    let mut row: Vec<f64> = (0..na).map(|a| t[obj + nb + a].max(0.0)).collect();
    normalize(&mut col);
    normalize(&mut row);
    let value = 1.0 / total - shift;
    let gap = duality_gap(m, &row, &col);
    if gap > tol {
        return Err(Error::NotConverged {
            gap_max: gap,
            gap_min: gap,
        });
    }
    Ok(ZeroSumSolution {
        value,
        row,
        col,
        gap,
    })
}

fn pivot(t: &mut [f64], width: usize, p: usize, c: usize) {
    let pv = t[p * width + c];
    for x in &mut t[p * width..(p + 1) * width] {
        *x /= pv;
    }
    let prow: Vec<f64> = t[p * width..(p + 1) * width].to_vec();
    for (r, chunk) in t.chunks_mut(width).enumerate() {
        if r == p {
            continue;
        }
        let f = chunk[c];
        if f != 0.0 {
            for (x, y) in chunk.iter_mut().zip(&prow) {
                *x -= f * y;
            }
        }
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Symmetric multiplicative-weights self-play with averaged iterates.
///
/// Slow (iterations grow like `1/tol^2`) but independent of the LP; kept as a
/// cross-check.
pub fn solve_zero_sum_mwu(m: &Matrix, tol: f64, max_iter: usize) -> Result<ZeroSumSolution> {
    if tol <= 0.0 || tol.is_nan() {
        return Err(contract("tolerance must be positive"));
    }
    let (na, nb) = (m.rows(), m.cols());
    let range = m.max() - m.min();
    let mut row_avg = vec![1.0 / na as f64; na];
    let mut col_avg = vec![1.0 / nb as f64; nb];
    if range == 0.0 {
        return Ok(ZeroSumSolution {
            value: m.get(0, 0),
            row: row_avg,
            col: col_avg,
            gap: 0.0,
        });
    }
    let eta_row = (8.0 * (na as f64).ln().max(1e-3)).sqrt() / range;
    let eta_col = (8.0 * (nb as f64).ln().max(1e-3)).sqrt() / range;
    let mut cum_row = vec![0.0; na];
    let mut cum_col = vec![0.0; nb];
    let mut sum_x = vec![0.0; na];
    let mut sum_y = vec![0.0; nb];
    let mut gap = f64::INFINITY;
    for t in 1..=max_iter {
        let scale = 1.0 / (t as f64).sqrt();
        let x = softmax(&cum_row, eta_row * scale);
        let y = softmax(&cum_col.iter().map(|c| -c).collect::<Vec<_>>(), eta_col * scale);
        for (s, v) in sum_x.iter_mut().zip(&x) {
            *s += v;
        }
        for (s, v) in sum_y.iter_mut().zip(&y) {
            *s += v;
        }
        for (c, v) in cum_row.iter_mut().zip(m.times_col(&y)) {
            *c += v;
        }
        for (c, v) in cum_col.iter_mut().zip(m.times_row(&x)) {
            *c += v;
        }
        if t % 64 == 0 || t == max_iter {
            row_avg = sum_x.iter().map(|s| s / t as f64).collect();
            col_avg = sum_y.iter().map(|s| s / t as f64).collect();
            gap = duality_gap(m, &row_avg, &col_avg);
            if gap <= tol {
                break;
            }
        }
    }
    if gap > tol {
        return Err(Error::NotConverged {
            gap_max: gap,
            gap_min: gap,
        });
    }
    let upper = m.times_col(&col_avg).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let lower = m.times_row(&row_avg).into_iter().fold(f64::INFINITY, f64::min);
    Ok(ZeroSumSolution {
        value: 0.5 * (upper + lower),
        row: row_avg,
        col: col_avg,
        gap,
    })
}

/// `p_i ∝ exp(eta * score_i)`, shifted for stability.
pub(crate) fn softmax(score: &[f64], eta: f64) -> Vec<f64> {
    let top = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = score.iter().map(|s| (eta * (s - top)).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}
