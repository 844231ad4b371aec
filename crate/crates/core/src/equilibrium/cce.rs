use crate::equilibrium::zero_sum::softmax;
use crate::equilibrium::{JointDist, QPairMatrix};
use crate::error::{contract, Error, Result};

/// A CCE candidate with its certified deviation gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct CceSolution {
    pub dist: JointDist,
    pub gap_max: f64,
    pub gap_min: f64,
    pub iterations: usize,
}

/// Deviation gaps `(gap_max, gap_min)` of `pi`, unclamped.
///
/// `gap_max = max_a' E_pi Qbar(a', b) - E_pi Qbar`,
/// `gap_min = E_pi Qlow - min_b' E_pi Qlow(a, b')`.
pub fn verify_cce(pi: &JointDist, pair: &QPairMatrix) -> (f64, f64) {
    let up = pair.upper();
    let lo = pair.lower();
    let dev_max = up
        .times_col(&pi.col_marginal())
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let dev_min = lo
        .times_row(&pi.row_marginal())
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    (dev_max - pi.expect(up), pi.expect(lo) - dev_min)
}

/// Default iteration budget `ceil(range^2 ln max(A, B) / tol^2)`, at least 1000.
pub fn cce_budget(pair: &QPairMatrix, tol: f64) -> usize {
    let range = pair.upper().max().max(pair.lower().max()) - pair.upper().min().min(pair.lower().min());
    let n = pair.rows().max(pair.cols()) as f64;
    let b = (range * range * n.ln() / (tol * tol)).ceil();
    if b.is_finite() {
        (b as usize).max(1000)
    } else {
        usize::MAX
    }
}

/// CCE of a `(Qbar, Qlow)` pair by no-regret self-play.
pub fn solve_cce_pair(pair: &QPairMatrix, tol: f64) -> Result<CceSolution> {
    check_tol(tol)?;
    solve_cce_pair_with_budget(pair, tol, cce_budget(pair, tol)).map_err(|e| e.into())
}

/// Budget exhaustion, carrying the best iterate found.
#[derive(Debug, Clone)]
pub struct CceNotConverged {
    pub best: CceSolution,
}

impl From<CceNotConverged> for Error {
    fn from(e: CceNotConverged) -> Self {
        Error::NotConverged {
            gap_max: e.best.gap_max,
            gap_min: e.best.gap_min,
        }
    }
}

/// Optimistic hedge for both players: the row player on payoffs `Qbar`, the
/// column player on losses `Qlow`. The averaged joint play is returned once
/// both gaps are at most `tol`.
///
/// The row player's external regret after `T` rounds is exactly `T * gap_max`
/// of the averaged joint distribution (and likewise for the column player),
/// so gaps are tracked from running sums.
pub fn solve_cce_pair_with_budget(
    pair: &QPairMatrix,
    tol: f64,
    budget: usize,
) -> std::result::Result<CceSolution, CceNotConverged> {
    let (na, nb) = (pair.rows(), pair.cols());
    let up = pair.upper();
    let lo = pair.lower();
    let uniform = JointDist::product(&vec![1.0 / na as f64; na], &vec![1.0 / nb as f64; nb]);
    let (g0, g1) = verify_cce(&uniform, pair);
    let mut best = CceSolution {
        dist: uniform,
        gap_max: g0,
        gap_min: g1,
        iterations: 0,
    };
    if g0 <= tol && g1 <= tol {
        return Ok(best);
    }
    let range = (up.max().max(lo.max()) - up.min().min(lo.min())).max(f64::MIN_POSITIVE);
    let eta = 0.25 / range;

    let mut cum_row = vec![0.0; na]; // sum_t Qbar y_t
    let mut cum_col = vec![0.0; nb]; // sum_t x_t^T Qlow
    let mut last_row = vec![0.0; na];
    let mut last_col = vec![0.0; nb];
    let mut joint = vec![0.0; na * nb];
    let mut value_up = 0.0;
    let mut value_lo = 0.0;
    let mut score_row = vec![0.0; na];
    let mut score_col = vec![0.0; nb];

    for t in 1..=budget {
        for a in 0..na {
            score_row[a] = cum_row[a] + last_row[a];
        }
        for b in 0..nb {
            score_col[b] = -(cum_col[b] + last_col[b]);
        }
        let x = softmax(&score_row, eta);
        let y = softmax(&score_col, eta);
        last_row = up.times_col(&y);
        last_col = lo.times_row(&x);
        for a in 0..na {
            cum_row[a] += last_row[a];
        }
        for b in 0..nb {
            cum_col[b] += last_col[b];
        }
        value_up += x.iter().zip(&last_row).map(|(p, q)| p * q).sum::<f64>();
        value_lo += y.iter().zip(&last_col).map(|(p, q)| p * q).sum::<f64>();
        for a in 0..na {
            for b in 0..nb {
                joint[a * nb + b] += x[a] * y[b];
            }
        }

        let tf = t as f64;
        let gap_max = (cum_row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - value_up) / tf;
        let gap_min = (value_lo - cum_col.iter().copied().fold(f64::INFINITY, f64::min)) / tf;
        if gap_max.max(gap_min) < best.gap_max.max(best.gap_min) || t == budget {
            let dist = JointDist::from_raw(na, nb, joint.iter().map(|p| p / tf).collect());
            let cand = CceSolution {
                dist,
                gap_max,
                gap_min,
                iterations: t,
            };
            if gap_max <= tol && gap_min <= tol {
                return Ok(cand);
            }
            if gap_max.max(gap_min) < best.gap_max.max(best.gap_min) {
                best = cand;
            }
        }
    }
    Err(CceNotConverged { best })
}

/// CCE of a pair, falling back to the best iterate when the budget runs out.
pub(crate) fn cce_or_best(pair: &QPairMatrix, tol: f64, budget: usize) -> JointDist {
    if pair.rows() == 1 || pair.cols() == 1 {
        return single_mover(pair);
    }
    match solve_cce_pair_with_budget(pair, tol, budget) {
        Ok(sol) => sol.dist,
        Err(e) => {
            log::debug!(
                "cce budget exhausted with gaps ({:.2e}, {:.2e})",
                e.best.gap_max,
                e.best.gap_min
            );
            e.best.dist
        }
    }
}

/// Exact CCE when one side has a single action: the other side's argmax
/// (lowest index on ties) of its own matrix.
fn single_mover(pair: &QPairMatrix) -> JointDist {
    let (na, nb) = (pair.rows(), pair.cols());
    if na == 1 {
        let row = pair.lower().times_row(&[1.0]);
        let b = argmin_lowest(&row);
        JointDist::point(1, nb, 0, b)
    } else {
        let col = pair.upper().times_col(&[1.0]);
        let a = crate::msdm::oracle::argmax_lowest(&col).0;
        JointDist::point(na, 1, a, 0)
    }
}

fn argmin_lowest(xs: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        if x < best.1 {
            best = (i, x);
        }
    }
    best.0
}

fn check_tol(tol: f64) -> Result<()> {
    if tol <= 0.0 || tol.is_nan() {
        return Err(contract("tolerance must be positive"));
    }
    Ok(())
}
