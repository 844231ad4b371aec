use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = a x^k`, fitted in log-log coordinates.
    Power,
    /// `y = a + k x`.
    Affine,
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(FitModel::Power),
            "affine" => Ok(FitModel::Affine),
            other => Err(Error::Contract(format!("unknown fit model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub model: FitModel,
    /// Exponent (power) or slope (affine).
    pub coefficient: f64,
    /// `ln a` (power) or `a` (affine).
    pub intercept: f64,
    /// Coefficient of determination in the fitted coordinates.
    pub r2: f64,
    pub n: usize,
}

/// Least-squares scaling fit.
pub fn fit_scaling(points: &[(f64, f64)], model: FitModel) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::Numerical(format!("need at least 3 points, got {}", points.len())));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Numerical("non-finite point".into()));
        }
        match model {
            FitModel::Power => {
                if x <= 0.0 {
                    return Err(Error::Numerical(format!("power fit needs x > 0, got {x}")));
                }
                if y <= 0.0 {
                    return Err(Error::Numerical(format!("power fit needs y > 0, got {y}")));
                }
                xs.push(x.ln());
                ys.push(y.ln());
            }
            FitModel::Affine => {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let scale = xs.iter().map(|x| x.abs()).fold(1.0, f64::max);
    if sxx <= 1e-24 * scale * scale * n {
        return Err(Error::Numerical("x values have no spread".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let k = sxy / sxx;
    let a = my - k * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - k * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res <= 1e-24 { 1.0 } else { 0.0 };
    Ok(Fit {
        model,
        coefficient: k,
        intercept: a,
        r2,
        n: points.len(),
    })
}

/// Reads `(x, y)` from two named columns of a CSV file; rows whose `y`
/// column does not parse (such as failure sentinels) are skipped.
pub fn read_points(path: &std::path::Path, x_col: &str, y_col: &str) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Contract(format!("{}: no column {name:?}", path.display())))
    };
    let (xi, yi) = (find(x_col)?, find(y_col)?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if let (Some(Ok(x)), Some(Ok(y))) = (rec.get(xi).map(str::parse), rec.get(yi).map(str::parse)) {
            out.push((x, y));
        }
    }
    Ok(out)
}
