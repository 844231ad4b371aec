use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Supported delay laws on the non-negative integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayLaw {
    Constant { c: u64 },
    /// Uniform on `lo..=hi`.
    UniformInt { lo: u64, hi: u64 },
    /// Failures before the first success, `P(tau = k) = (1-p)^k p`.
    Geometric { p: f64 },
    Poisson { lambda: f64 },
    /// `P(tau = k) = masses[k]`.
    Empirical { masses: Vec<f64> },
}

/// Sub-exponential parameters: `E exp(g (tau - E tau)) <= exp(v^2 g^2 / 2)` for `|g| <= 1/b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubExp {
    pub v: f64,
    pub b: f64,
}

/// A delay law plus optional sub-exponential bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaySampler {
    law: DelayLaw,
    subexp: Option<SubExp>,
}

impl DelaySampler {
    /// Validates the law and attaches automatic `(v, b)` where one is known.
    pub fn new(law: DelayLaw) -> Result<Self> {
        match &law {
            DelayLaw::Constant { .. } => {}
            DelayLaw::UniformInt { lo, hi } => {
                if lo > hi {
                    return Err(contract("uniform delay needs lo <= hi"));
                }
            }
            DelayLaw::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(contract("geometric delay needs 0 < p <= 1"));
                }
            }
            DelayLaw::Poisson { lambda } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(contract("poisson delay needs a finite lambda >= 0"));
                }
            }
            DelayLaw::Empirical { masses } => {
                if masses.is_empty() || masses.iter().any(|&m| m < 0.0 || !m.is_finite()) {
                    return Err(contract("empirical delay masses must be non-negative"));
                }
                let s: f64 = masses.iter().sum();
                if (s - 1.0).abs() > MASS_TOL {
                    return Err(contract(format!("empirical delay masses sum to {s}")));
                }
            }
        }
        let subexp = auto_subexp(&law);
        Ok(Self { law, subexp })
    }

    pub fn constant(c: u64) -> Self {
        Self::new(DelayLaw::Constant { c }).expect("constant law is always valid")
    }

    /// Geometric law with the given mean (`p = 1 / (1 + mean)`).
    pub fn geometric_with_mean(mean: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(contract("mean delay must be finite and non-negative"));
        }
        Self::new(DelayLaw::Geometric { p: 1.0 / (1.0 + mean) })
    }

    /// Overrides the sub-exponential parameters.
    pub fn with_subexp(mut self, v: f64, b: f64) -> Result<Self> {
        if !(v >= 0.0 && b >= 0.0 && v.is_finite() && b.is_finite()) {
            return Err(contract("sub-exponential parameters must be finite and >= 0"));
        }
        self.subexp = Some(SubExp { v, b });
        Ok(self)
    }

    pub fn law(&self) -> &DelayLaw {
        &self.law
    }

    pub fn subexp(&self) -> Option<SubExp> {
        self.subexp
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.law, DelayLaw::Constant { c: 0 })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.law {
            DelayLaw::Constant { c } => *c,
            DelayLaw::UniformInt { lo, hi } => rng.random_range(*lo..=*hi),
            DelayLaw::Geometric { p } => {
                if *p >= 1.0 {
                    0
                } else {
                    Geometric::new(*p).expect("validated").sample(rng)
                }
            }
            DelayLaw::Poisson { lambda } => {
                if *lambda == 0.0 {
                    0
                } else {
                    Poisson::new(*lambda).expect("validated").sample(rng) as u64
                }
            }
            DelayLaw::Empirical { masses } => {
                crate::msdm::sample_index(masses, rng) as u64
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.law {
            DelayLaw::Constant { c } => *c as f64,
            DelayLaw::UniformInt { lo, hi } => (*lo as f64 + *hi as f64) / 2.0,
            DelayLaw::Geometric { p } => (1.0 - p) / p,
            DelayLaw::Poisson { lambda } => *lambda,
            DelayLaw::Empirical { masses } => {
                masses.iter().enumerate().map(|(k, m)| k as f64 * m).sum()
            }
        }
    }

    /// `P(tau <= x)`.
    pub fn cdf(&self, x: u64) -> f64 {
        match &self.law {
            DelayLaw::Constant { c } => {
                if x >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            DelayLaw::UniformInt { lo, hi } => {
                if x < *lo {
                    0.0
                } else if x >= *hi {
                    1.0
                } else {
                    (x - lo + 1) as f64 / (hi - lo + 1) as f64
                }
            }
            DelayLaw::Geometric { p } => 1.0 - (1.0 - p).powf(x as f64 + 1.0),
            DelayLaw::Poisson { lambda } => {
                if *lambda == 0.0 {
                    return 1.0;
                }
                // running log-pmf keeps large lambda from underflowing at k = 0
                let ln_l = lambda.ln();
                let mut log_p = -lambda;
                let mut acc = log_p.exp();
                for k in 1..=x {
                    log_p += ln_l - (k as f64).ln();
                    acc += log_p.exp();
                }
                acc.min(1.0)
            }
            DelayLaw::Empirical { masses } => {
                let n = (x as usize).saturating_add(1).min(masses.len());
                masses[..n].iter().sum::<f64>().min(1.0)
            }
        }
    }

    /// `d(q) = min { g : P(tau <= g) >= q }` for `0 < q < 1`.
    pub fn quantile(&self, q: f64) -> Result<u64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(contract("quantile level must lie in (0, 1)"));
        }
        if self.cdf(0) >= q {
            return Ok(0);
        }
        let mut hi: u64 = 1;
        while self.cdf(hi) < q {
            hi = hi
                .checked_mul(2)
                .ok_or_else(|| Error::Numerical("quantile search overflowed".into()))?;
        }
        // cdf(lo) < q <= cdf(hi)
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.cdf(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `E[tau] + min{ sqrt(2 v^2 L), 2 b L }` with `L = log(3t / (2 delta))`.
    pub fn expected_extra(&self, delta: f64, t: u64) -> Result<f64> {
        let Some(SubExp { v, b }) = self.subexp else {
            return Err(Error::Unsupported(
                "expected_extra needs sub-exponential parameters (v, b)".into(),
            ));
        };
        if !(delta > 0.0 && delta < 1.0) || t == 0 {
            return Err(contract("need 0 < delta < 1 and t >= 1"));
        }
        let l = (3.0 * t as f64 / (2.0 * delta)).ln();
        let c = (2.0 * v * v * l).sqrt().min(2.0 * b * l);
        Ok(self.mean() + c)
    }
}

/// Known `(v, b)` per law; `None` for empirical laws.
///
/// - constant: no fluctuation, `v = b = 0`;
/// - uniform on a width-`w` range: Hoeffding gives `v = w / 2` for every
///   `g`, so any `b` is admissible; we take `b = w`;
/// - Poisson(λ): `log E e^{g(tau - λ)} = λ(e^g - 1 - g) <= (e - 2) λ g^2` for
///   `|g| <= 1`, so `v^2 = 2(e - 2)λ`, `b = 1`;
/// - geometric: the centred MGF is finite for `g < -ln(1-p)`; we take
///   `b = 2 / (-ln(1-p))` and `v^2` as 1.01 times a grid supremum of
///   `2 log M(g) / g^2` over `0 < |g| <= 1/b`.
fn auto_subexp(law: &DelayLaw) -> Option<SubExp> {
    match law {
        DelayLaw::Constant { .. } => Some(SubExp { v: 0.0, b: 0.0 }),
        DelayLaw::UniformInt { lo, hi } => {
            let w = (hi - lo) as f64;
            Some(SubExp { v: w / 2.0, b: w })
        }
        DelayLaw::Poisson { lambda } => Some(SubExp {
            v: (2.0 * (std::f64::consts::E - 2.0) * lambda).sqrt(),
            b: 1.0,
        }),
        DelayLaw::Geometric { p } => {
            let q = 1.0 - p;
            if q <= 0.0 {
                return Some(SubExp { v: 0.0, b: 0.0 });
            }
            let b = 2.0 / -q.ln();
            let mean = q / p;
            let log_mgf = |g: f64| p.ln() - (1.0 - q * g.exp()).ln() - g * mean;
            let mut sup = 0.0f64;
            let steps = 2000;
            for i in 1..=steps {
                let g = i as f64 / steps as f64 / b;
                for g in [g, -g] {
                    sup = sup.max(2.0 * log_mgf(g) / (g * g));
                }
            }
            Some(SubExp {
                v: (1.01 * sup).sqrt(),
                b,
            })
        }
        DelayLaw::Empirical { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn constant_is_constant() {
        let d = DelaySampler::constant(5);
        let mut rng = stream(1, Stream::Delay);
        assert!((0..100).all(|_| d.sample(&mut rng) == 5));
        assert_eq!(d.quantile(0.01).unwrap(), 5);
        assert_eq!(d.quantile(0.99).unwrap(), 5);
    }

    #[test]
    fn geometric_mean_monte_carlo() {
        let d = DelaySampler::new(DelayLaw::Geometric { p: 0.5 }).unwrap();
        let mut rng = stream(2, Stream::Delay);
        let n = 100_000;
        let mean = (0..n).map(|_| d.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn quantile_examples() {
        let g = DelaySampler::new(DelayLaw::Geometric { p: 0.5 }).unwrap();
        assert_eq!(g.quantile(0.5).unwrap(), 0);
        let u = DelaySampler::new(DelayLaw::UniformInt { lo: 0, hi: 9 }).unwrap();
        assert_eq!(u.quantile(0.95).unwrap(), 9);
        assert!(u.quantile(0.0).is_err());
        assert!(u.quantile(1.0).is_err());
    }

    #[test]
    fn empirical_point_mass() {
        let d = DelaySampler::new(DelayLaw::Empirical { masses: vec![1.0] }).unwrap();
        let mut rng = stream(3, Stream::Delay);
        assert!((0..50).all(|_| d.sample(&mut rng) == 0));
        assert!(matches!(d.expected_extra(0.1, 10), Err(Error::Unsupported(_))));
    }

    #[test]
    fn expected_extra_plug_in() {
        let d = DelaySampler::constant(0).with_subexp(1.0, 1.0).unwrap();
        let l = 1500f64.ln();
        let want = (2.0 * l).sqrt();
        assert!((d.expected_extra(0.1, 100).unwrap() - want).abs() < 1e-12);
        assert!((want - 3.824).abs() < 1e-3);
        let z = DelaySampler::constant(3);
        assert_eq!(z.expected_extra(0.1, 100).unwrap(), 3.0);
    }

    #[test]
    fn geometric_subexp_bounds_mgf() {
        let p = 0.3;
        let d = DelaySampler::new(DelayLaw::Geometric { p }).unwrap();
        let SubExp { v, b } = d.subexp().unwrap();
        let q = 1.0 - p;
        for i in 1..100 {
            let g = i as f64 / 100.0 / b;
            for g in [g, -g] {
                let lhs = p / (1.0 - q * f64::exp(g)) * f64::exp(-g * q / p);
                assert!(lhs <= (0.5 * v * v * g * g).exp() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(DelaySampler::new(DelayLaw::UniformInt { lo: 3, hi: 1 }).is_err());
        assert!(DelaySampler::new(DelayLaw::Geometric { p: 0.0 }).is_err());
        assert!(DelaySampler::new(DelayLaw::Empirical { masses: vec![0.5, 0.4] }).is_err());
        assert!(DelaySampler::new(DelayLaw::Poisson { lambda: -1.0 }).is_err());
    }
}
