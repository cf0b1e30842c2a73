//! Piecewise-linear Hasse-Herbrand calculus over exact rationals: phi_G and
//! psi_G from filtration data, lower/upper numbering conversion, and the
//! ramification-index integral.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::nottingham::FiniteFiltration;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Continuous, strictly increasing, piecewise-linear function with value 0 at 0,
/// defined on [0, infinity). slopes[i] applies on [breakpoints[i-1], breakpoints[i]]
/// (with breakpoints[-1] = 0); the final slope applies beyond the last breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<BigRational>,
    pub slopes: Vec<BigRational>,
}

impl PiecewiseLinear {
    pub fn identity() -> Self {
        PiecewiseLinear { breakpoints: Vec::new(), slopes: vec![BigRational::one()] }
    }

    pub fn new(breakpoints: Vec<BigRational>, slopes: Vec<BigRational>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::Schema {
                path: "slopes".into(),
                msg: format!(
                    "need {} slopes for {} breakpoints",
                    breakpoints.len() + 1,
                    breakpoints.len()
                ),
            });
        }
        let zero = BigRational::zero();
        let mut prev: Option<&BigRational> = None;
        for b in &breakpoints {
            if *b <= zero {
                return Err(Error::Schema {
                    path: "breakpoints".into(),
                    msg: "breakpoints must be positive".into(),
                });
            }
            if let Some(p) = prev {
                if b <= p {
                    return Err(Error::Schema {
                        path: "breakpoints".into(),
                        msg: "breakpoints must be strictly increasing".into(),
                    });
                }
            }
            prev = Some(b);
        }
        for s in &slopes {
            if !s.is_positive() {
                return Err(Error::Schema {
                    path: "slopes".into(),
                    msg: "slopes must be positive".into(),
                });
            }
        }
        Ok(PiecewiseLinear { breakpoints, slopes })
    }

    pub fn eval(&self, x: &BigRational) -> Result<BigRational> {
        if x.is_negative() {
            return Err(Error::Schema {
                path: "x".into(),
                msg: "evaluation domain is [0, infinity)".into(),
            });
        }
        let mut acc = BigRational::zero();
        let mut pos = BigRational::zero();
        for (i, b) in self.breakpoints.iter().enumerate() {
            if x <= b {
                return Ok(acc + (x - &pos) * &self.slopes[i]);
            }
            acc += (b - &pos) * &self.slopes[i];
            pos = b.clone();
        }
        Ok(acc + (x - &pos) * self.slopes.last().unwrap())
    }

    /// Exact functional inverse; breakpoints map to their images, slopes invert.
    pub fn inverse(&self) -> Result<PiecewiseLinear> {
        let mut bp = Vec::with_capacity(self.breakpoints.len());
        for b in &self.breakpoints {
            bp.push(self.eval(b)?);
        }
        let slopes = self.slopes.iter().map(|s| s.recip()).collect();
        PiecewiseLinear::new(bp, slopes)
    }
}

/// phi_G(s) = integral over [0, s] of dt / (G : G[t]), exact.
pub fn phi_from_filtration(filt: &FiniteFiltration) -> Result<PiecewiseLinear> {
    for &idx in &filt.indices {
        if idx == 0 {
            return Err(Error::Schema {
                path: "indices".into(),
                msg: "filtration indices must be positive".into(),
            });
        }
    }
    if filt.breaks.is_empty() {
        return Ok(PiecewiseLinear::identity());
    }
    let breakpoints = filt.breaks.iter().map(|&b| rat_int(b)).collect();
    let slopes = filt
        .indices
        .iter()
        .map(|&idx| BigRational::new(BigInt::one(), BigInt::from(idx)))
        .collect();
    PiecewiseLinear::new(breakpoints, slopes)
}

/// psi_G, the inverse of phi_G.
pub fn psi_from_filtration(filt: &FiniteFiltration) -> Result<PiecewiseLinear> {
    phi_from_filtration(filt)?.inverse()
}

/// Upper-numbering breaks u_m = phi_G(l_m).
pub fn upper_breaks(filt: &FiniteFiltration) -> Result<Vec<BigRational>> {
    let phi = phi_from_filtration(filt)?;
    filt.breaks.iter().map(|&b| phi.eval(&rat_int(b))).collect()
}

/// Min and max of x / (G : G[x]) sampled at every break across the given levels.
/// A finite-window surrogate for the liminf/limsup criterion; the verdict is
/// left to the criterion module.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionWindow {
    pub min_ratio: BigRational,
    pub max_ratio: BigRational,
    pub samples: Vec<BigRational>,
}

pub fn criterion_window(filts: &[FiniteFiltration]) -> Result<CriterionWindow> {
    let mut samples = Vec::new();
    for filt in filts {
        for (j, &b) in filt.breaks.iter().enumerate() {
            // G[x] at x = break is the closed condition i >= x, so the index
            // on the interval ending at the break applies
            let idx = filt.indices[j];
            samples.push(rat_int(b) / rat_int(idx));
        }
    }
    if samples.is_empty() {
        return Err(Error::TooFewEntries { need: 1, have: 0 });
    }
    let mut min = samples[0].clone();
    let mut max = samples[0].clone();
    for s in &samples[1..] {
        if s < &min {
            min = s.clone();
        }
        if s > &max {
            max = s.clone();
        }
    }
    Ok(CriterionWindow { min_ratio: min, max_ratio: max, samples })
}

/// Synthetic filtration with breaks q^l - 1 for l in [r, l_max] and index
/// q^(l - r) on the interval ending at the break q^l - 1 (so the index above
/// the break q^l - 1 is q^(l + 1 - r)). This is the shape the unit-group
/// filtration of level r produces.
pub fn synthetic_unit_filtration(q: u64, r: u32, l_max: u32) -> Result<FiniteFiltration> {
    if l_max < r {
        return Err(Error::Schema {
            path: "l_max".into(),
            msg: "l_max must be >= r".into(),
        });
    }
    let mut breaks = Vec::new();
    let mut indices = Vec::new();
    for l in r..=l_max {
        breaks.push(q.pow(l) - 1);
        indices.push(q.pow(l - r));
    }
    indices.push(q.pow(l_max + 1 - r));
    FiniteFiltration::from_data(0, breaks, indices)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_single_break() {
        let filt = FiniteFiltration::from_data(1, vec![3], vec![1, 2]).unwrap();
        let phi = phi_from_filtration(&filt).unwrap();
        assert_eq!(phi.eval(&rat_int(7)).unwrap(), rat_int(5)); // 3 + 4/2
        assert_eq!(phi.eval(&rat_int(3)).unwrap(), rat_int(3));
    }

    #[test]
    fn phi_identity_on_trivial() {
        let filt = FiniteFiltration::trivial(1);
        let phi = phi_from_filtration(&filt).unwrap();
        assert_eq!(phi, PiecewiseLinear::identity());
        assert_eq!(phi.eval(&rat(17, 3)).unwrap(), rat(17, 3));
    }

    #[test]
    fn inverse_round_trip() {
        let filt = FiniteFiltration::from_data(2, vec![3, 7, 15], vec![1, 2, 4, 8]).unwrap();
        let phi = phi_from_filtration(&filt).unwrap();
        let psi = phi.inverse().unwrap();
        assert_eq!(psi.eval(&rat_int(5)).unwrap(), rat_int(7));
        assert_eq!(psi.inverse().unwrap(), phi);
        for (n, d) in [(1i64, 1i64), (7, 2), (22, 3), (100, 7), (5, 1)] {
            let x = rat(n, d);
            let y = phi.eval(&x).unwrap();
            assert_eq!(psi.eval(&y).unwrap(), x);
        }
        assert_eq!(
            PiecewiseLinear::identity().inverse().unwrap(),
            PiecewiseLinear::identity()
        );
    }

    #[test]
    fn upper_breaks_cyclic() {
        let filt = FiniteFiltration::from_data(3, vec![3, 7, 15], vec![1, 2, 4, 8]).unwrap();
        let u = upper_breaks(&filt).unwrap();
        assert_eq!(u, vec![rat_int(3), rat_int(5), rat_int(7)]);
    }

    #[test]
    fn upper_break_first_equals_lower() {
        let filt = FiniteFiltration::from_data(1, vec![9], vec![1, 3]).unwrap();
        let u = upper_breaks(&filt).unwrap();
        assert_eq!(u, vec![rat_int(9)]);
    }

    #[test]
    fn ramification_index_integral() {
        // phi(q^(l+e) - 1) - phi(q^l - 1) = q^(r-1) (q-1) e
        for q in [2u64, 3, 4] {
            for r in [2u32, 3] {
                for e in [1u32, 2] {
                    for l in [r, r + 1] {
                        let filt = synthetic_unit_filtration(q, r, l + e + 1).unwrap();
                        let phi = phi_from_filtration(&filt).unwrap();
                        let hi = phi.eval(&rat_int(q.pow(l + e) - 1)).unwrap();
                        let lo = phi.eval(&rat_int(q.pow(l) - 1)).unwrap();
                        let expect = rat_int(q.pow(r - 1) * (q - 1) * e as u64);
                        assert_eq!(hi - lo, expect, "q={} r={} e={} l={}", q, r, e, l);
                    }
                }
            }
        }
    }

    #[test]
    fn window_bounded_vs_unbounded() {
        // char-0 shape: breaks 2^l - 1, index 2^(l-2) at the break, l = 2..5
        let filt = synthetic_unit_filtration(2, 2, 5).unwrap();
        let win = criterion_window(&[filt]).unwrap();
        assert!(win.min_ratio >= rat_int(2) && win.max_ratio <= rat_int(8));

        // the x + x^2 shape: breaks 2^(2^n) - 1 with index 2^n at the break
        let mut breaks = Vec::new();
        let mut indices = Vec::new();
        for n in 0..5u32 {
            breaks.push(2u64.pow(2u32.pow(n)) - 1);
            indices.push(2u64.pow(n));
        }
        indices.push(2u64.pow(5));
        let wild = FiniteFiltration::from_data(0, breaks, indices).unwrap();
        let win2 = criterion_window(&[wild]).unwrap();
        assert!(win2.max_ratio > rat_int(1000.min(2u64.pow(31) / 32)));

        // single sample: min = max
        let single = FiniteFiltration::from_data(1, vec![3], vec![1, 2]).unwrap();
        let win3 = criterion_window(&[single]).unwrap();
        assert_eq!(win3.min_ratio, win3.max_ratio);
    }

    #[test]
    fn slope_monotonicity_of_phi_and_psi() {
        let filt = FiniteFiltration::from_data(2, vec![3, 7, 15], vec![1, 2, 4, 8]).unwrap();
        let phi = phi_from_filtration(&filt).unwrap();
        for w in phi.slopes.windows(2) {
            assert!(w[1] <= w[0]); // 1/(G:G[t]) nonincreasing
        }
        let psi = phi.inverse().unwrap();
        for w in psi.slopes.windows(2) {
            assert!(w[1] >= w[0]); // (G:G(t)) nondecreasing
        }
    }
}
