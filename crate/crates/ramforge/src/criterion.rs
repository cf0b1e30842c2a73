//! The executable checks behind the characteristic-zero criterion: height,
//! Sen congruence and the exponential lower bound, the p^d difference-ratio
//! test with kappa detection, the closed form, and the Weierstrass-degree
//! predictors for Lubin-Tate-derived elements.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lubintate::FrobeniusSeries;
use crate::nottingham::{RamEntry, RamProfile};
use crate::ring::{OKElem, OkRing, Valuation};
use crate::series::{CoeffRing, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Some kappa in the window makes every tested ratio equal p^d.
    CharZeroConsistent,
    /// At least two ratios computed and no admissible kappa exists.
    CharPIndicated,
    /// The window is too small to separate the two (a single mismatched ratio).
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CharZeroConsistent => "CHAR_ZERO_CONSISTENT",
            Verdict::CharPIndicated => "CHAR_P_INDICATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub profile: Vec<u64>,
    pub d_expected: u32,
    pub kappa_found: Option<usize>,
    pub ratio_values: Vec<BigRational>,
    pub verdict: Verdict,
    pub lambda_observed: Option<BigRational>,
}

/// Exact rational height e * log_p(wideg) / v_K(g'(0)).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightValue {
    pub numerator: u64,
    pub denominator: u64,
    pub is_integer: bool,
}

impl HeightValue {
    fn new(num: u64, den: u64) -> Self {
        let g = gcd(num, den);
        let (n, d) = (num / g, den / g);
        HeightValue { numerator: n, denominator: d, is_integer: d == 1 }
    }

    pub fn as_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.numerator), BigInt::from(self.denominator))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// hgt(g) = e * log_p(wideg(g)) / v_K(g'(0)) for a stable noninvertible g.
pub fn height(g: &Series<OkRing>) -> Result<HeightValue> {
    let ring = g.ring().clone();
    let s = match ring.valuation(g.d0()) {
        Valuation::Finite(0) => {
            return Err(Error::NotStable("g'(0) is a unit; g is invertible".into()))
        }
        Valuation::Finite(v) => v,
        Valuation::InfiniteAtPrecision => {
            return Err(Error::NotStable(
                "g'(0) is indistinguishable from 0 at the carried precision".into(),
            ))
        }
    };
    let w = g.wideg()? as u64;
    let p = ring.p();
    let mut a = 0u64;
    let mut acc = 1u64;
    while acc < w {
        acc = acc.checked_mul(p).ok_or(Error::NotPPower(w))?;
        a += 1;
    }
    if acc != w {
        return Err(Error::NotPPower(w));
    }
    Ok(HeightValue::new(ring.e() as u64 * a, s as u64))
}

/// Sen congruence i_n = i_(n-1) (mod p^n) over every consecutive finite pair.
pub fn sen_check(profile: &RamProfile) -> Result<bool> {
    let fin = profile.finite_prefix();
    if fin.len() < 2 {
        return Err(Error::TooFewEntries { need: 2, have: fin.len() });
    }
    let p = BigUint::from(profile.p);
    for n in 1..fin.len() {
        let modulus = p.pow(n as u32);
        let diff = BigUint::from(fin[n] - fin[n - 1]);
        if !(diff % &modulus).is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// i_n >= 1 + p + ... + p^n for every finite entry.
pub fn lower_bound_check(profile: &RamProfile) -> bool {
    let p = BigUint::from(profile.p);
    let mut bound = BigUint::one();
    let mut ppow = BigUint::one();
    for (n, entry) in profile.values.iter().enumerate() {
        if n > 0 {
            ppow *= &p;
            bound += &ppow;
        }
        if let RamEntry::Finite(i) = entry {
            if BigUint::from(*i) < bound {
                return false;
            }
        }
    }
    true
}

/// Difference-ratio test: ratios r_n = (i_(n+2) - i_(n+1)) / (i_(n+1) - i_n),
/// kappa = least index from which every tested ratio equals p^d.
pub fn ratio_check(profile: &RamProfile, d_expected: u32) -> Result<CriterionReport> {
    let fin = profile.finite_prefix();
    if fin.len() < 3 {
        return Err(Error::TooFewEntries { need: 3, have: fin.len() });
    }
    let mut ratios = Vec::with_capacity(fin.len() - 2);
    for n in 0..fin.len() - 2 {
        let num = BigInt::from(fin[n + 2] - fin[n + 1]);
        let den = BigInt::from(fin[n + 1] - fin[n]);
        ratios.push(BigRational::new(num, den));
    }
    let target = BigRational::from_integer(BigInt::from(profile.p).pow(d_expected));
    let mut kappa_found = None;
    for kappa in 0..ratios.len() {
        if ratios[kappa..].iter().all(|r| *r == target) {
            kappa_found = Some(kappa);
            break;
        }
    }
    let verdict = match (kappa_found, ratios.len()) {
        (Some(_), _) => Verdict::CharZeroConsistent,
        (None, 1) => Verdict::Inconclusive,
        (None, _) => Verdict::CharPIndicated,
    };
    let lambda_observed = stabilized_log_p(&ratios, profile.p);
    Ok(CriterionReport {
        profile: fin,
        d_expected,
        kappa_found,
        ratio_values: ratios,
        verdict,
        lambda_observed,
    })
}

/// log_p of the constant tail value of the ratio sequence, when that value is
/// an exact power of p.
fn stabilized_log_p(ratios: &[BigRational], p: u64) -> Option<BigRational> {
    let last = ratios.last()?;
    if !ratios.iter().rev().take_while(|r| *r == last).count() >= 1 {
        return None;
    }
    if !last.is_integer() || !last.is_positive() {
        return None;
    }
    let mut v = last.to_integer();
    let p = BigInt::from(p);
    let mut k = 0i64;
    while (&v % &p).is_zero() {
        v /= &p;
        k += 1;
    }
    if v.is_one() && k > 0 {
        Some(BigRational::from_integer(BigInt::from(k)))
    } else {
        None
    }
}

/// Closed form i_n = i_kappa + (p^(d(n-kappa)) - 1)/(p^d - 1) * (i_(kappa+1) - i_kappa).
pub fn closed_form_predict(
    i_kappa: &BigInt,
    i_kappa_plus_1: &BigInt,
    d: u32,
    p: u64,
    n_minus_kappa: u32,
) -> Result<BigInt> {
    let pd = BigInt::from(p).pow(d);
    let num = BigInt::from(p).pow(d * n_minus_kappa) - BigInt::one();
    let den = &pd - BigInt::one();
    if (&num % &den) != BigInt::zero() {
        return Err(Error::NotIntegral);
    }
    let quot = num / den;
    Ok(i_kappa + quot * (i_kappa_plus_1 - i_kappa))
}

/// i_n + 1 = q^(l + n e), valid under the hypothesis l > e/(p-1).
pub fn predict_in(ring: &OkRing, l: u32, n: u32) -> Result<BigInt> {
    if (l as u64) * (ring.p() - 1) <= ring.e() as u64 {
        return Err(Error::HypothesisViolated(format!(
            "predict_in needs l > e/(p-1): l = {}, e = {}, p = {}",
            l,
            ring.e(),
            ring.p()
        )));
    }
    Ok(BigInt::from(ring.q()).pow(l + n * ring.e() as u32) - BigInt::one())
}

/// Lemma-style predictor: if m v(g'(0)) = v(u'(0)^(p^n) - 1) for an integer m,
/// the predicted i_n of the reduction of u is wideg(g^(o m)) - 1.
pub fn findin_predict(g: &Series<OkRing>, u: &Series<OkRing>, n: u32) -> Result<u64> {
    let ring = g.ring().clone();
    if u.ring() != &ring {
        return Err(Error::RingMismatch("g and u over different rings".into()));
    }
    let s = match ring.valuation(g.d0()) {
        Valuation::Finite(v) if v > 0 => v,
        _ => return Err(Error::NotStable("g must be stable noninvertible".into())),
    };
    if !matches!(ring.valuation(u.d0()), Valuation::Finite(0)) {
        return Err(Error::NotInvertible);
    }
    let pn = BigUint::from(ring.p()).pow(n);
    let upow = ring.pow_bigint(u.d0(), &pn)?;
    let diff = ring.sub(&upow, &ring.one())?;
    let v = match ring.valuation(&diff) {
        Valuation::Finite(v) => v,
        Valuation::InfiniteAtPrecision => {
            return Err(Error::InsufficientPrecision(format!(
                "v(u'(0)^(p^{}) - 1) exceeds the carried precision",
                n
            )))
        }
    };
    if v % s != 0 {
        return Err(Error::NoMatchingM);
    }
    let m = (v / s) as u64;
    let gm = g.iterate(m)?;
    let w = gm.wideg()? as u64;
    Ok(w - 1)
}

/// Ramification profile of the reduction of [alpha]_F, each level computed
/// directly from the endomorphism [alpha^(p^n)]_F rather than by composing
/// large-degree series. d_levels[n] is the x-truncation used at level n.
pub fn ram_profile_via_endos(
    f: &FrobeniusSeries,
    alpha: &OKElem,
    d_levels: &[usize],
) -> Result<RamProfile> {
    let ring = f.ring().clone();
    if !matches!(ring.valuation(alpha), Valuation::Finite(0)) {
        return Err(Error::NotInvertible);
    }
    let p = ring.p();
    let mut values = Vec::with_capacity(d_levels.len());
    let mut beta = alpha.clone();
    for (n, &d) in d_levels.iter().enumerate() {
        if n > 0 {
            beta = ring.pow_u64(&beta, p)?;
        }
        let endo = crate::lubintate::lt_solve(f, f, &beta, d, 1)?;
        let red = endo.reduce()?;
        let x = Series::x(red.ring(), d);
        let diff = red.sub(&x)?;
        match diff.order() {
            Some(ord) => values.push(RamEntry::Finite(ord as u64 - 1)),
            None => values.push(RamEntry::IdentityAtPrecision),
        }
    }
    let trunc = d_levels.iter().copied().max().unwrap_or(1);
    let profile = RamProfile { p, trunc, values };
    profile.check_strictly_increasing()?;
    Ok(profile)
}

/// Truncation that comfortably contains the predicted i_n when the
/// U^(l)-hypothesis applies; falls back to `cap` otherwise.
pub fn suggested_levels(ring: &OkRing, l: u32, n_max: u32, cap: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for n in 0..=n_max {
        let d = match predict_in(ring, l, n) {
            Ok(v) => {
                use num_traits::ToPrimitive;
                (v + BigInt::from(3)).to_usize().unwrap_or(cap).min(cap)
            }
            Err(_) => cap,
        };
        out.push(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lubintate::FrobeniusSeries;
    use crate::nottingham::{ram_sequence, NottElem};
    use crate::ring::{Fq, RingSpec};

    fn z2(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(2, 1, 1, n).unwrap()).unwrap()
    }

    fn profile(p: u64, vals: &[u64]) -> RamProfile {
        RamProfile {
            p,
            trunc: 64,
            values: vals.iter().map(|&v| RamEntry::Finite(v)).collect(),
        }
    }

    #[test]
    fn height_examples() {
        let r = z2(8);
        let mut g = Series::zero(&r, 4);
        g.set_coeff(1, r.int(2));
        g.set_coeff(2, r.one());
        let h = height(&g).unwrap();
        assert_eq!((h.numerator, h.denominator), (1, 1));

        let mut g4 = Series::zero(&r, 4);
        g4.set_coeff(1, r.int(4));
        g4.set_coeff(2, r.one());
        let h = height(&g4).unwrap();
        assert_eq!((h.numerator, h.denominator), (1, 2));
        assert!(!h.is_integer);

        // pi x + x^q has height e*f on every test ring
        for (p, f, e) in [(2, 1, 1), (3, 1, 1), (2, 2, 1), (2, 1, 2), (3, 1, 2)] {
            let ring = OkRing::new(RingSpec::standard(p, f, e, 10).unwrap()).unwrap();
            let frob = FrobeniusSeries::canonical(&ring);
            let s = frob.as_series(ring.q() as usize + 1);
            let h = height(&s).unwrap();
            assert!(h.is_integer);
            assert_eq!(h.numerator, (e * f) as u64, "ring ({},{},{})", p, f, e);
        }
    }

    #[test]
    fn sen_examples() {
        assert!(sen_check(&profile(2, &[3, 7, 15])).unwrap());
        assert!(sen_check(&profile(2, &[1, 3, 15])).unwrap());
        assert!(!sen_check(&profile(2, &[1, 2])).unwrap());
        assert!(matches!(
            sen_check(&profile(2, &[3])),
            Err(Error::TooFewEntries { .. })
        ));
    }

    #[test]
    fn ratio_examples() {
        let rep = ratio_check(&profile(2, &[3, 7, 15, 31]), 1).unwrap();
        assert_eq!(rep.kappa_found, Some(0));
        assert_eq!(rep.verdict, Verdict::CharZeroConsistent);
        assert_eq!(
            rep.lambda_observed,
            Some(BigRational::from_integer(BigInt::one()))
        );

        let rep = ratio_check(&profile(2, &[1, 3, 15, 255]), 1).unwrap();
        assert_eq!(rep.kappa_found, None);
        assert_eq!(rep.verdict, Verdict::CharPIndicated);
        assert_eq!(rep.ratio_values[0], BigRational::from_integer(6.into()));
        assert_eq!(rep.ratio_values[1], BigRational::from_integer(20.into()));

        let rep = ratio_check(&profile(2, &[15, 63, 255]), 2).unwrap();
        assert_eq!(rep.kappa_found, Some(0));
        assert_eq!(rep.verdict, Verdict::CharZeroConsistent);
    }

    #[test]
    fn ratio_kappa_positive() {
        // stabilizes only from the second ratio on
        let rep = ratio_check(&profile(2, &[1, 5, 13, 29, 61]), 1).unwrap();
        assert_eq!(rep.kappa_found, Some(1));
        assert_eq!(rep.verdict, Verdict::CharZeroConsistent);
    }

    #[test]
    fn closed_form_examples() {
        let v = closed_form_predict(&BigInt::from(3), &BigInt::from(7), 1, 2, 3).unwrap();
        assert_eq!(v, BigInt::from(31));
        let v = closed_form_predict(&BigInt::from(9), &BigInt::from(11), 1, 2, 0).unwrap();
        assert_eq!(v, BigInt::from(9));
        let v = closed_form_predict(&BigInt::from(15), &BigInt::from(63), 2, 2, 2).unwrap();
        assert_eq!(v, BigInt::from(255));
    }

    #[test]
    fn predict_in_examples() {
        let r211 = z2(8);
        assert_eq!(predict_in(&r211, 2, 2).unwrap(), BigInt::from(15));
        assert_eq!(predict_in(&r211, 2, 0).unwrap(), BigInt::from(3));
        let r311 = OkRing::new(RingSpec::standard(3, 1, 1, 8).unwrap()).unwrap();
        assert_eq!(predict_in(&r311, 1, 1).unwrap(), BigInt::from(8));
        // hypothesis: l > e/(p-1) fails for l = 1, e = 1, p = 2
        assert!(matches!(
            predict_in(&r211, 1, 0),
            Err(Error::HypothesisViolated(_))
        ));
        let r212 = OkRing::new(RingSpec::standard(2, 1, 2, 8).unwrap()).unwrap();
        assert!(matches!(
            predict_in(&r212, 2, 0),
            Err(Error::HypothesisViolated(_))
        ));
        assert_eq!(predict_in(&r212, 3, 1).unwrap(), BigInt::from(31));
    }

    #[test]
    fn findin_examples() {
        let r = z2(12);
        // multiplicative endomorphisms (1+x)^n - 1
        let endo = |n: u64, d: usize| -> Series<OkRing> {
            let mut s = Series::zero(&r, d);
            let mut c = BigInt::one();
            for k in 1..=d.min(n as usize) {
                c = c * BigInt::from(n - k as u64 + 1) / BigInt::from(k);
                s.set_coeff(k, r.from_bigint(&c));
            }
            s
        };
        let g4 = endo(4, 20);
        let g2 = endo(2, 20);
        let u5 = endo(5, 20);
        // n = 1: v(5^2 - 1) = 3, not divisible by s = 2
        assert!(matches!(findin_predict(&g4, &u5, 1), Err(Error::NoMatchingM)));
        // n = 2: v(5^4 - 1) = 4 = 2*2 -> m = 2, wideg((1+x)^16 - 1) - 1 = 15
        assert_eq!(findin_predict(&g4, &u5, 2).unwrap(), 15);
        // g = [2]: v(24) = 3 = 3*1 -> m = 3, predict 7
        assert_eq!(findin_predict(&g2, &u5, 1).unwrap(), 7);
    }

    #[test]
    fn profile_via_endos_matches_composition() {
        let r = z2(12);
        let f = FrobeniusSeries::canonical(&r);
        let alpha = r.int(5);
        let prof = ram_profile_via_endos(&f, &alpha, &[6, 10, 18]).unwrap();
        assert_eq!(prof.finite_prefix(), vec![3, 7, 15]);
        // composition oracle on the reduction
        let fq = Fq::new(2, 1).unwrap();
        let mut coeffs = vec![0i64; 18];
        coeffs[0] = 1;
        coeffs[3] = 1;
        coeffs[4] = 1;
        let sigma = NottElem::new(
            Series::from_coeffs(&fq, coeffs.iter().map(|&c| fq.int(c)).collect()).unwrap(),
        )
        .unwrap();
        let oracle = ram_sequence(&sigma, 2).unwrap();
        assert_eq!(oracle.finite_prefix(), prof.finite_prefix());
    }

    #[test]
    fn profile_identity_alpha() {
        let r = z2(10);
        let f = FrobeniusSeries::canonical(&r);
        let prof = ram_profile_via_endos(&f, &r.one(), &[8, 8]).unwrap();
        assert!(prof
            .values
            .iter()
            .all(|v| *v == RamEntry::IdentityAtPrecision));
    }

    #[test]
    fn lower_bound_examples() {
        assert!(lower_bound_check(&profile(2, &[1, 3, 15])));
        assert!(lower_bound_check(&profile(2, &[3, 7, 15])));
        assert!(!lower_bound_check(&profile(2, &[1, 2, 15])));
    }
}
