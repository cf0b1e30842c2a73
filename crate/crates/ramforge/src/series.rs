//! Truncated formal power series without constant term, in one and two variables,
//! generic over the coefficient ring (F_q or O_K).
//!
//! Two truncations are in play everywhere: the x-adic degree D carried by the
//! series itself, and (over O_K) the pi-adic precision carried per coefficient.

use crate::error::{Error, Result};
use crate::ring::{Fq, FqElem, OKElem, OkRing, Valuation};

/// The coefficient operations a series needs. Implemented by `Fq` and `OkRing`.
pub trait CoeffRing: Clone + PartialEq {
    type Elem: Clone + PartialEq + std::fmt::Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn int(&self, n: i64) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    /// Is the stored value zero (over O_K: the canonical representative)?
    fn is_zero(&self, a: &Self::Elem) -> bool;
    /// Unit test for the Weierstrass degree: nonzero over F_q, valuation 0 over O_K.
    fn is_unit(&self, a: &Self::Elem) -> bool;
    fn try_invert(&self, a: &Self::Elem) -> Option<Self::Elem>;
}

impl CoeffRing for Fq {
    type Elem = FqElem;

    fn zero(&self) -> FqElem {
        Fq::zero(self)
    }
    fn one(&self) -> FqElem {
        Fq::one(self)
    }
    fn int(&self, n: i64) -> FqElem {
        Fq::int(self, n)
    }
    fn add(&self, a: &FqElem, b: &FqElem) -> FqElem {
        Fq::add(self, a, b)
    }
    fn sub(&self, a: &FqElem, b: &FqElem) -> FqElem {
        Fq::sub(self, a, b)
    }
    fn neg(&self, a: &FqElem) -> FqElem {
        Fq::neg(self, a)
    }
    fn mul(&self, a: &FqElem, b: &FqElem) -> FqElem {
        Fq::mul(self, a, b)
    }
    fn is_zero(&self, a: &FqElem) -> bool {
        Fq::is_zero(self, a)
    }
    fn is_unit(&self, a: &FqElem) -> bool {
        !Fq::is_zero(self, a)
    }
    fn try_invert(&self, a: &FqElem) -> Option<FqElem> {
        Fq::inv(self, a).ok()
    }
}

impl CoeffRing for OkRing {
    type Elem = OKElem;

    fn zero(&self) -> OKElem {
        OkRing::zero(self)
    }
    fn one(&self) -> OKElem {
        OkRing::one(self)
    }
    fn int(&self, n: i64) -> OKElem {
        OkRing::int(self, n)
    }
    fn add(&self, a: &OKElem, b: &OKElem) -> OKElem {
        OkRing::add(self, a, b).expect("mixed rings inside a series")
    }
    fn sub(&self, a: &OKElem, b: &OKElem) -> OKElem {
        OkRing::sub(self, a, b).expect("mixed rings inside a series")
    }
    fn neg(&self, a: &OKElem) -> OKElem {
        OkRing::neg(self, a)
    }
    fn mul(&self, a: &OKElem, b: &OKElem) -> OKElem {
        OkRing::mul(self, a, b).expect("mixed rings inside a series")
    }
    fn is_zero(&self, a: &OKElem) -> bool {
        self.is_zero_rep(a)
    }
    fn is_unit(&self, a: &OKElem) -> bool {
        matches!(self.valuation(a), Valuation::Finite(0))
    }
    fn try_invert(&self, a: &OKElem) -> Option<OKElem> {
        self.unit_inverse(a).ok()
    }
}

/// Power series c_1 x + ... + c_D x^D (no constant term by construction).
#[derive(Clone, PartialEq)]
pub struct Series<R: CoeffRing> {
    ring: R,
    /// coeffs[k] is the coefficient of x^(k+1)
    coeffs: Vec<R::Elem>,
}

impl<R: CoeffRing> std::fmt::Debug for Series<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Series[D={}](", self.trunc())?;
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if self.ring.is_zero(c) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{:?} x^{}", c, k + 1)?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

impl<R: CoeffRing> Series<R> {
    pub fn zero(ring: &R, trunc: usize) -> Self {
        assert!(trunc >= 1, "truncation degree must be >= 1");
        Series {
            ring: ring.clone(),
            coeffs: vec![ring.zero(); trunc],
        }
    }

    /// The identity series x.
    pub fn x(ring: &R, trunc: usize) -> Self {
        let mut s = Self::zero(ring, trunc);
        s.coeffs[0] = ring.one();
        s
    }

    /// Build from coefficients c_1.. (degree 1 first).
    pub fn from_coeffs(ring: &R, coeffs: Vec<R::Elem>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::TruncationMismatch(
                "series needs truncation degree >= 1".into(),
            ));
        }
        Ok(Series { ring: ring.clone(), coeffs })
    }

    pub fn monomial(ring: &R, coeff: R::Elem, deg: usize, trunc: usize) -> Result<Self> {
        if deg < 1 || deg > trunc {
            return Err(Error::TruncationMismatch(format!(
                "monomial degree {} outside 1..={}",
                deg, trunc
            )));
        }
        let mut s = Self::zero(ring, trunc);
        s.coeffs[deg - 1] = coeff;
        Ok(s)
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn trunc(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of x^k (k >= 1).
    pub fn coeff(&self, k: usize) -> &R::Elem {
        &self.coeffs[k - 1]
    }

    pub fn coeffs(&self) -> &[R::Elem] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, k: usize, v: R::Elem) {
        self.coeffs[k - 1] = v;
    }

    /// Linear coefficient, i.e. the image under the homomorphism u -> u'(0).
    pub fn d0(&self) -> &R::Elem {
        &self.coeffs[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| self.ring.is_zero(c))
    }

    pub fn truncated(&self, trunc: usize) -> Self {
        assert!(trunc >= 1);
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(trunc);
        while coeffs.len() < trunc {
            coeffs.push(self.ring.zero());
        }
        Series { ring: self.ring.clone(), coeffs }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::RingMismatch("series over different rings".into()));
        }
        if self.trunc() != other.trunc() {
            return Err(Error::TruncationMismatch(format!(
                "series truncations differ: {} vs {}",
                self.trunc(),
                other.trunc()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| self.ring.add(a, b))
            .collect();
        Ok(Series { ring: self.ring.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| self.ring.sub(a, b))
            .collect();
        Ok(Series { ring: self.ring.clone(), coeffs })
    }

    pub fn neg(&self) -> Self {
        Series {
            ring: self.ring.clone(),
            coeffs: self.coeffs.iter().map(|a| self.ring.neg(a)).collect(),
        }
    }

    pub fn scale(&self, s: &R::Elem) -> Self {
        Series {
            ring: self.ring.clone(),
            coeffs: self.coeffs.iter().map(|a| self.ring.mul(a, s)).collect(),
        }
    }

    /// Product truncated to the common degree. O(D^2) coefficient multiplications.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let d = self.trunc();
        let mut coeffs = vec![self.ring.zero(); d];
        for i in 1..=d {
            let a = &self.coeffs[i - 1];
            if self.ring.is_zero(a) {
                continue;
            }
            for j in 1..=(d - i) {
                let b = &other.coeffs[j - 1];
                if self.ring.is_zero(b) {
                    continue;
                }
                let prod = self.ring.mul(a, b);
                coeffs[i + j - 1] = self.ring.add(&coeffs[i + j - 1], &prod);
            }
        }
        Ok(Series { ring: self.ring.clone(), coeffs })
    }

    /// Order of the series: least k with a nonzero stored coefficient.
    pub fn order(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .position(|c| !self.ring.is_zero(c))
            .map(|k| k + 1)
    }

    /// (self o inner), truncated to the common degree. Coefficient k of the result
    /// depends only on coefficients <= k of both inputs.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        self.check_compatible(inner)?;
        let d = self.trunc();
        let mut acc = Series::zero(&self.ring, d);
        let inner_order = inner.order().unwrap_or(d + 1);
        let mut pow = inner.clone();
        for k in 1..=d {
            let c = &self.coeffs[k - 1];
            if !self.ring.is_zero(c) {
                let scaled = pow.scale(c);
                acc = acc.add(&scaled)?;
            }
            // inner^(k+1) has order > d: nothing further contributes
            if (k + 1).saturating_mul(inner_order) > d {
                break;
            }
            if k < d {
                pow = pow.mul(inner)?;
            }
        }
        Ok(acc)
    }

    /// Compositional inverse: u o result = result o u = x, to the common degree.
    pub fn comp_inverse(&self) -> Result<Self> {
        let c1 = self.d0();
        let c1_inv = self.ring.try_invert(c1).ok_or(Error::NotInvertible)?;
        let d = self.trunc();
        // solve h coefficientwise: (self o h)(x) = x
        let mut h = Series::zero(&self.ring, d);
        h.coeffs[0] = c1_inv.clone();
        for k in 2..=d {
            // residual of degree k using h known below k
            let comp = self.compose(&h)?;
            let mut want = self.ring.zero();
            if k == 1 {
                want = self.ring.one();
            }
            let resid = self.ring.sub(&comp.coeffs[k - 1], &want);
            // coefficient of x^k in self(h + t x^k) is c1 * t + existing residual
            let corr = self.ring.mul(&self.ring.neg(&resid), &c1_inv);
            h.coeffs[k - 1] = corr;
        }
        Ok(h)
    }

    /// Formal derivative a'(x) = sum k c_k x^(k-1); returns (a'(0), the tail as a Series).
    pub fn derivative(&self) -> (R::Elem, Series<R>) {
        let d = self.trunc();
        let const_term = self.coeffs[0].clone();
        let mut tail = Series::zero(&self.ring, d);
        for k in 2..=d {
            let kk = self.ring.int(k as i64);
            tail.coeffs[k - 2] = self.ring.mul(&kk, &self.coeffs[k - 1]);
        }
        (const_term, tail)
    }

    /// n-fold composition iterate; a^(o 0) = x.
    pub fn iterate(&self, n: u64) -> Result<Self> {
        let mut acc = Series::x(&self.ring, self.trunc());
        for _ in 0..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Weierstrass degree: index of the first unit coefficient.
    pub fn wideg(&self) -> Result<usize> {
        for (k, c) in self.coeffs.iter().enumerate() {
            if self.ring.is_unit(c) {
                return Ok(k + 1);
            }
        }
        Err(Error::InfiniteAtPrecision)
    }
}

impl Series<OkRing> {
    /// Coefficientwise residue reduction to a series over F_q.
    pub fn reduce(&self) -> Result<Series<Fq>> {
        let ok = self.ring.clone();
        let fq = ok.residue_field();
        let mut out = Vec::with_capacity(self.trunc());
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.prec() < 1 {
                return Err(Error::InsufficientPrecision(format!(
                    "coefficient of x^{} carries no pi-adic digits",
                    k + 1
                )));
            }
            out.push(ok.residue_reduce(c)?);
        }
        Series::from_coeffs(&fq, out)
    }

    /// Divide every coefficient by pi^k (losing k digits of precision each).
    pub fn pi_divide(&self, k: u32) -> Result<Self> {
        let ok = self.ring.clone();
        let mut out = Vec::with_capacity(self.trunc());
        for (deg, c) in self.coeffs.iter().enumerate() {
            let d = ok.pi_divide(c, k).map_err(|e| match e {
                Error::NotDivisible { val, want } => Error::NotDivisible { val, want },
                other => other,
            })?;
            let _ = deg;
            out.push(d);
        }
        Series::from_coeffs(&ok, out)
    }

    /// Cap every coefficient's precision at `prec`.
    pub fn reduce_prec(&self, prec: u32) -> Self {
        let ok = self.ring.clone();
        let coeffs = self.coeffs.iter().map(|c| ok.reduce_prec(c, prec)).collect();
        Series { ring: ok, coeffs }
    }

    /// Least precision carried by any coefficient.
    pub fn min_prec(&self) -> u32 {
        self.coeffs.iter().map(|c| c.prec()).min().unwrap_or(0)
    }

    /// Coefficientwise congruence mod pi^k.
    pub fn eq_mod(&self, other: &Self, k: u32) -> Result<bool> {
        self.check_compatible(other)?;
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            if !self.ring.eq_mod(a, b, k)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Minimum over coefficients of v_K, treating indistinguishable-from-zero
    /// coefficients as their precision floor. Used for residual reporting.
    pub fn min_valuation_floor(&self) -> u32 {
        let ok = &self.ring;
        self.coeffs
            .iter()
            .map(|c| match ok.valuation(c) {
                Valuation::Finite(v) => v,
                Valuation::InfiniteAtPrecision => c.prec(),
            })
            .min()
            .unwrap_or(0)
    }
}

/// Two-variable series with no constant term, truncated by total degree T.
/// Coefficients c_{ij} are stored for 1 <= i+j <= T.
#[derive(Clone, PartialEq)]
pub struct BiSeries<R: CoeffRing> {
    ring: R,
    trunc: usize,
    /// row d-1 holds the total-degree-d coefficients c_{d,0}, c_{d-1,1}, ..., c_{0,d}
    rows: Vec<Vec<R::Elem>>,
}

impl<R: CoeffRing> std::fmt::Debug for BiSeries<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BiSeries[T={}](", self.trunc)?;
        let mut first = true;
        for d in 1..=self.trunc {
            for j in 0..=d {
                let c = self.coeff(d - j, j);
                if self.ring.is_zero(c) {
                    continue;
                }
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                write!(f, "{:?} x^{} y^{}", c, d - j, j)?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

impl<R: CoeffRing> BiSeries<R> {
    pub fn zero(ring: &R, trunc: usize) -> Self {
        assert!(trunc >= 1);
        let rows = (1..=trunc).map(|d| vec![ring.zero(); d + 1]).collect();
        BiSeries { ring: ring.clone(), trunc, rows }
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }
    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn coeff(&self, i: usize, j: usize) -> &R::Elem {
        &self.rows[i + j - 1][j]
    }
    pub fn set_coeff(&mut self, i: usize, j: usize, v: R::Elem) {
        self.rows[i + j - 1][j] = v;
    }

    /// x + y truncated at T.
    pub fn x_plus_y(ring: &R, trunc: usize) -> Self {
        let mut b = Self::zero(ring, trunc);
        b.set_coeff(1, 0, ring.one());
        b.set_coeff(0, 1, ring.one());
        b
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for d in 0..self.trunc {
            for j in 0..=d + 1 {
                out.rows[d][j] = self.ring.add(&self.rows[d][j], &other.rows[d][j]);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for d in 0..self.trunc {
            for j in 0..=d + 1 {
                out.rows[d][j] = self.ring.sub(&self.rows[d][j], &other.rows[d][j]);
            }
        }
        Ok(out)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::RingMismatch("biseries over different rings".into()));
        }
        if self.trunc != other.trunc {
            return Err(Error::TruncationMismatch(format!(
                "biseries truncations differ: {} vs {}",
                self.trunc, other.trunc
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let t = self.trunc;
        let mut out = Self::zero(&self.ring, t);
        for da in 1..=t {
            for ja in 0..=da {
                let a = self.coeff(da - ja, ja);
                if self.ring.is_zero(a) {
                    continue;
                }
                for db in 1..=(t - da) {
                    for jb in 0..=db {
                        let b = other.coeff(db - jb, jb);
                        if self.ring.is_zero(b) {
                            continue;
                        }
                        let prod = self.ring.mul(a, b);
                        let i = (da - ja) + (db - jb);
                        let j = ja + jb;
                        let cur = out.coeff(i, j).clone();
                        out.set_coeff(i, j, self.ring.add(&cur, &prod));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &R::Elem) -> Self {
        let mut out = self.clone();
        for d in 0..self.trunc {
            for j in 0..=d + 1 {
                out.rows[d][j] = self.ring.mul(&self.rows[d][j], s);
            }
        }
        out
    }

    /// F(a(x), b(x)) as a univariate series, truncated to min(D_a, D_b, T).
    pub fn substitute(&self, a: &Series<R>, b: &Series<R>) -> Result<Series<R>> {
        if a.ring() != &self.ring || b.ring() != &self.ring {
            return Err(Error::RingMismatch("substitution over different rings".into()));
        }
        if a.trunc() != b.trunc() {
            return Err(Error::TruncationMismatch(
                "substituted series must share a truncation".into(),
            ));
        }
        let d = a.trunc().min(self.trunc);
        let at = a.truncated(d);
        let bt = b.truncated(d);
        // powers of a and b up to what can contribute
        let mut apow: Vec<Series<R>> = vec![Series::x(&self.ring, d)]; // placeholder for a^0
        let mut bpow: Vec<Series<R>> = vec![Series::x(&self.ring, d)];
        let mut acc = Series::zero(&self.ring, d);
        for dd in 1..=self.trunc {
            for j in 0..=dd {
                let i = dd - j;
                let c = self.coeff(i, j);
                if self.ring.is_zero(c) {
                    continue;
                }
                // term c * a^i * b^j : orders i + j <= dd; skip if beyond window
                if dd > d {
                    continue;
                }
                while apow.len() <= i {
                    let next = if apow.len() == 1 {
                        at.clone()
                    } else {
                        apow.last().unwrap().mul(&at)?
                    };
                    apow.push(next);
                }
                while bpow.len() <= j {
                    let next = if bpow.len() == 1 {
                        bt.clone()
                    } else {
                        bpow.last().unwrap().mul(&bt)?
                    };
                    bpow.push(next);
                }
                let term = match (i, j) {
                    (0, _) => bpow[j].scale(c),
                    (_, 0) => apow[i].scale(c),
                    _ => apow[i].mul(&bpow[j])?.scale(c),
                };
                acc = acc.add(&term)?;
            }
        }
        Ok(acc)
    }

    /// Restriction F(x, 0) as a univariate series of degree T.
    pub fn restrict_x(&self) -> Series<R> {
        let mut s = Series::zero(&self.ring, self.trunc);
        for i in 1..=self.trunc {
            s.set_coeff(i, self.coeff(i, 0).clone());
        }
        s
    }

    /// Restriction F(0, y).
    pub fn restrict_y(&self) -> Series<R> {
        let mut s = Series::zero(&self.ring, self.trunc);
        for j in 1..=self.trunc {
            s.set_coeff(j, self.coeff(0, j).clone());
        }
        s
    }

    pub fn is_symmetric(&self) -> bool {
        for d in 1..=self.trunc {
            for j in 0..=d {
                if self.coeff(d - j, j) != self.coeff(j, d - j) {
                    return false;
                }
            }
        }
        true
    }
}

impl BiSeries<OkRing> {
    pub fn reduce(&self) -> Result<BiSeries<Fq>> {
        let ok = self.ring.clone();
        let fq = ok.residue_field();
        let mut out = BiSeries::zero(&fq, self.trunc);
        for d in 1..=self.trunc {
            for j in 0..=d {
                let c = self.coeff(d - j, j);
                if c.prec() < 1 {
                    return Err(Error::InsufficientPrecision(format!(
                        "coefficient x^{} y^{} carries no pi-adic digits",
                        d - j,
                        j
                    )));
                }
                out.set_coeff(d - j, j, ok.residue_reduce(c)?);
            }
        }
        Ok(out)
    }

    pub fn min_prec(&self) -> u32 {
        let mut m = u32::MAX;
        for d in 1..=self.trunc {
            for j in 0..=d {
                m = m.min(self.coeff(d - j, j).prec());
            }
        }
        m
    }

    pub fn eq_mod(&self, other: &Self, k: u32) -> Result<bool> {
        self.check_compatible(other)?;
        for d in 1..=self.trunc {
            for j in 0..=d {
                if !self.ring.eq_mod(self.coeff(d - j, j), other.coeff(d - j, j), k)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingSpec;

    fn f2() -> Fq {
        Fq::new(2, 1).unwrap()
    }
    fn f3() -> Fq {
        Fq::new(3, 1).unwrap()
    }
    fn z2(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(2, 1, 1, n).unwrap()).unwrap()
    }

    fn fq_series(fq: &Fq, coeffs: &[i64]) -> Series<Fq> {
        Series::from_coeffs(fq, coeffs.iter().map(|&c| fq.int(c)).collect()).unwrap()
    }

    #[test]
    fn mul_f2() {
        let fq = f2();
        let a = fq_series(&fq, &[1, 1, 0, 0]); // x + x^2
        let sq = a.mul(&a).unwrap();
        assert_eq!(sq, fq_series(&fq, &[0, 1, 0, 1])); // x^2 + x^4
        let z = Series::zero(&fq, 4);
        assert_eq!(a.mul(&z).unwrap(), z);
    }

    #[test]
    fn mul_ok() {
        let r = z2(4);
        let a = Series::from_coeffs(&r, vec![r.int(2)]).unwrap().truncated(3);
        let b = Series::x(&r, 3);
        let ab = a.mul(&b).unwrap();
        let mut expect = Series::zero(&r, 3);
        expect.set_coeff(2, r.int(2));
        assert_eq!(ab, expect);
    }

    #[test]
    fn compose_f2() {
        let fq = f2();
        let outer = fq_series(&fq, &[1, 1, 0, 0, 0, 0]); // x + x^2
        let inner = fq_series(&fq, &[1, 0, 1, 0, 0, 0]); // x + x^3
        let got = outer.compose(&inner).unwrap();
        assert_eq!(got, fq_series(&fq, &[1, 1, 1, 0, 0, 1])); // x+x^2+x^3+x^6
        let x = Series::x(&fq, 6);
        assert_eq!(x.compose(&inner).unwrap(), inner);
    }

    #[test]
    fn compose_f3() {
        let fq = f3();
        let outer = fq_series(&fq, &[1, 0, 1]); // x + x^3
        let inner = fq_series(&fq, &[2, 0, 0]); // 2x
        assert_eq!(outer.compose(&inner).unwrap(), fq_series(&fq, &[2, 0, 2]));
    }

    #[test]
    fn comp_inverse_f2() {
        let fq = f2();
        let u = fq_series(&fq, &[1, 1, 0, 0]); // x + x^2
        let h = u.comp_inverse().unwrap();
        assert_eq!(h, fq_series(&fq, &[1, 1, 0, 1])); // x + x^2 + x^4
        assert_eq!(u.compose(&h).unwrap(), Series::x(&fq, 4));
        assert_eq!(h.compose(&u).unwrap(), Series::x(&fq, 4));
        let x = Series::x(&fq, 4);
        assert_eq!(x.comp_inverse().unwrap(), x);
    }

    #[test]
    fn comp_inverse_rejects_nonunit() {
        let r = z2(4);
        let mut u = Series::zero(&r, 3);
        u.set_coeff(1, r.int(2));
        u.set_coeff(2, r.one());
        assert!(matches!(u.comp_inverse(), Err(Error::NotInvertible)));
    }

    #[test]
    fn derivative_cases() {
        let fq = f2();
        let a = fq_series(&fq, &[1, 1]); // x + x^2 over F_2
        let (c0, tail) = a.derivative();
        assert_eq!(c0, fq.one());
        assert!(tail.is_zero()); // 2x = 0
        let r = z2(4);
        let mut g = Series::zero(&r, 3);
        g.set_coeff(1, r.int(3));
        g.set_coeff(3, r.one());
        let (d0, tail) = g.derivative();
        assert_eq!(d0, r.int(3));
        assert_eq!(*tail.coeff(2), r.int(3));
    }

    #[test]
    fn iterate_f2() {
        let fq = f2();
        let a = fq_series(&fq, &[1, 1, 0, 0]); // x + x^2, D = 4
        let a2 = a.iterate(2).unwrap();
        assert_eq!(a2, fq_series(&fq, &[1, 0, 0, 1])); // x + x^4
        assert_eq!(a.iterate(1).unwrap(), a);
        let a16 = fq_series(&fq, &[1, 1]).truncated(16).iterate(4).unwrap();
        let mut expect = Series::x(&fq, 16);
        expect.set_coeff(16, fq.one());
        assert_eq!(a16, expect); // x + x^16
    }

    #[test]
    fn wideg_cases() {
        let r = z2(8);
        let mut g = Series::zero(&r, 8);
        g.set_coeff(1, r.int(2));
        g.set_coeff(2, r.one());
        assert_eq!(g.wideg().unwrap(), 2);
        assert_eq!(Series::x(&r, 4).wideg().unwrap(), 1);
        let mut h = Series::zero(&r, 8);
        h.set_coeff(1, r.int(2));
        h.set_coeff(2, r.int(4));
        assert!(matches!(h.wideg(), Err(Error::InfiniteAtPrecision)));
    }

    #[test]
    fn reduce_cases() {
        let r = z2(4);
        let mut s = Series::zero(&r, 2);
        s.set_coeff(1, r.int(3));
        s.set_coeff(2, r.int(5));
        let red = s.reduce().unwrap();
        let fq = r.residue_field();
        assert_eq!(red, fq_series(&fq, &[1, 1]));
        let mut t = Series::zero(&r, 2);
        t.set_coeff(1, r.int(2));
        t.set_coeff(2, r.one());
        assert_eq!(t.reduce().unwrap(), fq_series(&fq, &[0, 1]));
    }

    #[test]
    fn bi_substitute_group_law_axiom() {
        let r = z2(6);
        // F = x + y + xy
        let mut f = BiSeries::zero(&r, 4);
        f.set_coeff(1, 0, r.one());
        f.set_coeff(0, 1, r.one());
        f.set_coeff(1, 1, r.one());
        let x = Series::x(&r, 4);
        let zero = Series::zero(&r, 4);
        assert_eq!(f.substitute(&x, &zero).unwrap(), x);
        // F(x, x) = 2x + x^2
        let fxx = f.substitute(&x, &x).unwrap();
        let mut expect = Series::zero(&r, 4);
        expect.set_coeff(1, r.int(2));
        expect.set_coeff(2, r.one());
        assert_eq!(fxx, expect);
        // F(x, iota(x)) = 0 where (1+x)(1+iota) = 1
        let mut iota = Series::zero(&r, 4);
        for k in 1..=4 {
            iota.set_coeff(k, r.int(if k % 2 == 1 { -1 } else { 1 }));
        }
        assert!(f.substitute(&x, &iota).unwrap().is_zero());
    }

    #[test]
    fn composition_associativity_samples() {
        let fq = f3();
        let a = fq_series(&fq, &[1, 2, 1, 0, 2, 1]);
        let b = fq_series(&fq, &[2, 1, 0, 1, 0, 2]);
        let c = fq_series(&fq, &[1, 0, 2, 2, 1, 0]);
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn d0_homomorphism() {
        let fq = f3();
        let u = fq_series(&fq, &[2, 1, 1]);
        let v = fq_series(&fq, &[1, 2, 0]);
        let uv = u.compose(&v).unwrap();
        assert_eq!(*uv.d0(), fq.mul(u.d0(), v.d0()));
    }
}
