//! Exact arithmetic in O_K given as an unramified-then-Eisenstein tower,
//! with per-element pi-adic precision, and in the residue field F_q.
//!
//! An element is stored as sum_{i<e, j<f} a_ij * omega^j * pi^i where omega
//! generates the unramified step W = Z_p[t]/(inertial) and pi satisfies the
//! Eisenstein polynomial. Known mod pi^N means coordinate i is known mod
//! p^ceil((N-i)/e), which is how the canonical form truncates.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Description of O_K: unramified degree-f step, then Eisenstein degree-e step,
/// elements carried mod pi^prec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSpec {
    pub p: u64,
    pub f: usize,
    pub e: usize,
    /// Non-leading coefficients (low to high) of the monic degree-f inertial polynomial.
    pub inertial_poly: Vec<i64>,
    /// Full coefficient list (low to high, length e+1, monic) of the Eisenstein polynomial.
    pub eisenstein_poly: Vec<i64>,
    pub prec: u32,
}

impl RingSpec {
    pub fn q(&self) -> u64 {
        self.p.pow(self.f as u32)
    }

    pub fn degree(&self) -> usize {
        self.e * self.f
    }

    /// Standard ring for (p, f, e) with the tabulated inertial polynomial and
    /// eisenstein_poly = pi^e - p.
    pub fn standard(p: u64, f: usize, e: usize, prec: u32) -> Result<Self> {
        let inertial_poly = inertial_table(p, f)?;
        let mut eisenstein_poly = vec![0i64; e + 1];
        eisenstein_poly[0] = -(p as i64);
        eisenstein_poly[e] = 1;
        Ok(RingSpec { p, f, e, inertial_poly, eisenstein_poly, prec })
    }

    pub fn validate(&self) -> Result<()> {
        if !is_prime_u64(self.p) {
            return Err(Error::BadRingSpec(format!("p = {} is not prime", self.p)));
        }
        if self.f == 0 || self.e == 0 {
            return Err(Error::BadRingSpec("f and e must be >= 1".into()));
        }
        if self.prec == 0 {
            return Err(Error::BadRingSpec("prec must be >= 1".into()));
        }
        if self.p.checked_pow(self.f as u32).is_none() {
            return Err(Error::BadRingSpec("q = p^f overflows u64".into()));
        }
        if self.inertial_poly.len() != self.f {
            return Err(Error::BadRingSpec(format!(
                "inertial_poly must list the {} non-leading coefficients",
                self.f
            )));
        }
        if self.eisenstein_poly.len() != self.e + 1 {
            return Err(Error::BadRingSpec(format!(
                "eisenstein_poly must have length e+1 = {}",
                self.e + 1
            )));
        }
        if self.eisenstein_poly[self.e] != 1 {
            return Err(Error::BadRingSpec("eisenstein_poly must be monic".into()));
        }
        let p = self.p as i64;
        for (i, &c) in self.eisenstein_poly.iter().enumerate().take(self.e) {
            if c.rem_euclid(p) != 0 {
                return Err(Error::BadRingSpec(format!(
                    "eisenstein coefficient {} at degree {} is a unit; polynomial is not Eisenstein",
                    c, i
                )));
            }
        }
        if self.eisenstein_poly[0].rem_euclid(p * p) == 0 {
            return Err(Error::BadRingSpec(
                "eisenstein constant term has valuation > e".into(),
            ));
        }
        // reduction of the inertial polynomial must be irreducible over F_p
        let red: Vec<u64> = self
            .inertial_poly
            .iter()
            .map(|&c| c.rem_euclid(p) as u64)
            .collect();
        if !is_irreducible_mod_p(&red, self.p) {
            return Err(Error::BadRingSpec(
                "inertial polynomial is reducible mod p".into(),
            ));
        }
        Ok(())
    }
}

/// Deterministic inertial polynomial per (p, f): for f = 1 the fixed choice t + 1,
/// otherwise the first vector of non-leading coefficients, in base-p counting order,
/// that gives an irreducible monic polynomial.
pub fn inertial_table(p: u64, f: usize) -> Result<Vec<i64>> {
    if !is_prime_u64(p) || f == 0 {
        return Err(Error::InertialTableMiss { p, f });
    }
    if f == 1 {
        return Ok(vec![1]);
    }
    if f > 8 {
        return Err(Error::InertialTableMiss { p, f });
    }
    let total = (p as u128).checked_pow(f as u32).ok_or(Error::InertialTableMiss { p, f })?;
    if total > 1 << 24 {
        return Err(Error::InertialTableMiss { p, f });
    }
    for code in 0..total {
        let mut c = code;
        let mut nonlead = Vec::with_capacity(f);
        for _ in 0..f {
            nonlead.push((c % p as u128) as u64);
            c /= p as u128;
        }
        if is_irreducible_mod_p(&nonlead, p) {
            return Ok(nonlead.into_iter().map(|x| x as i64).collect());
        }
    }
    Err(Error::InertialTableMiss { p, f })
}

pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for d in [2u64, 3, 5, 7] {
        if n % d == 0 {
            return n == d;
        }
    }
    let mut d = 11u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

// ---------------- F_p[t] helpers (dense, low-to-high, residues mod p) ----------------

fn fp_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn fp_mulmod(a: &[u64], b: &[u64], modpoly_nonlead: &[u64], p: u64) -> Vec<u64> {
    let f = modpoly_nonlead.len();
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    // reduce by the monic polynomial t^f + sum nonlead[j] t^j
    for d in (f..prod.len()).rev() {
        let c = prod[d];
        if c == 0 {
            continue;
        }
        prod[d] = 0;
        for j in 0..f {
            let sub = (c * modpoly_nonlead[j]) % p;
            prod[d - f + j] = (prod[d - f + j] + p * p - sub) % p;
        }
    }
    prod.truncate(f);
    prod
}

fn fp_gcd(mut a: Vec<u64>, mut b: Vec<u64>, p: u64) -> Vec<u64> {
    fp_trim(&mut a);
    fp_trim(&mut b);
    while !b.is_empty() {
        // a mod b
        let lead_inv = modinv_u64(*b.last().unwrap(), p);
        while a.len() >= b.len() && !a.is_empty() {
            let shift = a.len() - b.len();
            let c = (*a.last().unwrap() * lead_inv) % p;
            for j in 0..b.len() {
                let sub = (c * b[j]) % p;
                a[shift + j] = (a[shift + j] + p - sub) % p;
            }
            fp_trim(&mut a);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

fn modinv_u64(a: u64, p: u64) -> u64 {
    // Fermat: p prime, a nonzero mod p
    modpow_u64(a % p, p - 2, p)
}

fn modpow_u64(mut b: u64, mut ex: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while ex > 0 {
        if ex & 1 == 1 {
            acc = acc.wrapping_mul(b) % m;
        }
        b = b.wrapping_mul(b) % m;
        ex >>= 1;
    }
    acc
}

fn is_irreducible_mod_p(nonlead: &[u64], p: u64) -> bool {
    let f = nonlead.len();
    if f == 0 {
        return false;
    }
    if f == 1 {
        return true;
    }
    // x^(p^f) == x mod g, and gcd(x^(p^(f/l)) - x, g) = 1 for prime l | f
    let xp = |mut cur: Vec<u64>, times: usize| -> Vec<u64> {
        for _ in 0..times {
            // raise to p-th power by square-and-multiply on the exponent p
            let mut acc = vec![1u64];
            let mut base = cur.clone();
            let mut ex = p;
            while ex > 0 {
                if ex & 1 == 1 {
                    acc = fp_mulmod(&acc, &base, nonlead, p);
                }
                base = fp_mulmod(&base, &base, nonlead, p);
                ex >>= 1;
            }
            cur = acc;
        }
        cur
    };
    let x = vec![0u64, 1];
    let xpf = xp(x.clone(), f);
    let mut diff: Vec<u64> = xpf.clone();
    while diff.len() < 2 {
        diff.push(0);
    }
    diff[1] = (diff[1] + p - 1) % p;
    {
        let mut d = diff.clone();
        fp_trim(&mut d);
        if !d.is_empty() {
            return false;
        }
    }
    let mut full = vec![0u64; f + 1];
    full[f] = 1;
    for j in 0..f {
        full[j] = nonlead[j];
    }
    let mut ell = 2;
    let mut rem = f;
    while rem > 1 {
        if rem % ell == 0 {
            let xpe = xp(x.clone(), f / ell);
            let mut d = xpe;
            while d.len() < 2 {
                d.push(0);
            }
            d[1] = (d[1] + p - 1) % p;
            fp_trim(&mut d);
            let g = fp_gcd(full.clone(), d, p);
            if g.len() != 1 {
                return false;
            }
            while rem % ell == 0 {
                rem /= ell;
            }
        }
        ell += 1;
    }
    true
}

// ---------------- residue field ----------------

#[derive(Debug)]
struct FqInner {
    p: u64,
    f: usize,
    nonlead: Vec<u64>,
    q: u64,
}

/// Context for F_q = F_p[t]/(inertial mod p).
#[derive(Clone, Debug)]
pub struct Fq(Arc<FqInner>);

impl PartialEq for Fq {
    fn eq(&self, other: &Self) -> bool {
        self.0.p == other.0.p && self.0.nonlead == other.0.nonlead
    }
}
impl Eq for Fq {}

/// Element of F_q in the power basis of t.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FqElem {
    pub(crate) c: Vec<u64>,
}

impl fmt::Debug for FqElem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "Fq{:?}", self.c)
    }
}

impl Fq {
    pub fn new(p: u64, f: usize) -> Result<Fq> {
        let tab = inertial_table(p, f)?;
        Ok(Fq::from_nonlead(
            p,
            tab.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect(),
        ))
    }

    pub(crate) fn from_nonlead(p: u64, nonlead: Vec<u64>) -> Fq {
        let f = nonlead.len();
        Fq(Arc::new(FqInner { p, f, nonlead, q: p.pow(f as u32) }))
    }

    pub fn p(&self) -> u64 {
        self.0.p
    }
    pub fn f(&self) -> usize {
        self.0.f
    }
    pub fn q(&self) -> u64 {
        self.0.q
    }

    pub fn zero(&self) -> FqElem {
        FqElem { c: vec![0; self.0.f] }
    }
    pub fn one(&self) -> FqElem {
        self.int(1)
    }
    pub fn int(&self, n: i64) -> FqElem {
        let mut c = vec![0; self.0.f];
        c[0] = n.rem_euclid(self.0.p as i64) as u64;
        FqElem { c }
    }
    /// Element from residues of the power basis coordinates.
    pub fn from_coords(&self, coords: &[i64]) -> Result<FqElem> {
        if coords.len() > self.0.f {
            return Err(Error::Schema {
                path: "coords".into(),
                msg: format!("expected at most {} coordinates", self.0.f),
            });
        }
        let mut c = vec![0; self.0.f];
        for (i, &x) in coords.iter().enumerate() {
            c[i] = x.rem_euclid(self.0.p as i64) as u64;
        }
        Ok(FqElem { c })
    }
    /// The generator t of F_q over F_p (zero when f = 1 would be wrong; for f = 1 this is
    /// the class of t, i.e. -inertial_poly[0]).
    pub fn gen(&self) -> FqElem {
        if self.0.f == 1 {
            return self.int(-(self.0.nonlead[0] as i64));
        }
        let mut c = vec![0; self.0.f];
        c[1] = 1;
        FqElem { c }
    }

    pub fn is_zero(&self, a: &FqElem) -> bool {
        a.c.iter().all(|&x| x == 0)
    }
    pub fn add(&self, a: &FqElem, b: &FqElem) -> FqElem {
        FqElem {
            c: a.c.iter().zip(&b.c).map(|(x, y)| (x + y) % self.0.p).collect(),
        }
    }
    pub fn sub(&self, a: &FqElem, b: &FqElem) -> FqElem {
        FqElem {
            c: a.c
                .iter()
                .zip(&b.c)
                .map(|(x, y)| (x + self.0.p - y) % self.0.p)
                .collect(),
        }
    }
    pub fn neg(&self, a: &FqElem) -> FqElem {
        FqElem {
            c: a.c.iter().map(|&x| (self.0.p - x) % self.0.p).collect(),
        }
    }
    pub fn mul(&self, a: &FqElem, b: &FqElem) -> FqElem {
        FqElem {
            c: fp_mulmod(&a.c, &b.c, &self.0.nonlead, self.0.p),
        }
    }
    pub fn pow(&self, a: &FqElem, mut ex: u64) -> FqElem {
        let mut acc = self.one();
        let mut base = a.clone();
        while ex > 0 {
            if ex & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            ex >>= 1;
        }
        acc
    }
    pub fn inv(&self, a: &FqElem) -> Result<FqElem> {
        if self.is_zero(a) {
            return Err(Error::ZeroInput);
        }
        Ok(self.pow(a, self.0.q - 2))
    }
    pub fn coords<'a>(&self, a: &'a FqElem) -> &'a [u64] {
        &a.c
    }
}

// ---------------- O_K ----------------

fn ceil_div(a: u32, b: u32) -> u32 {
    a.div_ceil(b)
}

#[derive(Debug)]
struct OkInner {
    spec: RingSpec,
    /// Working precision of this context; elements never exceed it.
    nwork: u32,
    /// Storage modulus exponent: coordinate i is always below p^mmax.
    mmax: usize,
    pbig: BigUint,
    /// p^0 ..= p^mmax
    ppow: Vec<BigUint>,
    /// -eisenstein[i] as residues mod p^mmax, for i < e (used to fold pi^e down)
    eis_neg: Vec<BigUint>,
    /// p / pi as a coefficient array (exact representative at full precision)
    rho: Vec<Vec<BigUint>>,
    fq: Fq,
}

/// Handle to an O_K context. Cheap to clone; elements keep one.
#[derive(Clone, Debug)]
pub struct OkRing(Arc<OkInner>);

impl PartialEq for OkRing {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }
}
impl Eq for OkRing {}

/// Element of O_K. Coordinates are canonical: coeffs[i][j] < p^ceil((prec-i)/e).
#[derive(Clone)]
pub struct OKElem {
    ring: OkRing,
    coeffs: Vec<Vec<BigUint>>,
    prec: u32,
}

impl PartialEq for OKElem {
    fn eq(&self, other: &Self) -> bool {
        self.prec == other.prec && self.coeffs == other.coeffs
    }
}
impl Eq for OKElem {}

impl fmt::Debug for OKElem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "OK[prec {}](", self.prec)?;
        for (i, w) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(fm, " + ")?;
            }
            write!(fm, "{:?}*pi^{}", w.iter().map(|x| x.to_string()).collect::<Vec<_>>(), i)?;
        }
        write!(fm, ")")
    }
}

/// Valuation of an element, exact below the carried precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(u32),
    /// Indistinguishable from 0 at the carried precision.
    InfiniteAtPrecision,
}

impl Valuation {
    pub fn finite(&self) -> Option<u32> {
        match self {
            Valuation::Finite(v) => Some(*v),
            Valuation::InfiniteAtPrecision => None,
        }
    }
}

impl OkRing {
    pub fn new(spec: RingSpec) -> Result<OkRing> {
        spec.validate()?;
        let nwork = spec.prec;
        Self::build(spec, nwork)
    }

    /// Same spec, elements carried to a (possibly larger) working precision.
    /// Used internally by solvers that need reserve digits.
    pub fn widened(&self, nwork: u32) -> Result<OkRing> {
        if nwork == self.0.nwork {
            return Ok(self.clone());
        }
        Self::build(self.0.spec.clone(), nwork.max(1))
    }

    fn build(spec: RingSpec, nwork: u32) -> Result<OkRing> {
        let e = spec.e;
        let mmax = ceil_div(nwork, e as u32) as usize + 1;
        let pbig = BigUint::from(spec.p);
        let mut ppow = Vec::with_capacity(mmax + 1);
        let mut acc = BigUint::one();
        for _ in 0..=mmax {
            ppow.push(acc.clone());
            acc *= &pbig;
        }
        let pm = &ppow[mmax];
        let to_res = |c: i64| -> BigUint {
            let b = BigInt::from(c).mod_floor(&BigInt::from(pm.clone()));
            b.to_biguint().unwrap()
        };
        let eis_neg: Vec<BigUint> = (0..e).map(|i| to_res(-spec.eisenstein_poly[i])).collect();
        let fq = Fq::from_nonlead(
            spec.p,
            spec.inertial_poly
                .iter()
                .map(|&c| c.rem_euclid(spec.p as i64) as u64)
                .collect(),
        );

        // rho = p/pi = u0^{-1} * (-pi^{e-1} - sum_{i=1}^{e-1} c_i pi^{i-1}), u0 = c_0/p
        let c0 = spec.eisenstein_poly[0];
        let u0 = c0 / spec.p as i64;
        let u0_res = {
            let b = BigInt::from(u0).mod_floor(&BigInt::from(pm.clone()));
            b.to_biguint().unwrap()
        };
        let u0_inv = int_inv_mod_ppow(&u0_res, spec.p, pm);
        let mut rho = vec![vec![BigUint::zero(); spec.f]; e];
        let neg_mod = |x: &BigUint| -> BigUint {
            if x.is_zero() {
                BigUint::zero()
            } else {
                pm - (x % pm)
            }
        };
        if e == 1 {
            rho[0][0] = neg_mod(&u0_inv) % pm;
        } else {
            rho[e - 1][0] = neg_mod(&u0_inv);
            for i in 1..e {
                let ci = to_res(spec.eisenstein_poly[i]);
                rho[i - 1][0] = neg_mod(&((&ci * &u0_inv) % pm));
            }
        }

        Ok(OkRing(Arc::new(OkInner {
            spec,
            nwork,
            mmax,
            pbig,
            ppow,
            eis_neg,
            rho,
            fq,
        })))
    }

    pub fn spec(&self) -> &RingSpec {
        &self.0.spec
    }
    pub fn residue_field(&self) -> Fq {
        self.0.fq.clone()
    }
    pub fn p(&self) -> u64 {
        self.0.spec.p
    }
    pub fn e(&self) -> usize {
        self.0.spec.e
    }
    pub fn f(&self) -> usize {
        self.0.spec.f
    }
    pub fn q(&self) -> u64 {
        self.0.spec.q()
    }
    /// Working precision of this context.
    pub fn precision(&self) -> u32 {
        self.0.nwork
    }

    fn modulus_exp(&self, prec: u32, i: usize) -> usize {
        if prec as usize <= i {
            0
        } else {
            (ceil_div(prec - i as u32, self.0.spec.e as u32) as usize).min(self.0.mmax)
        }
    }

    fn canonicalize(&self, mut coeffs: Vec<Vec<BigUint>>, prec: u32) -> OKElem {
        let prec = prec.min(self.0.nwork);
        for (i, w) in coeffs.iter_mut().enumerate() {
            let m = self.modulus_exp(prec, i);
            let pm = &self.0.ppow[m];
            for c in w.iter_mut() {
                if m == 0 {
                    *c = BigUint::zero();
                } else if &*c >= pm {
                    *c %= pm;
                }
            }
        }
        OKElem { ring: self.clone(), coeffs, prec }
    }

    pub fn zero(&self) -> OKElem {
        self.zero_at(self.0.nwork)
    }
    pub fn zero_at(&self, prec: u32) -> OKElem {
        OKElem {
            ring: self.clone(),
            coeffs: vec![vec![BigUint::zero(); self.0.spec.f]; self.0.spec.e],
            prec: prec.min(self.0.nwork),
        }
    }
    pub fn one(&self) -> OKElem {
        self.int(1)
    }
    pub fn int(&self, n: i64) -> OKElem {
        self.from_bigint(&BigInt::from(n))
    }
    pub fn from_bigint(&self, n: &BigInt) -> OKElem {
        let pm = &self.0.ppow[self.0.mmax];
        let r = n.mod_floor(&BigInt::from(pm.clone())).to_biguint().unwrap();
        let mut coeffs = vec![vec![BigUint::zero(); self.0.spec.f]; self.0.spec.e];
        coeffs[0][0] = r;
        self.canonicalize(coeffs, self.0.nwork)
    }

    /// The fixed uniformizer pi as an element.
    pub fn pi(&self) -> OKElem {
        if self.0.spec.e == 1 {
            // pi = -c_0, a W-constant
            let mut coeffs = vec![vec![BigUint::zero(); self.0.spec.f]];
            coeffs[0][0] = self.0.eis_neg[0].clone();
            self.canonicalize(coeffs, self.0.nwork)
        } else {
            let mut coeffs = vec![vec![BigUint::zero(); self.0.spec.f]; self.0.spec.e];
            coeffs[1][0] = BigUint::one();
            self.canonicalize(coeffs, self.0.nwork)
        }
    }

    pub fn pi_pow(&self, k: u32) -> OKElem {
        let mut acc = self.one();
        let pi = self.pi();
        for _ in 0..k {
            acc = self.mul(&acc, &pi).expect("same ring");
        }
        acc
    }

    /// Element from raw tower coordinates (i over pi-powers, j over omega-powers).
    pub fn from_coords(&self, coords: &[Vec<BigInt>], prec: u32) -> Result<OKElem> {
        if coords.len() > self.0.spec.e {
            return Err(Error::Schema {
                path: "coeffs".into(),
                msg: format!("expected at most e = {} pi-coordinates", self.0.spec.e),
            });
        }
        let pm = BigInt::from(self.0.ppow[self.0.mmax].clone());
        let mut coeffs = vec![vec![BigUint::zero(); self.0.spec.f]; self.0.spec.e];
        for (i, row) in coords.iter().enumerate() {
            if row.len() > self.0.spec.f {
                return Err(Error::Schema {
                    path: format!("coeffs[{}]", i),
                    msg: format!("expected at most f = {} omega-coordinates", self.0.spec.f),
                });
            }
            for (j, v) in row.iter().enumerate() {
                coeffs[i][j] = v.mod_floor(&pm).to_biguint().unwrap();
            }
        }
        Ok(self.canonicalize(coeffs, prec))
    }

    fn check_same(&self, other: &OkRing) -> Result<()> {
        if self != other {
            return Err(Error::RingMismatch(format!(
                "({},{},{}) vs ({},{},{})",
                self.0.spec.p, self.0.spec.f, self.0.spec.e,
                other.0.spec.p, other.0.spec.f, other.0.spec.e
            )));
        }
        Ok(())
    }

    /// Move an element into this context (same spec required). Precision is capped
    /// by both the element's knowledge and this context's working precision.
    pub fn convert(&self, a: &OKElem) -> Result<OKElem> {
        self.check_same(&a.ring)?;
        Ok(self.canonicalize(a.coeffs.clone(), a.prec))
    }

    /// Treat the canonical representative of `a` as exact in this context.
    /// Sound only when the caller knows the representative is the intended value.
    pub fn lift_exact(&self, a: &OKElem) -> Result<OKElem> {
        self.check_same(&a.ring)?;
        Ok(self.canonicalize(a.coeffs.clone(), self.0.nwork))
    }

    // -------- arithmetic --------

    fn raw_add(&self, a: &[Vec<BigUint>], b: &[Vec<BigUint>]) -> Vec<Vec<BigUint>> {
        a.iter()
            .zip(b)
            .map(|(wa, wb)| wa.iter().zip(wb).map(|(x, y)| x + y).collect())
            .collect()
    }

    pub fn add(&self, a: &OKElem, b: &OKElem) -> Result<OKElem> {
        self.check_elems(a, b)?;
        Ok(self.canonicalize(self.raw_add(&a.coeffs, &b.coeffs), a.prec.min(b.prec)))
    }

    pub fn neg(&self, a: &OKElem) -> OKElem {
        let pm = &self.0.ppow[self.0.mmax];
        let coeffs = a
            .coeffs
            .iter()
            .map(|w| {
                w.iter()
                    .map(|x| if x.is_zero() { BigUint::zero() } else { pm - x })
                    .collect()
            })
            .collect();
        self.canonicalize(coeffs, a.prec)
    }

    pub fn sub(&self, a: &OKElem, b: &OKElem) -> Result<OKElem> {
        let nb = self.neg(b);
        self.add(a, &nb)
    }

    fn check_elems(&self, a: &OKElem, b: &OKElem) -> Result<()> {
        self.check_same(&a.ring)?;
        self.check_same(&b.ring)
    }

    fn w_mul(&self, a: &[BigUint], b: &[BigUint]) -> Vec<BigUint> {
        let f = self.0.spec.f;
        let pm = &self.0.ppow[self.0.mmax];
        let mut prod = vec![BigUint::zero(); 2 * f - 1];
        for i in 0..f {
            if a[i].is_zero() {
                continue;
            }
            for j in 0..f {
                if b[j].is_zero() {
                    continue;
                }
                prod[i + j] += &a[i] * &b[j];
            }
        }
        // fold t^f down using the monic inertial polynomial
        let nonlead = &self.0.spec.inertial_poly;
        for d in (f..prod.len()).rev() {
            if prod[d].is_zero() {
                continue;
            }
            let c = std::mem::take(&mut prod[d]) % pm;
            for j in 0..f {
                let coef = nonlead[j].rem_euclid(self.0.spec.p as i64) as u64;
                // subtract c * coef (the true reduction is t^f = -sum nonlead t^j,
                // with nonlead taken mod p only when this context has f > 1 towers
                // over general p^m; here lift the full integer coefficient)
                let full = BigInt::from(nonlead[j]);
                let coef_res = full.mod_floor(&BigInt::from(pm.clone())).to_biguint().unwrap();
                let _ = coef;
                let sub = (&c * &coef_res) % pm;
                if !sub.is_zero() {
                    prod[d - f + j] += pm - &sub;
                }
            }
        }
        prod.truncate(f);
        for c in prod.iter_mut() {
            *c %= pm;
        }
        prod
    }

    fn w_scale(&self, a: &[BigUint], s: &BigUint) -> Vec<BigUint> {
        let pm = &self.0.ppow[self.0.mmax];
        a.iter().map(|x| (x * s) % pm).collect()
    }

    fn raw_mul(&self, a: &[Vec<BigUint>], b: &[Vec<BigUint>]) -> Vec<Vec<BigUint>> {
        let e = self.0.spec.e;
        let f = self.0.spec.f;
        let mut prod = vec![vec![BigUint::zero(); f]; 2 * e - 1];
        for i in 0..e {
            if a[i].iter().all(|x| x.is_zero()) {
                continue;
            }
            for j in 0..e {
                if b[j].iter().all(|x| x.is_zero()) {
                    continue;
                }
                let w = self.w_mul(&a[i], &b[j]);
                for (k, v) in w.into_iter().enumerate() {
                    prod[i + j][k] += v;
                }
            }
        }
        // fold pi^e down: pi^e = sum_i eis_neg[i] pi^i
        for d in (e..prod.len()).rev() {
            let w = std::mem::take(&mut prod[d]);
            if w.iter().all(|x| x.is_zero()) {
                continue;
            }
            for i in 0..e {
                if self.0.eis_neg[i].is_zero() {
                    continue;
                }
                let scaled = self.w_scale(&w, &self.0.eis_neg[i]);
                for (k, v) in scaled.into_iter().enumerate() {
                    prod[d - e + i][k] += v;
                }
            }
        }
        prod.truncate(e);
        prod
    }

    /// Product with the conservative precision rule: min of the inputs' precision.
    pub fn mul(&self, a: &OKElem, b: &OKElem) -> Result<OKElem> {
        self.check_elems(a, b)?;
        Ok(self.canonicalize(self.raw_mul(&a.coeffs, &b.coeffs), a.prec.min(b.prec)))
    }

    /// Product with first-order precision propagation:
    /// prec = min(v(a_rep) + prec_b, v(b_rep) + prec_a), capped at the context precision.
    /// Used by solvers; the conservative `mul` is the public contract.
    pub fn mul_sharp(&self, a: &OKElem, b: &OKElem) -> Result<OKElem> {
        self.check_elems(a, b)?;
        let va = self.rep_valuation(a);
        let vb = self.rep_valuation(b);
        let cap = self.0.nwork;
        let term = |v: Option<u32>, prec: u32| -> u32 {
            match v {
                None => cap,
                Some(v) => (v.saturating_add(prec)).min(cap),
            }
        };
        let prec = term(va, b.prec).min(term(vb, a.prec));
        Ok(self.canonicalize(self.raw_mul(&a.coeffs, &b.coeffs), prec))
    }

    /// Multiply by an exact integer; precision improves by e * v_p(n).
    pub fn mul_int_sharp(&self, a: &OKElem, n: &BigInt) -> OKElem {
        if n.is_zero() {
            return self.zero();
        }
        let pm = &self.0.ppow[self.0.mmax];
        let mut vp = 0u32;
        let mut m = n.abs().to_biguint().unwrap();
        while (&m % &self.0.pbig).is_zero() {
            m /= &self.0.pbig;
            vp += 1;
            if vp as usize > self.0.mmax {
                break;
            }
        }
        let r = n.mod_floor(&BigInt::from(pm.clone())).to_biguint().unwrap();
        let coeffs = a.coeffs.iter().map(|w| self.w_scale(w, &r)).collect();
        let prec = a
            .prec
            .saturating_add(vp * self.0.spec.e as u32)
            .min(self.0.nwork);
        self.canonicalize(coeffs, prec)
    }

    /// Valuation of the canonical representative (None when the representative is 0).
    fn rep_valuation(&self, a: &OKElem) -> Option<u32> {
        let e = self.0.spec.e as u32;
        let mut best: Option<u32> = None;
        for (i, w) in a.coeffs.iter().enumerate() {
            for c in w {
                if c.is_zero() {
                    continue;
                }
                let mut v = 0u32;
                let mut x = c.clone();
                while (&x % &self.0.pbig).is_zero() {
                    x /= &self.0.pbig;
                    v += 1;
                }
                let cand = i as u32 + e * v;
                best = Some(best.map_or(cand, |b| b.min(cand)));
            }
        }
        best
    }

    /// v_K, exact when below the carried precision.
    pub fn valuation(&self, a: &OKElem) -> Valuation {
        match self.rep_valuation(a) {
            Some(v) if v < a.prec => Valuation::Finite(v),
            _ => Valuation::InfiniteAtPrecision,
        }
    }

    pub fn is_zero_rep(&self, a: &OKElem) -> bool {
        a.coeffs.iter().all(|w| w.iter().all(|c| c.is_zero()))
    }

    /// Inverse of a unit by Hensel/Newton lifting; result is correct at a's precision.
    pub fn unit_inverse(&self, a: &OKElem) -> Result<OKElem> {
        match self.valuation(a) {
            Valuation::Finite(0) => {}
            Valuation::Finite(v) => return Err(Error::NotAUnit { val: v }),
            Valuation::InfiniteAtPrecision => {
                return Err(Error::NotAUnit { val: a.prec });
            }
        }
        let fq = &self.0.fq;
        let res = self.residue_reduce(a)?;
        let res_inv = fq.inv(&res)?;
        // compute at full context precision on representatives, then cut to a's precision
        let awork = self.canonicalize(a.coeffs.clone(), self.0.nwork);
        let mut x = self.lift_residue(&res_inv);
        let two = self.int(2);
        let mut iters = 0u32;
        loop {
            let ax = self.mul(&awork, &x)?;
            let corr = self.sub(&two, &ax)?;
            let next = self.mul(&x, &corr)?;
            if next == x {
                break;
            }
            x = next;
            iters += 1;
            if iters > self.0.nwork + 8 {
                return Err(Error::ResidualNonzero(
                    "unit inverse iteration failed to converge".into(),
                ));
            }
        }
        Ok(self.canonicalize(x.coeffs, a.prec))
    }

    /// Exact division by pi^k; the result loses k digits of precision.
    pub fn pi_divide(&self, a: &OKElem, k: u32) -> Result<OKElem> {
        if k == 0 {
            return Ok(a.clone());
        }
        if a.prec < k {
            return Err(Error::InsufficientPrecision(format!(
                "cannot divide by pi^{} an element known only mod pi^{}",
                k, a.prec
            )));
        }
        if let Some(v) = self.rep_valuation(&OKElem {
            ring: a.ring.clone(),
            coeffs: a.coeffs.clone(),
            prec: a.prec,
        }) {
            if v < k && v < a.prec {
                return Err(Error::NotDivisible { val: v, want: k });
            }
        }
        let mut cur = a.clone();
        for _ in 0..k {
            cur = self.pi_divide_once(&cur)?;
        }
        Ok(cur)
    }

    fn pi_divide_once(&self, a: &OKElem) -> Result<OKElem> {
        let e = self.0.spec.e;
        let f = self.0.spec.f;
        // w0 must be divisible by p
        for c in &a.coeffs[0] {
            if !c.is_zero() && !(c % &self.0.pbig).is_zero() {
                return Err(Error::NotDivisible { val: 0, want: 1 });
            }
        }
        let w0_div: Vec<BigUint> = a.coeffs[0].iter().map(|c| c / &self.0.pbig).collect();
        // (w0/p) * rho
        let mut acc = vec![vec![BigUint::zero(); f]; e];
        for i in 0..e {
            if self.0.rho[i].iter().all(|x| x.is_zero()) {
                continue;
            }
            let w = self.w_mul(&w0_div, &self.0.rho[i]);
            for (k, v) in w.into_iter().enumerate() {
                acc[i][k] += v;
            }
        }
        // plus the shifted tail
        for i in 1..e {
            for k in 0..f {
                acc[i - 1][k] += &a.coeffs[i][k];
            }
        }
        Ok(self.canonicalize(acc, a.prec - 1))
    }

    pub fn residue_reduce(&self, a: &OKElem) -> Result<FqElem> {
        if a.prec < 1 {
            return Err(Error::InsufficientPrecision(
                "element carries no pi-adic digits".into(),
            ));
        }
        let c = a.coeffs[0]
            .iter()
            .map(|x| (x % &self.0.pbig).to_u64().unwrap())
            .collect();
        Ok(FqElem { c })
    }

    /// Digit lift of a residue (coordinates in [0, p)); not the Teichmuller lift.
    pub fn lift_residue(&self, r: &FqElem) -> OKElem {
        let f = self.0.spec.f;
        let mut coeffs = vec![vec![BigUint::zero(); f]; self.0.spec.e];
        for j in 0..f {
            coeffs[0][j] = BigUint::from(r.c[j]);
        }
        self.canonicalize(coeffs, self.0.nwork)
    }

    /// The (q-1)-th root of unity lifting a nonzero residue, by iterating x -> x^q.
    pub fn teichmuller(&self, r: &FqElem) -> Result<OKElem> {
        if self.0.fq.is_zero(r) {
            return Err(Error::ZeroInput);
        }
        let q = self.0.spec.q();
        let mut x = self.lift_residue(r);
        let mut iters = 0u32;
        loop {
            let next = self.pow_u64(&x, q)?;
            if next == x {
                break;
            }
            x = next;
            iters += 1;
            if iters > self.0.nwork + 8 {
                return Err(Error::ResidualNonzero(
                    "teichmuller iteration failed to converge".into(),
                ));
            }
        }
        Ok(x)
    }

    pub fn pow_u64(&self, a: &OKElem, mut ex: u64) -> Result<OKElem> {
        let mut acc = self.one();
        let mut base = a.clone();
        while ex > 0 {
            if ex & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            base = self.mul(&base, &base)?;
            ex >>= 1;
        }
        Ok(acc)
    }

    pub fn pow_bigint(&self, a: &OKElem, ex: &BigUint) -> Result<OKElem> {
        let mut acc = self.one();
        let mut base = a.clone();
        let bits = ex.bits();
        for i in 0..bits {
            if ex.bit(i) {
                acc = self.mul(&acc, &base)?;
            }
            if i + 1 < bits {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// Truncate knowledge to `prec` digits.
    pub fn reduce_prec(&self, a: &OKElem, prec: u32) -> OKElem {
        self.canonicalize(a.coeffs.clone(), prec.min(a.prec))
    }

    /// Do the two elements agree mod pi^k? Errors if either knows fewer than k digits.
    pub fn eq_mod(&self, a: &OKElem, b: &OKElem, k: u32) -> Result<bool> {
        if a.prec < k || b.prec < k {
            return Err(Error::InsufficientPrecision(format!(
                "comparison mod pi^{} needs both elements at that precision (have {}, {})",
                k, a.prec, b.prec
            )));
        }
        let ra = self.reduce_prec(a, k);
        let rb = self.reduce_prec(b, k);
        Ok(ra.coeffs == rb.coeffs)
    }

    pub(crate) fn coords_bigint(&self, a: &OKElem) -> Vec<Vec<BigUint>> {
        a.coeffs.clone()
    }
}

impl OKElem {
    pub fn prec(&self) -> u32 {
        self.prec
    }
    pub fn ring(&self) -> &OkRing {
        &self.ring
    }
    pub fn coords(&self) -> &[Vec<BigUint>] {
        &self.coeffs
    }
}

fn int_inv_mod_ppow(a: &BigUint, p: u64, pm: &BigUint) -> BigUint {
    // Newton lift of the Fermat inverse mod p
    let a_mod_p = (a % BigUint::from(p)).to_u64().unwrap();
    let mut x = BigUint::from(modinv_u64(a_mod_p, p));
    let two = BigUint::from(2u32);
    loop {
        let ax = (a * &x) % pm;
        let corr = ((&two + pm) - ax) % pm;
        let next = (&x * corr) % pm;
        if next == x {
            return x;
        }
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(2, 1, 1, n).unwrap()).unwrap()
    }
    fn z3(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(3, 1, 1, n).unwrap()).unwrap()
    }
    fn ram2(n: u32) -> OkRing {
        // pi^2 = 2 over Z_2
        OkRing::new(RingSpec::standard(2, 1, 2, n).unwrap()).unwrap()
    }
    fn unram4(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(2, 2, 1, n).unwrap()).unwrap()
    }

    #[test]
    fn mul_in_z2() {
        let r = z2(4);
        let a = r.int(3);
        let b = r.int(5);
        let c = r.mul(&a, &b).unwrap();
        assert_eq!(c, r.int(15));
    }

    #[test]
    fn pi_squared_is_two() {
        let r = ram2(6);
        let pi = r.pi();
        let two = r.mul(&pi, &pi).unwrap();
        assert_eq!(two, r.int(2));
    }

    #[test]
    fn add_zero_identity() {
        let r = z3(5);
        let a = r.int(17);
        assert_eq!(r.add(&a, &r.zero()).unwrap(), a);
    }

    #[test]
    fn valuations() {
        let r = z2(6);
        assert_eq!(r.valuation(&r.int(4)), Valuation::Finite(2));
        assert_eq!(r.valuation(&r.zero()), Valuation::InfiniteAtPrecision);
        let rr = ram2(8);
        let a = rr.add(&rr.pi(), &rr.int(2)).unwrap();
        assert_eq!(rr.valuation(&a), Valuation::Finite(1));
    }

    #[test]
    fn unit_inverse_z2() {
        let r = z2(4);
        let inv = r.unit_inverse(&r.int(3)).unwrap();
        assert_eq!(inv, r.int(11));
        assert_eq!(r.unit_inverse(&r.one()).unwrap(), r.one());
        assert!(matches!(
            r.unit_inverse(&r.int(2)),
            Err(Error::NotAUnit { val: 1 })
        ));
    }

    #[test]
    fn pi_divide_basics() {
        let r = z2(4);
        let q = r.pi_divide(&r.int(6), 1).unwrap();
        assert_eq!(q.prec(), 3);
        assert!(r.eq_mod(&q, &r.int(3), 3).unwrap());
        let z = r.pi_divide(&r.zero(), 1).unwrap();
        assert_eq!(z.prec(), 3);
        assert!(r.is_zero_rep(&z));
        assert!(matches!(
            r.pi_divide(&r.int(3), 1),
            Err(Error::NotDivisible { val: 0, want: 1 })
        ));
    }

    #[test]
    fn pi_divide_ramified() {
        let r = ram2(8);
        // (pi + 2) / pi = 1 + pi
        let a = r.add(&r.pi(), &r.int(2)).unwrap();
        let d = r.pi_divide(&a, 1).unwrap();
        let expect = r.add(&r.one(), &r.pi()).unwrap();
        assert!(r.eq_mod(&d, &expect, 7).unwrap());
    }

    #[test]
    fn teichmuller_z3() {
        let r = z3(2);
        let fq = r.residue_field();
        let t = r.teichmuller(&fq.int(2)).unwrap();
        assert_eq!(t, r.int(8)); // 8 = -1 mod 9
        assert_eq!(r.teichmuller(&fq.int(1)).unwrap(), r.one());
    }

    #[test]
    fn teichmuller_f4() {
        let r = unram4(6);
        let fq = r.residue_field();
        let w = r.teichmuller(&fq.gen()).unwrap();
        let w3 = r.pow_u64(&w, 3).unwrap();
        assert_eq!(w3, r.one());
        assert_eq!(r.residue_reduce(&w).unwrap(), fq.gen());
        assert!(matches!(r.teichmuller(&fq.zero()), Err(Error::ZeroInput)));
    }

    #[test]
    fn residue_reduction() {
        let r = z2(4);
        assert_eq!(r.residue_reduce(&r.int(5)).unwrap(), r.residue_field().int(1));
        let rr = ram2(4);
        assert!(rr.residue_field().is_zero(&rr.residue_reduce(&rr.pi()).unwrap()));
        let r3 = z3(4);
        assert_eq!(r3.residue_reduce(&r3.int(8)).unwrap(), r3.residue_field().int(2));
    }

    #[test]
    fn units_power_fact() {
        // for v(u - 1) = l > e/(p-1): v(u^p - 1) = l + e
        for (ring, l) in [
            (z2(12), 2u32),
            (z2(12), 3u32),
            (z3(12), 1u32),
            (ram2(12), 3u32),
            (unram4(12), 2u32),
        ] {
            let u = ring
                .add(&ring.one(), &ring.pi_pow(l))
                .unwrap();
            let up = ring.pow_u64(&u, ring.p()).unwrap();
            let diff = ring.sub(&up, &ring.one()).unwrap();
            assert_eq!(
                ring.valuation(&diff),
                Valuation::Finite(l + ring.e() as u32),
                "ring ({},{},{}), l={}",
                ring.p(),
                ring.f(),
                ring.e(),
                l
            );
        }
    }

    #[test]
    fn sharp_mul_gains_precision() {
        let r = z2(8);
        let a = r.int(2); // v = 1, full precision 8
        let b = r.reduce_prec(&r.int(3), 5);
        let c = r.mul_sharp(&a, &b).unwrap();
        assert_eq!(c.prec(), 6); // min(1 + 5, 0 + 8)
        let d = r.mul(&a, &b).unwrap();
        assert_eq!(d.prec(), 5);
        let e = r.mul_int_sharp(&b, &num_bigint::BigInt::from(4));
        assert_eq!(e.prec(), 7); // 5 + v_2(4) * e
    }

    #[test]
    fn fq_field_ops() {
        let fq = Fq::new(2, 2).unwrap();
        let t = fq.gen();
        let t2 = fq.mul(&t, &t);
        // t^2 = t + 1 under t^2+t+1
        assert_eq!(t2, fq.add(&t, &fq.one()));
        let inv = fq.inv(&t).unwrap();
        assert_eq!(fq.mul(&t, &inv), fq.one());
        assert_eq!(fq.pow(&t, 3), fq.one());
    }

    #[test]
    fn inertial_table_matches_spec_examples() {
        assert_eq!(inertial_table(2, 1).unwrap(), vec![1]);
        assert_eq!(inertial_table(2, 2).unwrap(), vec![1, 1]); // t^2 + t + 1
        assert_eq!(inertial_table(2, 3).unwrap(), vec![1, 1, 0]); // t^3 + t + 1
    }

    #[test]
    fn spec_validation_rejects_non_eisenstein() {
        let spec = RingSpec {
            p: 2,
            f: 1,
            e: 2,
            inertial_poly: vec![1],
            eisenstein_poly: vec![-1, 0, 1],
            prec: 4,
        };
        assert!(OkRing::new(spec).is_err());
        let spec4 = RingSpec {
            p: 2,
            f: 1,
            e: 1,
            inertial_poly: vec![1],
            eisenstein_poly: vec![-4, 1],
            prec: 4,
        };
        assert!(OkRing::new(spec4).is_err());
    }
}
