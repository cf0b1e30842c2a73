//! Lubin-Tate formal groups over O_K: the coefficient-by-coefficient solver for
//! the fundamental lemma, group-law construction with axiom verification, the
//! endomorphism table, the Lazard congruence check, and reduction to F_q.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::ring::{OKElem, OkRing, Valuation};
use crate::series::{BiSeries, CoeffRing, Series};

/// A series satisfying the two Lubin-Tate conditions: f = pi x mod degree 2 and
/// f = x^q mod M_K. Stored as an exact polynomial (coefficients beyond the list
/// are zero).
#[derive(Clone, Debug)]
pub struct FrobeniusSeries {
    ring: OkRing,
    /// coeffs[k] is the coefficient of x^(k+1); exact data at ring precision
    coeffs: Vec<OKElem>,
}

impl FrobeniusSeries {
    pub fn new(ring: &OkRing, coeffs: Vec<OKElem>) -> Result<Self> {
        let q = ring.q();
        if (coeffs.len() as u64) < q {
            return Err(Error::HypothesisViolated(format!(
                "Frobenius series must reach degree q = {}",
                q
            )));
        }
        let f = FrobeniusSeries { ring: ring.clone(), coeffs };
        f.validate()?;
        Ok(f)
    }

    /// The canonical instance pi x + x^q.
    pub fn canonical(ring: &OkRing) -> Self {
        let q = ring.q() as usize;
        let mut coeffs = vec![ring.zero(); q];
        coeffs[0] = ring.pi();
        coeffs[q - 1] = ring.one();
        FrobeniusSeries { ring: ring.clone(), coeffs }
    }

    fn validate(&self) -> Result<()> {
        let ring = &self.ring;
        match ring.valuation(&self.coeffs[0]) {
            Valuation::Finite(1) => {}
            v => {
                return Err(Error::HypothesisViolated(format!(
                    "linear coefficient must be a uniformizer (valuation 1), got {:?}",
                    v
                )))
            }
        }
        let q = ring.q() as usize;
        for (k, c) in self.coeffs.iter().enumerate() {
            let deg = k + 1;
            if deg == q {
                let diff = ring.sub(c, &ring.one())?;
                if matches!(ring.valuation(&diff), Valuation::Finite(0)) {
                    return Err(Error::HypothesisViolated(
                        "coefficient of x^q must reduce to 1".into(),
                    ));
                }
            } else if matches!(ring.valuation(c), Valuation::Finite(0)) {
                return Err(Error::HypothesisViolated(format!(
                    "coefficient of x^{} must reduce to 0 for f = x^q mod M_K",
                    deg
                )));
            }
        }
        Ok(())
    }

    pub fn ring(&self) -> &OkRing {
        &self.ring
    }

    pub fn uniformizer(&self) -> &OKElem {
        &self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[OKElem] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// As a series at the requested truncation.
    pub fn as_series(&self, trunc: usize) -> Series<OkRing> {
        let mut s = Series::zero(&self.ring, trunc);
        for (k, c) in self.coeffs.iter().enumerate() {
            if k + 1 <= trunc {
                s.set_coeff(k + 1, c.clone());
            }
        }
        s
    }

    fn lift_into(&self, w: &OkRing) -> Result<Vec<OKElem>> {
        self.coeffs.iter().map(|c| w.lift_exact(c)).collect()
    }
}

/// Working-precision plan: the spec's worst-case reserve of one digit per solved
/// degree is used verbatim at desk scale; for large degrees the dependency chains
/// are logarithmic, so a small reserve is tried first and the achieved-precision
/// and residual checks escalate if it was not enough.
fn reserve_plan(d: usize, q: u64) -> Vec<u32> {
    let d32 = d as u32;
    if d <= 128 {
        return vec![d32];
    }
    let mut log = 0u32;
    let mut acc = 1u64;
    while acc < d as u64 {
        acc = acc.saturating_mul(q.max(2));
        log += 1;
    }
    let r1 = (2 * log + 12).min(d32);
    let r2 = (4 * log + 40).min(d32);
    let mut plan = vec![r1];
    if r2 > r1 {
        plan.push(r2);
    }
    if d32 > r2 {
        plan.push(d32);
    }
    plan
}

/// Solve f_left o phi = phi o f_right with phi = beta x mod degree 2, to x-degree
/// `d`, coefficients delivered mod pi^`n_target`. The unique solution exists for
/// any beta when both sides satisfy the Lubin-Tate conditions for the same q.
pub fn lt_solve(
    f_left: &FrobeniusSeries,
    f_right: &FrobeniusSeries,
    beta: &OKElem,
    d: usize,
    n_target: u32,
) -> Result<Series<OkRing>> {
    let ring = f_left.ring().clone();
    if f_right.ring() != &ring {
        return Err(Error::RingMismatch("Frobenius series over different rings".into()));
    }
    if beta.ring() != &ring {
        return Err(Error::RingMismatch("linear part from a different ring".into()));
    }
    if d < 1 {
        return Err(Error::TruncationMismatch("degree must be >= 1".into()));
    }
    if n_target < 1 {
        return Err(Error::PrecisionExhausted("n_target must be >= 1".into()));
    }
    let mut last_err = None;
    for reserve in reserve_plan(d, ring.q()) {
        let nwork = n_target + reserve;
        match solve_uni_at(f_left, f_right, beta, d, n_target, nwork) {
            Ok(phi) => return Ok(phi),
            Err(e @ Error::PrecisionExhausted(_)) => last_err = Some(e),
            Err(other) => return Err(other),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::PrecisionExhausted("no working precision attempt succeeded".into())
    }))
}

fn solve_uni_at(
    f_left: &FrobeniusSeries,
    f_right: &FrobeniusSeries,
    beta: &OKElem,
    d: usize,
    n_target: u32,
    nwork: u32,
) -> Result<Series<OkRing>> {
    let ring = f_left.ring().clone();
    let w = ring.widened(nwork)?;
    let fl = f_left.lift_into(&w)?;
    let fr = f_right.lift_into(&w)?;
    let beta_w = w.lift_exact(beta)?;
    let deg_l = fl.len().min(d.max(1));
    let pi_l = fl[0].clone();
    let pi_r = fr[0].clone();

    // sparse support of f_right for the running-power update
    let fr_support: Vec<(usize, OKElem)> = fr
        .iter()
        .enumerate()
        .filter(|(_, c)| !w.is_zero_rep(c))
        .map(|(k, c)| (k + 1, c.clone()))
        .collect();

    // pow_phi[j-1] = phi^j, maintained for j = 1..=deg_l
    let zero_row = || vec![w.zero_at(0); d]; // placeholder; real rows built below
    let _ = zero_row;
    let mut pow_phi: Vec<Vec<OKElem>> = Vec::with_capacity(deg_l);
    for j in 1..=deg_l {
        let mut row = vec![w.zero(); d];
        if j <= d {
            row[j - 1] = w.pow_u64(&beta_w, j as u64)?;
        }
        pow_phi.push(row);
    }

    // g_pow = f_right^k; rser = sum_{r<k} phi_r f_right^r
    let mut g_pow: Vec<OKElem> = (1..=d)
        .map(|m| if m <= fr.len() { fr[m - 1].clone() } else { w.zero() })
        .collect();
    let mut rser: Vec<OKElem> = g_pow
        .iter()
        .map(|c| w.mul_sharp(c, &beta_w))
        .collect::<Result<Vec<_>>>()?;

    let mut pi_r_pow = w.mul(&pi_r, &pi_r)?; // pi_r^k, starting at k = 2

    for k in 2..=d {
        // advance g_pow to f_right^k
        let mut g_new = vec![w.zero(); d];
        for (dc, c) in &fr_support {
            for m in (dc + 1)..=d {
                let src = &g_pow[m - dc - 1];
                if w.is_zero_rep(src) && src.prec() >= nwork {
                    continue;
                }
                let t = w.mul_sharp(src, c)?;
                g_new[m - 1] = w.add(&g_new[m - 1], &t)?;
            }
        }
        g_pow = g_new;

        // solve phi_k (pi_l - pi_r^k) = rser[k] - lser[k]
        let mut lk = w.zero();
        for (j, c) in fl.iter().enumerate().take(deg_l) {
            if w.is_zero_rep(c) {
                continue;
            }
            let t = w.mul_sharp(c, &pow_phi[j][k - 1])?;
            lk = w.add(&lk, &t)?;
        }
        let diff = w.sub(&rser[k - 1], &lk)?;
        let denom = w.sub(&pi_l, &pi_r_pow)?;
        let denom_unit = w.pi_divide(&denom, 1)?;
        let denom_inv = w.unit_inverse(&denom_unit)?;
        let phi_k = match w.pi_divide(&diff, 1) {
            Ok(x) => w.mul(&x, &denom_inv)?,
            Err(Error::NotDivisible { .. }) => {
                return Err(Error::ResidualNonzero(format!(
                    "discrepancy at degree {} is a unit; inputs do not satisfy the \
                     Lubin-Tate conditions for a common q",
                    k
                )))
            }
            Err(e) => return Err(e),
        };

        // update phi powers: (phi + phi_k x^k)^j, high j first so lower powers stay old
        let max_i = d / k;
        if max_i >= 1 && deg_l >= 1 {
            let mut phik_pows: Vec<OKElem> = vec![phi_k.clone()];
            for _ in 2..=max_i.min(deg_l) {
                let next = w.mul_sharp(phik_pows.last().unwrap(), &phi_k)?;
                phik_pows.push(next);
            }
            for j in (2..=deg_l).rev() {
                for i in 1..=j.min(max_i) {
                    let shift = i * k;
                    let comb = binomial_bigint(j, i);
                    let scal = if comb.is_one() {
                        phik_pows[i - 1].clone()
                    } else {
                        w.mul_int_sharp(&phik_pows[i - 1], &comb)
                    };
                    if i == j {
                        // pure power lands at degree j*k
                        if shift <= d {
                            pow_phi[j - 1][shift - 1] =
                                w.add(&pow_phi[j - 1][shift - 1], &scal)?;
                        }
                        continue;
                    }
                    // source phi^(j-i) has order j-i
                    for m in (shift + (j - i))..=d {
                        let src = pow_phi[j - i - 1][m - shift - 1].clone();
                        if w.is_zero_rep(&src) && src.prec() >= nwork {
                            continue;
                        }
                        let t = w.mul_sharp(&scal, &src)?;
                        pow_phi[j - 1][m - 1] = w.add(&pow_phi[j - 1][m - 1], &t)?;
                    }
                }
            }
        }
        pow_phi[0][k - 1] = phi_k.clone();

        // rser += phi_k * f_right^k
        for m in k..=d {
            let src = &g_pow[m - 1];
            if w.is_zero_rep(src) && src.prec() >= nwork {
                continue;
            }
            let t = w.mul_sharp(&phi_k, src)?;
            rser[m - 1] = w.add(&rser[m - 1], &t)?;
        }

        if k < d {
            pi_r_pow = w.mul(&pi_r_pow, &pi_r)?;
        }
    }

    // achieved-precision and residual checks
    for (k, c) in pow_phi[0].iter().enumerate() {
        if c.prec() < n_target {
            return Err(Error::PrecisionExhausted(format!(
                "coefficient of x^{} achieved only {} of {} pi-adic digits",
                k + 1,
                c.prec(),
                n_target
            )));
        }
    }
    for k in 1..=d {
        let mut lk = w.zero();
        for (j, c) in fl.iter().enumerate().take(deg_l) {
            if w.is_zero_rep(c) {
                continue;
            }
            let t = w.mul_sharp(c, &pow_phi[j][k - 1])?;
            lk = w.add(&lk, &t)?;
        }
        let resid = w.sub(&lk, &rser[k - 1])?;
        if resid.prec() < n_target {
            return Err(Error::PrecisionExhausted(format!(
                "residual at degree {} known only mod pi^{}",
                k,
                resid.prec()
            )));
        }
        let ok = match w.valuation(&resid) {
            Valuation::InfiniteAtPrecision => true,
            Valuation::Finite(v) => v >= n_target,
        };
        if !ok {
            return Err(Error::ResidualNonzero(format!(
                "f_left o phi - phi o f_right has a nonzero coefficient at degree {}",
                k
            )));
        }
    }

    // deliver in the caller's ring at exactly n_target digits
    let out_ring = f_left.ring();
    let coeffs = pow_phi[0]
        .iter()
        .map(|c| {
            let back = out_ring.convert(&w.reduce_prec(c, n_target))?;
            Ok(back)
        })
        .collect::<Result<Vec<_>>>()?;
    Series::from_coeffs(out_ring, coeffs)
}

fn binomial_bigint(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Solve the two-variable problem f o F = F o (f, f) with F = a x + b y mod
/// total degree 2. With (a, b) = (1, 1) this is the formal group law.
pub fn lt_solve_law(
    f: &FrobeniusSeries,
    linear: (&OKElem, &OKElem),
    t: usize,
    n_target: u32,
) -> Result<BiSeries<OkRing>> {
    let ring = f.ring().clone();
    if t < 1 {
        return Err(Error::TruncationMismatch("total degree must be >= 1".into()));
    }
    let nwork = n_target + t as u32 + 2;
    let w = ring.widened(nwork)?;
    let fw = f.lift_into(&w)?;
    let pi = fw[0].clone();

    let mut law = BiSeries::zero(&w, t);
    law.set_coeff(1, 0, w.lift_exact(linear.0)?);
    law.set_coeff(0, 1, w.lift_exact(linear.1)?);

    let mut pi_pow = w.mul(&pi, &pi)?; // pi^r starting at r = 2
    for r in 2..=t {
        let delta = law_discrepancy(&w, &fw, &law)?;
        // correction h = delta_r / (pi^r - pi) on the homogeneous degree-r part
        let denom = w.sub(&pi_pow, &pi)?;
        let denom_unit = w.pi_divide(&denom, 1)?;
        let denom_inv = w.unit_inverse(&denom_unit)?;
        for j in 0..=r {
            let c = delta.coeff(r - j, j).clone();
            if w.is_zero_rep(&c) && c.prec() >= nwork {
                continue;
            }
            let h = match w.pi_divide(&c, 1) {
                Ok(x) => w.mul(&x, &denom_inv)?,
                Err(Error::NotDivisible { .. }) => {
                    return Err(Error::ResidualNonzero(format!(
                        "law discrepancy at degree {} is a unit",
                        r
                    )))
                }
                Err(e) => return Err(e),
            };
            let cur = law.coeff(r - j, j).clone();
            law.set_coeff(r - j, j, w.add(&cur, &h)?);
        }
        if r < t {
            pi_pow = w.mul(&pi_pow, &pi)?;
        }
    }

    // residual check at target precision
    let delta = law_discrepancy(&w, &fw, &law)?;
    for dd in 1..=t {
        for j in 0..=dd {
            let c = delta.coeff(dd - j, j);
            if c.prec() < n_target {
                return Err(Error::PrecisionExhausted(format!(
                    "law residual x^{} y^{} known only mod pi^{}",
                    dd - j,
                    j,
                    c.prec()
                )));
            }
            let ok = match w.valuation(c) {
                Valuation::InfiniteAtPrecision => true,
                Valuation::Finite(v) => v >= n_target,
            };
            if !ok {
                return Err(Error::ResidualNonzero(format!(
                    "f o F - F o (f, f) nonzero at x^{} y^{}",
                    dd - j,
                    j
                )));
            }
        }
    }

    let mut out = BiSeries::zero(&ring, t);
    for dd in 1..=t {
        for j in 0..=dd {
            let c = w.reduce_prec(law.coeff(dd - j, j), n_target);
            out.set_coeff(dd - j, j, ring.convert(&c)?);
        }
    }
    Ok(out)
}

/// f o F - F o (f, f), truncated at F's total degree.
fn law_discrepancy(
    w: &OkRing,
    f: &[OKElem],
    law: &BiSeries<OkRing>,
) -> Result<BiSeries<OkRing>> {
    let t = law.trunc();
    // f o F = sum_j f_j F^j
    let mut left = BiSeries::zero(w, t);
    let mut fpow = law.clone();
    for j in 1..=t.min(f.len()) {
        if !w.is_zero_rep(&f[j - 1]) {
            left = left.add(&fpow.scale(&f[j - 1]))?;
        }
        if j < t.min(f.len()) {
            fpow = fpow.mul(law)?;
        }
    }
    // F o (f, f): substitute univariate powers of f into each slot
    let fx: Series<OkRing> = {
        let mut s = Series::zero(w, t);
        for (k, c) in f.iter().enumerate().take(t) {
            s.set_coeff(k + 1, c.clone());
        }
        s
    };
    let mut fx_pows: Vec<Series<OkRing>> = vec![fx.clone()];
    for _ in 2..=t {
        fx_pows.push(fx_pows.last().unwrap().mul(&fx)?);
    }
    let mut right = BiSeries::zero(w, t);
    for dd in 1..=t {
        for j in 0..=dd {
            let i = dd - j;
            let c = law.coeff(i, j);
            if w.is_zero_rep(c) && c.prec() >= w.precision() {
                continue;
            }
            // c * f(x)^i * f(y)^j
            match (i, j) {
                (0, _) => {
                    for n in j..=t {
                        let t2 = w.mul(c, fx_pows[j - 1].coeff(n))?;
                        let cur = right.coeff(0, n).clone();
                        right.set_coeff(0, n, w.add(&cur, &t2)?);
                    }
                }
                (_, 0) => {
                    for m in i..=t {
                        let t2 = w.mul(c, fx_pows[i - 1].coeff(m))?;
                        let cur = right.coeff(m, 0).clone();
                        right.set_coeff(m, 0, w.add(&cur, &t2)?);
                    }
                }
                _ => {
                    for m in i..=t {
                        let am = fx_pows[i - 1].coeff(m);
                        if w.is_zero_rep(am) {
                            continue;
                        }
                        for n in j..=(t - m) {
                            let bn = fx_pows[j - 1].coeff(n);
                            if w.is_zero_rep(bn) {
                                continue;
                            }
                            let t2 = w.mul(c, &w.mul(am, bn)?)?;
                            let cur = right.coeff(m, n).clone();
                            right.set_coeff(m, n, w.add(&cur, &t2)?);
                        }
                    }
                }
            }
        }
    }
    left.sub(&right)
}

/// Which sign of the Lazard-congruence denominator matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LazardSign {
    /// 1 / (Pi - Pi^q), the printed convention.
    PaperPrinted,
    /// 1 / (Pi^q - Pi).
    Opposite,
}

#[derive(Debug, Clone)]
pub struct LazardReport {
    pub matches: bool,
    pub sign_convention: LazardSign,
}

/// A Lubin-Tate formal group law with its endomorphism table.
pub struct FormalGroupLaw {
    ring: OkRing,
    frob: FrobeniusSeries,
    law: BiSeries<OkRing>,
    n_target: u32,
    endo_cache: Mutex<BTreeMap<(String, usize), Series<OkRing>>>,
}

impl FormalGroupLaw {
    /// Build F = lt_solve_law(x + y) and verify every group-law axiom to the
    /// truncation before returning.
    pub fn build(frob: FrobeniusSeries, t: usize, n_target: u32) -> Result<Self> {
        let ring = frob.ring().clone();
        if t < 2 {
            return Err(Error::TruncationMismatch(
                "group law needs total degree >= 2".into(),
            ));
        }
        let one = ring.one();
        let law = lt_solve_law(&frob, (&one, &one), t, n_target)?;
        let g = FormalGroupLaw {
            ring,
            frob,
            law,
            n_target,
            endo_cache: Mutex::new(BTreeMap::new()),
        };
        g.verify_axioms()?;
        Ok(g)
    }

    pub fn ring(&self) -> &OkRing {
        &self.ring
    }
    pub fn frobenius(&self) -> &FrobeniusSeries {
        &self.frob
    }
    pub fn law(&self) -> &BiSeries<OkRing> {
        &self.law
    }
    pub fn trunc(&self) -> usize {
        self.law.trunc()
    }
    pub fn n_target(&self) -> u32 {
        self.n_target
    }

    pub fn verify_axioms(&self) -> Result<()> {
        let ring = &self.ring;
        let n = self.n_target;
        let t = self.law.trunc();
        // unit axioms: F(x, 0) = x and F(0, y) = y
        let x = Series::x(ring, t);
        if !self.law.restrict_x().eq_mod(&x, n)? || !self.law.restrict_y().eq_mod(&x, n)? {
            return Err(Error::ResidualNonzero("unit axiom fails".into()));
        }
        // commutativity
        for dd in 1..=t {
            for j in 0..=dd {
                if !ring.eq_mod(self.law.coeff(dd - j, j), self.law.coeff(j, dd - j), n)? {
                    return Err(Error::ResidualNonzero("commutativity fails".into()));
                }
            }
        }
        // associativity to the truncation
        if !self.associativity_holds()? {
            return Err(Error::ResidualNonzero("associativity fails".into()));
        }
        Ok(())
    }

    fn associativity_holds(&self) -> Result<bool> {
        let t = self.law.trunc();
        let ring = &self.ring;
        let ax = TriPoly::var(ring, t, 0);
        let ay = TriPoly::var(ring, t, 1);
        let az = TriPoly::var(ring, t, 2);
        let fxy = tri_substitute(&self.law, &ax, &ay)?;
        let fyz = tri_substitute(&self.law, &ay, &az)?;
        let lhs = tri_substitute(&self.law, &fxy, &az)?;
        let rhs = tri_substitute(&self.law, &ax, &fyz)?;
        lhs.eq_mod(&rhs, self.n_target)
    }

    /// F(a(x), b(x)) for univariate arguments.
    pub fn add_series(
        &self,
        a: &Series<OkRing>,
        b: &Series<OkRing>,
    ) -> Result<Series<OkRing>> {
        self.law.substitute(a, b)
    }

    /// The unique endomorphism with linear part alpha, to x-degree `deg`.
    /// Results are cached per (alpha, deg) at the group's target precision.
    pub fn endo(&self, alpha: &OKElem, deg: usize) -> Result<Series<OkRing>> {
        let key = (encode_elem(alpha), deg);
        {
            let cache = self.endo_cache.lock().unwrap();
            if let Some(s) = cache.get(&key) {
                return Ok(s.clone());
            }
        }
        let s = lt_solve(&self.frob, &self.frob, alpha, deg, self.n_target)?;
        let mut cache = self.endo_cache.lock().unwrap();
        Ok(cache.entry(key).or_insert(s).clone())
    }

    /// Cached endomorphisms in deterministic key order.
    pub fn cached_endos(&self) -> Vec<(String, usize, Series<OkRing>)> {
        let cache = self.endo_cache.lock().unwrap();
        cache
            .iter()
            .map(|((k, d), s)| (k.clone(), *d, s.clone()))
            .collect()
    }

    /// Test F against x + y + ((x+y)^q - x^q - y^q) / denom mod degree q + 2,
    /// for denom = (Pi - Pi^q) and (Pi^q - Pi); report which sign matches.
    pub fn lazard_check(&self) -> Result<LazardReport> {
        let ring = &self.ring;
        let q = ring.q() as usize;
        let t = self.law.trunc();
        if t < q + 1 {
            return Err(Error::DegenerateWindow { deg: t, need: q + 1 });
        }
        let n = self.n_target;
        let pi = self.frob.uniformizer();
        let pi_q = ring.pow_u64(pi, q as u64)?;
        // (Pi^q - Pi) / pi, a unit
        let diff = ring.sub(&pi_q, pi)?;
        let unit = ring.pi_divide(&diff, 1)?;
        let inv_opposite = ring.unit_inverse(&unit)?;
        let inv_printed = ring.neg(&inv_opposite);

        // Degrees <= q are compared at the carried precision. The degree-(q+1)
        // band is compared mod M_K only: that is the strength the congruence
        // retains after reduction, and for q = 2 with e > 1 the exact band is
        // a valuation-1 term rather than 0.
        let check = |inv: &OKElem| -> Result<bool> {
            for dd in 2..=(q + 1).min(t) {
                let depth = if dd <= q { n } else { 1 };
                for j in 0..=dd {
                    let i = dd - j;
                    let expected = if dd == q && i >= 1 && j >= 1 {
                        // binomial(q, i) / denom = (binomial(q,i)/pi) * inv
                        let c = ring.int(i64::try_from(binomial_u128(q, i)).map_err(|_| {
                            Error::HypothesisViolated("q too large for the Lazard window".into())
                        })?);
                        let c_div = ring.pi_divide(&c, 1)?;
                        ring.mul(&c_div, inv)?
                    } else {
                        ring.zero()
                    };
                    if !ring.eq_mod(self.law.coeff(i, j), &expected, depth)? {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        };

        let printed = check(&inv_printed)?;
        let opposite = check(&inv_opposite)?;
        match (printed, opposite) {
            (true, false) => Ok(LazardReport { matches: true, sign_convention: LazardSign::PaperPrinted }),
            (false, true) => Ok(LazardReport { matches: true, sign_convention: LazardSign::Opposite }),
            (true, true) => Ok(LazardReport { matches: true, sign_convention: LazardSign::Opposite }),
            (false, false) => Err(Error::ResidualNonzero(
                "lazard congruence matches neither sign convention".into(),
            )),
        }
    }

    /// Reduce the law and all cached endomorphisms mod M_K. For every cached
    /// noninvertible endomorphism with v(alpha) = t, the reduction is checked to
    /// be of the shape lambda(x^(q^t)) with lambda invertible.
    pub fn reduce(&self) -> Result<GroupReduction> {
        let law = self.law.reduce()?;
        let fq = self.ring.residue_field();
        let mut endos = Vec::new();
        for (key, deg, s) in self.cached_endos() {
            let red = s.reduce()?;
            let alpha = s.d0();
            if let Valuation::Finite(tv) = self.ring.valuation(alpha) {
                if tv >= 1 {
                    let qt = (self.ring.q() as u128).pow(tv);
                    if let Ok(qt_usize) = usize::try_from(qt) {
                        check_frobenius_factor_shape(&red, qt_usize)?;
                    }
                }
            }
            let _ = &fq;
            endos.push((key, deg, red));
        }
        Ok(GroupReduction { law, endos })
    }
}

/// Reduction of a group law mod M_K together with reduced endomorphisms.
pub struct GroupReduction {
    pub law: BiSeries<crate::ring::Fq>,
    pub endos: Vec<(String, usize, Series<crate::ring::Fq>)>,
}

/// Assert red has support only at multiples of q^t and an invertible cofactor:
/// red(x) = lambda(x^(q^t)) with lambda'(0) != 0. Returns lambda.
pub fn check_frobenius_factor_shape(
    red: &Series<crate::ring::Fq>,
    qt: usize,
) -> Result<Series<crate::ring::Fq>> {
    let fq = red.ring().clone();
    for k in 1..=red.trunc() {
        if k % qt != 0 && !fq.is_zero(&red.coeff(k).clone()) {
            return Err(Error::ReductionMismatch(format!(
                "reduction has a term at degree {} not divisible by q^t = {}",
                k, qt
            )));
        }
    }
    let m = red.trunc() / qt;
    if m < 1 {
        return Err(Error::DegenerateWindow { deg: red.trunc(), need: qt });
    }
    let mut lambda = Series::zero(&fq, m);
    for i in 1..=m {
        lambda.set_coeff(i, red.coeff(i * qt).clone());
    }
    if fq.is_zero(lambda.d0()) {
        return Err(Error::ReductionMismatch(
            "cofactor lambda has zero linear coefficient".into(),
        ));
    }
    Ok(lambda)
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub(crate) fn encode_elem(a: &OKElem) -> String {
    let mut s = format!("p{}", a.prec());
    for row in a.coords() {
        s.push('|');
        for c in row {
            s.push_str(&c.to_string());
            s.push(',');
        }
    }
    s
}

// ---------------- minimal trivariate polynomials for the associativity check ----------------

struct TriPoly {
    ring: OkRing,
    t: usize,
    /// index (i, j, k) with i + j + k <= t at i*(t+1)^2 + j*(t+1) + k
    c: Vec<OKElem>,
}

impl TriPoly {
    fn zero(ring: &OkRing, t: usize) -> Self {
        TriPoly {
            ring: ring.clone(),
            t,
            c: vec![ring.zero(); (t + 1) * (t + 1) * (t + 1)],
        }
    }

    fn var(ring: &OkRing, t: usize, which: usize) -> Self {
        let mut p = Self::zero(ring, t);
        let idx = match which {
            0 => (t + 1) * (t + 1),
            1 => t + 1,
            _ => 1,
        };
        p.c[idx] = ring.one();
        p
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.t + 1) + j) * (self.t + 1) + k
    }

    fn add_assign(&mut self, other: &TriPoly) -> Result<()> {
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a = self.ring.add(a, b)?;
        }
        Ok(())
    }

    fn scale(&self, s: &OKElem) -> Result<TriPoly> {
        let mut out = TriPoly::zero(&self.ring, self.t);
        for (idx, a) in self.c.iter().enumerate() {
            if !self.ring.is_zero_rep(a) {
                out.c[idx] = self.ring.mul(a, s)?;
            }
        }
        Ok(out)
    }

    fn mul(&self, other: &TriPoly) -> Result<TriPoly> {
        let t = self.t;
        let mut out = TriPoly::zero(&self.ring, t);
        for i1 in 0..=t {
            for j1 in 0..=(t - i1) {
                for k1 in 0..=(t - i1 - j1) {
                    let a = &self.c[self.idx(i1, j1, k1)];
                    if self.ring.is_zero_rep(a) {
                        continue;
                    }
                    for i2 in 0..=(t - i1 - j1 - k1) {
                        for j2 in 0..=(t - i1 - j1 - k1 - i2) {
                            for k2 in 0..=(t - i1 - j1 - k1 - i2 - j2) {
                                let b = &other.c[other.idx(i2, j2, k2)];
                                if self.ring.is_zero_rep(b) {
                                    continue;
                                }
                                let prod = self.ring.mul(a, b)?;
                                let at = out.idx(i1 + i2, j1 + j2, k1 + k2);
                                out.c[at] = self.ring.add(&out.c[at], &prod)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn eq_mod(&self, other: &TriPoly, n: u32) -> Result<bool> {
        for (a, b) in self.c.iter().zip(&other.c) {
            if !self.ring.eq_mod(a, b, n)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// F(A, B) for trivariate arguments A, B of order >= 1.
fn tri_substitute(law: &BiSeries<OkRing>, a: &TriPoly, b: &TriPoly) -> Result<TriPoly> {
    let ring = law.ring().clone();
    let t = a.t;
    let mut apow: Vec<TriPoly> = Vec::new();
    let mut bpow: Vec<TriPoly> = Vec::new();
    let mut acc = TriPoly::zero(&ring, t);
    for dd in 1..=law.trunc().min(t) {
        for j in 0..=dd {
            let i = dd - j;
            let c = law.coeff(i, j);
            if ring.is_zero_rep(c) {
                continue;
            }
            while apow.len() < i.max(1) {
                let next = if apow.is_empty() {
                    TriPoly { ring: ring.clone(), t, c: a.c.clone() }
                } else {
                    apow.last().unwrap().mul(a)?
                };
                apow.push(next);
            }
            while bpow.len() < j.max(1) {
                let next = if bpow.is_empty() {
                    TriPoly { ring: ring.clone(), t, c: b.c.clone() }
                } else {
                    bpow.last().unwrap().mul(b)?
                };
                bpow.push(next);
            }
            let term = match (i, j) {
                (0, _) => bpow[j - 1].scale(c)?,
                (_, 0) => apow[i - 1].scale(c)?,
                _ => apow[i - 1].mul(&bpow[j - 1])?.scale(c)?,
            };
            acc.add_assign(&term)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingSpec;

    fn z2(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(2, 1, 1, n).unwrap()).unwrap()
    }
    fn z3(n: u32) -> OkRing {
        OkRing::new(RingSpec::standard(3, 1, 1, n).unwrap()).unwrap()
    }

    /// (1 + x)^n - 1 truncated; the multiplicative-group oracle.
    fn mult_endo_oracle(ring: &OkRing, n: u64, d: usize) -> Series<OkRing> {
        let mut s = Series::zero(ring, d);
        let mut c = BigInt::one();
        for k in 1..=d {
            // binomial(n, k) incrementally
            c = c * BigInt::from(n.saturating_sub(k as u64 - 1)) / BigInt::from(k);
            if (k as u64) <= n {
                s.set_coeff(k, ring.from_bigint(&c));
            }
        }
        s
    }

    #[test]
    fn group_law_multiplicative() {
        let ring = z2(8);
        let f = FrobeniusSeries::canonical(&ring); // 2x + x^2
        let g = FormalGroupLaw::build(f, 5, 6).unwrap();
        // F = x + y + xy exactly
        let mut expect = BiSeries::zero(&ring, 5);
        expect.set_coeff(1, 0, ring.one());
        expect.set_coeff(0, 1, ring.one());
        expect.set_coeff(1, 1, ring.one());
        assert!(g.law().eq_mod(&expect, 6).unwrap());
    }

    #[test]
    fn solve_identity_is_unique() {
        let ring = z3(6);
        let f = FrobeniusSeries::canonical(&ring);
        let phi = lt_solve(&f, &f, &ring.one(), 8, 4).unwrap();
        assert!(phi.eq_mod(&Series::x(&ring, 8), 4).unwrap());
    }

    #[test]
    fn minus_one_commutes_with_odd_frobenius() {
        let ring = z3(6);
        let f = FrobeniusSeries::canonical(&ring); // 3x + x^3
        let phi = lt_solve(&f, &f, &ring.int(-1), 9, 4).unwrap();
        let expect = Series::x(&ring, 9).neg();
        assert!(phi.eq_mod(&expect, 4).unwrap());
    }

    #[test]
    fn endo_three_on_multiplicative_group() {
        let ring = z2(10);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 8).unwrap();
        let e3 = g.endo(&ring.int(3), 8).unwrap();
        let oracle = mult_endo_oracle(&ring, 3, 8); // 3x + 3x^2 + x^3
        assert!(e3.eq_mod(&oracle, 8).unwrap());
        let e1 = g.endo(&ring.one(), 8).unwrap();
        assert!(e1.eq_mod(&Series::x(&ring, 8), 8).unwrap());
        let e2 = g.endo(&ring.int(2), 8).unwrap();
        assert!(e2.eq_mod(&g.frobenius().as_series(8), 8).unwrap());
    }

    #[test]
    fn endo_five_matches_binomial() {
        let ring = z2(10);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 8).unwrap();
        let e5 = g.endo(&ring.int(5), 12).unwrap();
        let oracle = mult_endo_oracle(&ring, 5, 12);
        assert!(e5.eq_mod(&oracle, 8).unwrap());
    }

    #[test]
    fn homomorphism_and_addition_laws() {
        let ring = z3(8);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 6, 6).unwrap();
        let a = ring.int(2);
        let b = ring.int(4);
        let ea = g.endo(&a, 6).unwrap();
        let eb = g.endo(&b, 6).unwrap();
        let eab = g.endo(&ring.mul(&a, &b).unwrap(), 6).unwrap();
        let comp = ea.compose(&eb).unwrap();
        assert!(comp.eq_mod(&eab, 5).unwrap());
        let comp2 = eb.compose(&ea).unwrap();
        assert!(comp2.eq_mod(&eab, 5).unwrap());
        // F([a](x), [b](x)) = [a + b](x)
        let sum = g.add_series(&ea, &eb).unwrap();
        let eapb = g.endo(&ring.add(&a, &b).unwrap(), 6).unwrap();
        assert!(sum.eq_mod(&eapb, 5).unwrap());
    }

    #[test]
    fn d0_is_exact() {
        let ring = z3(8);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 6).unwrap();
        for a in [2i64, 4, 7, -1] {
            let e = g.endo(&ring.int(a), 5).unwrap();
            assert!(ring.eq_mod(e.d0(), &ring.int(a), 6).unwrap());
        }
    }

    #[test]
    fn lazard_sign_for_multiplicative() {
        let ring = z2(8);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 6).unwrap();
        let rep = g.lazard_check().unwrap();
        assert!(rep.matches);
        assert_eq!(rep.sign_convention, LazardSign::Opposite);
    }

    #[test]
    fn lazard_q3() {
        let ring = z3(8);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 6, 6).unwrap();
        let rep = g.lazard_check().unwrap();
        assert!(rep.matches);
        assert_eq!(rep.sign_convention, LazardSign::Opposite);
    }

    #[test]
    fn reduction_shapes() {
        let ring = z2(8);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 6).unwrap();
        let _ = g.endo(&ring.int(2), 6).unwrap();
        let _ = g.endo(&ring.int(5), 6).unwrap();
        let red = g.reduce().unwrap();
        let fq = ring.residue_field();
        // law reduces to x + y + xy
        assert_eq!(*red.law.coeff(1, 1), fq.one());
        // [2] reduces to x^2; [5] to x + x^4 + x^5
        for (_, _, e) in &red.endos {
            let d0_zero = fq.is_zero(&e.coeff(1).clone());
            if d0_zero {
                assert_eq!(*e.coeff(2), fq.one());
            } else {
                assert_eq!(*e.coeff(4), fq.one());
                assert_eq!(*e.coeff(5), fq.one());
            }
        }
    }

    #[test]
    fn wideg_of_reduced_endos() {
        // wideg(reduction of [pi^m unit]) = q^m
        let ring = z3(9);
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 6).unwrap();
        for (alpha, expect) in [(3i64, 3usize), (6, 3), (9, 9), (2, 1)] {
            let e = g.endo(&ring.int(alpha), 12).unwrap();
            let red = e.reduce().unwrap();
            assert_eq!(red.wideg().unwrap(), expect, "alpha = {}", alpha);
        }
    }

    #[test]
    fn rejects_bad_frobenius() {
        let ring = z2(6);
        // linear coefficient 4 is not a uniformizer
        let coeffs = vec![ring.int(4), ring.one()];
        assert!(FrobeniusSeries::new(&ring, coeffs).is_err());
        // unit coefficient off the x^q slot
        let coeffs = vec![ring.int(2), ring.one(), ring.one()];
        assert!(FrobeniusSeries::new(&ring, coeffs).is_err());
        // x^q coefficient reducing to 0
        let coeffs = vec![ring.int(2), ring.int(2)];
        assert!(FrobeniusSeries::new(&ring, coeffs).is_err());
        // 2x + 3x^2 is a legitimate Frobenius series (3 reduces to 1)
        let coeffs = vec![ring.int(2), ring.int(3)];
        assert!(FrobeniusSeries::new(&ring, coeffs).is_ok());
    }

    #[test]
    fn ramified_group_builds() {
        // pi^2 = 2 over Z_2: f = pi x + x^2
        let spec = RingSpec::standard(2, 1, 2, 12).unwrap();
        let ring = OkRing::new(spec).unwrap();
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 5, 8).unwrap();
        let rep = g.lazard_check().unwrap();
        assert!(rep.matches);
    }

    #[test]
    fn unramified_quartic_group_builds() {
        let spec = RingSpec::standard(2, 2, 1, 12).unwrap();
        let ring = OkRing::new(spec).unwrap();
        // f = 2x + x^4
        let g = FormalGroupLaw::build(FrobeniusSeries::canonical(&ring), 7, 8).unwrap();
        assert!(g.lazard_check().unwrap().matches);
    }
}
