//! Wild automorphisms of F_q((x)) as power series x + x^2 F_q[[x]], their
//! ramification numbers, and brute-force filtration data for finitely
//! generated abelian subgroups (within the quotient G/G^(p^n)).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ring::Fq;
use crate::series::Series;

/// A wildly ramified automorphism: sigma(x) = x + higher terms.
#[derive(Clone, Debug, PartialEq)]
pub struct NottElem {
    series: Series<Fq>,
}

impl NottElem {
    pub fn new(series: Series<Fq>) -> Result<Self> {
        let fq = series.ring().clone();
        if *series.d0() != fq.one() {
            return Err(Error::NotNottingham(
                "linear coefficient must be 1".into(),
            ));
        }
        Ok(NottElem { series })
    }

    pub fn identity(fq: &Fq, trunc: usize) -> Self {
        NottElem { series: Series::x(fq, trunc) }
    }

    pub fn series(&self) -> &Series<Fq> {
        &self.series
    }

    pub fn trunc(&self) -> usize {
        self.series.trunc()
    }

    pub fn compose(&self, other: &NottElem) -> Result<NottElem> {
        Ok(NottElem { series: self.series.compose(&other.series)? })
    }

    pub fn pow(&self, n: u64) -> Result<NottElem> {
        Ok(NottElem { series: self.series.iterate(n)? })
    }
}

/// One entry of a ramification profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RamEntry {
    Finite(u64),
    /// sigma^(p^n) is indistinguishable from x at the working truncation.
    IdentityAtPrecision,
}

impl RamEntry {
    pub fn finite(&self) -> Option<u64> {
        match self {
            RamEntry::Finite(v) => Some(*v),
            RamEntry::IdentityAtPrecision => None,
        }
    }
}

/// The sequence i_n(sigma) = i(sigma^(p^n)) for n = 0..=n_max.
#[derive(Clone, Debug)]
pub struct RamProfile {
    pub p: u64,
    pub trunc: usize,
    pub values: Vec<RamEntry>,
}

impl RamProfile {
    pub fn finite_prefix(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for v in &self.values {
            match v {
                RamEntry::Finite(i) => out.push(*i),
                RamEntry::IdentityAtPrecision => break,
            }
        }
        out
    }

    pub fn check_strictly_increasing(&self) -> Result<()> {
        validate_strictly_increasing(self)
    }
}

/// i(sigma) = ord_x(sigma(x) - x) - 1.
pub fn ram_number(sigma: &NottElem) -> RamEntry {
    let fq = sigma.series.ring().clone();
    let x = Series::x(&fq, sigma.trunc());
    let diff = sigma.series.sub(&x).expect("same field");
    match diff.order() {
        Some(ord) => RamEntry::Finite(ord as u64 - 1),
        None => RamEntry::IdentityAtPrecision,
    }
}

/// Profile by repeated p-th power composition. Entries the truncation cannot
/// resolve are reported as IdentityAtPrecision, never guessed.
pub fn ram_sequence(sigma: &NottElem, n_max: u32) -> Result<RamProfile> {
    let p = sigma.series.ring().p();
    let mut values = Vec::with_capacity(n_max as usize + 1);
    let mut cur = sigma.clone();
    let mut dead = false;
    for _ in 0..=n_max {
        if dead {
            values.push(RamEntry::IdentityAtPrecision);
            continue;
        }
        let entry = ram_number(&cur);
        values.push(entry);
        if entry == RamEntry::IdentityAtPrecision {
            dead = true;
            continue;
        }
        cur = cur.pow(p)?;
    }
    let profile = RamProfile { p, trunc: sigma.trunc(), values };
    validate_strictly_increasing(&profile)?;
    Ok(profile)
}

fn validate_strictly_increasing(profile: &RamProfile) -> Result<()> {
    let fin = profile.finite_prefix();
    for w in fin.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::NotNottingham(format!(
                "ramification numbers not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Break/index data of the filtration of the quotient spanned by products
/// of the generators with exponents below p^n.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteFiltration {
    pub level: u32,
    pub generators: Vec<Series<Fq>>,
    /// Number of distinct enumerated elements (the quotient order).
    pub order: u64,
    /// Lower-numbering breaks, strictly increasing.
    pub breaks: Vec<u64>,
    /// indices[j] = (G : G[t]) for t in (breaks[j-1], breaks[j]] (with breaks[-1] = 0);
    /// the final entry is the index above the last break. Length = breaks.len() + 1.
    pub indices: Vec<u64>,
}

impl FiniteFiltration {
    /// Filtration with no breaks: index identically 1.
    pub fn trivial(level: u32) -> Self {
        FiniteFiltration {
            level,
            generators: Vec::new(),
            order: 1,
            breaks: Vec::new(),
            indices: vec![1],
        }
    }

    /// Directly from break/index data (used for synthetic filtrations).
    pub fn from_data(level: u32, breaks: Vec<u64>, indices: Vec<u64>) -> Result<Self> {
        if indices.len() != breaks.len() + 1 {
            return Err(Error::Schema {
                path: "indices".into(),
                msg: format!(
                    "need {} index values for {} breaks",
                    breaks.len() + 1,
                    breaks.len()
                ),
            });
        }
        for w in breaks.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Schema {
                    path: "breaks".into(),
                    msg: "breaks must be strictly increasing".into(),
                });
            }
        }
        for w in indices.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Schema {
                    path: "indices".into(),
                    msg: "indices must be nondecreasing".into(),
                });
            }
        }
        if indices.first() != Some(&1) && !breaks.is_empty() {
            return Err(Error::Schema {
                path: "indices".into(),
                msg: "index below the first break must be 1".into(),
            });
        }
        let order = *indices.last().unwrap();
        Ok(FiniteFiltration { level, generators: Vec::new(), order, breaks, indices })
    }

    /// (G : G[t]) at a given integer t >= 0.
    pub fn index_at(&self, t: u64) -> u64 {
        if t == 0 {
            return 1;
        }
        for (j, &b) in self.breaks.iter().enumerate() {
            if t <= b {
                return self.indices[j];
            }
        }
        *self.indices.last().unwrap_or(&1)
    }
}

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000;

/// Enumerate all products of the generators with exponents in [0, p^n), compute
/// every ramification number, and assemble the quotient filtration.
pub fn finite_quotient_filtration(
    gens: &[NottElem],
    n: u32,
    budget: u64,
) -> Result<FiniteFiltration> {
    if gens.is_empty() {
        return Ok(FiniteFiltration::trivial(n));
    }
    let fq = gens[0].series.ring().clone();
    let p = fq.p();
    let trunc = gens[0].trunc();
    for g in gens {
        if g.series.ring() != &fq || g.trunc() != trunc {
            return Err(Error::RingMismatch(
                "generators must share a field and truncation".into(),
            ));
        }
    }
    // commutativity is validated, not assumed
    for i in 0..gens.len() {
        for j in (i + 1)..gens.len() {
            if gens[i].compose(&gens[j])? != gens[j].compose(&gens[i])? {
                return Err(Error::NoncommutingGenerators);
            }
        }
    }
    let pn = (p as u128).checked_pow(n).ok_or(Error::BudgetExceeded {
        needed: u128::MAX,
        budget,
    })?;
    let total = pn.checked_pow(gens.len() as u32).ok_or(Error::BudgetExceeded {
        needed: u128::MAX,
        budget,
    })?;
    if total > budget as u128 {
        return Err(Error::BudgetExceeded { needed: total, budget });
    }

    // powers of each generator up to p^n - 1
    let mut powers: Vec<Vec<NottElem>> = Vec::with_capacity(gens.len());
    for g in gens {
        let mut row = Vec::with_capacity(pn as usize);
        row.push(NottElem::identity(&fq, trunc));
        for k in 1..pn {
            let prev = &row[(k - 1) as usize];
            row.push(prev.compose(g)?);
        }
        powers.push(row);
    }

    // lexicographic enumeration over exponent vectors, deduplicating products
    let mut seen: HashMap<Vec<Vec<u64>>, ()> = HashMap::new();
    let mut ram_values: Vec<Option<u64>> = Vec::new();
    let mut exps = vec![0u128; gens.len()];
    loop {
        let mut prod = powers[0][exps[0] as usize].clone();
        for (j, &a) in exps.iter().enumerate().skip(1) {
            prod = prod.compose(&powers[j][a as usize])?;
        }
        let key: Vec<Vec<u64>> = prod
            .series
            .coeffs()
            .iter()
            .map(|c| fq.coords(c).to_vec())
            .collect();
        if seen.insert(key, ()).is_none() {
            ram_values.push(ram_number(&prod).finite());
        }
        // advance the exponent vector
        let mut pos = gens.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            exps[pos] += 1;
            if exps[pos] < pn {
                break;
            }
            exps[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }

    let order = ram_values.len() as u64;
    let mut breaks: Vec<u64> = ram_values.iter().filter_map(|v| *v).collect();
    breaks.sort_unstable();
    breaks.dedup();

    let mut indices = Vec::with_capacity(breaks.len() + 1);
    for &b in &breaks {
        let members = ram_values
            .iter()
            .filter(|v| match v {
                Some(i) => *i >= b,
                None => true,
            })
            .count() as u64;
        if order % members != 0 {
            return Err(Error::HypothesisViolated(format!(
                "filtration index at break {} is not integral ({} of {} elements); \
                 the enumerated set is not a group",
                b, members, order
            )));
        }
        indices.push(order / members);
    }
    let inf_members = ram_values.iter().filter(|v| v.is_none()).count() as u64;
    if order % inf_members != 0 {
        return Err(Error::HypothesisViolated(
            "trivial-tail index is not integral".into(),
        ));
    }
    indices.push(order / inf_members);

    Ok(FiniteFiltration {
        level: n,
        generators: gens.iter().map(|g| g.series.clone()).collect(),
        order,
        breaks,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Series;

    fn f2() -> Fq {
        Fq::new(2, 1).unwrap()
    }

    fn nott(fq: &Fq, coeffs: &[i64]) -> NottElem {
        NottElem::new(
            Series::from_coeffs(fq, coeffs.iter().map(|&c| fq.int(c)).collect()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ram_number_basics() {
        let f3 = Fq::new(3, 1).unwrap();
        let s = nott(&f3, &[1, 0, 1]); // x + x^3
        assert_eq!(ram_number(&s), RamEntry::Finite(2));
        let id = NottElem::identity(&f3, 5);
        assert_eq!(ram_number(&id), RamEntry::IdentityAtPrecision);
        let fq = f2();
        let t = nott(&fq, &[1, 1, 1]); // x + x^2 + x^3
        assert_eq!(ram_number(&t), RamEntry::Finite(1));
    }

    #[test]
    fn ram_sequence_x_plus_x2() {
        let fq = f2();
        let mut coeffs = vec![0i64; 20];
        coeffs[0] = 1;
        coeffs[1] = 1;
        let s = nott(&fq, &coeffs);
        let prof = ram_sequence(&s, 2).unwrap();
        assert_eq!(prof.finite_prefix(), vec![1, 3, 15]);
    }

    #[test]
    fn ram_sequence_binomial_five() {
        // sigma = reduction of (1+x)^5 - 1 = x + x^4 + x^5 over F_2
        let fq = f2();
        let mut coeffs = vec![0i64; 40];
        coeffs[0] = 1;
        coeffs[3] = 1;
        coeffs[4] = 1;
        let s = nott(&fq, &coeffs);
        let prof = ram_sequence(&s, 2).unwrap();
        assert_eq!(prof.finite_prefix(), vec![3, 7, 15]);
    }

    #[test]
    fn ram_sequence_identity() {
        let fq = f2();
        let s = NottElem::identity(&fq, 8);
        let prof = ram_sequence(&s, 3).unwrap();
        assert!(prof.values.iter().all(|v| *v == RamEntry::IdentityAtPrecision));
    }

    #[test]
    fn filtration_single_generator() {
        // gens = [x + x^4 + x^5], n = 1: breaks {3}, index jumps 1 -> 2
        let fq = f2();
        let mut coeffs = vec![0i64; 10];
        coeffs[0] = 1;
        coeffs[3] = 1;
        coeffs[4] = 1;
        let s = nott(&fq, &coeffs);
        let filt = finite_quotient_filtration(&[s], 1, 100).unwrap();
        assert_eq!(filt.order, 2);
        assert_eq!(filt.breaks, vec![3]);
        assert_eq!(filt.indices, vec![1, 2]);
        assert_eq!(filt.index_at(3), 1);
        assert_eq!(filt.index_at(4), 2);
    }

    #[test]
    fn filtration_empty() {
        let filt = finite_quotient_filtration(&[], 2, 100).unwrap();
        assert_eq!(filt.order, 1);
        assert!(filt.breaks.is_empty());
        assert_eq!(filt.indices, vec![1]);
        assert_eq!(filt.index_at(100), 1);
    }

    #[test]
    fn filtration_cyclic_breaks_match_profile() {
        // breaks of <sigma> are exactly {i_n(sigma)}
        let fq = f2();
        let mut coeffs = vec![0i64; 40];
        coeffs[0] = 1;
        coeffs[3] = 1;
        coeffs[4] = 1;
        let s = nott(&fq, &coeffs);
        let prof = ram_sequence(&s, 1).unwrap();
        let filt = finite_quotient_filtration(&[s], 2, 100).unwrap();
        assert_eq!(filt.breaks, prof.finite_prefix());
        assert_eq!(filt.indices, vec![1, 2, 4]);
    }

    #[test]
    fn budget_enforced() {
        let fq = f2();
        let mut coeffs = vec![0i64; 10];
        coeffs[0] = 1;
        coeffs[1] = 1;
        let s = nott(&fq, &coeffs);
        assert!(matches!(
            finite_quotient_filtration(&[s], 10, 100),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn noncommuting_rejected() {
        let fq = f2();
        let a = nott(&fq, &[1, 1, 0, 0, 0, 0, 0, 0]);
        let b = nott(&fq, &[1, 0, 1, 0, 0, 0, 0, 0]);
        // x+x^2 and x+x^3 do not commute over F_2
        assert!(matches!(
            finite_quotient_filtration(&[a, b], 1, 100),
            Err(Error::NoncommutingGenerators)
        ));
    }

    #[test]
    fn min_rule_for_products() {
        // i(st) >= min(i(s), i(t)), equality when different
        let fq = f2();
        let s = nott(&fq, &[1, 1, 0, 0, 0, 0, 0, 0]);
        let t = nott(&fq, &[1, 0, 0, 1, 0, 0, 0, 0]);
        let st = s.compose(&t).unwrap();
        let is_ = ram_number(&s).finite().unwrap();
        let it = ram_number(&t).finite().unwrap();
        let ist = ram_number(&st).finite().unwrap();
        assert!(ist >= is_.min(it));
        if is_ != it {
            assert_eq!(ist, is_.min(it));
        }
    }
}
