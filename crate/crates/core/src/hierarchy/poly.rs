//! Differential polynomials in `u`: finite sums of `c·∏ ∂_z^{k_i} u` with
//! exact coefficients, and 2×2 matrices of them.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::Signed;

use super::rational::GaussianRational;

/// `coeff · ∏ ∂_z^{k} u` over the ascending multiset `factors`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffMonomial {
    pub coeff: GaussianRational,
    pub factors: Vec<u32>,
}

impl DiffMonomial {
    pub fn weight(&self) -> u32 {
        self.factors.iter().sum()
    }
}

/// Canonical form: like terms merged, zero coefficients dropped, so derived
/// equality is exact equality of polynomials.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiffPoly {
    terms: BTreeMap<Vec<u32>, GaussianRational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: GaussianRational) -> Self {
        Self::monomial(c, Vec::new())
    }

    /// `c · ∏ ∂_z^{k} u`; the factor list need not be sorted.
    pub fn monomial(c: GaussianRational, mut factors: Vec<u32>) -> Self {
        assert!(factors.iter().all(|&k| k >= 1), "derivative orders start at 1");
        factors.sort_unstable();
        let mut p = Self::zero();
        p.add_term(factors, &c);
        p
    }

    /// `∂_z^k u`.
    pub fn dz_u(k: u32) -> Self {
        Self::monomial(GaussianRational::one(), vec![k])
    }

    fn add_term(&mut self, factors: Vec<u32>, c: &GaussianRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(factors) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c.clone());
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = DiffMonomial> + '_ {
        self.terms.iter().map(|(f, c)| DiffMonomial {
            coeff: c.clone(),
            factors: f.clone(),
        })
    }

    pub fn coeff(&self, factors: &[u32]) -> Option<&GaussianRational> {
        self.terms.get(factors)
    }

    /// Highest derivative order present.
    pub fn max_order(&self) -> u32 {
        self.terms.keys().flat_map(|f| f.last().copied()).max().unwrap_or(0)
    }

    /// Distinct weights `Σk` over all monomials.
    pub fn weights(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.terms.keys().map(|f| f.iter().sum()).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        let mut out = Self::zero();
        for (f, v) in &self.terms {
            out.add_term(f.clone(), &(v * c));
        }
        out
    }

    /// `∂_z` by the Leibniz rule: each factor in turn has its order raised by one.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zero();
        for (f, c) in &self.terms {
            for i in 0..f.len() {
                let mut g = f.clone();
                g[i] += 1;
                g.sort_unstable();
                out.add_term(g, c);
            }
        }
        out
    }

    fn sorted_terms(&self) -> Vec<(&Vec<u32>, &GaussianRational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| b.0.cmp(a.0)));
        v
    }

    /// Stable text form, e.g. `-1/2*(Dz^1 u)^3 + (Dz^3 u)`. Terms are ordered
    /// by number of factors, then by factor list, both descending.
    pub fn canonical(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (n, (factors, c)) in self.sorted_terms().into_iter().enumerate() {
            let body = factor_text(factors);
            let (negative, magnitude) = if c.is_real() {
                let neg = c.re.is_negative();
                (neg, if neg { -c } else { c.clone() })
            } else {
                (false, c.clone())
            };
            match (n, negative) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let unit = magnitude == GaussianRational::one();
            match (unit, body.is_empty()) {
                (true, true) => out.push('1'),
                (true, false) => out.push_str(&body),
                (false, true) => out.push_str(&magnitude.to_string()),
                (false, false) => {
                    out.push_str(&magnitude.to_string());
                    out.push('*');
                    out.push_str(&body);
                }
            }
        }
        out
    }
}

fn factor_text(factors: &[u32]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < factors.len() {
        let k = factors[i];
        let run = factors[i..].iter().take_while(|&&x| x == k).count();
        if run == 1 {
            parts.push(format!("(Dz^{k} u)"));
        } else {
            parts.push(format!("(Dz^{k} u)^{run}"));
        }
        i += run;
    }
    parts.join("*")
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl Add<&DiffPoly> for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (f, c) in &rhs.terms {
            out.add_term(f.clone(), c);
        }
        out
    }
}

impl Sub<&DiffPoly> for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        self + &(-rhs)
    }
}

impl Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        self.scale(&GaussianRational::real(-1, 1))
    }
}

impl Mul<&DiffPoly> for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (fa, ca) in &self.terms {
            for (fb, cb) in &rhs.terms {
                let mut f = fa.clone();
                f.extend_from_slice(fb);
                f.sort_unstable();
                out.add_term(f, &(ca * cb));
            }
        }
        out
    }
}

/// `[[a11, a12], [a21, a22]]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatPoly {
    pub a11: DiffPoly,
    pub a12: DiffPoly,
    pub a21: DiffPoly,
    pub a22: DiffPoly,
}

impl MatPoly {
    pub fn new(a11: DiffPoly, a12: DiffPoly, a21: DiffPoly, a22: DiffPoly) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    fn constant(c: [[GaussianRational; 2]; 2]) -> Self {
        let [[a, b], [c2, d]] = c;
        Self::new(
            DiffPoly::constant(a),
            DiffPoly::constant(b),
            DiffPoly::constant(c2),
            DiffPoly::constant(d),
        )
    }

    pub fn sigma1() -> Self {
        let (o, l) = (GaussianRational::zero(), GaussianRational::one());
        Self::constant([[o.clone(), l.clone()], [l, o]])
    }

    pub fn sigma2() -> Self {
        let o = GaussianRational::zero();
        Self::constant([[o.clone(), GaussianRational::imag(-1, 1)], [GaussianRational::i(), o]])
    }

    pub fn sigma3() -> Self {
        let o = GaussianRational::zero();
        Self::constant([[GaussianRational::one(), o.clone()], [o, GaussianRational::real(-1, 1)]])
    }

    /// `p · M` for a scalar differential polynomial `p`.
    pub fn times_poly(&self, p: &DiffPoly) -> Self {
        Self::new(p * &self.a11, p * &self.a12, p * &self.a21, p * &self.a22)
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        Self::new(self.a11.scale(c), self.a12.scale(c), self.a21.scale(c), self.a22.scale(c))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.a11.derivative(),
            self.a12.derivative(),
            self.a21.derivative(),
            self.a22.derivative(),
        )
    }

    /// `[M, B] = MB − BM`.
    pub fn commutator(&self, rhs: &MatPoly) -> Self {
        &(self * rhs) - &(rhs * self)
    }

    pub fn is_off_diagonal(&self) -> bool {
        self.a11.is_zero() && self.a22.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.is_off_diagonal() && self.a12.is_zero() && self.a21.is_zero()
    }
}

impl Add<&MatPoly> for &MatPoly {
    type Output = MatPoly;
    fn add(self, rhs: &MatPoly) -> MatPoly {
        MatPoly::new(
            &self.a11 + &rhs.a11,
            &self.a12 + &rhs.a12,
            &self.a21 + &rhs.a21,
            &self.a22 + &rhs.a22,
        )
    }
}

impl Sub<&MatPoly> for &MatPoly {
    type Output = MatPoly;
    fn sub(self, rhs: &MatPoly) -> MatPoly {
        MatPoly::new(
            &self.a11 - &rhs.a11,
            &self.a12 - &rhs.a12,
            &self.a21 - &rhs.a21,
            &self.a22 - &rhs.a22,
        )
    }
}

impl Mul<&MatPoly> for &MatPoly {
    type Output = MatPoly;
    fn mul(self, rhs: &MatPoly) -> MatPoly {
        MatPoly::new(
            &(&self.a11 * &rhs.a11) + &(&self.a12 * &rhs.a21),
            &(&self.a11 * &rhs.a12) + &(&self.a12 * &rhs.a22),
            &(&self.a21 * &rhs.a11) + &(&self.a22 * &rhs.a21),
            &(&self.a21 * &rhs.a12) + &(&self.a22 * &rhs.a22),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> GaussianRational {
        GaussianRational::real(n, d)
    }

    #[test]
    fn like_terms_merge_and_cancel() {
        let a = DiffPoly::monomial(r(1, 2), vec![3, 1]);
        let b = DiffPoly::monomial(r(1, 2), vec![1, 3]);
        let s = &a + &b;
        assert_eq!(s.len(), 1);
        assert_eq!(s.coeff(&[1, 3]), Some(&r(1, 1)));
        assert!((&a - &b).is_zero());
    }

    #[test]
    fn leibniz_on_cube() {
        // ∂(u1³) = 3u1²u2
        let p = DiffPoly::monomial(r(1, 1), vec![1, 1, 1]);
        assert_eq!(p.derivative(), DiffPoly::monomial(r(3, 1), vec![1, 1, 2]));
        assert!(DiffPoly::constant(r(5, 1)).derivative().is_zero());
    }

    #[test]
    fn canonical_text() {
        let p = &DiffPoly::monomial(r(-1, 2), vec![1, 1, 1]) + &DiffPoly::dz_u(3);
        assert_eq!(p.canonical(), "-1/2*(Dz^1 u)^3 + (Dz^3 u)");
        assert_eq!((-&DiffPoly::dz_u(1)).canonical(), "-(Dz^1 u)");
        assert_eq!(DiffPoly::zero().canonical(), "0");
        assert_eq!(DiffPoly::monomial(GaussianRational::imag(1, 2), vec![2]).canonical(), "1/2i*(Dz^2 u)");
    }

    #[test]
    fn pauli_relations() {
        let (s1, s2, s3) = (MatPoly::sigma1(), MatPoly::sigma2(), MatPoly::sigma3());
        // σ1σ2 = iσ3
        assert_eq!(&s1 * &s2, s3.scale(&GaussianRational::i()));
        let id = &s1 * &s1;
        assert_eq!(&s2 * &s2, id);
        assert_eq!(&s3 * &s3, id);
        // i[M, σ3] for off-diagonal M has entries (−2i·M12, 2i·M21)
        let m = MatPoly::new(DiffPoly::zero(), DiffPoly::dz_u(1), DiffPoly::dz_u(2), DiffPoly::zero());
        let c = m.commutator(&s3).scale(&GaussianRational::i());
        assert_eq!(c.a12, DiffPoly::dz_u(1).scale(&GaussianRational::imag(-2, 1)));
        assert_eq!(c.a21, DiffPoly::dz_u(2).scale(&GaussianRational::imag(2, 1)));
        assert!(c.is_off_diagonal());
    }

    fn arb_poly() -> impl Strategy<Value = DiffPoly> {
        prop::collection::vec((prop::collection::vec(1u32..5, 0..4), -5i64..6, 1i64..4), 0..5).prop_map(|terms| {
            terms.into_iter().fold(DiffPoly::zero(), |acc, (f, n, d)| {
                &acc + &DiffPoly::monomial(r(n, d), f)
            })
        })
    }

    proptest! {
        #[test]
        fn derivative_obeys_product_rule(a in arb_poly(), b in arb_poly()) {
            let lhs = (&a * &b).derivative();
            let rhs = &(&a.derivative() * &b) + &(&a * &b.derivative());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn derivative_is_linear(a in arb_poly(), b in arb_poly()) {
            prop_assert_eq!((&a + &b).derivative(), &a.derivative() + &b.derivative());
        }
    }
}
