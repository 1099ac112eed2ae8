//! Reduced words, shortlex order and left fractions.
//!
//! Three families are supported:
//!
//! * the free semigroup on `rank` letters, where every letter sequence is
//!   reduced and `u⁻¹v` is stored as a pair with the longest common prefix
//!   cancelled;
//! * free products of cyclic groups `Z_{m₁} * … * Z_{m_g}`, where a run of
//!   letter `i` is taken modulo `mᵢ` and inverses are spelled as `mᵢ − 1`
//!   repetitions, so every group element is a word;
//! * the free abelian group `Z^h`, whose monoid elements are written as
//!   nondecreasing letter sequences and whose group elements are exponent
//!   vectors ([`Element::Lattice`]).
//!
//! Letters are 1-based. Words are ordered shortlex: shorter first, then
//! letterwise by index, which is the derived [`Ord`] of [`Word`].

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum GroupSpec {
    FreeSemigroup { rank: usize },
    FreeProductCyclic { orders: Vec<u32> },
    FreeAbelian { rank: usize },
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orders: Option<Vec<u32>>,
}

impl TryFrom<RawSpec> for GroupSpec {
    type Error = String;

    fn try_from(raw: RawSpec) -> std::result::Result<Self, String> {
        let spec = match raw.family.as_str() {
            "free_semigroup" => GroupSpec::FreeSemigroup { rank: raw.rank.ok_or("free_semigroup requires \"rank\"")? },
            "free_abelian" => GroupSpec::FreeAbelian { rank: raw.rank.ok_or("free_abelian requires \"rank\"")? },
            "free_product_cyclic" => match (raw.orders, raw.rank) {
                (Some(orders), _) => GroupSpec::FreeProductCyclic { orders },
                (None, Some(rank)) => GroupSpec::FreeProductCyclic { orders: vec![2; rank] },
                (None, None) => return Err("free_product_cyclic requires \"orders\" or \"rank\"".into()),
            },
            other => return Err(format!("unknown group family {other:?}")),
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<GroupSpec> for RawSpec {
    fn from(spec: GroupSpec) -> Self {
        match spec {
            GroupSpec::FreeSemigroup { rank } => {
                RawSpec { family: "free_semigroup".into(), rank: Some(rank), orders: None }
            }
            GroupSpec::FreeAbelian { rank } => {
                RawSpec { family: "free_abelian".into(), rank: Some(rank), orders: None }
            }
            GroupSpec::FreeProductCyclic { orders } => {
                RawSpec { family: "free_product_cyclic".into(), rank: None, orders: Some(orders) }
            }
        }
    }
}

/// A word in 1-based generator indices. The derived order is shortlex.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Wraps letters without reducing them; use [`GroupSpec::reduce`] for
    /// untrusted input.
    pub fn from_letters(letters: Vec<u32>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<u32> {
        self.0.first().copied()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        let mut i = 0;
        while i < self.0.len() {
            let l = self.0[i];
            let mut run = 1;
            while i + run < self.0.len() && self.0[i + run] == l {
                run += 1;
            }
            if run == 1 {
                write!(f, "x{l}")?;
            } else {
                write!(f, "x{l}^{run}")?;
            }
            i += run;
        }
        Ok(())
    }
}

/// `den⁻¹·num`. For group families `den` is always empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeftFraction {
    pub den: Word,
    pub num: Word,
}

impl LeftFraction {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_word(w: Word) -> Self {
        LeftFraction { den: Word::empty(), num: w }
    }

    pub fn is_identity(&self) -> bool {
        self.den.is_empty() && self.num.is_empty()
    }
}

impl fmt::Display for LeftFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.den.is_empty(), self.num.is_empty()) {
            (true, _) => write!(f, "{}", self.num),
            (false, true) => write!(f, "({})^-1", self.den),
            (false, false) => write!(f, "({})^-1 {}", self.den, self.num),
        }
    }
}

/// An element of the `Y` group: a reduced word (free products of cyclic
/// groups) or an exponent vector (free abelian groups).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Word(Word),
    Lattice(Vec<i64>),
}

impl Element {
    pub fn trivial() -> Self {
        Element::Word(Word::empty())
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Word(w) if w.is_empty() => f.write_str("e"),
            Element::Word(w) => {
                let s = w.to_string();
                f.write_str(&s.replace('x', "y"))
            }
            Element::Lattice(v) => {
                if v.iter().all(|&a| a == 0) {
                    return f.write_str("e");
                }
                for (i, &a) in v.iter().enumerate() {
                    match a {
                        0 => {}
                        1 => write!(f, "y{}", i + 1)?,
                        _ => write!(f, "y{}^{a}", i + 1)?,
                    }
                }
                Ok(())
            }
        }
    }
}

impl GroupSpec {
    /// `Z₂ * … * Z₂` with `g` factors.
    pub fn z2_free_product(g: usize) -> Self {
        GroupSpec::FreeProductCyclic { orders: vec![2; g] }
    }

    pub fn free_semigroup(g: usize) -> Self {
        GroupSpec::FreeSemigroup { rank: g }
    }

    pub fn free_abelian(h: usize) -> Self {
        GroupSpec::FreeAbelian { rank: h }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::FreeSemigroup { rank } | GroupSpec::FreeAbelian { rank } if *rank == 0 => {
                Err(Error::InvalidInput("rank must be at least 1".into()))
            }
            GroupSpec::FreeProductCyclic { orders } if orders.is_empty() => {
                Err(Error::InvalidInput("a free product needs at least one factor".into()))
            }
            GroupSpec::FreeProductCyclic { orders } if orders.iter().any(|&m| m < 2) => {
                Err(Error::InvalidInput("every cyclic order must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            GroupSpec::FreeSemigroup { rank } | GroupSpec::FreeAbelian { rank } => *rank,
            GroupSpec::FreeProductCyclic { orders } => orders.len(),
        }
    }

    /// True for the families whose fractions form a group.
    pub fn is_group(&self) -> bool {
        !matches!(self, GroupSpec::FreeSemigroup { .. })
    }

    /// True for `Z₂^{*g}`.
    pub fn is_z2_product(&self) -> bool {
        matches!(self, GroupSpec::FreeProductCyclic { orders } if orders.iter().all(|&m| m == 2))
    }

    fn order(&self, letter: u32) -> u32 {
        match self {
            GroupSpec::FreeProductCyclic { orders } => orders[letter as usize - 1],
            _ => 0,
        }
    }

    fn check_letters(&self, letters: &[u32]) -> Result<()> {
        let rank = self.rank();
        match letters.iter().find(|&&l| l == 0 || l as usize > rank) {
            Some(&index) => Err(Error::IndexOutOfRange { index, rank }),
            None => Ok(()),
        }
    }

    /// Unique reduced form of a letter sequence.
    pub fn reduce(&self, letters: &[u32]) -> Result<Word> {
        self.check_letters(letters)?;
        Ok(self.reduce_unchecked(letters))
    }

    fn reduce_unchecked(&self, letters: &[u32]) -> Word {
        match self {
            GroupSpec::FreeSemigroup { .. } => Word(letters.to_vec()),
            GroupSpec::FreeAbelian { .. } => {
                let mut v = letters.to_vec();
                v.sort_unstable();
                Word(v)
            }
            GroupSpec::FreeProductCyclic { .. } => {
                // stack of (letter, run length); a run reaching the order vanishes
                let mut runs: Vec<(u32, u32)> = Vec::new();
                for &l in letters {
                    let m = self.order(l);
                    match runs.last_mut() {
                        Some((top, count)) if *top == l => {
                            *count += 1;
                            if *count == m {
                                runs.pop();
                            }
                        }
                        _ => runs.push((l, 1)),
                    }
                }
                Word(runs.into_iter().flat_map(|(l, n)| std::iter::repeat_n(l, n as usize)).collect())
            }
        }
    }

    /// True when `w` is already in reduced form for this family.
    pub fn is_reduced(&self, w: &Word) -> bool {
        self.check_letters(&w.0).is_ok() && (1..=w.len()).all(|k| self.prefix_ok(&w.0[..k]))
    }

    fn ensure_reduced(&self, w: &Word) -> Result<()> {
        if self.is_reduced(w) {
            Ok(())
        } else {
            Err(Error::SpecMismatch(format!("{w} is not a reduced word for {self:?}")))
        }
    }

    // Whether the last letter of `p` keeps `p` reduced, given that
    // `p[..len-1]` is.
    fn prefix_ok(&self, p: &[u32]) -> bool {
        let n = p.len();
        if n < 2 {
            return true;
        }
        match self {
            GroupSpec::FreeSemigroup { .. } => true,
            GroupSpec::FreeAbelian { .. } => p[n - 2] <= p[n - 1],
            GroupSpec::FreeProductCyclic { .. } => {
                let l = p[n - 1];
                let run = p.iter().rev().take_while(|&&x| x == l).count() as u32;
                run < self.order(l)
            }
        }
    }

    /// Shortlex comparison of two reduced words.
    pub fn shortlex_cmp(&self, a: &Word, b: &Word) -> Result<Ordering> {
        self.ensure_reduced(a)?;
        self.ensure_reduced(b)?;
        Ok(a.cmp(b))
    }

    fn least_completion(&self, mut prefix: Vec<u32>, len: usize) -> Option<Vec<u32>> {
        if prefix.len() == len {
            return Some(prefix);
        }
        for l in 1..=self.rank() as u32 {
            prefix.push(l);
            if self.prefix_ok(&prefix) {
                if let Some(done) = self.least_completion(prefix.clone(), len) {
                    return Some(done);
                }
            }
            prefix.pop();
        }
        None
    }

    fn next_same_length(&self, w: &[u32]) -> Option<Vec<u32>> {
        let n = w.len();
        for i in (0..n).rev() {
            for l in (w[i] + 1)..=self.rank() as u32 {
                let mut prefix = w[..i].to_vec();
                prefix.push(l);
                if !self.prefix_ok(&prefix) {
                    continue;
                }
                if let Some(done) = self.least_completion(prefix, n) {
                    return Some(done);
                }
            }
        }
        None
    }

    /// Least reduced word strictly greater than `w` in shortlex order.
    pub fn successor(&self, w: &Word) -> Result<Word> {
        self.ensure_reduced(w)?;
        if let Some(next) = self.next_same_length(&w.0) {
            return Ok(Word(next));
        }
        self.least_completion(Vec::new(), w.len() + 1)
            .map(Word)
            .ok_or_else(|| Error::Unsupported(format!("{w} is the largest element of a finite group")))
    }

    /// `W_{≤w}` in ascending shortlex order.
    pub fn enumerate_upto(&self, w: &Word) -> Result<Vec<Word>> {
        self.ensure_reduced(w)?;
        let mut out = vec![Word::empty()];
        while out.last().expect("nonempty") < w {
            let next = self.successor(out.last().expect("nonempty"))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Every reduced word of length at most `n`, ascending.
    pub fn words_upto_length(&self, n: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        loop {
            match self.successor(out.last().expect("nonempty")) {
                Ok(next) if next.len() <= n => out.push(next),
                _ => return out,
            }
        }
    }

    /// Largest reduced word of length `n`, if any.
    pub fn last_word_of_length(&self, n: usize) -> Option<Word> {
        self.words_upto_length(n).into_iter().rfind(|w| w.len() == n)
    }

    /// Group inverse of a reduced word in a free product of cyclic groups.
    pub fn inverse_word(&self, w: &Word) -> Result<Word> {
        match self {
            GroupSpec::FreeProductCyclic { .. } => {
                let letters: Vec<u32> =
                    w.0.iter().rev().flat_map(|&l| std::iter::repeat_n(l, self.order(l) as usize - 1)).collect();
                Ok(self.reduce_unchecked(&letters))
            }
            _ => Err(Error::Unsupported("word inverses exist only in free products of cyclic groups".into())),
        }
    }

    fn counts(&self, w: &Word) -> Vec<i64> {
        let mut v = vec![0; self.rank()];
        for &l in &w.0 {
            v[l as usize - 1] += 1;
        }
        v
    }

    fn word_from_counts(counts: &[i64]) -> Word {
        Word(
            counts
                .iter()
                .enumerate()
                .flat_map(|(i, &n)| std::iter::repeat_n(i as u32 + 1, n.max(0) as usize))
                .collect(),
        )
    }

    /// Normal form of `u⁻¹v`.
    pub fn fraction(&self, u: &Word, v: &Word) -> Result<LeftFraction> {
        self.ensure_reduced(u)?;
        self.ensure_reduced(v)?;
        Ok(self.fraction_unchecked(u, v))
    }

    pub(crate) fn fraction_unchecked(&self, u: &Word, v: &Word) -> LeftFraction {
        match self {
            GroupSpec::FreeSemigroup { .. } => {
                let p = u.0.iter().zip(&v.0).take_while(|(a, b)| a == b).count();
                LeftFraction { den: Word(u.0[p..].to_vec()), num: Word(v.0[p..].to_vec()) }
            }
            GroupSpec::FreeAbelian { .. } => {
                let d: Vec<i64> = self.counts(v).iter().zip(self.counts(u)).map(|(a, b)| a - b).collect();
                let neg: Vec<i64> = d.iter().map(|&x| (-x).max(0)).collect();
                LeftFraction { den: Self::word_from_counts(&neg), num: Self::word_from_counts(&d) }
            }
            GroupSpec::FreeProductCyclic { .. } => {
                let mut letters = self.inverse_word(u).expect("cyclic family").0;
                letters.extend_from_slice(&v.0);
                LeftFraction::from_word(self.reduce_unchecked(&letters))
            }
        }
    }

    pub fn invert_fraction(&self, f: &LeftFraction) -> LeftFraction {
        match self {
            GroupSpec::FreeProductCyclic { .. } => {
                LeftFraction::from_word(self.inverse_word(&f.num).expect("cyclic family"))
            }
            _ => LeftFraction { den: f.num.clone(), num: f.den.clone() },
        }
    }

    /// Product of two fractions, when it is again a left fraction.
    ///
    /// In the free semigroup `(a⁻¹b)(c⁻¹d)` is a left fraction only if one
    /// of `b`, `c` is a suffix of the other.
    pub fn mul_fractions(&self, x: &LeftFraction, y: &LeftFraction) -> Result<LeftFraction> {
        match self {
            GroupSpec::FreeProductCyclic { .. } => {
                let mut letters = x.num.0.clone();
                letters.extend_from_slice(&y.num.0);
                Ok(LeftFraction::from_word(self.reduce_unchecked(&letters)))
            }
            GroupSpec::FreeAbelian { .. } => {
                let d: Vec<i64> = self
                    .counts(&x.num)
                    .iter()
                    .zip(self.counts(&y.num))
                    .zip(self.counts(&x.den).iter().zip(self.counts(&y.den)))
                    .map(|((a, b), (c, d))| a + b - c - d)
                    .collect();
                let neg: Vec<i64> = d.iter().map(|&x| (-x).max(0)).collect();
                Ok(LeftFraction { den: Self::word_from_counts(&neg), num: Self::word_from_counts(&d) })
            }
            GroupSpec::FreeSemigroup { .. } => {
                let (b, c) = (&x.num.0, &y.den.0);
                if b.ends_with(c) {
                    let mut num = b[..b.len() - c.len()].to_vec();
                    num.extend_from_slice(&y.num.0);
                    Ok(self.fraction_unchecked(&x.den, &Word(num)))
                } else if c.ends_with(b) {
                    let mut den = c[..c.len() - b.len()].to_vec();
                    den.extend_from_slice(&x.den.0);
                    Ok(self.fraction_unchecked(&Word(den), &y.num))
                } else {
                    Err(Error::Unsupported(format!(
                        "product of {x} and {y} is not a left fraction of the free semigroup"
                    )))
                }
            }
        }
    }

    /// `Her W_{≤w}`: every `u⁻¹v` with `u, v ≤ w`, deduplicated.
    pub fn left_fraction_set(&self, w: &Word) -> Result<BTreeSet<LeftFraction>> {
        let words = self.enumerate_upto(w)?;
        Ok(self.fractions_of(&words))
    }

    pub fn fractions_of(&self, words: &[Word]) -> BTreeSet<LeftFraction> {
        let mut set = BTreeSet::new();
        for u in words {
            for v in words {
                set.insert(self.fraction_unchecked(u, v));
            }
        }
        set
    }

    /// Smallest `w` (shortlex) with `f ∈ Her W_{≤w}`.
    pub fn fraction_degree(&self, f: &LeftFraction) -> Word {
        match self {
            GroupSpec::FreeProductCyclic { .. } => {
                // f = u⁻¹v over every split of the reduced word
                let letters = &f.num.0;
                (0..=letters.len())
                    .map(|k| {
                        let u = self.inverse_word(&Word(letters[..k].to_vec())).expect("cyclic");
                        let v = Word(letters[k..].to_vec());
                        u.max(v)
                    })
                    .min()
                    .unwrap_or_default()
            }
            _ => f.den.clone().max(f.num.clone()),
        }
    }

    // ---- Y-group arithmetic -------------------------------------------------

    pub fn identity_element(&self) -> Element {
        match self {
            GroupSpec::FreeAbelian { rank } => Element::Lattice(vec![0; *rank]),
            _ => Element::Word(Word::empty()),
        }
    }

    fn ensure_element(&self, a: &Element) -> Result<()> {
        match (self, a) {
            (GroupSpec::FreeAbelian { rank }, Element::Lattice(v)) if v.len() == *rank => Ok(()),
            (GroupSpec::FreeProductCyclic { .. }, Element::Word(w)) => self.ensure_reduced(w),
            (GroupSpec::FreeSemigroup { .. }, _) => Err(Error::Unsupported("the free semigroup is not a group".into())),
            _ => Err(Error::SpecMismatch(format!("{a} is not an element of {self:?}"))),
        }
    }

    pub fn check_element(&self, a: &Element) -> Result<()> {
        self.ensure_element(a)
    }

    pub fn mul_elements(&self, a: &Element, b: &Element) -> Result<Element> {
        self.ensure_element(a)?;
        self.ensure_element(b)?;
        Ok(match (a, b) {
            (Element::Lattice(x), Element::Lattice(y)) => {
                Element::Lattice(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (Element::Word(x), Element::Word(y)) => {
                let mut letters = x.0.clone();
                letters.extend_from_slice(&y.0);
                Element::Word(self.reduce_unchecked(&letters))
            }
            _ => unreachable!("checked above"),
        })
    }

    pub fn inverse_element(&self, a: &Element) -> Result<Element> {
        self.ensure_element(a)?;
        Ok(match a {
            Element::Lattice(x) => Element::Lattice(x.iter().map(|p| -p).collect()),
            Element::Word(w) => Element::Word(self.inverse_word(w)?),
        })
    }

    pub fn element_length(&self, a: &Element) -> usize {
        match a {
            Element::Lattice(x) => x.iter().map(|p| p.unsigned_abs() as usize).sum(),
            Element::Word(w) => w.len(),
        }
    }

    /// Least `M` with `a ∈ Her Y_{≤M}`.
    pub fn element_degree(&self, a: &Element) -> usize {
        match a {
            Element::Lattice(x) => {
                let pos: i64 = x.iter().filter(|&&p| p > 0).sum();
                let neg: i64 = -x.iter().filter(|&&p| p < 0).sum::<i64>();
                pos.max(neg) as usize
            }
            Element::Word(w) => {
                let d = self.fraction_degree(&LeftFraction::from_word(w.clone()));
                d.len()
            }
        }
    }

    /// Monoid elements `Y_{≤M}` (words of length at most `M`), ascending.
    pub fn analytic_elements(&self, m: usize) -> Result<Vec<Element>> {
        match self {
            GroupSpec::FreeSemigroup { .. } => Err(Error::Unsupported("the free semigroup is not a group".into())),
            GroupSpec::FreeAbelian { .. } => {
                Ok(self.words_upto_length(m).iter().map(|w| Element::Lattice(self.counts(w))).collect())
            }
            GroupSpec::FreeProductCyclic { .. } => {
                Ok(self.words_upto_length(m).into_iter().map(Element::Word).collect())
            }
        }
    }

    /// Writes `g = a⁻¹b` with `a, b` in the generating monoid.
    fn split_in_monoid(&self, g: &Element) -> (Element, Element) {
        match g {
            Element::Lattice(x) => (
                Element::Lattice(x.iter().map(|&p| (-p).max(0)).collect()),
                Element::Lattice(x.iter().map(|&p| p.max(0)).collect()),
            ),
            Element::Word(_) => (self.identity_element(), g.clone()),
        }
    }

    fn in_monoid(&self, g: &Element) -> bool {
        match g {
            Element::Lattice(x) => x.iter().all(|&p| p >= 0),
            Element::Word(_) => true,
        }
    }
}

/// Finds `d` in the monoid `M` (nonnegative orthant, or the whole group for
/// free products of cyclic groups) with `d·s ∈ M` for every `s ∈ S`.
///
/// Follows the induction over `S`: if `d·S' ⊆ M` and `s = u⁻¹v`, write
/// `d·u⁻¹ = a⁻¹b` with `a, b ∈ M`; then `a·d` works for `S' ∪ {s}`.
pub fn common_left_multiplier(set: &[Element], y_spec: &GroupSpec) -> Result<Element> {
    if !y_spec.is_group() {
        return Err(Error::Unsupported("left fractions of the free semigroup do not form a group".into()));
    }
    let mut d = y_spec.identity_element();
    for s in set {
        y_spec.ensure_element(s)?;
        if y_spec.in_monoid(&y_spec.mul_elements(&d, s)?) {
            continue;
        }
        let (u, _v) = y_spec.split_in_monoid(s);
        let du_inv = y_spec.mul_elements(&d, &y_spec.inverse_element(&u)?)?;
        let (a, _b) = y_spec.split_in_monoid(&du_inv);
        d = y_spec.mul_elements(&a, &d)?;
    }
    Ok(d)
}

/// Direct product `W × Y`; `y = None` is the trivial group.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductSpec {
    pub w: GroupSpec,
    pub y: Option<GroupSpec>,
}

/// A monomial `u·a` with `u ∈ W` and `a` in the monoid generating `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub w: Word,
    pub y: Element,
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.w.is_empty(), &self.y) {
            (_, y) if y.to_string() == "e" => write!(f, "{}", self.w),
            (true, y) => write!(f, "{y}"),
            (false, y) => write!(f, "{}{}", self.w, y),
        }
    }
}

/// An element `α·γ` of `Her W × Y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductElement {
    pub w: LeftFraction,
    pub y: Element,
}

impl fmt::Display for ProductElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ys = self.y.to_string();
        match (self.w.is_identity(), ys == "e") {
            (true, _) => f.write_str(&ys),
            (false, true) => write!(f, "{}", self.w),
            (false, false) => write!(f, "{}·{}", self.w, ys),
        }
    }
}

impl ProductSpec {
    pub fn new(w: GroupSpec, y: Option<GroupSpec>) -> Result<Self> {
        w.validate()?;
        if let Some(y) = &y {
            y.validate()?;
            if !y.is_group() {
                return Err(Error::Unsupported("the Y factor must be a group".into()));
            }
        }
        Ok(ProductSpec { w, y })
    }

    pub fn w_only(w: GroupSpec) -> Self {
        ProductSpec { w, y: None }
    }

    pub fn y_identity(&self) -> Element {
        self.y.as_ref().map_or(Element::trivial(), GroupSpec::identity_element)
    }

    pub fn identity(&self) -> ProductElement {
        ProductElement { w: LeftFraction::identity(), y: self.y_identity() }
    }

    pub fn is_identity(&self, g: &ProductElement) -> bool {
        g.w.is_identity() && g.y == self.y_identity()
    }

    pub fn check_element(&self, g: &ProductElement) -> Result<()> {
        self.w.ensure_reduced(&g.w.den)?;
        self.w.ensure_reduced(&g.w.num)?;
        if self.w.is_group() && !g.w.den.is_empty() {
            return Err(Error::SpecMismatch(format!("{} is not in normal form", g.w)));
        }
        match &self.y {
            Some(y) => y.ensure_element(&g.y),
            None if g.y == Element::trivial() => Ok(()),
            None => Err(Error::SpecMismatch(format!("Y is trivial but element has y-part {}", g.y))),
        }
    }

    /// `row⁻¹·col` for two monomials.
    pub fn pair_fraction(&self, row: &Monomial, col: &Monomial) -> ProductElement {
        let w = self.w.fraction_unchecked(&row.w, &col.w);
        let y = match &self.y {
            Some(ys) => {
                let inv = ys.inverse_element(&row.y).expect("validated monomial");
                ys.mul_elements(&inv, &col.y).expect("validated monomial")
            }
            None => Element::trivial(),
        };
        ProductElement { w, y }
    }

    pub fn inverse(&self, g: &ProductElement) -> ProductElement {
        ProductElement {
            w: self.w.invert_fraction(&g.w),
            y: match &self.y {
                Some(ys) => ys.inverse_element(&g.y).expect("validated element"),
                None => Element::trivial(),
            },
        }
    }

    pub fn mul(&self, a: &ProductElement, b: &ProductElement) -> Result<ProductElement> {
        let w = self.w.mul_fractions(&a.w, &b.w)?;
        let y = match &self.y {
            Some(ys) => ys.mul_elements(&a.y, &b.y)?,
            None => Element::trivial(),
        };
        Ok(ProductElement { w, y })
    }

    /// Embeds a monomial as the element `e⁻¹u·a`.
    pub fn monomial_element(&self, m: &Monomial) -> ProductElement {
        ProductElement { w: LeftFraction::from_word(m.w.clone()), y: m.y.clone() }
    }

    /// `W_{≤w} × Y_{≤M}`, W-major.
    pub fn monomials(&self, w: &Word, m: usize) -> Result<Vec<Monomial>> {
        let ws = self.w.enumerate_upto(w)?;
        let ys = match &self.y {
            Some(y) => y.analytic_elements(m)?,
            None => vec![Element::trivial()],
        };
        Ok(ws.iter().flat_map(|u| ys.iter().map(move |a| Monomial { w: u.clone(), y: a.clone() })).collect())
    }

    /// Bidegree `(w, M)`: least `w` and `M` with `g ∈ Her W_{≤w} × Her Y_{≤M}`.
    pub fn element_bidegree(&self, g: &ProductElement) -> (Word, usize) {
        let w = self.w.fraction_degree(&g.w);
        let m = self.y.as_ref().map_or(0, |y| y.element_degree(&g.y));
        (w, m)
    }
}
