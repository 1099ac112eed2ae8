//! Partially defined psd kernels on left fractions, the Parrott completion,
//! and successor-step extension for free semigroups and `Z₂^{*g}`.
//!
//! A kernel optionally carries a finite cyclic group `G = Z_n` in its
//! values: `entry(α)` is then a list of `n` blocks, one per `g ∈ Z_n`, and
//! the assembled form is indexed by pairs `(u, g)` with block
//! `((u, g), (v, h)) = entry(u⁻¹v)[h − g]`. With `n = 1` this reduces to
//! the plain kernel `block(u, v) = entry(u⁻¹v)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, DEFAULT_PSD_TOL};
use crate::words::{GroupSpec, LeftFraction, Word};

#[derive(Clone, Debug, PartialEq)]
pub struct PartialKernel {
    spec: GroupSpec,
    g_order: usize,
    w_max: Word,
    k: usize,
    entries: BTreeMap<LeftFraction, Vec<CMat>>,
}

/// The block matrix `X_χ` of a kernel over an index of words.
#[derive(Clone, Debug)]
pub struct AssembledForm {
    pub spec: GroupSpec,
    pub index: Vec<Word>,
    pub g_order: usize,
    pub k: usize,
    pub matrix: CMat,
}

impl AssembledForm {
    /// Side length of the block attached to one word.
    pub fn word_block(&self) -> usize {
        self.g_order * self.k
    }
}

fn circulant(entries: &[CMat], k: usize) -> CMat {
    let n = entries.len();
    let mut out = CMat::zeros(n * k, n * k);
    for g in 0..n {
        for h in 0..n {
            out.view_mut((g * k, h * k), (k, k)).copy_from(&entries[(h + n - g) % n]);
        }
    }
    out
}

// Projects a block onto the circulant ones; returns the entries and the
// largest deviation from circulant structure.
fn decirculant(block: &CMat, n: usize, k: usize) -> (Vec<CMat>, f64) {
    let mut entries = vec![CMat::zeros(k, k); n];
    for (m, entry) in entries.iter_mut().enumerate() {
        for g in 0..n {
            *entry += block.view((g * k, ((g + m) % n) * k), (k, k));
        }
        *entry *= cr(1.0 / n as f64);
    }
    let dev = linalg::max_abs(&(block - circulant(&entries, k)));
    (entries, dev)
}

fn inverse_entries(entries: &[CMat]) -> Vec<CMat> {
    let n = entries.len();
    (0..n).map(|m| entries[(n - m) % n].adjoint()).collect()
}

impl PartialKernel {
    /// Builds a kernel from explicit entries. Every fraction of
    /// `Her W_{≤w_max}` must be present, and nothing else.
    pub fn new(
        spec: GroupSpec,
        g_order: usize,
        w_max: Word,
        k: usize,
        entries: BTreeMap<LeftFraction, Vec<CMat>>,
    ) -> Result<Self> {
        spec.validate()?;
        if g_order == 0 || k == 0 {
            return Err(Error::InvalidInput("block size and group order must be positive".into()));
        }
        let domain = spec.left_fraction_set(&w_max)?;
        if let Some(missing) = domain.iter().find(|f| !entries.contains_key(f)) {
            return Err(Error::MissingEntry(missing.to_string()));
        }
        if let Some(extra) = entries.keys().find(|f| !domain.contains(f)) {
            return Err(Error::InvalidInput(format!("fraction {extra} lies outside Her W_(<= {w_max})")));
        }
        for (f, vals) in &entries {
            if vals.len() != g_order || vals.iter().any(|m| m.shape() != (k, k)) {
                return Err(Error::InvalidInput(format!("entry for {f} has the wrong shape")));
            }
        }
        let kernel = PartialKernel { spec, g_order, w_max, k, entries };
        kernel.check_hermitian(1e-10)?;
        Ok(kernel)
    }

    /// Builds a kernel by evaluating `value(α, g)` on `Her W_{≤w_max} × Z_n`.
    pub fn from_fn(
        spec: GroupSpec,
        g_order: usize,
        w_max: Word,
        k: usize,
        mut value: impl FnMut(&LeftFraction, usize) -> CMat,
    ) -> Result<Self> {
        let domain = spec.left_fraction_set(&w_max)?;
        let entries = domain
            .into_iter()
            .map(|f| {
                let vals = (0..g_order).map(|g| value(&f, g)).collect();
                (f, vals)
            })
            .collect();
        Self::new(spec, g_order, w_max, k, entries)
    }

    /// `entry(e) = I`, every other entry zero.
    pub fn delta(spec: GroupSpec, w_max: Word, k: usize) -> Result<Self> {
        Self::from_fn(spec, 1, w_max, k, |f, _| if f.is_identity() { linalg::identity(k) } else { CMat::zeros(k, k) })
    }

    /// Every entry equal to the `k × k` all-ones matrix.
    pub fn ones(spec: GroupSpec, w_max: Word, k: usize) -> Result<Self> {
        Self::from_fn(spec, 1, w_max, k, |_, _| CMat::from_element(k, k, cr(1.0)))
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn g_order(&self) -> usize {
        self.g_order
    }

    pub fn w_max(&self) -> &Word {
        &self.w_max
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &BTreeMap<LeftFraction, Vec<CMat>> {
        &self.entries
    }

    pub fn entry(&self, f: &LeftFraction) -> Result<&[CMat]> {
        self.entries.get(f).map(Vec::as_slice).ok_or_else(|| Error::MissingEntry(f.to_string()))
    }

    fn check_hermitian(&self, tol: f64) -> Result<()> {
        for (f, vals) in &self.entries {
            let inv = self.spec.invert_fraction(f);
            let other = self.entry(&inv)?;
            let expect = inverse_entries(vals);
            let dev = other.iter().zip(&expect).map(|(a, b)| linalg::max_abs(&(a - b))).fold(0.0, f64::max);
            if dev > tol * (1.0 + vals.iter().map(linalg::max_abs).fold(0.0, f64::max)) {
                return Err(Error::NotHermitian { deviation: dev });
            }
        }
        Ok(())
    }

    fn block(&self, f: &LeftFraction) -> Result<CMat> {
        Ok(circulant(self.entry(f)?, self.k))
    }

    /// Assembles the form over `W_{≤w_max}`.
    pub fn assemble(&self) -> Result<AssembledForm> {
        let index = self.spec.enumerate_upto(&self.w_max)?;
        self.assemble_on(&index)
    }

    /// Assembles the form over an arbitrary list of words whose pairwise
    /// fractions are all stored.
    pub fn assemble_on(&self, index: &[Word]) -> Result<AssembledForm> {
        let b = self.g_order * self.k;
        let mut matrix = CMat::zeros(index.len() * b, index.len() * b);
        for (i, u) in index.iter().enumerate() {
            for (j, v) in index.iter().enumerate() {
                let f = self.spec.fraction(u, v)?;
                matrix.view_mut((i * b, j * b), (b, b)).copy_from(&self.block(&f)?);
            }
        }
        Ok(AssembledForm { spec: self.spec.clone(), index: index.to_vec(), g_order: self.g_order, k: self.k, matrix })
    }

    /// The kernel restricted to `Her W_{≤w}` for some `w ≤ w_max`.
    pub fn restrict(&self, w: &Word) -> Result<Self> {
        if w > &self.w_max {
            return Err(Error::InvalidInput(format!("{w} exceeds the kernel's top word {}", self.w_max)));
        }
        let domain = self.spec.left_fraction_set(w)?;
        let entries = domain.into_iter().map(|f| (f.clone(), self.entries[&f].clone())).collect();
        Ok(PartialKernel { spec: self.spec.clone(), g_order: self.g_order, w_max: w.clone(), k: self.k, entries })
    }

    fn ensure_psd(&self, tol: f64) -> Result<()> {
        let (ok, min_eig) = is_psd(&self.assemble()?, tol)?;
        if ok {
            Ok(())
        } else {
            Err(Error::NotPsd { min_eig })
        }
    }
}

/// Scale-relative psd test: `λ_min ≥ −tol·(1 + ‖M‖₂)`.
pub fn is_psd(form: &AssembledForm, tol: f64) -> Result<(bool, f64)> {
    let dev = linalg::hermitian_deviation(&form.matrix);
    if dev > 1e-10 * (1.0 + linalg::max_abs(&form.matrix)) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(linalg::psd_check(&form.matrix, tol))
}

/// True when every pair of index positions with equal fractions carries
/// equal blocks, and every block is circulant in the `G` direction.
pub fn invariance_check(form: &AssembledForm, tol: f64) -> bool {
    let b = form.word_block();
    let mut seen: BTreeMap<LeftFraction, CMat> = BTreeMap::new();
    for (i, u) in form.index.iter().enumerate() {
        for (j, v) in form.index.iter().enumerate() {
            let Ok(f) = form.spec.fraction(u, v) else {
                return false;
            };
            let blk = form.matrix.view((i * b, j * b), (b, b)).into_owned();
            if decirculant(&blk, form.g_order, form.k).1 > tol {
                return false;
            }
            match seen.get(&f) {
                Some(prev) if linalg::max_abs(&(prev - &blk)) > tol => return false,
                Some(_) => {}
                None => {
                    seen.insert(f, blk);
                }
            }
        }
    }
    true
}

fn ensure_psd_matrix(m: &CMat, tol: f64) -> Result<()> {
    let (ok, min_eig) = linalg::psd_check(m, tol);
    if ok {
        Ok(())
    } else {
        Err(Error::NotPsd { min_eig })
    }
}

/// Relative cutoff for `B⁺` in the Parrott fill. Directions of `B` at the
/// roundoff level carry components of `E` and `F` that are roundoff too,
/// and their quotient is noise of order one; dropping directions below
/// `PARROTT_RCOND·‖B‖` costs at most that much positivity.
pub const PARROTT_RCOND: f64 = 1e-10;

/// Fills the corner of `[[A, E, X], [E*, B, F], [X*, F*, C]]` with
/// `X = E·B⁺·F`.
pub fn parrott_complete(a: &CMat, e: &CMat, b: &CMat, f: &CMat, c: &CMat) -> Result<CMat> {
    parrott_complete_tol(a, e, b, f, c, DEFAULT_PSD_TOL)
}

pub fn parrott_complete_tol(a: &CMat, e: &CMat, b: &CMat, f: &CMat, c: &CMat, tol: f64) -> Result<CMat> {
    let conformable = a.is_square()
        && b.is_square()
        && c.is_square()
        && e.shape() == (a.nrows(), b.nrows())
        && f.shape() == (b.nrows(), c.nrows());
    if !conformable {
        return Err(Error::InvalidInput("Parrott blocks are not conformable".into()));
    }
    ensure_psd_matrix(&linalg::block_matrix(&[vec![a.clone(), e.clone()], vec![e.adjoint(), b.clone()]]), tol)?;
    ensure_psd_matrix(&linalg::block_matrix(&[vec![b.clone(), f.clone()], vec![f.adjoint(), c.clone()]]), tol)?;
    Ok(e * linalg::pinv_rcond(b, PARROTT_RCOND) * f)
}

/// Largest deviation of a matrix indexed by `(i, g)` (i-major, block size
/// `k`) from invariance under `(i, g) ↦ (i, g + 1)` in `Z_n`.
pub fn translation_residual(m: &CMat, n: usize, k: usize) -> f64 {
    let b = n * k;
    if !m.nrows().is_multiple_of(b) || !m.ncols().is_multiple_of(b) {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() / b {
        for j in 0..m.ncols() / b {
            let blk = m.view((i * b, j * b), (b, b)).into_owned();
            worst = worst.max(decirculant(&blk, n, k).1);
        }
    }
    worst
}

/// Parrott completion for blocks that commute with the translation action
/// of `Z_n`. Each matrix is indexed by `(i, g)` pairs, `i`-major, with
/// `k × k` sub-blocks.
#[allow(clippy::too_many_arguments)]
pub fn parrott_complete_invariant(
    a: &CMat,
    e: &CMat,
    b: &CMat,
    f: &CMat,
    c: &CMat,
    n: usize,
    k: usize,
    tol: f64,
) -> Result<CMat> {
    for m in [a, e, b, f, c] {
        let residual = translation_residual(m, n, k);
        if residual > tol * (1.0 + linalg::max_abs(m)) {
            return Err(Error::NotInvariant { residual });
        }
    }
    let x = parrott_complete_tol(a, e, b, f, c, tol)?;
    let residual = translation_residual(&x, n, k);
    if residual > 1e-6 * (1.0 + linalg::max_abs(&x)) {
        return Err(Error::NotInvariant { residual });
    }
    Ok(x)
}

/// The combinatorial data of one successor step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepPlan {
    pub w: Word,
    pub s: Word,
    /// Words `t ≤ w` whose fraction `t⁻¹s` is new at this step.
    pub f0: Vec<Word>,
    /// For `Z₂^{*g}`: `s = x_j z` and `L = W_{≤z} ∪ x_j W_{≤z}`.
    pub z: Option<Word>,
    pub l: Vec<Word>,
    /// New fractions in the order they are filled.
    pub new_fractions: Vec<LeftFraction>,
}

/// Plan for extending from `W_{≤w}` to `W_{≤s}` in a free semigroup.
pub fn semigroup_step_plan(spec: &GroupSpec, w: &Word) -> Result<StepPlan> {
    if !matches!(spec, GroupSpec::FreeSemigroup { .. }) {
        return Err(Error::SpecMismatch("semigroup step needs a free semigroup".into()));
    }
    let s = spec.successor(w)?;
    let s1 = s.first();
    let f0: Vec<Word> = spec.enumerate_upto(w)?.into_iter().filter(|t| t.is_empty() || t.first() != s1).collect();
    let new_fractions = f0.iter().map(|t| spec.fraction_unchecked(t, &s)).collect();
    Ok(StepPlan { w: w.clone(), s, f0, z: None, l: Vec::new(), new_fractions })
}

/// Plan for extending from `W_{≤w}` to `W_{≤s}` in `Z₂^{*g}`, `g ≥ 2`.
pub fn z2_step_plan(spec: &GroupSpec, w: &Word) -> Result<StepPlan> {
    if !spec.is_z2_product() {
        return Err(Error::SpecMismatch("Z2 step needs a free product of copies of Z2".into()));
    }
    if spec.rank() < 2 {
        return Err(Error::Unsupported("Z2 has only two elements; there is nothing to extend".into()));
    }
    let s = spec.successor(w)?;
    let j = s.letters()[0];
    let z = Word::from_letters(s.letters()[1..].to_vec());
    let below_z = spec.enumerate_upto(&z)?;
    let mut l: BTreeSet<Word> = below_z.iter().cloned().collect();
    for u in &below_z {
        let mut letters = vec![j];
        letters.extend_from_slice(u.letters());
        l.insert(spec.reduce(&letters)?);
    }
    let f0: Vec<Word> = spec.enumerate_upto(&s)?.into_iter().filter(|t| !l.contains(t)).collect();
    let mut new_fractions = vec![spec.fraction_unchecked(&z, &s)];
    new_fractions.extend(f0.iter().map(|t| spec.fraction_unchecked(t, &s)));
    Ok(StepPlan { w: w.clone(), s, f0, z: Some(z), l: l.into_iter().collect(), new_fractions })
}

struct Fill {
    a: Vec<Word>,
    blocks: Vec<(LeftFraction, CMat)>,
}

// One Parrott application on `index ∪ {new}`: the words whose fraction with
// `new` is unknown form the A part, the rest of `index` the B part.
fn parrott_fill(
    kernel: &PartialKernel,
    entries: &BTreeMap<LeftFraction, Vec<CMat>>,
    index: &[Word],
    new: &Word,
    tol: f64,
) -> Result<Fill> {
    let spec = &kernel.spec;
    let bsz = kernel.g_order * kernel.k;
    let (a, b): (Vec<Word>, Vec<Word>) = index
        .iter()
        .filter(|t| *t != new)
        .cloned()
        .partition(|t| !entries.contains_key(&spec.fraction_unchecked(t, new)));
    let get = |u: &Word, v: &Word| -> Result<CMat> {
        let f = spec.fraction_unchecked(u, v);
        entries.get(&f).map(|vals| circulant(vals, kernel.k)).ok_or_else(|| Error::MissingEntry(f.to_string()))
    };
    let grid = |rows: &[Word], cols: &[Word]| -> Result<CMat> {
        let mut m = CMat::zeros(rows.len() * bsz, cols.len() * bsz);
        for (i, u) in rows.iter().enumerate() {
            for (j, v) in cols.iter().enumerate() {
                m.view_mut((i * bsz, j * bsz), (bsz, bsz)).copy_from(&get(u, v)?);
            }
        }
        Ok(m)
    };
    if a.is_empty() {
        return Ok(Fill { a, blocks: Vec::new() });
    }
    let c_idx = [new.clone()];
    let x = parrott_complete_invariant(
        &grid(&a, &a)?,
        &grid(&a, &b)?,
        &grid(&b, &b)?,
        &grid(&b, &c_idx)?,
        &grid(&c_idx, &c_idx)?,
        kernel.g_order,
        kernel.k,
        tol,
    )?;
    let blocks = a
        .iter()
        .enumerate()
        .map(|(i, t)| (spec.fraction_unchecked(t, new), x.view((i * bsz, 0), (bsz, bsz)).into_owned()))
        .collect();
    Ok(Fill { a, blocks })
}

fn store(
    spec: &GroupSpec,
    entries: &mut BTreeMap<LeftFraction, Vec<CMat>>,
    f: LeftFraction,
    vals: Vec<CMat>,
) -> Result<()> {
    let inv = spec.invert_fraction(&f);
    if inv == f || entries.contains_key(&f) || entries.contains_key(&inv) {
        return Err(Error::Inconsistent(format!("fraction {f} would be filled twice")));
    }
    entries.insert(inv, inverse_entries(&vals));
    entries.insert(f, vals);
    Ok(())
}

fn ensure_plan(plan: &StepPlan, fill: &Fill) -> Result<()> {
    if fill.a != plan.f0 {
        return Err(Error::Inconsistent(format!(
            "unknown cross entries {:?} differ from the planned set {:?}",
            fill.a.iter().map(Word::to_string).collect::<Vec<_>>(),
            plan.f0.iter().map(Word::to_string).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Extends a psd kernel on `Her W_{≤w}` of a free semigroup to
/// `Her W_{≤s}`, `s` the successor of `w`.
pub fn extend_one_step_semigroup(kernel: &PartialKernel) -> Result<PartialKernel> {
    extend_one_step_semigroup_tol(kernel, DEFAULT_PSD_TOL)
}

pub fn extend_one_step_semigroup_tol(kernel: &PartialKernel, tol: f64) -> Result<PartialKernel> {
    let plan = semigroup_step_plan(&kernel.spec, &kernel.w_max)?;
    kernel.ensure_psd(tol)?;
    let index = kernel.spec.enumerate_upto(&plan.s)?;
    let mut entries = kernel.entries.clone();
    let fill = parrott_fill(kernel, &entries, &index, &plan.s, tol)?;
    ensure_plan(&plan, &fill)?;
    for (f, blk) in fill.blocks {
        let (vals, _) = decirculant(&blk, kernel.g_order, kernel.k);
        store(&kernel.spec, &mut entries, f, vals)?;
    }
    Ok(PartialKernel { w_max: plan.s, entries, ..kernel.clone() })
}

/// Extends a psd kernel on `Her W_{≤w}` of `Z₂^{*g}` to `Her W_{≤s}`.
///
/// Writing `s = x_j z`: the single new fraction `z⁻¹x_j z` is filled by a
/// Parrott step on `L = W_{≤z} ∪ x_j W_{≤z}` and then symmetrized under
/// `u ↦ x_j u`, after which the fractions `t⁻¹s`, `t ∈ W_{≤s} \ L`, are
/// filled by a second Parrott step.
pub fn extend_one_step_z2(kernel: &PartialKernel) -> Result<PartialKernel> {
    extend_one_step_z2_tol(kernel, DEFAULT_PSD_TOL)
}

pub fn extend_one_step_z2_tol(kernel: &PartialKernel, tol: f64) -> Result<PartialKernel> {
    let plan = z2_step_plan(&kernel.spec, &kernel.w_max)?;
    kernel.ensure_psd(tol)?;
    let z = plan.z.clone().expect("z2 plan");
    let (n, k) = (kernel.g_order, kernel.k);
    let mut entries = kernel.entries.clone();

    let fill = parrott_fill(kernel, &entries, &plan.l, &plan.s, tol)?;
    if fill.a != [z.clone()] {
        return Err(Error::Inconsistent(format!("expected {z} to be the only unknown on L")));
    }
    let (f, blk) = fill.blocks.into_iter().next().expect("one block");
    if f != kernel.spec.invert_fraction(&f) || entries.contains_key(&f) {
        return Err(Error::Inconsistent(format!("{f} should be a new involution")));
    }
    // (R + R')/2, with R' the completion transported by u ↦ x_j u
    let (raw, _) = decirculant(&blk, n, k);
    let swapped = inverse_entries(&raw);
    let sym: Vec<CMat> = raw.iter().zip(&swapped).map(|(a, b)| (a + b) * cr(0.5)).collect();
    entries.insert(f, sym);

    let index = kernel.spec.enumerate_upto(&plan.s)?;
    let fill = parrott_fill(kernel, &entries, &index, &plan.s, tol)?;
    ensure_plan(&plan, &fill)?;
    for (f, blk) in fill.blocks {
        let (vals, _) = decirculant(&blk, n, k);
        store(&kernel.spec, &mut entries, f, vals)?;
    }
    Ok(PartialKernel { w_max: plan.s, entries, ..kernel.clone() })
}

/// How far [`extend_to`] should go.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendTarget {
    Word(Word),
    /// Cover every word of this length.
    Length(usize),
}

/// Repeats one-step extensions until the target is covered.
pub fn extend_to(kernel: &PartialKernel, target: &ExtendTarget, max_steps: usize) -> Result<PartialKernel> {
    extend_to_with(kernel, target, max_steps, DEFAULT_PSD_TOL, |_| {})
}

/// As [`extend_to`], calling `observe` on every intermediate kernel.
pub fn extend_to_with(
    kernel: &PartialKernel,
    target: &ExtendTarget,
    max_steps: usize,
    tol: f64,
    mut observe: impl FnMut(&PartialKernel),
) -> Result<PartialKernel> {
    let spec = &kernel.spec;
    let goal = match target {
        ExtendTarget::Word(w) => {
            if !spec.is_reduced(w) {
                return Err(Error::InvalidInput(format!("{w} is not reduced")));
            }
            w.clone()
        }
        ExtendTarget::Length(n) => {
            spec.last_word_of_length(*n).ok_or_else(|| Error::Unsupported(format!("no word of length {n}")))?
        }
    };
    let step: fn(&PartialKernel, f64) -> Result<PartialKernel> = match spec {
        GroupSpec::FreeSemigroup { .. } => extend_one_step_semigroup_tol,
        _ if spec.is_z2_product() => extend_one_step_z2_tol,
        _ => {
            return Err(Error::Unsupported(
                "successor-step completion is available for free semigroups and Z2 free products".into(),
            ))
        }
    };
    let mut current = kernel.clone();
    let mut steps = 0;
    while current.w_max < goal {
        if steps == max_steps {
            return Err(Error::StepCapExceeded(max_steps));
        }
        current = step(&current, tol)?;
        observe(&current);
        steps += 1;
    }
    Ok(current)
}

/// A psd kernel `p(α, g) = V*·π(α)·ρ(g)·V` built from random unitaries:
/// Haar generators (involutions for `Z₂` factors), a random order-`n`
/// unitary `ρ` commuting with them, and a random isometry `V`. The model
/// dimension is `dim·n`.
pub fn random_psd_kernel(
    spec: &GroupSpec,
    g_order: usize,
    w_max: &Word,
    k: usize,
    dim: usize,
    rng: &mut impl Rng,
) -> Result<PartialKernel> {
    if dim == 0 || g_order == 0 {
        return Err(Error::InvalidInput("dimension and group order must be positive".into()));
    }
    let total = dim * g_order;
    if total < k {
        return Err(Error::InvalidInput("model dimension is smaller than the block size".into()));
    }
    let gens: Vec<CMat> = crate::repsys::random_generators(spec, dim, rng)
        .iter()
        .map(|u| linalg::kron(u, &linalg::identity(g_order)))
        .collect();
    let shift = crate::repsys::random_cyclic_unitary(g_order, g_order, rng);
    let rho = linalg::kron(&linalg::identity(dim), &shift);
    let iso = linalg::random_isometry(total, k, rng);
    let ordered =
        |w: &Word| -> CMat { w.letters().iter().fold(linalg::identity(total), |acc, &l| acc * &gens[l as usize - 1]) };
    let mut rho_pows = vec![linalg::identity(total)];
    for g in 1..g_order {
        rho_pows.push(&rho_pows[g - 1] * &rho);
    }
    let mut kernel = PartialKernel::from_fn(spec.clone(), g_order, w_max.clone(), k, |f, g| {
        let m = ordered(&f.den).adjoint() * ordered(&f.num) * &rho_pows[g];
        iso.adjoint() * m * &iso
    })?;
    // store p(α⁻¹, −g) as the exact adjoint of p(α, g)
    let keys: Vec<LeftFraction> = kernel.entries.keys().cloned().collect();
    for f in keys {
        let inv = spec.invert_fraction(&f);
        if inv < f {
            continue;
        }
        for g in 0..g_order {
            let neg = (g_order - g) % g_order;
            if inv == f && neg < g {
                continue;
            }
            let current = &kernel.entries[&f][g];
            let value = if inv == f && neg == g { linalg::hermitian_part(current) } else { current.adjoint() };
            kernel.entries.get_mut(&inv).expect("fraction sets are inversion-closed")[neg] = value;
        }
    }
    Ok(kernel)
}
