use ncfr::io::{self, CertificateJson, KernelJson, PolyJson};
use ncfr::kernels::{self, ExtendTarget, PartialKernel};
use ncfr::linalg::{self, CMat};
use ncfr::repsys::{self, evaluate, sample_representation};
use ncfr::soscert::{self, convolve_adjoint, gram_constraints, CertifyOptions, NcPoly};
use ncfr::words::{GroupSpec, ProductSpec, Word};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn w(letters: &[u32]) -> Word {
    Word::from_letters(letters.to_vec())
}

fn scale(m: &CMat) -> f64 {
    1.0 + linalg::spectral_norm(m)
}

/// A psd matrix of rank at most `rank`.
fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = linalg::random_gaussian(n, rank, rng);
    &g * g.adjoint()
}

fn random_analytic(spec: &ProductSpec, top: &Word, m: usize, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> NcPoly {
    let monos = spec.monomials(top, m).unwrap();
    NcPoly::from_monomials(
        spec.clone(),
        rows,
        cols,
        monos.into_iter().map(|mono| (mono, linalg::random_gaussian(rows, cols, rng))),
    )
    .unwrap()
}

fn z2_with_line(g: usize) -> ProductSpec {
    ProductSpec::new(GroupSpec::z2_free_product(g), Some(GroupSpec::free_abelian(1))).unwrap()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn parrott_fill_is_psd_in_range_and_contractive(
        sizes in (1usize..=4, 1usize..=4, 1usize..=4),
        rank in 1usize..=12,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q, r) = sizes;
        let full = random_psd(p + q + r, rank, &mut rng);
        let a = full.view((0, 0), (p, p)).into_owned();
        let e = full.view((0, p), (p, q)).into_owned();
        let b = full.view((p, p), (q, q)).into_owned();
        let f = full.view((p, p + q), (q, r)).into_owned();
        let c = full.view((p + q, p + q), (r, r)).into_owned();
        let x = kernels::parrott_complete(&a, &e, &b, &f, &c).unwrap();
        let completed = linalg::block_matrix(&[
            vec![a.clone(), e.clone(), x.clone()],
            vec![e.adjoint(), b.clone(), f.clone()],
            vec![x.adjoint(), f.adjoint(), c.clone()],
        ]);
        prop_assert!(linalg::min_eigenvalue(&completed) >= -1e-8 * scale(&completed));
        prop_assert!(linalg::max_abs(&(&e * linalg::pinv(&b) * &b - &e)) <= 1e-9 * scale(&full));
        let contraction = linalg::psd_pinv_sqrt(&a) * &e * linalg::psd_pinv_sqrt(&b);
        prop_assert!(linalg::spectral_norm(&contraction) <= 1.0 + 1e-8);
    }
}

/// `(i, g)`-indexed Gram matrix of `ρ(g)·φ_i`, which commutes with
/// translation in `Z_n`.
fn invariant_gram(phis: &[CMat], rho: &CMat, n: usize) -> CMat {
    let k = phis[0].ncols();
    let mut powers = vec![linalg::identity(rho.nrows())];
    for g in 1..n {
        powers.push(&powers[g - 1] * rho);
    }
    let vecs: Vec<CMat> = phis.iter().flat_map(|phi| powers.iter().map(move |p| p * phi)).collect();
    let size = vecs.len() * k;
    let mut m = CMat::zeros(size, size);
    for (i, u) in vecs.iter().enumerate() {
        for (j, v) in vecs.iter().enumerate() {
            m.view_mut((i * k, j * k), (k, k)).copy_from(&(u.adjoint() * v));
        }
    }
    m
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn invariant_parrott_keeps_the_group_action(
        n in 1usize..=3,
        counts in (1usize..=2, 1usize..=2, 1usize..=2),
        k in 1usize..=2,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let u = linalg::haar_unitary(d, &mut rng);
        let phases = CMat::from_fn(d, d, |i, j| {
            if i == j {
                let t = 2.0 * std::f64::consts::PI * (rng.random_range(0..n) as f64) / n as f64;
                linalg::c(t.cos(), t.sin())
            } else {
                linalg::cr(0.0)
            }
        });
        let rho = &u * phases * u.adjoint();
        let (p, q, r) = counts;
        let phis: Vec<CMat> = (0..p + q + r).map(|_| linalg::random_gaussian(d, k, &mut rng)).collect();
        let full = invariant_gram(&phis, &rho, n);
        let (sp, sq, sr) = (p * n * k, q * n * k, r * n * k);
        let blk = |r0: usize, c0: usize, h: usize, wd: usize| full.view((r0, c0), (h, wd)).into_owned();
        let x = kernels::parrott_complete_invariant(
            &blk(0, 0, sp, sp),
            &blk(0, sp, sp, sq),
            &blk(sp, sp, sq, sq),
            &blk(sp, sp + sq, sq, sr),
            &blk(sp + sq, sp + sq, sr, sr),
            n,
            k,
            1e-9,
        ).unwrap();
        prop_assert!(kernels::translation_residual(&x, n, k) <= 1e-8 * scale(&full));
        let mut completed = full.clone();
        completed.view_mut((0, sp + sq), (sp, sr)).copy_from(&x);
        completed.view_mut((sp + sq, 0), (sr, sp)).copy_from(&x.adjoint());
        prop_assert!(linalg::min_eigenvalue(&completed) >= -1e-8 * scale(&completed));
    }

    #[test]
    fn successor_steps_restrict_exactly_and_stay_psd(
        z2 in any::<bool>(),
        g in 2usize..=3,
        k in 1usize..=2,
        dim in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let spec = if z2 { GroupSpec::z2_free_product(g) } else { GroupSpec::free_semigroup(g) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = w(&[g as u32]);
        let kern = kernels::random_psd_kernel(&spec, 1, &start, k, dim, &mut rng).unwrap();
        let mut prev = kern.clone();
        let mut target = start.clone();
        for _ in 0..4 {
            target = spec.successor(&target).unwrap();
        }
        let mut steps = 0;
        kernels::extend_to_with(&kern, &ExtendTarget::Word(target), 10, 1e-9, |next| {
            assert_eq!(next.restrict(prev.w_max()).unwrap(), prev);
            let form = next.assemble().unwrap();
            let lmin = linalg::min_eigenvalue(&form.matrix);
            assert!(lmin >= -1e-8 * scale(&form.matrix), "{} {lmin:e}", next.w_max());
            if z2 {
                for (f, vals) in next.entries() {
                    let inv = next.entry(&spec.invert_fraction(f)).unwrap();
                    assert_eq!(inv[0], vals[0].adjoint(), "{f}");
                }
            }
            prev = next.clone();
            steps += 1;
        }).unwrap();
        prop_assert_eq!(steps, 4);
    }

    #[test]
    fn evaluation_is_multiplicative_and_respects_adjoints(
        g in 1usize..=2,
        dim in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let spec = z2_with_line(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = spec.w.last_word_of_length(g.min(2)).unwrap();
        let p = random_analytic(&spec, &top, 1, 2, 2, &mut rng);
        let q = random_analytic(&spec, &top, 2, 2, 2, &mut rng);
        let rep = sample_representation(&spec, dim, seed).unwrap();
        rep.check(1e-10).unwrap();
        let (vp, vq) = (evaluate(&p, &rep).unwrap(), evaluate(&q, &rep).unwrap());
        let pq = evaluate(&p.mul(&q).unwrap(), &rep).unwrap();
        prop_assert!(linalg::max_abs(&(&pq - &vp * &vq)) <= 1e-9 * (1.0 + linalg::max_abs(&pq)));
        prop_assert!(linalg::max_abs(&(evaluate(&p.adjoint(), &rep).unwrap() - vp.adjoint())) <= 1e-12 * (1.0 + linalg::max_abs(&vp)));
        let bb = evaluate(&convolve_adjoint(&q).unwrap(), &rep).unwrap();
        prop_assert!(linalg::min_eigenvalue(&bb) >= -1e-9 * scale(&bb));
    }

    #[test]
    fn unitary_dilation_is_unitary_with_matching_corner(n in 1usize..=5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = linalg::haar_unitary(n, &mut rng);
        let u = repsys::unitary_dilation(&v).unwrap();
        prop_assert!(linalg::unitarity_residual(&u) <= 1e-10);
        let (mut up, mut vp) = (u.clone(), v.clone());
        for _ in 1..=3 {
            prop_assert!(linalg::max_abs(&(up.view((0, 0), (n, n)).into_owned() - &vp)) <= 1e-10);
            up = &up * &u;
            vp = &vp * &v;
        }
    }

    #[test]
    fn gns_reproduces_kernels_of_representations(
        z2 in any::<bool>(),
        level in 1usize..=3,
        k in 1usize..=2,
        dim in 2usize..=8,
        seed in any::<u64>(),
    ) {
        let spec = if z2 { GroupSpec::z2_free_product(2) } else { GroupSpec::free_semigroup(2) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = spec.last_word_of_length(level).unwrap();
        let kern = kernels::random_psd_kernel(&spec, 1, &top, k, dim, &mut rng).unwrap();
        let model = repsys::gns_from_kernel(&kern, level).unwrap();
        for u in &model.unitaries {
            prop_assert!(linalg::unitarity_residual(u) <= 1e-10);
        }
        let inner = match level - 1 {
            0 => Word::empty(),
            l => spec.last_word_of_length(l).unwrap(),
        };
        for f in spec.left_fraction_set(&inner).unwrap() {
            let err = linalg::max_abs(&(model.compress(&f) - &kern.entry(&f).unwrap()[0]));
            prop_assert!(err <= 1e-8, "{} {}", f, err);
        }
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn gram_cosets_partition_and_certificates_round_trip(
        g in 1usize..=2,
        len in 0usize..=2,
        m in 0usize..=2,
        k in 1usize..=2,
        seed in any::<u64>(),
    ) {
        let spec = z2_with_line(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = match len.min(g) {
            0 => Word::empty(),
            l => spec.w.last_word_of_length(l).unwrap(),
        };
        let b0 = random_analytic(&spec, &top, m, k, k, &mut rng);
        let a = convolve_adjoint(&b0).unwrap();

        let sys = gram_constraints(&a, &top, m).unwrap();
        let n = sys.monomials.len();
        prop_assert_eq!(sys.cosets.iter().map(|c| c.pairs.len()).sum::<usize>(), n * n);
        let mut seen = vec![false; n * n];
        for c in &sys.cosets {
            for &(r, col) in &c.pairs {
                prop_assert!(!std::mem::replace(&mut seen[r * n + col], true));
            }
        }
        let mut z = linalg::random_gaussian(sys.dim(), sys.dim(), &mut rng);
        sys.project_affine(&mut z);
        let size = a.terms().values().map(linalg::max_abs).fold(1.0, f64::max);
        prop_assert!(sys.affine_residual(&z) <= 1e-13 * size);

        let opts = CertifyOptions { max_m_prime: m, ..Default::default() };
        let out = soscert::certify_at(&a, &top, m, &opts).unwrap();
        let cert = out.certificate().expect("round trip certifies");
        prop_assert_eq!(cert.m_prime, m);
        prop_assert!(cert.residual <= 10.0 * opts.rank_tol * cert.rank.max(1) as f64 * size);
        let allowed = spec.monomials(&top, m).unwrap();
        prop_assert!(cert.b_terms.iter().all(|(mono, _)| allowed.contains(mono)));
        let b = cert.factor().unwrap();
        prop_assert!(soscert::symbolic_residual(&a, &b).unwrap() <= 1e-7 * size);
        for i in 0..50u64 {
            let rep = sample_representation(&spec, 1 + i as usize % 6, repsys::trial_seed(seed, i)).unwrap();
            let vb = evaluate(&b, &rep).unwrap();
            let diff = evaluate(&a, &rep).unwrap() - vb.adjoint() * vb;
            prop_assert!(linalg::spectral_norm(&diff) <= 1e-6 * size);
        }

        let cj = CertificateJson::from_certificate(cert);
        let back: CertificateJson = io::from_json_str(&io::to_json_string(&cj).unwrap()).unwrap();
        prop_assert_eq!(&back, &cj);
        prop_assert_eq!(back.factor().unwrap(), b);
    }

    #[test]
    fn schemas_round_trip(g in 1usize..=2, k in 1usize..=2, g_order in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = z2_with_line(g);
        let top = spec.w.last_word_of_length(g.min(2)).unwrap();
        let p = convolve_adjoint(&random_analytic(&spec, &top, 1, k, k, &mut rng)).unwrap();
        let pj = PolyJson::from_poly(&p);
        let text = io::to_json_string(&pj).unwrap();
        let back: PolyJson = io::from_json_str(&text).unwrap();
        prop_assert_eq!(&back, &pj);
        prop_assert_eq!(io::to_json_string(&back).unwrap(), text);
        prop_assert_eq!(back.to_poly().unwrap(), p);

        let kspec = GroupSpec::z2_free_product(g.max(2));
        let kern = kernels::random_psd_kernel(&kspec, g_order, &w(&[2]), k, 3, &mut rng).unwrap();
        let kj = KernelJson::from_kernel(&kern);
        let text = io::to_json_string(&kj).unwrap();
        let back: KernelJson = io::from_json_str(&text).unwrap();
        prop_assert_eq!(io::to_json_string(&back).unwrap(), text);
        let parsed: PartialKernel = back.to_kernel().unwrap();
        prop_assert_eq!(parsed, kern);
    }
}
