//! JSON interchange. Complex matrices are `{"re": rows, "im": rows}`;
//! floats are written with 17 significant digits so output is byte-stable
//! and re-parses to the same values.

use std::collections::BTreeMap;
use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::gallery::{ChshReport, Conclusion, CounterexampleReport, ScanPoint, SeparationOutcome};
use crate::kernels::PartialKernel;
use crate::linalg::{c, CMat};
use crate::repsys::SampleBound;
use crate::soscert::{GramCertificate, NcPoly};
use crate::words::{Element, GroupSpec, LeftFraction, Monomial, ProductElement, ProductSpec, Word};

struct FixedFloat<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with fixed-precision floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloat(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Parses JSON, reporting the path of the first schema violation.
pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Schema { path: e.path().to_string(), message: e.inner().to_string() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let rows = |f: fn(&crate::linalg::C64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        MatrixJson { re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let r = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        let rectangular = |rows: &[Vec<f64>]| rows.len() == r && rows.iter().all(|row| row.len() == cols);
        if !rectangular(&self.re) || !rectangular(&self.im) {
            return Err(Error::InvalidInput("\"re\" and \"im\" must be rectangular arrays of one shape".into()));
        }
        Ok(CMat::from_fn(r, cols, |i, j| c(self.re[i][j], self.im[i][j])))
    }

    fn to_shaped(&self, rows: usize, cols: usize, what: &str) -> Result<CMat> {
        let m = self.to_matrix()?;
        if m.shape() != (rows, cols) {
            return Err(Error::InvalidInput(format!("{what} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols())));
        }
        Ok(m)
    }
}

/// `den⁻¹·num`; `den` may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionJson {
    #[serde(default)]
    pub den: Word,
    pub num: Word,
}

impl FractionJson {
    pub fn from_fraction(f: &LeftFraction) -> Self {
        FractionJson { den: f.den.clone(), num: f.num.clone() }
    }

    /// The fraction, which must already be in normal form for `spec`.
    pub fn to_fraction(&self, spec: &GroupSpec) -> Result<LeftFraction> {
        let f = LeftFraction { den: self.den.clone(), num: self.num.clone() };
        if spec.fraction(&f.den, &f.num)? != f {
            return Err(Error::InvalidInput(format!("fraction {f} is not in normal form")));
        }
        Ok(f)
    }
}

fn element_to_json(a: &Element) -> Vec<i64> {
    match a {
        Element::Word(w) => w.letters().iter().map(|&l| i64::from(l)).collect(),
        Element::Lattice(v) => v.clone(),
    }
}

/// Reads a `Y` part: letters for word groups, exponents for `Z^h`.
fn element_from_json(spec: &ProductSpec, v: &[i64]) -> Result<Element> {
    let a = match &spec.y {
        None if v.is_empty() => return Ok(Element::trivial()),
        None => return Err(Error::SpecMismatch("Y is trivial but a y-part was given".into())),
        Some(GroupSpec::FreeAbelian { .. }) => Element::Lattice(v.to_vec()),
        Some(_) => Element::Word(Word::from_letters(
            v.iter()
                .map(|&l| {
                    u32::try_from(l).map_err(|_| Error::InvalidInput(format!("letter {l} is not a generator index")))
                })
                .collect::<Result<_>>()?,
        )),
    };
    spec.y.as_ref().expect("handled above").check_element(&a)?;
    Ok(a)
}

/// One coefficient `A_g` at `g = (w_den⁻¹·w_num, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    #[serde(default)]
    pub w_den: Word,
    #[serde(default)]
    pub w_num: Word,
    #[serde(default)]
    pub y: Vec<i64>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TermJson {
    fn matrix(&self) -> MatrixJson {
        MatrixJson { re: self.re.clone(), im: self.im.clone() }
    }
}

/// Coefficients are `rows × K`; `rows` is written only when it differs from `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyJson {
    pub group: ProductSpec,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    pub terms: Vec<TermJson>,
}

impl PolyJson {
    pub fn from_poly(p: &NcPoly) -> Self {
        let (rows, cols) = p.shape();
        PolyJson {
            group: p.spec().clone(),
            k: cols,
            rows: (rows != cols).then_some(rows),
            terms: p
                .terms()
                .iter()
                .map(|(g, a)| {
                    let m = MatrixJson::from_matrix(a);
                    TermJson {
                        w_den: g.w.den.clone(),
                        w_num: g.w.num.clone(),
                        y: element_to_json(&g.y),
                        re: m.re,
                        im: m.im,
                    }
                })
                .collect(),
        }
    }

    pub fn to_poly(&self) -> Result<NcPoly> {
        let spec = ProductSpec::new(self.group.w.clone(), self.group.y.clone())?;
        let rows = self.rows.unwrap_or(self.k);
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let w = FractionJson { den: t.w_den.clone(), num: t.w_num.clone() }.to_fraction(&spec.w)?;
                let g = ProductElement { w, y: element_from_json(&spec, &t.y)? };
                Ok((g, t.matrix().to_shaped(rows, self.k, "coefficient")?))
            })
            .collect::<Result<Vec<_>>>()?;
        NcPoly::from_terms(spec, rows, self.k, terms)
    }
}

/// The value at `(den⁻¹·num, g)` with `g ∈ Z_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntryJson {
    #[serde(default)]
    pub den: Word,
    #[serde(default)]
    pub num: Word,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// `g_order` is the order `n` of the finite group `Z_n`; omitted when 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    pub group: GroupSpec,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub g_order: usize,
    pub w_max: Word,
    #[serde(rename = "K")]
    pub k: usize,
    pub entries: Vec<KernelEntryJson>,
}

fn one() -> usize {
    1
}

fn is_one(n: &usize) -> bool {
    *n == 1
}

impl KernelJson {
    pub fn from_kernel(kernel: &PartialKernel) -> Self {
        let n = kernel.g_order();
        let entries = kernel
            .entries()
            .iter()
            .flat_map(|(f, vals)| {
                vals.iter().enumerate().map(move |(g, v)| {
                    let m = MatrixJson::from_matrix(v);
                    KernelEntryJson {
                        den: f.den.clone(),
                        num: f.num.clone(),
                        g: (n > 1).then_some(g),
                        re: m.re,
                        im: m.im,
                    }
                })
            })
            .collect();
        KernelJson { group: kernel.spec().clone(), g_order: n, w_max: kernel.w_max().clone(), k: kernel.k(), entries }
    }

    pub fn to_kernel(&self) -> Result<PartialKernel> {
        self.group.validate()?;
        let n = self.g_order;
        if n == 0 {
            return Err(Error::InvalidInput("g_order must be positive".into()));
        }
        let mut slots: BTreeMap<LeftFraction, Vec<Option<CMat>>> = BTreeMap::new();
        for e in &self.entries {
            let f = FractionJson { den: e.den.clone(), num: e.num.clone() }.to_fraction(&self.group)?;
            let g = e.g.unwrap_or(0);
            if g >= n {
                return Err(Error::InvalidInput(format!("g = {g} is outside Z_{n}")));
            }
            let m = MatrixJson { re: e.re.clone(), im: e.im.clone() }.to_shaped(self.k, self.k, "kernel value")?;
            let slot = &mut slots.entry(f.clone()).or_insert_with(|| vec![None; n])[g];
            if slot.replace(m).is_some() {
                return Err(Error::InvalidInput(format!("entry ({f}, {g}) listed twice")));
            }
        }
        let entries = slots
            .into_iter()
            .map(|(f, vals)| {
                let vals = vals
                    .into_iter()
                    .enumerate()
                    .map(|(g, v)| v.ok_or_else(|| Error::MissingEntry(format!("{f} at g = {g}"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok((f, vals))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        PartialKernel::new(self.group.clone(), n, self.w_max.clone(), self.k, entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialJson {
    pub w: Word,
    #[serde(default)]
    pub y: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateJson {
    pub group: ProductSpec,
    /// `W` degree of the factor.
    pub w: Word,
    pub y_degree: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub rank: usize,
    pub monomials: Vec<MonomialJson>,
    /// `B_m` for each monomial, in the same order; each `rank × k`.
    #[serde(rename = "B_terms")]
    pub b_terms: Vec<MatrixJson>,
    pub gram: MatrixJson,
    pub residual: f64,
    pub affine_residual: f64,
    pub gram_min_eig: f64,
    pub iterations: usize,
}

impl CertificateJson {
    pub fn from_certificate(cert: &GramCertificate) -> Self {
        CertificateJson {
            group: cert.spec.clone(),
            w: cert.w.clone(),
            y_degree: cert.m_prime,
            k: cert.k,
            rank: cert.rank,
            monomials: cert
                .monomials
                .iter()
                .map(|m| MonomialJson { w: m.w.clone(), y: element_to_json(&m.y) })
                .collect(),
            b_terms: cert.b_terms.iter().map(|(_, b)| MatrixJson::from_matrix(b)).collect(),
            gram: MatrixJson::from_matrix(&cert.z),
            residual: cert.residual,
            affine_residual: cert.affine_residual,
            gram_min_eig: cert.gram_min_eig,
            iterations: cert.iterations,
        }
    }

    /// The monomials, checked to lie in `W_{≤w} × Y_{≤y_degree}`.
    pub fn monomials(&self) -> Result<Vec<Monomial>> {
        let allowed = self.group.monomials(&self.w, self.y_degree)?;
        self.monomials
            .iter()
            .map(|m| {
                let mono = Monomial { w: m.w.clone(), y: element_from_json(&self.group, &m.y)? };
                if !allowed.contains(&mono) {
                    return Err(Error::InvalidInput(format!(
                        "monomial {mono} lies outside the bidegree ({}, {})",
                        self.w, self.y_degree
                    )));
                }
                Ok(mono)
            })
            .collect()
    }

    /// `B = Σ_m B_m·m`.
    pub fn factor(&self) -> Result<NcPoly> {
        let monos = self.monomials()?;
        if monos.len() != self.b_terms.len() {
            return Err(Error::InvalidInput("\"B_terms\" and \"monomials\" differ in length".into()));
        }
        let terms = monos
            .into_iter()
            .zip(&self.b_terms)
            .map(|(m, b)| Ok((m, b.to_shaped(self.rank, self.k, "B term")?)))
            .collect::<Result<Vec<_>>>()?;
        NcPoly::from_monomials(self.group.clone(), self.rank, self.k, terms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanPointJson {
    /// `[re, im]`.
    pub z: [f64; 2],
    pub min_eig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleJson {
    pub name: String,
    pub base_labels: Vec<String>,
    pub base_matrix: MatrixJson,
    pub base_min_eig: f64,
    pub extended_labels: Vec<String>,
    pub free_entries: Vec<String>,
    pub forced_labels: Vec<String>,
    pub forced_matrix: MatrixJson,
    pub forced_det: f64,
    pub forced_min_eig: f64,
    pub z_scan: Vec<ScanPointJson>,
    pub conclusion: Conclusion,
}

impl CounterexampleJson {
    pub fn from_report(r: &CounterexampleReport) -> Self {
        CounterexampleJson {
            name: r.name.clone(),
            base_labels: r.base_labels.clone(),
            base_matrix: MatrixJson::from_matrix(&r.base_matrix),
            base_min_eig: r.base_min_eig,
            extended_labels: r.extended_labels.clone(),
            free_entries: r.free_entries.clone(),
            forced_labels: r.forced_labels.clone(),
            forced_matrix: MatrixJson::from_matrix(&r.forced_matrix),
            forced_det: r.forced_det,
            forced_min_eig: r.forced_min_eig,
            z_scan: r
                .z_scan
                .iter()
                .map(|&ScanPoint { z, min_eig }| ScanPointJson { z: [z.re, z.im], min_eig })
                .collect(),
            conclusion: r.conclusion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshJson {
    pub certificate: CertificateJson,
    pub closed_form_residual: f64,
    pub closed_form_rank: usize,
    pub sampled: SampleBound,
    pub tsirelson_min_eig: f64,
}

impl ChshJson {
    pub fn from_report(r: &ChshReport) -> Self {
        ChshJson {
            certificate: CertificateJson::from_certificate(&r.certificate),
            closed_form_residual: r.closed_form_residual,
            closed_form_rank: r.closed_form_rank,
            sampled: r.sampled,
            tsirelson_min_eig: r.tsirelson_min_eig,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationJson {
    pub found: bool,
    /// Labelled as evidence: positivity is checked on samples only.
    pub evidence: String,
    #[serde(default)]
    pub pairing: Option<f64>,
    #[serde(default)]
    pub sampled_min_eig: Option<f64>,
    #[serde(default)]
    pub representations_checked: Option<usize>,
    pub rounds: usize,
    #[serde(default)]
    pub corroborated: Option<bool>,
    #[serde(default)]
    pub poly: Option<PolyJson>,
}

impl SeparationJson {
    pub fn from_outcome(out: &SeparationOutcome) -> Self {
        match out {
            SeparationOutcome::Found(s) => SeparationJson {
                found: true,
                evidence: "sampled".into(),
                pairing: Some(s.pairing),
                sampled_min_eig: Some(s.sampled_min_eig),
                representations_checked: Some(s.representations_checked),
                rounds: s.rounds,
                corroborated: s.corroborated,
                poly: Some(PolyJson::from_poly(&s.poly)),
            },
            SeparationOutcome::NotFound { best_pairing, rounds } => SeparationJson {
                found: false,
                evidence: "sampled".into(),
                pairing: *best_pairing,
                sampled_min_eig: None,
                representations_checked: None,
                rounds: *rounds,
                corroborated: None,
                poly: None,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::linalg;
    use crate::soscert::{certify, CertifyOptions};

    fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(v: &T) {
        let s = to_json_string(v).unwrap();
        let back: T = from_json_str(&s).unwrap();
        assert_eq!(&back, v);
        assert_eq!(to_json_string(&back).unwrap(), s);
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_json_string(&vec![0.1, -2.0 / 3.0, 1e-300, 0.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("-6.6666666666666663e-1"));
        let back: Vec<f64> = from_json_str(&s).unwrap();
        assert_eq!(back, vec![0.1, -2.0 / 3.0, 1e-300, 0.0]);
    }

    #[test]
    fn poly_kernel_and_certificate_round_trip() {
        let target = gallery::chsh_target();
        let pj = PolyJson::from_poly(&target);
        round_trip(&pj);
        assert_eq!(pj.to_poly().unwrap(), target);

        let kernel = gallery::z3z2_kernel().unwrap();
        let kj = KernelJson::from_kernel(&kernel);
        round_trip(&kj);
        assert_eq!(kj.to_kernel().unwrap(), kernel);

        let a = crate::soscert::NcPoly::identity(crate::soscert::z2_spec(2), 1);
        let cert = certify(&a, &CertifyOptions::default()).unwrap();
        let cj = CertificateJson::from_certificate(cert.certificate().unwrap());
        round_trip(&cj);
        assert_eq!(cj.factor().unwrap(), cert.certificate().unwrap().factor().unwrap());
    }

    #[test]
    fn abelian_y_parts_are_exponents() {
        let spec = crate::soscert::y_only(GroupSpec::free_abelian(2));
        let mut p = NcPoly::identity(spec.clone(), 1);
        p.add_term(
            ProductElement { w: LeftFraction::identity(), y: Element::Lattice(vec![1, -2]) },
            linalg::identity(1),
        )
        .unwrap();
        let pj = PolyJson::from_poly(&p);
        assert!(pj.terms.iter().any(|t| t.y == vec![1, -2]));
        assert_eq!(pj.to_poly().unwrap(), p);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad = r#"{"group": {"w": {"family": "free_product_cyclic", "rank": 2}}, "K": 1,
                      "terms": [{"w_num": [1], "re": [[1.0]], "im": "x"}]}"#;
        match from_json_str::<PolyJson>(bad) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "terms[0].im"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_normal_fractions_are_rejected() {
        let spec = GroupSpec::z2_free_product(2);
        let f = FractionJson { den: Word::empty(), num: Word::from_letters(vec![1, 1]) };
        assert!(f.to_fraction(&spec).is_err());
        let semi = GroupSpec::free_semigroup(2);
        let f = FractionJson { den: Word::from_letters(vec![1]), num: Word::from_letters(vec![1, 2]) };
        assert!(f.to_fraction(&semi).is_err());
    }
}
