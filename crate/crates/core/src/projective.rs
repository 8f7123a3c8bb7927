//! The projective tractor bundle over the flat background, modeled through
//! its identification with the orthogonal complement of a parallel scale
//! tractor.
//!
//! A projective tractor of rank one is a jet-like column `(σ, μ_b)` with a
//! top slot (index `0`) and a one-form block (indices `1..=n`).  The
//! canonical surjection `X̄^A` reads off the top slot.  Components here are
//! *trivialized*: they are ordinary rational functions carrying no density
//! weight, in contrast to [`MixedField`] components.
//!
//! For an Einstein scale `σ` with parallel scale tractor `I` and `ι = ⟨I,I⟩
//! ≠ 0`, the orthogonal complement `I^⊥` inside the standard tractor bundle
//! is isomorphic to the projective tractor bundle of the Levi-Civita
//! connection of `g = σ^{-2}𝐠`, slot by slot, and the isomorphism
//! intertwines the two connections.  [`conf_to_proj`] implements that
//! identification (dropping the bottom slot, which orthogonality to `I`
//! determines), [`proj_to_conf`] inverts it, and [`project_to_iperp`]
//! supplies the orthogonal projection `Π_A{}^B = δ_A{}^B − I_A I^B / ι`
//! used to land in `I^⊥` in the first place.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{rat, ratio, Scalar};
use crate::conformal::ScaleSpec;
use crate::error::{Error, Result};
use crate::tensor::{multi_indices, Variance};
use crate::tractor::{format_mixed_key, parse_mixed_key, MixedField, ScaleTractor};

/// A dense field of projective tractors with `tractor_slots` jet slots
/// (each ranging over `0..=n`) and an optional tail of ordinary tensor
/// slots, e.g. the covariant slots added by [`ProjectiveTractorField::covderiv`].
///
/// Components are trivialized rational functions; the field carries no
/// density weight.
#[derive(Clone, Debug)]
pub struct ProjectiveTractorField {
    splitting: Arc<ScaleSpec>,
    tractor_slots: usize,
    tensor_variance: Vec<Variance>,
    comps: Vec<Scalar>,
}

impl ProjectiveTractorField {
    fn zeros_arc(
        splitting: Arc<ScaleSpec>,
        tractor_slots: usize,
        tensor_variance: Vec<Variance>,
    ) -> ProjectiveTractorField {
        let n = splitting.n();
        let len = (n + 1).pow(tractor_slots as u32) * n.pow(tensor_variance.len() as u32);
        ProjectiveTractorField {
            splitting,
            tractor_slots,
            tensor_variance,
            comps: vec![Scalar::zero(n); len],
        }
    }

    /// Zero field of the given shape.
    pub fn zeros(
        splitting: ScaleSpec,
        tractor_slots: usize,
        tensor_variance: Vec<Variance>,
    ) -> ProjectiveTractorField {
        ProjectiveTractorField::zeros_arc(Arc::new(splitting), tractor_slots, tensor_variance)
    }

    pub fn n(&self) -> usize {
        self.splitting.n()
    }

    /// Values a projective tractor slot ranges over: `n + 1`.
    pub fn tractor_dim(&self) -> usize {
        self.n() + 1
    }

    pub fn tractor_slots(&self) -> usize {
        self.tractor_slots
    }

    pub fn tensor_rank(&self) -> usize {
        self.tensor_variance.len()
    }

    pub fn tensor_variance(&self) -> &[Variance] {
        &self.tensor_variance
    }

    pub fn splitting(&self) -> &ScaleSpec {
        &self.splitting
    }

    fn offset(&self, tr: &[usize], tn: &[usize]) -> usize {
        debug_assert_eq!(tr.len(), self.tractor_slots);
        debug_assert_eq!(tn.len(), self.tensor_variance.len());
        let nd = self.tractor_dim();
        let n = self.n();
        let mut o = 0usize;
        for &a in tr {
            debug_assert!(a < nd);
            o = o * nd + a;
        }
        for &i in tn {
            debug_assert!(i < n);
            o = o * n + i;
        }
        o
    }

    /// Component at projective multi-index `tr` (values `0..=n`) and tensor
    /// multi-index `tn` (labels `0..n`).
    pub fn get(&self, tr: &[usize], tn: &[usize]) -> &Scalar {
        &self.comps[self.offset(tr, tn)]
    }

    pub fn set(&mut self, tr: &[usize], tn: &[usize], value: Scalar) {
        let o = self.offset(tr, tn);
        self.comps[o] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Scalar::is_zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, &Scalar)> {
        let trs = multi_indices(self.tractor_dim(), self.tractor_slots);
        let tns = multi_indices(self.n(), self.tensor_variance.len());
        let mut keys = Vec::with_capacity(self.comps.len());
        for tr in &trs {
            for tn in &tns {
                keys.push((tr.clone(), tn.clone()));
            }
        }
        keys.into_iter()
            .map(move |(tr, tn)| (tr.clone(), tn.clone(), self.get(&tr, &tn)))
    }

    pub fn same_shape(&self, other: &ProjectiveTractorField) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        if self.tractor_slots != other.tractor_slots
            || self.tensor_variance != other.tensor_variance
        {
            return Err(Error::SlotMismatch(format!(
                "projective shapes differ: ({}, {:?}) vs ({}, {:?})",
                self.tractor_slots, self.tensor_variance, other.tractor_slots, other.tensor_variance
            )));
        }
        if !self.splitting.same_splitting(&other.splitting) {
            return Err(Error::PreconditionFailed(
                "projective fields live over different scales".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &ProjectiveTractorField) -> Result<ProjectiveTractorField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (c, d) in out.comps.iter_mut().zip(other.comps.iter()) {
            *c = &*c + d;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ProjectiveTractorField) -> Result<ProjectiveTractorField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (c, d) in out.comps.iter_mut().zip(other.comps.iter()) {
            *c = &*c - d;
        }
        Ok(out)
    }

    pub fn neg(&self) -> ProjectiveTractorField {
        self.map(|c| -c)
    }

    pub fn map<F: FnMut(&Scalar) -> Scalar>(&self, mut f: F) -> ProjectiveTractorField {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            *c = f(c);
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> ProjectiveTractorField {
        self.map(|c| c * s)
    }

    /// Contract the canonical surjection `X̄^A = (1, 0)` into tractor slot
    /// `slot`, which reads off the top (`σ`) entries.
    pub fn x_bar_contract(&self, slot: usize) -> Result<ProjectiveTractorField> {
        if slot >= self.tractor_slots {
            return Err(Error::IndexOutOfRange(format!(
                "tractor slot {slot} of {}",
                self.tractor_slots
            )));
        }
        let mut out = ProjectiveTractorField::zeros_arc(
            Arc::clone(&self.splitting),
            self.tractor_slots - 1,
            self.tensor_variance.clone(),
        );
        let trs = multi_indices(self.tractor_dim(), self.tractor_slots - 1);
        let tns = multi_indices(self.n(), self.tensor_variance.len());
        for tr in &trs {
            let mut full = tr.clone();
            full.insert(slot, 0);
            for tn in &tns {
                out.set(tr, tn, self.get(&full, tn).clone());
            }
        }
        Ok(out)
    }

    /// Covariant derivative for the projective tractor connection of the
    /// splitting's Levi-Civita connection, prepending one covariant tensor
    /// slot.  On a rank-one column this is
    /// `∇̄_a (σ, μ_b) = (∇_a σ − μ_a, ∇_a μ_b + σ R_ab / (n−1))`
    /// with `R_ab` the Ricci tensor of the splitting metric; higher ranks
    /// act slotwise, and ordinary tensor slots receive the plain
    /// Levi-Civita terms.
    pub fn covderiv(&self) -> ProjectiveTractorField {
        let n = self.n();
        let ups: &[Scalar] = self.splitting.upsilon();
        // Ricci of the splitting metric in background coordinates, divided
        // by n−1: ((n−2) P_ab + J δ_ab) / (n−1).
        let phat = self.splitting.schouten();
        let j = self.splitting.j_scalar();
        let inv_nm1 = ratio(1, n as i64 - 1);
        let mut ric_over = vec![vec![Scalar::zero(n); n]; n];
        for (a, row) in ric_over.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                let mut s = phat.get(&[a, b]).scale(&rat(n as i64 - 2));
                if a == b {
                    s = &s + j;
                }
                *cell = s.scale(&inv_nm1);
            }
        }

        let mut variance = Vec::with_capacity(self.tensor_variance.len() + 1);
        variance.push(Variance::Co);
        variance.extend_from_slice(&self.tensor_variance);
        let mut out = ProjectiveTractorField::zeros_arc(
            Arc::clone(&self.splitting),
            self.tractor_slots,
            variance,
        );

        let trs = multi_indices(self.tractor_dim(), self.tractor_slots);
        let tns = multi_indices(n, self.tensor_variance.len());
        for tr in &trs {
            for tn in &tns {
                let c0 = self.get(tr, tn);
                for a in 0..n {
                    let mut terms: Vec<Scalar> = Vec::new();
                    if !c0.is_zero() {
                        terms.push(c0.diff(a));
                    }
                    // Levi-Civita action on ordinary tensor slots.
                    for (jj, &var) in self.tensor_variance.iter().enumerate() {
                        let b = tn[jj];
                        let mut at_a = tn.clone();
                        at_a[jj] = a;
                        let c_a = self.get(tr, &at_a);
                        if !c_a.is_zero() && !ups[b].is_zero() {
                            terms.push(-&(&ups[b] * c_a));
                        }
                        if !c0.is_zero() && !ups[a].is_zero() {
                            match var {
                                Variance::Co => terms.push(-&(&ups[a] * c0)),
                                Variance::Contra => terms.push(&ups[a] * c0),
                            }
                        }
                        if a == b {
                            for e in 0..n {
                                if ups[e].is_zero() {
                                    continue;
                                }
                                let mut at_e = tn.clone();
                                at_e[jj] = e;
                                let c_e = self.get(tr, &at_e);
                                if !c_e.is_zero() {
                                    terms.push(&ups[e] * c_e);
                                }
                            }
                        }
                    }
                    // Jet slots: the one-form block behaves as a covariant
                    // index, the top slot is a plain function, and the
                    // connection couples the two.
                    for ii in 0..self.tractor_slots {
                        let v = tr[ii];
                        let mut at = tr.clone();
                        if v == 0 {
                            at[ii] = a + 1;
                            let c_a = self.get(&at, tn);
                            if !c_a.is_zero() {
                                terms.push(-c_a);
                            }
                        } else {
                            let b = v - 1;
                            at[ii] = a + 1;
                            let c_a = self.get(&at, tn);
                            if !c_a.is_zero() && !ups[b].is_zero() {
                                terms.push(-&(&ups[b] * c_a));
                            }
                            if !c0.is_zero() && !ups[a].is_zero() {
                                terms.push(-&(&ups[a] * c0));
                            }
                            if a == b {
                                for e in 0..n {
                                    if ups[e].is_zero() {
                                        continue;
                                    }
                                    at[ii] = e + 1;
                                    let c_e = self.get(&at, tn);
                                    if !c_e.is_zero() {
                                        terms.push(&ups[e] * c_e);
                                    }
                                }
                            }
                            at[ii] = 0;
                            let c_top = self.get(&at, tn);
                            if !c_top.is_zero() && !ric_over[a][b].is_zero() {
                                terms.push(&ric_over[a][b] * c_top);
                            }
                        }
                    }
                    let mut otn = Vec::with_capacity(tn.len() + 1);
                    otn.push(a);
                    otn.extend_from_slice(tn);
                    out.set(tr, &otn, Scalar::sum(n, terms));
                }
            }
        }
        out
    }

    pub fn is_parallel(&self) -> bool {
        self.covderiv().is_zero()
    }
}

impl PartialEq for ProjectiveTractorField {
    fn eq(&self, other: &ProjectiveTractorField) -> bool {
        self.tractor_slots == other.tractor_slots
            && self.tensor_variance == other.tensor_variance
            && self.splitting.same_splitting(&other.splitting)
            && self.comps == other.comps
    }
}

impl fmt::Display for ProjectiveTractorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "projective field: n={}, tractor_slots={}, tensor_variance={:?}",
            self.n(),
            self.tractor_slots,
            self.tensor_variance
        )?;
        let mut any = false;
        for (tr, tn, c) in self.entries() {
            if !c.is_zero() {
                any = true;
                writeln!(f, "  {} = {}", format_mixed_key(&tr, &tn), c)?;
            }
        }
        if !any {
            writeln!(f, "  (zero)")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------
// Identification with the orthogonal complement of a parallel scale tractor
// ---------------------------------------------------------------------

fn require_invertible_iota(i: &ScaleTractor) -> Result<()> {
    if i.iota().is_zero() {
        return Err(Error::PreconditionFailed(
            "scale tractor has iota = 0; the orthogonal complement is degenerate".into(),
        ));
    }
    Ok(())
}

fn require_parallel(i: &ScaleTractor) -> Result<()> {
    if !i.is_parallel() {
        return Err(Error::PreconditionFailed(
            "scale tractor is not parallel; the scale is not Einstein".into(),
        ));
    }
    Ok(())
}

/// Contract `I^A` into tractor slot `slot` of `t` (both already over the
/// same splitting), removing that slot.
fn iota_contraction(t: &MixedField, i: &ScaleTractor, slot: usize) -> Result<MixedField> {
    i.field().tensor_product(t)?.contract_tractor(0, 1 + slot)
}

/// Orthogonal projection `Π_A{}^B = δ_A{}^B − I_A I^B / ι` applied to every
/// tractor slot of `t`.  The input is first re-expressed in the scale's own
/// splitting; the result has every slot orthogonal to `I`.
pub fn project_to_iperp(t: &MixedField, i: &ScaleTractor) -> Result<MixedField> {
    require_invertible_iota(i)?;
    let mut cur = t.change_splitting(i.field().splitting())?;
    let inv_iota = i.iota().inv()?;
    for slot in 0..cur.tractor_slots() {
        let contracted = iota_contraction(&cur, i, slot)?;
        // Re-insert a copy of I in place of the contracted slot.
        let back = i.field().tensor_product(&contracted)?;
        let perm: Vec<usize> = (0..cur.tractor_slots())
            .map(|k| {
                if k == slot {
                    0
                } else if k < slot {
                    k + 1
                } else {
                    k
                }
            })
            .collect();
        let inserted = back.permute_tractor(&perm)?;
        cur = cur.sub(&inserted.scale(&inv_iota))?;
    }
    Ok(cur)
}

/// Map a standard tractor field with every slot orthogonal to the parallel
/// scale tractor `I` to the projective tractor bundle of the scale's
/// Levi-Civita connection: re-express in the scale's splitting, trivialize
/// densities by `σ^{-(w + tractor_slots)}`, and drop the bottom slot of
/// each tractor index (orthogonality determines it).
pub fn conf_to_proj(t: &MixedField, i: &ScaleTractor) -> Result<ProjectiveTractorField> {
    require_invertible_iota(i)?;
    require_parallel(i)?;
    let cur = t.change_splitting(i.field().splitting())?;
    for slot in 0..cur.tractor_slots() {
        if !iota_contraction(&cur, i, slot)?.is_zero() {
            return Err(Error::PreconditionFailed(format!(
                "input is not orthogonal to the scale tractor on slot {slot}"
            )));
        }
    }
    let n = cur.n();
    let exponent = cur.weight() + cur.tractor_slots() as i64;
    let factor = i.sigma().pow(-(exponent as i32))?;
    let mut out = ProjectiveTractorField::zeros_arc(
        cur.splitting_arc(),
        cur.tractor_slots(),
        cur.tensor_variance().to_vec(),
    );
    let trs = multi_indices(n + 1, cur.tractor_slots());
    let tns = multi_indices(n, cur.tensor_rank());
    for tr in &trs {
        for tn in &tns {
            let c = cur.get(tr, tn);
            if !c.is_zero() {
                out.set(tr, tn, c * &factor);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`conf_to_proj`]: rebuild the weight-zero standard tractor
/// field in `I^⊥` whose trivialization is `p`.  Bottom-slot entries are
/// filled in from orthogonality (`ρ = (J/n) σ` slotwise).
pub fn proj_to_conf(p: &ProjectiveTractorField, i: &ScaleTractor) -> Result<MixedField> {
    require_invertible_iota(i)?;
    require_parallel(i)?;
    if !p.splitting().same_splitting(i.field().splitting()) {
        return Err(Error::PreconditionFailed(
            "projective field lives over a different scale than the scale tractor".into(),
        ));
    }
    let n = p.n();
    let t = p.tractor_slots();
    let factor = i.sigma().pow(t as i32)?;
    let j_over_n = i
        .field()
        .splitting()
        .j_scalar()
        .scale(&ratio(1, n as i64));
    let mut out = MixedField::zeros(
        p.splitting().clone(),
        t,
        p.tensor_variance().to_vec(),
        0,
    );
    let trs = multi_indices(n + 2, t);
    let tns = multi_indices(n, p.tensor_rank());
    for tr in &trs {
        let mut base = tr.clone();
        let mut x_count = 0i32;
        for v in base.iter_mut() {
            if *v == n + 1 {
                *v = 0;
                x_count += 1;
            }
        }
        let fill = &factor * &j_over_n.pow(x_count)?;
        if fill.is_zero() {
            continue;
        }
        for tn in &tns {
            let c = p.get(&base, tn);
            if !c.is_zero() {
                out.set(tr, tn, c * &fill);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// JSON form (shares the mixed-field schema, tagged "bundle": "projective")
// ---------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ProjJson {
    n: usize,
    tractor_slots: usize,
    tensor_slots: usize,
    weight: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tensor_variance: Option<String>,
    bundle: String,
    splitting: ScaleSpec,
    components: BTreeMap<String, Scalar>,
}

impl Serialize for ProjectiveTractorField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut components = BTreeMap::new();
        for (tr, tn, c) in self.entries() {
            if !c.is_zero() {
                components.insert(format_mixed_key(&tr, &tn), c.clone());
            }
        }
        let json = ProjJson {
            n: self.n(),
            tractor_slots: self.tractor_slots,
            tensor_slots: self.tensor_variance.len(),
            weight: 0,
            tensor_variance: if self.tensor_variance.is_empty() {
                None
            } else {
                Some(
                    self.tensor_variance
                        .iter()
                        .map(|v| v.to_char())
                        .collect::<String>(),
                )
            },
            bundle: "projective".to_string(),
            splitting: (*self.splitting).clone(),
            components,
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjectiveTractorField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = ProjJson::deserialize(d)?;
        ProjectiveTractorField::from_json_repr(json).map_err(D::Error::custom)
    }
}

impl ProjectiveTractorField {
    fn from_json_repr(json: ProjJson) -> Result<ProjectiveTractorField> {
        if json.bundle != "projective" {
            return Err(Error::Schema(format!(
                "expected a projective-bundle field, found bundle tag {:?}",
                json.bundle
            )));
        }
        if json.weight != 0 {
            return Err(Error::Schema(format!(
                "projective fields are trivialized and carry weight 0, found {}",
                json.weight
            )));
        }
        let n = json.splitting.n();
        if json.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: json.n,
            });
        }
        let tensor_variance = match &json.tensor_variance {
            None => vec![Variance::Co; json.tensor_slots],
            Some(s) => {
                let vs: Result<Vec<Variance>> = s.chars().map(Variance::from_char).collect();
                let vs = vs?;
                if vs.len() != json.tensor_slots {
                    return Err(Error::Schema(format!(
                        "tensor_variance {:?} does not match tensor_slots {}",
                        s, json.tensor_slots
                    )));
                }
                vs
            }
        };
        let mut out = ProjectiveTractorField::zeros_arc(
            Arc::new(json.splitting),
            json.tractor_slots,
            tensor_variance,
        );
        for (key, value) in &json.components {
            let (tr, tn) = parse_mixed_key(key, json.tractor_slots, json.tensor_slots, n)?;
            if let Some(&bad) = tr.iter().find(|&&a| a > n) {
                return Err(Error::Schema(format!(
                    "projective tractor index {bad} out of range 0..={n} in key {key:?}"
                )));
            }
            if value.nvars() != n {
                return Err(Error::NvarsMismatch {
                    expected: n,
                    got: value.nvars(),
                });
            }
            out.set(&tr, &tn, value.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::parse_poly;
    use crate::tractor::scale_tractor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn poly(src: &str, n: usize) -> Scalar {
        Scalar::from_poly(parse_poly(src, n).unwrap())
    }

    fn hyperbolic(n: usize) -> ScaleSpec {
        ScaleSpec::from_sigma(poly("x1", n)).unwrap()
    }

    fn spherical(n: usize) -> ScaleSpec {
        ScaleSpec::from_sigma(poly("1 + |x|^2", n)).unwrap()
    }

    fn random_orthogonal(
        rng: &mut ChaCha8Rng,
        i: &ScaleTractor,
        tractor_slots: usize,
        tensor_variance: Vec<Variance>,
        weight: i64,
        degree: u32,
    ) -> MixedField {
        let raw = MixedField::random(
            rng,
            i.field().splitting().clone(),
            tractor_slots,
            tensor_variance,
            weight,
            degree,
        );
        project_to_iperp(&raw, i).unwrap()
    }

    #[test]
    fn covderiv_in_reference_matches_jet_formula() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let scale = ScaleSpec::reference(n);
        let mut p = ProjectiveTractorField::zeros(scale.clone(), 1, vec![]);
        let sigma = Scalar::from_poly(crate::arith::random_poly(&mut rng, n, 2));
        let mus: Vec<Scalar> = (0..n)
            .map(|_| Scalar::from_poly(crate::arith::random_poly(&mut rng, n, 2)))
            .collect();
        p.set(&[0], &[], sigma.clone());
        for (b, mu) in mus.iter().enumerate() {
            p.set(&[b + 1], &[], mu.clone());
        }
        let d = p.covderiv();
        for a in 0..n {
            // Top row: ∂_a σ − μ_a.
            assert_eq!(*d.get(&[0], &[a]), &sigma.diff(a) - &mus[a]);
            // One-form block: ∂_a μ_b (flat background, zero Ricci).
            for b in 0..n {
                assert_eq!(*d.get(&[b + 1], &[a]), mus[b].diff(a));
            }
        }

        // The constant unit top column is parallel in the flat reference.
        let mut unit = ProjectiveTractorField::zeros(scale, 1, vec![]);
        unit.set(&[0], &[], Scalar::one(n));
        assert!(unit.covderiv().is_zero());
        assert!(unit.is_parallel());
    }

    #[test]
    fn x_bar_contraction_reads_top_slot() {
        let n = 3;
        let scale = ScaleSpec::reference(n);
        let mut p = ProjectiveTractorField::zeros(scale, 2, vec![]);
        p.set(&[0, 2], &[], poly("x2", n));
        p.set(&[1, 0], &[], poly("x1", n));
        p.set(&[0, 0], &[], poly("7", n));
        let top = p.x_bar_contract(0).unwrap();
        assert_eq!(*top.get(&[2], &[]), poly("x2", n));
        assert_eq!(*top.get(&[0], &[]), poly("7", n));
        assert!(top.get(&[1], &[]).is_zero());
        let second = p.x_bar_contract(1).unwrap();
        assert_eq!(*second.get(&[1], &[]), poly("x1", n));
        assert_eq!(*second.get(&[0], &[]), poly("7", n));
    }

    #[test]
    fn projector_is_idempotent_self_adjoint_and_kills_the_scale_tractor() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for scale in [hyperbolic(n), spherical(n)] {
            let i = scale_tractor(&scale).unwrap();
            assert!(project_to_iperp(i.field(), &i).unwrap().is_zero());

            for (t, var, w) in [
                (1usize, vec![], 0i64),
                (1, vec![], 1),
                (2, vec![], 0),
                (1, vec![Variance::Co], 0),
            ] {
                let raw = MixedField::random(&mut rng, scale.clone(), t, var, w, 2);
                let once = project_to_iperp(&raw, &i).unwrap();
                let twice = project_to_iperp(&once, &i).unwrap();
                assert_eq!(once, twice, "projector must be idempotent");
                for slot in 0..t {
                    assert!(
                        iota_contraction(&once, &i, slot).unwrap().is_zero(),
                        "projected field must be orthogonal on slot {slot}"
                    );
                }
            }

            // Self-adjointness with respect to the tractor metric pairing.
            let v = MixedField::random(&mut rng, scale.clone(), 1, vec![], 0, 2);
            let w = MixedField::random(&mut rng, scale.clone(), 1, vec![], 0, 2);
            let pv = project_to_iperp(&v, &i).unwrap();
            let pw = project_to_iperp(&w, &i).unwrap();
            assert_eq!(pv.pair(&w, 0, 0).unwrap(), v.pair(&pw, 0, 0).unwrap());
        }
    }

    #[test]
    fn projector_commutes_with_covderiv_exactly_for_parallel_scale_tractors() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let scale = hyperbolic(n);
        let i = scale_tractor(&scale).unwrap();
        assert!(i.is_parallel());
        for w in [0i64, 1] {
            let t = MixedField::random(&mut rng, scale.clone(), 1, vec![], w, 2);
            let lhs = project_to_iperp(&t.covderiv(), &i).unwrap();
            let rhs = project_to_iperp(&t, &i).unwrap().covderiv();
            assert_eq!(lhs, rhs);
        }

        // Control: for a non-parallel scale tractor the two orders differ.
        let crooked = ScaleSpec::from_sigma(poly("x1^2", n)).unwrap();
        let i2 = scale_tractor(&crooked).unwrap();
        assert!(!i2.is_parallel());
        let t = MixedField::y_tractor(crooked);
        let lhs = project_to_iperp(&t.covderiv(), &i2).unwrap();
        let rhs = project_to_iperp(&t, &i2).unwrap().covderiv();
        assert_ne!(lhs, rhs);
    }

    #[test]
    fn identification_maps_canonical_tractors_as_expected() {
        let n = 3;
        for scale in [hyperbolic(n), spherical(n)] {
            let i = scale_tractor(&scale).unwrap();
            // Trivialized scalar curvature trace J of the scale's metric.
            let j_triv = &(i.sigma() * i.sigma()) * scale.j_scalar();

            // Top injector: Π(Y) maps to one half of the projective top.
            let y = MixedField::y_tractor(scale.clone());
            let py = conf_to_proj(&project_to_iperp(&y, &i).unwrap(), &i).unwrap();
            assert_eq!(*py.get(&[0], &[]), Scalar::one(n).scale(&ratio(1, 2)));
            for b in 1..=n {
                assert!(py.get(&[b], &[]).is_zero());
            }

            // Bottom injector: Π(X) maps to n/(2J) times the projective top.
            let x = MixedField::x_tractor(scale.clone());
            let px = conf_to_proj(&project_to_iperp(&x, &i).unwrap(), &i).unwrap();
            let expected = &Scalar::one(n).scale(&ratio(n as i64, 2)) * &j_triv.inv().unwrap();
            assert_eq!(*px.get(&[0], &[]), expected);
            for b in 1..=n {
                assert!(px.get(&[b], &[]).is_zero());
            }

            // One-form injector: Π(Z) = Z maps to the projective block.
            let z = MixedField::z_tractor(scale.clone());
            let pz = conf_to_proj(&project_to_iperp(&z, &i).unwrap(), &i).unwrap();
            for v in 0..=n {
                for b in 0..n {
                    let c = pz.get(&[v], &[b]);
                    if v == b + 1 {
                        assert_eq!(*c, Scalar::one(n));
                    } else {
                        assert!(c.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn identification_intertwines_the_connections() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for scale in [hyperbolic(n), spherical(n)] {
            let i = scale_tractor(&scale).unwrap();
            for (t, var, w, deg) in [
                (1usize, vec![], 0i64, 2u32),
                (2, vec![], 0, 1),
                (1, vec![], 1, 2),
                (1, vec![Variance::Co], 0, 1),
            ] {
                let field = random_orthogonal(&mut rng, &i, t, var, w, deg);
                let lhs = conf_to_proj(&field.covderiv(), &i).unwrap();
                let rhs = conf_to_proj(&field, &i).unwrap().covderiv();
                assert_eq!(lhs, rhs, "square must commute for shape ({t}, {w})");
            }
        }
    }

    #[test]
    fn identification_roundtrips_and_transfers_parallelism() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let scale = hyperbolic(n);
        let i = scale_tractor(&scale).unwrap();

        let field = random_orthogonal(&mut rng, &i, 2, vec![], 0, 1);
        let p = conf_to_proj(&field, &i).unwrap();
        let back = proj_to_conf(&p, &i).unwrap();
        assert_eq!(back, field);
        let p2 = conf_to_proj(&back, &i).unwrap();
        assert_eq!(p2, p);

        // A parallel orthogonal tractor transfers to a parallel projective
        // tractor: pair the hyperbolic scale with an orthogonal parallel
        // scale tractor built from a second flat coordinate.
        let other = scale_tractor(&ScaleSpec::from_sigma(poly("x2", n)).unwrap()).unwrap();
        let v = other.in_splitting(&scale).unwrap();
        assert!(v.is_parallel());
        assert!(iota_contraction(&v, &i, 0).unwrap().is_zero());
        let pv = conf_to_proj(&v, &i).unwrap();
        assert!(pv.is_parallel());

        let third = scale_tractor(&ScaleSpec::from_sigma(poly("x3", n)).unwrap()).unwrap();
        let v3 = third.in_splitting(&scale).unwrap();
        let vv = v.tensor_product(&v3).unwrap();
        let pvv = conf_to_proj(&vv, &i).unwrap();
        assert!(pvv.is_parallel());
    }

    #[test]
    fn identification_rejects_degenerate_or_crooked_inputs() {
        let n = 3;
        // Flat scale: iota vanishes.
        let flat = scale_tractor(&ScaleSpec::from_sigma(poly("1", n)).unwrap()).unwrap();
        assert!(flat.iota().is_zero());
        let y = MixedField::y_tractor(flat.field().splitting().clone());
        assert!(matches!(
            conf_to_proj(&y, &flat),
            Err(Error::PreconditionFailed(_))
        ));
        assert!(matches!(
            project_to_iperp(&y, &flat),
            Err(Error::PreconditionFailed(_))
        ));

        // Non-Einstein scale: the scale tractor is not parallel.
        let crooked = scale_tractor(&ScaleSpec::from_sigma(poly("x1^2", n)).unwrap()).unwrap();
        assert!(!crooked.iota().is_zero());
        let z = MixedField::z_tractor(crooked.field().splitting().clone());
        assert!(matches!(
            conf_to_proj(&z, &crooked),
            Err(Error::PreconditionFailed(_))
        ));

        // Einstein scale but an input that is not orthogonal.
        let i = scale_tractor(&hyperbolic(n)).unwrap();
        let y = MixedField::y_tractor(hyperbolic(n));
        assert!(matches!(
            conf_to_proj(&y, &i),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let i = scale_tractor(&spherical(n)).unwrap();
        let field = random_orthogonal(&mut rng, &i, 1, vec![Variance::Co], 0, 1);
        let p = conf_to_proj(&field, &i).unwrap();

        let text = serde_json::to_string(&p).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["bundle"], "projective");
        assert_eq!(value["weight"], 0);
        let back: ProjectiveTractorField = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        // A missing or foreign bundle tag is rejected.
        let mut stripped = value.clone();
        stripped.as_object_mut().unwrap().remove("bundle");
        assert!(serde_json::from_value::<ProjectiveTractorField>(stripped).is_err());
        let mut foreign = value.clone();
        foreign["bundle"] = "standard".into();
        assert!(serde_json::from_value::<ProjectiveTractorField>(foreign).is_err());

        // Nonzero weight and out-of-range tractor indices are rejected.
        let mut heavy = value.clone();
        heavy["weight"] = 2.into();
        assert!(serde_json::from_value::<ProjectiveTractorField>(heavy).is_err());
        let mut ranged = value;
        let comps = ranged["components"].as_object().unwrap().clone();
        let (_, sample) = comps.iter().next().unwrap();
        ranged["components"] = serde_json::json!({ "(4,1)": sample });
        assert!(serde_json::from_value::<ProjectiveTractorField>(ranged).is_err());
    }
}
