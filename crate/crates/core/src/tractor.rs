//! The standard tractor bundle over conformally flat space: mixed
//! tractor-tensor fields, the tractor metric, the normal tractor connection,
//! the normalized Thomas-D operator, scale tractors, Einstein-scale
//! detection, and changes of splitting.
//!
//! Tractor slot values run over `0..n+2`: position `0` carries the top
//! (`Y`-frame) component, positions `1..=n` carry the middle (`Z`-frame)
//! block whose labels behave like covariant tensor indices, and position
//! `n+1` carries the bottom (`X`-frame) component.  The frame refers to the
//! field's stored splitting; component scalars are reference-trivialised.
//! Raising or lowering a tractor slot is the identity on components, so
//! tractor slots carry no variance flag and every tractor contraction pairs
//! through the tractor metric.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{random_poly, rat, ratio, Rational, Scalar};
use crate::conformal::ScaleSpec;
use crate::error::{Error, Result};
use crate::tensor::{multi_indices, permutations_with_parity, Variance, WeightedTensorField};

/// A weighted field with `tractor_slots` tractor slots and a block of tensor
/// slots, over flat space of dimension `n`, decomposed in `splitting`.
#[derive(Clone, Debug)]
pub struct MixedField {
    splitting: Arc<ScaleSpec>,
    tractor_slots: usize,
    tensor_variance: Vec<Variance>,
    weight: i64,
    comps: Vec<Scalar>,
}

impl MixedField {
    // ---------------------------------------------------------------
    // Construction
    // ---------------------------------------------------------------

    fn zeros_arc(
        splitting: Arc<ScaleSpec>,
        tractor_slots: usize,
        tensor_variance: Vec<Variance>,
        weight: i64,
    ) -> MixedField {
        let n = splitting.n();
        let len = (n + 2).pow(tractor_slots as u32) * n.pow(tensor_variance.len() as u32);
        MixedField {
            splitting,
            tractor_slots,
            tensor_variance,
            weight,
            comps: vec![Scalar::zero(n); len],
        }
    }

    /// Zero field of the given shape.
    pub fn zeros(
        splitting: ScaleSpec,
        tractor_slots: usize,
        tensor_variance: Vec<Variance>,
        weight: i64,
    ) -> MixedField {
        MixedField::zeros_arc(Arc::new(splitting), tractor_slots, tensor_variance, weight)
    }

    /// A field with no tractor slots wrapping a weighted tensor field.
    pub fn from_tensor(splitting: ScaleSpec, t: &WeightedTensorField) -> Result<MixedField> {
        if t.n() != splitting.n() {
            return Err(Error::DimensionMismatch {
                expected: splitting.n(),
                got: t.n(),
            });
        }
        let mut out = MixedField::zeros(splitting, 0, t.variance().to_vec(), t.weight());
        for (idx, v) in t.components() {
            if !v.is_zero() {
                out.set(&[], &idx, v.clone());
            }
        }
        Ok(out)
    }

    /// Extract the weighted tensor field underlying a mixed field with no
    /// tractor slots (inverse of [`MixedField::from_tensor`]).
    pub fn to_tensor(&self) -> Result<WeightedTensorField> {
        if self.tractor_slots != 0 {
            return Err(Error::SlotMismatch(format!(
                "cannot view a field with {} tractor slots as a plain tensor",
                self.tractor_slots
            )));
        }
        let mut out =
            WeightedTensorField::zeros(self.n(), self.tensor_variance.clone(), self.weight);
        for (_, tn, c) in self.entries() {
            if !c.is_zero() {
                *out.get_mut(&tn) = c.clone();
            }
        }
        Ok(out)
    }

    /// A scalar field of the given weight.
    pub fn scalar_field(splitting: ScaleSpec, value: Scalar, weight: i64) -> Result<MixedField> {
        if value.nvars() != splitting.n() {
            return Err(Error::NvarsMismatch {
                expected: splitting.n(),
                got: value.nvars(),
            });
        }
        let mut out = MixedField::zeros(splitting, 0, Vec::new(), weight);
        out.comps[0] = value;
        Ok(out)
    }

    /// The canonical bottom tractor (weight `1`): components `(0, 0, 1)` in
    /// every splitting.
    pub fn x_tractor(splitting: ScaleSpec) -> MixedField {
        let n = splitting.n();
        let mut out = MixedField::zeros(splitting, 1, Vec::new(), 1);
        out.set(&[n + 1], &[], Scalar::one(n));
        out
    }

    /// The top tractor of the given splitting (weight `-1`): components
    /// `(1, 0, 0)`.
    pub fn y_tractor(splitting: ScaleSpec) -> MixedField {
        let n = splitting.n();
        let mut out = MixedField::zeros(splitting, 1, Vec::new(), -1);
        out.set(&[0], &[], Scalar::one(n));
        out
    }

    /// The middle injector of the given splitting (weight `-1`): one tractor
    /// slot and one contravariant tensor slot, components `delta`.
    pub fn z_tractor(splitting: ScaleSpec) -> MixedField {
        let n = splitting.n();
        let mut out = MixedField::zeros(splitting, 1, vec![Variance::Contra], -1);
        for b in 0..n {
            out.set(&[b + 1], &[b], Scalar::one(n));
        }
        out
    }

    /// The tractor metric (two tractor slots, weight `0`); its components
    /// are the same in every splitting.
    pub fn tractor_metric(splitting: ScaleSpec) -> MixedField {
        let n = splitting.n();
        let mut out = MixedField::zeros(splitting, 2, Vec::new(), 0);
        out.set(&[0, n + 1], &[], Scalar::one(n));
        out.set(&[n + 1, 0], &[], Scalar::one(n));
        for a in 1..=n {
            out.set(&[a, a], &[], Scalar::one(n));
        }
        out
    }

    /// Random field with polynomial entries of total degree at most
    /// `max_degree`; used by the randomized identity suite.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        splitting: ScaleSpec,
        tractor_slots: usize,
        tensor_variance: Vec<Variance>,
        weight: i64,
        max_degree: u32,
    ) -> MixedField {
        let n = splitting.n();
        let mut out = MixedField::zeros(splitting, tractor_slots, tensor_variance, weight);
        for c in out.comps.iter_mut() {
            *c = Scalar::from_poly(random_poly(rng, n, max_degree));
        }
        out
    }

    // ---------------------------------------------------------------
    // Shape and access
    // ---------------------------------------------------------------

    pub fn n(&self) -> usize {
        self.splitting.n()
    }

    /// Values a tractor slot ranges over: `n + 2`.
    pub fn tractor_dim(&self) -> usize {
        self.n() + 2
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

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn splitting(&self) -> &ScaleSpec {
        &self.splitting
    }

    pub(crate) fn splitting_arc(&self) -> Arc<ScaleSpec> {
        Arc::clone(&self.splitting)
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

    /// Component at tractor multi-index `tr` (raw positions `0..n+2`) and
    /// tensor multi-index `tn` (labels `0..n`).
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

    /// Iterate `(tractor_index, tensor_index, component)` over all entries.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, &Scalar)> {
        let nd = self.tractor_dim();
        let n = self.n();
        let t = self.tractor_slots;
        let s = self.tensor_variance.len();
        self.comps.iter().enumerate().map(move |(o, c)| {
            let mut rem = o;
            let mut tn = vec![0usize; s];
            for k in (0..s).rev() {
                tn[k] = rem % n;
                rem /= n;
            }
            let mut tr = vec![0usize; t];
            for k in (0..t).rev() {
                tr[k] = rem % nd;
                rem /= nd;
            }
            (tr, tn, c)
        })
    }

    /// Same dimension, slot counts, variances, weight, and splitting.
    pub fn same_shape(&self, other: &MixedField) -> Result<()> {
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
                "({} tractor, {:?}) vs ({} tractor, {:?})",
                self.tractor_slots, self.tensor_variance, other.tractor_slots, other.tensor_variance
            )));
        }
        if self.weight != other.weight {
            return Err(Error::SlotMismatch(format!(
                "weight {} vs {}",
                self.weight, other.weight
            )));
        }
        if !self.splitting.same_splitting(&other.splitting) {
            return Err(Error::PreconditionFailed(
                "fields decomposed in different splittings".into(),
            ));
        }
        Ok(())
    }

    // ---------------------------------------------------------------
    // Pointwise algebra
    // ---------------------------------------------------------------

    pub fn add(&self, other: &MixedField) -> Result<MixedField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            *a = &*a + b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MixedField) -> Result<MixedField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            *a = &*a - b;
        }
        Ok(out)
    }

    pub fn neg(&self) -> MixedField {
        self.map(|c| -c)
    }

    pub fn map<F: FnMut(&Scalar) -> Scalar>(&self, mut f: F) -> MixedField {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            *c = f(c);
        }
        out
    }

    pub fn scale_rat(&self, r: &Rational) -> MixedField {
        self.map(|c| c.scale(r))
    }

    /// Multiply by a weight-zero scalar.
    pub fn scale(&self, s: &Scalar) -> MixedField {
        self.scale_weighted(s, 0)
    }

    /// Multiply by a scalar density of the given weight; the field weight
    /// shifts accordingly.
    pub fn scale_weighted(&self, s: &Scalar, scalar_weight: i64) -> MixedField {
        let mut out = self.map(|c| c * s);
        out.weight += scalar_weight;
        out
    }

    /// Tensor product; the factors must share the splitting.  Tractor slots
    /// of `self` precede those of `other`, and likewise for tensor slots.
    pub fn tensor_product(&self, other: &MixedField) -> Result<MixedField> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        if !self.splitting.same_splitting(&other.splitting) {
            return Err(Error::PreconditionFailed(
                "tensor product of fields in different splittings".into(),
            ));
        }
        let mut variance = self.tensor_variance.clone();
        variance.extend_from_slice(&other.tensor_variance);
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots + other.tractor_slots,
            variance,
            self.weight + other.weight,
        );
        let nd = self.tractor_dim();
        let n = self.n();
        for tr1 in multi_indices(nd, self.tractor_slots) {
            for tn1 in multi_indices(n, self.tensor_variance.len()) {
                let a = self.get(&tr1, &tn1);
                if a.is_zero() {
                    continue;
                }
                for tr2 in multi_indices(nd, other.tractor_slots) {
                    for tn2 in multi_indices(n, other.tensor_variance.len()) {
                        let b = other.get(&tr2, &tn2);
                        if b.is_zero() {
                            continue;
                        }
                        let mut tr = tr1.clone();
                        tr.extend_from_slice(&tr2);
                        let mut tn = tn1.clone();
                        tn.extend_from_slice(&tn2);
                        out.set(&tr, &tn, a * b);
                    }
                }
            }
        }
        Ok(out)
    }

    // ---------------------------------------------------------------
    // Slot shuffles
    // ---------------------------------------------------------------

    fn check_perm(perm: &[usize], len: usize) -> Result<()> {
        if perm.len() != len {
            return Err(Error::SlotMismatch("permutation length".into()));
        }
        let mut seen = vec![false; len];
        for &p in perm {
            if p >= len || seen[p] {
                return Err(Error::SlotMismatch("invalid permutation".into()));
            }
            seen[p] = true;
        }
        Ok(())
    }

    /// Rearrange tractor slots: output slot `k` carries source slot
    /// `perm[k]`.
    pub fn permute_tractor(&self, perm: &[usize]) -> Result<MixedField> {
        Self::check_perm(perm, self.tractor_slots)?;
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots,
            self.tensor_variance.clone(),
            self.weight,
        );
        let nd = self.tractor_dim();
        let n = self.n();
        for tr in multi_indices(nd, self.tractor_slots) {
            let mut src = vec![0usize; self.tractor_slots];
            for (k, &p) in perm.iter().enumerate() {
                src[p] = tr[k];
            }
            for tn in multi_indices(n, self.tensor_variance.len()) {
                let v = self.get(&src, &tn);
                if !v.is_zero() {
                    out.set(&tr, &tn, v.clone());
                }
            }
        }
        Ok(out)
    }

    /// Rearrange tensor slots: output slot `k` carries source slot `perm[k]`.
    pub fn permute_tensor(&self, perm: &[usize]) -> Result<MixedField> {
        Self::check_perm(perm, self.tensor_variance.len())?;
        let variance: Vec<Variance> = perm.iter().map(|&p| self.tensor_variance[p]).collect();
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots,
            variance,
            self.weight,
        );
        let nd = self.tractor_dim();
        let n = self.n();
        for tr in multi_indices(nd, self.tractor_slots) {
            for tn in multi_indices(n, self.tensor_variance.len()) {
                let mut src = vec![0usize; tn.len()];
                for (k, &p) in perm.iter().enumerate() {
                    src[p] = tn[k];
                }
                let v = self.get(&tr, &src);
                if !v.is_zero() {
                    out.set(&tr, &tn, v.clone());
                }
            }
        }
        Ok(out)
    }

    fn sym_tractor_helper(&self, slots: &[usize], sign_odd: bool) -> Result<MixedField> {
        let mut seen = vec![false; self.tractor_slots];
        for &s in slots {
            if s >= self.tractor_slots || seen[s] {
                return Err(Error::SlotMismatch("bad tractor slot list".into()));
            }
            seen[s] = true;
        }
        let perms = permutations_with_parity(slots.len());
        let factor = ratio(1, perms.len() as i64);
        let nd = self.tractor_dim();
        let n = self.n();
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots,
            self.tensor_variance.clone(),
            self.weight,
        );
        for tr in multi_indices(nd, self.tractor_slots) {
            for tn in multi_indices(n, self.tensor_variance.len()) {
                let mut acc = Scalar::zero(n);
                for (perm, even) in &perms {
                    let mut src = tr.clone();
                    for (pos, &slot) in slots.iter().enumerate() {
                        src[slot] = tr[slots[perm[pos]]];
                    }
                    let term = self.get(&src, &tn);
                    if sign_odd && !even {
                        acc = &acc - term;
                    } else {
                        acc = &acc + term;
                    }
                }
                if !acc.is_zero() {
                    out.set(&tr, &tn, acc.scale(&factor));
                }
            }
        }
        Ok(out)
    }

    /// Symmetrize over the listed tractor slots (with `1/k!`).
    pub fn symmetrize_tractor(&self, slots: &[usize]) -> Result<MixedField> {
        self.sym_tractor_helper(slots, false)
    }

    /// Antisymmetrize over the listed tractor slots (with `1/k!`).
    pub fn antisymmetrize_tractor(&self, slots: &[usize]) -> Result<MixedField> {
        self.sym_tractor_helper(slots, true)
    }

    fn sym_tensor_helper(&self, slots: &[usize], sign_odd: bool) -> Result<MixedField> {
        let mut seen = vec![false; self.tensor_variance.len()];
        for &s in slots {
            if s >= self.tensor_variance.len() || seen[s] {
                return Err(Error::SlotMismatch("bad tensor slot list".into()));
            }
            seen[s] = true;
            if self.tensor_variance[s] != self.tensor_variance[slots[0]] {
                return Err(Error::SlotMismatch(
                    "cannot mix variances in a symmetrization".into(),
                ));
            }
        }
        let perms = permutations_with_parity(slots.len());
        let factor = ratio(1, perms.len() as i64);
        let nd = self.tractor_dim();
        let n = self.n();
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots,
            self.tensor_variance.clone(),
            self.weight,
        );
        for tr in multi_indices(nd, self.tractor_slots) {
            for tn in multi_indices(n, self.tensor_variance.len()) {
                let mut acc = Scalar::zero(n);
                for (perm, even) in &perms {
                    let mut src = tn.clone();
                    for (pos, &slot) in slots.iter().enumerate() {
                        src[slot] = tn[slots[perm[pos]]];
                    }
                    let term = self.get(&tr, &src);
                    if sign_odd && !even {
                        acc = &acc - term;
                    } else {
                        acc = &acc + term;
                    }
                }
                if !acc.is_zero() {
                    out.set(&tr, &tn, acc.scale(&factor));
                }
            }
        }
        Ok(out)
    }

    /// Symmetrize over the listed tensor slots (with `1/k!`).
    pub fn symmetrize_tensor(&self, slots: &[usize]) -> Result<MixedField> {
        self.sym_tensor_helper(slots, false)
    }

    /// Antisymmetrize over the listed tensor slots (with `1/k!`).
    pub fn antisymmetrize_tensor(&self, slots: &[usize]) -> Result<MixedField> {
        self.sym_tensor_helper(slots, true)
    }

    // ---------------------------------------------------------------
    // Contractions and slices
    // ---------------------------------------------------------------

    fn removed<T: Copy>(idx: &[T], remove: &[usize]) -> Vec<T> {
        idx.iter()
            .enumerate()
            .filter(|(k, _)| !remove.contains(k))
            .map(|(_, &v)| v)
            .collect()
    }

    /// Contract two tractor slots through the tractor metric.
    pub fn contract_tractor(&self, i: usize, j: usize) -> Result<MixedField> {
        if i == j || i >= self.tractor_slots || j >= self.tractor_slots {
            return Err(Error::SlotMismatch(format!(
                "tractor contraction slots ({i}, {j}) of {}",
                self.tractor_slots
            )));
        }
        let nd = self.tractor_dim();
        let n = self.n();
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots - 2,
            self.tensor_variance.clone(),
            self.weight,
        );
        for tr in multi_indices(nd, self.tractor_slots - 2) {
            for tn in multi_indices(n, self.tensor_variance.len()) {
                let mut full = vec![0usize; self.tractor_slots];
                let mut pos = 0usize;
                for (k, slot) in full.iter_mut().enumerate() {
                    if k != i && k != j {
                        *slot = tr[pos];
                        pos += 1;
                    }
                }
                let mut terms = Vec::with_capacity(n + 2);
                // Pairing blocks: top-bottom cross terms and the middle block.
                full[i] = 0;
                full[j] = n + 1;
                terms.push(self.get(&full, &tn).clone());
                full[i] = n + 1;
                full[j] = 0;
                terms.push(self.get(&full, &tn).clone());
                for e in 1..=n {
                    full[i] = e;
                    full[j] = e;
                    terms.push(self.get(&full, &tn).clone());
                }
                let acc = Scalar::sum(n, terms);
                if !acc.is_zero() {
                    out.set(&tr, &tn, acc);
                }
            }
        }
        Ok(out)
    }

    /// Contract two tensor slots (same conventions as the tensor layer:
    /// opposite variances keep the weight; two covariant slots contract
    /// through the inverse metric, shifting the weight by `-2`; two
    /// contravariant slots through the metric, shifting by `+2`).
    pub fn contract_tensor(&self, i: usize, j: usize) -> Result<MixedField> {
        let s = self.tensor_variance.len();
        if i == j || i >= s || j >= s {
            return Err(Error::SlotMismatch(format!(
                "tensor contraction slots ({i}, {j}) of {s}"
            )));
        }
        let shift = match (self.tensor_variance[i], self.tensor_variance[j]) {
            (Variance::Co, Variance::Contra) | (Variance::Contra, Variance::Co) => 0,
            (Variance::Co, Variance::Co) => -2,
            (Variance::Contra, Variance::Contra) => 2,
        };
        let nd = self.tractor_dim();
        let n = self.n();
        let variance = Self::removed(&self.tensor_variance, &[i, j]);
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots,
            variance,
            self.weight + shift,
        );
        for tr in multi_indices(nd, self.tractor_slots) {
            for tn in multi_indices(n, s - 2) {
                let mut full = vec![0usize; s];
                let mut pos = 0usize;
                for (k, slot) in full.iter_mut().enumerate() {
                    if k != i && k != j {
                        *slot = tn[pos];
                        pos += 1;
                    }
                }
                let acc = Scalar::sum(
                    n,
                    (0..n).map(|e| {
                        full[i] = e;
                        full[j] = e;
                        self.get(&tr, &full).clone()
                    }),
                );
                if !acc.is_zero() {
                    out.set(&tr, &tn, acc);
                }
            }
        }
        Ok(out)
    }

    fn slice_tractor(&self, slot: usize, value: usize, weight_shift: i64) -> Result<MixedField> {
        if slot >= self.tractor_slots {
            return Err(Error::SlotMismatch(format!(
                "tractor slot {slot} of {}",
                self.tractor_slots
            )));
        }
        let nd = self.tractor_dim();
        let n = self.n();
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots - 1,
            self.tensor_variance.clone(),
            self.weight + weight_shift,
        );
        for tr in multi_indices(nd, self.tractor_slots - 1) {
            let mut full = tr.clone();
            full.insert(slot, value);
            for tn in multi_indices(n, self.tensor_variance.len()) {
                let v = self.get(&full, &tn);
                if !v.is_zero() {
                    out.set(&tr, &tn, v.clone());
                }
            }
        }
        Ok(out)
    }

    /// Contract the canonical bottom tractor into the given slot; this reads
    /// off the top component and raises the weight by one.
    pub fn x_contract(&self, slot: usize) -> Result<MixedField> {
        self.slice_tractor(slot, 0, 1)
    }

    /// Contract the splitting's top tractor into the given slot; this reads
    /// off the bottom component and lowers the weight by one.
    pub fn y_contract(&self, slot: usize) -> Result<MixedField> {
        self.slice_tractor(slot, self.n() + 1, -1)
    }

    /// Contract the middle injector into the given slot: the freed label
    /// becomes a new contravariant tensor slot appended after the existing
    /// tensor slots, and the weight drops by one.
    pub fn z_contract(&self, slot: usize) -> Result<MixedField> {
        if slot >= self.tractor_slots {
            return Err(Error::SlotMismatch(format!(
                "tractor slot {slot} of {}",
                self.tractor_slots
            )));
        }
        let nd = self.tractor_dim();
        let n = self.n();
        let mut variance = self.tensor_variance.clone();
        variance.push(Variance::Contra);
        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots - 1,
            variance,
            self.weight - 1,
        );
        for tr in multi_indices(nd, self.tractor_slots - 1) {
            for tn in multi_indices(n, self.tensor_variance.len()) {
                for b in 0..n {
                    let mut full_tr = tr.clone();
                    full_tr.insert(slot, b + 1);
                    let v = self.get(&full_tr, &tn);
                    if !v.is_zero() {
                        let mut full_tn = tn.clone();
                        full_tn.push(b);
                        out.set(&tr, &full_tn, v.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Raise a tensor slot: variance flips, components are unchanged, the
    /// weight drops by two.
    pub fn raise_tensor(&self, slot: usize) -> Result<MixedField> {
        let s = self.tensor_variance.len();
        if slot >= s || self.tensor_variance[slot] != Variance::Co {
            return Err(Error::SlotMismatch(format!("raise of tensor slot {slot}")));
        }
        let mut out = self.clone();
        out.tensor_variance[slot] = Variance::Contra;
        out.weight -= 2;
        Ok(out)
    }

    /// Lower a tensor slot: variance flips, components are unchanged, the
    /// weight rises by two.
    pub fn lower_tensor(&self, slot: usize) -> Result<MixedField> {
        let s = self.tensor_variance.len();
        if slot >= s || self.tensor_variance[slot] != Variance::Contra {
            return Err(Error::SlotMismatch(format!("lower of tensor slot {slot}")));
        }
        let mut out = self.clone();
        out.tensor_variance[slot] = Variance::Co;
        out.weight += 2;
        Ok(out)
    }

    /// Tensor product followed by a tractor contraction of slot `i` of
    /// `self` against slot `j` of `other`.
    pub fn pair(&self, other: &MixedField, i: usize, j: usize) -> Result<MixedField> {
        self.tensor_product(other)?
            .contract_tractor(i, self.tractor_slots + j)
    }

    // ---------------------------------------------------------------
    // Calculus
    // ---------------------------------------------------------------

    /// Coupled derivative of the field in its own splitting.  A covariant
    /// tensor slot is prepended; tractor slots and the weight are unchanged.
    ///
    /// On a single tractor slot the connection acts, in the splitting's
    /// frame, as `(s, m_b, r) -> (Ds - m_a, Dm_b + r g_ab + s P_ab,
    /// Dr - P_ab m^b)` where `D` is the splitting's weighted derivative and
    /// `P` its Schouten tensor; this extends to several slots by the Leibniz
    /// rule and couples to tensor slots through `D`.
    pub fn covderiv(&self) -> MixedField {
        let n = self.n();
        let nd = self.tractor_dim();
        let t = self.tractor_slots;
        let s = self.tensor_variance.len();
        let upper = self
            .tensor_variance
            .iter()
            .filter(|&&v| v == Variance::Contra)
            .count() as i64;
        let lower = s as i64 - upper;
        let upsilon = self.splitting.upsilon();
        let reference = self.splitting.is_reference();
        let schouten = self.splitting.schouten();

        let mut variance = Vec::with_capacity(s + 1);
        variance.push(Variance::Co);
        variance.extend_from_slice(&self.tensor_variance);
        let mut out = MixedField::zeros_arc(self.splitting_arc(), t, variance, self.weight);

        for tr in multi_indices(nd, t) {
            let tops = tr.iter().filter(|&&v| v == 0).count() as i64;
            let bottoms = tr.iter().filter(|&&v| v == nd - 1).count() as i64;
            let density = self.weight + tops - bottoms + upper - lower;
            for tn in multi_indices(n, s) {
                for a in 0..n {
                    // Accumulate every contribution and reduce once.
                    let mut terms: Vec<Scalar> = Vec::new();
                    terms.push(self.get(&tr, &tn).diff(a));
                    if !reference {
                        // Density term.
                        if density != 0 && !upsilon[a].is_zero() {
                            let c = self.get(&tr, &tn);
                            if !c.is_zero() {
                                terms.push(&c.scale(&rat(density)) * &upsilon[a]);
                            }
                        }
                        // Index corrections for middle-block tractor labels.
                        let mut tr2 = tr.clone();
                        for i in 0..t {
                            let v = tr[i];
                            if (1..=n).contains(&v) {
                                let b = v - 1;
                                tr2[i] = a + 1;
                                let term = self.get(&tr2, &tn);
                                if !term.is_zero() && !upsilon[b].is_zero() {
                                    terms.push(-&(term * &upsilon[b]));
                                }
                                if a == b {
                                    for e in 0..n {
                                        if upsilon[e].is_zero() {
                                            continue;
                                        }
                                        tr2[i] = e + 1;
                                        let te = self.get(&tr2, &tn);
                                        if !te.is_zero() {
                                            terms.push(te * &upsilon[e]);
                                        }
                                    }
                                }
                                tr2[i] = v;
                            }
                        }
                        // Index corrections for tensor slots.
                        let mut tn2 = tn.clone();
                        for j in 0..s {
                            let orig = tn[j];
                            tn2[j] = a;
                            let term = self.get(&tr, &tn2);
                            if !term.is_zero() && !upsilon[orig].is_zero() {
                                terms.push(-&(term * &upsilon[orig]));
                            }
                            if a == orig {
                                for e in 0..n {
                                    if upsilon[e].is_zero() {
                                        continue;
                                    }
                                    tn2[j] = e;
                                    let te = self.get(&tr, &tn2);
                                    if !te.is_zero() {
                                        terms.push(te * &upsilon[e]);
                                    }
                                }
                            }
                            tn2[j] = orig;
                        }
                    }
                    // Connection action on each tractor slot.
                    let mut tr2 = tr.clone();
                    for i in 0..t {
                        let v = tr[i];
                        if v == 0 {
                            // Top component picks up minus the middle entry
                            // at the derivative label.
                            tr2[i] = a + 1;
                            let term = self.get(&tr2, &tn);
                            if !term.is_zero() {
                                terms.push(-term);
                            }
                        } else if v == nd - 1 {
                            // Bottom component picks up minus the Schouten
                            // pairing with the middle block.
                            if !reference {
                                for e in 0..n {
                                    let p = schouten.get(&[a, e]);
                                    if p.is_zero() {
                                        continue;
                                    }
                                    tr2[i] = e + 1;
                                    let term = self.get(&tr2, &tn);
                                    if !term.is_zero() {
                                        terms.push(-&(term * p));
                                    }
                                }
                            }
                        } else {
                            // Middle component at label b picks up the bottom
                            // entry times the metric and the top entry times
                            // Schouten.
                            let b = v - 1;
                            if a == b {
                                tr2[i] = nd - 1;
                                let term = self.get(&tr2, &tn);
                                if !term.is_zero() {
                                    terms.push(term.clone());
                                }
                            }
                            if !reference {
                                let p = schouten.get(&[a, b]);
                                if !p.is_zero() {
                                    tr2[i] = 0;
                                    let term = self.get(&tr2, &tn);
                                    if !term.is_zero() {
                                        terms.push(term * p);
                                    }
                                }
                            }
                        }
                        tr2[i] = v;
                    }
                    let val = Scalar::sum(n, terms);
                    if !val.is_zero() {
                        let mut full_tn = Vec::with_capacity(s + 1);
                        full_tn.push(a);
                        full_tn.extend_from_slice(&tn);
                        out.set(&tr, &full_tn, val);
                    }
                }
            }
        }
        out
    }

    /// Coupled Laplacian: two derivatives with the derivative slots traced.
    pub fn laplacian(&self) -> Result<MixedField> {
        self.covderiv().covderiv().contract_tensor(0, 1)
    }

    /// Whether the coupled derivative vanishes identically.
    pub fn is_parallel(&self) -> bool {
        self.covderiv().is_zero()
    }

    /// The normalized second-order splitting operator.  A new tractor slot
    /// is prepended and the weight drops by one: for weight `w` the result
    /// packs `(w T, D_a T, -(Lap T + w J T) / (n + 2w - 2))`.
    ///
    /// Fails with a singular-weight error when `n + 2w - 2 = 0`.
    pub fn thomas_d(&self) -> Result<MixedField> {
        let n = self.n();
        let w = self.weight;
        let denom = n as i64 + 2 * w - 2;
        if denom == 0 {
            return Err(Error::SingularWeight { n, w });
        }
        let nd = self.tractor_dim();
        let s = self.tensor_variance.len();
        let grad = self.covderiv();
        let mut bottom = self.laplacian()?;
        let j = self.splitting.j_scalar();
        if w != 0 && !j.is_zero() {
            bottom = bottom.add(&self.scale_weighted(j, -2).scale_rat(&rat(w)))?;
        }
        let bottom = bottom.scale_rat(&-ratio(1, denom));

        let mut out = MixedField::zeros_arc(
            self.splitting_arc(),
            self.tractor_slots + 1,
            self.tensor_variance.clone(),
            w - 1,
        );
        let wrat = rat(w);
        for tr in multi_indices(nd, self.tractor_slots) {
            for tn in multi_indices(n, s) {
                let mut full_tr = Vec::with_capacity(tr.len() + 1);
                full_tr.push(0);
                full_tr.extend_from_slice(&tr);
                // Top: w times the field.
                let c = self.get(&tr, &tn);
                if w != 0 && !c.is_zero() {
                    out.set(&full_tr, &tn, c.scale(&wrat));
                }
                // Middle: the derivative.
                for a in 0..n {
                    let mut full_tn = Vec::with_capacity(tn.len() + 1);
                    full_tn.push(a);
                    full_tn.extend_from_slice(&tn);
                    let g = grad.get(&tr, &full_tn);
                    if !g.is_zero() {
                        full_tr[0] = a + 1;
                        out.set(&full_tr, &tn, g.clone());
                    }
                }
                // Bottom: the normalized Laplacian part.
                let b = bottom.get(&tr, &tn);
                if !b.is_zero() {
                    full_tr[0] = nd - 1;
                    out.set(&full_tr, &tn, b.clone());
                }
            }
        }
        Ok(out)
    }

    // ---------------------------------------------------------------
    // Change of splitting
    // ---------------------------------------------------------------

    /// Re-express the same abstract field in another splitting.  With
    /// `U_b` the difference of the two splitting covectors, each tractor
    /// slot transforms as `(s, m_b, r) -> (s, m_b + U_b s,
    /// r - U^b m_b - |U|^2 s / 2)`; tensor components are unchanged.
    pub fn change_splitting(&self, new: &ScaleSpec) -> Result<MixedField> {
        if new.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: new.n(),
            });
        }
        let n = self.n();
        let nd = self.tractor_dim();
        let diff: Vec<Scalar> = (0..n)
            .map(|a| &new.upsilon()[a] - &self.splitting.upsilon()[a])
            .collect();
        let new_arc = Arc::new(new.clone());
        if diff.iter().all(Scalar::is_zero) {
            let mut out = self.clone();
            out.splitting = new_arc;
            return Ok(out);
        }
        let mut norm_sq = Scalar::zero(n);
        for u in &diff {
            norm_sq = &norm_sq + &(u * u);
        }
        let half_norm = norm_sq.scale(&ratio(1, 2));

        let mut current = self.comps.clone();
        for slot in 0..self.tractor_slots {
            let mut next = vec![Scalar::zero(n); current.len()];
            for tr in multi_indices(nd, self.tractor_slots) {
                for tn in multi_indices(n, self.tensor_variance.len()) {
                    let o = self.offset(&tr, &tn);
                    let v = tr[slot];
                    let mut src = tr.clone();
                    let val = if v == 0 {
                        current[self.offset(&tr, &tn)].clone()
                    } else if v == nd - 1 {
                        // Bottom entry gathers the bottom, middle, and top.
                        let mut terms = vec![current[o].clone()];
                        for c in 0..n {
                            if diff[c].is_zero() {
                                continue;
                            }
                            src[slot] = c + 1;
                            let m = &current[self.offset(&src, &tn)];
                            if !m.is_zero() {
                                terms.push(-&(m * &diff[c]));
                            }
                        }
                        src[slot] = 0;
                        let top = &current[self.offset(&src, &tn)];
                        if !top.is_zero() && !half_norm.is_zero() {
                            terms.push(-&(top * &half_norm));
                        }
                        Scalar::sum(n, terms)
                    } else {
                        // Middle entry at label b gathers the top.
                        let b = v - 1;
                        let mut acc = current[o].clone();
                        if !diff[b].is_zero() {
                            src[slot] = 0;
                            let top = &current[self.offset(&src, &tn)];
                            if !top.is_zero() {
                                acc = &acc + &(top * &diff[b]);
                            }
                        }
                        acc
                    };
                    next[o] = val;
                }
            }
            current = next;
        }
        Ok(MixedField {
            splitting: new_arc,
            tractor_slots: self.tractor_slots,
            tensor_variance: self.tensor_variance.clone(),
            weight: self.weight,
            comps: current,
        })
    }
}

impl PartialEq for MixedField {
    fn eq(&self, other: &MixedField) -> bool {
        self.tractor_slots == other.tractor_slots
            && self.tensor_variance == other.tensor_variance
            && self.weight == other.weight
            && self.splitting.same_splitting(&other.splitting)
            && self.comps == other.comps
    }
}

impl fmt::Display for MixedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mixed field: n={}, tractor slots={}, tensor slots={}, weight={}",
            self.n(),
            self.tractor_slots,
            self.tensor_variance.len(),
            self.weight
        )?;
        let mut any = false;
        for (tr, tn, c) in self.entries() {
            if c.is_zero() {
                continue;
            }
            any = true;
            writeln!(f, "  {} -> {}", format_mixed_key(&tr, &tn), c)?;
        }
        if !any {
            writeln!(f, "  (zero)")?;
        }
        Ok(())
    }
}

// -------------------------------------------------------------------
// JSON form
// -------------------------------------------------------------------

pub(crate) fn format_mixed_key(tr: &[usize], tn: &[usize]) -> String {
    let parts: Vec<String> = tr
        .iter()
        .map(|a| a.to_string())
        .chain(tn.iter().map(|i| (i + 1).to_string()))
        .collect();
    format!("({})", parts.join(","))
}

pub(crate) fn parse_mixed_key(
    key: &str,
    tractor_slots: usize,
    tensor_slots: usize,
    n: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let inner = key
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Schema(format!("malformed index key {key:?}")))?;
    let parts: Vec<&str> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').collect()
    };
    if parts.len() != tractor_slots + tensor_slots {
        return Err(Error::Schema(format!(
            "index key {key:?} has {} entries, expected {}",
            parts.len(),
            tractor_slots + tensor_slots
        )));
    }
    let mut tr = Vec::with_capacity(tractor_slots);
    let mut tn = Vec::with_capacity(tensor_slots);
    for (k, p) in parts.iter().enumerate() {
        let v: usize = p
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("bad index {p:?} in key {key:?}")))?;
        if k < tractor_slots {
            if v > n + 1 {
                return Err(Error::Schema(format!(
                    "tractor index {v} out of range 0..={} in key {key:?}",
                    n + 1
                )));
            }
            tr.push(v);
        } else {
            if v == 0 || v > n {
                return Err(Error::Schema(format!(
                    "tensor index {v} out of range 1..={n} in key {key:?}"
                )));
            }
            tn.push(v - 1);
        }
    }
    Ok((tr, tn))
}

#[derive(Serialize, Deserialize)]
struct MixedJson {
    n: usize,
    tractor_slots: usize,
    tensor_slots: usize,
    weight: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tensor_variance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bundle: Option<String>,
    splitting: ScaleSpec,
    components: BTreeMap<String, Scalar>,
}

impl Serialize for MixedField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut components = BTreeMap::new();
        for (tr, tn, c) in self.entries() {
            if !c.is_zero() {
                components.insert(format_mixed_key(&tr, &tn), c.clone());
            }
        }
        let json = MixedJson {
            n: self.n(),
            tractor_slots: self.tractor_slots,
            tensor_slots: self.tensor_variance.len(),
            weight: self.weight,
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
            bundle: None,
            splitting: (*self.splitting).clone(),
            components,
        };
        json.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixedField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<MixedField, D::Error> {
        let json = MixedJson::deserialize(d)?;
        MixedField::from_json_repr(json).map_err(serde::de::Error::custom)
    }
}

impl MixedField {
    fn from_json_repr(json: MixedJson) -> Result<MixedField> {
        if let Some(tag) = &json.bundle {
            if tag != "standard" {
                return Err(Error::Schema(format!(
                    "expected a standard-bundle field, found bundle tag {tag:?}"
                )));
            }
        }
        if json.splitting.n() != json.n {
            return Err(Error::DimensionMismatch {
                expected: json.n,
                got: json.splitting.n(),
            });
        }
        let variance = match &json.tensor_variance {
            None => vec![Variance::Co; json.tensor_slots],
            Some(text) => {
                let v: Result<Vec<Variance>> = text.chars().map(Variance::from_char).collect();
                let v = v?;
                if v.len() != json.tensor_slots {
                    return Err(Error::Schema(format!(
                        "tensor_variance {text:?} does not match tensor_slots {}",
                        json.tensor_slots
                    )));
                }
                v
            }
        };
        let mut out = MixedField::zeros(json.splitting, json.tractor_slots, variance, json.weight);
        for (key, value) in json.components {
            let (tr, tn) = parse_mixed_key(&key, json.tractor_slots, json.tensor_slots, json.n)?;
            if value.nvars() != json.n {
                return Err(Error::NvarsMismatch {
                    expected: json.n,
                    got: value.nvars(),
                });
            }
            out.set(&tr, &tn, value);
        }
        Ok(out)
    }
}

// -------------------------------------------------------------------
// Scale tractors
// -------------------------------------------------------------------

/// The parallel-candidate tractor `I` built from a scale, together with the
/// scale itself and the squared length `iota`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleTractor {
    field: MixedField,
    sigma: Scalar,
    iota: Scalar,
}

impl ScaleTractor {
    /// The underlying rank-one tractor field (weight `0`), decomposed in
    /// the scale's own splitting.
    pub fn field(&self) -> &MixedField {
        &self.field
    }

    pub fn sigma(&self) -> &Scalar {
        &self.sigma
    }

    /// Squared tractor length `<I, I>`; splitting-independent.
    pub fn iota(&self) -> &Scalar {
        &self.iota
    }

    /// The same tractor decomposed in another splitting.
    pub fn in_splitting(&self, s: &ScaleSpec) -> Result<MixedField> {
        self.field.change_splitting(s)
    }

    pub fn is_parallel(&self) -> bool {
        self.field.is_parallel()
    }
}

/// Apply the splitting operator to the scale of `scale`: the result packs
/// `(sigma, D_a sigma, -(Lap sigma + J sigma)/n)` in the scale's own
/// splitting.  Requires an explicit scale function.
pub fn scale_tractor(scale: &ScaleSpec) -> Result<ScaleTractor> {
    let sigma = scale
        .sigma()
        .cloned()
        .ok_or_else(|| {
            Error::PreconditionFailed(
                "scale tractor needs an explicit scale function, not a bare splitting".into(),
            )
        })?;
    if sigma.is_zero() {
        return Err(Error::DivisionByZero("scale function is zero".into()));
    }
    let lifted = MixedField::scalar_field(scale.clone(), sigma.clone(), 1)?;
    let field = lifted.thomas_d()?;
    let iota = field.pair(&field, 0, 0)?.get(&[], &[]).clone();
    Ok(ScaleTractor { field, sigma, iota })
}

/// Whether the metric of the given scale is Einstein: the scale tractor is
/// parallel.
pub fn is_einstein_scale(scale: &ScaleSpec) -> Result<bool> {
    Ok(scale_tractor(scale)?.field.is_parallel())
}

// -------------------------------------------------------------------
// Identity suite
// -------------------------------------------------------------------

/// Verdict for one identity of the randomized suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One line of the identity suite report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityOutcome {
    pub name: String,
    pub status: CheckStatus,
    /// Number of randomized or fixed cases actually evaluated.
    pub cases: usize,
    /// Number of cases skipped because a normalization denominator vanishes.
    pub skipped: usize,
    pub detail: String,
}

impl IdentityOutcome {
    pub(crate) fn from_counts(
        name: &str,
        cases: usize,
        failures: usize,
        skipped: usize,
    ) -> IdentityOutcome {
        let status = if failures > 0 {
            CheckStatus::Fail
        } else if cases == 0 {
            CheckStatus::Skipped
        } else {
            CheckStatus::Pass
        };
        let detail = match status {
            CheckStatus::Fail => format!("{failures} of {cases} cases failed"),
            CheckStatus::Skipped => "all cases hit a singular normalization weight".into(),
            CheckStatus::Pass if skipped > 0 => {
                format!("{cases} cases exact, {skipped} singular-weight cases skipped")
            }
            CheckStatus::Pass => format!("{cases} cases exact"),
        };
        IdentityOutcome {
            name: name.into(),
            status,
            cases,
            skipped,
            detail,
        }
    }
}

/// Shapes drawn for the randomized trials.
fn trial_shapes() -> Vec<(usize, Vec<Variance>)> {
    vec![
        (0, Vec::new()),
        (1, Vec::new()),
        (0, vec![Variance::Co]),
        (1, vec![Variance::Contra]),
    ]
}

/// Run the operator identity suite on `trials` random polynomial fields in
/// the reference splitting of dimension `n`, plus fixed-tractor identities
/// in both the reference and a curved splitting.  Weights cycle through
/// `{0, 1, 2}`; trials whose normalization denominator vanishes are skipped
/// and counted.  The curved fixed-tractor family divides by `n - 4` and is
/// refused (reported as skipped) at `n = 4`.
pub fn d_identities_check(n: usize, trials: usize, seed: u64) -> Result<Vec<IdentityOutcome>> {
    use rand::SeedableRng;
    if n < 3 {
        return Err(Error::PreconditionFailed(format!(
            "identity suite needs n >= 3, got {n}"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let reference = ScaleSpec::reference(n);
    let curved = ScaleSpec::from_sigma(Scalar::from_poly(
        crate::arith::parse_poly("1 + |x|^2", n).expect("fixed curved scale"),
    ))?;

    let shapes = trial_shapes();
    let mut outcomes = Vec::new();

    // Fixed-tractor identities, in both splittings.
    {
        let mut cases = 0;
        let mut failures = 0;
        for spec in [&reference, &curved] {
            let x = MixedField::x_tractor(spec.clone());
            let g = MixedField::tractor_metric(spec.clone());
            cases += 1;
            if x.thomas_d()? != g {
                failures += 1;
            }
        }
        outcomes.push(IdentityOutcome::from_counts(
            "thomas_d_of_canonical_x_gives_tractor_metric",
            cases,
            failures,
            0,
        ));
    }

    // Randomized identities in the reference splitting.
    let mut weight_cases = (0, 0, 0);
    let mut leibniz_cases = (0, 0, 0);
    let mut xcomm_cases = (0, 0, 0);
    let mut xdiv_cases = (0, 0, 0);
    let mut ddtrace_cases = (0, 0, 0);
    let mut ddcomm_cases = (0, 0, 0);

    for trial in 0..trials {
        let w = [0i64, 1, 2][trial % 3];
        let (t, variance) = shapes[trial % shapes.len()].clone();
        let field = MixedField::random(&mut rng, reference.clone(), t, variance, w, 2);
        let nn = n as i64;

        // X-contraction of the splitting operator recovers the weight.
        if nn + 2 * w - 2 != 0 {
            weight_cases.0 += 1;
            let lhs = field.thomas_d()?.x_contract(0)?;
            let rhs = field.scale_rat(&rat(w));
            if lhs != rhs {
                weight_cases.1 += 1;
            }
        } else {
            weight_cases.2 += 1;
        }

        // Modified Leibniz rule.
        {
            let v = [1i64, 2, 0][trial % 3];
            let (tv, vvar) = shapes[(trial + 1) % shapes.len()].clone();
            let vf = MixedField::random(&mut rng, reference.clone(), tv, vvar, v, 2);
            let dv_ok = nn + 2 * v - 2 != 0;
            let dw_ok = nn + 2 * w - 2 != 0;
            let dvw_ok = nn + 2 * (v + w) - 2 != 0;
            if dv_ok && dw_ok && dvw_ok {
                leibniz_cases.0 += 1;
                let dv = vf.thomas_d()?;
                let dw = field.thomas_d()?;
                let lhs = vf.tensor_product(&field)?.thomas_d()?;
                let term1 = dv.tensor_product(&field)?;
                // Bring the derivative slot of the second factor to the front.
                let mut perm: Vec<usize> = Vec::new();
                perm.push(tv); // the new slot of dw sits after vf's slots
                for k in 0..tv {
                    perm.push(k);
                }
                for k in (tv + 1)..(tv + 1 + field.tractor_slots()) {
                    perm.push(k);
                }
                let term2 = vf.tensor_product(&dw)?.permute_tractor(&perm)?;
                let cross = dv.pair(&dw, 0, 0)?;
                let x = MixedField::x_tractor(reference.clone());
                let coeff = ratio(-2, nn + 2 * (v + w) - 2);
                let term3 = x.tensor_product(&cross)?.scale_rat(&coeff);
                let rhs = term1.add(&term2)?.add(&term3)?;
                if lhs != rhs {
                    leibniz_cases.1 += 1;
                }
            } else {
                leibniz_cases.2 += 1;
            }
        }

        // Commutator with an inserted canonical bottom tractor.
        if nn + 2 * w - 2 != 0 && nn + 2 * w != 0 {
            xcomm_cases.0 += 1;
            let x = MixedField::x_tractor(reference.clone());
            let g = MixedField::tractor_metric(reference.clone());
            let d_xw = x.tensor_product(&field)?.thomas_d()?;
            let dw = field.thomas_d()?;
            let mut perm: Vec<usize> = vec![1, 0];
            perm.extend(2..(2 + field.tractor_slots()));
            let x_dw = x.tensor_product(&dw)?.permute_tractor(&perm)?;
            let lhs = d_xw.sub(&x_dw)?;
            let term1 = g.tensor_product(&field)?;
            let term2 = x
                .tensor_product(&dw)?
                .scale_rat(&ratio(-2, nn + 2 * w));
            let rhs = term1.add(&term2)?;
            if lhs != rhs {
                xcomm_cases.1 += 1;
            }
        } else {
            xcomm_cases.2 += 1;
        }

        // Divergence of an inserted bottom tractor is multiplication.
        if nn + 2 * w != 0 {
            xdiv_cases.0 += 1;
            let x = MixedField::x_tractor(reference.clone());
            let lhs = x
                .tensor_product(&field)?
                .thomas_d()?
                .contract_tractor(0, 1)?;
            let coeff = Rational::new(
                ((nn + w) * (nn + 2 * w + 2)).into(),
                (nn + 2 * w).into(),
            );
            let rhs = field.scale_rat(&coeff);
            if lhs != rhs {
                xdiv_cases.1 += 1;
            }
        } else {
            xdiv_cases.2 += 1;
        }

        // Double operator: traced and antisymmetrized parts vanish.
        if nn + 2 * w - 2 != 0 && nn + 2 * w - 4 != 0 {
            ddtrace_cases.0 += 1;
            ddcomm_cases.0 += 1;
            let dd = field.thomas_d()?.thomas_d()?;
            if !dd.contract_tractor(0, 1)?.is_zero() {
                ddtrace_cases.1 += 1;
            }
            if !dd.antisymmetrize_tractor(&[0, 1])?.is_zero() {
                ddcomm_cases.1 += 1;
            }
        } else {
            ddtrace_cases.2 += 1;
            ddcomm_cases.2 += 1;
        }
    }

    outcomes.push(IdentityOutcome::from_counts(
        "x_contraction_recovers_weight",
        weight_cases.0,
        weight_cases.1,
        weight_cases.2,
    ));
    outcomes.push(IdentityOutcome::from_counts(
        "modified_leibniz_rule",
        leibniz_cases.0,
        leibniz_cases.1,
        leibniz_cases.2,
    ));
    outcomes.push(IdentityOutcome::from_counts(
        "commutator_with_x_insertion",
        xcomm_cases.0,
        xcomm_cases.1,
        xcomm_cases.2,
    ));
    outcomes.push(IdentityOutcome::from_counts(
        "x_divergence_eigenvalue",
        xdiv_cases.0,
        xdiv_cases.1,
        xdiv_cases.2,
    ));
    outcomes.push(IdentityOutcome::from_counts(
        "double_operator_trace_vanishes",
        ddtrace_cases.0,
        ddtrace_cases.1,
        ddtrace_cases.2,
    ));
    outcomes.push(IdentityOutcome::from_counts(
        "double_operator_commutator_vanishes",
        ddcomm_cases.0,
        ddcomm_cases.1,
        ddcomm_cases.2,
    ));

    // The fixed top/middle tractor family divides by n - 4.
    if n == 4 {
        for name in [
            "thomas_d_of_canonical_top",
            "thomas_d_of_canonical_middle",
            "x_contracted_skew_d_of_top",
        ] {
            outcomes.push(IdentityOutcome {
                name: name.into(),
                status: CheckStatus::Skipped,
                cases: 0,
                skipped: 1,
                detail: "normalization divides by n - 4; refused at n = 4".into(),
            });
        }
    } else {
        // Top tractor: the splitting operator reproduces minus its square
        // (checked in the reference splitting, where the curvature
        // corrections vanish).
        {
            let y = MixedField::y_tractor(reference.clone());
            let lhs = y.thomas_d()?;
            let rhs = y.tensor_product(&y)?.neg();
            outcomes.push(IdentityOutcome::from_counts(
                "thomas_d_of_canonical_top",
                1,
                usize::from(lhs != rhs),
                0,
            ));
        }
        // Middle injector: minus twice the symmetrized top-middle product.
        {
            let y = MixedField::y_tractor(reference.clone());
            let z = MixedField::z_tractor(reference.clone());
            let lhs = z.thomas_d()?;
            let rhs = y
                .tensor_product(&z)?
                .symmetrize_tractor(&[0, 1])?
                .scale_rat(&rat(-2));
            outcomes.push(IdentityOutcome::from_counts(
                "thomas_d_of_canonical_middle",
                1,
                usize::from(lhs != rhs),
                0,
            ));
        }
        // X-contracted skew derivative of the top tractor, in both the
        // reference splitting (zero curvature trace) and a curved one.
        {
            let mut cases = 0;
            let mut failures = 0;
            for spec in [&reference, &curved] {
                let y = MixedField::y_tractor(spec.clone());
                let x = MixedField::x_tractor(spec.clone());
                let lhs = y
                    .thomas_d()?
                    .antisymmetrize_tractor(&[0, 1])?
                    .x_contract(0)?;
                let rhs = x
                    .scale_weighted(spec.j_scalar(), -2)
                    .scale_rat(&ratio(-1, n as i64 - 4));
                cases += 1;
                if lhs != rhs {
                    failures += 1;
                }
            }
            outcomes.push(IdentityOutcome::from_counts(
                "x_contracted_skew_d_of_top",
                cases,
                failures,
                0,
            ));
        }
    }

    Ok(outcomes)
}
