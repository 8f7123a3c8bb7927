//! Dense weighted tensor fields on flat reference coordinates.
//!
//! A field of rank r stores all `n^r` components as exact scalars.  Each slot
//! carries a variance (covariant `d` or contravariant `u`) and the field
//! carries a single conformal weight.  Components are always expressed in the
//! reference trivialisation where the conformal metric has components
//! `delta_ab`; consequently raising or lowering a slot leaves components
//! untouched and only adjusts the weight tag (by -2 on raising, +2 on
//! lowering), and traces are plain diagonal sums with the same bookkeeping.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::{Rational, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Variance {
    /// Covariant (lower) slot, `d` in the JSON encoding.
    Co,
    /// Contravariant (upper) slot, `u` in the JSON encoding.
    Contra,
}

impl Variance {
    pub fn to_char(self) -> char {
        match self {
            Variance::Co => 'd',
            Variance::Contra => 'u',
        }
    }

    pub fn from_char(c: char) -> Result<Variance> {
        match c {
            'd' => Ok(Variance::Co),
            'u' => Ok(Variance::Contra),
            other => Err(Error::Schema(format!("bad variance character {other:?}"))),
        }
    }
}

/// Iterate all multi-indices of the given rank with each entry in `0..n`.
pub fn multi_indices(n: usize, rank: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(n.pow(rank as u32));
    let mut idx = vec![0usize; rank];
    loop {
        out.push(idx.clone());
        // odometer increment; most significant digit first
        let mut k = rank;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// All permutations of `0..k` with their parity (`true` = even).
pub fn permutations_with_parity(k: usize) -> Vec<(Vec<usize>, bool)> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    heap_recurse(k, &mut perm, &mut out);
    // Recompute parity explicitly so the generation order doesn't matter.
    out.iter_mut().for_each(|entry| entry.1 = parity(&entry.0));
    out
}

fn heap_recurse(k: usize, perm: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, bool)>) {
    if k <= 1 {
        out.push((perm.clone(), true));
        return;
    }
    for i in 0..k {
        heap_recurse(k - 1, perm, out);
        if k % 2 == 0 {
            perm.swap(i, k - 1);
        } else {
            perm.swap(0, k - 1);
        }
    }
}

fn parity(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut even = true;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            even = !even;
        }
    }
    even
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightedTensorField {
    n: usize,
    variance: Vec<Variance>,
    weight: i64,
    comps: Vec<Scalar>,
}

impl WeightedTensorField {
    pub fn zeros(n: usize, variance: Vec<Variance>, weight: i64) -> WeightedTensorField {
        let len = n.pow(variance.len() as u32);
        WeightedTensorField {
            n,
            variance,
            weight,
            comps: vec![Scalar::zero(n); len],
        }
    }

    pub fn scalar(n: usize, weight: i64, value: Scalar) -> WeightedTensorField {
        assert_eq!(value.nvars(), n);
        WeightedTensorField {
            n,
            variance: vec![],
            weight,
            comps: vec![value],
        }
    }

    /// The conformal metric: rank 2 covariant, weight 2, components delta.
    pub fn metric(n: usize) -> WeightedTensorField {
        let mut g = WeightedTensorField::zeros(n, vec![Variance::Co, Variance::Co], 2);
        for a in 0..n {
            *g.get_mut(&[a, a]) = Scalar::one(n);
        }
        g
    }

    /// The inverse conformal metric: rank 2 contravariant, weight -2.
    pub fn inverse_metric(n: usize) -> WeightedTensorField {
        let mut g = WeightedTensorField::zeros(n, vec![Variance::Contra, Variance::Contra], -2);
        for a in 0..n {
            *g.get_mut(&[a, a]) = Scalar::one(n);
        }
        g
    }

    pub fn from_fn<F>(n: usize, variance: Vec<Variance>, weight: i64, mut f: F) -> WeightedTensorField
    where
        F: FnMut(&[usize]) -> Scalar,
    {
        let rank = variance.len();
        let mut out = WeightedTensorField::zeros(n, variance, weight);
        for idx in multi_indices(n, rank) {
            let v = f(&idx);
            assert_eq!(v.nvars(), n, "component nvars mismatch");
            *out.get_mut(&idx) = v;
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn set_weight(&mut self, weight: i64) {
        self.weight = weight;
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.rank(), "index rank mismatch");
        let mut li = 0;
        for &i in idx {
            debug_assert!(i < self.n);
            li = li * self.n + i;
        }
        li
    }

    pub fn get(&self, idx: &[usize]) -> &Scalar {
        &self.comps[self.linear_index(idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut Scalar {
        let li = self.linear_index(idx);
        &mut self.comps[li]
    }

    pub fn components(&self) -> impl Iterator<Item = (Vec<usize>, &Scalar)> {
        multi_indices(self.n, self.rank())
            .into_iter()
            .zip(self.comps.iter())
            .map(|(i, c)| (i, c))
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Scalar::is_zero)
    }

    fn same_shape(&self, other: &WeightedTensorField) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        if self.variance != other.variance {
            return Err(Error::SlotMismatch(format!(
                "variance {:?} vs {:?}",
                self.variance, other.variance
            )));
        }
        if self.weight != other.weight {
            return Err(Error::SlotMismatch(format!(
                "weight {} vs {} in addition",
                self.weight, other.weight
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &WeightedTensorField) -> Result<WeightedTensorField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            *a = &*a + b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &WeightedTensorField) -> Result<WeightedTensorField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            *a = &*a - b;
        }
        Ok(out)
    }

    pub fn neg(&self) -> WeightedTensorField {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            *c = -&*c;
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> WeightedTensorField {
        assert_eq!(s.nvars(), self.n);
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            *c = &*c * s;
        }
        out
    }

    pub fn scale_rat(&self, r: &Rational) -> WeightedTensorField {
        self.scale(&Scalar::from_rational(self.n, r.clone()))
    }

    /// Scale by a scalar carrying its own weight tag: the result weight is
    /// `self.weight + scalar_weight`.
    pub fn scale_weighted(&self, s: &Scalar, scalar_weight: i64) -> WeightedTensorField {
        let mut out = self.scale(s);
        out.weight += scalar_weight;
        out
    }

    /// Tensor product; slots of `other` follow the slots of `self`, weights add.
    pub fn tensor_product(&self, other: &WeightedTensorField) -> WeightedTensorField {
        assert_eq!(self.n, other.n, "tensor product across dimensions");
        let mut variance = self.variance.clone();
        variance.extend_from_slice(&other.variance);
        let mut out = WeightedTensorField::zeros(self.n, variance, self.weight + other.weight);
        let rank_a = self.rank();
        let rank_b = other.rank();
        for ia in multi_indices(self.n, rank_a) {
            let ca = self.get(&ia);
            if ca.is_zero() {
                continue;
            }
            for ib in multi_indices(self.n, rank_b) {
                let cb = other.get(&ib);
                if cb.is_zero() {
                    continue;
                }
                let mut idx = ia.clone();
                idx.extend_from_slice(&ib);
                *out.get_mut(&idx) = ca * cb;
            }
        }
        out
    }

    /// General contraction of slots `i` and `j`.  Opposite variance pairs
    /// contract directly; equal variance pairs contract through the conformal
    /// metric (or its inverse), shifting the weight by +2 (both upper) or -2
    /// (both lower).
    pub fn contract(&self, i: usize, j: usize) -> Result<WeightedTensorField> {
        let r = self.rank();
        if i >= r || j >= r || i == j {
            return Err(Error::IndexOutOfRange(format!(
                "contract slots {i},{j} of rank-{r} field"
            )));
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let weight_shift = match (self.variance[lo], self.variance[hi]) {
            (Variance::Co, Variance::Contra) | (Variance::Contra, Variance::Co) => 0,
            (Variance::Co, Variance::Co) => -2,
            (Variance::Contra, Variance::Contra) => 2,
        };
        let mut variance = self.variance.clone();
        variance.remove(hi);
        variance.remove(lo);
        let mut out = WeightedTensorField::zeros(self.n, variance, self.weight + weight_shift);
        for idx in multi_indices(self.n, r - 2) {
            let mut acc = Scalar::zero(self.n);
            for a in 0..self.n {
                let mut full = Vec::with_capacity(r);
                full.extend_from_slice(&idx[..lo]);
                full.push(a);
                full.extend_from_slice(&idx[lo..hi - 1]);
                full.push(a);
                full.extend_from_slice(&idx[hi - 1..]);
                acc = &acc + self.get(&full);
            }
            *out.get_mut(&idx) = acc;
        }
        Ok(out)
    }

    /// Flip slot `i` to contravariant; weight drops by 2.
    pub fn raise(&self, i: usize) -> Result<WeightedTensorField> {
        self.flip(i, Variance::Co, Variance::Contra, -2)
    }

    /// Flip slot `i` to covariant; weight rises by 2.
    pub fn lower(&self, i: usize) -> Result<WeightedTensorField> {
        self.flip(i, Variance::Contra, Variance::Co, 2)
    }

    fn flip(
        &self,
        i: usize,
        from: Variance,
        to: Variance,
        dw: i64,
    ) -> Result<WeightedTensorField> {
        if i >= self.rank() {
            return Err(Error::IndexOutOfRange(format!("slot {i}")));
        }
        if self.variance[i] != from {
            return Err(Error::SlotMismatch(format!(
                "slot {i} already has variance {:?}",
                self.variance[i]
            )));
        }
        let mut out = self.clone();
        out.variance[i] = to;
        out.weight += dw;
        Ok(out)
    }

    /// Reorder slots: `perm[k]` is the source slot feeding output slot `k`.
    pub fn permute(&self, perm: &[usize]) -> Result<WeightedTensorField> {
        let r = self.rank();
        if perm.len() != r {
            return Err(Error::SlotMismatch("permutation length".into()));
        }
        let mut seen = vec![false; r];
        for &p in perm {
            if p >= r || seen[p] {
                return Err(Error::SlotMismatch("invalid permutation".into()));
            }
            seen[p] = true;
        }
        let variance = perm.iter().map(|&p| self.variance[p]).collect();
        let mut out = WeightedTensorField::zeros(self.n, variance, self.weight);
        for idx in multi_indices(self.n, r) {
            // Output slot k carries source slot perm[k], so the source entry
            // has index idx[k] in slot perm[k].
            let mut src = vec![0usize; r];
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            *out.get_mut(&idx) = self.get(&src).clone();
        }
        Ok(out)
    }

    fn check_uniform_slots(&self, slots: &[usize]) -> Result<()> {
        if slots.is_empty() {
            return Err(Error::SlotMismatch("empty slot list".into()));
        }
        let r = self.rank();
        let mut seen = vec![false; r];
        for &s in slots {
            if s >= r {
                return Err(Error::IndexOutOfRange(format!("slot {s}")));
            }
            if seen[s] {
                return Err(Error::SlotMismatch("repeated slot".into()));
            }
            seen[s] = true;
            if self.variance[s] != self.variance[slots[0]] {
                return Err(Error::SlotMismatch(
                    "cannot (anti)symmetrize slots of mixed variance".into(),
                ));
            }
        }
        Ok(())
    }

    fn sym_helper(&self, slots: &[usize], sign_odd: bool) -> Result<WeightedTensorField> {
        self.check_uniform_slots(slots)?;
        let k = slots.len();
        let perms = permutations_with_parity(k);
        let factor = crate::arith::ratio(1, perms.len() as i64);
        let mut out = WeightedTensorField::zeros(self.n, self.variance.clone(), self.weight);
        for idx in multi_indices(self.n, self.rank()) {
            let mut acc = Scalar::zero(self.n);
            for (perm, even) in &perms {
                let mut src = idx.clone();
                for (pos, &slot) in slots.iter().enumerate() {
                    src[slot] = idx[slots[perm[pos]]];
                }
                let term = self.get(&src);
                if sign_odd && !even {
                    acc = &acc - term;
                } else {
                    acc = &acc + term;
                }
            }
            *out.get_mut(&idx) = acc.scale(&factor);
        }
        Ok(out)
    }

    /// Symmetrize over the given slots (average over permutations).
    pub fn symmetrize(&self, slots: &[usize]) -> Result<WeightedTensorField> {
        self.sym_helper(slots, false)
    }

    /// Antisymmetrize over the given slots (signed average).
    pub fn antisymmetrize(&self, slots: &[usize]) -> Result<WeightedTensorField> {
        self.sym_helper(slots, true)
    }

    pub fn is_symmetric(&self, slots: &[usize]) -> Result<bool> {
        Ok(self.symmetrize(slots)?.sub(self)?.is_zero())
    }

    /// Trace-free part of a symmetric rank-2 field: subtract `(trace/n) g`
    /// in the matching variance.
    pub fn tracefree_sym2(&self) -> Result<WeightedTensorField> {
        if self.rank() != 2 {
            return Err(Error::SlotMismatch("tracefree_sym2 needs rank 2".into()));
        }
        if self.variance[0] != self.variance[1] {
            return Err(Error::SlotMismatch(
                "tracefree_sym2 needs equal variance slots".into(),
            ));
        }
        let tr = self.contract(0, 1)?; // scalar, weight w -/+ 2
        let g = match self.variance[0] {
            Variance::Co => WeightedTensorField::metric(self.n),
            Variance::Contra => WeightedTensorField::inverse_metric(self.n),
        };
        let frac = crate::arith::ratio(1, self.n as i64);
        let correction = g.scale_weighted(tr.get(&[]), tr.weight()).scale_rat(&frac);
        self.sub(&correction)
    }

    /// Trace-free part of a fully symmetric rank-3 covariant field:
    /// `S - (g_{ab} u_c + g_{bc} u_a + g_{ca} u_b)` with `u = trace(S)/(n+2)`.
    pub fn tracefree_sym3(&self) -> Result<WeightedTensorField> {
        if self.rank() != 3 || self.variance.iter().any(|&v| v != Variance::Co) {
            return Err(Error::SlotMismatch(
                "tracefree_sym3 needs rank 3, all covariant".into(),
            ));
        }
        let t = self.contract(0, 1)?; // rank 1, weight w-2
        let u = t.scale_rat(&crate::arith::ratio(1, (self.n + 2) as i64));
        let g = WeightedTensorField::metric(self.n);
        // g_{ab} u_c in three cyclic placements
        let gu = g.tensor_product(&u); // slots (a,b,c)
        let p1 = gu.clone();
        let p2 = gu.permute(&[2, 0, 1])?; // (c,a,b) -> slots read (a,b,c)=(u,g,g): g_{bc} u_a
        let p3 = gu.permute(&[1, 2, 0])?; // g_{ca} u_b
        self.sub(&p1)?.sub(&p2)?.sub(&p3)
    }

    /// Evaluate every component at a rational point.
    pub fn eval(&self, point: &[Rational]) -> Result<Vec<Rational>> {
        self.comps.iter().map(|c| c.eval(point)).collect()
    }

    pub fn map<F>(&self, mut f: F) -> WeightedTensorField
    where
        F: FnMut(&Scalar) -> Scalar,
    {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            *c = f(c);
        }
        out
    }
}

impl fmt::Display for WeightedTensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "tensor n={} variance={} weight={}",
            self.n,
            self.variance.iter().map(|v| v.to_char()).collect::<String>(),
            self.weight
        )?;
        for (idx, c) in self.components() {
            if !c.is_zero() {
                let human: Vec<usize> = idx.iter().map(|i| i + 1).collect();
                writeln!(f, "  {human:?}: {c}")?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON: {"n":., "variance":"dd", "weight":., "components":{"(1,2)": {...}}}
// Zero components are omitted; indices are 1-based in keys.
// ---------------------------------------------------------------------------

pub(crate) fn format_index_key(idx: &[usize]) -> String {
    let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
    format!("({})", parts.join(","))
}

pub(crate) fn parse_index_key(key: &str, rank: usize, n: usize) -> Result<Vec<usize>> {
    let inner = key
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::Schema(format!("bad component key {key:?}")))?;
    let mut out = Vec::new();
    if !inner.trim().is_empty() {
        for part in inner.split(',') {
            let v: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("bad index in key {key:?}")))?;
            if v == 0 || v > n {
                return Err(Error::Schema(format!(
                    "index {v} out of range 1..={n} in key {key:?}"
                )));
            }
            out.push(v - 1);
        }
    }
    if out.len() != rank {
        return Err(Error::Schema(format!(
            "key {key:?} has {} indices, expected {rank}",
            out.len()
        )));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    n: usize,
    variance: String,
    weight: i64,
    components: std::collections::BTreeMap<String, Scalar>,
}

impl Serialize for WeightedTensorField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut components = std::collections::BTreeMap::new();
        for (idx, c) in self.components() {
            if !c.is_zero() {
                components.insert(format_index_key(&idx), c.clone());
            }
        }
        TensorJson {
            n: self.n,
            variance: self.variance.iter().map(|v| v.to_char()).collect(),
            weight: self.weight,
            components,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedTensorField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TensorJson::deserialize(d)?;
        let variance: Vec<Variance> = j
            .variance
            .chars()
            .map(Variance::from_char)
            .collect::<Result<_>>()
            .map_err(D::Error::custom)?;
        let rank = variance.len();
        let mut out = WeightedTensorField::zeros(j.n, variance, j.weight);
        for (key, val) in j.components {
            let idx = parse_index_key(&key, rank, j.n).map_err(D::Error::custom)?;
            if val.nvars() != j.n {
                return Err(D::Error::custom(format!(
                    "component {key} has nvars {} but n={}",
                    val.nvars(),
                    j.n
                )));
            }
            *out.get_mut(&idx) = val;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> WeightedTensorField {
        WeightedTensorField::from_fn(n, vec![Variance::Co, Variance::Co], 0, |idx| {
            Scalar::from_int(n, (3 * idx[0] + idx[1] + 1) as i64)
        })
    }

    #[test]
    fn decomposition_into_sym_and_antisym() {
        let t = sample(3);
        let s = t.symmetrize(&[0, 1]).unwrap();
        let a = t.antisymmetrize(&[0, 1]).unwrap();
        assert_eq!(s.add(&a).unwrap(), t);
        // antisymmetrize after symmetrize is zero
        assert!(s.antisymmetrize(&[0, 1]).unwrap().is_zero());
    }

    #[test]
    fn tracefree_has_zero_trace() {
        let t = sample(3).symmetrize(&[0, 1]).unwrap();
        let tf = t.tracefree_sym2().unwrap();
        let tr = tf.contract(0, 1).unwrap();
        assert!(tr.is_zero());
        // and weight bookkeeping: contracting two covariant slots drops 2
        assert_eq!(tr.weight(), -2);
    }

    #[test]
    fn raise_then_lower_roundtrip() {
        let t = sample(3);
        let up = t.raise(0).unwrap();
        assert_eq!(up.weight(), -2);
        assert_eq!(up.variance()[0], Variance::Contra);
        let back = up.lower(0).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn contract_mixed_variance() {
        // delta^a_b contracted = n, weight unchanged
        let mut id = WeightedTensorField::zeros(4, vec![Variance::Contra, Variance::Co], 0);
        for a in 0..4 {
            *id.get_mut(&[a, a]) = Scalar::one(4);
        }
        let tr = id.contract(0, 1).unwrap();
        assert_eq!(tr.get(&[]), &Scalar::from_int(4, 4));
        assert_eq!(tr.weight(), 0);
    }

    #[test]
    fn metric_traces_to_dimension() {
        let g = WeightedTensorField::metric(3);
        let tr = g.contract(0, 1).unwrap();
        assert_eq!(tr.get(&[]), &Scalar::from_int(3, 3));
        assert_eq!(tr.weight(), 0); // 2 - 2
    }

    #[test]
    fn permute_moves_components() {
        let t = sample(2);
        let p = t.permute(&[1, 0]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(p.get(&[a, b]), t.get(&[b, a]));
            }
        }
    }

    #[test]
    fn permute_three_cycle_tracks_variance_and_components() {
        let n = 2;
        // Slot variances (Co, Co, Contra); a 3-cycle must carry both the
        // variance and the component of each source slot to its new position.
        let t = WeightedTensorField::from_fn(
            n,
            vec![Variance::Co, Variance::Co, Variance::Contra],
            0,
            |idx| Scalar::from_int(n, (idx[0] + 2 * idx[1] + 4 * idx[2]) as i64),
        );
        // Output slots read source slots (2, 0, 1).
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(
            p.variance(),
            &[Variance::Contra, Variance::Co, Variance::Co]
        );
        for idx in multi_indices(n, 3) {
            assert_eq!(p.get(&idx), t.get(&[idx[1], idx[2], idx[0]]));
        }
    }

    #[test]
    fn tracefree_sym3_kills_traces() {
        let n = 3;
        let v = WeightedTensorField::from_fn(n, vec![Variance::Co], 0, |i| {
            Scalar::from_int(n, i[0] as i64 + 1)
        });
        let g = WeightedTensorField::metric(n);
        let s = g
            .tensor_product(&v)
            .symmetrize(&[0, 1, 2])
            .unwrap();
        let tf = s.tracefree_sym3().unwrap();
        assert!(tf.is_zero(), "pure-trace symmetric 3-tensor must vanish");
    }

    #[test]
    fn json_roundtrip() {
        let t = sample(3);
        let text = serde_json::to_string(&t).unwrap();
        let back: WeightedTensorField = serde_json::from_str(&text).unwrap();
        assert_eq!(t, back);
        // zero components are omitted from the encoding
        let mut sparse = WeightedTensorField::zeros(3, vec![Variance::Co], 2);
        *sparse.get_mut(&[1]) = Scalar::from_int(3, 5);
        let text = serde_json::to_string(&sparse).unwrap();
        assert!(text.contains("(2)"));
        assert!(!text.contains("(1)"));
        let back: WeightedTensorField = serde_json::from_str(&text).unwrap();
        assert_eq!(sparse, back);
    }

    #[test]
    fn parity_helper_is_consistent() {
        let perms = permutations_with_parity(3);
        assert_eq!(perms.len(), 6);
        let even: usize = perms.iter().filter(|(_, e)| *e).count();
        assert_eq!(even, 3);
        // identity is even
        assert!(perms.iter().any(|(p, e)| p == &vec![0, 1, 2] && *e));
        // single swap is odd
        assert!(perms.iter().any(|(p, e)| p == &vec![1, 0, 2] && !*e));
    }
}
