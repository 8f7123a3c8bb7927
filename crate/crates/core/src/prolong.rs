//! Half and full prolongations of conformal Killing vectors and rank-2
//! conformal Killing tensors.
//!
//! A conformal Killing 1-form `k_a` (weight 2) lifts to its *half
//! prolongation* `K_A = (0, k_a, −(1/n)∇·k)`, a weight-1 tractor with
//! `X^A K_A = 0`; the skew derivative `𝕂_AB = 𝔻_[A K_B]` is its *full
//! prolongation*, parallel on the flat reference.  A symmetric trace-free
//! conformal Killing 2-tensor `k_ab` (weight 4) lifts to a symmetric
//! trace-free weight-2 pair tractor `K_AB` with `X^A K_AB = 0` and
//! `𝔻^A K_AB = 0`; on the flat reference `𝕂_ABCD = 𝔻_A 𝔻_C K_BD` is
//! parallel and lands in the pair-symmetry space checked by
//! [`is_k_symmetric`], which [`to_weyl`]/[`from_weyl`] identify with the
//! space of algebraic Weyl tensors checked by [`is_weyl_symmetric`].
//!
//! Conformal-Killing-ness is re-verified wherever a theorem needs it, and
//! violations fail loudly with [`Error::NotConformalKilling`].

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::ratio;
use crate::conformal::ScaleSpec;
use crate::error::{Error, Result};
use crate::tensor::{Variance, WeightedTensorField};
use crate::tractor::MixedField;

// ---------------------------------------------------------------------
// Shape guards
// ---------------------------------------------------------------------

fn check_vector_shape(k: &WeightedTensorField, scale: &ScaleSpec) -> Result<()> {
    if k.n() != scale.n() {
        return Err(Error::DimensionMismatch {
            expected: scale.n(),
            got: k.n(),
        });
    }
    if k.variance() != [Variance::Co] || k.weight() != 2 {
        return Err(Error::PreconditionFailed(format!(
            "a conformal Killing candidate must be a covariant 1-form of weight 2, \
             got variance {:?} and weight {}",
            k.variance(),
            k.weight()
        )));
    }
    Ok(())
}

fn check_tensor_shape(k: &WeightedTensorField, scale: &ScaleSpec) -> Result<()> {
    if k.n() != scale.n() {
        return Err(Error::DimensionMismatch {
            expected: scale.n(),
            got: k.n(),
        });
    }
    if k.variance() != [Variance::Co, Variance::Co] || k.weight() != 4 {
        return Err(Error::PreconditionFailed(format!(
            "a rank-2 conformal Killing candidate must be a covariant 2-tensor of weight 4, \
             got variance {:?} and weight {}",
            k.variance(),
            k.weight()
        )));
    }
    if !k.is_symmetric(&[0, 1])? {
        return Err(Error::PreconditionFailed(
            "rank-2 conformal Killing candidates must be symmetric".into(),
        ));
    }
    if !k.contract(0, 1)?.is_zero() {
        return Err(Error::PreconditionFailed(
            "rank-2 conformal Killing candidates must be trace-free".into(),
        ));
    }
    Ok(())
}

fn first_nonzero_tensor(t: &WeightedTensorField) -> Option<Vec<usize>> {
    t.components()
        .find(|(_, c)| !c.is_zero())
        .map(|(idx, _)| idx)
}

fn first_nonzero_mixed(m: &MixedField) -> Option<(Vec<usize>, Vec<usize>)> {
    m.entries()
        .find(|(_, _, c)| !c.is_zero())
        .map(|(tr, tn, _)| (tr, tn))
}

// ---------------------------------------------------------------------
// Conformal Killing predicates
// ---------------------------------------------------------------------

/// Residual of the conformal Killing equation for a weight-2 1-form:
/// the trace-free symmetric part of `∇_a k_b`.
pub fn ck_vector_residual(
    k: &WeightedTensorField,
    scale: &ScaleSpec,
) -> Result<WeightedTensorField> {
    check_vector_shape(k, scale)?;
    scale.covderiv(k).symmetrize(&[0, 1])?.tracefree_sym2()
}

/// Is `k_a` (weight 2) a conformal Killing 1-form for the given scale's
/// connection?  The equation is conformally invariant, so the answer does
/// not depend on the scale.
pub fn is_ck_vector(k: &WeightedTensorField, scale: &ScaleSpec) -> Result<bool> {
    Ok(ck_vector_residual(k, scale)?.is_zero())
}

/// Residual of the rank-2 conformal Killing equation: the trace-free part
/// of `∇_(a k_bc)`.
pub fn ck_tensor_residual(
    k: &WeightedTensorField,
    scale: &ScaleSpec,
) -> Result<WeightedTensorField> {
    check_tensor_shape(k, scale)?;
    scale.covderiv(k).symmetrize(&[0, 1, 2])?.tracefree_sym3()
}

/// Is the symmetric trace-free `k_ab` (weight 4) a rank-2 conformal
/// Killing tensor?  Non-symmetric or trace-carrying input is rejected as a
/// precondition failure rather than reported as `false`.
pub fn is_ck_tensor(k: &WeightedTensorField, scale: &ScaleSpec) -> Result<bool> {
    Ok(ck_tensor_residual(k, scale)?.is_zero())
}

// ---------------------------------------------------------------------
// Rank 1: conformal Killing vectors
// ---------------------------------------------------------------------

/// Half prolongation of a conformal Killing 1-form:
/// `K_A = (0, k_a, −(1/n)∇_a k^a)`, a weight-1 tractor with `X^A K_A = 0`.
pub fn half_prolong_vector(k: &WeightedTensorField, scale: &ScaleSpec) -> Result<MixedField> {
    let residual = ck_vector_residual(k, scale)?;
    if let Some(idx) = first_nonzero_tensor(&residual) {
        return Err(Error::NotConformalKilling(format!(
            "trace-free symmetric derivative component {idx:?}"
        )));
    }
    let n = scale.n();
    let div = scale.covderiv(k).contract(0, 1)?; // ∇_a k^a, weight 0
    let rho = div.get(&[]).scale(&ratio(-1, n as i64));
    let mut out = MixedField::zeros(scale.clone(), 1, Vec::new(), 1);
    for a in 0..n {
        out.set(&[a + 1], &[], k.get(&[a]).clone());
    }
    out.set(&[n + 1], &[], rho);
    Ok(out)
}

/// Full prolongation of a conformal Killing vector from its half
/// prolongation: `𝕂_AB = 𝔻_[A K_B]`.  The derivative `𝔻_A K_B` is
/// verified to be skew (it is, exactly when the underlying 1-form is
/// conformal Killing), and on the flat reference splitting the result is
/// verified to be parallel.
pub fn full_prolong_vector(half: &MixedField) -> Result<MixedField> {
    if half.tractor_slots() != 1 || half.tensor_rank() != 0 || half.weight() != 1 {
        return Err(Error::PreconditionFailed(format!(
            "a rank-1 half prolongation is a weight-1 tractor, got {} slots at weight {}",
            half.tractor_slots(),
            half.weight()
        )));
    }
    if !half.x_contract(0)?.is_zero() {
        return Err(Error::PreconditionFailed(
            "a half prolongation must satisfy X^A K_A = 0".into(),
        ));
    }
    let d = half.thomas_d()?;
    let sym = d.symmetrize_tractor(&[0, 1])?;
    if let Some((tr, _)) = first_nonzero_mixed(&sym) {
        return Err(Error::NotConformalKilling(format!(
            "symmetric part of the prolonged derivative at slot pair {tr:?}"
        )));
    }
    let kk = d.antisymmetrize_tractor(&[0, 1])?;
    if half.splitting().is_reference() && !kk.is_parallel() {
        return Err(Error::NotConformalKilling(
            "full prolongation fails to be parallel on the flat reference".into(),
        ));
    }
    Ok(kk)
}

/// Read the underlying weight-2 conformal Killing 1-form back off a rank-1
/// half prolongation: `k_a = Z_a{}^A K_A`.
pub fn top_slot_vector(half: &MixedField) -> Result<WeightedTensorField> {
    half.z_contract(0)?.lower_tensor(0)?.to_tensor()
}

// ---------------------------------------------------------------------
// Rank 2: conformal Killing tensors
// ---------------------------------------------------------------------

/// Assemble the symmetric trace-free weight-2 pair tractor with vanishing
/// top contraction from its three slot fields:
/// `K_AB = k_ab Z⊗Z − ρ_a Z_(A{}^a X_B) + ρ X_A X_B`.
///
/// `k_ab` must be symmetric trace-free of weight 4, `ρ_a` of weight 2, and
/// `ρ` a weight-0 scalar; no relation between them is assumed, so this
/// parameterizes *all* sections killed by `X^A` contraction.
pub fn pair_tractor_from_slots(
    k: &WeightedTensorField,
    rho_a: &WeightedTensorField,
    rho: &WeightedTensorField,
    scale: &ScaleSpec,
) -> Result<MixedField> {
    check_tensor_shape(k, scale)?;
    if rho_a.variance() != [Variance::Co] || rho_a.weight() != 2 || rho_a.n() != scale.n() {
        return Err(Error::PreconditionFailed(
            "the middle slot field must be a covariant 1-form of weight 2".into(),
        ));
    }
    if rho.rank() != 0 || rho.weight() != 0 || rho.n() != scale.n() {
        return Err(Error::PreconditionFailed(
            "the bottom slot field must be a weight-0 scalar".into(),
        ));
    }
    let n = scale.n();
    let mut out = MixedField::zeros(scale.clone(), 2, Vec::new(), 2);
    for a in 0..n {
        for b in 0..n {
            out.set(&[a + 1, b + 1], &[], k.get(&[a, b]).clone());
        }
        let half_rho = rho_a.get(&[a]).scale(&ratio(-1, 2));
        out.set(&[a + 1, n + 1], &[], half_rho.clone());
        out.set(&[n + 1, a + 1], &[], half_rho);
    }
    out.set(&[n + 1, n + 1], &[], rho.get(&[]).clone());
    Ok(out)
}

/// Half prolongation of a symmetric trace-free weight-4 2-tensor:
/// the pair tractor with
/// `ρ_a = (2/(n+2)) ∇^b k_ab` and
/// `ρ = (1/(n+1)) (½ ∇^a ρ_a + P^{ab} k_ab)`,
/// the unique choice making `𝔻^A K_AB = 0`.  Total on well-shaped input;
/// `k` need not be conformal Killing for the construction itself.
pub fn half_prolong_tensor(k: &WeightedTensorField, scale: &ScaleSpec) -> Result<MixedField> {
    check_tensor_shape(k, scale)?;
    let n = scale.n();
    // ∇^b k_ab: derivative slot contracted against the second tensor slot.
    let rho_a = scale
        .covderiv(k)
        .contract(0, 2)?
        .scale_rat(&ratio(2, n as i64 + 2));
    let div_rho = scale.covderiv(&rho_a).contract(0, 1)?;
    let pk = scale
        .schouten()
        .tensor_product(k)
        .contract(0, 2)?
        .contract(0, 1)?;
    let rho = div_rho
        .scale_rat(&ratio(1, 2))
        .add(&pk)?
        .scale_rat(&ratio(1, n as i64 + 1));
    pair_tractor_from_slots(k, &rho_a, &rho, scale)
}

fn check_pair_shape(half: &MixedField) -> Result<()> {
    if half.tractor_slots() != 2 || half.tensor_rank() != 0 || half.weight() != 2 {
        return Err(Error::PreconditionFailed(format!(
            "a rank-2 half prolongation is a weight-2 pair tractor, got {} slots at weight {}",
            half.tractor_slots(),
            half.weight()
        )));
    }
    if *half != half.permute_tractor(&[1, 0])? {
        return Err(Error::PreconditionFailed(
            "a rank-2 half prolongation must be symmetric".into(),
        ));
    }
    if !half.contract_tractor(0, 1)?.is_zero() {
        return Err(Error::PreconditionFailed(
            "a rank-2 half prolongation must be trace-free".into(),
        ));
    }
    if !half.x_contract(0)?.is_zero() {
        return Err(Error::PreconditionFailed(
            "a rank-2 half prolongation must satisfy X^A K_AB = 0".into(),
        ));
    }
    Ok(())
}

/// Full prolongation of a rank-2 conformal Killing tensor on the flat
/// reference splitting: `𝕂_ABCD = 𝔻_A 𝔻_C K_BD`, verified to lie in the
/// pair-symmetry space and to be parallel — both fail exactly when the
/// underlying tensor is not conformal Killing.
pub fn full_prolong_tensor(half: &MixedField) -> Result<MixedField> {
    if !half.splitting().is_reference() {
        return Err(Error::PreconditionFailed(
            "the full prolongation is only defined over the flat reference splitting".into(),
        ));
    }
    check_pair_shape(half)?;
    // 𝔻_C K_BD has slot order (C, B, D); the second derivative prepends A
    // giving (A, C, B, D), so swap the middle two slots for (A, B, C, D).
    let kk = half.thomas_d()?.thomas_d()?.permute_tractor(&[0, 2, 1, 3])?;
    if !is_k_symmetric(&kk)? {
        return Err(Error::NotConformalKilling(
            "rank-4 prolongation leaves the pair-symmetry space".into(),
        ));
    }
    if !kk.is_parallel() {
        return Err(Error::NotConformalKilling(
            "rank-4 prolongation fails to be parallel".into(),
        ));
    }
    let recovered = half_from_full(&kk)?;
    if recovered != *half {
        return Err(Error::InternalInconsistency(
            "double top contraction of the full prolongation does not recover the half".into(),
        ));
    }
    Ok(kk)
}

/// Read the weight-4 tensor back off a rank-2 half prolongation:
/// `k_ab = Z^A{}_a Z^B{}_b K_AB`.
pub fn top_slot_pair(half: &MixedField) -> Result<WeightedTensorField> {
    half.z_contract(0)?
        .z_contract(0)?
        .lower_tensor(0)?
        .lower_tensor(1)?
        .to_tensor()
}

/// Recover the half prolongation from a rank-4 pair-symmetric tractor:
/// `K_BD = ½ X^A X^C 𝕂_ABCD`.
pub fn half_from_full(full: &MixedField) -> Result<MixedField> {
    Ok(full
        .x_contract(0)? // leaves (B, C, D)
        .x_contract(1)? // leaves (B, D)
        .scale_rat(&ratio(1, 2)))
}

/// Top slot of a rank-4 tractor with Riemann-type symmetries:
/// `top(R)_ac = 4 Z^A{}_a Z^C{}_c X^B X^D R_ABCD`, a weight-4 2-tensor.
pub fn top_slot_rank4(t: &MixedField) -> Result<WeightedTensorField> {
    if t.tractor_slots() != 4 || t.tensor_rank() != 0 {
        return Err(Error::SlotMismatch(format!(
            "rank-4 top slot extraction needs 4 tractor slots, got {}",
            t.tractor_slots()
        )));
    }
    t.x_contract(1)? // leaves (A, C, D)
        .x_contract(2)? // leaves (A, C)
        .z_contract(0)? // leaves (C), appends tensor slot a
        .z_contract(0)? // leaves (), appends tensor slot c
        .lower_tensor(0)?
        .lower_tensor(1)?
        .scale_rat(&crate::arith::rat(4))
        .to_tensor()
}

// ---------------------------------------------------------------------
// Rank-4 symmetry spaces and the Weyl-type conversion
// ---------------------------------------------------------------------

fn check_rank4(t: &MixedField) -> Result<()> {
    if t.tractor_slots() != 4 || t.tensor_rank() != 0 {
        return Err(Error::SlotMismatch(format!(
            "symmetry-space membership needs 4 tractor slots and no tensor slots, got ({}, {})",
            t.tractor_slots(),
            t.tensor_rank()
        )));
    }
    Ok(())
}

/// Membership in the pair-symmetry space:
/// `T_ABCD = T_ADCB = T_CBAD`, `T_A(BCD) = 0`, and `T_ABC{}^C = 0`.
/// Members automatically also satisfy `T_ABCD = T_BADC` and are trace-free
/// over every slot pair.
pub fn is_k_symmetric(t: &MixedField) -> Result<bool> {
    check_rank4(t)?;
    Ok(*t == t.permute_tractor(&[0, 3, 2, 1])?
        && *t == t.permute_tractor(&[2, 1, 0, 3])?
        && t.symmetrize_tractor(&[1, 2, 3])?.is_zero()
        && t.contract_tractor(2, 3)?.is_zero())
}

/// Membership in the space of algebraic Weyl tensors:
/// skew in the first and second pair, first-Bianchi `T_A[BCD] = 0`, and
/// trace-free `T_ABC{}^B = 0`.
pub fn is_weyl_symmetric(t: &MixedField) -> Result<bool> {
    check_rank4(t)?;
    Ok(t.add(&t.permute_tractor(&[1, 0, 2, 3])?)?.is_zero()
        && t.add(&t.permute_tractor(&[0, 1, 3, 2])?)?.is_zero()
        && t.antisymmetrize_tractor(&[1, 2, 3])?.is_zero()
        && t.contract_tractor(1, 3)?.is_zero())
}

/// Convert a pair-symmetric rank-4 tractor to its Weyl-symmetric image:
/// `W_ABCD = T_[AB][CD]`.
pub fn to_weyl(t: &MixedField) -> Result<MixedField> {
    if !is_k_symmetric(t)? {
        return Err(Error::PreconditionFailed(
            "input does not lie in the pair-symmetry space".into(),
        ));
    }
    t.antisymmetrize_tractor(&[0, 1])?
        .antisymmetrize_tractor(&[2, 3])
}

/// Inverse of [`to_weyl`]: `T_ABCD = (2/3)(W_ABCD + W_ADCB)`.
pub fn from_weyl(w: &MixedField) -> Result<MixedField> {
    if !is_weyl_symmetric(w)? {
        return Err(Error::PreconditionFailed(
            "input does not lie in the space of algebraic Weyl tensors".into(),
        ));
    }
    Ok(w.add(&w.permute_tractor(&[0, 3, 2, 1])?)?
        .scale_rat(&ratio(2, 3)))
}

// ---------------------------------------------------------------------
// Prolongation records
// ---------------------------------------------------------------------

/// How far to prolong when building a [`ProlongationRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProlongationLevel {
    Half,
    Full,
    Weyl,
}

impl ProlongationLevel {
    pub fn parse(s: &str) -> Result<ProlongationLevel> {
        match s {
            "half" => Ok(ProlongationLevel::Half),
            "full" => Ok(ProlongationLevel::Full),
            "weyl" => Ok(ProlongationLevel::Weyl),
            other => Err(Error::Parse(format!(
                "unknown prolongation level {other:?}; expected half, full, or weyl"
            ))),
        }
    }
}

/// A bundled prolongation run: the input tensor, the scale it was read in,
/// a hash of the canonical input serialization, and the computed
/// prolongations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProlongationRecord {
    pub rank: u8,
    pub scale: ScaleSpec,
    pub input_sha256: String,
    pub k: WeightedTensorField,
    pub half: MixedField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<MixedField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<MixedField>,
}

/// Hex SHA-256 of a value's canonical JSON serialization.
pub fn sha256_json<T: Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string(value)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Prolong `k` (rank 1 or 2 by shape) to the requested level.  Full and
/// Weyl levels require the flat reference splitting; the Weyl level is
/// rank-2 only.
pub fn prolongation_record(
    k: &WeightedTensorField,
    scale: &ScaleSpec,
    level: ProlongationLevel,
) -> Result<ProlongationRecord> {
    let rank = k.rank();
    let (half, full, weyl) = match rank {
        1 => {
            if level == ProlongationLevel::Weyl {
                return Err(Error::PreconditionFailed(
                    "the Weyl-type conversion applies to rank-2 prolongations only".into(),
                ));
            }
            let half = half_prolong_vector(k, scale)?;
            let full = if level == ProlongationLevel::Half {
                None
            } else {
                Some(full_prolong_vector(&half)?)
            };
            (half, full, None)
        }
        2 => {
            let half = half_prolong_tensor(k, scale)?;
            let full = if level == ProlongationLevel::Half {
                None
            } else {
                Some(full_prolong_tensor(&half)?)
            };
            let weyl = match (level, &full) {
                (ProlongationLevel::Weyl, Some(f)) => Some(to_weyl(f)?),
                _ => None,
            };
            (half, full, weyl)
        }
        other => {
            return Err(Error::PreconditionFailed(format!(
                "prolongation is defined for rank 1 and 2, got rank {other}"
            )));
        }
    };
    Ok(ProlongationRecord {
        rank: rank as u8,
        scale: scale.clone(),
        input_sha256: sha256_json(k)?,
        k: k.clone(),
        half,
        full,
        weyl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{parse_poly, random_poly, Scalar};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn poly(src: &str, n: usize) -> Scalar {
        Scalar::from_poly(parse_poly(src, n).unwrap())
    }

    fn one_form(n: usize, f: impl Fn(usize) -> Scalar) -> WeightedTensorField {
        WeightedTensorField::from_fn(n, vec![Variance::Co], 2, |idx| f(idx[0]))
    }

    fn translation(n: usize, dir: usize) -> WeightedTensorField {
        one_form(n, |a| {
            if a == dir {
                Scalar::one(n)
            } else {
                Scalar::zero(n)
            }
        })
    }

    fn dilation(n: usize) -> WeightedTensorField {
        one_form(n, |a| poly(&format!("x{}", a + 1), n))
    }

    fn rotation(n: usize, i: usize, j: usize) -> WeightedTensorField {
        one_form(n, |a| {
            if a == j {
                poly(&format!("x{}", i + 1), n)
            } else if a == i {
                -&poly(&format!("x{}", j + 1), n)
            } else {
                Scalar::zero(n)
            }
        })
    }

    /// Symmetric trace-free product of two weight-2 1-forms, a weight-4
    /// rank-2 tensor.
    fn sym_product(v: &WeightedTensorField, w: &WeightedTensorField) -> WeightedTensorField {
        v.tensor_product(w)
            .symmetrize(&[0, 1])
            .unwrap()
            .tracefree_sym2()
            .unwrap()
    }

    fn random_sym_tracefree(rng: &mut ChaCha8Rng, n: usize, deg: u32) -> WeightedTensorField {
        WeightedTensorField::from_fn(n, vec![Variance::Co, Variance::Co], 4, |_| {
            Scalar::from_poly(random_poly(rng, n, deg))
        })
        .symmetrize(&[0, 1])
        .unwrap()
        .tracefree_sym2()
        .unwrap()
    }

    #[test]
    fn conformal_killing_vector_examples() {
        let n = 3;
        let flat = ScaleSpec::reference(n);
        assert!(is_ck_vector(&translation(n, 0), &flat).unwrap());
        assert!(is_ck_vector(&dilation(n), &flat).unwrap());
        assert!(is_ck_vector(&rotation(n, 0, 1), &flat).unwrap());

        // Special conformal generators are conformal Killing as well.
        let special = one_form(n, |a| {
            let x1 = poly("x1", n);
            let q = poly("|x|^2", n);
            if a == 0 {
                &(&x1 * &x1).scale(&crate::arith::rat(2)) - &q
            } else {
                (&poly(&format!("x{}", a + 1), n) * &x1).scale(&crate::arith::rat(2))
            }
        });
        assert!(is_ck_vector(&special, &flat).unwrap());

        // A quadratic shear is not conformal Killing.
        let shear = one_form(n, |a| {
            if a == 1 {
                poly("x1^2", n)
            } else {
                Scalar::zero(n)
            }
        });
        assert!(!is_ck_vector(&shear, &flat).unwrap());

        // Wrong weight is a shape error, not a `false`.
        let mut bad = translation(n, 0);
        bad.set_weight(0);
        assert!(is_ck_vector(&bad, &flat).is_err());
    }

    #[test]
    fn half_prolongation_of_vectors_has_the_stated_slots() {
        let n = 3;
        let flat = ScaleSpec::reference(n);

        let kt = half_prolong_vector(&translation(n, 0), &flat).unwrap();
        assert_eq!(*kt.get(&[1], &[]), Scalar::one(n));
        for v in [0, 2, 3, n + 1] {
            if v != 1 {
                assert!(kt.get(&[v], &[]).is_zero());
            }
        }

        // Dilation: middle slot x_a, bottom slot −(1/n)∇·k = −1.
        let kd = half_prolong_vector(&dilation(n), &flat).unwrap();
        for a in 0..n {
            assert_eq!(*kd.get(&[a + 1], &[]), poly(&format!("x{}", a + 1), n));
        }
        assert_eq!(*kd.get(&[n + 1], &[]), -&Scalar::one(n));
        assert!(kd.get(&[0], &[]).is_zero());
        assert!(kd.x_contract(0).unwrap().is_zero());

        // Non-conformal-Killing input fails loudly.
        let shear = one_form(n, |a| {
            if a == 1 {
                poly("x1^2", n)
            } else {
                Scalar::zero(n)
            }
        });
        assert!(matches!(
            half_prolong_vector(&shear, &flat),
            Err(Error::NotConformalKilling(_))
        ));
    }

    #[test]
    fn full_prolongation_of_vectors_is_skew_and_parallel() {
        let n = 3;
        let flat = ScaleSpec::reference(n);

        // Translation: 𝕂 = Y ∧ Z-block in the x¹ direction.
        let kk = full_prolong_vector(&half_prolong_vector(&translation(n, 0), &flat).unwrap())
            .unwrap();
        assert_eq!(*kk.get(&[0, 1], &[]), Scalar::one(n));
        assert_eq!(*kk.get(&[1, 0], &[]), -&Scalar::one(n));
        let mut nonzero = 0;
        for (_, _, c) in kk.entries() {
            if !c.is_zero() {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 2);
        assert!(kk.is_parallel());

        // Dilation: the middle blocks carry ±x and the Y∧X block carries ±1.
        let kd =
            full_prolong_vector(&half_prolong_vector(&dilation(n), &flat).unwrap()).unwrap();
        for b in 0..n {
            assert_eq!(*kd.get(&[0, b + 1], &[]), poly(&format!("x{}", b + 1), n));
            assert_eq!(*kd.get(&[b + 1, 0], &[]), -&poly(&format!("x{}", b + 1), n));
        }
        assert_eq!(*kd.get(&[0, n + 1], &[]), -&Scalar::one(n));
        assert_eq!(*kd.get(&[n + 1, 0], &[]), Scalar::one(n));
        assert!(kd.is_parallel());

        // Rotation: skew and parallel, and the top slot returns the input.
        let rot = rotation(n, 0, 1);
        let half = half_prolong_vector(&rot, &flat).unwrap();
        let kr = full_prolong_vector(&half).unwrap();
        assert!(kr.is_parallel());
        assert_eq!(top_slot_vector(&half).unwrap(), rot);

        // The zero 1-form prolongs to zero.
        let zero = one_form(n, |_| Scalar::zero(n));
        let kz = full_prolong_vector(&half_prolong_vector(&zero, &flat).unwrap()).unwrap();
        assert!(kz.is_zero());
    }

    #[test]
    fn vector_prolongation_is_conformally_invariant() {
        let n = 3;
        let flat = ScaleSpec::reference(n);
        let curved = ScaleSpec::from_sigma(poly("1 + |x|^2", n)).unwrap();
        let potential = ScaleSpec::from_potential(&poly("x1*x2", n)).unwrap();
        for k in [dilation(n), rotation(n, 1, 2)] {
            let href = half_prolong_vector(&k, &flat).unwrap();
            for other in [&curved, &potential] {
                let direct = half_prolong_vector(&k, other).unwrap();
                assert_eq!(href.change_splitting(other).unwrap(), direct);
                // The skew full prolongation agrees across splittings too.
                let full_other = full_prolong_vector(&direct).unwrap();
                let full_ref = full_prolong_vector(&href).unwrap();
                assert_eq!(full_ref.change_splitting(other).unwrap(), full_other);
            }
        }
    }

    #[test]
    fn conformal_killing_tensor_examples() {
        let n = 3;
        let flat = ScaleSpec::reference(n);

        // Symmetric trace-free products of flat conformal Killing 1-forms.
        let t1 = translation(n, 0);
        let t2 = translation(n, 1);
        let r = rotation(n, 0, 1);
        let d = dilation(n);
        for k in [
            sym_product(&t1, &t2),
            sym_product(&t1, &t1),
            sym_product(&r, &r),
            sym_product(&r, &d),
        ] {
            assert!(is_ck_tensor(&k, &flat).unwrap());
        }

        // The conformal metric is rejected outright: it carries trace.
        let mut g4 = WeightedTensorField::metric(n);
        g4.set_weight(4);
        assert!(matches!(
            is_ck_tensor(&g4, &flat),
            Err(Error::PreconditionFailed(_))
        ));

        // A generic symmetric trace-free polynomial tensor is not CK.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bad = random_sym_tracefree(&mut rng, n, 2);
        assert!(!is_ck_tensor(&bad, &flat).unwrap());
    }

    #[test]
    fn half_prolongation_of_tensors_fills_the_stated_slots() {
        let n = 3;
        let flat = ScaleSpec::reference(n);

        // Constant coefficients: both divergence slots vanish.
        let k = sym_product(&translation(n, 0), &translation(n, 1));
        let half = half_prolong_tensor(&k, &flat).unwrap();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(half.get(&[a + 1, b + 1], &[]), k.get(&[a, b]));
            }
            assert!(half.get(&[a + 1, n + 1], &[]).is_zero());
        }
        assert!(half.get(&[n + 1, n + 1], &[]).is_zero());
        assert_eq!(top_slot_pair(&half).unwrap(), k);

        // Quadratic coefficients: the middle slot is nonzero.
        let r = rotation(n, 0, 1);
        let kr = sym_product(&r, &r);
        let hr = half_prolong_tensor(&kr, &flat).unwrap();
        assert!((0..n).any(|a| !hr.get(&[a + 1, n + 1], &[]).is_zero()));
        assert_eq!(top_slot_pair(&hr).unwrap(), kr);
    }

    /// `𝔻^A K_AB` for a pair tractor, computed with the Thomas-D operator.
    fn d_divergence(k: &MixedField) -> MixedField {
        k.thomas_d().unwrap().contract_tractor(0, 1).unwrap()
    }

    #[test]
    fn divergence_of_assembled_pair_tractors_matches_the_closed_form() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for scale in [
            ScaleSpec::reference(n),
            ScaleSpec::from_potential(&poly("x1*x3", n)).unwrap(),
        ] {
            let k = random_sym_tracefree(&mut rng, n, 2);
            let rho_a = WeightedTensorField::from_fn(n, vec![Variance::Co], 2, |_| {
                Scalar::from_poly(random_poly(&mut rng, n, 2))
            });
            let rho = WeightedTensorField::scalar(
                n,
                0,
                Scalar::from_poly(random_poly(&mut rng, n, 2)),
            );
            let pair = pair_tractor_from_slots(&k, &rho_a, &rho, &scale).unwrap();

            // Closed form: ((n+4)/(n+2)) [ (∇^a k_ab − ((n+2)/2) ρ_b) Z_B{}^b
            //   + ((n+1) ρ − k_ab P^{ab} − ½ ∇^a ρ_a) X_B ].
            let divk = scale.covderiv(&k).contract(0, 1).unwrap();
            let mid = divk
                .sub(&rho_a.scale_rat(&ratio(n as i64 + 2, 2)))
                .unwrap();
            let pk = scale
                .schouten()
                .tensor_product(&k)
                .contract(0, 2)
                .unwrap()
                .contract(0, 1)
                .unwrap();
            let div_rho = scale.covderiv(&rho_a).contract(0, 1).unwrap();
            let bot = rho
                .scale_rat(&crate::arith::rat(n as i64 + 1))
                .sub(&pk)
                .unwrap()
                .sub(&div_rho.scale_rat(&ratio(1, 2)))
                .unwrap();
            let mut expected = MixedField::zeros(scale.clone(), 1, Vec::new(), 1);
            for b in 0..n {
                expected.set(&[b + 1], &[], mid.get(&[b]).clone());
            }
            expected.set(&[n + 1], &[], bot.get(&[]).clone());
            let expected = expected.scale_rat(&ratio(n as i64 + 4, n as i64 + 2));

            assert_eq!(d_divergence(&pair), expected);

            // The canonical slot choice is exactly the kernel of the map.
            let canonical = half_prolong_tensor(&k, &scale).unwrap();
            assert!(d_divergence(&canonical).is_zero());
        }
    }

    #[test]
    fn triple_symmetrization_contraction_identity_holds_off_shell() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for scale in [
            ScaleSpec::reference(n),
            ScaleSpec::from_potential(&poly("x2^2", n)).unwrap(),
        ] {
            let k = random_sym_tracefree(&mut rng, n, 1);
            let rho_a = WeightedTensorField::from_fn(n, vec![Variance::Co], 2, |_| {
                Scalar::from_poly(random_poly(&mut rng, n, 1))
            });
            let rho = WeightedTensorField::scalar(
                n,
                0,
                Scalar::from_poly(random_poly(&mut rng, n, 1)),
            );
            let pair = pair_tractor_from_slots(&k, &rho_a, &rho, &scale).unwrap();

            // X^A 𝔻_(A K_BC) = (4/(3(n+4))) X_(B 𝔻^A K_C)A.
            let sym3 = pair.thomas_d().unwrap().symmetrize_tractor(&[0, 1, 2]).unwrap();
            let lhs = sym3.x_contract(0).unwrap();

            let div = d_divergence(&pair);
            let x = MixedField::x_tractor(scale.clone());
            let rhs = x
                .tensor_product(&div)
                .unwrap()
                .symmetrize_tractor(&[0, 1])
                .unwrap()
                .scale_rat(&ratio(4, 3 * (n as i64 + 4)));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn full_prolongation_of_tensors_is_pair_symmetric_and_parallel() {
        let n = 3;
        let flat = ScaleSpec::reference(n);
        let examples = [
            sym_product(&translation(n, 0), &translation(n, 1)),
            sym_product(&rotation(n, 0, 1), &rotation(n, 0, 1)),
            sym_product(&rotation(n, 1, 2), &dilation(n)),
        ];
        for k in &examples {
            let half = half_prolong_tensor(k, &flat).unwrap();
            let full = full_prolong_tensor(&half).unwrap();
            assert!(is_k_symmetric(&full).unwrap());
            assert!(full.is_parallel());
            assert_eq!(half_from_full(&full).unwrap(), half);
            assert_eq!(top_slot_pair(&half).unwrap(), *k);

            // Pair symmetry T_ABCD = T_BADC is implied for members.
            assert_eq!(full, full.permute_tractor(&[1, 0, 3, 2]).unwrap());
            // Trace-freeness over a pair not in the defining list.
            assert!(full.contract_tractor(0, 1).unwrap().is_zero());
        }

        // The zero tensor prolongs to zero.
        let zero = WeightedTensorField::zeros(n, vec![Variance::Co, Variance::Co], 4);
        let zf = full_prolong_tensor(&half_prolong_tensor(&zero, &flat).unwrap()).unwrap();
        assert!(zf.is_zero());

        // A non-conformal-Killing tensor fails loudly at the full level.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let bad = random_sym_tracefree(&mut rng, n, 2);
        let half_bad = half_prolong_tensor(&bad, &flat).unwrap();
        assert!(matches!(
            full_prolong_tensor(&half_bad),
            Err(Error::NotConformalKilling(_))
        ));

        // Full prolongation is reference-splitting only.
        let curved = ScaleSpec::from_sigma(poly("1 + |x|^2", n)).unwrap();
        let half_curved =
            half_prolong_tensor(&examples[0], &curved).unwrap();
        assert!(matches!(
            full_prolong_tensor(&half_curved),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn weyl_conversion_is_an_inverse_pair_and_pins_the_recovery_constant() {
        let n = 3;
        let flat = ScaleSpec::reference(n);
        let k = sym_product(&rotation(n, 0, 1), &rotation(n, 1, 2));
        let half = half_prolong_tensor(&k, &flat).unwrap();
        let full = full_prolong_tensor(&half).unwrap();

        let w = to_weyl(&full).unwrap();
        assert!(is_weyl_symmetric(&w).unwrap());
        assert_eq!(from_weyl(&w).unwrap(), full);

        // Pinned constant: K_CE = (2/3) X^B X^D W_BCDE.
        let xxw = w
            .x_contract(0)
            .unwrap() // leaves (C, D, E)
            .x_contract(1)
            .unwrap() // leaves (C, E)
            .scale_rat(&ratio(2, 3));
        assert_eq!(xxw, half);

        // Zero maps to zero both ways.
        let zero = MixedField::zeros(flat.clone(), 4, Vec::new(), 0);
        assert!(to_weyl(&zero).unwrap().is_zero());
        assert!(from_weyl(&zero).unwrap().is_zero());

        // A pair-symmetric tractor that is not Weyl-symmetric is rejected
        // by from_weyl, and vice versa.
        assert!(from_weyl(&full).is_err());
        assert!(to_weyl(&w).is_err());
    }

    #[test]
    fn tensor_prolongation_is_conformally_invariant_and_the_derivative_identity_transfers() {
        let n = 3;
        let flat = ScaleSpec::reference(n);
        let curved = ScaleSpec::from_sigma(poly("1 + |x|^2", n)).unwrap();
        let potential = ScaleSpec::from_potential(&poly("x1*x2 + x3", n)).unwrap();
        let k = sym_product(&rotation(n, 0, 1), &dilation(n));

        let href = half_prolong_tensor(&k, &flat).unwrap();
        for other in [&curved, &potential] {
            let direct = half_prolong_tensor(&k, other).unwrap();
            assert_eq!(href.change_splitting(other).unwrap(), direct);
        }

        // Flat reference: the symmetrized derivative vanishes outright.
        assert!(href
            .thomas_d()
            .unwrap()
            .symmetrize_tractor(&[0, 1, 2])
            .unwrap()
            .is_zero());

        // The statement is conformally invariant, so it holds verbatim in
        // curved splittings of the same (flat) conformal class: the residual
        // stays exactly zero rather than merely dropping its top-slot terms.
        for other in [&curved, &potential] {
            let sym3 = half_prolong_tensor(&k, other)
                .unwrap()
                .thomas_d()
                .unwrap()
                .symmetrize_tractor(&[0, 1, 2])
                .unwrap();
            assert!(sym3.is_zero());
        }

        // Off shell the residual is nonzero even in the reference splitting,
        // so the vanishing above is not an artifact of the operator.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bad = random_sym_tracefree(&mut rng, n, 2);
        let sym3_bad = half_prolong_tensor(&bad, &flat)
            .unwrap()
            .thomas_d()
            .unwrap()
            .symmetrize_tractor(&[0, 1, 2])
            .unwrap();
        assert!(!sym3_bad.is_zero());
    }

    #[test]
    fn prolongation_records_are_deterministic_and_roundtrip() {
        let n = 3;
        let flat = ScaleSpec::reference(n);
        let k = sym_product(&translation(n, 0), &rotation(n, 0, 1));

        let rec = prolongation_record(&k, &flat, ProlongationLevel::Weyl).unwrap();
        assert_eq!(rec.rank, 2);
        assert!(rec.full.is_some());
        assert!(rec.weyl.is_some());
        assert_eq!(rec.input_sha256, sha256_json(&k).unwrap());
        assert_eq!(rec.input_sha256.len(), 64);

        let text = serde_json::to_string(&rec).unwrap();
        let back: ProlongationRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);

        // Vector records carry no Weyl level.
        let v = rotation(n, 0, 2);
        let vrec = prolongation_record(&v, &flat, ProlongationLevel::Full).unwrap();
        assert_eq!(vrec.rank, 1);
        assert!(vrec.full.is_some());
        assert!(vrec.weyl.is_none());
        assert!(prolongation_record(&v, &flat, ProlongationLevel::Weyl).is_err());

        // Levels parse from their names.
        assert_eq!(
            ProlongationLevel::parse("half").unwrap(),
            ProlongationLevel::Half
        );
        assert!(ProlongationLevel::parse("all").is_err());
    }
}
