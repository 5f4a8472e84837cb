//! Subset algebra over `{1..d}` and extremal-coefficient containers.
//!
//! Subsets are bitmasks (bit `j` set means asset `j + 1` is in the set). The
//! canonical order is ascending by `(size, mask)`, which fixes the column
//! order of every linear program built from a family.
//!
//! Extremal coefficients `theta(J)` of a valid model are exactly the vectors
//! that can be written as `theta(J) = sum_K 1{K ∩ J ≠ ∅} beta_K` with
//! `beta >= 0`. [`mobius_invert`] recovers `beta` from a complete coefficient
//! vector and [`check_consistency`] evaluates the alternating-sum
//! inequalities that characterise the valid cone.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used by the consistency and monotonicity checks.
pub const TOL: f64 = 1e-9;

/// Largest dimension a bitmask can represent.
pub const MAX_DIM: usize = 31;

/// Largest dimension for operations that enumerate all `2^d - 1` subsets.
pub const MAX_ENUM_DIM: usize = 20;

/// Dimension at which Möbius inversion switches to the fast subset transform.
const FAST_TRANSFORM_DIM: usize = 12;

/// A non-empty subset `J` of `{1..d}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetId {
    mask: u32,
    d: u8,
}

impl SubsetId {
    pub fn new(mask: u32, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        if mask == 0 {
            return Err(Error::InvalidInput("subsets must be non-empty".into()));
        }
        if mask >> d != 0 {
            return Err(Error::InvalidInput(format!(
                "subset mask {mask:#b} has indices beyond d = {d}"
            )));
        }
        Ok(SubsetId { mask, d: d as u8 })
    }

    /// Builds a subset from 1-based asset indices.
    pub fn from_indices(indices: &[usize], d: usize) -> Result<Self> {
        let mut mask = 0u32;
        for &i in indices {
            if i == 0 || i > d {
                return Err(Error::InvalidInput(format!(
                    "asset index {i} outside 1..={d}"
                )));
            }
            let bit = 1u32 << (i - 1);
            if mask & bit != 0 {
                return Err(Error::InvalidInput(format!("asset index {i} repeated")));
            }
            mask |= bit;
        }
        SubsetId::new(mask, d)
    }

    /// The singleton `{j + 1}` for a 0-based asset index.
    pub fn singleton(j: usize, d: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::InvalidInput(format!("asset {j} outside 0..{d}")));
        }
        SubsetId::new(1 << j, d)
    }

    pub fn full(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        SubsetId::new(full_mask(d), d)
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn dim(self) -> usize {
        self.d as usize
    }

    /// Number of assets in the set.
    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_singleton(self) -> bool {
        self.len() == 1
    }

    pub fn is_full(self) -> bool {
        self.mask == full_mask(self.dim())
    }

    /// Membership test for a 0-based asset index.
    pub fn contains(self, j: usize) -> bool {
        j < 32 && self.mask & (1 << j) != 0
    }

    pub fn intersects(self, other: SubsetId) -> bool {
        self.mask & other.mask != 0
    }

    pub fn is_subset_of(self, other: SubsetId) -> bool {
        self.mask & !other.mask == 0
    }

    /// 0-based members in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mask = self.mask;
        (0..32).filter(move |j| mask & (1 << j) != 0)
    }

    /// 1-based members in ascending order, the serialized form.
    pub fn indices(self) -> Vec<usize> {
        self.members().map(|j| j + 1).collect()
    }

    /// `max_{j in J} u_j`.
    pub fn max_over(self, u: &[f64]) -> f64 {
        self.members()
            .map(|j| u[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Ord for SubsetId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.len(), self.mask).cmp(&(other.len(), other.mask))
    }
}

impl PartialOrd for SubsetId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for SubsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl Serialize for SubsetId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices().serialize(serializer)
    }
}

pub(crate) fn full_mask(d: usize) -> u32 {
    if d >= 32 {
        u32::MAX
    } else {
        (1u32 << d) - 1
    }
}

/// All non-empty subsets of `{1..d}` in canonical order.
pub fn all_subsets(d: usize) -> Result<Vec<SubsetId>> {
    if d == 0 || d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge {
            d,
            cap: MAX_ENUM_DIM,
        });
    }
    let mut sets: Vec<SubsetId> = (1..=full_mask(d))
        .map(|mask| SubsetId { mask, d: d as u8 })
        .collect();
    sets.sort();
    Ok(sets)
}

/// One extremal-coefficient constraint `theta(J) = c_J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub set: SubsetId,
    pub c: f64,
}

/// A constraint family `(J, c_J)` over a fixed dimension, kept in canonical
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFamily {
    d: usize,
    entries: Vec<Constraint>,
}

impl SubsetFamily {
    /// Builds a family checking only its structure: matching dimension,
    /// no duplicates, finite non-negative targets. Raw estimates go here.
    pub fn raw(d: usize, entries: impl IntoIterator<Item = (SubsetId, f64)>) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        let mut list: Vec<Constraint> = Vec::new();
        for (set, c) in entries {
            if set.dim() != d {
                return Err(Error::InvalidInput(format!(
                    "subset {set} has dimension {} but the family has {d}",
                    set.dim()
                )));
            }
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "target for {set} must be finite and non-negative, got {c}"
                )));
            }
            list.push(Constraint { set, c });
        }
        list.sort_by(|a, b| a.set.cmp(&b.set));
        if let Some(w) = list.windows(2).find(|w| w[0].set == w[1].set) {
            return Err(Error::InvalidInput(format!("subset {} repeated", w[0].set)));
        }
        Ok(SubsetFamily { d, entries: list })
    }

    /// Builds a standardized family: every singleton present with target 1
    /// and every `c_J` within `[1, |J|]`.
    pub fn new(d: usize, entries: impl IntoIterator<Item = (SubsetId, f64)>) -> Result<Self> {
        let fam = SubsetFamily::raw(d, entries)?;
        fam.validate()?;
        Ok(fam)
    }

    /// Singletons with target 1 plus the full set with target `theta`.
    pub fn single_dvariate(d: usize, theta: f64) -> Result<Self> {
        let mut entries = singleton_entries(d)?;
        if d > 1 {
            entries.push((SubsetId::full(d)?, theta));
        } else if (theta - 1.0).abs() > TOL {
            return Err(Error::OutOfRange {
                what: "theta",
                value: theta,
                lo: 1.0,
                hi: 1.0,
            });
        }
        SubsetFamily::new(d, entries)
    }

    /// Singletons plus every pair `{i, j}` with target `pair(i, j)` (0-based).
    pub fn bivariate(d: usize, pair: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut entries = singleton_entries(d)?;
        for i in 0..d {
            for j in (i + 1)..d {
                entries.push((SubsetId::new((1 << i) | (1 << j), d)?, pair(i, j)));
            }
        }
        SubsetFamily::new(d, entries)
    }

    /// Checks the standardization invariants.
    pub fn validate(&self) -> Result<()> {
        for j in 0..self.d {
            let s = SubsetId::singleton(j, self.d)?;
            match self.get(s) {
                None => {
                    return Err(Error::IncompleteInput(format!(
                        "singleton {s} missing from the constraint family"
                    )))
                }
                Some(c) if (c - 1.0).abs() > TOL => {
                    return Err(Error::InvalidInput(format!(
                        "singleton {s} must have target 1, got {c}"
                    )))
                }
                _ => {}
            }
        }
        for e in &self.entries {
            let hi = e.set.len() as f64;
            if e.c < 1.0 - TOL || e.c > hi + TOL {
                return Err(Error::OutOfRange {
                    what: "extremal coefficient",
                    value: e.c,
                    lo: 1.0,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn has_all_singletons(&self) -> bool {
        (0..self.d).all(|j| {
            SubsetId::singleton(j, self.d)
                .map(|s| self.get(s).is_some())
                .unwrap_or(false)
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Constraint] {
        &self.entries
    }

    pub fn sets(&self) -> impl Iterator<Item = SubsetId> + '_ {
        self.entries.iter().map(|e| e.set)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.c).collect()
    }

    pub fn get(&self, set: SubsetId) -> Option<f64> {
        self.entries
            .binary_search_by(|e| e.set.cmp(&set))
            .ok()
            .map(|i| self.entries[i].c)
    }

    /// Returns a copy with `c_J` replaced by `f(J, c_J)`.
    pub fn map_targets(&self, f: impl Fn(SubsetId, f64) -> f64) -> SubsetFamily {
        SubsetFamily {
            d: self.d,
            entries: self
                .entries
                .iter()
                .map(|e| Constraint {
                    set: e.set,
                    c: f(e.set, e.c),
                })
                .collect(),
        }
    }

    /// Returns a copy extended with one more constraint.
    pub fn with(&self, set: SubsetId, c: f64) -> Result<SubsetFamily> {
        let mut entries: Vec<(SubsetId, f64)> = self.entries.iter().map(|e| (e.set, e.c)).collect();
        entries.push((set, c));
        SubsetFamily::raw(self.d, entries)
    }

    pub fn check_consistency(&self) -> Vec<ConsistencyViolation> {
        check_consistency(&ExtremalCoefficients::from(self))
    }
}

fn singleton_entries(d: usize) -> Result<Vec<(SubsetId, f64)>> {
    (0..d).map(|j| Ok((SubsetId::singleton(j, d)?, 1.0))).collect()
}

#[derive(Serialize, Deserialize)]
struct ConstraintJson {
    set: Vec<usize>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    d: usize,
    constraints: Vec<ConstraintJson>,
}

impl Serialize for SubsetFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        FamilyJson {
            d: self.d,
            constraints: self
                .entries
                .iter()
                .map(|e| ConstraintJson {
                    set: e.set.indices(),
                    c: e.c,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubsetFamily {
    /// Deserialization checks structure only; call [`SubsetFamily::validate`]
    /// before using the family as a set of model constraints.
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = FamilyJson::deserialize(deserializer)?;
        let entries = raw
            .constraints
            .iter()
            .map(|c| SubsetId::from_indices(&c.set, raw.d).map(|s| (s, c.c)))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        SubsetFamily::raw(raw.d, entries).map_err(serde::de::Error::custom)
    }
}

/// A full or partial map `J -> theta(J)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalCoefficients {
    d: usize,
    values: BTreeMap<SubsetId, f64>,
}

impl ExtremalCoefficients {
    pub fn new(d: usize, values: impl IntoIterator<Item = (SubsetId, f64)>) -> Result<Self> {
        let fam = SubsetFamily::raw(d, values)?;
        Ok(ExtremalCoefficients::from(&fam))
    }

    /// Complete coefficients from a function of the subset.
    pub fn from_fn(d: usize, f: impl Fn(SubsetId) -> f64) -> Result<Self> {
        let values = all_subsets(d)?.into_iter().map(|s| (s, f(s))).collect();
        Ok(ExtremalCoefficients { d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, set: SubsetId) -> Option<f64> {
        self.values.get(&set).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True iff all `2^d - 1` subsets are present.
    pub fn is_complete(&self) -> bool {
        self.d <= MAX_DIM && self.values.len() as u64 == (1u64 << self.d) - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetId, f64)> + '_ {
        self.values.iter().map(|(s, v)| (*s, *v))
    }

    /// Restriction to the sets of a family.
    pub fn restrict_to(&self, sets: impl IntoIterator<Item = SubsetId>) -> Result<SubsetFamily> {
        let mut entries = Vec::new();
        for s in sets {
            let v = self
                .get(s)
                .ok_or_else(|| Error::IncompleteInput(format!("no coefficient for {s}")))?;
            entries.push((s, v));
        }
        SubsetFamily::raw(self.d, entries)
    }
}

impl From<&SubsetFamily> for ExtremalCoefficients {
    fn from(f: &SubsetFamily) -> Self {
        ExtremalCoefficients {
            d: f.d,
            values: f.entries.iter().map(|e| (e.set, e.c)).collect(),
        }
    }
}

/// Möbius weights `beta_K >= 0` indexed by every non-empty `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusWeights {
    d: usize,
    /// Indexed by mask; entry 0 (the empty set) is always zero.
    beta: Vec<f64>,
}

impl MobiusWeights {
    /// Wraps a mask-indexed weight vector of length `2^d`.
    pub fn from_dense(d: usize, beta: Vec<f64>) -> Result<Self> {
        if d == 0 || d > MAX_ENUM_DIM {
            return Err(Error::DimensionTooLarge {
                d,
                cap: MAX_ENUM_DIM,
            });
        }
        if beta.len() != 1usize << d {
            return Err(Error::InvalidInput(format!(
                "expected {} weights, got {}",
                1usize << d,
                beta.len()
            )));
        }
        let mut beta = beta;
        beta[0] = 0.0;
        Ok(MobiusWeights { d, beta })
    }

    /// Weights from `(K, beta_K)` pairs; unspecified sets get zero.
    pub fn from_pairs(d: usize, pairs: impl IntoIterator<Item = (SubsetId, f64)>) -> Result<Self> {
        let mut w = MobiusWeights::from_dense(d, vec![0.0; 1usize << d.min(MAX_ENUM_DIM)])?;
        for (k, b) in pairs {
            if k.dim() != d {
                return Err(Error::InvalidInput(format!("subset {k} has wrong dimension")));
            }
            w.beta[k.mask() as usize] += b;
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, set: SubsetId) -> f64 {
        self.beta[set.mask() as usize]
    }

    pub fn as_dense(&self) -> &[f64] {
        &self.beta
    }

    /// Non-zero weights in canonical order.
    pub fn support(&self) -> Vec<(SubsetId, f64)> {
        let mut out: Vec<(SubsetId, f64)> = self
            .beta
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, b)| **b != 0.0)
            .map(|(m, b)| {
                (
                    SubsetId {
                        mask: m as u32,
                        d: self.d as u8,
                    },
                    *b,
                )
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Replaces negative weights by zero.
    pub fn clip_negative(&mut self) {
        for b in self.beta.iter_mut() {
            if *b < 0.0 {
                *b = 0.0;
            }
        }
    }

    /// Zeroes weights with `|beta| <= tol`, which are round-off from inversion.
    pub fn prune(&mut self, tol: f64) {
        for b in self.beta.iter_mut() {
            if b.abs() <= tol {
                *b = 0.0;
            }
        }
    }

    pub fn min_weight(&self) -> f64 {
        self.beta[1..].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sum_K 1{K ∩ J ≠ ∅} beta_K`.
    pub fn theta(&self, set: SubsetId) -> f64 {
        let j = set.mask() as usize;
        self.beta
            .iter()
            .enumerate()
            .filter(|(k, _)| k & j != 0)
            .map(|(_, b)| *b)
            .sum()
    }

    /// All `2^d - 1` coefficients generated by the weights.
    pub fn coefficients(&self) -> ExtremalCoefficients {
        // g(S) = sum_{K ⊆ S} beta_K, theta(J) = g(D) - g(D \ J)
        let n = self.beta.len();
        let mut g = self.beta.clone();
        for bit in 0..self.d {
            for s in 0..n {
                if s & (1 << bit) != 0 {
                    g[s] += g[s ^ (1 << bit)];
                }
            }
        }
        let full = n - 1;
        let values = (1..n)
            .map(|j| {
                (
                    SubsetId {
                        mask: j as u32,
                        d: self.d as u8,
                    },
                    g[full] - g[full & !j],
                )
            })
            .collect();
        ExtremalCoefficients { d: self.d, values }
    }

    /// The Tawn-Molchanov objective `sum_K |K|^{1/xi} beta_K`.
    pub fn tm_objective(&self, xi: f64) -> f64 {
        self.beta
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, b)| b * ((k.count_ones() as f64).powf(1.0 / xi)))
            .sum()
    }
}

/// Recovers the Möbius weights of a complete coefficient vector.
pub fn mobius_invert(theta: &ExtremalCoefficients) -> Result<MobiusWeights> {
    let w = mobius_invert_unchecked(theta)?;
    let worst = w.min_weight();
    if worst < -TOL {
        return Err(Error::InconsistentInput(format!(
            "Möbius weight {worst:.3e} is negative"
        )));
    }
    Ok(w)
}

/// Möbius inversion without the sign check.
pub(crate) fn mobius_invert_unchecked(theta: &ExtremalCoefficients) -> Result<MobiusWeights> {
    let d = theta.dim();
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge {
            d,
            cap: MAX_ENUM_DIM,
        });
    }
    if !theta.is_complete() {
        return Err(Error::IncompleteInput(format!(
            "Möbius inversion needs all {} subsets, got {}",
            (1u64 << d) - 1,
            theta.len()
        )));
    }
    let g = complement_sums(theta);
    let beta = if d > FAST_TRANSFORM_DIM {
        mobius_fast(d, g)
    } else {
        mobius_direct(d, &g)
    };
    MobiusWeights::from_dense(d, beta)
}

/// `g(S) = theta(D) - theta(D \ S)`, the total weight of sets inside `S`.
fn complement_sums(theta: &ExtremalCoefficients) -> Vec<f64> {
    let d = theta.dim();
    let full = full_mask(d) as usize;
    let mut dense = vec![0.0; full + 1];
    for (s, v) in theta.iter() {
        dense[s.mask() as usize] = v;
    }
    (0..=full).map(|s| dense[full] - dense[full & !s]).collect()
}

/// Inclusion-exclusion over each subset lattice, `O(3^d)`.
fn mobius_direct(d: usize, g: &[f64]) -> Vec<f64> {
    let full = full_mask(d) as usize;
    let mut beta = vec![0.0; full + 1];
    for k in 1..=full {
        let mut acc = 0.0;
        // enumerate S ⊆ K including the empty set
        let mut s = k;
        loop {
            let sign = if (k ^ s).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * g[s];
            if s == 0 {
                break;
            }
            s = (s - 1) & k;
        }
        beta[k] = acc;
    }
    beta
}

/// Subset-sum Möbius transform, `O(d 2^d)`.
fn mobius_fast(d: usize, mut g: Vec<f64>) -> Vec<f64> {
    let n = g.len();
    for bit in 0..d {
        for s in 0..n {
            if s & (1 << bit) != 0 {
                g[s] -= g[s ^ (1 << bit)];
            }
        }
    }
    g
}

/// A violated inequality `sum_{L ⊇ J} (-1)^{|L \ J| + 1} theta(L) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyViolation {
    /// 1-based members of `J`; empty for the inequality over all sets.
    pub base: Vec<usize>,
    /// Value of the alternating sum (negative when violated).
    pub slack: f64,
}

/// Reports every violated consistency inequality.
///
/// Only inequalities whose supersets `L ⊇ J` are all present are evaluated,
/// so partial families are checked on the instantiated inequalities alone.
/// `J` ranges over proper subsets of `{1..d}`, including the empty set.
pub fn check_consistency(theta: &ExtremalCoefficients) -> Vec<ConsistencyViolation> {
    let d = theta.dim();
    if d > MAX_ENUM_DIM {
        log::warn!("consistency check skipped: d = {d} exceeds {MAX_ENUM_DIM}");
        return Vec::new();
    }
    let full = full_mask(d) as usize;
    let n = full + 1;
    let mut value = vec![0.0; n];
    let mut present = vec![0u64; n];
    present[0] = 1;
    for (s, v) in theta.iter() {
        value[s.mask() as usize] = v;
        present[s.mask() as usize] = 1;
    }
    // superset sums: number of present supersets, and sum_{L ⊇ J} (-1)^{|L \ J|} theta(L)
    for bit in 0..d {
        for s in 0..n {
            if s & (1 << bit) == 0 {
                present[s] += present[s | (1 << bit)];
                value[s] -= value[s | (1 << bit)];
            }
        }
    }
    let mut out = Vec::new();
    for j in 0..full {
        let supersets = 1u64 << (d - (j as u32).count_ones() as usize);
        if present[j] != supersets {
            continue;
        }
        let slack = -value[j];
        if slack < -TOL {
            out.push(ConsistencyViolation {
                base: (0..d).filter(|b| j & (1 << b) != 0).map(|b| b + 1).collect(),
                slack,
            });
        }
    }
    out
}

/// A pair `J ⊂ K` with `theta(J) > theta(K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub subset: SubsetId,
    pub superset: SubsetId,
    pub excess: f64,
}

/// Lists pairs `J ⊆ K`, both present, with `theta(J) > theta(K) + TOL`.
///
/// Large inputs (more than 4096 sets) are checked along covering pairs
/// `K \ {j} ⊂ K` only, which detects every violation of a complete vector.
pub fn monotonicity_check(theta: &ExtremalCoefficients) -> Vec<MonotonicityViolation> {
    let items: Vec<(SubsetId, f64)> = theta.iter().collect();
    let mut out = Vec::new();
    if items.len() <= 4096 {
        for &(k, vk) in &items {
            for &(j, vj) in &items {
                if j != k && j.is_subset_of(k) && vj > vk + TOL {
                    out.push(MonotonicityViolation {
                        subset: j,
                        superset: k,
                        excess: vj - vk,
                    });
                }
            }
        }
    } else {
        for &(k, vk) in &items {
            for b in k.members() {
                let m = k.mask() & !(1 << b);
                if m == 0 {
                    continue;
                }
                let j = SubsetId { mask: m, d: k.d };
                if let Some(vj) = theta.get(j) {
                    if vj > vk + TOL {
                        out.push(MonotonicityViolation {
                            subset: j,
                            superset: k,
                            excess: vj - vk,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d2(t12: f64) -> ExtremalCoefficients {
        ExtremalCoefficients::new(
            2,
            vec![
                (SubsetId::new(1, 2).unwrap(), 1.0),
                (SubsetId::new(2, 2).unwrap(), 1.0),
                (SubsetId::new(3, 2).unwrap(), t12),
            ],
        )
        .unwrap()
    }

    #[test]
    fn canonical_order_is_size_then_mask() {
        let sets = all_subsets(3).unwrap();
        let masks: Vec<u32> = sets.iter().map(|s| s.mask()).collect();
        assert_eq!(masks, vec![1, 2, 4, 3, 5, 6, 7]);
    }

    #[test]
    fn subset_json_is_sorted_one_based() {
        let s = SubsetId::from_indices(&[7, 1, 3], 8).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,3,7]");
        assert_eq!(s.to_string(), "[1,3,7]");
    }

    #[test]
    fn subset_rejects_bad_input() {
        assert!(SubsetId::new(0, 3).is_err());
        assert!(SubsetId::new(8, 3).is_err());
        assert!(SubsetId::from_indices(&[0], 3).is_err());
        assert!(SubsetId::from_indices(&[2, 2], 3).is_err());
    }

    #[test]
    fn invert_two_dim_example() {
        // theta1 = b1 + b12, theta2 = b2 + b12, theta12 = b1 + b2 + b12
        // => b12 = theta1 + theta2 - theta12 = 0.5, b1 = b2 = 0.5
        let w = mobius_invert(&d2(1.5)).unwrap();
        assert!((w.get(SubsetId::new(1, 2).unwrap()) - 0.5).abs() < 1e-12);
        assert!((w.get(SubsetId::new(2, 2).unwrap()) - 0.5).abs() < 1e-12);
        assert!((w.get(SubsetId::new(3, 2).unwrap()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invert_complete_dependence_and_independence() {
        for d in 1..=7 {
            let dep = ExtremalCoefficients::from_fn(d, |_| 1.0).unwrap();
            let w = mobius_invert(&dep).unwrap();
            let full = SubsetId::full(d).unwrap();
            for (k, b) in w.support() {
                assert_eq!(k, full);
                assert!((b - 1.0).abs() < 1e-12);
            }
            let ind = ExtremalCoefficients::from_fn(d, |s| s.len() as f64).unwrap();
            let w = mobius_invert(&ind).unwrap();
            for k in all_subsets(d).unwrap() {
                let expect = if k.is_singleton() { 1.0 } else { 0.0 };
                assert!((w.get(k) - expect).abs() < 1e-12, "d={d} {k}");
            }
        }
    }

    #[test]
    fn invert_rejects_incomplete_and_invalid() {
        let partial = ExtremalCoefficients::new(2, vec![(SubsetId::new(1, 2).unwrap(), 1.0)]).unwrap();
        assert!(matches!(mobius_invert(&partial), Err(Error::IncompleteInput(_))));
        assert!(matches!(mobius_invert(&d2(2.5)), Err(Error::InconsistentInput(_))));
    }

    #[test]
    fn fast_and_direct_transforms_agree() {
        let d = 6;
        let full = full_mask(d) as usize;
        let beta: Vec<f64> = (0..=full).map(|k| if k == 0 { 0.0 } else { ((k * 37) % 11) as f64 / 7.0 }).collect();
        let theta = MobiusWeights::from_dense(d, beta.clone()).unwrap().coefficients();
        let g = complement_sums(&theta);
        let a = mobius_direct(d, &g);
        let b = mobius_fast(d, g);
        for k in 1..=full {
            assert!((a[k] - beta[k]).abs() < 1e-10);
            assert!((b[k] - beta[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn consistency_two_dim_examples() {
        assert!(check_consistency(&d2(1.5)).is_empty());
        assert!(check_consistency(&d2(1.0)).is_empty());
        let v = check_consistency(&d2(2.5));
        assert_eq!(v.len(), 1);
        // theta1 + theta2 - theta12 = -0.5 over all sets
        assert!(v[0].base.is_empty());
        assert!((v[0].slack + 0.5).abs() < 1e-12);
    }

    #[test]
    fn consistency_skips_uninstantiated_inequalities() {
        // singletons plus the full set for d = 3: no inequality is fully present
        let fam = SubsetFamily::single_dvariate(3, 2.9).unwrap();
        assert!(fam.check_consistency().is_empty());
    }

    #[test]
    fn monotonicity_examples() {
        assert!(monotonicity_check(&d2(1.5)).is_empty());
        let v = monotonicity_check(&d2(0.9));
        assert_eq!(v.len(), 2);
        let ind = ExtremalCoefficients::from_fn(4, |s| s.len() as f64).unwrap();
        assert!(monotonicity_check(&ind).is_empty());
    }

    #[test]
    fn family_validation() {
        let s1 = SubsetId::new(1, 2).unwrap();
        let s2 = SubsetId::new(2, 2).unwrap();
        let s12 = SubsetId::new(3, 2).unwrap();
        assert!(SubsetFamily::new(2, vec![(s1, 1.0), (s12, 1.5)]).is_err());
        assert!(SubsetFamily::new(2, vec![(s1, 1.0), (s2, 1.2), (s12, 1.5)]).is_err());
        assert!(SubsetFamily::new(2, vec![(s1, 1.0), (s2, 1.0), (s12, 2.5)]).is_err());
        assert!(SubsetFamily::raw(2, vec![(s1, 1.0), (s1, 1.0)]).is_err());
        let fam = SubsetFamily::new(2, vec![(s12, 1.5), (s2, 1.0), (s1, 1.0)]).unwrap();
        assert_eq!(fam.sets().map(|s| s.mask()).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn family_json_round_trip() {
        let fam = SubsetFamily::single_dvariate(3, 2.0).unwrap();
        let text = serde_json::to_string(&fam).unwrap();
        assert_eq!(
            text,
            r#"{"d":3,"constraints":[{"set":[1],"c":1.0},{"set":[2],"c":1.0},{"set":[3],"c":1.0},{"set":[1,2,3],"c":2.0}]}"#
        );
        let back: SubsetFamily = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fam);
    }
}
