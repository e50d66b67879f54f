//! Subsets of the success events `{S0, S1, ..., SN}` and their grouping by
//! relay position.
//!
//! Bit 0 of a mask is the direct event `S0`; bit `k + 1` is the relay-aided
//! event of relay `k` (relays are zero-indexed in code).

use std::fmt;

use crate::scenario::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetMask {
    bits: u32,
}

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask { bits: 0 };
    /// Largest relay count representable in a mask.
    pub const MAX_RELAYS: usize = 31;

    pub fn new(includes_direct: bool, relays: &[usize]) -> Self {
        let mut mask = SubsetMask {
            bits: includes_direct as u32,
        };
        for &k in relays {
            mask = mask.with_relay(k);
        }
        mask
    }

    pub fn direct() -> Self {
        SubsetMask { bits: 1 }
    }

    pub fn from_bits(bits: u32) -> Self {
        SubsetMask { bits }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn with_relay(self, k: usize) -> Self {
        assert!(k < Self::MAX_RELAYS, "relay index {k} out of range");
        SubsetMask {
            bits: self.bits | (1 << (k + 1)),
        }
    }

    pub fn includes_direct(self) -> bool {
        self.bits & 1 != 0
    }

    pub fn includes_relay(self, k: usize) -> bool {
        k < Self::MAX_RELAYS && self.bits & (1 << (k + 1)) != 0
    }

    pub fn relays(self) -> impl Iterator<Item = usize> {
        let bits = self.bits >> 1;
        (0..Self::MAX_RELAYS).filter(move |k| bits & (1 << k) != 0)
    }

    pub fn relay_count(self) -> usize {
        (self.bits >> 1).count_ones() as usize
    }

    /// Number of events `|A|`.
    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.bits & !other.bits == 0
    }

    /// Inclusion-exclusion sign `(-1)^(|A| + 1)`.
    pub fn sign(self) -> f64 {
        if self.len() % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Every mask over `n` relays, the empty one included, in increasing bit order.
    pub fn all(n_relays: usize) -> impl Iterator<Item = SubsetMask> {
        assert!(n_relays < Self::MAX_RELAYS);
        (0u32..(1u32 << (n_relays + 1))).map(SubsetMask::from_bits)
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names = Vec::new();
        if self.includes_direct() {
            names.push("S0".to_string());
        }
        names.extend(self.relays().map(|k| format!("S{}", k + 1)));
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Relays sharing a position, which contribute identical factors.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayGroups {
    /// Representative relay index per group.
    pub representatives: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl RelayGroups {
    pub fn new(relays: &[Position]) -> Self {
        let mut representatives: Vec<usize> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut group_of = Vec::with_capacity(relays.len());
        for (k, p) in relays.iter().enumerate() {
            match representatives.iter().position(|&r| relays[r] == *p) {
                Some(g) => {
                    members[g].push(k);
                    group_of.push(g);
                }
                None => {
                    group_of.push(representatives.len());
                    representatives.push(k);
                    members.push(vec![k]);
                }
            }
        }
        RelayGroups {
            representatives,
            members,
            group_of,
        }
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn sizes(&self) -> Vec<u32> {
        self.members.iter().map(|m| m.len() as u32).collect()
    }

    /// Group-level signature of a mask.
    pub fn signature(&self, mask: SubsetMask) -> Signature {
        let mut counts = vec![0u32; self.len()];
        for k in mask.relays() {
            counts[self.group_of[k]] += 1;
        }
        Signature {
            direct: mask.includes_direct(),
            counts,
        }
    }

    /// All nonempty signatures with the number of masks each one stands for,
    /// ordered by (direct, counts) lexicographically.
    pub fn signatures(&self) -> Vec<(Signature, f64)> {
        let sizes = self.sizes();
        let mut out = Vec::new();
        for direct in [false, true] {
            let mut counts = vec![0u32; sizes.len()];
            loop {
                let sig = Signature {
                    direct,
                    counts: counts.clone(),
                };
                if !sig.is_empty() {
                    let mult: f64 = sizes
                        .iter()
                        .zip(&counts)
                        .map(|(&n, &m)| binomial(n, m))
                        .product();
                    out.push((sig, mult));
                }
                // Odometer increment over counts[g] in 0..=sizes[g].
                let mut g = 0;
                loop {
                    if g == sizes.len() {
                        break;
                    }
                    if counts[g] < sizes[g] {
                        counts[g] += 1;
                        break;
                    }
                    counts[g] = 0;
                    g += 1;
                }
                if g == sizes.len() {
                    break;
                }
            }
        }
        out
    }
}

/// A subset up to permutations of co-located relays.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub direct: bool,
    /// Number of chosen relays in each position group.
    pub counts: Vec<u32>,
}

impl Signature {
    pub fn relay_count(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        !self.direct && self.relay_count() == 0
    }

    pub fn sign(&self) -> f64 {
        if (self.direct as u32 + self.relay_count()) % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
