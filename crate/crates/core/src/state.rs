//! Spin-state representations: raw ±1 arrays on the discrete torus,
//! run-length block arrays, canonical forms modulo translation, reflection
//! and global flip, and the decomposition into defects and maximal periodic
//! runs that underlies the phase-function description.
//!
//! Text formats (accepted anywhere the CLI takes a state):
//! * spin strings over `+`/`-`, e.g. `++--+--+`;
//! * signed run-length lists with alternating signs, e.g. `+3,-2,+1,-2`.

use crate::gamma::PhaseFunction;
use crate::{Error, Result};

/// A length-N array of ±1 spins on the torus Z/NZ, implicitly N-periodic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinState {
    spins: Vec<i8>,
}

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::Validation("spin state must have at least one site".into()));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Validation("spins must be ±1".into()));
        }
        Ok(SpinState { spins })
    }

    pub fn n_sites(&self) -> usize {
        self.spins.len()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Spin at site i taken modulo N.
    pub fn spin(&self, i: usize) -> i8 {
        self.spins[i % self.spins.len()]
    }

    pub fn rotated(&self, k: usize) -> SpinState {
        let n = self.n_sites();
        SpinState {
            spins: (0..n).map(|i| self.spins[(i + k) % n]).collect(),
        }
    }

    pub fn reflected(&self) -> SpinState {
        let mut spins = self.spins.clone();
        spins.reverse();
        SpinState { spins }
    }

    pub fn flipped(&self) -> SpinState {
        SpinState {
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }

    /// The state repeated `m` times on a torus of `m*N` sites.
    pub fn repeated(&self, m: usize) -> SpinState {
        let mut spins = Vec::with_capacity(self.n_sites() * m);
        for _ in 0..m {
            spins.extend_from_slice(&self.spins);
        }
        SpinState { spins }
    }

    /// Parses a string over `+`/`-`.
    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parse("empty spin string".into()));
        }
        let mut spins = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '+' => spins.push(1),
                '-' => spins.push(-1),
                other => {
                    return Err(Error::Parse(format!(
                        "invalid character {other:?} at position {i} in spin string (expected '+' or '-')"
                    )))
                }
            }
        }
        Ok(SpinState { spins })
    }
}

impl std::fmt::Display for SpinState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &s in &self.spins {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Run-length representation: block lengths (h_1, ..., h_M) with alternating
/// signs starting from `first_sign`. On the torus a non-constant state has an
/// even number of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockArray {
    pub first_sign: i8,
    pub lengths: Vec<u32>,
}

impl BlockArray {
    pub fn new(first_sign: i8, lengths: Vec<u32>) -> Result<Self> {
        let b = BlockArray { first_sign, lengths };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.first_sign != 1 && self.first_sign != -1 {
            return Err(Error::Validation("first_sign must be ±1".into()));
        }
        if self.lengths.is_empty() {
            return Err(Error::Validation("block array must have at least one block".into()));
        }
        if self.lengths.iter().any(|&h| h == 0) {
            return Err(Error::Validation("block lengths must be positive".into()));
        }
        if self.lengths.len() > 1 && self.lengths.len() % 2 != 0 {
            return Err(Error::Validation(format!(
                "a non-constant periodic state has an even number of blocks, got {}",
                self.lengths.len()
            )));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.lengths.iter().map(|&h| h as usize).sum()
    }

    pub fn n_blocks(&self) -> usize {
        self.lengths.len()
    }

    /// Sign of block μ (0-based).
    pub fn sign(&self, mu: usize) -> i8 {
        if mu % 2 == 0 {
            self.first_sign
        } else {
            -self.first_sign
        }
    }

    /// Expands to the spin state whose first block starts at site 0.
    pub fn to_state(&self) -> SpinState {
        let mut spins = Vec::with_capacity(self.n_sites());
        for (mu, &h) in self.lengths.iter().enumerate() {
            let s = self.sign(mu);
            spins.extend(std::iter::repeat(s).take(h as usize));
        }
        SpinState { spins }
    }

    /// Parses a signed run-length list like `+3,-2,+1,-2`. Signs must be
    /// explicit and strictly alternating, and the block count must be 1 or
    /// even (otherwise the array cannot close up on the torus).
    pub fn parse(s: &str) -> Result<Self> {
        let mut first_sign = 0i8;
        let mut prev_sign = 0i8;
        let mut lengths = Vec::new();
        if s.trim().is_empty() {
            return Err(Error::Parse("empty block list".into()));
        }
        for (i, tok) in s.split(',').enumerate() {
            let tok = tok.trim();
            let (sign, digits) = match tok.as_bytes().first() {
                Some(b'+') => (1i8, &tok[1..]),
                Some(b'-') => (-1i8, &tok[1..]),
                _ => {
                    return Err(Error::Parse(format!(
                        "block {i}: {tok:?} must start with an explicit '+' or '-'"
                    )))
                }
            };
            let len: u32 = digits
                .parse()
                .map_err(|_| Error::Parse(format!("block {i}: invalid run length {digits:?}")))?;
            if len == 0 {
                return Err(Error::Parse(format!("block {i}: run length must be positive")));
            }
            if i == 0 {
                first_sign = sign;
            } else if sign == prev_sign {
                return Err(Error::Parse(format!(
                    "block {i}: signs must alternate, got {tok:?} after another {} block",
                    if prev_sign > 0 { "'+'" } else { "'-'" }
                )));
            }
            prev_sign = sign;
            lengths.push(len);
        }
        if lengths.len() > 1 && lengths.len() % 2 != 0 {
            return Err(Error::Parse(format!(
                "{} blocks cannot alternate around the torus; the block count must be 1 or even",
                lengths.len()
            )));
        }
        BlockArray::new(first_sign, lengths)
    }
}

impl std::fmt::Display for BlockArray {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (mu, &h) in self.lengths.iter().enumerate() {
            if mu > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}{}", if self.sign(mu) > 0 { "+" } else { "-" }, h)?;
        }
        Ok(())
    }
}

/// Canonical representative of a state's equivalence class under
/// translation, reflection and global spin flip, together with the group
/// element mapping the canonical state back to the original.
///
/// The canonical spin pattern is the lexicographically smallest image under
/// the full group, ordering `+` before `-` (so it starts with the longest
/// `+`-run); `blocks.lengths` are its run lengths. `blocks.first_sign`,
/// `translation` and `reflected` reconstruct the original exactly:
/// `σ[i] = first_sign * canon[(i + τ) mod N]`, with the index reversed to
/// `(τ - i) mod N` when `reflected` is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    pub blocks: BlockArray,
    pub translation: usize,
    pub reflected: bool,
}

impl CanonicalForm {
    /// The equivalence-class key: canonical lengths only (the sign is a
    /// reconstruction detail; flipping is part of the group).
    pub fn class_lengths(&self) -> &[u32] {
        &self.blocks.lengths
    }

    pub fn n_sites(&self) -> usize {
        self.blocks.n_sites()
    }
}

fn lex_less(a: &[i8], b: &[i8]) -> bool {
    // '+' sorts before '-'
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return *x > *y;
        }
    }
    false
}

/// Canonical block representation of a state.
pub fn to_blocks(s: &SpinState) -> CanonicalForm {
    let n = s.n_sites();
    let mut best: Option<(Vec<i8>, usize, bool, i8)> = None;
    let mut candidate = vec![0i8; n];
    for &reflect in &[false, true] {
        for &sign in &[1i8, -1] {
            for tau in 0..n {
                for (k, c) in candidate.iter_mut().enumerate() {
                    let src = if reflect { (tau + n - k) % n } else { (k + n - tau) % n };
                    *c = sign * s.spins[src];
                }
                let better = match &best {
                    None => true,
                    Some((cur, cur_tau, _, _)) => {
                        lex_less(&candidate, cur) || (candidate == *cur && tau < *cur_tau)
                    }
                };
                if better {
                    best = Some((candidate.clone(), tau, reflect, sign));
                }
            }
        }
    }
    let (canon, tau, reflected, sign) = best.expect("at least one candidate");
    let mut lengths = Vec::new();
    let mut run = 1u32;
    for k in 1..n {
        if canon[k] == canon[k - 1] {
            run += 1;
        } else {
            lengths.push(run);
            run = 1;
        }
    }
    lengths.push(run);
    CanonicalForm {
        blocks: BlockArray { first_sign: sign, lengths },
        translation: tau,
        reflected,
    }
}

/// Exact inverse of [`to_blocks`]: rebuilds the original state from the
/// canonical pattern and the recorded group element.
pub fn from_blocks(c: &CanonicalForm) -> Result<SpinState> {
    c.blocks.validate()?;
    let n = c.blocks.n_sites();
    if c.translation >= n {
        return Err(Error::Validation(format!(
            "translation {} out of range for {} sites",
            c.translation, n
        )));
    }
    // Canonical pattern: first block positive, starting at site 0.
    let canon = BlockArray {
        first_sign: 1,
        lengths: c.blocks.lengths.clone(),
    }
    .to_state();
    let spins = (0..n)
        .map(|i| {
            let idx = if c.reflected {
                (c.translation + n - i) % n
            } else {
                (i + c.translation) % n
            };
            c.blocks.first_sign * canon.spins[idx]
        })
        .collect();
    Ok(SpinState { spins })
}

// ---------------------------------------------------------------------------
// Defect decomposition
// ---------------------------------------------------------------------------

/// One segment of a defect decomposition, in canonical coordinates
/// (`start` is a site index of the canonical pattern).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    /// An arbitrary block fragment interrupting the periodic background.
    Defect { lengths: Vec<u32>, start: usize },
    /// A maximal run of consecutive (+h, -h) pairs; `pair_count >= 1`.
    Run { pair_count: usize, start: usize },
}

impl Segment {
    pub fn len_sites(&self, h_ref: u32) -> usize {
        match self {
            Segment::Defect { lengths, .. } => lengths.iter().map(|&h| h as usize).sum(),
            Segment::Run { pair_count, .. } => 2 * pair_count * h_ref as usize,
        }
    }
}

/// Decomposition of a state into defects alternating with maximal runs of
/// (+h_ref, -h_ref) block pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectDecomposition {
    pub h_ref: u32,
    /// Segments in cyclic order of the canonical pattern, starting with a
    /// defect whenever one exists.
    pub segments: Vec<Segment>,
    pub translation: usize,
    pub n_sites: usize,
}

impl DefectDecomposition {
    /// Runs as (pair_count, start_site).
    pub fn runs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Run { pair_count, start } => Some((*pair_count, *start)),
            _ => None,
        })
    }

    pub fn defects(&self) -> impl Iterator<Item = (&[u32], usize)> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Defect { lengths, start } => Some((lengths.as_slice(), *start)),
            _ => None,
        })
    }

    /// Total number of sites covered by defects.
    pub fn defect_mass(&self) -> usize {
        self.defects().map(|(d, _)| d.iter().map(|&h| h as usize).sum::<usize>()).sum()
    }
}

/// Decomposes a state into defects and maximal plus-first runs of
/// `(+h_ref, -h_ref)` pairs.
///
/// Runs are grown greedily left-to-right from the canonical origin: a block
/// joins a run only as the start of a complete `(+h_ref, -h_ref)` pair,
/// otherwise it is absorbed into the current defect. Runs (and defects)
/// meeting across the cyclic origin are merged so maximality holds on the
/// torus. A constant state whose pattern is not h_ref-periodic comes out as
/// a single all-defect segment.
pub fn decompose_defects(s: &SpinState, h_ref: u32) -> DefectDecomposition {
    debug_assert!(h_ref >= 1);
    let canon_form = to_blocks(s);
    let canon = BlockArray {
        first_sign: 1,
        lengths: canon_form.blocks.lengths.clone(),
    };
    let n = canon.n_sites();
    let m = canon.n_blocks();
    // Block start sites in the canonical pattern.
    let mut starts = Vec::with_capacity(m);
    let mut pos = 0usize;
    for &h in &canon.lengths {
        starts.push(pos);
        pos += h as usize;
    }

    let mut segments: Vec<Segment> = Vec::new();
    let mut b = 0usize;
    while b < m {
        let is_pair = b + 1 < m
            && canon.sign(b) == 1
            && canon.lengths[b] == h_ref
            && canon.lengths[b + 1] == h_ref;
        if is_pair {
            match segments.last_mut() {
                Some(Segment::Run { pair_count, .. }) => *pair_count += 1,
                _ => segments.push(Segment::Run { pair_count: 1, start: starts[b] }),
            }
            b += 2;
        } else {
            match segments.last_mut() {
                Some(Segment::Defect { lengths, .. }) => lengths.push(canon.lengths[b]),
                _ => segments.push(Segment::Defect {
                    lengths: vec![canon.lengths[b]],
                    start: starts[b],
                }),
            }
            b += 1;
        }
    }
    // Merge across the cyclic origin.
    if segments.len() >= 2 {
        let merge_runs = matches!(
            (segments.last(), segments.first()),
            (Some(Segment::Run { .. }), Some(Segment::Run { start: 0, .. }))
        );
        let merge_defects = matches!(
            (segments.last(), segments.first()),
            (Some(Segment::Defect { .. }), Some(Segment::Defect { start: 0, .. }))
        );
        if merge_runs {
            let first = segments.remove(0);
            if let (Some(Segment::Run { pair_count, .. }), Segment::Run { pair_count: pf, .. }) =
                (segments.last_mut(), first)
            {
                *pair_count += pf;
            }
        } else if merge_defects {
            let first = segments.remove(0);
            if let (
                Some(Segment::Defect { lengths, .. }),
                Segment::Defect { lengths: lf, .. },
            ) = (segments.last_mut(), first)
            {
                lengths.extend(lf);
            }
        }
    }
    // Cyclic normalization: start with a defect when any exists.
    if let Some(first_defect) = segments.iter().position(|s| matches!(s, Segment::Defect { .. }))
    {
        segments.rotate_left(first_defect);
    }
    DefectDecomposition {
        h_ref,
        segments,
        translation: canon_form.translation,
        n_sites: n,
    }
}

/// The scaled phase function of a decomposition: piecewise constant on the
/// unit torus, with value `R_i mod 2 h_ref` on the scaled image of run `G_i`.
/// Defect intervals inherit the value of the run on their left, so values
/// change exactly at the left endpoint of each run's scaled image.
///
/// The jump at a run's start carries the winding of the defect crossed
/// there, `(R_i - R_prev) mod 2 h_ref` measured along the torus (so the sum
/// of jump sizes over one period is N mod 2 h_ref even when the run labels
/// coincide — a phase slip wrapping the whole torus is still a slip). Jumps
/// of size 0 are merged away. A decomposition with no run maps to the
/// constant 0.
pub fn phase_function(d: &DefectDecomposition) -> PhaseFunction {
    let modulus = 2 * d.h_ref;
    let n = d.n_sites;
    let mut starts: Vec<usize> = d.runs().map(|(_, s)| s).collect();
    if starts.is_empty() {
        return PhaseFunction::constant(modulus, 0);
    }
    starts.sort_unstable();
    let count = starts.len();
    // Value on (0, x_1]: the label of the run covering the origin (either it
    // starts at site 0 or it is the last run, wrapping through the seam).
    let base_value = if starts[0] == 0 {
        0
    } else {
        starts[count - 1] as u32 % modulus
    };
    let jumps = (0..count)
        .map(|k| {
            let prev = if k == 0 {
                starts[count - 1] as i64 - n as i64
            } else {
                starts[k - 1] as i64
            };
            let delta = (starts[k] as i64 - prev) as u32 % modulus;
            let x = if starts[k] == 0 { 1.0 } else { starts[k] as f64 / n as f64 };
            (x, delta)
        })
        .collect();
    PhaseFunction::from_jumps(modulus, base_value, jumps)
}
