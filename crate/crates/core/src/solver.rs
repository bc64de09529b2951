//! Ground-state computation: exhaustive enumeration over symmetry classes
//! of spin states, branch-and-bound over block compositions driven by the
//! per-block lower bound Σ h_μ e(h_μ) - c N^{-p}, and the empirical energy
//! gap.
//!
//! Classes are enumerated by generating binary necklaces (lexicographically
//! smallest rotations, FKM order) and keeping those that are also minimal
//! under reflection and global flip — the same canonical representative
//! produced by [`crate::state::to_blocks`].

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{Engine, StripeGroundState};
use crate::state::{to_blocks, BlockArray, CanonicalForm};
use crate::{Error, Result};

/// Hard limit of the enumeration machinery (bit-twiddling on u64 words).
pub const ENUMERATION_LIMIT: usize = 32;
/// Default exhaustive cap: the certified suite stays desk-scale below this.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    BranchAndBound,
}

/// A certified or best-effort ground state.
#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub state: CanonicalForm,
    pub energy: f64,
    pub method: Method,
    pub nodes_explored: u64,
    pub certified: bool,
    /// Canonical lengths of other classes within tie tolerance of the
    /// minimum (uniqueness holds at multiples of 2h*, not elsewhere).
    pub ties: Vec<Vec<u32>>,
}

/// Two-lowest-energy statistics over exhaustively enumerated sizes.
#[derive(Debug, Clone, Serialize)]
pub struct GapEstimate {
    pub n_values: Vec<usize>,
    /// min over sampled N of (second-lowest - lowest) energy.
    pub delta: f64,
    /// delta / 2h*.
    pub delta_tilde: f64,
    /// Max observed Σ_{h_μ ≠ h*} h_μ over near-ground states.
    pub k0_estimate: u32,
}

const TIE_TOL: f64 = 1e-12;
/// Distinct-energy grouping tolerance for gap estimation.
const LEVEL_TOL: f64 = 1e-9;

fn rotate(x: u64, k: usize, n: usize) -> u64 {
    let mask = (1u64 << n) - 1;
    if k == 0 {
        x & mask
    } else {
        ((x >> k) | (x << (n - k))) & mask
    }
}

fn min_rotation(x: u64, n: usize) -> u64 {
    (0..n).map(|k| rotate(x, k, n)).min().unwrap()
}

/// True iff the word (its own minimal rotation, by construction) is also
/// minimal under reflection and flip.
fn is_group_canonical(x: u64, n: usize) -> bool {
    let mask = (1u64 << n) - 1;
    let refl = x.reverse_bits() >> (64 - n);
    let flip = !x & mask;
    let refl_flip = !refl & mask;
    min_rotation(refl, n) >= x && min_rotation(flip, n) >= x && min_rotation(refl_flip, n) >= x
}

fn word_to_lengths(a: &[u8]) -> Vec<u32> {
    let mut lengths = Vec::new();
    let mut run = 1u32;
    for i in 1..a.len() {
        if a[i] == a[i - 1] {
            run += 1;
        } else {
            lengths.push(run);
            run = 1;
        }
    }
    lengths.push(run);
    lengths
}

/// Calls `visit` once per equivalence class of spin states on N sites
/// (rotation x reflection x flip), passing the canonical block lengths
/// (first sign positive), in deterministic lexicographic order.
pub fn for_each_canonical_class<F: FnMut(&[u32])>(n: usize, mut visit: F) -> Result<()> {
    if n == 0 || n > ENUMERATION_LIMIT {
        return Err(Error::CapExceeded(format!(
            "class enumeration supports 1 <= N <= {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    // FKM necklace generation over {0, 1}, 0 = '+'.
    struct Gen<'a> {
        n: usize,
        a: Vec<u8>,
        visit: &'a mut dyn FnMut(&[u8]),
    }
    impl Gen<'_> {
        fn run(&mut self, t: usize, p: usize) {
            if t > self.n {
                if self.n % p == 0 {
                    let mut x = 0u64;
                    for &b in &self.a[1..=self.n] {
                        x = (x << 1) | b as u64;
                    }
                    if is_group_canonical(x, self.n) {
                        let word: Vec<u8> = self.a[1..=self.n].to_vec();
                        (self.visit)(&word);
                    }
                }
            } else {
                self.a[t] = self.a[t - p];
                self.run(t + 1, p);
                for v in (self.a[t - p] + 1)..=1 {
                    self.a[t] = v;
                    self.run(t + 1, t);
                }
            }
        }
    }
    let mut on_word = |word: &[u8]| visit(&word_to_lengths(word));
    let mut gen = Gen { n, a: vec![0; n + 1], visit: &mut on_word };
    gen.run(1, 1);
    Ok(())
}

/// Collects every canonical class on N sites; refuses above `cap`.
pub fn enumerate_canonical(n: usize, cap: usize) -> Result<Vec<BlockArray>> {
    if n > cap {
        return Err(Error::CapExceeded(format!(
            "N = {n} exceeds the exhaustive cap {cap}; raise the cap or use branch-and-bound"
        )));
    }
    let mut out = Vec::new();
    for_each_canonical_class(n, |lengths| {
        out.push(BlockArray { first_sign: 1, lengths: lengths.to_vec() })
    })?;
    Ok(out)
}

/// Streams classes in chunks through a parallel energy map, folding the
/// results in enumeration order (so the outcome does not depend on the
/// worker count).
fn scan_energies<T: Send, FM, FF>(n: usize, map: FM, mut fold: FF) -> Result<()>
where
    FM: Fn(&[u32]) -> Result<T> + Sync,
    FF: FnMut(&[u32], T) -> Result<()>,
{
    const CHUNK: usize = 8192;
    let mut buf: Vec<Vec<u32>> = Vec::with_capacity(CHUNK);
    let mut flush = |buf: &mut Vec<Vec<u32>>, fold: &mut FF| -> Result<()> {
        let results: Vec<Result<T>> = buf.par_iter().map(|lengths| map(lengths)).collect();
        for (lengths, r) in buf.iter().zip(results) {
            fold(lengths, r?)?;
        }
        buf.clear();
        Ok(())
    };
    let mut pending: Result<()> = Ok(());
    for_each_canonical_class(n, |lengths| {
        if pending.is_err() {
            return;
        }
        buf.push(lengths.to_vec());
        if buf.len() >= CHUNK {
            pending = flush(&mut buf, &mut fold);
        }
    })?;
    pending?;
    flush(&mut buf, &mut fold)
}

/// Streams (canonical lengths, block energy) pairs for every class at one
/// size, in deterministic enumeration order.
pub(crate) fn scan_class_energies<F: FnMut(&[u32], f64)>(
    engine: &Engine,
    n: usize,
    mut f: F,
) -> Result<()> {
    scan_energies(
        n,
        |lengths| {
            let b = BlockArray { first_sign: 1, lengths: lengths.to_vec() };
            Ok(engine.energy_blocks(&b)?.total)
        },
        |lengths, e| {
            f(lengths, e);
            Ok(())
        },
    )
}

/// True minimizer over all canonical classes (certified).
pub fn ground_state_exact(engine: &Engine, n: usize, cap: usize) -> Result<GroundStateResult> {
    if n > cap {
        return Err(Error::CapExceeded(format!(
            "N = {n} exceeds the exhaustive cap {cap}"
        )));
    }
    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut ties: Vec<Vec<u32>> = Vec::new();
    let mut count = 0u64;
    scan_energies(
        n,
        |lengths| {
            let b = BlockArray { first_sign: 1, lengths: lengths.to_vec() };
            Ok(engine.energy_blocks(&b)?.total)
        },
        |lengths, e| {
            count += 1;
            match &mut best {
                None => best = Some((e, lengths.to_vec())),
                Some((be, bl)) => {
                    let scale = 1.0 + be.abs();
                    if e < *be - TIE_TOL * scale {
                        *be = e;
                        *bl = lengths.to_vec();
                        ties.clear();
                    } else if (e - *be).abs() <= TIE_TOL * scale {
                        if lengths < bl.as_slice() {
                            ties.push(std::mem::replace(bl, lengths.to_vec()));
                        } else {
                            ties.push(lengths.to_vec());
                        }
                    }
                }
            }
            Ok(())
        },
    )?;
    let (energy, lengths) = best.expect("at least one class");
    Ok(GroundStateResult {
        state: CanonicalForm {
            blocks: BlockArray { first_sign: 1, lengths },
            translation: 0,
            reflected: false,
        },
        energy,
        method: Method::Exhaustive,
        nodes_explored: count,
        certified: true,
        ties,
    })
}

/// Lowest and second-lowest distinct energy levels at one size, plus the
/// largest defect mass among states within the gap of the minimum.
fn two_lowest(engine: &Engine, n: usize, h_star: u32) -> Result<(f64, f64, u32)> {
    let mut rows: Vec<(f64, u32)> = Vec::new();
    scan_energies(
        n,
        |lengths| {
            let b = BlockArray { first_sign: 1, lengths: lengths.to_vec() };
            let e = engine.energy_blocks(&b)?.total;
            let mass: u32 = lengths.iter().filter(|&&h| h != h_star).sum();
            Ok((e, mass))
        },
        |_, row| {
            rows.push(row);
            Ok(())
        },
    )?;
    let e1 = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let e2 = rows
        .iter()
        .map(|r| r.0)
        .filter(|&e| e > e1 + LEVEL_TOL)
        .fold(f64::INFINITY, f64::min);
    if !e2.is_finite() {
        return Err(Error::Inconclusive(format!(
            "all classes at N = {n} share one energy level; no gap to measure"
        )));
    }
    let delta = e2 - e1;
    let k0 = rows
        .iter()
        .filter(|r| r.0 <= e1 + delta + LEVEL_TOL)
        .map(|r| r.1)
        .max()
        .unwrap_or(0);
    Ok((e1, e2, k0))
}

/// Exhaustive two-level gap over N = 2 h* K for K in `k_list`.
pub fn energy_gap(
    engine: &Engine,
    g: &StripeGroundState,
    k_list: &[usize],
    cap: usize,
) -> Result<GapEstimate> {
    if k_list.is_empty() {
        return Err(Error::Validation("energy_gap needs at least one K".into()));
    }
    let h = g.h_star;
    let mut n_values = Vec::new();
    let mut delta = f64::INFINITY;
    let mut k0 = 0u32;
    for &k in k_list {
        let n = 2 * h as usize * k;
        if n > cap {
            return Err(Error::CapExceeded(format!(
                "N = {n} (K = {k}) exceeds the exhaustive cap {cap}"
            )));
        }
        let (e1, e2, k0_n) = two_lowest(engine, n, h)?;
        delta = delta.min(e2 - e1);
        k0 = k0.max(k0_n);
        n_values.push(n);
        let _ = e1;
    }
    Ok(GapEstimate {
        n_values,
        delta,
        delta_tilde: delta / (2.0 * h as f64),
        k0_estimate: k0,
    })
}

// ---------------------------------------------------------------------------
// Branch and bound over block compositions
// ---------------------------------------------------------------------------

/// Empirical constant of the lower bound E_N >= Σ h_μ e(h_μ) - c N^{-p},
/// fitted over all classes with N <= n_max (largest observed violation of
/// the c = 0 bound, scaled by N^p).
pub fn fit_lower_bound_constant(engine: &Engine, n_max: usize) -> Result<f64> {
    let p = engine.params().p;
    let mut c_fit: f64 = 0.0;
    for n in 1..=n_max {
        scan_energies(
            n,
            |lengths| {
                let b = BlockArray { first_sign: 1, lengths: lengths.to_vec() };
                let e = engine.energy_blocks(&b)?.total;
                let mut block_sum = 0.0;
                for &h in lengths {
                    block_sum += h as f64 * engine.energy_per_site(h)?;
                }
                Ok((block_sum - e) * (n as f64).powf(p))
            },
            |_, c| {
                if c > c_fit {
                    c_fit = c;
                }
                Ok(())
            },
        )?;
    }
    Ok(c_fit)
}

/// A pruning constant cross-validated against exhaustive ground states.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidatedBound {
    pub c_inflated: f64,
    /// Largest N for which branch-and-bound with this constant reproduced
    /// the exhaustive minimum; 0 means unvalidated.
    pub validated_to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbConfig {
    /// Largest single block length explored.
    pub h_max_block: u32,
    /// Exhaustive cap the certificate is measured against.
    pub exhaustive_cap: usize,
    pub require_certified: bool,
    pub keep_log: bool,
}

impl BnbConfig {
    pub fn defaults(g: &StripeGroundState) -> BnbConfig {
        BnbConfig {
            h_max_block: (4 * g.h_star).max(8),
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            require_certified: false,
            keep_log: false,
        }
    }
}

/// One audit record per explored node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BnbLogRecord {
    pub node: u64,
    pub bound: f64,
    pub incumbent: f64,
}

/// Inflation factor applied to the fitted constant before it prunes.
const C_INFLATION: f64 = 10.0;

/// Fits the lower-bound constant on every N <= n_max and verifies that
/// branch-and-bound with the inflated constant reproduces each exhaustive
/// minimum, returning the certificate.
pub fn validate_bound(
    engine: &Engine,
    g: &StripeGroundState,
    n_max: usize,
) -> Result<ValidatedBound> {
    g.require_unique()?;
    let c_fit = fit_lower_bound_constant(engine, n_max)?;
    let bound = ValidatedBound {
        c_inflated: C_INFLATION * c_fit.max(1e-6),
        validated_to: 0,
    };
    let cfg = BnbConfig {
        h_max_block: (4 * g.h_star).max(8).max(n_max as u32),
        exhaustive_cap: n_max,
        require_certified: false,
        keep_log: false,
    };
    for n in 1..=n_max {
        let exact = ground_state_exact(engine, n, n_max)?;
        let (bnb, _) = ground_state_bnb(engine, n, g, &bound, &cfg)?;
        if (bnb.energy - exact.energy).abs() > 1e-10 * (1.0 + exact.energy.abs()) {
            return Err(Error::Inconclusive(format!(
                "branch-and-bound with c = {} missed the exhaustive minimum at N = {n} \
                 ({} vs {}); the bound constant cannot be certified",
                bound.c_inflated, bnb.energy, exact.energy
            )));
        }
    }
    Ok(ValidatedBound { c_inflated: bound.c_inflated, validated_to: n_max })
}

struct Search<'a> {
    engine: &'a Engine,
    e_star: f64,
    penalty: f64,
    h_cap: u32,
    child_order: &'a [u32],
    best_energy: f64,
    best_lengths: Option<Vec<u32>>,
    ties: Vec<Vec<u32>>,
    nodes: u64,
    log: Option<Vec<BnbLogRecord>>,
}

impl Search<'_> {
    fn leaf(&mut self, partial: &[u32]) -> Result<()> {
        if partial.len() != 1 && partial.len() % 2 != 0 {
            return Ok(());
        }
        let b = BlockArray { first_sign: 1, lengths: partial.to_vec() };
        let e = self.engine.energy_blocks(&b)?.total;
        let scale = 1.0 + self.best_energy.abs().min(1e300);
        if e < self.best_energy - TIE_TOL * scale {
            self.best_energy = e;
            self.best_lengths = Some(to_blocks(&b.to_state()).blocks.lengths);
            self.ties.clear();
        } else if (e - self.best_energy).abs() <= TIE_TOL * scale {
            let canon = to_blocks(&b.to_state()).blocks.lengths;
            if let Some(bl) = &mut self.best_lengths {
                if canon < *bl {
                    self.ties.push(std::mem::replace(bl, canon));
                } else if canon != *bl && !self.ties.contains(&canon) {
                    self.ties.push(canon);
                }
            }
        }
        Ok(())
    }

    fn dfs(&mut self, partial: &mut Vec<u32>, acc: f64, remaining: usize) -> Result<()> {
        self.nodes += 1;
        let bound = acc + remaining as f64 * self.e_star - self.penalty;
        if let Some(log) = &mut self.log {
            log.push(BnbLogRecord {
                node: self.nodes,
                bound,
                incumbent: self.best_energy,
            });
        }
        if bound > self.best_energy + TIE_TOL * (1.0 + self.best_energy.abs().min(1e300)) {
            return Ok(());
        }
        if remaining == 0 {
            return self.leaf(partial);
        }
        for &h in self.child_order {
            if h > self.h_cap || h as usize > remaining {
                continue;
            }
            let he = h as f64 * self.engine.energy_per_site(h)?;
            partial.push(h);
            self.dfs(partial, acc + he, remaining - h as usize)?;
            partial.pop();
        }
        Ok(())
    }
}

/// Branch-and-bound over block compositions of N (even block count, or the
/// single constant block), pruning with
/// Σ_assigned h e(h) + (N - assigned) e(h*) - c N^{-p} against the incumbent.
///
/// Deterministic: sequential depth-first search with children ordered h*,
/// h*+1, h*-1, then ascending; ties resolved toward the lexicographically
/// smallest canonical form. `certified` is set only when the bound constant
/// was cross-validated up to the configured exhaustive cap.
pub fn ground_state_bnb(
    engine: &Engine,
    n: usize,
    g: &StripeGroundState,
    bound: &ValidatedBound,
    cfg: &BnbConfig,
) -> Result<(GroundStateResult, Option<Vec<BnbLogRecord>>)> {
    g.require_unique()?;
    if cfg.h_max_block < g.h_star {
        return Err(Error::Validation(format!(
            "block-length cap {} excludes the optimal stripe width h* = {}",
            cfg.h_max_block, g.h_star
        )));
    }
    let certified = bound.validated_to >= cfg.exhaustive_cap.min(n);
    if cfg.require_certified && !certified {
        return Err(Error::Precondition(format!(
            "bound constant validated only to N = {}, below the requested cap {}",
            bound.validated_to, cfg.exhaustive_cap
        )));
    }
    let p = engine.params().p;
    let penalty = bound.c_inflated * (n as f64).powf(-p);

    // Child ordering: optimal width first, its neighbors, then the rest.
    let mut child_order: Vec<u32> = vec![g.h_star, g.h_star + 1];
    if g.h_star > 1 {
        child_order.push(g.h_star - 1);
    }
    for h in 1..=cfg.h_max_block {
        if !child_order.contains(&h) {
            child_order.push(h);
        }
    }

    let mut search = Search {
        engine,
        e_star: g.e_star,
        penalty,
        h_cap: cfg.h_max_block,
        child_order: &child_order,
        best_energy: f64::INFINITY,
        best_lengths: None,
        ties: Vec::new(),
        nodes: 0,
        log: if cfg.keep_log { Some(Vec::new()) } else { None },
    };
    // Seed with the constant state, the one composition the even-count DFS
    // cannot reach.
    {
        let whole = BlockArray { first_sign: 1, lengths: vec![n as u32] };
        search.best_energy = engine.energy_blocks(&whole)?.total;
        search.best_lengths = Some(vec![n as u32]);
        search.nodes += 1;
    }
    let mut partial = Vec::new();
    search.dfs(&mut partial, 0.0, n)?;

    let lengths = search.best_lengths.expect("at least the constant state");
    let result = GroundStateResult {
        state: CanonicalForm {
            blocks: BlockArray { first_sign: 1, lengths },
            translation: 0,
            reflected: false,
        },
        energy: search.best_energy,
        method: Method::BranchAndBound,
        nodes_explored: search.nodes,
        certified,
        ties: search.ties,
    };
    Ok((result, search.log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ModelParams;
    use std::collections::HashSet;

    fn engine(p: f64, j: f64) -> Engine {
        Engine::new(ModelParams::new(p, j).unwrap()).unwrap()
    }

    #[test]
    fn enumerate_n4_classes() {
        let classes = enumerate_canonical(4, 28).unwrap();
        let lengths: HashSet<Vec<u32>> = classes.iter().map(|b| b.lengths.clone()).collect();
        let expect: HashSet<Vec<u32>> =
            [vec![4u32], vec![2, 2], vec![3, 1], vec![1, 1, 1, 1]].into_iter().collect();
        assert_eq!(lengths, expect);
    }

    #[test]
    fn enumerate_n1() {
        assert_eq!(enumerate_canonical(1, 28).unwrap().len(), 1);
    }

    #[test]
    fn enumerate_cap_refusal() {
        assert!(matches!(enumerate_canonical(20, 12), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn class_count_matches_orbit_count() {
        // Exhaustive orbit counting over all 2^N states is the independent
        // oracle for the class count.
        for n in [6usize, 9, 12] {
            let mut canon_set = HashSet::new();
            let mask = (1u64 << n) - 1;
            for x in 0..=mask {
                let mut best = u64::MAX;
                for y in [
                    x,
                    x.reverse_bits() >> (64 - n),
                    !x & mask,
                    (!(x.reverse_bits() >> (64 - n))) & mask,
                ] {
                    best = best.min(min_rotation(y, n));
                }
                canon_set.insert(best);
            }
            let enumerated = enumerate_canonical(n, 28).unwrap().len();
            assert_eq!(enumerated, canon_set.len(), "n={n}");
        }
    }

    #[test]
    fn classes_agree_with_to_blocks_canonical() {
        for n in [5usize, 8, 11] {
            let mut seen = 0usize;
            for_each_canonical_class(n, |lengths| {
                let b = BlockArray { first_sign: 1, lengths: lengths.to_vec() };
                let canon = to_blocks(&b.to_state());
                assert_eq!(canon.blocks.lengths, lengths, "n={n}");
                seen += 1;
            })
            .unwrap();
            assert!(seen > 0);
        }
    }

    #[test]
    fn exact_ground_state_alternating_at_small_j() {
        let eng = engine(2.0, 0.05);
        let gs = ground_state_exact(&eng, 8, 28).unwrap();
        assert_eq!(gs.state.blocks.lengths, vec![1; 8]);
        assert!(gs.certified);
        let g = eng.find_hstar(20).unwrap();
        let f = gs.energy - 8.0 * g.e_star;
        assert!(f.abs() < 1e-9, "F = {f}");
    }

    #[test]
    fn exact_ground_state_stripe_at_multiples() {
        // h* = 2 regime: at N = 8 and 12 the pure stripe is the unique
        // ground state.
        let eng = engine(2.0, 1.4);
        let g = eng.find_hstar(30).unwrap();
        assert_eq!(g.h_star, 2);
        for n in [8usize, 12] {
            let gs = ground_state_exact(&eng, n, 28).unwrap();
            assert_eq!(gs.state.blocks.lengths, vec![2; n / 2], "n={n}");
            assert!(gs.ties.is_empty(), "uniqueness at multiples of 2h*");
        }
    }

    #[test]
    fn off_multiple_sits_above_gap() {
        let eng = engine(2.0, 0.05);
        let g = eng.find_hstar(20).unwrap();
        let gap = energy_gap(&eng, &g, &[2, 3, 4], 28).unwrap();
        assert!(gap.delta > 0.0);
        assert!((gap.delta_tilde - gap.delta / 2.0).abs() < 1e-15);
        for n in [5usize, 7, 9] {
            let gs = ground_state_exact(&eng, n, 28).unwrap();
            let f = gs.energy - n as f64 * g.e_star;
            assert!(
                f >= gap.delta_tilde - 1e-9,
                "n={n}: F = {f} vs delta_tilde = {}",
                gap.delta_tilde
            );
        }
    }

    #[test]
    fn gap_stable_across_sizes() {
        let eng = engine(2.0, 0.05);
        let g = eng.find_hstar(20).unwrap();
        let mut deltas = Vec::new();
        for k in [3usize, 4, 5] {
            deltas.push(energy_gap(&eng, &g, &[k], 28).unwrap().delta);
        }
        let max = deltas.iter().cloned().fold(f64::MIN, f64::max);
        let min = deltas.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min) / max <= 0.2, "gap drifts more than 20%: {deltas:?}");
    }

    #[test]
    fn bnb_matches_exact() {
        let eng = engine(2.0, 0.05);
        let g = eng.find_hstar(20).unwrap();
        let bound = validate_bound(&eng, &g, 12).unwrap();
        assert_eq!(bound.validated_to, 12);
        let cfg = BnbConfig {
            h_max_block: 8,
            exhaustive_cap: 12,
            require_certified: true,
            keep_log: false,
        };
        for n in 13..=20usize {
            let exact = ground_state_exact(&eng, n, 28).unwrap();
            let (bnb, _) = ground_state_bnb(&eng, n, &g, &bound, &cfg).unwrap();
            assert!(
                (bnb.energy - exact.energy).abs() < 1e-10,
                "n={n}: {} vs {}",
                bnb.energy,
                exact.energy
            );
            assert!(bnb.certified);
        }
    }

    #[test]
    fn bnb_prunes_aggressively_at_n60() {
        let eng = engine(2.0, 0.05);
        let g = eng.find_hstar(20).unwrap();
        let bound = validate_bound(&eng, &g, 10).unwrap();
        let cfg = BnbConfig {
            h_max_block: 6,
            exhaustive_cap: 10,
            require_certified: false,
            keep_log: true,
        };
        let (gs, log) = ground_state_bnb(&eng, 60, &g, &bound, &cfg).unwrap();
        assert_eq!(gs.state.blocks.lengths, vec![1; 60]);
        let e1 = eng.energy_per_site(1).unwrap();
        assert!((gs.energy - 60.0 * e1).abs() < 1e-8);
        // Far fewer nodes than the ~2^59 compositions.
        assert!(gs.nodes_explored < 100_000, "nodes = {}", gs.nodes_explored);
        // Monotone incumbent along the exploration sequence.
        let log = log.unwrap();
        for w in log.windows(2) {
            assert!(w[1].incumbent <= w[0].incumbent + 1e-12);
        }
    }

    #[test]
    fn bnb_cap_below_hstar_refused() {
        let eng = engine(2.0, 1.4);
        let g = eng.find_hstar(30).unwrap();
        assert_eq!(g.h_star, 2);
        let bound = ValidatedBound { c_inflated: 1.0, validated_to: 0 };
        let cfg = BnbConfig {
            h_max_block: 1,
            exhaustive_cap: 10,
            require_certified: false,
            keep_log: false,
        };
        assert!(ground_state_bnb(&eng, 12, &g, &bound, &cfg).is_err());
    }

    #[test]
    fn bnb_determinism() {
        let eng = engine(2.0, 0.05);
        let g = eng.find_hstar(20).unwrap();
        let bound = ValidatedBound { c_inflated: 0.5, validated_to: 10 };
        let cfg = BnbConfig {
            h_max_block: 5,
            exhaustive_cap: 10,
            require_certified: false,
            keep_log: false,
        };
        let (a, _) = ground_state_bnb(&eng, 17, &g, &bound, &cfg).unwrap();
        let (b, _) = ground_state_bnb(&eng, 17, &g, &bound, &cfg).unwrap();
        assert_eq!(a.nodes_explored, b.nodes_explored);
        assert_eq!(a.state.blocks.lengths, b.state.blocks.lengths);
        assert_eq!(a.energy, b.energy);
    }
}
