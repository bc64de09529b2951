//! The continuum-limit layer: piecewise-constant phase functions on the unit
//! torus with values in Z/2h*Z, the limit functional summing the anti-phase
//! density over jumps subject to the winding constraint, recovery-sequence
//! construction, and a convergence checker for sequences of spin states.
//!
//! A phase function is stored as its jump list: positions in (0,1] with an
//! explicit jump size in {1, ..., 2h*-1}. Values accumulate from the first
//! piece of the fundamental interval; the total winding Σ Δr need not vanish
//! mod 2h*, in which case the values do not close up across the seam at
//! 1 ≡ 0 — exactly like the discrete states on a torus whose size is not a
//! multiple of 2h*, where the pattern cannot recur smoothly. Rotations move
//! jump positions but preserve sizes, so the winding is rotation-invariant.
//!
//! Phase-function text format: semicolon-separated `value:right_endpoint`
//! pairs covering (0,1], e.g. `0:0.5;3:1.0` (value 0 on (0,0.5], value 3 on
//! (0.5,1]); jumps are read off interior boundaries, the seam carries the
//! remaining winding.

use crate::{Error, Result};

/// A jump of a phase function: at `x` the value changes by `size`
/// (a nonzero residue) to `value_right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub x: f64,
    pub value_right: u32,
    pub size: u32,
}

/// 1-periodic piecewise-constant function from the torus to Z/(modulus)Z,
/// carried by its jump list.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFunction {
    modulus: u32,
    /// Value on (0, x_1] (or everywhere, if there are no jumps).
    base_value: u32,
    /// (position, jump size), strictly increasing positions in (0,1],
    /// sizes in {1, ..., modulus-1}.
    jumps: Vec<(f64, u32)>,
}

impl PhaseFunction {
    /// Builds a phase function from the value on the first piece of (0,1]
    /// and raw (position, size) jumps. Zero-size jumps are dropped, jumps at
    /// coinciding positions merge (sizes add mod modulus).
    pub fn from_jumps(modulus: u32, base_value: u32, jumps: Vec<(f64, u32)>) -> PhaseFunction {
        assert!(modulus >= 2 && modulus % 2 == 0, "modulus must be even and >= 2");
        let mut js: Vec<(f64, u32)> = jumps
            .into_iter()
            .map(|(x, s)| {
                debug_assert!(x > 0.0 && x <= 1.0, "jump position must lie in (0,1]");
                (x, s % modulus)
            })
            .collect();
        js.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u32)> = Vec::with_capacity(js.len());
        for (x, s) in js {
            match merged.last_mut() {
                Some((px, ps)) if *px == x => *ps = (*ps + s) % modulus,
                _ => merged.push((x, s)),
            }
        }
        merged.retain(|&(_, s)| s != 0);
        PhaseFunction {
            modulus,
            base_value: base_value % modulus,
            jumps: merged,
        }
    }

    pub fn constant(modulus: u32, value: u32) -> PhaseFunction {
        PhaseFunction::from_jumps(modulus, value, Vec::new())
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Value at a point of the torus; x is reduced to (0,1] and the jumps
    /// of the fundamental interval accumulate from the base value.
    pub fn value_at(&self, x: f64) -> u32 {
        let mut t = x % 1.0;
        if t <= 0.0 {
            t += 1.0;
        }
        let mut v = self.base_value;
        for &(jx, s) in &self.jumps {
            if jx < t {
                v = (v + s) % self.modulus;
            } else {
                break;
            }
        }
        v
    }

    /// The jumps with positions, sizes and right-values.
    pub fn jumps(&self) -> Vec<Jump> {
        let mut v = self.base_value;
        self.jumps
            .iter()
            .map(|&(x, s)| {
                v = (v + s) % self.modulus;
                Jump { x, value_right: v, size: s }
            })
            .collect()
    }

    /// Total winding Σ Δr over one period, as a residue. For phase functions
    /// extracted from an N-site state this is N mod 2h*.
    pub fn winding(&self) -> u32 {
        self.jumps.iter().map(|&(_, s)| s).sum::<u32>() % self.modulus
    }

    /// Rotates the torus by `offset`: positions shift, sizes are preserved
    /// (so the winding is invariant); the base value follows the piece that
    /// lands at the start of the fundamental interval.
    pub fn rotated(&self, offset: f64) -> PhaseFunction {
        if self.jumps.is_empty() {
            return self.clone();
        }
        // Value just right of 0+ after rotation = old value at (-offset)+.
        let mut anchor = -offset % 1.0;
        if anchor <= 0.0 {
            anchor += 1.0;
        }
        // value_at gives the value on the piece containing anchor; the piece
        // extends right of anchor, which is what lands on (0, x_1'].
        let new_base = self.value_at((anchor + 1e-15).min(1.0).max(f64::MIN_POSITIVE));
        let jumps = self
            .jumps
            .iter()
            .map(|&(x, s)| {
                let mut t = (x + offset) % 1.0;
                if t <= 0.0 {
                    t += 1.0;
                }
                (t, s)
            })
            .collect();
        PhaseFunction::from_jumps(self.modulus, new_base, jumps)
    }

    /// Adds a constant to all values (mod modulus); jumps are unchanged.
    pub fn shifted_values(&self, delta: u32) -> PhaseFunction {
        PhaseFunction {
            modulus: self.modulus,
            base_value: (self.base_value + delta) % self.modulus,
            jumps: self.jumps.clone(),
        }
    }

    /// Parses `value:right_endpoint` pieces covering (0,1]. Jumps are the
    /// interior piece boundaries; the seam at 1 ≡ 0 is not a jump (it
    /// carries whatever winding the listed values imply).
    pub fn parse(s: &str, modulus: u32) -> Result<PhaseFunction> {
        if modulus < 2 || modulus % 2 != 0 {
            return Err(Error::Validation(format!(
                "phase-function modulus must be even and >= 2, got {modulus}"
            )));
        }
        let mut pieces: Vec<(f64, u32)> = Vec::new(); // (right endpoint, value)
        for (i, tok) in s.split(';').enumerate() {
            let tok = tok.trim();
            let (val_s, end_s) = tok.split_once(':').ok_or_else(|| {
                Error::Parse(format!("piece {i}: expected value:right_endpoint, got {tok:?}"))
            })?;
            let value: u32 = val_s
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("piece {i}: invalid value {val_s:?}")))?;
            if value >= modulus {
                return Err(Error::Parse(format!(
                    "piece {i}: value {value} out of range for modulus {modulus}"
                )));
            }
            let end: f64 = end_s
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("piece {i}: invalid endpoint {end_s:?}")))?;
            if !(end > 0.0 && end <= 1.0) {
                return Err(Error::Parse(format!(
                    "piece {i}: endpoint {end} must lie in (0, 1]"
                )));
            }
            if let Some(&(prev, _)) = pieces.last() {
                if end <= prev {
                    return Err(Error::Parse(format!(
                        "piece {i}: endpoints must be strictly increasing ({end} after {prev})"
                    )));
                }
            }
            pieces.push((end, value));
        }
        if pieces.is_empty() {
            return Err(Error::Parse("empty phase-function string".into()));
        }
        if pieces.last().unwrap().0 != 1.0 {
            return Err(Error::Parse("the last piece must end at 1.0".into()));
        }
        let base_value = pieces[0].1;
        let jumps = pieces
            .windows(2)
            .map(|w| {
                let (end, v) = w[0];
                let (_, v_next) = w[1];
                (end, (v_next + modulus - v) % modulus)
            })
            .collect();
        Ok(PhaseFunction::from_jumps(modulus, base_value, jumps))
    }
}

impl std::fmt::Display for PhaseFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.jumps.is_empty() {
            return write!(f, "{}:1", self.base_value);
        }
        let mut v = self.base_value;
        let mut parts = Vec::with_capacity(self.jumps.len() + 1);
        for &(x, s) in &self.jumps {
            if x < 1.0 {
                parts.push(format!("{v}:{x}"));
            }
            v = (v + s) % self.modulus;
        }
        // Final piece up to the seam; if a jump sits exactly at 1.0 its
        // right-value is the base of the next period and is not rendered.
        let last_v = if self.jumps.last().unwrap().0 < 1.0 {
            (self.base_value
                + self.jumps.iter().map(|&(_, s)| s).sum::<u32>())
                % self.modulus
        } else {
            (self.base_value
                + self.jumps[..self.jumps.len() - 1].iter().map(|&(_, s)| s).sum::<u32>())
                % self.modulus
        };
        parts.push(format!("{last_v}:1"));
        f.write_str(&parts.join(";"))
    }
}
