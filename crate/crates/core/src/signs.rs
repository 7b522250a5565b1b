//! Zero number, sign words and the subword order on lattice profiles.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::GridProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn of(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Alternating sign pattern of a vector after removing its dead band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignWord {
    pub letters: Vec<Sign>,
    pub source_tol: f64,
}

impl SignWord {
    /// Parses `"[+ - +]"`, `"+-+"` or `"[]"`; letters must alternate.
    pub fn parse(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for (col, c) in s.chars().enumerate() {
            let l = match c {
                '+' => Sign::Plus,
                '-' | '−' => Sign::Minus,
                '[' | ']' | ' ' | ',' => continue,
                other => {
                    return Err(Error::Parse {
                        column: col,
                        message: format!("unexpected {other:?} in sign word"),
                    })
                }
            };
            if letters.last() == Some(&l) {
                return Err(Error::Parse {
                    column: col,
                    message: "sign word letters must alternate".into(),
                });
            }
            letters.push(l);
        }
        Ok(Self { letters, source_tol: 0.0 })
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }
}

impl fmt::Display for SignWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.letters.iter().map(|l| l.symbol().to_string()).collect();
        write!(f, "[{}]", body.join(" "))
    }
}

fn survivors(v: &[f64], tol: f64) -> impl Iterator<Item = Sign> + '_ {
    v.iter().filter(move |x| x.abs() > tol).map(|x| Sign::of(*x))
}

/// Sign changes among entries with `|v_i| > tol`; −1 when none survive.
pub fn zero_number(v: &[f64], tol: f64) -> i64 {
    let mut prev = None;
    let mut changes = 0i64;
    for s in survivors(v, tol) {
        match prev {
            None => {}
            Some(p) if p != s => changes += 1,
            _ => {}
        }
        prev = Some(s);
    }
    if prev.is_none() {
        -1
    } else {
        changes
    }
}

pub fn sgn_word(v: &[f64], tol: f64) -> SignWord {
    let mut letters: Vec<Sign> = Vec::new();
    for s in survivors(v, tol) {
        if letters.last() != Some(&s) {
            letters.push(s);
        }
    }
    SignWord { letters, source_tol: tol }
}

/// `b ◁ a`: the letters of `b` form a subsequence of those of `a`.
pub fn is_subword(b: &SignWord, a: &SignWord) -> bool {
    let mut it = a.letters.iter();
    b.letters.iter().all(|l| it.any(|m| m == l))
}

/// `u1 − u2` over the union of both windows, each extended by its edge values.
pub fn lattice_difference(u1: &GridProfile, u2: &GridProfile) -> Result<Vec<f64>> {
    if !u1.grid.same_lattice(&u2.grid) {
        return Err(Error::config("profiles are not on the same lattice"));
    }
    let lo = u1.grid.first_index.min(u2.grid.first_index);
    let hi = u1.grid.last_index().max(u2.grid.last_index());
    Ok((lo..=hi)
        .map(|k| u1.at_index_extended(k) - u2.at_index_extended(k))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepnessEntry {
    /// Index into the first snapshot set.
    pub snapshot_index: usize,
    /// Period shift applied to the second set.
    pub k_shift: i64,
    pub zero_number: i64,
    pub word: String,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepnessReport {
    pub entries: Vec<SteepnessEntry>,
    pub tol: f64,
    /// Sign changes finer than this spacing are invisible.
    pub lattice_h: f64,
}

impl SteepnessReport {
    pub fn violations(&self) -> impl Iterator<Item = &SteepnessEntry> {
        self.entries.iter().filter(|e| e.violation)
    }

    pub fn consistent(&self) -> bool {
        self.violations().next().is_none()
    }
}

/// Compares `u1[j]` with `u2[j + k]` for every `j` and `k` in `shifts`
/// (pairs falling outside `u2` are skipped) and flags every difference whose
/// sign word is not a subword of `[+ −]`.
pub fn steepness_violations(
    u1: &[GridProfile],
    u2: &[GridProfile],
    shifts: std::ops::RangeInclusive<i64>,
    tol: f64,
) -> Result<SteepnessReport> {
    let reference = SignWord {
        letters: vec![Sign::Plus, Sign::Minus],
        source_tol: tol,
    };
    let lattice_h = u1.first().or(u2.first()).map(|p| p.grid.h).unwrap_or(0.0);
    let mut entries = Vec::new();
    for (j, a) in u1.iter().enumerate() {
        for k in shifts.clone() {
            let idx = j as i64 + k;
            if idx < 0 || idx as usize >= u2.len() {
                continue;
            }
            let d = lattice_difference(a, &u2[idx as usize])?;
            let w = sgn_word(&d, tol);
            entries.push(SteepnessEntry {
                snapshot_index: j,
                k_shift: k,
                zero_number: zero_number(&d, tol),
                word: w.to_string(),
                violation: !is_subword(&w, &reference),
            });
        }
    }
    Ok(SteepnessReport {
        entries,
        tol,
        lattice_h,
    })
}
