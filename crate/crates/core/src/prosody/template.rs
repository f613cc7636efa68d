use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ToneClass;
use crate::corpus::Genre;

/// How much of the metrical grammar a check enforces. Ordered from weakest
/// to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Shape only.
    Off,
    /// Shape and rhyme membership at the rhyme lines.
    RhymeOnly,
    /// Adds per-line tone patterns; the odd positions before the final
    /// three characters are free.
    Relaxed,
    /// Whole-poem canonical templates at every position, which enforces
    /// couplet opposition and inter-couplet adhesion.
    Strict,
}

impl Strictness {
    pub const ALL: [Strictness; 4] = [
        Strictness::Off,
        Strictness::RhymeOnly,
        Strictness::Relaxed,
        Strictness::Strict,
    ];

    /// Next weaker level used when decoding must relax.
    pub fn relaxed(self) -> Option<Strictness> {
        match self {
            Strictness::Strict => Some(Strictness::Relaxed),
            Strictness::Relaxed => Some(Strictness::RhymeOnly),
            Strictness::RhymeOnly | Strictness::Off => None,
        }
    }

    pub fn checks_tones(self) -> bool {
        self >= Strictness::Relaxed
    }

    pub fn checks_rhyme(self) -> bool {
        self >= Strictness::RhymeOnly
    }

    /// Tone a rhyming reading must carry: regulated verse rhymes on level tones.
    pub(crate) fn rhyme_tone(self) -> Option<ToneClass> {
        self.checks_tones().then_some(ToneClass::Ping)
    }
}

impl fmt::Display for Strictness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strictness::Off => "off",
            Strictness::RhymeOnly => "rhyme_only",
            Strictness::Relaxed => "relaxed",
            Strictness::Strict => "strict",
        })
    }
}

impl FromStr for Strictness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "off" => Ok(Strictness::Off),
            "rhyme_only" | "rhymeonly" | "rhyme" => Ok(Strictness::RhymeOnly),
            "relaxed" => Ok(Strictness::Relaxed),
            "strict" => Ok(Strictness::Strict),
            other => Err(format!("unknown strictness {other:?}")),
        }
    }
}

/// The four basic line patterns, named by their five-character forms:
///
/// | type | five characters | ends |
/// |------|-----------------|------|
/// | A    | 仄仄平平仄       | 仄    |
/// | B    | 平平仄仄平       | 平    |
/// | C    | 平平平仄仄       | 仄    |
/// | D    | 仄仄仄平平       | 平    |
///
/// Seven-character forms prepend two characters of the opposite tone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineType {
    A,
    B,
    C,
    D,
}

const P: ToneClass = ToneClass::Ping;
const Z: ToneClass = ToneClass::Ze;

impl LineType {
    pub const ALL: [LineType; 4] = [LineType::A, LineType::B, LineType::C, LineType::D];

    fn base(self) -> [ToneClass; 5] {
        match self {
            LineType::A => [Z, Z, P, P, Z],
            LineType::B => [P, P, Z, Z, P],
            LineType::C => [P, P, P, Z, Z],
            LineType::D => [Z, Z, Z, P, P],
        }
    }

    /// Required tone at `col` (0-based) of a line `width` characters long.
    pub fn tone_at(self, col: usize, width: usize) -> ToneClass {
        let base = self.base();
        if width == 7 {
            if col < 2 {
                opposite(base[0])
            } else {
                base[col - 2]
            }
        } else {
            base[col]
        }
    }

    pub fn pattern(self, width: usize) -> Vec<ToneClass> {
        (0..width).map(|c| self.tone_at(c, width)).collect()
    }

    pub fn rhymes(self) -> bool {
        matches!(self, LineType::B | LineType::D)
    }

    pub(crate) fn bit(self) -> u8 {
        1 << self as u8
    }
}

fn opposite(t: ToneClass) -> ToneClass {
    match t {
        ToneClass::Ping => ToneClass::Ze,
        _ => ToneClass::Ping,
    }
}

const QUATRAINS: [[LineType; 4]; 4] = {
    use LineType::*;
    [[A, B, C, D], [D, B, C, D], [C, D, A, B], [B, D, A, B]]
};

/// Metrical template for one regulated genre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeterTemplate {
    pub genre: Genre,
    pub line_count: usize,
    pub width: usize,
    /// The four canonical whole-poem arrangements of line types.
    pub poems: Vec<Vec<LineType>>,
    /// 0-based line indices whose final characters must share a group.
    pub rhyme_lines: Vec<usize>,
}

impl MeterTemplate {
    pub fn for_genre(genre: Genre) -> Option<MeterTemplate> {
        let (line_count, width) = genre.shape()?;
        let poems = QUATRAINS
            .iter()
            .map(|q| {
                // the second half repeats the couplet cycle without a first-line rhyme
                let second = if q[2] == LineType::C { QUATRAINS[0] } else { QUATRAINS[2] };
                q.iter().chain(second.iter()).copied().take(line_count).collect()
            })
            .collect();
        Some(MeterTemplate {
            genre,
            line_count,
            width,
            poems,
            rhyme_lines: (1..line_count).step_by(2).collect(),
        })
    }

    /// Whether `col` is exempt from tone checks at `strictness`.
    pub fn is_free(&self, col: usize, strictness: Strictness) -> bool {
        strictness == Strictness::Relaxed && col.is_multiple_of(2) && col + 2 < self.width
    }

    /// Line types a line may take under per-line (relaxed) checking.
    pub fn admissible_types(&self, line: usize) -> &'static [LineType] {
        use LineType::*;
        if line == 0 {
            &[A, B, C, D]
        } else if line % 2 == 1 {
            &[B, D]
        } else {
            &[A, C]
        }
    }

    pub(crate) fn admissible_mask(&self, line: usize) -> u8 {
        self.admissible_types(line).iter().fold(0, |m, t| m | t.bit())
    }

    pub fn is_rhyme_line(&self, line: usize) -> bool {
        line % 2 == 1
    }

    /// Conventional name of a whole-poem arrangement, e.g. `平起首句入韵`.
    pub fn poem_name(&self, index: usize) -> String {
        let first = self.poems[index][0];
        format!(
            "{}起首句{}",
            first.tone_at(1, self.width).symbol(),
            if first.rhymes() { "入韵" } else { "不入韵" }
        )
    }
}
