use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lm::{LanguageModel, Vocab, END_OF_POEM, LINE_BREAK};
use super::prompt::{Mode, PromptSpec};
use super::GenerationError;
use crate::corpus::NormalizedPoem;
use crate::prosody::{
    intersect, validate, GroupId, LineType, MeterReport, MeterTemplate, RhymeBook, Strictness,
    ToneClass,
};
use crate::scalar::Scalar;

/// How closely a rhyme-following poem reuses the original's rhyme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowMode {
    /// The same end characters in the same order.
    #[default]
    IdenticalChars,
    /// Any end characters from the same rhyme group.
    SameGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions<S> {
    pub beam_width: usize,
    pub strictness: Strictness,
    pub seed: u64,
    /// Factor applied to the probability of a conditioning character that
    /// has not been emitted yet. `1` disables conditioning.
    pub boost: S,
    /// Scale of the Gumbel noise used to rank candidates when the beam is
    /// pruned. `0` gives a plain beam search.
    pub temperature: S,
    pub follow_mode: FollowMode,
    /// Strictness levels the decoder may drop when the beam runs dry.
    pub max_relaxations: usize,
}

impl<S: Scalar> Default for DecodeOptions<S> {
    fn default() -> Self {
        DecodeOptions {
            beam_width: 16,
            strictness: Strictness::Relaxed,
            seed: 0,
            boost: S::lit(std::f64::consts::E),
            temperature: S::one(),
            follow_mode: FollowMode::IdenticalChars,
            max_relaxations: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Decoded<S> {
    pub poem: NormalizedPoem,
    /// Log-probability of the poem, markers included, under the boosted
    /// distributions.
    pub log_prob: S,
    pub requested_strictness: Strictness,
    pub strictness: Strictness,
    pub notes: Vec<String>,
    pub report: MeterReport,
}

/// Log-probability charged for a forced character the model gives no mass.
const FLOOR_LOG_PROB: f64 = -27.631021115928547; // ln 1e-12

#[derive(Debug, Clone, Default)]
struct CharInfo {
    known: bool,
    ping: bool,
    ze: bool,
    groups: Vec<GroupId>,
    ping_groups: Vec<GroupId>,
}

impl CharInfo {
    fn of(book: &RhymeBook, c: char) -> Self {
        CharInfo {
            known: book.contains(c),
            ping: book.has_tone(c, ToneClass::Ping),
            ze: book.has_tone(c, ToneClass::Ze),
            groups: book.groups_of(c, None),
            ping_groups: book.groups_of(c, Some(ToneClass::Ping)),
        }
    }

    fn has(&self, t: ToneClass) -> bool {
        match t {
            ToneClass::Ping => self.ping,
            ToneClass::Ze => self.ze,
            ToneClass::Unknown => false,
        }
    }

    fn rhyme_groups(&self, tone: Option<ToneClass>) -> &[GroupId] {
        match tone {
            Some(_) => &self.ping_groups,
            None => &self.groups,
        }
    }
}

#[derive(Debug, Clone)]
struct Hyp<S> {
    text: Vec<char>,
    logp: S,
    /// Template (strict) or line type (relaxed) indices still consistent.
    mask: u8,
    rhyme: Option<Vec<GroupId>>,
    emitted: u64,
}

struct Candidate<S> {
    parent: usize,
    ch: char,
    score: S,
    mask: u8,
    key: f64,
}

/// Everything fixed for one decoding attempt.
struct Plan<'a> {
    book: &'a RhymeBook,
    tpl: MeterTemplate,
    strictness: Strictness,
    forced: Vec<Vec<Option<char>>>,
    /// Lines whose end character must join the running rhyme set.
    rhyme_lines: Vec<bool>,
    rhyme_tone: Option<ToneClass>,
    initial_rhyme: Option<Vec<GroupId>>,
    forbidden_first_line: Option<Vec<char>>,
    conditioning: Vec<char>,
}

impl Plan<'_> {
    fn required_tone(&self, m: usize, line: usize, col: usize) -> ToneClass {
        let lt = match self.strictness {
            Strictness::Strict => self.tpl.poems[m][line],
            _ => LineType::ALL[m],
        };
        lt.tone_at(col, self.tpl.width)
    }

    fn line_start_mask(&self, line: usize, current: u8) -> u8 {
        match self.strictness {
            Strictness::Relaxed => self.tpl.admissible_mask(line),
            Strictness::Strict if line == 0 => 0b1111,
            _ => current,
        }
    }

    /// Mask after placing `info` at (`line`, `col`), or `None` when the
    /// character is not allowed there.
    fn admit(&self, hyp: &Hyp<impl Scalar>, line: usize, col: usize, ch: char, info: &CharInfo) -> Option<u8> {
        let mut mask = hyp.mask;
        if self.strictness.checks_tones() && !self.tpl.is_free(col, self.strictness) {
            if !info.known {
                return None;
            }
            for m in 0..4 {
                if mask & (1 << m) != 0 && !info.has(self.required_tone(m, line, col)) {
                    mask &= !(1 << m);
                }
            }
            if mask == 0 {
                return None;
            }
        }
        if col + 1 == self.tpl.width {
            if self.rhyme_lines[line] {
                let groups = info.rhyme_groups(self.rhyme_tone);
                let ok = match &hyp.rhyme {
                    None => !groups.is_empty(),
                    Some(set) => set.iter().any(|g| groups.binary_search(g).is_ok()),
                };
                if !ok {
                    return None;
                }
            }
            if line == 0 {
                if let Some(forbidden) = &self.forbidden_first_line {
                    let w = self.tpl.width;
                    if hyp.text[..w - 1] == forbidden[..w - 1] && forbidden[w - 1] == ch {
                        return None;
                    }
                }
            }
        }
        Some(mask)
    }

    fn next_rhyme(&self, rhyme: &Option<Vec<GroupId>>, line: usize, col: usize, info: &CharInfo) -> Option<Vec<GroupId>> {
        if col + 1 != self.tpl.width || !self.rhyme_lines[line] {
            return rhyme.clone();
        }
        let groups = info.rhyme_groups(self.rhyme_tone);
        Some(match rhyme {
            None => groups.to_vec(),
            Some(set) => intersect(set, groups),
        })
    }
}

fn plan<'a>(
    prompt: &PromptSpec,
    book: &'a RhymeBook,
    strictness: Strictness,
    follow: FollowMode,
) -> Result<Plan<'a>, GenerationError> {
    prompt.check()?;
    let tpl = MeterTemplate::for_genre(prompt.genre).ok_or(GenerationError::UnsupportedGenre(prompt.genre))?;
    let (lines, width) = (tpl.line_count, tpl.width);
    let mut forced = vec![vec![None; width]; lines];
    let mut rhyme_lines: Vec<bool> = (0..lines).map(|i| strictness.checks_rhyme() && tpl.is_rhyme_line(i)).collect();
    let rhyme_tone = strictness.rhyme_tone();
    let mut initial_rhyme = None;
    let mut forbidden_first_line = None;
    match prompt.mode {
        Mode::Fs2Text => {
            let first: Vec<char> = prompt.first_line.as_deref().unwrap_or_default().chars().collect();
            for (col, &c) in first.iter().enumerate() {
                forced[0][col] = Some(c);
            }
            let end = first[width - 1];
            if strictness.checks_rhyme() && book.has_tone(end, ToneClass::Ping) {
                initial_rhyme = Some(book.groups_of(end, Some(ToneClass::Ping)));
            }
        }
        Mode::Rr2Text => {
            let rhyme = prompt.rhyme.as_ref().expect("checked prompt");
            let group = book
                .group_id(&rhyme.group)
                .ok_or_else(|| GenerationError::InvalidPrompt(format!("unknown rhyme group {}", rhyme.group)))?;
            initial_rhyme = Some(vec![group]);
            for (line, end) in rhyme.ends.iter().enumerate() {
                let Some(end) = *end else { continue };
                match follow {
                    FollowMode::IdenticalChars => forced[line][width - 1] = Some(end),
                    FollowMode::SameGroup => rhyme_lines[line] = true,
                }
            }
            forbidden_first_line = Some(rhyme.forbidden_first_line.chars().collect::<Vec<char>>())
                .filter(|f| f.len() == width);
        }
    }
    let mut conditioning = prompt.conditioning_chars();
    conditioning.truncate(64);
    Ok(Plan {
        book,
        tpl,
        strictness,
        forced,
        rhyme_lines,
        rhyme_tone: rhyme_tone.filter(|_| strictness.checks_rhyme()),
        initial_rhyme,
        forbidden_first_line,
        conditioning,
    })
}

struct Decoder<'a, S: Scalar, L: LanguageModel<S> + ?Sized> {
    lm: &'a L,
    prompt: &'a PromptSpec,
    plan: Plan<'a>,
    infos: &'a [CharInfo],
    /// `(bit, vocabulary index)` of each conditioning character.
    boosted: Vec<(u64, usize)>,
    boost: S,
}

impl<S: Scalar, L: LanguageModel<S> + ?Sized> Decoder<'_, S, L> {
    fn vocab(&self) -> &Vocab {
        self.lm.vocab()
    }

    fn distribution(&self, hyp: &Hyp<S>) -> Result<Vec<S>, GenerationError> {
        let mut p = self.lm.next_distribution(&hyp.text, self.prompt)?;
        if p.len() != self.vocab().len() {
            return Err(GenerationError::Model(format!(
                "distribution has {} entries for a vocabulary of {}",
                p.len(),
                self.vocab().len()
            )));
        }
        if self.boost != S::one() && !self.boosted.is_empty() {
            for &(bit, i) in &self.boosted {
                if hyp.emitted & bit == 0 {
                    p[i] = p[i] * self.boost;
                }
            }
            super::lm::normalize(&mut p);
        }
        Ok(p)
    }

    fn ln(p: S) -> S {
        if p > S::zero() {
            p.ln()
        } else {
            S::lit(FLOOR_LOG_PROB)
        }
    }

    fn emitted_bits(&self, emitted: u64, ch: char) -> u64 {
        self.plan
            .conditioning
            .iter()
            .position(|&c| c == ch)
            .map_or(emitted, |k| emitted | (1 << k))
    }

    fn marker(&self, hyp: &mut Hyp<S>, marker: char) -> Result<(), GenerationError> {
        let p = self.distribution(hyp)?;
        let lp = self.vocab().index_of(marker).map_or(S::lit(FLOOR_LOG_PROB), |i| Self::ln(p[i]));
        hyp.logp = hyp.logp + lp;
        Ok(())
    }

    fn run(&self, width: usize, temperature: S, rng: &mut ChaCha8Rng) -> Result<Option<Vec<Hyp<S>>>, GenerationError> {
        let plan = &self.plan;
        let mut beam = vec![Hyp {
            text: Vec::new(),
            logp: S::zero(),
            mask: plan.line_start_mask(0, 0b1111),
            rhyme: plan.initial_rhyme.clone(),
            emitted: 0,
        }];
        for line in 0..plan.tpl.line_count {
            if line > 0 {
                for hyp in &mut beam {
                    self.marker(hyp, LINE_BREAK)?;
                    hyp.text.push(LINE_BREAK);
                    hyp.mask = plan.line_start_mask(line, hyp.mask);
                }
            }
            for col in 0..plan.tpl.width {
                let mut cands: Vec<Candidate<S>> = Vec::new();
                for (h, hyp) in beam.iter().enumerate() {
                    let p = self.distribution(hyp)?;
                    if let Some(c) = plan.forced[line][col] {
                        let info = match self.vocab().index_of(c) {
                            Some(i) => self.infos[i].clone(),
                            None => CharInfo::of(plan.book, c),
                        };
                        if let Some(mask) = plan.admit(hyp, line, col, c, &info) {
                            let lp = self.vocab().index_of(c).map_or(S::lit(FLOOR_LOG_PROB), |i| Self::ln(p[i]));
                            cands.push(Candidate { parent: h, ch: c, score: hyp.logp + lp, mask, key: 0.0 });
                        }
                        continue;
                    }
                    for (i, &pi) in p.iter().enumerate() {
                        let c = self.vocab().get(i);
                        if pi <= S::zero() || Vocab::is_marker(c) {
                            continue;
                        }
                        if let Some(mask) = plan.admit(hyp, line, col, c, &self.infos[i]) {
                            cands.push(Candidate { parent: h, ch: c, score: hyp.logp + pi.ln(), mask, key: 0.0 });
                        }
                    }
                }
                if cands.is_empty() {
                    return Ok(None);
                }
                if cands.len() > width {
                    let tau = temperature.to_f64_lossy();
                    for c in &mut cands {
                        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                        c.key = c.score.to_f64_lossy() + tau * -(-u.ln()).ln();
                    }
                    let cmp = |a: &Candidate<S>, b: &Candidate<S>| {
                        b.key
                            .partial_cmp(&a.key)
                            .unwrap_or(Ordering::Equal)
                            .then_with(|| beam[a.parent].text.cmp(&beam[b.parent].text))
                            .then_with(|| a.ch.cmp(&b.ch))
                    };
                    cands.select_nth_unstable_by(width - 1, cmp);
                    cands.truncate(width);
                    cands.sort_by(cmp);
                }
                beam = cands
                    .into_iter()
                    .map(|c| {
                        let parent = &beam[c.parent];
                        let info = match self.vocab().index_of(c.ch) {
                            Some(i) => self.infos[i].clone(),
                            None => CharInfo::of(plan.book, c.ch),
                        };
                        let mut text = parent.text.clone();
                        text.push(c.ch);
                        Hyp {
                            text,
                            logp: c.score,
                            mask: c.mask,
                            rhyme: plan.next_rhyme(&parent.rhyme, line, col, &info),
                            emitted: self.emitted_bits(parent.emitted, c.ch),
                        }
                    })
                    .collect();
            }
        }
        for hyp in &mut beam {
            self.marker(hyp, END_OF_POEM)?;
        }
        beam.sort_by(|a, b| {
            b.logp
                .partial_cmp(&a.logp)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.text.cmp(&b.text))
        });
        Ok(Some(beam))
    }
}

fn to_poem(text: &[char]) -> Result<NormalizedPoem, GenerationError> {
    let lines: Vec<String> = text
        .split(|&c| c == LINE_BREAK)
        .map(|l| l.iter().collect())
        .collect();
    NormalizedPoem::from_lines(&lines).map_err(|e| GenerationError::Model(e.to_string()))
}

/// Beam search over the model's characters under the genre's metrical
/// constraints and the prompt's first line or rhyme.
///
/// Each kept hypothesis stays consistent with the tone grammar and shares a
/// rhyme group across the rhyme lines. When more candidates survive than
/// the beam holds, they are ranked by log-probability plus seeded Gumbel
/// noise; the final poem is the most probable complete hypothesis that
/// validates. An empty beam retries one strictness level lower.
pub fn constrained_decode<S: Scalar, L: LanguageModel<S> + ?Sized>(
    lm: &L,
    prompt: &PromptSpec,
    book: &RhymeBook,
    options: &DecodeOptions<S>,
) -> Result<Decoded<S>, GenerationError> {
    if options.beam_width == 0 {
        return Err(GenerationError::InvalidPrompt("beam width must be at least 1".into()));
    }
    let infos: Vec<CharInfo> = lm.vocab().chars().iter().map(|&c| CharInfo::of(book, c)).collect();
    let mut strictness = options.strictness;
    let mut notes = Vec::new();
    for attempt in 0..=options.max_relaxations {
        let plan = plan(prompt, book, strictness, options.follow_mode)?;
        let boosted = plan
            .conditioning
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| lm.vocab().index_of(c).map(|i| (1u64 << k, i)))
            .collect();
        let decoder = Decoder {
            lm,
            prompt,
            plan,
            infos: &infos,
            boosted,
            boost: options.boost,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        if let Some(beam) = decoder.run(options.beam_width, options.temperature, &mut rng)? {
            for hyp in beam {
                let poem = to_poem(&hyp.text)?;
                let report = validate(&poem, prompt.genre, book, strictness)?;
                if report.passed() {
                    return Ok(Decoded {
                        poem,
                        log_prob: hyp.logp,
                        requested_strictness: options.strictness,
                        strictness,
                        notes,
                        report,
                    });
                }
            }
        }
        match strictness.relaxed() {
            Some(lower) if attempt < options.max_relaxations => {
                notes.push(format!("no poem satisfied {strictness}; relaxed to {lower}"));
                strictness = lower;
            }
            _ => break,
        }
    }
    Err(GenerationError::InfeasibleConstraints(strictness))
}
