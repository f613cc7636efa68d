use serde::Serialize;

use super::book::intersect;
use super::{GroupId, LineType, MeterTemplate, ProsodyError, RhymeBook, Strictness, ToneClass};
use crate::corpus::{Genre, NormalizedPoem};

/// Outcome of a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The character is absent from the rhyme book.
    Unknown,
    /// Not checked at this strictness.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Overall {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineReport {
    pub text: String,
    /// Line type the tones were judged against, if tones were checked.
    pub line_type: Option<char>,
    pub tones: Vec<Verdict>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhymeCheck {
    /// 0-based line index.
    pub line: usize,
    pub char: char,
    /// `None` when the character is absent from the book.
    pub in_group: Option<bool>,
}

/// Per-line and per-position verdicts of a poem against a genre.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeterReport {
    pub genre: Genre,
    pub genre_matches: bool,
    pub strictness: Strictness,
    /// Group names consistent with every rhyme line that could be placed.
    pub rhyme_group: Vec<String>,
    pub rhymes: Vec<RhymeCheck>,
    pub first_line_rhymes: Option<bool>,
    pub lines: Vec<LineReport>,
    /// Name of the whole-poem arrangement matched under strict checking.
    pub template: Option<String>,
    pub missing_chars: Vec<char>,
    pub overall: Overall,
}

impl MeterReport {
    pub fn passed(&self) -> bool {
        self.overall == Overall::Pass
    }
}

fn position_verdict(book: &RhymeBook, c: char, tone: ToneClass) -> Verdict {
    let readings = book.readings(c);
    if readings.is_empty() {
        Verdict::Unknown
    } else if readings.iter().any(|r| r.tone == tone) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn judge_line(
    book: &RhymeBook,
    tpl: &MeterTemplate,
    chars: &[char],
    lt: LineType,
    strictness: Strictness,
) -> Vec<Verdict> {
    chars
        .iter()
        .enumerate()
        .map(|(col, &c)| {
            if tpl.is_free(col, strictness) {
                Verdict::Free
            } else {
                position_verdict(book, c, lt.tone_at(col, tpl.width))
            }
        })
        .collect()
}

fn cost(verdicts: &[Verdict]) -> (usize, usize) {
    let fails = verdicts.iter().filter(|v| **v == Verdict::Fail).count();
    let unknown = verdicts.iter().filter(|v| **v == Verdict::Unknown).count();
    (fails, unknown)
}

fn summarize(verdicts: &[Verdict]) -> Verdict {
    match cost(verdicts) {
        (0, 0) => Verdict::Pass,
        (0, _) => Verdict::Unknown,
        _ => Verdict::Fail,
    }
}

struct RhymeChoice {
    groups: Vec<GroupId>,
    mask: u32,
}

/// Group(s) covering the most rhyme lines; ties go to the group whose
/// coverage starts earliest, then to book order.
fn choose_rhyme(end_groups: &[Option<Vec<GroupId>>]) -> RhymeChoice {
    let mut candidates: Vec<GroupId> = end_groups.iter().flatten().flatten().copied().collect();
    candidates.sort_unstable();
    candidates.dedup();
    let mask_of = |g: GroupId| {
        end_groups.iter().enumerate().fold(0u32, |m, (i, gs)| {
            if gs.as_ref().is_some_and(|gs| gs.contains(&g)) {
                m | 1 << i
            } else {
                m
            }
        })
    };
    let best = candidates
        .iter()
        .map(|&g| mask_of(g))
        .min_by_key(|m| (std::cmp::Reverse(m.count_ones()), m.trailing_zeros()));
    match best {
        None => RhymeChoice { groups: Vec::new(), mask: 0 },
        Some(mask) => RhymeChoice {
            groups: candidates.into_iter().filter(|&g| mask_of(g) == mask).collect(),
            mask,
        },
    }
}

/// Checks `poem` against the template of `genre` at `strictness`.
///
/// A position passes when any reading of its character has the required
/// tone. Rhyme lines must admit one common group; the first line's rhyme
/// is optional and only reported.
pub fn validate(
    poem: &NormalizedPoem,
    genre: Genre,
    book: &RhymeBook,
    strictness: Strictness,
) -> Result<MeterReport, ProsodyError> {
    let tpl = MeterTemplate::for_genre(genre).ok_or(ProsodyError::NoTemplate(genre))?;
    let genre_matches = poem.lines.len() == tpl.line_count
        && poem.line_lengths.iter().all(|&l| l == tpl.width);
    let line_chars: Vec<Vec<char>> = (0..poem.lines.len()).map(|i| poem.line_chars(i)).collect();
    let mut missing: Vec<char> = Vec::new();
    let mut note_missing = |c: char| {
        if !book.contains(c) && !missing.contains(&c) {
            missing.push(c);
        }
    };

    let mut report = MeterReport {
        genre,
        genre_matches,
        strictness,
        rhyme_group: Vec::new(),
        rhymes: Vec::new(),
        first_line_rhymes: None,
        lines: line_chars
            .iter()
            .zip(&poem.lines)
            .map(|(chars, text)| LineReport {
                text: text.clone(),
                line_type: None,
                tones: vec![Verdict::Free; chars.len()],
                verdict: Verdict::Free,
            })
            .collect(),
        template: None,
        missing_chars: Vec::new(),
        overall: Overall::Fail,
    };
    if !genre_matches {
        return Ok(report);
    }

    match strictness {
        Strictness::Relaxed => {
            for (i, chars) in line_chars.iter().enumerate() {
                let (lt, tones) = tpl
                    .admissible_types(i)
                    .iter()
                    .map(|&lt| (lt, judge_line(book, &tpl, chars, lt, strictness)))
                    .min_by_key(|(_, v)| cost(v))
                    .expect("every line admits a type");
                let line = &mut report.lines[i];
                line.line_type = Some(lt_name(lt));
                line.verdict = summarize(&tones);
                line.tones = tones;
            }
        }
        Strictness::Strict => {
            let (idx, judged) = tpl
                .poems
                .iter()
                .enumerate()
                .map(|(k, types)| {
                    let judged: Vec<Vec<Verdict>> = types
                        .iter()
                        .zip(&line_chars)
                        .map(|(&lt, chars)| judge_line(book, &tpl, chars, lt, strictness))
                        .collect();
                    (k, judged)
                })
                .min_by_key(|(_, judged)| cost(&judged.concat()))
                .expect("four templates");
            report.template = Some(tpl.poem_name(idx));
            for (i, tones) in judged.into_iter().enumerate() {
                let line = &mut report.lines[i];
                line.line_type = Some(lt_name(tpl.poems[idx][i]));
                line.verdict = summarize(&tones);
                line.tones = tones;
            }
        }
        Strictness::Off | Strictness::RhymeOnly => {}
    }
    for (line, chars) in report.lines.iter().zip(&line_chars) {
        for (v, &c) in line.tones.iter().zip(chars) {
            if *v == Verdict::Unknown {
                note_missing(c);
            }
        }
    }

    if strictness.checks_rhyme() {
        let tone = strictness.rhyme_tone();
        let end = |i: usize| *line_chars[i].last().expect("non-empty line");
        let end_groups: Vec<Option<Vec<GroupId>>> = tpl
            .rhyme_lines
            .iter()
            .map(|&i| book.contains(end(i)).then(|| book.groups_of(end(i), tone)))
            .collect();
        let choice = choose_rhyme(&end_groups);
        let mut groups = choice.groups;
        if book.contains(end(0)) && !groups.is_empty() {
            let narrowed = intersect(&groups, &book.groups_of(end(0), tone));
            report.first_line_rhymes = Some(!narrowed.is_empty());
            if !narrowed.is_empty() {
                groups = narrowed;
            }
        }
        for (k, &i) in tpl.rhyme_lines.iter().enumerate() {
            let c = end(i);
            if !book.contains(c) {
                note_missing(c);
            }
            report.rhymes.push(RhymeCheck {
                line: i,
                char: c,
                in_group: end_groups[k].as_ref().map(|_| choice.mask & (1 << k) != 0),
            });
        }
        report.rhyme_group = groups.iter().map(|&g| book.group_name(g).to_string()).collect();
    }

    let any_fail = report.lines.iter().any(|l| l.verdict == Verdict::Fail)
        || report.rhymes.iter().any(|r| r.in_group == Some(false));
    let any_unknown = report.lines.iter().any(|l| l.verdict == Verdict::Unknown)
        || report.rhymes.iter().any(|r| r.in_group.is_none());
    report.overall = if any_fail {
        Overall::Fail
    } else if any_unknown {
        Overall::Indeterminate
    } else {
        Overall::Pass
    };
    report.missing_chars = missing;
    Ok(report)
}

fn lt_name(lt: LineType) -> char {
    match lt {
        LineType::A => 'A',
        LineType::B => 'B',
        LineType::C => 'C',
        LineType::D => 'D',
    }
}

/// Groups shared by the final characters of every mandatory rhyme line,
/// narrowed by the first line when it also rhymes. An empty result means
/// there is no common group.
pub fn detect_rhyme_group(
    poem: &NormalizedPoem,
    book: &RhymeBook,
) -> Result<Vec<GroupId>, ProsodyError> {
    let genre = poem.genre();
    let tpl = MeterTemplate::for_genre(genre).ok_or(ProsodyError::NoTemplate(genre))?;
    let end = |i: usize| poem.line_chars(i).last().copied().expect("non-empty line");
    let mut missing: Vec<char> = tpl
        .rhyme_lines
        .iter()
        .map(|&i| end(i))
        .filter(|&c| !book.contains(c))
        .collect();
    missing.dedup();
    if !missing.is_empty() {
        return Err(ProsodyError::MissingChars(missing));
    }
    let mut groups: Option<Vec<GroupId>> = None;
    for &i in &tpl.rhyme_lines {
        let g = book.groups_of(end(i), None);
        groups = Some(match groups {
            None => g,
            Some(acc) => intersect(&acc, &g),
        });
    }
    let groups = groups.unwrap_or_default();
    let first = intersect(&groups, &book.groups_of(end(0), None));
    Ok(if first.is_empty() { groups } else { first })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize_text;

    const BOOK: &str = "\
风\t一东\t平
东\t一东\t平
中\t一东\t平
中\t去声一送\t仄
青\t九青\t平
零\t九青\t平
山\t十五删\t平
水\t上声四纸\t仄
月\t入声六月\t仄
明\t八庚\t平
花\t六麻\t平
落\t入声十药\t仄
";

    fn book() -> RhymeBook {
        RhymeBook::from_tsv(BOOK, "fixture").unwrap()
    }

    #[test]
    fn disjoint_groups_detect_nothing() {
        let poem = normalize_text("山山山山山\n山山山山东\n山山山山山\n山山山山青").unwrap();
        assert!(detect_rhyme_group(&poem, &book()).unwrap().is_empty());
        let r = validate(&poem, Genre::Wujue, &book(), Strictness::RhymeOnly).unwrap();
        assert_eq!(r.overall, Overall::Fail);
        assert_eq!(r.rhymes[1].in_group, Some(false));
        assert_eq!(r.rhymes[0].in_group, Some(true));
    }

    #[test]
    fn missing_rhyme_char_is_reported() {
        let poem = normalize_text("山山山山山\n山山山山东\n山山山山山\n山山山山鸿").unwrap();
        match detect_rhyme_group(&poem, &book()) {
            Err(ProsodyError::MissingChars(c)) => assert_eq!(c, vec!['鸿']),
            other => panic!("{other:?}"),
        }
        let r = validate(&poem, Genre::Wujue, &book(), Strictness::RhymeOnly).unwrap();
        assert_eq!(r.overall, Overall::Indeterminate);
        assert_eq!(r.missing_chars, vec!['鸿']);
    }

    #[test]
    fn multi_reading_rhyme_resolves_to_shared_group() {
        let poem = normalize_text("山山山山风\n山山山山东\n山山山山水\n山山山山中").unwrap();
        let b = book();
        let g = detect_rhyme_group(&poem, &b).unwrap();
        assert_eq!(g.iter().map(|&g| b.group_name(g)).collect::<Vec<_>>(), vec!["一东"]);
        let r = validate(&poem, Genre::Wujue, &b, Strictness::RhymeOnly).unwrap();
        assert_eq!(r.overall, Overall::Pass);
        assert_eq!(r.first_line_rhymes, Some(true));
    }

    #[test]
    fn off_checks_shape_only() {
        let poem = normalize_text("鸿鸿鸿鸿鸿\n鸿鸿鸿鸿鸿\n鸿鸿鸿鸿鸿\n鸿鸿鸿鸿鸿").unwrap();
        let r = validate(&poem, Genre::Wujue, &book(), Strictness::Off).unwrap();
        assert_eq!(r.overall, Overall::Pass);
        let r = validate(&poem, Genre::Qijue, &book(), Strictness::Off).unwrap();
        assert!(!r.genre_matches);
        assert_eq!(r.overall, Overall::Fail);
    }

    #[test]
    fn strict_rejects_free_position_violation_that_relaxed_accepts() {
        // 仄仄平平仄 / 平平仄仄平 / 平平平仄仄 / 仄仄仄平平 with column 0 of
        // line 2 flipped to a level tone
        let poem = normalize_text("月落明明落\n明明落落东\n明明明落落\n明落落明风").unwrap();
        let b = book();
        let strict = validate(&poem, Genre::Wujue, &b, Strictness::Strict).unwrap();
        assert_eq!(strict.overall, Overall::Fail);
        let relaxed = validate(&poem, Genre::Wujue, &b, Strictness::Relaxed).unwrap();
        assert_eq!(relaxed.overall, Overall::Pass, "{relaxed:#?}");
        assert_eq!(relaxed.lines[3].tones[0], Verdict::Free);
    }

    #[test]
    fn strict_accepts_canonical_poem() {
        let poem = normalize_text("月落明明落\n明明落落东\n明明明落落\n月落落明风").unwrap();
        let r = validate(&poem, Genre::Wujue, &book(), Strictness::Strict).unwrap();
        assert_eq!(r.overall, Overall::Pass, "{r:#?}");
        assert_eq!(r.template.as_deref(), Some("仄起首句不入韵"));
        assert_eq!(r.rhyme_group, vec!["一东"]);
    }

    #[test]
    fn other_genre_has_no_template() {
        let poem = normalize_text("山山山").unwrap();
        assert!(matches!(
            validate(&poem, Genre::Other, &book(), Strictness::Off),
            Err(ProsodyError::NoTemplate(Genre::Other))
        ));
    }
}
