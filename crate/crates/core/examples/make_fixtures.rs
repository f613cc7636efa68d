//! Regenerates the bundled fixture corpus and character vectors.
//!
//! ```text
//! cargo run -p guiyun-core --example make_fixtures
//! ```
//!
//! The corpus mixes the classics in `data/classics.txt` with synthetic
//! regulated poems assembled from the lexicon under the strict tone
//! templates. Vectors come from random indexing over the corpus: every
//! character gets a sparse random signature and its vector sums the
//! signatures of its neighbours.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use guiyun::corpus::{normalize_text, write_corpus, Genre, NormalizedPoem, PoemRecord};
use guiyun::prosody::{MeterTemplate, RhymeBook, ToneClass};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYNTHETIC: usize = 1200;
const DIM: usize = 32;
const TOPICS: [&str; 8] = [
    "山水江溪云峰泉波湖石",
    "关塞边征烽城沙胡马戍",
    "乡故归家书客远愁思梦",
    "春花柳燕桃杏莺草绿红",
    "秋霜叶雁菊寒枫黄露蝉",
    "月夜灯星影钟窗烛光天",
    "酒醉杯樽歌琴笛诗吟饮",
    "别离送亭舟帆渡泪行人",
];
const TOPIC_NAMES: [&str; 8] = ["山水", "边塞", "思乡", "春景", "秋景", "月夜", "宴饮", "送别"];

struct Pools {
    ping: Vec<char>,
    ze: Vec<char>,
    rhyme_groups: BTreeMap<String, Vec<char>>,
}

fn single_tone(book: &RhymeBook, c: char, t: ToneClass) -> bool {
    !book.readings(c).is_empty() && book.readings(c).iter().all(|r| r.tone == t)
}

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let book = RhymeBook::from_tsv(&fs::read_to_string(data.join("rhyme_book.tsv")).unwrap(), "pingshui").unwrap();
    let lexicon: Vec<String> = fs::read_to_string(data.join("lexicon.txt"))
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);

    let mut chars: Vec<char> = book.chars().collect();
    chars.sort_unstable();
    let mut pools = Pools {
        ping: chars.iter().copied().filter(|&c| single_tone(&book, c, ToneClass::Ping)).collect(),
        ze: chars.iter().copied().filter(|&c| single_tone(&book, c, ToneClass::Ze)).collect(),
        rhyme_groups: BTreeMap::new(),
    };
    for &c in &pools.ping {
        let g = book.readings(c)[0].group;
        pools.rhyme_groups.entry(book.group_name(g).to_string()).or_default().push(c);
    }
    pools.rhyme_groups.retain(|_, v| v.len() >= 12);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in fs::read_to_string(data.join("classics.txt")).unwrap().lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let poem = normalize_text(line).unwrap();
        seen.insert(poem.text());
        records.push(PoemRecord::new(&format!("古诗{}", i + 1), "唐", "佚名", line.trim()));
    }
    let mut n = 0;
    while n < SYNTHETIC {
        let topic = rng.random_range(0..TOPICS.len());
        let poem = synth_poem(&mut rng, &book, &pools, &lexicon, topic);
        if seen.insert(poem.text()) {
            n += 1;
            records.push(PoemRecord::new(
                &format!("{}其{}", TOPIC_NAMES[topic], n),
                "拟",
                "fixture",
                &poem.display(),
            ));
        }
    }
    let mut out = Vec::new();
    write_corpus(&mut out, &records).unwrap();
    fs::write(data.join("corpus_fixture.csv"), out).unwrap();

    let poems: Vec<NormalizedPoem> = records.iter().map(|r| normalize_text(&r.content).unwrap()).collect();
    fs::write(data.join("char_vectors.txt"), vectors(&mut rng, &poems, &lexicon)).unwrap();
    eprintln!("wrote {} poems", records.len());
}

fn topic_pool(lexicon: &[String], topic: usize) -> (Vec<String>, Vec<char>) {
    let sig: Vec<char> = TOPICS[topic].chars().collect();
    let words: Vec<String> = lexicon
        .iter()
        .filter(|w| w.chars().count() == 2 && w.chars().any(|c| sig.contains(&c)))
        .cloned()
        .collect();
    let mut chars: Vec<char> = sig.clone();
    chars.extend(words.iter().flat_map(|w| w.chars()));
    chars.sort_unstable();
    chars.dedup();
    (words, chars)
}

fn pick_char(rng: &mut ChaCha8Rng, book: &RhymeBook, pools: &Pools, topical: &[char], tone: ToneClass) -> char {
    let fits: Vec<char> = topical.iter().copied().filter(|&c| single_tone(book, c, tone)).collect();
    if !fits.is_empty() && rng.random_bool(0.6) {
        return *fits.choose(rng).unwrap();
    }
    let pool = if tone == ToneClass::Ping { &pools.ping } else { &pools.ze };
    *pool.choose(rng).unwrap()
}

fn synth_poem(
    rng: &mut ChaCha8Rng,
    book: &RhymeBook,
    pools: &Pools,
    lexicon: &[String],
    topic: usize,
) -> NormalizedPoem {
    let genre = *[Genre::Wujue, Genre::Qijue, Genre::Wujue, Genre::Qijue, Genre::Wulv, Genre::Qilv]
        .choose(rng)
        .unwrap();
    let tpl = MeterTemplate::for_genre(genre).unwrap();
    let types = tpl.poems.choose(rng).unwrap().clone();
    let (words, topical) = topic_pool(lexicon, topic);
    let group: Vec<&String> = pools.rhyme_groups.keys().collect();
    let rhyme_chars = &pools.rhyme_groups[*group.choose(rng).unwrap()];
    let mut used_rhymes: Vec<char> = Vec::new();
    let mut lines = Vec::new();
    for (i, lt) in types.iter().enumerate() {
        let tones = lt.pattern(tpl.width);
        let mut line: Vec<char> = Vec::new();
        while line.len() < tpl.width - 1 {
            let col = line.len();
            if col + 2 < tpl.width && rng.random_bool(0.7) {
                let fitting: Vec<&String> = words
                    .iter()
                    .filter(|w| w.chars().zip(&tones[col..col + 2]).all(|(c, &t)| single_tone(book, c, t)))
                    .collect();
                if let Some(w) = fitting.choose(rng) {
                    line.extend(w.chars());
                    continue;
                }
            }
            line.push(pick_char(rng, book, pools, &topical, tones[col]));
        }
        let end = if lt.rhymes() {
            let fresh: Vec<char> = rhyme_chars.iter().copied().filter(|c| !used_rhymes.contains(c)).collect();
            let c = *fresh.choose(rng).unwrap();
            used_rhymes.push(c);
            c
        } else {
            let _ = i;
            pick_char(rng, book, pools, &topical, ToneClass::Ze)
        };
        line.push(end);
        lines.push(line.into_iter().collect::<String>());
    }
    NormalizedPoem::from_lines(&lines).unwrap()
}

fn vectors(rng: &mut ChaCha8Rng, poems: &[NormalizedPoem], lexicon: &[String]) -> String {
    let mut signature: BTreeMap<char, Vec<f64>> = BTreeMap::new();
    let mut context: BTreeMap<char, Vec<f64>> = BTreeMap::new();
    for poem in poems {
        for c in poem.chars() {
            signature.entry(c).or_insert_with(|| {
                let mut v = vec![0.0; DIM];
                for _ in 0..4 {
                    v[rng.random_range(0..DIM)] += if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                }
                v
            });
        }
    }
    for poem in poems {
        let all: Vec<char> = poem.chars().collect();
        for line in &poem.lines {
            let cs: Vec<char> = line.chars().collect();
            for (i, &c) in cs.iter().enumerate() {
                let acc = context.entry(c).or_insert_with(|| vec![0.0; DIM]);
                for (j, &d) in cs.iter().enumerate() {
                    if i != j && i.abs_diff(j) <= 2 {
                        for (a, s) in acc.iter_mut().zip(&signature[&d]) {
                            *a += s;
                        }
                    }
                }
                for &d in &all {
                    for (a, s) in acc.iter_mut().zip(&signature[&d]) {
                        *a += 0.1 * s;
                    }
                }
            }
        }
    }
    for v in context.values_mut() {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let mut rows: Vec<(String, Vec<f64>)> = context.iter().map(|(c, v)| (c.to_string(), v.clone())).collect();
    for w in lexicon {
        let parts: Vec<&Vec<f64>> = w.chars().filter_map(|c| context.get(&c)).collect();
        if w.chars().count() > 1 && parts.len() == w.chars().count() {
            let mean = (0..DIM).map(|d| parts.iter().map(|v| v[d]).sum::<f64>() / parts.len() as f64).collect();
            rows.push((w.clone(), mean));
        }
    }
    let mut out = format!("{} {}\n", rows.len(), DIM);
    for (t, v) in rows {
        out.push_str(&t);
        for x in v {
            write!(out, " {x:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}
