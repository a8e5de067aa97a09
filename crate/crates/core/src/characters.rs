//! Canonical characters, pronoun counts, timelines and interaction networks.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::lexicon::Lexicons;
use crate::linguistic::{attribute_quotes, extract_quotes};
use crate::xml::{
    AnnotatedBook, CharacterRecord, Gender, Ner, Pos, TokenTable, MIN_CHARACTER_MENTIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoOccurrence {
    /// Unordered mention pairs within the window of each other.
    #[default]
    MentionPairs,
    /// Fixed, non-overlapping windows holding a mention of both characters.
    Windows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CharacterConfig {
    /// Pronouns look back this many sentences before their own.
    pub pronoun_sentences: usize,
    pub network_window: usize,
    /// An edge needs strictly more co-occurrences than this.
    pub network_min_co: usize,
    pub co_occurrence: CoOccurrence,
    pub timeline_top_k: usize,
}

impl Default for CharacterConfig {
    fn default() -> Self {
        CharacterConfig {
            pronoun_sentences: 1,
            network_window: 30,
            network_min_co: 5,
            co_occurrence: CoOccurrence::MentionPairs,
            timeline_top_k: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderVotes {
    pub honorific: Option<Gender>,
    pub pronoun: Option<Gender>,
    pub name: Option<Gender>,
}

impl GenderVotes {
    /// Honorific first, then pronoun majority, then the first-name list.
    pub fn resolve(&self) -> Gender {
        self.honorific
            .or(self.pronoun)
            .or(self.name)
            .unwrap_or(Gender::Unknown)
    }
}

fn known(g: Option<Gender>) -> Option<Gender> {
    g.filter(|g| *g != Gender::Unknown)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionCandidate {
    /// Global indices of the first and one-past-last token.
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub honorific: Option<String>,
    pub first_name: Option<String>,
    pub last_name: Option<String>,
    pub votes: GenderVotes,
}

impl MentionCandidate {
    /// Names made of two or more tokens (an honorific counts) are full names.
    pub fn is_full_name(&self) -> bool {
        self.end - self.start >= 2
    }
}

const MALE_PRONOUNS: [&str; 4] = ["he", "him", "his", "himself"];
const FEMALE_PRONOUNS: [&str; 4] = ["she", "her", "hers", "herself"];
const FIRST_PERSON: [&str; 5] = ["i", "me", "my", "mine", "myself"];
const SECOND_PERSON: [&str; 9] = [
    "you", "your", "yours", "yourself", "yourselves", "thou", "thee", "thy", "thine",
];

pub fn pronoun_gender(word: &str) -> Option<Gender> {
    let lower = word.to_lowercase();
    if MALE_PRONOUNS.contains(&lower.as_str()) {
        Some(Gender::Male)
    } else if FEMALE_PRONOUNS.contains(&lower.as_str()) {
        Some(Gender::Female)
    } else {
        None
    }
}

fn is_first_person(word: &str) -> bool {
    word == "I" || FIRST_PERSON[1..].contains(&word.to_lowercase().as_str())
}

fn is_second_person(word: &str) -> bool {
    SECOND_PERSON.contains(&word.to_lowercase().as_str())
}

fn strip_possessive(word: &str) -> &str {
    word.strip_suffix("'s")
        .or_else(|| word.strip_suffix("’s"))
        .or_else(|| word.strip_suffix('\''))
        .or_else(|| word.strip_suffix('’'))
        .unwrap_or(word)
}

fn is_opening_mark(text: &str) -> bool {
    matches!(text, "\"" | "“" | "‘" | "'" | "(" | "[" | "`" | "_")
}

fn capitalized_name_shape(word: &str) -> bool {
    let mut chars = word.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    let rest: Vec<char> = chars.collect();
    first.is_uppercase()
        && rest.iter().any(|c| c.is_lowercase())
        && rest.iter().all(|c| c.is_alphabetic() || *c == '-' || *c == '\'' || *c == '’')
}

struct Detector<'a> {
    table: &'a TokenTable<'a>,
    lex: &'a Lexicons,
    /// Per flat token: sentence-initial in the loose sense (only punctuation or
    /// an opening mark before it in its sentence).
    initial: Vec<bool>,
    capitalized_elsewhere: HashSet<String>,
    lowercase_count: HashMap<String, usize>,
    capitalized_count: HashMap<String, usize>,
}

impl<'a> Detector<'a> {
    fn new(table: &'a TokenTable<'a>, lex: &'a Lexicons) -> Self {
        let mut initial = vec![false; table.len()];
        for &(s, e) in &table.sentences {
            let mut lead = true;
            for k in s..e {
                let after_mark = k > s && is_opening_mark(table.text(k - 1));
                // verse capitalizes every line
                let line_start = k > 0 && table.tokens[k - 1].token.trailing_ws.contains('\n');
                initial[k] = lead || after_mark || line_start;
                if table.text(k).chars().any(char::is_alphanumeric) {
                    lead = false;
                }
            }
        }
        let mut capitalized_elsewhere = HashSet::new();
        let mut lowercase_count: HashMap<String, usize> = HashMap::new();
        let mut capitalized_count: HashMap<String, usize> = HashMap::new();
        for (k, _) in table.tokens.iter().enumerate() {
            let word = strip_possessive(table.text(k));
            if word.starts_with(char::is_lowercase) {
                *lowercase_count.entry(word.to_string()).or_default() += 1;
            } else if capitalized_name_shape(word) && !initial[k] {
                capitalized_elsewhere.insert(word.to_string());
                *capitalized_count.entry(word.to_lowercase()).or_default() += 1;
            }
        }
        Detector {
            table,
            lex,
            initial,
            capitalized_elsewhere,
            lowercase_count,
            capitalized_count,
        }
    }

    fn name_like(&self, k: usize) -> bool {
        let word = strip_possessive(self.table.text(k));
        if !capitalized_name_shape(word) || self.lex.is_honorific(word) {
            return false;
        }
        let lower = word.to_lowercase();
        if self.lex.stop_words.contains(&lower) || self.lex.pos.contains_key(&lower) {
            return false;
        }
        if let Some((head, _)) = lower.split_once(['\'', '’']) {
            if self.lex.stop_words.contains(head) || self.lex.pos.contains_key(head) {
                return false;
            }
        }
        if self.initial[k]
            && !self.capitalized_elsewhere.contains(word)
            && self.lex.name_gender(word).is_none()
        {
            return false;
        }
        let lowercase = self.lowercase_count.get(&lower).copied().unwrap_or(0);
        let capitalized = self.capitalized_count.get(&lower).copied().unwrap_or(0);
        lowercase <= capitalized
    }

    /// A name token following an honorific only needs the right shape.
    fn follows_honorific(&self, k: usize) -> bool {
        let word = strip_possessive(self.table.text(k));
        k > 0
            && self.same_sentence(k - 1, k)
            && self.lex.is_honorific(self.table.text(k - 1))
            && capitalized_name_shape(word)
            && !self.lex.is_honorific(word)
            && !self.lex.stop_words.contains(&word.to_lowercase())
    }

    fn same_sentence(&self, a: usize, b: usize) -> bool {
        self.table.tokens[a].sentence == self.table.tokens[b].sentence
    }

    fn ends_run(&self, k: usize) -> bool {
        strip_possessive(self.table.text(k)) != self.table.text(k)
    }
}

const MAX_NAME_TOKENS: usize = 4;

/// Flat-position spans `[start, end)` of person mentions before honorifics
/// are added.
fn detect_spans(table: &TokenTable, lex: &Lexicons) -> Vec<(usize, usize)> {
    let n = table.len();
    let mut spans = Vec::new();
    let has_ner = table.tokens.iter().any(|t| t.token.ner.is_some());
    if has_ner {
        let mut k = 0;
        while k < n {
            if table.tokens[k].token.ner != Some(Ner::Person) {
                k += 1;
                continue;
            }
            let start = k;
            while k < n
                && table.tokens[k].token.ner == Some(Ner::Person)
                && table.tokens[k].sentence == table.tokens[start].sentence
            {
                k += 1;
            }
            spans.push((start, k));
        }
        return spans;
    }

    let d = Detector::new(table, lex);
    let mut k = 0;
    while k < n {
        if !(d.name_like(k) || d.follows_honorific(k)) {
            k += 1;
            continue;
        }
        let start = k;
        k += 1;
        while k < n
            && k - start < MAX_NAME_TOKENS
            && !d.ends_run(k - 1)
            && d.same_sentence(start, k)
            && table.tokens[k - 1].token.trailing_ws.chars().all(|c| c == ' ')
            && (d.name_like(k) || (capitalized_name_shape(table.text(k)) && !d.initial[k] && !lex.pos.contains_key(&table.text(k).to_lowercase()) && !lex.is_honorific(table.text(k))))
        {
            k += 1;
        }
        spans.push((start, k));
    }
    spans
}

fn name_of(table: &TokenTable, k: usize) -> String {
    strip_possessive(table.text(k)).to_string()
}

/// Extends spans one token to the left over an honorific.
fn augment_spans(spans: &mut [(usize, usize)], table: &TokenTable, lex: &Lexicons) {
    for span in spans.iter_mut() {
        let k = span.0;
        if k > 0
            && table.tokens[k - 1].sentence == table.tokens[k].sentence
            && lex.is_honorific(table.text(k - 1))
        {
            span.0 = k - 1;
        }
    }
}

fn candidate(table: &TokenTable, lex: &Lexicons, span: (usize, usize)) -> MentionCandidate {
    let (s, e) = span;
    let honorific = lex
        .is_honorific(table.text(s))
        .then(|| table.text(s).to_string())
        .filter(|_| e - s >= 2);
    let name_start = if honorific.is_some() { s + 1 } else { s };
    let names: Vec<String> = (name_start..e).map(|k| name_of(table, k)).collect();
    let surface = (s..e).map(|k| name_of(table, k)).collect::<Vec<_>>().join(" ");
    let first_name = names.first().cloned();
    let last_name = if e - s >= 2 { names.last().cloned() } else { None };
    let votes = GenderVotes {
        honorific: honorific.as_deref().and_then(|h| known(lex.honorific_gender(h))),
        pronoun: None,
        name: if honorific.is_none() || names.len() >= 2 {
            first_name.as_deref().and_then(|f| known(lex.name_gender(f)))
        } else {
            None
        },
    };
    MentionCandidate {
        start: table.tokens[s].token.global_index,
        end: table.tokens[e - 1].token.global_index + 1,
        surface,
        honorific,
        first_name,
        last_name,
        votes,
    }
}

/// Person mentions found from imported entity labels when present, otherwise
/// from runs of capitalized words. Honorifics are not yet included.
pub fn detect_person_mentions(book: &AnnotatedBook, lex: &Lexicons) -> Vec<MentionCandidate> {
    let table = TokenTable::new(book);
    detect_spans(&table, lex)
        .into_iter()
        .map(|span| candidate(&table, lex, span))
        .collect()
}

/// Extends candidates that directly follow an honorific to cover it.
pub fn augment_honorifics(
    candidates: Vec<MentionCandidate>,
    book: &AnnotatedBook,
    lex: &Lexicons,
) -> Vec<MentionCandidate> {
    let table = TokenTable::new(book);
    let mut spans: Vec<(usize, usize)> = candidates
        .iter()
        .filter_map(|c| Some((table.position_of(c.start)?, table.position_of(c.end - 1)? + 1)))
        .collect();
    augment_spans(&mut spans, &table, lex);
    spans.into_iter().map(|s| candidate(&table, lex, s)).collect()
}

/// Third-person pronouns vote for the nearest preceding candidate in the
/// pronoun window whose honorific gender does not contradict them.
fn pronoun_votes(table: &TokenTable, spans: &[(usize, usize)], cands: &[MentionCandidate], window: usize) -> Vec<[usize; 2]> {
    let mut votes = vec![[0usize; 2]; cands.len()];
    let mut next = 0;
    let mut last_seen: Vec<usize> = Vec::new();
    for k in 0..table.len() {
        while next < spans.len() && spans[next].0 <= k {
            last_seen.push(next);
            next += 1;
        }
        let Some(g) = pronoun_gender(table.text(k)) else {
            continue;
        };
        let sentence = table.tokens[k].sentence;
        let hit = last_seen.iter().rev().take_while(|&&c| {
            table.tokens[spans[c].0].sentence + window >= sentence
        }).find(|&&c| {
            spans[c].1 <= k && cands[c].votes.honorific.is_none_or(|h| h == g)
        });
        if let Some(&c) = hit {
            votes[c][if g == Gender::Male { 0 } else { 1 }] += 1;
        }
    }
    votes
}

fn majority(counts: [usize; 2]) -> Option<Gender> {
    match counts[0].cmp(&counts[1]) {
        std::cmp::Ordering::Greater => Some(Gender::Male),
        std::cmp::Ordering::Less => Some(Gender::Female),
        std::cmp::Ordering::Equal => None,
    }
}

fn vote_majority(votes: impl Iterator<Item = Option<Gender>>) -> Option<Gender> {
    let mut counts = [0usize; 2];
    for g in votes.flatten() {
        match g {
            Gender::Male => counts[0] += 1,
            Gender::Female => counts[1] += 1,
            Gender::Unknown => {}
        }
    }
    majority(counts)
}

#[derive(Debug, Clone)]
struct FullName {
    key: (String, String, Gender),
    /// Global start indices of its occurrences.
    positions: Vec<usize>,
}

/// Groups candidates into characters keyed by first name, last name and
/// gender. Single names join the nearest gender-compatible full name sharing
/// their first or last name; ties go to the more frequent full name. Characters
/// with fewer than three mentions are dropped and the rest are ranked by count.
pub fn cluster_mentions(candidates: &[MentionCandidate], lex: &Lexicons) -> Vec<CharacterRecord> {
    let _ = lex;
    // full-name groups
    let mut groups: BTreeMap<(String, String, Option<Gender>), Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        if c.is_full_name() {
            let key = (
                c.first_name.clone().unwrap_or_default(),
                c.last_name.clone().unwrap_or_default(),
                c.votes.honorific,
            );
            groups.entry(key).or_default().push(i);
        }
    }
    // a full name seen without an honorific joins the single honorific group
    // that shares it, if there is exactly one
    let keys: Vec<_> = groups.keys().cloned().collect();
    for key in keys.iter().filter(|k| k.2.is_none()) {
        let partners: Vec<_> = keys
            .iter()
            .filter(|k| k.2.is_some() && k.0 == key.0 && k.1 == key.1)
            .collect();
        if partners.len() == 1 {
            let moved = groups.remove(key).unwrap();
            groups.get_mut(partners[0]).unwrap().extend(moved);
        }
    }
    let mut full_names: Vec<FullName> = Vec::new();
    let mut assignment: Vec<Option<usize>> = vec![None; candidates.len()];
    for (key, members) in &groups {
        let votes = GenderVotes {
            honorific: key.2.or_else(|| vote_majority(members.iter().map(|&i| candidates[i].votes.honorific))),
            pronoun: vote_majority(members.iter().map(|&i| candidates[i].votes.pronoun)),
            name: vote_majority(members.iter().map(|&i| candidates[i].votes.name)),
        };
        let mut positions: Vec<usize> = members.iter().map(|&i| candidates[i].start).collect();
        positions.sort_unstable();
        let id = full_names.len();
        for &m in members {
            assignment[m] = Some(id);
        }
        full_names.push(FullName {
            key: (key.0.clone(), key.1.clone(), votes.resolve()),
            positions,
        });
    }
    let mut by_name: HashMap<&str, Vec<usize>> = HashMap::new();
    for (id, f) in full_names.iter().enumerate() {
        by_name.entry(f.key.0.as_str()).or_default().push(id);
        if f.key.1 != f.key.0 {
            by_name.entry(f.key.1.as_str()).or_default().push(id);
        }
    }

    // single names
    let mut singles: BTreeMap<(String, Gender), Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        if c.is_full_name() {
            continue;
        }
        let name = c.first_name.clone().unwrap_or_default();
        let own = c.votes.resolve();
        let best = by_name
            .get(name.as_str())
            .into_iter()
            .flatten()
            .filter(|&&f| own.compatible(full_names[f].key.2))
            .filter_map(|&f| {
                let pos = &full_names[f].positions;
                let at = pos.partition_point(|&p| p < c.start);
                let near = [at.checked_sub(1), Some(at)]
                    .into_iter()
                    .flatten()
                    .filter_map(|j| pos.get(j))
                    .map(|&p| p.abs_diff(c.start))
                    .min()?;
                Some((near, std::cmp::Reverse(pos.len()), f))
            })
            .min();
        match best {
            Some((_, _, f)) => assignment[i] = Some(f),
            None => singles.entry((name, own)).or_default().push(i),
        }
    }

    // materialize clusters
    let mut clusters: Vec<(Vec<usize>, Gender, GenderVotes)> = Vec::new();
    for f in 0..full_names.len() {
        let members: Vec<usize> = (0..candidates.len()).filter(|&i| assignment[i] == Some(f)).collect();
        clusters.push((members, full_names[f].key.2, GenderVotes::default()));
    }
    for ((_, gender), members) in singles {
        clusters.push((members, gender, GenderVotes::default()));
    }

    let mut records: Vec<CharacterRecord> = clusters
        .into_iter()
        .filter(|(members, _, _)| members.len() >= MIN_CHARACTER_MENTIONS)
        .map(|(members, _, _)| {
            let votes = GenderVotes {
                honorific: vote_majority(members.iter().map(|&i| candidates[i].votes.honorific)),
                pronoun: vote_majority(members.iter().map(|&i| candidates[i].votes.pronoun)),
                name: vote_majority(members.iter().map(|&i| candidates[i].votes.name)),
            };
            let mut aliases: BTreeMap<String, usize> = BTreeMap::new();
            for &i in &members {
                *aliases.entry(candidates[i].surface.clone()).or_default() += 1;
            }
            let mut mentions: Vec<usize> = members.iter().map(|&i| candidates[i].start).collect();
            mentions.sort_unstable();
            mentions.dedup();
            CharacterRecord {
                id: 0,
                canonical_name: canonical_name(&aliases),
                gender: votes.resolve(),
                aliases,
                mention_token_indices: mentions,
                gcc: 0,
                fpcc: 0,
                spcc: 0,
            }
        })
        .collect();
    records.sort_by(|a, b| {
        b.mention_count()
            .cmp(&a.mention_count())
            .then(a.first_mention().cmp(&b.first_mention()))
    });
    for (i, r) in records.iter_mut().enumerate() {
        r.id = i as u32 + 1;
    }
    records
}

/// The most frequent alias; ties go to the longer, then the alphabetically
/// first.
fn canonical_name(aliases: &BTreeMap<String, usize>) -> String {
    aliases
        .iter()
        .max_by(|x, y| {
            x.1.cmp(y.1)
                .then(x.0.len().cmp(&y.0.len()))
                .then(y.0.cmp(x.0))
        })
        .map(|(a, _)| a.clone())
        .unwrap_or_default()
}

/// Finds, groups and links characters, setting `character_id` on every token
/// of a mention and filling in the pronoun counts.
pub fn identify_characters(book: &mut AnnotatedBook, lex: &Lexicons, cfg: &CharacterConfig) {
    let table = TokenTable::new(book);
    let mut spans = detect_spans(&table, lex);
    augment_spans(&mut spans, &table, lex);
    let mut cands: Vec<MentionCandidate> = spans.iter().map(|&s| candidate(&table, lex, s)).collect();
    let votes = pronoun_votes(&table, &spans, &cands, cfg.pronoun_sentences);
    for (c, v) in cands.iter_mut().zip(votes) {
        c.votes.pronoun = majority(v);
    }
    let mut records = cluster_mentions(&cands, lex);

    let mut owner: HashMap<usize, u32> = HashMap::new();
    let by_start: HashMap<usize, &MentionCandidate> = cands.iter().map(|c| (c.start, c)).collect();
    for r in &records {
        for &m in &r.mention_token_indices {
            let c = by_start[&m];
            for g in c.start..c.end {
                owner.insert(g, r.id);
            }
        }
    }
    drop(table);
    for token in book.tokens_mut() {
        token.character_id = owner.get(&token.global_index).copied();
    }

    let (quotes, _) = extract_quotes(book);
    let speakers = attribute_quotes(book, &quotes, lex);
    attach_pronoun_counts(book, &mut records, &quotes, &speakers, cfg);
    book.characters = records;
}

/// Fills in gendered (gcc), first-person (fpcc) and second-person (spcc)
/// pronoun counts. Token `character_id`s must already be set.
pub fn attach_pronoun_counts(
    book: &AnnotatedBook,
    records: &mut [CharacterRecord],
    quotes: &[crate::linguistic::QuoteSpan],
    speakers: &HashMap<u32, Option<u32>>,
    cfg: &CharacterConfig,
) {
    let table = TokenTable::new(book);
    let gender: HashMap<u32, Gender> = records.iter().map(|r| (r.id, r.gender)).collect();
    let mut gcc: HashMap<u32, usize> = HashMap::new();
    let mut fpcc: HashMap<u32, usize> = HashMap::new();
    let mut spcc: HashMap<u32, usize> = HashMap::new();

    // mention starts in flat order
    let starts: Vec<(usize, u32)> = (0..table.len())
        .filter_map(|k| {
            let c = table.tokens[k].token.character_id?;
            (k == 0 || table.tokens[k - 1].token.character_id != Some(c)).then_some((k, c))
        })
        .collect();

    for k in 0..table.len() {
        let Some(g) = pronoun_gender(table.text(k)) else {
            continue;
        };
        let sentence = table.tokens[k].sentence;
        let before = starts.partition_point(|&(p, _)| p < k);
        let hit = starts[..before]
            .iter()
            .rev()
            .take_while(|&&(p, _)| table.tokens[p].sentence + cfg.pronoun_sentences >= sentence)
            .find(|&&(_, c)| gender.get(&c).is_some_and(|cg| cg.compatible(g)));
        if let Some(&(_, c)) = hit {
            *gcc.entry(c).or_default() += 1;
        }
    }

    let mut addressee: HashMap<u32, Option<u32>> = HashMap::new();
    for q in quotes {
        let speaker = speakers.get(&q.id).copied().flatten();
        let (Some(s), Some(e)) = (table.position_of(q.start), table.position_of(q.end)) else {
            continue;
        };
        let (lo, hi) = (
            table.sentences[table.tokens[s].sentence].0,
            table.sentences[table.tokens[e].sentence].1,
        );
        let other = (lo..hi)
            .filter(|&k| table.tokens[k].token.quote_id.is_none())
            .filter_map(|k| table.tokens[k].token.character_id)
            .find(|&c| Some(c) != speaker);
        addressee.entry(q.id).or_insert(other);
    }
    for ft in &table.tokens {
        let Some(q) = ft.token.quote_id else {
            continue;
        };
        if ft.token.pos == Some(Pos::Punct) {
            continue;
        }
        if is_first_person(&ft.token.text) {
            if let Some(&Some(c)) = speakers.get(&q) {
                *fpcc.entry(c).or_default() += 1;
            }
        } else if is_second_person(&ft.token.text) {
            if let Some(&Some(c)) = addressee.get(&q) {
                *spcc.entry(c).or_default() += 1;
            }
        }
    }
    for r in records.iter_mut() {
        r.gcc = gcc.get(&r.id).copied().unwrap_or(0);
        r.fpcc = fpcc.get(&r.id).copied().unwrap_or(0);
        r.spcc = spcc.get(&r.id).copied().unwrap_or(0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSeries {
    pub character_id: u32,
    pub name: String,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub series: Vec<TimelineSeries>,
    pub chapter_breaks: Vec<f64>,
}

/// Mention positions of the `top_k` most frequent characters and the section
/// starts, as fractions of the token count.
pub fn build_occurrence_timeline(book: &AnnotatedBook, top_k: usize) -> Timeline {
    let table = TokenTable::new(book);
    let n = table.len().max(1) as f64;
    let series = ranked(&book.characters)
        .into_iter()
        .take(top_k)
        .map(|c| TimelineSeries {
            character_id: c.id,
            name: c.canonical_name.clone(),
            positions: c
                .mention_token_indices
                .iter()
                .filter_map(|&g| table.position_of(g))
                .map(|k| k as f64 / n)
                .collect(),
        })
        .collect();
    let first_content = (0..book.body.sections.len()).find(|&s| {
        let start = table.section_starts[s];
        let end = table.section_starts.get(s + 1).copied().unwrap_or(table.len());
        end > start
    });
    let chapter_breaks = match first_content {
        Some(first) => table.section_starts[first + 1..]
            .iter()
            .filter(|&&s| s < table.len())
            .map(|&s| s as f64 / n)
            .collect::<Vec<_>>(),
        None => Vec::new(),
    };
    let mut chapter_breaks = chapter_breaks;
    chapter_breaks.dedup();
    Timeline {
        series,
        chapter_breaks,
    }
}

/// Characters by mention count, ties broken by earlier first mention.
pub fn ranked(characters: &[CharacterRecord]) -> Vec<&CharacterRecord> {
    let mut out: Vec<&CharacterRecord> = characters.iter().collect();
    out.sort_by(|a, b| {
        b.mention_count()
            .cmp(&a.mention_count())
            .then(a.first_mention().cmp(&b.first_mention()))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub id: u32,
    pub name: String,
    pub size: usize,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub source: u32,
    pub target: u32,
    pub weight: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionNetwork {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

/// Number of mention pairs of `a` and `b` at most `window` tokens apart.
pub fn co_occurrences(a: &[usize], b: &[usize], window: usize) -> usize {
    let mut b = b.to_vec();
    b.sort_unstable();
    a.iter()
        .map(|&x| {
            let lo = b.partition_point(|&y| y + window < x);
            let hi = b.partition_point(|&y| y <= x + window);
            hi - lo
        })
        .sum()
}

fn window_co_occurrences(a: &[usize], b: &[usize], window: usize) -> usize {
    let w = window.max(1);
    let wa: HashSet<usize> = a.iter().map(|&x| x / w).collect();
    let wb: HashSet<usize> = b.iter().map(|&x| x / w).collect();
    wa.intersection(&wb).count()
}

/// Characters linked by more than `min_co` co-occurrences within `window`
/// tokens.
pub fn build_interaction_network(
    characters: &[CharacterRecord],
    window: usize,
    min_co: usize,
    mode: CoOccurrence,
) -> InteractionNetwork {
    let nodes = characters
        .iter()
        .map(|c| NetworkNode {
            id: c.id,
            name: c.canonical_name.clone(),
            size: c.mention_count(),
            gender: c.gender,
        })
        .collect();
    let mut edges = Vec::new();
    for (i, a) in characters.iter().enumerate() {
        for b in &characters[i + 1..] {
            let weight = match mode {
                CoOccurrence::MentionPairs => {
                    co_occurrences(&a.mention_token_indices, &b.mention_token_indices, window)
                }
                CoOccurrence::Windows => {
                    window_co_occurrences(&a.mention_token_indices, &b.mention_token_indices, window)
                }
            };
            if weight > min_co {
                let (source, target) = if a.id < b.id { (a.id, b.id) } else { (b.id, a.id) };
                edges.push(NetworkEdge {
                    source,
                    target,
                    weight,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.source, e.target));
    InteractionNetwork { nodes, edges }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtagonistStats {
    pub protagonist_id: u32,
    pub protagonist: String,
    pub mentions: usize,
    /// Mentions of the top character over those of the runner-up.
    pub top2_ratio: Option<f64>,
}

pub fn protagonist_stats(characters: &[CharacterRecord]) -> Option<ProtagonistStats> {
    let ranked = ranked(characters);
    let top = ranked.first()?;
    let top2_ratio = ranked
        .get(1)
        .filter(|c| c.mention_count() > 0)
        .map(|c| top.mention_count() as f64 / c.mention_count() as f64);
    Some(ProtagonistStats {
        protagonist_id: top.id,
        protagonist: top.canonical_name.clone(),
        mentions: top.mention_count(),
        top2_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linguistic;
    use crate::segmentation::segment_book;

    fn lx() -> &'static Lexicons {
        Lexicons::bundled()
    }

    fn book(text: &str) -> AnnotatedBook {
        let mut b = AnnotatedBook::default();
        b.body.text = Some(text.to_string());
        segment_book(&mut b, lx()).unwrap();
        linguistic::annotate(&mut b, lx());
        linguistic::extract_quotes(&mut b);
        b
    }

    fn surfaces(text: &str) -> Vec<String> {
        let b = book(text);
        let c = detect_person_mentions(&b, lx());
        augment_honorifics(c, &b, lx())
            .into_iter()
            .map(|c| c.surface)
            .collect()
    }

    #[test]
    fn capitalization_runs() {
        assert_eq!(
            surfaces("The boy came in, said Oliver Twist to the master."),
            ["Oliver Twist"]
        );
        assert!(surfaces("The dog barked.").is_empty());
        assert_eq!(surfaces("Mrs. Bedwin smiled."), ["Mrs. Bedwin"]);
        assert_eq!(surfaces("It was Mr. Brownlow again."), ["Mr. Brownlow"]);
        assert_eq!(surfaces("Then Dr. John Watson left."), ["Dr. John Watson"]);
        assert_eq!(surfaces("Oliver ran. Oliver's hat fell. Then Oliver sat."), ["Oliver", "Oliver", "Oliver"]);
    }

    #[test]
    fn honorific_augmentation() {
        let b = book("She met Mr. Brownlow there.");
        let table = TokenTable::new(&b);
        let k = (0..table.len()).find(|&k| table.text(k) == "Brownlow").unwrap();
        let bare = vec![candidate(&table, lx(), (k, k + 1))];
        let out = augment_honorifics(bare, &b, lx());
        assert_eq!(out[0].surface, "Mr. Brownlow");
        assert_eq!(out[0].votes.honorific, Some(Gender::Male));
        let b = book("She met Brownlow there.");
        let table = TokenTable::new(&b);
        let k = (0..table.len()).find(|&k| table.text(k) == "Brownlow").unwrap();
        let out = augment_honorifics(vec![candidate(&table, lx(), (k, k + 1))], &b, lx());
        assert_eq!(out[0].surface, "Brownlow");
    }

    #[test]
    fn gender_votes() {
        let v = GenderVotes {
            honorific: Some(Gender::Female),
            pronoun: Some(Gender::Male),
            name: Some(Gender::Male),
        };
        assert_eq!(v.resolve(), Gender::Female);
        let v = GenderVotes {
            pronoun: majority([10, 2]),
            ..Default::default()
        };
        assert_eq!(v.resolve(), Gender::Male);
        assert_eq!(GenderVotes::default().resolve(), Gender::Unknown);
        assert_eq!(known(lx().name_gender("Alex")), None);
    }

    fn cand(start: usize, names: &[&str], honorific: Option<&str>) -> MentionCandidate {
        let len = names.len() + usize::from(honorific.is_some());
        let mut surface: Vec<&str> = honorific.into_iter().collect();
        surface.extend(names);
        MentionCandidate {
            start,
            end: start + len,
            surface: surface.join(" "),
            honorific: honorific.map(str::to_string),
            first_name: names.first().map(|s| s.to_string()),
            last_name: (len >= 2).then(|| names.last().unwrap().to_string()),
            votes: GenderVotes {
                honorific: honorific.and_then(|h| known(lx().honorific_gender(h))),
                ..Default::default()
            },
        }
    }

    #[test]
    fn single_names_join_full_names() {
        let c = vec![
            cand(0, &["Oliver", "Twist"], None),
            cand(10, &["Oliver"], None),
            cand(20, &["Oliver"], None),
            cand(30, &["Oliver", "Twist"], None),
            cand(40, &["Oliver"], None),
            cand(50, &["Oliver"], None),
        ];
        let r = cluster_mentions(&c, lx());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].mention_count(), 6);
        assert_eq!(r[0].aliases.len(), 2);
        assert_eq!(r[0].canonical_name, "Oliver");
    }

    #[test]
    fn nearest_full_name_wins() {
        let mut c = Vec::new();
        for k in 0..3 {
            c.push(cand(300 + k, &["Jane", "Bennet"], None));
            c.push(cand(490 - 10 * k, &["Elizabeth", "Bennet"], None));
        }
        c.push(cand(500, &["Bennet"], None));
        c.sort_by_key(|c| c.start);
        let r = cluster_mentions(&c, lx());
        let eliza = r.iter().find(|r| r.canonical_name == "Elizabeth Bennet").unwrap();
        assert_eq!(eliza.mention_count(), 4);
        assert!(eliza.mention_token_indices.contains(&500));
    }

    #[test]
    fn twice_mentioned_names_are_dropped() {
        let c = vec![cand(0, &["Fagin"], None), cand(5, &["Fagin"], None)];
        assert!(cluster_mentions(&c, lx()).is_empty());
    }

    #[test]
    fn honorifics_split_by_gender() {
        let mut c = Vec::new();
        for k in 0..3 {
            c.push(cand(k * 10, &["Bumble"], Some("Mr.")));
            c.push(cand(k * 10 + 5, &["Bumble"], Some("Mrs.")));
        }
        let r = cluster_mentions(&c, lx());
        assert_eq!(r.len(), 2);
        let genders: HashSet<Gender> = r.iter().map(|r| r.gender).collect();
        assert_eq!(genders, HashSet::from([Gender::Male, Gender::Female]));
    }

    fn identified(text: &str) -> AnnotatedBook {
        let mut b = book(text);
        identify_characters(&mut b, lx(), &CharacterConfig::default());
        b
    }

    #[test]
    fn gendered_pronouns() {
        let b = identified("Oliver ran. He fell. Oliver rose. Oliver sat.");
        assert_eq!(b.characters.len(), 1);
        assert_eq!(b.characters[0].gcc, 1);
        let b = identified("Oliver ran. Oliver fell. Oliver rose. The sun set. It was dark. He slept.");
        assert_eq!(b.characters[0].gcc, 0);
    }

    #[test]
    fn first_person_in_attributed_quote() {
        let b = identified("\"I am hungry,\" said Oliver. Oliver ate. Oliver slept.");
        assert_eq!(b.characters[0].fpcc, 1);
        let tagged: Vec<&str> = b
            .tokens()
            .filter(|t| t.character_id.is_some())
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(tagged, ["Oliver", "Oliver", "Oliver"]);
    }

    #[test]
    fn second_person_goes_to_addressee() {
        let b = identified(
            "\"You are late,\" said Fagin to Oliver. Oliver ran. Oliver hid. Fagin came. Fagin left.",
        );
        let oliver = b.characters.iter().find(|c| c.canonical_name == "Oliver").unwrap();
        let fagin = b.characters.iter().find(|c| c.canonical_name == "Fagin").unwrap();
        assert_eq!(oliver.spcc, 1);
        assert_eq!(fagin.spcc, 0);
    }

    fn record(id: u32, mentions: &[usize]) -> CharacterRecord {
        CharacterRecord {
            id,
            canonical_name: format!("C{id}"),
            gender: Gender::Unknown,
            aliases: BTreeMap::from([(format!("C{id}"), mentions.len())]),
            mention_token_indices: mentions.to_vec(),
            gcc: 0,
            fpcc: 0,
            spcc: 0,
        }
    }

    #[test]
    fn network_threshold() {
        let a = record(1, &[0, 40, 80]);
        let b = record(2, &[20, 60, 100]);
        assert_eq!(co_occurrences(&a.mention_token_indices, &b.mention_token_indices, 30), 5);
        let net = build_interaction_network(&[a, b], 30, 5, CoOccurrence::MentionPairs);
        assert!(net.edges.is_empty());
        let a = record(1, &[0, 40, 80, 120]);
        let b = record(2, &[20, 60, 100, 140]);
        let net = build_interaction_network(&[a, b], 30, 5, CoOccurrence::MentionPairs);
        assert_eq!(net.edges, vec![NetworkEdge { source: 1, target: 2, weight: 7 }]);
        assert_eq!(net.nodes[0].size, 4);
        let far = build_interaction_network(&[record(1, &[0, 1, 2]), record(2, &[500, 501, 502])], 30, 5, CoOccurrence::MentionPairs);
        assert!(far.edges.is_empty());
    }

    #[test]
    fn protagonist() {
        let mut a = record(1, &[5; 1]);
        a.mention_token_indices = (0..100).collect();
        let mut b = record(2, &[]);
        b.mention_token_indices = (200..210).collect();
        let s = protagonist_stats(&[a.clone(), b]).unwrap();
        assert_eq!(s.top2_ratio, Some(10.0));
        let mut c = record(3, &[]);
        c.mention_token_indices = (0..50).map(|i| i * 2 + 1).collect();
        let mut d = record(4, &[]);
        d.mention_token_indices = (0..50).map(|i| i * 2).collect();
        let s = protagonist_stats(&[c, d]).unwrap();
        assert_eq!(s.top2_ratio, Some(1.0));
        assert_eq!(s.protagonist_id, 4);
        let s = protagonist_stats(&[a]).unwrap();
        assert_eq!(s.top2_ratio, None);
        assert!(protagonist_stats(&[]).is_none());
    }

    #[test]
    fn timeline_positions() {
        let text = "CHAPTER I\n\nOliver ran far away.\n\nCHAPTER II\n\nOliver ran far away.\n\nCHAPTER III\n\nOliver ran far away.";
        let b = identified(text);
        let t = build_occurrence_timeline(&b, 10);
        assert_eq!(t.chapter_breaks.len(), 2);
        assert!((t.chapter_breaks[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.chapter_breaks[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(t.series.len(), 1);
        assert_eq!(t.series[0].positions[0], 0.0);
        let t1 = build_occurrence_timeline(&b, 0);
        assert!(t1.series.is_empty());
    }
}
