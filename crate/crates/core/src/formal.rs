//! Reference recognizers for the three test languages.
//!
//! * L1: words over `{a, b}` containing at least one `a` and one `b`.
//! * L2: the Dyck language over `{(, )}`.
//! * L3: `aⁿbⁿcⁿ` with `n > 0`.
//!
//! These are the exact oracles the chemical automata are checked against.
//! Reject kinds follow the abstract machines: the L3 classifier runs a
//! two-stack machine and reports the first constraint it sees violated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    A,
    B,
    C,
    Open,
    Close,
}

impl Symbol {
    pub fn as_char(self) -> char {
        match self {
            Symbol::A => 'a',
            Symbol::B => 'b',
            Symbol::C => 'c',
            Symbol::Open => '(',
            Symbol::Close => ')',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'a' => Symbol::A,
            'b' => Symbol::B,
            'c' => Symbol::C,
            '(' => Symbol::Open,
            ')' => Symbol::Close,
            _ => return None,
        })
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    L1,
    L2,
    L3,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::L1, Language::L2, Language::L3];

    pub fn alphabet(self) -> &'static [Symbol] {
        match self {
            Language::L1 => &[Symbol::A, Symbol::B],
            Language::L2 => &[Symbol::Open, Symbol::Close],
            Language::L3 => &[Symbol::A, Symbol::B, Symbol::C],
        }
    }

    /// Reject kinds the language's abstract machine can produce.
    pub fn reject_kinds(self) -> &'static [RejectKind] {
        match self {
            Language::L1 => &[RejectKind::NoReaction],
            Language::L2 => &[RejectKind::PopEmptyStack, RejectKind::NonEmptyStack],
            Language::L3 => &[
                RejectKind::BadOrder,
                RejectKind::ExcessA,
                RejectKind::ExcessB,
                RejectKind::ExcessC,
            ],
        }
    }

    /// Parse a plain string (`"aab"`, `"(())"`) and check it against this
    /// language's alphabet.
    pub fn parse_word(self, s: &str) -> Result<Word> {
        let word: Word = s.parse().map_err(|c| Error::InvalidSymbol {
            symbol: c,
            language: self,
        })?;
        self.check_alphabet(&word)?;
        Ok(word)
    }

    pub fn check_alphabet(self, word: &Word) -> Result<()> {
        let alphabet = self.alphabet();
        match word.iter().find(|s| !alphabet.contains(s)) {
            Some(s) => Err(Error::InvalidSymbol {
                symbol: s.as_char(),
                language: self,
            }),
            None => Ok(()),
        }
    }

    pub fn recognize(self, word: &Word) -> Result<Verdict> {
        match self {
            Language::L1 => recognize_l1(word),
            Language::L2 => recognize_l2(word),
            Language::L3 => recognize_l3(word),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Language::L1 => "L1",
            Language::L2 => "L2",
            Language::L3 => "L3",
        };
        f.write_str(s)
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(Language::L1),
            "L2" => Ok(Language::L2),
            "L3" => Ok(Language::L3),
            other => Err(Error::input(format!("unknown language {other:?}"))),
        }
    }
}

/// An input word. Serialized as the plain string over `{a,b,c,(,)}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Symbol> {
        self.0.iter()
    }

    pub fn count(&self, symbol: Symbol) -> usize {
        self.0.iter().filter(|&&s| s == symbol).count()
    }

    /// `aⁿbⁿcⁿ`.
    pub fn anbncn(n: usize) -> Self {
        Self::blocks(n, n, n)
    }

    /// `aⁱbʲcᵏ`.
    pub fn blocks(a: usize, b: usize, c: usize) -> Self {
        let mut v = Vec::with_capacity(a + b + c);
        v.extend(std::iter::repeat_n(Symbol::A, a));
        v.extend(std::iter::repeat_n(Symbol::B, b));
        v.extend(std::iter::repeat_n(Symbol::C, c));
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    /// The first character that is not a known symbol.
    type Err = char;

    fn from_str(s: &str) -> std::result::Result<Self, char> {
        s.chars()
            .map(|c| Symbol::from_char(c).ok_or(c))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl<'a> IntoIterator for &'a Word {
    type Item = &'a Symbol;
    type IntoIter = std::slice::Iter<'a, Symbol>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|c| serde::de::Error::custom(format!("invalid symbol {c:?} in word {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectKind {
    BadOrder,
    ExcessA,
    ExcessB,
    ExcessC,
    PopEmptyStack,
    NonEmptyStack,
    NoReaction,
}

impl fmt::Display for RejectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Accept, or reject with exactly one kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "VerdictRecord", into = "VerdictRecord")]
pub struct Verdict {
    reject_kind: Option<RejectKind>,
}

impl Verdict {
    pub const ACCEPT: Verdict = Verdict { reject_kind: None };

    pub fn reject(kind: RejectKind) -> Self {
        Verdict {
            reject_kind: Some(kind),
        }
    }

    pub fn outcome(&self) -> Outcome {
        match self.reject_kind {
            None => Outcome::Accept,
            Some(_) => Outcome::Reject,
        }
    }

    pub fn is_accept(&self) -> bool {
        self.reject_kind.is_none()
    }

    pub fn reject_kind(&self) -> Option<RejectKind> {
        self.reject_kind
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reject_kind {
            None => f.write_str("Accept"),
            Some(k) => write!(f, "Reject({k})"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VerdictRecord {
    outcome: Outcome,
    reject_kind: Option<RejectKind>,
}

impl TryFrom<VerdictRecord> for Verdict {
    type Error = String;

    fn try_from(r: VerdictRecord) -> std::result::Result<Self, String> {
        match (r.outcome, r.reject_kind) {
            (Outcome::Accept, None) => Ok(Verdict::ACCEPT),
            (Outcome::Reject, Some(k)) => Ok(Verdict::reject(k)),
            (Outcome::Accept, Some(_)) => Err("accept verdict cannot carry a reject kind".into()),
            (Outcome::Reject, None) => Err("reject verdict needs a reject kind".into()),
        }
    }
}

impl From<Verdict> for VerdictRecord {
    fn from(v: Verdict) -> Self {
        VerdictRecord {
            outcome: v.outcome(),
            reject_kind: v.reject_kind,
        }
    }
}

pub fn recognize_l1(word: &Word) -> Result<Verdict> {
    Language::L1.check_alphabet(word)?;
    if word.count(Symbol::A) > 0 && word.count(Symbol::B) > 0 {
        Ok(Verdict::ACCEPT)
    } else {
        Ok(Verdict::reject(RejectKind::NoReaction))
    }
}

/// The empty word is a Dyck word and is accepted here.
pub fn recognize_l2(word: &Word) -> Result<Verdict> {
    Language::L2.check_alphabet(word)?;
    let mut depth = 0usize;
    for s in word {
        match s {
            Symbol::Open => depth += 1,
            _ => match depth.checked_sub(1) {
                Some(d) => depth = d,
                None => return Ok(Verdict::reject(RejectKind::PopEmptyStack)),
            },
        }
    }
    if depth == 0 {
        Ok(Verdict::ACCEPT)
    } else {
        Ok(Verdict::reject(RejectKind::NonEmptyStack))
    }
}

/// Two-stack machine for `aⁿbⁿcⁿ`.
///
/// Any word outside `a*b*c*`, and the empty word (`n > 0`), is `BadOrder`.
/// Otherwise every `a` is pushed onto both stacks; `b` pops the first and
/// `c` pops the second. The first violation decides the kind:
///
/// * `b` on an empty first stack: `ExcessB`
/// * first `c` (or end of input) with the first stack non-empty: `ExcessA`
/// * `c` on an empty second stack: `ExcessC`
/// * end of input with the second stack non-empty: `ExcessA`
pub fn recognize_l3(word: &Word) -> Result<Verdict> {
    Language::L3.check_alphabet(word)?;
    if word.is_empty() || !in_block_order(word) {
        return Ok(Verdict::reject(RejectKind::BadOrder));
    }
    let (mut s1, mut s2) = (0usize, 0usize);
    let mut seen_c = false;
    for s in word {
        match s {
            Symbol::A => {
                s1 += 1;
                s2 += 1;
            }
            Symbol::B => {
                if s1 == 0 {
                    return Ok(Verdict::reject(RejectKind::ExcessB));
                }
                s1 -= 1;
            }
            _ => {
                if !seen_c && s1 > 0 {
                    return Ok(Verdict::reject(RejectKind::ExcessA));
                }
                seen_c = true;
                if s2 == 0 {
                    return Ok(Verdict::reject(RejectKind::ExcessC));
                }
                s2 -= 1;
            }
        }
    }
    if s1 > 0 || s2 > 0 {
        return Ok(Verdict::reject(RejectKind::ExcessA));
    }
    Ok(Verdict::ACCEPT)
}

/// True when the word matches `a*b*c*`.
pub fn in_block_order(word: &Word) -> bool {
    let rank = |s: &Symbol| match s {
        Symbol::A => 0,
        Symbol::B => 1,
        _ => 2,
    };
    word.symbols().windows(2).all(|w| rank(&w[0]) <= rank(&w[1]))
}

/// All words over `alphabet` with length `1..=max_len` (or `0..=max_len`
/// with `include_empty`), shortest first and lexicographic (in alphabet
/// order) within each length.
pub fn enumerate_words(alphabet: &[Symbol], max_len: usize, include_empty: bool) -> Vec<Word> {
    let mut out = Vec::new();
    if include_empty {
        out.push(Word::empty());
    }
    if alphabet.is_empty() {
        return out;
    }
    let k = alphabet.len();
    for len in 1..=max_len {
        let mut digits = vec![0usize; len];
        loop {
            out.push(Word(digits.iter().map(|&d| alphabet[d]).collect()));
            // odometer increment, last position fastest
            let mut pos = len;
            let done = loop {
                if pos == 0 {
                    break true;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < k {
                    break false;
                }
                digits[pos] = 0;
            };
            if done {
                break;
            }
        }
    }
    out
}

/// `Σ_{k=1..max_len} |Σ|^k`.
pub fn word_count(alphabet_size: usize, max_len: usize) -> usize {
    (1..=max_len as u32).map(|k| alphabet_size.pow(k)).sum()
}

/// Matched pairs counted in prefix order: a `)` matches only when an
/// unmatched `(` precedes it.
pub fn matched_pairs_prefix(word: &Word) -> usize {
    let mut open = 0usize;
    let mut pairs = 0usize;
    for s in word {
        match s {
            Symbol::Open => open += 1,
            Symbol::Close if open > 0 => {
                open -= 1;
                pairs += 1;
            }
            _ => {}
        }
    }
    pairs
}

/// `min(#open, #close)`, the order-blind reading of the pair count.
pub fn matched_pairs_min(word: &Word) -> usize {
    word.count(Symbol::Open).min(word.count(Symbol::Close))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn l3(s: &str) -> Verdict {
        recognize_l3(&w(s)).unwrap()
    }

    #[test]
    fn l1_examples() {
        assert_eq!(recognize_l1(&w("aab")).unwrap(), Verdict::ACCEPT);
        assert_eq!(
            recognize_l1(&w("aaa")).unwrap(),
            Verdict::reject(RejectKind::NoReaction)
        );
        assert_eq!(
            recognize_l1(&w("")).unwrap(),
            Verdict::reject(RejectKind::NoReaction)
        );
        assert!(matches!(
            recognize_l1(&w("abc")),
            Err(Error::InvalidSymbol { symbol: 'c', .. })
        ));
    }

    #[test]
    fn l2_examples() {
        assert_eq!(recognize_l2(&w("(())")).unwrap(), Verdict::ACCEPT);
        assert_eq!(
            recognize_l2(&w(")(")).unwrap(),
            Verdict::reject(RejectKind::PopEmptyStack)
        );
        assert_eq!(
            recognize_l2(&w("((")).unwrap(),
            Verdict::reject(RejectKind::NonEmptyStack)
        );
        assert_eq!(recognize_l2(&w("")).unwrap(), Verdict::ACCEPT);
        assert!(recognize_l2(&w("(a)")).is_err());
    }

    #[test]
    fn l3_examples() {
        assert_eq!(l3("aabbcc"), Verdict::ACCEPT);
        assert_eq!(l3("abc"), Verdict::ACCEPT);
        assert_eq!(l3("aaabbcc"), Verdict::reject(RejectKind::ExcessA));
        assert_eq!(l3("bac"), Verdict::reject(RejectKind::BadOrder));
        assert_eq!(l3(""), Verdict::reject(RejectKind::BadOrder));
        assert!(recognize_l3(&w("ab(")).is_err());
    }

    #[test]
    fn l3_reject_kinds_follow_the_two_stack_machine() {
        // excess or deficit of one block around n = 2
        assert_eq!(l3("aabbbcc"), Verdict::reject(RejectKind::ExcessB));
        assert_eq!(l3("aabbccc"), Verdict::reject(RejectKind::ExcessC));
        assert_eq!(l3("abbcc"), Verdict::reject(RejectKind::ExcessB));
        assert_eq!(l3("aabcc"), Verdict::reject(RejectKind::ExcessA));
        assert_eq!(l3("aabbc"), Verdict::reject(RejectKind::ExcessA));
        // mixed failure: the third b already overflows
        assert_eq!(l3("aabbbc"), Verdict::reject(RejectKind::ExcessB));
        assert_eq!(l3("aabb"), Verdict::reject(RejectKind::ExcessA));
        assert_eq!(l3("bbcc"), Verdict::reject(RejectKind::ExcessB));
        assert_eq!(l3("c"), Verdict::reject(RejectKind::ExcessC));
        assert_eq!(l3("a"), Verdict::reject(RejectKind::ExcessA));
        assert_eq!(l3("abcc"), Verdict::reject(RejectKind::ExcessC));
        assert_eq!(l3("abca"), Verdict::reject(RejectKind::BadOrder));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_words(Language::L1.alphabet(), 8, false).len(), 510);
        assert_eq!(enumerate_words(Language::L3.alphabet(), 2, false).len(), 12);
        let l2 = enumerate_words(Language::L2.alphabet(), 10, false);
        assert_eq!(l2.len(), 2046);
        let dyck = l2
            .iter()
            .filter(|w| recognize_l2(w).unwrap().is_accept())
            .count();
        // C1 + C2 + C3 + C4 + C5
        assert_eq!(dyck, 1 + 2 + 5 + 14 + 42);
        assert_eq!(
            enumerate_words(Language::L1.alphabet(), 2, true)
                .iter()
                .map(Word::to_string)
                .collect::<Vec<_>>(),
            ["", "a", "b", "aa", "ab", "ba", "bb"]
        );
        assert_eq!(enumerate_words(&[], 3, false).len(), 0);
        assert_eq!(enumerate_words(Language::L1.alphabet(), 0, false).len(), 0);
    }

    #[test]
    fn pair_counts() {
        assert_eq!(matched_pairs_prefix(&w("()")), 1);
        assert_eq!(matched_pairs_prefix(&w(")(")), 0);
        assert_eq!(matched_pairs_min(&w(")(")), 1);
        assert_eq!(matched_pairs_prefix(&w("(()())")), 3);
    }

    #[test]
    fn verdict_json_shape() {
        let j = serde_json::to_string(&Verdict::reject(RejectKind::ExcessA)).unwrap();
        assert_eq!(j, r#"{"outcome":"Reject","reject_kind":"ExcessA"}"#);
        let j = serde_json::to_string(&Verdict::ACCEPT).unwrap();
        assert_eq!(j, r#"{"outcome":"Accept","reject_kind":null}"#);
        let bad: std::result::Result<Verdict, _> =
            serde_json::from_str(r#"{"outcome":"Accept","reject_kind":"ExcessA"}"#);
        assert!(bad.is_err());
    }
}
