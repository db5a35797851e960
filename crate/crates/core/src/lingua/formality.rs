use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::LinguaError;

/// Scores text formality on 0-100.
pub trait FormalityScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64, LinguaError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Noun,
    Adjective,
    Preposition,
    Article,
    Pronoun,
    Verb,
    Adverb,
    Interjection,
    Conjunction,
    Numeral,
}

const ARTICLES: &[&str] = &["a", "an", "the"];
const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
    "during", "before", "after", "above", "below", "to", "from", "up", "down", "over", "under",
    "across", "among", "around", "behind", "beyond", "despite", "except", "inside", "near", "onto",
    "outside", "per", "since", "toward", "towards", "upon", "within", "without", "via", "amid",
    "throughout", "pursuant", "notwithstanding", "regarding", "concerning", "according",
];
const PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours",
    "they", "them", "their", "theirs", "this", "that", "these", "those", "who", "whom", "whose",
    "what", "which", "someone", "somebody", "anyone", "everyone", "nobody", "something",
    "anything", "everything", "nothing", "u", "ya", "it's", "i'm", "you're", "we're", "they're",
    "he's", "she's", "that's", "i've", "you've", "i'll", "you'll",
];
const INTERJECTIONS: &[&str] = &[
    "oh", "wow", "hey", "lol", "omg", "yeah", "yep", "nope", "ugh", "hmm", "huh", "ok", "okay",
    "dude", "yo", "haha", "damn", "gosh", "duh", "ah", "oops", "whoa", "yay", "nah", "lmao", "bro",
];
const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "yet", "because", "although", "though", "if", "unless", "while",
    "whereas", "than", "as", "whether",
];
const VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has",
    "had", "will", "would", "shall", "should", "can", "could", "may", "might", "must", "gonna",
    "wanna", "gotta", "ain't", "don't", "doesn't", "didn't", "can't", "won't", "isn't", "aren't",
    "wasn't", "get", "got", "go", "goes", "went", "say", "says", "said", "know", "knew", "think",
    "thought", "make", "made", "see", "saw", "come", "came", "take", "took", "want", "look",
    "use", "find", "give", "gave", "tell", "told", "let", "put", "keep", "seem", "seems", "feel",
    "felt", "believe", "believes", "show", "shows", "claim", "claims", "spread", "share",
];
const ADVERBS: &[&str] = &[
    "not", "very", "really", "just", "so", "too", "also", "here", "there", "now", "then", "never",
    "always", "often", "still", "already", "pretty", "super", "soon", "again", "even", "quite",
    "maybe", "perhaps", "totally", "literally", "basically", "however", "thus", "therefore",
    "hence", "only", "well", "much", "kinda", "sorta",
];
const ADJECTIVES: &[&str] = &[
    "good", "bad", "cool", "great", "nice", "new", "old", "big", "small", "true", "false", "real",
    "fake", "important", "public", "legal", "many", "several", "other", "same", "high", "low",
    "long", "short", "full", "free", "sure", "wrong", "right", "safe", "awesome", "crazy",
];
const LY_NOUNS: &[&str] = &["family", "supply", "reply", "ally", "rally", "belly", "assembly", "italy", "july"];
const LY_ADJECTIVES: &[&str] = &["likely", "unlikely", "early", "daily", "weekly", "monthly", "friendly", "only"];
const MODALS: &[&str] = &[
    "will", "would", "shall", "should", "can", "could", "may", "might", "must", "to", "gonna",
    "wanna", "gotta", "don't", "doesn't", "didn't", "can't", "won't",
];

fn suffix_tag(w: &str) -> Option<Tag> {
    const NOUN: &[&str] = &[
        "tion", "sion", "ment", "ness", "ity", "ism", "ance", "ence", "ship", "hood", "dom", "ist",
        "ure", "age", "ee", "ery",
    ];
    const ADJ: &[&str] = &["ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ish", "ary", "ent", "ant"];
    const VERB: &[&str] = &["ize", "ise", "ify", "ate", "ing", "ed"];
    if w.len() > 3 && w.ends_with("ly") {
        if LY_NOUNS.contains(&w) {
            return Some(Tag::Noun);
        }
        if LY_ADJECTIVES.contains(&w) {
            return Some(Tag::Adjective);
        }
        return Some(Tag::Adverb);
    }
    let longer = |s: &&str| w.len() > s.len() + 2 && w.ends_with(*s);
    if NOUN.iter().any(longer) {
        Some(Tag::Noun)
    } else if ADJ.iter().any(longer) {
        Some(Tag::Adjective)
    } else if VERB.iter().any(longer) {
        Some(Tag::Verb)
    } else if let Some(stem) = w.strip_suffix('s') {
        suffix_tag(stem).filter(|t| *t != Tag::Adverb)
    } else {
        None
    }
}

/// The Heylighen-Dewaele F-score over a small rule-based tagger.
///
/// F = (noun + adjective + preposition + article - pronoun - verb - adverb
/// - interjection + 100) / 2, with each class as a percentage of all tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeylighenDewaele;

impl HeylighenDewaele {
    pub fn tag(&self, text: &str) -> Vec<(String, Tag)> {
        let mut out: Vec<(String, Tag)> = Vec::new();
        for raw in text.split_whitespace() {
            let w: String = raw
                .trim_matches(|c: char| !c.is_alphanumeric())
                .replace('’', "'")
                .to_lowercase();
            if w.is_empty() {
                continue;
            }
            let prev = out.last().map(|(word, tag)| (word.as_str(), *tag));
            let tag = Self::tag_word(&w, prev);
            out.push((w, tag));
        }
        out
    }

    fn tag_word(w: &str, prev: Option<(&str, Tag)>) -> Tag {
        if w.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.') {
            return Tag::Numeral;
        }
        for (list, tag) in [
            (ARTICLES, Tag::Article),
            (PRONOUNS, Tag::Pronoun),
            (INTERJECTIONS, Tag::Interjection),
            (CONJUNCTIONS, Tag::Conjunction),
            (ADVERBS, Tag::Adverb),
        ] {
            if list.contains(&w) {
                return tag;
            }
        }
        if ADJECTIVES.contains(&w) {
            return Tag::Adjective;
        }
        if PREPOSITIONS.contains(&w) {
            return Tag::Preposition;
        }
        let after_determiner = matches!(prev, Some((_, Tag::Article | Tag::Adjective)));
        if VERBS.contains(&w) && !after_determiner {
            return Tag::Verb;
        }
        if let Some(tag) = suffix_tag(w) {
            if tag == Tag::Verb && after_determiner {
                return Tag::Noun;
            }
            return tag;
        }
        match prev {
            Some((p, _)) if MODALS.contains(&p) => Tag::Verb,
            Some((_, Tag::Pronoun)) if !after_determiner => {
                if w.ends_with('s') || prev.is_some_and(|(p, _)| SUBJECTS.contains(&p)) {
                    Tag::Verb
                } else {
                    Tag::Noun
                }
            }
            _ => Tag::Noun,
        }
    }
}

const SUBJECTS: &[&str] = &["i", "you", "we", "they", "he", "she", "it", "u"];

impl FormalityScorer for HeylighenDewaele {
    fn score(&self, text: &str) -> Result<f64, LinguaError> {
        let tags = self.tag(text);
        if tags.is_empty() {
            return Err(LinguaError::EmptyText);
        }
        let n = tags.len() as f64;
        let pct = |t: Tag| 100.0 * tags.iter().filter(|(_, x)| *x == t).count() as f64 / n;
        let formal = pct(Tag::Noun) + pct(Tag::Adjective) + pct(Tag::Preposition) + pct(Tag::Article);
        let contextual = pct(Tag::Pronoun) + pct(Tag::Verb) + pct(Tag::Adverb) + pct(Tag::Interjection);
        Ok(((formal - contextual + 100.0) / 2.0).clamp(0.0, 100.0))
    }
}

/// Runs an external command that reads the text on stdin and prints a
/// score on stdout.
#[derive(Debug, Clone)]
pub struct ProcessScorer {
    pub program: String,
    pub args: Vec<String>,
}

impl ProcessScorer {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ProcessScorer {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl FormalityScorer for ProcessScorer {
    fn score(&self, text: &str) -> Result<f64, LinguaError> {
        let unavailable = |m: String| LinguaError::ScorerUnavailable(format!("{}: {m}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| unavailable(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(text.as_bytes())
            .map_err(|e| unavailable(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| unavailable(e.to_string()))?;
        if !out.status.success() {
            return Err(unavailable(format!("exited with {}", out.status)));
        }
        let s = String::from_utf8_lossy(&out.stdout);
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| unavailable(format!("unparseable output `{}`", s.trim())))?;
        if !(0.0..=100.0).contains(&v) {
            return Err(unavailable(format!("score {v} outside 0-100")));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(text: &str) -> Vec<Tag> {
        HeylighenDewaele.tag(text).into_iter().map(|(_, t)| t).collect()
    }

    #[test]
    fn formal_extreme() {
        let s = HeylighenDewaele.score("The report of the institute on the vaccine").unwrap();
        assert_eq!(s, 100.0);
    }

    #[test]
    fn deterministic() {
        let t = "The claim was refuted by several independent fact checkers.";
        assert_eq!(HeylighenDewaele.score(t).unwrap(), HeylighenDewaele.score(t).unwrap());
    }

    #[test]
    fn legal_versus_slang() {
        use Tag::*;
        let legal = "The lessee shall indemnify the lessor pursuant to the provisions of the agreement.";
        assert_eq!(
            tags(legal),
            vec![
                Article, Noun, Verb, Verb, Article, Noun, Preposition, Preposition, Article, Noun,
                Preposition, Article, Noun
            ]
        );
        // formal 4 nouns + 4 articles + 3 prepositions, contextual 2 verbs, of 13
        let f = (100.0 * 11.0 / 13.0 - 100.0 * 2.0 / 13.0 + 100.0) / 2.0;
        assert!((HeylighenDewaele.score(legal).unwrap() - f).abs() < 1e-9);

        let slang = "lol yeah i totally think it's gonna be so cool dude";
        assert_eq!(
            tags(slang),
            vec![
                Interjection, Interjection, Pronoun, Adverb, Verb, Pronoun, Verb, Verb, Adverb,
                Adjective, Interjection
            ]
        );
        // formal 1 adjective, contextual 10, of 11
        let s = (100.0 * 1.0 / 11.0 - 100.0 * 10.0 / 11.0 + 100.0) / 2.0;
        assert!((HeylighenDewaele.score(slang).unwrap() - s).abs() < 1e-9);
        assert!(f > s);
    }

    #[test]
    fn missing_process() {
        let p = ProcessScorer::new("/nonexistent/formality-model", Vec::<String>::new());
        assert!(matches!(p.score("text"), Err(LinguaError::ScorerUnavailable(_))));
    }
}
