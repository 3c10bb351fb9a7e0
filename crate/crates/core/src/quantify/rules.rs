//! Deterministic keyword quantifier used in place of a language model for
//! hermetic runs and tests.

use std::sync::LazyLock;

use regex::Regex;

use crate::schema::{normalize_explicit_rating, DesignElement, Language, ReviewField, ReviewScores};

const POSITIVE: &[&str] = &[
    "amazing", "awesome", "best", "brilliant", "excellent", "fantastic", "fun", "good", "great",
    "love", "loved", "masterpiece", "perfect", "recommend", "recommended", "wonderful",
];
const NEGATIVE: &[&str] = &[
    "awful", "bad", "boring", "broken", "disappointing", "garbage", "hate", "refund", "terrible",
    "trash", "unplayable", "waste", "worst",
];
const BUG: &[&str] = &["bug", "bugs", "buggy", "crash", "crashes", "crashed", "glitch", "glitches", "freeze", "freezes"];
const SUGGESTION: &[&str] = &["should add", "please add", "please fix", "suggest", "i wish", "would be nice"];
const VIDEO: &[&str] = &["youtube.com", "youtu.be", "twitch.tv"];

const ELEMENT_WORDS: &[(DesignElement, &[&str])] = &[
    (DesignElement::Gameplay, &["gameplay", "mechanics"]),
    (DesignElement::Graphics, &["graphics", "visuals", "art"]),
    (DesignElement::Difficulty, &["difficulty"]),
    (DesignElement::Story, &["story", "plot", "narrative"]),
    (DesignElement::Audio, &["audio", "sound", "music", "soundtrack"]),
    (DesignElement::AvatarCustomization, &["customization", "customisation", "avatar"]),
    (DesignElement::Controls, &["controls", "control"]),
    (DesignElement::MonetizationModel, &["monetization", "microtransactions", "monetisation"]),
    (DesignElement::Replayability, &["replayability", "replay"]),
    (DesignElement::Community, &["community"]),
    (DesignElement::Multiplayer, &["multiplayer", "co-op", "coop"]),
    (DesignElement::SpatialPresence, &["immersion", "presence"]),
];

// Latin-script languages: marker characters and common words.
const LATIN_HINTS: &[(Language, &str, &[&str])] = &[
    (Language::Spanish, "ñ¿¡", &["juego", "muy", "pero", "es", "el", "los", "bueno"]),
    (Language::Portuguese, "ãõ", &["jogo", "muito", "não", "bom", "é", "um", "você"]),
    (Language::German, "ßäöü", &["spiel", "das", "und", "nicht", "ist", "sehr", "gut"]),
    (Language::French, "èêàç", &["jeu", "très", "c'est", "le", "les", "pas", "est"]),
    (Language::Polish, "ąęłśźżń", &["gra", "jest", "nie", "bardzo", "się", "dobra"]),
    (Language::Turkish, "ğşı", &["oyun", "çok", "güzel", "bir", "ve", "değil"]),
];

static RATING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?)\s*/\s*(\d+(?:\.\d+)?)").expect("valid regex"));
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{L}\p{N}'\-]+").expect("valid regex"));

fn detect_language(text: &str) -> Language {
    let mut kana = false;
    let mut han = false;
    let mut cyrillic = false;
    let mut latin = false;
    for c in text.chars() {
        match c as u32 {
            0x3040..=0x30ff => kana = true,
            0x4e00..=0x9fff | 0x3400..=0x4dbf => han = true,
            0x0400..=0x04ff => cyrillic = true,
            _ if c.is_ascii_alphabetic() || ('\u{c0}'..='\u{24f}').contains(&c) => latin = true,
            _ => {}
        }
    }
    if kana {
        return Language::Japanese;
    }
    if han {
        return Language::Chinese;
    }
    if cyrillic {
        return Language::Russian;
    }
    if !latin {
        return Language::Other;
    }
    let lower = text.to_lowercase();
    let words: Vec<&str> = WORD.find_iter(&lower).map(|m| m.as_str()).collect();
    let mut best = (0usize, Language::English);
    for (lang, marks, hints) in LATIN_HINTS {
        let score = lower.chars().filter(|c| marks.contains(*c)).count() * 2
            + words.iter().filter(|w| hints.contains(w)).count();
        if score > best.0 {
            best = (score, *lang);
        }
    }
    best.1
}

fn nearest_element(before: &str) -> Option<DesignElement> {
    // The keyword must sit within the few words preceding the rating.
    let words: Vec<&str> = WORD.find_iter(before).map(|m| m.as_str()).collect();
    words.iter().rev().take(4).find_map(|w| {
        ELEMENT_WORDS
            .iter()
            .find(|(_, kws)| kws.contains(w))
            .map(|(e, _)| *e)
    })
}

/// Quantifies sanitized text by fixed keyword rules.
pub fn rule_based_quantifier(text: &str) -> ReviewScores {
    if !text.chars().any(char::is_alphanumeric) {
        return ReviewScores::empty(Language::Other);
    }
    let lower = text.to_lowercase();
    let mut s = ReviewScores::empty(detect_language(text));
    let words: Vec<&str> = WORD.find_iter(&lower).map(|m| m.as_str()).collect();
    let count = |list: &[&str]| words.iter().filter(|w| list.contains(w)).count();
    let has_phrase = |list: &[&str]| list.iter().any(|p| lower.contains(p));

    let pos = count(POSITIVE);
    let neg = count(NEGATIVE) + usize::from(lower.contains("not recommend"));
    let set = |s: &mut ReviewScores, f, on: bool| s.set(f, u8::from(on)).expect("binary value");
    set(&mut s, ReviewField::IsPro, pos > 0);
    set(&mut s, ReviewField::IsCon, neg > 0);
    set(&mut s, ReviewField::Recommended, pos > neg);
    let bug = count(BUG) > 0;
    let suggestion = has_phrase(SUGGESTION);
    set(&mut s, ReviewField::IsBug, bug);
    set(&mut s, ReviewField::IsSuggestion, suggestion);
    set(&mut s, ReviewField::IsVideo, has_phrase(VIDEO));
    set(&mut s, ReviewField::IsHelpful, bug || suggestion);

    for cap in RATING.captures_iter(&lower) {
        let whole = cap.get(0).expect("match");
        let (Ok(num), Ok(den)) = (cap[1].parse::<f64>(), cap[2].parse::<f64>()) else {
            continue;
        };
        let Ok(score) = normalize_explicit_rating(num, den) else {
            continue;
        };
        if let Some(e) = nearest_element(&lower[..whole.start()]) {
            s.set(ReviewField::Element(e), score).expect("normalized score in range");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = rule_based_quantifier("story is 7/10");
        assert_eq!(s.element(DesignElement::Story), 4);

        let s = rule_based_quantifier("This game is amazing");
        assert!(s.flag(ReviewField::IsPro) && s.flag(ReviewField::Recommended));
        assert_eq!(s.language(), Language::English);
        assert!(DesignElement::ALL.iter().all(|e| s.element(*e) == 0));
        assert!(!s.flag(ReviewField::IsHelpful) && !s.flag(ReviewField::IsCon));

        let s = rule_based_quantifier("\u{2665}\u{2665}\u{2665}\u{2665}");
        assert_eq!(s, ReviewScores::empty(Language::Other));
    }

    #[test]
    fn languages() {
        assert_eq!(detect_language("这个游戏很好玩"), Language::Chinese);
        assert_eq!(detect_language("このゲームは面白い"), Language::Japanese);
        assert_eq!(detect_language("Отличная игра"), Language::Russian);
        assert_eq!(detect_language("Das Spiel ist sehr gut"), Language::German);
        assert_eq!(detect_language("El juego es muy bueno"), Language::Spanish);
        assert_eq!(detect_language("O jogo é muito bom, não"), Language::Portuguese);
        assert_eq!(detect_language("Le jeu est très bien"), Language::French);
        assert_eq!(detect_language("Ta gra jest bardzo dobra"), Language::Polish);
        assert_eq!(detect_language("Bu oyun çok güzel"), Language::Turkish);
        assert_eq!(detect_language("great fun"), Language::English);
        assert_eq!(detect_language("정말 재미있어요"), Language::Other);
    }

    #[test]
    fn ratings_and_flags() {
        let s = rule_based_quantifier("Graphics 10/10, gameplay 2/5 but it crashes. Please add a map");
        assert_eq!(s.element(DesignElement::Graphics), 5);
        assert_eq!(s.element(DesignElement::Gameplay), 2);
        assert!(s.flag(ReviewField::IsBug) && s.flag(ReviewField::IsSuggestion) && s.flag(ReviewField::IsHelpful));
        // Rating without a nearby element keyword is ignored; invalid fraction too.
        let s = rule_based_quantifier("I give it 9/10. story 12/10");
        assert!(DesignElement::ALL.iter().all(|e| s.element(*e) == 0));
        let s = rule_based_quantifier("Terrible, boring, would not recommend");
        assert!(s.flag(ReviewField::IsCon) && !s.flag(ReviewField::Recommended));
    }
}
