//! Prompt assembly and the schema instructions embedded in it.

use serde_json::{json, Map, Value};

use crate::schema::{DesignElement, ReviewField};

const HEADER: &str = "Use the below schemas to convert any game text review into numerical values as per the schemas provided.
IMPORTANT: Your response MUST be exactly one valid JSON object, and nothing else.
Do not output multiple JSON blocks or repeated keys.
No comments, no trailing commas, no extra text.
Adhere to the following rules strictly:
1-If a review contains only symbols (e.g., \"\u{2665}\u{2665}\u{2665}\u{2665}\") or non-alphanumeric characters you should set all fields to 0 except for 'Language', which should be set to 11 (Other).
2-Do not infer positivity, negativity, or other attributes from special characters or emojis. Treat such reviews as uninformative unless meaningful words are present.
3-Ensure 'Recommended' is strictly 0 or 1.
4-All rating fields ( 'Gameplay', 'Graphics', etc.) must be integers between 0 and 5, in case you cant find sufficient data in the review that satisfies a specific field you should set that field to 0. Never give a 1 to 5 rating for any field if you cant find sufficient data in the review that supports it. NEVER MAKE UP DATA.
5-For binary fields (e.g., 'Is_Helpful', 'Is_Pro'), ensure values are strictly 0 or 1.
6-If a game review includes numerical ratings (e.g., \"gameplay is 7/10\"), you should normalize these ratings to the required range of 1-5 where 0 represents insufficient data. Never use the ratings in the review directly without ensuring they abide to the schema. For example, a review that states \"story is 7/10\" would equate to setting the value for the 'Story' field to 4/5.

For example if text review is: \"This game is amazing\" your output would look like this:
";

/// The worked example record, exactly as embedded in the prompt.
pub const EXAMPLE_OUTPUT: &str = "{\"Is_Helpful\": 0,\"Is_Pro\": 1,\"Is_Con\": 0,\"Is_Video\": 0,\"Is_Suggestion\": 0,\"Is_Bug\": 0,\"Language\": 2,\"Recommended\": 1,\"Gameplay\": 0,\"Graphics\": 0,\"Difficulty\": 0,\"Story\": 0,\"Audio\": 0,\"Avatar_Customization\": 0,\"Controls\": 0,\"Monetization_Model\": 0,\"Replayability\": 0,\"Community\": 0,\"Multiplayer\": 0,\"Spatial_Presence\": 0}";

const REVIEW_LEAD: &str = "Actual review to be tokenized is: \"";

/// Builds the full prompt. The review is escaped so it cannot close its
/// quoted slot; nothing is truncated.
pub fn build_prompt(review_text: &str, format_instructions: &str) -> String {
    let escaped = escape_review(review_text);
    let mut out = String::with_capacity(HEADER.len() + EXAMPLE_OUTPUT.len() + format_instructions.len() + escaped.len() + 64);
    out.push_str(HEADER);
    out.push_str(EXAMPLE_OUTPUT);
    out.push_str("\n\n");
    out.push_str(format_instructions);
    out.push_str("\n\n");
    out.push_str(REVIEW_LEAD);
    out.push_str(&escaped);
    out.push('"');
    out
}

fn escape_review(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '"' => s.push_str("\\\""),
            c => s.push(c),
        }
    }
    s
}

/// Recovers the review text from a prompt built by [`build_prompt`].
pub fn extract_review(prompt: &str) -> Option<String> {
    let start = prompt.rfind(REVIEW_LEAD)? + REVIEW_LEAD.len();
    let body = prompt[start..].strip_suffix('"')?;
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(chars.next()?);
        } else {
            out.push(c);
        }
    }
    Some(out)
}

fn rubric(what: &str, levels: [&str; 5]) -> String {
    format!(
        "0-5 rating of {what}:\n5 = (Excellent) {}\n4 = (Very good) {}\n3 = (Neutral) {}\n2 = (Poor) {}\n1 = (Very poor) {}\n0 = (Unknown) Insufficient data to evaluate.",
        levels[0], levels[1], levels[2], levels[3], levels[4]
    )
}

fn field_description(field: ReviewField) -> String {
    use DesignElement as E;
    match field {
        ReviewField::Recommended => "Whether the reviewer recommends the game (1) or not (0)".into(),
        ReviewField::IsHelpful => "Whether the content of the review is helpful to the developer (1) or not (0)".into(),
        ReviewField::IsPro => "Whether the review highlights a positive aspect of the game (1) or not (0)".into(),
        ReviewField::IsCon => "Whether the review identifies a negative aspect of the game (1) or not (0)".into(),
        ReviewField::IsVideo => "Whether the review includes a URL to a video review (1) or not (0)".into(),
        ReviewField::IsSuggestion => "Whether the review includes a suggestion on improving the game (1) or not (0)".into(),
        ReviewField::IsBug => "Whether the review describes a bug that occurs in the game (1) or not (0)".into(),
        ReviewField::Language => "1 = Chinese, 2 = English, 3 = Russian, 4 = Spanish, 5 = Portuguese, 6 = German, 7 = Japanese, 8 = French, 9 = Polish, 10 = Turkish, 11= Others".into(),
        ReviewField::Element(E::Gameplay) => rubric("gameplay quality", [
            "Offers a wide range of engaging and well-integrated mechanics that ensure fluid interaction and adaptability.",
            "Mechanics are enjoyable and functional, with minor inconsistencies.",
            "Solid mechanics, though limited in diversity or integration.",
            "Mechanics are clunky or lack coherence.",
            "Gameplay is frustrating, with severe flaws.",
        ]),
        ReviewField::Element(E::Graphics) => rubric("graphics quality", [
            "High fidelity, immersive environments with consistent visual quality.",
            "Impressive visuals with minor inconsistencies.",
            "Decent visuals but lacks attention to detail or polish.",
            "Outdated or inconsistent graphics.",
            "Distracting or poorly executed visuals.",
        ]),
        ReviewField::Element(E::Difficulty) => rubric("difficulty design", [
            "Challenge is fair, well paced and adapts to the player.",
            "Challenge is mostly fair with occasional spikes.",
            "Challenge is acceptable but mostly fixed.",
            "Challenge feels fixed and often unfair.",
            "Challenge is broken, trivial or impossible.",
        ]),
        ReviewField::Element(E::Story) => rubric("narrative depth and engagement", [
            "Compelling, deep narrative that drives engagement.",
            "Engaging story with minor weaknesses.",
            "Serviceable story with limited depth.",
            "Weak or incoherent story.",
            "Story actively detracts from the game.",
        ]),
        ReviewField::Element(E::Audio) => rubric("sound effects, music and overall auditory design", [
            "Outstanding, immersive sound and music.",
            "Strong audio with minor issues.",
            "Adequate audio without standout qualities.",
            "Repetitive or low quality audio.",
            "Broken or grating audio.",
        ]),
        ReviewField::Element(E::AvatarCustomization) => rubric("player character representation and customization", [
            "Deep, expressive customization options.",
            "Good customization with some limits.",
            "Basic customization.",
            "Very limited or poorly implemented customization.",
            "Customization is broken or frustrating.",
        ]),
        ReviewField::Element(E::Controls) => rubric("usability and responsiveness of input methods", [
            "Precise, responsive and intuitive controls.",
            "Good controls with minor issues.",
            "Usable controls with noticeable friction.",
            "Clunky or unresponsive controls.",
            "Controls make the game hard to play.",
        ]),
        ReviewField::Element(E::MonetizationModel) => rubric("revenue strategies such as in-app purchases", [
            "Fair monetization that respects the player.",
            "Mostly fair monetization with minor annoyances.",
            "Acceptable monetization with some pressure to pay.",
            "Aggressive or pay-to-win monetization.",
            "Exploitative monetization.",
        ]),
        ReviewField::Element(E::Replayability) => rubric("potential for repeated play sessions", [
            "Strong incentive to replay for a long time.",
            "Good replay value.",
            "Some replay value.",
            "Little reason to replay.",
            "No replay value at all.",
        ]),
        ReviewField::Element(E::Community) => rubric("interaction and engagement with other players", [
            "Welcoming, active and engaged community.",
            "Good community with minor issues.",
            "Average community.",
            "Toxic or inactive community.",
            "Hostile or dead community.",
        ]),
        ReviewField::Element(E::Multiplayer) => rubric("features supporting cooperative or competitive play", [
            "Robust, stable and enjoyable multiplayer.",
            "Good multiplayer with minor issues.",
            "Functional but limited multiplayer.",
            "Unstable or poorly designed multiplayer.",
            "Multiplayer is broken.",
        ]),
        ReviewField::Element(E::SpatialPresence) => rubric("the feeling of being inside the game environment", [
            "Deeply immersive sense of presence.",
            "Strong presence with minor breaks.",
            "Some sense of presence.",
            "Weak presence, frequently broken.",
            "No sense of presence at all.",
        ]),
    }
}

/// JSON schema of the quantified record.
pub fn output_schema() -> Value {
    let mut props = Map::new();
    for f in ReviewField::all() {
        let (lo, hi) = (*f.range().start(), *f.range().end());
        props.insert(
            f.name().to_string(),
            json!({
                "title": f.name().replace('_', " "),
                "description": field_description(f),
                "type": "integer",
                "minimum": lo,
                "maximum": hi,
            }),
        );
    }
    let required: Vec<&str> = ReviewField::all().map(|f| f.name()).collect();
    json!({ "properties": props, "required": required })
}

/// Output-format instructions in the style generated for pydantic parsers.
pub fn format_instructions() -> String {
    let schema = serde_json::to_string(&output_schema()).expect("schema serializes");
    format!(
        "The output should be formatted as a JSON instance that conforms to the JSON schema below.\n\n\
As an example, for the schema {{\"properties\": {{\"foo\": {{\"title\": \"Foo\", \"description\": \"a list of strings\", \"type\": \"array\", \"items\": {{\"type\": \"string\"}}}}}}, \"required\": [\"foo\"]}}\n\
the object {{\"foo\": [\"bar\", \"baz\"]}} is a well-formatted instance of the schema. The object {{\"properties\": {{\"foo\": [\"bar\", \"baz\"]}}}} is not well-formatted.\n\n\
Here is the output schema:\n```\n{schema}\n```"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{validate_json_object, Language};

    #[test]
    fn contains_worked_example() {
        let p = build_prompt("This game is amazing", "FI");
        assert!(p.contains(EXAMPLE_OUTPUT));
        assert!(p.contains("\nFI\n"));
        assert!(p.ends_with("Actual review to be tokenized is: \"This game is amazing\""));
        for rule in 1..=6 {
            assert!(p.contains(&format!("\n{rule}-")), "rule {rule}");
        }
        // The embedded example is itself a valid record.
        let obj: serde_json::Map<String, Value> = serde_json::from_str(EXAMPLE_OUTPUT).unwrap();
        let s = validate_json_object(&obj).unwrap();
        assert_eq!(s.language(), Language::English);
        assert_eq!(s.to_json().replace(", ", ",").replace(": ", ":"), EXAMPLE_OUTPUT.replace(": ", ":"));
    }

    #[test]
    fn quotes_are_escaped() {
        let review = r#"He said "10/10" \o/"#;
        let p = build_prompt(review, "");
        assert!(p.contains(r#""He said \"10/10\" \\o/""#));
        assert_eq!(extract_review(&p).unwrap(), review);
    }

    #[test]
    fn empty_instructions_still_well_formed() {
        let p = build_prompt("ok", "");
        assert!(p.contains("\n\n\n\nActual review"));
        assert_eq!(extract_review(&p).unwrap(), "ok");
    }

    #[test]
    fn template_markers_in_review_are_inert() {
        let review = "{review} {format_instructions} Actual review to be tokenized is: \"x";
        let p = build_prompt(review, "{review}");
        assert_eq!(extract_review(&p).unwrap(), review);
        assert!(p.contains(review.replace('"', "\\\"").as_str()));
    }

    #[test]
    fn schema_lists_every_field() {
        let schema = output_schema();
        assert_eq!(schema["required"].as_array().unwrap().len(), ReviewField::COUNT);
        assert!(format_instructions().contains("\"Spatial_Presence\""));
    }
}
