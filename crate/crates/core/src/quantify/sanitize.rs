use super::DiscardReason;

/// Removes control characters (newline and tab survive) and replacement
/// characters, then trims. Symbol-only text is kept.
pub fn sanitize_review(text: &str) -> Result<String, DiscardReason> {
    let mut removed_invalid = false;
    let cleaned: String = text
        .chars()
        .filter(|&c| {
            let bad = (c.is_control() && c != '\n' && c != '\t') || c == '\u{fffd}';
            removed_invalid |= bad;
            !bad
        })
        .collect();
    let trimmed = cleaned.trim();
    if trimmed.is_empty() {
        return Err(if removed_invalid {
            DiscardReason::InvalidCharacters
        } else {
            DiscardReason::EmptyAfterSanitize
        });
    }
    Ok(trimmed.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(sanitize_review("  Great game!\u{0000} ").unwrap(), "Great game!");
        assert_eq!(sanitize_review(""), Err(DiscardReason::EmptyAfterSanitize));
        assert_eq!(sanitize_review(" \n\t "), Err(DiscardReason::EmptyAfterSanitize));
        assert_eq!(sanitize_review("\u{2665}\u{2665}\u{2665}\u{2665}").unwrap(), "\u{2665}\u{2665}\u{2665}\u{2665}");
        assert_eq!(sanitize_review("\u{0001}\u{fffd}"), Err(DiscardReason::InvalidCharacters));
        assert_eq!(sanitize_review("line one\nline\ttwo\r").unwrap(), "line one\nline\ttwo");
    }
}
