use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Which labeling rule (if any) a post triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelSource {
    #[serde(rename = "D1_DEPRESSED")]
    D1Depressed,
    #[serde(rename = "D2_NON_DEPRESSED")]
    D2NonDepressed,
    #[serde(rename = "D3_CANDIDATE")]
    D3Candidate,
    #[serde(rename = "NONE")]
    None,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::D1Depressed => "D1_DEPRESSED",
            LabelSource::D2NonDepressed => "D2_NON_DEPRESSED",
            LabelSource::D3Candidate => "D3_CANDIDATE",
            LabelSource::None => "NONE",
        }
    }
}

pub const DEFAULT_DIAGNOSIS_PATTERNS: [&str; 3] = [
    "i'm diagnosed with depression",
    "i am diagnosed with depression",
    "i was diagnosed with depression",
];

pub const DEFAULT_DEPRESSION_SUBSTRING: &str = "depress";

/// Anchor-tweet rules. Patterns and substrings are matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRuleSet {
    pub diagnosis_patterns: Vec<String>,
    pub exclusion_substring: String,
    pub candidate_substring: String,
}

impl Default for AnchorRuleSet {
    fn default() -> Self {
        AnchorRuleSet {
            diagnosis_patterns: DEFAULT_DIAGNOSIS_PATTERNS.iter().map(|s| s.to_string()).collect(),
            exclusion_substring: DEFAULT_DEPRESSION_SUBSTRING.to_string(),
            candidate_substring: DEFAULT_DEPRESSION_SUBSTRING.to_string(),
        }
    }
}

impl AnchorRuleSet {
    /// Default patterns plus `extra` (deduplicated, lowercased).
    pub fn with_extra_patterns<I, S>(extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut rules = AnchorRuleSet::default();
        for p in extra {
            let p = p.as_ref().trim().to_lowercase();
            if !p.is_empty() && !rules.diagnosis_patterns.contains(&p) {
                rules.diagnosis_patterns.push(p);
            }
        }
        rules
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.diagnosis_patterns.is_empty() {
            return Err(CorpusError::InvalidRules("diagnosis_patterns must not be empty".into()));
        }
        if self.diagnosis_patterns.iter().any(|p| p.trim().is_empty()) {
            return Err(CorpusError::InvalidRules("diagnosis patterns must be non-blank".into()));
        }
        if self.candidate_substring.trim().is_empty() {
            return Err(CorpusError::InvalidRules("candidate_substring must be non-blank".into()));
        }
        if self.exclusion_substring.to_lowercase() != self.candidate_substring.to_lowercase() {
            return Err(CorpusError::InvalidRules(
                "exclusion_substring must equal candidate_substring".into(),
            ));
        }
        Ok(())
    }
}

/// Half-open UTC interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, CorpusError> {
        if end <= start {
            return Err(CorpusError::InvalidRules(format!(
                "time window end {end} must be after start {start}"
            )));
        }
        Ok(TimeWindow { start, end })
    }

    /// December 2016, the collection month used for the non-depressed and
    /// candidate subsets of the original Twitter corpus.
    pub fn december_2016() -> Self {
        TimeWindow {
            start: "2016-12-01T00:00:00Z".parse().unwrap(),
            end: "2017-01-01T00:00:00Z".parse().unwrap(),
        }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

/// Apply the anchor rules to one post. Precedence is D1 > D3 > D2 > NONE.
///
/// Rules are assumed validated; the only runtime error is blank text.
pub fn classify_anchor(
    text: &str,
    created_at: DateTime<Utc>,
    rules: &AnchorRuleSet,
    window: &TimeWindow,
) -> Result<LabelSource, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText { post_id: None });
    }
    let lower = text.to_lowercase();
    if rules
        .diagnosis_patterns
        .iter()
        .any(|p| lower.contains(&p.to_lowercase()))
    {
        return Ok(LabelSource::D1Depressed);
    }
    if lower.contains(&rules.candidate_substring.to_lowercase()) {
        return Ok(LabelSource::D3Candidate);
    }
    // Absence of the exclusion substring is implied here: it equals the
    // candidate substring, which did not match.
    if window.contains(created_at) {
        return Ok(LabelSource::D2NonDepressed);
    }
    Ok(LabelSource::None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn in_window() -> DateTime<Utc> {
        "2016-12-15T12:00:00Z".parse().unwrap()
    }

    fn out_of_window() -> DateTime<Utc> {
        "2015-03-01T00:00:00Z".parse().unwrap()
    }

    fn classify(text: &str, t: DateTime<Utc>) -> LabelSource {
        classify_anchor(text, t, &AnchorRuleSet::default(), &TimeWindow::december_2016()).unwrap()
    }

    #[test]
    fn diagnosis_phrase_is_d1() {
        assert_eq!(classify("I'm diagnosed with depression", in_window()), LabelSource::D1Depressed);
        assert_eq!(classify("I'M DIAGNOSED WITH DEPRESSION", out_of_window()), LabelSource::D1Depressed);
    }

    #[test]
    fn clean_text_in_window_is_d2() {
        assert_eq!(classify("lovely sunny morning", in_window()), LabelSource::D2NonDepressed);
        assert_eq!(classify("lovely sunny morning", out_of_window()), LabelSource::None);
    }

    #[test]
    fn depress_substring_is_d3() {
        assert_eq!(classify("this weather is depressing", in_window()), LabelSource::D3Candidate);
        assert_eq!(classify("this weather is depressing", out_of_window()), LabelSource::D3Candidate);
    }

    #[test]
    fn blank_text_rejected() {
        let r = classify_anchor("  ", in_window(), &AnchorRuleSet::default(), &TimeWindow::december_2016());
        assert!(matches!(r, Err(CorpusError::EmptyText { .. })));
    }

    #[test]
    fn window_is_half_open() {
        let w = TimeWindow::december_2016();
        assert!(w.contains(w.start));
        assert!(!w.contains(w.end));
        assert!(TimeWindow::new(w.end, w.start).is_err());
    }

    #[test]
    fn rule_validation() {
        let mut r = AnchorRuleSet::default();
        assert!(r.validate().is_ok());
        r.exclusion_substring = "sad".into();
        assert!(r.validate().is_err());
        let r = AnchorRuleSet { diagnosis_patterns: vec![], ..AnchorRuleSet::default() };
        assert!(r.validate().is_err());
        let r = AnchorRuleSet::with_extra_patterns(["My Depression Diagnosis", "i'm diagnosed with depression"]);
        assert_eq!(r.diagnosis_patterns.len(), 4);
    }

    proptest! {
        #[test]
        fn diagnosis_match_never_yields_d2_or_d3(prefix in "[a-z ]{0,20}", suffix in "[a-z ]{0,20}", pick in 0usize..3) {
            let text = format!("{prefix}{}{suffix} depressed", DEFAULT_DIAGNOSIS_PATTERNS[pick]);
            prop_assert_eq!(classify(&text, in_window()), LabelSource::D1Depressed);
        }
    }
}
