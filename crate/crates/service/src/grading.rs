//! Answer grading.

/// Decides whether a submitted answer matches the card's answer.
pub trait Grader: Send + Sync {
    fn grade(&self, submitted: &str, expected: &str) -> bool;
}

/// Exact match after trimming and collapsing inner whitespace, optionally case-folded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizedMatch {
    pub case_sensitive: bool,
}

impl NormalizedMatch {
    pub fn normalize(&self, text: &str) -> String {
        let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if self.case_sensitive {
            joined
        } else {
            joined.to_lowercase()
        }
    }
}

impl Grader for NormalizedMatch {
    fn grade(&self, submitted: &str, expected: &str) -> bool {
        let expected = self.normalize(expected);
        !expected.is_empty() && self.normalize(submitted) == expected
    }
}
