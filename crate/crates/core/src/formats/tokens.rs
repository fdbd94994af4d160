/// Token counting for prompt budgeting. Exact tokenizers plug in through
/// this trait; the heuristic needs no vocabulary.
pub trait TokenCounter: Send + Sync {
    fn count(&self, s: &str) -> usize;
}

/// `ceil(chars / 4)` plus one token per newline.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicCounter;

impl TokenCounter for HeuristicCounter {
    fn count(&self, s: &str) -> usize {
        token_estimate(s)
    }
}

pub fn token_estimate(s: &str) -> usize {
    let chars = s.chars().count();
    chars.div_ceil(4) + s.matches('\n').count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heuristic_examples() {
        assert_eq!(token_estimate(""), 0);
        assert_eq!(token_estimate("abcd"), 1);
        assert_eq!(token_estimate("abcde"), 2);
        assert_eq!(token_estimate("ab\ncd"), 3);
    }
}
