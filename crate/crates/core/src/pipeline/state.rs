use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Gathering,
    Generating,
    Reviewing,
    Compiling,
    Live,
    Failed,
}

impl SessionStatus {
    pub const ALL: [SessionStatus; 6] = [
        SessionStatus::Gathering,
        SessionStatus::Generating,
        SessionStatus::Reviewing,
        SessionStatus::Compiling,
        SessionStatus::Live,
        SessionStatus::Failed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SessionStatus::Gathering => "gathering",
            SessionStatus::Generating => "generating",
            SessionStatus::Reviewing => "reviewing",
            SessionStatus::Compiling => "compiling",
            SessionStatus::Live => "live",
            SessionStatus::Failed => "failed",
        }
    }

    /// Whether a designer message may be handled in this state.
    pub fn accepts_messages(self) -> bool {
        matches!(self, SessionStatus::Gathering | SessionStatus::Live | SessionStatus::Failed)
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The transition relation. Live to Live (a parameter update) does not go through here
/// because it emits no state change.
pub fn is_legal(from: SessionStatus, to: SessionStatus) -> bool {
    use SessionStatus::*;
    matches!(
        (from, to),
        (Gathering, Generating)
            | (Generating, Reviewing)
            | (Generating, Compiling)
            | (Generating, Failed)
            | (Reviewing, Compiling)
            | (Reviewing, Failed)
            | (Compiling, Live)
            | (Compiling, Failed)
            | (Live, Generating)
            | (Failed, Gathering)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn happy_path_is_legal() {
        use SessionStatus::*;
        let path = [Gathering, Generating, Reviewing, Compiling, Live, Generating, Reviewing, Compiling, Failed, Gathering];
        for w in path.windows(2) {
            assert!(is_legal(w[0], w[1]), "{} -> {}", w[0], w[1]);
        }
        assert!(!is_legal(Gathering, Live));
        assert!(!is_legal(Failed, Live));
        assert!(!is_legal(Live, Gathering));
    }
}
