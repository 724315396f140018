use std::fmt;
use std::hash::{Hash, Hasher};

use super::Message;

/// Public transcript: the messages broadcast so far.
///
/// Alongside the messages it tracks the running sum of message values, a
/// sufficient statistic for the bit-tally protocols in the zoo, and how
/// many messages are not bits.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transcript {
    messages: Vec<Message>,
    tally: u64,
    non_bits: usize,
}

/// Length and running message sum of a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrefixSummary {
    pub len: usize,
    pub tally: u64,
}

impl PrefixSummary {
    pub fn extended(self, m: Message) -> Self {
        Self {
            len: self.len + 1,
            tally: self.tally + m.0 as u64,
        }
    }
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: impl IntoIterator<Item = u32>) -> Self {
        values.into_iter().map(Message).collect()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn tally(&self) -> u64 {
        self.tally
    }

    /// Whether every message is 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.non_bits == 0
    }

    pub fn summary(&self) -> PrefixSummary {
        PrefixSummary {
            len: self.messages.len(),
            tally: self.tally,
        }
    }

    pub fn push(&mut self, m: Message) {
        self.tally += m.0 as u64;
        self.non_bits += usize::from(m.0 > 1);
        self.messages.push(m);
    }

    pub fn pop(&mut self) -> Option<Message> {
        let m = self.messages.pop()?;
        self.tally -= m.0 as u64;
        self.non_bits -= usize::from(m.0 > 1);
        Some(m)
    }

    pub fn extended(&self, m: Message) -> Self {
        let mut t = self.clone();
        t.push(m);
        t
    }

    /// The first `k` messages.
    pub fn prefix(&self, k: usize) -> Self {
        self.messages[..k].iter().copied().collect()
    }

    pub fn last(&self) -> Option<Message> {
        self.messages.last().copied()
    }
}

impl Hash for Transcript {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.messages.hash(state);
    }
}

impl FromIterator<Message> for Transcript {
    fn from_iter<I: IntoIterator<Item = Message>>(iter: I) -> Self {
        let mut t = Transcript::new();
        for m in iter {
            t.push(m);
        }
        t
    }
}

impl fmt::Debug for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", m.0)?;
        }
        write!(f, ")")
    }
}
