use super::{fair_bit, require};
use crate::protocol::{Message, MessageDist, PartyId, PrefixSummary, Protocol, Transcript};
use crate::{Error, FiniteDistribution, Result};

/// Parties exchange unbiased bits that the output ignores.
#[derive(Debug)]
pub struct Constant {
    value: bool,
    parties: usize,
    rounds: usize,
}

impl Constant {
    pub fn new(value: bool, parties: usize, rounds: usize) -> Result<Self> {
        require(parties >= 1, "constant protocol needs at least one party")?;
        Ok(Self { value, parties, rounds })
    }
}

impl Protocol for Constant {
    fn name(&self) -> String {
        format!(
            "constant(value={},parties={},rounds={})",
            u8::from(self.value),
            self.parties,
            self.rounds
        )
    }

    fn num_parties(&self) -> usize {
        self.parties
    }

    fn num_rounds(&self) -> usize {
        self.rounds
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        if prefix.len() >= self.rounds {
            return Err(Error::NoNextRound);
        }
        Ok(PartyId((prefix.len() % self.parties) as u32 + 1))
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        self.next_party(prefix)?;
        Ok(fair_bit())
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        if transcript.len() != self.rounds {
            return Err(Error::InvalidPrefix(format!("{transcript} is not complete")));
        }
        Ok(self.value)
    }

    fn closed_form_outcome(&self, _: PrefixSummary) -> Option<f64> {
        Some(if self.value { 1.0 } else { 0.0 })
    }
}

/// One party sends two uniform messages from `{0,1,2}`; the output is 1
/// iff they sum to at least 2.
#[derive(Debug, Clone, Copy)]
pub struct TwoRoundToy;

impl Protocol for TwoRoundToy {
    fn name(&self) -> String {
        "two_round_toy".into()
    }

    fn num_parties(&self) -> usize {
        1
    }

    fn num_rounds(&self) -> usize {
        2
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        if prefix.len() >= 2 {
            return Err(Error::NoNextRound);
        }
        Ok(PartyId(1))
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        self.next_party(prefix)?;
        FiniteDistribution::uniform((0..3).map(Message))
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        if transcript.len() != 2 {
            return Err(Error::InvalidPrefix(format!("{transcript} is not complete")));
        }
        Ok(transcript.tally() >= 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Rational, Scalar};
    use crate::Evaluator;
    use std::sync::Arc;

    #[test]
    fn constant_has_no_jumps() {
        let e: Evaluator<Rational> = Evaluator::new(Arc::new(Constant::new(true, 2, 3).unwrap()));
        let v = e.round_view(&Transcript::from_values([1])).unwrap();
        assert!(v.jumps.iter().all(|j| *j == Rational::from_int(0)));
        assert_eq!(v.variance, Rational::from_int(0));
        assert!(matches!(
            e.round_view(&Transcript::from_values([1, 0, 1])),
            Err(Error::NoNextRound)
        ));
    }

    #[test]
    fn toy_expectation() {
        let e: Evaluator<Rational> = Evaluator::new(Arc::new(TwoRoundToy));
        assert_eq!(
            e.expected_outcome(&Transcript::new()).unwrap(),
            Rational::new(2.into(), 3.into())
        );
        assert!(matches!(
            e.expected_outcome(&Transcript::from_values([3])),
            Err(Error::InvalidPrefix(_))
        ));
    }
}
