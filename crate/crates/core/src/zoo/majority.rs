use std::sync::OnceLock;

use super::{bit_dist, fair_bit, require};
use crate::protocol::{MessageDist, PartyId, PrefixSummary, Prob, Protocol, Transcript};
use crate::{Error, Result};

/// Round-robin majority over `n·k` unbiased bits.
#[derive(Debug)]
pub struct Majority {
    parties: usize,
    bits_per_party: usize,
    tail: OnceLock<Vec<Vec<f64>>>,
}

impl Majority {
    pub fn new(parties: usize, bits_per_party: usize) -> Result<Self> {
        require(parties >= 1 && bits_per_party >= 1, "majority needs n, k >= 1")?;
        require(
            (parties * bits_per_party) % 2 == 1,
            "majority needs an odd number of bits",
        )?;
        Ok(Self {
            parties,
            bits_per_party,
            tail: OnceLock::new(),
        })
    }

    fn rounds(&self) -> usize {
        self.parties * self.bits_per_party
    }

    /// `tail[r][d] = Pr[Bin(r, 1/2) >= d]` for `d` in `0..=r+1`.
    fn tail(&self) -> &Vec<Vec<f64>> {
        self.tail.get_or_init(|| {
            let total = self.rounds();
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(total + 1);
            rows.push(vec![1.0, 0.0]);
            for r in 1..=total {
                let prev = &rows[r - 1];
                let at = |d: usize| if d <= r { prev[d] } else { 0.0 };
                let mut row = Vec::with_capacity(r + 2);
                row.push(1.0);
                for d in 1..=r + 1 {
                    row.push(0.5 * at(d - 1) + 0.5 * at(d));
                }
                rows.push(row);
            }
            rows
        })
    }
}

impl Protocol for Majority {
    fn name(&self) -> String {
        if self.bits_per_party == 1 {
            format!("majority_single_turn(n={})", self.parties)
        } else {
            format!("majority_many_turn(n={},k={})", self.parties, self.bits_per_party)
        }
    }

    fn num_parties(&self) -> usize {
        self.parties
    }

    fn num_rounds(&self) -> usize {
        self.rounds()
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        round_robin(prefix, self.rounds(), self.parties)
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        round_robin(prefix, self.rounds(), self.parties)?;
        Ok(fair_bit())
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        full(transcript, self.rounds())?;
        Ok(2 * transcript.tally() > self.rounds() as u64)
    }

    fn closed_form_outcome(&self, s: PrefixSummary) -> Option<f64> {
        let total = self.rounds();
        if s.len > total {
            return None;
        }
        let remaining = total - s.len;
        let needed = (total / 2 + 1) as i64 - s.tally as i64;
        if needed <= 0 {
            return Some(1.0);
        }
        let needed = needed as usize;
        if needed > remaining {
            return Some(0.0);
        }
        Some(self.tail()[remaining][needed])
    }
}

/// One bit per party, 0 with probability `1/n`; output is the AND.
#[derive(Debug)]
pub struct BiasedAnd {
    n: usize,
}

impl BiasedAnd {
    pub fn new(n: usize) -> Result<Self> {
        require(n >= 1, "biased AND needs n >= 1")?;
        Ok(Self { n })
    }
}

impl Protocol for BiasedAnd {
    fn name(&self) -> String {
        format!("biased_and(n={})", self.n)
    }

    fn num_parties(&self) -> usize {
        self.n
    }

    fn num_rounds(&self) -> usize {
        self.n
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        round_robin(prefix, self.n, self.n)
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        round_robin(prefix, self.n, self.n)?;
        Ok(bit_dist(Prob::from_integer(1) - Prob::new(1, self.n as i64)))
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        full(transcript, self.n)?;
        Ok(transcript.tally() == self.n as u64)
    }

    fn closed_form_outcome(&self, s: PrefixSummary) -> Option<f64> {
        if s.len > self.n {
            return None;
        }
        if s.tally < s.len as u64 {
            return Some(0.0);
        }
        let q = 1.0 - 1.0 / self.n as f64;
        Some(q.powi((self.n - s.len) as i32))
    }
}

/// Many-turn majority where a party whose own bits contain a run of
/// `run_len` ones loses all its votes. Ties resolve to 0.
#[derive(Debug)]
pub struct PunishingMajority {
    parties: usize,
    bits_per_party: usize,
    run_len: usize,
}

impl PunishingMajority {
    pub fn new(parties: usize, bits_per_party: usize, run_len: usize) -> Result<Self> {
        require(
            parties >= 1 && bits_per_party >= 1,
            "punishing majority needs n, k >= 1",
        )?;
        require(run_len >= 1, "run length must be at least 1")?;
        Ok(Self {
            parties,
            bits_per_party,
            run_len,
        })
    }

    fn rounds(&self) -> usize {
        self.parties * self.bits_per_party
    }
}

impl Protocol for PunishingMajority {
    fn name(&self) -> String {
        format!(
            "punishing_majority(n={},k={},run_len={})",
            self.parties, self.bits_per_party, self.run_len
        )
    }

    fn num_parties(&self) -> usize {
        self.parties
    }

    fn num_rounds(&self) -> usize {
        self.rounds()
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        round_robin(prefix, self.rounds(), self.parties)
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        round_robin(prefix, self.rounds(), self.parties)?;
        Ok(fair_bit())
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        full(transcript, self.rounds())?;
        let (mut ones, mut counted) = (0usize, 0usize);
        for p in 0..self.parties {
            let bits: Vec<u32> = transcript
                .messages()
                .iter()
                .skip(p)
                .step_by(self.parties)
                .map(|m| m.0)
                .collect();
            let mut run = 0;
            let mut punished = false;
            for &b in &bits {
                run = if b == 1 { run + 1 } else { 0 };
                punished |= run >= self.run_len;
            }
            if !punished {
                ones += bits.iter().filter(|&&b| b == 1).count();
                counted += bits.len();
            }
        }
        Ok(2 * ones > counted)
    }
}

/// Speaker of the next round when parties `1..=parties` take turns.
fn round_robin(prefix: &Transcript, rounds: usize, parties: usize) -> Result<PartyId> {
    if prefix.len() >= rounds {
        return Err(Error::NoNextRound);
    }
    if !prefix.is_binary() {
        return Err(Error::InvalidPrefix(format!("{prefix} contains a non-bit")));
    }
    Ok(PartyId((prefix.len() % parties) as u32 + 1))
}

fn full(transcript: &Transcript, rounds: usize) -> Result<()> {
    if transcript.len() != rounds {
        return Err(Error::InvalidPrefix(format!(
            "{transcript} is not a complete transcript of {rounds} rounds"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Rational, Scalar};
    use crate::Evaluator;
    use std::sync::Arc;

    fn exact(p: impl Protocol + 'static) -> Evaluator<Rational> {
        Evaluator::new(Arc::new(p))
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn majority_values() {
        let e = exact(Majority::new(3, 1).unwrap());
        assert_eq!(e.expected_outcome(&Transcript::new()).unwrap(), q(1, 2));
        assert_eq!(e.expected_outcome(&Transcript::from_values([1, 1])).unwrap(), q(1, 1));
        let v = e.round_view(&Transcript::new()).unwrap();
        assert_eq!(v.jumps, vec![q(-1, 4), q(1, 4)]);
        assert_eq!(v.variance, q(1, 16));
        let v = e.round_view(&Transcript::from_values([1, 0])).unwrap();
        assert_eq!(v.jumps, vec![q(-1, 2), q(1, 2)]);
        assert_eq!(v.variance, q(1, 4));
        for n in [1, 5] {
            let e = exact(Majority::new(n, 1).unwrap());
            assert_eq!(e.expected_outcome(&Transcript::new()).unwrap(), q(1, 2));
        }
    }

    #[test]
    fn closed_form_matches_tree() {
        let p = Arc::new(Majority::new(3, 3).unwrap());
        let exact: Evaluator<Rational> = Evaluator::new(p.clone());
        let walk = [0, 1, 1, 0, 1, 0, 0, 1];
        let mut t = Transcript::new();
        for m in walk {
            let a = exact.value(&t).unwrap().to_f64();
            let b = p.closed_form_outcome(t.summary()).unwrap();
            assert!((a - b).abs() < 1e-12);
            t.push(crate::Message(m));
        }
        let and = Arc::new(BiasedAnd::new(4).unwrap());
        let exact: Evaluator<Rational> = Evaluator::new(and.clone());
        for t in [
            Transcript::new(),
            Transcript::from_values([1]),
            Transcript::from_values([1, 0]),
        ] {
            let a = exact.value(&t).unwrap().to_f64();
            assert!((a - and.closed_form_outcome(t.summary()).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn speaker_schedule() {
        let p = Majority::new(3, 3).unwrap();
        assert_eq!(p.next_party(&Transcript::from_values([0, 0, 0])).unwrap(), PartyId(1));
        assert_eq!(p.next_party(&Transcript::from_values([0, 0])).unwrap(), PartyId(3));
    }

    #[test]
    fn and_values() {
        assert_eq!(
            exact(BiasedAnd::new(1).unwrap())
                .expected_outcome(&Transcript::new())
                .unwrap(),
            q(0, 1)
        );
        assert_eq!(
            exact(BiasedAnd::new(2).unwrap())
                .expected_outcome(&Transcript::new())
                .unwrap(),
            q(1, 4)
        );
        let e: Evaluator<f64> = Evaluator::new(Arc::new(BiasedAnd::new(100).unwrap()));
        let v = e.expected_outcome(&Transcript::new()).unwrap();
        assert!((v - (-1f64).exp()).abs() < 0.01);
    }

    #[test]
    fn punishment_rules() {
        let p = PunishingMajority::new(1, 2, 2).unwrap();
        assert!(!p.output(&Transcript::from_values([1, 1])).unwrap());
        assert!(!p.output(&Transcript::from_values([1, 0])).unwrap());
        let plain = exact(Majority::new(3, 3).unwrap());
        let lenient = exact(PunishingMajority::new(3, 3, 4).unwrap());
        assert_eq!(
            plain.expected_outcome(&Transcript::new()).unwrap(),
            lenient.expected_outcome(&Transcript::new()).unwrap()
        );
        let strict = exact(PunishingMajority::new(3, 3, 2).unwrap());
        assert_eq!(strict.expected_outcome(&Transcript::new()).unwrap(), q(23, 256));
    }
}
