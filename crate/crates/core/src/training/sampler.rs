use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SAMPLER_STREAM: u64 = 1;
const STATE_LEN: usize = 8 + 16 + 8 + 8;

/// Draws indices `0..len` without replacement, reshuffling at every epoch.
#[derive(Clone, Debug)]
pub struct EpochSampler {
    len: usize,
    seed: u64,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch_word_pos: u128,
}

impl EpochSampler {
    pub fn new(len: usize, seed: u64) -> Self {
        assert!(len > 0, "sampler needs a non-empty set");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(SAMPLER_STREAM);
        let mut s = EpochSampler {
            len,
            seed,
            rng,
            order: (0..len).collect(),
            cursor: 0,
            epoch_word_pos: 0,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.epoch_word_pos = self.rng.get_word_pos();
        self.order.sort_unstable();
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    pub fn next_index(&mut self) -> usize {
        if self.cursor == self.len {
            self.reshuffle();
        }
        let i = self.order[self.cursor];
        self.cursor += 1;
        i
    }

    /// `seed, epoch word position, cursor, len`, little-endian.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(STATE_LEN);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.epoch_word_pos.to_le_bytes());
        out.extend_from_slice(&(self.cursor as u64).to_le_bytes());
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out
    }

    /// Rebuilds a sampler that continues exactly where `state_bytes` was taken.
    pub fn from_state_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != STATE_LEN {
            return Err(Error::invalid(format!("sampler state must be {STATE_LEN} bytes")));
        }
        let seed = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let word_pos = u128::from_le_bytes(bytes[8..24].try_into().unwrap());
        let cursor = u64::from_le_bytes(bytes[24..32].try_into().unwrap()) as usize;
        let len = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
        if len == 0 || cursor > len {
            return Err(Error::invalid("inconsistent sampler state"));
        }
        let mut s = EpochSampler::new(len, seed);
        s.rng.set_word_pos(word_pos);
        s.reshuffle();
        s.cursor = cursor;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_epoch_is_a_permutation() {
        let mut s = EpochSampler::new(7, 3);
        for _ in 0..3 {
            let mut epoch: Vec<usize> = (0..7).map(|_| s.next_index()).collect();
            epoch.sort_unstable();
            assert_eq!(epoch, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn restored_state_continues_identically() {
        let mut a = EpochSampler::new(11, 42);
        for _ in 0..25 {
            a.next_index();
        }
        let mut b = EpochSampler::from_state_bytes(&a.state_bytes()).unwrap();
        let xs: Vec<usize> = (0..40).map(|_| a.next_index()).collect();
        let ys: Vec<usize> = (0..40).map(|_| b.next_index()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn seeds_differ() {
        let mut a = EpochSampler::new(50, 1);
        let mut b = EpochSampler::new(50, 2);
        let xs: Vec<usize> = (0..50).map(|_| a.next_index()).collect();
        let ys: Vec<usize> = (0..50).map(|_| b.next_index()).collect();
        assert_ne!(xs, ys);
    }
}
