use super::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};

const MIN_DIM: usize = 16;
const PAD_START: char = '\u{2}';
const PAD_END: char = '\u{3}';

/// Offline stand-in for a sentence encoder: signed feature hashing of
/// character trigrams, L2-normalized.
///
/// The text is padded with one start and one end marker, so every non-empty
/// text has at least one trigram and short titles still embed. The empty
/// text maps to the zero vector.
#[derive(Clone, Debug)]
pub struct LocalProvider {
    name: String,
    dim: usize,
    seed: u64,
}

impl LocalProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::Config(format!("local provider needs dim >= {MIN_DIM}, got {dim}")));
        }
        Ok(LocalProvider { name: format!("local-trigram-v1/seed={seed}"), dim, seed })
    }

    fn bucket(&self, trigram: &[char]) -> (usize, f64) {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ splitmix64(self.seed);
        let mut buf = [0u8; 4];
        for c in trigram {
            for byte in c.encode_utf8(&mut buf).bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        let h = splitmix64(h);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl EmbeddingProvider for LocalProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Ok(EmbeddingVector::zeros(self.dim));
        }
        let chars: Vec<char> = std::iter::once(PAD_START).chain(text.chars()).chain([PAD_END]).collect();
        let mut acc = vec![0.0f64; self.dim];
        for tri in chars.windows(3) {
            let (idx, sign) = self.bucket(tri);
            acc[idx] += sign;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(EmbeddingVector::zeros(self.dim));
        }
        EmbeddingVector::new(acc.iter().map(|x| (x / norm) as f32).collect())
    }
}
