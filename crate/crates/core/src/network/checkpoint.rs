//! Binary checkpoint container.
//!
//! All integers and floats are little-endian:
//!
//! | field            | size      | notes                                         |
//! |------------------|-----------|-----------------------------------------------|
//! | magic            | 8         | `TXSRCKPT`                                    |
//! | version          | u32       | currently 1                                   |
//! | spec length `S`  | u32       |                                               |
//! | spec             | `S` bytes | canonical UTF-8 spec string                   |
//! | iteration        | u64       |                                               |
//! | rng length `R`   | u32       |                                               |
//! | rng state        | `R` bytes | opaque sampler state, may be empty            |
//! | param count `P`  | u64       | weights + biases                              |
//! | parameters       | 8·P bytes | f64; per layer: weights `(k,c,i,j)`, biases  |
//! | checksum         | u32       | CRC-32 (IEEE) of every preceding byte         |

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use super::{parse_spec, Network};
use crate::error::{Error, Result};
use crate::tensor::FilterBank;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TXSRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub iteration: u64,
    pub rng_state: Vec<u8>,
}

impl Checkpoint {
    pub fn new(network: Network, iteration: u64) -> Self {
        Checkpoint {
            network,
            iteration,
            rng_state: Vec::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = self.network.spec().to_string();
        let params = self.network.param_count();
        let mut buf = Vec::with_capacity(48 + spec.len() + self.rng_state.len() + 8 * params);
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(spec.len() as u32).to_le_bytes());
        buf.extend_from_slice(spec.as_bytes());
        buf.extend_from_slice(&self.iteration.to_le_bytes());
        buf.extend_from_slice(&(self.rng_state.len() as u32).to_le_bytes());
        buf.extend_from_slice(&self.rng_state);
        buf.extend_from_slice(&(params as u64).to_le_bytes());
        for bank in self.network.banks() {
            for v in bank.weights().iter().chain(bank.biases()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CheckpointCorrupt(m.to_string());
        if bytes.len() < 12 {
            return Err(corrupt("file shorter than header"));
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 16 {
            return Err(corrupt("file shorter than header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch (truncated or modified file)"));
        }

        let mut r = Reader { buf: body, pos: 12 };
        let spec_len = r.u32()? as usize;
        let spec_text =
            std::str::from_utf8(r.take(spec_len)?).map_err(|_| corrupt("spec is not UTF-8"))?;
        let spec = parse_spec(spec_text)?;
        let iteration = r.u64()?;
        let rng_len = r.u32()? as usize;
        let rng_state = r.take(rng_len)?.to_vec();
        let params = r.u64()? as usize;
        if params != spec.param_count(true) {
            return Err(Error::CheckpointCorrupt(format!(
                "spec {spec} needs {} parameters, file declares {params}",
                spec.param_count(true)
            )));
        }
        let mut banks = Vec::with_capacity(spec.depth());
        for (i, layer) in spec.layers().iter().enumerate() {
            let cin = spec.in_channels_of(i);
            let nw = layer.num_filters * cin * layer.filter_size * layer.filter_size;
            let weights = r.f64s(nw)?;
            let biases = r.f64s(layer.num_filters)?;
            banks.push(FilterBank::new(layer.num_filters, cin, layer.filter_size, weights, biases)?);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes after parameters"));
        }
        Ok(Checkpoint {
            network: Network::from_banks(spec, banks)?,
            iteration,
            rng_state,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CheckpointCorrupt("unexpected end of payload".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::CheckpointCorrupt("parameter count overflow".into())
        })?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint.to_bytes())
        .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::CheckpointMissing(path.to_path_buf()),
        _ => Error::io(format!("reading checkpoint {}", path.display()), e),
    })?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;
    use crate::tensor::Tensor;

    fn sample() -> Checkpoint {
        let spec = parse_spec("6(5)-3(3)-1(3)").unwrap();
        Checkpoint {
            network: init_network(&spec, 0.1, 77).unwrap(),
            iteration: 1234,
            rng_state: vec![1, 2, 3, 4, 5],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let x = Tensor::from_fn(1, 20, 21, |_, y, x| ((y ^ x) % 7) as f64 / 7.0);
        let a = ck.network.forward(&x).unwrap();
        let b = back.network.forward(&x).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn distinct_error_kinds() {
        let bytes = sample().to_bytes();
        for cut in [0, 5, 11, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::CheckpointCorrupt(_))),
                "cut at {cut}"
            );
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x10;
        assert!(matches!(Checkpoint::from_bytes(&flipped), Err(Error::CheckpointCorrupt(_))));

        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&v2),
            Err(Error::CheckpointVersion { found: 2, expected: 1 })
        ));

        let missing = std::env::temp_dir().join("textsr-no-such-checkpoint.ckpt");
        assert!(matches!(load_checkpoint(&missing), Err(Error::CheckpointMissing(_))));
    }

    #[test]
    fn records_weights_plus_biases() {
        let spec = parse_spec("64(9)-32(7)-1(5)").unwrap();
        let ck = Checkpoint::new(Network::zeros(spec), 0);
        let bytes = ck.to_bytes();
        let spec_len = "64(9)-32(7)-1(5)".len();
        let off = 16 + spec_len + 8 + 4;
        let declared = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        assert_eq!(declared, 106_433);
        assert_eq!(bytes.len(), off + 8 + 8 * 106_433 + 4);
    }
}
