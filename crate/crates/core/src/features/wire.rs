//! Binary protocol spoken with the deep feature service.
//!
//! All integers are little-endian `u32`. Framing is length-implicit: the
//! dimensions in each header determine how many payload bytes follow.
//!
//! ```text
//! request   "MLFQ" width height channels  pixels[width*height*channels] (u8, row-major RGB)
//! response  "MLFR" k  { v h d  values[v*h*d] (f32, row-major, channel-last) } * k
//! error     "MLFE" code          (1 bad magic, 2 bad dims, 3 inference failure)
//! ```

use std::io::{self, Read, Write};

pub const REQUEST_MAGIC: &[u8; 4] = b"MLFQ";
pub const RESPONSE_MAGIC: &[u8; 4] = b"MLFR";
pub const ERROR_MAGIC: &[u8; 4] = b"MLFE";

pub const ERR_BAD_MAGIC: u32 = 1;
pub const ERR_BAD_DIMS: u32 = 2;
pub const ERR_INFERENCE: u32 = 3;

/// Upper bound on any single payload, to reject garbage headers early.
const MAX_ELEMENTS: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRequest {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPayload {
    pub v: u32,
    pub h: u32,
    pub d: u32,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureResponse {
    pub layers: Vec<LayerPayload>,
}

/// What a service may send back for one request.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Features(FeatureResponse),
    Error(u32),
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_magic(r: &mut impl Read) -> io::Result<[u8; 4]> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    Ok(m)
}

fn element_count(dims: &[u32]) -> io::Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .filter(|&n| n <= MAX_ELEMENTS)
        .ok_or_else(|| invalid(format!("payload dims {dims:?} too large")))
}

impl FeatureRequest {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(REQUEST_MAGIC);
        for v in [self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.encode())?;
        w.flush()
    }

    /// Read one request. A wrong magic yields `InvalidData` with the bytes
    /// consumed so far; callers answering requests should reply with
    /// [`ERR_BAD_MAGIC`].
    pub fn read_from(r: &mut impl Read) -> io::Result<Self> {
        let magic = read_magic(r)?;
        if &magic != REQUEST_MAGIC {
            return Err(invalid(format!("bad request magic {magic:?}")));
        }
        let width = read_u32(r)?;
        let height = read_u32(r)?;
        let channels = read_u32(r)?;
        let n = element_count(&[width, height, channels])?;
        let mut pixels = vec![0u8; n];
        r.read_exact(&mut pixels)?;
        Ok(FeatureRequest {
            width,
            height,
            channels,
            pixels,
        })
    }
}

impl FeatureResponse {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(RESPONSE_MAGIC);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            for v in [l.v, l.h, l.d] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for f in &l.values {
                out.extend_from_slice(&f.to_le_bytes());
            }
        }
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.encode())?;
        w.flush()
    }
}

pub fn encode_error(code: u32) -> Vec<u8> {
    let mut out = ERROR_MAGIC.to_vec();
    out.extend_from_slice(&code.to_le_bytes());
    out
}

/// Read a response or an error frame. Short payloads surface as
/// `UnexpectedEof`, so a declared length that does not match the bytes on
/// the wire is always caught.
pub fn read_reply(r: &mut impl Read) -> io::Result<Reply> {
    let magic = read_magic(r)?;
    if &magic == ERROR_MAGIC {
        return Ok(Reply::Error(read_u32(r)?));
    }
    if &magic != RESPONSE_MAGIC {
        return Err(invalid(format!("bad response magic {magic:?}")));
    }
    let k = read_u32(r)?;
    if k as usize > 4096 {
        return Err(invalid(format!("implausible layer count {k}")));
    }
    let mut layers = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let v = read_u32(r)?;
        let h = read_u32(r)?;
        let d = read_u32(r)?;
        let n = element_count(&[v, h, d])?;
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        layers.push(LayerPayload { v, h, d, values });
    }
    Ok(Reply::Features(FeatureResponse { layers }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_request_bytes() {
        let req = FeatureRequest {
            width: 2,
            height: 1,
            channels: 3,
            pixels: vec![1, 2, 3, 4, 5, 6],
        };
        let expect: Vec<u8> = [
            b"MLFQ".as_slice(),
            &[2, 0, 0, 0],
            &[1, 0, 0, 0],
            &[3, 0, 0, 0],
            &[1, 2, 3, 4, 5, 6],
        ]
        .concat();
        assert_eq!(req.encode(), expect);
    }

    #[test]
    fn golden_response_bytes() {
        let resp = FeatureResponse {
            layers: vec![LayerPayload {
                v: 1,
                h: 1,
                d: 2,
                values: vec![1.0, -2.5],
            }],
        };
        let expect: Vec<u8> = [
            b"MLFR".as_slice(),
            &[1, 0, 0, 0],
            &[1, 0, 0, 0],
            &[1, 0, 0, 0],
            &[2, 0, 0, 0],
            &1.0f32.to_le_bytes(),
            &(-2.5f32).to_le_bytes(),
        ]
        .concat();
        assert_eq!(resp.encode(), expect);
    }

    #[test]
    fn error_frames_and_bad_magic() {
        let bytes = encode_error(ERR_BAD_DIMS);
        assert_eq!(read_reply(&mut bytes.as_slice()).unwrap(), Reply::Error(2));
        let err = read_reply(&mut b"XXXX\0\0\0\0".as_slice()).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::InvalidData);
        let err = FeatureRequest::read_from(&mut b"XXXX".as_slice()).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::InvalidData);
    }

    #[test]
    fn truncated_payload_is_detected() {
        let resp = FeatureResponse {
            layers: vec![LayerPayload {
                v: 2,
                h: 2,
                d: 1,
                values: vec![0.0; 4],
            }],
        };
        let mut bytes = resp.encode();
        bytes.truncate(bytes.len() - 3);
        let err = read_reply(&mut bytes.as_slice()).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::UnexpectedEof);
    }

    proptest! {
        #[test]
        fn frames_round_trip(w in 1u32..6, h in 1u32..6, seed in any::<u64>(),
                             dims in proptest::collection::vec((1u32..4, 1u32..4, 1u32..4), 0..4)) {
            let pixels: Vec<u8> = (0..w * h * 3).map(|i| (seed.wrapping_mul(i as u64 + 7) >> 13) as u8).collect();
            let req = FeatureRequest { width: w, height: h, channels: 3, pixels };
            prop_assert_eq!(FeatureRequest::read_from(&mut req.encode().as_slice()).unwrap(), req);

            let layers: Vec<LayerPayload> = dims.iter().map(|&(v, h, d)| LayerPayload {
                v, h, d, values: (0..v * h * d).map(|i| i as f32 * 0.25 - 1.0).collect(),
            }).collect();
            let resp = FeatureResponse { layers };
            prop_assert_eq!(read_reply(&mut resp.encode().as_slice()).unwrap(), Reply::Features(resp));
        }
    }
}
