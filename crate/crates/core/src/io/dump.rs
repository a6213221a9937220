//! FVTD token-dump format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic       "FVTD"                   4 bytes
//! version     u32 = 1
//! flags       u32   bit 0: attention present
//! F N D Df H W pool_out_h pool_out_w   u32 each
//! frame_features  f32[F*Df]
//! tokens          f32[F*N*D]
//! attention       f32[F*H*W]           only when flag bit 0 is set
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{DumpDims, TokenDump};

pub const DUMP_MAGIC: [u8; 4] = *b"FVTD";
pub const DUMP_VERSION: u32 = 1;
pub const FLAG_ATTENTION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 * 4;

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or(Error::DimensionOverflow)?;
        if end > self.buf.len() {
            return Err(Error::Truncated {
                expected: end as u64,
                found: self.buf.len() as u64,
            });
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = count.checked_mul(4).ok_or(Error::DimensionOverflow)?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let b = self.take(4)?;
        let found = [b[0], b[1], b[2], b[3]];
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::DimensionOverflow)?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_dump(dump: &TokenDump) -> Result<Vec<u8>> {
    let d = dump.dims();
    let payload = dump.frame_features().len()
        + dump.tokens().len()
        + dump.attention().map_or(0, <[f32]>::len);
    let mut out = Vec::with_capacity(HEADER_LEN + payload * 4);
    out.extend_from_slice(&DUMP_MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    let flags = if dump.attention().is_some() {
        FLAG_ATTENTION
    } else {
        0
    };
    out.extend_from_slice(&flags.to_le_bytes());
    for v in [
        d.frames,
        d.tokens_per_frame,
        d.token_dim,
        d.frame_feature_dim,
        d.attn_height,
        d.attn_width,
        d.pool_out_h,
        d.pool_out_w,
    ] {
        put_u32(&mut out, v)?;
    }
    put_f32s(&mut out, dump.frame_features());
    put_f32s(&mut out, dump.tokens());
    if let Some(attn) = dump.attention() {
        put_f32s(&mut out, attn);
    }
    Ok(out)
}

pub fn decode_dump(bytes: &[u8]) -> Result<TokenDump> {
    let mut cur = Cursor::new(bytes);
    cur.magic(DUMP_MAGIC)?;
    let version = cur.u32()?;
    if version != DUMP_VERSION {
        return Err(Error::VersionMismatch {
            expected: DUMP_VERSION,
            found: version,
        });
    }
    let flags = cur.u32()?;
    if flags & !FLAG_ATTENTION != 0 {
        return Err(Error::Malformed(format!("unknown flag bits {flags:#x}")));
    }
    let mut h = [0usize; 8];
    for v in &mut h {
        *v = cur.u32()? as usize;
    }
    let dims = DumpDims {
        frames: h[0],
        tokens_per_frame: h[1],
        token_dim: h[2],
        frame_feature_dim: h[3],
        attn_height: h[4],
        attn_width: h[5],
        pool_out_h: h[6],
        pool_out_w: h[7],
    };
    let ff_len = dims.frame_features_len().ok_or(Error::DimensionOverflow)?;
    let tok_len = dims.tokens_len().ok_or(Error::DimensionOverflow)?;
    let attn_len = if flags & FLAG_ATTENTION != 0 {
        dims.attention_len().ok_or(Error::DimensionOverflow)?
    } else {
        0
    };
    let floats = ff_len
        .checked_add(tok_len)
        .and_then(|v| v.checked_add(attn_len))
        .ok_or(Error::DimensionOverflow)?;
    let expected = (floats as u64)
        .checked_mul(4)
        .and_then(|v| v.checked_add(HEADER_LEN as u64))
        .ok_or(Error::DimensionOverflow)?;
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    let frame_features = cur.f32s(ff_len)?;
    let tokens = cur.f32s(tok_len)?;
    let attention = if flags & FLAG_ATTENTION != 0 {
        Some(cur.f32s(attn_len)?)
    } else {
        None
    };
    cur.finish()?;
    TokenDump::new(dims, frame_features, tokens, attention)
}

pub fn write_dump_to(dump: &TokenDump, mut writer: impl Write) -> Result<()> {
    writer.write_all(&encode_dump(dump)?)?;
    writer.flush()?;
    Ok(())
}

pub fn read_dump_from(mut reader: impl Read) -> Result<TokenDump> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_dump(&bytes)
}

pub fn write_dump(dump: &TokenDump, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dump(dump)?)?;
    Ok(())
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<TokenDump> {
    decode_dump(&fs::read(path)?)
}
