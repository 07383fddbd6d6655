//! Type-length-value primitives: one type octet, an unsigned LEB128
//! length, then the value.

use std::fmt;

pub fn write(out: &mut Vec<u8>, typ: u8, value: &[u8]) {
    out.push(typ);
    leb128::write::unsigned(out, value.len() as u64).expect("writing to a Vec cannot fail");
    out.extend_from_slice(value);
}

pub fn write_uint(out: &mut Vec<u8>, typ: u8, value: u64) {
    let mut buf = Vec::with_capacity(10);
    leb128::write::unsigned(&mut buf, value).expect("writing to a Vec cannot fail");
    write(out, typ, &buf);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadError {
    /// Input ended inside a TLV header or value.
    Truncated,
    /// Bad varint, unexpected type, or leftover bytes.
    Malformed,
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadError::Truncated => f.write_str("truncated TLV"),
            ReadError::Malformed => f.write_str("malformed TLV"),
        }
    }
}

/// Sequential reader over a TLV byte slice.
pub struct Reader<'a> {
    rest: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { rest: bytes }
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }

    pub fn peek_type(&self) -> Option<u8> {
        self.rest.first().copied()
    }

    pub fn read_any(&mut self) -> Result<(u8, &'a [u8]), ReadError> {
        let (&typ, mut after) = self.rest.split_first().ok_or(ReadError::Truncated)?;
        let len = leb128::read::unsigned(&mut after).map_err(|e| match e {
            leb128::read::Error::IoError(_) => ReadError::Truncated,
            leb128::read::Error::Overflow => ReadError::Malformed,
        })?;
        let len = usize::try_from(len).map_err(|_| ReadError::Truncated)?;
        if after.len() < len {
            return Err(ReadError::Truncated);
        }
        let (value, rest) = after.split_at(len);
        self.rest = rest;
        Ok((typ, value))
    }

    pub fn expect(&mut self, typ: u8) -> Result<&'a [u8], ReadError> {
        match self.peek_type() {
            Some(t) if t == typ => Ok(self.read_any()?.1),
            Some(_) => Err(ReadError::Malformed),
            None => Err(ReadError::Truncated),
        }
    }

    pub fn expect_uint(&mut self, typ: u8) -> Result<u64, ReadError> {
        decode_uint(self.expect(typ)?)
    }

    pub fn expect_str(&mut self, typ: u8) -> Result<&'a str, ReadError> {
        std::str::from_utf8(self.expect(typ)?).map_err(|_| ReadError::Malformed)
    }

    /// Reads a TLV of `typ` only if it is next.
    pub fn optional(&mut self, typ: u8) -> Result<Option<&'a [u8]>, ReadError> {
        if self.peek_type() == Some(typ) {
            Ok(Some(self.read_any()?.1))
        } else {
            Ok(None)
        }
    }

    pub fn finish(self) -> Result<(), ReadError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(ReadError::Malformed)
        }
    }
}

pub fn decode_uint(mut value: &[u8]) -> Result<u64, ReadError> {
    let n = leb128::read::unsigned(&mut value).map_err(|_| ReadError::Malformed)?;
    if value.is_empty() {
        Ok(n)
    } else {
        Err(ReadError::Malformed)
    }
}
