//! Versioned binary container for named tensors.
//!
//! Layout: magic, format version, a UTF-8 header blob (the caller stores its
//! configuration there), then `name -> shape -> raw little-endian f64 values`
//! for every tensor. Reading back is bit-exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"SLPMODEL";
const FORMAT_VERSION: u32 = 1;

pub fn write_container<W: Write>(
    w: &mut W,
    header: &str,
    tensors: &[(&str, &Tensor)],
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    write_bytes(w, header.as_bytes())?;
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, tensor) in tensors {
        write_bytes(w, name.as_bytes())?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_container<R: Read>(r: &mut R) -> Result<(String, Vec<(String, Tensor)>)> {
    let mut magic = [0u8; 8];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadModelFile("bad magic bytes".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::BadModelFile(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let header = String::from_utf8(read_bytes(r)?)
        .map_err(|_| Error::BadModelFile("header is not valid UTF-8".into()))?;
    let count = read_u64(r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = String::from_utf8(read_bytes(r)?)
            .map_err(|_| Error::BadModelFile("tensor name is not valid UTF-8".into()))?;
        let rank = read_u32(r)? as usize;
        if rank > 2 {
            return Err(Error::BadModelFile(format!(
                "tensor {name:?} has unsupported rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            read_exact(r, &mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push((name, Tensor::from_vec(&shape, data)));
    }
    Ok((header, tensors))
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> std::io::Result<()> {
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(bytes)
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = read_u64(r)? as usize;
    if len > 1 << 32 {
        return Err(Error::BadModelFile(format!("implausible field length {len}")));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::BadModelFile("truncated file".into()))
}
