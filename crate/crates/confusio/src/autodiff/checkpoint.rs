//! Named-tensor checkpoint container: fixed header, a UTF-8 metadata blob,
//! then (name, shape, dtype, little-endian f64 payload) per tensor.
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use super::AutodiffError;

const MAGIC: &[u8; 8] = b"CONFCKPT";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 0;

pub fn write_checkpoint(
    path: &Path,
    metadata: &str,
    tensors: &[(String, Tensor)],
) -> Result<(), AutodiffError> {
    let file = File::create(path).map_err(|e| AutodiffError::Io(e.to_string()))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<(), AutodiffError> {
        w.write_all(bytes).map_err(|e| AutodiffError::Io(e.to_string()))
    };
    write(&mut w, MAGIC)?;
    write(&mut w, &VERSION.to_le_bytes())?;
    write(&mut w, &(metadata.len() as u64).to_le_bytes())?;
    write(&mut w, metadata.as_bytes())?;
    write(&mut w, &(tensors.len() as u64).to_le_bytes())?;
    for (name, t) in tensors {
        write(&mut w, &(name.len() as u64).to_le_bytes())?;
        write(&mut w, name.as_bytes())?;
        write(&mut w, &[DTYPE_F64])?;
        write(&mut w, &(t.shape().len() as u64).to_le_bytes())?;
        for &d in t.shape() {
            write(&mut w, &(d as u64).to_le_bytes())?;
        }
        for &v in t.data() {
            write(&mut w, &v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| AutodiffError::Io(e.to_string()))
}

pub fn read_checkpoint(path: &Path) -> Result<(String, Vec<(String, Tensor)>), AutodiffError> {
    let file = File::open(path).map_err(|e| AutodiffError::Io(e.to_string()))?;
    let mut r = BufReader::new(file);
    let io = |e: std::io::Error| AutodiffError::Io(e.to_string());

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(AutodiffError::Io("not a checkpoint file".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    if u32::from_le_bytes(u32buf) != VERSION {
        return Err(AutodiffError::Io("unsupported checkpoint version".into()));
    }
    let read_u64 = |r: &mut BufReader<File>| -> Result<u64, AutodiffError> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(io)?;
        Ok(u64::from_le_bytes(buf))
    };
    let meta_len = read_u64(&mut r)? as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta).map_err(io)?;
    let metadata = String::from_utf8(meta).map_err(|e| AutodiffError::Io(e.to_string()))?;

    let count = read_u64(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u64(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(io)?;
        let name = String::from_utf8(name).map_err(|e| AutodiffError::Io(e.to_string()))?;
        let mut dtype = [0u8; 1];
        r.read_exact(&mut dtype).map_err(io)?;
        if dtype[0] != DTYPE_F64 {
            return Err(AutodiffError::Io(format!("unknown dtype {}", dtype[0])));
        }
        let ndim = read_u64(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut f64buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut f64buf).map_err(io)?;
            data.push(f64::from_le_bytes(f64buf));
        }
        tensors.push((name, Tensor::new(shape, data)?));
    }
    Ok((metadata, tensors))
}
