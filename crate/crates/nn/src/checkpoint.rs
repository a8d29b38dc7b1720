//! Binary parameter-blob format: magic, version, dtype, named shaped blobs,
//! optional Adam state. Written with a stable layout so identical training
//! runs produce identical files.

use crate::adam::AdamState;
use crate::layers::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::NnError;
use std::io::{Read, Write};

pub const PARAMS_MAGIC: [u8; 4] = *b"PDNN";
pub const PARAMS_VERSION: u32 = 1;

fn write_tensor_data<S: Scalar, W: Write>(w: &mut W, data: &[S]) -> Result<(), NnError> {
    for v in data {
        w.write_all(&v.to_le_bytes_vec())?;
    }
    Ok(())
}

fn read_tensor_data<S: Scalar, R: Read>(r: &mut R, count: usize) -> Result<Vec<S>, NnError> {
    let mut buf = vec![0u8; count * S::BYTES];
    r.read_exact(&mut buf).map_err(|_| NnError::Corrupt("truncated tensor data".into()))?;
    Ok(buf.chunks_exact(S::BYTES).map(S::from_le_slice).collect())
}

pub fn write_params<S: Scalar, W: Write>(
    w: &mut W,
    store: &ParamStore<S>,
    adam: Option<&AdamState<S>>,
) -> Result<(), NnError> {
    w.write_all(&PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    let dtype = S::DTYPE.as_bytes();
    w.write_all(&(dtype.len() as u8).to_le_bytes())?;
    w.write_all(dtype)?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (id, name, tensor) in store.iter() {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[u8::from(store.is_trainable(id))])?;
        w.write_all(&(tensor.shape.len() as u8).to_le_bytes())?;
        for &d in &tensor.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        write_tensor_data(w, &tensor.data)?;
    }
    match adam {
        None => w.write_all(&[0u8])?,
        Some(state) => {
            w.write_all(&[1u8])?;
            w.write_all(&state.t.to_le_bytes())?;
            for blobs in [&state.m, &state.v] {
                for blob in blobs.iter() {
                    write_tensor_data(w, blob)?;
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::type_complexity)]
pub fn read_params<S: Scalar, R: Read>(r: &mut R) -> Result<(ParamStore<S>, Option<AdamState<S>>), NnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| NnError::Corrupt("truncated header".into()))?;
    if magic != PARAMS_MAGIC {
        return Err(NnError::Corrupt("bad parameter-blob magic".into()));
    }
    let version = read_u32(r)?;
    if version != PARAMS_VERSION {
        return Err(NnError::Corrupt(format!("unsupported parameter version {version}")));
    }
    let mut dtype_len = [0u8; 1];
    r.read_exact(&mut dtype_len).map_err(|_| NnError::Corrupt("truncated dtype".into()))?;
    let mut dtype = vec![0u8; dtype_len[0] as usize];
    r.read_exact(&mut dtype).map_err(|_| NnError::Corrupt("truncated dtype".into()))?;
    let dtype = String::from_utf8_lossy(&dtype).to_string();
    if dtype != S::DTYPE {
        return Err(NnError::DtypeMismatch { found: dtype, expected: S::DTYPE.to_string() });
    }
    let count = read_u32(r)? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let mut len = [0u8; 2];
        r.read_exact(&mut len).map_err(|_| NnError::Corrupt("truncated name".into()))?;
        let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
        r.read_exact(&mut name).map_err(|_| NnError::Corrupt("truncated name".into()))?;
        let name = String::from_utf8(name).map_err(|_| NnError::Corrupt("non-utf8 name".into()))?;
        let mut flags = [0u8; 1];
        r.read_exact(&mut flags).map_err(|_| NnError::Corrupt("truncated flags".into()))?;
        let mut ndims = [0u8; 1];
        r.read_exact(&mut ndims).map_err(|_| NnError::Corrupt("truncated dims".into()))?;
        let mut shape = Vec::with_capacity(ndims[0] as usize);
        for _ in 0..ndims[0] {
            shape.push(read_u32(r)? as usize);
        }
        let n: usize = shape.iter().product();
        let data = read_tensor_data::<S, _>(r, n)?;
        store.add_with_trainable(name, crate::tensor::Tensor::new(shape, data), flags[0] != 0);
    }
    let mut has_adam = [0u8; 1];
    r.read_exact(&mut has_adam).map_err(|_| NnError::Corrupt("truncated adam flag".into()))?;
    let adam = if has_adam[0] == 1 {
        let mut t_bytes = [0u8; 8];
        r.read_exact(&mut t_bytes).map_err(|_| NnError::Corrupt("truncated adam step".into()))?;
        let mut m = Vec::with_capacity(store.len());
        for i in 0..store.len() {
            m.push(read_tensor_data::<S, _>(r, store.tensor(ParamId(i)).len())?);
        }
        let mut v = Vec::with_capacity(store.len());
        for i in 0..store.len() {
            v.push(read_tensor_data::<S, _>(r, store.tensor(ParamId(i)).len())?);
        }
        Some(AdamState { m, v, t: u64::from_le_bytes(t_bytes) })
    } else {
        None
    };
    Ok((store, adam))
}

fn read_u32(r: &mut impl Read) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| NnError::Corrupt("truncated u32".into()))?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;

    #[test]
    fn round_trip_with_adam_state() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut store: ParamStore<f32> = ParamStore::new();
        store.add("a.w", Tensor::randn(vec![4, 3], 1.0, &mut rng));
        store.add_with_trainable("a.frozen", Tensor::randn(vec![2], 1.0, &mut rng), false);
        let mut state = AdamState::new(&store);
        state.t = 17;
        state.m[0][2] = 0.5;
        state.v[1][1] = 0.25;

        let mut buf = Vec::new();
        write_params(&mut buf, &store, Some(&state)).unwrap();
        let (back, adam) = read_params::<f32, _>(&mut buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.name(ParamId(0)), "a.w");
        assert_eq!(back.tensor(ParamId(0)).data, store.tensor(ParamId(0)).data);
        assert!(!back.is_trainable(ParamId(1)));
        let adam = adam.unwrap();
        assert_eq!(adam.t, 17);
        assert_eq!(adam.m[0][2], 0.5);
        assert_eq!(adam.v[1][1], 0.25);
    }

    #[test]
    fn dtype_mismatch_rejected() {
        let store: ParamStore<f32> = ParamStore::new();
        let mut buf = Vec::new();
        write_params(&mut buf, &store, None).unwrap();
        assert!(matches!(
            read_params::<f64, _>(&mut buf.as_slice()),
            Err(NnError::DtypeMismatch { .. })
        ));
    }

    #[test]
    fn truncation_rejected() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let mut store: ParamStore<f32> = ParamStore::new();
        store.add("w", Tensor::randn(vec![8], 1.0, &mut rng));
        let mut buf = Vec::new();
        write_params(&mut buf, &store, None).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_params::<f32, _>(&mut buf.as_slice()), Err(NnError::Corrupt(_))));
    }
}
