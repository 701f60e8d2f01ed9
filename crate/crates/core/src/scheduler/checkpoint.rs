//! Binary weight dump for a scheduling agent.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes   "MECQNET1"
//! num_terminals  u32
//! num_sizes      u32       number of layer widths (input .. output)
//! sizes          u32 x num_sizes
//! train_steps    u64
//! epsilon        f64
//! q_eval         per layer: weights (out x in, row-major) then biases, f64
//! q_target       same as q_eval
//! ```
//!
//! Floats are written with `to_le_bytes`, so a read returns bit-identical values.

use std::io::{Read, Write};

use super::network::{Dense, QNetwork};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MECQNET1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub num_terminals: usize,
    pub train_steps: u64,
    pub epsilon: f64,
    pub q_eval: QNetwork,
    pub q_target: QNetwork,
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let sizes = ckpt.q_eval.sizes();
    if sizes != ckpt.q_target.sizes() {
        return Err(Error::Checkpoint("online and target networks differ in shape".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(ckpt.num_terminals as u32).to_le_bytes())?;
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in &sizes {
        w.write_all(&(*s as u32).to_le_bytes())?;
    }
    w.write_all(&ckpt.train_steps.to_le_bytes())?;
    w.write_all(&ckpt.epsilon.to_le_bytes())?;
    for net in [&ckpt.q_eval, &ckpt.q_target] {
        for layer in net.layers() {
            for v in layer.weights.iter().chain(&layer.biases) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let num_terminals = read_u32(&mut r)? as usize;
    let num_sizes = read_u32(&mut r)? as usize;
    if !(3..=16).contains(&num_sizes) {
        return Err(Error::Checkpoint(format!("implausible layer count {num_sizes}")));
    }
    let sizes = (0..num_sizes)
        .map(|_| read_u32(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    if sizes[0] != 2 * num_terminals + 1 || sizes[num_sizes - 1] != 1 << num_terminals {
        return Err(Error::Checkpoint(format!(
            "layer sizes {sizes:?} do not fit {num_terminals} terminals"
        )));
    }
    let train_steps = read_u64(&mut r)?;
    let epsilon = read_f64(&mut r)?;
    let q_eval = read_net(&mut r, &sizes)?;
    let q_target = read_net(&mut r, &sizes)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        num_terminals,
        train_steps,
        epsilon,
        q_eval,
        q_target,
    })
}

fn read_net<R: Read>(r: &mut R, sizes: &[usize]) -> Result<QNetwork> {
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = (0..inputs * outputs).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
            let biases = (0..outputs).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
            Ok(Dense {
                inputs,
                outputs,
                weights,
                biases,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QNetwork::from_layers(layers))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
