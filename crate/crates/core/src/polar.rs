//! The binary polar transform `x = u G_N` with `G_N = B_N F^{⊗n}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log₂ N`, or an error when `N` is not a power of two.
pub fn log2_exact(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Validation(format!("block length {n} is not a power of two")));
    }
    Ok(n.trailing_zeros())
}

/// The bit-reversal permutation on `0..N`: entry `i` is `i` with its
/// `log₂ N` bits reversed.
pub fn bit_reversal(n: usize) -> Result<Vec<usize>> {
    let bits = log2_exact(n)?;
    Ok((0..n)
        .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
        .collect())
}

/// `u G_N` over GF(2).
pub fn polar_encode(u: &[u8]) -> Result<Vec<u8>> {
    let perm = bit_reversal(u.len())?;
    let mut x: Vec<u8> = perm.iter().map(|&p| u[p] & 1).collect();
    polar_butterfly(&mut x);
    Ok(x)
}

/// In-place `x ← x F^{⊗n}`; `x.len()` must be a power of two.
pub(crate) fn polar_butterfly(x: &mut [u8]) {
    let n = x.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                x[i] ^= x[i + h];
            }
        }
        h *= 2;
    }
}

/// A coset code `(N, K, A, u_{A^c})`. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetCodeSpec {
    pub n: usize,
    /// Information positions, ascending.
    pub info: Vec<usize>,
    /// `frozen[i]` is the value of `u_i` for `i ∉ A` and ignored on `A`.
    pub frozen: Vec<u8>,
}

impl CosetCodeSpec {
    /// Code with information set `info` and every frozen bit 0.
    pub fn new(n: usize, mut info: Vec<usize>) -> Result<Self> {
        log2_exact(n)?;
        info.sort_unstable();
        info.dedup();
        if info.last().is_some_and(|&i| i >= n) {
            return Err(Error::Validation(format!("information index out of range for N = {n}")));
        }
        Ok(CosetCodeSpec { n, info, frozen: vec![0; n] })
    }

    pub fn with_frozen(n: usize, info: Vec<usize>, frozen: Vec<u8>) -> Result<Self> {
        let mut spec = Self::new(n, info)?;
        if frozen.len() != n {
            return Err(Error::Validation(format!("frozen vector has length {}, expected {n}", frozen.len())));
        }
        spec.frozen = frozen.iter().map(|b| b & 1).collect();
        for &i in &spec.info {
            spec.frozen[i] = 0;
        }
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.info.len()
    }

    pub fn rate(&self) -> f64 {
        self.info.len() as f64 / self.n as f64
    }

    pub fn is_info(&self, i: usize) -> bool {
        self.info.binary_search(&i).is_ok()
    }

    /// `u^N` with `info_bits` placed on `A` and frozen values elsewhere.
    pub fn assemble(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.info.len() {
            return Err(Error::Validation(format!(
                "expected {} information bits, got {}",
                self.info.len(),
                info_bits.len()
            )));
        }
        let mut u = self.frozen.clone();
        for (&i, &b) in self.info.iter().zip(info_bits) {
            u[i] = b & 1;
        }
        Ok(u)
    }
}

pub fn coset_encode(info_bits: &[u8], spec: &CosetCodeSpec) -> Result<Vec<u8>> {
    polar_encode(&spec.assemble(info_bits)?)
}
