//! Small numeric and hashing helpers shared across modules.

use ndarray::Array2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

/// L2 norm of a complex slice.
pub fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative L2 distance ‖a − b‖ / ‖b‖. Returns ‖a‖ when b is zero.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_l2 length mismatch");
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den = l2_norm(b);
    if den == 0.0 {
        diff
    } else {
        diff / den
    }
}

/// Relative L2 distance between two complex grids.
pub fn rel_l2_grid(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "rel_l2_grid shape mismatch");
    rel_l2(
        a.as_slice().expect("standard layout"),
        b.as_slice().expect("standard layout"),
    )
}

/// Complex inner product Σ a·conj(b).
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Hex-encoded SHA-256 of a byte stream fed in chunks.
pub struct ContentHasher {
    inner: Sha256,
}

impl ContentHasher {
    pub fn new() -> Self {
        ContentHasher {
            inner: Sha256::new(),
        }
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.inner.update(bytes);
    }

    pub fn update_f32s(&mut self, values: impl IntoIterator<Item = f32>) {
        for v in values {
            self.inner.update(v.to_le_bytes());
        }
    }

    pub fn update_f64s(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.inner.update(v.to_le_bytes());
        }
    }

    pub fn finish(self) -> String {
        hex_string(&self.inner.finalize())
    }
}

impl Default for ContentHasher {
    fn default() -> Self {
        Self::new()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

fn hex_string(digest: &[u8]) -> String {
    let mut s = String::with_capacity(digest.len() * 2);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
