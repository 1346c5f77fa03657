//! Numerics for incomplete polynomial approximation on unions of compact
//! sets, the potential-theoretic constants behind it, weighted densities of
//! integer sets, and finite-horizon constructions of frequently universal
//! Taylor series.

pub mod approx;
pub mod cli;
pub mod density;
pub mod error;
pub mod freqsets;
pub mod geometry;
pub mod lp;
pub mod par;
pub mod poly;
pub mod potential;
pub mod uts;
pub mod xprec;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// SHA-256 of the compact JSON text of `v`, as lowercase hex. Object keys are
/// serialized in sorted order, so the digest does not depend on key order.
pub fn config_hash(v: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    let text = serde_json::to_string(v).expect("JSON values serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
