use super::EncodingMessage;
use crate::chronogram::EpochSchedule;
use crate::field::PrimeModulus;
use crate::memory::EpochId;

/// Message length against the entropy of the epoch's weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyAccount {
    /// `|U_{i*}|·lg Δ`.
    pub h_bits: f64,
    pub message_bits: usize,
    /// `message_bits - h_bits`.
    pub slack: f64,
}

/// Uses the epoch's actual size, which differs from `β^{i*}` for the top
/// epoch and for Fibonacci-snapped schedules.
pub fn entropy_account(
    schedule: &EpochSchedule,
    istar: EpochId,
    modulus: PrimeModulus,
    message: &EncodingMessage,
) -> EntropyAccount {
    let h_bits = schedule.size(istar) as f64 * modulus.lg();
    let message_bits = message.total_bits();
    EntropyAccount {
        h_bits,
        message_bits,
        slack: message_bits as f64 - h_bits,
    }
}

/// `lg C(n, k)` via log-gamma.
pub fn lg_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let ln = libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    ln / core::f64::consts::LN_2
}
