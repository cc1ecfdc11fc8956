//! Shared fixtures for the criterion benchmarks.

use noma_core::channel::{drop_users, LinkState, UserDrop};
use noma_core::harness::ExperimentConfig;
use noma_core::{ModulationPair, PairingParams};

pub const QPSK_16QAM: ModulationPair = ModulationPair::new(4, 16);

/// Link seeing `snr_db` at unit noise variance.
pub fn link_db(snr_db: f64) -> LinkState {
    LinkState::from_snr(10f64.powf(snr_db / 10.0)).expect("finite SNR")
}

/// Default pairing constraints with `samples` observations.
pub fn params(samples: usize) -> PairingParams {
    PairingParams::new(QPSK_16QAM, samples, 0.8, 0.01)
}

/// Cell drop with the default radius and 10 dB transmit SNR.
pub fn cell_drop(users: usize, seed: u64) -> UserDrop {
    let cfg = ExperimentConfig::default();
    drop_users(users, cfg.radius, cfg.noise_var(cfg.tx_snr_db), seed).expect("valid drop")
}
