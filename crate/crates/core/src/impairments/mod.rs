//! Hardware impairment models applied along the transmit and receive chains.

pub mod clock;
pub mod pa;
pub mod psd;
pub mod quant;

pub use clock::{jitter_generate, resample_clock, TimingJitter};
pub use pa::{pa_apply, PaModel};
pub use psd::{pn_apply, pn_default, pn_generate, NoisePsdSpec};
pub use quant::{quantize_clip, sqnr_db, QuantizerSpec};
