//! Online and batch testing of the randomness and exchangeability
//! hypotheses with conformal p-values and betting martingales.
//!
//! The pipeline is: a [nonconformity measure](nonconformity) scores each new
//! observation against the ones seen so far, a
//! [conformal transducer](pvalues::ConformalTransducer) turns the scores into
//! p-values that are independent and uniform under exchangeability, and a
//! [betting strategy](betting) gambles against uniformity. The resulting
//! capital can be read on the [evidence scale](evidence) or fed to a
//! [change detector](changedetect).

pub mod batch;
pub mod betting;
pub mod changedetect;
pub mod datasets;
pub mod error;
pub mod evidence;
pub mod nonconformity;
pub mod observation;
pub mod pvalues;
pub mod randomness;
pub mod stats;
pub mod upperprob;

pub use error::{Error, Result};
pub use observation::Observation;
pub use randomness::SeededRandomness;
