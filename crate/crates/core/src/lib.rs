//! Decoding and failure statistics for the toric code in square and rotated
//! orientations.

pub mod enumeration;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod matching;
pub mod model;
pub mod montecarlo;
pub mod noise;
pub mod pathcount;
pub mod splitting;
pub mod walks;

pub use error::{Error, Result};
pub use geometry::{CodeGeometry, EdgeIndex, Orientation, TorusDisplacement, Vertex, WindingClass};
pub use matching::{decode, extract_syndrome, winding_class, DecodeOutcome, Decoder, Syndrome};
pub use noise::{rng_stream, sample_error, ErrorConfig, NoiseParams};
pub use enumeration::{coset_report, enumerate_failures, random_decoder_expectation, CosetReport, DecoderPolicy, TallyResult};
