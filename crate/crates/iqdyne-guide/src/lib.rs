//! Keeps the book honest: every chapter of `book/src/` is included as a
//! module doc comment, so `cargo test --doc -p iqdyne-guide` compiles and
//! runs each of its code listings against the current library. A listing
//! that drifts out of sync with the API fails the build here.

#[doc = include_str!("../../../README.md")]
pub mod readme {}

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/signal-model.md")]
pub mod signal_model {}

#[doc = include_str!("../../../book/src/frequency-response.md")]
pub mod frequency_response {}

#[doc = include_str!("../../../book/src/undersampling.md")]
pub mod undersampling {}

#[doc = include_str!("../../../book/src/camera-noise.md")]
pub mod camera_noise {}

#[doc = include_str!("../../../book/src/spectra-and-fitting.md")]
pub mod spectra_and_fitting {}

#[doc = include_str!("../../../book/src/sensitivity.md")]
pub mod sensitivity {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/file-formats.md")]
pub mod file_formats {}
