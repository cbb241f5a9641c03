//! Discrete-event simulator for comparing IEEE 802.11 DCF with Token-DCF.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod mac;
pub mod medium;
pub mod metrics;
pub mod network;
pub mod sim;
pub mod traffic;
