//! Medium access control: frames, the DCF station and the token scheduler.

pub mod dcf;
pub mod frame;
pub mod token;
