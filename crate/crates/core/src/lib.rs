//! Physics-informed networks, their conversion to spiking networks, and
//! tools to calibrate and measure the conversion error.

pub mod analysis;
pub mod autodiff;
pub mod calibration;
pub mod cli;
pub mod network;
pub mod optim;
pub mod pinn;
pub mod snn;
pub mod table;
pub mod tensor;
