//! Differentiation: a reverse-mode tape over tensors (gradients with respect
//! to parameters) and second-order forward jets (derivatives with respect to
//! network inputs).

mod jet;
mod tape;

pub use jet::Jet2;
pub use tape::{Tape, TapeError, Var};
