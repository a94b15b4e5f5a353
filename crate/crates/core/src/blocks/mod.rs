//! Composite blocks of the architecture: point-wise feature selection (PWFS),
//! the joint channel/spatial attention block (MassAtt), the three-convolution
//! stem used as blocks 1 and 3, and the dual-path group block used as blocks
//! 2 and 4.

mod dual_path;
mod mass_att;
mod pwfs;
mod stem;

pub use dual_path::{DualPathBlock, PathWiring};
pub use mass_att::MassAtt;
pub use pwfs::pwfs;
pub use stem::StemBlock;
