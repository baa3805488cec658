//! Reference problem packs: network design, graph isomorphism and optimal
//! experiment design.

pub mod generators;
pub mod gip;
pub mod network_design;
pub mod oedp;

pub use gip::{GraphIsomorphism, Verdict};
pub use network_design::{ArcCost, NetworkDesign, NetworkDesignInstance, NetworkDesignLmo};
pub use oedp::{Criterion, Oedp};
