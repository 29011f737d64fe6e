pub mod circuit;
pub mod haar_epsilon;
pub mod identities;
pub mod variance;
