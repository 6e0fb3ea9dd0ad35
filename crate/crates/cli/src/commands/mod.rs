pub mod design;
pub mod explore;
pub mod fit;
pub mod simulate;
