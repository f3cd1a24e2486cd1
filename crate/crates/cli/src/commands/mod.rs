pub mod composite;
pub mod eval;
pub mod index;
pub mod loss;
pub mod maps;
pub mod synth;
pub mod toy;
