pub mod field;
pub mod hash;
pub mod didp;
pub mod circuit;
pub mod profile;
pub mod backend;
pub mod chain;
pub mod games;
pub mod accounting;
pub mod bench;
pub mod schema;
