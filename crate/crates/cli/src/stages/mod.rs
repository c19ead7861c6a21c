pub mod cluster;
pub mod gpdi;
pub mod ks;
pub mod regress;
pub mod report;
pub mod validate;
