pub mod cli;
pub mod error;
pub mod optimize;
pub mod plot;
pub mod quadrature;
pub mod rieszmap;
pub mod sharpness;
pub mod specfun;
pub mod symgeom;
pub mod transforms;
pub mod weightedops;
