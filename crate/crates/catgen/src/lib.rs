pub mod cli;
pub mod codec;
pub mod datagen;
pub mod elements;
pub mod geometry;
pub mod metrics;
pub mod neural;
pub mod structio;
