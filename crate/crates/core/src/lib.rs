pub mod dataset;
pub mod fuzzy;
pub mod image;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod road;
pub mod signal;
pub mod weather;

pub use road::RoadClass;
