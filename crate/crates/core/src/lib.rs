pub mod dataset;
pub mod env;
pub mod error;
pub mod exec;
pub mod ingest;
pub mod learners;
pub mod predictor;
pub mod seed;
pub mod collector;
pub mod weights;
pub mod evaluation;
pub mod theory;
