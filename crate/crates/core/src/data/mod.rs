//! Observation storage, ratings ingestion, synthetic problems and model files.

mod model_io;
mod ratings;
mod sparse;
mod synth;

pub use model_io::{decode_model, encode_model, load_model, model_file_len, save_model, MODEL_MAGIC};
pub use ratings::{load_ratings, parse_ratings, write_ratings, IdMap, Rating, RatingsOptions, Separator};
pub use sparse::{DuplicatePolicy, SparseObservations};
pub use synth::{gen_synthetic, SyntheticProblem};
