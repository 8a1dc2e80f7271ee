//! Core data types shared by every stage of the pipeline: parameter spaces,
//! metric schemas, datasets, and the unit-interval normalization that maps
//! everything onto `[0,1]` vectors.

mod dataset;
mod normalize;
mod space;

pub use dataset::{Configuration, Dataset, DatasetRow, MetricVector, Provenance};
pub use normalize::{
    concat_input, denormalize_config, normalize_config, AeInput, NormalizationSpec,
};
pub use space::{
    load_parameter_space, Direction, MetricSchema, ParameterKind, ParameterSpace, ParameterSpec,
};
