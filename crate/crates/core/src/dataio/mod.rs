//! Ingestion of flow tables: parsing, categorical encoding, normalization,
//! label taxonomies and train/test splitting.

mod dataset;
mod encode;
mod norm;
mod parse;
mod schema;
mod split;
mod taxonomy;

pub use dataset::{Dataset, FeatureColumn, FeatureKind};
pub use encode::{encode_categoricals, CategoricalEncoder, EncodeReport, EncodingMode};
pub use norm::{apply_norm, normalize, NormMethod, NormParams};
pub use parse::{
    parse_dataset, parse_dataset_with, parse_reader, ParseOptions, ParseReport, RowIssue,
    UNLABELED,
};
pub use schema::{ColumnKind, ColumnSchema, Schema};
pub use split::{split, split_indices, stratified_subsample, SplitIndices};
pub use taxonomy::{map_labels, AttackTaxonomy, LabelMode, UNKNOWN_CATEGORY};
