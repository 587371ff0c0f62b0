//! Preference data: labels, judgments, pairs, ingestion, aggregation, splits and
//! inter-rater agreement.

mod aggregate;
mod agreement;
mod ingest;
mod split;
mod types;

pub use aggregate::{aggregate_majority, classify_agreement, AgreementCategory, AgreementKind};
pub use agreement::{cohen_kappa_quadratic, krippendorff_alpha, masi_distance, Annotation};
pub use ingest::{
    ingest_dataset, ingest_dataset_with, load_pairs, read_records, record_json, write_records, FieldMap, Schema,
};
pub use split::{split_dataset, Split};
pub use types::{
    label_from_scores, AnnotatorJudgment, LikertScore, PreferenceLabel, PreferencePair, Side, Source,
};
