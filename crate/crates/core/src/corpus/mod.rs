//! Dataset ingestion, label cleaning and bag-of-words preparation.

mod annotation;
mod folds;
mod records;
mod text;

pub use annotation::{
    annotation_kappa, annotation_pairs, cohen_kappa, filter_annotations, merge_labels,
    pairwise_agreement, score_annotators, Annotation, AnnotationSet, FilterPolicy,
    DEFAULT_CONFIDENCE_THRESHOLD, MAX_CONFIDENCE,
};
pub use folds::split_folds;
pub use records::{
    load_debunks, read_debunks, read_raw_debunks, Category, DebunkFormat, DebunkRecord, MediaType,
    RawDebunk, RawPlatform, Veracity,
};
pub use text::{
    bow_tokens, build_vocabulary, keep_token, to_bow, tokenize, BowVector, LabeledDocument,
    Stopwords, Vocabulary, DEFAULT_VOCAB_SIZE, MIN_TOKEN_CHARS,
};

pub(crate) use records::open;
