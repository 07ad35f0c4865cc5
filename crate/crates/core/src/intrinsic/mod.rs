//! Intrinsic analyses: neighbour lists, identifier-normalized agreement,
//! cross-embedding correlation and 2-D projection.

pub mod agreement;
pub mod correlation;
pub mod plot;
pub mod similarity;
pub mod tsne;

pub use agreement::{
    agreement_matrix, jaccard, normalize_list, read_dictionary, AgreementReport, FallbackPolicy,
    NormalizationDictionary, NormalizedList,
};
pub use correlation::{correlation_matrix, pearson, shared_vocabulary, CorrelationReport};
pub use plot::scatter_svg;
pub use similarity::{similarity_query_report, SimilarityReport, DEFAULT_K};
pub use tsne::{tsne, tsne_with, Projection2D, TsneConfig};
