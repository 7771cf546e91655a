pub mod discriminate;
pub mod episodes;
pub mod gate;
pub mod mask;
pub mod rank;
pub mod stats;
pub mod tfidf;
