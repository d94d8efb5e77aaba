pub mod acoustic;
pub mod pca;
pub mod text;
pub mod wer;

pub use acoustic::{
    concat_embeddings, embedding_file_name, load_embedding, pause_features, write_embedding,
    EmbeddingSource, EmbeddingVector, PauseFeatures, TaskScope,
};
pub use pca::{default_target_dim, pca_fit, pca_transform, PcaModel};
pub use text::{
    extract_targets, fluency_features, linguistic_features, load_macrodescriptors,
    normalize_disfluencies, default_fillers, default_stopwords, read_word_list, tokenize, FluencyFeatures, LinguisticFeatures, MacroDescriptors,
    TargetLexicon, Transcript, DISFLUENCY_PLACEHOLDER,
};
pub use wer::{wer, WerReport};
