//! Linear face models: PCA over registered meshes sharing the template
//! topology, synthesis, and landmark or dense coefficient fitting.

mod fit;
mod io;
mod model;
mod pca;

pub use fit::{fit_dense, fit_landmarks, FitResult, Regularization};
pub use io::{decode_model, encode_model, load_model, save_model, ModelHeader, MAGIC, VERSION};
pub use model::{unstack, Coefficients, MorphableModel};
pub use pca::{
    build_expression_model, build_shape_model, principal_components, stack, PcaBasis, Truncation,
    EXPRESSION_TRUNCATION, SHAPE_TRUNCATION,
};
