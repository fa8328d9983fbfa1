//! Classification of galaxies, quasars and stars from catalog features and
//! sky cutouts with a late-fusion network.
//!
//! The crate is organised bottom-up:
//!
//! * [`neural`]: tensor engine with reverse-mode autodiff, layers, loss and
//!   optimizers.
//! * [`preprocess`]: catalog validation, standardization, label encoding,
//!   class weights, stratified split and image loading.
//! * [`fusion`]: the tabular ANN, the image CNN and the late-fusion model.
//! * [`train`]: training loop, metrics and training curves.
//! * [`baselines`]: logistic regression, Gaussian naive Bayes and kNN.
//! * [`ingest`]: cutout/catalog fetching and the dataset manifest.
//! * [`pipeline`]: the staged commands behind the `skyfusion` binary.

pub mod error;

mod io_util;
pub mod neural;
pub mod fusion;
pub mod preprocess;
pub mod train;
pub mod baselines;
pub mod ingest;
pub mod pipeline;

pub use error::{Error, Result};
