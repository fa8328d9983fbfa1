//! Catalog and image preprocessing: validation, standardization, label
//! encoding, class weights, stratified split and image tensors.

mod image;
mod labels;
mod records;
mod scaler;
mod split;
mod validate;
mod weights;

pub use self::image::{image_to_tensor, load_image, resize_bilinear, ImageTensorSpec};
pub use labels::{class_counts, decode_labels, encode_labels, LabelTable};
pub use records::{
    check_coordinates, parse_catalog, read_catalog, write_catalog, CatalogRecord, Class, Features, RawRecord,
    CATALOG_COLUMNS, N_CLASSES, N_FEATURES,
};
pub use scaler::{ScalerState, STD_GUARD};
pub use split::{stratified_quotas, stratified_split, Split};
pub use validate::{imbalance_ratio, iqr_fences, quantile, validate_records, ColumnReport, OutlierReport, ValidationReport};
pub use weights::{compute_class_weights, ClassWeights};
