//! Catalog and cutout retrieval, the on-disk image cache and the dataset
//! manifest.

mod cutout;
mod fetch;
mod manifest;
mod mock;
mod transport;

pub use cutout::{build_cutout_url, CutoutRequest, MAX_SCALE, MAX_SIDE, MIN_SCALE, MIN_SIDE};
pub use fetch::{catalog_url, fetch_catalog, fetch_cutouts, CutoutTemplate, FetchPolicy, FetchSummary};
pub use manifest::{
    check_object_id, image_relpath, manifest_path, DatasetManifest, FetchStatus, ManifestRow, SplitTag,
    MANIFEST_COLUMNS,
};
pub use mock::{is_mock_url, MockSky, MOCK_SCHEME};
pub use transport::{HttpTransport, Transport};
