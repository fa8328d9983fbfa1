use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::preprocess::{read_catalog, CatalogRecord};

use super::cutout::{build_cutout_url, CutoutRequest};
use super::manifest::{image_relpath, DatasetManifest, FetchStatus};
use super::transport::Transport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    pub max_concurrent: usize,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First retry delay; doubled for each further attempt.
    pub backoff_ms: u64,
    /// Pause after every request, per worker.
    pub politeness_ms: u64,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            max_concurrent: 4,
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 500,
            politeness_ms: 100,
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_concurrent == 0 {
            return Err(Error::Config("max_concurrent must be at least 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1 << (attempt - 1).min(16)))
    }
}

/// Zoom and side length shared by every cutout of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoutTemplate {
    pub scale: f64,
    pub side: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FetchSummary {
    pub requested: usize,
    pub fetched: usize,
    pub skipped: usize,
    pub failed: usize,
}

fn get_with_retries(transport: &dyn Transport, url: &str, policy: &FetchPolicy) -> Result<Vec<u8>> {
    let mut attempt = 0;
    loop {
        let result = transport.get(url).and_then(|bytes| {
            if image::guess_format(&bytes).ok() == Some(image::ImageFormat::Jpeg) {
                Ok(bytes)
            } else {
                Err(Error::Transport("response is not a JPEG".into()))
            }
        });
        if policy.politeness_ms > 0 {
            std::thread::sleep(Duration::from_millis(policy.politeness_ms));
        }
        match result {
            Ok(bytes) => return Ok(bytes),
            Err(e) if attempt >= policy.retries => return Err(e),
            Err(_) => {
                attempt += 1;
                std::thread::sleep(policy.backoff(attempt));
            }
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

/// Downloads every missing cutout into `<data_dir>/images/<object_id>.jpg`.
///
/// Rows whose file already exists are marked fetched without a request.
/// Up to `policy.max_concurrent` requests are in flight; results are applied
/// to the manifest and the cache by the calling thread only. A row that
/// still fails after its retries is marked `failed:<reason>` and the batch
/// carries on.
pub fn fetch_cutouts(
    manifest: &mut DatasetManifest,
    data_dir: &Path,
    base_url: &str,
    template: CutoutTemplate,
    policy: &FetchPolicy,
    transport: &dyn Transport,
) -> Result<FetchSummary> {
    policy.validate()?;
    let mut summary = FetchSummary::default();
    let mut jobs: Vec<(usize, String)> = Vec::new();
    for (i, row) in manifest.rows.iter_mut().enumerate() {
        let rel = image_relpath(&row.object_id);
        if data_dir.join(&rel).is_file() {
            row.image_path = rel;
            row.status = FetchStatus::Fetched;
            summary.skipped += 1;
            continue;
        }
        let req = CutoutRequest::square(row.ra, row.dec, template.scale, template.side);
        match build_cutout_url(base_url, &req) {
            Ok(url) => jobs.push((i, url)),
            Err(e) => {
                row.status = FetchStatus::Failed(one_line(&e));
                summary.failed += 1;
            }
        }
    }
    summary.requested = jobs.len();
    if jobs.is_empty() {
        return Ok(summary);
    }

    let next = AtomicUsize::new(0);
    let workers = policy.max_concurrent.min(jobs.len());
    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<u8>>)>();
    let mut write_error = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some((row, url)) = jobs.get(k) else { break };
                if tx.send((*row, get_with_retries(transport, url, policy))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, result) in rx {
            let row = &mut manifest.rows[i];
            let rel = image_relpath(&row.object_id);
            let outcome = result.and_then(|bytes| write_atomic(&data_dir.join(&rel), &bytes));
            match outcome {
                Ok(()) => {
                    row.image_path = rel;
                    row.status = FetchStatus::Fetched;
                    summary.fetched += 1;
                }
                Err(e @ Error::Io { .. }) => {
                    row.status = FetchStatus::Failed(one_line(&e));
                    summary.failed += 1;
                    write_error.get_or_insert(e);
                }
                Err(e) => {
                    row.status = FetchStatus::Failed(one_line(&e));
                    summary.failed += 1;
                }
            }
        }
    });
    // A cache that cannot be written is an environment problem, not a
    // per-object one.
    if summary.fetched == 0 {
        if let Some(e) = write_error {
            return Err(e);
        }
    }
    Ok(summary)
}

pub fn catalog_url(base_url: &str, sql: &str) -> String {
    format!(
        "{base_url}?cmd={}&format=csv",
        utf8_percent_encode(sql, NON_ALPHANUMERIC)
    )
}

/// Runs `sql` against a catalog endpoint that answers in CSV and validates
/// the rows against the catalog schema.
pub fn fetch_catalog(transport: &dyn Transport, base_url: &str, sql: &str) -> Result<Vec<CatalogRecord>> {
    let bytes = transport.get(&catalog_url(base_url, sql))?;
    read_catalog(bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = FetchPolicy {
            backoff_ms: 100,
            ..FetchPolicy::default()
        };
        assert_eq!(p.backoff(1), Duration::from_millis(100));
        assert_eq!(p.backoff(3), Duration::from_millis(400));
    }

    #[test]
    fn catalog_query_is_encoded() {
        let url = catalog_url("http://h/sql", "SELECT TOP 5 ra FROM x");
        assert_eq!(url, "http://h/sql?cmd=SELECT%20TOP%205%20ra%20FROM%20x&format=csv");
    }

    #[test]
    fn zero_concurrency_rejected() {
        let p = FetchPolicy {
            max_concurrent: 0,
            ..FetchPolicy::default()
        };
        assert!(p.validate().is_err());
    }
}
