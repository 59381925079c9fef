//! Paged client for an iNaturalist-style observations endpoint.
//!
//! Pages are requested until one comes back shorter than the page size. Every
//! request passes a sliding-window rate limiter; HTTP 429, 5xx and timeouts
//! are retried with exponential backoff (1 s, 2 s, 4 s, ... unless the server
//! sends `Retry-After`). Response bodies can be cached on disk and replayed.

mod cache;
mod normalize;
mod transport;

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::SecondsFormat;
use serde_json::Value;

pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use normalize::{normalize, NormalizeError, Normalized};
pub use transport::{
    Clock, HttpResponse, HttpTransport, ManualClock, RateLimiter, SystemClock, Transport, TransportError, RATE_WINDOW,
};

use crate::data::{Fragment, RowIssue, Timestamp};
use crate::geo::BBox;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("gave up on {url} after {attempts} attempts: {last}")]
    RetriesExhausted { url: String, attempts: u32, last: String },
    #[error("malformed response from {url}: {reason}")]
    MalformedBody { url: String, reason: String },
    #[error("offline and not cached: {0}")]
    CacheMiss(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("{0}")]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestQuery {
    pub endpoint_base: String,
    pub bbox: Option<BBox>,
    pub place_id: Option<String>,
    pub date_from: Timestamp,
    pub date_to: Timestamp,
    pub page_size: usize,
}

impl IngestQuery {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.page_size == 0 {
            return Err(IngestError::InvalidQuery("page size must be at least 1".into()));
        }
        if self.date_to < self.date_from {
            return Err(IngestError::InvalidQuery("date_to precedes date_from".into()));
        }
        reqwest::Url::parse(&self.endpoint_base).map_err(|e| IngestError::InvalidQuery(format!("endpoint: {e}")))?;
        Ok(())
    }

    /// Request URL for a 1-based page, parameters in sorted order.
    pub fn page_url(&self, page: usize) -> String {
        let time = |t: &Timestamp| t.to_rfc3339_opts(SecondsFormat::Secs, true);
        let mut params: BTreeMap<&str, String> = BTreeMap::new();
        params.insert("d1", time(&self.date_from));
        params.insert("d2", time(&self.date_to));
        params.insert("order", "asc".into());
        params.insert("order_by", "id".into());
        params.insert("page", page.to_string());
        params.insert("per_page", self.page_size.to_string());
        if let Some(b) = &self.bbox {
            params.insert("nelat", b.max_lat.to_string());
            params.insert("nelng", b.max_lon.to_string());
            params.insert("swlat", b.min_lat.to_string());
            params.insert("swlng", b.min_lon.to_string());
        }
        if let Some(p) = &self.place_id {
            params.insert("place_id", p.clone());
        }
        reqwest::Url::parse_with_params(&self.endpoint_base, &params).expect("validated endpoint").to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchLimits {
    pub max_requests_per_minute: usize,
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for FetchLimits {
    fn default() -> Self {
        Self { max_requests_per_minute: 60, max_retries: 5, backoff_base: Duration::from_secs(1) }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FetchOptions {
    pub limits: FetchLimits,
    pub cache: Option<ResponseCache>,
    /// Serve every page from the cache; a miss is an error.
    pub offline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FetchStats {
    /// Network requests issued, retries included.
    pub requests: u32,
    pub retries: u32,
    pub cache_hits: u32,
    pub pages: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOutcome {
    pub fragment: Fragment,
    pub stats: FetchStats,
}

fn transient(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

fn request_with_retry(
    url: &str,
    limits: &FetchLimits,
    limiter: &mut RateLimiter,
    transport: &mut dyn Transport,
    clock: &mut dyn Clock,
    stats: &mut FetchStats,
) -> Result<Vec<u8>, IngestError> {
    let mut attempt = 0u32;
    loop {
        limiter.acquire(clock);
        stats.requests += 1;
        let (last, wait) = match transport.get(url) {
            Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
            Ok(r) if transient(r.status) => (format!("HTTP {}", r.status), r.retry_after),
            Ok(r) => return Err(IngestError::Http { status: r.status, url: url.into() }),
            Err(TransportError::Timeout(m)) => (format!("timeout: {m}"), None),
            Err(e) => return Err(e.into()),
        };
        if attempt >= limits.max_retries {
            return Err(IngestError::RetriesExhausted { url: url.into(), attempts: attempt + 1, last });
        }
        clock.sleep(wait.unwrap_or(limits.backoff_base * 2u32.saturating_pow(attempt)));
        attempt += 1;
        stats.retries += 1;
    }
}

fn page_results(url: &str, body: &[u8]) -> Result<Vec<Value>, IngestError> {
    let malformed = |reason: String| IngestError::MalformedBody { url: url.into(), reason };
    let doc: Value = serde_json::from_slice(body).map_err(|e| malformed(e.to_string()))?;
    match doc {
        Value::Object(mut m) => match m.remove("results") {
            Some(Value::Array(v)) => Ok(v),
            _ => Err(malformed("no \"results\" array".into())),
        },
        Value::Array(v) => Ok(v),
        _ => Err(malformed("expected an object or array".into())),
    }
}

/// Fetches and normalizes every page of `query`.
pub fn fetch_all(
    query: &IngestQuery,
    options: &FetchOptions,
    transport: &mut dyn Transport,
    clock: &mut dyn Clock,
) -> Result<FetchOutcome, IngestError> {
    query.validate()?;
    let mut limiter = RateLimiter::new(options.limits.max_requests_per_minute);
    let mut stats = FetchStats::default();
    let mut fragment = Fragment::default();
    let mut ordinal = 0;
    for page in 1.. {
        let url = query.page_url(page);
        let now = chrono::Utc::now();
        let cached = match &options.cache {
            Some(c) => c.get(&url, now)?,
            None => None,
        };
        let body = match cached {
            Some(b) => {
                stats.cache_hits += 1;
                b
            }
            None if options.offline => return Err(IngestError::CacheMiss(url)),
            None => {
                let b = request_with_retry(&url, &options.limits, &mut limiter, transport, clock, &mut stats)?;
                if let Some(c) = &options.cache {
                    c.put(&url, &b, now)?;
                }
                b
            }
        };
        stats.pages += 1;
        let results = page_results(&url, &body)?;
        for r in &results {
            ordinal += 1;
            match normalize(r) {
                Ok(n) => {
                    fragment.observations.push(n.observation);
                    fragment.identifications.extend(n.identifications);
                    fragment.skipped.extend(n.dropped.into_iter().map(|reason| RowIssue { line: ordinal, reason }));
                }
                Err(e) => fragment.skipped.push(RowIssue { line: ordinal, reason: e.to_string() }),
            }
        }
        if results.len() < query.page_size {
            break;
        }
    }
    Ok(FetchOutcome { fragment, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use serde_json::json;
    use std::collections::VecDeque;

    struct Scripted {
        replies: VecDeque<Result<HttpResponse, TransportError>>,
        urls: Vec<String>,
    }

    impl Transport for Scripted {
        fn get(&mut self, url: &str) -> Result<HttpResponse, TransportError> {
            self.urls.push(url.into());
            self.replies.pop_front().expect("unscripted request")
        }
    }

    fn ok(body: Value) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse { status: 200, retry_after: None, body: body.to_string().into_bytes() })
    }

    fn status(s: u16) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse { status: s, retry_after: None, body: vec![] })
    }

    fn page(start: usize, n: usize) -> Value {
        let results: Vec<Value> =
            (start..start + n).map(|i| json!({"id": i, "user": {"id": i % 7}, "observed_on": "2020-04-25"})).collect();
        json!({ "total_results": 0, "results": results })
    }

    fn query(page_size: usize) -> IngestQuery {
        IngestQuery {
            endpoint_base: "http://example.test/v1/observations".into(),
            bbox: None,
            place_id: Some("1".into()),
            date_from: Utc.with_ymd_and_hms(2020, 4, 24, 0, 0, 0).unwrap(),
            date_to: Utc.with_ymd_and_hms(2020, 4, 28, 0, 0, 0).unwrap(),
            page_size,
        }
    }

    fn run(
        replies: Vec<Result<HttpResponse, TransportError>>,
        q: &IngestQuery,
    ) -> (Result<FetchOutcome, IngestError>, ManualClock, Scripted) {
        let mut t = Scripted { replies: replies.into(), urls: vec![] };
        let mut clock = ManualClock::default();
        let out = fetch_all(q, &FetchOptions::default(), &mut t, &mut clock);
        (out, clock, t)
    }

    #[test]
    fn empty_first_page_is_one_request() {
        let (out, _, t) = run(vec![ok(page(0, 0))], &query(200));
        let out = out.unwrap();
        assert!(out.fragment.is_empty());
        assert_eq!(out.stats.requests, 1);
        assert_eq!(t.urls.len(), 1);
    }

    #[test]
    fn pagination_arithmetic() {
        let (out, _, t) =
            run(vec![ok(page(0, 200)), ok(page(200, 200)), ok(page(400, 200)), ok(page(600, 50))], &query(200));
        let out = out.unwrap();
        assert_eq!(out.fragment.observations.len(), 650);
        assert_eq!(out.stats.requests, 4);
        assert!(t.urls[3].contains("page=4"));
    }

    #[test]
    fn backoff_doubles_and_honours_retry_after() {
        let mut limited = HttpResponse { status: 429, retry_after: Some(Duration::from_secs(7)), body: vec![] };
        limited.body.clear();
        let replies = vec![status(503), Err(TransportError::Timeout("slow".into())), Ok(limited), ok(page(0, 3))];
        let (out, clock, _) = run(replies, &query(10));
        let out = out.unwrap();
        assert_eq!(out.stats.retries, 3);
        assert_eq!(clock.sleeps, vec![Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(7)]);
    }

    #[test]
    fn budget_exhaustion_and_hard_failures() {
        let q = query(10);
        let (out, _, _) = run((0..6).map(|_| status(500)).collect(), &q);
        assert!(matches!(out, Err(IngestError::RetriesExhausted { attempts: 6, .. })));
        let (out, _, _) = run(vec![status(404)], &q);
        assert!(matches!(out, Err(IngestError::Http { status: 404, .. })));
        let (out, _, _) = run(vec![Ok(HttpResponse { status: 200, retry_after: None, body: b"<html>".to_vec() })], &q);
        assert!(matches!(out, Err(IngestError::MalformedBody { .. })));
    }

    #[test]
    fn bad_records_are_skipped_and_counted() {
        let body = json!({"results": [{"id": 1, "user": {"id": 2}, "observed_on": "2020-04-25"}, {"id": 2}]});
        let (out, _, _) = run(vec![ok(body)], &query(10));
        let f = out.unwrap().fragment;
        assert_eq!(f.observations.len(), 1);
        assert_eq!(f.skipped.len(), 1);
        assert_eq!(f.skipped[0].line, 2);
    }

    #[test]
    fn urls_are_canonical() {
        let q = query(50);
        assert_eq!(q.page_url(2), q.page_url(2));
        assert_eq!(
            q.page_url(2),
            "http://example.test/v1/observations?d1=2020-04-24T00%3A00%3A00Z&d2=2020-04-28T00%3A00%3A00Z&order=asc&order_by=id&page=2&per_page=50&place_id=1"
        );
        let mut bad = query(0);
        assert!(bad.validate().is_err());
        bad.page_size = 5;
        bad.date_to = bad.date_from - chrono::Duration::days(1);
        assert!(bad.validate().is_err());
    }
}
