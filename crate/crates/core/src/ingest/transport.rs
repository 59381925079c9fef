use std::collections::VecDeque;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Parsed from a delay-seconds `Retry-After` header.
    pub retry_after: Option<Duration>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("connection failed: {0}")]
    Connection(String),
}

/// One blocking GET per call.
pub trait Transport {
    fn get(&mut self, url: &str) -> Result<HttpResponse, TransportError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("cnc/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Connection(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&mut self, url: &str) -> Result<HttpResponse, TransportError> {
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else {
                TransportError::Connection(e.to_string())
            }
        };
        let resp = self.client.get(url).send().map_err(classify)?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = resp.bytes().map_err(classify)?.to_vec();
        Ok(HttpResponse { status, retry_after, body })
    }
}

/// Monotonic time source that can also wait.
pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that advances only when asked to sleep; records every sleep.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Duration,
    pub sleeps: Vec<Duration>,
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        self.now
    }

    fn sleep(&mut self, d: Duration) {
        self.sleeps.push(d);
        self.now += d;
    }
}

/// Sliding 60-second window: at most `per_minute` requests start in any window.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: usize,
    recent: VecDeque<Duration>,
}

pub const RATE_WINDOW: Duration = Duration::from_secs(60);

impl RateLimiter {
    pub fn new(per_minute: usize) -> Self {
        Self { per_minute: per_minute.max(1), recent: VecDeque::new() }
    }

    /// Blocks until a request may start, then books it.
    pub fn acquire(&mut self, clock: &mut dyn Clock) {
        loop {
            let now = clock.now();
            while self.recent.front().is_some_and(|&t| now >= t + RATE_WINDOW) {
                self.recent.pop_front();
            }
            if self.recent.len() < self.per_minute {
                self.recent.push_back(now);
                return;
            }
            let oldest = *self.recent.front().expect("window is full");
            clock.sleep(oldest + RATE_WINDOW - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiter_never_exceeds_cap_in_any_window() {
        let mut clock = ManualClock::default();
        let mut limiter = RateLimiter::new(5);
        let mut starts = Vec::new();
        for i in 0..23 {
            if i % 4 == 0 {
                clock.sleep(Duration::from_secs(7));
            }
            limiter.acquire(&mut clock);
            starts.push(clock.now());
        }
        for (i, &s) in starts.iter().enumerate() {
            let in_window = starts[i..].iter().filter(|&&t| t < s + RATE_WINDOW).count();
            assert!(in_window <= 5);
        }
    }

    #[test]
    fn limiter_does_not_wait_below_cap() {
        let mut clock = ManualClock::default();
        let mut limiter = RateLimiter::new(3);
        for _ in 0..3 {
            limiter.acquire(&mut clock);
        }
        assert!(clock.sleeps.is_empty());
        limiter.acquire(&mut clock);
        assert_eq!(clock.sleeps, vec![RATE_WINDOW]);
    }
}
