//! Token-bucket bandwidth throttling for streamed responses.

use std::time::Duration;

use tokio::time::Instant;

/// Refill granularity. The bucket capacity is one slice's worth of bytes,
/// so bursts are bounded by 50 ms of line rate and total service time for
/// an N-byte body stays within a slice of N/limit.
const REFILL_SLICE: Duration = Duration::from_millis(50);

/// A per-connection token bucket metering bytes per second.
pub struct TokenBucket {
    bytes_per_sec: f64,
    capacity: f64,
    available: f64,
    last_refill: Instant,
}

impl TokenBucket {
    pub fn new(bytes_per_sec: u64) -> Self {
        let rate = bytes_per_sec as f64;
        TokenBucket {
            bytes_per_sec: rate,
            capacity: rate * REFILL_SLICE.as_secs_f64(),
            available: 0.0,
            last_refill: Instant::now(),
        }
    }

    /// A chunk size that keeps several refill slices per chunk-send.
    pub fn chunk_size(&self) -> usize {
        let per_slice = (self.bytes_per_sec * REFILL_SLICE.as_secs_f64()) as usize;
        per_slice.clamp(4 * 1024, 1024 * 1024)
    }

    fn refill(&mut self) {
        let now = Instant::now();
        let elapsed = now.duration_since(self.last_refill).as_secs_f64();
        self.available = (self.available + elapsed * self.bytes_per_sec).min(self.capacity);
        self.last_refill = now;
    }

    /// Waits until `bytes` tokens are available, then consumes them.
    pub async fn acquire(&mut self, bytes: usize) {
        let needed = bytes as f64;
        loop {
            self.refill();
            if self.available >= needed {
                self.available -= needed;
                return;
            }
            let deficit = needed - self.available;
            let wait = Duration::from_secs_f64(deficit / self.bytes_per_sec).min(REFILL_SLICE);
            tokio::time::sleep(wait).await;
        }
    }
}
