//! Blocking token-bucket rate limiter.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Instant,
}

/// Allows bursts of `capacity` and a sustained `per_minute` rate. `None`
/// means unlimited.
#[derive(Debug)]
pub struct TokenBucket {
    per_second: Option<f64>,
    capacity: f64,
    state: Mutex<Bucket>,
}

impl TokenBucket {
    pub fn new(per_minute: Option<u32>, capacity: usize) -> Self {
        let capacity = capacity.max(1) as f64;
        TokenBucket {
            per_second: per_minute.filter(|r| *r > 0).map(|r| r as f64 / 60.0),
            capacity,
            state: Mutex::new(Bucket { tokens: capacity, last: Instant::now() }),
        }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        let Some(rate) = self.per_second else { return };
        loop {
            let wait = {
                let mut b = self.state.lock().expect("limiter poisoned");
                let now = Instant::now();
                b.tokens = (b.tokens + now.duration_since(b.last).as_secs_f64() * rate).min(self.capacity);
                b.last = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - b.tokens) / rate)
            };
            thread::sleep(wait);
        }
    }
}
