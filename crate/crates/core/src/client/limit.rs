use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Counting semaphore bounding concurrent backend calls.
pub struct InFlightLimit {
    limit: usize,
    state: Mutex<(usize, usize)>,
    freed: Condvar,
}

pub struct Permit<'a> {
    owner: &'a InFlightLimit,
}

impl InFlightLimit {
    pub fn new(limit: usize) -> Self {
        InFlightLimit {
            limit: limit.max(1),
            state: Mutex::new((0, 0)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut state = self.state.lock().expect("limit lock poisoned");
        while state.0 >= self.limit {
            state = self.freed.wait(state).expect("limit lock poisoned");
        }
        state.0 += 1;
        state.1 = state.1.max(state.0);
        Permit { owner: self }
    }

    /// Largest number of permits ever held at once.
    pub fn high_water(&self) -> usize {
        self.state.lock().expect("limit lock poisoned").1
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut state = self.owner.state.lock().expect("limit lock poisoned");
        state.0 -= 1;
        self.owner.freed.notify_one();
    }
}

/// Sliding-window token budget.
pub struct TokenWindow {
    budget: usize,
    window: Duration,
    spent: Mutex<VecDeque<(Instant, usize)>>,
}

impl TokenWindow {
    pub fn new(budget: usize, window: Duration) -> Self {
        TokenWindow {
            budget,
            window,
            spent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(budget: usize) -> Self {
        Self::new(budget, Duration::from_secs(60))
    }

    /// How long to wait before `tokens` more fit, or `None` if they fit now.
    /// A request larger than the whole budget is admitted into an empty window.
    pub fn wait_needed(&self, now: Instant, tokens: usize) -> Option<Duration> {
        let mut spent = self.spent.lock().expect("window lock poisoned");
        while spent.front().is_some_and(|(t, _)| now.duration_since(*t) >= self.window) {
            spent.pop_front();
        }
        let used: usize = spent.iter().map(|(_, n)| n).sum();
        if spent.is_empty() || used + tokens <= self.budget {
            spent.push_back((now, tokens));
            None
        } else {
            let oldest = spent.front().expect("non-empty").0;
            Some(self.window.saturating_sub(now.duration_since(oldest)))
        }
    }

    pub fn acquire(&self, tokens: usize) {
        while let Some(wait) = self.wait_needed(Instant::now(), tokens) {
            std::thread::sleep(wait.max(Duration::from_millis(1)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn never_exceeds_limit() {
        let limit = InFlightLimit::new(3);
        let current = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..16 {
                s.spawn(|| {
                    for _ in 0..20 {
                        let _p = limit.acquire();
                        let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        std::thread::yield_now();
                        current.fetch_sub(1, Ordering::SeqCst);
                    }
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 3);
        assert!(limit.high_water() <= 3);
    }

    #[test]
    fn window_accounting() {
        let w = TokenWindow::new(100, Duration::from_secs(60));
        let t0 = Instant::now();
        assert_eq!(w.wait_needed(t0, 60), None);
        assert_eq!(w.wait_needed(t0 + Duration::from_secs(10), 60), Some(Duration::from_secs(50)));
        assert_eq!(w.wait_needed(t0 + Duration::from_secs(60), 60), None);
        let big = TokenWindow::new(10, Duration::from_secs(60));
        assert_eq!(big.wait_needed(t0, 500), None);
    }
}
