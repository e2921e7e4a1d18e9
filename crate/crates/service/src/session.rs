//! In-memory chat sessions with a bounded history and a busy flag.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

/// Past (query, answer) pairs kept per session.
pub const HISTORY_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub history: VecDeque<(String, String)>,
    pub created_at: u64,
    pub last_seen: u64,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, now: u64) -> Self {
        Self {
            session_id: session_id.into(),
            history: VecDeque::with_capacity(HISTORY_WINDOW),
            created_at: now,
            last_seen: now,
        }
    }

    /// Appends a pair, dropping the oldest beyond the window.
    pub fn push(&mut self, query: impl Into<String>, answer: impl Into<String>) {
        self.history.push_back((query.into(), answer.into()));
        while self.history.len() > HISTORY_WINDOW {
            self.history.pop_front();
        }
    }
}

#[derive(Debug)]
struct Slot {
    busy: AtomicBool,
    state: Mutex<SessionState>,
}

/// Releases the session when dropped.
#[derive(Debug)]
pub struct SessionGuard {
    slot: Arc<Slot>,
}

impl SessionGuard {
    pub fn record(&self, query: &str, answer: &str) {
        self.slot.state.lock().push(query, answer);
    }
}

impl Drop for SessionGuard {
    fn drop(&mut self) {
        self.slot.busy.store(false, Ordering::Release);
    }
}

#[derive(Debug, Default)]
pub struct Sessions {
    slots: Mutex<HashMap<String, Arc<Slot>>>,
}

impl Sessions {
    /// Claims `id` for one request, creating it on first use. `None` means
    /// another request holds it.
    pub fn acquire(&self, id: &str, now: u64) -> Option<SessionGuard> {
        let slot = self
            .slots
            .lock()
            .entry(id.to_string())
            .or_insert_with(|| {
                Arc::new(Slot {
                    busy: AtomicBool::new(false),
                    state: Mutex::new(SessionState::new(id, now)),
                })
            })
            .clone();
        slot.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()?;
        slot.state.lock().last_seen = now;
        Some(SessionGuard { slot })
    }

    /// Drops idle sessions last seen before `cutoff`; returns their ids.
    pub fn evict_before(&self, cutoff: u64) -> Vec<String> {
        let mut slots = self.slots.lock();
        let stale: Vec<String> = slots
            .iter()
            .filter(|(_, s)| !s.busy.load(Ordering::Acquire) && s.state.lock().last_seen < cutoff)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            slots.remove(id);
        }
        stale
    }

    pub fn get(&self, id: &str) -> Option<SessionState> {
        self.slots.lock().get(id).map(|s| s.state.lock().clone())
    }

    pub fn len(&self) -> usize {
        self.slots.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
