//! Process-wide state: the loaded collection, the selection owner and the
//! push subscribers.

use std::sync::{Arc, RwLock};

use featurelens_core::analytics::{Histogram2D, ProductCache};
use featurelens_core::model::{DataKind, SystemCollection};
use featurelens_core::selection::{SelectionSnapshot, SelectionState};
use featurelens_core::session::ViewSession;
use serde::Serialize;
use tokio::sync::{broadcast, Mutex};

use crate::error::{ApiError, ApiResult};

/// Messages a subscriber may fall behind by before it is dropped.
pub const EVENT_QUEUE: usize = 64;
const HISTOGRAM_CACHE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionEvent {
    pub selection_version: u64,
    pub data_version: String,
}

/// Mutable state, only touched under the owner lock.
pub struct Owner {
    pub selection: SelectionState,
    /// Plots, encodings, clouds and cameras last stored by the client; the
    /// manifest, data files and brushes are filled in on capture.
    pub session: ViewSession,
}

pub struct AppState {
    pub collection: Arc<SystemCollection>,
    owner: Arc<Mutex<Owner>>,
    current: RwLock<SelectionSnapshot>,
    events: broadcast::Sender<SelectionEvent>,
    pub histograms: ProductCache<String, Arc<Histogram2D>>,
}

/// Hex form of the data version; JSON numbers above 2^53 do not survive
/// JavaScript clients.
pub fn data_version_string(c: &SystemCollection) -> String {
    format!("{:016x}", c.data_version())
}

impl AppState {
    pub fn new(collection: SystemCollection) -> Arc<Self> {
        let selection = SelectionState::new(&collection);
        let current = RwLock::new(selection.snapshot());
        let (events, _) = broadcast::channel(EVENT_QUEUE);
        Arc::new(AppState {
            collection: Arc::new(collection),
            owner: Arc::new(Mutex::new(Owner {
                selection,
                session: ViewSession::default(),
            })),
            current,
            events,
            histograms: ProductCache::new(HISTOGRAM_CACHE),
        })
    }

    pub fn data_version(&self) -> String {
        data_version_string(&self.collection)
    }

    /// Latest committed selection; never waits on a running mutation.
    pub fn snapshot(&self) -> SelectionSnapshot {
        self.current.read().expect("snapshot lock").clone()
    }

    pub fn selection_version(&self) -> u64 {
        self.current.read().expect("snapshot lock").version
    }

    pub fn selected_counts(snap: &SelectionSnapshot) -> serde_json::Value {
        serde_json::json!({
            "atom": snap.mask(DataKind::Atom).count_ones(),
            "voxel": snap.mask(DataKind::Voxel).count_ones(),
        })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<SelectionEvent> {
        self.events.subscribe()
    }

    pub fn event(&self, selection_version: u64) -> SelectionEvent {
        SelectionEvent {
            selection_version,
            data_version: self.data_version(),
        }
    }

    /// Runs `f` on a blocking thread with exclusive access to the owner.
    /// When the selection version moved, the snapshot is republished and
    /// subscribers are notified before the lock is released, so they see
    /// versions in commit order.
    pub async fn mutate<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&SystemCollection, &mut Owner) -> featurelens_core::Result<T> + Send + 'static,
    {
        let guard = self.owner.clone().lock_owned().await;
        let before = guard.selection.version();
        let c = self.collection.clone();
        let (result, guard) = tokio::task::spawn_blocking(move || {
            let mut guard = guard;
            let r = f(&c, &mut guard);
            (r, guard)
        })
        .await
        .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
        let after = guard.selection.version();
        if after != before {
            *self.current.write().expect("snapshot lock") = guard.selection.snapshot();
            // No subscribers is not an error.
            let _ = self.events.send(self.event(after));
        }
        drop(guard);
        Ok(result?)
    }

    /// Read access to the owner (session document and brushes).
    pub async fn with_owner<T>(&self, f: impl FnOnce(&SystemCollection, &Owner) -> T) -> T {
        let guard = self.owner.lock().await;
        f(&self.collection, &guard)
    }
}

/// Runs CPU-bound work off the async workers.
pub async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}
