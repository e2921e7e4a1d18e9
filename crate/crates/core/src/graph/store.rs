use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::{GraphError, GraphSnapshot, KnowledgeGraph, Mutation};

/// Storage boundary used by the service layer. The embedded [`GraphStore`]
/// is the only implementation shipped; a remote adapter would implement the
/// same four calls.
pub trait GraphBackend: Send + Sync {
    /// A consistent read view. Never observes a half-applied batch.
    fn current(&self) -> Arc<KnowledgeGraph>;
    fn mutate(&self, batch: &[Mutation]) -> Result<u64, GraphError>;
    fn snapshot(&self) -> GraphSnapshot;
    fn restore(&self, snapshot: &GraphSnapshot) -> Result<u64, GraphError>;
}

/// Multi-reader / single-writer store. Readers clone an `Arc` of the
/// current graph; writers serialize on `writer`, build the next graph and
/// publish it with a pointer swap.
#[derive(Debug, Default)]
pub struct GraphStore {
    current: RwLock<Arc<KnowledgeGraph>>,
    writer: Mutex<()>,
}

impl GraphStore {
    pub fn new(graph: KnowledgeGraph) -> Self {
        GraphStore {
            current: RwLock::new(Arc::new(graph)),
            writer: Mutex::new(()),
        }
    }

    /// Runs `f` against a private copy of the graph while holding the writer
    /// role. The copy is published only when `f` returns `Ok`.
    pub fn write<T, E>(&self, f: impl FnOnce(&mut KnowledgeGraph) -> Result<T, E>) -> Result<T, E> {
        let _guard = self.writer.lock();
        let mut next = (**self.current.read()).clone();
        let out = f(&mut next)?;
        *self.current.write() = Arc::new(next);
        Ok(out)
    }

    pub fn version(&self) -> u64 {
        self.current.read().version()
    }
}

impl GraphBackend for GraphStore {
    fn current(&self) -> Arc<KnowledgeGraph> {
        self.current.read().clone()
    }

    fn mutate(&self, batch: &[Mutation]) -> Result<u64, GraphError> {
        self.write(|g| g.mutate(batch))
    }

    fn snapshot(&self) -> GraphSnapshot {
        let g = self.current();
        GraphSnapshot {
            taken_at_version: g.version(),
            graph: g,
        }
    }

    fn restore(&self, snapshot: &GraphSnapshot) -> Result<u64, GraphError> {
        self.write(|g| g.restore(snapshot))
    }
}
