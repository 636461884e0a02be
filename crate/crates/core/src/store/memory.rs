use std::collections::HashMap;
use std::sync::Mutex;

use crate::store::{CredentialRecord, CredentialStore, StoreError};

/// Volatile store for simulations and tests.
#[derive(Debug, Default)]
pub struct MemoryStore {
    records: Mutex<HashMap<String, CredentialRecord>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl CredentialStore for MemoryStore {
    fn load(&self, user_id: &str) -> Result<Option<CredentialRecord>, StoreError> {
        Ok(self
            .records
            .lock()
            .expect("store poisoned")
            .get(user_id)
            .cloned())
    }

    fn insert(&self, record: CredentialRecord) -> Result<(), StoreError> {
        let mut records = self.records.lock().expect("store poisoned");
        if records.contains_key(&record.user_id) {
            return Err(StoreError::AlreadyExists(record.user_id));
        }
        records.insert(record.user_id.clone(), record);
        Ok(())
    }

    fn update(
        &self,
        user_id: &str,
        f: &mut dyn FnMut(&mut CredentialRecord),
    ) -> Result<Option<CredentialRecord>, StoreError> {
        let mut records = self.records.lock().expect("store poisoned");
        Ok(records.get_mut(user_id).map(|r| {
            f(r);
            r.clone()
        }))
    }
}
