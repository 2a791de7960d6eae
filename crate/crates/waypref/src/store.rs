//! Per-user model records on disk, with exclusive leases.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use waypref_core::planner::FEATURE_DIM;
use waypref_core::PreferenceModel;

pub const MODEL_RECORD_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no model record for user `{0}`")]
    NotFound(String),
    #[error("model record for `{user}` is unreadable or has the wrong version: {reason}")]
    Version { user: String, reason: String },
    #[error("invalid user id `{0}` (use letters, digits, `_` and `-`)")]
    BadUserId(String),
    #[error("user `{0}` already has an open session")]
    Busy(String),
    #[error("model store io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    version: u32,
    user_id: String,
    weights: Vec<f64>,
    bias: f64,
    learning_rate: f64,
    epsilon: f64,
    update_count: u64,
}

pub fn validate_user_id(user: &str) -> Result<(), StoreError> {
    let ok =
        !user.is_empty() && user.len() <= 64 && user.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadUserId(user.to_string()))
    }
}

pub fn record_path(dir: &Path, user: &str) -> PathBuf {
    dir.join(format!("{user}.model.json"))
}

/// Serializes a model record. Floats print in shortest round-trip form, so
/// loading restores every weight bit for bit.
pub fn encode_model(model: &PreferenceModel) -> String {
    let rec = ModelRecord {
        version: MODEL_RECORD_VERSION,
        user_id: model.user_id.clone(),
        weights: model.weights.to_vec(),
        bias: model.bias,
        learning_rate: model.learning_rate,
        epsilon: model.epsilon,
        update_count: model.update_count,
    };
    let mut s = serde_json::to_string_pretty(&rec).expect("records serialize");
    s.push('\n');
    s
}

pub fn decode_model(user: &str, text: &str) -> Result<PreferenceModel, StoreError> {
    let bad = |reason: String| StoreError::Version {
        user: user.to_string(),
        reason,
    };
    let rec: ModelRecord = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if rec.version != MODEL_RECORD_VERSION {
        return Err(bad(format!(
            "version {} (expected {MODEL_RECORD_VERSION})",
            rec.version
        )));
    }
    if rec.user_id != user {
        return Err(bad(format!("record belongs to `{}`", rec.user_id)));
    }
    let n = rec.weights.len();
    let weights: [f64; FEATURE_DIM] = rec
        .weights
        .try_into()
        .map_err(|_| bad(format!("{n} weights (expected {FEATURE_DIM})")))?;
    let model = PreferenceModel {
        user_id: rec.user_id,
        weights,
        bias: rec.bias,
        learning_rate: rec.learning_rate,
        epsilon: rec.epsilon,
        update_count: rec.update_count,
    };
    model.validate().map_err(|e| bad(e.to_string()))?;
    Ok(model)
}

pub fn save_model(dir: &Path, model: &PreferenceModel) -> Result<(), StoreError> {
    validate_user_id(&model.user_id)?;
    fs::create_dir_all(dir)?;
    let path = record_path(dir, &model.user_id);
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(encode_model(model).as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(())
}

pub fn load_model(dir: &Path, user: &str) -> Result<PreferenceModel, StoreError> {
    validate_user_id(user)?;
    match fs::read_to_string(record_path(dir, user)) {
        Ok(text) => decode_model(user, &text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::NotFound(user.to_string())),
        Err(e) => Err(e.into()),
    }
}

/// A model directory that hands out at most one lease per user at a time.
#[derive(Clone, Debug)]
pub struct ModelStore {
    dir: PathBuf,
    held: Arc<Mutex<HashSet<String>>>,
}

impl ModelStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            held: Arc::default(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Takes the user's lease and loads the model, or a fresh one built by
    /// `init` when no record exists. A second lease for the same user fails
    /// with [`StoreError::Busy`] until the first is dropped.
    pub fn lease(&self, user: &str, init: impl FnOnce() -> PreferenceModel) -> Result<LeasedModel, StoreError> {
        validate_user_id(user)?;
        if !self.held.lock().expect("lease set").insert(user.to_string()) {
            return Err(StoreError::Busy(user.to_string()));
        }
        let lease = ModelLease {
            user: user.to_string(),
            store: self.clone(),
        };
        let model = match load_model(&self.dir, user) {
            Ok(m) => m,
            Err(StoreError::NotFound(_)) => init(),
            Err(e) => return Err(e),
        };
        Ok(lease.with(model))
    }
}

/// Exclusive access to one user's record; released on drop.
#[derive(Debug)]
pub struct ModelLease {
    user: String,
    store: ModelStore,
}

impl ModelLease {
    fn with(self, model: PreferenceModel) -> LeasedModel {
        LeasedModel { lease: self, model }
    }
}

impl Drop for ModelLease {
    fn drop(&mut self) {
        if let Ok(mut held) = self.store.held.lock() {
            held.remove(&self.user);
        }
    }
}

/// A model together with the lease that guards its record.
#[derive(Debug)]
pub struct LeasedModel {
    lease: ModelLease,
    pub model: PreferenceModel,
}

impl LeasedModel {
    pub fn user(&self) -> &str {
        &self.lease.user
    }

    pub fn save(&self, model: &PreferenceModel) -> Result<(), StoreError> {
        save_model(&self.lease.store.dir, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = PreferenceModel::new("u1");
        m.weights = [0.1, -0.2, 1.0 / 3.0, 1e-310, -7.5, 0.0, 2.0f64.sqrt(), 1e20];
        m.update_count = 42;
        save_model(dir.path(), &m).unwrap();
        let back = load_model(dir.path(), "u1").unwrap();
        assert_eq!(back.weights.map(f64::to_bits), m.weights.map(f64::to_bits));
        assert_eq!(back, m);
    }

    #[test]
    fn missing_and_corrupt_records() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_model(dir.path(), "nobody"), Err(StoreError::NotFound(_))));
        let text = encode_model(&PreferenceModel::new("u2"));
        for cut in [0, 1, text.len() / 2, text.len() - 3] {
            fs::write(record_path(dir.path(), "u2"), &text[..cut]).unwrap();
            assert!(
                matches!(load_model(dir.path(), "u2"), Err(StoreError::Version { .. })),
                "cut {cut}"
            );
        }
        fs::write(
            record_path(dir.path(), "u2"),
            text.replace("\"version\": 1", "\"version\": 2"),
        )
        .unwrap();
        assert!(matches!(load_model(dir.path(), "u2"), Err(StoreError::Version { .. })));
        assert!(matches!(
            load_model(dir.path(), "../etc"),
            Err(StoreError::BadUserId(_))
        ));
    }

    #[test]
    fn leases_are_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = ModelStore::new(dir.path());
        let a = store.lease("ada", || PreferenceModel::new("ada")).unwrap();
        assert!(matches!(
            store.lease("ada", || PreferenceModel::new("ada")),
            Err(StoreError::Busy(_))
        ));
        let b = store.lease("bob", || PreferenceModel::new("bob")).unwrap();
        drop(a);
        let again = store.lease("ada", || PreferenceModel::new("ada")).unwrap();
        assert_eq!(again.user(), "ada");
        drop(b);
    }
}
