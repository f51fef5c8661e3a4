use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{prompt_hash, Backend, CompletionExchange, LlmError};
use crate::prompting::AssembledPrompt;

/// Answers from a JSON Lines file of recorded exchanges. Later records for the
/// same prompt replace earlier ones.
pub struct ReplayBackend {
    exchanges: HashMap<String, CompletionExchange>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Io(format!("cannot read {}: {e}", path.display())))?;
        let mut exchanges = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: CompletionExchange = serde_json::from_str(line)
                .map_err(|e| LlmError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?;
            exchanges.insert(ex.prompt_hash.clone(), ex);
        }
        Ok(ReplayBackend { exchanges })
    }

    pub fn from_exchanges(exchanges: impl IntoIterator<Item = CompletionExchange>) -> Self {
        ReplayBackend {
            exchanges: exchanges
                .into_iter()
                .map(|e| (e.prompt_hash.clone(), e))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn model(&self) -> String {
        "replay".into()
    }

    fn send(&self, prompt: &AssembledPrompt) -> Result<String, LlmError> {
        let hash = prompt_hash(prompt);
        self.exchanges
            .get(&hash)
            .map(|e| e.response_text.clone())
            .ok_or(LlmError::ReplayMiss(hash))
    }
}

/// Single-writer append log of exchanges.
pub struct ExchangeLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl ExchangeLog {
    pub fn new(path: PathBuf) -> Self {
        ExchangeLog {
            path,
            lock: Mutex::new(()),
        }
    }

    pub fn append(&self, exchange: &CompletionExchange) -> Result<(), LlmError> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let io = |e: std::io::Error| LlmError::Io(format!("{}: {e}", self.path.display()));
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io)?;
        let line = serde_json::to_string(exchange).expect("exchanges serialize");
        writeln!(file, "{line}").map_err(io)
    }
}
