use sha2::{Digest, Sha256};

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Header lines written at the top of every artifact. Carries no timestamps,
/// so identical inputs and settings give byte-identical files.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub manifest_hash: Option<String>,
}

impl Provenance {
    pub fn block(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        format!(
            "# ecgboost {}\n# command: {}\n# seed: {}\n# config_hash: {}\n# manifest_hash: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            opt(self.seed.map(|s| s.to_string())),
            self.config_hash,
            opt(self.manifest_hash.clone()),
        )
    }

    /// `body` preceded by the provenance block.
    pub fn wrap(&self, body: &str) -> String {
        let mut out = self.block();
        out.push_str(body);
        out
    }

    /// For formats whose first line is fixed: the block goes right after it.
    pub fn wrap_after_first_line(&self, body: &str) -> String {
        let (first, rest) = body.split_once('\n').unwrap_or((body, ""));
        format!("{first}\n{}{rest}", self.block())
    }
}
