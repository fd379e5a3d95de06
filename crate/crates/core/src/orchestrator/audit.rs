//! Hash-chained audit ledger with archived ciphertext bytes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const GENESIS_RULE: &str = "GENESIS";
const LEDGER_MAGIC: &[u8; 4] = b"QFAL";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub index: u64,
    pub job_id: String,
    pub rule: String,
    #[serde(with = "hex::serde")]
    pub ct_hash: [u8; 32],
    /// Public noise bound of the state after this transition.
    pub noise_bound: u64,
    /// Modulus the bound is declared against.
    pub q: u64,
    #[serde(with = "hex::serde")]
    pub prev_hash: [u8; 32],
    #[serde(with = "hex::serde")]
    pub hash: [u8; 32],
}

impl AuditRecord {
    fn body(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&self.index.to_le_bytes());
        for s in [&self.job_id, &self.rule] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&self.ct_hash);
        out.extend_from_slice(&self.noise_bound.to_le_bytes());
        out.extend_from_slice(&self.q.to_le_bytes());
        out
    }

    pub fn compute_hash(&self) -> [u8; 32] {
        Sha256::digest(self.body()).into()
    }
}

/// The chain plus the ciphertext bytes each record commits to.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub records: Vec<AuditRecord>,
    pub archive: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub first_bad: Option<usize>,
    pub reason: Option<String>,
}

impl Ledger {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn head(&self) -> [u8; 32] {
        self.records.last().map(|r| r.hash).unwrap_or([0; 32])
    }

    pub fn count_rule(&self, prefix: &str) -> usize {
        self.records.iter().filter(|r| r.rule.starts_with(prefix)).count()
    }

    /// Length-prefixed binary form: magic, count, then per record the JSON
    /// record and the archived bytes, each behind a u32 length.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = LEDGER_MAGIC.to_vec();
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (r, a) in self.records.iter().zip(&self.archive) {
            let json = serde_json::to_vec(r).expect("records serialize");
            for chunk in [&json, a] {
                out.extend_from_slice(&(chunk.len() as u32).to_le_bytes());
                out.extend_from_slice(chunk);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| Error::Decode("truncated ledger".into()))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != LEDGER_MAGIC {
            return Err(Error::Decode("not a ledger file".into()));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
        let count = u32_at(take(4)?);
        let mut ledger = Ledger::default();
        for _ in 0..count {
            let n = u32_at(take(4)?);
            let rec: AuditRecord = serde_json::from_slice(take(n)?).map_err(|e| Error::Decode(e.to_string()))?;
            let n = u32_at(take(4)?);
            ledger.archive.push(take(n)?.to_vec());
            ledger.records.push(rec);
        }
        if pos != bytes.len() {
            return Err(Error::Decode("trailing bytes after the last record".into()));
        }
        Ok(ledger)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::Io(e.to_string()))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| Error::Io(e.to_string()))?;
        Self::from_bytes(&buf)
    }

    /// Records only, for inspection.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }
}

pub fn audit_append(ledger: &mut Ledger, job_id: &str, rule: &str, ct_bytes: Vec<u8>, noise_bound: u64, q: u64) {
    let mut rec = AuditRecord {
        index: ledger.records.len() as u64,
        job_id: job_id.to_string(),
        rule: rule.to_string(),
        ct_hash: Sha256::digest(&ct_bytes).into(),
        noise_bound,
        q,
        prev_hash: ledger.head(),
        hash: [0; 32],
    };
    rec.hash = rec.compute_hash();
    ledger.records.push(rec);
    ledger.archive.push(ct_bytes);
}

/// Walks the chain from genesis and stops at the first record that fails.
pub fn audit_verify(ledger: &Ledger) -> Verification {
    let fail = |i: usize, why: &str| Verification { ok: false, first_bad: Some(i), reason: Some(why.to_string()) };
    if ledger.records.len() != ledger.archive.len() {
        return fail(ledger.records.len().min(ledger.archive.len()), "archive length differs from record count");
    }
    let mut prev = [0u8; 32];
    for (i, (r, bytes)) in ledger.records.iter().zip(&ledger.archive).enumerate() {
        if r.index != i as u64 {
            return fail(i, "index out of sequence");
        }
        if (i == 0) != (r.rule == GENESIS_RULE) {
            return fail(i, "genesis must be first and only first");
        }
        if r.prev_hash != prev {
            return fail(i, "previous-hash link broken");
        }
        if r.compute_hash() != r.hash {
            return fail(i, "record hash mismatch");
        }
        if <[u8; 32]>::from(Sha256::digest(bytes)) != r.ct_hash {
            return fail(i, "archived ciphertext does not match its hash");
        }
        if r.noise_bound >= r.q / 4 {
            return fail(i, "declared noise bound not below q/4");
        }
        prev = r.hash;
    }
    Verification { ok: true, first_bad: None, reason: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Ledger {
        let mut l = Ledger::default();
        audit_append(&mut l, "j", GENESIS_RULE, vec![1, 2, 3], 5, 1 << 20);
        audit_append(&mut l, "j", "H", vec![4, 5], 9, 1 << 20);
        audit_append(&mut l, "j", "CNOT", vec![6], 12, 1 << 20);
        l
    }

    #[test]
    fn untouched_chain_verifies() {
        assert!(audit_verify(&sample()).ok);
    }

    #[test]
    fn tampering_is_located() {
        let mut l = sample();
        l.archive[1][0] ^= 1;
        assert_eq!(audit_verify(&l).first_bad, Some(1));
        let mut l = sample();
        l.records.swap(1, 2);
        l.archive.swap(1, 2);
        assert_eq!(audit_verify(&l).first_bad, Some(1));
        let mut l = sample();
        l.records[2].noise_bound = 1 << 19;
        assert_eq!(audit_verify(&l).first_bad, Some(2));
    }

    #[test]
    fn binary_roundtrip() {
        let l = sample();
        assert_eq!(Ledger::from_bytes(&l.to_bytes()).unwrap(), l);
        assert!(Ledger::from_bytes(&l.to_bytes()[..20]).is_err());
    }
}
