//! Append-only, hash-chained bulletin board.
//!
//! Each entry commits to its predecessor:
//! `entry_hash = SHA-256(enc("jcj/board/entry") ‖ enc(prev_hash) ‖ u64(index) ‖ enc(kind) ‖ enc(payload))`
//! using the canonical encoding from [`crate::encode`]. Authority entries
//! carry an Ed25519 signature over `entry_hash ‖ author`; ballots are posted
//! anonymously and unsigned. Entry 0 is the roster of authority keys.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::Engine;
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};

use crate::encode::{hex_bytes, CanonicalHasher};
use crate::error::{Error, Result};

pub const ANONYMOUS: &str = "anonymous";

pub type Digest = [u8; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Roll,
    Ballot,
    Pet,
    Mix,
    HashPost,
    Decryption,
    Result,
    Param,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Roll => "roll",
            Self::Ballot => "ballot",
            Self::Pet => "pet",
            Self::Mix => "mix",
            Self::HashPost => "hash-post",
            Self::Decryption => "decryption",
            Self::Result => "result",
            Self::Param => "param",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Registrar,
    Tallier,
}

impl Role {
    pub fn may_post(self, kind: EntryKind) -> bool {
        match self {
            Self::Registrar => matches!(kind, EntryKind::Roll | EntryKind::Param),
            Self::Tallier => !matches!(kind, EntryKind::Roll | EntryKind::Ballot),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityInfo {
    pub id: String,
    pub role: Role,
    #[serde(with = "hex_bytes")]
    pub verifying_key: [u8; 32],
}

/// An authority's signing identity.
#[derive(Clone)]
pub struct AuthorityKey {
    pub id: String,
    pub role: Role,
    signing: SigningKey,
}

impl fmt::Debug for AuthorityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuthorityKey")
            .field("id", &self.id)
            .field("role", &self.role)
            .finish_non_exhaustive()
    }
}

impl AuthorityKey {
    pub fn from_seed(id: impl Into<String>, role: Role, seed: [u8; 32]) -> Self {
        Self {
            id: id.into(),
            role,
            signing: SigningKey::from_bytes(&seed),
        }
    }

    pub fn info(&self) -> AuthorityInfo {
        AuthorityInfo {
            id: self.id.clone(),
            role: self.role,
            verifying_key: self.signing.verifying_key().to_bytes(),
        }
    }

    pub fn sign(&self, message: &[u8]) -> [u8; 64] {
        self.signing.sign(message).to_bytes()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Author<'a> {
    Anonymous,
    Authority(&'a AuthorityKey),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardEntry {
    pub index: u64,
    pub kind: EntryKind,
    #[serde(with = "b64")]
    pub payload: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub prev_hash: Digest,
    #[serde(with = "hex_bytes")]
    pub entry_hash: Digest,
    pub author: String,
    #[serde(with = "opt_signature")]
    pub signature: Option<[u8; 64]>,
}

pub fn entry_hash(prev_hash: &Digest, index: u64, kind: EntryKind, payload: &[u8]) -> Digest {
    let mut h = CanonicalHasher::new("jcj/board/entry");
    h.bytes(prev_hash)
        .u64(index)
        .bytes(kind.as_str().as_bytes())
        .bytes(payload);
    h.finish()
}

fn signed_message(entry_hash: &Digest, author: &str) -> Vec<u8> {
    let mut msg = entry_hash.to_vec();
    msg.extend_from_slice(author.as_bytes());
    msg
}

impl BoardEntry {
    /// Builds a correctly chained and signed entry. Exposed for tooling that
    /// rewrites transcripts (e.g. mutation tests).
    pub fn build(index: u64, prev_hash: Digest, kind: EntryKind, payload: Vec<u8>, author: Author<'_>) -> Self {
        let entry_hash = entry_hash(&prev_hash, index, kind, &payload);
        let (author, signature) = match author {
            Author::Anonymous => (ANONYMOUS.to_string(), None),
            Author::Authority(key) => (key.id.clone(), Some(key.sign(&signed_message(&entry_hash, &key.id)))),
        };
        Self {
            index,
            kind,
            payload,
            prev_hash,
            entry_hash,
            author,
            signature,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum Genesis {
    Roster { authorities: Vec<AuthorityInfo> },
}

/// Encodes a roster the way [`Board::new`] posts it at index 0.
pub fn roster_payload(authorities: &[AuthorityInfo]) -> Vec<u8> {
    serde_json::to_vec(&Genesis::Roster {
        authorities: authorities.to_vec(),
    })
    .expect("roster serializes")
}

/// The roster published at index 0, if it parses.
pub fn roster_of(entries: &[BoardEntry]) -> Option<Vec<AuthorityInfo>> {
    let genesis = entries.first()?;
    if genesis.kind != EntryKind::Param {
        return None;
    }
    match serde_json::from_slice::<Genesis>(&genesis.payload).ok()? {
        Genesis::Roster { authorities } => Some(authorities),
    }
}

/// The ordered election record.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<BoardEntry>,
}

impl Transcript {
    pub fn query(&self, kind: EntryKind) -> Vec<&BoardEntry> {
        self.entries.iter().filter(|e| e.kind == kind).collect()
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.entries {
            serde_json::to_writer(&mut out, e).expect("entry serializes");
            out.push(b'\n');
        }
        out
    }

    pub fn from_jsonl(bytes: &[u8]) -> Result<Self> {
        let mut entries = Vec::new();
        for line in bytes.split(|&b| b == b'\n') {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            entries.push(serde_json::from_slice(line)?);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        Ok(Self { entries })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainReport {
    pub valid: bool,
    pub failed_at: Option<u64>,
    pub reason: Option<String>,
}

impl ChainReport {
    fn fail(index: u64, reason: impl Into<String>) -> Self {
        Self {
            valid: false,
            failed_at: Some(index),
            reason: Some(reason.into()),
        }
    }
}

/// Checks indices, hash links, authorship policy and signatures. A prefix of
/// a valid transcript is itself valid.
pub fn verify_chain(transcript: &Transcript) -> ChainReport {
    let entries = &transcript.entries;
    let Some(roster) = roster_of(entries) else {
        return ChainReport::fail(0, "missing or malformed roster");
    };
    let roster: BTreeMap<&str, &AuthorityInfo> = roster.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut prev = [0u8; 32];
    for (pos, e) in entries.iter().enumerate() {
        let pos = pos as u64;
        if e.index != pos {
            return ChainReport::fail(pos, format!("index {} at position {pos}", e.index));
        }
        if e.prev_hash != prev {
            return ChainReport::fail(pos, "broken back-link");
        }
        if entry_hash(&e.prev_hash, e.index, e.kind, &e.payload) != e.entry_hash {
            return ChainReport::fail(pos, "entry hash mismatch");
        }
        if e.author == ANONYMOUS {
            if e.kind != EntryKind::Ballot || e.signature.is_some() {
                return ChainReport::fail(pos, "anonymous entries must be unsigned ballots");
            }
        } else {
            let Some(info) = roster.get(e.author.as_str()) else {
                return ChainReport::fail(pos, format!("unknown author {}", e.author));
            };
            if !info.role.may_post(e.kind) {
                return ChainReport::fail(pos, format!("{} may not post {}", e.author, e.kind));
            }
            let ok = match (e.signature, VerifyingKey::from_bytes(&info.verifying_key)) {
                (Some(sig), Ok(vk)) => vk
                    .verify(&signed_message(&e.entry_hash, &e.author), &Signature::from_bytes(&sig))
                    .is_ok(),
                _ => false,
            };
            if !ok {
                return ChainReport::fail(pos, "bad signature");
            }
        }
        prev = e.entry_hash;
    }
    ChainReport {
        valid: true,
        failed_at: None,
        reason: None,
    }
}

/// The live board. Appends take `&mut self`, so there is a single writer;
/// readers work on [`Board::snapshot`].
pub struct Board {
    transcript: Transcript,
    roster: BTreeMap<String, AuthorityInfo>,
    sink: Option<BufWriter<File>>,
}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Board")
            .field("entries", &self.transcript.entries.len())
            .field("persistent", &self.sink.is_some())
            .finish()
    }
}

impl Board {
    /// In-memory board whose genesis entry publishes `roster`, signed by
    /// `genesis_author`.
    pub fn new(roster: Vec<AuthorityInfo>, genesis_author: &AuthorityKey) -> Result<Self> {
        let mut board = Self {
            transcript: Transcript::default(),
            roster: roster.iter().map(|a| (a.id.clone(), a.clone())).collect(),
            sink: None,
        };
        board.append(
            EntryKind::Param,
            roster_payload(&roster),
            Author::Authority(genesis_author),
        )?;
        Ok(board)
    }

    /// Like [`Board::new`], additionally writing every entry to `path` as
    /// JSON Lines before `append` returns.
    pub fn persistent(
        roster: Vec<AuthorityInfo>,
        genesis_author: &AuthorityKey,
        path: impl AsRef<Path>,
    ) -> Result<Self> {
        let mut board = Self {
            transcript: Transcript::default(),
            roster: roster.iter().map(|a| (a.id.clone(), a.clone())).collect(),
            sink: Some(BufWriter::new(File::create(path)?)),
        };
        board.append(
            EntryKind::Param,
            roster_payload(&roster),
            Author::Authority(genesis_author),
        )?;
        Ok(board)
    }

    pub fn append(&mut self, kind: EntryKind, payload: Vec<u8>, author: Author<'_>) -> Result<&BoardEntry> {
        match author {
            Author::Anonymous if kind != EntryKind::Ballot => {
                return Err(Error::Unauthorized {
                    author: ANONYMOUS.into(),
                    kind,
                })
            }
            Author::Anonymous => {}
            Author::Authority(key) => {
                let info = self
                    .roster
                    .get(&key.id)
                    .ok_or_else(|| Error::UnknownAuthor(key.id.clone()))?;
                if info.verifying_key != key.info().verifying_key {
                    return Err(Error::UnknownAuthor(key.id.clone()));
                }
                if !info.role.may_post(kind) {
                    return Err(Error::Unauthorized {
                        author: key.id.clone(),
                        kind,
                    });
                }
            }
        }
        let index = self.transcript.entries.len() as u64;
        let prev = self.transcript.entries.last().map_or([0u8; 32], |e| e.entry_hash);
        let entry = BoardEntry::build(index, prev, kind, payload, author);
        if let Some(sink) = &mut self.sink {
            serde_json::to_writer(&mut *sink, &entry)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.transcript.entries.push(entry);
        Ok(self.transcript.entries.last().expect("just pushed"))
    }

    pub fn query(&self, kind: EntryKind) -> Vec<&BoardEntry> {
        self.transcript.query(kind)
    }

    pub fn entries(&self) -> &[BoardEntry] {
        &self.transcript.entries
    }

    pub fn len(&self) -> usize {
        self.transcript.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcript.entries.is_empty()
    }

    pub fn snapshot(&self) -> Transcript {
        self.transcript.clone()
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = <&str>::deserialize(d)?;
        STANDARD.decode(s).map_err(D::Error::custom)
    }
}

mod opt_signature {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(sig: &Option<[u8; 64]>, s: S) -> Result<S::Ok, S::Error> {
        match sig {
            Some(sig) => s.serialize_some(&hex::encode(sig)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 64]>, D::Error> {
        let Some(s) = Option::<&str>::deserialize(d)? else {
            return Ok(None);
        };
        let bytes = hex::decode(s).map_err(D::Error::custom)?;
        <[u8; 64]>::try_from(bytes)
            .map(Some)
            .map_err(|_| D::Error::custom("signature must be 64 bytes"))
    }
}

/// Base64 of a payload, as written in the JSON Lines file.
pub fn encode_payload(payload: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(payload)
}
