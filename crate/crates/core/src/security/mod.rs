//! Integrity-protected report exchange: a CBC-residue MIC over clear-text
//! messages, encrypted ACK+nonce replies and replay detection.

mod cipher;
mod handshake;
mod packet;

use std::collections::{HashSet, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[cfg(feature = "tdes")]
pub use cipher::TripleDes;
pub use cipher::{BlockCipher, CipherKind, SubstitutionCipher, XorCipher};
pub use handshake::{
    run_handshake, Alarm, Channel, CleanChannel, FlipBit, Party, ReplayStep, SubstitutePayload, Transcript,
    TranscriptEntry,
};
pub use packet::{MsgType, SecurePacket};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SecurityError {
    #[error("key must be {expected} bytes, got {got}")]
    KeyLength { expected: usize, got: usize },
    #[error("key is not valid hex: {0}")]
    KeyHex(String),
    #[error("payload of {0} bytes exceeds 65535")]
    PayloadTooLong(usize),
    #[error("malformed packet: {0}")]
    Malformed(String),
    #[error("unknown mobile node {0}")]
    UnknownNode(u16),
    #[error("cipher block of {0} bytes cannot carry a 64-bit nonce")]
    BlockTooSmall(usize),
}

/// Pre-shared key `K_SA`.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedKey(Vec<u8>);

impl SharedKey {
    pub fn new(bytes: &[u8], cipher: &dyn BlockCipher) -> Result<Self, SecurityError> {
        if bytes.len() != cipher.key_size() {
            return Err(SecurityError::KeyLength { expected: cipher.key_size(), got: bytes.len() });
        }
        Ok(Self(bytes.to_vec()))
    }

    pub fn from_hex(text: &str, cipher: &dyn BlockCipher) -> Result<Self, SecurityError> {
        let bytes = hex::decode(text.trim()).map_err(|e| SecurityError::KeyHex(e.to_string()))?;
        Self::new(&bytes, cipher)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SharedKey({} bytes)", self.0.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accepted,
    Tampered,
    Replayed,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accepted => "Accepted",
            Verdict::Tampered => "Tampered",
            Verdict::Replayed => "Replayed",
        })
    }
}

/// Last block of the zero-IV CBC encryption of `message`, zero-padded to a
/// whole number of blocks. The empty message is one zero block.
pub fn compute_mic(message: &[u8], key: &SharedKey, cipher: &dyn BlockCipher) -> Vec<u8> {
    let bs = cipher.block_size();
    let mut chain = vec![0u8; bs];
    let blocks = message.len().div_ceil(bs).max(1);
    for i in 0..blocks {
        let start = (i * bs).min(message.len());
        let end = ((i + 1) * bs).min(message.len());
        for (c, m) in chain.iter_mut().zip(&message[start..end]) {
            *c ^= m;
        }
        cipher.encrypt_block(key.as_bytes(), &mut chain);
    }
    chain
}

fn nonce_plain(nonce: u64, bs: usize) -> Result<Vec<u8>, SecurityError> {
    if bs < 8 {
        return Err(SecurityError::BlockTooSmall(bs));
    }
    let mut block = vec![0u8; bs];
    block[..8].copy_from_slice(&nonce.to_be_bytes());
    Ok(block)
}

/// A nonce block must decrypt to eight nonce bytes followed by zeros.
fn parse_nonce(block: &[u8]) -> Option<u64> {
    if block.len() < 8 || block[8..].iter().any(|b| *b != 0) {
        return None;
    }
    Some(u64::from_be_bytes(block[..8].try_into().ok()?))
}

/// Builds a packet with the payload in the clear, the optional nonce
/// encrypted into its own block and the MIC over everything before it.
pub fn seal(
    msg_type: MsgType,
    mn_id: u16,
    payload: &[u8],
    key: &SharedKey,
    nonce: Option<u64>,
    cipher: &dyn BlockCipher,
) -> Result<SecurePacket, SecurityError> {
    if payload.len() > u16::MAX as usize {
        return Err(SecurityError::PayloadTooLong(payload.len()));
    }
    let nonce_block = match nonce {
        Some(n) => {
            let mut block = nonce_plain(n, cipher.block_size())?;
            cipher.encrypt_block(key.as_bytes(), &mut block);
            Some(block)
        }
        None => None,
    };
    let mut packet = SecurePacket { msg_type, mn_id, payload: payload.to_vec(), nonce_block, mic: Vec::new() };
    packet.mic = compute_mic(&packet.authenticated_bytes(), key, cipher);
    Ok(packet)
}

fn mic_matches(packet: &SecurePacket, key: &SharedKey, cipher: &dyn BlockCipher) -> bool {
    packet.mic.len() == cipher.block_size() && compute_mic(&packet.authenticated_bytes(), key, cipher) == packet.mic
}

/// Nonce bookkeeping for one peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonceState {
    /// Handed out in our latest ACK; the peer's next message must carry it.
    last_issued: Option<u64>,
    /// Sent with our own messages; each comes back in one ACK.
    awaiting_ack: Vec<u64>,
    used: HashSet<u64>,
    order: VecDeque<u64>,
    window: usize,
    /// Set once the first nonce-less message has been accepted.
    session_open: bool,
}

impl Default for NonceState {
    fn default() -> Self {
        Self::with_window(Self::DEFAULT_WINDOW)
    }
}

impl NonceState {
    pub const DEFAULT_WINDOW: usize = 4096;

    pub fn with_window(window: usize) -> Self {
        Self {
            last_issued: None,
            awaiting_ack: Vec::new(),
            used: HashSet::new(),
            order: VecDeque::new(),
            window: window.max(1),
            session_open: false,
        }
    }

    pub fn last_issued(&self) -> Option<u64> {
        self.last_issued
    }

    pub fn is_used(&self, nonce: u64) -> bool {
        self.used.contains(&nonce)
    }

    fn fresh<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let n: u64 = rng.gen();
            if n != 0 && !self.used.contains(&n) && self.last_issued != Some(n) && !self.awaiting_ack.contains(&n) {
                return n;
            }
        }
    }

    /// Draws the nonce for an outgoing ACK.
    pub fn issue_for_reply<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        let n = self.fresh(rng);
        self.last_issued = Some(n);
        n
    }

    /// Draws the nonce for an outgoing message that the peer must ACK.
    pub fn issue_for_ack<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        let n = self.fresh(rng);
        self.awaiting_ack.push(n);
        n
    }

    fn consume(&mut self, nonce: u64) {
        if self.used.insert(nonce) {
            self.order.push_back(nonce);
            if self.order.len() > self.window {
                if let Some(old) = self.order.pop_front() {
                    self.used.remove(&old);
                }
            }
        }
    }
}

/// Server-side check of an inbound packet. A nonce must be the one we
/// issued and not yet consumed; a nonce-less message is only accepted as
/// the first of a session.
pub fn verify(packet: &SecurePacket, key: &SharedKey, nonces: &mut NonceState, cipher: &dyn BlockCipher) -> Verdict {
    if !mic_matches(packet, key, cipher) {
        return Verdict::Tampered;
    }
    match packet.msg_type {
        MsgType::Ack => {
            let Ok(nonce) = open_ack(packet, key, cipher) else {
                return Verdict::Tampered;
            };
            match nonces.awaiting_ack.iter().position(|n| *n == nonce) {
                Some(i) if !nonces.is_used(nonce) => {
                    nonces.awaiting_ack.swap_remove(i);
                    nonces.consume(nonce);
                    Verdict::Accepted
                }
                _ => Verdict::Replayed,
            }
        }
        MsgType::Report | MsgType::ServerMsg => match &packet.nonce_block {
            None if nonces.session_open => Verdict::Replayed,
            None => {
                nonces.session_open = true;
                Verdict::Accepted
            }
            Some(block) => {
                let Some(nonce) = decrypt_nonce(block, key, cipher) else {
                    return Verdict::Tampered;
                };
                if nonces.last_issued == Some(nonce) && !nonces.is_used(nonce) {
                    nonces.last_issued = None;
                    nonces.consume(nonce);
                    Verdict::Accepted
                } else {
                    Verdict::Replayed
                }
            }
        },
    }
}

/// Receiver-side check for packets that hand us a nonce (ACKs and
/// server-initiated messages): accepted once per nonce.
pub fn verify_fresh(
    packet: &SecurePacket,
    key: &SharedKey,
    nonces: &mut NonceState,
    cipher: &dyn BlockCipher,
) -> (Verdict, Option<u64>) {
    if !mic_matches(packet, key, cipher) {
        return (Verdict::Tampered, None);
    }
    let nonce = match packet.msg_type {
        MsgType::Ack => open_ack(packet, key, cipher).ok(),
        _ => packet.nonce_block.as_deref().and_then(|b| decrypt_nonce(b, key, cipher)),
    };
    match nonce {
        None => (Verdict::Tampered, None),
        Some(n) if nonces.is_used(n) => (Verdict::Replayed, Some(n)),
        Some(n) => {
            nonces.consume(n);
            (Verdict::Accepted, Some(n))
        }
    }
}

fn decrypt_nonce(block: &[u8], key: &SharedKey, cipher: &dyn BlockCipher) -> Option<u64> {
    if block.len() != cipher.block_size() {
        return None;
    }
    let mut plain = block.to_vec();
    cipher.decrypt_block(key.as_bytes(), &mut plain);
    parse_nonce(&plain)
}

const ACK_MARKER: &[u8] = b"ACK";

fn ack_marker_block(bs: usize) -> Vec<u8> {
    let mut block = vec![0u8; bs];
    block[..ACK_MARKER.len()].copy_from_slice(ACK_MARKER);
    block
}

/// `(ACK + nonce)` CBC-encrypted under the shared key: the first cipher
/// block is the payload, the second the nonce block.
pub fn seal_ack(
    mn_id: u16,
    key: &SharedKey,
    nonce: u64,
    cipher: &dyn BlockCipher,
) -> Result<SecurePacket, SecurityError> {
    let bs = cipher.block_size();
    let mut c1 = ack_marker_block(bs);
    cipher.encrypt_block(key.as_bytes(), &mut c1);
    let mut c2 = nonce_plain(nonce, bs)?;
    c2.iter_mut().zip(&c1).for_each(|(p, c)| *p ^= c);
    cipher.encrypt_block(key.as_bytes(), &mut c2);
    let mut packet =
        SecurePacket { msg_type: MsgType::Ack, mn_id, payload: c1, nonce_block: Some(c2), mic: Vec::new() };
    packet.mic = compute_mic(&packet.authenticated_bytes(), key, cipher);
    Ok(packet)
}

/// Issues a fresh nonce for the peer's next message and wraps it in an ACK.
pub fn make_ack<R: Rng + ?Sized>(
    mn_id: u16,
    key: &SharedKey,
    nonces: &mut NonceState,
    rng: &mut R,
    cipher: &dyn BlockCipher,
) -> Result<SecurePacket, SecurityError> {
    let nonce = nonces.issue_for_reply(rng);
    seal_ack(mn_id, key, nonce, cipher)
}

/// Decrypts an ACK and returns its nonce. Fails unless the first block
/// decrypts to the ACK marker and the second to a well-formed nonce.
pub fn open_ack(packet: &SecurePacket, key: &SharedKey, cipher: &dyn BlockCipher) -> Result<u64, SecurityError> {
    let bs = cipher.block_size();
    let bad = |what: &str| SecurityError::Malformed(format!("ACK {what}"));
    if packet.msg_type != MsgType::Ack {
        return Err(bad("has the wrong message type"));
    }
    let c2 = packet.nonce_block.as_ref().ok_or_else(|| bad("lacks a nonce block"))?;
    if packet.payload.len() != bs || c2.len() != bs {
        return Err(bad("blocks have the wrong size"));
    }
    let mut marker = packet.payload.clone();
    cipher.decrypt_block(key.as_bytes(), &mut marker);
    if marker != ack_marker_block(bs) {
        return Err(bad("marker does not decrypt"));
    }
    let mut plain = c2.clone();
    cipher.decrypt_block(key.as_bytes(), &mut plain);
    plain.iter_mut().zip(&packet.payload).for_each(|(p, c)| *p ^= c);
    parse_nonce(&plain).ok_or_else(|| bad("nonce is malformed"))
}

/// Outcome of delivering raw bytes to an endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inbound {
    pub verdict: Verdict,
    pub packet: Option<SecurePacket>,
    /// The nonce carried by an accepted ACK or server message.
    pub nonce: Option<u64>,
}

impl Inbound {
    fn rejected(verdict: Verdict) -> Self {
        Self { verdict, packet: None, nonce: None }
    }
}

/// The mobile node's half of the exchange.
#[derive(Debug, Clone)]
pub struct MobileEndpoint {
    mn_id: u16,
    key: SharedKey,
    cipher: CipherKind,
    next_nonce: Option<u64>,
    awaiting_ack: bool,
    nonces: NonceState,
}

impl MobileEndpoint {
    pub fn new(mn_id: u16, key: SharedKey, cipher: CipherKind) -> Self {
        Self { mn_id, key, cipher, next_nonce: None, awaiting_ack: false, nonces: NonceState::default() }
    }

    pub fn mn_id(&self) -> u16 {
        self.mn_id
    }

    pub fn cipher(&self) -> CipherKind {
        self.cipher
    }

    /// Seals a report carrying the nonce from the latest ACK, if any.
    pub fn send(&mut self, payload: &[u8]) -> Result<SecurePacket, SecurityError> {
        let packet = seal(MsgType::Report, self.mn_id, payload, &self.key, self.next_nonce, &self.cipher)?;
        self.next_nonce = None;
        self.awaiting_ack = true;
        Ok(packet)
    }

    pub fn receive(&mut self, bytes: &[u8]) -> Inbound {
        let Ok(packet) = SecurePacket::decode(bytes, self.cipher.block_size()) else {
            return Inbound::rejected(Verdict::Tampered);
        };
        if packet.mn_id != self.mn_id || packet.msg_type == MsgType::Report {
            return Inbound::rejected(Verdict::Tampered);
        }
        if packet.msg_type == MsgType::Ack && !self.awaiting_ack {
            let verdict =
                if mic_matches(&packet, &self.key, &self.cipher) { Verdict::Replayed } else { Verdict::Tampered };
            return Inbound::rejected(verdict);
        }
        let (verdict, nonce) = verify_fresh(&packet, &self.key, &mut self.nonces, &self.cipher);
        if verdict != Verdict::Accepted {
            return Inbound::rejected(verdict);
        }
        if packet.msg_type == MsgType::Ack {
            self.awaiting_ack = false;
            self.next_nonce = nonce;
        }
        Inbound { verdict, packet: Some(packet), nonce }
    }

    /// Acknowledges a server message by returning its nonce.
    pub fn ack(&self, nonce: u64) -> Result<SecurePacket, SecurityError> {
        seal_ack(self.mn_id, &self.key, nonce, &self.cipher)
    }
}

#[derive(Debug, Clone)]
struct Peer {
    key: SharedKey,
    nonces: NonceState,
}

/// The server's half: one key and nonce state per registered node.
#[derive(Debug, Clone)]
pub struct ServerEndpoint<R> {
    cipher: CipherKind,
    rng: R,
    peers: std::collections::BTreeMap<u16, Peer>,
}

impl<R: Rng> ServerEndpoint<R> {
    pub fn new(cipher: CipherKind, rng: R) -> Self {
        Self { cipher, rng, peers: Default::default() }
    }

    pub fn cipher(&self) -> CipherKind {
        self.cipher
    }

    pub fn register(&mut self, mn_id: u16, key: SharedKey) {
        self.peers.insert(mn_id, Peer { key, nonces: NonceState::default() });
    }

    pub fn is_registered(&self, mn_id: u16) -> bool {
        self.peers.contains_key(&mn_id)
    }

    pub fn receive(&mut self, bytes: &[u8]) -> Inbound {
        let Ok(packet) = SecurePacket::decode(bytes, self.cipher.block_size()) else {
            return Inbound::rejected(Verdict::Tampered);
        };
        let Some(peer) = self.peers.get_mut(&packet.mn_id) else {
            return Inbound::rejected(Verdict::Tampered);
        };
        let verdict = verify(&packet, &peer.key, &mut peer.nonces, &self.cipher);
        if verdict != Verdict::Accepted {
            log::warn!("packet from node {} rejected: {verdict}", packet.mn_id);
            return Inbound::rejected(verdict);
        }
        Inbound { verdict, packet: Some(packet), nonce: None }
    }

    pub fn ack(&mut self, mn_id: u16) -> Result<SecurePacket, SecurityError> {
        let peer = self.peers.get_mut(&mn_id).ok_or(SecurityError::UnknownNode(mn_id))?;
        make_ack(mn_id, &peer.key, &mut peer.nonces, &mut self.rng, &self.cipher)
    }

    /// A server-initiated message; the node must ACK its nonce.
    pub fn send(&mut self, mn_id: u16, payload: &[u8]) -> Result<SecurePacket, SecurityError> {
        let peer = self.peers.get_mut(&mn_id).ok_or(SecurityError::UnknownNode(mn_id))?;
        let nonce = peer.nonces.issue_for_ack(&mut self.rng);
        seal(MsgType::ServerMsg, mn_id, payload, &peer.key, Some(nonce), &self.cipher)
    }
}
