//! Scripted exchange between a mobile node and the server over a channel
//! an adversary may control.

use std::fmt;

use rand::Rng;

use super::{BlockCipher, MobileEndpoint, SecurePacket, SecurityError, ServerEndpoint, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Mn,
    Server,
}

impl Party {
    pub fn peer(self) -> Party {
        match self {
            Party::Mn => Party::Server,
            Party::Server => Party::Mn,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Mn => "MN",
            Party::Server => "MPPS",
        })
    }
}

/// Carries packets between the parties. Steps are numbered from 1.
pub trait Channel {
    /// Delivers the bytes `from` sent at `step`, possibly altered.
    fn transmit(&mut self, step: usize, from: Party, bytes: Vec<u8>) -> Vec<u8>;

    /// Packets pushed at a party after the scripted exchange ends, with the
    /// party they are addressed to.
    fn injections(&mut self) -> Vec<(Party, Vec<u8>)> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CleanChannel;

impl Channel for CleanChannel {
    fn transmit(&mut self, _step: usize, _from: Party, bytes: Vec<u8>) -> Vec<u8> {
        bytes
    }
}

/// Flips one bit, numbered MSB-first from the start of the packet.
#[derive(Debug, Clone, Copy)]
pub struct FlipBit {
    pub step: usize,
    pub bit: usize,
}

impl Channel for FlipBit {
    fn transmit(&mut self, step: usize, _from: Party, mut bytes: Vec<u8>) -> Vec<u8> {
        if step == self.step {
            if let Some(b) = bytes.get_mut(self.bit / 8) {
                *b ^= 0x80 >> (self.bit % 8);
            }
        }
        bytes
    }
}

/// Swaps the clear-text payload and leaves the MIC untouched.
#[derive(Debug, Clone)]
pub struct SubstitutePayload {
    pub step: usize,
    pub payload: Vec<u8>,
    pub block_size: usize,
}

impl Channel for SubstitutePayload {
    fn transmit(&mut self, step: usize, _from: Party, bytes: Vec<u8>) -> Vec<u8> {
        if step != self.step {
            return bytes;
        }
        match SecurePacket::decode(&bytes, self.block_size) {
            Ok(mut packet) => {
                packet.payload = self.payload.clone();
                packet.encode()
            }
            Err(_) => bytes,
        }
    }
}

/// Records the packet sent at `step` and re-sends it once the exchange is
/// over.
#[derive(Debug, Clone, Default)]
pub struct ReplayStep {
    pub step: usize,
    captured: Option<(Party, Vec<u8>)>,
}

impl ReplayStep {
    pub fn new(step: usize) -> Self {
        Self { step, captured: None }
    }
}

impl Channel for ReplayStep {
    fn transmit(&mut self, step: usize, from: Party, bytes: Vec<u8>) -> Vec<u8> {
        if step == self.step {
            self.captured = Some((from.peer(), bytes.clone()));
        }
        bytes
    }

    fn injections(&mut self) -> Vec<(Party, Vec<u8>)> {
        self.captured.take().into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub step: usize,
    pub from: Party,
    pub label: String,
    /// Bytes as delivered to the receiver.
    pub bytes: Vec<u8>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alarm {
    pub step: usize,
    pub receiver: Party,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
    /// The first rejection; the exchange stops there.
    pub alarm: Option<Alarm>,
}

impl Transcript {
    pub fn all_accepted(&self) -> bool {
        self.alarm.is_none() && self.entries.iter().all(|e| e.verdict == Verdict::Accepted)
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:>2}. {} -> {}: {} [{}] {}",
                e.step,
                e.from,
                e.from.peer(),
                e.label,
                e.verdict,
                hex::encode(&e.bytes)
            )?;
        }
        if let Some(a) = &self.alarm {
            writeln!(f, "ALARM at step {}: {} rejected the packet as {}", a.step, a.receiver, a.verdict)?;
        }
        Ok(())
    }
}

struct Run<'a, R> {
    mn: &'a mut MobileEndpoint,
    server: &'a mut ServerEndpoint<R>,
    channel: &'a mut dyn Channel,
    transcript: Transcript,
    step: usize,
}

impl<R: Rng> Run<'_, R> {
    /// Sends one packet; returns the receiver's view, or `None` after
    /// raising the alarm.
    fn deliver(&mut self, from: Party, label: String, packet: &SecurePacket) -> Option<super::Inbound> {
        self.step += 1;
        let bytes = self.channel.transmit(self.step, from, packet.encode());
        self.receive(from.peer(), label, bytes)
    }

    fn receive(&mut self, to: Party, label: String, bytes: Vec<u8>) -> Option<super::Inbound> {
        let inbound = match to {
            Party::Server => self.server.receive(&bytes),
            Party::Mn => self.mn.receive(&bytes),
        };
        self.transcript.entries.push(TranscriptEntry {
            step: self.step,
            from: to.peer(),
            label,
            bytes,
            verdict: inbound.verdict,
        });
        if inbound.verdict == Verdict::Accepted {
            return Some(inbound);
        }
        log::warn!("alarm: {to} rejected step {} as {}", self.step, inbound.verdict);
        self.transcript.alarm = Some(Alarm { step: self.step, receiver: to, verdict: inbound.verdict });
        None
    }
}

/// Runs the node-initiated exchange for every message in `messages` (each
/// answered by an encrypted ACK carrying the nonce for the next message),
/// then one server-initiated message/ACK pair per entry of
/// `server_messages`, then any adversary injections. Stops at the first
/// rejection.
pub fn run_handshake<R: Rng>(
    mn: &mut MobileEndpoint,
    server: &mut ServerEndpoint<R>,
    messages: &[Vec<u8>],
    server_messages: &[Vec<u8>],
    channel: &mut dyn Channel,
) -> Result<Transcript, SecurityError> {
    debug_assert_eq!(mn.cipher().block_size(), server.cipher().block_size());
    let mn_id = mn.mn_id();
    let mut run = Run { mn, server, channel, transcript: Transcript::default(), step: 0 };

    for (i, message) in messages.iter().enumerate() {
        let n = i + 1;
        let packet = run.mn.send(message)?;
        let label = if n == 1 {
            "Message_1 + MIC_1".to_string()
        } else {
            format!("Message_{n} + (RND_{})K_SA + MIC_{n}", n - 1)
        };
        if run.deliver(Party::Mn, label, &packet).is_none() {
            return Ok(run.transcript);
        }
        let ack = run.server.ack(mn_id)?;
        if run.deliver(Party::Server, format!("(ACK+RND_{n})K_SA"), &ack).is_none() {
            return Ok(run.transcript);
        }
    }

    for message in server_messages {
        let packet = run.server.send(mn_id, message)?;
        let Some(inbound) = run.deliver(Party::Server, "Message + (RND)K_SA + MIC".to_string(), &packet) else {
            return Ok(run.transcript);
        };
        let nonce = inbound.nonce.expect("accepted server messages carry a nonce");
        let ack = run.mn.ack(nonce)?;
        if run.deliver(Party::Mn, "(ACK+RND)K_SA".to_string(), &ack).is_none() {
            return Ok(run.transcript);
        }
    }

    for (to, bytes) in run.channel.injections() {
        run.step += 1;
        if run.receive(to, "injected".to_string(), bytes).is_none() {
            break;
        }
    }
    Ok(run.transcript)
}
