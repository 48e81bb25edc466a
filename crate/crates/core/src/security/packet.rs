//! Byte-exact wire format:
//! `[msg_type:1][mn_id:2 BE][payload_len:2 BE][payload][nonce_flag:1][nonce_block?][mic]`.

use super::SecurityError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Report = 0x01,
    Ack = 0x02,
    ServerMsg = 0x03,
}

impl TryFrom<u8> for MsgType {
    type Error = SecurityError;

    fn try_from(b: u8) -> Result<Self, Self::Error> {
        match b {
            0x01 => Ok(MsgType::Report),
            0x02 => Ok(MsgType::Ack),
            0x03 => Ok(MsgType::ServerMsg),
            other => Err(SecurityError::Malformed(format!("unknown message type {other:#04x}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SecurePacket {
    pub msg_type: MsgType,
    pub mn_id: u16,
    /// Sent in the clear.
    pub payload: Vec<u8>,
    /// One encrypted block when present.
    pub nonce_block: Option<Vec<u8>>,
    pub mic: Vec<u8>,
}

const HEADER_LEN: usize = 5;

impl SecurePacket {
    /// Every byte that precedes the MIC on the wire; this is what the MIC
    /// covers.
    pub fn authenticated_bytes(&self) -> Vec<u8> {
        let nonce_len = self.nonce_block.as_ref().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() + 1 + nonce_len);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.mn_id.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        match &self.nonce_block {
            Some(block) => {
                out.push(1);
                out.extend_from_slice(block);
            }
            None => out.push(0),
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.authenticated_bytes();
        out.extend_from_slice(&self.mic);
        out
    }

    /// Parses one packet occupying all of `bytes`.
    pub fn decode(bytes: &[u8], block_size: usize) -> Result<Self, SecurityError> {
        let short = || SecurityError::Malformed(format!("packet of {} bytes is truncated", bytes.len()));
        if bytes.len() < HEADER_LEN {
            return Err(short());
        }
        let msg_type = MsgType::try_from(bytes[0])?;
        let mn_id = u16::from_be_bytes([bytes[1], bytes[2]]);
        let payload_len = u16::from_be_bytes([bytes[3], bytes[4]]) as usize;
        let flag_at = HEADER_LEN + payload_len;
        let flag = *bytes.get(flag_at).ok_or_else(short)?;
        let nonce_len = match flag {
            0 => 0,
            1 => block_size,
            other => return Err(SecurityError::Malformed(format!("nonce flag {other} is not 0 or 1"))),
        };
        let expected = flag_at + 1 + nonce_len + block_size;
        if bytes.len() != expected {
            return Err(SecurityError::Malformed(format!(
                "packet is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let nonce_at = flag_at + 1;
        Ok(Self {
            msg_type,
            mn_id,
            payload: bytes[HEADER_LEN..flag_at].to_vec(),
            nonce_block: (flag == 1).then(|| bytes[nonce_at..nonce_at + nonce_len].to_vec()),
            mic: bytes[nonce_at + nonce_len..].to_vec(),
        })
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + 1 + self.nonce_block.as_ref().map_or(0, Vec::len) + self.mic.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(nonce: bool) -> SecurePacket {
        SecurePacket {
            msg_type: MsgType::Report,
            mn_id: 0x0102,
            payload: vec![1, 38, 1, 6, 25],
            nonce_block: nonce.then(|| vec![9; 8]),
            mic: vec![0xAA; 8],
        }
    }

    #[test]
    fn layout_is_byte_exact() {
        let bytes = packet(false).encode();
        assert_eq!(&bytes[..5], &[0x01, 0x01, 0x02, 0x00, 0x05]);
        assert_eq!(&bytes[5..10], &[1, 38, 1, 6, 25]);
        assert_eq!(bytes[10], 0);
        assert_eq!(&bytes[11..], &[0xAA; 8]);
        assert_eq!(bytes.len(), packet(false).wire_len());
        let with_nonce = packet(true).encode();
        assert_eq!(with_nonce[10], 1);
        assert_eq!(&with_nonce[11..19], &[9; 8]);
        assert_eq!(with_nonce.len(), 27);
    }

    #[test]
    fn decode_inverts_encode() {
        for nonce in [false, true] {
            let p = packet(nonce);
            assert_eq!(SecurePacket::decode(&p.encode(), 8).unwrap(), p);
        }
    }

    #[test]
    fn decode_rejects_bad_framing() {
        let bytes = packet(true).encode();
        assert!(SecurePacket::decode(&bytes[..bytes.len() - 1], 8).is_err());
        assert!(SecurePacket::decode(&bytes[..3], 8).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(SecurePacket::decode(&extra, 8).is_err());
        let mut bad_type = bytes.clone();
        bad_type[0] = 7;
        assert!(SecurePacket::decode(&bad_type, 8).is_err());
        let mut bad_flag = bytes;
        bad_flag[10] = 2;
        assert!(SecurePacket::decode(&bad_flag, 8).is_err());
    }
}
