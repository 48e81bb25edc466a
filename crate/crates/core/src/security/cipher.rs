//! Block ciphers used for the CBC residue and the encrypted nonce blocks.

/// A keyed block permutation. `decrypt_block` must invert `encrypt_block`
/// for every key and block.
pub trait BlockCipher {
    fn name(&self) -> &'static str;
    fn block_size(&self) -> usize;
    fn key_size(&self) -> usize;
    /// `key.len() == key_size()`, `block.len() == block_size()`.
    fn encrypt_block(&self, key: &[u8], block: &mut [u8]);
    fn decrypt_block(&self, key: &[u8], block: &mut [u8]);
}

/// `E(b, k) = b ⊕ k`. Linear, so CBC residues built on it are forgeable;
/// kept because hand-computed residues are easy to check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct XorCipher;

impl BlockCipher for XorCipher {
    fn name(&self) -> &'static str {
        "xor"
    }

    fn block_size(&self) -> usize {
        8
    }

    fn key_size(&self) -> usize {
        8
    }

    fn encrypt_block(&self, key: &[u8], block: &mut [u8]) {
        block.iter_mut().zip(key).for_each(|(b, k)| *b ^= k);
    }

    fn decrypt_block(&self, key: &[u8], block: &mut [u8]) {
        self.encrypt_block(key, block);
    }
}

/// Eight rounds of key-mixed byte substitution through a key-derived S-box,
/// a 13-bit rotation of the 64-bit block and a carry chain of byte sums.
/// Deterministic and dependency-free; not meant to resist cryptanalysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SubstitutionCipher;

const ROUNDS: usize = 8;
const ROTATION: u32 = 13;

impl SubstitutionCipher {
    /// Fisher-Yates shuffle of the byte values driven by xorshift64* seeded
    /// from the key.
    fn sboxes(key: &[u8]) -> ([u8; 256], [u8; 256]) {
        let mut seed = [0u8; 8];
        seed.copy_from_slice(&key[..8]);
        let mut state = u64::from_be_bytes(seed) ^ 0x9E37_79B9_7F4A_7C15;
        if state == 0 {
            state = 0x2545_F491_4F6C_DD1D;
        }
        let mut next = || {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            state.wrapping_mul(0x2545_F491_4F6C_DD1D)
        };
        let mut sbox: [u8; 256] = std::array::from_fn(|i| i as u8);
        for i in (1..256).rev() {
            let j = (next() % (i as u64 + 1)) as usize;
            sbox.swap(i, j);
        }
        let mut inverse = [0u8; 256];
        for (i, s) in sbox.iter().enumerate() {
            inverse[*s as usize] = i as u8;
        }
        (sbox, inverse)
    }
}

impl BlockCipher for SubstitutionCipher {
    fn name(&self) -> &'static str {
        "substitution"
    }

    fn block_size(&self) -> usize {
        8
    }

    fn key_size(&self) -> usize {
        8
    }

    fn encrypt_block(&self, key: &[u8], block: &mut [u8]) {
        let (sbox, _) = Self::sboxes(key);
        for round in 0..ROUNDS {
            for (i, b) in block.iter_mut().enumerate() {
                *b = sbox[(*b ^ key[(i + round) % 8]) as usize];
            }
            let word = u64::from_be_bytes(block[..8].try_into().expect("8-byte block"));
            block.copy_from_slice(&word.rotate_left(ROTATION).to_be_bytes());
            for i in 1..8 {
                block[i] = block[i].wrapping_add(block[i - 1]);
            }
        }
    }

    fn decrypt_block(&self, key: &[u8], block: &mut [u8]) {
        let (_, inverse) = Self::sboxes(key);
        for round in (0..ROUNDS).rev() {
            for i in (1..8).rev() {
                block[i] = block[i].wrapping_sub(block[i - 1]);
            }
            let word = u64::from_be_bytes(block[..8].try_into().expect("8-byte block"));
            block.copy_from_slice(&word.rotate_right(ROTATION).to_be_bytes());
            for (i, b) in block.iter_mut().enumerate() {
                *b = inverse[*b as usize] ^ key[(i + round) % 8];
            }
        }
    }
}

/// Three-key 3DES (EDE).
#[cfg(feature = "tdes")]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TripleDes;

#[cfg(feature = "tdes")]
impl BlockCipher for TripleDes {
    fn name(&self) -> &'static str {
        "3des"
    }

    fn block_size(&self) -> usize {
        8
    }

    fn key_size(&self) -> usize {
        24
    }

    fn encrypt_block(&self, key: &[u8], block: &mut [u8]) {
        use des::cipher::{BlockEncrypt, KeyInit};
        let c = des::TdesEde3::new_from_slice(key).expect("24-byte key");
        c.encrypt_block(block.into());
    }

    fn decrypt_block(&self, key: &[u8], block: &mut [u8]) {
        use des::cipher::{BlockDecrypt, KeyInit};
        let c = des::TdesEde3::new_from_slice(key).expect("24-byte key");
        c.decrypt_block(block.into());
    }
}

/// The built-in ciphers as a copyable value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CipherKind {
    #[default]
    Substitution,
    Xor,
    #[cfg(feature = "tdes")]
    TripleDes,
}

impl CipherKind {
    fn inner(&self) -> &'static dyn BlockCipher {
        match self {
            CipherKind::Substitution => &SubstitutionCipher,
            CipherKind::Xor => &XorCipher,
            #[cfg(feature = "tdes")]
            CipherKind::TripleDes => &TripleDes,
        }
    }
}

impl std::str::FromStr for CipherKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "substitution" => Ok(CipherKind::Substitution),
            "xor" => Ok(CipherKind::Xor),
            #[cfg(feature = "tdes")]
            "3des" => Ok(CipherKind::TripleDes),
            other => Err(format!("unknown cipher `{other}`")),
        }
    }
}

impl BlockCipher for CipherKind {
    fn name(&self) -> &'static str {
        self.inner().name()
    }

    fn block_size(&self) -> usize {
        self.inner().block_size()
    }

    fn key_size(&self) -> usize {
        self.inner().key_size()
    }

    fn encrypt_block(&self, key: &[u8], block: &mut [u8]) {
        self.inner().encrypt_block(key, block)
    }

    fn decrypt_block(&self, key: &[u8], block: &mut [u8]) {
        self.inner().decrypt_block(key, block)
    }
}
