use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{hash_parts, Digest};

/// Ledger-level participant identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn to_bytes(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// On-chain device stream identifier: a 4-byte truncation of `H(Id_D || MAC)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DId(pub [u8; 4]);

impl DId {
    pub const LEN: usize = 4;

    pub fn derive(device_id: &[u8], mac: &[u8; 6]) -> Self {
        let d = hash_parts(&[b"fairshare/did", device_id, mac]);
        DId([d.0[0], d.0[1], d.0[2], d.0[3]])
    }

    pub fn from_slice(b: &[u8]) -> Option<Self> {
        <[u8; 4]>::try_from(b).ok().map(DId)
    }
}

impl fmt::Display for DId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// Address of a deployed contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContractAddr(pub Digest);

impl ContractAddr {
    pub fn derive(deployer: PartyId, seq: u64) -> Self {
        ContractAddr(hash_parts(&[b"fairshare/addr", &deployer.to_bytes(), &seq.to_be_bytes()]))
    }
}

impl fmt::Display for ContractAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex()[..16])
    }
}
