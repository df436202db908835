//! Controller and judge contracts hosted on the ledger.

pub mod controller;
pub mod judge;

pub use controller::{
    AccessGrant, Controller, ControllerTerms, EscrowStatus, FileRecord, KeyEscrow, Registration, Role,
};
pub use judge::{Decision, Judge, JudgeCreate, Phase};

use std::fmt;

use crate::crypto::{hash_parts, Digest};
use crate::{DId, PartyId};

/// One-byte payload of lock, accept and decision calls.
pub mod tags {
    pub const LOCK_P3: u8 = 0x03;
    pub const LOCK_P4: u8 = 0x04;
    pub const ACCEPT: u8 = 0xa1;
    pub const VALID: u8 = 0xd1;
}

/// Identifier of a granted access request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct RequestId(pub Digest);

impl RequestId {
    pub fn derive(did: &DId, client: PartyId, seq: u64) -> Self {
        RequestId(hash_parts(&[b"fairshare/request", &did.0, &client.to_bytes(), &seq.to_be_bytes()]))
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex()[..16])
    }
}

/// Identifier of a file-exchange session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct SessionId(pub Digest);

impl SessionId {
    pub fn derive(did: &DId, buyer: PartyId, seq: u64) -> Self {
        SessionId(hash_parts(&[b"fairshare/session", &did.0, &buyer.to_bytes(), &seq.to_be_bytes()]))
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex()[..16])
    }
}

#[cfg(test)]
pub(crate) mod testkit {
    use std::collections::BTreeSet;

    use super::controller::{self, deploy_args, encode_meta1, encode_policy};
    use super::*;
    use crate::codec::Writer;
    use crate::crypto::hash;
    use crate::ledger::{GasSchedule, Ledger, TxRequest};
    use crate::ContractAddr;

    pub const FOG: PartyId = PartyId(1);
    pub const CLOUD: PartyId = PartyId(2);
    pub const CLIENT: PartyId = PartyId(3);
    pub const OTHER: PartyId = PartyId(4);
    pub const DID: DId = DId([9, 8, 7, 6]);

    pub fn h1() -> Digest {
        hash(b"h1")
    }

    pub fn deployed(terms: ControllerTerms) -> (Ledger, ContractAddr) {
        let genesis = [FOG, CLOUD, CLIENT, OTHER].map(|p| (p, 1_000_000));
        let mut l = Ledger::new(GasSchedule::default(), genesis);
        let r = l
            .submit(
                TxRequest::deploy(OTHER, Box::new(Controller::new()), "register_params")
                    .args(deploy_args(&hash(b"params"), &terms)),
            )
            .unwrap();
        (l, r.created.unwrap())
    }

    /// Controller with every role registered and one file stored for `CLIENT`.
    pub fn with_file() -> (Ledger, ContractAddr) {
        let (mut l, s) = deployed(ControllerTerms::default());
        for (p, f, pk) in [
            (FOG, "register_fog", vec![1u8; 160]),
            (CLOUD, "register_cloud", vec![]),
            (CLIENT, "register_client", vec![2u8; 128]),
        ] {
            assert!(l.submit(TxRequest::call(p, s, f).data(pk)).unwrap().succeeded());
        }
        let did_arg = Writer::new().did(&DID).finish();
        let calls = [
            TxRequest::call(FOG, s, "store_meta1").data(encode_meta1(&DID, &h1(), &hash(b"h2"))),
            TxRequest::call(FOG, s, "store_nonce").args(did_arg.clone()).data(vec![5u8; 12]),
            TxRequest::call(FOG, s, "store_access_policy").args(did_arg).data(encode_policy(&BTreeSet::from([CLIENT]))),
        ];
        for c in calls {
            assert!(l.submit(c).unwrap().succeeded());
        }
        (l, s)
    }

    pub fn request_access(l: &mut Ledger, s: ContractAddr, client: PartyId) -> (bool, RequestId) {
        let r = l
            .submit(
                TxRequest::call(CLOUD, s, "compare_access_policy").args(Writer::new().party(client).did(&DID).finish()),
            )
            .unwrap();
        (r.output == [1], RequestId::derive(&DID, client, r.seq))
    }

    pub fn controller(l: &Ledger) -> &Controller {
        l.contract::<Controller>(&l.named(controller::NAME).unwrap()).unwrap()
    }
}
