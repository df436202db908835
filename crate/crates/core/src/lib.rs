//! FairShare: fair and accountable sharing of IIoT data between devices, fog
//! nodes, a cloud store and clients, with payment and dispute resolution on a
//! simulated ledger.

pub mod codec;
pub mod contracts;
pub mod crypto;
pub mod exchange;
pub mod harness;
mod ids;
pub mod ledger;
pub mod parties;

pub use ids::{ContractAddr, DId, PartyId};
