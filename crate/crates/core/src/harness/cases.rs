//! Named adversarial scenarios and their expected terminal states.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::Fees;
use crate::parties::{Behavior, Collusion, Outcome, Profile, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "honest")]
    Honest,
    /// Fog sends a tampered re-encrypted key.
    I,
    /// Cloud forwards a forged file.
    II,
    /// Client requests without authorization.
    III,
    /// Fog and cloud collude on a forged file.
    IV,
    /// Fog tampers and leaks the true key to a colluding client.
    V,
    /// Cloud pursues an unauthorized client's request.
    VI,
    #[serde(rename = "withhold-key")]
    WithholdKey,
    #[serde(rename = "false-complaint")]
    FalseComplaint,
    #[serde(rename = "silent-after-key")]
    SilentAfterKey,
    #[serde(rename = "tamper-file-claim")]
    TamperFileClaim,
}

impl CaseId {
    pub const ALL: [CaseId; 11] = [
        CaseId::Honest,
        CaseId::I,
        CaseId::II,
        CaseId::III,
        CaseId::IV,
        CaseId::V,
        CaseId::VI,
        CaseId::WithholdKey,
        CaseId::FalseComplaint,
        CaseId::SilentAfterKey,
        CaseId::TamperFileClaim,
    ];

    pub fn profile(self) -> Profile {
        use Behavior::*;
        let p = |fog, cloud, client, collusion| Profile { fog, cloud, client, collusion };
        match self {
            CaseId::Honest => Profile::default(),
            CaseId::I => p(TamperReenc, Honest, Honest, None),
            CaseId::II => p(Honest, ForwardForgedFile, Honest, None),
            CaseId::III => p(Honest, Honest, UnauthorizedRequest, None),
            CaseId::IV => p(Honest, ForwardForgedFile, Honest, Some(Collusion::FogCloud)),
            CaseId::V => p(TamperReenc, Honest, Honest, Some(Collusion::FogClient)),
            CaseId::VI => p(Honest, Honest, UnauthorizedRequest, Some(Collusion::CloudClient)),
            CaseId::WithholdKey => p(Honest, WithholdKey, Honest, None),
            CaseId::FalseComplaint => p(Honest, Honest, FalseComplaint, None),
            CaseId::SilentAfterKey => p(Honest, Honest, SilentAfterKey, None),
            CaseId::TamperFileClaim => p(Honest, TamperFileClaim, Honest, None),
        }
    }

    /// Terminal outcome of every party of `role`, per session.
    pub fn expected_outcome(self, role: Role) -> Outcome {
        use Outcome::*;
        let (fog, cloud, client) = match self {
            CaseId::Honest | CaseId::FalseComplaint | CaseId::SilentAfterKey => (Paid, Paid, FileObtained),
            CaseId::I => (Penalized, Paid, Compensated),
            CaseId::V => (Penalized, Paid, FileObtained),
            CaseId::II | CaseId::IV | CaseId::WithholdKey => (Paid, Penalized, Compensated),
            CaseId::III | CaseId::VI => (Stored, Aborted, AbortedUnauthorized),
            CaseId::TamperFileClaim => (StorageAborted, StorageAborted, Aborted),
        };
        match role {
            Role::Fog => fog,
            Role::Cloud => cloud,
            Role::Client => client,
        }
    }

    /// Balance change per session, gas excluded.
    pub fn session_delta(self, role: Role, f: &Fees) -> i64 {
        let [p1, p2, p3, p4, e1, e2] = [f.p1, f.p2, f.p3, f.p4, f.eps1, f.eps2].map(|v| v as i64);
        let (fog, cloud, client) = match self {
            CaseId::Honest | CaseId::FalseComplaint | CaseId::SilentAfterKey => {
                (p3 + e2, p1 + e1 - e2, -(p1 + p3 + e1))
            }
            CaseId::I | CaseId::V => (e2 - p4, p1 + e1 - e2, p4 - p1 - e1),
            CaseId::II | CaseId::IV | CaseId::WithholdKey => (p3 + e2, e1 - e2 - p2, p2 - p3 - e1),
            CaseId::III | CaseId::VI | CaseId::TamperFileClaim => (0, 0, 0),
        };
        match role {
            Role::Fog => fog,
            Role::Cloud => cloud,
            Role::Client => client,
        }
    }

    /// Whether the case is expected to open any session at all.
    pub fn sells(self) -> bool {
        !matches!(self, CaseId::III | CaseId::VI | CaseId::TamperFileClaim)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl FromStr for CaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown case {s:?}"))
    }
}
