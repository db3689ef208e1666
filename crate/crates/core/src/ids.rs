//! Text identifiers used across the engine.
//!
//! Every identifier is a thin newtype over `String` so that a state id can't
//! be passed where a transition id is expected. All of them serialize as
//! plain JSON strings.

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! text_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(value: String) -> Self {
                Self(value)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }
    };
}

text_id!(
    /// A role label such as `Expert`. Comparison is case-sensitive.
    RoleName
);
text_id!(StateId);
text_id!(TransitionId);
text_id!(
    /// Abstract action name, e.g. `Answer`. Environments map these to endpoints.
    ActionName
);
text_id!(
    /// Content-addressed protocol version id.
    VersionId
);
text_id!(CollaboratorId);
text_id!(GroupId);
text_id!(ProcessId);
text_id!(EnvId);
text_id!(SessionId);
text_id!(ProposalId);
