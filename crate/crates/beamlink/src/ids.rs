//! Opaque identifiers used across the pipeline.
//!
//! All string identifiers end up in line- and comma-delimited text files, so
//! the text boundaries reject values containing separators (see
//! [`is_clean_token`]).

use std::fmt;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub String);

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
    };
}

string_id!(
    /// Identifier of a single surface polygon.
    SurfaceId
);
string_id!(
    /// Identifier of the scene object a surface belongs to.
    ObjectId
);
string_id!(
    /// Identifier of a LiDAR sensor.
    SensorId
);
string_id!(
    /// Identifier of a scanning campaign.
    CampaignId
);

/// Identifier of a single beam measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BeamId(pub u64);

impl fmt::Display for BeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// True when `s` can be embedded in the text formats: non-empty and free of
/// commas, tabs and line breaks.
pub fn is_clean_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| matches!(c, ',' | '\t' | '\n' | '\r'))
}
