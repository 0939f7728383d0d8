//! ISO 3166-1 alpha-2 country codes, display-name lookup and the built-in EU aggregate.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Officially assigned ISO 3166-1 alpha-2 codes.
const ISO_ALPHA2: &[&str] = &[
    "AD", "AE", "AF", "AG", "AI", "AL", "AM", "AO", "AQ", "AR", "AS", "AT", "AU", "AW", "AX", "AZ",
    "BA", "BB", "BD", "BE", "BF", "BG", "BH", "BI", "BJ", "BL", "BM", "BN", "BO", "BQ", "BR", "BS",
    "BT", "BV", "BW", "BY", "BZ", "CA", "CC", "CD", "CF", "CG", "CH", "CI", "CK", "CL", "CM", "CN",
    "CO", "CR", "CU", "CV", "CW", "CX", "CY", "CZ", "DE", "DJ", "DK", "DM", "DO", "DZ", "EC", "EE",
    "EG", "EH", "ER", "ES", "ET", "FI", "FJ", "FK", "FM", "FO", "FR", "GA", "GB", "GD", "GE", "GF",
    "GG", "GH", "GI", "GL", "GM", "GN", "GP", "GQ", "GR", "GS", "GT", "GU", "GW", "GY", "HK", "HM",
    "HN", "HR", "HT", "HU", "ID", "IE", "IL", "IM", "IN", "IO", "IQ", "IR", "IS", "IT", "JE", "JM",
    "JO", "JP", "KE", "KG", "KH", "KI", "KM", "KN", "KP", "KR", "KW", "KY", "KZ", "LA", "LB", "LC",
    "LI", "LK", "LR", "LS", "LT", "LU", "LV", "LY", "MA", "MC", "MD", "ME", "MF", "MG", "MH", "MK",
    "ML", "MM", "MN", "MO", "MP", "MQ", "MR", "MS", "MT", "MU", "MV", "MW", "MX", "MY", "MZ", "NA",
    "NC", "NE", "NF", "NG", "NI", "NL", "NO", "NP", "NR", "NU", "NZ", "OM", "PA", "PE", "PF", "PG",
    "PH", "PK", "PL", "PM", "PN", "PR", "PS", "PT", "PW", "PY", "QA", "RE", "RO", "RS", "RU", "RW",
    "SA", "SB", "SC", "SD", "SE", "SG", "SH", "SI", "SJ", "SK", "SL", "SM", "SN", "SO", "SR", "SS",
    "ST", "SV", "SX", "SY", "SZ", "TC", "TD", "TF", "TG", "TH", "TJ", "TK", "TL", "TM", "TN", "TO",
    "TR", "TT", "TV", "TW", "TZ", "UA", "UG", "UM", "US", "UY", "UZ", "VA", "VC", "VE", "VG", "VI",
    "VN", "VU", "WF", "WS", "YE", "YT", "ZA", "ZM", "ZW",
];

/// Display names used in country tables, mapped to their codes.
const DISPLAY_NAMES: &[(&str, &str)] = &[
    ("USA", "US"),
    ("United States", "US"),
    ("China", "CN"),
    ("South Korea", "KR"),
    ("Korea", "KR"),
    ("UK", "GB"),
    ("United Kingdom", "GB"),
    ("Japan", "JP"),
    ("Singapore", "SG"),
    ("Germany", "DE"),
    ("Switzerland", "CH"),
    ("Canada", "CA"),
    ("Australia", "AU"),
    ("France", "FR"),
    ("India", "IN"),
    ("Italy", "IT"),
    ("Spain", "ES"),
    ("Netherlands", "NL"),
    ("Sweden", "SE"),
    ("Brazil", "BR"),
    ("Denmark", "DK"),
    ("Greece", "GR"),
    ("Austria", "AT"),
    ("Belgium", "BE"),
    ("Poland", "PL"),
    ("Portugal", "PT"),
    ("Finland", "FI"),
    ("Norway", "NO"),
    ("Ireland", "IE"),
    ("Czechia", "CZ"),
    ("Czech Republic", "CZ"),
    ("Hungary", "HU"),
    ("Romania", "RO"),
    ("Bulgaria", "BG"),
    ("Croatia", "HR"),
    ("Slovakia", "SK"),
    ("Slovenia", "SI"),
    ("Lithuania", "LT"),
    ("Latvia", "LV"),
    ("Estonia", "EE"),
    ("Luxembourg", "LU"),
    ("Cyprus", "CY"),
    ("Malta", "MT"),
];

/// The 27 member states of the European Union.
pub const EU27: [&str; 27] = [
    "AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GR", "HR", "HU", "IE", "IT",
    "LT", "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK",
];

/// Name of the built-in EU aggregate.
pub const EU_AGGREGATE: &str = "EU";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid country code {0:?}: expected an ISO 3166-1 alpha-2 code")]
pub struct InvalidCountryCode(pub String);

/// An ISO 3166-1 alpha-2 country code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn as_str(&self) -> &str {
        // Always two ASCII uppercase letters.
        std::str::from_utf8(&self.0).expect("ascii")
    }

    /// Resolves either a code ("US") or a known display name ("USA", case-insensitive).
    pub fn from_name_or_code(s: &str) -> Result<Self, InvalidCountryCode> {
        if let Ok(code) = s.parse() {
            return Ok(code);
        }
        DISPLAY_NAMES
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(s.trim()))
            .map(|(_, code)| code.parse().expect("table holds valid codes"))
            .ok_or_else(|| InvalidCountryCode(s.to_string()))
    }

    /// The preferred display name, if one is known.
    pub fn display_name(&self) -> Option<&'static str> {
        DISPLAY_NAMES
            .iter()
            .find(|(_, code)| *code == self.as_str())
            .map(|(name, _)| *name)
    }
}

impl FromStr for CountryCode {
    type Err = InvalidCountryCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if ISO_ALPHA2.binary_search(&s).is_ok() {
            let b = s.as_bytes();
            Ok(CountryCode([b[0], b[1]]))
        } else {
            Err(InvalidCountryCode(s.to_string()))
        }
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Returns true when `name` is an assigned code or a known display name.
pub fn is_country_name(name: &str) -> bool {
    CountryCode::from_name_or_code(name).is_ok()
}

pub fn eu27() -> BTreeSet<CountryCode> {
    EU27.iter().map(|c| c.parse().expect("valid")).collect()
}

/// Joins codes with `;`, the separator used by every CSV surface.
pub fn join_codes<'a>(codes: impl IntoIterator<Item = &'a CountryCode>) -> String {
    codes
        .into_iter()
        .map(CountryCode::as_str)
        .collect::<Vec<_>>()
        .join(";")
}
