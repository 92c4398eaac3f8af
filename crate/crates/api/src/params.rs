//! Strict query-string handling: every endpoint declares the parameters it
//! understands and anything else, or any repeated key, is a 400.

use std::collections::BTreeMap;
use std::str::FromStr;

use newsky_core::timefmt::{self, Window};

use crate::ApiError;

#[derive(Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn parse(raw: Option<&str>, allowed: &[&str]) -> Result<Self, ApiError> {
        let mut values = BTreeMap::new();
        for (key, value) in url::form_urlencoded::parse(raw.unwrap_or("").as_bytes()) {
            if !allowed.contains(&key.as_ref()) {
                return Err(ApiError::BadRequest(format!("unknown query parameter {key:?}")));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ApiError::BadRequest(format!("query parameter {key:?} given more than once")));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>, ApiError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|raw| raw.parse::<T>().map_err(|e| ApiError::BadRequest(format!("{key}: {e}")))).transpose()
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T, ApiError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn time(&self, key: &str) -> Result<Option<chrono::DateTime<chrono::Utc>>, ApiError> {
        self.get(key)
            .map(|raw| timefmt::parse(raw).map_err(|_| ApiError::BadRequest(format!("{key}: not an RFC 3339 time"))))
            .transpose()
    }

    /// `window=all` or `window=<from>/<to>`; absent means everything.
    pub fn window(&self) -> Result<Window, ApiError> {
        match self.get("window") {
            Some(raw) => Window::parse(raw).map_err(|e| ApiError::BadRequest(e.to_string())),
            None => Ok(Window::All),
        }
    }
}
