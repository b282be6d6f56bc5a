//! Atom labels, order keys and interval expansion for characteristic values.
//!
//! Ordered characteristics carry an [`OrderKey`] that says how their atom
//! labels compare. Intervals written as `start..end` (inclusive) expand to the
//! explicit list of atoms they cover at the declared resolution.

use std::cmp::Ordering;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper limit on the number of atoms a single interval may expand to.
pub const MAX_INTERVAL_ATOMS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Ordered,
    Categorical,
}

/// How atoms of an ordered characteristic are compared and enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKey {
    /// Signed integers, e.g. age in years.
    Integer,
    /// `YYYY`
    DateYear,
    /// `YYYY-MM`
    DateMonth,
    /// `YYYY-MM-DD`
    DateDay,
    /// Order given by the declaration's atom list.
    Declared,
}

impl OrderKey {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "integer" => OrderKey::Integer,
            "date-year" | "year" => OrderKey::DateYear,
            "date-month" | "month" => OrderKey::DateMonth,
            "date-day" | "day" => OrderKey::DateDay,
            "declared" => OrderKey::Declared,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OrderKey::Integer => "integer",
            OrderKey::DateYear => "date-year",
            OrderKey::DateMonth => "date-month",
            OrderKey::DateDay => "date-day",
            OrderKey::Declared => "declared",
        }
    }
}

/// Sort key of an atom under an order key. Only keys from the same order key
/// are comparable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AtomKey {
    Int(i64),
    Day(NaiveDate),
    Position(usize),
}

/// Parses one atom label into its sort key and canonical spelling.
///
/// `declared` is consulted only for [`OrderKey::Declared`].
pub fn parse_atom(order: OrderKey, raw: &str, declared: &[String]) -> Result<(AtomKey, String)> {
    let s = raw.trim();
    match order {
        OrderKey::Integer => {
            let v: i64 = s
                .parse()
                .map_err(|_| Error::format(format!("`{s}` is not an integer")))?;
            Ok((AtomKey::Int(v), v.to_string()))
        }
        OrderKey::DateYear => {
            let y = parse_year(s)?;
            Ok((AtomKey::Int(y as i64), format!("{y:04}")))
        }
        OrderKey::DateMonth => {
            let (y, m) = s
                .split_once('-')
                .ok_or_else(|| Error::format(format!("`{s}` is not a YYYY-MM month")))?;
            let y = parse_year(y)?;
            let m: u32 = m
                .parse()
                .ok()
                .filter(|m| (1..=12).contains(m))
                .ok_or_else(|| Error::format(format!("`{s}` has an invalid month")))?;
            let d = NaiveDate::from_ymd_opt(y, m, 1)
                .ok_or_else(|| Error::format(format!("`{s}` is out of range")))?;
            Ok((AtomKey::Day(d), format!("{y:04}-{m:02}")))
        }
        OrderKey::DateDay => {
            let d = NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|_| Error::format(format!("`{s}` is not a YYYY-MM-DD date")))?;
            Ok((AtomKey::Day(d), d.format("%Y-%m-%d").to_string()))
        }
        OrderKey::Declared => declared
            .iter()
            .position(|a| a == s)
            .map(|p| (AtomKey::Position(p), s.to_string()))
            .ok_or_else(|| Error::format(format!("`{s}` is not a declared atom"))),
    }
}

fn parse_year(s: &str) -> Result<i32> {
    if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::format(format!("`{s}` is not a four-digit year")));
    }
    Ok(s.parse().expect("four ascii digits"))
}

/// Compares two canonical atoms of an ordered characteristic.
pub fn compare_atoms(order: OrderKey, a: &str, b: &str, declared: &[String]) -> Ordering {
    match (parse_atom(order, a, declared), parse_atom(order, b, declared)) {
        (Ok((ka, _)), Ok((kb, _))) => ka.cmp(&kb),
        _ => a.cmp(b),
    }
}

/// Expands one token of a reported range into canonical atoms.
///
/// On ordered characteristics `start..end` is an inclusive interval; anything
/// else is a single atom. Categorical tokens are taken verbatim (trimmed).
pub fn expand_token(
    kind: Kind,
    order: Option<OrderKey>,
    token: &str,
    declared: &[String],
) -> Result<Vec<String>> {
    let token = token.trim();
    if token.is_empty() {
        return Err(Error::format("empty atom"));
    }
    let order = match (kind, order) {
        (Kind::Categorical, _) => return Ok(vec![token.to_string()]),
        (Kind::Ordered, Some(o)) => o,
        (Kind::Ordered, None) => {
            return Err(Error::format("ordered characteristic has no order key"))
        }
    };
    let Some((lo, hi)) = token.split_once("..") else {
        return Ok(vec![parse_atom(order, token, declared)?.1]);
    };
    let (klo, _) = parse_atom(order, lo, declared)?;
    let (khi, _) = parse_atom(order, hi, declared)?;
    if klo > khi {
        return Err(Error::format(format!("interval `{token}` runs backwards")));
    }
    let too_long = || {
        Error::format(format!(
            "interval `{token}` covers more than {MAX_INTERVAL_ATOMS} atoms"
        ))
    };
    match (order, klo, khi) {
        (OrderKey::Integer, AtomKey::Int(a), AtomKey::Int(b)) => {
            if (b as i128 - a as i128) >= MAX_INTERVAL_ATOMS as i128 {
                return Err(too_long());
            }
            Ok((a..=b).map(|v| v.to_string()).collect())
        }
        (OrderKey::DateYear, AtomKey::Int(a), AtomKey::Int(b)) => {
            Ok((a..=b).map(|v| format!("{v:04}")).collect())
        }
        (OrderKey::DateMonth, AtomKey::Day(a), AtomKey::Day(b)) => {
            let months = (b.year() - a.year()) as i64 * 12 + b.month() as i64 - a.month() as i64;
            if months >= MAX_INTERVAL_ATOMS as i64 {
                return Err(too_long());
            }
            let mut out = Vec::with_capacity(months as usize + 1);
            let (mut y, mut m) = (a.year(), a.month());
            for _ in 0..=months {
                out.push(format!("{y:04}-{m:02}"));
                m += 1;
                if m > 12 {
                    m = 1;
                    y += 1;
                }
            }
            Ok(out)
        }
        (OrderKey::DateDay, AtomKey::Day(a), AtomKey::Day(b)) => {
            if (b - a).num_days() >= MAX_INTERVAL_ATOMS as i64 {
                return Err(too_long());
            }
            Ok(a.iter_days()
                .take_while(|d| *d <= b)
                .map(|d| d.format("%Y-%m-%d").to_string())
                .collect())
        }
        (OrderKey::Declared, AtomKey::Position(a), AtomKey::Position(b)) => {
            Ok(declared[a..=b].to_vec())
        }
        _ => unreachable!("parse_atom returns keys matching the order key"),
    }
}
