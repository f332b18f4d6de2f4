use chrono::NaiveDate;

use crate::error::{Error, Result};

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

/// Parses a `YYMMDDHH` stamp into hours elapsed since 2000-01-01 00:00.
pub fn parse_hour_stamp(stamp: &str) -> Result<i64> {
    let bad = || Error::HourStamp(stamp.to_string());
    let s = stamp.trim();
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let num = |r: std::ops::Range<usize>| s[r].parse::<u32>().map_err(|_| bad());
    let (yy, mm, dd, hh) = (num(0..2)?, num(2..4)?, num(4..6)?, num(6..8)?);
    if hh > 23 {
        return Err(bad());
    }
    let date = NaiveDate::from_ymd_opt(2000 + yy as i32, mm, dd).ok_or_else(bad)?;
    Ok((date - epoch()).num_days() * 24 + hh as i64)
}

/// Inverse of [`parse_hour_stamp`].
pub fn format_hour_stamp(hours: i64) -> String {
    let date = epoch() + chrono::Duration::days(hours.div_euclid(24));
    let hh = hours.rem_euclid(24);
    format!("{}{:02}", date.format("%y%m%d"), hh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consecutive_stamps_cross_midnight() {
        let a = parse_hour_stamp("14102123").unwrap();
        let b = parse_hour_stamp("14102200").unwrap();
        assert_eq!(b - a, 1);
        assert_eq!(format_hour_stamp(b), "14102200");
    }

    #[test]
    fn rejects_malformed() {
        for s in ["1410210", "14102124", "14133100", "abcdefgh"] {
            assert!(parse_hour_stamp(s).is_err(), "{s}");
        }
    }
}
