//! Solar-term calendar: computes the instants at which the sun's apparent
//! ecliptic longitude crosses each term's target longitude, converts them to
//! Beijing civil time (UTC+8), and aligns them with a trading calendar.
//!
//! The longitude model is the low-accuracy analytic solar theory (geometric
//! mean longitude plus equation of center plus nutation/aberration
//! correction). Its error stays well under 0.01°, which places term
//! instants to better than a quarter hour — far finer than the date-level
//! resolution the calendar analyses need.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of solar terms in a year.
pub const TERM_COUNT: usize = 24;

/// Offset of Beijing civil time from UTC, in hours. Historical DST
/// (1986-1991) is deliberately ignored; see [`TermEvent::near_midnight`].
pub const UTC_OFFSET_HOURS: i64 = 8;

/// Supported year range of the analytic ephemeris.
pub const YEAR_MIN: i32 = 1900;
pub const YEAR_MAX: i32 = 2100;

const J2000: f64 = 2451545.0;
/// Mean solar motion in degrees per day (360° / 365.25 d).
const MEAN_MOTION: f64 = 360.0 / 365.25;

/// Pinyin names indexed by `order - 1`, in solar-calendar order
/// (order 1 = Xiaohan in early January).
pub const TERM_NAMES: [&str; TERM_COUNT] = [
    "Xiaohan",
    "Dahan",
    "Lichun",
    "Yushui",
    "Jingzhe",
    "Chunfen",
    "Qingming",
    "Guyu",
    "Lixia",
    "Xiaoman",
    "Mangzhong",
    "Xiazhi",
    "Xiaoshu",
    "Dashu",
    "Liqiu",
    "Chushu",
    "Bailu",
    "Qiufen",
    "Hanlu",
    "Shuangjiang",
    "Lidong",
    "Xiaoxue",
    "Daxue",
    "Dongzhi",
];

/// Expected calendar date range (month, day)..=(month, day) for each term,
/// indexed by `order - 1`. Two entries in the published chronology carry
/// obvious typos (Xiaoman's start month, Dongzhi's end day); they are
/// corrected here, and validation additionally expands every range by one
/// day on each side.
pub const TERM_DATE_RANGES: [((u32, u32), (u32, u32)); TERM_COUNT] = [
    ((1, 5), (1, 7)),
    ((1, 20), (1, 21)),
    ((2, 3), (2, 5)),
    ((2, 18), (2, 20)),
    ((3, 5), (3, 7)),
    ((3, 20), (3, 22)),
    ((4, 4), (4, 6)),
    ((4, 19), (4, 21)),
    ((5, 5), (5, 7)),
    ((5, 20), (5, 22)),
    ((6, 5), (6, 7)),
    ((6, 21), (6, 22)),
    ((7, 6), (7, 8)),
    ((7, 22), (7, 24)),
    ((8, 7), (8, 9)),
    ((8, 22), (8, 24)),
    ((9, 7), (9, 9)),
    ((9, 22), (9, 24)),
    ((10, 8), (10, 9)),
    ((10, 23), (10, 24)),
    ((11, 7), (11, 8)),
    ((11, 22), (11, 23)),
    ((12, 6), (12, 8)),
    ((12, 20), (12, 21)),
];

/// One of the 24 solar terms, identified by its order in the solar year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolarTerm {
    pub order: u8,
}

impl SolarTerm {
    pub fn new(order: u8) -> Result<Self> {
        if (1..=TERM_COUNT as u8).contains(&order) {
            Ok(SolarTerm { order })
        } else {
            Err(Error::BadTermOrder(order))
        }
    }

    pub fn name(&self) -> &'static str {
        TERM_NAMES[(self.order - 1) as usize]
    }

    /// Target apparent solar longitude in degrees: term 1 anchors at 285°
    /// and each subsequent term adds 15°, so the equinox/solstice terms
    /// (6, 12, 18, 24) land on 0°, 90°, 180°, 270°.
    pub fn target_longitude(&self) -> f64 {
        (285.0 + 15.0 * f64::from(self.order - 1)) % 360.0
    }

    pub fn all() -> impl Iterator<Item = SolarTerm> {
        (1..=TERM_COUNT as u8).map(|order| SolarTerm { order })
    }
}

/// One solar-term occurrence in a specific year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermEvent {
    pub term: SolarTerm,
    /// Gregorian year the event belongs to.
    pub year: i32,
    /// Instant of the longitude crossing in Beijing civil time (UTC+8).
    pub instant: NaiveDateTime,
    /// The instant's local date when it is a trading day, otherwise `None`.
    /// Filled by [`align_terms`]; never substituted by a nearby day.
    pub trading_day: Option<NaiveDate>,
}

impl TermEvent {
    pub fn local_date(&self) -> NaiveDate {
        self.instant.date()
    }

    /// True when the instant falls within one hour of local midnight, where
    /// the ignored 1986-1991 DST could in principle shift the local date.
    pub fn near_midnight(&self) -> bool {
        let t = self.instant.time();
        t.hour() == 23 || t.hour() == 0
    }
}

/// Trading days within `radius` calendar days of one term instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWindow {
    pub event: TermEvent,
    pub radius: u32,
    /// Trading dates `d` with `|d - instant date| <= radius`, ascending.
    pub member_days: Vec<NaiveDate>,
}

/// Julian date of a UTC timestamp, valid for years 1900-2100.
pub fn julian_day(utc: NaiveDateTime) -> Result<f64> {
    let year = utc.year();
    if !(YEAR_MIN..=YEAR_MAX).contains(&year) {
        return Err(Error::YearOutOfRange(year));
    }
    Ok(julian_day_unchecked(utc))
}

fn julian_day_unchecked(utc: NaiveDateTime) -> f64 {
    // Fliegel-Van Flandern day number, then the fractional day from noon.
    let (y, m, d) = (
        i64::from(utc.year()),
        i64::from(utc.month()),
        i64::from(utc.day()),
    );
    let a = (14 - m) / 12;
    let y2 = y + 4800 - a;
    let m2 = m + 12 * a - 3;
    let jdn = d + (153 * m2 + 2) / 5 + 365 * y2 + y2 / 4 - y2 / 100 + y2 / 400 - 32045;
    let day_seconds = f64::from(utc.num_seconds_from_midnight())
        + f64::from(utc.nanosecond()) * 1e-9;
    jdn as f64 + (day_seconds - 43200.0) / 86400.0
}

/// Inverse of [`julian_day`]: UTC timestamp of a Julian date (to the second).
fn datetime_from_jd(jd: f64) -> NaiveDateTime {
    // Fliegel-Van Flandern inverse for the day number at the preceding noon.
    let z = (jd + 0.5).floor();
    let frac = jd + 0.5 - z;
    let mut j = z as i64 + 32044;
    let g = j / 146097;
    let dg = j % 146097;
    let c = (dg / 36524 + 1) * 3 / 4;
    let dc = dg - c * 36524;
    let b = dc / 1461;
    let db = dc % 1461;
    let a = (db / 365 + 1) * 3 / 4;
    let da = db - a * 365;
    let y = g * 400 + c * 100 + b * 4 + a;
    let m = (da * 5 + 308) / 153 - 2;
    let d = da - (m + 4) * 153 / 5 + 122;
    let year = (y - 4800 + (m + 2) / 12) as i32;
    let month = ((m + 2) % 12 + 1) as u32;
    let day = (d + 1) as u32;
    j = (frac * 86400.0).round() as i64;
    let date = NaiveDate::from_ymd_opt(year, month, day).expect("valid computed date");
    date.and_hms_opt(0, 0, 0).expect("midnight exists") + Duration::seconds(j)
}

fn jd_range() -> (f64, f64) {
    // 1900-01-01T00:00 .. 2101-01-01T00:00 UTC
    (2415020.5, 2488434.5)
}

/// Apparent solar ecliptic longitude in degrees `[0, 360)` at a Julian date.
///
/// Geometric mean longitude and mean anomaly are polynomial in Julian
/// centuries from J2000; the equation of center is a three-term sine
/// series; aberration and nutation in longitude are folded in through the
/// constant -0.00569° and the -0.00478°·sin Ω term.
pub fn solar_longitude(jd: f64) -> Result<f64> {
    let (lo, hi) = jd_range();
    if !(lo..=hi).contains(&jd) {
        return Err(Error::JulianDateOutOfRange(jd));
    }
    Ok(solar_longitude_unchecked(jd))
}

fn solar_longitude_unchecked(jd: f64) -> f64 {
    let t = (jd - J2000) / 36525.0;
    let l0 = 280.46646 + 36000.76983 * t + 0.0003032 * t * t;
    let m = (357.52911 + 35999.05029 * t - 0.0001537 * t * t).to_radians();
    let c = (1.914602 - 0.004817 * t - 0.000014 * t * t) * m.sin()
        + (0.019993 - 0.000101 * t) * (2.0 * m).sin()
        + 0.000289 * (3.0 * m).sin();
    let omega = (125.04 - 1934.136 * t).to_radians();
    let lambda = l0 + c - 0.00569 - 0.00478 * omega.sin();
    lambda.rem_euclid(360.0)
}

/// Signed angular distance from `target`, unwrapped to `[-180, 180)`.
fn longitude_offset(jd: f64, target: f64) -> f64 {
    (solar_longitude_unchecked(jd) - target + 180.0).rem_euclid(360.0) - 180.0
}

/// Instant at which the sun reaches the target longitude of `order` in
/// `year`, as a [`TermEvent`] without a trading-day alignment.
pub fn term_instant(year: i32, order: u8) -> Result<TermEvent> {
    if !(YEAR_MIN..=YEAR_MAX).contains(&year) {
        return Err(Error::YearOutOfRange(year));
    }
    let term = SolarTerm::new(order)?;
    let target = term.target_longitude();

    // Mean-motion prediction from the J2000 longitude (~280.37° on Jan 1.5
    // of 2000), pinning the crossing into the right part of the year.
    let offset_days = (target - 280.37).rem_euclid(360.0) / MEAN_MOTION;
    let predicted = J2000 + offset_days + f64::from(year - 2000) * 365.2422;

    let mut lo = predicted - 20.0;
    let mut hi = predicted + 20.0;
    let f_lo = longitude_offset(lo, target);
    let f_hi = longitude_offset(hi, target);
    // ±20 days is ±20° of arc, so both offsets stay well inside (-90°, 90°)
    // and the sign change brackets exactly one crossing.
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::RootBracketing {
            year,
            order,
            target,
        });
    }
    // Bisect to one second; the longitude error is then ~1e-8 degrees.
    while hi - lo > 1.0 / 86400.0 {
        let mid = 0.5 * (lo + hi);
        if longitude_offset(mid, target) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let jd_local = 0.5 * (lo + hi) + UTC_OFFSET_HOURS as f64 / 24.0;
    Ok(TermEvent {
        term,
        year,
        instant: datetime_from_jd(jd_local),
        trading_day: None,
    })
}

/// All term events from `start_year` through `end_year`, sorted by instant.
pub fn term_calendar(start_year: i32, end_year: i32) -> Result<Vec<TermEvent>> {
    if start_year > end_year {
        return Err(Error::Config(format!(
            "start year {start_year} after end year {end_year}"
        )));
    }
    let mut events = Vec::with_capacity(TERM_COUNT * (end_year - start_year + 1) as usize);
    for year in start_year..=end_year {
        for order in 1..=TERM_COUNT as u8 {
            events.push(term_instant(year, order)?);
        }
    }
    events.sort_by(|a, b| a.instant.cmp(&b.instant));
    Ok(events)
}

/// Fills `trading_day` on each event: the instant's local date when that
/// date is a trading day, otherwise `None`. No nearest-day substitution.
pub fn align_terms(events: &[TermEvent], trading_days: &BTreeSet<NaiveDate>) -> Vec<TermEvent> {
    events
        .iter()
        .map(|e| {
            let date = e.local_date();
            TermEvent {
                trading_day: trading_days.contains(&date).then_some(date),
                ..*e
            }
        })
        .collect()
}

/// Builds the turn-of-term windows: for each event, the trading days within
/// `radius` calendar days of the instant's local date.
///
/// Terms are at least two weeks apart, so windows of distinct terms can
/// never legitimately share a day; an overlap is reported as an error
/// because it signals a calendar bug.
pub fn window_labels(
    events: &[TermEvent],
    trading_days: &BTreeSet<NaiveDate>,
    radius: u32,
) -> Result<Vec<TermWindow>> {
    if radius > 2 {
        return Err(Error::BadRadius(radius));
    }
    let mut seen: std::collections::BTreeMap<NaiveDate, u8> = std::collections::BTreeMap::new();
    let mut windows = Vec::with_capacity(events.len());
    for event in events {
        let center = event.local_date();
        let mut member_days = Vec::new();
        for off in -(radius as i64)..=radius as i64 {
            let d = center + Duration::days(off);
            if trading_days.contains(&d) {
                if let Some(&first) = seen.get(&d) {
                    return Err(Error::WindowOverlap {
                        date: d,
                        first,
                        second: event.term.order,
                        radius,
                    });
                }
                seen.insert(d, event.term.order);
                member_days.push(d);
            }
        }
        windows.push(TermWindow {
            event: *event,
            radius,
            member_days,
        });
    }
    Ok(windows)
}

/// Renders the term calendar as CSV with header
/// `year,order,name,instant_utc8,trading_day`.
pub fn calendar_csv(events: &[TermEvent]) -> String {
    let mut out = String::from("year,order,name,instant_utc8,trading_day\n");
    for e in events {
        let trading = e
            .trading_day
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}+08:00,{}",
            e.year,
            e.term.order,
            e.term.name(),
            e.instant.format("%Y-%m-%dT%H:%M:%S"),
            trading
        );
    }
    out
}

/// True when `date` lies inside the published chronology range for the
/// term, expanded by one day on each side.
pub fn within_expected_range(order: u8, date: NaiveDate) -> bool {
    let ((sm, sd), (em, ed)) = TERM_DATE_RANGES[(order - 1) as usize];
    let year = date.year();
    let start = NaiveDate::from_ymd_opt(year, sm, sd).expect("table range valid")
        - Duration::days(1);
    let end = NaiveDate::from_ymd_opt(year, em, ed).expect("table range valid")
        + Duration::days(1);
    (start..=end).contains(&date)
}
