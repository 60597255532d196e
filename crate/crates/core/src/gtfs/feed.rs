use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::{
    Calendar, CalendarDate, Feed, Frequency, GtfsError, Route, ServiceException, Stop, StopTime,
    Transfer, Trip,
};
use crate::geodata::GeoPoint;

type Result<T> = std::result::Result<T, GtfsError>;

/// One data row of a GTFS table, addressed by column name.
struct Row<'a> {
    file: &'static str,
    line: u64,
    columns: &'a HashMap<String, usize>,
    record: &'a csv::StringRecord,
}

impl<'a> Row<'a> {
    /// Non-empty value of an optional column.
    fn get(&self, column: &str) -> Option<&'a str> {
        let idx = *self.columns.get(column)?;
        self.record.get(idx).filter(|v| !v.is_empty())
    }

    fn require(&self, column: &str) -> Result<&'a str> {
        self.get(column)
            .ok_or_else(|| self.malformed(format!("missing value for `{column}`")))
    }

    fn malformed(&self, message: impl Into<String>) -> GtfsError {
        GtfsError::Malformed {
            file: self.file.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn unknown(&self, kind: &'static str, id: &str) -> GtfsError {
        GtfsError::UnknownReference {
            file: self.file.to_string(),
            line: self.line,
            kind,
            id: id.to_string(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, column: &str, value: &str) -> Result<T> {
        value
            .parse()
            .map_err(|_| self.malformed(format!("invalid `{column}` value `{value}`")))
    }

    fn time(&self, column: &str) -> Result<Option<u32>> {
        self.get(column)
            .map(|v| {
                parse_time(v).ok_or_else(|| self.malformed(format!("malformed time `{v}` in `{column}`")))
            })
            .transpose()
    }

    fn date(&self, column: &str) -> Result<NaiveDate> {
        let v = self.require(column)?;
        NaiveDate::parse_from_str(v, "%Y%m%d")
            .map_err(|_| self.malformed(format!("malformed date `{v}` in `{column}`")))
    }
}

/// Streams the rows of `dir/file`. Returns `Ok(false)` if the file is absent.
fn for_each_row(
    dir: &Path,
    file: &'static str,
    mut visit: impl FnMut(&Row<'_>) -> Result<()>,
) -> Result<bool> {
    let path = dir.join(file);
    if !path.exists() {
        return Ok(false);
    }
    let bytes = fs::read(&path).map_err(|source| GtfsError::Io {
        file: file.to_string(),
        source,
    })?;
    let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&bytes);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body);
    let csv_err = |source| GtfsError::Csv {
        file: file.to_string(),
        source,
    };
    let columns: HashMap<String, usize> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(csv_err)? {
        let line = record.position().map_or(0, |p| p.line());
        visit(&Row {
            file,
            line,
            columns: &columns,
            record: &record,
        })?;
    }
    Ok(true)
}

fn require_file(dir: &Path, file: &str) -> Result<()> {
    if dir.join(file).exists() {
        Ok(())
    } else {
        Err(GtfsError::MissingFile {
            file: file.to_string(),
            dir: dir.to_path_buf(),
        })
    }
}

/// Parses `H:MM:SS` / `HH:MM:SS` into seconds; hours may exceed 23.
pub fn parse_time(s: &str) -> Option<u32> {
    let mut parts = s.trim().split(':');
    let (h, m, sec) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || h.is_empty() || m.len() != 2 || sec.len() != 2 {
        return None;
    }
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !digits(h) || !digits(m) || !digits(sec) {
        return None;
    }
    let (h, m, sec): (u32, u32, u32) = (h.parse().ok()?, m.parse().ok()?, sec.parse().ok()?);
    if m >= 60 || sec >= 60 {
        return None;
    }
    h.checked_mul(3600)?.checked_add(m * 60 + sec)
}

pub fn format_time(t: u32) -> String {
    format!("{:02}:{:02}:{:02}", t / 3600, t / 60 % 60, t % 60)
}

/// Reads a GTFS directory. Requires `stops.txt`, `routes.txt`, `trips.txt`,
/// `stop_times.txt` and at least one of `calendar.txt` /
/// `calendar_dates.txt`.
pub fn parse_feed(dir: &Path) -> Result<Feed> {
    for file in ["stops.txt", "routes.txt", "trips.txt", "stop_times.txt"] {
        require_file(dir, file)?;
    }
    if !dir.join("calendar.txt").exists() && !dir.join("calendar_dates.txt").exists() {
        return Err(GtfsError::MissingFile {
            file: "calendar.txt".to_string(),
            dir: dir.to_path_buf(),
        });
    }

    let mut feed = Feed::default();

    let mut stop_ids = HashSet::new();
    for_each_row(dir, "stops.txt", |row| {
        let id = row.require("stop_id")?;
        // Stations and entrances without coordinates cannot be routed to.
        let (Some(lat), Some(lon)) = (row.get("stop_lat"), row.get("stop_lon")) else {
            return Ok(());
        };
        let lat: f64 = row.parse("stop_lat", lat)?;
        let lon: f64 = row.parse("stop_lon", lon)?;
        let location = GeoPoint::new(lat, lon).map_err(|e| row.malformed(e.to_string()))?;
        if !stop_ids.insert(id.to_string()) {
            return Err(row.malformed(format!("duplicate stop_id `{id}`")));
        }
        feed.stops.push(Stop {
            id: id.to_string(),
            name: row.get("stop_name").unwrap_or_default().to_string(),
            location,
        });
        Ok(())
    })?;

    let mut route_ids = HashSet::new();
    for_each_row(dir, "routes.txt", |row| {
        let id = row.require("route_id")?;
        if !route_ids.insert(id.to_string()) {
            return Err(row.malformed(format!("duplicate route_id `{id}`")));
        }
        let route_type = row.parse("route_type", row.require("route_type")?)?;
        feed.routes.push(Route {
            id: id.to_string(),
            short_name: row.get("route_short_name").unwrap_or_default().to_string(),
            long_name: row.get("route_long_name").unwrap_or_default().to_string(),
            route_type,
        });
        Ok(())
    })?;

    let mut trip_ids = HashSet::new();
    for_each_row(dir, "trips.txt", |row| {
        let id = row.require("trip_id")?;
        let route_id = row.require("route_id")?;
        if !route_ids.contains(route_id) {
            return Err(row.unknown("route", route_id));
        }
        if !trip_ids.insert(id.to_string()) {
            return Err(row.malformed(format!("duplicate trip_id `{id}`")));
        }
        feed.trips.push(Trip {
            id: id.to_string(),
            route_id: route_id.to_string(),
            service_id: row.require("service_id")?.to_string(),
        });
        Ok(())
    })?;

    for_each_row(dir, "stop_times.txt", |row| {
        let trip_id = row.require("trip_id")?;
        if !trip_ids.contains(trip_id) {
            return Err(row.unknown("trip", trip_id));
        }
        let stop_id = row.require("stop_id")?;
        if !stop_ids.contains(stop_id) {
            return Err(row.unknown("stop", stop_id));
        }
        let shape_dist_traveled = row
            .get("shape_dist_traveled")
            .map(|v| row.parse("shape_dist_traveled", v))
            .transpose()?;
        feed.stop_times.push(StopTime {
            trip_id: trip_id.to_string(),
            arrival: row.time("arrival_time")?,
            departure: row.time("departure_time")?,
            stop_id: stop_id.to_string(),
            stop_sequence: row.parse("stop_sequence", row.require("stop_sequence")?)?,
            shape_dist_traveled,
        });
        Ok(())
    })?;

    const DAYS: [&str; 7] = [
        "monday",
        "tuesday",
        "wednesday",
        "thursday",
        "friday",
        "saturday",
        "sunday",
    ];
    for_each_row(dir, "calendar.txt", |row| {
        let mut weekdays = [false; 7];
        for (flag, day) in weekdays.iter_mut().zip(DAYS) {
            *flag = match row.require(day)? {
                "1" => true,
                "0" => false,
                other => return Err(row.malformed(format!("invalid `{day}` value `{other}`"))),
            };
        }
        feed.calendars.push(Calendar {
            service_id: row.require("service_id")?.to_string(),
            weekdays,
            start_date: row.date("start_date")?,
            end_date: row.date("end_date")?,
        });
        Ok(())
    })?;

    for_each_row(dir, "calendar_dates.txt", |row| {
        let exception = match row.require("exception_type")? {
            "1" => ServiceException::Added,
            "2" => ServiceException::Removed,
            other => return Err(row.malformed(format!("invalid exception_type `{other}`"))),
        };
        feed.calendar_dates.push(CalendarDate {
            service_id: row.require("service_id")?.to_string(),
            date: row.date("date")?,
            exception,
        });
        Ok(())
    })?;

    for_each_row(dir, "transfers.txt", |row| {
        let from = row.require("from_stop_id")?;
        let to = row.require("to_stop_id")?;
        for id in [from, to] {
            if !stop_ids.contains(id) {
                return Err(row.unknown("stop", id));
            }
        }
        feed.transfers.push(Transfer {
            from_stop_id: from.to_string(),
            to_stop_id: to.to_string(),
            transfer_type: row
                .get("transfer_type")
                .map(|v| row.parse("transfer_type", v))
                .transpose()?
                .unwrap_or(0),
            min_transfer_time: row
                .get("min_transfer_time")
                .map(|v| row.parse("min_transfer_time", v))
                .transpose()?,
        });
        Ok(())
    })?;

    for_each_row(dir, "frequencies.txt", |row| {
        let trip_id = row.require("trip_id")?;
        if !trip_ids.contains(trip_id) {
            return Err(row.unknown("trip", trip_id));
        }
        let headway_s: u32 = row.parse("headway_secs", row.require("headway_secs")?)?;
        if headway_s == 0 {
            return Err(row.malformed("headway_secs must be positive"));
        }
        feed.frequencies.push(Frequency {
            trip_id: trip_id.to_string(),
            start_time: row.time("start_time")?.ok_or_else(|| row.malformed("missing start_time"))?,
            end_time: row.time("end_time")?.ok_or_else(|| row.malformed("missing end_time"))?,
            headway_s,
            exact_times: row.get("exact_times") == Some("1"),
        });
        Ok(())
    })?;

    Ok(feed)
}

fn write_table<const N: usize>(
    dir: &Path,
    file: &'static str,
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    let csv_err = |source| GtfsError::Csv {
        file: file.to_string(),
        source,
    };
    let mut writer = csv::Writer::from_path(dir.join(file)).map_err(csv_err)?;
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| GtfsError::Io {
        file: file.to_string(),
        source,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the feed as a GTFS directory (created if needed). Output is a
/// pure function of the feed contents.
pub fn write_feed(feed: &Feed, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| GtfsError::Io {
        file: dir.display().to_string(),
        source,
    })?;
    write_table(
        dir,
        "agency.txt",
        ["agency_id", "agency_name", "agency_url", "agency_timezone"],
        [[
            "synthetic".to_string(),
            "Synthetic Transit".to_string(),
            "https://example.invalid".to_string(),
            "UTC".to_string(),
        ]],
    )?;
    write_table(
        dir,
        "stops.txt",
        ["stop_id", "stop_name", "stop_lat", "stop_lon"],
        feed.stops.iter().map(|s| {
            [
                s.id.clone(),
                s.name.clone(),
                s.location.lat.to_string(),
                s.location.lon.to_string(),
            ]
        }),
    )?;
    write_table(
        dir,
        "routes.txt",
        ["route_id", "agency_id", "route_short_name", "route_long_name", "route_type"],
        feed.routes.iter().map(|r| {
            [
                r.id.clone(),
                "synthetic".to_string(),
                r.short_name.clone(),
                r.long_name.clone(),
                r.route_type.to_string(),
            ]
        }),
    )?;
    write_table(
        dir,
        "trips.txt",
        ["route_id", "service_id", "trip_id"],
        feed.trips
            .iter()
            .map(|t| [t.route_id.clone(), t.service_id.clone(), t.id.clone()]),
    )?;
    write_table(
        dir,
        "stop_times.txt",
        [
            "trip_id",
            "arrival_time",
            "departure_time",
            "stop_id",
            "stop_sequence",
            "shape_dist_traveled",
        ],
        feed.stop_times.iter().map(|st| {
            [
                st.trip_id.clone(),
                opt(st.arrival.map(format_time)),
                opt(st.departure.map(format_time)),
                st.stop_id.clone(),
                st.stop_sequence.to_string(),
                opt(st.shape_dist_traveled),
            ]
        }),
    )?;
    if !feed.calendars.is_empty() {
        write_table(
            dir,
            "calendar.txt",
            [
                "service_id",
                "monday",
                "tuesday",
                "wednesday",
                "thursday",
                "friday",
                "saturday",
                "sunday",
                "start_date",
                "end_date",
            ],
            feed.calendars.iter().map(|c| {
                let d = |i: usize| if c.weekdays[i] { "1" } else { "0" }.to_string();
                [
                    c.service_id.clone(),
                    d(0),
                    d(1),
                    d(2),
                    d(3),
                    d(4),
                    d(5),
                    d(6),
                    c.start_date.format("%Y%m%d").to_string(),
                    c.end_date.format("%Y%m%d").to_string(),
                ]
            }),
        )?;
    }
    if !feed.calendar_dates.is_empty() {
        write_table(
            dir,
            "calendar_dates.txt",
            ["service_id", "date", "exception_type"],
            feed.calendar_dates.iter().map(|c| {
                [
                    c.service_id.clone(),
                    c.date.format("%Y%m%d").to_string(),
                    match c.exception {
                        ServiceException::Added => "1",
                        ServiceException::Removed => "2",
                    }
                    .to_string(),
                ]
            }),
        )?;
    }
    if !feed.transfers.is_empty() {
        write_table(
            dir,
            "transfers.txt",
            ["from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time"],
            feed.transfers.iter().map(|t| {
                [
                    t.from_stop_id.clone(),
                    t.to_stop_id.clone(),
                    t.transfer_type.to_string(),
                    opt(t.min_transfer_time),
                ]
            }),
        )?;
    }
    if !feed.frequencies.is_empty() {
        write_table(
            dir,
            "frequencies.txt",
            ["trip_id", "start_time", "end_time", "headway_secs", "exact_times"],
            feed.frequencies.iter().map(|f| {
                [
                    f.trip_id.clone(),
                    format_time(f.start_time),
                    format_time(f.end_time),
                    f.headway_s.to_string(),
                    if f.exact_times { "1" } else { "0" }.to_string(),
                ]
            }),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, file: &str, body: &str) {
        fs::write(dir.join(file), body).unwrap();
    }

    fn minimal_feed(dir: &Path) {
        write(dir, "stops.txt", "stop_id,stop_name,stop_lat,stop_lon\nA,Alpha,45.0,7.0\nB,Beta,45.01,7.0\n");
        write(dir, "routes.txt", "route_id,route_short_name,route_long_name,route_type\nR1,1,One,3\n");
        write(dir, "trips.txt", "route_id,service_id,trip_id\nR1,WK,T1\n");
        write(
            dir,
            "stop_times.txt",
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\nT1,8:00:00,8:00:00,A,1\nT1,25:10:00,25:10:00,B,2\n",
        );
        write(
            dir,
            "calendar.txt",
            "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\nWK,1,1,1,1,1,0,0,20240101,20241231\n",
        );
    }

    #[test]
    fn time_parsing() {
        assert_eq!(parse_time("8:00:00"), Some(28_800));
        assert_eq!(parse_time("08:10:00"), Some(29_400));
        assert_eq!(parse_time("25:10:00"), Some(90_600));
        assert_eq!(parse_time(" 100:00:01 "), Some(360_001));
        for bad in ["", "8:00", "8:60:00", "8:00:5", "a:00:00", "8:00:00:00", "-1:00:00"] {
            assert_eq!(parse_time(bad), None, "{bad}");
        }
        assert_eq!(format_time(90_600), "25:10:00");
    }

    #[test]
    fn parses_minimal_feed() {
        let dir = tempfile::tempdir().unwrap();
        minimal_feed(dir.path());
        let feed = parse_feed(dir.path()).unwrap();
        assert_eq!(feed.routes.len(), 1);
        assert_eq!(feed.stops.len(), 2);
        assert_eq!(feed.stop_times.len(), 2);
        assert_eq!(feed.stop_times[1].arrival, Some(90_600));
        assert!(feed.calendars[0].weekdays[2]);
        assert!(!feed.calendars[0].weekdays[6]);
    }

    #[test]
    fn tolerates_bom_and_whitespace() {
        let dir = tempfile::tempdir().unwrap();
        minimal_feed(dir.path());
        write(
            dir.path(),
            "stops.txt",
            "\u{feff}stop_id, stop_name ,stop_lat,stop_lon\nA,Alpha, 45.0 ,7.0\nB,Beta,45.01,7.0\n",
        );
        let feed = parse_feed(dir.path()).unwrap();
        assert_eq!(feed.stops[0].id, "A");
        assert_eq!(feed.stops[0].location.lat, 45.0);
    }

    #[test]
    fn missing_stop_times_is_named() {
        let dir = tempfile::tempdir().unwrap();
        minimal_feed(dir.path());
        fs::remove_file(dir.path().join("stop_times.txt")).unwrap();
        let err = parse_feed(dir.path()).unwrap_err();
        assert!(matches!(&err, GtfsError::MissingFile { file, .. } if file == "stop_times.txt"));
        assert!(err.to_string().contains("stop_times.txt"));
    }

    #[test]
    fn malformed_time_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        minimal_feed(dir.path());
        write(
            dir.path(),
            "stop_times.txt",
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\nT1,8:00:00,8:00:00,A,1\nT1,8:7:00,8:07:00,B,2\n",
        );
        match parse_feed(dir.path()).unwrap_err() {
            GtfsError::Malformed { file, line, message } => {
                assert_eq!(file, "stop_times.txt");
                assert_eq!(line, 3);
                assert!(message.contains("8:7:00"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_references_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        minimal_feed(dir.path());
        write(
            dir.path(),
            "stop_times.txt",
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\nT1,8:00:00,8:00:00,Z,1\n",
        );
        assert!(matches!(
            parse_feed(dir.path()),
            Err(GtfsError::UnknownReference { kind: "stop", line: 2, .. })
        ));

        minimal_feed(dir.path());
        write(
            dir.path(),
            "stop_times.txt",
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\nT9,8:00:00,8:00:00,A,1\n",
        );
        assert!(matches!(
            parse_feed(dir.path()),
            Err(GtfsError::UnknownReference { kind: "trip", .. })
        ));

        minimal_feed(dir.path());
        write(dir.path(), "trips.txt", "route_id,service_id,trip_id\nR7,WK,T1\n");
        assert!(matches!(
            parse_feed(dir.path()),
            Err(GtfsError::UnknownReference { kind: "route", file, .. }) if file == "trips.txt"
        ));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        minimal_feed(dir.path());
        write(
            dir.path(),
            "frequencies.txt",
            "trip_id,start_time,end_time,headway_secs,exact_times\nT1,07:00:00,09:00:00,600,0\n",
        );
        write(
            dir.path(),
            "transfers.txt",
            "from_stop_id,to_stop_id,transfer_type,min_transfer_time\nA,B,2,180\n",
        );
        write(dir.path(), "calendar_dates.txt", "service_id,date,exception_type\nWK,20240106,1\n");
        let feed = parse_feed(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_feed(&feed, out.path()).unwrap();
        assert_eq!(parse_feed(out.path()).unwrap(), feed);
    }
}
